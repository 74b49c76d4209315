//! Built-in scenarios.

use crate::economy::ParamSet;
use crate::error::{Error, Result};

use super::config::{GridSpec, InitSpec, RunSpec, Scenario};

pub const BUILTIN_NAMES: [&str; 5] = [
    "megacity",
    "bignoise",
    "via-emilia",
    "metastability",
    "wage-profile",
];

/// Uniform start on `[0,4]^2`, baseline constants.
pub fn megacity() -> Scenario {
    Scenario {
        name: "megacity".into(),
        run: RunSpec {
            t_end: 20.0,
            snapshot_times: vec![0.0, 1.0, 5.0, 10.0, 15.0, 20.0],
            metrics_interval: 0.5,
        },
        ..Scenario::default()
    }
}

/// As `megacity` with four times the noise.
pub fn bignoise() -> Scenario {
    Scenario {
        name: "bignoise".into(),
        params: ParamSet {
            sigma: 0.2,
            ..ParamSet::default()
        },
        ..megacity()
    }
}

/// Workers start uniformly on the strip `[1,2] x [1,7]` of `[0,3] x [0,8]`.
pub fn via_emilia() -> Scenario {
    Scenario {
        name: "via-emilia".into(),
        grid: GridSpec {
            lx: 3.0,
            ly: 8.0,
            nx: 96,
            ny: 256,
        },
        init: InitSpec::Strip {
            x0: 1.0,
            x1: 2.0,
            y0: 1.0,
            y1: 7.0,
            amplitude: 0.01,
            seed: None,
        },
        run: RunSpec {
            t_end: 100.0,
            snapshot_times: vec![0.0, 10.0, 25.0, 50.0, 75.0, 100.0],
            metrics_interval: 1.0,
        },
        ..Scenario::default()
    }
}

/// Narrower spillovers (`h = 0.3`) on a coarser grid over a long horizon.
pub fn metastability() -> Scenario {
    Scenario {
        name: "metastability".into(),
        grid: GridSpec {
            lx: 4.0,
            ly: 4.0,
            nx: 64,
            ny: 64,
        },
        params: ParamSet {
            h: 0.3,
            ..ParamSet::default()
        },
        run: RunSpec {
            t_end: 1000.0,
            snapshot_times: vec![0.0, 100.0, 250.0, 500.0, 750.0, 1000.0],
            metrics_interval: 5.0,
        },
        ..Scenario::default()
    }
}

/// Static fields of a centered Epanechnikov density (`h_E = 0.4`).
pub fn wage_profile() -> Scenario {
    Scenario {
        name: "wage-profile".into(),
        init: InitSpec::Epanechnikov {
            cx: 2.0,
            cy: 2.0,
            h_e: 0.4,
        },
        run: RunSpec {
            t_end: 0.0,
            snapshot_times: vec![0.0],
            metrics_interval: 0.0,
        },
        ..Scenario::default()
    }
}

pub fn builtin(name: &str) -> Result<Scenario> {
    match name {
        "megacity" => Ok(megacity()),
        "bignoise" => Ok(bignoise()),
        "via-emilia" | "via_emilia" | "strip" => Ok(via_emilia()),
        "metastability" => Ok(metastability()),
        "wage-profile" | "wage_profile" => Ok(wage_profile()),
        other => Err(Error::config(
            "scenario",
            format!(
                "unknown scenario `{other}`; available: {}",
                BUILTIN_NAMES.join(", ")
            ),
        )),
    }
}

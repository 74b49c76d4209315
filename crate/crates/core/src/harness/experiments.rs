use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::{
    critical_cm_scan, density_distance, max_dispersion_rate, metrics_row, CriticalScan,
    DensityDistance, MetricsRow,
};
use crate::economy::ParamSet;
use crate::error::{Error, Result};
use crate::grid::{gradient, ScalarField};
use crate::kernels::discretize;
use crate::meanfield::{run, Model, Schedule, Trajectory};
use crate::microsim::{
    advance, empirical_density, spawn_births, DensityEstimate, Population, RateField,
};

use super::config::{InitSpec, Mode, Scenario};
use super::io::{
    write_csv, write_field_snapshot, write_meta, write_metrics_csv, write_positions_csv,
    write_positions_snapshot, write_welfare_csv, SnapshotMeta, VERSION,
};

pub fn build_model(s: &Scenario) -> Result<Model> {
    let grid = s.build_grid()?;
    Model::with_kernel(
        grid,
        s.params.clone(),
        s.potential(grid)?,
        s.exogenous_amenities(grid)?,
        &s.kernel_spec(),
        s.numerics,
    )
}

/// Advances agents with step `dt`, stopping exactly at each of `stops`, and
/// reports the population and its mollified density there.
pub fn simulate_agents(
    model: &Model,
    pop: &mut Population,
    dt: f64,
    stops: &[f64],
    mut observe: impl FnMut(f64, &Population, &DensityEstimate) -> Result<()>,
) -> Result<()> {
    let grid = *model.grid();
    let p = model.params();
    let rate = if model.growth().values().iter().all(|r| *r == 0.0) {
        RateField::Constant(0.0)
    } else {
        RateField::Field(model.growth().clone())
    };
    for &stop in stops {
        let tol = 1e-9 * stop.max(1.0);
        while stop - pop.time() > tol {
            let h = dt.min(stop - pop.time());
            let est = empirical_density(pop, &grid, p.lambda)?;
            let fields = model.fields(&est.density)?;
            advance(pop, &gradient(&fields.v), p, h)?;
            spawn_births(pop, &rate, h)?;
        }
        let est = empirical_density(pop, &grid, p.lambda)?;
        observe(stop, pop, &est)?;
    }
    Ok(())
}

fn output_times(s: &Scenario) -> Vec<f64> {
    let sched = s.schedule();
    let mut t: Vec<f64> = sched.snapshot_times.clone();
    if sched.metrics_interval > 0.0 {
        let n = (sched.t_end / sched.metrics_interval).floor() as u64;
        t.extend((0..=n).map(|k| k as f64 * sched.metrics_interval));
    }
    t.push(0.0);
    t.push(sched.t_end);
    t.retain(|x| *x >= 0.0 && *x <= sched.t_end);
    t.sort_by(f64::total_cmp);
    t.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * sched.t_end.max(1.0));
    t
}

fn fmt_time(t: f64) -> String {
    let s = format!("{t:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

fn is_snapshot_time(s: &Scenario, t: f64) -> bool {
    let tol = 1e-9 * s.run.t_end.max(1.0);
    s.run.snapshot_times.iter().any(|x| (x - t).abs() <= tol)
}

fn write_fields(dir: &Path, model: &Model, l: &ScalarField, s: &Scenario, t: f64) -> Result<()> {
    let f = model.fields(l)?;
    let seed = s.params.seed;
    let tag = fmt_time(t);
    for (q, field) in [
        ("l", l),
        ("w", &f.w),
        ("y", &f.y),
        ("a_l", &f.a_l),
        ("a_en", &f.a_en),
        ("v", &f.v),
        ("u", &f.u),
    ] {
        let meta = SnapshotMeta::for_field(field, q, &s.name, t, seed);
        write_field_snapshot(&dir.join(format!("{q}_t{tag}.bin")), field, &meta)?;
    }
    Ok(())
}

fn metadata(s: &Scenario, model: &Model) -> Vec<(String, String)> {
    let g = model.grid();
    let init = match &s.init {
        InitSpec::Uniform { amplitude, seed } => {
            format!(
                "uniform amplitude={amplitude} seed={}",
                seed.unwrap_or(s.params.seed)
            )
        }
        InitSpec::Strip {
            x0,
            x1,
            y0,
            y1,
            amplitude,
            seed,
        } => format!(
            "strip [{x0},{x1}]x[{y0},{y1}] amplitude={amplitude} seed={}",
            seed.unwrap_or(s.params.seed)
        ),
        InitSpec::Epanechnikov { cx, cy, h_e } => {
            format!("epanechnikov center=({cx},{cy}) h_e={h_e}")
        }
        InitSpec::File { path } => format!("file {}", path.display()),
    };
    let n = &s.numerics;
    vec![
        ("version".into(), VERSION.into()),
        ("name".into(), s.name.clone()),
        ("seed".into(), s.params.seed.to_string()),
        ("mode".into(), format!("{:?}", s.mode).to_lowercase()),
        (
            "grid".into(),
            format!("{}x{} on [0,{}]x[0,{}]", g.nx(), g.ny(), g.lx(), g.ly()),
        ),
        ("init".into(), init),
        (
            "kernel".into(),
            format!("{:?} h={}", s.kernel, s.params.h).to_lowercase(),
        ),
        (
            "convolution".into(),
            format!("{:?}", n.convolution).to_lowercase(),
        ),
        (
            "time_step".into(),
            match n.fixed_dt {
                Some(dt) => format!("fixed dt={dt}"),
                None => format!("adaptive safety={} dt_max={}", n.safety, n.dt_max),
            },
        ),
        (
            "cluster_threshold".into(),
            s.analysis.cluster_threshold.to_string(),
        ),
        (
            "drift_prefactor".into(),
            s.analysis.drift_prefactor.to_string(),
        ),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceRow {
    pub t: f64,
    pub agents: usize,
    pub bandwidth: f64,
    pub floor_binds: bool,
    pub l1: f64,
    pub sliced_w1: f64,
    pub w1_x: f64,
    pub w1_y: f64,
}

fn distance_row(
    t: f64,
    pop: &Population,
    est: &DensityEstimate,
    pde: &ScalarField,
) -> Result<DistanceRow> {
    // with births both masses grow at random; compare shapes
    let (ma, mb) = (est.density.integral(), pde.integral());
    let d = if (ma - mb).abs() > 1e-6 * ma.max(mb) {
        density_distance(&est.density.map(|v| v / ma), &pde.map(|v| v / mb))?
    } else {
        density_distance(&est.density, pde)?
    };
    Ok(DistanceRow {
        t,
        agents: pop.len(),
        bandwidth: est.bandwidth,
        floor_binds: est.floor_binds,
        l1: d.l1,
        sliced_w1: d.sliced_w1,
        w1_x: d.w1_x,
        w1_y: d.w1_y,
    })
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub pde: Option<Trajectory>,
    pub agent_metrics: Vec<MetricsRow>,
    pub distances: Vec<DistanceRow>,
}

/// Runs a scenario and writes everything below `out`.
///
/// On a solver failure the partial metrics and the last good density
/// (`last_good.bin`) are written before the error is returned.
pub fn run_scenario(s: &Scenario, out: &Path) -> Result<RunSummary> {
    s.validate()?;
    let model = build_model(s)?;
    let grid = *model.grid();
    let l0 = s.initial_density(grid)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    std::fs::write(out.join("scenario.toml"), s.to_toml())
        .map_err(|e| Error::io(out.join("scenario.toml"), e))?;
    write_meta(&out.join("meta.txt"), &metadata(s, &model))?;

    let mut summary = RunSummary {
        out_dir: out.to_path_buf(),
        pde: None,
        agent_metrics: vec![],
        distances: vec![],
    };

    let mut schedule = s.schedule();
    if s.mode == Mode::Both {
        // the agent comparison needs the PDE density at every output time
        schedule.snapshot_times = output_times(s);
    }
    if matches!(s.mode, Mode::Pde | Mode::Both) {
        let traj = match run(&model, l0.clone(), &schedule, &s.analysis) {
            Ok(t) => t,
            Err(fail) => {
                let partial = &fail.partial;
                write_metrics_csv(&out.join("metrics.csv"), &partial.metrics)?;
                write_welfare_csv(&out.join("welfare.csv"), &partial.metrics)?;
                let st = &partial.final_state;
                let meta = SnapshotMeta::for_field(&st.l, "l", &s.name, st.t, s.params.seed);
                write_field_snapshot(&out.join("last_good.bin"), &st.l, &meta)?;
                return Err(fail.error);
            }
        };
        write_metrics_csv(&out.join("metrics.csv"), &traj.metrics)?;
        write_welfare_csv(&out.join("welfare.csv"), &traj.metrics)?;
        for snap in traj.snapshots.iter().filter(|sn| is_snapshot_time(s, sn.t)) {
            write_fields(&out.join("snapshots"), &model, &snap.l, s, snap.t)?;
        }
        let fin = &traj.final_state;
        let meta = SnapshotMeta::for_field(&fin.l, "l", &s.name, fin.t, s.params.seed);
        write_field_snapshot(&out.join("final.bin"), &fin.l, &meta)?;
        write_meta(
            &out.join("run_stats.txt"),
            &[
                ("steps".into(), fin.step_count.to_string()),
                ("t_final".into(), fin.t.to_string()),
                (
                    "relative_mass_drift".into(),
                    format!("{:e}", traj.relative_mass_drift()),
                ),
                ("clamped_mass".into(), format!("{:e}", fin.clamped_mass)),
            ],
        )?;
        summary.pde = Some(traj);
    }

    if matches!(s.mode, Mode::Agents | Mode::Both) {
        let mut pop = Population::sample_from_density(&l0, s.agents.n, s.params.seed)?;
        let stops = output_times(s);
        let pde_at = |t: f64| -> Option<&ScalarField> {
            let traj = summary.pde.as_ref()?;
            traj.snapshots
                .iter()
                .find(|sn| (sn.t - t).abs() <= 1e-9 * t.max(1.0))
                .map(|sn| &sn.l)
        };
        let mut metrics = vec![];
        let mut distances = vec![];
        let mut bandwidth_note = None;
        simulate_agents(&model, &mut pop, s.agents.dt, &stops, |t, pop, est| {
            metrics.push(metrics_row(&model, &est.density, t, &s.analysis)?);
            bandwidth_note.get_or_insert((est.bandwidth, est.nominal_bandwidth, est.floor_binds));
            if let Some(pde) = pde_at(t) {
                distances.push(distance_row(t, pop, est, pde)?);
            }
            if is_snapshot_time(s, t) {
                let tag = fmt_time(t);
                write_positions_csv(
                    &out.join("agents").join(format!("positions_t{tag}.csv")),
                    pop,
                )?;
                write_positions_snapshot(
                    &out.join("agents").join(format!("positions_t{tag}.bin")),
                    pop,
                    &grid,
                    &s.name,
                )?;
                let meta =
                    SnapshotMeta::for_field(&est.density, "l_agents", &s.name, t, s.params.seed);
                write_field_snapshot(
                    &out.join("agents").join(format!("l_t{tag}.bin")),
                    &est.density,
                    &meta,
                )?;
            }
            Ok(())
        })?;
        write_metrics_csv(&out.join("metrics_agents.csv"), &metrics)?;
        if let Some((h, nominal, binds)) = bandwidth_note {
            write_meta(
                &out.join("agents").join("mollifier.txt"),
                &[
                    ("bandwidth".into(), h.to_string()),
                    ("nominal_bandwidth".into(), nominal.to_string()),
                    ("floor_binds".into(), binds.to_string()),
                ],
            )?;
        }
        if !distances.is_empty() {
            write_csv(&out.join("distance.csv"), &distances)?;
        }
        summary.agent_metrics = metrics;
        summary.distances = distances;
    }
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub seed: u64,
    pub l1: f64,
    pub sliced_w1: f64,
    pub bandwidth: f64,
    pub floor_binds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceSummaryRow {
    pub n: usize,
    pub median_l1: f64,
    pub median_sliced_w1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub t_end: f64,
    pub rows: Vec<ConvergenceRow>,
    pub summary: Vec<ConvergenceSummaryRow>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// For each `N` and seed: agents sampled from the initial density, run to
/// `convergence.t_end`, compared with the PDE solution at the same time.
pub fn convergence_experiment(s: &Scenario) -> Result<ConvergenceReport> {
    s.validate()?;
    let model = build_model(s)?;
    let l0 = s.initial_density(*model.grid())?;
    let t_end = s.convergence.t_end;
    let schedule = Schedule {
        t_end,
        snapshot_times: vec![],
        metrics_interval: 0.0,
    };
    let pde = run(&model, l0.clone(), &schedule, &s.analysis)
        .map_err(|f| f.error)?
        .final_state
        .l;
    let mut rows = vec![];
    for &n in &s.convergence.n_list {
        for &seed in &s.convergence.seeds {
            let mut pop = Population::sample_from_density(&l0, n, seed)?;
            let mut result = None;
            simulate_agents(&model, &mut pop, s.agents.dt, &[t_end], |_, _, est| {
                result = Some((
                    density_distance(&est.density, &pde)?,
                    est.bandwidth,
                    est.floor_binds,
                ));
                Ok(())
            })?;
            let (d, bandwidth, floor_binds): (DensityDistance, f64, bool) =
                result.expect("one stop observed");
            rows.push(ConvergenceRow {
                n,
                seed,
                l1: d.l1,
                sliced_w1: d.sliced_w1,
                bandwidth,
                floor_binds,
            });
        }
    }
    let summary = s
        .convergence
        .n_list
        .iter()
        .map(|&n| {
            let sel = rows.iter().filter(|r| r.n == n);
            ConvergenceSummaryRow {
                n,
                median_l1: median(sel.clone().map(|r| r.l1).collect()),
                median_sliced_w1: median(sel.map(|r| r.sliced_w1).collect()),
            }
        })
        .collect();
    Ok(ConvergenceReport {
        t_end,
        rows,
        summary,
    })
}

pub fn write_convergence_report(dir: &Path, report: &ConvergenceReport) -> Result<()> {
    write_csv(&dir.join("convergence.csv"), &report.rows)?;
    write_csv(&dir.join("convergence_summary.csv"), &report.summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub l_bar: f64,
    pub params: ParamSet,
    pub scan: CriticalScan,
    /// Largest modal rate at the configured `c_M`.
    pub max_rate: f64,
}

/// Critical moving cost of the uniform state, linearized with linear wages and no amenities.
pub fn stability_scan(s: &Scenario) -> Result<StabilityReport> {
    s.validate()?;
    let grid = s.build_grid()?;
    let kernel = discretize(&s.kernel_spec(), &grid)?;
    let params = ParamSet {
        beta: 1.0,
        a0: 0.0,
        ..s.params.clone()
    };
    let l_bar = 1.0 / grid.area();
    let st = &s.stability;
    let scan = critical_cm_scan(&params, l_bar, &kernel, (st.c_min, st.c_max), st.tol)?;
    Ok(StabilityReport {
        l_bar,
        max_rate: max_dispersion_rate(&kernel, &params, l_bar),
        params,
        scan,
    })
}

pub fn write_stability_report(dir: &Path, r: &StabilityReport) -> Result<()> {
    let mut entries = vec![
        ("l_bar".to_string(), r.l_bar.to_string()),
        ("sigma".to_string(), r.params.sigma.to_string()),
        ("h".to_string(), r.params.h.to_string()),
        ("c_m".to_string(), r.params.c_m.to_string()),
        ("max_rate_at_c_m".to_string(), format!("{:e}", r.max_rate)),
    ];
    match r.scan {
        CriticalScan::Bracket { lower, upper } => {
            entries.push(("critical_c_m_lower".into(), lower.to_string()));
            entries.push(("critical_c_m_upper".into(), upper.to_string()));
        }
        CriticalScan::OutOfRange { unstable } => {
            entries.push((
                "critical_c_m".into(),
                format!(
                    "out of range ({} throughout)",
                    if unstable { "unstable" } else { "stable" }
                ),
            ));
        }
    }
    write_meta(&dir.join("stability.txt"), &entries)
}

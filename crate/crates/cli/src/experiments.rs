//! One function per subcommand: validate every key, then run the library.

use std::f64::consts::PI;

use eventclock_core::arrival::{
    arrival_trajectory, backflow_scan, BackflowCandidate, FreeSpace, Grid, GridWavepacket,
};
use eventclock_core::detector::{commutator_diagnostics, linspace, m_of_t, pm_of_t};
use eventclock_core::repeated::{
    detection_distribution, sample_detections, zeno_sweep, DetectionSchedule, DEFAULT_SURVIVAL_FLOOR,
};
use eventclock_core::spin;

use crate::config::{Experiment, RunConfig};
use crate::format::{Cell, Table};
use crate::CliError;

pub fn run(cfg: &RunConfig) -> Result<Table, CliError> {
    match cfg.experiment {
        Experiment::SpinRun => spin_run(cfg),
        Experiment::ZenoSweep => zeno(cfg),
        Experiment::Detect => detect(cfg),
        Experiment::Commutators => commutators(cfg),
        Experiment::ArrivalEvolve => arrival_evolve(cfg),
        Experiment::ArrivalBackflow => arrival_backflow(cfg),
    }
}

fn invalid(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

fn to_usize(key: &str, n: u64) -> Result<usize, CliError> {
    usize::try_from(n).map_err(|_| invalid(key, "too large"))
}

fn time_window(cfg: &RunConfig, default_start: f64, points_key: &str, min_points: u64) -> Result<Vec<f64>, CliError> {
    let t0 = cfg.f64_or("t_start", default_start)?;
    let t1 = cfg.f64("t_end")?;
    if t1 <= t0 {
        return Err(invalid("t_end", format!("must exceed t_start = {t0}, got {t1}")));
    }
    let n = to_usize(points_key, cfg.count(points_key, None, min_points)?)?;
    Ok(linspace(t0, t1, n))
}

fn spin_run(cfg: &RunConfig) -> Result<Table, CliError> {
    let spin_cfg = cfg.spin(0.0)?;
    let times = time_window(cfg, 0.0, "n_points", 3)?;
    let model = spin::build(&spin_cfg)?;
    let pm = pm_of_t(&model.spec, &model.hamiltonian, &model.psi0, &times)?;
    let m = m_of_t(&pm)?;
    let mut table = Table::new(vec!["t", "p_m", "m"]);
    for ((t, p), d) in pm.iter().zip(m.values()) {
        table.push(vec![Cell::Num(t), Cell::Num(p), Cell::Num(*d)]);
    }
    Ok(table)
}

fn zeno(cfg: &RunConfig) -> Result<Table, CliError> {
    let spin_cfg = cfg.spin(0.0)?;
    let tau = cfg.positive("tau", None)?;
    let ks = cfg
        .count_list("k_values")?
        .into_iter()
        .map(|k| to_usize("k_values", k))
        .collect::<Result<Vec<_>, _>>()?;
    let model = spin::build(&spin_cfg)?;
    let rows = zeno_sweep(&model.spec, &model.hamiltonian, &model.psi0, tau, &ks)?;
    let mut table = Table::new(vec!["k", "delta", "survival_at_tau", "delta_e", "resolvability"]);
    for r in rows {
        table.push(vec![
            Cell::Int(r.k as u64),
            Cell::Num(r.delta),
            Cell::Num(r.survival_at_tau),
            Cell::Num(r.delta_e),
            Cell::Num(r.resolvability),
        ]);
    }
    Ok(table)
}

fn detect(cfg: &RunConfig) -> Result<Table, CliError> {
    let delta = cfg.positive("delta", None)?;
    let spin_cfg = cfg.spin(delta)?;
    let k_max = to_usize("k_max", cfg.count("k_max", None, 1)?)?;
    let floor = cfg.f64_or("survival_floor", DEFAULT_SURVIVAL_FLOOR)?;
    if !(0.0..1.0).contains(&floor) {
        return Err(invalid("survival_floor", format!("must lie in [0, 1), got {floor}")));
    }
    let sampling = if cfg.has("shots") {
        let shots = cfg.count("shots", None, 1)?;
        if !cfg.has("seed") {
            return Err(invalid("seed", "required when shots is set"));
        }
        Some((shots, cfg.count("seed", None, 0)?))
    } else if cfg.has("seed") {
        return Err(invalid("seed", "only meaningful together with shots"));
    } else {
        None
    };

    let model = spin::build(&spin_cfg)?;
    let sched = DetectionSchedule::new(delta, k_max, floor)?;
    let dist = detection_distribution(&model.spec, &model.hamiltonian, &model.psi0, &sched)?;
    let empirical = match sampling {
        Some((shots, seed)) => {
            Some(sample_detections(&model.spec, &model.hamiltonian, &model.psi0, &sched, shots, seed)?.frequencies())
        }
        None => None,
    };

    let mut columns = vec!["k", "t", "p_detect", "survival"];
    if empirical.is_some() {
        columns.push("empirical");
    }
    let mut table = Table::new(columns);
    for j in 0..dist.len() {
        let mut row = vec![
            Cell::Int(j as u64 + 1),
            Cell::Num(dist.times[j]),
            Cell::Num(dist.p_detect[j]),
            Cell::Num(dist.survival[j]),
        ];
        if let Some(freq) = &empirical {
            row.push(Cell::Num(freq[j]));
        }
        table.push(row);
    }
    Ok(table)
}

fn commutators(cfg: &RunConfig) -> Result<Table, CliError> {
    let spin_cfg = cfg.spin(0.0)?;
    let t1 = cfg.f64_list("t1", None)?;
    let t2 = cfg.f64_list("t2", None)?;
    if t1.len() != t2.len() {
        return Err(invalid("t2", format!("has {} entries, t1 has {}", t2.len(), t1.len())));
    }
    if let Some(i) = t1.iter().zip(&t2).position(|(a, b)| a == b) {
        return Err(invalid("t2", format!("entry {i} equals t1; the two times must differ")));
    }
    if let Some(t) = t1.iter().chain(&t2).find(|t| **t < 0.0) {
        return Err(invalid("t1", format!("times must be non-negative, got {t}")));
    }
    let model = spin::build(&spin_cfg)?;
    let mut table = Table::new(vec!["t1", "t2", "same_time_norm", "two_time_norm"]);
    for (&a, &b) in t1.iter().zip(&t2) {
        let norms = commutator_diagnostics(&model.spec, &model.hamiltonian, a, b)?;
        table.push(vec![Cell::Num(a), Cell::Num(b), Cell::Num(norms.same_time_norm), Cell::Num(norms.two_time_norm)]);
    }
    Ok(table)
}

fn grid(cfg: &RunConfig, default: Grid) -> Result<Grid, CliError> {
    if !(cfg.has("grid_points") || cfg.has("x_min") || cfg.has("x_max")) {
        return Ok(default);
    }
    let n = to_usize("grid_points", cfg.count("grid_points", Some(default.len() as u64), 4)?)?;
    let x_min = cfg.f64_or("x_min", default.x_min())?;
    let x_max = cfg.f64_or("x_max", -default.x_min())?;
    Grid::new(n, x_min, x_max).map_err(|e| invalid("grid_points", e))
}

fn arrival_evolve(cfg: &RunConfig) -> Result<Table, CliError> {
    let grid = grid(cfg, Grid::wide())?;
    let x0 = cfg.f64_or("x0", -20.0)?;
    let sigma = cfg.positive("sigma", Some(2.0))?;
    let p0 = cfg.f64_or("p0", 1.0)?;
    let times = time_window(cfg, 0.0, "n_times", 1)?;
    let w0 = GridWavepacket::gaussian(grid, x0, sigma, p0).map_err(|e| invalid("x0", e))?;
    let space = FreeSpace::new(grid);
    let mut table = Table::new(vec!["t", "p_plus", "j_origin"]);
    for s in arrival_trajectory(&space, &w0, &times)? {
        table.push(vec![Cell::Num(s.t), Cell::Num(s.p_plus), Cell::Num(s.j_origin)]);
    }
    Ok(table)
}

fn arrival_backflow(cfg: &RunConfig) -> Result<Table, CliError> {
    let grid = grid(cfg, Grid::standard())?;
    let p1 = cfg.positive("p1", Some(1.0))?;
    let p2 = cfg.positive("p2", Some(3.0))?;
    let s1 = cfg.positive("s1", Some(0.5))?;
    let s2 = cfg.positive("s2", Some(0.5))?;
    let scale = cfg.positive("scale", Some(1.0))?;
    let ws = cfg.f64_list("w_values", Some((1..=9).map(|i| i as f64 / 10.0).collect()))?;
    if let Some(w) = ws.iter().find(|w| !(0.0..=1.0).contains(*w)) {
        return Err(invalid("w_values", format!("weights must lie in [0, 1], got {w}")));
    }
    let phi_steps = cfg.count("phi_steps", Some(16), 1)?;
    let times = time_window(cfg, 0.0, "n_times", 1)?;

    let mut candidates = Vec::new();
    for &w in &ws {
        for j in 0..phi_steps {
            let phi = 2.0 * PI * j as f64 / phi_steps as f64;
            let cand = BackflowCandidate::new(p1, p2, s1, s2, w, phi)
                .and_then(|c| c.scaled(scale))
                .map_err(|e| invalid("p1", e))?;
            candidates.push(cand);
        }
    }
    let space = FreeSpace::new(grid);
    let r = backflow_scan(&space, &candidates, &times)?;
    let b = r.best;
    let mut table = Table::new(vec!["p1", "p2", "s1", "s2", "w", "phi", "t_star", "j_min"]);
    table.push(
        [b.p1, b.p2, b.s1, b.s2, b.w, b.phi, r.t_star, r.j_min].into_iter().map(Cell::Num).collect(),
    );
    Ok(table)
}

//! `kernel-build`, `measure` and `simulate`.

use noisy_ergodic::mc::{
    estimate_lj_phi, exact_lj_phi, sample_trajectory, empirical_time_average, stream_seed, Stream,
};
use noisy_ergodic::measure::{class_period, stationary_measures_with_threshold};
use noisy_ergodic::{
    closed_classes, ergodic_decomposition, is_ergodic, periodic_measures, support, ulam_discretize, Kernel, Obs,
    Partition, Prob,
};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::failure::Failure;
use crate::kernel_file::{read_kernel, write_kernel};
use crate::report::sha256_hex;

/// Kernel plus the hash of its source bytes when it came from a file.
pub struct Loaded {
    pub kernel: Kernel,
    pub sha256: Option<String>,
}

pub fn load_kernel(cfg: &RunConfig) -> Result<Loaded, Failure> {
    cfg.require_source()?;
    if let Some(path) = cfg.kernel_path() {
        let bytes = std::fs::read(&path)
            .map_err(|e| Failure::Config(format!("cannot read kernel {}: {e}", path.display())))?;
        let text = String::from_utf8(bytes).map_err(|_| Failure::Kernel("kernel file is not UTF-8".into()))?;
        let kernel = read_kernel(&text)?;
        return Ok(Loaded { kernel, sha256: Some(sha256_hex(text.as_bytes())) });
    }
    let system = cfg.system.as_ref().unwrap();
    system.validate().map_err(|e| Failure::Config(format!("system: {e}")))?;
    let part = Partition::uniform(cfg.partition.domain, cfg.partition.cells)
        .map_err(|e| Failure::Config(format!("partition: {e}")))?;
    let kernel = ulam_discretize(system, &part, cfg.partition.quadrature_points)?;
    Ok(Loaded { kernel, sha256: None })
}

pub fn user_measure(cfg: &RunConfig, k: usize) -> Result<Option<Prob>, Failure> {
    match &cfg.measure.mu {
        None => Ok(None),
        Some(w) if w.len() != k => Err(Failure::Config(format!("measure.mu has {} weights, kernel has K = {k}", w.len()))),
        Some(w) => Prob::new(w.clone()).map(Some).map_err(|e| Failure::Config(format!("measure.mu: {e}"))),
    }
}

pub struct Built {
    pub text: String,
    pub summary: Value,
}

pub fn kernel_build(cfg: &RunConfig) -> Result<Built, Failure> {
    let loaded = load_kernel(cfg)?;
    let p = &loaded.kernel;
    let summary = json!({
        "K": p.size(),
        "nnz": p.nnz(),
        "max_row_sum_deviation": p.max_row_sum_deviation(),
        "kernel_file": "kernel.txt",
    });
    Ok(Built { text: write_kernel(p), summary })
}

pub fn measure(cfg: &RunConfig, p: &Kernel) -> Result<Value, Failure> {
    let tol = cfg.solver.tol;
    let threshold = cfg.solver.edge_threshold;
    let solved = stationary_measures_with_threshold(p, tol, cfg.solver.max_iter, threshold)?;
    let classes = closed_classes(p, threshold);
    let mut stationary = Vec::new();
    for (mu, class) in solved.iter().zip(&classes) {
        stationary.push(json!({
            "weights": mu.weights(),
            "support": support(mu, 0.0),
            "period": class_period(p, class, threshold),
            "ergodic": is_ergodic(p, mu, tol)?,
        }));
    }
    let mut out = json!({ "K": p.size(), "stationary": stationary });
    if let Some(mu) = user_measure(cfg, p.size())? {
        let d = ergodic_decomposition(p, &mu, tol)?;
        let parts: Vec<Value> = d
            .components
            .iter()
            .map(|c| json!({ "weight": c.weight, "weights": c.measure.weights(), "support": support(&c.measure, 0.0) }))
            .collect();
        out["decomposition"] = json!(parts);
    }
    let mut periodic = Vec::new();
    for &period in &cfg.measure.periods {
        let ms = periodic_measures(p, period, tol, cfg.solver.max_iter)?;
        let items: Vec<Value> = ms
            .iter()
            .map(|m| json!({ "minimal_period": m.minimal_period, "weights": m.measure.weights() }))
            .collect();
        periodic.push(json!({ "p": period, "measures": items }));
    }
    out["periodic"] = json!(periodic);
    Ok(out)
}

/// Observable used by `simulate`: the configured one or a seeded draw in `[-1, 1]`.
pub fn simulation_observable(cfg: &RunConfig, k: usize) -> Result<Obs, Failure> {
    match &cfg.mc.phi {
        Some(v) if v.len() != k => Err(Failure::Config(format!("mc.phi has {} values, kernel has K = {k}", v.len()))),
        Some(v) => Obs::new(v.clone()).map_err(|e| Failure::Config(format!("mc.phi: {e}"))),
        None => {
            let mut s = Stream::new(stream_seed(cfg.mc.master_seed, u64::MAX));
            Ok(Obs::new((0..k).map(|_| 2.0 * s.uniform() - 1.0).collect()).unwrap())
        }
    }
}

pub struct Simulated {
    pub trajectories_csv: String,
    pub estimates_csv: String,
    pub summary: Value,
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).unwrap();
    for r in rows {
        w.write_record(&r).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

pub fn simulate(cfg: &RunConfig, p: &Kernel) -> Result<Simulated, Failure> {
    let mc = &cfg.mc;
    let phi = simulation_observable(cfg, p.size())?;
    let mut traj_rows = Vec::new();
    let mut averages = Vec::new();
    for t in 0..mc.trajectories {
        let traj = sample_trajectory(p, mc.start, mc.steps, stream_seed(mc.master_seed, t as u64))?;
        averages.push(empirical_time_average(&traj, &phi)?);
        for (step, s) in traj.states.iter().enumerate() {
            traj_rows.push(vec![t.to_string(), step.to_string(), s.to_string()]);
        }
    }
    let mut est_rows = Vec::new();
    let mut estimates = Vec::new();
    for &j in &mc.j {
        let seed = stream_seed(mc.master_seed.rotate_left(32), j as u64);
        let e = estimate_lj_phi(p, &phi, mc.start, j, mc.n_samples, seed)?;
        let exact = exact_lj_phi(p, &phi, j)?[mc.start];
        let z = if e.stderr > 0.0 {
            (e.mean - exact) / e.stderr
        } else if e.mean == exact {
            0.0
        } else {
            f64::INFINITY
        };
        est_rows.push(vec![j.to_string(), e.mean.to_string(), e.stderr.to_string(), exact.to_string(), z.to_string()]);
        estimates.push(json!({ "j": j, "mean": e.mean, "stderr": e.stderr, "exact": exact, "z": z, "n_samples": e.n_samples }));
    }
    Ok(Simulated {
        trajectories_csv: csv_text(&["trial", "step", "state"], traj_rows),
        estimates_csv: csv_text(&["j", "mean", "stderr", "exact", "z"], est_rows),
        summary: json!({
            "start": mc.start,
            "steps": mc.steps,
            "trajectories": mc.trajectories,
            "time_averages": averages,
            "phi": phi.values(),
            "estimates": estimates,
        }),
    })
}

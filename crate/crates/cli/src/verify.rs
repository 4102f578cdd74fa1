//! `verify`: theorem checks over seeded random observables.
//!
//! Targets are the user measure when one is given, otherwise every solved
//! ergodic stationary measure plus their equal-weight mixture. Trial `t`
//! draws its observable from stream `stream_seed(master_seed, t)`.

use noisy_ergodic::mc::{stream_seed, Stream};
use noisy_ergodic::measure::stationary_measures_with_threshold;
use noisy_ergodic::theorems::{
    birkhoff_limit, check_corollary_b, check_corollary_c, check_duality, check_ergodic_limit, check_lemma1,
    check_lemma2, check_levelset_invariance, check_localization, check_maximal_inequality,
    check_nonconvergence_set_empty, check_periodic_pointwise,
};
use noisy_ergodic::{apply_l, invariant_sets, is_ergodic, periodic_measures, support, CheckReport, Error, Kernel, Obs, Prob};
use serde::Serialize;

use crate::commands::user_measure;
use crate::config::RunConfig;
use crate::failure::Failure;

struct Target {
    label: String,
    measure: Prob,
    ergodic: bool,
}

/// All runs of one check, summarized by the run closest to failing.
#[derive(Debug, Clone, Serialize)]
pub struct CheckSummary {
    pub check: String,
    pub passed: bool,
    pub runs: usize,
    pub failures: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_target: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst: Option<CheckReport>,
}

fn summarize(check: &str, runs: Vec<(String, CheckReport)>) -> CheckSummary {
    let failures = runs.iter().filter(|(_, r)| !r.passed).count();
    let worst = runs
        .iter()
        .min_by(|a, b| a.1.margin().total_cmp(&b.1.margin()))
        .cloned();
    CheckSummary {
        check: check.to_string(),
        passed: failures == 0,
        runs: runs.len(),
        failures,
        worst_target: worst.as_ref().map(|w| w.0.clone()),
        worst: worst.map(|w| w.1),
    }
}

fn observable(stream: &mut Stream, k: usize) -> Obs {
    Obs::new((0..k).map(|_| 2.0 * stream.uniform() - 1.0).collect()).unwrap()
}

fn random_measure(stream: &mut Stream, k: usize) -> Prob {
    let w: Vec<f64> = (0..k).map(|_| stream.uniform() + 1e-3).collect();
    let s: f64 = w.iter().sum();
    Prob::new(w.into_iter().map(|x| x / s).collect()).unwrap()
}

/// Per-state `sup` and `inf` of `S_n / n` over `n <= n_max`.
fn average_extremes(p: &Kernel, phi: &Obs, n_max: usize) -> Result<(Vec<f64>, Vec<f64>), Error> {
    let k = phi.len();
    let mut sum = phi.clone();
    let mut sup = phi.values().to_vec();
    let mut inf = phi.values().to_vec();
    for n in 2..=n_max {
        let l = apply_l(p, &sum)?;
        sum = phi.combine(1.0, &l, 1.0)?;
        for i in 0..k {
            let avg = sum[i] / n as f64;
            sup[i] = sup[i].max(avg);
            inf[i] = inf[i].min(avg);
        }
    }
    Ok((sup, inf))
}

/// Margin kept between a derived level and the averages it must separate.
const LEVEL_MARGIN: f64 = 1e-9;

pub struct Verifier<'a> {
    cfg: &'a RunConfig,
    p: &'a Kernel,
    targets: Vec<Target>,
    user_supplied: bool,
}

impl<'a> Verifier<'a> {
    pub fn new(cfg: &'a RunConfig, p: &'a Kernel) -> Result<Self, Failure> {
        let tol = cfg.checks.tol;
        let (targets, user_supplied) = match user_measure(cfg, p.size())? {
            Some(mu) => {
                let ergodic = match is_ergodic(p, &mu, tol) {
                    Ok(e) => e,
                    Err(Error::NotStationary { .. } | Error::Precondition(_)) => false,
                    Err(e) => return Err(e.into()),
                };
                (vec![Target { label: "user".into(), measure: mu, ergodic }], true)
            }
            None => {
                let solved =
                    stationary_measures_with_threshold(p, cfg.solver.tol, cfg.solver.max_iter, cfg.solver.edge_threshold)?;
                let mut targets: Vec<Target> = solved
                    .iter()
                    .enumerate()
                    .map(|(i, m)| Target { label: format!("stationary[{i}]"), measure: m.clone(), ergodic: true })
                    .collect();
                if solved.len() > 1 {
                    let mut w = vec![0.0; p.size()];
                    for m in &solved {
                        for (o, x) in w.iter_mut().zip(m.weights()) {
                            *o += x / solved.len() as f64;
                        }
                    }
                    targets.push(Target { label: "mixture".into(), measure: Prob::new(w)?, ergodic: false });
                }
                (targets, false)
            }
        };
        Ok(Verifier { cfg, p, targets, user_supplied })
    }

    fn trials(&self) -> impl Iterator<Item = (usize, Stream)> + '_ {
        (0..self.cfg.checks.trials).map(|t| (t, Stream::new(stream_seed(self.cfg.mc.master_seed, t as u64))))
    }

    fn generators(&self, t: &Target) -> Result<Vec<Vec<usize>>, Error> {
        Ok(invariant_sets(self.p, &t.measure, self.cfg.checks.tol)?.generators)
    }

    pub fn run(&self, check: &str) -> Result<CheckSummary, Failure> {
        let c = &self.cfg.checks;
        let (p, k, tol) = (self.p, self.p.size(), c.tol);
        let mut runs: Vec<(String, CheckReport)> = Vec::new();
        let mut push = |label: &str, r: CheckReport| runs.push((label.to_string(), r));
        match check {
            "maximal" | "lemma2" | "birkhoff" | "ergodic_limit" | "duality" => {
                for target in &self.targets {
                    if check == "ergodic_limit" && !target.ergodic {
                        continue;
                    }
                    for (t, mut s) in self.trials() {
                        let phi = observable(&mut s, k);
                        let mu = &target.measure;
                        let r = match check {
                            "maximal" => check_maximal_inequality(p, mu, &phi, c.n_max, tol)?,
                            "lemma2" => check_lemma2(p, mu, &phi, tol)?,
                            "birkhoff" => birkhoff_limit(p, &phi, mu, tol, c.n_cap)?.1,
                            "ergodic_limit" => check_ergodic_limit(p, &phi, mu, tol, c.n_cap)?,
                            _ => {
                                let nu = random_measure(&mut s, k);
                                let a = check_duality(p, &phi, mu, tol)?;
                                let b = check_duality(p, &phi, &nu, tol)?;
                                push(&format!("random[{t}]"), b);
                                a
                            }
                        };
                        push(&target.label, r);
                    }
                }
            }
            "lemma1" | "nonconvergence_empty" => {
                for (_, mut s) in self.trials() {
                    let phi = observable(&mut s, k);
                    let r = if check == "lemma1" {
                        check_lemma1(p, &phi, tol)?
                    } else {
                        check_nonconvergence_set_empty(p, &phi, c.alpha, c.beta, c.n_cap)?
                    };
                    push("kernel", r);
                }
            }
            "corollary_c" | "corollary_b" | "localization" => {
                for target in &self.targets {
                    let gens = self.generators(target)?;
                    let supp = support(&target.measure, 0.0);
                    for (_, mut s) in self.trials() {
                        let phi = observable(&mut s, k);
                        let (sup, inf) = if check == "localization" {
                            (Vec::new(), Vec::new())
                        } else {
                            average_extremes(p, &phi, c.n_max)?
                        };
                        for set in &gens {
                            let on_supp = set.iter().filter(|i| supp.binary_search(i).is_ok());
                            let r = match check {
                                "corollary_c" => {
                                    let floor = on_supp.map(|&i| sup[i]).fold(f64::INFINITY, f64::min);
                                    let alpha = c.alpha.min(floor - LEVEL_MARGIN);
                                    check_corollary_c(p, &target.measure, &phi, alpha, set, c.n_max, tol)?
                                }
                                "corollary_b" => {
                                    let ceil = on_supp.map(|&i| inf[i]).fold(f64::NEG_INFINITY, f64::max);
                                    let beta = c.beta.max(ceil + LEVEL_MARGIN);
                                    check_corollary_b(p, &target.measure, &phi, beta, set, c.n_max, tol)?
                                }
                                _ => check_localization(p, &target.measure, set, &phi, tol)?,
                            };
                            push(&target.label, r);
                        }
                    }
                }
            }
            "levelsets" => {
                for target in &self.targets {
                    let gens = self.generators(target)?;
                    for (_, mut s) in self.trials() {
                        let values: Vec<f64> = gens.iter().map(|_| 2.0 * s.uniform() - 1.0).collect();
                        let mut phi = vec![0.0; k];
                        for (set, v) in gens.iter().zip(&values) {
                            for &i in set {
                                phi[i] = *v;
                            }
                        }
                        let alpha = values[((s.uniform() * values.len() as f64) as usize).min(values.len() - 1)];
                        let phi = Obs::new(phi).unwrap();
                        push(&target.label, check_levelset_invariance(p, &target.measure, &phi, alpha, tol)?);
                    }
                }
            }
            "periodic" => {
                let targets: Vec<(String, Prob)> = if self.user_supplied {
                    self.targets.iter().map(|t| (t.label.clone(), t.measure.clone())).collect()
                } else {
                    periodic_measures(p, c.p, self.cfg.solver.tol, self.cfg.solver.max_iter)?
                        .into_iter()
                        .enumerate()
                        .map(|(i, m)| (format!("periodic[{i}]"), m.measure))
                        .collect()
                };
                for (label, mu) in &targets {
                    for (_, mut s) in self.trials() {
                        let phi = observable(&mut s, k);
                        push(label, check_periodic_pointwise(p, c.p, &phi, mu, tol, c.n_cap)?);
                    }
                }
            }
            other => return Err(Failure::Config(format!("unknown check `{other}`"))),
        }
        Ok(summarize(check, runs))
    }
}

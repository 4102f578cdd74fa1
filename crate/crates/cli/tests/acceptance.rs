//! Acceptance criteria, one line each. Exits nonzero unless the set of
//! failing criteria is exactly [`EXPECTED_FAILURES`].

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use common::{normalized, Gen};
use nalgebra::DMatrix;
use noisy_ergodic::mc::{estimate_lj_phi, exact_lj_phi, sample_trajectory, stream_seed};
use noisy_ergodic::measure::is_invariant_set;
use noisy_ergodic::theorems::{
    birkhoff_limit, check_corollary_b, check_corollary_c, check_ergodic_limit, check_lemma1,
    check_lemma2, check_levelset_invariance, check_localization, check_maximal_inequality, check_periodic_pointwise,
};
use noisy_ergodic::{
    apply_l, duality_gap, integrate, invariant_sets, is_ergodic, kernel_from_rows, periodic_measures,
    positive_part, stationary_measures, support, ulam_discretize, BaseMap, Boundary, DomainKind, Kernel, Noise,
    NoisySystem, Obs, Partition, Prob,
};

/// The doubling residual of Cesàro averages decays like `c / n`, so a
/// residual of 1e-8 needs `n` near 2^25 for `c` of order one.
const EXPECTED_FAILURES: &[u32] = &[6];

const SOLVE_TOL: f64 = 1e-12;
const MAX_ITER: u64 = 1_000_000;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn solved_mixture(p: &Kernel, g: &mut Gen) -> Prob {
    let ms = stationary_measures(p, SOLVE_TOL, MAX_ITER).unwrap();
    let mut w = vec![0.0; p.size()];
    for m in &ms {
        let c = 0.1 + g.unit();
        for (o, x) in w.iter_mut().zip(m.weights()) {
            *o += c * x;
        }
    }
    normalized(w)
}

fn c1_duality() -> Verdict {
    let start = Instant::now();
    let mut g = Gen::new(101);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let k = g.range(1, 50);
        let p = g.kernel(k);
        worst = worst.max(duality_gap(&p, &g.observable(k), &g.measure(k)).unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(worst < 1e-12 && secs < 2.0, format!("max gap {worst:.2e} over 1000 triples, {secs:.2}s (limit 2s)"))
}

fn c2_axioms() -> Verdict {
    let mut g = Gen::new(102);
    let (mut neg, mut excess, mut unit) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let k = g.range(1, 50);
        let p = g.kernel(k);
        let phi = g.observable(k);
        let lpos = apply_l(&p, &positive_part(&phi)).unwrap();
        neg = neg.max(-lpos.min());
        let sup = |o: &Obs| o.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        excess = excess.max(sup(&apply_l(&p, &phi).unwrap()) - sup(&phi));
        let ones = apply_l(&p, &Obs::constant(k, 1.0)).unwrap();
        unit = unit.max(ones.values().iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs())));
    }
    verdict(
        neg <= 1e-12 && excess <= 1e-12 && unit <= 1e-12,
        format!("positivity {neg:.1e}, sup-norm excess {excess:.1e}, |L1 - 1| {unit:.1e} over 1000 kernels"),
    )
}

fn c3_lemmas() -> Verdict {
    let mut g = Gen::new(103);
    let (mut m1, mut m2) = (f64::INFINITY, f64::INFINITY);
    let mut failed = 0;
    for t in 0..1000 {
        let k = g.range(1, 64);
        let p = if t % 2 == 0 { g.kernel(k) } else { g.reducible(k) };
        let r1 = check_lemma1(&p, &g.observable(k), 1e-12).unwrap();
        let mu = solved_mixture(&p, &mut g);
        let r2 = check_lemma2(&p, &mu, &g.observable(k), 1e-10).unwrap();
        m1 = m1.min(r1.margin());
        m2 = m2.min(r2.margin());
        failed += usize::from(!r1.passed) + usize::from(!r2.passed);
    }
    verdict(failed == 0, format!("{failed} failures in 1000 trials; min margins {m1:.2e} / {m2:.2e}"))
}

fn c4_maximal() -> Verdict {
    let start = Instant::now();
    let mut g = Gen::new(104);
    let mut worst = f64::INFINITY;
    let mut failed = 0;
    for t in 0..1000 {
        let k = g.range(1, 64);
        let p = if t % 2 == 0 { g.kernel(k) } else { g.reducible(k) };
        let mu = solved_mixture(&p, &mut g);
        let r = check_maximal_inequality(&p, &mu, &g.observable(k), 64, 1e-10).unwrap();
        worst = worst.min(r.lhs);
        failed += usize::from(!r.passed || r.lhs < -1e-10);
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        failed == 0 && secs < 30.0,
        format!("{failed} failures; min ∫_E phi dmu = {worst:.3e}; {secs:.2}s (limit 30s)"),
    )
}

/// `sup` and `inf` over `n <= n_max` of the direct Cesàro averages.
fn average_extremes(p: &Kernel, phi: &Obs, n_max: usize) -> (Vec<f64>, Vec<f64>) {
    let k = phi.len();
    let (mut sup, mut inf) = (vec![f64::NEG_INFINITY; k], vec![f64::INFINITY; k]);
    let mut term = phi.clone();
    let mut sum = vec![0.0; k];
    for n in 1..=n_max {
        for i in 0..k {
            sum[i] += term[i];
            sup[i] = sup[i].max(sum[i] / n as f64);
            inf[i] = inf[i].min(sum[i] / n as f64);
        }
        term = apply_l(p, &term).unwrap();
    }
    (sup, inf)
}

fn c5_corollaries() -> Verdict {
    let mut g = Gen::new(105);
    let (mut checks, mut failed, mut errors) = (0, 0, 0);
    for _ in 0..500 {
        let k = g.range(2, 40);
        let p = g.reducible(k);
        let mu = solved_mixture(&p, &mut g);
        let phi = g.observable(k);
        let supp = support(&mu, 0.0);
        let (sup, inf) = average_extremes(&p, &phi, 64);
        let (alpha, beta) = (2.0 * g.unit() - 1.0, 2.0 * g.unit() - 1.0);
        for set in invariant_sets(&p, &mu, SOLVE_TOL).unwrap().generators {
            let on: Vec<usize> = set.iter().copied().filter(|i| supp.contains(i)).collect();
            let floor = on.iter().map(|&i| sup[i]).fold(f64::INFINITY, f64::min);
            let ceil = on.iter().map(|&i| inf[i]).fold(f64::NEG_INFINITY, f64::max);
            let mut levels_c = vec![floor - 1e-9];
            if floor > alpha + 1e-9 {
                levels_c.push(alpha);
            }
            let mut levels_b = vec![ceil + 1e-9];
            if ceil < beta - 1e-9 {
                levels_b.push(beta);
            }
            for a in levels_c {
                checks += 1;
                match check_corollary_c(&p, &mu, &phi, a, &set, 64, 1e-10) {
                    Ok(r) => failed += usize::from(!r.passed),
                    Err(_) => errors += 1,
                }
            }
            for b in levels_b {
                checks += 1;
                match check_corollary_b(&p, &mu, &phi, b, &set, 64, 1e-10) {
                    Ok(r) => failed += usize::from(!r.passed),
                    Err(_) => errors += 1,
                }
            }
        }
    }
    verdict(
        failed == 0 && errors == 0,
        format!("{checks} class checks over 500 kernels: {failed} failed, {errors} precondition errors"),
    )
}

fn c6_kakutani() -> Verdict {
    let mut g = Gen::new(106);
    let (mut converged, mut accurate, mut uncapped_accurate) = (0, 0, 0);
    let mut needed = Vec::new();
    for _ in 0..200 {
        let k = g.range(2, 64);
        let p = g.ergodic_aperiodic(k);
        let mu = stationary_measures(&p, SOLVE_TOL, MAX_ITER).unwrap().remove(0);
        let phi = g.observable(k);
        let value = integrate(&phi, &mu).unwrap();
        if let Ok((limit, _)) = birkhoff_limit(&p, &phi, &mu, 1e-8, 1 << 20) {
            converged += 1;
            let dev = support(&mu, 0.0).iter().map(|&i| (limit[i] - value).abs()).fold(0.0, f64::max);
            accurate += usize::from(dev <= 1e-6);
        }
        if let Ok((limit, r)) = birkhoff_limit(&p, &phi, &mu, 1e-8, 1 << 40) {
            needed.push(r.iterations_used);
            let dev = support(&mu, 0.0).iter().map(|&i| (limit[i] - value).abs()).fold(0.0, f64::max);
            uncapped_accurate += usize::from(dev <= 1e-6);
        }
    }
    needed.sort_unstable();
    let median = needed.get(needed.len() / 2).map_or(0, |n| n.trailing_zeros());
    verdict(
        converged == 200 && accurate == 200,
        format!(
            "{converged}/200 reached residual 1e-8 by n = 2^20, {accurate}/200 within 1e-6; \
             uncapped: {} converged, median n = 2^{median}, {uncapped_accurate}/200 within 1e-6",
            needed.len()
        ),
    )
}

fn c7_periodic() -> Verdict {
    let swap = kernel_from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    let phi = Obs::new(vec![1.0, -2.0]).unwrap();
    let delta = Prob::point_mass(2, 0);
    let r = check_periodic_pointwise(&swap, 2, &phi, &delta, 1e-8, 1 << 40).unwrap();
    let (limit, _) = birkhoff_limit(&swap.power(2).unwrap(), &phi, &delta, 1e-8, 1 << 40).unwrap();
    let swap_ok = r.passed && r.lhs == 0.0 && limit[0] == 1.0;

    let mut g = Gen::new(107);
    let (mut runs, mut failed) = (0, 0);
    for t in 0..100 {
        let p = 2 + t % 3;
        let k = g.range(p, 48);
        let kernel = g.cyclic(k, p);
        let phi = g.observable(k);
        for m in periodic_measures(&kernel, p as u64, SOLVE_TOL, MAX_ITER).unwrap() {
            runs += 1;
            match check_periodic_pointwise(&kernel, p as u64, &phi, &m.measure, 1e-8, 1 << 40) {
                Ok(r) => failed += usize::from(!r.passed),
                Err(_) => failed += 1,
            }
        }
    }
    let mut identical = 0;
    for _ in 0..50 {
        let k = g.range(2, 32);
        let p = g.ergodic_aperiodic(k);
        let mu = stationary_measures(&p, SOLVE_TOL, MAX_ITER).unwrap().remove(0);
        let phi = g.observable(k);
        let a = check_periodic_pointwise(&p, 1, &phi, &mu, 1e-8, 1 << 40).unwrap();
        let b = check_ergodic_limit(&p, &phi, &mu, 1e-8, 1 << 40).unwrap();
        identical += usize::from(serde_json::to_string(&a).unwrap() == serde_json::to_string(&b).unwrap());
    }
    verdict(
        swap_ok && failed == 0 && identical == 50,
        format!("swap exact: {swap_ok}; cyclic: {failed} of {runs} failed; p = 1 identical: {identical}/50"),
    )
}

fn fixed_space_dimension(p: &Kernel, states: &[usize]) -> usize {
    let n = states.len();
    let m = DMatrix::from_fn(n, n, |a, b| p.get(states[a], states[b]) - if a == b { 1.0 } else { 0.0 });
    m.singular_values().iter().filter(|&&s| s < 1e-9).count()
}

fn c8_invariant_sets() -> Verdict {
    let mut g = Gen::new(108);
    let mut enum_bad = 0;
    let mut sampled = 0;
    while sampled < 200 {
        let k = g.range(1, 16);
        let p = g.reducible(k);
        let mu = solved_mixture(&p, &mut g);
        let supp = support(&mu, 0.0);
        if supp.len() > 12 {
            continue;
        }
        sampled += 1;
        let rep = invariant_sets(&p, &mu, SOLVE_TOL).unwrap();
        let mut brute = 0u128;
        let mut union_ok = true;
        for mask in 0u32..1 << supp.len() {
            let set: Vec<usize> = (0..supp.len()).filter(|b| mask >> b & 1 == 1).map(|b| supp[b]).collect();
            if is_invariant_set(&p, &mu, &set, SOLVE_TOL).unwrap() {
                brute += 1;
                union_ok &= rep.generators.iter().all(|gen| {
                    let inside = gen.iter().filter(|i| set.contains(i)).count();
                    inside == 0 || inside == gen.len()
                });
            }
        }
        enum_bad += usize::from(brute != rep.lattice_size || !union_ok);
    }

    let mut eigen_bad = 0;
    for _ in 0..200 {
        let k = g.range(2, 30);
        let p = g.reducible(k);
        let mu = solved_mixture(&p, &mut g);
        let gens = invariant_sets(&p, &mu, SOLVE_TOL).unwrap().generators;
        let values: Vec<f64> = gens.iter().map(|_| 2.0 * g.unit() - 1.0).collect();
        let mut phi = vec![0.0; k];
        for (set, v) in gens.iter().zip(&values) {
            for &i in set {
                phi[i] = *v;
            }
        }
        let phi = Obs::new(phi).unwrap();
        let alpha = values[g.below(values.len())];
        let lv = check_levelset_invariance(&p, &mu, &phi, alpha, 1e-12).unwrap();
        let psi = g.observable(k);
        let loc = gens.iter().all(|set| check_localization(&p, &mu, set, &psi, 1e-12).unwrap().passed);
        eigen_bad += usize::from(!lv.passed || !loc);
    }

    let mut dim_bad = 0;
    for t in 0..200 {
        let k = g.range(1, 30);
        let p = if t % 2 == 0 { g.reducible(k) } else { g.kernel(k) };
        let ms = stationary_measures(&p, SOLVE_TOL, MAX_ITER).unwrap();
        let mu = if t % 3 == 0 { solved_mixture(&p, &mut g) } else { ms[g.below(ms.len())].clone() };
        let dim = fixed_space_dimension(&p, &support(&mu, 0.0));
        dim_bad += usize::from((dim == 1) != is_ergodic(&p, &mu, SOLVE_TOL).unwrap());
    }
    verdict(
        enum_bad == 0 && eigen_bad == 0 && dim_bad == 0,
        format!("enumeration mismatches {enum_bad}/200, eigenfunction failures {eigen_bad}/200, dimension mismatches {dim_bad}/200"),
    )
}

fn c9_ulam() -> Verdict {
    let part = Partition::uniform(DomainKind::Circle, 256).unwrap();
    let noise = Noise::Uniform { half_width: 0.1 };
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, map) in [("rotation(0.37)", BaseMap::Rotation { angle: 0.37 }), ("doubling", BaseMap::Doubling)] {
        let sys = NoisySystem::new(map, noise.clone(), Boundary::Wrap).unwrap();
        let p: Kernel = ulam_discretize(&sys, &part, 16).unwrap();
        let col = p.column_sums().iter().fold(0.0f64, |m, c| m.max((c - 1.0).abs()));
        let ms = stationary_measures(&p, SOLVE_TOL, MAX_ITER).unwrap();
        let dist = ms[0].l1_distance(&Prob::uniform(256)).unwrap();
        ok &= ms.len() == 1 && col <= 1e-9 && dist <= 1e-8;
        parts.push(format!("{name}: column sums {col:.1e}, ‖mu - uniform‖₁ {dist:.1e}"));
    }
    verdict(ok, parts.join("; "))
}

fn c10_monte_carlo() -> Verdict {
    let p = kernel_from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
    let phi = Obs::new(vec![1.0, 0.0]).unwrap();
    let exact = exact_lj_phi(&p, &phi, 5).unwrap()[0];
    let inside = (0..100u64)
        .filter(|&r| {
            let e = estimate_lj_phi(&p, &phi, 0, 5, 100_000, stream_seed(2024, r)).unwrap();
            (e.mean - exact).abs() <= 4.0 * e.stderr
        })
        .count();
    let a = estimate_lj_phi(&p, &phi, 0, 5, 100_000, 77).unwrap();
    let b = estimate_lj_phi(&p, &phi, 0, 5, 100_000, 77).unwrap();
    let ta = sample_trajectory(&p, 0, 10_000, 77).unwrap();
    let tb = sample_trajectory(&p, 0, 10_000, 77).unwrap();
    let same = serde_json::to_vec(&a).unwrap() == serde_json::to_vec(&b).unwrap()
        && serde_json::to_vec(&ta).unwrap() == serde_json::to_vec(&tb).unwrap();
    verdict(inside >= 95 && same, format!("{inside}/100 within 4 stderr of {exact:.6}; reruns identical: {same}"))
}

fn c11_cli() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_noisy-ergodic");
    let suite = Path::new(env!("CARGO_MANIFEST_DIR")).join("suite");
    let tmp = tempfile::tempdir().unwrap();
    let code = |args: &[&str], out: &Path| {
        Command::new(bin).args(args).arg("--out").arg(out).output().unwrap().status.code().unwrap()
    };
    let mut configs: Vec<_> = std::fs::read_dir(&suite)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    configs.sort();
    let mut bad = Vec::new();
    for c in &configs {
        let out = tmp.path().join(c.file_stem().unwrap());
        let status = code(&["verify", "all", "--config", c.to_str().unwrap()], &out);
        if status != 0 {
            bad.push(format!("{}={status}", c.file_stem().unwrap().to_string_lossy()));
        }
    }
    let corrupt = tmp.path().join("corrupt.kernel");
    let text = std::fs::read_to_string(suite.join("two_state.kernel")).unwrap();
    std::fs::write(&corrupt, text.replace("1 1 0.8", "1 1 0.9")).unwrap();
    let corrupt_code = code(&["verify", "all", "--kernel", corrupt.to_str().unwrap()], &tmp.path().join("c"));
    let two = suite.join("two_state.kernel");
    let ns_code =
        code(&["verify", "maximal", "--kernel", two.to_str().unwrap(), "--mu", "0.5,0.5"], &tmp.path().join("n"));
    let doubling = suite.join("doubling64.toml");
    let args = ["verify", "all", "--config", doubling.to_str().unwrap(), "--seed", "42"];
    let (ra, rb) = (tmp.path().join("ra"), tmp.path().join("rb"));
    let same = code(&args, &ra) == 0
        && code(&args, &rb) == 0
        && std::fs::read(ra.join("verify.json")).unwrap() == std::fs::read(rb.join("verify.json")).unwrap();
    verdict(
        bad.is_empty() && corrupt_code == 3 && ns_code == 5 && same,
        format!(
            "suite of {}: nonzero {:?}; corrupted kernel exit {corrupt_code}; non-stationary exit {ns_code}; identical reports {same}",
            configs.len(),
            bad
        ),
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Verdict); 11] = [
        (1, "duality identity", c1_duality),
        (2, "operator axioms", c2_axioms),
        (3, "positive-part lemmas", c3_lemmas),
        (4, "maximal ergodic theorem", c4_maximal),
        (5, "corollaries on closed classes", c5_corollaries),
        (6, "Kakutani limit and ergodic value", c6_kakutani),
        (7, "periodic pointwise theorem", c7_periodic),
        (8, "invariant-set machinery", c8_invariant_sets),
        (9, "Ulam fidelity", c9_ulam),
        (10, "Monte Carlo consistency", c10_monte_carlo),
        (11, "CLI contract", c11_cli),
    ];
    let mut failed = Vec::new();
    for (id, title, run) in criteria {
        let start = Instant::now();
        let v = run();
        let mark = if v.passed { "PASS" } else { "FAIL" };
        println!("[{mark}] {id:>2} {title}: {} ({:.2}s)", v.detail, start.elapsed().as_secs_f64());
        if !v.passed {
            failed.push(id);
        }
    }
    println!("failing criteria: {failed:?}; expected: {EXPECTED_FAILURES:?}");
    if failed != EXPECTED_FAILURES {
        std::process::exit(1);
    }
}

//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hetlb::binomial::binom_u128;
use hetlb::distribution::ClassDist;
use hetlb::experiment::{self, ExperimentSettings};
use hetlb::graph::CompatibilityGraph;
use hetlb::meanfield::{self, IntegrateOptions};
use hetlb::par::Execution;
use hetlb::sim::{assignment_class_pmf, run_coupled, RunOptions, SimState};
use hetlb::stability::{asymptotic_load_lower_bound, binom_allocation_max, rho_exact, subcritical_check};
use hetlb::{presets, OccupancyVector, SystemParams};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<(), String> {
    let spent = start.elapsed();
    if spent <= budget {
        Ok(())
    } else {
        Err(format!("took {spent:.1?}, budget {budget:?}"))
    }
}

fn homogeneous_closed_form() -> Outcome {
    let start = Instant::now();
    let params = presets::homogeneous(0.7, 2);
    let fp = meanfield::fixed_point(&params, 1e-10).map_err(|e| e.to_string())?;
    let err = (0..=6)
        .map(|l| (fp.q.get(0, l) - 0.7f64.powf(2f64.powi(l as i32) - 1.0)).abs())
        .fold(0.0, f64::max);
    within_budget(start, Duration::from_secs(5))?;
    check(err < 1e-6, format!("max |q*_l - 0.7^(2^l-1)| over l<=6 = {err:.2e} in {:.2?}", start.elapsed()))
}

fn instability_certificate() -> Outcome {
    let start = Instant::now();
    let params = presets::reference_params();
    let lb = asymptotic_load_lower_bound(&params.complete(), &[1.0, 0.0, 0.0]).map_err(|e| e.to_string())?;
    // direct substitution: delta_k and r_m written out by hand
    let (lam, xi) = (3.0, 1.0);
    let (w, v, u) = ([0.2, 0.8], [0.5, 0.3, 0.2], [1.0, 5.0, 10.0]);
    let p = [[0.05, 0.6, 1.0], [0.1, 0.7, 1.0]];
    let delta = [
        p[0][0] * v[0] + p[0][1] * v[1] + p[0][2] * v[2],
        p[1][0] * v[0] + p[1][1] * v[1] + p[1][2] * v[2],
    ];
    let oracle: Vec<f64> =
        (0..3).map(|m| lam * xi / u[m] * (w[0] * p[0][m] / delta[0] + w[1] * p[1][m] / delta[1])).collect();
    let margins = subcritical_check(&params);
    let dev = margins.loads.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let printed = [0.5958, 0.9082, 0.6699];
    let rounding = margins.loads.iter().zip(printed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    within_budget(start, Duration::from_secs(1))?;
    check(
        (lb - 1.5).abs() < 1e-12 && lb > 1.0 && margins.subcritical && dev < 1e-9 && rounding < 5e-5,
        format!(
            "lower bound {lb}, margins ({:.6}, {:.6}, {:.6}), oracle deviation {dev:.1e}",
            margins.loads[0], margins.loads[1], margins.loads[2]
        ),
    )
}

fn fixed_point_identities() -> Outcome {
    let start = Instant::now();
    let params = presets::reference_params();
    let fp = meanfield::fixed_point(&params, 1e-10).map_err(|e| e.to_string())?;
    let flow = meanfield::flow_balance_residual(&fp.q, &params);
    let level = meanfield::level_identity_residuals(&fp.q, &params).into_iter().fold(0.0, f64::max);
    within_budget(start, Duration::from_secs(30))?;
    check(flow < 1e-8 && level < 1e-8, format!("flow balance residual {flow:.2e}, max level residual {level:.2e}"))
}

fn settings(n: usize, seeds: usize) -> ExperimentSettings {
    ExperimentSettings {
        n,
        seeds,
        horizon: 2.5,
        snapshot_dt: 0.1,
        master_seed: 2024,
        l_max: 64,
        exec: Execution::Parallel,
    }
}

fn simulation_convergence() -> Outcome {
    let params = presets::reference_params();
    let init = presets::rows(&presets::INIT_Q);
    let conv = experiment::convergence(&params, &init, &[100, 1000], &settings(1000, 100)).map_err(|e| e.to_string())?;
    let (small, large) = (&conv.sup_errors[0], &conv.sup_errors[1]);
    let worst = large.iter().copied().fold(0.0, f64::max);
    let ordered = small.iter().zip(large).all(|(s, l)| l < s);
    let fmt = |xs: &[f64]| xs.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ");
    check(
        worst <= 0.05 && ordered,
        format!("sup error N=1000 [{}] vs N=100 [{}]", fmt(large), fmt(small)),
    )
}

fn coupling_invariants() -> Outcome {
    let homog = presets::homogeneous(0.9, 2);
    let g = CompatibilityGraph::complete(&homog, 200);
    let init = SimState::from_pmf_rows(&g, &[vec![0.4, 0.4, 0.2]]).map_err(|e| e.to_string())?;
    let mut zero = true;
    for seed in 0..5 {
        let run = run_coupled(&g, &homog, &init, &RunOptions::new(2.5, 0.1), seed).map_err(|e| e.to_string())?;
        zero &= run.mismatch.delta.iter().all(|&d| d == 0) && run.max_gap == 0;
    }
    // every run_coupled call checks sum|Q - Q'| <= 2 Delta after each event and errors otherwise
    let params = presets::reference_params();
    let q = presets::rows(&presets::INIT_Q);
    let study = experiment::coupling(&params, Some(&q), &[100, 1000], &settings(1000, 20)).map_err(|e| e.to_string())?;
    let ratio = study.mean_ratio();
    let events: u64 = study.runs.iter().flatten().map(|r| r.events).sum();
    check(
        zero && ratio[1] < ratio[0],
        format!(
            "bound held over {events} coupled events; complete homogeneous Delta == 0: {zero}; mean Delta(2.5)/N: N=100 {:.4}, N=1000 {:.4}",
            ratio[0], ratio[1]
        ),
    )
}

fn random_ordered_pair(rng: &mut ChaCha8Rng, types: usize, l_max: usize) -> (OccupancyVector, OccupancyVector) {
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for _ in 0..types {
        let mut a: Vec<f64> = vec![1.0];
        let mut b: Vec<f64> = vec![1.0];
        for l in 1..=l_max {
            let bl: f64 = if l <= 4 { b[l - 1] * rng.random::<f64>() } else { 0.0 };
            let al = a[l - 1].min(bl) * rng.random::<f64>();
            b.push(bl);
            a.push(al);
        }
        lo.push(a);
        hi.push(b);
    }
    (OccupancyVector::from_tails(&lo).unwrap(), OccupancyVector::from_tails(&hi).unwrap())
}

fn global_stability() -> Outcome {
    let start = Instant::now();
    let params = presets::reference_params();
    let inits: Vec<(String, Vec<Vec<f64>>)> = [("Q", presets::INIT_Q), ("Q1", presets::INIT_Q1), ("Q2", presets::INIT_Q2)]
        .iter()
        .map(|(n, q)| (n.to_string(), presets::rows(q)))
        .collect();
    let uniq = experiment::uniqueness(&params, &inits, 50.0, 0.5, 64, Execution::Parallel).map_err(|e| e.to_string())?;
    let spread = uniq.spread();

    let mut rng = ChaCha8Rng::seed_from_u64(53);
    let pairs: Vec<_> = (0..50).map(|_| random_ordered_pair(&mut rng, 3, 16)).collect();
    let opts = IntegrateOptions { step: 1e-3, sample_dt: 0.1 };
    let results = hetlb::par::map(Execution::Parallel, &pairs, |(lo, hi)| {
        let a = meanfield::integrate(lo, 5.0, &params, &opts)?;
        let b = meanfield::integrate(hi, 5.0, &params, &opts)?;
        Ok::<_, hetlb::Error>(a.trajectory.snapshots.iter().zip(&b.trajectory.snapshots).all(|(x, y)| x.dominated_by(y, 1e-7)))
    });
    let mut ordered = 0;
    for r in results {
        ordered += usize::from(r.map_err(|e| e.to_string())?);
    }
    within_budget(start, Duration::from_secs(60))?;
    check(
        spread < 1e-3 && ordered == 50,
        format!("endpoint spread of q_(m,1)(50) = {spread:.2e}; ordering preserved in {ordered}/50 pairs"),
    )
}

/// Stability load by enumerating every d-subset of each neighborhood.
fn brute_rho(graph: &CompatibilityGraph, params: &SystemParams) -> f64 {
    let n = graph.num_servers();
    let d = params.d();
    let mut best = f64::NEG_INFINITY;
    for mask in 1u32..(1 << n) {
        let inside = |j: u32| mask & (1 << j) != 0;
        let service: f64 = (0..n as u32).filter(|&j| inside(j)).map(|j| params.u()[graph.server_type(j as usize)]).sum();
        let mut arrivals = 0.0;
        for i in 0..graph.num_dispatchers() {
            let nb = graph.neighbors(i);
            if nb.is_empty() {
                continue;
            }
            if nb.len() < d {
                arrivals += params.lambda() * nb.iter().filter(|&&j| inside(j)).count() as f64 / nb.len() as f64;
                continue;
            }
            let (mut hit, mut all) = (0u64, 0u64);
            for sub in 0u32..(1 << nb.len()) {
                if sub.count_ones() as usize != d {
                    continue;
                }
                all += 1;
                if (0..nb.len()).filter(|b| sub & (1 << b) != 0).all(|b| inside(nb[b])) {
                    hit += 1;
                }
            }
            arrivals += params.lambda() * hit as f64 / all as f64;
        }
        let value = arrivals / service;
        if value > best {
            best = value;
        }
    }
    best
}

fn exhaustive_allocation(slots: u64, c: u64, cap: u64, d: u64) -> Option<u128> {
    if slots == 0 {
        return (c == 0).then_some(0);
    }
    (0..=cap.min(c))
        .filter_map(|x| exhaustive_allocation(slots - 1, c - x, cap, d).map(|rest| rest + binom_u128(x, d)))
        .max()
}

/// Class pmf by enumerating all d-subsets of a labelled pool.
fn enumerated_class_pmf(counts: &[Vec<usize>], d: usize) -> Vec<Vec<f64>> {
    let labels: Vec<(usize, usize)> = counts
        .iter()
        .enumerate()
        .flat_map(|(m, row)| row.iter().enumerate().flat_map(move |(l, &c)| std::iter::repeat_n((m, l), c)))
        .collect();
    let s = labels.len();
    let mut out = vec![vec![0.0; counts[0].len()]; counts.len()];
    let mut total = 0.0;
    for sub in 0u32..(1 << s) {
        if sub.count_ones() as usize != d {
            continue;
        }
        total += 1.0;
        let chosen: Vec<(usize, usize)> = (0..s).filter(|b| sub & (1 << b) != 0).map(|b| labels[b]).collect();
        let l_star = chosen.iter().map(|c| c.1).min().unwrap();
        let at_min: Vec<usize> = chosen.iter().filter(|c| c.1 == l_star).map(|c| c.0).collect();
        for &m in &at_min {
            out[m][l_star] += 1.0 / at_min.len() as f64;
        }
    }
    out.iter_mut().flatten().for_each(|x| *x /= total);
    out
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut rho_dev: f64 = 0.0;
    for _ in 0..200 {
        let k = rng.random_range(1..=2);
        let m = rng.random_range(1..=3);
        let frac = |rng: &mut ChaCha8Rng, len: usize| {
            let raw: Vec<f64> = (0..len).map(|_| rng.random_range(0.2..1.0)).collect();
            let s: f64 = raw.iter().sum();
            let mut out: Vec<f64> = raw.iter().map(|x| x / s).collect();
            let head: f64 = out[..len - 1].iter().sum();
            out[len - 1] = 1.0 - head;
            out
        };
        let w = frac(&mut rng, k);
        let v = frac(&mut rng, m);
        let u: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..5.0)).collect();
        let p: Vec<Vec<f64>> = (0..k).map(|_| (0..m).map(|_| rng.random_range(0.3..1.0)).collect()).collect();
        let params = SystemParams::new(rng.random_range(1..=3), rng.random_range(0.1..2.0), 1.0, w, v, u, p)
            .map_err(|e| e.to_string())?;
        let n = rng.random_range(1..=10);
        let graph = hetlb::graph::irg_sample(&params, n, rng.random());
        let fast = rho_exact(&graph, &params).map_err(|e| e.to_string())?.rho;
        let slow = brute_rho(&graph, &params);
        let dev = if fast.is_finite() || slow.is_finite() { (fast - slow).abs() / slow.abs().max(1.0) } else { 0.0 };
        rho_dev = rho_dev.max(dev);
    }

    let mut alloc_mismatch = 0;
    let mut alloc_cases = 0;
    for slots in 1..=4u64 {
        for cap in 0..=5u64 {
            for d in 1..=4u64 {
                for c in 0..=slots * cap {
                    alloc_cases += 1;
                    let fast = binom_allocation_max(slots, c, cap, d).map_err(|e| e.to_string())?;
                    if Some(fast) != exhaustive_allocation(slots, c, cap, d) {
                        alloc_mismatch += 1;
                    }
                }
                if binom_allocation_max(slots, slots * cap + 1, cap, d).is_ok() {
                    alloc_mismatch += 1;
                }
            }
        }
    }

    let mut pmf_dev: f64 = 0.0;
    let mut pmf_cases = 0;
    for s in 1..=8usize {
        for d in 1..=3usize.min(s) {
            for _ in 0..20 {
                let types = rng.random_range(1..=3);
                let levels = rng.random_range(1..=3);
                let mut counts = vec![vec![0usize; levels]; types];
                for _ in 0..s {
                    counts[rng.random_range(0..types)][rng.random_range(0..levels)] += 1;
                }
                let dist = ClassDist::from_fn(types, levels, |m, l| counts[m][l] as f64 / s as f64);
                let fast = assignment_class_pmf(&dist, s as f64, d).map_err(|e| e.to_string())?;
                let slow = enumerated_class_pmf(&counts, d);
                for m in 0..types {
                    for l in 0..levels {
                        pmf_dev = pmf_dev.max((fast.get(m, l) - slow[m][l]).abs());
                    }
                }
                pmf_cases += 1;
            }
        }
    }
    within_budget(start, Duration::from_secs(60))?;
    check(
        rho_dev < 1e-12 && alloc_mismatch == 0 && pmf_dev < 1e-12,
        format!(
            "rho max rel deviation {rho_dev:.1e} on 200 graphs; allocation mismatches {alloc_mismatch}/{alloc_cases}; class pmf max deviation {pmf_dev:.1e} on {pmf_cases} pools"
        ),
    )
}

fn stability_comparison() -> Outcome {
    let params = presets::reference_params();
    let init = presets::rows(&presets::INIT_Q);
    let cmp = experiment::stability_compare(&params, Some(&init), &settings(1000, 100)).map_err(|e| e.to_string())?;
    let frac = cmp.win_fraction();
    let (c, d) = cmp.pairs.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let n = cmp.pairs.len() as f64;
    check(
        frac >= 0.95,
        format!(
            "complete graph longer in {:.0}% of {} pairs; mean type-1 queue at t=2.5: complete {:.3}, designed {:.3}",
            100.0 * frac,
            cmp.pairs.len(),
            c / n,
            d / n
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("homogeneous fixed point closed form", homogeneous_closed_form),
        ("instability certificate and subcritical margins", instability_certificate),
        ("fixed-point flow and level identities", fixed_point_identities),
        ("simulation converges to the ODE", simulation_convergence),
        ("coupling invariants", coupling_invariants),
        ("uniqueness and monotone ODE flow", global_stability),
        ("small-scale oracle equivalence", oracle_equivalence),
        ("complete graph versus designed graph", stability_comparison),
    ];
    let mut failed = 0;
    for (idx, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name} ({secs:.1}s): {detail}", idx + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({secs:.1}s): {detail}", idx + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

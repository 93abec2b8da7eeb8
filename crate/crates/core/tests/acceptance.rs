//! Acceptance suite. Prints one pass/fail line per criterion and exits
//! non-zero when any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::io::Cursor;
use std::process::ExitCode;
use std::time::Instant;

use common::{max_rel_diff, random_tensor, zipf_tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sptucker::dense::{dense_hooi, dense_penultimate, densify, DenseCaps, DenseMatrix};
use sptucker::engine::{
    build_local_penultimates, fit, init_factors, Component, Executor, HooiConfig, HooiEngine, IterationBudget,
    Stopping,
};
use sptucker::linalg::Matrix;
use sptucker::metrics::compute_metrics;
use sptucker::schemes::{lite_distribute_traced, load_external_policy, CoarseVariant, DistributionScheme};
use sptucker::tensor::{Element, SparseTensor};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(failures: &[String], ok: String) -> Outcome {
    match failures.first() {
        None => Outcome { pass: true, detail: ok },
        Some(first) => Outcome {
            pass: false,
            detail: format!("{} failure(s), first: {first}", failures.len()),
        },
    }
}

/// (Emax, Rsum, Rmax, nonempty) counted from the policy itself.
fn recount(t: &SparseTensor, scheme: &DistributionScheme, mode: usize) -> (usize, usize, usize, usize) {
    let policy = scheme.policy(mode);
    let mut elems = vec![0usize; scheme.ranks()];
    let mut rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); scheme.ranks()];
    let mut nonempty = BTreeSet::new();
    for e in 0..t.nnz() {
        let p = policy.rank_of(e);
        let l = t.element(e).coords[mode];
        elems[p] += 1;
        rows[p].insert(l);
        nonempty.insert(l);
    }
    (
        elems.iter().copied().max().unwrap_or(0),
        rows.iter().map(BTreeSet::len).sum(),
        rows.iter().map(BTreeSet::len).max().unwrap_or(0),
        nonempty.len(),
    )
}

fn random_external(t: &SparseTensor, ranks: usize, rng: &mut ChaCha8Rng) -> DistributionScheme {
    let text: String = (0..t.nnz()).map(|e| format!("{e} {}\n", rng.gen_range(0..ranks))).collect();
    load_external_policy(Cursor::new(text), t, ranks).unwrap()
}

fn skewed_or_uniform(rng: &mut ChaCha8Rng, case: usize) -> SparseTensor {
    let four_d = case % 2 == 1;
    let dims: Vec<usize> = if four_d {
        (0..4).map(|_| rng.gen_range(2..=12)).collect()
    } else {
        (0..3).map(|_| rng.gen_range(2..=30)).collect()
    };
    let cells: usize = dims.iter().product();
    let nnz = rng.gen_range(1..=cells.min(2000));
    if case % 4 < 2 {
        random_tensor(rng, &dims, nnz)
    } else {
        let exponent = rng.gen_range(0.8..2.0);
        zipf_tensor(rng, &dims, nnz, exponent)
    }
}

fn theorem1_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut failures = Vec::new();
    let mut stage2_slices = 0usize;
    let cases = 1000;
    for case in 0..cases {
        let t = skewed_or_uniform(&mut rng, case);
        let ranks = rng.gen_range(2..=64);
        let scheme = DistributionScheme::lite(&t, ranks).unwrap();
        for mode in 0..t.order() {
            let (emax, rsum, rmax, nonempty) = recount(&t, &scheme, mode);
            let (eb, sb, mb) = (t.nnz().div_ceil(ranks), nonempty + ranks, nonempty.div_ceil(ranks) + 2);
            if emax > eb || rsum > sb || rmax > mb {
                failures.push(format!(
                    "case {case} mode {} P={ranks}: Emax {emax}/{eb} Rsum {rsum}/{sb} Rmax {rmax}/{mb}",
                    mode + 1
                ));
            }
            let (_, trace) = lite_distribute_traced(&t, mode, ranks).unwrap();
            if trace.least_loaded_violations != 0 {
                failures.push(format!("case {case} mode {}: stage 1 left the least-loaded rank", mode + 1));
            }
            for (slice, sharers) in &trace.stage2_sharers {
                stage2_slices += 1;
                if sharers.len() < 2 {
                    failures.push(format!("case {case} mode {}: stage-2 slice {slice} on one rank", mode + 1));
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if secs > 120.0 {
        failures.push(format!("runtime {secs:.1} s over 120 s"));
    }
    outcome(
        &failures,
        format!("{cases} tensors, zero bound violations, {stage2_slices} stage-2 slices all shared, {secs:.1} s"),
    )
}

/// Direct transcription of the two-stage procedure on slice sizes alone.
/// Returns (stage-1 count, loads, ranks per slice in processing order).
fn replay(sizes: &[usize], ranks: usize) -> (usize, Vec<usize>, Vec<Vec<usize>>) {
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by_key(|&l| (sizes[l], l));
    let limit = sizes.iter().sum::<usize>().div_ceil(ranks);
    let mut loads = vec![0; ranks];
    let mut owners = vec![Vec::new(); order.len()];
    let mut t = 0;
    let mut p = 0;
    while t < order.len() && loads[p] + sizes[order[t]] <= limit {
        loads[p] += sizes[order[t]];
        owners[t].push(p);
        p = (p + 1) % ranks;
        t += 1;
    }
    let stage1 = t;
    let mut left: Vec<usize> = order.iter().map(|&l| sizes[l]).collect();
    p = 0;
    while p < ranks && t < order.len() {
        let gap = limit - loads[p];
        if left[t] <= gap {
            loads[p] += left[t];
            owners[t].push(p);
            t += 1;
        } else {
            if gap > 0 {
                loads[p] += gap;
                left[t] -= gap;
                owners[t].push(p);
            }
            p += 1;
        }
    }
    (stage1, loads, owners)
}

fn figure6() -> Outcome {
    let sizes = [5, 5, 5, 5, 5, 5, 5, 18, 22, 25];
    let elements = sizes
        .iter()
        .enumerate()
        .flat_map(|(l, &s)| (0..s).map(move |k| Element::new(vec![l, k, 0], 1.0)));
    let t = SparseTensor::new(vec![10, 25, 1], elements).unwrap();
    let (policy, trace) = lite_distribute_traced(&t, 0, 5).unwrap();
    let scheme = DistributionScheme::lite(&t, 5).unwrap();
    let (emax, rsum, rmax, _) = recount(&t, &scheme, 0);
    let (stage1, loads, owners) = replay(&sizes, 5);

    let mut failures = Vec::new();
    let mut check = |ok: bool, what: String| {
        if !ok {
            failures.push(what);
        }
    };
    check(trace.stage1_slices == 7, format!("stage-1 slices {}", trace.stage1_slices));
    check(policy.loads() == vec![20; 5], format!("loads {:?}", policy.loads()));
    check((emax, rsum, rmax) == (20, 14, 4), format!("Emax/Rsum/Rmax {emax}/{rsum}/{rmax}"));
    check(stage1 == trace.stage1_slices, format!("replay stage-1 {stage1}"));
    check(loads == policy.loads(), format!("replay loads {loads:?}"));
    let replay_sharers: Vec<(usize, Vec<usize>)> =
        owners[stage1..].iter().enumerate().map(|(i, o)| (trace.order[stage1 + i], o.clone())).collect();
    check(replay_sharers == trace.stage2_sharers, format!("sharers {:?} vs replay {replay_sharers:?}", trace.stage2_sharers));
    let replay_rsum: usize = owners.iter().map(Vec::len).sum();
    check(replay_rsum == 14, format!("replay Rsum {replay_rsum}"));
    outcome(
        &failures,
        format!("7 stage-1 slices, loads 20x5, Rsum 14, Rmax 4, stage-2 sharers {:?}", trace.stage2_sharers),
    )
}

fn penultimate_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let caps = DenseCaps::default();
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    let mut checks = 0;
    for case in 0..100u64 {
        let order = if case % 3 == 0 { 4 } else { 3 };
        let dims: Vec<usize> = loop {
            let d: Vec<usize> = (0..order).map(|_| rng.gen_range(1..=if order == 4 { 10 } else { 21 })).collect();
            if d.iter().product::<usize>() <= 10_000 {
                break d;
            }
        };
        let cells: usize = dims.iter().product();
        let nnz = rng.gen_range(1..=cells.min(800));
        let t = random_tensor(&mut rng, &dims, nnz);
        let ranks = rng.gen_range(1..=8);
        let factors: Vec<Matrix> =
            dims.iter().map(|&l| Matrix::random_gaussian(l, rng.gen_range(1..=3), &mut rng)).collect();
        let dense_f: Vec<DenseMatrix> = factors.iter().map(DenseMatrix::from).collect();
        let schemes = [
            ("single", DistributionScheme::single_rank(&t)),
            ("lite", DistributionScheme::lite(&t, ranks).unwrap()),
            ("coarse", DistributionScheme::coarse(&t, ranks, case, CoarseVariant::Contiguous).unwrap()),
            ("bestfit", DistributionScheme::coarse(&t, ranks, case, CoarseVariant::BestFit).unwrap()),
            ("medium", DistributionScheme::medium(&t, ranks, case).unwrap()),
            ("external", random_external(&t, ranks, &mut rng)),
        ];
        for mode in 0..order {
            let dense = dense_penultimate(&t, &dense_f, mode, &caps).unwrap();
            for (name, scheme) in &schemes {
                let locals = build_local_penultimates(&t, scheme, &factors, mode).unwrap();
                let mut sum = vec![0.0; dense.values.len()];
                for z in &locals {
                    for (acc, v) in sum.iter_mut().zip(z.expand(dims[mode]).as_slice()) {
                        *acc += v;
                    }
                }
                let d = max_rel_diff(&sum, &dense.values);
                worst = worst.max(d);
                checks += 1;
                if d > 1e-12 {
                    failures.push(format!("case {case} {name} mode {}: {d:e}", mode + 1));
                }
            }
        }
    }
    outcome(&failures, format!("100 tensors, {checks} scheme-mode pairs, worst relative difference {worst:.1e}"))
}

fn ledger_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures = Vec::new();
    let mut runs = 0;
    let instances: [(&[usize], &[usize], usize); 4] = [
        (&[8, 7, 6, 5], &[2, 2, 2, 2], 500),
        (&[12, 11, 10], &[3, 3, 3], 600),
        (&[14, 12, 10], &[3, 3, 3], 900),
        (&[9, 8, 7, 6], &[2, 2, 2, 2], 1200),
    ];
    for (i, &(dims, core, nnz)) in instances.iter().enumerate() {
        let t = random_tensor(&mut rng, dims, nnz);
        for ranks in [2usize, 5, 8] {
            let schemes = [
                ("single", DistributionScheme::single_rank(&t)),
                ("medium", DistributionScheme::medium(&t, ranks, i as u64).unwrap()),
                ("external", random_external(&t, ranks, &mut rng)),
            ];
            for (name, scheme) in &schemes {
                let invocations = 2;
                let config = HooiConfig {
                    stopping: Stopping::Invocations(invocations),
                    ..HooiConfig::new(core.to_vec(), 7)
                };
                let run = HooiEngine::new(&t, scheme, config, Executor::serial())
                    .unwrap()
                    .run(init_factors(t.dims(), core, 7).unwrap())
                    .unwrap();
                runs += 1;
                for (n, &k) in core.iter().enumerate() {
                    let (_, rsum, _, nonempty) = recount(&t, scheme, n);
                    let excess = (rsum - nonempty) as u64;
                    let l = run.ledger.mode(n);
                    let q = 4 * k as u64;
                    let tag = format!("instance {i} {name} P={ranks} mode {}", n + 1);
                    if l.queries_per_run != vec![q; invocations] {
                        failures.push(format!("{tag}: queries {:?}", l.queries_per_run));
                    }
                    let svd: u64 = l.queries_per_run.iter().map(|&qr| qr * excess).sum();
                    if l.svd_total() != svd {
                        failures.push(format!("{tag}: svd {} vs {svd}", l.svd_total()));
                    }
                    let transfer = k as u64 * excess * l.transfers;
                    if l.total(Component::FactorTransfer) != transfer || l.transfers != invocations as u64 {
                        failures.push(format!("{tag}: transfer {} vs {transfer}", l.total(Component::FactorTransfer)));
                    }
                }
            }
        }
    }
    outcome(&failures, format!("{runs} uni-policy runs, Q = 4K on every run, svd and transfer volumes exact"))
}

fn coarse_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = Vec::new();
    let cases = 300;
    for case in 0..cases {
        let t = skewed_or_uniform(&mut rng, case);
        let ranks = rng.gen_range(1..=64);
        for variant in [CoarseVariant::Contiguous, CoarseVariant::BestFit] {
            let scheme = DistributionScheme::coarse(&t, ranks, case as u64, variant).unwrap();
            let report = compute_metrics(&t, &scheme, &vec![1; t.order()]).unwrap();
            for (n, m) in report.modes.iter().enumerate() {
                let (_, rsum, _, nonempty) = recount(&t, &scheme, n);
                if rsum != nonempty || m.rsum != m.nonempty || m.predicted.svd_volume != 0 {
                    failures.push(format!("case {case} {variant:?} mode {}: Rsum {rsum} nonempty {nonempty}", n + 1));
                }
            }
        }
    }
    outcome(&failures, format!("{cases} tensors, both variants, Rsum = nonempty and predicted svd volume 0"))
}

fn engine_vs_dense() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let caps = DenseCaps::default();
    let mut failures = Vec::new();
    let (mut worst_fit, mut worst_sv, mut worst_orth) = (0.0f64, 0.0f64, 0.0f64);
    let instances: [(&[usize], &[usize], usize); 4] = [
        (&[5, 4, 3], &[2, 2, 2], 40),
        (&[6, 5, 4], &[3, 2, 2], 80),
        (&[7, 6, 5], &[3, 3, 3], 150),
        (&[8, 7, 6, 5], &[3, 3, 3, 3], 600),
    ];
    let invocations = 4;
    for (i, &(dims, core, nnz)) in instances.iter().enumerate() {
        let t = random_tensor(&mut rng, dims, nnz);
        let init = init_factors(t.dims(), core, 11 + i as u64).unwrap();
        let d = densify(&t, &caps).unwrap();
        let oracle = dense_hooi(&d, core, &init.iter().map(DenseMatrix::from).collect::<Vec<_>>(), invocations, &caps)
            .unwrap();
        for (name, scheme) in [("lite", DistributionScheme::lite(&t, 4).unwrap()), ("medium", DistributionScheme::medium(&t, 6, 2).unwrap())] {
            let mut config = HooiConfig::new(core.to_vec(), 11 + i as u64);
            config.budget = IterationBudget::Exhaustive;
            let mut engine = HooiEngine::new(&t, &scheme, config, Executor::serial()).unwrap();
            let mut factors = init.clone();
            for inv in 0..invocations {
                let report = engine.invoke(&mut factors).unwrap();
                let tag = format!("instance {i} {name} invocation {}", inv + 1);
                for f in &factors {
                    worst_orth = worst_orth.max(f.orthonormality_error());
                    if f.orthonormality_error() > 1e-8 {
                        failures.push(format!("{tag}: orthonormality {:e}", f.orthonormality_error()));
                    }
                }
                let ours = fit(&t, &engine.core(&factors).unwrap());
                let delta = (ours - oracle.fit_history[inv]).abs();
                worst_fit = worst_fit.max(delta);
                if delta > 1e-8 {
                    failures.push(format!("{tag}: fit {ours} vs {}", oracle.fit_history[inv]));
                }
                for (n, sv) in report.singular_values.iter().enumerate() {
                    for (a, b) in sv.iter().zip(&oracle.singular_values[inv][n]) {
                        let rel = (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
                        worst_sv = worst_sv.max(rel);
                        if rel > 1e-6 {
                            failures.push(format!("{tag} mode {}: singular value {a} vs {b}", n + 1));
                        }
                    }
                }
            }
        }
    }
    outcome(
        &failures,
        format!(
            "up to 8x7x6x5 with K=(3,3,3,3), worst fit delta {worst_fit:.1e}, singular value {worst_sv:.1e}, orthonormality {worst_orth:.1e}"
        ),
    )
}

fn scheme_independence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    let instances: [(&[usize], &[usize], usize); 3] =
        [(&[10, 9, 8], &[3, 3, 3], 300), (&[12, 10, 9], &[2, 2, 2], 400), (&[8, 7, 6, 5], &[2, 2, 2, 2], 500)];
    for (i, &(dims, core, nnz)) in instances.iter().enumerate() {
        let t = random_tensor(&mut rng, dims, nnz);
        let init = init_factors(t.dims(), core, 21).unwrap();
        let schemes = [
            ("single", DistributionScheme::single_rank(&t)),
            ("lite", DistributionScheme::lite(&t, 6).unwrap()),
            ("coarse", DistributionScheme::coarse(&t, 6, 3, CoarseVariant::Contiguous).unwrap()),
            ("medium", DistributionScheme::medium(&t, 6, 3).unwrap()),
        ];
        let fits: Vec<(&str, f64)> = schemes
            .iter()
            .map(|(name, scheme)| {
                let run = HooiEngine::new(&t, scheme, HooiConfig::new(core.to_vec(), 21), Executor::serial())
                    .unwrap()
                    .run(init.clone())
                    .unwrap();
                (*name, run.final_fit())
            })
            .collect();
        for (name, f) in &fits[1..] {
            let delta = (f - fits[0].1).abs();
            worst = worst.max(delta);
            if delta > 1e-6 {
                failures.push(format!("instance {i}: {name} fit {f} vs single {}", fits[0].1));
            }
        }
    }
    outcome(&failures, format!("3 tensors, 5 invocations, worst final-fit spread {worst:.1e}"))
}

fn determinism() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let t = random_tensor(&mut rng, &[12, 10, 8], 300);
    let core = vec![3, 2, 2];
    let mut failures = Vec::new();
    let artifacts = |exec: Executor, scheme: &DistributionScheme| -> (String, String) {
        let metrics = compute_metrics(&t, scheme, &core).unwrap().to_json().unwrap();
        let run = HooiEngine::new(&t, scheme, HooiConfig::new(core.clone(), 9), exec)
            .unwrap()
            .run(init_factors(t.dims(), &core, 9).unwrap())
            .unwrap();
        (metrics, run.ledger.to_json().unwrap())
    };
    for (name, build) in [
        ("lite", (|t: &SparseTensor| DistributionScheme::lite(t, 5).unwrap()) as fn(&SparseTensor) -> DistributionScheme),
        ("coarse", |t| DistributionScheme::coarse(t, 5, 4, CoarseVariant::Contiguous).unwrap()),
        ("medium", |t| DistributionScheme::medium(t, 5, 4).unwrap()),
    ] {
        let first = artifacts(Executor::serial(), &build(&t));
        let second = artifacts(Executor::serial(), &build(&t));
        let pooled = artifacts(Executor::pooled(4).unwrap(), &build(&t));
        if first != second || first != pooled {
            failures.push(format!("{name}: JSON differs between runs"));
        }
    }
    outcome(&failures, "metrics and ledger JSON byte-identical across repeated, serial and pooled runs".into())
}

fn imbalance_contrast() -> Outcome {
    println!(
        "criterion 9 statement: wall-clock HOOI speedups over prior schemes, strong scaling, distribution times \
and memory footprints depend on a 512-rank InfiniBand cluster and billion-element tensors; they are not \
reproducible at desk scale and are replaced by criteria 1-8 and the imbalance check below"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (len, big) = (400usize, 6000usize);
    let mut elements: Vec<Element> = (0..big).map(|k| Element::new(vec![0, k % 100, k / 100], 1.0)).collect();
    elements.extend((0..big).map(|_| {
        Element::new(vec![rng.gen_range(1..len), rng.gen_range(0..100), rng.gen_range(0..60)], 1.0)
    }));
    let t = SparseTensor::new(vec![len, 100, 60], elements).unwrap();
    let share = t.slices(0).unwrap().members(0).len() as f64 / t.nnz() as f64;
    let mut failures = Vec::new();
    let mut lines = Vec::new();
    for ranks in [16usize, 32, 64] {
        let lite = compute_metrics(&t, &DistributionScheme::lite(&t, ranks).unwrap(), &[1, 1, 1]).unwrap();
        let coarse = |variant| {
            let s = DistributionScheme::coarse(&t, ranks, 42, variant).unwrap();
            compute_metrics(&t, &s, &[1, 1, 1]).unwrap().modes[0].e_imbalance
        };
        let (contiguous, bestfit) = (coarse(CoarseVariant::Contiguous), coarse(CoarseVariant::BestFit));
        let ratio = contiguous / lite.modes[0].e_imbalance;
        lines.push(format!(
            "P={ranks}: coarse {contiguous:.2} (bestfit {bestfit:.2}) vs lite {:.3}, ratio {ratio:.2}",
            lite.modes[0].e_imbalance
        ));
        if ratio < 10.0 {
            failures.push(format!("P={ranks}: ratio {ratio:.2} below 10 (dominant slice {:.0}% of nnz)", share * 100.0));
        }
    }
    for l in &lines {
        println!("criterion 9 detail: {l}");
    }
    outcome(&failures, format!("coarse/lite E-imbalance at least 10x for P in 16, 32, 64; {}", lines.join("; ")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("lite bounds on random tensors", theorem1_suite),
        ("worked lite example", figure6),
        ("local penultimates sum to the dense penultimate", penultimate_equivalence),
        ("ledger matches the volume formulas", ledger_exactness),
        ("coarse never shares slices", coarse_optimality),
        ("engine agrees with dense HOOI", engine_vs_dense),
        ("final fit independent of scheme", scheme_independence),
        ("deterministic JSON", determinism),
        ("desk-scale substitute: imbalance contrast", imbalance_contrast),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!o.pass);
        println!(
            "criterion {} [{verdict}] {name}: {} ({:.1} s)",
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

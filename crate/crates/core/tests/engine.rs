mod common;

use common::{max_rel_diff, random_tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sptucker::dense::{
    canonicalize_signs, dense_hooi, dense_penultimate, dense_svd, dense_ttm_chain, densify, DenseCaps, DenseMatrix,
};
use sptucker::engine::{
    assign_row_owners, build_local_penultimates, compute_core, fit, hooi_invocation, init_factors, lanczos_svd,
    oracle_matvec_x, oracle_matvec_y, Component, Executor, HooiConfig, HooiEngine, IterationBudget, LanczosOptions,
    MessageLedger, Stopping, UpdateOrder,
};
use sptucker::layout::ModeLayout;
use sptucker::linalg::Matrix;
use sptucker::metrics::{compute_metrics, predict_vs_measured};
use sptucker::schemes::{CoarseVariant, DistributionScheme, SchemeKind};
use sptucker::tensor::{Element, SparseTensor};
use sptucker::TuckerModel;

fn all_schemes(t: &SparseTensor, ranks: usize, seed: u64) -> Vec<DistributionScheme> {
    vec![
        DistributionScheme::single_rank(t),
        DistributionScheme::lite(t, ranks).unwrap(),
        DistributionScheme::coarse(t, ranks, seed, CoarseVariant::Contiguous).unwrap(),
        DistributionScheme::coarse(t, ranks, seed, CoarseVariant::BestFit).unwrap(),
        DistributionScheme::medium(t, ranks, seed).unwrap(),
    ]
}

fn summed_expansion(t: &SparseTensor, scheme: &DistributionScheme, factors: &[Matrix], mode: usize) -> Matrix {
    let locals = build_local_penultimates(t, scheme, factors, mode).unwrap();
    let mut acc = Matrix::zeros(t.dims()[mode], locals[0].rows.cols());
    for z in &locals {
        let e = z.expand(t.dims()[mode]);
        for i in 0..acc.rows() {
            sptucker::linalg::axpy(1.0, e.row(i), acc.row_mut(i));
        }
    }
    acc
}

#[test]
fn local_penultimates_sum_to_dense_penultimate() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for case in 0..12 {
        let dims = [rng.gen_range(2..=6), rng.gen_range(2..=5), rng.gen_range(2..=4)];
        let cells: usize = dims.iter().product();
        let nnz = rng.gen_range(1..=cells);
        let t = random_tensor(&mut rng, &dims, nnz);
        let factors: Vec<Matrix> = dims.iter().map(|&l| Matrix::random_gaussian(l, 2, &mut rng)).collect();
        let dense_f: Vec<DenseMatrix> = factors.iter().map(DenseMatrix::from).collect();
        for scheme in all_schemes(&t, 1 + case % 4, case as u64) {
            for mode in 0..3 {
                let z = summed_expansion(&t, &scheme, &factors, mode);
                let d = dense_penultimate(&t, &dense_f, mode, &DenseCaps::default()).unwrap();
                assert!(max_rel_diff(z.as_slice(), &d.values) <= 1e-12, "{:?} mode {mode}", scheme.kind);
            }
        }
    }
}

#[test]
fn single_rank_local_copy_is_penultimate_without_empty_rows() {
    let t = SparseTensor::new(
        vec![4, 2, 2],
        vec![Element::new(vec![0, 0, 1], 2.0), Element::new(vec![2, 1, 0], -1.0)],
    )
    .unwrap();
    let factors = vec![Matrix::identity(4), Matrix::identity(2), Matrix::identity(2)];
    let locals = build_local_penultimates(&t, &DistributionScheme::single_rank(&t), &factors, 0).unwrap();
    assert_eq!(locals.len(), 1);
    assert_eq!(locals[0].row_slices, vec![0, 2]);
    assert_eq!(locals[0].rows.as_slice(), &[0.0, 0.0, 2.0, 0.0, 0.0, -1.0, 0.0, 0.0]);
}

#[test]
fn matvecs_match_dense_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let t = random_tensor(&mut rng, &[7, 5, 4], 60);
    let factors: Vec<Matrix> = t.dims().iter().map(|&l| Matrix::random_gaussian(l, 3, &mut rng)).collect();
    let exec = Executor::serial();
    for scheme in all_schemes(&t, 4, 2) {
        for mode in 0..3 {
            let full = summed_expansion(&t, &scheme, &factors, mode);
            let locals = build_local_penultimates(&t, &scheme, &factors, mode).unwrap();
            let own = assign_row_owners(&ModeLayout::new(&t, &scheme, mode).unwrap());
            let mut ledger = MessageLedger::new(3, scheme.ranks());
            let x: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..t.dims()[mode]).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let xo = oracle_matvec_x(&locals, &own, &x, &mut ledger, &exec);
            let yo = oracle_matvec_y(&locals, &own, &y, &mut ledger, &exec);
            let xd: Vec<f64> = (0..full.rows()).map(|i| sptucker::linalg::dot(full.row(i), &x)).collect();
            let yd = full.transpose().matmul(&Matrix::from_row_major(y.len(), 1, y.clone()));
            assert!(max_rel_diff(&xo, &xd) <= 1e-12);
            assert!(max_rel_diff(&yo, yd.as_slice()) <= 1e-12);
            let layout = ModeLayout::new(&t, &scheme, mode).unwrap();
            let excess = (layout.rsum() - layout.nonempty_count()) as u64;
            assert_eq!(ledger.mode(mode).total(Component::SvdX), excess);
            assert_eq!(ledger.mode(mode).total(Component::SvdY), excess);
        }
    }
}

#[test]
fn lanczos_on_random_50x27_penultimate_matches_dense_svd() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let t = random_tensor(&mut rng, &[50, 3, 9], 600);
    let factors = vec![Matrix::identity(50), Matrix::identity(3), Matrix::identity(9)];
    let scheme = DistributionScheme::lite(&t, 4).unwrap();
    let locals = build_local_penultimates(&t, &scheme, &factors, 0).unwrap();
    let own = assign_row_owners(&ModeLayout::new(&t, &scheme, 0).unwrap());
    let opts = LanczosOptions {
        budget: IterationBudget::Exhaustive,
        seed: 4,
        stream: 0,
    };
    let mut ledger = MessageLedger::new(3, 4);
    let out = lanczos_svd(&locals, &own, 5, &opts, &mut ledger, &Executor::serial()).unwrap();
    let dense_f: Vec<DenseMatrix> = factors.iter().map(DenseMatrix::from).collect();
    let z = dense_penultimate(&t, &dense_f, 0, &DenseCaps::default()).unwrap();
    let svd = dense_svd(&z, &DenseCaps::default()).unwrap();
    for j in 0..5 {
        assert!((out.singular_values[j] - svd.s[j]).abs() <= 1e-6 * svd.s[j]);
    }
    let mut ours = DenseMatrix::from(&out.factor);
    let mut theirs = sptucker::dense::leading_left(&svd, 5);
    canonicalize_signs(&mut ours);
    canonicalize_signs(&mut theirs);
    assert!(ours.max_abs_diff(&theirs) < 1e-6);
    assert!(out.factor.orthonormality_error() < 1e-10);
}

#[test]
fn engine_matches_dense_hooi_on_5x4x3() {
    let mut rng = ChaCha8Rng::seed_from_u64(543);
    let t = random_tensor(&mut rng, &[5, 4, 3], 40);
    let core = vec![2, 2, 2];
    let init = init_factors(t.dims(), &core, 42).unwrap();
    let scheme = DistributionScheme::lite(&t, 3).unwrap();
    let mut config = HooiConfig::new(core.clone(), 42);
    config.budget = IterationBudget::Exhaustive;
    config.stopping = Stopping::Invocations(5);
    let run = HooiEngine::new(&t, &scheme, config, Executor::serial())
        .unwrap()
        .run(init.clone())
        .unwrap();
    let d = densify(&t, &DenseCaps::default()).unwrap();
    let dense_init: Vec<DenseMatrix> = init.iter().map(DenseMatrix::from).collect();
    let oracle = dense_hooi(&d, &core, &dense_init, 5, &DenseCaps::default()).unwrap();
    for (a, b) in run.fit_history.iter().zip(&oracle.fit_history) {
        assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
    }
    for (inv, r) in run.reports.iter().enumerate() {
        for (n, sv) in r.singular_values.iter().enumerate() {
            for (a, b) in sv.iter().zip(&oracle.singular_values[inv][n]) {
                assert!((a - b).abs() <= 1e-6 * b.abs().max(1e-300));
            }
        }
    }
    let dense_core = dense_ttm_chain(&d, usize::MAX, &run.model.factors.iter().map(DenseMatrix::from).collect::<Vec<_>>()).unwrap();
    assert!(max_rel_diff(run.model.core.values(), &dense_core.values) <= 1e-10);
}

#[test]
fn default_budget_issues_four_k_queries_and_ledger_matches_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let t = random_tensor(&mut rng, &[12, 10, 9], 300);
    let core = vec![2, 2, 2];
    for scheme in all_schemes(&t, 5, 3) {
        let config = HooiConfig {
            stopping: Stopping::Invocations(2),
            ..HooiConfig::new(core.clone(), 1)
        };
        let run = HooiEngine::new(&t, &scheme, config, Executor::serial())
            .unwrap()
            .run(init_factors(t.dims(), &core, 1).unwrap())
            .unwrap();
        for (n, m) in run.ledger.modes.iter().enumerate() {
            assert_eq!(m.queries_per_run, vec![4 * core[n] as u64; 2]);
        }
        let report = compute_metrics(&t, &scheme, &core).unwrap();
        let rec = predict_vs_measured(&report, &run.ledger).unwrap();
        assert!(rec.all_exact(), "{:?}", scheme.kind);
        if scheme.is_uni_policy() {
            for (n, m) in report.modes.iter().enumerate() {
                let excess = (m.rsum - m.nonempty) as u64;
                let l = run.ledger.mode(n);
                assert_eq!(l.svd_total(), 2 * 4 * core[n] as u64 * excess);
                assert_eq!(l.total(Component::FactorTransfer), 2 * core[n] as u64 * excess);
            }
        }
        assert!(!run.flags_raised());
    }
}

#[test]
fn core_examples() {
    let t = SparseTensor::new(vec![3, 2, 2], vec![Element::new(vec![0, 0, 0], 1.0)]).unwrap();
    let unit_rows: Vec<Matrix> = [3, 2, 2]
        .iter()
        .map(|&l| Matrix::from_fn(l, 2, |i, j| if i == 0 && j == 0 { 1.0 } else { 0.0 }))
        .collect();
    let scheme = DistributionScheme::lite(&t, 2).unwrap();
    let g = compute_core(&t, &scheme, &unit_rows, &Executor::serial()).unwrap();
    assert_eq!(g.values()[0], 1.0);
    assert!(g.values()[1..].iter().all(|&v| v == 0.0));

    let zeros: Vec<Matrix> = [3, 2, 2].iter().map(|&l| Matrix::zeros(l, 2)).collect();
    let g = compute_core(&t, &scheme, &zeros, &Executor::serial()).unwrap();
    assert!(g.values().iter().all(|&v| v == 0.0));

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let t = random_tensor(&mut rng, &[6, 5, 4], 50);
    let factors: Vec<Matrix> = t.dims().iter().map(|&l| Matrix::random_gaussian(l, 3, &mut rng)).collect();
    let d = densify(&t, &DenseCaps::default()).unwrap();
    let dense = dense_ttm_chain(&d, usize::MAX, &factors.iter().map(DenseMatrix::from).collect::<Vec<_>>()).unwrap();
    for scheme in all_schemes(&t, 3, 0) {
        let g = compute_core(&t, &scheme, &factors, &Executor::pooled(3).unwrap()).unwrap();
        assert!(max_rel_diff(g.values(), &dense.values) <= 1e-10);
    }
}

#[test]
fn zero_tensor_keeps_orthonormal_factors() {
    let t = SparseTensor::new(vec![4, 3, 3], vec![Element::new(vec![1, 1, 1], 0.0)]).unwrap();
    let core = vec![2, 2, 2];
    let run = HooiEngine::new(&t, &DistributionScheme::lite(&t, 2).unwrap(), HooiConfig::new(core.clone(), 3), Executor::serial())
        .unwrap()
        .run(init_factors(t.dims(), &core, 3).unwrap())
        .unwrap();
    assert_eq!(run.final_fit(), 0.0);
    assert!(run.model.factors.iter().all(|f| f.orthonormality_error() <= 1e-8));
    assert!(run.flags_raised());
}

fn exact_tucker_tensor(rng: &mut ChaCha8Rng, dims: &[usize], core: &[usize]) -> SparseTensor {
    let mut factors: Vec<Matrix> = dims.iter().zip(core).map(|(&l, &k)| Matrix::random_gaussian(l, k, rng)).collect();
    factors.iter_mut().for_each(sptucker::linalg::orthonormalize_columns);
    let kcells: usize = core.iter().product();
    let g: Vec<f64> = (0..kcells).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let cells: usize = dims.iter().product();
    let elements = (0..cells).map(|pos| {
        let mut rest = pos;
        let idx: Vec<usize> = dims
            .iter()
            .map(|&d| {
                let c = rest % d;
                rest /= d;
                c
            })
            .collect();
        let mut v = 0.0;
        for (kpos, gv) in g.iter().enumerate() {
            let mut r = kpos;
            let mut w = *gv;
            for (n, &k) in core.iter().enumerate() {
                w *= factors[n][(idx[n], r % k)];
                r /= k;
            }
            v += w;
        }
        Element::new(idx, v)
    });
    SparseTensor::new(dims.to_vec(), elements).unwrap()
}

#[test]
fn fit_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let core = vec![2, 2, 2];
    let t = exact_tucker_tensor(&mut rng, &[6, 5, 4], &core);
    let run = HooiEngine::new(&t, &DistributionScheme::lite(&t, 3).unwrap(), HooiConfig::new(core.clone(), 8), Executor::serial())
        .unwrap()
        .run(init_factors(t.dims(), &core, 8).unwrap())
        .unwrap();
    assert!(run.final_fit() < 1e-7, "{}", run.final_fit());

    let t = random_tensor(&mut rng, &[4, 3, 3], 20);
    let full = t.dims().to_vec();
    let run = HooiEngine::new(&t, &DistributionScheme::lite(&t, 2).unwrap(), HooiConfig::new(full.clone(), 2), Executor::serial())
        .unwrap()
        .run(init_factors(t.dims(), &full, 2).unwrap())
        .unwrap();
    assert!(run.final_fit() < 1e-6);
    let empty = SparseTensor::new(vec![2, 2], Vec::new()).unwrap();
    assert_eq!(fit(&empty, &sptucker::CoreTensor::new(vec![1, 1], vec![0.0])), 0.0);
}

#[test]
fn fit_is_observed_non_increasing() {
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    for case in 0..5 {
        let t = random_tensor(&mut rng, &[9, 8, 7], 150);
        let core = vec![3, 3, 3];
        let mut config = HooiConfig::new(core.clone(), case);
        config.budget = IterationBudget::Exhaustive;
        let run = HooiEngine::new(&t, &DistributionScheme::lite(&t, 4).unwrap(), config, Executor::serial())
            .unwrap()
            .run(init_factors(t.dims(), &core, case).unwrap())
            .unwrap();
        assert!(run.fit_history.windows(2).all(|w| w[1] <= w[0] + 1e-10), "{:?}", run.fit_history);
    }
}

#[test]
fn pooled_execution_is_bit_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let t = random_tensor(&mut rng, &[10, 9, 8], 200);
    let core = vec![3, 2, 2];
    let scheme = DistributionScheme::lite(&t, 6).unwrap();
    let go = |exec| {
        HooiEngine::new(&t, &scheme, HooiConfig::new(core.clone(), 5), exec)
            .unwrap()
            .run(init_factors(t.dims(), &core, 5).unwrap())
            .unwrap()
    };
    let a = go(Executor::serial());
    let b = go(Executor::pooled(4).unwrap());
    assert_eq!(a.model, b.model);
    assert_eq!(a.fit_history, b.fit_history);
    assert_eq!(a.ledger.to_json().unwrap(), b.ledger.to_json().unwrap());
}

#[test]
fn simultaneous_update_and_fit_delta_stopping() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let t = random_tensor(&mut rng, &[8, 7, 6], 120);
    let core = vec![2, 2, 2];
    let config = HooiConfig {
        update: UpdateOrder::Simultaneous,
        stopping: Stopping::FitDelta { tol: 1e-9, max: 30 },
        ..HooiConfig::new(core.clone(), 1)
    };
    let run = HooiEngine::new(&t, &DistributionScheme::medium(&t, 4, 1).unwrap(), config, Executor::serial())
        .unwrap()
        .run(init_factors(t.dims(), &core, 1).unwrap())
        .unwrap();
    assert!(!run.fit_history.is_empty() && run.fit_history.len() <= 30);
    assert!(run.model.factors.iter().all(|f| f.orthonormality_error() <= 1e-8));
}

#[test]
fn single_invocation_entry_point_and_config_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let t = random_tensor(&mut rng, &[7, 6, 6], 150);
    let core = vec![2, 2, 2];
    let factors = init_factors(t.dims(), &core, 9).unwrap();
    let model = TuckerModel::new(sptucker::CoreTensor::new(core.clone(), vec![0.0; 8]), factors);
    assert!(HooiEngine::new(&t, &DistributionScheme::single_rank(&t), HooiConfig::new(vec![8, 2, 2], 9), Executor::serial()).is_err());
    let scheme = DistributionScheme::build(SchemeKind::Coarse, &t, 2, 9).unwrap();
    let (out, report, ledger) = hooi_invocation(&t, &scheme, &model, &HooiConfig::new(core.clone(), 9)).unwrap();
    assert_eq!(report.queries, vec![8, 8, 8]);
    assert_eq!(ledger.mode(0).transfers, 1);
    assert!(out.factors.iter().all(|f| f.orthonormality_error() <= 1e-8));

    let zero = HooiConfig {
        stopping: Stopping::Invocations(0),
        ..HooiConfig::new(core.clone(), 9)
    };
    assert!(HooiEngine::new(&t, &scheme, zero, Executor::serial()).is_err());
    assert!(HooiEngine::new(&t, &scheme, HooiConfig::new(vec![2, 2, 0], 9), Executor::serial()).is_err());
}

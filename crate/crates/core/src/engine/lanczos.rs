//! Golub-Kahan-Lanczos bidiagonalization over the distributed penultimate
//! matrix, with full reorthogonalization.
//!
//! Starting from a random unit vector `u_1` supported on the nonempty rows,
//! each iteration asks one y-query and one x-query:
//!
//! ```text
//! alpha_j v_j     = Z^T u_j - beta_{j-1} v_{j-1}
//! beta_j  u_{j+1} = Z v_j   - alpha_j u_j
//! ```
//!
//! so that `Z V = U B` with `B` lower bidiagonal. The leading left singular
//! vectors of `B`, mapped through `U`, give the new factor.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::exec::Executor;
use super::ledger::MessageLedger;
use super::ownership::RowOwnership;
use super::penultimate::LocalPenultimate;
use super::products::{oracle_matvec_x, oracle_matvec_y};
use crate::error::{Error, Result};
use crate::linalg::{complement_vector, norm, orthogonalize_against, scale, Matrix};
use crate::rng::{seeded, Stream};

/// How many bidiagonalization steps to take.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationBudget {
    /// `2 K_n` steps, `4 K_n` queries.
    #[default]
    TwiceCore,
    /// Keep going until the Krylov space stops growing; the result is then
    /// the exact truncated SVD.
    Exhaustive,
    Fixed(usize),
}

impl std::str::FromStr for IterationBudget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2k" => Ok(IterationBudget::TwiceCore),
            "exhaustive" => Ok(IterationBudget::Exhaustive),
            other => other
                .parse::<usize>()
                .ok()
                .filter(|&n| n >= 1)
                .map(IterationBudget::Fixed)
                .ok_or_else(|| Error::Config(format!("invalid Lanczos budget {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LanczosOptions {
    pub budget: IterationBudget,
    pub seed: u64,
    /// Distinguishes the start vectors of different (invocation, mode) runs.
    pub stream: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SvdFlags {
    /// Times a zero `alpha` or `beta` forced a fresh random direction.
    pub breakdown_restarts: usize,
    /// Leading columns replaced by orthonormal-complement vectors because
    /// the matrix has lower rank than requested.
    pub padded_columns: usize,
    /// The Krylov space stopped growing before the budget ran out.
    pub exhausted: bool,
}

impl SvdFlags {
    /// Conditions that escalate under strict mode.
    pub fn raised(&self) -> bool {
        self.breakdown_restarts > 0 || self.padded_columns > 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvdOutcome {
    /// `L_n x K_n`, orthonormal columns; row `l` is materialized at the row's owner.
    pub factor: Matrix,
    /// Leading Ritz values, descending (zeros for padded columns).
    pub singular_values: Vec<f64>,
    pub iterations: usize,
    pub queries: u64,
    pub flags: SvdFlags,
}

const BREAKDOWN: f64 = 1e-12;
const RANK_TOL: f64 = 1e-10;

pub fn lanczos_svd(
    locals: &[LocalPenultimate],
    ownership: &RowOwnership,
    k: usize,
    opts: &LanczosOptions,
    ledger: &mut MessageLedger,
    exec: &Executor,
) -> Result<SvdOutcome> {
    let mode = ownership.mode;
    let rows = ownership.mode_len();
    let width = locals.first().map_or(0, |z| z.rows.cols());
    if k > rows {
        return Err(Error::Config(format!(
            "core length {k} exceeds mode {} length {rows}",
            mode + 1
        )));
    }
    let support: Vec<usize> = ownership.owned_rows().iter().map(|&l| l as usize).collect();
    let budget = match opts.budget {
        IterationBudget::TwiceCore => 2 * k,
        IterationBudget::Fixed(n) => n,
        IterationBudget::Exhaustive => support.len() + width,
    };
    let stop_on_breakdown = opts.budget == IterationBudget::Exhaustive;

    let mut rng = seeded(opts.seed, Stream::Lanczos, opts.stream);
    let mut restart_rng = seeded(opts.seed, Stream::Restart, opts.stream);
    let mut flags = SvdFlags::default();
    let mut u_basis: Vec<Vec<f64>> = Vec::new();
    let mut v_basis: Vec<Vec<f64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut queries = 0u64;
    let mut scale_est: f64 = 0.0;
    let tiny = |x: f64, s: f64| x == 0.0 || x <= BREAKDOWN * s;

    if !support.is_empty() && width > 0 {
        let mut u = vec![0.0; rows];
        for &l in &support {
            u[l] = rng.sample(StandardNormal);
        }
        let n = norm(&u);
        scale(1.0 / n, &mut u);
        u_basis.push(u);
    }

    let mut iterations = 0;
    while iterations < budget && !u_basis.is_empty() {
        let j = iterations;
        // y-query: Z^T u_j
        let mut w = oracle_matvec_y(locals, ownership, &u_basis[j], ledger, exec);
        ledger.record_query(mode);
        queries += 1;
        if j > 0 {
            crate::linalg::axpy(-betas[j - 1], &v_basis[j - 1], &mut w);
        }
        orthogonalize_against(&mut w, &v_basis);
        let mut alpha = norm(&w);
        if tiny(alpha, scale_est) {
            if stop_on_breakdown || v_basis.len() == width {
                flags.exhausted = true;
                break;
            }
            w = fresh_direction(width, None, &v_basis, &mut restart_rng);
            alpha = 0.0;
            flags.breakdown_restarts += 1;
        } else {
            scale(1.0 / alpha, &mut w);
        }
        scale_est = scale_est.max(alpha);
        v_basis.push(w);
        alphas.push(alpha);

        // x-query: Z v_j
        let mut r = oracle_matvec_x(locals, ownership, &v_basis[j], ledger, exec);
        ledger.record_query(mode);
        queries += 1;
        crate::linalg::axpy(-alpha, &u_basis[j], &mut r);
        orthogonalize_against(&mut r, &u_basis);
        iterations += 1;
        let mut beta = norm(&r);
        if tiny(beta, scale_est) {
            if stop_on_breakdown || u_basis.len() == support.len() {
                flags.exhausted = true;
                break;
            }
            r = fresh_direction(rows, Some(&support), &u_basis, &mut restart_rng);
            beta = 0.0;
            flags.breakdown_restarts += 1;
        } else {
            scale(1.0 / beta, &mut r);
        }
        scale_est = scale_est.max(beta);
        u_basis.push(r);
        betas.push(beta);
    }
    ledger.close_run(mode, queries);

    // Projected problem: B is |U| x |V| lower bidiagonal.
    let (m, n) = (u_basis.len(), v_basis.len());
    let mut ritz: Vec<(f64, Vec<f64>)> = Vec::new();
    if m > 0 && n > 0 {
        let mut b = DMatrix::<f64>::zeros(m, n);
        for (i, &a) in alphas.iter().enumerate() {
            b[(i, i)] = a;
        }
        for (i, &bt) in betas.iter().enumerate() {
            if i + 1 < m && i < n {
                b[(i + 1, i)] = bt;
            }
        }
        let svd = b.svd(true, false);
        let left = svd.u.expect("left singular vectors requested");
        let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
        idx.sort_by(|&a, &c| svd.singular_values[c].total_cmp(&svd.singular_values[a]).then(a.cmp(&c)));
        for &c in idx.iter().take(k) {
            let mut vec = vec![0.0; rows];
            for (i, u) in u_basis.iter().enumerate() {
                crate::linalg::axpy(left[(i, c)], u, &mut vec);
            }
            ritz.push((svd.singular_values[c], vec));
        }
    }

    let top = ritz.first().map_or(0.0, |(s, _)| *s);
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut values = Vec::with_capacity(k);
    for (s, v) in ritz {
        if top > 0.0 && s > RANK_TOL * top {
            columns.push(v);
            values.push(s);
        }
    }
    let kept = columns.len();
    while columns.len() < k {
        let c = complement_vector(rows, &columns).ok_or_else(|| {
            Error::Config(format!("cannot complete {k} orthonormal columns in dimension {rows}"))
        })?;
        columns.push(c);
        values.push(0.0);
    }
    flags.padded_columns = k - kept;
    if k > 0 && support.is_empty() {
        // Nothing to factor; padding is the only possible answer and is not a numerical issue.
        flags.padded_columns = 0;
    }

    let mut factor = Matrix::zeros(rows, k);
    for (c, col) in columns.iter().enumerate() {
        factor.set_column(c, col);
    }
    Ok(SvdOutcome {
        factor,
        singular_values: values,
        iterations,
        queries,
        flags,
    })
}

/// A random unit vector orthogonal to `basis`, supported on `support` when given.
fn fresh_direction<R: Rng>(len: usize, support: Option<&[usize]>, basis: &[Vec<f64>], rng: &mut R) -> Vec<f64> {
    for _ in 0..8 {
        let mut v = vec![0.0; len];
        match support {
            Some(s) => s.iter().for_each(|&i| v[i] = rng.sample(StandardNormal)),
            None => v.iter_mut().for_each(|x| *x = rng.sample(StandardNormal)),
        }
        orthogonalize_against(&mut v, basis);
        let n = norm(&v);
        if n > 1e-8 {
            scale(1.0 / n, &mut v);
            return v;
        }
    }
    complement_vector(len, basis).expect("basis does not span the space")
}

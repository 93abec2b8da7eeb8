//! The HOOI driver: for each mode, build local penultimates, run the
//! distributed Lanczos SVD, and ship the new factor rows; once all
//! invocations are done, compute the core.

use serde::{Deserialize, Serialize};

use super::exec::Executor;
use super::lanczos::{lanczos_svd, IterationBudget, LanczosOptions, SvdFlags};
use super::ledger::MessageLedger;
use super::ownership::{assign_row_owners, RowOwnership};
use super::penultimate::{build_from_layout, check_factors};
use super::transfer::{row_requirers, transfer_factor_rows, FactorAvailability};
use crate::error::{Error, Result};
use crate::layout::ModeLayout;
use crate::linalg::{orthonormalize_columns, Matrix};
use crate::model::{CoreTensor, TuckerModel};
use crate::rng::{seeded, Stream};
use crate::schemes::DistributionScheme;
use crate::tensor::{kron_contribution_into, SparseTensor};

/// Whether mode n sees the factors already refreshed earlier in the same invocation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateOrder {
    #[default]
    Sequential,
    /// Every mode uses the factors from the start of the invocation.
    Simultaneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stopping {
    Invocations(usize),
    /// Stop once the fit improves by less than `tol`, or after `max` invocations.
    FitDelta { tol: f64, max: usize },
}

impl Default for Stopping {
    fn default() -> Self {
        Stopping::Invocations(5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HooiConfig {
    pub core: Vec<usize>,
    pub seed: u64,
    pub budget: IterationBudget,
    pub update: UpdateOrder,
    pub stopping: Stopping,
}

impl HooiConfig {
    pub fn new(core: Vec<usize>, seed: u64) -> Self {
        HooiConfig {
            core,
            seed,
            budget: IterationBudget::default(),
            update: UpdateOrder::default(),
            stopping: Stopping::default(),
        }
    }

    pub fn validate(&self, t: &SparseTensor) -> Result<()> {
        if self.core.len() != t.order() {
            return Err(Error::Config(format!(
                "{} core lengths for a {}-mode tensor",
                self.core.len(),
                t.order()
            )));
        }
        for (n, (&k, &l)) in self.core.iter().zip(t.dims()).enumerate() {
            if k == 0 || k > l {
                return Err(Error::Config(format!(
                    "core length {k} for mode {} must lie in [1, {l}]",
                    n + 1
                )));
            }
        }
        match self.stopping {
            Stopping::Invocations(0) | Stopping::FitDelta { max: 0, .. } => {
                Err(Error::Config("at least one invocation is required".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Seeded Gaussian factors with orthonormalized columns.
pub fn init_factors(dims: &[usize], core: &[usize], seed: u64) -> Result<Vec<Matrix>> {
    if dims.len() != core.len() {
        return Err(Error::Shape("dims and core lengths differ".into()));
    }
    dims.iter()
        .zip(core)
        .enumerate()
        .map(|(n, (&l, &k))| {
            if k > l {
                return Err(Error::Config(format!("core length {k} exceeds mode {} length {l}", n + 1)));
            }
            let mut m = Matrix::random_gaussian(l, k, &mut seeded(seed, Stream::Init, n as u64));
            orthonormalize_columns(&mut m);
            Ok(m)
        })
        .collect()
}

/// `G = Σ_e val(e) · ⊗_n F_n[l_n(e), :]`, accumulated per rank over its
/// mode-1 elements and then summed in rank order.
pub fn compute_core(t: &SparseTensor, scheme: &DistributionScheme, factors: &[Matrix], exec: &Executor) -> Result<CoreTensor> {
    if factors.len() != t.order() {
        return Err(Error::Shape(format!("{} factors for a {}-mode tensor", factors.len(), t.order())));
    }
    for (n, (f, &l)) in factors.iter().zip(t.dims()).enumerate() {
        if f.rows() != l {
            return Err(Error::Shape(format!("factor {} has {} rows, mode length is {l}", n + 1, f.rows())));
        }
    }
    let dims: Vec<usize> = factors.iter().map(Matrix::cols).collect();
    let size: usize = dims.iter().product();
    let policy = scheme.policy(0);
    let ranks = scheme.ranks();
    let mut by_rank: Vec<Vec<usize>> = vec![Vec::new(); ranks];
    for e in 0..t.nnz() {
        by_rank[policy.rank_of(e)].push(e);
    }
    let partial = exec.map(ranks, |p| {
        let mut acc = vec![0.0; size];
        let mut buf = vec![0.0; size];
        for &e in &by_rank[p] {
            kron_contribution_into(t.coords(e), t.value(e), usize::MAX, factors, &mut buf);
            crate::linalg::axpy(1.0, &buf, &mut acc);
        }
        acc
    });
    let mut values = vec![0.0; size];
    for part in &partial {
        crate::linalg::axpy(1.0, part, &mut values);
    }
    Ok(CoreTensor::new(dims, values))
}

/// Relative residual `sqrt(max(0, |T|^2 - |G|^2)) / |T|`, valid for
/// orthonormal factors. Zero for the zero tensor.
pub fn fit(t: &SparseTensor, core: &CoreTensor) -> f64 {
    let tn = t.norm_squared();
    if tn == 0.0 {
        return 0.0;
    }
    let gn: f64 = core.values().iter().map(|v| v * v).sum();
    (tn - gn).max(0.0).sqrt() / tn.sqrt()
}

/// Per-invocation outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvocationReport {
    pub invocation: usize,
    /// Leading Ritz values for each mode.
    pub singular_values: Vec<Vec<f64>>,
    pub queries: Vec<u64>,
    pub flags: Vec<SvdFlags>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub model: TuckerModel,
    pub fit_history: Vec<f64>,
    pub reports: Vec<InvocationReport>,
    pub ledger: MessageLedger,
}

impl RunResult {
    pub fn flags_raised(&self) -> bool {
        self.reports.iter().flat_map(|r| &r.flags).any(SvdFlags::raised)
    }

    pub fn final_fit(&self) -> f64 {
        self.fit_history.last().copied().unwrap_or(1.0)
    }
}

/// Invocation-invariant structure of one scheme: layouts, row owners and
/// factor-row requirers for every mode.
#[derive(Debug, Clone)]
pub struct SchemePlan {
    pub layouts: Vec<ModeLayout>,
    pub owners: Vec<RowOwnership>,
    pub requirers: Vec<Vec<Vec<u32>>>,
}

impl SchemePlan {
    pub fn new(t: &SparseTensor, scheme: &DistributionScheme) -> Result<Self> {
        scheme.validate(t)?;
        let layouts = (0..t.order())
            .map(|n| ModeLayout::new(t, scheme, n))
            .collect::<Result<Vec<_>>>()?;
        let owners = layouts.iter().map(assign_row_owners).collect();
        let requirers = layouts.iter().map(|l| row_requirers(t, scheme, l)).collect();
        Ok(SchemePlan {
            layouts,
            owners,
            requirers,
        })
    }
}

/// Simulated distributed HOOI over the ranks of one scheme.
#[derive(Debug)]
pub struct HooiEngine<'a> {
    t: &'a SparseTensor,
    scheme: &'a DistributionScheme,
    plan: SchemePlan,
    config: HooiConfig,
    exec: Executor,
    ledger: MessageLedger,
    availability: FactorAvailability,
    invocations: usize,
}

impl<'a> HooiEngine<'a> {
    pub fn new(t: &'a SparseTensor, scheme: &'a DistributionScheme, config: HooiConfig, exec: Executor) -> Result<Self> {
        config.validate(t)?;
        let plan = SchemePlan::new(t, scheme)?;
        Ok(HooiEngine {
            t,
            scheme,
            plan,
            ledger: MessageLedger::new(t.order(), scheme.ranks()),
            availability: FactorAvailability::replicated(t.order()),
            config,
            exec,
            invocations: 0,
        })
    }

    pub fn ledger(&self) -> &MessageLedger {
        &self.ledger
    }

    pub fn plan(&self) -> &SchemePlan {
        &self.plan
    }

    pub fn availability(&self) -> &FactorAvailability {
        &self.availability
    }

    /// One HOOI invocation; `factors` are replaced mode by mode. The core is
    /// not recomputed here.
    pub fn invoke(&mut self, factors: &mut [Matrix]) -> Result<InvocationReport> {
        let order = self.t.order();
        for n in 0..order {
            check_factors(self.t, factors, n)?;
            if factors[n].cols() != self.config.core[n] {
                return Err(Error::Shape(format!(
                    "factor {} has {} columns, core length is {}",
                    n + 1,
                    factors[n].cols(),
                    self.config.core[n]
                )));
            }
        }
        let invocation = self.invocations;
        let mut report = InvocationReport {
            invocation: invocation + 1,
            singular_values: Vec::with_capacity(order),
            queries: Vec::with_capacity(order),
            flags: Vec::with_capacity(order),
        };
        let old: Option<Vec<Matrix>> = match self.config.update {
            UpdateOrder::Sequential => None,
            UpdateOrder::Simultaneous => Some(factors.to_vec()),
        };
        for n in 0..order {
            let source: &[Matrix] = old.as_deref().unwrap_or(factors);
            let locals = build_from_layout(self.t, &self.plan.layouts[n], source, Some(&self.availability), &self.exec)?;
            let opts = LanczosOptions {
                budget: self.config.budget,
                seed: self.config.seed,
                stream: ((invocation as u64) << 16) | n as u64,
            };
            let svd = lanczos_svd(&locals, &self.plan.owners[n], self.config.core[n], &opts, &mut self.ledger, &self.exec)?;
            factors[n] = svd.factor;
            report.singular_values.push(svd.singular_values);
            report.queries.push(svd.queries);
            report.flags.push(svd.flags);
            if self.config.update == UpdateOrder::Sequential {
                self.transfer(n);
            }
        }
        if self.config.update == UpdateOrder::Simultaneous {
            for n in 0..order {
                self.transfer(n);
            }
        }
        self.invocations += 1;
        Ok(report)
    }

    fn transfer(&mut self, n: usize) {
        transfer_factor_rows(
            &self.plan.owners[n],
            &self.plan.requirers[n],
            self.config.core[n],
            &mut self.availability,
            &mut self.ledger,
        );
    }

    pub fn core(&self, factors: &[Matrix]) -> Result<CoreTensor> {
        compute_core(self.t, self.scheme, factors, &self.exec)
    }

    /// Runs invocations from `init` until the stopping rule fires, then
    /// computes the core.
    pub fn run(mut self, init: Vec<Matrix>) -> Result<RunResult> {
        let mut factors = init;
        let mut fit_history = Vec::new();
        let mut reports = Vec::new();
        let (max, tol) = match self.config.stopping {
            Stopping::Invocations(m) => (m, None),
            Stopping::FitDelta { tol, max } => (max, Some(tol)),
        };
        for _ in 0..max {
            reports.push(self.invoke(&mut factors)?);
            let f = fit(self.t, &self.core(&factors)?);
            let prev = fit_history.last().copied();
            fit_history.push(f);
            if let (Some(tol), Some(prev)) = (tol, prev) {
                if (prev - f).abs() < tol {
                    break;
                }
            }
        }
        let core = self.core(&factors)?;
        Ok(RunResult {
            model: TuckerModel::new(core, factors),
            fit_history,
            reports,
            ledger: self.ledger,
        })
    }
}

/// A single invocation on a fresh engine: returns the refined model (core
/// computed from the new factors) and the ledger it produced.
pub fn hooi_invocation(
    t: &SparseTensor,
    scheme: &DistributionScheme,
    model_in: &TuckerModel,
    config: &HooiConfig,
) -> Result<(TuckerModel, InvocationReport, MessageLedger)> {
    let mut engine = HooiEngine::new(t, scheme, config.clone(), Executor::serial())?;
    let mut factors = model_in.factors.clone();
    let report = engine.invoke(&mut factors)?;
    let core = engine.core(&factors)?;
    Ok((TuckerModel::new(core, factors), report, engine.ledger))
}

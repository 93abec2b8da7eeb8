//! Distribution metrics of a scheme, cost predictions, Lite's Theorem 1
//! verdicts, and reconciliation of predictions against a measured ledger.

use serde::{Deserialize, Serialize};

use crate::engine::{Component, MessageLedger};
use crate::error::{Error, Result};
use crate::layout::ModeLayout;
use crate::schemes::{DistributionScheme, SchemeKind};
use crate::tensor::SparseTensor;

pub const METRICS_SCHEMA: &str = "sptucker.metrics/1";
pub const RECONCILIATION_SCHEMA: &str = "sptucker.reconciliation/1";

/// Lite's three guarantees for one mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Theorem1Verdict {
    /// `ceil(nnz / P)`
    pub emax_bound: u64,
    pub emax_holds: bool,
    /// `nonempty + P`
    pub rsum_bound: u64,
    pub rsum_holds: bool,
    /// `ceil(nonempty / P) + 2`
    pub rmax_bound: u64,
    pub rmax_holds: bool,
}

impl Theorem1Verdict {
    pub fn all_hold(&self) -> bool {
        self.emax_holds && self.rsum_holds && self.rmax_holds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    /// Lanczos queries assumed per mode run.
    pub queries: u64,
    /// `Q * (Rsum - nonempty)` per run.
    pub svd_volume: u64,
    /// `Q * (Rsum - L_n)`; negative when the mode has empty slices.
    pub svd_volume_ln: i64,
    /// `K_n * (Rsum - nonempty)` per transfer; uni-policy schemes only.
    pub factor_transfer_uni: Option<u64>,
    pub factor_transfer_uni_ln: Option<i64>,
    /// `nnz * Khat_n` multiply-adds for the local penultimates.
    pub ttm_flops: u64,
    /// `Emax * Khat_n`, the busiest rank's share.
    pub ttm_flops_max_rank: u64,
    /// `Q * Khat_n * Rsum`
    pub svd_oracle_flops: u64,
    /// `Q * Khat_n * Rmax`
    pub svd_oracle_flops_max_rank: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeMetrics {
    /// One-based.
    pub mode: usize,
    pub mode_len: usize,
    pub nonempty: usize,
    pub core_len: usize,
    /// Product of the other modes' core lengths.
    pub khat: u64,
    pub emax: usize,
    pub rsum: usize,
    pub rmax: usize,
    /// `Emax / (nnz / P)`
    pub e_imbalance: f64,
    /// `Rmax / (Rsum / P)`
    pub r_imbalance: f64,
    pub predicted: Predictions,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem1: Option<Theorem1Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema: String,
    pub scheme: SchemeKind,
    pub ranks: usize,
    pub seed: u64,
    pub uni_policy: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    pub dims: Vec<usize>,
    pub nnz: usize,
    pub modes: Vec<ModeMetrics>,
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Every Theorem 1 verdict, or `None` for non-Lite schemes.
    pub fn theorem1_holds(&self) -> Option<bool> {
        let verdicts: Option<Vec<_>> = self.modes.iter().map(|m| m.theorem1).collect();
        verdicts.map(|v| v.iter().all(Theorem1Verdict::all_hold))
    }

    /// Appends one row per (mode, metric) to a CSV body with columns
    /// `tensor,scheme,ranks,mode,metric,value`.
    pub fn csv_rows(&self, tensor: &str, out: &mut String) {
        let tensor = csv_field(tensor);
        for m in &self.modes {
            let mut row = |metric: &str, value: String| {
                out.push_str(&format!("{tensor},{},{},{},{metric},{value}\n", self.scheme, self.ranks, m.mode));
            };
            let p = &m.predicted;
            row("mode_len", m.mode_len.to_string());
            row("nonempty", m.nonempty.to_string());
            row("emax", m.emax.to_string());
            row("rsum", m.rsum.to_string());
            row("rmax", m.rmax.to_string());
            row("e_imbalance", m.e_imbalance.to_string());
            row("r_imbalance", m.r_imbalance.to_string());
            row("queries", p.queries.to_string());
            row("svd_volume", p.svd_volume.to_string());
            row("svd_volume_ln", p.svd_volume_ln.to_string());
            if let Some(v) = p.factor_transfer_uni {
                row("factor_transfer_uni", v.to_string());
            }
            if let Some(v) = p.factor_transfer_uni_ln {
                row("factor_transfer_uni_ln", v.to_string());
            }
            row("ttm_flops", p.ttm_flops.to_string());
            row("ttm_flops_max_rank", p.ttm_flops_max_rank.to_string());
            row("svd_oracle_flops", p.svd_oracle_flops.to_string());
            row("svd_oracle_flops_max_rank", p.svd_oracle_flops_max_rank.to_string());
            if let Some(v) = m.theorem1 {
                row("theorem1_emax", u8::from(v.emax_holds).to_string());
                row("theorem1_rsum", u8::from(v.rsum_holds).to_string());
                row("theorem1_rmax", u8::from(v.rmax_holds).to_string());
            }
        }
    }
}

pub const CSV_HEADER: &str = "tensor,scheme,ranks,mode,metric,value\n";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn ratio(max: usize, total: usize, ranks: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        max as f64 * ranks as f64 / total as f64
    }
}

/// Metrics of one mode's layout with `Q = 4 K_n` assumed.
pub fn mode_metrics(t: &SparseTensor, layout: &ModeLayout, kind: SchemeKind, uni: bool, core: &[usize]) -> ModeMetrics {
    let n = layout.mode;
    let ranks = layout.ranks;
    let (emax, rsum, rmax, nonempty) = (layout.emax(), layout.rsum(), layout.rmax(), layout.nonempty_count());
    let k = core[n];
    let khat: u64 = core.iter().enumerate().filter(|&(j, _)| j != n).map(|(_, &k)| k as u64).product();
    let q = 4 * k as u64;
    let excess = (rsum - nonempty) as u64;
    let excess_ln = rsum as i64 - layout.mode_len() as i64;
    let theorem1 = (kind == SchemeKind::Lite).then(|| {
        let emax_bound = t.nnz().div_ceil(ranks) as u64;
        let rsum_bound = (nonempty + ranks) as u64;
        let rmax_bound = nonempty.div_ceil(ranks) as u64 + 2;
        Theorem1Verdict {
            emax_bound,
            emax_holds: emax as u64 <= emax_bound,
            rsum_bound,
            rsum_holds: rsum as u64 <= rsum_bound,
            rmax_bound,
            rmax_holds: rmax as u64 <= rmax_bound,
        }
    });
    ModeMetrics {
        mode: n + 1,
        mode_len: layout.mode_len(),
        nonempty,
        core_len: k,
        khat,
        emax,
        rsum,
        rmax,
        e_imbalance: ratio(emax, t.nnz(), ranks),
        r_imbalance: ratio(rmax, rsum, ranks),
        predicted: Predictions {
            queries: q,
            svd_volume: q * excess,
            svd_volume_ln: q as i64 * excess_ln,
            factor_transfer_uni: uni.then_some(k as u64 * excess),
            factor_transfer_uni_ln: uni.then_some(k as i64 * excess_ln),
            ttm_flops: t.nnz() as u64 * khat,
            ttm_flops_max_rank: emax as u64 * khat,
            svd_oracle_flops: q * khat * rsum as u64,
            svd_oracle_flops_max_rank: q * khat * rmax as u64,
        },
        theorem1,
    }
}

pub fn compute_metrics(t: &SparseTensor, scheme: &DistributionScheme, core: &[usize]) -> Result<MetricsReport> {
    scheme.validate(t)?;
    if core.len() != t.order() {
        return Err(Error::Config(format!("{} core lengths for a {}-mode tensor", core.len(), t.order())));
    }
    let modes = (0..t.order())
        .map(|n| {
            let layout = ModeLayout::new(t, scheme, n)?;
            Ok(mode_metrics(t, &layout, scheme.kind, scheme.is_uni_policy(), core))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport {
        schema: METRICS_SCHEMA.into(),
        scheme: scheme.kind,
        ranks: scheme.ranks(),
        seed: scheme.seed,
        uni_policy: scheme.is_uni_policy(),
        grid: scheme.grid.as_ref().map(ToString::to_string),
        dims: t.dims().to_vec(),
        nnz: t.nnz(),
        modes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LedgerComponent {
    SvdX,
    SvdY,
    Svd,
    FactorTransfer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconciliationRow {
    pub mode: usize,
    pub component: LedgerComponent,
    pub predicted: Option<u64>,
    pub measured: u64,
    pub exact: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reconciliation {
    pub schema: String,
    pub rows: Vec<ReconciliationRow>,
}

impl Reconciliation {
    /// True when every row with a prediction matches exactly.
    pub fn all_exact(&self) -> bool {
        self.rows.iter().all(|r| r.exact != Some(false))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Predicted against measured units, per mode and component. SVD rows use
/// the measured query count; factor transfer is measured-only for
/// multi-policy schemes.
pub fn predict_vs_measured(report: &MetricsReport, ledger: &MessageLedger) -> Result<Reconciliation> {
    if report.modes.len() != ledger.modes.len() || report.ranks != ledger.ranks {
        return Err(Error::Shape(format!(
            "report covers {} modes on {} ranks, ledger {} modes on {} ranks",
            report.modes.len(),
            report.ranks,
            ledger.modes.len(),
            ledger.ranks
        )));
    }
    let mut rows = Vec::new();
    for (m, l) in report.modes.iter().zip(&ledger.modes) {
        let excess = (m.rsum - m.nonempty) as u64;
        let svd = l.queries * excess;
        let measured = l.svd_total();
        rows.push(ReconciliationRow {
            mode: m.mode,
            component: LedgerComponent::Svd,
            predicted: Some(svd),
            measured,
            exact: Some(svd == measured),
        });
        let per_query = |c: Component| l.per_rank(c).iter().sum::<u64>();
        rows.push(ReconciliationRow {
            mode: m.mode,
            component: LedgerComponent::SvdX,
            predicted: None,
            measured: per_query(Component::SvdX),
            exact: None,
        });
        rows.push(ReconciliationRow {
            mode: m.mode,
            component: LedgerComponent::SvdY,
            predicted: None,
            measured: per_query(Component::SvdY),
            exact: None,
        });
        let measured = l.total(Component::FactorTransfer);
        let predicted = m.predicted.factor_transfer_uni.map(|per| per * l.transfers);
        rows.push(ReconciliationRow {
            mode: m.mode,
            component: LedgerComponent::FactorTransfer,
            predicted,
            measured,
            exact: predicted.map(|p| p == measured),
        });
    }
    Ok(Reconciliation {
        schema: RECONCILIATION_SCHEMA.into(),
        rows,
    })
}

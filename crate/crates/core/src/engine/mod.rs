//! Simulated distributed HOOI: local penultimates, row ownership, the
//! Lanczos SVD driven by x/y queries, and factor-row transfer, all with
//! message accounting.

mod exec;
mod hooi;
mod lanczos;
mod ledger;
mod ownership;
mod penultimate;
mod products;
mod transfer;

pub use exec::Executor;
pub use hooi::{
    compute_core, fit, hooi_invocation, init_factors, HooiConfig, HooiEngine, InvocationReport, RunResult, SchemePlan,
    Stopping, UpdateOrder,
};
pub use lanczos::{lanczos_svd, IterationBudget, LanczosOptions, SvdFlags, SvdOutcome};
pub use ledger::{Component, MessageLedger, ModeLedger};
pub use ownership::{assign_row_owners, RowOwnership};
pub use penultimate::{build_local_penultimates, LocalPenultimate};
pub use products::{oracle_matvec_x, oracle_matvec_y};
pub use transfer::{row_requirers, transfer_factor_rows, FactorAvailability};

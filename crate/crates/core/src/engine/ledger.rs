//! Point-to-point communication accounting, in scalar units.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    SvdX,
    SvdY,
    FactorTransfer,
}

/// Counters for one mode. Per-rank vectors count units sent by that rank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeLedger {
    pub mode: usize,
    pub svd_x: Vec<u64>,
    pub svd_y: Vec<u64>,
    pub factor_transfer: Vec<u64>,
    /// Lanczos queries (x and y) across all runs on this mode.
    pub queries: u64,
    /// Query count of each Lanczos run, in order.
    pub queries_per_run: Vec<u64>,
    /// Number of factor-row transfer rounds.
    pub transfers: u64,
}

impl ModeLedger {
    fn new(mode: usize, ranks: usize) -> Self {
        ModeLedger {
            mode,
            svd_x: vec![0; ranks],
            svd_y: vec![0; ranks],
            factor_transfer: vec![0; ranks],
            queries: 0,
            queries_per_run: Vec::new(),
            transfers: 0,
        }
    }

    pub fn per_rank(&self, c: Component) -> &[u64] {
        match c {
            Component::SvdX => &self.svd_x,
            Component::SvdY => &self.svd_y,
            Component::FactorTransfer => &self.factor_transfer,
        }
    }

    pub fn total(&self, c: Component) -> u64 {
        self.per_rank(c).iter().sum()
    }

    pub fn svd_total(&self) -> u64 {
        self.total(Component::SvdX) + self.total(Component::SvdY)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageLedger {
    pub ranks: usize,
    pub modes: Vec<ModeLedger>,
}

impl MessageLedger {
    pub fn new(order: usize, ranks: usize) -> Self {
        MessageLedger {
            ranks,
            modes: (0..order).map(|m| ModeLedger::new(m, ranks)).collect(),
        }
    }

    pub fn mode(&self, mode: usize) -> &ModeLedger {
        &self.modes[mode]
    }

    pub(crate) fn send(&mut self, mode: usize, c: Component, rank: usize, units: u64) {
        let m = &mut self.modes[mode];
        let slot = match c {
            Component::SvdX => &mut m.svd_x[rank],
            Component::SvdY => &mut m.svd_y[rank],
            Component::FactorTransfer => &mut m.factor_transfer[rank],
        };
        *slot += units;
    }

    pub(crate) fn record_query(&mut self, mode: usize) {
        self.modes[mode].queries += 1;
    }

    pub(crate) fn close_run(&mut self, mode: usize, queries: u64) {
        self.modes[mode].queries_per_run.push(queries);
    }

    pub(crate) fn record_transfer(&mut self, mode: usize) {
        self.modes[mode].transfers += 1;
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(&LedgerJson::from(self))
    }
}

#[derive(Serialize)]
struct LedgerJson<'a> {
    schema: &'static str,
    ranks: usize,
    modes: Vec<ModeJson<'a>>,
}

#[derive(Serialize)]
struct ModeJson<'a> {
    mode: usize,
    queries: u64,
    queries_per_run: &'a [u64],
    transfers: u64,
    svd_x_total: u64,
    svd_y_total: u64,
    factor_transfer_total: u64,
    svd_x: &'a [u64],
    svd_y: &'a [u64],
    factor_transfer: &'a [u64],
}

impl<'a> From<&'a MessageLedger> for LedgerJson<'a> {
    fn from(l: &'a MessageLedger) -> Self {
        LedgerJson {
            schema: "sptucker.ledger/1",
            ranks: l.ranks,
            modes: l
                .modes
                .iter()
                .map(|m| ModeJson {
                    mode: m.mode + 1,
                    queries: m.queries,
                    queries_per_run: &m.queries_per_run,
                    transfers: m.transfers,
                    svd_x_total: m.total(Component::SvdX),
                    svd_y_total: m.total(Component::SvdY),
                    factor_transfer_total: m.total(Component::FactorTransfer),
                    svd_x: &m.svd_x,
                    svd_y: &m.svd_y,
                    factor_transfer: &m.factor_transfer,
                })
                .collect(),
        }
    }
}

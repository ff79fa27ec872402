//! Per-run report: the human table on stdout and the CSV files written next
//! to the checkpoint. Both render numbers through the same formatters.

use std::fmt::Write as _;
use std::time::Duration;

use dgcf_core::trainer::EpochRecord;

pub fn metric(v: f64) -> String {
    format!("{v:.3}")
}

pub fn loss(v: f64) -> String {
    format!("{v:.6e}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub fingerprint: String,
    pub epochs: Vec<EpochRecord>,
    /// Wall-clock time per entry of `epochs`.
    pub seconds: Vec<f64>,
    pub best_epoch: usize,
    pub test_mrr: f64,
    pub test_recall10: f64,
}

impl RunReport {
    pub fn new(fingerprint: String, epochs: Vec<EpochRecord>, times: &[Duration], best_epoch: usize, test: (f64, f64)) -> Self {
        RunReport {
            fingerprint,
            epochs,
            seconds: times.iter().map(Duration::as_secs_f64).collect(),
            best_epoch,
            test_mrr: test.0,
            test_recall10: test.1,
        }
    }

    /// Deterministic for a fixed seed: timings live in [`RunReport::timing_csv`].
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("fingerprint,row,epoch,loss,mrr,recall10\n");
        for e in &self.epochs {
            let _ = writeln!(out, "{},validation,{},{},{},{}", self.fingerprint, e.epoch, loss(e.loss), metric(e.val_mrr), metric(e.val_recall10));
        }
        let _ = writeln!(out, "{},test,{},,{},{}", self.fingerprint, self.best_epoch, metric(self.test_mrr), metric(self.test_recall10));
        out
    }

    pub fn timing_csv(&self) -> String {
        let mut out = String::from("epoch,seconds\n");
        for (e, s) in self.epochs.iter().zip(&self.seconds) {
            let _ = writeln!(out, "{},{s:.3}", e.epoch);
        }
        out
    }

    pub fn table(&self, bold: bool) -> String {
        let (on, off) = if bold { ("\x1b[1m", "\x1b[0m") } else { ("", "") };
        let mut out = format!("{on}run {}{off}\n", self.fingerprint);
        let _ = writeln!(out, "{on}{:>5}  {:>12}  {:>7}  {:>9}  {:>8}{off}", "epoch", "loss", "val MRR", "val R@10", "seconds");
        for (e, s) in self.epochs.iter().zip(&self.seconds) {
            let _ = writeln!(out, "{:>5}  {:>12}  {:>7}  {:>9}  {s:>8.3}", e.epoch, loss(e.loss), metric(e.val_mrr), metric(e.val_recall10));
        }
        let _ = writeln!(out, "test (best epoch {}): MRR {}  Recall@10 {}", self.best_epoch, metric(self.test_mrr), metric(self.test_recall10));
        out
    }
}

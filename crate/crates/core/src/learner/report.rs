use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::solver::SolveStatus;

/// One solved mini-batch.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchRecord {
    /// Clause (iterative learning) or rule (lists and sets) being learned.
    pub stage: usize,
    pub batch: usize,
    pub samples: usize,
    /// Loss of this batch's candidate on the stage's full training data.
    pub loss: f64,
    pub accepted: bool,
    /// Loss of the accepted rule after this batch.
    pub accepted_loss: f64,
    pub status: SolveStatus,
    pub cost: u64,
    pub nodes: u64,
    pub elapsed: Duration,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub batches: Vec<BatchRecord>,
    pub train_accuracy: f64,
    pub rule_size: usize,
    pub wall_time: Duration,
    /// `(i, j, count)`: training samples satisfying both rule `i` and rule `j`
    /// of a decision set.
    pub overlaps: Vec<(usize, usize, usize)>,
}

impl TrainReport {
    pub(crate) fn finish(&mut self, correct: usize, n: usize, size: usize, start: Instant) {
        self.train_accuracy = if n == 0 {
            0.0
        } else {
            correct as f64 / n as f64
        };
        self.rule_size = size;
        self.wall_time = start.elapsed();
    }

    /// True when, within every stage, the accepted loss never goes up.
    pub fn loss_trace_monotone(&self) -> bool {
        self.batches
            .windows(2)
            .all(|w| w[0].stage != w[1].stage || w[1].accepted_loss <= w[0].accepted_loss)
    }

    /// One header line, then one line per batch.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "stage,batch,samples,loss,accepted,accepted_loss,status,cost,nodes,elapsed_ms\n",
        );
        for b in &self.batches {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{:.3}",
                b.stage,
                b.batch,
                b.samples,
                b.loss,
                b.accepted,
                b.accepted_loss,
                b.status,
                b.cost,
                b.nodes,
                b.elapsed.as_secs_f64() * 1e3
            );
        }
        out
    }
}

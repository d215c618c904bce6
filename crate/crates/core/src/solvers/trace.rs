use std::fmt::Write as _;
use std::time::Instant;

/// Source of the `time_s` column. `Logical` records the iteration count,
/// which keeps output files byte-identical between runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Clock {
    #[default]
    Wall,
    Logical,
}

#[derive(Debug, Clone)]
pub(crate) struct Stopwatch {
    clock: Clock,
    start: Instant,
}

impl Stopwatch {
    pub(crate) fn start(clock: Clock) -> Self {
        Self {
            clock,
            start: Instant::now(),
        }
    }

    pub(crate) fn seconds(&self, logical: f64) -> f64 {
        match self.clock {
            Clock::Wall => self.start.elapsed().as_secs_f64(),
            Clock::Logical => logical,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub time_s: f64,
    pub misfit: f64,
    pub reg: f64,
    pub relerr: Option<f64>,
    pub gradnorm: f64,
}

/// Per-iteration record of a baseline solver.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterTrace {
    pub rows: Vec<TraceRow>,
}

impl IterTrace {
    pub const HEADER: &'static str = "iter,time_s,misfit,reg,relerr,gradnorm";

    pub fn push(&mut self, row: TraceRow) {
        debug_assert!(self.rows.last().is_none_or(|r| r.iter < row.iter));
        self.rows.push(row);
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// CSV with a header line; a missing relative error is written as `NaN`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.iter,
                r.time_s,
                r.misfit,
                r.reg,
                r.relerr.unwrap_or(f64::NAN),
                r.gradnorm
            );
        }
        out
    }
}

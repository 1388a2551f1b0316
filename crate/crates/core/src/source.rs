//! Per-VC source endpoint: paced cell emission, rate measurement over an
//! averaging interval, and processing of returned feedback.
//!
//! Handlers return the next timer delay where one applies; actual scheduling
//! belongs to the caller (the event engine, or a test driving the machine
//! directly).

use std::collections::VecDeque;

use thiserror::Error;

use crate::cell::{DataCell, RmCell};
use crate::units::{CellRate, SimTime, VcId};

/// Below this the cell's adjustment factor counts as "no constraint seen":
/// the source may jump straight to its peak rate.
pub const LAF_NO_CONSTRAINT: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SourceError {
    #[error("initial cell rate {icr} cells/s outside [{min}, {peak}] cells/s")]
    InitialRateOutOfRange { icr: f64, min: f64, peak: f64 },
    #[error("peak cell rate {peak} cells/s must be at least the floor {min} cells/s")]
    EmptyRateRange { min: f64, peak: f64 },
    #[error("averaging interval must be positive, got {0} us")]
    BadAveragingInterval(f64),
    #[error("cell size must be positive")]
    BadCellSize,
}

/// Static configuration of one source endpoint.
#[derive(Debug, Clone)]
pub struct SourceConfig {
    pub vc: VcId,
    pub cell_size_bits: u32,
    pub initial_cell_rate: CellRate,
    /// Ceiling for the transmission rate: the access link's full cell rate.
    pub peak_cell_rate: CellRate,
    /// Floor for the transmission rate, so pacing and measurement never
    /// stall; defaults to one cell per averaging interval.
    pub min_cell_rate: CellRate,
    pub averaging_interval_us: f64,
    /// Honor BECN copies and timestamp-stale feedback rules.
    pub becn_option: bool,
    /// Test hook: with the BECN option on, setting this false processes
    /// stale-timestamp feedback anyway.
    pub taa_guard: bool,
    /// A greedy source always has a cell ready when its pacing timer fires.
    pub greedy: bool,
}

impl SourceConfig {
    /// A greedy source starting at its peak rate, floor of one cell per
    /// interval, BECN off.
    pub fn greedy(
        vc: VcId,
        cell_size_bits: u32,
        peak_cell_rate: CellRate,
        averaging_interval_us: f64,
    ) -> SourceConfig {
        SourceConfig {
            vc,
            cell_size_bits,
            initial_cell_rate: peak_cell_rate,
            peak_cell_rate,
            min_cell_rate: CellRate::measured(1, averaging_interval_us),
            averaging_interval_us,
            becn_option: false,
            taa_guard: true,
            greedy: true,
        }
    }
}

/// Feedback bookkeeping, for tests and end-of-run summaries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SourceDiagnostics {
    /// Feedback cells whose timestamp predated the last acted-upon one.
    pub stale_feedback_ignored: u64,
    /// BECN copies that arrived while the option was off.
    pub becn_without_option: u64,
    pub increases: u64,
    pub decreases: u64,
}

/// Per-VC source state machine.
#[derive(Debug, Clone)]
pub struct SourceState {
    cfg: SourceConfig,
    tcr: CellRate,
    inter_cell_time_us: f64,
    averaging_interval_us: f64,
    transmitted_cell_count: u64,
    /// Timestamp of the emission whose feedback we last acted on.
    taa: SimTime,
    queue: VecDeque<DataCell>,
    rm_seq: u64,
    last_measured: CellRate,
    diag: SourceDiagnostics,
}

impl SourceState {
    pub fn new(cfg: SourceConfig) -> Result<SourceState, SourceError> {
        if !(cfg.averaging_interval_us > 0.0 && cfg.averaging_interval_us.is_finite()) {
            return Err(SourceError::BadAveragingInterval(cfg.averaging_interval_us));
        }
        if cfg.cell_size_bits == 0 {
            return Err(SourceError::BadCellSize);
        }
        if cfg.peak_cell_rate < cfg.min_cell_rate {
            return Err(SourceError::EmptyRateRange {
                min: cfg.min_cell_rate.per_second(),
                peak: cfg.peak_cell_rate.per_second(),
            });
        }
        if cfg.initial_cell_rate < cfg.min_cell_rate || cfg.initial_cell_rate > cfg.peak_cell_rate {
            return Err(SourceError::InitialRateOutOfRange {
                icr: cfg.initial_cell_rate.per_second(),
                min: cfg.min_cell_rate.per_second(),
                peak: cfg.peak_cell_rate.per_second(),
            });
        }
        let tcr = cfg.initial_cell_rate;
        Ok(SourceState {
            tcr,
            inter_cell_time_us: tcr.inter_cell_time_us(),
            averaging_interval_us: cfg.averaging_interval_us,
            transmitted_cell_count: 0,
            taa: SimTime::ZERO,
            queue: VecDeque::new(),
            rm_seq: 0,
            last_measured: CellRate::ZERO,
            diag: SourceDiagnostics::default(),
            cfg,
        })
    }

    pub fn vc(&self) -> VcId {
        self.cfg.vc
    }

    pub fn tcr(&self) -> CellRate {
        self.tcr
    }

    pub fn inter_cell_time_us(&self) -> f64 {
        self.inter_cell_time_us
    }

    pub fn averaging_interval_us(&self) -> f64 {
        self.averaging_interval_us
    }

    pub fn taa(&self) -> SimTime {
        self.taa
    }

    pub fn transmitted_cell_count(&self) -> u64 {
        self.transmitted_cell_count
    }

    pub fn last_measured(&self) -> CellRate {
        self.last_measured
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn diagnostics(&self) -> SourceDiagnostics {
        self.diag
    }

    /// The host handed over `cells` cells to send.
    pub fn on_data_from_host(&mut self, cells: u64) {
        let cell = DataCell {
            vc: self.cfg.vc,
            size_bits: self.cfg.cell_size_bits,
        };
        for _ in 0..cells {
            self.queue.push_back(cell);
        }
    }

    /// Pacing timer expiry: emit one cell if any is ready (a greedy source
    /// always has one). Returns the cell and the delay to the next expiry;
    /// the timer restarts whether or not a cell went out.
    pub fn on_cell_timer(&mut self) -> (Option<DataCell>, f64) {
        let cell = self.queue.pop_front().or_else(|| {
            self.cfg.greedy.then_some(DataCell {
                vc: self.cfg.vc,
                size_bits: self.cfg.cell_size_bits,
            })
        });
        if cell.is_some() {
            self.transmitted_cell_count += 1;
        }
        (cell, self.inter_cell_time_us)
    }

    /// Averaging timer expiry: turn the interval's cell count into the
    /// measured rate, reset the count, and emit a forward RM cell. Returns
    /// the cell and the delay to the next expiry.
    pub fn on_averaging_timer(&mut self, now: SimTime) -> (RmCell, f64) {
        let measured = CellRate::measured(self.transmitted_cell_count, self.averaging_interval_us);
        self.transmitted_cell_count = 0;
        self.last_measured = measured;
        let cell = RmCell::forward(
            self.cfg.vc,
            self.rm_seq,
            self.tcr,
            measured,
            now,
            self.averaging_interval_us,
        );
        self.rm_seq += 1;
        (cell, self.averaging_interval_us)
    }

    /// One of our own RM cells came back around from the destination.
    pub fn on_returned_rm_cell(&mut self, cell: &RmCell) {
        let fresh = !self.cfg.becn_option || !self.cfg.taa_guard || cell.timestamp >= self.taa;
        if fresh {
            self.apply_rate_feedback(cell);
        } else {
            self.diag.stale_feedback_ignored += 1;
        }
        // Adopted even when the rate feedback itself is stale.
        self.averaging_interval_us = cell.averaging_interval_us;
    }

    /// A BECN copy arrived from some switch. Only fresh decrease directives
    /// are honored; everything else is dropped (the full cell is still on its
    /// way around).
    pub fn on_becn_cell(&mut self, cell: &RmCell) {
        if !self.cfg.becn_option {
            self.diag.becn_without_option += 1;
            return;
        }
        if self.cfg.taa_guard && cell.timestamp <= self.taa {
            self.diag.stale_feedback_ignored += 1;
            return;
        }
        let laf = cell.laf.value();
        if laf >= 1.0 {
            let new_tcr = cell.tcr / laf;
            if new_tcr < self.tcr {
                self.decrease_to(new_tcr, cell.timestamp);
            }
        }
    }

    fn apply_rate_feedback(&mut self, cell: &RmCell) {
        let laf = cell.laf.value();
        // A clear factor means no switch saw this VC as constrained: aim for
        // the peak rate rather than divide by (almost) zero.
        let new_tcr = if laf <= LAF_NO_CONSTRAINT {
            self.cfg.peak_cell_rate
        } else {
            cell.tcr / laf
        };
        if laf >= 1.0 {
            if new_tcr < self.tcr {
                self.decrease_to(new_tcr, cell.timestamp);
            }
        } else if new_tcr > self.tcr {
            self.set_tcr(new_tcr);
            self.diag.increases += 1;
        }
    }

    fn decrease_to(&mut self, rate: CellRate, stamp: SimTime) {
        self.set_tcr(rate);
        self.diag.decreases += 1;
        if self.cfg.becn_option {
            // max() keeps the acted-upon stamp monotone even when the
            // staleness guard is disabled by a test.
            self.taa = self.taa.max(stamp);
        }
    }

    fn set_tcr(&mut self, rate: CellRate) {
        self.tcr = rate.clamp(self.cfg.min_cell_rate, self.cfg.peak_cell_rate);
        self.inter_cell_time_us = self.tcr.inter_cell_time_us();
    }
}

//! Cells on the wire: fixed-size data cells and the in-band
//! resource-management (RM) cells that carry rate feedback.

use crate::units::{CellRate, LoadAdjustmentFactor, SimTime, VcId};

/// Fixed-size data cell belonging to one virtual circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataCell {
    pub vc: VcId,
    pub size_bits: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmDirection {
    /// Travelling source to destination, collecting feedback.
    Forward,
    /// Travelling back to the source, delivering feedback.
    Backward,
}

/// Resource-management cell. Carries the source's rate view out to the
/// network (`tcr`, `ocr`) and accumulates the network's feedback (`laf`,
/// `averaging_interval_us`) for the trip back.
#[derive(Debug, Clone, PartialEq)]
pub struct RmCell {
    pub vc: VcId,
    /// Emission sequence number at the source; a BECN copy keeps the
    /// original's, so the two can be correlated in traces.
    pub seq: u64,
    pub direction: RmDirection,
    /// The source's transmission rate, never below the measured rate.
    pub tcr: CellRate,
    /// The rate the source actually measured over its last interval.
    pub ocr: CellRate,
    /// Largest adjustment decision of any switch visited so far.
    pub laf: LoadAdjustmentFactor,
    /// Set on copies a switch sends straight back to the source.
    pub becn_bit: bool,
    /// Source clock at emission; lets the source discard feedback older than
    /// its latest acted-upon adjustment.
    pub timestamp: SimTime,
    /// Largest switch averaging interval seen en route; the source adopts it.
    pub averaging_interval_us: f64,
}

impl RmCell {
    /// Forward RM cell as the source emits it: the advertised `tcr` is the
    /// max of the current transmission rate and the measured rate, and the
    /// feedback fields start clear.
    pub fn forward(
        vc: VcId,
        seq: u64,
        tcr: CellRate,
        ocr: CellRate,
        timestamp: SimTime,
        averaging_interval_us: f64,
    ) -> RmCell {
        RmCell {
            vc,
            seq,
            direction: RmDirection::Forward,
            tcr: tcr.max(ocr),
            ocr,
            laf: LoadAdjustmentFactor::ZERO,
            becn_bit: false,
            timestamp,
            averaging_interval_us,
        }
    }

    /// The destination's turnaround: same cell, now heading back.
    pub fn turned_around(mut self) -> RmCell {
        self.direction = RmDirection::Backward;
        self
    }
}

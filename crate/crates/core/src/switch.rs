//! Switch-side per-port measurement and the explicit-rate feedback decisions
//! (basic band rule, aggressive variant, and the iterative precise share).

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::cell::{DataCell, RmCell, RmDirection};
use crate::num::Real;
use crate::units::{target_output_cell_rate, CellRate, LoadAdjustmentFactor, UnitError, VcId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SwitchError {
    #[error("target utilization must lie in (0, 1), got {0}")]
    BadUtilization(f64),
    #[error("tub_half_width must lie in (0, 0.5), got {0}")]
    BadHalfWidth(f64),
    #[error("averaging interval must be positive, got {0} us")]
    BadAveragingInterval(f64),
    #[error(transparent)]
    Unit(#[from] UnitError),
}

/// Which fairness rule a switch applies to forward RM cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FairnessOption {
    /// Band rule on the load level with equal-split fair share.
    Basic,
    /// Basic plus out-of-band shortcuts that head straight for fairness.
    Aggressive,
    /// Per-VC measured rates feed an iterative max-min share.
    Precise,
}

impl FairnessOption {
    pub fn as_str(self) -> &'static str {
        match self {
            FairnessOption::Basic => "basic",
            FairnessOption::Aggressive => "aggressive",
            FairnessOption::Precise => "precise",
        }
    }
}

/// Static configuration of one switch output port.
#[derive(Debug, Clone)]
pub struct SwitchConfig {
    pub link_bandwidth_bps: f64,
    pub cell_size_bits: u32,
    /// Fraction of the link the port aims to keep busy.
    pub target_utilization: f64,
    /// Half-width of the load-level band treated as "at target".
    pub tub_half_width: f64,
    pub averaging_interval_us: f64,
    pub option: FairnessOption,
    /// Send a copy of an overload decision straight back to the source.
    pub becn_option: bool,
    /// Count RM cells into the port's load measurement (off by default:
    /// the measured load is data cells only).
    pub count_rm_cells: bool,
}

impl SwitchConfig {
    pub fn validate(&self) -> Result<(), SwitchError> {
        if !(self.target_utilization > 0.0 && self.target_utilization < 1.0) {
            return Err(SwitchError::BadUtilization(self.target_utilization));
        }
        if !(self.tub_half_width > 0.0 && self.tub_half_width < 0.5) {
            return Err(SwitchError::BadHalfWidth(self.tub_half_width));
        }
        if !(self.averaging_interval_us > 0.0 && self.averaging_interval_us.is_finite()) {
            return Err(SwitchError::BadAveragingInterval(
                self.averaging_interval_us,
            ));
        }
        Ok(())
    }
}

/// Basic band rule. Outside the band the load level itself is the decision;
/// inside it, a VC above its fair share is steered to the band's lower edge
/// and one at or below is invited up to the upper edge.
pub fn basic_decision<S: Real>(z: S, ocr: S, fair_share: S, delta: S) -> S {
    let one = S::one();
    if z >= one - delta && z <= one + delta {
        if ocr > fair_share {
            z / (one - delta)
        } else {
            z / (one + delta)
        }
    } else {
        z
    }
}

/// Underloaded half of the aggressive rule (`z` below the band): small users
/// still see plain `z`, mid-range users get interpolated part of the slack,
/// and anyone already at the target's worth of cells holds.
pub fn aggressive_underload_factor<S: Real>(
    z: S,
    ocr: S,
    fair_share: S,
    target_rate: S,
    num_active: u32,
) -> S {
    let one = S::one();
    if ocr < fair_share * z || num_active == 1 {
        z
    } else if ocr < target_rate * z {
        let n = S::from_count(num_active);
        z + (one - z) * (ocr / (z * fair_share) - one) / (n - one)
    } else {
        one
    }
}

/// Overloaded half of the aggressive rule (`z` at or above the band's top):
/// VCs within their fair share hold, moderate ones are cut towards the share,
/// and heavy ones are cut by at least the overload itself.
pub fn aggressive_overload_factor<S: Real>(
    z: S,
    ocr: S,
    fair_share: S,
    target_rate: S,
    num_active: u32,
) -> S {
    let one = S::one();
    if ocr <= fair_share && num_active != 1 {
        one
    } else if ocr < fair_share * z {
        (ocr / fair_share).max(one)
    } else if ocr <= target_rate {
        z
    } else {
        ocr * z / target_rate
    }
}

/// Aggressive rule dispatch; inside the band it falls back to the basic rule.
pub fn aggressive_decision<S: Real>(
    z: S,
    ocr: S,
    fair_share: S,
    target_rate: S,
    num_active: u32,
    delta: S,
) -> S {
    let one = S::one();
    if z < one - delta {
        aggressive_underload_factor(z, ocr, fair_share, target_rate, num_active)
    } else if z >= one + delta {
        aggressive_overload_factor(z, ocr, fair_share, target_rate, num_active)
    } else {
        basic_decision(z, ocr, fair_share, delta)
    }
}

/// Result of the iterative share computation for the precise option.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreciseShare<S> {
    pub fair_share: S,
    /// Iteration passes taken; two suffice in all but contrived cases.
    pub passes: u32,
}

/// Iterative max-min share of `target_rate` among `num_active` VCs whose
/// measured rates are `ocrs`: starting from the equal split, VCs measuring
/// under the candidate share keep their measurement and the remainder is
/// re-split among the rest, until the split stops moving.
///
/// When every VC measures under the candidate (total demand below target),
/// re-splitting would never settle; the share is then what the largest
/// user(s) could grow to with everyone else holding their measured rate.
pub fn precise_fair_share<S: Real>(ocrs: &[S], num_active: u32, target_rate: S) -> PreciseShare<S> {
    let n_active = num_active.max(1);
    let n = S::from_count(n_active);
    let mut fair_share = target_rate / n;
    let mut passes = 0u32;
    loop {
        passes += 1;
        let mut under = 0u32;
        let mut sum_under = S::zero();
        for &ocr in ocrs {
            if ocr < fair_share {
                under += 1;
                sum_under = sum_under + ocr;
            }
        }
        if under >= n_active {
            fair_share = largest_user_headroom(ocrs, target_rate);
            break;
        }
        let next = (target_rate - sum_under) / S::from_count(n_active - under);
        if next == fair_share {
            break;
        }
        debug_assert!(next > fair_share, "share iteration must ascend");
        debug_assert!(
            passes <= ocrs.len() as u32 + 1,
            "share iteration ran past its pass bound"
        );
        fair_share = next;
    }
    PreciseShare { fair_share, passes }
}

/// Share for a table whose total demand is below the target: everyone but the
/// largest user(s) keeps their measured rate, and the largest split the rest.
fn largest_user_headroom<S: Real>(ocrs: &[S], target_rate: S) -> S {
    let mut top = S::zero();
    for &ocr in ocrs {
        if ocr > top {
            top = ocr;
        }
    }
    let mut top_count = 0u32;
    let mut sum_others = S::zero();
    for &ocr in ocrs {
        if ocr == top {
            top_count += 1;
        } else {
            sum_others = sum_others + ocr;
        }
    }
    if top_count == 0 {
        // Empty table: nothing to hold back.
        target_rate
    } else {
        (target_rate - sum_others) / S::from_count(top_count)
    }
}

/// What a forward RM cell's visit to a port produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RmVisit {
    /// The port's raw decision for this VC, before max-combining.
    pub decision: f64,
    /// Copy to send straight back towards the source, when the BECN option
    /// reacts to an overload decision.
    pub becn_copy: Option<RmCell>,
}

/// Running measurement state of one switch output port.
#[derive(Debug, Clone)]
pub struct SwitchPortState {
    cfg: SwitchConfig,
    target_cell_rate: CellRate,
    /// Cells one interval at the target rate is worth.
    target_cell_count: f64,
    received_cell_count: u64,
    vc_seen: BTreeSet<VcId>,
    num_active_vcs: u32,
    fair_share: CellRate,
    /// Load level of the last completed interval.
    load_level: f64,
    /// Per-VC measured rates, kept by the precise option.
    ocr_table: BTreeMap<VcId, f64>,
    max_precise_passes: u32,
    precise_over_two_passes: u64,
}

impl SwitchPortState {
    pub fn new(cfg: SwitchConfig) -> Result<SwitchPortState, SwitchError> {
        cfg.validate()?;
        let target_cell_rate = target_output_cell_rate(
            cfg.link_bandwidth_bps,
            cfg.target_utilization,
            cfg.cell_size_bits,
        )?;
        let target_cell_count = target_cell_rate.cells_over_us(cfg.averaging_interval_us);
        Ok(SwitchPortState {
            target_cell_rate,
            target_cell_count,
            received_cell_count: 0,
            vc_seen: BTreeSet::new(),
            num_active_vcs: 1,
            fair_share: target_cell_rate,
            load_level: 0.0,
            ocr_table: BTreeMap::new(),
            max_precise_passes: 0,
            precise_over_two_passes: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &SwitchConfig {
        &self.cfg
    }

    pub fn target_cell_rate(&self) -> CellRate {
        self.target_cell_rate
    }

    pub fn load_level(&self) -> f64 {
        self.load_level
    }

    pub fn fair_share(&self) -> CellRate {
        self.fair_share
    }

    pub fn num_active_vcs(&self) -> u32 {
        self.num_active_vcs
    }

    /// Largest pass count any precise-share computation needed at this port.
    pub fn max_precise_passes(&self) -> u32 {
        self.max_precise_passes
    }

    /// Precise-share computations that needed more than two passes.
    pub fn precise_over_two_passes(&self) -> u64 {
        self.precise_over_two_passes
    }

    /// A data cell crossed the port.
    pub fn on_data_cell(&mut self, cell: &DataCell) {
        self.received_cell_count += 1;
        self.vc_seen.insert(cell.vc);
    }

    /// Interval expiry: turn the interval's counts into the load level and
    /// fair share used for decisions until the next expiry, then reset.
    /// Returns the delay to the next expiry.
    pub fn on_interval_timer(&mut self) -> f64 {
        self.num_active_vcs = self.vc_seen.len().max(1) as u32;
        self.fair_share = self.target_cell_rate / self.num_active_vcs as f64;
        self.load_level = self.received_cell_count as f64 / self.target_cell_count;
        // Measured rates of VCs silent for the whole interval expire with it.
        let seen = &self.vc_seen;
        self.ocr_table.retain(|vc, _| seen.contains(vc));
        self.vc_seen.clear();
        self.received_cell_count = 0;
        self.cfg.averaging_interval_us
    }

    /// An RM cell crossed the port. Backward cells pass untouched; a forward
    /// cell gets the port's decision max-combined into its adjustment factor
    /// and the port's averaging interval stamped in, and may trigger a BECN
    /// copy. Returns what happened for observers.
    pub fn on_rm_cell(&mut self, cell: &mut RmCell) -> Option<RmVisit> {
        if cell.direction == RmDirection::Backward {
            return None;
        }
        if self.cfg.count_rm_cells {
            self.received_cell_count += 1;
            self.vc_seen.insert(cell.vc);
        }
        let decision = self.decide(cell);
        cell.averaging_interval_us = cell
            .averaging_interval_us
            .max(self.cfg.averaging_interval_us);
        let mut becn_copy = None;
        if decision > cell.laf.value() {
            cell.laf =
                LoadAdjustmentFactor::new(decision).expect("decisions are finite and non-negative");
            if self.cfg.becn_option && decision > 1.0 {
                let mut copy = cell.clone();
                copy.direction = RmDirection::Backward;
                copy.becn_bit = true;
                becn_copy = Some(copy);
            }
        }
        Some(RmVisit {
            decision,
            becn_copy,
        })
    }

    fn decide(&mut self, cell: &RmCell) -> f64 {
        let z = self.load_level;
        let ocr = cell.ocr.per_second();
        let fair_share = self.fair_share.per_second();
        let target = self.target_cell_rate.per_second();
        let delta = self.cfg.tub_half_width;
        match self.cfg.option {
            FairnessOption::Basic => basic_decision(z, ocr, fair_share, delta),
            FairnessOption::Aggressive => {
                aggressive_decision(z, ocr, fair_share, target, self.num_active_vcs, delta)
            }
            FairnessOption::Precise => {
                self.ocr_table.insert(cell.vc, ocr);
                let rates: Vec<f64> = self.ocr_table.values().copied().collect();
                let share = precise_fair_share(&rates, self.num_active_vcs, target);
                self.max_precise_passes = self.max_precise_passes.max(share.passes);
                if share.passes > 2 {
                    self.precise_over_two_passes += 1;
                }
                ocr / share.fair_share
            }
        }
    }
}

//! Base quantities: simulation time, identifiers, cell rates, and the
//! load-adjustment feedback factor.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Div, Mul};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnitError {
    #[error("cell rate must be finite and non-negative, got {0}")]
    BadCellRate(f64),
    #[error("load adjustment factor must be finite and non-negative, got {0}")]
    BadAdjustmentFactor(f64),
    #[error("link bandwidth must be finite and positive, got {0} b/s")]
    BadBandwidth(f64),
    #[error("target utilization must lie in (0, 1], got {0}")]
    BadUtilization(f64),
    #[error("cell size must be positive")]
    BadCellSize,
}

/// Simulation timestamp: microseconds plus a scheduler-assigned sequence
/// number that breaks ties, making the order total and deterministic when
/// several events share the same instant.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimTime {
    pub us: f64,
    pub seq: u64,
}

impl SimTime {
    pub const ZERO: SimTime = SimTime { us: 0.0, seq: 0 };

    pub fn new(us: f64, seq: u64) -> Self {
        debug_assert!(us.is_finite() && us >= 0.0, "bad timestamp {us}");
        SimTime { us, seq }
    }

    pub fn max(self, other: SimTime) -> SimTime {
        if self >= other {
            self
        } else {
            other
        }
    }
}

impl PartialEq for SimTime {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for SimTime {}

impl Ord for SimTime {
    fn cmp(&self, other: &Self) -> Ordering {
        self.us.total_cmp(&other.us).then(self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for SimTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} us", self.us)
    }
}

/// Virtual circuit identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VcId(pub u32);

impl fmt::Display for VcId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "vc{}", self.0)
    }
}

impl FromStr for VcId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s
            .strip_prefix("vc")
            .ok_or_else(|| format!("expected vc<N>, got {s:?}"))?;
        digits
            .parse()
            .map(VcId)
            .map_err(|_| format!("expected vc<N>, got {s:?}"))
    }
}

/// Declared (bidirectional) link identifier; each link carries two directed
/// channels, distinguished by [`LinkDir`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LinkDir {
    /// The direction the link was declared in (`from` towards `to`).
    Fwd,
    /// The opposite direction.
    Rev,
}

/// One directed channel of a declared link; doubles as the subject name for
/// per-link trace records (`link3`, `link3:rev`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PortId {
    pub link: LinkId,
    pub dir: LinkDir,
}

impl fmt::Display for PortId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.dir {
            LinkDir::Fwd => write!(f, "link{}", self.link.0),
            LinkDir::Rev => write!(f, "link{}:rev", self.link.0),
        }
    }
}

impl FromStr for PortId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (base, dir) = match s.strip_suffix(":rev") {
            Some(base) => (base, LinkDir::Rev),
            None => (s, LinkDir::Fwd),
        };
        let digits = base
            .strip_prefix("link")
            .ok_or_else(|| format!("expected link<N>[:rev], got {s:?}"))?;
        let id = digits
            .parse()
            .map_err(|_| format!("expected link<N>[:rev], got {s:?}"))?;
        Ok(PortId {
            link: LinkId(id),
            dir,
        })
    }
}

/// Cell rate in cells per second.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct CellRate(f64);

impl CellRate {
    pub const ZERO: CellRate = CellRate(0.0);

    pub fn new(cells_per_s: f64) -> Result<Self, UnitError> {
        if cells_per_s.is_finite() && cells_per_s >= 0.0 {
            Ok(CellRate(cells_per_s))
        } else {
            Err(UnitError::BadCellRate(cells_per_s))
        }
    }

    pub fn per_second(self) -> f64 {
        self.0
    }

    /// Rate measured as `count` cells over `interval_us` microseconds.
    pub fn measured(count: u64, interval_us: f64) -> CellRate {
        debug_assert!(interval_us > 0.0);
        CellRate(count as f64 * 1e6 / interval_us)
    }

    /// Gap between consecutive cells at this rate, in microseconds.
    pub fn inter_cell_time_us(self) -> f64 {
        debug_assert!(self.0 > 0.0, "inter-cell time needs a positive rate");
        1e6 / self.0
    }

    /// Expected number of cells over `interval_us` at this rate.
    pub fn cells_over_us(self, interval_us: f64) -> f64 {
        self.0 * interval_us * 1e-6
    }

    pub fn min(self, other: CellRate) -> CellRate {
        CellRate(self.0.min(other.0))
    }

    pub fn max(self, other: CellRate) -> CellRate {
        CellRate(self.0.max(other.0))
    }

    pub fn clamp(self, lo: CellRate, hi: CellRate) -> CellRate {
        CellRate(self.0.clamp(lo.0, hi.0))
    }
}

impl fmt::Display for CellRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} cells/s", self.0)
    }
}

impl Mul<f64> for CellRate {
    type Output = CellRate;

    fn mul(self, rhs: f64) -> CellRate {
        debug_assert!(rhs.is_finite() && rhs >= 0.0);
        CellRate(self.0 * rhs)
    }
}

impl Div<f64> for CellRate {
    type Output = CellRate;

    fn div(self, rhs: f64) -> CellRate {
        debug_assert!(rhs.is_finite() && rhs > 0.0);
        CellRate(self.0 / rhs)
    }
}

impl Div<CellRate> for CellRate {
    type Output = f64;

    fn div(self, rhs: CellRate) -> f64 {
        debug_assert!(rhs.0 > 0.0);
        self.0 / rhs.0
    }
}

/// Rate a link can carry at a target utilization:
/// `utilization * bandwidth / cell_size`.
pub fn target_output_cell_rate(
    bandwidth_bps: f64,
    utilization: f64,
    cell_size_bits: u32,
) -> Result<CellRate, UnitError> {
    if !(bandwidth_bps.is_finite() && bandwidth_bps > 0.0) {
        return Err(UnitError::BadBandwidth(bandwidth_bps));
    }
    if !(utilization > 0.0 && utilization <= 1.0) {
        return Err(UnitError::BadUtilization(utilization));
    }
    if cell_size_bits == 0 {
        return Err(UnitError::BadCellSize);
    }
    Ok(CellRate(
        utilization * bandwidth_bps / cell_size_bits as f64,
    ))
}

/// Full cell rate of a link (utilization 1).
pub fn link_cell_rate(bandwidth_bps: f64, cell_size_bits: u32) -> Result<CellRate, UnitError> {
    target_output_cell_rate(bandwidth_bps, 1.0, cell_size_bits)
}

/// Dimensionless multiplicative rate-adjustment feedback carried by RM cells.
/// Values above one direct a decrease, values below one an increase; zero
/// means "no constraint seen yet".
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LoadAdjustmentFactor(f64);

impl LoadAdjustmentFactor {
    pub const ZERO: LoadAdjustmentFactor = LoadAdjustmentFactor(0.0);

    pub fn new(value: f64) -> Result<Self, UnitError> {
        if value.is_finite() && value >= 0.0 {
            Ok(LoadAdjustmentFactor(value))
        } else {
            Err(UnitError::BadAdjustmentFactor(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn max(self, other: LoadAdjustmentFactor) -> LoadAdjustmentFactor {
        LoadAdjustmentFactor(self.0.max(other.0))
    }
}

impl fmt::Display for LoadAdjustmentFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sim_time_orders_by_instant_then_sequence() {
        let a = SimTime::new(1.0, 5);
        let b = SimTime::new(1.0, 6);
        let c = SimTime::new(2.0, 0);
        assert!(a < b);
        assert!(b < c);
        assert_eq!(a, SimTime::new(1.0, 5));
        assert_eq!(a.max(b), b);
    }

    #[test]
    fn port_subjects_round_trip_through_display() {
        let fwd = PortId {
            link: LinkId(2),
            dir: LinkDir::Fwd,
        };
        let rev = PortId {
            link: LinkId(2),
            dir: LinkDir::Rev,
        };
        assert_eq!(fwd.to_string(), "link2");
        assert_eq!(rev.to_string(), "link2:rev");
        assert_eq!("link2".parse::<PortId>().unwrap(), fwd);
        assert_eq!("link2:rev".parse::<PortId>().unwrap(), rev);
        assert_eq!("vc3".parse::<VcId>().unwrap(), VcId(3));
        assert!("lonk1".parse::<PortId>().is_err());
    }

    #[test]
    fn measured_rate_and_pacing_are_inverses() {
        // 100 cells over a 1000 us window measure 100_000 cells/s.
        let rate = CellRate::measured(100, 1000.0);
        assert_eq!(rate.per_second(), 100_000.0);
        assert_eq!(rate.inter_cell_time_us(), 10.0);
        assert_eq!(rate.cells_over_us(1000.0), 100.0);
    }

    #[test]
    fn target_rate_examples() {
        // 155.52 Mb/s at 90% utilization with 424-bit cells.
        let r = target_output_cell_rate(155.52e6, 0.9, 424).unwrap();
        assert!((r.per_second() - 330_113.207_547_169_8).abs() < 1e-6);
        // Degenerate sanity cases.
        assert_eq!(
            target_output_cell_rate(424.0, 1.0, 424)
                .unwrap()
                .per_second(),
            1.0
        );
        assert_eq!(
            target_output_cell_rate(848.0, 0.5, 424)
                .unwrap()
                .per_second(),
            1.0
        );
    }

    #[test]
    fn target_rate_rejects_bad_parameters() {
        assert!(matches!(
            target_output_cell_rate(155.52e6, 0.0, 424),
            Err(UnitError::BadUtilization(_))
        ));
        assert!(matches!(
            target_output_cell_rate(155.52e6, 1.5, 424),
            Err(UnitError::BadUtilization(_))
        ));
        assert!(matches!(
            target_output_cell_rate(155.52e6, 0.9, 0),
            Err(UnitError::BadCellSize)
        ));
        assert!(matches!(
            target_output_cell_rate(0.0, 0.9, 424),
            Err(UnitError::BadBandwidth(_))
        ));
        // Utilization 1 is the whole-link rate and is allowed.
        assert!(link_cell_rate(155.52e6, 424).is_ok());
    }

    #[test]
    fn adjustment_factor_bounds() {
        assert!(LoadAdjustmentFactor::new(-0.1).is_err());
        assert!(LoadAdjustmentFactor::new(f64::NAN).is_err());
        let a = LoadAdjustmentFactor::new(0.8).unwrap();
        let b = LoadAdjustmentFactor::new(1.2).unwrap();
        assert_eq!(a.max(b), b);
    }
}

//! Two-source fairness-convergence model of the in-band feedback rule.
//!
//! A link of unit bandwidth carries two sources; an operating point is the
//! pair of their rates `(x, y)`, the load level is `z = (x + y) / U`, and one
//! synchronous step multiplies each rate by `(1 + delta) / z` below the fair
//! share and `(1 - delta) / z` at or above it. Everything here is about what
//! those steps do to points inside the band where the total rate is close to
//! the target — whether they stay there, where they land, and how fast the
//! two rates equalize.

use crate::num::Real;
use thiserror::Error;

/// Absolute slack when testing the band and ratio inequalities, so points
/// computed to land exactly on a boundary still count as inside.
pub const BAND_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TubError {
    #[error("utilization must lie in (0, 1], got {0}")]
    BadUtilization(f64),
    #[error("tub_half_width must lie in (0, 0.5), got {0}")]
    BadHalfWidth(f64),
    #[error("operating point coordinates must be finite and non-negative")]
    BadPoint,
    #[error("the load level is zero at the origin; a step is undefined there")]
    ZeroLoad,
    #[error("starting point lies outside the target band")]
    OutsideBand,
}

/// Link parameters of the model: target utilization and band half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TubParams<S> {
    utilization: S,
    half_width: S,
}

impl<S: Real> TubParams<S> {
    pub fn new(utilization: S, half_width: S) -> Result<TubParams<S>, TubError> {
        let (zero, one) = (S::zero(), S::one());
        if !(utilization > zero && utilization <= one) || !utilization.is_finite() {
            return Err(TubError::BadUtilization(
                utilization.to_f64().unwrap_or(f64::NAN),
            ));
        }
        if !(half_width > zero && half_width < S::cast(0.5)) || !half_width.is_finite() {
            return Err(TubError::BadHalfWidth(
                half_width.to_f64().unwrap_or(f64::NAN),
            ));
        }
        Ok(TubParams {
            utilization,
            half_width,
        })
    }

    pub fn utilization(&self) -> S {
        self.utilization
    }

    pub fn half_width(&self) -> S {
        self.half_width
    }

    /// Equal split of the target rate between the two sources.
    pub fn fair_share(&self) -> S {
        self.utilization / S::cast(2.0)
    }

    /// Smallest total rate inside the band.
    pub fn band_low(&self) -> S {
        self.utilization * (S::one() - self.half_width)
    }

    /// Largest total rate inside the band.
    pub fn band_high(&self) -> S {
        self.utilization * (S::one() + self.half_width)
    }

    /// Largest fair rate ratio: `(1 + delta) / (1 - delta)`.
    pub fn ratio_bound(&self) -> S {
        (S::one() + self.half_width) / (S::one() - self.half_width)
    }

    fn tol() -> S {
        S::cast(BAND_TOL)
    }
}

/// The two source rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint<S> {
    pub x: S,
    pub y: S,
}

impl<S: Real> OperatingPoint<S> {
    pub fn new(x: S, y: S) -> Result<OperatingPoint<S>, TubError> {
        if x.is_finite() && y.is_finite() && x >= S::zero() && y >= S::zero() {
            Ok(OperatingPoint { x, y })
        } else {
            Err(TubError::BadPoint)
        }
    }

    pub fn sum(&self) -> S {
        self.x + self.y
    }

    /// Ratio of the larger rate to the smaller; 1 means equal rates.
    pub fn imbalance(&self) -> S {
        if self.x > self.y {
            self.x / self.y
        } else {
            self.y / self.x
        }
    }
}

/// Load level the two rates put on the link.
pub fn load_level<S: Real>(p: &OperatingPoint<S>, params: &TubParams<S>) -> S {
    p.sum() / params.utilization()
}

/// Both rates positive and the total within the band (with [`BAND_TOL`]).
pub fn in_tub<S: Real>(p: &OperatingPoint<S>, params: &TubParams<S>) -> bool {
    let tol = TubParams::<S>::tol();
    p.x > S::zero()
        && p.y > S::zero()
        && p.sum() >= params.band_low() - tol
        && p.sum() <= params.band_high() + tol
}

/// Inside the band with the rate ratio within the fair bound.
pub fn in_fairness_region<S: Real>(p: &OperatingPoint<S>, params: &TubParams<S>) -> bool {
    if !in_tub(p, params) {
        return false;
    }
    let tol = TubParams::<S>::tol();
    let bound = params.ratio_bound();
    let r = p.y / p.x;
    r <= bound + tol && r >= S::one() / bound - tol
}

/// Where in the band a point sits, which determines what one step does to it.
/// Lettered sub-regions split on the rate ratio: the `a`/plain forms head for
/// the fairness region or are already in it, and the outer `4b`/`4c` forms
/// first bounce off a band edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    R1a,
    R1b,
    R2,
    R3a,
    R3b,
    R4a,
    R4b,
    R4c,
    OutsideTub,
}

/// First-match classification; boundary points resolve to the earliest
/// matching region in the order `1a, 1b, 2, 3a, 3b, 4a, 4b, 4c`.
pub fn classify_region<S: Real>(p: &OperatingPoint<S>, params: &TubParams<S>) -> Region {
    if !in_tub(p, params) {
        return Region::OutsideTub;
    }
    let s = params.fair_share();
    let one = S::one();
    let up = one + params.half_width();
    let dn = one - params.half_width();
    let bound = up / dn;
    let (x, y) = (p.x, p.y);
    if x < s && y >= s && y > up * x {
        Region::R1a
    } else if x < s && up * x >= y && y >= s {
        Region::R1b
    } else if y >= s && x >= s {
        Region::R2
    } else if y < s && x >= s && y < dn * x {
        Region::R3a
    } else if y < s && y >= dn * x && x >= s {
        Region::R3b
    } else if y < s && x < s && y <= bound * x && y >= x / bound {
        Region::R4a
    } else if y < s && y > bound * x {
        Region::R4b
    } else if x < s && y < x / bound {
        Region::R4c
    } else {
        // The eight sets tile the band; only boundary-tolerance points with a
        // zero coordinate could fall through, and in_tub already rejects those.
        Region::OutsideTub
    }
}

fn step_coordinate<S: Real>(v: S, z: S, params: &TubParams<S>) -> S {
    let one = S::one();
    if v < params.fair_share() {
        v * (one + params.half_width()) / z
    } else {
        v * (one - params.half_width()) / z
    }
}

/// One synchronous feedback step applied to both sources.
pub fn tub_step<S: Real>(
    p: &OperatingPoint<S>,
    params: &TubParams<S>,
) -> Result<OperatingPoint<S>, TubError> {
    let z = load_level(p, params);
    if z <= S::zero() {
        return Err(TubError::ZeroLoad);
    }
    Ok(OperatingPoint {
        x: step_coordinate(p.x, z, params),
        y: step_coordinate(p.y, z, params),
    })
}

/// Which source applies its feedback in an asynchronous step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsyncUpdate {
    XOnly,
    YOnly,
}

/// One feedback step applied to a single source while the other holds its
/// rate; both sources saw the same load level.
pub fn async_step<S: Real>(
    p: &OperatingPoint<S>,
    params: &TubParams<S>,
    which: AsyncUpdate,
) -> Result<OperatingPoint<S>, TubError> {
    let z = load_level(p, params);
    if z <= S::zero() {
        return Err(TubError::ZeroLoad);
    }
    let mut next = *p;
    match which {
        AsyncUpdate::XOnly => next.x = step_coordinate(p.x, z, params),
        AsyncUpdate::YOnly => next.y = step_coordinate(p.y, z, params),
    }
    Ok(next)
}

/// A run of synchronous steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    /// Visited operating points, starting point first.
    pub points: Vec<OperatingPoint<S>>,
    /// Whether the last point lies in the fairness region.
    pub converged: bool,
}

impl<S> Trajectory<S> {
    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }
}

impl<S: Real> Trajectory<S> {
    pub fn last(&self) -> OperatingPoint<S> {
        *self.points.last().expect("trajectory holds its start")
    }
}

/// Repeats [`tub_step`] from `start` (which must be inside the band) until
/// the fairness region is reached or `max_steps` are spent. Running out of
/// steps is reported via `converged`, not an error.
pub fn iterate_to_fairness<S: Real>(
    start: OperatingPoint<S>,
    params: &TubParams<S>,
    max_steps: usize,
) -> Result<Trajectory<S>, TubError> {
    if !in_tub(&start, params) {
        return Err(TubError::OutsideBand);
    }
    let mut points = vec![start];
    let mut current = start;
    let mut converged = in_fairness_region(&current, params);
    while !converged && points.len() <= max_steps {
        current = tub_step(&current, params)?;
        points.push(current);
        converged = in_fairness_region(&current, params);
    }
    Ok(Trajectory { points, converged })
}

/// Step allowance implied by the per-step imbalance contraction: the ratio
/// shrinks by the fair bound each regular step, with slack for the
/// edge-landing steps that leave it unchanged.
pub fn contraction_step_bound<S: Real>(start_imbalance: S, params: &TubParams<S>) -> usize {
    let rho = params.ratio_bound();
    let k = (start_imbalance / rho).ln() / rho.ln();
    let k = k.ceil().to_f64().expect("step count fits f64");
    (k.max(0.0) as usize) + 2
}

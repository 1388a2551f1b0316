//! Seeded random sweeps over the two-source model's convergence claims:
//! one step never leaves the band, and lopsided points reach the fairness
//! region within the contraction allowance and then stay there.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::tubmodel::{
    contraction_step_bound, in_fairness_region, in_tub, iterate_to_fairness, tub_step,
    OperatingPoint, TubError, TubParams,
};

/// Fixed default seed so repeated sweeps check the same sample set.
pub const DEFAULT_SEED: u64 = 0xABAC0;

/// Extra synchronous steps used to confirm a converged point stays put.
pub const CLOSURE_STEPS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub samples: usize,
    pub utilization_min: f64,
    pub utilization_max: f64,
    pub half_width_min: f64,
    pub half_width_max: f64,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            samples: 10_000,
            utilization_min: 0.05,
            utilization_max: 0.995,
            half_width_min: 0.01,
            half_width_max: 0.49,
            seed: DEFAULT_SEED,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), TubError> {
        if self.samples == 0 {
            return Err(TubError::BadPoint);
        }
        if !(self.utilization_min > 0.0
            && self.utilization_min < self.utilization_max
            && self.utilization_max <= 1.0)
        {
            return Err(TubError::BadUtilization(self.utilization_max));
        }
        if !(self.half_width_min > 0.0
            && self.half_width_min < self.half_width_max
            && self.half_width_max < 0.5)
        {
            return Err(TubError::BadHalfWidth(self.half_width_max));
        }
        Ok(())
    }
}

/// Tallies from one sweep. Any nonzero count is a claim violation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepReport {
    pub samples: usize,
    /// One step took an in-band point out of the band.
    pub band_escapes: usize,
    /// The fairness region was not reached within the step allowance.
    pub late_or_failed_convergence: usize,
    /// A converged point left the fairness region within [`CLOSURE_STEPS`].
    pub fairness_escapes: usize,
    pub worst_steps: usize,
    pub worst_allowance: usize,
    pub max_imbalance_sampled: f64,
}

impl SweepReport {
    pub fn violations(&self) -> usize {
        self.band_escapes + self.late_or_failed_convergence + self.fairness_escapes
    }

    pub fn passed(&self) -> bool {
        self.violations() == 0
    }
}

/// Draws in-band operating points under random `(U, delta)` parameters and
/// checks each against the one-step and convergence claims.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepReport, TubError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = SweepReport {
        samples: cfg.samples,
        ..SweepReport::default()
    };
    for _ in 0..cfg.samples {
        let u = rng.gen_range(cfg.utilization_min..cfg.utilization_max);
        let delta = rng.gen_range(cfg.half_width_min..cfg.half_width_max);
        let params = TubParams::new(u, delta)?;
        let start = sample_point(&mut rng, &params);

        // One-step closure of the band.
        let stepped = tub_step(&start, &params)?;
        if !in_tub(&stepped, &params) {
            report.band_escapes += 1;
        }

        // Convergence within the contraction allowance, then closure of the
        // fairness region.
        let imbalance = start.imbalance();
        report.max_imbalance_sampled = report.max_imbalance_sampled.max(imbalance);
        let allowance = contraction_step_bound(imbalance, &params);
        let traj = iterate_to_fairness(start, &params, allowance)?;
        if !traj.converged {
            report.late_or_failed_convergence += 1;
            report.worst_steps = report.worst_steps.max(allowance + 1);
            report.worst_allowance = report.worst_allowance.max(allowance);
            continue;
        }
        if traj.steps() > report.worst_steps {
            report.worst_steps = traj.steps();
            report.worst_allowance = allowance;
        }
        let mut q = traj.last();
        for _ in 0..CLOSURE_STEPS {
            q = tub_step(&q, &params)?;
            if !in_fairness_region(&q, &params) {
                report.fairness_escapes += 1;
                break;
            }
        }
    }
    Ok(report)
}

/// Uniform in-band point: total drawn across the band, then split between
/// the sources; zero coordinates are redrawn since a silent source is
/// outside the model.
fn sample_point<R: Rng>(rng: &mut R, params: &TubParams<f64>) -> OperatingPoint<f64> {
    loop {
        let sum = rng.gen_range(params.band_low()..params.band_high());
        let f = rng.gen_range(0.0..1.0);
        let p = OperatingPoint {
            x: sum * f,
            y: sum * (1.0 - f),
        };
        if p.x > 0.0 && p.y > 0.0 && in_tub(&p, params) {
            return p;
        }
    }
}

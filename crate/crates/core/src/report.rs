//! Run reports: summary statistics computed from a finished trace. The
//! report is a pure function of the records plus the scenario (needed for
//! band widths and the max-min reference shares), so reloading a trace from
//! disk reproduces it bit for bit.

use std::collections::BTreeMap;
use std::fmt;

use crate::oracle::{fairness_index, max_min_allocation};
use crate::scenario::Scenario;
use crate::trace::{Subject, TraceKind, TraceRecord};
use crate::units::{target_output_cell_rate, LinkDir, LinkId, PortId, VcId};

/// Slack when testing a sampled load level against the band edges, covering
/// the trace's 9-significant-digit rounding.
const BAND_EDGE_SLACK: f64 = 1e-9;

/// How many consecutive in-band intervals count as "converged".
pub const CONVERGENCE_STREAK: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct VcStats {
    pub vc: VcId,
    /// Time-weighted mean transmission rate over the steady window.
    pub mean_tcr: f64,
    /// Coefficient of variation (time-weighted) over the steady window.
    pub tcr_cov: f64,
    pub final_tcr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkStats {
    pub port: PortId,
    /// Mean sampled utilization over the steady window.
    pub mean_util: f64,
    /// Largest sampled output queue over the whole run, in cells.
    pub max_queue_cells: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BottleneckStats {
    pub port: PortId,
    /// Mean measured load level over the steady window.
    pub mean_z: f64,
    /// Band half-width in force at this port.
    pub half_width: f64,
    /// Start of the first run of [`CONVERGENCE_STREAK`] in-band intervals.
    pub convergence_time_us: Option<f64>,
    /// In-band share of measured intervals from convergence to the end.
    pub in_band_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub duration_us: f64,
    pub steady_from_us: f64,
    pub vcs: Vec<VcStats>,
    pub links: Vec<LinkStats>,
    /// The port with the highest steady mean load level.
    pub bottleneck: Option<BottleneckStats>,
    /// Ratio statistic of the steady mean rates against the max-min shares
    /// (1 = exactly the reference split).
    pub fairness_index: Option<f64>,
    /// Max-min share per VC over the switch ports' target rates.
    pub max_min_shares: Vec<(VcId, f64)>,
}

/// Summarizes `records` from a run of `scenario` that lasted `duration_us`.
pub fn compute_report(
    records: &[TraceRecord],
    scenario: &Scenario,
    duration_us: f64,
) -> SimulationReport {
    let steady_from_us = duration_us / 2.0;

    let mut tcr_series: BTreeMap<VcId, Vec<(f64, f64)>> = BTreeMap::new();
    let mut z_series: BTreeMap<PortId, Vec<(f64, f64)>> = BTreeMap::new();
    let mut util_samples: BTreeMap<PortId, Vec<(f64, f64)>> = BTreeMap::new();
    let mut queue_samples: BTreeMap<PortId, Vec<(f64, f64)>> = BTreeMap::new();
    for r in records {
        match (r.kind, r.subject) {
            (TraceKind::Tcr, Subject::Vc(vc)) => {
                tcr_series.entry(vc).or_default().push((r.time_us, r.value));
            }
            (TraceKind::Z, Subject::Link(port)) => {
                z_series.entry(port).or_default().push((r.time_us, r.value));
            }
            (TraceKind::LinkUtil, Subject::Link(port)) => {
                util_samples
                    .entry(port)
                    .or_default()
                    .push((r.time_us, r.value));
            }
            (TraceKind::QueueLen, Subject::Link(port)) => {
                queue_samples
                    .entry(port)
                    .or_default()
                    .push((r.time_us, r.value));
            }
            _ => {}
        }
    }

    let mut vcs = Vec::new();
    for decl in &scenario.vcs {
        let vc = VcId(decl.id);
        let Some(series) = tcr_series.get(&vc) else {
            continue;
        };
        let Some((mean, var)) = step_mean_var(series, steady_from_us, duration_us) else {
            continue;
        };
        let cov = if mean > 0.0 { var.sqrt() / mean } else { 0.0 };
        vcs.push(VcStats {
            vc,
            mean_tcr: mean,
            tcr_cov: cov,
            final_tcr: series.last().expect("non-empty series").1,
        });
    }

    let mut links = Vec::new();
    for (&port, samples) in &util_samples {
        let mean_util = window_mean(samples, steady_from_us, duration_us).unwrap_or(0.0);
        let max_queue_cells = queue_samples
            .get(&port)
            .map(|q| q.iter().map(|&(_, v)| v).fold(0.0, f64::max))
            .unwrap_or(0.0);
        links.push(LinkStats {
            port,
            mean_util,
            max_queue_cells,
        });
    }

    let half_widths = port_half_widths(scenario);
    let mut bottleneck: Option<BottleneckStats> = None;
    for (&port, series) in &z_series {
        let Some(mean_z) = window_mean(series, steady_from_us, duration_us) else {
            continue;
        };
        if bottleneck.as_ref().is_some_and(|b| b.mean_z >= mean_z) {
            continue;
        }
        let half_width = half_widths
            .get(&port)
            .copied()
            .unwrap_or(scenario.defaults.tub_half_width);
        let (convergence_time_us, in_band_fraction) = convergence(series, half_width);
        bottleneck = Some(BottleneckStats {
            port,
            mean_z,
            half_width,
            convergence_time_us,
            in_band_fraction,
        });
    }

    let max_min_shares = max_min_shares(scenario).unwrap_or_default();
    let fairness_index = if vcs.len() == max_min_shares.len() && !vcs.is_empty() {
        let allocations: Vec<f64> = vcs.iter().map(|v| v.mean_tcr).collect();
        let optimum: Vec<f64> = max_min_shares.iter().map(|&(_, r)| r).collect();
        fairness_index(&allocations, &optimum).ok()
    } else {
        None
    };

    SimulationReport {
        duration_us,
        steady_from_us,
        vcs,
        links,
        bottleneck,
        fairness_index,
        max_min_shares,
    }
}

/// Time-weighted mean and variance of a right-continuous step function given
/// by its change points, over `[from, to]`. `None` when the window is empty
/// or starts before the first change point.
fn step_mean_var(points: &[(f64, f64)], from: f64, to: f64) -> Option<(f64, f64)> {
    // NaN bounds fall through to None, like an empty window.
    if to.partial_cmp(&from) != Some(std::cmp::Ordering::Greater) {
        return None;
    }
    let mut value = None;
    let mut rest = points;
    while let Some((&(t, v), tail)) = rest.split_first() {
        if t > from {
            break;
        }
        value = Some(v);
        rest = tail;
    }
    let mut value = value?;
    let mut t_prev = from;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for &(t, v) in rest {
        if t >= to {
            break;
        }
        let dt = t - t_prev;
        sum += value * dt;
        sum_sq += value * value * dt;
        t_prev = t;
        value = v;
    }
    let dt = to - t_prev;
    sum += value * dt;
    sum_sq += value * value * dt;
    let span = to - from;
    let mean = sum / span;
    let var = (sum_sq / span - mean * mean).max(0.0);
    Some((mean, var))
}

/// Plain mean of the samples falling in `(from, to]`.
fn window_mean(samples: &[(f64, f64)], from: f64, to: f64) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0u32;
    for &(t, v) in samples {
        if t > from && t <= to {
            sum += v;
            n += 1;
        }
    }
    (n > 0).then(|| sum / f64::from(n))
}

fn in_band(z: f64, half_width: f64) -> bool {
    z >= 1.0 - half_width - BAND_EDGE_SLACK && z <= 1.0 + half_width + BAND_EDGE_SLACK
}

/// First streak of [`CONVERGENCE_STREAK`] in-band samples, and the in-band
/// share from that point on.
fn convergence(series: &[(f64, f64)], half_width: f64) -> (Option<f64>, Option<f64>) {
    let mut streak = 0usize;
    let mut start = None;
    for (i, &(_, z)) in series.iter().enumerate() {
        if in_band(z, half_width) {
            streak += 1;
            if streak == CONVERGENCE_STREAK {
                start = Some(i + 1 - CONVERGENCE_STREAK);
                break;
            }
        } else {
            streak = 0;
        }
    }
    let Some(start) = start else {
        return (None, None);
    };
    let tail = &series[start..];
    let hits = tail
        .iter()
        .filter(|&&(_, z)| in_band(z, half_width))
        .count();
    (Some(series[start].0), Some(hits as f64 / tail.len() as f64))
}

/// Band half-width in force at each switch output port.
fn port_half_widths(scenario: &Scenario) -> BTreeMap<PortId, f64> {
    let mut widths = BTreeMap::new();
    for (i, l) in scenario.links.iter().enumerate() {
        for (node, dir) in [(&l.from, LinkDir::Fwd), (&l.to, LinkDir::Rev)] {
            if let Some(decl) = scenario.switch_decl(node) {
                let width = decl
                    .tub_half_width
                    .unwrap_or(scenario.defaults.tub_half_width);
                widths.insert(
                    PortId {
                        link: LinkId(i as u32 + 1),
                        dir,
                    },
                    width,
                );
            }
        }
    }
    widths
}

/// Max-min share per VC, with each switch output port's target rate as the
/// capacity. `None` when a path names a missing link or a rate is malformed.
pub fn max_min_shares(scenario: &Scenario) -> Option<Vec<(VcId, f64)>> {
    let mut port_slots: BTreeMap<PortId, usize> = BTreeMap::new();
    let mut capacities: Vec<f64> = Vec::new();
    let mut routes: Vec<Vec<usize>> = Vec::new();
    for vc in &scenario.vcs {
        let mut route = Vec::new();
        for pair in vc.path.windows(2) {
            let (i, dir) = scenario.links.iter().enumerate().find_map(|(i, l)| {
                if l.from == pair[0] && l.to == pair[1] {
                    Some((i, LinkDir::Fwd))
                } else if l.from == pair[1] && l.to == pair[0] {
                    Some((i, LinkDir::Rev))
                } else {
                    None
                }
            })?;
            // Only switch-fed hops cap the rate.
            let Some(decl) = scenario.switch_decl(&pair[0]) else {
                continue;
            };
            let port = PortId {
                link: LinkId(i as u32 + 1),
                dir,
            };
            let next_slot = port_slots.len();
            let slot = *port_slots.entry(port).or_insert(next_slot);
            if slot == capacities.len() {
                let link = &scenario.links[i];
                let bandwidth = link
                    .bandwidth_bps
                    .unwrap_or(scenario.defaults.link_bandwidth_bps);
                let utilization = decl
                    .target_utilization
                    .unwrap_or(scenario.defaults.target_utilization);
                let rate = target_output_cell_rate(bandwidth, utilization, scenario.cell_size_bits)
                    .ok()?;
                capacities.push(rate.per_second());
            }
            route.push(slot);
        }
        routes.push(route);
    }
    let shares = max_min_allocation(&capacities, &routes).ok()?;
    Some(
        scenario
            .vcs
            .iter()
            .zip(shares)
            .map(|(vc, share)| (VcId(vc.id), share))
            .collect(),
    )
}

impl fmt::Display for SimulationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "run over {} us (steady window from {} us)",
            self.duration_us, self.steady_from_us
        )?;
        for v in &self.vcs {
            writeln!(
                f,
                "  {}: tcr mean {:.1} cells/s, cov {:.4}, final {:.1} cells/s",
                v.vc, v.mean_tcr, v.tcr_cov, v.final_tcr
            )?;
        }
        for l in &self.links {
            writeln!(
                f,
                "  {}: util {:.3}, peak queue {:.0} cells",
                l.port, l.mean_util, l.max_queue_cells
            )?;
        }
        if let Some(b) = &self.bottleneck {
            write!(f, "  bottleneck {}: mean z {:.4}", b.port, b.mean_z)?;
            match (b.convergence_time_us, b.in_band_fraction) {
                (Some(t), Some(frac)) => writeln!(
                    f,
                    ", converged at {t} us, in-band {:.1}% after",
                    frac * 100.0
                )?,
                _ => writeln!(
                    f,
                    ", never held {CONVERGENCE_STREAK} consecutive in-band intervals"
                )?,
            }
        }
        if let Some(index) = self.fairness_index {
            writeln!(f, "  fairness index {index:.4} against max-min shares")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario;

    const SINGLE: &str = "\
[scenario]
name = single
duration_us = 10000

[source src1]
[switch sw1]
[destination dst1]

[link a1]
from = src1
to = sw1

[link b1]
from = sw1
to = dst1

[vc 1]
path = src1 sw1 dst1
";

    fn z_port() -> PortId {
        // b1 is the second declared link; sw1 feeds its forward channel.
        PortId {
            link: LinkId(2),
            dir: LinkDir::Fwd,
        }
    }

    #[test]
    fn step_function_integration() {
        let points = [(0.0, 1.0), (10.0, 3.0)];
        let (mean, var) = step_mean_var(&points, 0.0, 20.0).unwrap();
        assert!((mean - 2.0).abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);

        // A window straddling the change point weighs both halves equally.
        let (mean, _) = step_mean_var(&points, 5.0, 15.0).unwrap();
        assert!((mean - 2.0).abs() < 1e-12);

        // A window before any change point has no defined value.
        assert!(step_mean_var(&[(5.0, 1.0)], 0.0, 4.0).is_none());
        // Empty windows likewise.
        assert!(step_mean_var(&points, 5.0, 5.0).is_none());
    }

    #[test]
    fn report_from_synthetic_records() {
        let s = scenario::parse(SINGLE).unwrap();
        let mut records = vec![TraceRecord::new(
            0.0,
            TraceKind::Tcr,
            Subject::Vc(VcId(1)),
            300_000.0,
        )];
        let zs = [0.5, 0.8, 0.95, 1.0, 1.05, 1.0, 0.95, 1.0, 1.05, 1.0];
        for (i, &z) in zs.iter().enumerate() {
            records.push(TraceRecord::new(
                (i as f64 + 1.0) * 1000.0,
                TraceKind::Z,
                Subject::Link(z_port()),
                z,
            ));
        }
        let report = compute_report(&records, &s, 10_000.0);

        assert_eq!(report.vcs.len(), 1);
        let vc = &report.vcs[0];
        assert!((vc.mean_tcr - 300_000.0).abs() < 1e-9);
        assert_eq!(vc.tcr_cov, 0.0);

        let b = report.bottleneck.as_ref().unwrap();
        assert_eq!(b.port, z_port());
        // First in-band sample is 0.95 at t = 3000; five in a row follow.
        assert_eq!(b.convergence_time_us, Some(3000.0));
        assert_eq!(b.in_band_fraction, Some(1.0));
        // Steady window holds the last five samples.
        let tail_mean = zs[5..].iter().sum::<f64>() / 5.0;
        assert!((b.mean_z - tail_mean).abs() < 1e-12);

        // One flow against one capacity: index is exactly 1.
        assert!((report.fairness_index.unwrap() - 1.0).abs() < 1e-12);
        // The reference share is the port's target rate.
        let (vc_id, share) = report.max_min_shares[0];
        assert_eq!(vc_id, VcId(1));
        assert!((share - 0.9 * 155.52e6 / 424.0).abs() < 1e-6);
    }

    #[test]
    fn convergence_requires_the_full_streak() {
        let series: Vec<(f64, f64)> = [0.95, 1.0, 0.5, 1.0, 1.0, 1.0, 1.05, 0.98]
            .iter()
            .enumerate()
            .map(|(i, &z)| (i as f64 * 1000.0, z))
            .collect();
        // Longest streak is 5, starting after the dip at index 2.
        let (t, frac) = convergence(&series, 0.1);
        assert_eq!(t, Some(3000.0));
        assert_eq!(frac, Some(1.0));

        // With a tighter band the dip at 1.05 breaks every streak of 5.
        let (t, _) = convergence(&series, 0.03);
        assert_eq!(t, None);
    }

    #[test]
    fn empty_records_make_an_empty_report() {
        let s = scenario::parse(SINGLE).unwrap();
        let report = compute_report(&[], &s, 0.0);
        assert!(report.vcs.is_empty());
        assert!(report.links.is_empty());
        assert!(report.bottleneck.is_none());
        assert!(report.fairness_index.is_none());
    }
}

//! Acceptance gate: the ten release criteria, one test per criterion, each
//! printing a single verdict line (visible with `--nocapture`, or on failure).
//! Tolerances are pinned here and nowhere else; sampled criteria use the fixed
//! sweep seed so every run checks the same cases.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use abrsim_core::cell::RmDirection;
use abrsim_core::engine::{run_scenario, RmEvent, RmHopObservation, Simulation};
use abrsim_core::oracle::water_level;
use abrsim_core::report::compute_report;
use abrsim_core::scenario::{self, bundled};
use abrsim_core::source::{SourceConfig, SourceState};
use abrsim_core::switch::{
    aggressive_decision, aggressive_overload_factor, aggressive_underload_factor,
    precise_fair_share, FairnessOption,
};
use abrsim_core::tubcheck::{run_sweep, SweepConfig, DEFAULT_SEED};
use abrsim_core::tubmodel::{
    async_step, classify_region, in_tub, tub_step, AsyncUpdate, OperatingPoint, Region, TubParams,
};
use abrsim_core::units::{target_output_cell_rate, CellRate, LoadAdjustmentFactor, SimTime, VcId};
use abrsim_core::SimulationReport;

/// Prints the per-criterion verdict line, then enforces it.
fn criterion(number: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {number:2} {name:<28} {verdict}  {detail}");
    assert!(pass, "criterion {number} ({name}) failed: {detail}");
}

fn run_report(text: &str, option: Option<FairnessOption>) -> SimulationReport {
    let mut s = scenario::parse(text).expect("bundled scenario parses");
    if let Some(option) = option {
        s.option = option;
    }
    let out = run_scenario(&s).expect("scenario runs");
    compute_report(&out.records, &s, s.duration_us)
}

fn vc_mean(report: &SimulationReport, id: u32) -> f64 {
    report
        .vcs
        .iter()
        .find(|v| v.vc == VcId(id))
        .unwrap_or_else(|| panic!("vc{id} missing from report"))
        .mean_tcr
}

/// Criterion 1: on the four-VC, three-switch scenario, the upstream-limited
/// VCs settle at a third of the cross-link target rate each, and the VC that
/// only crosses the second link picks up the remaining two thirds. The first
/// three are held within ±delta of R/3 relative; the unconstrained VC is held
/// within ±delta of 2/3 in fractions of R, which covers the basic option's
/// documented parking offset of up to delta*R below the fair share.
#[test]
fn c01_upstream_allocation() {
    let s = scenario::parse(bundled::UPSTREAM_BOTTLENECK).unwrap();
    assert!(
        s.duration_us >= 200.0 * s.defaults.averaging_interval_us,
        "scenario must cover at least 200 switch intervals"
    );
    let out = run_scenario(&s).unwrap();
    let report = compute_report(&out.records, &s, s.duration_us);

    let l2 = s.link_between("sw2", "sw3").expect("cross link declared");
    let bw = l2.bandwidth_bps.unwrap_or(s.defaults.link_bandwidth_bps);
    let r = target_output_cell_rate(bw, s.defaults.target_utilization, s.cell_size_bits)
        .unwrap()
        .per_second();
    let delta = s.defaults.tub_half_width;

    let mut pass = true;
    let mut detail = String::new();
    for id in 1..=3u32 {
        let mean = vc_mean(&report, id);
        let rel = (mean / (r / 3.0) - 1.0).abs();
        pass &= rel <= delta;
        detail.push_str(&format!("vc{id} {rel:+.3}% of R/3; ", rel = 100.0 * rel));
    }
    let mean4 = vc_mean(&report, 4);
    let frac_err = (mean4 / r - 2.0 / 3.0).abs();
    pass &= frac_err <= delta;
    detail.push_str(&format!(
        "vc4 {:.1} = R*{:.4} (off 2/3 by {:.4} of R, {:+.2}% relative)",
        mean4,
        mean4 / r,
        frac_err,
        100.0 * (mean4 / (2.0 * r / 3.0) - 1.0),
    ));
    criterion(1, "upstream allocation", pass, &detail);
}

/// Criterion 2: one synchronous step never takes an in-band point out of the
/// band, over the seeded parameter sweep.
#[test]
fn c02_band_closure_sweep() {
    let cfg = SweepConfig {
        samples: 10_000,
        seed: DEFAULT_SEED,
        ..SweepConfig::default()
    };
    assert!(cfg.half_width_min >= 0.01 && cfg.half_width_max <= 0.49);
    let report = run_sweep(&cfg).unwrap();
    criterion(
        2,
        "band closure",
        report.band_escapes == 0,
        &format!(
            "{} samples, {} escapes, max imbalance {:.1}",
            report.samples, report.band_escapes, report.max_imbalance_sampled
        ),
    );
}

/// Criterion 3: every sampled start reaches the fairness region within the
/// contraction allowance and stays there for the closure steps after.
#[test]
fn c03_fairness_convergence() {
    let cfg = SweepConfig {
        samples: 10_000,
        seed: DEFAULT_SEED,
        ..SweepConfig::default()
    };
    let report = run_sweep(&cfg).unwrap();
    let pass = report.late_or_failed_convergence == 0 && report.fairness_escapes == 0;
    criterion(
        3,
        "fairness convergence",
        pass,
        &format!(
            "{} samples, {} late, {} region escapes, worst {} steps of {} allowed",
            report.samples,
            report.late_or_failed_convergence,
            report.fairness_escapes,
            report.worst_steps,
            report.worst_allowance
        ),
    );
}

fn sample_band_params(rng: &mut ChaCha8Rng) -> TubParams<f64> {
    let u = rng.gen_range(0.5..0.99);
    let delta = rng.gen_range(0.01..0.49);
    TubParams::new(u, delta).unwrap()
}

/// Criterion 4: points with both rates at or above the fair share land
/// exactly on the band's lower edge; points with both below land exactly on
/// the upper edge.
#[test]
fn c04_exact_edge_landings() {
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut worst = 0.0f64;
    for _ in 0..2_000 {
        let params = sample_band_params(&mut rng);
        let s = params.fair_share();
        let span = params.utilization() * params.half_width();

        // Both over the share, total at most the upper edge.
        let a = rng.gen_range(0.0..span);
        let b = rng.gen_range(0.0..(span - a));
        let p = OperatingPoint::new(s + a, s + b).unwrap();
        assert_eq!(classify_region(&p, &params), Region::R2);
        let q = tub_step(&p, &params).unwrap();
        worst = worst.max((q.sum() / params.band_low() - 1.0).abs());

        // Both under the share, total at least the lower edge.
        let a = rng.gen_range(span * 1e-9..span);
        let b = rng.gen_range(span * 1e-9..(span - a).max(span * 2e-9));
        let p = OperatingPoint::new(s - a, s - b).unwrap();
        assert!(matches!(
            classify_region(&p, &params),
            Region::R4a | Region::R4b | Region::R4c
        ));
        let q = tub_step(&p, &params).unwrap();
        worst = worst.max((q.sum() / params.band_high() - 1.0).abs());
    }
    criterion(
        4,
        "exact edge landings",
        worst <= 1e-12,
        &format!("2000 points per edge, worst landing off by {worst:.2e} relative"),
    );
}

/// Criterion 5: when only one source applies its feedback, a point with the
/// smaller rate under the share and the larger at or over it stays in the
/// band; the updated large rate never undershoots (1 - delta) times the held
/// small rate; and on the band's lower edge the large-rate update holds still.
#[test]
fn c05_async_updates() {
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut worst_ratio_slack = f64::INFINITY;
    let mut worst_hold = 0.0f64;
    for _ in 0..2_000 {
        let params = sample_band_params(&mut rng);
        let s = params.fair_share();
        let x = rng.gen_range(s * 0.01..s * 0.999);
        let y_lo = (params.band_low() - x).max(s);
        let y_hi = params.band_high() - x;
        let y = rng.gen_range(y_lo..y_hi);
        let p = OperatingPoint::new(x, y).unwrap();
        assert!(matches!(
            classify_region(&p, &params),
            Region::R1a | Region::R1b
        ));

        let qy = async_step(&p, &params, AsyncUpdate::YOnly).unwrap();
        let qx = async_step(&p, &params, AsyncUpdate::XOnly).unwrap();
        assert!(in_tub(&qy, &params), "y-only update left the band: {qy:?}");
        assert!(in_tub(&qx, &params), "x-only update left the band: {qx:?}");
        worst_ratio_slack = worst_ratio_slack.min(qy.y / p.x - (1.0 - params.half_width()));

        // Lower-edge hold: rebuild the point on the edge and update y only.
        let x_edge = rng.gen_range(
            s * 1e-6..(params.utilization() * (0.5 - params.half_width())).min(s) * 0.999,
        );
        let p_edge = OperatingPoint::new(x_edge, params.band_low() - x_edge).unwrap();
        let q_edge = async_step(&p_edge, &params, AsyncUpdate::YOnly).unwrap();
        worst_hold = worst_hold.max(((q_edge.y - p_edge.y) / p_edge.y).abs());
    }
    let pass = worst_ratio_slack >= -1e-12 && worst_hold <= 1e-12;
    criterion(
        5,
        "asynchronous updates",
        pass,
        &format!(
            "2000 points: in-band both ways, ratio floor slack {worst_ratio_slack:.2e}, \
             edge hold off by {worst_hold:.2e}"
        ),
    );
}

/// Criterion 6: the port's iterative share equals progressive filling on
/// random measured-rate tables, and (as the pseudocode comments claim) two
/// passes almost always suffice; tables needing more are logged, not failed.
#[test]
fn c06_precise_share_matches_filling() {
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut worst = 0.0f64;
    let mut over_two_passes = 0usize;
    for case in 0..1_000 {
        let n = rng.gen_range(1..=8usize);
        let target = rng.gen_range(1e3..1e6);
        let table: Vec<f64> = (0..n).map(|_| target * rng.gen_range(0.0..0.6)).collect();
        let got = precise_fair_share(&table, n as u32, target);
        let want = water_level(&table, n as u32, target);
        worst = worst.max((got.fair_share - want).abs() / want);
        if got.passes > 2 {
            over_two_passes += 1;
            if over_two_passes <= 5 {
                println!(
                    "  case {case}: {} passes for n={n}, target={target:.1}, table={table:?}",
                    got.passes
                );
            }
        }
    }
    criterion(
        6,
        "precise share vs filling",
        worst <= 1e-9,
        &format!("1000 tables, worst relative gap {worst:.2e}, {over_two_passes} needed >2 passes"),
    );
}

/// Criterion 7: outside the band, the aggressive decision is monotone
/// non-decreasing in the measured rate; within each branch of the rule the
/// largest grid jump shrinks in step with the grid (continuity); and at load
/// level 1 both halves hold every source with measured rate up to the
/// target. The rule is allowed to step across branch boundaries — for load
/// levels above the active count the overload half jumps from z to z*z/n at
/// a measured rate of share*z — so refinement runs per branch.
#[test]
fn c07_aggressive_shape() {
    let target = 40_000.0f64;
    let top = 2.2 * target;
    let mut worst_drop = 0.0f64;
    let mut worst_jump_ratio = 0.0f64;
    for &delta in &[0.1, 0.25] {
        let zs = [
            0.3,
            0.6,
            (1.0 - delta) * 0.98,
            (1.0 + delta) * 1.001,
            1.6,
            2.4,
        ];
        for &z in &zs {
            for &n in &[2u32, 4, 8] {
                let fs = target / f64::from(n);
                let eval = |ocr: f64| aggressive_decision(z, ocr, fs, target, n, delta);

                // Monotone over the whole range, boundaries included.
                let mut prev = eval(0.0);
                for i in 1..1_000 {
                    let next = eval(top * i as f64 / 999.0);
                    worst_drop = worst_drop.max(prev - next);
                    prev = next;
                }

                // Grid refinement strictly inside each branch.
                let mut cuts = vec![0.0];
                cuts.extend(
                    (if z < 1.0 {
                        vec![fs * z, target * z]
                    } else {
                        vec![fs, fs * z, target]
                    })
                    .into_iter()
                    .filter(|&e| e > 0.0 && e < top),
                );
                cuts.push(top);
                cuts.sort_by(f64::total_cmp);
                for pair in cuts.windows(2) {
                    let margin = (pair[1] - pair[0]) * 1e-6;
                    let (lo, hi) = (pair[0] + margin, pair[1] - margin);
                    let max_jump = |points: usize| -> f64 {
                        let mut worst = 0.0f64;
                        let mut prev = eval(lo);
                        for i in 1..points {
                            let next = eval(lo + (hi - lo) * i as f64 / (points - 1) as f64);
                            worst = worst.max((next - prev).abs());
                            prev = next;
                        }
                        worst
                    };
                    let coarse = max_jump(1_000);
                    if coarse > 1e-12 {
                        worst_jump_ratio = worst_jump_ratio.max(max_jump(10_000) / coarse);
                    }
                }
            }
        }
    }

    // Load level exactly 1: both halves hold everyone up to the target.
    let mut held = true;
    for &n in &[1u32, 2, 4, 8] {
        let fs = target / f64::from(n);
        for i in 0..=1_000 {
            let ocr = target * i as f64 / 1_000.0;
            held &= aggressive_underload_factor(1.0, ocr, fs, target, n) == 1.0;
            held &= aggressive_overload_factor(1.0, ocr, fs, target, n) == 1.0;
        }
    }

    let pass = worst_drop <= 1e-9 && worst_jump_ratio <= 0.2 && held;
    criterion(
        7,
        "aggressive shape",
        pass,
        &format!(
            "worst decrease {worst_drop:.2e}, refinement jump ratio {worst_jump_ratio:.3} \
             (continuity wants ~0.1), unit load holds everyone: {held}"
        ),
    );
}

/// Criterion 8: the crossing-feedback race. A later-stamped BECN halves the
/// rate; the earlier FECN that then arrives is stale and must be ignored.
/// With the staleness guard disabled, the same FECN wrongly restores the
/// peak, demonstrating why the guard exists.
#[test]
fn c08_becn_ordering() {
    let config = |taa_guard: bool| SourceConfig {
        vc: VcId(9),
        cell_size_bits: 424,
        initial_cell_rate: CellRate::new(155.0).unwrap(),
        peak_cell_rate: CellRate::new(155.0).unwrap(),
        min_cell_rate: CellRate::new(1.0).unwrap(),
        averaging_interval_us: 1_000.0,
        becn_option: true,
        taa_guard,
        greedy: false,
    };
    let drive = |taa_guard: bool| -> (f64, u64) {
        let mut src = SourceState::new(config(taa_guard)).unwrap();
        // Two RM emissions; the switch lets the first pass untouched.
        let (c1, _) = src.on_averaging_timer(SimTime::new(1_000.0, 0));
        let (c2, _) = src.on_averaging_timer(SimTime::new(2_000.0, 1));
        assert_eq!(c1.tcr.per_second(), 155.0);

        // The switch, now loaded by 2, returns a BECN copy of the second cell.
        let mut becn = c2;
        becn.direction = RmDirection::Backward;
        becn.becn_bit = true;
        becn.laf = LoadAdjustmentFactor::new(2.0).unwrap();
        src.on_becn_cell(&becn);
        assert_eq!(src.tcr().per_second(), 77.5);

        // The first cell finally returns with no constraint recorded; acting
        // on it would jump back to the peak.
        let fecn = c1.turned_around();
        src.on_returned_rm_cell(&fecn);
        (
            src.tcr().per_second(),
            src.diagnostics().stale_feedback_ignored,
        )
    };

    let (guarded_tcr, guarded_stale) = drive(true);
    let (unguarded_tcr, _) = drive(false);
    let pass = guarded_tcr == 77.5 && guarded_stale == 1 && unguarded_tcr == 155.0;
    criterion(
        8,
        "becn ordering",
        pass,
        &format!(
            "guarded final {guarded_tcr} ({guarded_stale} stale ignored), \
             unguarded final {unguarded_tcr}"
        ),
    );
}

/// Criterion 9: across a full multi-switch run, the factor delivered to each
/// source equals, bit for bit, the largest per-port decision its cell saw,
/// and the in-cell factor never decreases hop by hop.
#[test]
fn c09_laf_bottleneck_semantics() {
    let s = scenario::parse(bundled::UPSTREAM_BOTTLENECK).unwrap();
    let mut sim = Simulation::new(&s).unwrap();

    type Key = (VcId, u64);
    let visits: Rc<RefCell<BTreeMap<Key, Vec<RmHopObservation>>>> = Rc::default();
    let delivered: Rc<RefCell<Vec<(Key, f64)>>> = Rc::default();
    let (v, d) = (Rc::clone(&visits), Rc::clone(&delivered));
    sim.set_rm_observer(move |event| match *event {
        RmEvent::PortVisit(obs) => v
            .borrow_mut()
            .entry((obs.vc, obs.seq))
            .or_default()
            .push(obs),
        RmEvent::Delivered {
            vc, seq, laf, becn, ..
        } => {
            assert!(!becn, "no becn copies expected in this scenario");
            d.borrow_mut().push(((vc, seq), laf));
        }
    });
    sim.run(120_000.0);
    drop(sim);

    let visits = visits.borrow();
    let delivered = delivered.borrow();
    assert!(delivered.len() > 400, "expected a full run of feedback");

    let mut multi_hop = 0usize;
    let mut pass = true;
    for &(key, laf) in delivered.iter() {
        let hops = &visits[&key];
        if hops.len() > 1 {
            multi_hop += 1;
        }
        // Hops were recorded in travel order: the in-cell factor ratchets.
        for pair in hops.windows(2) {
            pass &= pair[0].time_us <= pair[1].time_us;
            pass &= pair[0].laf_after <= pair[1].laf_after;
            pass &= pair[0].laf_after == pair[1].laf_before;
        }
        for hop in hops {
            pass &= hop.laf_after == hop.laf_before.max(hop.decision);
        }
        let max_decision = hops.iter().map(|h| h.decision).fold(0.0, f64::max);
        pass &= laf == max_decision;
    }
    criterion(
        9,
        "laf bottleneck semantics",
        pass,
        &format!(
            "{} delivered cells checked, {} crossed several switches",
            delivered.len(),
            multi_hop
        ),
    );
}

/// Criterion 10: basic option holds the bottleneck in the band for at least
/// 95% of post-convergence intervals on both single-bottleneck scenarios, and
/// the precise option strictly beats basic's steady-state rate variation for
/// every VC on the same scenarios.
#[test]
fn c10_operating_band() {
    let mut pass = true;
    let mut detail = String::new();
    for text in [bundled::TWO_SOURCE_BOTTLENECK, bundled::SINGLE_VC] {
        let name = scenario::parse(text).unwrap().name;
        let basic = run_report(text, None);
        let precise = run_report(text, Some(FairnessOption::Precise));

        let b = basic.bottleneck.as_ref().expect("bottleneck found");
        let fraction = b.in_band_fraction.unwrap_or(0.0);
        pass &= b.convergence_time_us.is_some() && fraction >= 0.95;
        detail.push_str(&format!("{name}: in-band {:.1}%", 100.0 * fraction));

        for vb in &basic.vcs {
            let vp = precise.vcs.iter().find(|v| v.vc == vb.vc).unwrap();
            pass &= vp.tcr_cov < vb.tcr_cov;
            detail.push_str(&format!(
                ", {} cov {:.4} -> {:.4}",
                vb.vc, vb.tcr_cov, vp.tcr_cov
            ));
        }
        detail.push_str("; ");
    }
    criterion(10, "operating band", pass, detail.trim_end_matches("; "));
}

/// Companion regression (not a release criterion): the convergence-step
/// allowance used in criterion 3 is not airtight for very wide bands. With
/// delta = 0.49 a point can bounce off both edges before contracting and
/// needs one step more than the allowance. Documented here so the analysis
/// stays executable; the seeded sweep does not land in this sliver.
#[test]
fn step_allowance_sliver_documented() {
    use abrsim_core::tubmodel::{contraction_step_bound, iterate_to_fairness};

    let params = TubParams::new(0.9, 0.49).unwrap();
    let start = OperatingPoint::new(0.0149, 0.447).unwrap();
    assert!(in_tub(&start, &params));
    let allowance = contraction_step_bound(start.imbalance(), &params);
    let traj = iterate_to_fairness(start, &params, allowance + 4).unwrap();
    assert!(traj.converged);
    assert!(
        traj.steps() > allowance,
        "the sliver closed: steps {} now within allowance {}; tighten the ledger note",
        traj.steps(),
        allowance
    );
    println!(
        "  sliver case: {} steps vs allowance {} (delta 0.49)",
        traj.steps(),
        allowance
    );
}

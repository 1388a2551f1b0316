//! Property tests over the analytic model, the switch decision functions,
//! and the units/trace plumbing. These complement the seeded sweeps with
//! shrinking: a failure here comes back as a minimal counterexample.

use proptest::prelude::*;

use abrsim_core::oracle::water_level;
use abrsim_core::switch::{
    aggressive_overload_factor, aggressive_underload_factor, precise_fair_share,
};
use abrsim_core::trace::{format_sig9, quantize, Subject, TraceKind, TraceRecord};
use abrsim_core::tubmodel::{
    async_step, classify_region, in_tub, tub_step, AsyncUpdate, OperatingPoint, Region, TubParams,
};
use abrsim_core::units::{CellRate, VcId};

fn params() -> impl Strategy<Value = TubParams<f64>> {
    (0.05f64..0.995, 0.01f64..0.49).prop_map(|(u, d)| TubParams::new(u, d).unwrap())
}

/// A point strictly inside the band, split arbitrarily between the sources.
fn in_band_point() -> impl Strategy<Value = (TubParams<f64>, OperatingPoint<f64>)> {
    (params(), 0.0f64..1.0, 1e-6f64..0.999_999).prop_map(|(p, t, f)| {
        let sum = p.band_low() + t * (p.band_high() - p.band_low());
        let point = OperatingPoint::new(sum * f, sum * (1.0 - f)).unwrap();
        (p, point)
    })
}

proptest! {
    /// One synchronous step from anywhere in the band stays in the band.
    #[test]
    fn tub_step_is_closed((p, point) in in_band_point()) {
        prop_assert!(in_tub(&point, &p));
        let next = tub_step(&point, &p).unwrap();
        prop_assert!(
            in_tub(&next, &p),
            "left the band: {point:?} -> {next:?} (sum {})",
            next.sum()
        );
    }

    /// Both sources over the share: the step lands exactly on the lower edge.
    #[test]
    fn over_share_points_land_on_the_lower_edge(
        p in params(),
        t1 in 0.0f64..1.0,
        t2 in 0.0f64..1.0,
    ) {
        let s = p.fair_share();
        let span = p.utilization() * p.half_width();
        let a = t1 * span;
        let b = t2 * (span - a);
        let point = OperatingPoint::new(s + a, s + b).unwrap();
        prop_assert_eq!(classify_region(&point, &p), Region::R2);
        let next = tub_step(&point, &p).unwrap();
        prop_assert!((next.sum() / p.band_low() - 1.0).abs() <= 1e-12);
    }

    /// Both sources under the share: the step lands exactly on the upper edge.
    #[test]
    fn under_share_points_land_on_the_upper_edge(
        p in params(),
        t1 in 0.0f64..1.0,
        t2 in 0.0f64..1.0,
    ) {
        let s = p.fair_share();
        let span = p.utilization() * p.half_width();
        let eps = 1e-9;
        let a = span * (eps + t1 * (1.0 - 2.0 * eps));
        let b = (span - a) * (eps + t2 * (1.0 - 2.0 * eps));
        let point = OperatingPoint::new(s - a, s - b).unwrap();
        prop_assert!(matches!(
            classify_region(&point, &p),
            Region::R4a | Region::R4b | Region::R4c
        ));
        let next = tub_step(&point, &p).unwrap();
        prop_assert!((next.sum() / p.band_high() - 1.0).abs() <= 1e-12);
    }

    /// With one source under the share and one over, a single-source update
    /// cannot leave the band, whichever source acts.
    #[test]
    fn async_updates_stay_in_band(
        p in params(),
        t1 in 0.01f64..0.99,
        t2 in 0.0f64..0.999_999,
    ) {
        let s = p.fair_share();
        let x = s * t1;
        let y_lo = (p.band_low() - x).max(s);
        let y_hi = p.band_high() - x;
        let point = OperatingPoint::new(x, y_lo + t2 * (y_hi - y_lo)).unwrap();
        prop_assert!(matches!(
            classify_region(&point, &p),
            Region::R1a | Region::R1b
        ));
        let only_y = async_step(&point, &p, AsyncUpdate::YOnly).unwrap();
        let only_x = async_step(&point, &p, AsyncUpdate::XOnly).unwrap();
        prop_assert!(in_tub(&only_y, &p), "y-only escaped: {only_y:?}");
        prop_assert!(in_tub(&only_x, &p), "x-only escaped: {only_x:?}");
        // The acting large source never undershoots the held small one by
        // more than the band half-width.
        prop_assert!(only_y.y / point.x >= (1.0 - p.half_width()) * (1.0 - 1e-12));
    }

    /// Below the band, the underload factor interpolates between holding the
    /// load level and holding the rate: it never leaves [z, 1], pins to z for
    /// small users and to 1 for users already worth the whole target.
    #[test]
    fn underload_factor_is_bounded(
        z in 0.01f64..0.999,
        ocr_frac in 0.0f64..2.5,
        n in 2u32..=16,
        target in 1e3f64..1e6,
    ) {
        let fs = target / f64::from(n);
        let ocr = ocr_frac * target;
        let factor = aggressive_underload_factor(z, ocr, fs, target, n);
        prop_assert!(factor >= z - 1e-12 && factor <= 1.0 + 1e-12);
        if ocr < fs * z {
            prop_assert_eq!(factor, z);
        }
        if ocr >= target * z {
            prop_assert_eq!(factor, 1.0);
        }
    }

    /// Above the band, the overload factor never invites an increase and
    /// never cuts deeper than the load level scaled by the user's overuse.
    #[test]
    fn overload_factor_is_bounded(
        z in 1.0f64..4.0,
        ocr_frac in 0.0f64..2.5,
        n in 2u32..=16,
        target in 1e3f64..1e6,
    ) {
        let fs = target / f64::from(n);
        let ocr = ocr_frac * target;
        let factor = aggressive_overload_factor(z, ocr, fs, target, n);
        prop_assert!(factor >= 1.0);
        let cap = z * (ocr / target).max(1.0);
        prop_assert!(factor <= cap * (1.0 + 1e-12), "factor {factor} above {cap}");
        if ocr <= fs {
            prop_assert_eq!(factor, 1.0);
        }
    }

    /// The switch's iterative share agrees with the independent sorted-scan
    /// water level on arbitrary tables, overloaded ones included.
    #[test]
    fn precise_share_is_the_water_level(
        fracs in prop::collection::vec(0.0f64..1.5, 1..=10),
        target in 1e3f64..1e6,
    ) {
        let table: Vec<f64> = fracs.iter().map(|f| f * target).collect();
        let n = table.len() as u32;
        let got = precise_fair_share(&table, n, target).fair_share;
        let want = water_level(&table, n, target);
        prop_assert!(
            (got - want).abs() <= want.abs() * 1e-9,
            "iterative {got} vs water level {want} on {table:?}"
        );
    }

    /// The water level never drops below the equal split, and capping every
    /// demand at the level never over-commits the capacity.
    #[test]
    fn water_level_respects_capacity(
        fracs in prop::collection::vec(0.0f64..1.5, 1..=10),
        capacity in 1e3f64..1e6,
    ) {
        let demands: Vec<f64> = fracs.iter().map(|f| f * capacity).collect();
        let n = demands.len() as u32;
        let level: f64 = water_level(&demands, n, capacity);
        prop_assert!(level >= capacity / f64::from(n) * (1.0 - 1e-12));
        let committed: f64 = demands.iter().map(|d| d.min(level)).sum();
        prop_assert!(committed <= capacity * (1.0 + 1e-9));
    }

    /// Pacing round trip: the inter-cell gap times the rate is one second.
    #[test]
    fn pacing_round_trips(rate in 1e-3f64..1e7) {
        let rate = CellRate::new(rate).unwrap();
        let gap_us = rate.inter_cell_time_us();
        prop_assert!((gap_us * rate.per_second() / 1e6 - 1.0).abs() <= 1e-12);
    }

    /// A measured rate is exactly count-per-interval.
    #[test]
    fn measured_rate_is_count_over_interval(
        count in 0u64..1_000_000,
        interval_us in 1.0f64..1e6,
    ) {
        let rate = CellRate::measured(count, interval_us);
        let back = rate.per_second() * interval_us / 1e6;
        prop_assert!((back - count as f64).abs() <= count as f64 * 1e-12);
    }

    /// Trace values are stable once quantized, and survive the CSV form.
    #[test]
    fn trace_quantization_is_idempotent(v in -1e12f64..1e12, t in 0.0f64..1e9) {
        let q = quantize(v);
        prop_assert_eq!(quantize(q), q);
        prop_assert_eq!(format_sig9(v).parse::<f64>().unwrap(), q);

        let record = TraceRecord::new(t, TraceKind::Tcr, Subject::Vc(VcId(7)), v);
        let back = TraceRecord::parse_csv_line(&record.csv_line(), 2).unwrap();
        prop_assert_eq!(back, record);
    }
}

//! Reference allocations, computed independently of the switch code: a
//! sorted-scan water level for one port's share, progressive-filling max-min
//! rates for a whole topology, and the throughput fairness index.

use thiserror::Error;

use crate::num::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("flow {0} crosses no link, so its allocation is unbounded")]
    UnconstrainedFlow(usize),
    #[error("flow {flow} names link {link}, but only {links} links exist")]
    DanglingLink {
        flow: usize,
        link: usize,
        links: usize,
    },
    #[error("link {0} must have finite positive capacity")]
    BadCapacity(usize),
    #[error("allocations and optimum must be equal-length and non-empty")]
    ShapeMismatch,
    #[error("optimum entries must be positive and allocations non-negative")]
    BadThroughput,
    #[error("the fairness index of all-zero allocations is undefined")]
    AllZero,
}

/// Water level for one link: the share of `capacity` among `num_active`
/// users where every demand below the level is kept whole and the rest split
/// what remains. Computed by a single sorted scan. When total demand is
/// under the capacity the level is the headroom of the largest demand(s),
/// with everyone else kept whole.
pub fn water_level<S: Real>(demands: &[S], num_active: u32, capacity: S) -> S {
    let mut sorted = demands.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("demands are ordered"));
    let mut water = capacity;
    let mut sharers = num_active.max(1);
    for &demand in &sorted {
        if sharers == 0 {
            break;
        }
        let level = water / S::from_count(sharers);
        if demand < level {
            water = water - demand;
            sharers -= 1;
        } else {
            return level;
        }
    }
    if sharers > 0 {
        return water / S::from_count(sharers);
    }
    // Every demand fit under its level: the largest demand(s) soak up the
    // rest while the others hold.
    let top = *sorted.last().expect("sharers only run out on demands");
    let mut top_count = S::zero();
    let mut sum_others = S::zero();
    for &demand in &sorted {
        if demand == top {
            top_count = top_count + S::one();
        } else {
            sum_others = sum_others + demand;
        }
    }
    (capacity - sum_others) / top_count
}

/// Progressive-filling max-min allocation. All flows rise at the same rate;
/// when a link's capacity is exhausted its flows freeze, and the rest keep
/// rising. `routes[i]` lists the links flow `i` crosses.
pub fn max_min_allocation<S: Real>(
    capacities: &[S],
    routes: &[Vec<usize>],
) -> Result<Vec<S>, OracleError> {
    for (i, capacity) in capacities.iter().enumerate() {
        if !(capacity.is_finite() && *capacity > S::zero()) {
            return Err(OracleError::BadCapacity(i));
        }
    }
    for (i, route) in routes.iter().enumerate() {
        if route.is_empty() {
            return Err(OracleError::UnconstrainedFlow(i));
        }
        for &link in route {
            if link >= capacities.len() {
                return Err(OracleError::DanglingLink {
                    flow: i,
                    link,
                    links: capacities.len(),
                });
            }
        }
    }

    let mut alloc = vec![S::zero(); routes.len()];
    let mut frozen = vec![false; routes.len()];
    loop {
        // Per-link headroom and the number of still-rising flows on it.
        let mut remaining = capacities.to_vec();
        let mut rising = vec![0u32; capacities.len()];
        for (i, route) in routes.iter().enumerate() {
            for &link in route {
                remaining[link] = remaining[link] - alloc[i];
                if !frozen[i] {
                    rising[link] += 1;
                }
            }
        }
        let mut rise: Option<S> = None;
        for (link, &n) in rising.iter().enumerate() {
            if n > 0 {
                let capped = remaining[link] / S::from_count(n);
                rise = Some(match rise {
                    Some(r) if r <= capped => r,
                    _ => capped,
                });
            }
        }
        let Some(rise) = rise else {
            break; // every flow frozen
        };
        let rise = rise.max(S::zero()); // guard against rounding past zero
        for (i, a) in alloc.iter_mut().enumerate() {
            if !frozen[i] {
                *a = *a + rise;
            }
        }
        // Freeze flows on every link this rise (effectively) exhausted. The
        // minimizing link always qualifies, so each round freezes something.
        let mut froze_any = false;
        for (link, &n) in rising.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let slack = remaining[link] - rise * S::from_count(n);
            if slack <= capacities[link] * S::cast(1e-12) {
                for (i, route) in routes.iter().enumerate() {
                    if !frozen[i] && route.contains(&link) {
                        frozen[i] = true;
                        froze_any = true;
                    }
                }
            }
        }
        debug_assert!(froze_any, "progressive filling must freeze each round");
        if !froze_any {
            break;
        }
    }
    Ok(alloc)
}

/// Throughput fairness index of allocations normalized by their reference
/// allocation: `(sum r)^2 / (n * sum r^2)` over `r_i = alloc_i / optimum_i`.
/// 1 means every flow got exactly its reference share.
pub fn fairness_index<S: Real>(allocations: &[S], optimum: &[S]) -> Result<S, OracleError> {
    if allocations.is_empty() || allocations.len() != optimum.len() {
        return Err(OracleError::ShapeMismatch);
    }
    let mut sum = S::zero();
    let mut sum_sq = S::zero();
    for (&a, &o) in allocations.iter().zip(optimum) {
        if !(o > S::zero() && o.is_finite()) || !(a >= S::zero() && a.is_finite()) {
            return Err(OracleError::BadThroughput);
        }
        let r = a / o;
        sum = sum + r;
        sum_sq = sum_sq + r * r;
    }
    if sum_sq == S::zero() {
        return Err(OracleError::AllZero);
    }
    let n = S::from_count(allocations.len() as u32);
    Ok(sum * sum / (n * sum_sq))
}

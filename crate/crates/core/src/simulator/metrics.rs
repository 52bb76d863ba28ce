//! Run scoring against the mid-air-collision separation standards.
//!
//! An NMAC is a simultaneous loss of 500 ft horizontal and 100 ft vertical
//! separation; well-clear is lost at 2000 ft / 250 ft. Both are counted as
//! events (entries into the region), not as ticks spent inside it, so one
//! fly-through registers once. Probable and imminent risk-zone events are
//! edge-counted the same way per assessed pair.

use crate::units::{
    NMAC_HORIZONTAL_M, NMAC_VERTICAL_M, WELL_CLEAR_HORIZONTAL_M, WELL_CLEAR_VERTICAL_M,
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Final metrics for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Minimum direct 3-D distance per unordered pair, keyed "A-B".
    pub min_separation_m: BTreeMap<String, f64>,
    /// Smallest pairwise separation seen anywhere in the run.
    pub global_min_separation_m: f64,
    pub nmac_count: u64,
    pub well_clear_violations: u64,
    pub pcrz_events: u64,
    pub icrz_events: u64,
    /// Avoidance commands issued by the policy.
    pub maneuver_count: u64,
    /// Path flown minus planned route length, per controlled flight.
    pub additional_path_m: BTreeMap<String, f64>,
    pub completed_route: BTreeMap<String, bool>,
    pub ticks: u64,
}

fn pair_key(a: &str, b: &str) -> String {
    if a <= b {
        format!("{a}-{b}")
    } else {
        format!("{b}-{a}")
    }
}

/// Streaming accumulator fed once per tick.
#[derive(Debug, Default)]
pub struct MetricsAccumulator {
    min_direct: BTreeMap<String, f64>,
    nmac_inside: BTreeSet<String>,
    wc_inside: BTreeSet<String>,
    pcrz_inside: BTreeSet<String>,
    icrz_inside: BTreeSet<String>,
    nmac_count: u64,
    well_clear_violations: u64,
    pcrz_events: u64,
    icrz_events: u64,
    maneuver_count: u64,
    ticks: u64,
}

impl MetricsAccumulator {
    pub fn tick(&mut self) {
        self.ticks += 1;
    }

    /// Record one pair's true separation this tick.
    pub fn observe_pair(
        &mut self,
        a: &str,
        b: &str,
        horizontal_m: f64,
        vertical_m: f64,
        direct_m: f64,
    ) {
        let key = pair_key(a, b);
        let entry = self.min_direct.entry(key.clone()).or_insert(f64::INFINITY);
        if direct_m < *entry {
            *entry = direct_m;
        }

        let nmac_now = horizontal_m < NMAC_HORIZONTAL_M && vertical_m < NMAC_VERTICAL_M;
        let was_in = self.nmac_inside.contains(&key);
        if nmac_now && !was_in {
            self.nmac_count += 1;
            self.nmac_inside.insert(key.clone());
        } else if !nmac_now && was_in {
            self.nmac_inside.remove(&key);
        }

        let wc_now = horizontal_m < WELL_CLEAR_HORIZONTAL_M && vertical_m < WELL_CLEAR_VERTICAL_M;
        let was_in = self.wc_inside.contains(&key);
        if wc_now && !was_in {
            self.well_clear_violations += 1;
            self.wc_inside.insert(key);
        } else if !wc_now && was_in {
            self.wc_inside.remove(&key);
        }
    }

    /// Record one assessed pair's risk-band state this tick.
    pub fn observe_bands(&mut self, me: &str, other: &str, in_pcrz: bool, in_icrz: bool) {
        let key = pair_key(me, other);
        let was = self.pcrz_inside.contains(&key);
        if in_pcrz && !was {
            self.pcrz_events += 1;
            self.pcrz_inside.insert(key.clone());
        } else if !in_pcrz && was {
            self.pcrz_inside.remove(&key);
        }
        let was = self.icrz_inside.contains(&key);
        if in_icrz && !was {
            self.icrz_events += 1;
            self.icrz_inside.insert(key.clone());
        } else if !in_icrz && was {
            self.icrz_inside.remove(&key);
        }
    }

    pub fn count_maneuver(&mut self) {
        self.maneuver_count += 1;
    }

    /// Close the run. `paths` maps controlled flights to
    /// (flown length, planned length, completed).
    pub fn finalize(self, paths: &BTreeMap<String, (f64, f64, bool)>) -> Metrics {
        let mut additional = BTreeMap::new();
        let mut completed = BTreeMap::new();
        for (icao, (flown, planned, done)) in paths {
            additional.insert(icao.clone(), (flown - planned).max(0.0));
            completed.insert(icao.clone(), *done);
        }
        let global = self
            .min_direct
            .values()
            .fold(f64::INFINITY, |acc, v| acc.min(*v));
        Metrics {
            min_separation_m: self.min_direct,
            global_min_separation_m: global,
            nmac_count: self.nmac_count,
            well_clear_violations: self.well_clear_violations,
            pcrz_events: self.pcrz_events,
            icrz_events: self.icrz_events,
            maneuver_count: self.maneuver_count,
            additional_path_m: additional,
            completed_route: completed,
            ticks: self.ticks,
        }
    }
}

impl Metrics {
    pub fn min_separation_for(&self, a: &str, b: &str) -> Option<f64> {
        self.min_separation_m.get(&pair_key(a, b)).copied()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

//! Seeded scenario generation. Case `i` of seed `s` draws everything from
//! stream `i` of a ChaCha generator keyed by `s`, so any single case can be
//! regenerated without the ones before it.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::builder::{build_controller_run, minimum_horizon, sample_delays, DelayPolicy};
use crate::crossing::{Params, Regime, Train, TrainPattern};
use crate::scenario::Scenario;
use crate::value::{int, rat, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuzzConfig {
    /// Each case has between 1 and this many tracks.
    pub max_tracks: usize,
    pub max_trains: usize,
    pub horizon: Rational,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig {
            max_tracks: 4,
            max_trains: 6,
            horizon: int(120),
        }
    }
}

fn quarter(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> Rational {
    rat(rng.gen_range(lo..=hi), 4)
}

/// Parameters from either regime with equal probability.
pub fn random_params(rng: &mut ChaCha8Rng) -> Params {
    let dclose = quarter(rng, 1, 12);
    let dopen = quarter(rng, 1, 12);
    let dmin = if rng.gen_bool(0.5) {
        &dclose + &dopen + quarter(rng, 0, 12)
    } else {
        &dclose + &dopen * rat(rng.gen_range(1..10), 10)
    };
    let dmax = &dmin + quarter(rng, 0, 16);
    Params::new(dclose, dopen, dmin, dmax).expect("generated parameters are ordered")
}

/// Trains on one track, all leaving before `last_exit`. Gaps are sometimes
/// tiny, so openings get interrupted.
fn random_track(
    rng: &mut ChaCha8Rng,
    params: &Params,
    max_trains: usize,
    last_exit: &Rational,
) -> Vec<Train> {
    let count = rng.gen_range(0..=max_trains);
    let mut out = Vec::with_capacity(count);
    let mut prev = int(0);
    for _ in 0..count {
        let gap = if rng.gen_bool(0.3) {
            quarter(rng, 1, 4)
        } else {
            quarter(rng, 4, 60)
        };
        let detect = &prev + gap;
        let spread = &params.dmax - &params.dmin;
        let enter = &detect + &params.dmin + spread * rat(rng.gen_range(0..=100), 100);
        let exit = &enter + quarter(rng, 1, 24);
        if exit >= *last_exit {
            break;
        }
        prev = exit.clone();
        out.push(Train::new(detect, enter, exit));
    }
    out
}

/// The `index`-th case of `seed`, with explicit gate delays.
pub fn generate_case(seed: u64, index: u64, config: &FuzzConfig) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let params = random_params(&mut rng);
    let tracks = rng.gen_range(1..=config.max_tracks.max(1));
    let last_exit = &config.horizon - &params.dmax - &params.dopen;
    let pattern = TrainPattern::new(
        (0..tracks)
            .map(|_| random_track(&mut rng, &params, config.max_trains, &last_exit))
            .collect(),
    );
    let horizon = config
        .horizon
        .clone()
        .max(minimum_horizon(&pattern, &params) + int(1));
    let q =
        build_controller_run(&pattern, &params, &horizon).expect("generated patterns are valid");
    let delays = sample_delays(&mut rng, &params, &q.dir_changes(), &horizon);
    Scenario {
        params,
        horizon,
        pattern,
        gate_delays: DelayPolicy::Explicit(delays),
    }
}

pub fn generate(seed: u64, count: u64, config: &FuzzConfig) -> Vec<Scenario> {
    (0..count).map(|i| generate_case(seed, i, config)).collect()
}

/// Share of cases in each regime, as (wide, narrow).
pub fn regime_counts(cases: &[Scenario]) -> (usize, usize) {
    let wide = cases
        .iter()
        .filter(|c| c.params.regime() == Regime::Wide)
        .count();
    (wide, cases.len() - wide)
}

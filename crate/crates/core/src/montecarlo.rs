//! Monte Carlo cross-check: simulates ensembles of orbits of an open
//! interval map, records how many survive each iteration, and fits the
//! empirical escape rate from the tail of the survival curve.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::PiecewiseLinearMap;
use crate::partition::Interval;

/// Fit points need at least this many survivors to be trusted.
pub const MIN_FIT_COUNT: u64 = 100;

/// Samples per RNG stream. Streams are indexed by chunk, so the counts
/// are reproducible no matter how the chunks are scheduled.
const CHUNK_SIZE: u64 = 1 << 16;

/// Survivor counts S(0..=nMax) of one simulated ensemble.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurvivalSeries {
    pub counts: Vec<u64>,
    pub sample_count: u64,
    pub seed: u64,
}

/// Least-squares escape rate over an effective fit window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Nats per iteration: minus the slope of ln S(n) against n.
    pub rate: f64,
    /// Standard error of that slope.
    pub stderr: f64,
    /// The points actually used, after dropping thin counts.
    pub window: (usize, usize),
}

/// Where the ensemble starts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum InitialLaw {
    /// Uniform outside the hole: the reference measure conditioned on not
    /// having escaped at time zero.
    #[default]
    UniformComplement,
    /// Uniform on the whole interval, hole included.
    UniformUnit,
}

/// Iterates `samples` independent points until each lands in the hole or
/// `n_max` steps pass. Hole membership is half-open [lo, hi), except that
/// a hole ending at 1 keeps the endpoint. Fixed seeds give identical
/// counts across runs and worker counts.
pub fn simulate_survival(
    map: &PiecewiseLinearMap,
    hole: &Interval,
    n_max: usize,
    samples: u64,
    seed: u64,
    initial: InitialLaw,
) -> Result<SurvivalSeries> {
    if samples == 0 {
        return Err(Error::Domain("sample count must be positive".into()));
    }
    if n_max == 0 {
        return Err(Error::Domain("iteration horizon must be positive".into()));
    }
    let (hole_lo, hole_hi) = (hole.lo(), hole.hi());
    let hole_len = hole.length();
    let free = 1.0 - hole_len;
    if initial == InitialLaw::UniformComplement && free <= 0.0 {
        return Err(Error::Domain(
            "hole covers the whole interval, nowhere to start".into(),
        ));
    }
    let in_hole =
        |x: f64| x >= hole_lo && (x < hole_hi || (hole_hi == 1.0 && x <= 1.0));

    let chunk_count = samples.div_ceil(CHUNK_SIZE);
    let escaped_at: Vec<u64> = (0..chunk_count)
        .into_par_iter()
        .map(|chunk| {
            let first = chunk * CHUNK_SIZE;
            let last = (first + CHUNK_SIZE).min(samples);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk + 1);
            let mut hist = vec![0u64; n_max + 1];
            for _ in first..last {
                let mut x = match initial {
                    InitialLaw::UniformComplement => {
                        let u = rng.random::<f64>() * free;
                        if u < hole_lo { u } else { u + hole_len }
                    }
                    InitialLaw::UniformUnit => rng.random::<f64>(),
                };
                for step in 1..=n_max {
                    x = map.eval(x);
                    if in_hole(x) {
                        hist[step] += 1;
                        break;
                    }
                }
            }
            hist
        })
        .reduce(
            || vec![0u64; n_max + 1],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
                a
            },
        );

    let mut counts = Vec::with_capacity(n_max + 1);
    let mut alive = samples;
    counts.push(alive);
    for step in 1..=n_max {
        alive -= escaped_at[step];
        counts.push(alive);
    }
    Ok(SurvivalSeries { counts, sample_count: samples, seed })
}

/// Ordinary least squares of ln S(n) against n. The requested window is
/// trimmed to its leading run of counts at or above [`MIN_FIT_COUNT`];
/// fewer than three usable points is an error rather than a guess.
pub fn fit_escape_rate(series: &SurvivalSeries, window: (usize, usize)) -> Result<RateFit> {
    let (lo, hi) = window;
    if lo >= hi || hi >= series.counts.len() {
        return Err(Error::Domain(format!(
            "fit window ({lo}, {hi}) does not fit a series of {} counts",
            series.counts.len()
        )));
    }
    let mut points = Vec::with_capacity(hi - lo + 1);
    for n in lo..=hi {
        let s = series.counts[n];
        if s < MIN_FIT_COUNT {
            break;
        }
        points.push((n as f64, (s as f64).ln()));
    }
    if points.len() < 3 {
        return Err(Error::InsufficientData { points: points.len() });
    }

    let m = points.len() as f64;
    let mean_x = points.iter().map(|(x, _)| x).sum::<f64>() / m;
    let mean_y = points.iter().map(|(_, y)| y).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|(x, _)| (x - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let slope = sxy / sxx;
    let ssr: f64 = points
        .iter()
        .map(|(x, y)| (y - mean_y - slope * (x - mean_x)).powi(2))
        .sum();
    let stderr = (ssr / ((m - 2.0) * sxx)).sqrt();
    let rate = -slope;
    Ok(RateFit {
        rate: if rate == 0.0 { 0.0 } else { rate },
        stderr,
        window: (lo, lo + points.len() - 1),
    })
}

impl SurvivalSeries {
    /// CSV columns: n, survivors, fraction of the ensemble still alive.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,survivors,fraction\n");
        let n0 = self.sample_count as f64;
        for (n, s) in self.counts.iter().enumerate() {
            out.push_str(&format!("{n},{s},{:.16e}\n", *s as f64 / n0));
        }
        out
    }
}

//! Performance sweeps over f and link latency, in model time.

use serde::Serialize;

use crate::model::LatencyModel;
use crate::scenario::{run_scenario, ScenarioError, ScenarioSpec};

#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub f: usize,
    pub n: usize,
    pub link_ms: f64,
    pub runs: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub mean_messages: f64,
    pub peak_footprint_bytes: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CubicFit {
    /// (n, messages, messages / n³)
    pub samples: Vec<(usize, f64, f64)>,
    /// Least-squares constant in log space.
    pub c: f64,
    /// Slope of log(messages) against log(n).
    pub exponent: f64,
    /// Largest deviation of any sample from c·n³, as a factor ≥ 1.
    pub worst_factor: f64,
}

impl CubicFit {
    pub fn from_samples(samples: &[(usize, f64)]) -> Self {
        let logs: Vec<(f64, f64)> = samples.iter().map(|(n, m)| ((*n as f64).ln(), m.ln())).collect();
        let k = logs.len() as f64;
        let ln_c = logs.iter().map(|(x, y)| y - 3.0 * x).sum::<f64>() / k;
        let c = ln_c.exp();
        let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
        let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = logs.iter().map(|(x, _)| (x - mx).powi(2)).sum();
        let worst_factor = samples
            .iter()
            .map(|(n, m)| {
                let r = m / (c * (*n as f64).powi(3));
                r.max(1.0 / r)
            })
            .fold(1.0, f64::max);
        CubicFit {
            samples: samples.iter().map(|(n, m)| (*n, *m, m / (*n as f64).powi(3))).collect(),
            c,
            exponent: sxy / sxx,
            worst_factor,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TrendReport {
    pub points: Vec<SweepPoint>,
    /// (f, mean latency at the slowest link / mean latency at the fastest)
    pub ratios: Vec<(usize, f64)>,
    pub ratio_strictly_decreasing: bool,
    pub messages: CubicFit,
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let i = ((sorted.len() - 1) as f64 * p).round() as usize;
    sorted[i]
}

/// Runs `seeds` elections of `base` with n = 3f+1 for every f and link
/// latency. Synchronous from the start, instant voters.
pub fn sweep(base: &ScenarioSpec, f_values: &[usize], links_ms: &[f64], seeds: u64) -> Result<TrendReport, ScenarioError> {
    let mut points = Vec::new();
    for &f in f_values {
        for &link in links_ms {
            let mut spec = base.clone();
            spec.n = 3 * f + 1;
            spec.f = Some(f);
            spec.latency = LatencyModel::fixed(link);
            spec.gst_step = 0;
            let mut lat = Vec::new();
            let mut msgs = 0.0;
            let mut peak = 0;
            for s in 0..seeds {
                spec.seed = base.seed.wrapping_add(s);
                let m = run_scenario(&spec)?;
                if let Some(l) = m.election.latency_ms {
                    lat.push(l);
                }
                msgs += m.stats.total_messages() as f64;
                peak = peak.max(m.peak_footprint_bytes);
            }
            lat.sort_by(f64::total_cmp);
            let runs = lat.len();
            points.push(SweepPoint {
                f,
                n: spec.n,
                link_ms: link,
                runs,
                mean_ms: if runs == 0 { f64::NAN } else { lat.iter().sum::<f64>() / runs as f64 },
                p50_ms: if runs == 0 { f64::NAN } else { percentile(&lat, 0.5) },
                p95_ms: if runs == 0 { f64::NAN } else { percentile(&lat, 0.95) },
                mean_messages: msgs / seeds as f64,
                peak_footprint_bytes: peak,
            });
        }
    }
    let lo = links_ms.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = links_ms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean_at = |f: usize, link: f64| points.iter().find(|p| p.f == f && p.link_ms == link).map(|p| p.mean_ms);
    let ratios: Vec<(usize, f64)> = f_values
        .iter()
        .filter_map(|&f| Some((f, mean_at(f, hi)? / mean_at(f, lo)?)))
        .collect();
    let ratio_strictly_decreasing = ratios.windows(2).all(|w| w[1].1 < w[0].1);
    let samples: Vec<(usize, f64)> = points.iter().filter(|p| p.link_ms == lo).map(|p| (p.n, p.mean_messages)).collect();
    Ok(TrendReport { points, ratios, ratio_strictly_decreasing, messages: CubicFit::from_samples(&samples) })
}

/// Peak per-process bookkeeping, in bytes, over one election with `n` voters.
pub fn memory_probe(base: &ScenarioSpec, n: usize) -> Result<usize, ScenarioError> {
    let mut spec = base.clone();
    spec.n = n;
    spec.f = None;
    Ok(run_scenario(&spec)?.peak_footprint_bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_cube_fits_perfectly() {
        let fit = CubicFit::from_samples(&[(4, 128.0), (7, 686.0), (10, 2000.0)]);
        assert!((fit.c - 2.0).abs() < 1e-9);
        assert!((fit.exponent - 3.0).abs() < 1e-9);
        assert!((fit.worst_factor - 1.0).abs() < 1e-9);
    }

    #[test]
    fn quadratic_growth_is_flagged() {
        let fit = CubicFit::from_samples(&[(4, 16.0), (7, 49.0), (10, 100.0), (13, 169.0)]);
        assert!((fit.exponent - 2.0).abs() < 1e-9);
        assert!(fit.worst_factor > 1.5);
    }
}

//! Energy from power traces, replicate statistics and idle subtraction.

use serde::{Deserialize, Serialize};

use crate::sim::PowerTrace;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum EnergyError {
    #[error("a trace needs at least two samples")]
    TooFewSamples,
    #[error("timestamps must be strictly increasing (sample {0})")]
    NonMonotonic(usize),
    #[error("no replicates")]
    Empty,
    #[error("coefficient of variation is undefined for mean {0}")]
    NonPositiveMean(f64),
    #[error("idle duration {idle} s does not match case duration {case} s")]
    DurationMismatch { case: f64, idle: f64 },
}

/// Right-Riemann sum: Σ_{i≥1} p(t_i)·(t_i − t_{i−1}).
pub fn integrate(trace: &PowerTrace) -> Result<f64, EnergyError> {
    let s = &trace.samples;
    if s.len() < 2 {
        return Err(EnergyError::TooFewSamples);
    }
    let mut e = 0.0;
    for (i, w) in s.windows(2).enumerate() {
        let dt = w[1].0 - w[0].0;
        if dt <= 0.0 || dt.is_nan() {
            return Err(EnergyError::NonMonotonic(i + 1));
        }
        e += w[1].1 * dt;
    }
    Ok(e)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateStats {
    pub mean_j: f64,
    pub std_j: f64,
    pub cv: f64,
    pub n: usize,
}

/// Mean, sample standard deviation (n − 1) and σ/µ.
pub fn replicate_stats(energies: &[f64]) -> Result<ReplicateStats, EnergyError> {
    let n = energies.len();
    if n == 0 {
        return Err(EnergyError::Empty);
    }
    // Deviations are taken from the first value so identical replicates
    // give a spread of exactly zero.
    let origin = energies[0];
    let shift = energies.iter().map(|e| e - origin).sum::<f64>() / n as f64;
    let mean = origin + shift;
    if mean <= 0.0 {
        return Err(EnergyError::NonPositiveMean(mean));
    }
    let std = if n > 1 {
        (energies.iter().map(|e| (e - origin - shift).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(ReplicateStats { mean_j: mean, std_j: std, cv: std / mean, n })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseEnergy {
    pub case_id: String,
    #[serde(rename = "gross_J")]
    pub gross_j: f64,
    #[serde(rename = "idle_J")]
    pub idle_j: f64,
    #[serde(rename = "net_J")]
    pub net_j: f64,
    pub cv: f64,
    pub stats: ReplicateStats,
}

/// Net energy of a case: mean gross replicate energy minus mean idle energy,
/// with idle traces scaled to the case duration when `scale_idle` is set.
pub fn net_energy(case_id: &str, case: &[PowerTrace], idle: &[PowerTrace], scale_idle: bool) -> Result<CaseEnergy, EnergyError> {
    if case.is_empty() || idle.is_empty() {
        return Err(EnergyError::Empty);
    }
    let gross: Vec<f64> = case.iter().map(integrate).collect::<Result<_, _>>()?;
    let stats = replicate_stats(&gross)?;
    let case_d = case.iter().map(PowerTrace::duration).sum::<f64>() / case.len() as f64;
    let mut idle_e = Vec::with_capacity(idle.len());
    for t in idle {
        let e = integrate(t)?;
        let d = t.duration();
        if scale_idle {
            idle_e.push(e * case_d / d);
        } else if (d - case_d).abs() > 0.01 * case_d {
            return Err(EnergyError::DurationMismatch { case: case_d, idle: d });
        } else {
            idle_e.push(e);
        }
    }
    let idle_j = idle_e.iter().sum::<f64>() / idle_e.len() as f64;
    Ok(CaseEnergy { case_id: case_id.to_string(), gross_j: stats.mean_j, idle_j, net_j: stats.mean_j - idle_j, cv: stats.cv, stats })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(samples: &[(f64, f64)]) -> PowerTrace {
        PowerTrace { samples: samples.to_vec() }
    }

    #[test]
    fn constant_two_watts_for_ten_seconds() {
        let t = PowerTrace { samples: (0..=10).map(|i| (i as f64, 2.0)).collect() };
        assert_eq!(integrate(&t).unwrap(), 20.0);
    }

    #[test]
    fn right_riemann_on_three_samples() {
        assert_eq!(integrate(&trace(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)])).unwrap(), 3.0);
    }

    #[test]
    fn ramp_within_bias_bound() {
        let t = PowerTrace { samples: (0..=1000).map(|i| (i as f64 / 1000.0, i as f64 / 1000.0)).collect() };
        assert!((integrate(&t).unwrap() - 0.5).abs() <= 1e-3);
    }

    #[test]
    fn bad_traces() {
        assert_eq!(integrate(&trace(&[(0.0, 1.0)])), Err(EnergyError::TooFewSamples));
        assert!(matches!(integrate(&trace(&[(0.0, 1.0), (0.0, 1.0)])), Err(EnergyError::NonMonotonic(1))));
    }

    #[test]
    fn stats_by_hand() {
        assert_eq!(replicate_stats(&[5.0, 5.0, 5.0]).unwrap().cv, 0.0);
        let s = replicate_stats(&[9.0, 11.0]).unwrap();
        assert_eq!(s.mean_j, 10.0);
        assert!((s.std_j - 2f64.sqrt()).abs() < 1e-12);
        assert!((s.cv - 0.1414).abs() < 1e-4);
        assert!(replicate_stats(&[-1.0, 0.5]).is_err());
    }

    #[test]
    fn net_subtracts_idle() {
        let gross = trace(&[(0.0, 1.0), (1.0, 1.0)]);
        let idle = trace(&[(0.0, 0.5), (1.0, 0.5)]);
        let e = net_energy("c", &[gross.clone()], &[idle.clone()], false).unwrap();
        assert_eq!(e.net_j, 0.5);
        let e = net_energy("c", &[idle.clone()], &[idle.clone()], false).unwrap();
        assert_eq!(e.net_j, 0.0);
        let long_idle = trace(&[(0.0, 0.5), (4.0, 0.5)]);
        assert!(net_energy("c", &[gross.clone()], &[long_idle.clone()], false).is_err());
        assert_eq!(net_energy("c", &[gross], &[long_idle], true).unwrap().net_j, 0.5);
    }
}

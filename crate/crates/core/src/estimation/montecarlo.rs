use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Poisson};
use rayon::prelude::*;

use super::{EstimationError, EstimationResult, MeasurementRecord};

pub const MIN_TRIALS: usize = 100;

/// Copy of `records` with every count replaced by a Poisson draw of that mean.
pub fn resample_poisson(records: &[MeasurementRecord], rng: &mut ChaCha8Rng) -> Vec<MeasurementRecord> {
    records
        .iter()
        .map(|r| MeasurementRecord {
            settings: r.settings.clone(),
            counts: r
                .counts
                .iter()
                .map(|(k, &c)| {
                    let draw = if c > 0.0 {
                        Poisson::new(c).map(|p| p.sample(rng)).unwrap_or(c)
                    } else {
                        0.0
                    };
                    (k.clone(), draw)
                })
                .collect(),
        })
        .collect()
}

/// Sample standard deviation of `statistic` over Poisson resamplings of `records`.
///
/// Trial `t` draws from its own ChaCha stream `t` under `seed`, so the result
/// does not depend on scheduling. Trials whose statistic fails (for example a
/// resample with zero counts in a reference bin) are dropped; at least two must survive.
pub fn poisson_error<F>(statistic: F, records: &[MeasurementRecord], trials: usize, seed: u64) -> EstimationResult<f64>
where
    F: Fn(&[MeasurementRecord]) -> EstimationResult<f64> + Sync,
{
    if trials < MIN_TRIALS {
        return Err(EstimationError::TooFewTrials {
            min: MIN_TRIALS,
            got: trials,
        });
    }
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .filter_map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            statistic(&resample_poisson(records, &mut rng)).ok()
        })
        .filter(|v| v.is_finite())
        .collect();
    if values.len() < 2 {
        return Err(EstimationError::Numeric("fewer than two Monte-Carlo trials succeeded".into()));
    }
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok(var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::ProjectorSetting;
    use std::collections::BTreeMap;

    fn single(n: f64) -> Vec<MeasurementRecord> {
        vec![MeasurementRecord::new(vec![ProjectorSetting::sigma_z()], BTreeMap::from([("0".into(), n)])).unwrap()]
    }

    #[test]
    fn constant_statistic_has_zero_spread() {
        assert_eq!(poisson_error(|_| Ok(1.0), &single(50.0), 100, 1).unwrap(), 0.0);
        assert!(poisson_error(|_| Ok(1.0), &single(50.0), 99, 1).is_err());
    }

    #[test]
    fn count_spread_is_root_n() {
        let sd = poisson_error(|r| Ok(r[0].count("0")), &single(400.0), 10_000, 7).unwrap();
        assert!((sd / 20.0 - 1.0).abs() < 0.05, "{sd}");
        let again = poisson_error(|r| Ok(r[0].count("0")), &single(400.0), 10_000, 7).unwrap();
        assert_eq!(sd, again);
    }
}

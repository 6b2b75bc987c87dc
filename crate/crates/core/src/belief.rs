//! Per-site Gaussian belief over reserves with scalar Kalman updates.

use std::io::Write;

use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::ProblemConfig;
use crate::domain::{round_to_bin, Action, Observables, Observation, State};
use crate::error::{Error, Result};

/// Gain `K = s^2 / (s^2 + so^2)`; zero when both variances vanish.
pub fn kalman_gain<T: Float>(sigma: T, sigma_o: T) -> T {
    let var = sigma * sigma;
    let denom = var + sigma_o * sigma_o;
    if denom <= T::zero() {
        T::zero()
    } else {
        var / denom
    }
}

/// One scalar measurement update; returns the posterior `(mean, std)`.
pub fn kalman_update<T: Float>(mean: T, sigma: T, sigma_o: T, reading: T) -> (T, T) {
    let k = kalman_gain(sigma, sigma_o);
    let mean = mean + k * (reading - mean);
    let var = (T::one() - k) * sigma * sigma;
    (mean, var.max(T::zero()).sqrt())
}

/// Variance after `k` updates with noise `sigma_o`, starting from `sigma0`.
pub fn repeated_update_variance<T: Float>(sigma0: T, sigma_o: T, k: u32) -> T {
    let v0 = sigma0 * sigma0;
    let vo = sigma_o * sigma_o;
    let denom = vo + T::from(k).unwrap() * v0;
    if denom <= T::zero() {
        return T::zero();
    }
    v0 * vo / denom
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianBelief<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
    /// Mirror of the fully observed state components.
    pub observables: Observables,
}

impl<T: Float> GaussianBelief<T> {
    pub fn new(mean: Vec<T>, std: Vec<T>, observables: Observables) -> Result<Self> {
        if mean.len() != std.len() || mean.len() != observables.operating.len() {
            return Err(Error::Domain("belief vectors have mismatched lengths".into()));
        }
        if std.iter().any(|s| !(*s >= T::zero())) {
            return Err(Error::Domain("belief std-devs must be >= 0".into()));
        }
        Ok(GaussianBelief {
            mean,
            std,
            observables,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.mean.len()
    }

    pub fn variance(&self, site: usize) -> T {
        self.std[site] * self.std[site]
    }

    /// Posterior after `action` produced `observation` and the world moved
    /// to `next`.
    ///
    /// EXPLORE applies the Kalman update to the measured site. Sites that
    /// were operating during the step have their mean lowered by `drawdown`
    /// (floored at zero); std-devs are untouched by mining.
    pub fn update_with(
        &self,
        action: Action,
        observation: &Observation,
        next: &Observables,
        sigma_o: T,
        drawdown: &[T],
    ) -> Result<Self> {
        let mut out = self.clone();
        match (action, observation.measured_site()) {
            (Action::Explore(j), Some((site, reading))) if site == j => {
                if observation.readings().iter().flatten().count() != 1 {
                    return Err(Error::Contract("observation carries several readings".into()));
                }
                let (m, s) =
                    kalman_update(self.mean[j], self.std[j], sigma_o, T::from(reading).unwrap());
                out.mean[j] = m;
                out.std[j] = s;
            }
            (Action::Explore(j), _) => {
                return Err(Error::Contract(format!(
                    "EXPLORE({}) needs a reading for that site",
                    j + 1
                )))
            }
            (_, Some((site, _))) => {
                return Err(Error::Contract(format!(
                    "{action} cannot carry a measurement (site {})",
                    site + 1
                )))
            }
            (_, None) => {}
        }
        for j in 0..self.n_sites() {
            if self.observables.operating[j] {
                out.mean[j] = (out.mean[j] - drawdown[j]).max(T::zero());
            }
        }
        out.observables = next.clone();
        Ok(out)
    }
}

impl GaussianBelief<f64> {
    /// Prior from the config's belief section and a fresh episode.
    pub fn prior(config: &ProblemConfig) -> Self {
        GaussianBelief {
            mean: config.prior_mean(),
            std: config.prior_std(),
            observables: Observables::initial(config.n_sites()),
        }
    }

    /// [`GaussianBelief::update_with`] using the config's noise and expected
    /// yields.
    pub fn update(
        &self,
        action: Action,
        observation: &Observation,
        next: &Observables,
        config: &ProblemConfig,
    ) -> Result<Self> {
        let drawdown: Vec<f64> = config.sites.iter().map(|s| s.yield_dist.mean()).collect();
        self.update_with(action, observation, next, config.obs_noise, &drawdown)
    }

    /// A full state with reserves drawn from the belief, binned and
    /// clamped at zero.
    pub fn sample_state<R: Rng + ?Sized>(&self, config: &ProblemConfig, rng: &mut R) -> State {
        let reserves = self
            .mean
            .iter()
            .zip(&self.std)
            .map(|(&m, &s)| {
                let z: f64 = if s > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
                round_to_bin(m + s * z, config.reserve_bin).max(0.0)
            })
            .collect();
        State::with_observables(reserves, &self.observables)
    }
}

/// Header of the belief-trajectory CSV for `n` sites.
pub fn belief_csv_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=n).map(|j| format!("mean_{j}")));
    h.extend((1..=n).map(|j| format!("std_{j}")));
    h
}

/// One row per belief: `t, mean_1..n, std_1..n`.
pub fn write_belief_csv<W: Write>(out: W, beliefs: &[GaussianBelief<f64>]) -> Result<()> {
    let n = beliefs.first().map_or(0, |b| b.n_sites());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(belief_csv_header(n))?;
    for b in beliefs {
        let mut row = vec![b.observables.t.to_string()];
        row.extend(b.mean.iter().map(|v| v.to_string()));
        row.extend(b.std.iter().map(|v| v.to_string()));
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::Output(e.to_string()))?;
    Ok(())
}

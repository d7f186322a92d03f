use super::HmmModel;
use crate::error::{Error, Result};
use crate::rng::{Purpose, StreamKey};

/// A simulated truth trajectory `x_{1:n}` and its observations `y_{1:n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub initial: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub observations: Vec<Vec<f64>>,
}

/// Runs the model forward from `initial` and observes every step.
///
/// With `noiseless` set the observations are the exact signal (the oracle
/// limit). Transition and observation draws come from separate keyed streams.
pub fn simulate_observations<M: HmmModel + ?Sized>(
    model: &M,
    initial: &[f64],
    horizon: usize,
    key: StreamKey,
    noiseless: bool,
) -> Result<Simulation> {
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    if initial.len() != model.state_dim() {
        return Err(Error::Dimension(format!(
            "initial state has length {}, model expects {}",
            initial.len(),
            model.state_dim()
        )));
    }
    let mut x = initial.to_vec();
    let mut states = Vec::with_capacity(horizon);
    let mut observations = Vec::with_capacity(horizon);
    for n in 1..=horizon {
        model.transition_sample(&mut x, n, &mut key.stream(Purpose::Truth, n as u64, 0));
        let y = model.observe(&x, n, &mut key.stream(Purpose::Observation, n as u64, 0), noiseless);
        states.push(x.clone());
        observations.push(y);
    }
    Ok(Simulation { initial: initial.to_vec(), states, observations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{Matrix, Vector};
    use crate::models::{GaussianBelief, GeneralLinearModel, LogisticMapModel, StationaryLinearModel};

    #[test]
    fn oracle_stationary_repeats_initial_state() {
        let m = StationaryLinearModel::scalar(1.0, 1.0, 0.25).unwrap();
        let sim = simulate_observations(&m, &[0.0], 25, StreamKey::new(1), true).unwrap();
        assert!(sim.observations.iter().all(|y| y == &vec![0.0]));
    }

    #[test]
    fn stationary_noise_variance() {
        let m = StationaryLinearModel::scalar(0.0, 1.0, 0.25).unwrap();
        let n = 10_000;
        let sim = simulate_observations(&m, &[0.0], n, StreamKey::new(2), false).unwrap();
        let ys: Vec<f64> = sim.observations.iter().map(|y| y[0]).collect();
        let mean = ys.iter().sum::<f64>() / n as f64;
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 0.25).abs() < 0.025, "sample variance {var}");
    }

    #[test]
    fn oracle_logistic_follows_orbit() {
        let m = LogisticMapModel::new(3.0, 0.3, 0.5, 0.1).unwrap();
        let sim = simulate_observations(&m, &m.initial_state(3.33), 40, StreamKey::new(3), true).unwrap();
        let mut x = 0.5;
        for y in &sim.observations {
            x = crate::models::logistic_step(3.33, x).unwrap();
            assert_eq!(y[0], x);
        }
    }

    #[test]
    fn general_model_reduces_to_stationary() {
        let prior =
            GaussianBelief::new(Vector::from_vec(vec![1.0, -0.5]), Matrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]))
                .unwrap();
        let r = Matrix::from_row_slice(2, 2, &[0.25, 0.05, 0.05, 0.4]);
        let stationary = StationaryLinearModel::new(prior.clone(), r.clone()).unwrap();
        let general =
            GeneralLinearModel::new(Matrix::identity(2, 2), Matrix::identity(2, 2), Matrix::zeros(2, 2), r, prior)
                .unwrap();
        let key = StreamKey::new(17);
        let a = simulate_observations(&stationary, &[0.2, 0.1], 200, key, false).unwrap();
        let b = simulate_observations(&general, &[0.2, 0.1], 200, key, false).unwrap();
        assert_eq!(a, b);
        // and the same prior draws
        let mut pa = [0.0; 2];
        let mut pb = [0.0; 2];
        stationary.prior_sample(&mut key.stream(crate::rng::Purpose::Prior, 0, 3), &mut pa);
        general.prior_sample(&mut key.stream(crate::rng::Purpose::Prior, 0, 3), &mut pb);
        assert_eq!(pa, pb);
    }

    #[test]
    fn rejects_zero_horizon() {
        let m = StationaryLinearModel::scalar(0.0, 1.0, 0.25).unwrap();
        assert!(simulate_observations(&m, &[0.0], 0, StreamKey::new(0), false).is_err());
    }
}

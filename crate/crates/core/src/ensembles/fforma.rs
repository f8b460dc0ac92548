//! Feature-weighted forecast combination: a gradient-boosted model maps a
//! series' meta-features to softmax weights over the pool, trained across a
//! corpus by minimizing the weighted per-model forecast errors.

use serde::{Deserialize, Serialize};

use super::WeightVector;
use crate::error::{Error, Result};
use crate::learners::{fit_gbt, DesignMatrix, GbtModel, GbtParams, SoftmaxWeightedError};
use crate::series::ForecastMatrix;

/// Minimum corpus size accepted for training.
pub const FFORMA_MIN_CORPUS: usize = 50;

/// One training example: a series' meta-features and each pool model's
/// error on that series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FformaExample {
    pub features: Vec<f64>,
    /// Aligned with the pool passed to `fforma_train`.
    pub errors: Vec<f64>,
}

/// The corpus-trained weight model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FformaModel {
    pub pool: Vec<String>,
    pub feature_names: Vec<String>,
    pub gbt: GbtModel,
}

/// Trains the weight model: one boosted score per pool member, softmaxed
/// into weights, minimizing Σ_series Σ_m p_m·e_m.
pub fn fforma_train(
    pool: &[String],
    feature_names: &[String],
    corpus: &[FformaExample],
    params: GbtParams,
) -> Result<FformaModel> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    if corpus.len() < FFORMA_MIN_CORPUS {
        return Err(Error::TooFewRows { got: corpus.len(), need: FFORMA_MIN_CORPUS });
    }
    let mut rows = Vec::with_capacity(corpus.len());
    let mut errors = Vec::with_capacity(corpus.len());
    for (i, ex) in corpus.iter().enumerate() {
        if ex.errors.len() != pool.len() {
            return Err(Error::PoolMismatch(format!(
                "example {i} has {} errors for a pool of {}",
                ex.errors.len(),
                pool.len()
            )));
        }
        if ex.features.len() != feature_names.len() {
            return Err(Error::InvalidArgument(format!(
                "example {i} has {} features, expected {}",
                ex.features.len(),
                feature_names.len()
            )));
        }
        rows.push(ex.features.clone());
        errors.push(ex.errors.clone());
    }
    let design =
        DesignMatrix::new(feature_names.to_vec(), rows, vec![0.0; corpus.len()])?;
    let objective = SoftmaxWeightedError { errors };
    let gbt = fit_gbt(&design, &objective, params)?;
    Ok(FformaModel {
        pool: pool.to_vec(),
        feature_names: feature_names.to_vec(),
        gbt,
    })
}

/// Applies the weight model to one series: softmax weights from its
/// features, then a weighted average of the pool's test forecasts.
pub fn fforma_apply(
    model: &FformaModel,
    features: &[f64],
    test: &ForecastMatrix,
) -> Result<(Vec<f64>, WeightVector)> {
    if features.len() != model.feature_names.len() {
        return Err(Error::InvalidArgument(format!(
            "{} features, weight model expects {}",
            features.len(),
            model.feature_names.len()
        )));
    }
    for id in &model.pool {
        if !test.model_ids.contains(id) {
            return Err(Error::PoolMismatch(format!(
                "weight model pool member `{id}` missing from the forecast matrix"
            )));
        }
    }
    let weights =
        WeightVector::new(model.pool.clone(), self_normalize(model.gbt.predict_weights(features)))?;
    let forecast = weights.apply(test)?;
    Ok((forecast, weights))
}

/// Softmax output already sums to 1 up to rounding; renormalize so the
/// WeightVector invariant holds exactly.
fn self_normalize(mut w: Vec<f64>) -> Vec<f64> {
    let sum: f64 = w.iter().sum();
    for v in &mut w {
        *v /= sum;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::Objective;
    use crate::rng::RngSeed;
    use rand::Rng;

    fn pool2() -> Vec<String> {
        vec!["good".into(), "bad".into()]
    }

    fn features() -> Vec<String> {
        vec!["f0".into(), "f1".into()]
    }

    fn corpus_dominated(n: usize) -> Vec<FformaExample> {
        let mut rng = RngSeed(123).rng();
        (0..n)
            .map(|_| FformaExample {
                features: vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                errors: vec![0.0, 1.0],
            })
            .collect()
    }

    #[test]
    fn dominant_model_receives_nearly_all_weight() {
        let model =
            fforma_train(&pool2(), &features(), &corpus_dominated(60), GbtParams::default())
                .unwrap();
        let test = ForecastMatrix::new(
            pool2(),
            vec![vec![10.0, 11.0], vec![20.0, 22.0]],
            vec![0, 1],
        )
        .unwrap();
        let (_, w) = fforma_apply(&model, &[0.3, -0.4], &test).unwrap();
        assert!(w.weights[0] >= 0.9, "weights {:?}", w.weights);
    }

    #[test]
    fn softmax_gradient_matches_finite_differences() {
        let mut rng = RngSeed(7).rng();
        let n = 6;
        let m = 4;
        let errors: Vec<Vec<f64>> =
            (0..n).map(|_| (0..m).map(|_| rng.random_range(0.0..5.0)).collect()).collect();
        let objective = SoftmaxWeightedError { errors };
        let scores: Vec<Vec<f64>> =
            (0..n).map(|_| (0..m).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let (grad, _) = objective.grad_hess(&scores);
        let eps = 1e-6;
        for i in 0..n {
            for d in 0..m {
                let mut plus = scores.clone();
                plus[i][d] += eps;
                let mut minus = scores.clone();
                minus[i][d] -= eps;
                let fd = (objective.loss(&plus) - objective.loss(&minus)) / (2.0 * eps);
                let rel = (grad[i][d] - fd).abs() / fd.abs().max(1e-8);
                assert!(rel <= 1e-5, "grad[{i}][{d}] = {} vs fd {fd}", grad[i][d]);
            }
        }
    }

    #[test]
    fn uniform_errors_yield_mean_forecast() {
        let mut rng = RngSeed(11).rng();
        let corpus: Vec<FformaExample> = (0..55)
            .map(|_| FformaExample {
                features: vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                errors: vec![2.0, 2.0],
            })
            .collect();
        let model =
            fforma_train(&pool2(), &features(), &corpus, GbtParams::default()).unwrap();
        let test = ForecastMatrix::new(
            pool2(),
            vec![vec![10.0], vec![20.0]],
            vec![0],
        )
        .unwrap();
        let (forecast, _) = fforma_apply(&model, &[0.1, 0.2], &test).unwrap();
        assert!((forecast[0] - 15.0).abs() < 1e-6, "forecast {forecast:?}");
    }

    #[test]
    fn small_corpus_rejected() {
        let err =
            fforma_train(&pool2(), &features(), &corpus_dominated(49), GbtParams::default())
                .unwrap_err();
        assert!(matches!(err, Error::TooFewRows { got: 49, need: 50 }));
    }

    #[test]
    fn pool_mismatch_detected() {
        let mut corpus = corpus_dominated(60);
        corpus[10].errors = vec![1.0];
        assert!(matches!(
            fforma_train(&pool2(), &features(), &corpus, GbtParams::default()),
            Err(Error::PoolMismatch(_))
        ));
        let model =
            fforma_train(&pool2(), &features(), &corpus_dominated(60), GbtParams::default())
                .unwrap();
        let test =
            ForecastMatrix::new(vec!["good".into()], vec![vec![1.0]], vec![0]).unwrap();
        assert!(matches!(
            fforma_apply(&model, &[0.0, 0.0], &test),
            Err(Error::PoolMismatch(_))
        ));
    }
}

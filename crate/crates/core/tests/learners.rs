use mlcsearch::learners::logistic::objective;
use mlcsearch::learners::{
    apply_transform, fit_learner, fit_preprocessor, predict_classes, predict_scores, LearnerKind, LearnerSpec,
    PreprocessorKind,
};
use mlcsearch::params::ParamMap;
use mlcsearch::seed::rng_from_seed;
use mlcsearch::synth::{gaussian_clusters, xor_dependence};
use ndarray::{array, Array1, Array2};
use rand::Rng;

fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

#[test]
fn logistic_gradient_matches_central_differences() {
    let h = 1e-5;
    for seed in 0..20u64 {
        let mut rng = rng_from_seed(seed);
        let (n, d) = (rng.random_range(3..15), rng.random_range(1..6));
        let x = Array2::from_shape_simple_fn((n, d), || rng.random_range(-2.0..2.0));
        let t = Array1::from_shape_simple_fn(n, || f64::from(u8::from(rng.random_bool(0.5))));
        let w = Array1::from_shape_simple_fn(d, || rng.random_range(-1.0..1.0));
        let b = rng.random_range(-1.0..1.0);
        let l2 = rng.random_range(0.0..1.0);
        let (_, gw, gb) = objective(x.view(), t.view(), w.view(), b, l2);
        let mut analytic: Vec<f64> = gw.to_vec();
        analytic.push(gb);
        let mut numeric = Vec::with_capacity(d + 1);
        for j in 0..=d {
            let shifted = |delta: f64| {
                let mut w2 = w.clone();
                let mut b2 = b;
                if j < d {
                    w2[j] += delta;
                } else {
                    b2 += delta;
                }
                objective(x.view(), t.view(), w2.view(), b2, l2).0
            };
            numeric.push((shifted(h) - shifted(-h)) / (2.0 * h));
        }
        let diff: f64 = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale: f64 =
            analytic.iter().map(|a| a * a).sum::<f64>().sqrt() + numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(diff / scale.max(1e-12) <= 1e-5, "seed {seed}: {}", diff / scale);
    }
}

#[test]
fn stump_cannot_separate_xor() {
    let x = array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
    let y = [0, 1, 1, 0];
    let stump = LearnerSpec::new(LearnerKind::Tree).with("max_depth", 1i64);
    let model = fit_learner(&stump, x.view(), &y, 0).unwrap();
    assert!(accuracy(&predict_classes(&model, x.view()).unwrap(), &y) <= 0.75);
    let deep = LearnerSpec::new(LearnerKind::Tree).with("max_depth", 2i64);
    let model = fit_learner(&deep, x.view(), &y, 0).unwrap();
    assert_eq!(predict_classes(&model, x.view()).unwrap(), y);
}

#[test]
fn well_separated_clusters_are_learned() {
    let (x, c) = gaussian_clusters(300, 4, 3, 0.5, 17).unwrap();
    for spec in [
        LearnerSpec::new(LearnerKind::Knn),
        LearnerSpec::new(LearnerKind::GaussianNb),
        LearnerSpec::new(LearnerKind::Tree),
        LearnerSpec::new(LearnerKind::Logistic),
        LearnerSpec::new(LearnerKind::NdEnsemble),
    ] {
        let model = fit_learner(&spec, x.view(), &c, 1).unwrap();
        let acc = accuracy(&predict_classes(&model, x.view()).unwrap(), &c);
        assert!(acc >= 0.95, "{:?}: {acc}", spec.name);
        let scores = predict_scores(&model, x.view()).unwrap();
        for row in scores.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }
}

#[test]
fn logistic_is_near_chance_on_xor() {
    let ds = xor_dependence(1000, 2, 2, 5).unwrap();
    let y = ds.label_column(1);
    let model = fit_learner(&LearnerSpec::new(LearnerKind::Logistic), ds.features.view(), &y, 0).unwrap();
    let acc = accuracy(&predict_classes(&model, ds.features.view()).unwrap(), &y);
    assert!((acc - 0.5).abs() < 0.1, "{acc}");
}

#[test]
fn nested_dichotomies_compete_with_one_vs_rest() {
    let (x, c) = gaussian_clusters(400, 3, 5, 2.0, 23).unwrap();
    let (train, test) = (x.slice(ndarray::s![..300, ..]), x.slice(ndarray::s![300.., ..]));
    let inner = LearnerSpec::new(LearnerKind::Logistic);
    let nd = LearnerSpec::new(LearnerKind::NdEnsemble)
        .with("ensemble_size", 5i64)
        .with_nested(inner.clone());
    let acc = |spec: &LearnerSpec| {
        let model = fit_learner(spec, train, &c[..300], 2).unwrap();
        accuracy(&predict_classes(&model, test).unwrap(), &c[300..])
    };
    let (a_nd, a_ovr) = (acc(&nd), acc(&inner));
    assert!(a_nd >= a_ovr - 0.1, "nd {a_nd} vs ovr {a_ovr}");
}

#[test]
fn preprocessors_never_add_columns() {
    let x = array![[1.0, 5.0, 2.0], [3.0, 5.0, 2.5], [5.0, 5.0, 1.0]];
    let params = ParamMap::new();
    for kind in [
        PreprocessorKind::Standardize,
        PreprocessorKind::Minmax,
        PreprocessorKind::VarianceThreshold,
    ] {
        let t = fit_preprocessor(kind, &params, x.view()).unwrap();
        let out = apply_transform(&t, x.view()).unwrap();
        assert!(out.ncols() <= x.ncols());
        assert!(out.iter().all(|v| v.is_finite()));
    }
    let t = fit_preprocessor(PreprocessorKind::VarianceThreshold, &params, x.view()).unwrap();
    assert_eq!(apply_transform(&t, x.view()).unwrap().ncols(), 2);
    let t = fit_preprocessor(PreprocessorKind::Minmax, &params, x.view()).unwrap();
    let out = apply_transform(&t, x.view()).unwrap();
    assert_eq!(out.column(0).to_vec(), vec![0.0, 0.5, 1.0]);
    assert!(apply_transform(&t, array![[1.0, 2.0]].view()).is_err());
}

#[test]
fn invalid_parameters_are_rejected() {
    let x = array![[0.0], [1.0]];
    for spec in [
        LearnerSpec::new(LearnerKind::Knn).with("k", 0i64),
        LearnerSpec::new(LearnerKind::Tree).with("max_depth", 13i64),
        LearnerSpec::new(LearnerKind::Logistic).with("learning_rate", 2.0),
        LearnerSpec::new(LearnerKind::Knn).with("distance", "cosine"),
    ] {
        assert!(fit_learner(&spec, x.view(), &[0, 1], 0).is_err(), "{spec:?}");
    }
    assert!(fit_learner(&LearnerSpec::new(LearnerKind::Tree), x.view(), &[0], 0).is_err());
}

use std::sync::Arc;

use proptest::prelude::*;

use mixedbo::baselines::{fit_parzen, split_observations, DimDensity, TpeConfig};
use mixedbo::gp_model::{Dataset, GpPosterior};
use mixedbo::kernels::{gram_matrix, KernelFamily, KernelParams, KernelSpec};
use mixedbo::search_space::{Dimension, RelaxedPoint, SearchSpace, ValidConfig, Value};

fn space() -> Arc<SearchSpace> {
    Arc::new(
        SearchSpace::new(vec![
            Dimension::real(-1.0, 2.0),
            Dimension::integer(0, 4),
            Dimension::categorical(["a", "b", "c"]),
        ])
        .unwrap(),
    )
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    (-1.0..2.0f64, -0.5..4.5f64, prop::collection::vec(0.0..1.0f64, 3))
        .prop_map(|(r, i, c)| vec![r, i, c[0], c[1], c[2]])
}

fn kernel(ls: Vec<f64>, amp: f64, se: bool) -> KernelSpec {
    let family = if se { KernelFamily::SquaredExponential } else { KernelFamily::Matern32 };
    KernelSpec::transformed(KernelParams::new(ls, amp, family).unwrap(), space()).unwrap()
}

fn hypers() -> impl Strategy<Value = (Vec<f64>, f64, bool)> {
    (prop::collection::vec(0.05..5.0f64, 5), 0.1..10.0f64, any::<bool>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn transform_is_idempotent(p in point()) {
        let s = space();
        let once = s.transform(&p).into_inner();
        prop_assert_eq!(s.transform(&once).into_inner(), once);
    }

    #[test]
    fn transform_matches_decode_then_encode(p in point()) {
        let s = space();
        let via_config = s.encode(&s.decode(&p)).unwrap().into_inner();
        prop_assert_eq!(s.transform(&p).into_inner(), via_config);
    }

    #[test]
    fn transformed_kernel_sees_only_cells(p in point(), q in point(), (ls, amp, se) in hypers()) {
        let s = space();
        let k = kernel(ls, amp, se);
        let tp = s.transform(&p).into_inner();
        prop_assert_eq!(k.value(&p, &q).unwrap(), k.value(&tp, &q).unwrap());
        prop_assert_eq!(k.value(&p, &q).unwrap(), k.value(&q, &p).unwrap());
        prop_assert!(k.value(&p, &q).unwrap() <= amp * (1.0 + 1e-12));
        prop_assert!((k.value(&p, &p).unwrap() - amp).abs() <= 1e-12 * amp);
    }

    #[test]
    fn posterior_variance_below_prior(
        xs in prop::collection::vec(point(), 1..8),
        ys in prop::collection::vec(-3.0..3.0f64, 8),
        q in point(),
        (ls, amp, se) in hypers(),
    ) {
        let inputs: Vec<RelaxedPoint> = xs.iter().cloned().map(RelaxedPoint::new).collect();
        let data = Dataset::new(inputs, ys[..xs.len()].to_vec()).unwrap();
        let post = GpPosterior::fit(&data, kernel(ls, amp, se), 1e-2 * amp).unwrap();
        let pred = post.predict(&q).unwrap();
        prop_assert!(pred.variance >= 0.0);
        prop_assert!(pred.variance <= amp * (1.0 + 1e-9));
        prop_assert!(pred.mean.is_finite());
    }

    #[test]
    fn gram_matrix_is_symmetric(xs in prop::collection::vec(point(), 1..10), (ls, amp, se) in hypers()) {
        let g = gram_matrix(&xs, &kernel(ls, amp, se), 0.0).unwrap();
        prop_assert_eq!(g.clone(), g.transpose());
    }

    #[test]
    fn split_partitions_data(ys in prop::collection::vec(-5.0..5.0f64, 2..40), gamma in 0.01..0.99f64) {
        let data: Vec<(ValidConfig, f64)> =
            ys.iter().map(|&y| (ValidConfig(vec![Value::Real(y)]), y)).collect();
        let (lower, upper) = split_observations(&data, gamma).unwrap();
        prop_assert!(!lower.is_empty());
        prop_assert_eq!(lower.len() + upper.len(), data.len());
        let top = lower.iter().map(|(_, y)| *y).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(upper.iter().all(|(_, y)| *y > top));
    }

    #[test]
    fn parzen_densities_normalize(xs in prop::collection::vec(point(), 0..12)) {
        let s = space();
        let obs: Vec<ValidConfig> = xs.iter().map(|p| s.decode(p)).collect();
        let d = fit_parzen(&obs, &s, &TpeConfig::default()).unwrap();
        for dim in d.dims() {
            let total = match dim {
                DimDensity::Discrete { probs } => probs.iter().sum::<f64>(),
                DimDensity::Continuous { lower, upper, weights, .. } => {
                    prop_assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    let n = 20_000;
                    let h = (upper - lower) / n as f64;
                    (0..=n)
                        .map(|i| {
                            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                            w * dim.density(lower + i as f64 * h)
                        })
                        .sum::<f64>()
                        * h
                }
            };
            prop_assert!((total - 1.0).abs() < 1e-4, "total {}", total);
        }
    }
}

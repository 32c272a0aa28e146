use proptest::prelude::*;
use sle_lab::qdiff::QDiffusionSpec;
use sle_lab::spectrum::spectrum_params;
use sle_lab::SleParams;

fn worked() -> QDiffusionSpec {
    let p = SleParams::new(2.0, -1.5, 1.0, 0.0).unwrap();
    QDiffusionSpec::new(&p, &spectrum_params(&p, 0.3).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn detailed_balance(x in 0.05f64..0.95, y in 0.05f64..0.95, t in 1.0f64..4.0) {
        let q = worked();
        let lhs = q.invariant_density(x).unwrap() * q.transition_density(t, x, y, 64).unwrap();
        let rhs = q.invariant_density(y).unwrap() * q.transition_density(t, y, x, 64).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()));
    }

    #[test]
    fn cdf_is_nondecreasing(x0 in 0.05f64..0.95, t in 1.0f64..4.0, a in 0.01f64..0.99, b in 0.01f64..0.99) {
        let q = worked();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(q.transition_cdf(t, x0, lo, 64).unwrap() <= q.transition_cdf(t, x0, hi, 64).unwrap() + 1e-12);
    }

    #[test]
    fn eigenvalues_decrease(n in 0usize..200) {
        let q = worked();
        prop_assert!(q.eigenvalue(n + 1) < q.eigenvalue(n));
    }
}

#[test]
fn density_relaxes_monotonically_towards_the_invariant_law() {
    let q = worked();
    let dist = |t: f64| {
        (1..100)
            .map(|j| {
                let y = j as f64 / 100.0;
                (q.transition_density(t, 1.0 - 1e-9, y, 64).unwrap()
                    - q.invariant_density(y).unwrap())
                .abs()
            })
            .fold(0.0, f64::max)
    };
    let d: Vec<f64> = [1.0, 2.0, 4.0, 8.0].iter().map(|&t| dist(t)).collect();
    assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
}

#[test]
fn first_eigenvalue_is_the_gap() {
    let q = worked();
    assert_eq!(q.eigenvalue(0), 0.0);
    assert!((q.gap() + q.eigenvalue(1)).abs() < 1e-15);
}

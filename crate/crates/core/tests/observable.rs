use markov_llt_core::{GeneratorModel, Observable, ObservableFn};
use proptest::prelude::*;

fn arb_observable() -> impl Strategy<Value = (Observable, Vec<f64>)> {
    (1usize..=3, 2usize..=4, 1usize..=4).prop_flat_map(|(d, n, len)| {
        (
            prop::collection::vec(prop::collection::vec(prop::collection::vec(-2.0f64..2.0, len), n), d),
            prop::collection::vec(0.1f64..1.0, n),
        )
            .prop_map(move |(table, w)| {
                let total: f64 = w.iter().sum();
                (Observable::new(d, n, &table).unwrap(), w.iter().map(|x| x / total).collect())
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn centering_is_idempotent((b, nu) in arb_observable()) {
        let c = b.center(&nu).unwrap();
        prop_assert!(c.is_centered_under(&nu, 1e-12).unwrap());
        prop_assert_eq!(c.center(&nu).unwrap(), c);
    }

    #[test]
    fn alpha_derivative_matches_finite_difference((b, _nu) in arb_observable(), alpha in 0.01f64..0.99) {
        let h = 1e-6;
        for x in 0..b.num_states() {
            let exact = b.derivative_alpha(alpha, x, 1).unwrap();
            let plus = b.evaluate(alpha + h, x).unwrap();
            let minus = b.evaluate(alpha - h, x).unwrap();
            for j in 0..b.dim() {
                let fd = (plus[j] - minus[j]) / (2.0 * h);
                prop_assert!((fd - exact[j]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn antiderivative_integrates_back((b, _nu) in arb_observable(), alpha in 0.0f64..1.0) {
        let a = b.antiderivative();
        for x in 0..b.num_states() {
            // Simpson on [0, α] is exact for the cubic tables used here.
            let m = 0.5 * alpha;
            let f0 = b.evaluate(0.0, x).unwrap();
            let fm = b.evaluate(m, x).unwrap();
            let f1 = b.evaluate(alpha, x).unwrap();
            let got = a.evaluate(alpha, x).unwrap();
            for j in 0..b.dim() {
                let simpson = alpha / 6.0 * (f0[j] + 4.0 * fm[j] + f1[j]);
                prop_assert!((got[j] - simpson).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn span_check_detects_collinear_coordinates() {
    let b = Observable::new(2, 3, &[vec![vec![1.0], vec![-1.0], vec![0.0]], vec![vec![2.0], vec![-2.0], vec![0.0]]]).unwrap();
    assert!(!b.span_check(&[0.0, 0.5, 1.0]).unwrap().spans());
    let b = Observable::new(2, 3, &[vec![vec![1.0], vec![-1.0], vec![0.0]], vec![vec![0.0], vec![1.0], vec![-1.0]]]).unwrap();
    assert!(b.span_check(&[0.0, 0.5, 1.0]).unwrap().spans());
}

#[test]
fn evaluation_layout_is_state_major() {
    let m = GeneratorModel::symmetric_two_state(1.0);
    let b = Observable::new(2, 2, &[vec![vec![1.0], vec![2.0]], vec![vec![3.0], vec![4.0]]]).unwrap();
    assert_eq!(b.eval_vec(0.3), vec![1.0, 3.0, 2.0, 4.0]);
    assert_eq!(b.mean(m.nu()).unwrap(), vec![vec![1.5], vec![3.5]]);
    assert!(b.evaluate(1.5, 0).is_err());
}

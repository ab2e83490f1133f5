use corridornav::dataset::Target;
use corridornav::metrics::{mae, mre, mse, EvalReport};
use proptest::prelude::*;

fn pairs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..40).prop_flat_map(|n| {
        (
            proptest::collection::vec(-10.0f64..10.0, n),
            proptest::collection::vec(-10.0f64..10.0, n),
        )
    })
}

#[test]
fn hand_computed_fixture() {
    let p = [1.0, 2.5, 4.0, -1.0];
    let y = [1.5, 2.0, 3.0, -2.0];
    // errors: -0.5, 0.5, 1.0, 1.0
    assert!((mse(&p, &y).unwrap() - 2.5 / 4.0).abs() < 1e-12);
    assert!((mae(&p, &y).unwrap() - 3.0 / 4.0).abs() < 1e-12);
    let rel = (0.5 / 1.5 + 0.5 / 2.0 + 1.0 / 3.0 + 1.0 / 2.0) / 4.0;
    assert!((mre(&p, &y).unwrap().0 - rel).abs() < 1e-12);
}

#[test]
fn constant_center_model_on_symmetric_set() {
    let half = std::f64::consts::FRAC_PI_2;
    let labels = [half - 0.4, half - 0.1, half, half + 0.1, half + 0.4];
    let preds = [half; 5];
    let direct = labels.iter().map(|l| (l - half).abs()).sum::<f64>() / 5.0;
    let report = EvalReport::from_predictions(Target::Angle, &preds, &labels).unwrap();
    assert!((report.mae - direct).abs() < 1e-12);
}

proptest! {
    #[test]
    fn mse_dominates_squared_mae((p, y) in pairs()) {
        let (s, a) = (mse(&p, &y).unwrap(), mae(&p, &y).unwrap());
        prop_assert!(s + 1e-12 >= a * a);
    }

    #[test]
    fn metrics_ignore_order((p, y) in pairs(), rot in 0usize..40) {
        let k = rot % p.len();
        let mut p2 = p.clone();
        let mut y2 = y.clone();
        p2.rotate_left(k);
        y2.rotate_left(k);
        prop_assert!((mse(&p, &y).unwrap() - mse(&p2, &y2).unwrap()).abs() < 1e-9);
        prop_assert!((mae(&p, &y).unwrap() - mae(&p2, &y2).unwrap()).abs() < 1e-9);
    }
}

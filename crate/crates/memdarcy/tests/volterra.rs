use memdarcy::volterra::{cumulative_trapezoid, volterra_convolve, Contraction, Rule, TensorSeries};
use proptest::prelude::*;

fn series(shape: Vec<usize>, v: &[f64]) -> TensorSeries<f64> {
    let size: usize = shape.iter().product();
    TensorSeries::new(shape, v.chunks(size).map(|c| c.to_vec()).collect()).unwrap()
}

#[test]
fn unit_kernel_integrates_linear_data_exactly() {
    let (n, dt) = (17, 0.125);
    let one = TensorSeries::scalar(&vec![1.0; n]);
    let x: Vec<f64> = (0..n).map(|k| 2.0 + 3.0 * k as f64 * dt).collect();
    let trap = volterra_convolve(&one, &TensorSeries::scalar(&x), Contraction::Star1, dt, Rule::Trapezoid).unwrap();
    let right = volterra_convolve(&one, &TensorSeries::scalar(&x), Contraction::Star1, dt, Rule::RightEndpoint).unwrap();
    for k in 0..n {
        let t = k as f64 * dt;
        assert!((trap.samples[k][0] - (2.0 * t + 1.5 * t * t)).abs() < 1e-12);
        let sum: f64 = x[1..=k].iter().sum::<f64>() * dt;
        assert!((right.samples[k][0] - sum).abs() < 1e-12);
    }
    let cum = cumulative_trapezoid(&x.iter().map(|v| vec![*v]).collect::<Vec<_>>(), dt);
    for k in 0..n {
        assert!((cum[k][0] - trap.samples[k][0]).abs() < 1e-12);
    }
}

#[test]
fn matrix_kernel_contracts_its_last_axis() {
    let dt = 0.5;
    // K(t) = [[1, t], [0, 2]], X(t) = (1, 1)
    let k = series(vec![2, 2], &[1.0, 0.0, 0.0, 2.0, 1.0, 0.5, 0.0, 2.0, 1.0, 1.0, 0.0, 2.0]);
    let x = series(vec![2], &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
    let r = volterra_convolve(&k, &x, Contraction::Star, dt, Rule::RightEndpoint).unwrap();
    assert_eq!(r.shape, vec![2]);
    // node 2: Δt (K(t₂) + K(t₁)) (1, 1)
    assert!((r.samples[2][0] - 0.5 * (2.0 + 1.5)).abs() < 1e-15);
    assert!((r.samples[2][1] - 0.5 * 4.0).abs() < 1e-15);
    assert!(volterra_convolve(&k, &x, Contraction::Star1, dt, Rule::RightEndpoint).is_err());
    let short = series(vec![2], &[1.0, 1.0]);
    assert!(volterra_convolve(&k, &short, Contraction::Star, dt, Rule::RightEndpoint).is_err());
}

proptest! {
    #[test]
    fn convolution_is_linear_in_the_history(
        k in prop::collection::vec(-2.0f64..2.0, 9 * 4),
        x in prop::collection::vec(-2.0f64..2.0, 9 * 2),
        y in prop::collection::vec(-2.0f64..2.0, 9 * 2),
        a in -3.0f64..3.0,
        trapezoid in any::<bool>(),
    ) {
        let rule = if trapezoid { Rule::Trapezoid } else { Rule::RightEndpoint };
        let ks = series(vec![2, 2], &k);
        let combo: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + v).collect();
        let run = |h: &[f64]| volterra_convolve(&ks, &series(vec![2], h), Contraction::Star, 0.1, rule).unwrap();
        let (rx, ry, rc) = (run(&x), run(&y), run(&combo));
        for n in 0..9 {
            for i in 0..2 {
                let want = a * rx.samples[n][i] + ry.samples[n][i];
                prop_assert!((rc.samples[n][i] - want).abs() <= 1e-12 * (1.0 + want.abs()));
            }
        }
        prop_assert!(rc.samples[0].iter().all(|v| *v == 0.0));
    }
}

use dagbandit::theory::{chatzigeorgiou_bounds, lambert_wm1};

fn u_grid() -> impl Iterator<Item = f64> {
    // log-spaced from 1e-8 to 1e4
    (0..=1200).map(|i| 10f64.powf(-8.0 + f64::from(i) / 100.0))
}

#[test]
fn bounds_bracket_the_lower_branch() {
    for u in u_grid() {
        let y = -(-u - 1.0).exp();
        if y == 0.0 {
            continue;
        }
        let w = lambert_wm1(y).unwrap();
        let (lo, hi) = chatzigeorgiou_bounds(u);
        let slack = 1e-12 * w.abs();
        assert!(lo - slack <= w && w <= hi + slack, "u = {u}: {lo} <= {w} <= {hi}");
    }
}

#[test]
fn residual_is_within_relative_tolerance() {
    let inv_e = -(-1f64).exp();
    let mut ys: Vec<f64> = (1..=2000).map(|i| inv_e * f64::from(i) / 2000.0).collect();
    ys.extend((1..300).map(|k| -(10f64.powi(-k))));
    ys.extend((1..60).map(|k| inv_e * (1.0 - 2f64.powi(-k))));
    for y in ys {
        let w = lambert_wm1(y).unwrap();
        assert!(w <= -1.0, "y = {y}: w = {w}");
        let rel = ((w * w.exp() - y) / y).abs();
        assert!(rel <= 1e-12, "y = {y}: w = {w}, relative residual {rel:e}");
    }
}

#[test]
fn outside_the_domain_is_an_error() {
    for y in [0.0, 1e-9, 0.5, -0.5, f64::NAN] {
        assert!(lambert_wm1(y).is_err(), "{y}");
    }
}

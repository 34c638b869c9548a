use axivortex::dual::adaptive_gauss_kronrod;
use axivortex::measure::{FreeBoundary, ReferenceMeasure};
use axivortex::model::Model;

fn boundary_fn(z: f64) -> f64 {
    0.1 + 0.2 * z + 0.05 * (3.0 * z).sin()
}

fn exact_mass(model: &Model) -> f64 {
    let base = model.mass_primitive(0.0);
    adaptive_gauss_kronrod(&|z| model.mass_primitive(boundary_fn(z)) - base, 0.0, model.height, 1e-15, 40)
}

#[test]
fn node_quadrature_is_second_order() {
    let model = Model::canonical();
    let exact = exact_mass(&model);
    let err = |n: usize| {
        let b = FreeBoundary::from_fn(&model, n, boundary_fn);
        (ReferenceMeasure::new(&model, &b, n).total_mass() - exact).abs()
    };
    let (e1, e2, e3) = (err(32), err(64), err(128));
    for ratio in [e1 / e2, e2 / e3] {
        assert!((3.4..=4.6).contains(&ratio), "error ratios {} {}", e1 / e2, e2 / e3);
    }
}

#[test]
fn row_exact_mass_is_second_order_in_height() {
    let model = Model::canonical();
    let exact = exact_mass(&model);
    let err = |n: usize| (FreeBoundary::from_fn(&model, n, boundary_fn).mass(&model) - exact).abs();
    let ratio = err(64) / err(128);
    assert!((3.4..=4.6).contains(&ratio), "ratio {ratio}");
}

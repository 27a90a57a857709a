use memdarcy::geometry::{
    bump, CellGeometry, CutoffFunction, Domain, LayerCellKind, LayerDecomposition, ObstacleShape, PerforatedDomain,
};
use memdarcy::Error;
use proptest::prelude::*;

fn square(n_cell: usize) -> CellGeometry<f64> {
    CellGeometry::new(ObstacleShape::Square, 0.25, n_cell).unwrap()
}

fn build(eps: f64, n_cell: usize) -> PerforatedDomain<f64> {
    PerforatedDomain::build(Domain::unit_square(), &square(n_cell), eps, 2.0, None).unwrap()
}

#[test]
fn cell_fraction_counts_cells() {
    for (shape, extent) in [(ObstacleShape::Square, 0.25), (ObstacleShape::Disk, 0.2)] {
        let c = CellGeometry::<f64>::new(shape, extent, 40).unwrap();
        let solid = c.solid.iter().filter(|s| **s).count();
        assert!((c.fluid_fraction - (1600 - solid) as f64 / 1600.0).abs() < 1e-15);
        assert!(c.fluid_connected());
        let [i0, i1, j0, j1] = c.solid_bbox.unwrap();
        assert!(i0 >= 1 && j0 >= 1 && i1 <= 39 && j1 <= 39);
    }
    let empty = CellGeometry::<f64>::new(ObstacleShape::Square, 0.0, 8).unwrap();
    assert_eq!(empty.fluid_fraction, 1.0);
    assert!(!empty.has_obstacle());
}

#[test]
fn unresolved_or_oversized_obstacles_are_rejected() {
    assert!(CellGeometry::<f64>::new(ObstacleShape::Square, 0.25, 8).unwrap_err().is_config());
    assert!(CellGeometry::<f64>::new(ObstacleShape::Square, 0.5, 32).unwrap_err().is_config());
    assert!(CellGeometry::<f64>::new(ObstacleShape::Disk, 0.49, 32).unwrap_err().is_config());
}

#[test]
fn coarse_eps_has_no_obstacles() {
    let d = build(0.5, 16);
    assert!(d.kept.is_empty() && d.is_degenerate());
    assert!(d.solid.iter().all(|s| !s));
    assert!((d.fluid_measure() - 1.0).abs() < 1e-15);
    assert!(matches!(d.ensure_perforated(), Err(Error::DegeneratePerforation(_))));
}

#[test]
fn kept_cells_match_enumeration() {
    let (eps, kappa0) = (0.125, 2.0);
    let d = build(eps, 16);
    let mut expect = Vec::new();
    for zj in 0..8 {
        for zi in 0..8 {
            // obstacle [3/8, 5/8]² of the cell, in length units
            let (x0, x1) = ((zi as f64 + 0.375) * eps, (zi as f64 + 0.625) * eps);
            let (y0, y1) = ((zj as f64 + 0.375) * eps, (zj as f64 + 0.625) * eps);
            if x0.min(1.0 - x1).min(y0).min(1.0 - y1) >= kappa0 * eps {
                expect.push([zi, zj]);
            }
        }
    }
    assert_eq!(expect.len(), 16);
    let mut kept = d.kept.clone();
    kept.sort_by_key(|z| (z[1], z[0]));
    assert_eq!(kept, expect);
    assert!(d.obstacle_margin().unwrap() >= kappa0 * eps - 1e-12);
    let per_cell = square(16).solid.iter().filter(|s| **s).count();
    assert_eq!(d.solid.iter().filter(|s| **s).count(), 16 * per_cell);
}

#[test]
fn empty_cell_leaves_the_domain_whole() {
    let cell = CellGeometry::<f64>::new(ObstacleShape::Square, 0.0, 8).unwrap();
    for eps in [0.25, 0.125, 0.0625] {
        let d = PerforatedDomain::build(Domain::unit_square(), &cell, eps, 2.0, None).unwrap();
        assert!(d.kept.is_empty());
        assert!((d.fluid_measure() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn mask_is_symmetric_and_connected() {
    for (shape, extent) in [(ObstacleShape::Square, 0.25), (ObstacleShape::Disk, 0.2)] {
        let cell = CellGeometry::<f64>::new(shape, extent, 20).unwrap();
        for eps in [0.125, 0.0625] {
            let d = PerforatedDomain::build(Domain::unit_square(), &cell, eps, 2.0, None).unwrap();
            let n = d.n;
            let at = |i: usize, j: usize| d.solid[j * n + i];
            for j in 0..n {
                for i in 0..n {
                    let s = at(i, j);
                    assert_eq!(s, at(n - 1 - i, j));
                    assert_eq!(s, at(i, n - 1 - j));
                    assert_eq!(s, at(j, i));
                }
            }
            assert!(d.fluid_connected());
            assert!(d.obstacle_margin().unwrap() >= 2.0 * eps - 1e-12);
        }
    }
}

#[test]
fn larger_margin_keeps_fewer_cells() {
    let cell = square(16);
    let a = PerforatedDomain::build(Domain::unit_square(), &cell, 0.0625, 2.0, None).unwrap();
    let b = PerforatedDomain::build(Domain::unit_square(), &cell, 0.0625, 3.0, None).unwrap();
    assert_eq!(a.kept.len(), 144);
    assert_eq!(b.kept.len(), 100);
    assert!(b.obstacle_margin().unwrap() >= 3.0 * 0.0625 - 1e-12);
}

#[test]
fn bad_perforation_inputs_are_config_errors() {
    let cell = square(16);
    let u = Domain::unit_square();
    assert!(PerforatedDomain::build(u, &cell, 0.3, 2.0, None).unwrap_err().is_config());
    assert!(PerforatedDomain::build(u, &cell, 0.125, 1.5, None).unwrap_err().is_config());
    assert!(PerforatedDomain::build(u, &cell, 0.125, 2.0, Some(100)).unwrap_err().is_config());
    assert!(PerforatedDomain::build(u, &cell, 0.125, 2.0, Some(128)).is_ok());
    let wide = Domain { lx: 2.0, ly: 1.0 };
    assert!(matches!(PerforatedDomain::build(wide, &cell, 0.125, 2.0, None), Err(Error::UnsupportedDomain(_))));
    assert!(matches!(CutoffFunction::<f64>::new(wide, 0.125, 64), Err(Error::UnsupportedDomain(_))));
    assert!(matches!(LayerDecomposition::new(wide, 0.125, 64), Err(Error::UnsupportedDomain(_))));
    assert!(CutoffFunction::<f64>::new(u, 0.25, 64).unwrap_err().is_config());
}

/// `g_ε` rebuilt with a midpoint rule: the ramp from 4ε/3 to 5ε/3 convolved with the bump
/// at width ε/3.
fn profile_oracle(eps: f64, r: f64) -> f64 {
    let m = 20000;
    let dz = 2.0 / m as f64;
    let zs: Vec<f64> = (0..m).map(|k| -1.0 + (k as f64 + 0.5) * dz).collect();
    let mass: f64 = zs.iter().map(|&z| bump(z)).sum::<f64>() * dz;
    let ramp = |s: f64| ((s - 4.0 * eps / 3.0) / (eps / 3.0)).clamp(0.0, 1.0);
    zs.iter().map(|&z| bump(z) * ramp(r - z * eps / 3.0)).sum::<f64>() * dz / mass
}

#[test]
fn cutoff_values_at_reference_distances() {
    let eps = 0.0625;
    let c = CutoffFunction::<f64>::new(Domain::unit_square(), eps, 64).unwrap();
    assert_eq!(c.value_at(0.5, 3.0 * eps), 1.0);
    assert_eq!(c.value_at(3.0 * eps, 0.4), 1.0);
    assert_eq!(c.value_at(0.5, 0.5 * eps), 0.0);
    assert_eq!(c.value_at(1.0 - 0.5 * eps, 0.3), 0.0);
    for r in [1.1, 1.3, 1.5, 1.7, 1.9] {
        let v = c.value_at(0.5, r * eps);
        assert!((v - profile_oracle(eps, r * eps)).abs() < 1e-7, "r = {r}ε");
    }
}

#[test]
fn cutoff_gradient_points_inward_on_the_bottom_edge() {
    let eps = 0.0625;
    let c = CutoffFunction::<f64>::new(Domain::unit_square(), eps, 64).unwrap();
    let r = 1.5 * eps;
    let g = c.grad_at(0.5, r);
    let step = 1e-4 * eps;
    let slope = (profile_oracle(eps, r + step) - profile_oracle(eps, r - step)) / (2.0 * step);
    assert_eq!(g[0], 0.0);
    assert!(g[1] > 0.0);
    assert!((g[1] - slope).abs() < 1e-5 * slope, "{} vs {slope}", g[1]);
}

#[test]
fn cutoff_support_and_range() {
    let eps = 0.125;
    let n = 128;
    let c = CutoffFunction::<f64>::new(Domain::unit_square(), eps, n).unwrap();
    let h = 1.0 / n as f64;
    for j in 0..n {
        for i in 0..n {
            let (x, y) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
            let d = c.domain.dist(x, y);
            let k = j * n + i;
            let psi = c.psi[k];
            assert!((0.0..=1.0).contains(&psi));
            if d >= 2.0 * eps {
                assert_eq!(psi, 1.0);
            }
            if d <= eps {
                assert_eq!(psi, 0.0);
            }
            let gk = c.grad[k];
            if gk != [0.0, 0.0] {
                assert!(d > eps && d < 2.0 * eps, "stray gradient at distance {d}");
            }
        }
    }
}

#[test]
fn cutoff_gradient_is_antiparallel_to_the_outward_normal() {
    let eps = 0.125;
    let n = 128;
    let c = CutoffFunction::<f64>::new(Domain::unit_square(), eps, n).unwrap();
    let h = 1.0 / n as f64;
    let mut checked = 0;
    for j in 0..n {
        for i in 0..n {
            let (x, y) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
            let g = c.grad[j * n + i];
            if g == [0.0, 0.0] || c.domain.near_diagonal(x, y, h) {
                continue;
            }
            // outward normal of the nearest side, found directly
            let sides = [(x, [-1.0, 0.0]), (1.0 - x, [1.0, 0.0]), (y, [0.0, -1.0]), (1.0 - y, [0.0, 1.0])];
            let out = sides.iter().min_by(|a, b| a.0.partial_cmp(&b.0).unwrap()).unwrap().1;
            let norm = g[0].hypot(g[1]);
            assert!((g[0] * out[0] + g[1] * out[1] + norm).abs() < 1e-12 * norm.max(1.0));
            checked += 1;
        }
    }
    assert!(checked > 1000);
}

#[test]
fn cutoff_derivatives_scale_inversely_with_eps() {
    let u = Domain::unit_square();
    let c: Vec<CutoffFunction<f64>> =
        [(0.125, 128), (0.0625, 256), (0.03125, 512)].iter().map(|&(e, n)| CutoffFunction::new(u, e, n).unwrap()).collect();
    for w in c.windows(2) {
        let r = w[1].max_grad() / w[0].max_grad();
        assert!((1.5..=2.5).contains(&r), "gradient ratio {r}");
        let a = w[0].max_hessian() * w[0].eps * w[0].eps;
        let b = w[1].max_hessian() * w[1].eps * w[1].eps;
        assert!(b / a < 2.0 && a / b < 2.0, "ε²·max|∇²ψ| {a} vs {b}");
    }
}

#[test]
fn decomposition_matches_area_bookkeeping() {
    for (eps, n) in [(0.125, 64), (0.0625, 128), (0.03125, 256)] {
        let d = LayerDecomposition::new(Domain::unit_square(), eps, n).unwrap();
        let strip = (1.0 - 2.0 * eps).powi(2) - (1.0 - 4.0 * eps).powi(2);
        let cylinders = ((strip - 4.0 * eps * eps) / (eps * eps)).round() as usize;
        assert_eq!(d.cylinders(), cylinders);
        assert_eq!(cylinders as f64, 4.0 * (1.0 - 4.0 * eps) / eps);
        let total: f64 = (0..d.cells.len()).map(|k| d.area(k)).sum();
        assert!((total - strip).abs() < 1e-12);
        for (k, cell) in d.cells.iter().enumerate() {
            let a = d.area(k) / (eps * eps);
            assert!((a - 1.0).abs() < 1e-12, "{:?} cell has area {a}ε²", cell.kind);
        }
        assert_eq!(d.cells.iter().filter(|c| c.kind == LayerCellKind::Corner).count(), 4);
    }
}

#[test]
fn decomposition_partitions_the_layer() {
    let (eps, n) = (0.125, 128);
    let d = LayerDecomposition::new(Domain::unit_square(), eps, n).unwrap();
    let c = CutoffFunction::<f64>::new(Domain::unit_square(), eps, n).unwrap();
    let layer = c.layer_mask();
    assert_eq!(layer, d.layer_by_distance());
    for (k, owner) in d.owner.iter().enumerate() {
        assert_eq!(owner.is_some(), layer[k]);
        if let Some(o) = owner {
            let covering = d.cells.iter().filter(|cell| cell.contains(k % n, k / n)).count();
            assert_eq!(covering, 1);
            assert!(d.cells[*o].contains(k % n, k / n));
        }
    }
}

proptest! {
    #[test]
    fn colayer_shrinks_as_eps_grows(x in 0.0f64..1.0, y in 0.0f64..1.0, e1 in 0.0f64..0.5, de in 0.0f64..0.5) {
        let u = Domain::unit_square();
        if u.in_colayer(x, y, e1 + de) {
            prop_assert!(u.in_colayer(x, y, e1));
        }
    }

    #[test]
    fn cutoff_depends_on_distance_only(x in 0.0f64..1.0, y in 0.0f64..1.0, m in 3u32..6) {
        let eps = 0.5f64.powi(m as i32);
        let c = CutoffFunction::<f64>::new(Domain::unit_square(), eps, 8).unwrap();
        let d = c.domain.dist(x, y);
        prop_assert_eq!(c.value_at(x, y), c.value_at(d, 0.5));
        prop_assert_eq!(c.value_at(x, y), c.value_at(0.5, d));
        let g = c.grad_at(x, y);
        let g_ref = c.grad_at(d, 0.5);
        prop_assert_eq!(g[0].hypot(g[1]), g_ref[0].hypot(g_ref[1]));
    }
}

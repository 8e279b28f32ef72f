//! Property tests for the structural invariants of each module.

use nullframe::energy::{gram, norm_equivalence_bounds, tangential_density};
use nullframe::fields::{Grid, GridField, PolyField};
use nullframe::geometry::{mdot, null_frame_at, CoordTensor, FrameVector, Point, Variance, POLAR_CAP};
use nullframe::vecfields::{jacobi_defect, lie_derivative, AffineField, VectorFieldId};
use nullframe::weights::{self, WeightKind, WeightParams};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn spatial() -> impl Strategy<Value = [f64; 3]> {
    [-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64]
        .prop_filter("r > 0", |x| (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt() > 0.05)
}

fn generator() -> impl Strategy<Value = VectorFieldId> {
    (0..11usize).prop_map(|k| VectorFieldId::ALL[k])
}

fn scalar_poly(seed: u64, degree: usize) -> PolyField<i64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PolyField::<i64>::random(&mut rng, 0, &[], 1, degree, 5, false)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn frame_is_m_orthonormal(t in -3.0..3.0f64, x in spatial()) {
        let f = null_frame_at(&Point::at(t, x)).unwrap();
        let vs = [FrameVector::L, FrameVector::Lbar, FrameVector::E1, FrameVector::E2];
        let want = |a: FrameVector, b: FrameVector| match (a, b) {
            (FrameVector::L, FrameVector::Lbar) | (FrameVector::Lbar, FrameVector::L) => -2.0,
            (FrameVector::E1, FrameVector::E1) | (FrameVector::E2, FrameVector::E2) => 1.0,
            _ => 0.0,
        };
        for &a in &vs {
            for &b in &vs {
                let d = mdot(f.vector(a), f.vector(b));
                prop_assert!((d - want(a, b)).abs() <= 1e-12, "{a:?} {b:?} {d}");
            }
        }
    }

    #[test]
    fn l_and_lbar_combine_to_coordinate_fields(t in -3.0..3.0f64, x in spatial()) {
        let f = null_frame_at(&Point::at(t, x)).unwrap();
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        prop_assert_eq!(f.l[0] + f.lbar[0], 2.0);
        for i in 1..4 {
            prop_assert_eq!(f.l[i] + f.lbar[i], 0.0);
            prop_assert!((f.l[i] - f.lbar[i] - 2.0 * x[i - 1] / r).abs() <= 1e-15);
        }
    }

    #[test]
    fn sphere_projector_is_chart_independent(t in -3.0..3.0f64, x in spatial()) {
        // Σ e_A e_A equals the tangential projector whichever chart is active
        let f = null_frame_at(&Point::at(t, x)).unwrap();
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        for i in 0..3 {
            for j in 0..3 {
                let p: f64 = f.e.iter().map(|e| e[i + 1] * e[j + 1]).sum();
                let want = if i == j { 1.0 } else { 0.0 } - x[i] * x[j] / (r * r);
                prop_assert!((p - want).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn charts_agree_across_the_cap_boundary(phi in 0.0..6.28f64, s in -1e-3..1e-3f64, t in 0.5..2.0f64) {
        let z = POLAR_CAP + s;
        let rho = (1.0 - z * z).sqrt();
        let x = [rho * phi.cos(), rho * phi.sin(), z];
        let f = null_frame_at(&Point::at(t, x)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let p: f64 = f.e.iter().map(|e| e[i + 1] * e[j + 1]).sum();
                let want = if i == j { 1.0 } else { 0.0 } - x[i] * x[j];
                prop_assert!((p - want).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn frame_components_are_multilinear(
        t in -3.0..3.0f64,
        x in spatial(),
        a in -2.0..2.0f64,
        b in -2.0..2.0f64,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rand_matrix = || -> [[f64; 4]; 4] {
            std::array::from_fn(|_| std::array::from_fn(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)))
        };
        let tm = CoordTensor::matrix(rand_matrix(), Variance::Co);
        let sm = CoordTensor::matrix(rand_matrix(), Variance::Co);
        let f = null_frame_at(&Point::at(t, x)).unwrap();
        let vecs = [*f.vector(FrameVector::L), *f.vector(FrameVector::E2)];
        let lhs = tm.scale(a).add(&sm.scale(b)).frame_component(&vecs).unwrap();
        let ct = tm.frame_component(&vecs).unwrap();
        let cs = sm.frame_component(&vecs).unwrap();
        for k in 0..lhs.len() {
            prop_assert!((lhs[k] - (a * ct[k] + b * cs[k])).abs() <= 1e-12);
        }
    }

    #[test]
    fn mixed_partials_commute(seed in any::<u64>(), mu in 0..4usize, nu in 0..4usize) {
        let f = scalar_poly(seed, 4);
        prop_assert!(f.partial(mu).partial(nu).sub(&f.partial(nu).partial(mu)).is_zero());
    }

    #[test]
    fn lie_derivative_obeys_leibniz(seed in any::<u64>(), z in generator()) {
        let f = scalar_poly(seed, 3);
        let g = scalar_poly(seed ^ 0xabcdef, 2);
        let fg = f.mul_elem(&g.components()[0]);
        let lhs = lie_derivative(z, &fg, &());
        let rhs = lie_derivative(z, &f, &()).mul_elem(&g.components()[0])
            .add(&lie_derivative(z, &g, &()).mul_elem(&f.components()[0]));
        prop_assert!(lhs.sub(&rhs).is_zero());
    }

    #[test]
    fn lie_derivative_commutes_with_gradient(seed in any::<u64>(), z in generator()) {
        let f = scalar_poly(seed, 4);
        let a = lie_derivative(z, &f.gradient(), &());
        let b = lie_derivative(z, &f, &()).gradient();
        prop_assert!(a.sub(&b).is_zero());
    }

    #[test]
    fn jacobi_identity(x in generator(), y in generator(), z in generator()) {
        prop_assert_eq!(jacobi_defect(x, y, z), AffineField { b: [0; 4], a: [[0; 4]; 4] });
    }

    #[test]
    fn pairing_satisfies_cauchy_schwarz(seed in any::<u64>(), channels in 1..4usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grad: Vec<[f64; 4]> = (0..channels)
            .map(|_| std::array::from_fn(|_| rand::Rng::gen_range(&mut rng, -3.0..3.0)))
            .collect();
        let g = gram(&grad);
        for a in 0..4 {
            for b in 0..4 {
                prop_assert!(g[a][b] * g[a][b] <= g[a][a] * g[b][b] * (1.0 + 1e-12) + 1e-300);
            }
        }
    }

    #[test]
    fn weight_branch_identities(gamma in 0.01..3.0f64, mu in -3.0..-0.01f64, q in -100.0..100.0f64) {
        prop_assume!(q != 0.0);
        let p = WeightParams::new(gamma, mu).unwrap();
        let (w, wh, wt) = (weights::w(q, &p), weights::w_hat(q, &p), weights::w_tilde(q, &p));
        prop_assert!(w > 0.0 && wh > 0.0 && wt > 0.0);
        prop_assert!(w <= wt && wt <= 2.0 * w);
        if q > 0.0 {
            prop_assert_eq!(w, wh);
        }
        let ratio = weights::w_tilde_prime(q, &p).unwrap() / weights::w_hat_prime(q, &p).unwrap();
        prop_assert!((ratio - 1.0).abs() <= 1e-12 || (ratio - 2.0).abs() <= 1e-12, "{ratio}");
        let (lo, hi) = p.log_slope_bounds();
        let slope = weights::w_hat_prime(q, &p).unwrap() * (1.0 + q.abs()) / wh;
        prop_assert!(slope >= lo * (1.0 - 1e-12) && slope <= hi * (1.0 + 1e-12));
    }

    #[test]
    fn weight_derivatives_reject_the_kink(gamma in 0.01..3.0f64, mu in -3.0..-0.01f64) {
        let p = WeightParams::new(gamma, mu).unwrap();
        for kind in [WeightKind::W, WeightKind::WHat, WeightKind::WTilde] {
            prop_assert!(weights::weight_prime(kind, 0.0, &p).is_err());
        }
    }

    #[test]
    fn norm_equivalence_brackets_the_energy_form(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut h = [[0.0; 4]; 4];
        for a in 0..4 {
            for b in a..4 {
                let v: f64 = rand::Rng::gen_range(&mut rng, -0.075..0.075);
                h[a][b] = v;
                h[b][a] = v;
            }
        }
        let (lo, hi) = norm_equivalence_bounds(&h);
        prop_assert!(lo > 0.0 && hi.is_finite());
        let xi: [f64; 4] = std::array::from_fn(|_| rand::Rng::gen_range(&mut rng, -2.0..2.0));
        let mut form = (1.0 - h[0][0]) * xi[0] * xi[0];
        for i in 1..4 {
            for j in 1..4 {
                form += (if i == j { 1.0 } else { 0.0 } + h[i][j]) * xi[i] * xi[j];
            }
        }
        let n2: f64 = xi.iter().map(|v| v * v).sum();
        prop_assert!(form >= lo * n2 - 1e-12 && form <= hi * n2 + 1e-12);
    }

    #[test]
    fn tangential_density_is_nonnegative(seed in any::<u64>(), x in spatial()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grad: Vec<[f64; 4]> = (0..2)
            .map(|_| std::array::from_fn(|_| rand::Rng::gen_range(&mut rng, -3.0..3.0)))
            .collect();
        prop_assert!(tangential_density(&grad, &x).unwrap() >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn grid_derivative_is_exact_on_cubics(c in proptest::array::uniform4(-2.0..2.0f64), axis in 1..4usize) {
        let grid = Grid::new(8, 1.5).unwrap();
        let f = move |x: [f64; 3]| c[0] + c[1] * x[0] * x[1] + c[2] * x[2].powi(3) + c[3] * x[0] * x[1] * x[2];
        let df = move |x: [f64; 3]| match axis {
            1 => c[1] * x[1] + c[3] * x[1] * x[2],
            2 => c[1] * x[0] + c[3] * x[0] * x[2],
            _ => 3.0 * c[2] * x[2] * x[2] + c[3] * x[0] * x[1],
        };
        let field = GridField::<f64>::from_fn(grid, 0, 1, 0.0, |_, _, x| f(x));
        let d = field.partial(axis).unwrap();
        let mut worst: f64 = 0.0;
        grid.for_each_interior(|o, x| worst = worst.max((d.comp(0, 0)[o] - df(x)).abs()));
        prop_assert!(worst <= 1e-10, "{worst}");
    }
}

//! Property tests for the structural invariants: adjointness, antisymmetry
//! closure, seminorm norm-axioms, projection laws, and mollifier
//! non-expansiveness.

use fracbv::denoise::{project_feasible, DualVariable};
use fracbv::gagliardo::{self, NonlocalField, PairKernel};
use fracbv::grid::{Grid, ScalarField};
use fracbv::riesz::{
    riesz_divergence, riesz_gradient, Backend, RieszVectorField, SpectralConfig,
};
use proptest::prelude::*;

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn riesz_adjointness_holds(
        g_vals in values(24),
        f_vals in values(24),
        alpha in 0.1f64..0.95,
    ) {
        let grid = Grid::line(-1.0, 2.0, 24).unwrap();
        let g = ScalarField::new(grid.clone(), g_vals, vec![true; 24]).unwrap();
        let f = RieszVectorField::new(grid, vec![f_vals]).unwrap();
        let cfg = SpectralConfig::padded(2).unwrap();
        let grad = riesz_gradient(&g, alpha, Backend::Adjoint, &cfg).unwrap();
        let div = riesz_divergence(&f, alpha, Backend::Adjoint, &cfg).unwrap();
        let lhs = f.inner(&grad);
        let rhs = div.inner(&g);
        let scale = f.lq_norm(2.0) * grad.lq_norm(2.0) + div.lp_norm(2.0) * g.lp_norm(2.0);
        prop_assert!((lhs + rhs).abs() <= 1e-12 * scale.max(1e-30));
    }

    #[test]
    fn pair_gradient_and_scalar_product_stay_antisymmetric(
        f_vals in values(12),
        s_vals in values(12),
        alpha in 0.1f64..0.9,
    ) {
        let grid = Grid::line(0.0, 1.0, 12).unwrap();
        let f = ScalarField::new(grid.clone(), f_vals, vec![true; 12]).unwrap();
        let s = ScalarField::new(grid.clone(), s_vals, vec![true; 12]).unwrap();
        let grad = gagliardo::gradient(&f, alpha).unwrap();
        let prod = gagliardo::scalar_product(&s, &grad).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                if i != j {
                    prop_assert!((grad.get(i, j) + grad.get(j, i)).abs() <= 1e-12);
                    prop_assert!((prod.get(i, j) + prod.get(j, i)).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn symmetric_fields_have_zero_divergence(vals in values(16), alpha in 0.1f64..0.9) {
        let grid = Grid::line(0.0, 1.0, 10).unwrap();
        // a pair function symmetric under (p, q) swap
        let pool = vals.clone();
        let f = NonlocalField::from_pair_fn(
            grid,
            (0..10).collect(),
            move |p, q| {
                let key = ((p[0] * 9.0) as usize + (q[0] * 9.0) as usize) % pool.len();
                pool[key]
            },
            false,
        )
        .unwrap();
        let div = gagliardo::divergence(&f, alpha).unwrap();
        for v in &div.values {
            prop_assert!(v.abs() <= 1e-10);
        }
    }

    #[test]
    fn seminorm_triangle_and_homogeneity(
        f_vals in values(20),
        g_vals in values(20),
        a in -5.0f64..5.0,
    ) {
        let grid = Grid::line(-1.0, 1.0, 20).unwrap();
        let mask = vec![true; 20];
        let f = ScalarField::new(grid.clone(), f_vals.clone(), mask.clone()).unwrap();
        let g = ScalarField::new(grid.clone(), g_vals.clone(), mask.clone()).unwrap();
        let sum = ScalarField::new(
            grid.clone(),
            f_vals.iter().zip(&g_vals).map(|(x, y)| x + y).collect(),
            mask.clone(),
        )
        .unwrap();
        let scaled = ScalarField::new(
            grid,
            f_vals.iter().map(|x| a * x).collect(),
            mask.clone(),
        )
        .unwrap();
        let alpha = 0.5;
        let sf = gagliardo::seminorm(&f, &mask, alpha).unwrap();
        let sg = gagliardo::seminorm(&g, &mask, alpha).unwrap();
        let ssum = gagliardo::seminorm(&sum, &mask, alpha).unwrap();
        let sscaled = gagliardo::seminorm(&scaled, &mask, alpha).unwrap();
        prop_assert!(ssum <= sf + sg + 1e-10 * (sf + sg + 1.0));
        prop_assert!((sscaled - a.abs() * sf).abs() <= 1e-10 * (1.0 + sf * a.abs()));
    }

    #[test]
    fn projection_is_idempotent_and_feasible(
        vals_x in values(18),
        vals_y in values(18),
        beta in 0.01f64..3.0,
    ) {
        let grid = Grid::rect((0.0, 1.0), (0.0, 1.0), 6, 3).unwrap();
        let f = RieszVectorField::new(grid, vec![vals_x, vals_y]).unwrap();
        let mut phi = DualVariable::Riesz(f);
        project_feasible(&mut phi, beta);
        prop_assert!(phi.is_feasible(beta));
        let once = match &phi {
            DualVariable::Riesz(f) => f.clone(),
            _ => unreachable!(),
        };
        project_feasible(&mut phi, beta);
        if let DualVariable::Riesz(f) = &phi {
            prop_assert_eq!(&f.comps, &once.comps);
        }
    }

    #[test]
    fn mollification_never_expands_sup(vals in values(120), eps in 0.05f64..0.4) {
        let grid = Grid::line(-1.0, 1.0, 120).unwrap();
        let f = ScalarField::new(grid, vals, vec![true; 120]).unwrap();
        let m = fracbv::approx::mollify(&f, eps).unwrap();
        prop_assert!(m.linf_norm() <= f.linf_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn pair_kernel_gradient_matches_free_function(
        f_vals in values(14),
        alpha in 0.15f64..0.85,
    ) {
        let grid = Grid::line(0.0, 2.0, 14).unwrap();
        let f = ScalarField::new(grid.clone(), f_vals, vec![true; 14]).unwrap();
        let free = gagliardo::gradient(&f, alpha).unwrap();
        let kern = PairKernel::new(&grid, &NonlocalField::full_support(&grid), alpha).unwrap();
        let via_kernel = kern.gradient(&f).unwrap();
        for i in 0..14 {
            for j in 0..14 {
                if i != j {
                    prop_assert!((free.get(i, j) - via_kernel.get(i, j)).abs() <= 1e-13);
                }
            }
        }
    }
}

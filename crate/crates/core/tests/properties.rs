use std::sync::Arc;

use normsol_core::functional::{
    evaluate, fiber_derivative, fiber_energy, lagrange_multipliers, resample_scaled, residual, Fiber,
};
use normsol_core::grid::{grad_norm_sq, integrate, mass, radial_laplacian, RadialFunction};
use normsol_core::manifold::{
    fiber_maximizer_with, project_mass, project_pohozaev_with, FiberSettings, MassConstraint,
};
use normsol_core::solver::{solve_ground_state, SolverConfig};
use normsol_core::verify::{check_bounds, gn_check, random_profiles, tm_integral};
use normsol_core::{NonlinearityModel, RadialGrid, Spacing, StatePair};
use proptest::prelude::*;

fn uniform(radius: f64, n: usize) -> Arc<RadialGrid> {
    RadialGrid::new(radius, n, Spacing::Uniform).unwrap()
}

fn bump_pair(grid: &Arc<RadialGrid>, a1: f64, b1: f64, a2: f64, b2: f64) -> StatePair {
    StatePair::from_fns(grid, |r| a1 * (-b1 * r * r).exp(), |r| a2 * (-b2 * r * r).exp()).unwrap()
}

fn models() -> impl Strategy<Value = NonlinearityModel> {
    prop_oneof![
        (0.2..5.0f64, 4.5..9.0f64).prop_map(|(mu, s)| NonlinearityModel::pure_power(mu, s).unwrap()),
        (0.2..5.0f64, 4.5..9.0f64, 0.3..2.0f64)
            .prop_map(|(mu, s, g)| NonlinearityModel::coupled_exp(mu, s, g).unwrap()),
        (0.2..5.0f64, 4.5..9.0f64, 0.3..2.0f64)
            .prop_map(|(mu, s, g)| NonlinearityModel::additive_exp(mu, s, g).unwrap()),
    ]
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn quadrature_is_linear(alpha in -3.0..3.0f64, beta in -3.0..3.0f64, c in 0.2..3.0f64, d in 0.2..3.0f64) {
        let grid = uniform(12.0, 512);
        let f = RadialFunction::from_fn(&grid, |r| (-c * r * r).exp()).unwrap();
        let g = RadialFunction::from_fn(&grid, |r| r * (-d * r).exp()).unwrap();
        let combo = RadialFunction::from_fn(&grid, |r| alpha * (-c * r * r).exp() + beta * r * (-d * r).exp()).unwrap();
        let lhs = integrate(&combo);
        let rhs = alpha * integrate(&f) + beta * integrate(&g);
        prop_assert!((lhs - rhs).abs() <= 1e-13 * (1.0 + integrate(&f).abs() + integrate(&g).abs()) * (1.0 + alpha.abs() + beta.abs()));
    }

    #[test]
    fn gradient_matches_finite_differences(model in models(), u in -1.5..1.5f64, v in -1.5..1.5f64) {
        prop_assume!(u.abs() > 0.05 && v.abs() > 0.05);
        let h = 1e-5;
        let (hu, hv) = model.eval_grad_h(u, v).unwrap();
        let fu = (model.eval_h(u + h, v).unwrap() - model.eval_h(u - h, v).unwrap()) / (2.0 * h);
        let fv = (model.eval_h(u, v + h).unwrap() - model.eval_h(u, v - h).unwrap()) / (2.0 * h);
        let scale = hu.abs().max(hv.abs()).max(model.eval_h(u, v).unwrap()).max(1e-8);
        prop_assert!((hu - fu).abs() <= 1e-6 * scale, "{hu} vs {fu}");
        prop_assert!((hv - fv).abs() <= 1e-6 * scale, "{hv} vs {fv}");
    }

    #[test]
    fn tilde_matches_unfactored_form(model in models(), u in -2.0..2.0f64, v in -2.0..2.0f64) {
        prop_assume!(model.gamma0 * (u * u + v * v) <= 30.0);
        let (hu, hv) = model.eval_grad_h(u, v).unwrap();
        let h = model.eval_h(u, v).unwrap();
        let direct = u * hu + v * hv - 2.0 * h;
        let tilde = model.eval_tilde_h(u, v).unwrap();
        prop_assert!((tilde - direct).abs() <= 1e-10 * direct.abs().max(h), "{tilde} vs {direct}");
    }

    #[test]
    fn pure_power_homogeneity(mu in 0.1..10.0f64, sigma in 4.1..10.0f64, u in -3.0..3.0f64, v in -3.0..3.0f64) {
        let m = NonlinearityModel::pure_power(mu, sigma).unwrap();
        let h = m.eval_h(u, v).unwrap();
        prop_assert_eq!(m.eval_pairing(u, v).unwrap(), sigma * h);
        prop_assert_eq!(m.eval_tilde_h(u, v).unwrap(), (sigma - 2.0) * h);
    }

    #[test]
    fn multiplier_residual_is_orthogonal(a1 in 0.5..2.0f64, b1 in 0.25..1.0f64, a2 in 0.5..2.0f64, b2 in 0.25..1.0f64, model in models()) {
        let grid = uniform(12.0, 512);
        let w = bump_pair(&grid, a1, b1, a2, b2);
        prop_assume!(evaluate(&w, &model).is_ok());
        let res = residual(&w, &model).unwrap();
        let (l1, l2) = lagrange_multipliers(&w, &model).unwrap();
        prop_assert_eq!((l1, l2), (res.lambda1, res.lambda2));
        let dot = |x: &RadialFunction, y: &RadialFunction| {
            let xy: Vec<f64> = x.values().iter().zip(y.values()).map(|(p, q)| p * q).collect();
            grid.quadrature(&xy)
        };
        let (gu, gv) = (&res.g.u, &res.g.v);
        let nu = mass(&w.u).sqrt();
        let nv = mass(&w.v).sqrt();
        prop_assert!(dot(gu, &w.u).abs() <= 1e-8 * mass(gu).sqrt() * nu + 1e-300);
        prop_assert!(dot(gv, &w.v).abs() <= 1e-8 * mass(gv).sqrt() * nv + 1e-300);
    }

    #[test]
    fn functional_values_are_consistent(a1 in 0.5..2.0f64, b1 in 0.25..1.0f64, a2 in 0.5..2.0f64, b2 in 0.25..1.0f64, model in models()) {
        let grid = uniform(12.0, 512);
        let w = bump_pair(&grid, a1, b1, a2, b2);
        let Ok(f) = evaluate(&w, &model) else { return Ok(()) };
        prop_assert!((f.energy - (0.5 * f.kinetic - f.potential)).abs() <= 1e-12 * (f.kinetic + f.potential));
        prop_assert!((f.pohozaev - (f.kinetic - (f.nl_pairing - 2.0 * f.potential))).abs() <= 1e-10 * (f.kinetic + f.nl_pairing));
        prop_assert!((f.kinetic - w.kinetic()).abs() <= 1e-14 * f.kinetic);
    }

    #[test]
    fn mass_projection_is_exact(a in 0.2..3.0f64, b in 0.2..3.0f64, a1 in 0.1..5.0f64, b1 in 0.1..2.0f64, a2 in 0.1..5.0f64, b2 in 0.1..2.0f64) {
        let grid = uniform(12.0, 256);
        let w = bump_pair(&grid, a1, b1, a2, b2);
        let c = MassConstraint::new(a, b, 1.0).unwrap();
        let p = project_mass(&w, &c).unwrap();
        let (ma, mb) = p.masses();
        prop_assert!(rel(ma, a * a) <= 1e-10 && rel(mb, b * b) <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn fiber_maximizer_is_a_maximum(a1 in 0.5..2.0f64, b1 in 0.25..1.0f64, a2 in 0.5..2.0f64, b2 in 0.25..1.0f64, exp in any::<bool>()) {
        let grid = uniform(12.0, 1024);
        let w = bump_pair(&grid, a1, b1, a2, b2);
        let model = if exp {
            NonlinearityModel::coupled_exp(1.0, 6.0, 1.0).unwrap()
        } else {
            NonlinearityModel::pure_power(1.0, 6.0).unwrap()
        };
        let max = fiber_maximizer_with(&w, &model, &FiberSettings::default()).unwrap();
        let fiber = Fiber::new(&w);
        let top = fiber.energy(&model, max.s_star).unwrap();
        for delta in [1e-2, 1e-1, 1.0] {
            for s in [max.s_star - delta, max.s_star + delta] {
                if let Ok(val) = fiber.energy(&model, s) {
                    prop_assert!(top >= val, "s*={} s={} {} < {}", max.s_star, s, top, val);
                }
            }
        }
        prop_assert!(max.curvature < 0.0);
    }

    #[test]
    fn pohozaev_projection_is_idempotent(a1 in 0.5..2.0f64, b1 in 0.25..1.0f64, a2 in 0.5..2.0f64, b2 in 0.25..1.0f64) {
        let grid = RadialGrid::new(40.0, 2048, Spacing::Graded { stretch: 3.0 }).unwrap();
        let w = bump_pair(&grid, a1, b1, a2, b2);
        let model = NonlinearityModel::pure_power(1.0, 6.0).unwrap();
        let settings = FiberSettings::default();
        let once = project_pohozaev_with(&w, &model, &settings).unwrap();
        let twice = project_pohozaev_with(&once.state, &model, &settings).unwrap();
        let diff = StatePair::new(
            RadialFunction::new(grid.clone(), once.state.u.values().iter().zip(twice.state.u.values()).map(|(p, q)| p - q).collect()).unwrap(),
            RadialFunction::new(grid.clone(), once.state.v.values().iter().zip(twice.state.v.values()).map(|(p, q)| p - q).collect()).unwrap(),
        ).unwrap();
        let (du, dv) = diff.masses();
        prop_assert!((du + dv).sqrt() <= settings.tol_proj, "{}", (du + dv).sqrt());
        prop_assert!(twice.s_star.abs() <= 1e-4);
        let (m1, m2) = once.state.masses();
        let (n1, n2) = w.masses();
        prop_assert!(rel(m1, n1) <= 1e-10 && rel(m2, n2) <= 1e-10);
    }

    #[test]
    fn dilation_scales_lebesgue_norms(s in -2.0..2.0f64, c in 0.3..2.0f64) {
        let grid = RadialGrid::new(40.0, 2048, Spacing::Graded { stretch: 3.0 }).unwrap();
        let w = StatePair::from_fns(&grid, |r| (-c * r * r).exp(), |r| (-c * r * r / 2.0).exp()).unwrap();
        let scaled = resample_scaled(&w, s).unwrap();
        for xi in [2.0, 4.0, 6.0] {
            let norm = |f: &RadialFunction| integrate(&RadialFunction::new(grid.clone(), f.values().iter().map(|x| x.abs().powf(xi)).collect()).unwrap());
            let expect = ((xi - 2.0) * s).exp() * norm(&w.u);
            prop_assert!(rel(norm(&scaled.u), expect) <= 1e-3, "xi={} s={}", xi, s);
        }
        prop_assert!(rel(grad_norm_sq(&scaled.v), (2.0 * s).exp() * grad_norm_sq(&w.v)) <= 2e-3);
    }

    #[test]
    fn tm_integral_is_monotone_in_gamma(seed in 0u64..1000, g1 in 0.1..2.0f64, dg in 0.0..2.0f64) {
        let grid = uniform(12.0, 512);
        let prof = random_profiles(&grid, 2, seed).unwrap();
        let w = StatePair::new(prof[0].clone(), prof[1].clone()).unwrap();
        let lo = tm_integral(&w, g1).unwrap();
        let hi = tm_integral(&w, g1 + dg).unwrap();
        prop_assert!(lo <= hi);
    }
}

#[test]
fn refinement_errors_decrease_beyond_256_nodes() {
    let exact_mass = std::f64::consts::PI;
    let exact_kin = std::f64::consts::PI;
    let mut last = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for n in [256, 512, 1024, 2048] {
        let grid = uniform(12.0, n);
        let u = RadialFunction::from_fn(&grid, |r| (-r * r / 2.0).exp()).unwrap();
        let em = rel(mass(&u), exact_mass);
        let ek = rel(grad_norm_sq(&u), exact_kin);
        let lap = radial_laplacian(&u);
        let el = grid
            .nodes()
            .iter()
            .zip(lap.values())
            .take(n - 1)
            .skip(1)
            .map(|(r, l)| (l - (r * r - 2.0) * (-r * r / 2.0).exp()).abs())
            .fold(0.0, f64::max);
        assert!(em <= last.0 || em < 1e-14, "mass {n}: {em}");
        assert!(ek <= last.1 || ek < 1e-13, "kinetic {n}: {ek}");
        assert!(el < last.2, "laplacian {n}: {el}");
        last = (em, ek, el);
    }
}

#[test]
fn discrete_integration_by_parts() {
    // compactly supported smooth bump on [0, 3)
    let bump = |r: f64| if r < 3.0 { (-1.0 / (1.0 - (r / 3.0).powi(2))).exp() } else { 0.0 };
    for n in [256, 512, 1024, 2048] {
        let grid = uniform(6.0, n);
        let u = RadialFunction::from_fn(&grid, bump).unwrap();
        let lap = radial_laplacian(&u);
        let prod = RadialFunction::new(
            grid.clone(),
            lap.values().iter().zip(u.values()).map(|(l, x)| -l * x).collect(),
        )
        .unwrap();
        let gap = (integrate(&prod) - grad_norm_sq(&u)).abs();
        assert!(gap <= 10.0 * grid.max_spacing() * grad_norm_sq(&u), "n={n}: {gap}");
    }
}

#[test]
fn fiber_limits() {
    let grid = uniform(12.0, 1024);
    let w = bump_pair(&grid, 1.0, 0.5, 1.0, 0.5);
    for model in [
        NonlinearityModel::pure_power(1.0, 6.0).unwrap(),
        NonlinearityModel::coupled_exp(1.0, 6.0, 1.0).unwrap(),
    ] {
        let mut prev = f64::INFINITY;
        for k in 0..20 {
            let s = -5.0 - 0.5 * k as f64;
            let e = fiber_energy(&w, &model, s).unwrap().abs();
            assert!(e < prev);
            prev = e;
        }
        let s_neg = (0..400)
            .map(|k| -4.0 + 0.02 * k as f64)
            .find(|&s| fiber_energy(&w, &model, s).unwrap() < 0.0)
            .unwrap();
        let mut s = s_neg;
        while let (Ok(a), Ok(b)) = (fiber_energy(&w, &model, s), fiber_energy(&w, &model, s + 1.0)) {
            assert!(b < a && a < 0.0, "s={s}");
            assert!(fiber_derivative(&w, &model, s).unwrap() < 0.0);
            s += 0.25;
            if s > 6.0 {
                break;
            }
        }
    }
}

#[test]
fn gagliardo_nirenberg_ratio_stays_below_cap() {
    let grid = uniform(12.0, 1024);
    for (k, u) in random_profiles(&grid, 100, 11).unwrap().iter().enumerate() {
        let ratio = gn_check(u, 4.0).unwrap();
        assert!(ratio <= 1.0, "profile {k}: ratio {ratio}, values {:?}", u.values());
    }
}

#[test]
fn bound_checks_are_reproducible() {
    let model = NonlinearityModel::coupled_exp(50.0, 6.0, 1.0).unwrap();
    let mut c = SolverConfig::new(MassConstraint::new(1.0, 1.0, 1.0).unwrap(), model);
    c.grid.radius = 40.0;
    c.grid.spacing = Spacing::Graded { stretch: 3.0 };
    c.n_starts = 1;
    let r = solve_ground_state(&c).unwrap();
    let a = check_bounds(&r, &c).unwrap();
    let b = check_bounds(&r, &c).unwrap();
    assert_eq!(a, b);
    for (x, y) in a.checks.iter().zip(&b.checks) {
        assert_eq!(x.lhs.to_bits(), y.lhs.to_bits());
        assert_eq!(x.rhs.to_bits(), y.rhs.to_bits());
    }
    assert!(a.passed());
}

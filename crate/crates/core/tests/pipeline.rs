use thermoform::dimension::geometric_pressure;
use thermoform::operator::DEFAULT_TOL;
use thermoform::pressure::{periodic_orbit_pressure, uniform_grid, Equilibrium};
use thermoform::*;

fn perturbed() -> (MapModel, Model) {
    let map = build_perturbed_cookie_cutter(0.5).unwrap();
    (map.clone(), Model::Map(map))
}

#[test]
fn json_configured_potential_matches_builder() {
    let model: Model = serde_json::from_str(r#"{"kind":"perturbed","eps":0.5}"#).unwrap();
    let phi: PotentialSpec = serde_json::from_str(
        r#"{"representation":{"kind":"closed_form","expr":{"op":"scale","factor":-0.6,"arg":{"op":"log_abs_derivative"}}}}"#,
    )
    .unwrap();
    let (map, _) = perturbed();
    let direct = pressure(
        &Model::Map(map.clone()),
        &geometric_potential(&map, 0.6),
        &PressureOptions::at_depth(8),
    )
    .unwrap()
    .value;
    let parsed = pressure(&model, &phi, &PressureOptions::at_depth(8)).unwrap().value;
    assert!((direct - parsed).abs() < 1e-14);
}

#[test]
fn spectral_and_periodic_pressures_agree() {
    let (map, model) = perturbed();
    for t in [0.3, 0.6, 1.0] {
        let phi = geometric_potential(&map, t);
        let spec = pressure(&model, &phi, &PressureOptions::at_depth(10)).unwrap();
        let per = periodic_orbit_pressure(&model, &phi, 12).unwrap();
        assert!((spec.value - per).abs() < 1e-6, "t={t}: {} vs {per}", spec.value);
        assert!(spec.bracket[0] <= spec.value && spec.value <= spec.bracket[1]);
    }
}

#[test]
fn bowen_root_zeroes_pressure_and_lies_in_bounds() {
    let (map, _) = perturbed();
    let r = bowen_dimension(&map, 1e-12, 10).unwrap();
    assert!(geometric_pressure(&map, r.t_star, 10).unwrap().abs() < 1e-10);
    assert!(r.bounds[0] <= r.t_star && r.t_star <= r.bounds[1]);
    assert!(r.quadratic_tail);
}

#[test]
fn sampled_birkhoff_average_matches_gibbs_integral() {
    let (map, model) = perturbed();
    let phi = geometric_potential(&map, 0.6);
    let g = PotentialSpec::closed_form(Expr::sin_mode(1.0));
    let eq = Equilibrium::new(&model, &phi, 8, DEFAULT_TOL).unwrap();
    let mean = eq.integrate(&model, &g).unwrap();
    let var = pressure_variance(&model, &phi, &g, 8, 12).unwrap().sigma2;
    let opts = SampleOptions {
        observables: vec![g],
        points: false,
    };
    let n = 200_000;
    let s = sample(&model, &eq, n, 1, 2024, &opts).unwrap();
    let avg = s[0].birkhoff[0] / n as f64;
    assert!((avg - mean).abs() <= 4.0 * (var / n as f64).sqrt(), "{avg} vs {mean}");
}

#[test]
fn entropy_pressure_and_lyapunov_close_the_variational_loop() {
    let (map, model) = perturbed();
    let phi = geometric_potential(&map, 0.6);
    let h = entropy(&model, &phi, 10).unwrap();
    let eq = Equilibrium::new(&model, &phi, 10, DEFAULT_TOL).unwrap();
    assert!((h + eq.integrate(&model, &phi).unwrap() - eq.pressure()).abs() < 1e-10);
    let ld = local_dimension(&model, &phi, 10).unwrap();
    assert!((ld.entropy - h).abs() < 1e-10);
}

#[test]
fn coboundary_solution_reproduces_orbit_sums() {
    let (_, model) = perturbed();
    let phi = PotentialSpec::closed_form(Expr::sin_mode(1.0).coboundary_of());
    let sol = solve_coboundary(&model, &phi, &CoboundaryOptions::default()).unwrap();
    assert!(sol.residual < 1e-3);
    let rep = periodic_obstruction(&model, &phi, 10, 1e-9).unwrap();
    assert_eq!(rep.verdict, Verdict::CoboundaryCandidate);
    let other = periodic_obstruction(&model, &PotentialSpec::closed_form(Expr::sin_mode(1.0)), 10, 1e-9).unwrap();
    assert_eq!(other.verdict, Verdict::Obstructed);
}

#[test]
fn fluctuation_pipeline_emits_tables() {
    let shift = SubshiftSpec::full_shift(3);
    let w = vec![vec![0.0, 0.4, -0.2], vec![0.1, 0.0, 0.5], vec![0.3, -0.1, 0.2]];
    let pair = build_pair_symbolic(&shift, &w).unwrap();
    let model = Model::Shift(shift);
    let gc = gc_symmetry(&pair, &model, &uniform_grid(-3.0, 2.0, 101), None, 2).unwrap();
    assert!(gc.lambda_reflection_defect < 1e-9);
    let tables = gc.tables();
    assert_eq!(tables[0].rows.len(), 101);
    let csv = tables[0].to_csv_string().unwrap();
    assert!(csv.starts_with("t,lambda\n"));
    let json = serde_json::to_string(&gc).unwrap();
    let back: GCReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, gc);
}

#[test]
fn mixing_is_controlled_by_the_gap() {
    let (map, model) = perturbed();
    let phi = geometric_potential(&map, 0.6);
    let w = discretize(&model, &phi, 8, EvalMode::Midpoint).unwrap();
    let triple = perron(&w, DEFAULT_TOL, 200_000).unwrap();
    let uniform = vec![1.0; w.len()];
    let m = mixing_rate(&w, &triple, &uniform, 60).unwrap();
    assert!(m.distances.windows(2).all(|d| d[1] <= d[0] + 1e-15));
    assert!(m.fitted_rate <= m.gap + 0.05);
}

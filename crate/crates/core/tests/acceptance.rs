//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line; the
//! process exits non-zero if any criterion fails.

use std::f64::consts::LN_2;
use std::time::{Duration, Instant};

use thermoform::dimension::{bowen_dimension_from, default_t_grid};
use thermoform::livsic::MAX_OBSTRUCTION_PERIOD;
use thermoform::maps::log_derivative;
use thermoform::operator::{gibbs_constants, DEFAULT_MAX_ITER, DEFAULT_TOL};
use thermoform::pressure::{periodic_orbit_pressure, uniform_grid, Equilibrium};
use thermoform::*;

struct Check {
    notes: Vec<String>,
    failures: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Check {
            notes: Vec::new(),
            failures: Vec::new(),
        }
    }

    fn expect(&mut self, ok: bool, what: String) {
        if ok {
            self.notes.push(what);
        } else {
            self.failures.push(what);
        }
    }

    fn note(&mut self, what: String) {
        self.notes.push(what);
    }
}

type Outcome = std::result::Result<Check, Error>;

fn run(id: usize, name: &str, limit: Option<Duration>, f: fn() -> Outcome) -> bool {
    let start = Instant::now();
    let result = f();
    let elapsed = start.elapsed();
    let (ok, detail) = match result {
        Ok(mut c) => {
            if let Some(l) = limit {
                c.expect(elapsed < l, format!("runtime {:.2?} < {:?}", elapsed, l));
            }
            let ok = c.failures.is_empty();
            let detail = if ok {
                c.notes.join("; ")
            } else {
                format!("failed: {}", c.failures.join("; "))
            };
            (ok, detail)
        }
        Err(e) => (false, format!("error: {e}")),
    };
    println!(
        "criterion {id} [{name}]: {} ({:.2?}) {detail}",
        if ok { "PASS" } else { "FAIL" },
        elapsed
    );
    ok
}

fn affine_dimension() -> Outcome {
    let mut c = Check::new();
    let map = build_cookie_cutter();
    let target = LN_2 / 3f64.ln();
    let r = bowen_dimension(&map, 1e-12, 4)?;
    c.expect(
        (r.t_star - target).abs() <= 1e-9,
        format!("t* = {:.12} (|err| = {:.1e})", r.t_star, (r.t_star - target).abs()),
    );
    let (mut steps, mut err) = (0, 0.0f64);
    for t0 in uniform_grid(0.0, 2.0, 21) {
        let s = bowen_dimension_from(&map, t0, 1e-12, 4)?;
        steps = steps.max(s.newton_steps());
        err = err.max((s.t_star - target).abs());
    }
    c.expect(
        steps <= 1 && err <= 1e-9,
        format!("over t0 in [0,2]: max Newton steps {steps}, max err {err:.1e}"),
    );
    Ok(c)
}

fn perturbed_dimension() -> Outcome {
    let mut c = Check::new();
    let map = build_perturbed_cookie_cutter(0.5)?;
    let r10 = bowen_dimension(&map, 1e-12, 10)?;
    let r12 = bowen_dimension(&map, 1e-12, 12)?;
    let t = r12.t_star;
    c.expect(
        (0.5534..=0.7565).contains(&t),
        format!("t* = {t:.9} in [0.5534, 0.7565]"),
    );
    let w12 = r12.bracket[1] - r12.bracket[0];
    c.expect(w12 <= 1e-6, format!("depth-12 bracket width {w12:.2e}"));
    let d = (r10.t_star - r12.t_star).abs();
    c.expect(d <= 1e-6, format!("|t*(10) - t*(12)| = {d:.2e}"));
    let overlap = r10.bracket[0] <= r12.bracket[1] && r12.bracket[0] <= r10.bracket[1];
    c.expect(overlap, "depth-10 and depth-12 brackets overlap".into());
    let model = Model::Map(map.clone());
    let p12 = periodic_orbit_pressure(&model, &geometric_potential(&map, t), 12)?;
    c.expect(p12.abs() <= 1e-6, format!("period-12 pressure at t* = {p12:.2e}"));
    c.note(format!(
        "reference 0.6412 +/- 1e-4, discrepancy {:+.4} (informational)",
        t - 0.6412
    ));
    Ok(c)
}

fn pressure_exactness() -> Outcome {
    let mut c = Check::new();
    let full = Model::Shift(SubshiftSpec::full_shift(2));
    for k in [-1.0, 0.0, 0.37] {
        let p = pressure(&full, &PotentialSpec::constant(k), &PressureOptions::at_depth(4))?.value;
        c.expect(
            (p - LN_2 - k).abs() <= 1e-12,
            format!("P({k}) err {:.1e}", (p - LN_2 - k).abs()),
        );
    }
    let golden = Model::Shift(SubshiftSpec::golden_mean());
    let p = pressure(&golden, &PotentialSpec::constant(0.0), &PressureOptions::at_depth(6))?.value;
    let e = (p - ((1.0 + 5f64.sqrt()) / 2.0).ln()).abs();
    c.expect(e <= 1e-10, format!("golden mean err {e:.1e}"));
    Ok(c)
}

fn derivative_variance() -> Outcome {
    let mut c = Check::new();
    let map = build_perturbed_cookie_cutter(0.5)?;
    let model = Model::Map(map.clone());
    let phi = geometric_potential(&map, 0.6);
    let psi = PotentialSpec::closed_form(Expr::sin_mode(1.0));
    let depth = 10;
    let d = pressure_derivative(&model, &phi, &psi, depth)?;
    let h = 1e-4;
    let opts = PressureOptions::at_depth(depth);
    let p = |s: f64| pressure(&model, &phi.combine(1.0, &psi, s, 2), &opts).map(|r| r.value);
    let fd = (p(h)? - p(-h)?) / (2.0 * h);
    c.expect(
        (d - fd).abs() <= 1e-5,
        format!("derivative vs central difference {:.1e}", (d - fd).abs()),
    );

    let cob = PotentialSpec::closed_form(Expr::sin_mode(1.0).coboundary_of());
    let v = pressure_variance(&model, &phi, &cob, 10, 12)?;
    c.expect(v.sigma2.abs() <= 1e-8, format!("coboundary variance {:.1e}", v.sigma2));

    let full = Model::Shift(SubshiftSpec::full_shift(2));
    let bern = PotentialSpec::branch_constant(vec![(2.0f64 / 3.0).ln(), (1.0f64 / 3.0).ln()]);
    let ind = PotentialSpec::branch_constant(vec![1.0, 0.0]);
    let b = pressure_variance(&full, &bern, &ind, 2, 12)?;
    let e = (b.sigma2 - 2.0 / 9.0).abs();
    c.expect(
        e <= 1.0 / 12.0,
        format!("Bernoulli variance {:.12} (err {e:.1e})", b.sigma2),
    );
    Ok(c)
}

fn multifractal() -> Outcome {
    let mut c = Check::new();
    let grid = default_t_grid();
    let map = build_perturbed_cookie_cutter(0.5)?;
    let s = multifractal_spectrum(&map, &log_derivative(&map), &grid, 10)?;
    let zero = grid.iter().position(|t| *t == 0.0).expect("grid contains 0");
    let e0 = (s.d[zero] - s.t_star).abs();
    let em = (s.max_dimension() - s.t_star).abs();
    c.expect(
        e0 <= 1e-6 && em <= 1e-6,
        format!("D(t=0) - t* = {e0:.1e}, max D - t* = {em:.1e}"),
    );
    c.expect(
        s.is_concave(),
        format!("perturbed spectrum concave (defect {:.1e})", s.concavity_defect),
    );

    let affine = build_cookie_cutter();
    let g = PotentialSpec::branch_constant(vec![1.0, 0.0]);
    let b = multifractal_spectrum(&affine, &g, &grid, 10)?;
    let mut worst: f64 = 0.0;
    let mut covered = (f64::INFINITY, f64::NEG_INFINITY);
    for (a, d) in b.a.iter().zip(&b.d) {
        if (0.1..=0.9).contains(a) {
            let h = -a * a.ln() - (1.0 - a) * (1.0 - a).ln();
            worst = worst.max((d - h / 3f64.ln()).abs());
            covered = (covered.0.min(*a), covered.1.max(*a));
        }
    }
    c.expect(
        worst <= 1e-6 && covered.0 < 0.11 && covered.1 > 0.89,
        format!(
            "Bernoulli spectrum max err {worst:.1e} on a in [{:.3}, {:.3}]",
            covered.0, covered.1
        ),
    );
    c.expect(b.is_concave(), "Bernoulli spectrum concave".into());
    Ok(c)
}

fn livsic_suite() -> Outcome {
    let mut c = Check::new();
    let map = build_perturbed_cookie_cutter(0.5)?;
    let model = Model::Map(map.clone());
    let phi = PotentialSpec::closed_form(Expr::sin_mode(1.0).coboundary_of());
    let opts = CoboundaryOptions {
        orbit_length: 100_000,
        depth: 10,
        ..CoboundaryOptions::default()
    };
    let sol = solve_coboundary(&model, &phi, &opts)?;
    c.expect(sol.residual <= 1e-3, format!("residual {:.2e}", sol.residual));
    let holder = phi.holder(&model);
    let bound = holder_bound(1.0 / map.expansion_min(), holder.alpha, holder.norm())?.seminorm_bound;
    c.expect(
        sol.seminorm_estimate <= bound,
        format!("seminorm {:.3} <= {:.3}", sol.seminorm_estimate, bound),
    );

    let k = periodic_obstruction(&model, &PotentialSpec::constant(1.0), 8, 1e-10)?;
    c.expect(
        k.verdict == Verdict::Obstructed && k.witness.is_some(),
        "constant potential obstructed with witness".into(),
    );

    let base = PotentialSpec::closed_form(Expr::sin_mode(2.0).scaled(0.7));
    let planted = base.add(&phi, 2);
    let n = 12.min(MAX_OBSTRUCTION_PERIOD);
    let r0 = periodic_obstruction(&model, &base, n, 1e-10)?;
    let r1 = periodic_obstruction(&model, &planted, n, 1e-10)?;
    let diff = r0
        .sums
        .iter()
        .zip(&r1.sums)
        .map(|(a, b)| (a.sum - b.sum).abs())
        .fold(0.0, f64::max);
    c.expect(
        r0.verdict == r1.verdict && r0.sums.len() == r1.sums.len() && diff <= 1e-9,
        format!("verdict invariant, orbit sums differ by {diff:.1e}"),
    );
    Ok(c)
}

fn fluctuation_suite() -> Outcome {
    let mut c = Check::new();
    let shift = SubshiftSpec::full_shift(3);
    let weights: Vec<Vec<f64>> = [[0.3, 0.6, 0.3], [0.4, 0.3, 0.3], [0.4, 0.2, 0.5]]
        .iter()
        .map(|r| r.iter().map(|v: &f64| v.ln()).collect())
        .collect();
    let pair = build_pair_symbolic(&shift, &weights)?;
    let model = Model::Shift(shift);
    let grid = uniform_grid(-4.0, 3.0, 141);
    let gc = gc_symmetry(&pair, &model, &grid, None, 2)?;
    c.expect(
        gc.lambda_reflection_defect <= 1e-9,
        format!("reflection defect {:.1e}", gc.lambda_reflection_defect),
    );
    c.expect(
        gc.max_symmetry_defect <= 2.0 * gc.rate.grid_tolerance,
        format!(
            "Legendre defect {:.1e} <= 2 x {:.1e}",
            gc.max_symmetry_defect, gc.rate.grid_tolerance
        ),
    );
    let gaps = (6..=14)
        .map(|n| jarzynski_check(&pair, &model, n, 2).map(|j| j.gap))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let worst = (6..=14).zip(&gaps).map(|(n, g)| g * n as f64).fold(0.0, f64::max);
    c.expect(worst <= 0.5, format!("max n x Jarzynski gap {worst:.2e} <= 0.5"));
    c.expect(
        gaps.windows(2).all(|w| w[1] <= w[0]),
        format!(
            "Jarzynski gap decreasing {:.2e} -> {:.2e}",
            gaps[0],
            gaps[gaps.len() - 1]
        ),
    );
    let eq = Equilibrium::new(&model, &pair.phi_u, 2, DEFAULT_TOL)?;
    let r = transient_ft(
        &pair,
        &model,
        &eq.measure.masses,
        20,
        BinSpec { width: 0.5, pairs: 6 },
        1_000_000,
        42,
        2,
    )?;
    let slope = r.slope.unwrap_or(f64::NAN);
    c.expect(
        (slope - 1.0).abs() <= 0.1,
        format!(
            "transient slope {slope:.4} +/- {:.4}",
            r.slope_error.unwrap_or(f64::NAN)
        ),
    );
    Ok(c)
}

fn entropy_pesin() -> Outcome {
    let mut c = Check::new();
    for (name, map) in [
        ("affine", build_cookie_cutter()),
        ("perturbed", build_perturbed_cookie_cutter(0.5)?),
    ] {
        let r = pesin_check(&map, 10)?;
        c.expect(r.gap <= 1e-8, format!("{name}: |h - chi - P| = {:.1e}", r.gap));
    }
    let d = pesin_check(&build_doubling(), 10)?;
    c.expect(
        (d.entropy - LN_2).abs() <= 1e-9 && (d.lyapunov - LN_2).abs() <= 1e-9,
        format!(
            "slope-2 model h - log 2 = {:.1e}, chi - log 2 = {:.1e}",
            d.entropy - LN_2,
            d.lyapunov - LN_2
        ),
    );
    Ok(c)
}

fn mixing() -> Outcome {
    let mut c = Check::new();
    let cookie = build_cookie_cutter();
    let perturbed = build_perturbed_cookie_cutter(0.5)?;
    let doubling = build_doubling();
    let golden_map = build_golden_cookie_cutter();
    let cases: Vec<(&str, Model, PotentialSpec)> = vec![
        (
            "bernoulli 2-shift",
            Model::Shift(SubshiftSpec::full_shift(2)),
            PotentialSpec::branch_constant(vec![(2.0f64 / 3.0).ln(), (1.0f64 / 3.0).ln()]),
        ),
        (
            "golden mean",
            Model::Shift(SubshiftSpec::golden_mean()),
            PotentialSpec::cylinder_table(2, vec![0.2, -0.3, 0.4, 0.0]),
        ),
        (
            "cookie cutter",
            Model::Map(cookie.clone()),
            geometric_potential(&cookie, 0.63),
        ),
        (
            "perturbed",
            Model::Map(perturbed.clone()),
            geometric_potential(&perturbed, 0.6),
        ),
        (
            "doubling",
            Model::Map(doubling.clone()),
            geometric_potential(&doubling, 1.0),
        ),
        (
            "golden cookie cutter",
            Model::Map(golden_map.clone()),
            geometric_potential(&golden_map, 0.5),
        ),
    ];
    for (name, model, phi) in &cases {
        let w = discretize(model, phi, 8, EvalMode::Midpoint)?;
        let triple = perron(&w, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        let mu = gibbs_measure(&triple, &w);
        let basis = w.basis();
        let start: Vec<f64> = (0..w.len())
            .map(|i| if basis.first_symbol(i) == 0 { mu.masses[i] } else { 0.0 })
            .collect();
        let m = mixing_rate(&w, &triple, &start, 80)?;
        c.expect(
            m.fitted_rate <= m.gap + 0.05,
            format!("{name}: rate {:.4} vs gap {:.4}", m.fitted_rate, m.gap),
        );
        let consts = (6..=12)
            .map(|d| gibbs_constants(model, phi, d, DEFAULT_TOL))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let spread = |f: fn(&operator::GibbsConstants) -> f64| {
            let v: Vec<f64> = consts.iter().map(f).collect();
            v.iter().cloned().fold(0.0, f64::max) / v.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        let (s1, s2) = (spread(|g| g.c1), spread(|g| g.c2));
        c.expect(
            s1 <= 2.0 && s2 <= 2.0,
            format!("{name}: Gibbs constant spread c1 {s1:.3}, c2 {s2:.3}"),
        );
    }
    Ok(c)
}

fn main() {
    let s = Duration::from_secs;
    let results = [
        run(1, "affine Cantor dimension", Some(s(1)), affine_dimension),
        run(2, "perturbed dimension", Some(s(30)), perturbed_dimension),
        run(3, "pressure exactness", Some(s(1)), pressure_exactness),
        run(4, "derivative and variance", None, derivative_variance),
        run(5, "multifractal spectrum", Some(s(60)), multifractal),
        run(6, "Livsic", None, livsic_suite),
        run(7, "fluctuation relations", Some(s(120)), fluctuation_suite),
        run(8, "entropy and Pesin", None, entropy_pesin),
        run(9, "mixing", None, mixing),
    ];
    let passed = results.iter().filter(|r| **r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}

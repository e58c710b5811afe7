//! One function per subcommand. Each fills in its own defaults, then computes.

use serde::Serialize;
use std::result::Result;
use thermoform::dimension::default_t_grid;
use thermoform::io::fmt_f64;
use thermoform::maps::log_derivative;
use thermoform::pressure::{periodic_orbit_pressure, Equilibrium};
use thermoform::*;

use crate::config::{Grid, JobConfig};
use crate::output::Report;
use crate::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Pressure of the potential, with derivative and variance along an observable.
    Pressure,
    /// Hausdorff dimension of the repeller from the Bowen equation.
    Dimension,
    /// Multifractal spectrum of Birkhoff averages of the observable.
    Spectrum,
    /// Dimension of Lyapunov level sets.
    Lyapunov,
    /// Periodic obstruction, coboundary solution and cohomology test.
    Livsic,
    /// Fluctuation symmetry, Jarzynski rates and the transient relation.
    Fluctuation,
    /// Entropy of the equilibrium state, with the Pesin check for maps.
    Entropy,
    /// Orbit segments drawn from the equilibrium state.
    Sample,
    /// Recomputes the reference table for the cookie-cutter examples.
    ReproducePaper,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Pressure => "pressure",
            Command::Dimension => "dimension",
            Command::Spectrum => "spectrum",
            Command::Lyapunov => "lyapunov",
            Command::Livsic => "livsic",
            Command::Fluctuation => "fluctuation",
            Command::Entropy => "entropy",
            Command::Sample => "sample",
            Command::ReproducePaper => "reproduce-paper",
        }
    }

    /// Fills every field the command reads so the emitted config is complete.
    pub fn resolve(self, cfg: &mut JobConfig) {
        let depth = match self {
            Command::Fluctuation => 2,
            Command::Sample => 8,
            _ => 10,
        };
        cfg.depth.get_or_insert(depth);
        cfg.tol
            .get_or_insert(if self == Command::Livsic { 1e-9 } else { 1e-12 });
        cfg.seed.get_or_insert(0);
        cfg.format.get_or_insert(crate::config::Format::Json);
        match self {
            Command::Pressure => {
                cfg.period.get_or_insert(cfg.depth.unwrap().min(12));
                if cfg.observable.is_some() {
                    cfg.horizon.get_or_insert(12);
                }
            }
            Command::Spectrum => {
                cfg.t_grid.get_or_insert(Grid {
                    lo: -8.0,
                    hi: 8.0,
                    points: 321,
                });
            }
            Command::Lyapunov => {
                if cfg.chi_grid.is_none() {
                    if let Some(map) = cfg.model.as_map() {
                        let (lo, hi) = (map.expansion_min().ln(), map.expansion_max().ln());
                        let step = (hi - lo) / 52.0;
                        cfg.chi_grid = Some(Grid {
                            lo: lo + step,
                            hi: hi - step,
                            points: if hi > lo { 51 } else { 1 },
                        });
                    }
                }
            }
            Command::Livsic => {
                cfg.period.get_or_insert(10);
                cfg.orbit_length.get_or_insert(100_000);
            }
            Command::Fluctuation => {
                cfg.t_grid.get_or_insert(Grid {
                    lo: -4.0,
                    hi: 3.0,
                    points: 141,
                });
            }
            Command::Sample => {
                cfg.length.get_or_insert(1000);
                cfg.count.get_or_insert(1);
                cfg.points.get_or_insert(true);
            }
            _ => {}
        }
    }

    pub fn run(self, cfg: &JobConfig) -> Result<Report, AppError> {
        match self {
            Command::Pressure => pressure_cmd(cfg),
            Command::Dimension => dimension_cmd(cfg),
            Command::Spectrum => spectrum_cmd(cfg),
            Command::Lyapunov => lyapunov_cmd(cfg),
            Command::Livsic => livsic_cmd(cfg),
            Command::Fluctuation => fluctuation_cmd(cfg),
            Command::Entropy => entropy_cmd(cfg),
            Command::Sample => sample_cmd(cfg),
            Command::ReproducePaper => reproduce_cmd(cfg),
        }
    }
}

/// `-log|T'|` for maps, the zero potential for bare shifts.
fn potential(cfg: &JobConfig) -> PotentialSpec {
    cfg.potential.clone().unwrap_or_else(|| match cfg.model.as_map() {
        Some(map) => geometric_potential(map, 1.0),
        None => PotentialSpec::constant(0.0),
    })
}

fn curve_table(name: &str, x: &str, grid: &[f64], values: &[f64]) -> Table {
    let mut t = Table::new(name, &[x, "value"]);
    for (a, b) in grid.iter().zip(values) {
        t.push_floats(&[*a, *b]);
    }
    t
}

#[derive(Serialize)]
struct PressureReport {
    pressure: PressureResult,
    periodic_orbit: PeriodicCheck,
    #[serde(skip_serializing_if = "Option::is_none")]
    derivative: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    variance: Option<thermoform::pressure::VarianceResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    curve: Option<PressureCurve>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rate: Option<RateFunction>,
}

#[derive(Serialize)]
struct PeriodicCheck {
    period: usize,
    value: f64,
    difference: f64,
}

fn pressure_cmd(cfg: &JobConfig) -> Result<Report, AppError> {
    let model = &cfg.model;
    let phi = potential(cfg);
    let opts = PressureOptions {
        depth: cfg.depth(),
        tol: cfg.tol(),
        ..Default::default()
    };
    let p = pressure(model, &phi, &opts)?;
    let period = cfg.period.expect("resolved");
    let per = periodic_orbit_pressure(model, &phi, period)?;
    let mut rep = PressureReport {
        periodic_orbit: PeriodicCheck {
            period,
            value: per,
            difference: per - p.value,
        },
        pressure: p,
        derivative: None,
        variance: None,
        curve: None,
        rate: None,
    };
    let mut tables = Vec::new();
    if let Some(psi) = &cfg.observable {
        rep.derivative = Some(pressure_derivative(model, &phi, psi, cfg.depth())?);
        rep.variance = Some(pressure_variance(
            model,
            &phi,
            psi,
            cfg.depth(),
            cfg.horizon.expect("resolved"),
        )?);
        if let Some(g) = cfg.t_grid {
            let curve = pressure_curve(model, &phi, psi, &g.values(), cfg.depth(), cfg.tol())?;
            let a = cfg.a_grid.map(|g| g.values());
            let rate = legendre(&curve.grid, &curve.values, a.as_deref())?;
            tables.push(curve_table("pressure_curve", "t", &curve.grid, &curve.values));
            tables.push(curve_table("rate", "a", &rate.a, &rate.values));
            rep.curve = Some(curve);
            rep.rate = Some(rate);
        }
    }
    Ok(Report::new(&rep)?.with_tables(tables))
}

#[derive(Serialize)]
struct DimensionReport {
    bowen: BowenResult,
    newton_steps: usize,
    bounds: [f64; 2],
}

fn dimension_cmd(cfg: &JobConfig) -> Result<Report, AppError> {
    let map = cfg.model.require_map()?;
    let bowen = bowen_dimension(map, cfg.tol(), cfg.depth())?;
    let mut trace = Table::new("newton_trace", &["step", "t", "f", "df"]);
    for (k, s) in bowen.newton_trace.iter().enumerate() {
        trace.push(vec![k.to_string(), fmt_f64(s.t), fmt_f64(s.f), fmt_f64(s.df)]);
    }
    let rep = DimensionReport {
        newton_steps: bowen.newton_steps(),
        bounds: dimension_bounds(map),
        bowen,
    };
    Ok(Report::new(&rep)?.with_tables([trace]))
}

fn spectrum_table(s: &SpectrumCurve) -> Table {
    let mut t = Table::new("spectrum", &["t", "a", "d", "entropy", "lyapunov"]);
    for k in 0..s.t.len() {
        t.push_floats(&[s.t[k], s.a[k], s.d[k], s.entropy[k], s.lyapunov[k]]);
    }
    t
}

fn spectrum_cmd(cfg: &JobConfig) -> Result<Report, AppError> {
    let map = cfg.model.require_map()?;
    let g = cfg.observable.clone().unwrap_or_else(|| log_derivative(map));
    let grid = cfg.t_grid.map(|g| g.values()).unwrap_or_else(default_t_grid);
    let s = multifractal_spectrum(map, &g, &grid, cfg.depth())?;
    let table = spectrum_table(&s);
    Ok(Report::new(&s)?.with_tables([table]))
}

fn lyapunov_cmd(cfg: &JobConfig) -> Result<Report, AppError> {
    let map = cfg.model.require_map()?;
    let grid = cfg.chi_grid.expect("resolved for maps").values();
    let s = lyapunov_level_sets(map, &grid, cfg.depth())?;
    let table = spectrum_table(&s);
    Ok(Report::new(&s)?.with_tables([table]))
}

#[derive(Serialize)]
struct CoboundarySummary {
    depth: usize,
    orbit_length: usize,
    residual: f64,
    norm_bound: f64,
    seminorm_estimate: f64,
    seed: u64,
    attempts: usize,
}

#[derive(Serialize)]
struct LivsicReport {
    obstruction: ObstructionReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    coboundary: Option<CoboundarySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cohomology: Option<CohomologyReport>,
}

fn livsic_cmd(cfg: &JobConfig) -> Result<Report, AppError> {
    let model = &cfg.model;
    let phi = potential(cfg);
    let period = cfg.period.expect("resolved");
    let obstruction = periodic_obstruction(model, &phi, period, cfg.tol())?;
    let mut sums = Table::new("orbit_sums", &["period", "word", "sum"]);
    for s in &obstruction.sums {
        let word: String = s.word.iter().map(|b| b.to_string()).collect();
        sums.push(vec![s.period.to_string(), word, fmt_f64(s.sum)]);
    }
    let mut tables = vec![sums];
    let coboundary = if obstruction.verdict == Verdict::CoboundaryCandidate {
        let opts = CoboundaryOptions {
            orbit_length: cfg.orbit_length.expect("resolved"),
            depth: cfg.depth(),
            tol: cfg.tol(),
            seed: cfg.seed(),
            ..Default::default()
        };
        let sol = solve_coboundary(model, &phi, &opts)?;
        let mut ext = Table::new("extension", &["cylinder", "u", "representative"]);
        for (i, (u, r)) in sol.extension.iter().zip(&sol.representatives).enumerate() {
            ext.push(vec![i.to_string(), fmt_f64(*u), fmt_f64(*r)]);
        }
        tables.push(ext);
        Some(CoboundarySummary {
            depth: sol.depth,
            orbit_length: sol.orbit_length,
            residual: sol.residual,
            norm_bound: sol.norm_bound,
            seminorm_estimate: sol.seminorm_estimate,
            seed: sol.seed,
            attempts: sol.attempts,
        })
    } else {
        None
    };
    let cohomology = match &cfg.observable {
        Some(psi) => Some(cohomologous_test(model, &phi, psi, period, cfg.tol())?),
        None => None,
    };
    let rep = LivsicReport {
        obstruction,
        coboundary,
        cohomology,
    };
    Ok(Report::new(&rep)?.with_tables(tables))
}

#[derive(Serialize)]
struct FluctuationReport {
    sigma_mean: f64,
    gc: GCReport,
    jarzynski: Vec<JarzynskiCheck>,
    entropy_production: EntropyProduction,
    #[serde(skip_serializing_if = "Option::is_none")]
    transient: Option<TransientReport>,
}

fn fluctuation_cmd(cfg: &JobConfig) -> Result<Report, AppError> {
    let weights = cfg
        .weights
        .as_ref()
        .ok_or_else(|| AppError::Usage("fluctuation needs `weights`, one row per symbol".into()))?;
    let shift = cfg.model.coding().clone();
    let pair = build_pair_symbolic(&shift, weights)?;
    let model = Model::Shift(shift);
    let depth = cfg.depth();
    let a = cfg.a_grid.map(|g| g.values());
    let gc = gc_symmetry(
        &pair,
        &model,
        &cfg.t_grid.expect("resolved").values(),
        a.as_deref(),
        depth,
    )?;
    let jarzynski = (6..=14)
        .map(|n| jarzynski_check(&pair, &model, n, depth))
        .collect::<thermoform::Result<Vec<_>>>()?;
    let mut jt = Table::new("jarzynski", &["n", "lhs_rate", "rhs", "gap"]);
    for j in &jarzynski {
        jt.push(vec![
            j.n.to_string(),
            fmt_f64(j.lhs_rate),
            fmt_f64(j.rhs),
            fmt_f64(j.gap),
        ]);
    }
    let mut tables = gc.tables();
    tables.push(jt);
    let transient = match cfg.transient {
        Some(tc) => {
            let eq = Equilibrium::new(&model, &pair.phi_u, depth.max(2), cfg.tol())?;
            let r = transient_ft(
                &pair,
                &model,
                &eq.measure.masses,
                tc.n,
                BinSpec {
                    width: tc.bin_width,
                    pairs: tc.bin_pairs,
                },
                tc.samples,
                cfg.seed(),
                depth,
            )?;
            tables.push(r.table());
            Some(r)
        }
        None => None,
    };
    let rep = FluctuationReport {
        sigma_mean: pair.sigma_mean,
        entropy_production: entropy_production_mean(&pair, &model, depth)?,
        gc,
        jarzynski,
        transient,
    };
    Ok(Report::new(&rep)?.with_tables(tables))
}

#[derive(Serialize)]
struct EntropyReport {
    entropy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    local_dimension: Option<thermoform::dimension::LocalDimension>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pesin: Option<PesinReport>,
}

fn entropy_cmd(cfg: &JobConfig) -> Result<Report, AppError> {
    let model = &cfg.model;
    let phi = potential(cfg);
    let h = entropy(model, &phi, cfg.depth())?;
    let (local_dimension, pesin) = match model.as_map() {
        Some(map) => (
            Some(local_dimension(model, &phi, cfg.depth())?),
            Some(pesin_check(map, cfg.depth())?),
        ),
        None => (None, None),
    };
    Ok(Report::new(&EntropyReport {
        entropy: h,
        local_dimension,
        pesin,
    })?)
}

#[derive(Serialize)]
struct SampleReport {
    length: usize,
    count: usize,
    samples: Vec<OrbitSample>,
}

fn sample_cmd(cfg: &JobConfig) -> Result<Report, AppError> {
    let model = &cfg.model;
    let phi = potential(cfg);
    let eq = Equilibrium::new(model, &phi, cfg.depth(), cfg.tol())?;
    let observables: Vec<PotentialSpec> = cfg.observable.iter().cloned().collect();
    let opts = SampleOptions {
        observables: observables.clone(),
        points: cfg.points.expect("resolved") && model.as_map().is_some(),
    };
    let (length, count) = (cfg.length.expect("resolved"), cfg.count.expect("resolved"));
    let samples = sample(model, &eq, length, count, cfg.seed(), &opts)?;
    let table = samples_table(model, &samples, &observables)?;
    let rep = SampleReport { length, count, samples };
    Ok(Report::new(&rep)?.with_tables([table]))
}

/// One line of the reference comparison.
#[derive(Serialize)]
struct Row {
    quantity: &'static str,
    computed: f64,
    reference: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference_tolerance: Option<f64>,
    discrepancy: f64,
    /// Agreement with an independent internal computation.
    internal_check: bool,
    detail: String,
}

#[derive(Serialize)]
struct ReproduceReport {
    rows: Vec<Row>,
    internal_checks_passed: bool,
    reference_mismatches: usize,
}

fn row(quantity: &'static str, computed: f64, reference: f64, check: bool, detail: String) -> Row {
    Row {
        quantity,
        computed,
        reference,
        reference_tolerance: None,
        discrepancy: computed - reference,
        internal_check: check,
        detail,
    }
}

fn reproduce_cmd(cfg: &JobConfig) -> Result<Report, AppError> {
    let depth = cfg.depth();
    let tol = cfg.tol();
    let ln2 = std::f64::consts::LN_2;
    let ln3 = 3f64.ln();
    let cc = build_cookie_cutter();
    let shift = cc.coding();
    let m = thermoform::mixing_time(shift)?;
    let h_top = shift.topological_entropy();
    let zero = pressure(
        &Model::Shift(shift.clone()),
        &PotentialSpec::constant(0.0),
        &PressureOptions::at_depth(depth),
    )?;
    let bowen = bowen_dimension(&cc, tol, depth)?;
    let closed = ln2 / ln3;

    let pert = build_perturbed_cookie_cutter(0.5)?;
    let pb = bowen_dimension(&pert, tol, depth)?;
    let pmodel = Model::Map(pert.clone());
    let per = periodic_orbit_pressure(&pmodel, &geometric_potential(&pert, pb.t_star), depth.min(12))?;
    let bracket_width = pb.bracket[1] - pb.bracket[0];
    let [lo, hi] = dimension_bounds(&pert);

    let w = discretize(
        &Model::Map(cc.clone()),
        &geometric_potential(&cc, bowen.t_star),
        depth,
        EvalMode::Midpoint,
    )?;
    let triple = perron(
        &w,
        thermoform::operator::DEFAULT_TOL,
        thermoform::operator::DEFAULT_MAX_ITER,
    )?;
    let gap = 1.0 - triple.gap;

    let mut perturbed = row(
        "dim_H perturbed (eps = 0.5)",
        pb.t_star,
        0.6412,
        per.abs() <= 1e-6 && lo <= pb.t_star && pb.t_star <= hi,
        format!(
            "periodic pressure at t* = {}, bracket width {}, bounds [{}, {}]",
            fmt_f64(per),
            fmt_f64(bracket_width),
            fmt_f64(lo),
            fmt_f64(hi)
        ),
    );
    perturbed.reference_tolerance = Some(1e-4);

    let rows = vec![
        row(
            "alphabet size N",
            shift.alphabet_size() as f64,
            2.0,
            shift.is_full(),
            "full shift coding".into(),
        ),
        row("mixing time M", m as f64, 1.0, m >= 1, "smallest p with A^p > 0".into()),
        row(
            "expansion rate |T'|",
            cc.expansion_min(),
            3.0,
            cc.expansion_min() == cc.expansion_max(),
            "constant derivative".into(),
        ),
        row(
            "topological entropy",
            h_top,
            ln2,
            (zero.value - h_top).abs() <= 1e-10,
            format!("P(0) = {}", fmt_f64(zero.value)),
        ),
        row(
            "Bowen root t*",
            bowen.t_star,
            closed,
            (bowen.t_star - closed).abs() <= 1e-10,
            "log 2 / log 3".into(),
        ),
        row(
            "dim_H unperturbed",
            bowen.t_star,
            closed,
            bowen.bounds[0] <= bowen.t_star + 1e-12 && bowen.t_star <= bowen.bounds[1] + 1e-12,
            "dimension bounds collapse for constant slope".into(),
        ),
        perturbed,
        row(
            "Newton convergence quadratic",
            if pb.quadratic_tail { 1.0 } else { 0.0 },
            1.0,
            pb.quadratic_tail,
            format!(
                "{} steps, constant {}",
                pb.newton_steps(),
                fmt_f64(pb.quadratic_constant)
            ),
        ),
        row(
            "spectral gap unperturbed",
            gap,
            1.0,
            gap > 0.0 && gap <= 1.0,
            format!("1 - |lambda_2|/lambda at depth {depth}"),
        ),
    ];
    let mut table = Table::new(
        "comparison",
        &["quantity", "computed", "reference", "discrepancy", "internal_check"],
    );
    for r in &rows {
        table.push(vec![
            r.quantity.to_string(),
            fmt_f64(r.computed),
            fmt_f64(r.reference),
            fmt_f64(r.discrepancy),
            r.internal_check.to_string(),
        ]);
    }
    let rep = ReproduceReport {
        internal_checks_passed: rows.iter().all(|r| r.internal_check),
        reference_mismatches: rows
            .iter()
            .filter(|r| r.discrepancy.abs() > r.reference_tolerance.unwrap_or(1e-4))
            .count(),
        rows,
    };
    Ok(Report::new(&rep)?.with_tables([table]))
}

//! Thermodynamic formalism for subshifts of finite type and expanding interval maps.
//!
//! Transfer operators are discretized on cylinder bases; pressure, Gibbs
//! measures, dimensions, coboundaries and fluctuation statistics are all
//! derived from the resulting Perron eigendata.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dimension;
pub mod equilibrium;
pub mod error;
pub mod fluctuation;
pub mod io;
pub mod livsic;
pub mod maps;
pub mod model;
pub mod operator;
pub mod potential;
pub mod pressure;
pub mod symbolic;

pub use dimension::{
    bowen_dimension, dimension_bounds, local_dimension, lyapunov_level_sets, multifractal_spectrum, BowenResult,
    SpectrumCurve,
};
pub use equilibrium::{
    entropy, pesin_check, sample, samples_table, srb_density_ratio, ChainSampler, OrbitSample, PesinReport,
    SampleOptions, SrbRatio,
};
pub use error::{Error, Result};
pub use fluctuation::{
    build_pair_symbolic, entropy_production_mean, gc_symmetry, jarzynski_check, scgf, transient_ft, BinSpec,
    EntropyProduction, GCReport, JarzynskiCheck, PotentialPair, TransientBin, TransientReport,
};
pub use io::Table;
pub use livsic::{
    cohomologous_test, holder_bound, periodic_obstruction, solve_coboundary, CoboundaryOptions, CoboundarySolution,
    CohomologyReport, ObstructionReport, Verdict,
};
pub use maps::{
    build_cookie_cutter, build_doubling, build_golden_cookie_cutter, build_perturbed_cookie_cutter,
    geometric_potential, MapModel, MapSpec,
};
pub use model::Model;
pub use operator::{
    discretize, gibbs_measure, mixing_rate, perron, GibbsCylinderMeasure, MixingReport, PerronTriple, TransferMatrix,
};
pub use potential::{EvalMode, Expr, HolderData, PotentialSpec, Representation};
pub use pressure::{
    legendre, pressure, pressure_curve, pressure_derivative, pressure_variance, PressureCurve, PressureMethod,
    PressureOptions, PressureResult, RateFunction,
};
pub use symbolic::{cylinders, mixing_time, periodic_orbits, CylinderBasis, PeriodicOrbit, SubshiftSpec, Word};

//! Escape rates of open chaotic systems whose holes are Markov partition
//! elements.
//!
//! A closed piecewise-linear map together with a Markov partition induces
//! a finite stochastic chain; removing one cell punches the corresponding
//! row and the leading eigenvalue of what remains is the per-iteration
//! survival factor of the open system. This crate builds those chains
//! ([`transition`]), solves them ([`spectral`]), assembles the estimator
//! hierarchy relating per-hole escape rates to their measure-weighted
//! average and its convexity lower bound ([`estimators`]), and checks the
//! spectral answers against direct orbit simulation ([`montecarlo`]).
//!
//! Ready-made systems live in [`maps`]: the skewed tent and doubling maps
//! on their dyadic-style refinements, a five-state symbolic model of the
//! hyperbolic toral automorphism, and the partition transported from the
//! tent map to the logistic map by smooth conjugacy.

pub mod error;
pub mod estimators;
pub mod maps;
pub mod montecarlo;
pub mod partition;
pub mod spectral;
pub mod transition;

pub use error::{Error, Result};
pub use estimators::{
    average_escape_rate, build_report, escape_rate_from_eigenvalue, lower_bound_estimate,
    naive_n1, naive_n2, per_hole_rates, EstimateReport, HoleRate,
};
pub use maps::{
    logistic_conjugacy, make_cat_map_model, make_doubling, make_logistic_partition,
    make_skewed_tent, map_spec_from_json, Branch, Conjugacy, MapSpec, PiecewiseLinearMap,
    SymbolicMarkovModel,
};
pub use montecarlo::{
    fit_escape_rate, simulate_survival, InitialLaw, RateFit, SurvivalSeries, MIN_FIT_COUNT,
};
pub use partition::{
    lebesgue_measure, validate_cells, Interval, IntervalPartition, MeasureVector,
    PartitionReport,
};
pub use spectral::{
    chain_structure, dense_spectrum_leading, leading_eigenvalue, ChainStructure,
    SpectralResult, DEFAULT_SPECTRAL_TOL,
};
pub use transition::{
    check_markov, refine, transition_matrix, MarkovReport, SubstochasticMatrix,
};

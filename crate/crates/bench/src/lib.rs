//! Shared fixtures for the pipeline benchmarks.

use escape_lab_core::{
    lebesgue_measure, make_skewed_tent, refine, transition_matrix, IntervalPartition,
    MeasureVector, PiecewiseLinearMap, SubstochasticMatrix,
};

/// Tent system refined to 2^(levels+1) cells, with its chain and measure.
pub fn tent_chain(
    x0: f64,
    levels: u32,
) -> (PiecewiseLinearMap, IntervalPartition, SubstochasticMatrix, MeasureVector) {
    let map = make_skewed_tent(x0).expect("peak in (0,1)");
    let partition = refine(&map, map.base_partition(), levels).expect("tent refines");
    let matrix = transition_matrix(&map, &partition).expect("tent partitions are Markov");
    let measure = lebesgue_measure(&partition);
    (map, partition, matrix, measure)
}

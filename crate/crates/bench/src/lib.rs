//! Shared fixtures for the criterion benches.

use splitplot::{GaussianGenerator, GroupedSample, RngStream, ScenarioLabel, ScenarioSpec, StudyDesign, BlockMatrix};

/// One null dataset from a standard two-group scenario and its hypothesis matrix.
pub fn scenario_fixture(label: ScenarioLabel, dims: [usize; 2], sizes: [usize; 2], seed: u64) -> (GroupedSample, BlockMatrix) {
    let design = StudyDesign::new(dims.to_vec(), sizes.to_vec()).expect("valid design");
    let spec = ScenarioSpec::standard(label, design.clone()).expect("two-group design");
    let t = spec.hypothesis().expect("hypothesis");
    let means = splitplot::model::zero_means(&design);
    let generator = GaussianGenerator::new(&design, &means, &spec.covariances).expect("covariances");
    (generator.sample(&RngStream::new(seed, 0)), t)
}

#![allow(dead_code)]

use std::path::PathBuf;

use oracle::Reference;
use weibull_ce::io::{load_bins, load_dataset, load_template};
use weibull_ce::likelihood::Dataset;
use weibull_ce::model::CeModel;
use weibull_ce::params::{ModelParams, TestPlan, DEFAULT_K0, DV_22KV};
use weibull_ce::simulate::{BinSpec, DesignTemplate};

/// Maximum likelihood estimates on the bundled cable data.
pub const FITTED: [f64; 4] = [5.016811675, 1.6038754972, 0.54823712035, 0.94405402879];

pub fn data_file(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

pub fn table2() -> Dataset {
    load_dataset(data_file("table2.csv"), TestPlan::cable_22kv()).unwrap()
}

pub fn template() -> DesignTemplate {
    load_template(data_file("table2_template.csv")).unwrap()
}

pub fn bins() -> BinSpec {
    load_bins(data_file("table3_bins.json")).unwrap()
}

pub fn params(theta: [f64; 4]) -> ModelParams {
    ModelParams::from_array(theta, DEFAULT_K0).unwrap()
}

pub fn model(theta: [f64; 4], k0: f64, dv: f64) -> CeModel {
    CeModel::new(
        ModelParams::from_array(theta, k0).unwrap(),
        TestPlan::new(dv).unwrap(),
    )
    .unwrap()
}

pub fn fitted_model() -> CeModel {
    model(FITTED, DEFAULT_K0, DV_22KV)
}

pub fn fitted_reference() -> Reference {
    Reference::new(FITTED, DEFAULT_K0, DV_22KV)
}

/// Active observations as `(ts, stage_start)` pairs.
pub fn pairs(data: &Dataset) -> Vec<(f64, u32)> {
    data.active().map(|(_, o)| (o.ts, o.stage_start)).collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

//! Built-in parameterized systems.

use mmas_core::model::{LinearSystem, ParameterBox, ParameterizedSystem};
use mmas_core::vehicle::{make_uncertain_vehicle, VehicleParams};
use mmas_core::Result;
use nalgebra::{dmatrix, DMatrix};
use serde::{Deserialize, Serialize};

use crate::config::CoordinationRequest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Lateral-roll vehicle over its six-parameter box.
    #[default]
    Vehicle,
    /// Parameter-independent 2x2 system.
    Constant,
    /// One entry quadratic in its parameter.
    Parabola,
    /// Two decoupled diagonal entries.
    Diagonal,
    /// Scaled rotation `[[a, b], [-b, a]]`.
    Rotation,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Vehicle => "vehicle",
            Family::Constant => "constant",
            Family::Parabola => "parabola",
            Family::Diagonal => "diagonal",
            Family::Rotation => "rotation",
        }
    }

    pub fn build(self, vehicle: &VehicleParams) -> Result<ParameterizedSystem> {
        let input = || DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        match self {
            Family::Vehicle => make_uncertain_vehicle(vehicle),
            Family::Constant => Ok(ParameterizedSystem::new(
                unit_box(&["p", "q"], 0.0, 1.0)?,
                2,
                1,
                move |_| LinearSystem::new(dmatrix![0.0, 1.0; -2.0, -3.0], input()).expect("fixed shape"),
            )),
            Family::Parabola => Ok(ParameterizedSystem::new(
                unit_box(&["p"], -1.0, 1.0)?,
                2,
                1,
                move |m| {
                    let p = m.values()[0];
                    LinearSystem::new(dmatrix![0.0, 1.0; -1.0 - p * p, -1.0], input()).expect("fixed shape")
                },
            )),
            Family::Diagonal => Ok(ParameterizedSystem::new(
                unit_box(&["p", "q"], 0.0, 0.5)?,
                2,
                1,
                |m| {
                    let v = m.values();
                    LinearSystem::new(
                        dmatrix![-1.0 - v[0], 0.0; 0.0, -2.0 - v[1]],
                        DMatrix::from_column_slice(2, 1, &[1.0, 1.0]),
                    )
                    .expect("fixed shape")
                },
            )),
            Family::Rotation => Ok(ParameterizedSystem::new(
                ParameterBox::new(vec!["a".into(), "b".into()], vec![-1.0, 0.5], vec![0.0, 1.5])?,
                2,
                1,
                move |m| {
                    let v = m.values();
                    LinearSystem::new(dmatrix![v[0], v[1]; -v[1], v[0]], input()).expect("fixed shape")
                },
            )),
        }
    }

    /// Entry pairs whose coordination is reported by default.
    pub fn default_coordination(self) -> Vec<CoordinationRequest> {
        let req = |param: &str, first: [usize; 2], second: [usize; 2]| CoordinationRequest {
            param: param.to_string(),
            first,
            second,
            grid: 21,
            tol: 1e-9,
        };
        match self {
            Family::Vehicle => vec![
                req("theta_r", [0, 2], [3, 2]),
                req("k_phi", [0, 2], [3, 2]),
                req("C_af", [0, 0], [3, 0]),
                req("C_af", [0, 1], [1, 0]),
            ],
            Family::Constant => vec![],
            Family::Parabola => vec![req("p", [1, 0], [1, 0])],
            Family::Diagonal => vec![req("p", [0, 0], [1, 1])],
            Family::Rotation => vec![req("a", [0, 0], [1, 1]), req("b", [0, 1], [1, 0])],
        }
    }
}

fn unit_box(names: &[&str], lo: f64, hi: f64) -> Result<ParameterBox> {
    ParameterBox::new(
        names.iter().map(|s| s.to_string()).collect(),
        vec![lo; names.len()],
        vec![hi; names.len()],
    )
}

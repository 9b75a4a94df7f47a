use mmas_core::canonical::{char_coeffs, DEFAULT_CONTROLLABILITY_TOL};
use mmas_core::charpoly_bounds::all_coeff_bounds;
use mmas_core::model::{element_bounds, Corner, ParameterVector};
use mmas_core::sim::{simulate_scenario, ParameterTrajectory, PlantSchedule, Scenario, SteeringProfile};
use mmas_core::tying::{extremal_corners, scan_monotonicity, select_vertex_models, ScanOptions, VertexModelSet};
use mmas_core::vehicle::{make_uncertain_vehicle, SignConvention, VehicleParams, UNCERTAIN_PARAMETERS};
use mmas_core::weights::InclusionStatus;
use proptest::prelude::*;

fn standard() -> VehicleParams {
    VehicleParams {
        sign: SignConvention::Standard,
        ..VehicleParams::default()
    }
}

fn selected(vp: &VehicleParams) -> VertexModelSet {
    let ps = make_uncertain_vehicle(vp).unwrap();
    let report = scan_monotonicity(&ps, &ScanOptions::default()).unwrap();
    let templates = extremal_corners(&report).unwrap();
    select_vertex_models(&ps, &templates, DEFAULT_CONTROLLABILITY_TOL).unwrap()
}

#[test]
fn selected_models_attain_every_element_bound() {
    let vp = VehicleParams::default();
    let ps = make_uncertain_vehicle(&vp).unwrap();
    let report = scan_monotonicity(&ps, &ScanOptions::default()).unwrap();
    let bounds = element_bounds(&ps, &report).unwrap();
    let set = selected(&vp);
    for i in 0..4 {
        for j in 0..4 {
            let values: Vec<f64> = set.systems.iter().map(|s| s.a()[(i, j)]).collect();
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(lo, bounds.lb()[(i, j)], "a[{i}][{j}] min");
            assert_eq!(hi, bounds.ub()[(i, j)], "a[{i}][{j}] max");
        }
    }
}

#[test]
fn zero_input_gives_zero_trace() {
    let vp = standard();
    let set = selected(&vp);
    let sc = Scenario {
        horizon: 0.5,
        steering: SteeringProfile::Step {
            amplitude_deg: 0.0,
            at: 0.0,
        },
        ..Scenario::default()
    };
    let trace = simulate_scenario(&sc, &set).unwrap();
    for s in &trace.samples {
        assert_eq!(s.plant.amax(), 0.0);
        assert_eq!(s.estimate.amax(), 0.0);
    }
}

#[test]
fn plant_pinned_to_first_vertex_selects_it() {
    let vp = standard();
    let all = selected(&vp);
    let set = VertexModelSet::from_systems(
        all.corners[..2].to_vec(),
        all.systems[..2].to_vec(),
        DEFAULT_CONTROLLABILITY_TOL,
    )
    .unwrap();
    let pbox = make_uncertain_vehicle(&vp).unwrap().parameter_box().clone();
    let corner: &Corner = &set.corners[0];
    let values = pbox.corner_vector(corner).unwrap();
    let trajectories = UNCERTAIN_PARAMETERS
        .iter()
        .zip(values.values())
        .map(|(n, v)| (n.to_string(), ParameterTrajectory::Constant { value: *v }))
        .collect();
    let sc = Scenario {
        horizon: 3.0,
        plant: PlantSchedule::Parameters { trajectories },
        ..Scenario::default()
    };
    let trace = simulate_scenario(&sc, &set).unwrap();
    for s in trace.samples.iter().filter(|s| s.t >= 1.0) {
        assert!((s.weights.values()[0] - 1.0).abs() <= 1e-3, "t = {}: {:?}", s.t, s.weights);
        assert_ne!(s.inclusion, InclusionStatus::Outside);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn in_box_vehicles_respect_element_and_coefficient_bounds(
        unit in prop::collection::vec(0.0f64..=1.0, 6),
    ) {
        let vp = VehicleParams::default();
        let ps = make_uncertain_vehicle(&vp).unwrap();
        let report = scan_monotonicity(&ps, &ScanOptions::default()).unwrap();
        let mi = element_bounds(&ps, &report).unwrap();
        let coeffs = all_coeff_bounds(&mi).unwrap();
        let pbox = ps.parameter_box();
        let m = ParameterVector::new(
            (0..6).map(|l| pbox.lower()[l] + unit[l] * (pbox.upper()[l] - pbox.lower()[l])).collect(),
        );
        let a = ps.eval(&m).unwrap().a().clone();
        prop_assert!(mi.contains(&a));
        prop_assert!(coeffs.contains(&char_coeffs(&a), 1e-12));
    }
}

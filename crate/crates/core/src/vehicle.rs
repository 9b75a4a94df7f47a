//! Coupled lateral-roll vehicle model with state `[beta, r, phi, phi_dot]`
//! and front steering angle as the single input.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LinearSystem, ParameterBox, ParameterVector, ParameterizedSystem};

/// Names of the uncertain parameters, in box order.
pub const UNCERTAIN_PARAMETERS: [&str; 6] = ["C_af", "C_ar", "k_phi", "c_phi", "phi_r", "theta_r"];

/// Sign applied to the cornering-stiffness terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    /// Stiffness terms enter with the signs of the published state-space entries.
    #[default]
    AsPrinted,
    /// Stiffness terms negated, giving the usual stable bicycle-model signs.
    Standard,
}

impl SignConvention {
    fn factor(self) -> f64 {
        match self {
            SignConvention::AsPrinted => 1.0,
            SignConvention::Standard => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// Total mass (kg).
    pub m: f64,
    /// Sprung mass (kg). Not a published value.
    pub m_s: f64,
    /// Yaw inertia (kg m^2).
    pub i_z: f64,
    /// Sprung-mass roll inertia (kg m^2). Not a published value.
    pub i_xs: f64,
    pub l_f: f64,
    pub l_r: f64,
    /// CG to roll-center height (m). Not a published value.
    pub h_s: f64,
    pub c_af: f64,
    pub c_ar: f64,
    pub k_phi: f64,
    pub c_phi: f64,
    /// Road bank angle (rad).
    pub phi_r: f64,
    /// Road grade angle (rad).
    pub theta_r: f64,
    /// Longitudinal speed (m/s).
    pub u: f64,
    pub g: f64,
    pub sign: SignConvention,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            m: 1530.0,
            m_s: 1370.0,
            i_z: 2315.3,
            i_xs: 500.0,
            l_f: 1.11,
            l_r: 1.67,
            h_s: 0.45,
            c_af: 80400.0,
            c_ar: 82700.0,
            k_phi: 36000.0,
            c_phi: 3000.0,
            phi_r: 0.0,
            theta_r: 0.0,
            u: 50.0 / 3.6,
            g: 9.81,
            sign: SignConvention::AsPrinted,
        }
    }
}

impl VehicleParams {
    /// Composite roll inertia `I_xs - m_s^2 h_s^2 / m`.
    pub fn ic(&self) -> f64 {
        self.i_xs - self.m_s * self.m_s * self.h_s * self.h_s / self.m
    }

    pub fn validate(&self) -> Result<()> {
        let values = [
            ("m", self.m),
            ("m_s", self.m_s),
            ("i_z", self.i_z),
            ("i_xs", self.i_xs),
            ("l_f", self.l_f),
            ("l_r", self.l_r),
            ("h_s", self.h_s),
            ("u", self.u),
            ("g", self.g),
        ];
        for (name, v) in values {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidVehicle(format!("{name} must be positive and finite, got {v}")));
            }
        }
        for (name, v) in [
            ("c_af", self.c_af),
            ("c_ar", self.c_ar),
            ("k_phi", self.k_phi),
            ("c_phi", self.c_phi),
            ("phi_r", self.phi_r),
            ("theta_r", self.theta_r),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidVehicle(format!("{name} is not finite")));
            }
        }
        let ic = self.ic();
        if !(ic > 0.0) {
            return Err(Error::NonPositiveIc { ic });
        }
        Ok(())
    }

    /// Values of the uncertain parameters in box order.
    pub fn uncertain(&self) -> ParameterVector {
        ParameterVector::new(vec![self.c_af, self.c_ar, self.k_phi, self.c_phi, self.phi_r, self.theta_r])
    }

    /// Copy with the uncertain parameters replaced.
    pub fn with_uncertain(&self, m: &ParameterVector) -> Self {
        let v = m.values();
        VehicleParams {
            c_af: v[0],
            c_ar: v[1],
            k_phi: v[2],
            c_phi: v[3],
            phi_r: v[4],
            theta_r: v[5],
            ..self.clone()
        }
    }
}

fn vehicle_matrices(vp: &VehicleParams) -> (DMatrix<f64>, DVector<f64>) {
    let s = vp.sign.factor();
    let (caf, car) = (s * vp.c_af, s * vp.c_ar);
    let ic = vp.ic();
    let mu = vp.m * vp.u;
    let k = 1.0 + vp.m_s * vp.m_s * vp.h_s * vp.h_s / (vp.m * ic);
    let msh = vp.m_s * vp.h_s;
    let gravity = vp.m_s * vp.g * vp.h_s * vp.phi_r.cos() * vp.theta_r.cos();
    let moment = vp.l_f * caf - vp.l_r * car;

    let mut a = DMatrix::zeros(4, 4);
    a[(0, 0)] = k * (caf + car) / mu;
    a[(0, 1)] = k * moment / (mu * vp.u) - 1.0;
    a[(0, 2)] = msh * (gravity - vp.k_phi) / (mu * ic);
    a[(0, 3)] = -msh * vp.c_phi / (mu * ic);
    a[(1, 0)] = moment / vp.i_z;
    a[(1, 1)] = (vp.l_f * vp.l_f * caf + vp.l_r * vp.l_r * car) / (vp.i_z * vp.u);
    a[(2, 3)] = 1.0;
    a[(3, 0)] = msh * (caf + car) / (mu * ic);
    a[(3, 1)] = msh * moment / (mu * ic);
    a[(3, 2)] = (gravity - vp.k_phi) / ic;
    a[(3, 3)] = -vp.c_phi / ic;

    let b = DVector::from_vec(vec![-caf / mu, -vp.l_f * caf / vp.i_z, 0.0, -msh * caf / (mu * ic)]);
    (a, b)
}

/// State-space form of the lateral-roll model (`n = 4`, one input).
pub fn build_vehicle_system(vp: &VehicleParams) -> Result<LinearSystem> {
    vp.validate()?;
    let (a, b) = vehicle_matrices(vp);
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("vehicle matrices".into()));
    }
    LinearSystem::new(a, DMatrix::from_column_slice(4, 1, b.as_slice()))
}

/// The published variation box around the nominal values, angles in radians.
pub fn vehicle_parameter_box() -> ParameterBox {
    let deg = std::f64::consts::PI / 180.0;
    ParameterBox::new(
        UNCERTAIN_PARAMETERS.iter().map(|s| s.to_string()).collect(),
        vec![56280.0, 57890.0, 25200.0, 2100.0, 0.0, 0.0],
        vec![104520.0, 107510.0, 46800.0, 3900.0, 4.0 * deg, 8.0 * deg],
    )
    .expect("static vehicle box is valid")
}

/// Uncertain vehicle over [`vehicle_parameter_box`]; the nominal values of
/// the uncertain parameters in `vpn` are ignored.
pub fn make_uncertain_vehicle(vpn: &VehicleParams) -> Result<ParameterizedSystem> {
    vpn.validate()?;
    let nominal = vpn.clone();
    Ok(ParameterizedSystem::new(vehicle_parameter_box(), 4, 1, move |m| {
        let (a, b) = vehicle_matrices(&nominal.with_uncertain(m));
        LinearSystem::new(a, DMatrix::from_column_slice(4, 1, b.as_slice()))
            .expect("vehicle matrices have fixed shape")
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{element_bounds, Corner, Level};
    use crate::tying::{extremal_corners, scan_monotonicity, select_vertex_models, Direction, ScanOptions};

    /// Entry-by-entry transcription, written independently of `vehicle_matrices`.
    fn oracle(vp: &VehicleParams) -> [[f64; 5]; 4] {
        let VehicleParams {
            m,
            m_s,
            i_z,
            i_xs,
            l_f,
            l_r,
            h_s,
            c_af,
            c_ar,
            k_phi,
            c_phi,
            phi_r,
            theta_r,
            u,
            g,
            ..
        } = vp.clone();
        let ic = i_xs - (m_s * h_s).powi(2) / m;
        let cc = phi_r.cos() * theta_r.cos();
        let gain = 1.0 + (m_s * h_s).powi(2) / (m * ic);
        [
            [
                gain * (c_af + c_ar) / (m * u),
                gain * (l_f * c_af - l_r * c_ar) / (m * u * u) - 1.0,
                m_s * h_s * (m_s * g * h_s * cc - k_phi) / (m * u * ic),
                -(m_s * h_s * c_phi) / (m * u * ic),
                -c_af / (m * u),
            ],
            [
                (l_f * c_af - l_r * c_ar) / i_z,
                (l_f.powi(2) * c_af + l_r.powi(2) * c_ar) / (i_z * u),
                0.0,
                0.0,
                -(l_f * c_af) / i_z,
            ],
            [0.0, 0.0, 0.0, 1.0, 0.0],
            [
                m_s * h_s * (c_af + c_ar) / (m * u * ic),
                m_s * h_s * (l_f * c_af - l_r * c_ar) / (m * u * ic),
                (m_s * g * h_s * cc - k_phi) / ic,
                -c_phi / ic,
                -(m_s * h_s * c_af) / (m * u * ic),
            ],
        ]
    }

    fn assert_matches_oracle(vp: &VehicleParams) {
        let sys = build_vehicle_system(vp).unwrap();
        let o = oracle(vp);
        for i in 0..4 {
            for j in 0..4 {
                let (x, y) = (sys.a()[(i, j)], o[i][j]);
                assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0), "A[{i}][{j}] {x} vs {y}");
            }
            let (x, y) = (sys.b()[(i, 0)], o[i][4]);
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0), "B[{i}] {x} vs {y}");
        }
    }

    #[test]
    fn nominal_matches_independent_transcription() {
        assert_matches_oracle(&VehicleParams::default());
        let tilted = VehicleParams {
            phi_r: 0.05,
            theta_r: 0.1,
            ..VehicleParams::default()
        };
        assert_matches_oracle(&tilted);
    }

    #[test]
    fn roll_damping_entry() {
        let vp = VehicleParams::default();
        let ic = 500.0 - 1370.0f64.powi(2) * 0.45f64.powi(2) / 1530.0;
        let sys = build_vehicle_system(&vp).unwrap();
        assert!((sys.a()[(3, 3)] + 3000.0 / ic).abs() < 1e-12);
        assert!((ic - 251.586_764_705_882_35).abs() < 1e-9);
    }

    #[test]
    fn zero_angles_simplify() {
        let vp = VehicleParams::default();
        let sys = build_vehicle_system(&vp).unwrap();
        let expected = vp.m_s * vp.h_s * (vp.m_s * vp.g * vp.h_s - vp.k_phi) / (vp.m * vp.u * vp.ic());
        assert!((sys.a()[(0, 2)] - expected).abs() < 1e-12 * expected.abs());
    }

    #[test]
    fn speed_scaling() {
        let slow = VehicleParams::default();
        let fast = VehicleParams {
            u: 2.0 * slow.u,
            ..slow.clone()
        };
        let a1 = build_vehicle_system(&slow).unwrap();
        let a2 = build_vehicle_system(&fast).unwrap();
        assert_eq!(a1.a()[(1, 0)], a2.a()[(1, 0)]);
        assert!((a2.a()[(1, 1)] - 0.5 * a1.a()[(1, 1)]).abs() < 1e-12);
    }

    #[test]
    fn kinematic_row() {
        let sys = build_vehicle_system(&VehicleParams::default()).unwrap();
        let row: Vec<f64> = (0..4).map(|j| sys.a()[(2, j)]).collect();
        assert_eq!(row, vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn standard_sign_negates_stiffness_terms() {
        let printed = build_vehicle_system(&VehicleParams::default()).unwrap();
        let standard = build_vehicle_system(&VehicleParams {
            sign: SignConvention::Standard,
            ..VehicleParams::default()
        })
        .unwrap();
        assert!((printed.a()[(0, 0)] + standard.a()[(0, 0)]).abs() < 1e-12);
        assert!((printed.b()[(1, 0)] + standard.b()[(1, 0)]).abs() < 1e-12);
        assert_eq!(printed.a()[(0, 2)], standard.a()[(0, 2)]);
        let eig = standard.a().clone().complex_eigenvalues();
        assert!(eig.iter().all(|z| z.re < 0.0), "{eig:?}");
    }

    #[test]
    fn rejects_non_positive_ic() {
        let vp = VehicleParams {
            i_xs: 100.0,
            ..VehicleParams::default()
        };
        assert!(matches!(build_vehicle_system(&vp), Err(Error::NonPositiveIc { .. })));
        assert!(matches!(make_uncertain_vehicle(&vp), Err(Error::NonPositiveIc { .. })));
    }

    #[test]
    fn box_membership_and_center() {
        let pbox = vehicle_parameter_box();
        let nominal = VehicleParams::default().uncertain();
        assert!(pbox.contains(&nominal));
        assert!(!pbox.contains(&nominal.with(0, 110000.0)));
        let center = pbox.center();
        assert!((center.values()[0] - 80400.0).abs() < 1e-9);
        assert!((center.values()[1] - 82700.0).abs() < 1e-9);
        assert!((center.values()[2] - 36000.0).abs() < 1e-9);
        assert!((center.values()[3] - 3000.0).abs() < 1e-9);
    }

    #[test]
    fn corner_evaluations() {
        let vp = VehicleParams::default();
        let ps = make_uncertain_vehicle(&vp).unwrap();
        for level in [Level::Low, Level::High] {
            let corner = Corner::all(6, level);
            let m = ps.parameter_box().corner_vector(&corner).unwrap();
            let sys = ps.eval_at_corner(&corner).unwrap();
            let direct = build_vehicle_system(&vp.with_uncertain(&m)).unwrap();
            assert_eq!(sys, direct);
        }
    }

    #[test]
    fn tying_directions() {
        let ps = make_uncertain_vehicle(&VehicleParams::default()).unwrap();
        let report = scan_monotonicity(&ps, &ScanOptions::default()).unwrap();
        assert!(report.all_monotone());
        // A13 falls with grade and with roll stiffness
        assert_eq!(report.direction(5, 0, 2), Direction::Decreasing);
        assert_eq!(report.direction(2, 0, 2), Direction::Decreasing);
        assert_eq!(report.direction(0, 0, 1), Direction::Increasing);
        assert_eq!(report.direction(1, 0, 1), Direction::Decreasing);
        let templates = extremal_corners(&report).unwrap();
        let a12 = templates.iter().find(|t| (t.row, t.col) == (0, 1)).unwrap();
        assert_eq!(a12.argmax.to_string(), "HL****");
        assert_eq!(a12.argmin.to_string(), "LH****");
    }

    #[test]
    fn corners_attain_grid_extremes() {
        let ps = make_uncertain_vehicle(&VehicleParams::default()).unwrap();
        let report = scan_monotonicity(&ps, &ScanOptions::default()).unwrap();
        let bounds = element_bounds(&ps, &report).unwrap();
        let pbox = ps.parameter_box();
        let mut lo = DMatrix::from_element(4, 4, f64::INFINITY);
        let mut hi = DMatrix::from_element(4, 4, f64::NEG_INFINITY);
        for idx in 0..5usize.pow(6) {
            let mut rem = idx;
            let values: Vec<f64> = (0..6)
                .map(|l| {
                    let t = (rem % 5) as f64 / 4.0;
                    rem /= 5;
                    pbox.lower()[l] + t * (pbox.upper()[l] - pbox.lower()[l])
                })
                .collect();
            let a = ps.eval(&ParameterVector::new(values)).unwrap().into_parts().0;
            lo = lo.zip_map(&a, f64::min);
            hi = hi.zip_map(&a, f64::max);
        }
        for i in 0..4 {
            for j in 0..4 {
                let scale = hi[(i, j)].abs().max(1.0);
                assert!((bounds.lb()[(i, j)] - lo[(i, j)]).abs() <= 1e-12 * scale);
                assert!((bounds.ub()[(i, j)] - hi[(i, j)]).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn four_vertex_models_cover_every_extreme() {
        for sign in [SignConvention::AsPrinted, SignConvention::Standard] {
            let ps = make_uncertain_vehicle(&VehicleParams {
                sign,
                ..VehicleParams::default()
            })
            .unwrap();
            let report = scan_monotonicity(&ps, &ScanOptions::default()).unwrap();
            let templates = extremal_corners(&report).unwrap();
            let set = select_vertex_models(&ps, &templates, 1e-10).unwrap();
            // A11 needs (H,H) and (L,L) in the stiffnesses, A12 needs (H,L) and (L,H)
            assert_eq!(set.len(), 4);
            for t in &templates {
                assert!(set.corners.iter().any(|c| t.argmax.matches(c)));
                assert!(set.corners.iter().any(|c| t.argmin.matches(c)));
            }
        }
    }
}

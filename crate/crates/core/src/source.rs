//! States produced by the interferometric pair source.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::Basis;
use crate::fock::{DensityMatrix, FockKet, PureState, C64, ONE, ZERO};
use crate::optics::{beamsplitter_unitary, BALANCED};

/// Pair-source parameters: contamination `R` and visibility `V`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "V")]
    pub v: f64,
}

pub(crate) fn check_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::InvalidParameter {
            name,
            value,
            reason: "must lie in [0, 1]",
        });
    }
    Ok(())
}

impl SourceParams {
    pub fn new(r: f64, v: f64) -> Result<Self> {
        check_unit_interval("R", r)?;
        check_unit_interval("V", v)?;
        Ok(Self { r, v })
    }

    pub fn validate(&self) -> Result<()> {
        check_unit_interval("R", self.r)?;
        check_unit_interval("V", self.v)
    }

    /// `V |psi_in(R)><psi_in(R)| + (1 - V) I/3`.
    pub fn state(&self) -> Result<DensityMatrix> {
        noisy_state(&input_state(self.r)?, self.v)
    }
}

/// `(|2;0> + |0;2>)/sqrt2`.
pub fn noon_state() -> PureState {
    PureState::spin1(Vector3::new(ONE, ZERO, ONE).scale(FRAC_1_SQRT_2)).expect("non-zero vector")
}

/// Unnormalized `sqrt(R) e^{i zeta} U_BS|2;0> + sqrt(1-R) |NOON>`.
fn raw_input(r: f64, zeta: f64) -> Vector3<C64> {
    let bs = beamsplitter_unitary(BALANCED, Basis::Spin1)
        .to_matrix3()
        .expect("spin-1 rep");
    let side = bs * FockKet::TwoZero.ket();
    let noon = noon_state().as_spin1().expect("spin-1");
    side * C64::from_polar(r.sqrt(), zeta) + noon.scale((1.0 - r).sqrt())
}

/// Source output with a fraction `R` of pairs born before the first splitter.
pub fn input_state(r: f64) -> Result<PureState> {
    input_state_with_phase(r, 0.0)
}

/// As [`input_state`], with relative phase `zeta` on the contamination term.
pub fn input_state_with_phase(r: f64, zeta: f64) -> Result<PureState> {
    check_unit_interval("R", r)?;
    PureState::spin1(raw_input(r, zeta))
}

/// `1 / |raw superposition|`, the constant actually needed to normalize.
pub fn normalization_constant(r: f64, zeta: f64) -> Result<f64> {
    check_unit_interval("R", r)?;
    Ok(1.0 / raw_input(r, zeta).norm())
}

/// The closed form `1 / sqrt(1 + 2R(1-R))`, reported for comparison with
/// [`normalization_constant`].
pub fn printed_normalization(r: f64) -> f64 {
    1.0 / (1.0 + 2.0 * r * (1.0 - r)).sqrt()
}

/// `V |psi><psi| + (1 - V) I/3`.
pub fn noisy_state(psi: &PureState, v: f64) -> Result<DensityMatrix> {
    check_unit_interval("V", v)?;
    let pure = DensityMatrix::pure(psi)?;
    DensityMatrix::mixture(&[(v, &pure), (1.0 - v, &DensityMatrix::maximally_mixed())])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::c;
    use crate::spin::{spin_matrices, SpinDirection};
    use crate::tomography::predicted_probs;
    use nalgebra::DMatrix;

    #[test]
    fn noon_amplitudes_and_moments() {
        let noon = noon_state();
        let a = noon.as_spin1().unwrap();
        assert!((a[0].re - FRAC_1_SQRT_2).abs() < 1e-15 && a[1] == ZERO);
        assert!((a[2].re - FRAC_1_SQRT_2).abs() < 1e-15);
        let lz = spin_matrices().lz;
        let lz_d = DMatrix::from_column_slice(3, 3, lz.as_slice());
        assert!(noon.expectation(&lz_d).abs() < 1e-15);
        let rho = DensityMatrix::pure(&noon).unwrap();
        let p = predicted_probs(&rho, &SpinDirection::z());
        let (_, second) = crate::spin::moments_from_probs(p).unwrap();
        assert!((second - 1.0).abs() < 1e-12);
    }

    #[test]
    fn input_state_limits() {
        let r0 = input_state(0.0).unwrap();
        assert!((r0.as_spin1().unwrap() - noon_state().as_spin1().unwrap()).norm() < 1e-15);
        let r1 = input_state(1.0).unwrap().as_spin1().unwrap();
        let expect = Vector3::new(c(0.5, 0.0), c(0.0, -FRAC_1_SQRT_2), c(-0.5, 0.0));
        assert!((r1 - expect).norm() < 1e-15);
    }

    #[test]
    fn contamination_amplitude() {
        let r = 0.024;
        let psi = input_state(r).unwrap();
        let raw_norm = 1.0 / normalization_constant(r, 0.0).unwrap();
        let expect = (r / 2.0).sqrt() / raw_norm;
        assert!((psi.amplitude(FockKet::OneOne).unwrap().norm() - expect).abs() < 1e-12);
        // The cross term vanishes, so the raw vector is already unit norm.
        assert!((raw_norm - 1.0).abs() < 1e-12);
        assert!(
            (printed_normalization(r) - 1.0 / (1.0 + 2.0 * r * (1.0 - r)).sqrt()).abs() < 1e-15
        );
    }

    #[test]
    fn input_state_norm_on_grid() {
        for k in 0..=100 {
            let r = k as f64 / 100.0;
            for zeta in [0.0, 0.7, 2.5] {
                let psi = input_state_with_phase(r, zeta).unwrap();
                assert!((psi.amplitudes().norm_squared() - 1.0).abs() < 1e-12);
            }
        }
        assert!(input_state(1.5).is_err());
    }

    #[test]
    fn input_state_is_continuous() {
        for k in 1..100 {
            let r = k as f64 / 100.0;
            let a = input_state(r).unwrap().as_spin1().unwrap();
            let b = input_state(r + 1e-7).unwrap().as_spin1().unwrap();
            assert!((a - b).norm() < 1e-4);
        }
    }

    #[test]
    fn noon_overlap_decreases_with_contamination() {
        let noon = noon_state();
        let mut prev = f64::INFINITY;
        for k in 0..=200 {
            let r = k as f64 / 200.0;
            let o = noon.inner(&input_state(r).unwrap()).unwrap().norm_sqr();
            assert!(o <= prev + 1e-14);
            prev = o;
        }
    }

    #[test]
    fn noisy_state_limits_and_spectrum() {
        let noon = noon_state();
        let pure = noisy_state(&noon, 1.0).unwrap();
        assert!((pure.entries() - DensityMatrix::pure(&noon).unwrap().entries()).norm() < 1e-15);
        let mixed = noisy_state(&noon, 0.0).unwrap();
        assert!((mixed.entries() - DensityMatrix::maximally_mixed().entries()).norm() < 1e-15);
        let ev = noisy_state(&noon, 0.97).unwrap().eigenvalues();
        assert!((ev[0] - 0.98).abs() < 1e-12);
        assert!((ev[1] - 0.01).abs() < 1e-12 && (ev[2] - 0.01).abs() < 1e-12);
        assert!(noisy_state(&noon, -0.1).is_err());
    }

    #[test]
    fn noisy_state_is_physical_on_grid() {
        for k in 0..=20 {
            let v = k as f64 / 20.0;
            let rho = SourceParams::new(0.3, v).unwrap().state().unwrap();
            assert!((rho.entries().trace().re - 1.0).abs() < 1e-12);
            assert!(rho.is_psd(-1e-12));
        }
    }

    #[test]
    fn params_json() {
        let p: SourceParams = serde_json::from_str(r#"{"R": 0.024, "V": 0.98}"#).unwrap();
        assert_eq!(p, SourceParams { r: 0.024, v: 0.98 });
        assert_eq!(
            serde_json::to_string(&p).unwrap(),
            r#"{"R":0.024,"V":0.98}"#
        );
        assert!(SourceParams::new(0.5, 1.2).is_err());
    }
}

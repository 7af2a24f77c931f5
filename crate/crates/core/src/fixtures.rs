//! Bundled reference measurements used by the replication suite.

use nalgebra::Matrix3;
use serde::Deserialize;

use crate::error::Result;
use crate::fock::{DensityMatrix, ReIm, C64};
use crate::tomography::TomographyFile;

pub const REFERENCE_JSON: &str = include_str!("../fixtures/reference.json");
/// The tomography table alone, in the tomography input file format.
pub const TABLE_JSON: &str = include_str!("../fixtures/table.json");

#[derive(Debug, Clone, Deserialize)]
pub struct Scalar {
    pub value: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Triple {
    pub value: [f64; 3],
}

#[derive(Debug, Clone, Deserialize)]
pub struct ConsistencyReference {
    pub residual_l1: f64,
    pub residual_l2: f64,
    pub residual_lz: f64,
    pub lz_measured: f64,
    pub lz_predicted: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct FringeReference {
    #[serde(rename = "N")]
    pub n: [f64; 3],
    pub visibility: [f64; 3],
    pub visibility_error: f64,
    #[serde(rename = "R")]
    pub r: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Reference {
    pub tomography: TomographyFile,
    rho_raw: ReIm,
    rho_ml: ReIm,
    pub eigenvalues_raw: Triple,
    pub trace_norm_raw_ml: Scalar,
    pub consistency: ConsistencyReference,
    pub fringe: FringeReference,
}

impl Reference {
    pub fn load() -> Result<Self> {
        Ok(serde_json::from_str(REFERENCE_JSON)?)
    }

    /// Linear-inversion matrix entries exactly as printed.
    pub fn rho_raw_printed(&self) -> Matrix3<C64> {
        Matrix3::from(&self.rho_raw)
    }

    pub fn rho_ml_printed(&self) -> Matrix3<C64> {
        Matrix3::from(&self.rho_ml)
    }

    /// Printed matrix divided by its (rounded) trace.
    pub fn rho_raw(&self) -> Result<DensityMatrix> {
        DensityMatrix::normalized(self.rho_raw_printed())
    }

    pub fn rho_ml(&self) -> Result<DensityMatrix> {
        DensityMatrix::normalized(self.rho_ml_printed())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_loads() {
        let r = Reference::load().unwrap();
        assert_eq!(r.tomography.directions.len(), 5);
        assert!((r.rho_raw_printed()[(0, 2)] - C64::new(0.466, -0.143)).norm() < 1e-15);
        assert!((r.rho_raw_printed().trace().re - 0.999).abs() < 1e-12);
        assert!((r.rho_raw().unwrap().entries().trace().re - 1.0).abs() < 1e-12);
        assert!((r.rho_ml().unwrap().entries().trace().re - 1.0).abs() < 1e-12);
        assert_eq!(r.fringe.n, [14830.0, 10535.0, 8353.0]);
    }

    #[test]
    fn table_matches_reference() {
        let table: TomographyFile = serde_json::from_str(TABLE_JSON).unwrap();
        let r = Reference::load().unwrap();
        for (a, b) in table.directions.iter().zip(&r.tomography.directions) {
            assert_eq!(a.probs, b.probs);
        }
        assert_eq!(table.lz_mean().unwrap(), Some(0.054));
    }
}

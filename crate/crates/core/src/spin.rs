//! Spin-1 algebra of two photons in two modes.
//!
//! With `c`, `d` the mode operators, `Lx = (c'd + cd')/2`,
//! `Ly = -i(c'd - cd')/2` and `Lz = (c'c - d'd)/2`. On the symmetric
//! two-photon space these are the usual spin-1 matrices.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{c, C64, ONE, ZERO};

/// A unit vector selecting the observable `n . L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinDirection(Vector3<f64>);

impl SpinDirection {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let n = Vector3::new(x, y, z);
        let norm = n.norm();
        if !((norm - 1.0).abs() <= 1e-12) {
            return Err(Error::NotUnit { norm });
        }
        Ok(Self(n))
    }

    /// Normalizes an arbitrary non-zero vector.
    pub fn along(v: Vector3<f64>) -> Result<Self> {
        let norm = v.norm();
        if !(norm > 1e-300) || !norm.is_finite() {
            return Err(Error::NotUnit { norm });
        }
        Ok(Self(v / norm))
    }

    pub fn vector(&self) -> Vector3<f64> {
        self.0
    }

    pub fn z() -> Self {
        Self(Vector3::z())
    }

    /// Resolves `L1`..`L5` (the tomography directions) and `Lx`, `Ly`, `Lz`.
    pub fn named(name: &str) -> Result<Self> {
        let dirs = five_directions();
        match name {
            "L1" | "Lx" => Ok(dirs[0]),
            "L2" | "Ly" => Ok(dirs[1]),
            "L3" => Ok(dirs[2]),
            "L4" => Ok(dirs[3]),
            "L5" => Ok(dirs[4]),
            "Lz" => Ok(Self::z()),
            other => Err(Error::UnknownDirection(other.to_string())),
        }
    }

    pub fn operator(&self) -> Matrix3<C64> {
        direction_operator(self)
    }
}

impl Serialize for SpinDirection {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.0.x, self.0.y, self.0.z].serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpinDirection {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Vector([f64; 3]),
            Name(String),
        }
        match Repr::deserialize(d)? {
            Repr::Vector([x, y, z]) => {
                // decimal files lose the last few bits of 1/sqrt(2)
                let v = Vector3::new(x, y, z);
                let norm = v.norm();
                if (norm - 1.0).abs() > 1e-9 {
                    return Err(serde::de::Error::custom(Error::NotUnit { norm }));
                }
                Ok(SpinDirection(v / norm))
            }
            Repr::Name(name) => SpinDirection::named(&name).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinOperatorTriple {
    pub lx: Matrix3<C64>,
    pub ly: Matrix3<C64>,
    pub lz: Matrix3<C64>,
}

impl SpinOperatorTriple {
    pub fn as_array(&self) -> [Matrix3<C64>; 3] {
        [self.lx, self.ly, self.lz]
    }
}

pub fn spin_matrices() -> SpinOperatorTriple {
    let s = c(FRAC_1_SQRT_2, 0.0);
    let is = c(0.0, FRAC_1_SQRT_2);
    SpinOperatorTriple {
        lx: Matrix3::new(
            ZERO, s, ZERO, //
            s, ZERO, s, //
            ZERO, s, ZERO,
        ),
        ly: Matrix3::new(
            ZERO, -is, ZERO, //
            is, ZERO, -is, //
            ZERO, is, ZERO,
        ),
        lz: Matrix3::new(
            ONE, ZERO, ZERO, //
            ZERO, ZERO, ZERO, //
            ZERO, ZERO, -ONE,
        ),
    }
}

/// `n . L`.
pub fn direction_operator(n: &SpinDirection) -> Matrix3<C64> {
    let l = spin_matrices();
    let v = n.vector();
    l.lx.scale(v.x) + l.ly.scale(v.y) + l.lz.scale(v.z)
}

/// The five tomography directions, in order `L1`..`L5`.
pub fn five_directions() -> [SpinDirection; 5] {
    let h = FRAC_1_SQRT_2;
    [
        SpinDirection(Vector3::new(1.0, 0.0, 0.0)),
        SpinDirection(Vector3::new(0.0, 1.0, 0.0)),
        SpinDirection(Vector3::new(h, h, 0.0)),
        SpinDirection(Vector3::new(0.0, h, h)),
        SpinDirection(Vector3::new(h, 0.0, h)),
    ]
}

pub const DIRECTION_NAMES: [&str; 5] = ["L1", "L2", "L3", "L4", "L5"];

/// Eigenprojectors of `n . L` onto eigenvalues `+1, 0, -1`.
///
/// Since the spectrum is always `{1, 0, -1}`, `P(+-1) = (L^2 +- L)/2` and
/// `P(0) = I - L^2`; no eigenvector phase choice is involved.
pub fn eigenprojectors(n: &SpinDirection) -> [Matrix3<C64>; 3] {
    let l = direction_operator(n);
    let l2 = l * l;
    [
        (l2 + l).scale(0.5),
        Matrix3::identity() - l2,
        (l2 - l).scale(0.5),
    ]
}

/// First and second moments of a spin component from its outcome
/// probabilities `(P+, P0, P-)`: `<L> = P+ - P-`, `<L^2> = P+ + P-`.
pub fn moments_from_probs(probs: [f64; 3]) -> Result<(f64, f64)> {
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::Invalid(format!(
            "outcome probabilities must be non-negative, got {probs:?}"
        )));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::Normalization { sum });
    }
    Ok((probs[0] - probs[2], probs[0] + probs[2]))
}

/// `exp(-i angle n.L)`. Uses `(n.L)^3 = n.L` for spin 1.
pub fn rotation(n: &SpinDirection, angle: f64) -> Matrix3<C64> {
    let l = direction_operator(n);
    Matrix3::identity() - l * c(0.0, angle.sin()) + (l * l).scale(angle.cos() - 1.0)
}

/// Traceless Hermitian basis with `Tr(a b) = 2 delta_ab`.
///
/// `lambda1` is `(Lx, Ly, Lz)`. `lambda2` is the Gram-Schmidt
/// orthonormalization of `{LxLy+LyLx, LyLz+LzLy, LzLx+LxLz, Lx^2-Ly^2,
/// 3Lz^2-2}`, in that order.
#[derive(Debug, Clone)]
pub struct OperatorBasis {
    pub lambda1: [Matrix3<C64>; 3],
    pub lambda2: [Matrix3<C64>; 5],
}

fn hs(a: &Matrix3<C64>, b: &Matrix3<C64>) -> C64 {
    (a.adjoint() * b).trace()
}

pub fn operator_basis() -> OperatorBasis {
    let SpinOperatorTriple { lx, ly, lz } = spin_matrices();
    let raw = [
        lx * ly + ly * lx,
        ly * lz + lz * ly,
        lz * lx + lx * lz,
        lx * lx - ly * ly,
        (lz * lz).scale(3.0) - Matrix3::identity().scale(2.0),
    ];
    let mut done: Vec<Matrix3<C64>> = Vec::with_capacity(5);
    for m in raw {
        let mut v = m;
        for q in &done {
            v -= q * (hs(q, &v) / 2.0);
        }
        let norm = hs(&v, &v).re.sqrt();
        done.push(v.scale(2f64.sqrt() / norm));
    }
    OperatorBasis {
        lambda1: [lx, ly, lz],
        lambda2: [done[0], done[1], done[2], done[3], done[4]],
    }
}

impl OperatorBasis {
    pub fn all(&self) -> impl Iterator<Item = &Matrix3<C64>> {
        self.lambda1.iter().chain(self.lambda2.iter())
    }

    /// `<lambda_a> = Tr(rho lambda_a)` for all eight operators.
    pub fn expand(&self, rho: &Matrix3<C64>) -> [f64; 8] {
        let mut out = [0.0; 8];
        for (o, l) in out.iter_mut().zip(self.all()) {
            *o = (rho * l).trace().re;
        }
        out
    }

    /// `I/3 + 1/2 sum_a coeff_a lambda_a`.
    pub fn reconstruct(&self, coeffs: &[f64; 8]) -> Matrix3<C64> {
        self.all()
            .zip(coeffs)
            .fold(Matrix3::identity().scale(1.0 / 3.0), |acc, (l, w)| {
                acc + l.scale(0.5 * w)
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{eigenvalues_hermitian, FockKet};
    use nalgebra::DMatrix;

    fn close(a: &Matrix3<C64>, b: &Matrix3<C64>, tol: f64) -> bool {
        (a - b).iter().all(|z| z.norm() <= tol)
    }

    fn spectrum(m: &Matrix3<C64>) -> Vec<f64> {
        eigenvalues_hermitian(&DMatrix::from_column_slice(3, 3, m.as_slice())).unwrap()
    }

    #[test]
    fn lz_acts_on_basis_kets() {
        let l = spin_matrices();
        assert_eq!(l.lz * FockKet::TwoZero.ket(), FockKet::TwoZero.ket());
        assert_eq!(l.lz * FockKet::ZeroTwo.ket(), -FockKet::ZeroTwo.ket());
        assert_eq!(l.lz * FockKet::OneOne.ket(), nalgebra::Vector3::zeros());
    }

    #[test]
    fn commutators_and_casimir() {
        let SpinOperatorTriple { lx, ly, lz } = spin_matrices();
        let i = c(0.0, 1.0);
        assert!(close(&(lx * ly - ly * lx), &(lz * i), 1e-12));
        assert!(close(&(ly * lz - lz * ly), &(lx * i), 1e-12));
        assert!(close(&(lz * lx - lx * lz), &(ly * i), 1e-12));
        let casimir = lx * lx + ly * ly + lz * lz;
        assert!(close(&casimir, &Matrix3::identity().scale(2.0), 1e-12));
    }

    #[test]
    fn named_and_tabulated_directions() {
        let d = five_directions();
        assert_eq!(d[0].vector(), Vector3::new(1.0, 0.0, 0.0));
        let h = FRAC_1_SQRT_2;
        assert_eq!(d[3].vector(), Vector3::new(0.0, h, h));
        for (a, da) in d.iter().enumerate() {
            assert!((da.vector().norm() - 1.0).abs() < 1e-12);
            for db in &d[a + 1..] {
                assert!((da.vector() - db.vector()).norm() > 0.1);
            }
        }
        let l = spin_matrices();
        assert!(close(&direction_operator(&d[0]), &l.lx, 0.0));
        assert!(close(
            &direction_operator(&d[2]),
            &(l.lx + l.ly).scale(h),
            1e-15
        ));
        assert!(SpinDirection::named("L6").is_err());
    }

    #[test]
    fn direction_operator_spectrum() {
        for n in five_directions() {
            let s = spectrum(&direction_operator(&n));
            assert!((s[0] - 1.0).abs() < 1e-12 && s[1].abs() < 1e-12 && (s[2] + 1.0).abs() < 1e-12);
        }
        assert!(SpinDirection::new(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn projectors_resolve_identity() {
        for n in five_directions() {
            let [p, z, m] = eigenprojectors(&n);
            assert!(close(&(p + z + m), &Matrix3::identity(), 1e-12));
            assert!(close(&(p * p), &p, 1e-12));
            assert!(close(&(p - m), &direction_operator(&n), 1e-12));
        }
    }

    #[test]
    fn moments_examples() {
        let raw = [0.333, 0.027, 0.655];
        let sum: f64 = raw.iter().sum();
        let (first, _) = moments_from_probs(raw.map(|p| p / sum)).unwrap();
        assert!((first * sum - (-0.322)).abs() < 1e-12);
        assert_eq!(moments_from_probs([0.0, 1.0, 0.0]).unwrap(), (0.0, 0.0));
        assert_eq!(moments_from_probs([0.5, 0.0, 0.5]).unwrap(), (0.0, 1.0));
        match moments_from_probs([0.5, 0.5, 0.5]) {
            Err(Error::Normalization { sum }) => assert!((sum - 1.5).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn operator_basis_is_orthonormal_and_traceless() {
        let basis = operator_basis();
        let all: Vec<_> = basis.all().copied().collect();
        assert_eq!(all.len(), 8);
        for (a, la) in all.iter().enumerate() {
            assert!(la.trace().norm() < 1e-12);
            assert!(close(la, &la.adjoint(), 1e-12));
            for (b, lb) in all.iter().enumerate() {
                let expect = if a == b { 2.0 } else { 0.0 };
                assert!((hs(la, lb) - c(expect, 0.0)).norm() < 1e-12, "{a} {b}");
            }
        }
    }

    #[test]
    fn rotation_is_unitary() {
        let n = SpinDirection::along(Vector3::new(0.3, -0.4, 0.8)).unwrap();
        let u = rotation(&n, 1.234);
        assert!(close(&(u.adjoint() * u), &Matrix3::identity(), 1e-12));
    }

    #[test]
    fn direction_json_accepts_names_and_vectors() {
        let d: SpinDirection = serde_json::from_str("\"L4\"").unwrap();
        assert_eq!(d, five_directions()[3]);
        let d: SpinDirection = serde_json::from_str("[0.0, 0.0, 1.0]").unwrap();
        assert_eq!(d, SpinDirection::z());
        assert!(serde_json::from_str::<SpinDirection>("[1.0, 1.0, 0.0]").is_err());
        let text = serde_json::to_string(&five_directions()[0]).unwrap();
        assert_eq!(text, "[1.0,0.0,0.0]");
    }
}

//! States and operators on the two-photon Fock spaces.
//!
//! Two bases are used throughout, always in this order:
//!
//! * spin-1 / bosonic: `|2;0>, |1;1>, |0;2>` (photons in modes c;d),
//! * two-color: `|is;0>, |i;s>, |s;i>, |0;is>`, i.e. the tensor product of
//!   the idler mode and the signal mode, idler index major.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4x3, Vector3, Vector4};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Tolerance for objects built in memory.
pub const CONSTRUCT_TOL: f64 = 1e-12;
/// Tolerance for objects read back from decimal files.
pub const IO_TOL: f64 = 1e-9;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// The four two-color kets, in basis order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TwoColorKet {
    /// `|is;0>`: both photons in mode c.
    BothInC,
    /// `|i;s>`: idler in c, signal in d.
    IdlerCSignalD,
    /// `|s;i>`: signal in c, idler in d.
    SignalCIdlerD,
    /// `|0;is>`: both photons in mode d.
    BothInD,
}

impl TwoColorKet {
    pub const ALL: [TwoColorKet; 4] = [
        TwoColorKet::BothInC,
        TwoColorKet::IdlerCSignalD,
        TwoColorKet::SignalCIdlerD,
        TwoColorKet::BothInD,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Spatial mode (0 = c, 1 = d) of the idler and the signal photon.
    pub fn modes(self) -> (usize, usize) {
        let i = self.index();
        (i / 2, i % 2)
    }

    pub fn ket(self) -> Vector4<C64> {
        let mut v = Vector4::zeros();
        v[self.index()] = ONE;
        v
    }
}

/// The three symmetric two-photon kets, in basis order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FockKet {
    TwoZero,
    OneOne,
    ZeroTwo,
}

impl FockKet {
    pub const ALL: [FockKet; 3] = [FockKet::TwoZero, FockKet::OneOne, FockKet::ZeroTwo];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Photon numbers `(n_c, n_d)`.
    pub fn occupation(self) -> (u8, u8) {
        match self {
            FockKet::TwoZero => (2, 0),
            FockKet::OneOne => (1, 1),
            FockKet::ZeroTwo => (0, 2),
        }
    }

    /// Eigenvalue of `Lz = (n_c - n_d) / 2`.
    pub fn lz(self) -> f64 {
        let (nc, nd) = self.occupation();
        (f64::from(nc) - f64::from(nd)) / 2.0
    }

    pub fn ket(self) -> Vector3<C64> {
        let mut v = Vector3::zeros();
        v[self.index()] = ONE;
        v
    }

    pub fn label(self) -> &'static str {
        match self {
            FockKet::TwoZero => "2;0",
            FockKet::OneOne => "1;1",
            FockKet::ZeroTwo => "0;2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    Spin1,
    TwoColor,
}

impl Basis {
    pub fn dim(self) -> usize {
        match self {
            Basis::Spin1 => 3,
            Basis::TwoColor => 4,
        }
    }
}

/// Isometry embedding the spin-1 basis into the two-color space.
pub fn symmetric_embedding() -> Matrix4x3<C64> {
    let s = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    Matrix4x3::new(
        ONE, ZERO, ZERO, //
        ZERO, s, ZERO, //
        ZERO, s, ZERO, //
        ZERO, ZERO, ONE,
    )
}

/// Unit-norm amplitude vector over one of the two bases.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: DVector<C64>,
    basis: Basis,
}

impl PureState {
    /// Normalizes `amplitudes`; fails on a zero vector or wrong dimension.
    pub fn new(amplitudes: DVector<C64>, basis: Basis) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::Dimension {
                expected: basis.dim(),
                actual: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if !norm.is_finite() || norm < 1e-300 {
            return Err(Error::ZeroNorm);
        }
        Ok(Self {
            amplitudes: amplitudes.unscale(norm),
            basis,
        })
    }

    pub fn spin1(v: Vector3<C64>) -> Result<Self> {
        Self::new(DVector::from_column_slice(v.as_slice()), Basis::Spin1)
    }

    pub fn two_color(v: Vector4<C64>) -> Result<Self> {
        Self::new(DVector::from_column_slice(v.as_slice()), Basis::TwoColor)
    }

    pub fn basis_ket(ket: FockKet) -> Self {
        Self {
            amplitudes: DVector::from_column_slice(ket.ket().as_slice()),
            basis: Basis::Spin1,
        }
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    /// The amplitudes as a fixed 3-vector, if this is a spin-1 state.
    pub fn as_spin1(&self) -> Option<Vector3<C64>> {
        (self.basis == Basis::Spin1).then(|| Vector3::from_column_slice(self.amplitudes.as_slice()))
    }

    pub fn as_two_color(&self) -> Option<Vector4<C64>> {
        (self.basis == Basis::TwoColor)
            .then(|| Vector4::from_column_slice(self.amplitudes.as_slice()))
    }

    pub fn inner(&self, other: &PureState) -> Result<C64> {
        if self.basis != other.basis {
            return Err(Error::Dimension {
                expected: self.basis.dim(),
                actual: other.basis.dim(),
            });
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn amplitude(&self, ket: FockKet) -> Option<C64> {
        (self.basis == Basis::Spin1).then(|| self.amplitudes[ket.index()])
    }

    /// Embeds a spin-1 state into the two-color space.
    pub fn lift(&self) -> Result<PureState> {
        let v = self.as_spin1().ok_or(Error::Dimension {
            expected: 3,
            actual: self.basis.dim(),
        })?;
        PureState::two_color(symmetric_embedding() * v)
    }

    pub fn projector(&self) -> DensityMatrix {
        let v = self
            .as_spin1()
            .expect("projector is defined on the spin-1 space only");
        DensityMatrix {
            entries: v * v.adjoint(),
        }
    }

    /// `<psi| op |psi>` for a Hermitian operator on the same space.
    pub fn expectation(&self, op: &DMatrix<C64>) -> f64 {
        (self.amplitudes.adjoint() * op * &self.amplitudes)[(0, 0)].re
    }
}

/// Projects a two-color state onto the symmetric subspace.
///
/// The result is expressed in the spin-1 basis and is not renormalized: its
/// squared norm is the weight of the symmetric component.
pub fn symmetrize(state: &PureState) -> Result<Vector3<C64>> {
    let v = state.as_two_color().ok_or(Error::Dimension {
        expected: 4,
        actual: state.basis().dim(),
    })?;
    Ok(symmetric_embedding().adjoint() * v)
}

fn hermitian_deviation(m: &DMatrix<C64>) -> f64 {
    (m - m.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Hermitian matrix of dimension 3 or 4.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    entries: DMatrix<C64>,
}

impl HermitianOperator {
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        Self::with_tolerance(entries, CONSTRUCT_TOL)
    }

    pub fn with_tolerance(entries: DMatrix<C64>, tol: f64) -> Result<Self> {
        let n = entries.nrows();
        if !entries.is_square() || !(n == 3 || n == 4) {
            return Err(Error::Dimension {
                expected: 3,
                actual: n,
            });
        }
        let deviation = hermitian_deviation(&entries);
        if !(deviation <= tol) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self { entries })
    }

    pub fn from_matrix3(m: &Matrix3<C64>) -> Result<Self> {
        Self::new(DMatrix::from_column_slice(3, 3, m.as_slice()))
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigen_unchecked(&self.entries).0
    }

    pub fn trace_norm(&self) -> f64 {
        trace_norm(self)
    }
}

/// Eigenvalues (descending) and matching eigenvectors of a Hermitian matrix.
fn eigen_unchecked(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let herm = (m + m.adjoint()).scale(0.5);
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), m.ncols(), |r, col| {
        eig.eigenvectors[(r, order[col])]
    });
    (values, vectors)
}

/// Real eigenvalues sorted in descending order.
///
/// Rejects input whose anti-Hermitian part exceeds [`IO_TOL`].
pub fn eigenvalues_hermitian(m: &DMatrix<C64>) -> Result<Vec<f64>> {
    Ok(eigen_hermitian(m)?.0)
}

/// Eigenvalues (descending) and unitary eigenvector matrix, columns matching.
pub fn eigen_hermitian(m: &DMatrix<C64>) -> Result<(Vec<f64>, DMatrix<C64>)> {
    if !m.is_square() {
        return Err(Error::Dimension {
            expected: m.nrows(),
            actual: m.ncols(),
        });
    }
    let deviation = hermitian_deviation(m);
    if !(deviation <= IO_TOL) {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(eigen_unchecked(m))
}

/// Sum of absolute eigenvalues, `Tr|A|`, with no factor of one half.
pub fn trace_norm(op: &HermitianOperator) -> f64 {
    op.eigenvalues().iter().map(|l| l.abs()).sum()
}

/// Density matrix on the spin-1 space. Positivity is not enforced.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: Matrix3<C64>,
}

impl DensityMatrix {
    pub fn new(entries: Matrix3<C64>) -> Result<Self> {
        Self::with_tolerance(entries, CONSTRUCT_TOL)
    }

    /// Validates Hermiticity and unit trace within `tol`, then stores the
    /// Hermitian part.
    pub fn with_tolerance(entries: Matrix3<C64>, tol: f64) -> Result<Self> {
        let deviation = (entries - entries.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if !(deviation <= tol) {
            return Err(Error::NotHermitian { deviation });
        }
        let trace = entries.trace().re;
        if !((trace - 1.0).abs() <= tol) {
            return Err(Error::TraceNotOne { trace });
        }
        Ok(Self {
            entries: (entries + entries.adjoint()).scale(0.5),
        })
    }

    /// Divides a Hermitian matrix by its trace. Used for printed reference
    /// matrices whose rounding leaves the trace slightly off one.
    pub fn normalized(entries: Matrix3<C64>) -> Result<Self> {
        let trace = entries.trace().re;
        if !(trace.abs() > 1e-12) {
            return Err(Error::TraceNotOne { trace });
        }
        Self::with_tolerance(entries.unscale(trace), IO_TOL)
    }

    pub fn maximally_mixed() -> Self {
        Self {
            entries: Matrix3::identity().scale(1.0 / 3.0),
        }
    }

    pub fn pure(state: &PureState) -> Result<Self> {
        let v = state.as_spin1().ok_or(Error::Dimension {
            expected: 3,
            actual: state.basis().dim(),
        })?;
        Ok(Self {
            entries: v * v.adjoint(),
        })
    }

    pub fn entries(&self) -> &Matrix3<C64> {
        &self.entries
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.entries[(row, col)]
    }

    pub fn to_operator(&self) -> HermitianOperator {
        HermitianOperator {
            entries: DMatrix::from_column_slice(3, 3, self.entries.as_slice()),
        }
    }

    /// `rho - other`, a traceless Hermitian operator.
    pub fn difference(&self, other: &DensityMatrix) -> HermitianOperator {
        let d = self.entries - other.entries;
        HermitianOperator {
            entries: DMatrix::from_column_slice(3, 3, d.as_slice()),
        }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.to_operator().eigenvalues()
    }

    pub fn is_psd(&self, floor: f64) -> bool {
        self.eigenvalues().iter().all(|&l| l >= floor)
    }

    pub fn purity(&self) -> f64 {
        purity(self)
    }

    /// `Tr(rho A)` for a Hermitian `A`.
    pub fn expectation(&self, op: &Matrix3<C64>) -> f64 {
        (self.entries * op).trace().re
    }

    /// `U rho U^dagger`.
    pub fn evolve(&self, unitary: &Matrix3<C64>) -> DensityMatrix {
        let m = unitary * self.entries * unitary.adjoint();
        DensityMatrix {
            entries: (m + m.adjoint()).scale(0.5),
        }
    }

    /// `sum_i w_i rho_i` for weights summing to one.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<DensityMatrix> {
        let m = parts
            .iter()
            .fold(Matrix3::zeros(), |acc, (w, r)| acc + r.entries.scale(*w));
        DensityMatrix::with_tolerance(m, 1e-10)
    }

    pub fn diagonal(&self) -> [f64; 3] {
        [
            self.entries[(0, 0)].re,
            self.entries[(1, 1)].re,
            self.entries[(2, 2)].re,
        ]
    }
}

/// `Tr(rho^2)`. Exceeds one for non-positive raw reconstructions.
pub fn purity(rho: &DensityMatrix) -> f64 {
    (rho.entries * rho.entries).trace().re
}

/// Serialized form: row-major real and imaginary parts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReIm {
    pub re: [[f64; 3]; 3],
    pub im: [[f64; 3]; 3],
}

impl From<&Matrix3<C64>> for ReIm {
    fn from(m: &Matrix3<C64>) -> Self {
        let mut re = [[0.0; 3]; 3];
        let mut im = [[0.0; 3]; 3];
        for r in 0..3 {
            for col in 0..3 {
                re[r][col] = m[(r, col)].re;
                im[r][col] = m[(r, col)].im;
            }
        }
        Self { re, im }
    }
}

impl From<&ReIm> for Matrix3<C64> {
    fn from(x: &ReIm) -> Self {
        Matrix3::from_fn(|r, col| c(x.re[r][col], x.im[r][col]))
    }
}

impl Serialize for DensityMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ReIm::from(&self.entries).serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = ReIm::deserialize(d)?;
        DensityMatrix::with_tolerance(Matrix3::from(&raw), IO_TOL).map_err(serde::de::Error::custom)
    }
}

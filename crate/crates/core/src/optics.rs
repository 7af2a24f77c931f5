//! Linear-optical elements on the spin-1 and two-color representations.
//!
//! Every element is first written as a 2x2 single-photon mode matrix `u`
//! (column `j` is the image of the creation operator of mode `j`). The
//! two-color representation is `u (x) u`, since signal and idler see the same
//! optics. The spin-1 representation is the action on `c'^2/sqrt2`, `c'd'`,
//! `d'^2/sqrt2` expanded as polynomials.

use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};

use nalgebra::{DMatrix, Matrix2, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{c, Basis, PureState, C64, ONE, ZERO};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::spin::{direction_operator, spin_matrices, SpinDirection};

/// Mixing angle of the balanced (50:50) beamsplitter.
pub const BALANCED: f64 = FRAC_PI_4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    C,
    D,
}

pub type Rep = Basis;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseShifter {
    pub phi: f64,
    pub mode: Mode,
}

impl PhaseShifter {
    /// `phi` reduced to `[0, 2pi)`, for display.
    pub fn canonical_phi(&self) -> f64 {
        self.phi.rem_euclid(2.0 * PI)
    }

    pub fn mode_matrix(&self) -> Matrix2<C64> {
        let p = C64::from_polar(1.0, -self.phi);
        match self.mode {
            Mode::C => Matrix2::new(p, ZERO, ZERO, ONE),
            Mode::D => Matrix2::new(ONE, ZERO, ZERO, p),
        }
    }
}

/// `exp(-i eta (c'd + cd'))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSplitter {
    pub eta: f64,
}

impl BeamSplitter {
    pub fn balanced() -> Self {
        Self { eta: BALANCED }
    }

    pub fn mode_matrix(&self) -> Matrix2<C64> {
        let (s, co) = self.eta.sin_cos();
        Matrix2::new(c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0))
    }
}

/// Balanced splitter, phase `theta` on mode c, balanced splitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MziElement {
    pub theta: f64,
}

impl MziElement {
    pub fn mode_matrix(&self) -> Matrix2<C64> {
        let bs = BeamSplitter::balanced().mode_matrix();
        let ps = PhaseShifter {
            phi: self.theta,
            mode: Mode::C,
        }
        .mode_matrix();
        bs * ps * bs
    }
}

/// Serialized circuit element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Element {
    Phase {
        param: f64,
        #[serde(default)]
        mode: Mode,
    },
    Bs {
        param: f64,
    },
    Mzi {
        param: f64,
    },
}

impl Element {
    pub fn mode_matrix(&self) -> Matrix2<C64> {
        match *self {
            Element::Phase { param, mode } => PhaseShifter { phi: param, mode }.mode_matrix(),
            Element::Bs { param } => BeamSplitter { eta: param }.mode_matrix(),
            Element::Mzi { param } => MziElement { theta: param }.mode_matrix(),
        }
    }

    pub fn unitary(&self, rep: Rep) -> CircuitUnitary {
        CircuitUnitary::from_mode_matrix(&self.mode_matrix(), rep)
    }
}

/// Symmetric-square (two-boson) representation of a mode matrix.
pub fn spin1_rep(u: &Matrix2<C64>) -> Matrix3<C64> {
    let (a, b, cc, d) = (u[(0, 0)], u[(1, 0)], u[(0, 1)], u[(1, 1)]);
    let r2 = c(SQRT_2, 0.0);
    // c' -> a c' + b d',  d' -> cc c' + d d'
    Matrix3::new(
        a * a,
        r2 * a * cc,
        cc * cc,
        r2 * a * b,
        a * d + b * cc,
        r2 * cc * d,
        b * b,
        r2 * b * d,
        d * d,
    )
}

/// `u (x) u` on (idler mode, signal mode).
pub fn two_color_rep(u: &Matrix2<C64>) -> DMatrix<C64> {
    DMatrix::from_fn(4, 4, |r, col| u[(r / 2, col / 2)] * u[(r % 2, col % 2)])
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitUnitary {
    matrix: DMatrix<C64>,
    rep: Rep,
}

impl CircuitUnitary {
    pub fn identity(rep: Rep) -> Self {
        Self {
            matrix: DMatrix::identity(rep.dim(), rep.dim()),
            rep,
        }
    }

    pub fn from_mode_matrix(u: &Matrix2<C64>, rep: Rep) -> Self {
        let matrix = match rep {
            Basis::Spin1 => DMatrix::from_column_slice(3, 3, spin1_rep(u).as_slice()),
            Basis::TwoColor => two_color_rep(u),
        };
        Self { matrix, rep }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn rep(&self) -> Rep {
        self.rep
    }

    pub fn to_matrix3(&self) -> Option<Matrix3<C64>> {
        (self.rep == Basis::Spin1).then(|| Matrix3::from_column_slice(self.matrix.as_slice()))
    }

    /// `max |U'U - I|`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.matrix.nrows();
        (self.matrix.adjoint() * &self.matrix - DMatrix::identity(n, n))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn apply(&self, state: &PureState) -> Result<PureState> {
        if state.basis() != self.rep {
            return Err(Error::MixedRepresentations);
        }
        PureState::new(&self.matrix * state.amplitudes(), self.rep)
    }

    /// `self` after `first`.
    pub fn after(&self, first: &CircuitUnitary) -> Result<CircuitUnitary> {
        if self.rep != first.rep {
            return Err(Error::MixedRepresentations);
        }
        Ok(Self {
            matrix: &self.matrix * &first.matrix,
            rep: self.rep,
        })
    }
}

pub fn phase_unitary(phi: f64, mode: Mode, rep: Rep) -> CircuitUnitary {
    CircuitUnitary::from_mode_matrix(&PhaseShifter { phi, mode }.mode_matrix(), rep)
}

pub fn beamsplitter_unitary(eta: f64, rep: Rep) -> CircuitUnitary {
    CircuitUnitary::from_mode_matrix(&BeamSplitter { eta }.mode_matrix(), rep)
}

pub fn mzi_unitary(theta: f64, rep: Rep) -> CircuitUnitary {
    compose(&[
        beamsplitter_unitary(BALANCED, rep),
        phase_unitary(theta, Mode::C, rep),
        beamsplitter_unitary(BALANCED, rep),
    ])
    .expect("uniform representation")
}

/// Product of `elements` in application order (first element acts first).
pub fn compose(elements: &[CircuitUnitary]) -> Result<CircuitUnitary> {
    let (first, rest) = elements.split_first().ok_or(Error::EmptyCircuit)?;
    rest.iter()
        .try_fold(first.clone(), |acc, next| next.after(&acc))
}

/// Unitary of a serialized circuit.
pub fn circuit_unitary(elements: &[Element], rep: Rep) -> Result<CircuitUnitary> {
    let parts: Vec<CircuitUnitary> = elements.iter().map(|e| e.unitary(rep)).collect();
    compose(&parts)
}

/// Measurement analyzer: phase `phi` on mode c, then `MZI(theta)`.
pub fn analyzer(phi: f64, theta: f64) -> Matrix3<C64> {
    let u = MziElement { theta }.mode_matrix() * PhaseShifter { phi, mode: Mode::C }.mode_matrix();
    spin1_rep(&u)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyzerSettings {
    pub phi: f64,
    pub theta: f64,
    /// Frobenius norm of `A'LzA - n.L` at the returned settings.
    pub residual: f64,
}

fn settings_residual(phi: f64, theta: f64, target: &Matrix3<C64>, lz: &Matrix3<C64>) -> f64 {
    let a = analyzer(phi, theta);
    (a.adjoint() * lz * a - target).norm()
}

/// Finds analyzer phases for which photon counting measures `n . L`, with
/// the `|2;0>` outcome on the `+1` eigenspace.
///
/// Deterministic: a 256x256 grid over `[0, 2pi)^2`, Nelder-Mead from the
/// best grid point, then Gauss-Newton polishing.
pub fn direction_to_settings(n: &SpinDirection) -> Result<AnalyzerSettings> {
    const GRID: usize = 256;
    let target = direction_operator(n);
    let lz = spin_matrices().lz;
    let step = 2.0 * PI / GRID as f64;

    let (mut best_phi, mut best_theta, mut best) = (0.0, 0.0, f64::INFINITY);
    for i in 0..GRID {
        for j in 0..GRID {
            let (phi, theta) = (i as f64 * step, j as f64 * step);
            let r = settings_residual(phi, theta, &target, &lz);
            if r < best {
                (best_phi, best_theta, best) = (phi, theta, r);
            }
        }
    }

    let min = nelder_mead(
        |x| settings_residual(x[0], x[1], &target, &lz),
        &[best_phi, best_theta],
        &NelderMeadOptions {
            initial_step: step,
            ..Default::default()
        },
    );
    let (mut phi, mut theta) = (min.x[0], min.x[1]);
    let mut residual = min.value;

    // Gauss-Newton on the 18 real residual components
    let components = |phi: f64, theta: f64| -> [f64; 18] {
        let a = analyzer(phi, theta);
        let d = a.adjoint() * lz * a - target;
        let mut out = [0.0; 18];
        for (k, z) in d.iter().enumerate() {
            out[2 * k] = z.re;
            out[2 * k + 1] = z.im;
        }
        out
    };
    for _ in 0..20 {
        let r0 = components(phi, theta);
        let h = 1e-7;
        let (rp, rm) = (components(phi + h, theta), components(phi - h, theta));
        let (tp, tm) = (components(phi, theta + h), components(phi, theta - h));
        let (mut a11, mut a12, mut a22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for k in 0..18 {
            let j1 = (rp[k] - rm[k]) / (2.0 * h);
            let j2 = (tp[k] - tm[k]) / (2.0 * h);
            a11 += j1 * j1;
            a12 += j1 * j2;
            a22 += j2 * j2;
            g1 += j1 * r0[k];
            g2 += j2 * r0[k];
        }
        let det = a11 * a22 - a12 * a12;
        if det.abs() < 1e-300 {
            break;
        }
        let dphi = -(a22 * g1 - a12 * g2) / det;
        let dtheta = -(a11 * g2 - a12 * g1) / det;
        let r_new = settings_residual(phi + dphi, theta + dtheta, &target, &lz);
        if r_new >= residual {
            break;
        }
        phi += dphi;
        theta += dtheta;
        residual = r_new;
    }

    if residual > 1e-6 {
        return Err(Error::NoSolution { residual });
    }
    Ok(AnalyzerSettings {
        phi: phi.rem_euclid(2.0 * PI),
        theta: theta.rem_euclid(2.0 * PI),
        residual,
    })
}

//! Two-photon interference fringes: a phase scan in front of an MZI with
//! coincidence counting in the `|2;0>, |1;1>, |0;2>` outcomes.

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, C64};
use crate::optics::{analyzer, spin1_rep, MziElement};
use crate::optim::{levenberg_marquardt, numeric_jacobian, Bounds, LmOptions};
use crate::rng::stream;
use crate::source::{input_state, SourceParams};

#[derive(Debug, Clone, PartialEq)]
pub enum FringeData {
    Probabilities(Vec<[f64; 3]>),
    Counts(Vec<[u64; 3]>),
}

impl FringeData {
    pub fn len(&self) -> usize {
        match self {
            FringeData::Probabilities(p) => p.len(),
            FringeData::Counts(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Outcome data at a strictly increasing list of phases.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeScan {
    theta: f64,
    phi: Vec<f64>,
    data: FringeData,
}

impl FringeScan {
    pub fn new(theta: f64, phi: Vec<f64>, data: FringeData) -> Result<Self> {
        if phi.len() != data.len() {
            return Err(Error::Invalid(format!(
                "{} phases but {} data rows",
                phi.len(),
                data.len()
            )));
        }
        if phi.iter().any(|p| !p.is_finite()) || phi.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid(
                "phases must be finite and strictly increasing".into(),
            ));
        }
        Ok(Self { theta, phi, data })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn data(&self) -> &FringeData {
        &self.data
    }

    pub fn counts(&self) -> Option<&[[u64; 3]]> {
        match &self.data {
            FringeData::Counts(c) => Some(c),
            FringeData::Probabilities(_) => None,
        }
    }

    /// Multiplies every count by `k`.
    pub fn scaled(&self, k: u64) -> Option<FringeScan> {
        let counts = self.counts()?;
        Some(FringeScan {
            theta: self.theta,
            phi: self.phi.clone(),
            data: FringeData::Counts(counts.iter().map(|c| c.map(|x| x * k)).collect()),
        })
    }
}

/// `steps` equally spaced phases on `[start, end)`.
pub fn phase_grid(start: f64, end: f64, steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|k| start + (end - start) * k as f64 / steps as f64)
        .collect()
}

/// Outcome probabilities of `rho` after phase `phi` on mode c and `MZI(theta)`.
pub fn outcome_probs(rho: &DensityMatrix, theta: f64, phi: f64) -> [f64; 3] {
    rho.evolve(&analyzer(phi, theta)).diagonal()
}

/// Probability triple at each phase for the source described by `params`.
pub fn simulate_fringe(params: &SourceParams, theta: f64, phis: &[f64]) -> Result<Vec<[f64; 3]>> {
    params.validate()?;
    let rho = params.state()?;
    Ok(phis
        .iter()
        .map(|&phi| outcome_probs(&rho, theta, phi))
        .collect())
}

/// `(max - min)/(max + min)` per outcome over the sampled points.
pub fn visibilities(probs: &[[f64; 3]]) -> [f64; 3] {
    std::array::from_fn(|k| {
        let (lo, hi) = probs
            .iter()
            .map(|p| p[k])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                (lo.min(x), hi.max(x))
            });
        if hi + lo > 0.0 {
            (hi - lo) / (hi + lo)
        } else {
            0.0
        }
    })
}

/// Poisson counts with means `norms[k] * P_k(phi)`; fixed `seed` gives
/// identical output.
pub fn synthesize_counts(
    theta: f64,
    phis: &[f64],
    probs: &[[f64; 3]],
    norms: [f64; 3],
    seed: u64,
) -> Result<FringeScan> {
    synthesize_counts_with(theta, phis, probs, norms, &mut stream(seed, 0))
}

/// As [`synthesize_counts`], drawing from a caller-supplied generator.
pub fn synthesize_counts_with<G: Rng>(
    theta: f64,
    phis: &[f64],
    probs: &[[f64; 3]],
    norms: [f64; 3],
    rng: &mut G,
) -> Result<FringeScan> {
    if let Some(&n) = norms.iter().find(|n| !(**n > 0.0) || !n.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "norms",
            value: n,
            reason: "normalizations must be positive",
        });
    }
    let counts = probs
        .iter()
        .map(|p| {
            std::array::from_fn(|k| {
                let mean = norms[k] * p[k];
                if mean > 0.0 {
                    Poisson::new(mean).expect("positive mean").sample(rng) as u64
                } else {
                    0
                }
            })
        })
        .collect();
    FringeScan::new(theta, phis.to_vec(), FringeData::Counts(counts))
}

/// Fitted fringe parameters. `covariance` is ordered
/// `(V, R, N20, N11, N02, phi_offset)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "N20")]
    pub n20: f64,
    #[serde(rename = "N11")]
    pub n11: f64,
    #[serde(rename = "N02")]
    pub n02: f64,
    pub phi_offset: f64,
    /// Per-outcome `(max-min)/(max+min)` of the fitted curves.
    pub visibility: [f64; 3],
    /// Weighted sum of squared residuals.
    pub residual: f64,
    pub covariance: Vec<Vec<f64>>,
    pub sigma_v: f64,
    pub sigma_r: f64,
    pub converged: bool,
    pub at_boundary: bool,
    pub points: usize,
}

impl FitResult {
    pub fn norms(&self) -> [f64; 3] {
        [self.n20, self.n11, self.n02]
    }
}

pub const PARAMETER_NAMES: [&str; 6] = ["V", "R", "N20", "N11", "N02", "phi_offset"];

/// Fast evaluator of `P_k(phi + offset)` for pure-plus-white-noise input.
struct FringeModel {
    mzi: Matrix3<C64>,
}

impl FringeModel {
    fn new(theta: f64) -> Self {
        Self {
            mzi: spin1_rep(&MziElement { theta }.mode_matrix()),
        }
    }

    fn probs(&self, psi: &Vector3<C64>, v: f64, phi: f64) -> [f64; 3] {
        let shifted = Vector3::new(
            psi[0] * C64::from_polar(1.0, -2.0 * phi),
            psi[1] * C64::from_polar(1.0, -phi),
            psi[2],
        );
        let out = self.mzi * shifted;
        std::array::from_fn(|k| v * out[k].norm_sqr() + (1.0 - v) / 3.0)
    }
}

fn state_vector(r: f64) -> Vector3<C64> {
    input_state(r.clamp(0.0, 1.0))
        .expect("R clamped to [0, 1]")
        .as_spin1()
        .expect("spin-1")
}

/// Weighted residuals `(c - model)/sqrt(max(c, 1))`, outcome-major.
fn residuals(
    model: &FringeModel,
    phi: &[f64],
    counts: &[[u64; 3]],
    p: &DVector<f64>,
) -> DVector<f64> {
    let psi = state_vector(p[1]);
    let n = phi.len();
    let mut out = DVector::zeros(3 * n);
    for (j, (&ph, c)) in phi.iter().zip(counts).enumerate() {
        let probs = model.probs(&psi, p[0], ph + p[5]);
        for k in 0..3 {
            let w = (c[k] as f64).max(1.0).sqrt();
            out[k * n + j] = (c[k] as f64 - p[2 + k] * probs[k]) / w;
        }
    }
    out
}

/// Weighted least-squares normalizations at fixed shape parameters.
fn best_norms(
    model: &FringeModel,
    phi: &[f64],
    counts: &[[u64; 3]],
    v: f64,
    r: f64,
    offset: f64,
) -> [f64; 3] {
    let psi = state_vector(r);
    let mut num = [0.0; 3];
    let mut den = [0.0; 3];
    for (&ph, c) in phi.iter().zip(counts) {
        let probs = model.probs(&psi, v, ph + offset);
        for k in 0..3 {
            let w = 1.0 / (c[k] as f64).max(1.0);
            num[k] += w * c[k] as f64 * probs[k];
            den[k] += w * probs[k] * probs[k];
        }
    }
    std::array::from_fn(|k| {
        if den[k] > 0.0 {
            (num[k] / den[k]).max(1e-6)
        } else {
            1.0
        }
    })
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    /// `(V, R)` starting points.
    pub starts: Vec<(f64, f64)>,
    /// Number of phase offsets tried per start before refinement.
    pub offset_scan: usize,
    pub lm: LmOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        let starts = [0.75, 0.95]
            .iter()
            .flat_map(|&v| [0.005, 0.05, 0.2, 0.5].map(|r| (v, r)))
            .collect();
        Self {
            starts,
            offset_scan: 32,
            lm: LmOptions::default(),
        }
    }
}

pub fn fit_fringe(scan: &FringeScan) -> Result<FitResult> {
    fit_fringe_with(scan, &FitOptions::default())
}

/// Weighted nonlinear least squares for `(V, R, N20, N11, N02, offset)`.
///
/// Multi-start over `options.starts`; each start scans the phase offset,
/// solves the normalizations linearly, then refines all six parameters with
/// Levenberg-Marquardt. Parameter uncertainties come from the inverse of
/// the weighted `J'J` (Fisher approximation for Poisson counts).
pub fn fit_fringe_with(scan: &FringeScan, options: &FitOptions) -> Result<FitResult> {
    let counts = scan
        .counts()
        .ok_or_else(|| Error::Invalid("fitting needs integer counts".into()))?;
    let phi = scan.phi();
    if phi.len() < 8 {
        return Err(Error::InsufficientData(format!(
            "need at least 8 phase points, got {}",
            phi.len()
        )));
    }
    let span = phi[phi.len() - 1] - phi[0];
    let spacing = span / (phi.len() - 1) as f64;
    if span + spacing < PI - 1e-9 {
        return Err(Error::InsufficientData(format!(
            "phases span {span:.4} rad, need a full period"
        )));
    }

    let model = FringeModel::new(scan.theta());
    let f = |p: &DVector<f64>| residuals(&model, phi, counts, p);
    let bounds = Bounds {
        lower: DVector::from_vec(vec![0.0, 0.0, 1e-9, 1e-9, 1e-9, f64::NEG_INFINITY]),
        upper: DVector::from_vec(vec![
            1.0,
            1.0,
            f64::INFINITY,
            f64::INFINITY,
            f64::INFINITY,
            f64::INFINITY,
        ]),
    };

    let mut best: Option<crate::optim::LmReport> = None;
    for &(v0, r0) in &options.starts {
        let (mut start, mut start_cost) = (None, f64::INFINITY);
        for s in 0..options.offset_scan {
            let offset = 2.0 * PI * s as f64 / options.offset_scan as f64;
            let n = best_norms(&model, phi, counts, v0, r0, offset);
            let p = DVector::from_vec(vec![v0, r0, n[0], n[1], n[2], offset]);
            let cost = f(&p).norm_squared();
            if cost < start_cost {
                (start, start_cost) = (Some(p), cost);
            }
        }
        let start = start.expect("offset scan is non-empty");
        let report = levenberg_marquardt(
            f,
            |p| numeric_jacobian(&f, p, &bounds),
            &start,
            &bounds,
            &options.lm,
        );
        if best.as_ref().is_none_or(|b| report.cost < b.cost) {
            best = Some(report);
        }
    }
    let best = best.ok_or_else(|| Error::Invalid("no fit starts given".into()))?;
    let p = &best.params;

    let jtj = best.jacobian.transpose() * &best.jacobian;
    let covariance = jtj
        .clone()
        .try_inverse()
        .unwrap_or_else(|| DMatrix::from_element(6, 6, f64::NAN));
    let psi = state_vector(p[1]);
    let dense: Vec<[f64; 3]> = phase_grid(0.0, 2.0 * PI, 4096)
        .into_iter()
        .map(|ph| model.probs(&psi, p[0], ph))
        .collect();
    let at_boundary = [p[0], p[1]].iter().any(|x| *x < 1e-9 || *x > 1.0 - 1e-9);

    Ok(FitResult {
        v: p[0],
        r: p[1],
        n20: p[2],
        n11: p[3],
        n02: p[4],
        phi_offset: p[5].rem_euclid(2.0 * PI),
        visibility: visibilities(&dense),
        residual: best.cost,
        covariance: (0..6)
            .map(|i| (0..6).map(|j| covariance[(i, j)]).collect())
            .collect(),
        sigma_v: covariance[(0, 0)].sqrt(),
        sigma_r: covariance[(1, 1)].sqrt(),
        converged: best.converged,
        at_boundary,
        points: phi.len(),
    })
}

/// Fixed-width phase text: nine significant decimal digits, no exponent.
pub fn format_phase(phi: f64) -> String {
    let magnitude = if phi == 0.0 {
        0
    } else {
        phi.abs().log10().floor() as i32
    };
    let decimals = (8 - magnitude).max(0) as usize;
    format!("{phi:.decimals$}")
}

pub const COUNTS_HEADER: [&str; 4] = ["phi", "count20", "count11", "count02"];
pub const PROBS_HEADER: [&str; 4] = ["phi", "p20", "p11", "p02"];

/// Writes `phi,count20,count11,count02` (or the probability variant).
pub fn write_csv<W: Write>(scan: &FringeScan, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    match scan.data() {
        FringeData::Counts(counts) => {
            w.write_record(COUNTS_HEADER)?;
            for (phi, c) in scan.phi().iter().zip(counts) {
                w.write_record([
                    format_phase(*phi),
                    c[0].to_string(),
                    c[1].to_string(),
                    c[2].to_string(),
                ])?;
            }
        }
        FringeData::Probabilities(probs) => {
            w.write_record(PROBS_HEADER)?;
            for (phi, p) in scan.phi().iter().zip(probs) {
                w.write_record([
                    format_phase(*phi),
                    p[0].to_string(),
                    p[1].to_string(),
                    p[2].to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads either CSV layout written by [`write_csv`].
pub fn read_csv<R: Read>(input: R, theta: f64) -> Result<FringeScan> {
    let mut rd = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    let is_counts = header == COUNTS_HEADER;
    if !is_counts && header != PROBS_HEADER {
        return Err(Error::Invalid(format!("unexpected CSV header {header:?}")));
    }
    let mut phi = Vec::new();
    let mut counts = Vec::new();
    let mut probs = Vec::new();
    for (line, record) in rd.records().enumerate() {
        let record = record?;
        if record.len() != 4 {
            return Err(Error::Invalid(format!(
                "row {}: expected 4 fields",
                line + 2
            )));
        }
        let bad = |field: &str| Error::Invalid(format!("row {}: bad value `{field}`", line + 2));
        phi.push(record[0].parse::<f64>().map_err(|_| bad(&record[0]))?);
        if is_counts {
            let mut c = [0u64; 3];
            for k in 0..3 {
                c[k] = record[k + 1].parse().map_err(|_| bad(&record[k + 1]))?;
            }
            counts.push(c);
        } else {
            let mut p = [0.0; 3];
            for k in 0..3 {
                p[k] = record[k + 1].parse().map_err(|_| bad(&record[k + 1]))?;
            }
            probs.push(p);
        }
    }
    let data = if is_counts {
        FringeData::Counts(counts)
    } else {
        FringeData::Probabilities(probs)
    };
    FringeScan::new(theta, phi, data)
}

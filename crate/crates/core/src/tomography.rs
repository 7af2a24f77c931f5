//! Spin-1 state tomography from outcome statistics along several spin
//! directions.
//!
//! A measurement along `n` counts photons after the analyzer for `n`; the
//! outcomes `|2;0>, |1;1>, |0;2>` are the `+1, 0, -1` eigenprojectors of
//! `n . L`. Two reconstructions are provided: unconstrained linear inversion,
//! which can return a non-positive matrix, and a maximum-likelihood fit over
//! physical states.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector, Matrix3};
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{trace_norm, DensityMatrix, C64};
use crate::spin::{eigenprojectors, five_directions, operator_basis, SpinDirection};

/// Row sums accepted as already normalized.
pub const ROW_SUM_TOL: f64 = 1e-6;
/// Largest row-sum deviation that measured tables may be rescaled from.
pub const RENORMALIZE_LIMIT: f64 = 5e-2;

/// `(P+, P0, P-)` of `n . L` in state `rho`. Linear in `rho`; sums to
/// `Tr rho`.
pub fn predicted_probs(rho: &DensityMatrix, n: &SpinDirection) -> [f64; 3] {
    eigenprojectors(n).map(|p| rho.expectation(&p))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityRow {
    pub name: Option<String>,
    pub direction: SpinDirection,
    pub probs: [f64; 3],
}

impl ProbabilityRow {
    pub fn first_moment(&self) -> f64 {
        self.probs[0] - self.probs[2]
    }
}

/// Outcome probabilities for each measured direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    rows: Vec<ProbabilityRow>,
}

impl ProbabilityTable {
    /// Requires every row to sum to one within [`ROW_SUM_TOL`]. Entries may
    /// be negative (predictions from a non-positive matrix).
    pub fn new(rows: Vec<ProbabilityRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InsufficientData("no directions".into()));
        }
        for row in &rows {
            if row.probs.iter().any(|p| !p.is_finite()) {
                return Err(Error::Invalid(format!("non-finite probability in {row:?}")));
            }
            let sum: f64 = row.probs.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Normalization { sum });
            }
        }
        Ok(Self { rows })
    }

    /// For measured data: non-negative entries, rows rescaled to unit sum
    /// when they deviate by less than [`RENORMALIZE_LIMIT`].
    pub fn from_measured(rows: Vec<ProbabilityRow>) -> Result<Self> {
        let mut out = Vec::with_capacity(rows.len());
        for mut row in rows {
            if row.probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::Invalid(format!(
                    "measured probabilities must be non-negative: {:?}",
                    row.probs
                )));
            }
            let sum: f64 = row.probs.iter().sum();
            if (sum - 1.0).abs() >= RENORMALIZE_LIMIT {
                return Err(Error::Normalization { sum });
            }
            row.probs = row.probs.map(|p| p / sum);
            out.push(row);
        }
        Self::new(out)
    }

    /// Exact model probabilities of `rho` along `directions`.
    pub fn predicted(rho: &DensityMatrix, directions: &[SpinDirection]) -> Result<Self> {
        Self::new(
            directions
                .iter()
                .map(|n| ProbabilityRow {
                    name: None,
                    direction: *n,
                    probs: predicted_probs(rho, n),
                })
                .collect(),
        )
    }

    pub fn rows(&self) -> &[ProbabilityRow] {
        &self.rows
    }

    pub fn directions(&self) -> Vec<SpinDirection> {
        self.rows.iter().map(|r| r.direction).collect()
    }

    /// Row whose direction matches `n`.
    pub fn find(&self, n: &SpinDirection) -> Option<&ProbabilityRow> {
        self.rows
            .iter()
            .find(|r| (r.direction.vector() - n.vector()).norm() < 1e-9)
    }

    fn stacked(&self) -> DVector<f64> {
        DVector::from_iterator(3 * self.rows.len(), self.rows.iter().flat_map(|r| r.probs))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountRow {
    pub name: Option<String>,
    pub direction: SpinDirection,
    pub counts: [u64; 3],
    pub exposure: Option<f64>,
}

impl CountRow {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Integer outcome counts per direction.
#[derive(Debug, Clone, PartialEq)]
pub struct CountRecord {
    rows: Vec<CountRow>,
}

impl CountRecord {
    pub fn new(rows: Vec<CountRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InsufficientData("no directions".into()));
        }
        if let Some(row) = rows.iter().find(|r| r.total() == 0) {
            return Err(Error::InsufficientData(format!(
                "direction {:?} has no counts",
                row.name.as_deref().unwrap_or("?")
            )));
        }
        Ok(Self { rows })
    }

    /// Rounds `shots * p` per outcome; the stand-in used when only
    /// probabilities are available.
    pub fn from_probabilities(table: &ProbabilityTable, shots: f64) -> Result<Self> {
        if !(shots > 0.0) {
            return Err(Error::InvalidParameter {
                name: "shots",
                value: shots,
                reason: "must be positive",
            });
        }
        Self::new(
            table
                .rows()
                .iter()
                .map(|r| CountRow {
                    name: r.name.clone(),
                    direction: r.direction,
                    counts: r.probs.map(|p| (p.max(0.0) * shots).round() as u64),
                    exposure: None,
                })
                .collect(),
        )
    }

    /// Multinomial samples of `shots` events per direction from `rho`.
    pub fn synthesize<R: Rng>(
        rho: &DensityMatrix,
        directions: &[SpinDirection],
        shots: u64,
        rng: &mut R,
    ) -> Result<Self> {
        let rows = directions
            .iter()
            .map(|n| {
                let p = predicted_probs(rho, n).map(|p| p.clamp(0.0, 1.0));
                let mut left = shots;
                let mut mass = 1.0;
                let mut counts = [0u64; 3];
                for k in 0..2 {
                    let q = if mass > 0.0 {
                        (p[k] / mass).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    let draw = Binomial::new(left, q).expect("valid binomial").sample(rng);
                    counts[k] = draw;
                    left -= draw;
                    mass -= p[k];
                }
                counts[2] = left;
                CountRow {
                    name: None,
                    direction: *n,
                    counts,
                    exposure: None,
                }
            })
            .collect();
        Self::new(rows)
    }

    pub fn rows(&self) -> &[CountRow] {
        &self.rows
    }

    /// Relative frequencies.
    pub fn to_table(&self) -> ProbabilityTable {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let total = r.total() as f64;
                ProbabilityRow {
                    name: r.name.clone(),
                    direction: r.direction,
                    probs: r.counts.map(|c| c as f64 / total),
                }
            })
            .collect();
        ProbabilityTable::new(rows).expect("frequencies sum to one")
    }
}

/// Linear map from the nine real parameters of a Hermitian matrix to stacked
/// outcome probabilities.
///
/// Parameters are `x0 = Tr rho` and `x_a = Tr(rho lambda_a)` for the eight
/// operators of [`operator_basis`], so that
/// `rho = x0 I/3 + 1/2 sum_a x_a lambda_a`.
#[derive(Debug, Clone)]
pub struct MeasurementMap {
    matrix: DMatrix<f64>,
    singular_values: Vec<f64>,
}

/// Relative singular-value cutoff for numerical rank.
pub const RANK_THRESHOLD: f64 = 1e-10;

impl MeasurementMap {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn rank(&self) -> usize {
        self.singular_values
            .iter()
            .filter(|&&s| s > RANK_THRESHOLD)
            .count()
    }

    pub fn is_complete(&self) -> bool {
        self.rank() == 9
    }
}

pub fn measurement_map(directions: &[SpinDirection]) -> MeasurementMap {
    let basis = operator_basis();
    let lambdas: Vec<Matrix3<C64>> = basis.all().copied().collect();
    let mut m = DMatrix::zeros(3 * directions.len(), 9);
    for (k, n) in directions.iter().enumerate() {
        for (o, proj) in eigenprojectors(n).iter().enumerate() {
            let row = 3 * k + o;
            m[(row, 0)] = proj.trace().re / 3.0;
            for (a, l) in lambdas.iter().enumerate() {
                m[(row, a + 1)] = 0.5 * (l * proj).trace().re;
            }
        }
    }
    let mut singular_values: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    singular_values.sort_by(|a, b| b.total_cmp(a));
    MeasurementMap {
        matrix: m,
        singular_values,
    }
}

#[derive(Debug, Clone)]
pub struct LinearInversion {
    pub rho: DensityMatrix,
    pub rank: usize,
}

impl LinearInversion {
    /// False when the directions do not determine the state and the
    /// minimum-norm solution was returned.
    pub fn is_complete(&self) -> bool {
        self.rank == 9
    }
}

/// Least-squares trace-one Hermitian matrix reproducing `table`.
///
/// The trace is fixed exactly; the remaining eight parameters are solved by
/// pseudoinverse, which yields the minimum-norm solution when the
/// directions are insufficient. No positivity is imposed.
pub fn linear_inversion(table: &ProbabilityTable) -> Result<LinearInversion> {
    let map = measurement_map(&table.directions());
    let m = map.matrix();
    let rhs = table.stacked() - m.column(0);
    let a = m.columns(1, 8).into_owned();
    let svd = a.svd(true, true);
    let cutoff = RANK_THRESHOLD * svd.singular_values.max().max(f64::MIN_POSITIVE);
    let x = svd
        .solve(&rhs, cutoff)
        .map_err(|e| Error::Invalid(format!("pseudoinverse failed: {e}")))?;
    let coeffs: [f64; 8] = std::array::from_fn(|i| x[i]);
    let rho = DensityMatrix::new(operator_basis().reconstruct(&coeffs))?;
    Ok(LinearInversion {
        rho,
        rank: map.rank(),
    })
}

#[derive(Debug, Clone)]
pub struct MleSettings {
    /// Converged when the log-likelihood gains less than this per iteration.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Mixing weight of the `R rho R` update.
    pub damping: f64,
    /// Keep the per-iteration log-likelihood.
    pub record_trace: bool,
}

impl Default for MleSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 100_000,
            damping: 0.2,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MleResult {
    pub rho: DensityMatrix,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

struct Likelihood {
    terms: Vec<(f64, Matrix3<C64>)>,
}

impl Likelihood {
    fn new(counts: &CountRecord) -> Self {
        let terms = counts
            .rows()
            .iter()
            .flat_map(|row| {
                eigenprojectors(&row.direction)
                    .into_iter()
                    .zip(row.counts)
                    .filter(|(_, n)| *n > 0)
                    .map(|(p, n)| (n as f64, p))
                    .collect::<Vec<_>>()
            })
            .collect();
        Self { terms }
    }

    fn log_likelihood(&self, rho: &Matrix3<C64>) -> f64 {
        self.terms
            .iter()
            .map(|(n, p)| {
                let prob = (rho * p).trace().re;
                if prob > 0.0 {
                    n * prob.ln()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .sum()
    }

    fn r_operator(&self, rho: &Matrix3<C64>) -> Matrix3<C64> {
        self.terms.iter().fold(Matrix3::zeros(), |acc, (n, p)| {
            let prob = (rho * p).trace().re.max(1e-300);
            acc + p.scale(n / prob)
        })
    }
}

fn unit_trace(m: Matrix3<C64>) -> Matrix3<C64> {
    let h = (m + m.adjoint()).scale(0.5);
    h.unscale(h.trace().re)
}

/// Maximum-likelihood state for multinomial counts.
///
/// Damped fixed-point iteration `rho <- (1-e) rho + e N[R rho R]` from
/// `I/3`. Every iterate is positive semidefinite with unit trace. A step
/// that would lower the likelihood is retried with half the damping, so
/// the recorded log-likelihood never decreases.
pub fn mle_reconstruct(counts: &CountRecord, settings: &MleSettings) -> Result<MleResult> {
    if !(settings.damping > 0.0 && settings.damping <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "damping",
            value: settings.damping,
            reason: "must lie in (0, 1]",
        });
    }
    let lik = Likelihood::new(counts);
    let mut rho = Matrix3::identity().scale(1.0 / 3.0);
    let mut ll = lik.log_likelihood(&rho);
    let mut trace = Vec::new();
    if settings.record_trace {
        trace.push(ll);
    }
    let mut converged = false;
    let mut iterations = 0;

    while iterations < settings.max_iterations {
        iterations += 1;
        let r = lik.r_operator(&rho);
        let target = unit_trace(r * rho * r);
        let mut eps = settings.damping;
        let mut step = None;
        while eps > 1e-12 {
            let cand = unit_trace(rho.scale(1.0 - eps) + target.scale(eps));
            let ll_cand = lik.log_likelihood(&cand);
            if ll_cand >= ll {
                step = Some((cand, ll_cand));
                break;
            }
            eps *= 0.5;
        }
        let Some((cand, ll_cand)) = step else {
            // no ascent left at floating-point resolution
            converged = true;
            break;
        };
        let gain = ll_cand - ll;
        rho = cand;
        ll = ll_cand;
        if settings.record_trace {
            trace.push(ll);
        }
        if gain < settings.tolerance {
            converged = true;
            break;
        }
    }

    Ok(MleResult {
        rho: DensityMatrix::with_tolerance(rho, 1e-10)?,
        log_likelihood: ll,
        iterations,
        converged,
        trace,
    })
}

/// Residuals of the linear relations among the tomography directions:
/// `L1 = (L3 - L4 + L5)/sqrt2`, `L2 = (L3 + L4 - L5)/sqrt2`,
/// `Lz = (-L3 + L4 + L5)/sqrt2`, evaluated on first moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub residual_l1: f64,
    pub residual_l2: f64,
    /// Present only when an independent `Lz` measurement was supplied.
    pub residual_lz: Option<f64>,
    /// Right-hand side of the `Lz` relation.
    pub lz_predicted: f64,
}

pub fn consistency_check(
    table: &ProbabilityTable,
    lz_probs: Option<[f64; 3]>,
) -> Result<ConsistencyReport> {
    let lz_mean = lz_probs.map(|p| p[0] - p[2]);
    consistency_check_with_mean(table, lz_mean)
}

/// As [`consistency_check`], with `<Lz>` given directly.
pub fn consistency_check_with_mean(
    table: &ProbabilityTable,
    lz_mean: Option<f64>,
) -> Result<ConsistencyReport> {
    let dirs = five_directions();
    let mut m = [0.0; 5];
    for (k, n) in dirs.iter().enumerate() {
        m[k] = table
            .find(n)
            .ok_or_else(|| Error::InsufficientData(format!("direction L{} missing", k + 1)))?
            .first_moment();
    }
    let s = FRAC_1_SQRT_2;
    let lz_predicted = s * (-m[2] + m[3] + m[4]);
    Ok(ConsistencyReport {
        residual_l1: (m[0] - s * (m[2] - m[3] + m[4])).abs(),
        residual_l2: (m[1] - s * (m[2] + m[3] - m[4])).abs(),
        residual_lz: lz_mean.map(|z| (z - lz_predicted).abs()),
        lz_predicted,
    })
}

/// Summary numbers comparing two reconstructions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub eigenvalues_raw: Vec<f64>,
    pub eigenvalues_ml: Vec<f64>,
    pub purity_raw: f64,
    pub purity_ml: f64,
    /// `Tr|rho_raw - rho_ml|`, no factor of one half.
    pub trace_norm_distance: f64,
    /// Half the trace norm: the conventional trace distance.
    pub trace_distance: f64,
}

pub fn diagnostics(rho_raw: &DensityMatrix, rho_ml: &DensityMatrix) -> Diagnostics {
    let tn = trace_norm(&rho_raw.difference(rho_ml));
    Diagnostics {
        eigenvalues_raw: rho_raw.eigenvalues(),
        eigenvalues_ml: rho_ml.eigenvalues(),
        purity_raw: rho_raw.purity(),
        purity_ml: rho_ml.purity(),
        trace_norm_distance: tn,
        trace_distance: 0.5 * tn,
    }
}

/// Everything a reconstruction run reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TomographyResult {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rho_raw: Option<DensityMatrix>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rho_ml: Option<DensityMatrix>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eigenvalues_raw: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eigenvalues_ml: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub purity_raw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub purity_ml: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace_norm_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub log_likelihood_ml: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rank: Option<usize>,
}

impl TomographyResult {
    pub fn new(raw: Option<&LinearInversion>, ml: Option<&MleResult>) -> Self {
        let mut out = TomographyResult {
            rho_raw: raw.map(|r| r.rho.clone()),
            rho_ml: ml.map(|m| m.rho.clone()),
            eigenvalues_raw: raw.map(|r| r.rho.eigenvalues()),
            eigenvalues_ml: ml.map(|m| m.rho.eigenvalues()),
            purity_raw: raw.map(|r| r.rho.purity()),
            purity_ml: ml.map(|m| m.rho.purity()),
            trace_norm_distance: None,
            trace_distance: None,
            log_likelihood_ml: ml.map(|m| m.log_likelihood),
            iterations: ml.map(|m| m.iterations),
            converged: ml.map(|m| m.converged),
            rank: raw.map(|r| r.rank),
        };
        if let (Some(r), Some(m)) = (raw, ml) {
            let d = diagnostics(&r.rho, &m.rho);
            out.trace_norm_distance = Some(d.trace_norm_distance);
            out.trace_distance = Some(d.trace_distance);
        }
        out
    }
}

/// One direction in a tomography data file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DirectionEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<[u64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exposure: Option<f64>,
}

/// Independent `Lz` measurement: outcome probabilities, counts, or just
/// the mean.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LzEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<[u64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
}

/// `{"directions": [{"name": "L1", "probs": [..]}, ..], "lz": {..}}`
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TomographyFile {
    pub directions: Vec<DirectionEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lz: Option<LzEntry>,
}

#[derive(Debug, Clone)]
pub enum TomographyData {
    Probabilities(ProbabilityTable),
    Counts(CountRecord),
}

impl TomographyData {
    pub fn table(&self) -> ProbabilityTable {
        match self {
            TomographyData::Probabilities(t) => t.clone(),
            TomographyData::Counts(c) => c.to_table(),
        }
    }

    /// Counts as given, or `shots` effective events per direction.
    pub fn counts(&self, shots: f64) -> Result<CountRecord> {
        match self {
            TomographyData::Probabilities(t) => CountRecord::from_probabilities(t, shots),
            TomographyData::Counts(c) => Ok(c.clone()),
        }
    }
}

impl DirectionEntry {
    fn direction(&self) -> Result<SpinDirection> {
        match (&self.n, &self.name) {
            (Some([x, y, z]), _) => {
                let v = nalgebra::Vector3::new(*x, *y, *z);
                if (v.norm() - 1.0).abs() > 1e-9 {
                    return Err(Error::NotUnit { norm: v.norm() });
                }
                SpinDirection::along(v)
            }
            (None, Some(name)) => SpinDirection::named(name),
            (None, None) => Err(Error::Invalid("direction needs `name` or `n`".into())),
        }
    }
}

impl TomographyFile {
    pub fn data(&self) -> Result<TomographyData> {
        let all_probs = self
            .directions
            .iter()
            .all(|d| d.probs.is_some() && d.counts.is_none());
        let all_counts = self
            .directions
            .iter()
            .all(|d| d.counts.is_some() && d.probs.is_none());
        if all_probs {
            let rows = self
                .directions
                .iter()
                .map(|d| {
                    Ok(ProbabilityRow {
                        name: d.name.clone(),
                        direction: d.direction()?,
                        probs: d.probs.expect("checked"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(TomographyData::Probabilities(
                ProbabilityTable::from_measured(rows)?,
            ))
        } else if all_counts {
            let rows = self
                .directions
                .iter()
                .map(|d| {
                    Ok(CountRow {
                        name: d.name.clone(),
                        direction: d.direction()?,
                        counts: d.counts.expect("checked"),
                        exposure: d.exposure,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(TomographyData::Counts(CountRecord::new(rows)?))
        } else {
            Err(Error::Invalid(
                "every direction needs exactly one of `probs` or `counts`, uniformly".into(),
            ))
        }
    }

    /// `<Lz>` from the optional independent measurement.
    pub fn lz_mean(&self) -> Result<Option<f64>> {
        let Some(lz) = &self.lz else { return Ok(None) };
        match (lz.probs, lz.counts, lz.mean) {
            (Some(p), None, None) => {
                let sum: f64 = p.iter().sum();
                if (sum - 1.0).abs() >= RENORMALIZE_LIMIT || p.iter().any(|x| *x < 0.0) {
                    return Err(Error::Normalization { sum });
                }
                Ok(Some((p[0] - p[2]) / sum))
            }
            (None, Some(c), None) => {
                let total: u64 = c.iter().sum();
                if total == 0 {
                    return Err(Error::InsufficientData("Lz has no counts".into()));
                }
                Ok(Some((c[0] as f64 - c[2] as f64) / total as f64))
            }
            (None, None, Some(m)) if m.is_finite() && m.abs() <= 1.0 => Ok(Some(m)),
            _ => Err(Error::Invalid(
                "`lz` needs exactly one of `probs`, `counts`, `mean` (|mean| <= 1)".into(),
            )),
        }
    }

    pub fn from_table(table: &ProbabilityTable) -> Self {
        Self {
            directions: table
                .rows()
                .iter()
                .map(|r| DirectionEntry {
                    name: r.name.clone(),
                    n: r.name.is_none().then(|| {
                        let v = r.direction.vector();
                        [v.x, v.y, v.z]
                    }),
                    probs: Some(r.probs),
                    ..Default::default()
                })
                .collect(),
            lz: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{random_density_matrix, random_unit_trace_hermitian, stream};
    use crate::source::noon_state;
    use crate::spin::spin_matrices;

    /// Random trace-one Hermitian matrix, not necessarily positive.
    #[test]
    fn predicted_probs_examples() {
        for n in five_directions() {
            for p in predicted_probs(&DensityMatrix::maximally_mixed(), &n) {
                assert!((p - 1.0 / 3.0).abs() < 1e-12);
            }
        }
        let noon = DensityMatrix::pure(&noon_state()).unwrap();
        let p = predicted_probs(&noon, &SpinDirection::z());
        assert!((p[0] - 0.5).abs() < 1e-12 && p[1].abs() < 1e-12 && (p[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn predicted_probs_is_linear() {
        let mut rng = stream(11, 0);
        let a = random_density_matrix(&mut rng);
        let b = random_density_matrix(&mut rng);
        let mix = DensityMatrix::mixture(&[(0.3, &a), (0.7, &b)]).unwrap();
        for n in five_directions() {
            let (pa, pb, pm) = (
                predicted_probs(&a, &n),
                predicted_probs(&b, &n),
                predicted_probs(&mix, &n),
            );
            for k in 0..3 {
                assert!((pm[k] - (0.3 * pa[k] + 0.7 * pb[k])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn measurement_map_ranks() {
        let full = measurement_map(&five_directions());
        assert_eq!(full.matrix().shape(), (15, 9));
        assert_eq!(full.rank(), 9);
        let one = measurement_map(&five_directions()[..1]);
        assert!(one.rank() <= 3);
        let xyz = [
            SpinDirection::named("Lx").unwrap(),
            SpinDirection::named("Ly").unwrap(),
            SpinDirection::z(),
        ];
        assert!(measurement_map(&xyz).rank() < 9);
    }

    #[test]
    fn measurement_map_reproduces_probabilities() {
        let mut rng = stream(12, 0);
        let rho = random_density_matrix(&mut rng);
        let basis = operator_basis();
        let mut x = DVector::zeros(9);
        x[0] = 1.0;
        for (a, v) in basis.expand(rho.entries()).iter().enumerate() {
            x[a + 1] = *v;
        }
        let map = measurement_map(&five_directions());
        let p = map.matrix() * x;
        let table = ProbabilityTable::predicted(&rho, &five_directions()).unwrap();
        assert!((p - table.stacked()).norm() < 1e-12);
    }

    #[test]
    fn linear_inversion_round_trip() {
        let mut rng = stream(13, 0);
        for _ in 0..100 {
            let rho = random_unit_trace_hermitian(&mut rng);
            let table = ProbabilityTable::predicted(&rho, &five_directions()).unwrap();
            let back = linear_inversion(&table).unwrap();
            assert!(back.is_complete());
            let err = (back.rho.entries() - rho.entries())
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-10, "{err}");
        }
    }

    #[test]
    fn linear_inversion_of_mixed_state() {
        let table =
            ProbabilityTable::predicted(&DensityMatrix::maximally_mixed(), &five_directions())
                .unwrap();
        let rho = linear_inversion(&table).unwrap().rho;
        assert!((rho.entries() - DensityMatrix::maximally_mixed().entries()).norm() < 1e-12);
    }

    #[test]
    fn rank_deficient_inversion_is_flagged() {
        let dirs = [SpinDirection::named("Lx").unwrap(), SpinDirection::z()];
        let table = ProbabilityTable::predicted(&DensityMatrix::maximally_mixed(), &dirs).unwrap();
        let out = linear_inversion(&table).unwrap();
        assert!(!out.is_complete());
        assert!((out.rho.entries().trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn measured_tables_are_renormalized_or_rejected() {
        let row = |p: [f64; 3]| ProbabilityRow {
            name: None,
            direction: SpinDirection::z(),
            probs: p,
        };
        let t = ProbabilityTable::from_measured(vec![row([0.333, 0.027, 0.655])]).unwrap();
        assert!((t.rows()[0].probs.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(matches!(
            ProbabilityTable::from_measured(vec![row([0.5, 0.5, 0.2])]),
            Err(Error::Normalization { .. })
        ));
        assert!(ProbabilityTable::new(vec![row([0.333, 0.027, 0.655])]).is_err());
        assert!(ProbabilityTable::from_measured(vec![row([-0.1, 0.5, 0.6])]).is_err());
    }

    #[test]
    fn mle_recovers_state_from_large_samples() {
        let mut rng = stream(14, 0);
        let truth = random_density_matrix(&mut rng);
        let counts =
            CountRecord::synthesize(&truth, &five_directions(), 10_000_000, &mut rng).unwrap();
        let fit = mle_reconstruct(&counts, &MleSettings::default()).unwrap();
        assert!(fit.converged);
        let d = trace_norm(&fit.rho.difference(&truth));
        assert!(d < 0.01, "{d}");
    }

    #[test]
    fn mle_likelihood_never_decreases() {
        let mut rng = stream(15, 0);
        let truth = random_density_matrix(&mut rng);
        let counts = CountRecord::synthesize(&truth, &five_directions(), 5_000, &mut rng).unwrap();
        let fit = mle_reconstruct(
            &counts,
            &MleSettings {
                record_trace: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(fit.trace.len(), fit.iterations + 1);
        for w in fit.trace.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert!(fit.rho.is_psd(-1e-10));
    }

    #[test]
    fn mle_on_degenerate_data_stays_physical() {
        let dirs = five_directions();
        let noon = DensityMatrix::pure(&crate::source::noon_state()).unwrap();
        let rows = dirs
            .iter()
            .map(|n| CountRow {
                name: None,
                direction: *n,
                counts: predicted_probs(&noon, n).map(|p| (1000.0 * p).round() as u64),
                exposure: None,
            })
            .collect();
        let fit =
            mle_reconstruct(&CountRecord::new(rows).unwrap(), &MleSettings::default()).unwrap();
        assert!(fit.rho.is_psd(-1e-10));
        assert!((fit.rho.entries().trace().re - 1.0).abs() < 1e-12);
        // several outcomes have zero counts; L2 is entirely in the Ly = 0 outcome
        let ly0 = eigenprojectors(&dirs[1])[1];
        assert!(fit.rho.expectation(&ly0) > 0.9);
    }

    #[test]
    fn mle_iteration_cap_is_flagged() {
        let mut rng = stream(16, 0);
        let truth = random_density_matrix(&mut rng);
        let counts = CountRecord::synthesize(&truth, &five_directions(), 10_000, &mut rng).unwrap();
        let fit = mle_reconstruct(
            &counts,
            &MleSettings {
                max_iterations: 2,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 2);
    }

    #[test]
    fn consistency_relations_are_operator_identities() {
        let l = spin_matrices();
        let ops: Vec<_> = five_directions().iter().map(|n| n.operator()).collect();
        let s = FRAC_1_SQRT_2;
        let max = |m: Matrix3<C64>| m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(max(ops[0] - (ops[2] - ops[3] + ops[4]).scale(s)) < 1e-12);
        assert!(max(ops[1] - (ops[2] + ops[3] - ops[4]).scale(s)) < 1e-12);
        assert!(max(l.lz - (-ops[2] + ops[3] + ops[4]).scale(s)) < 1e-12);
    }

    #[test]
    fn consistency_on_model_tables_is_exact() {
        let mut rng = stream(17, 0);
        for _ in 0..20 {
            let rho = random_unit_trace_hermitian(&mut rng);
            let table = ProbabilityTable::predicted(&rho, &five_directions()).unwrap();
            let lz = predicted_probs(&rho, &SpinDirection::z());
            let r = consistency_check(&table, Some(lz)).unwrap();
            assert!(r.residual_l1 < 1e-12 && r.residual_l2 < 1e-12);
            assert!(r.residual_lz.unwrap() < 1e-12);
        }
    }

    #[test]
    fn consistency_needs_all_five_directions() {
        let table =
            ProbabilityTable::predicted(&DensityMatrix::maximally_mixed(), &five_directions()[..4])
                .unwrap();
        assert!(consistency_check(&table, None).is_err());
    }

    #[test]
    fn diagnostics_examples() {
        let noon = DensityMatrix::pure(&noon_state()).unwrap();
        let same = diagnostics(&noon, &noon);
        assert!(same.trace_norm_distance.abs() < 1e-12);
        let d = diagnostics(&DensityMatrix::maximally_mixed(), &noon);
        assert!((d.trace_norm_distance - 4.0 / 3.0).abs() < 1e-12);
        assert!((d.trace_distance - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn file_format_parsing() {
        let text = r#"{"directions": [
            {"name": "L1", "probs": [0.333, 0.027, 0.655]},
            {"n": [0, 1, 0], "probs": [0.017, 0.926, 0.019]}
        ], "lz": {"mean": 0.054}}"#;
        let file: TomographyFile = serde_json::from_str(text).unwrap();
        let TomographyData::Probabilities(t) = file.data().unwrap() else {
            panic!("expected probabilities")
        };
        assert_eq!(t.rows().len(), 2);
        assert_eq!(file.lz_mean().unwrap(), Some(0.054));

        let mixed = r#"{"directions": [{"name": "L1", "probs": [0.3, 0.3, 0.4]}, {"name": "L2", "counts": [1, 2, 3]}]}"#;
        let file: TomographyFile = serde_json::from_str(mixed).unwrap();
        assert!(file.data().is_err());

        let counts = r#"{"directions": [{"name": "L1", "counts": [10, 0, 30]}]}"#;
        let file: TomographyFile = serde_json::from_str(counts).unwrap();
        let TomographyData::Counts(c) = file.data().unwrap() else {
            panic!()
        };
        assert_eq!(c.rows()[0].counts, [10, 0, 30]);

        let empty = r#"{"directions": [{"name": "L1", "counts": [0, 0, 0]}]}"#;
        let file: TomographyFile = serde_json::from_str(empty).unwrap();
        assert!(file.data().is_err());
    }

    #[test]
    fn result_serializes_matrices_as_re_im() {
        let table =
            ProbabilityTable::predicted(&DensityMatrix::maximally_mixed(), &five_directions())
                .unwrap();
        let raw = linear_inversion(&table).unwrap();
        let text = serde_json::to_string(&TomographyResult::new(Some(&raw), None)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v["rho_raw"]["re"].is_array() && v["rho_raw"]["im"].is_array());
        assert!(v.get("rho_ml").is_none());
        let back: TomographyResult = serde_json::from_str(&text).unwrap();
        assert!((back.rho_raw.unwrap().entries() - raw.rho.entries()).norm() < 1e-12);
    }
}

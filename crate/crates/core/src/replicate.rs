//! End-to-end replication checks against the bundled reference data.
//!
//! Each criterion returns a list of numeric checks; a criterion passes when
//! every check does. Nothing here adjusts tolerances after the fact.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::fmt;
use std::time::Instant;

use nalgebra::{DMatrix, Matrix3};
use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::fixtures::Reference;
use crate::fock::{eigenvalues_hermitian, trace_norm, FockKet, PureState, C64};
use crate::fringe::{
    fit_fringe, phase_grid, simulate_fringe, synthesize_counts_with, visibilities,
};
use crate::optics::{beamsplitter_unitary, circuit_unitary, Element, Mode, Rep, BALANCED};
use crate::rng::{random_density_matrix, random_pure_state, random_unit_trace_hermitian, stream};
use crate::source::{noon_state, SourceParams};
use crate::spin::{five_directions, spin_matrices, SpinDirection};
use crate::tomography::{
    consistency_check_with_mean, linear_inversion, measurement_map, mle_reconstruct,
    predicted_probs, CountRecord, MleSettings, ProbabilityTable,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bound {
    Within { expected: f64, tolerance: f64 },
    AtMost { limit: f64 },
    AtLeast { limit: f64 },
    Below { limit: f64 },
    Above { limit: f64 },
}

impl Bound {
    fn holds(&self, x: f64) -> bool {
        match *self {
            Bound::Within {
                expected,
                tolerance,
            } => (x - expected).abs() <= tolerance,
            Bound::AtMost { limit } => x <= limit,
            Bound::AtLeast { limit } => x >= limit,
            Bound::Below { limit } => x < limit,
            Bound::Above { limit } => x > limit,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Bound::Within {
                expected,
                tolerance,
            } => write!(f, "{expected} ± {tolerance:e}"),
            Bound::AtMost { limit } => write!(f, "<= {limit:e}"),
            Bound::AtLeast { limit } => write!(f, ">= {limit}"),
            Bound::Below { limit } => write!(f, "< {limit}"),
            Bound::Above { limit } => write!(f, "> {limit}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub quantity: String,
    pub computed: f64,
    pub bound: Bound,
    pub passed: bool,
}

impl Check {
    pub fn new(quantity: impl Into<String>, computed: f64, bound: Bound) -> Self {
        Self {
            quantity: quantity.into(),
            computed,
            bound,
            passed: bound.holds(computed),
        }
    }

    fn within(q: impl Into<String>, x: f64, expected: f64, tolerance: f64) -> Self {
        Self::new(
            q,
            x,
            Bound::Within {
                expected,
                tolerance,
            },
        )
    }

    fn at_most(q: impl Into<String>, x: f64, limit: f64) -> Self {
        Self::new(q, x, Bound::AtMost { limit })
    }

    fn at_least(q: impl Into<String>, x: f64, limit: f64) -> Self {
        Self::new(q, x, Bound::AtLeast { limit })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub elapsed_s: f64,
}

impl CriterionReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// One line: `criterion N PASS|FAIL title (t s)`.
    pub fn summary(&self) -> String {
        format!(
            "criterion {:>2} {} {} ({:.2} s)",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.elapsed_s
        )
    }
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.summary())?;
        if let Some(e) = &self.error {
            writeln!(f, "    error: {e}")?;
        }
        for c in &self.checks {
            writeln!(
                f,
                "    [{}] {}: {:.6} (want {})",
                if c.passed { "ok" } else { "FAIL" },
                c.quantity,
                c.computed,
                c.bound
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub seed: u64,
    pub passed: bool,
    pub criteria: Vec<CriterionReport>,
}

impl Report {
    pub fn failed_ids(&self) -> Vec<u32> {
        self.criteria
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.id)
            .collect()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.criteria {
            write!(f, "{c}")?;
        }
        let failed = self.failed_ids();
        if failed.is_empty() {
            writeln!(f, "all {} criteria passed", self.criteria.len())
        } else {
            writeln!(f, "failed criteria: {failed:?}")
        }
    }
}

pub const TITLES: [&str; 11] = [
    "linear inversion of the reference table matches the reference matrix",
    "eigenvalues of the linear-inversion matrix",
    "forward prediction of the reference table from the reference matrix",
    "maximum-likelihood reconstruction of the reference table",
    "consistency residuals of the reference table",
    "Hong-Ou-Mandel suppression",
    "NOON fringe period, range and visibility",
    "fringe fit coverage on Poisson data",
    "two-color and spin-1 simulations agree",
    "spin-1 operator algebra",
    "reconstruction round trips",
];

pub fn run_criterion(id: u32, seed: u64) -> CriterionReport {
    let start = Instant::now();
    let result = match id {
        1 => inversion_matches_reference(),
        2 => inversion_eigenvalues(),
        3 => forward_prediction(),
        4 => maximum_likelihood(),
        5 => consistency(seed),
        6 => hong_ou_mandel(),
        7 => noon_fringe(),
        8 => fit_coverage(seed),
        9 => subspace_equivalence(seed),
        10 => algebra(),
        11 => round_trips(seed),
        _ => Err(crate::Error::Invalid(format!("no criterion {id}"))),
    };
    let elapsed_s = start.elapsed().as_secs_f64();
    let (checks, error) = match result {
        Ok(c) => (c, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    CriterionReport {
        id,
        title: (id as usize)
            .checked_sub(1)
            .and_then(|k| TITLES.get(k))
            .copied()
            .unwrap_or("unknown"),
        passed: error.is_none() && !checks.is_empty() && checks.iter().all(|c| c.passed),
        checks,
        error,
        elapsed_s,
    }
}

pub fn run_all(seed: u64) -> Report {
    let criteria: Vec<_> = (1..=11).map(|id| run_criterion(id, seed)).collect();
    Report {
        seed,
        passed: criteria.iter().all(|c| c.passed),
        criteria,
    }
}

fn reference_table(reference: &Reference) -> Result<ProbabilityTable> {
    reference.tomography.data().map(|d| d.table())
}

fn entry_checks(prefix: &str, got: &Matrix3<C64>, want: &Matrix3<C64>, tol: f64) -> Vec<Check> {
    let mut checks = Vec::new();
    for r in 0..3 {
        for col in r..3 {
            let q = format!("{prefix}[{}{}]", r + 1, col + 1);
            checks.push(Check::within(
                format!("{q}.re"),
                got[(r, col)].re,
                want[(r, col)].re,
                tol,
            ));
            if r != col {
                checks.push(Check::within(
                    format!("{q}.im"),
                    got[(r, col)].im,
                    want[(r, col)].im,
                    tol,
                ));
            }
        }
    }
    checks
}

fn inversion_matches_reference() -> Result<Vec<Check>> {
    let start = Instant::now();
    let reference = Reference::load()?;
    let raw = linear_inversion(&reference_table(&reference)?)?;
    let mut checks = entry_checks(
        "rho_raw",
        raw.rho.entries(),
        &reference.rho_raw_printed(),
        0.015,
    );
    checks.push(Check::at_most(
        "runtime (s)",
        start.elapsed().as_secs_f64(),
        1.0,
    ));
    Ok(checks)
}

fn inversion_eigenvalues() -> Result<Vec<Check>> {
    let reference = Reference::load()?;
    let raw = linear_inversion(&reference_table(&reference)?)?;
    let ev = raw.rho.eigenvalues();
    let mut checks: Vec<Check> = ev
        .iter()
        .zip(reference.eigenvalues_raw.value)
        .enumerate()
        .map(|(k, (got, want))| Check::within(format!("eigenvalue {}", k + 1), *got, want, 0.02))
        .collect();
    checks.push(Check::new(
        "smallest eigenvalue",
        ev[2],
        Bound::Below { limit: 0.0 },
    ));
    Ok(checks)
}

fn forward_prediction() -> Result<Vec<Check>> {
    let reference = Reference::load()?;
    let rho = reference.rho_raw()?;
    let mut checks = Vec::new();
    for d in &reference.tomography.directions {
        let name = d.name.clone().unwrap_or_default();
        let n = SpinDirection::named(&name)?;
        let p = predicted_probs(&rho, &n);
        let want = d.probs.expect("reference rows carry probabilities");
        for (k, ket) in FockKet::ALL.iter().enumerate() {
            checks.push(Check::within(
                format!("{name} P({})", ket.label()),
                p[k],
                want[k],
                0.01,
            ));
        }
    }
    Ok(checks)
}

/// Effective events per direction assigned to the reference probabilities.
pub const REFERENCE_SHOTS: f64 = 1e4;

fn maximum_likelihood() -> Result<Vec<Check>> {
    let reference = Reference::load()?;
    let table = reference_table(&reference)?;
    let raw = linear_inversion(&table)?;
    let counts = CountRecord::from_probabilities(&table, REFERENCE_SHOTS)?;
    let ml = mle_reconstruct(&counts, &MleSettings::default())?;
    let min_eig = ml.rho.eigenvalues()[2];
    Ok(vec![
        Check::at_least("converged", ml.converged as u8 as f64, 1.0),
        Check::at_least("smallest eigenvalue of rho_ml", min_eig, -1e-12),
        Check::within("trace of rho_ml", ml.rho.entries().trace().re, 1.0, 1e-12),
        Check::at_most(
            "Tr|rho_ml - reference rho_ml|",
            trace_norm(&ml.rho.difference(&reference.rho_ml()?)),
            0.08,
        ),
        Check::within(
            "Tr|rho_raw - rho_ml|",
            trace_norm(&raw.rho.difference(&ml.rho)),
            reference.trace_norm_raw_ml.value,
            0.03,
        ),
    ])
}

fn consistency(seed: u64) -> Result<Vec<Check>> {
    let reference = Reference::load()?;
    let report = consistency_check_with_mean(
        &reference_table(&reference)?,
        reference.tomography.lz_mean()?,
    )?;
    let mut checks = vec![
        Check::at_most("L1 relation residual", report.residual_l1, 0.05),
        Check::at_most("L2 relation residual", report.residual_l2, 0.05),
        Check::at_most(
            "Lz relation residual",
            report.residual_lz.unwrap_or(f64::NAN),
            0.05,
        ),
    ];
    let mut rng = stream(seed, 5 << 32);
    let lz = spin_matrices().lz;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let rho = random_density_matrix(&mut rng);
        let table = ProbabilityTable::predicted(&rho, &five_directions())?;
        let r = consistency_check_with_mean(&table, Some(rho.expectation(&lz)))?;
        worst = worst
            .max(r.residual_l1)
            .max(r.residual_l2)
            .max(r.residual_lz.unwrap_or(f64::NAN));
    }
    checks.push(Check::at_most(
        "largest residual on model tables",
        worst,
        1e-12,
    ));
    Ok(checks)
}

fn hong_ou_mandel() -> Result<Vec<Check>> {
    let bs = beamsplitter_unitary(BALANCED, Rep::Spin1);
    let out = bs.apply(&PureState::basis_ket(FockKet::OneOne))?;
    let p11 = out
        .amplitude(FockKet::OneOne)
        .map_or(f64::NAN, |a| a.norm_sqr());
    let expected = noon_state();
    let overlap = expected.inner(&out)?;
    let phase_error = (overlap - C64::new(0.0, -1.0)).norm();
    Ok(vec![
        Check::at_most("P(1;1) after balanced splitter", p11, 1e-12),
        Check::within("|<NOON|out>|", overlap.norm(), 1.0, 1e-12),
        Check::at_most("|<NOON|out> + i|", phase_error, 1e-12),
    ])
}

fn noon_fringe() -> Result<Vec<Check>> {
    let theta = FRAC_PI_2;
    let phis = phase_grid(0.0, 2.0 * PI, 1000);
    let pure = SourceParams::new(0.0, 1.0)?;
    let p = simulate_fringe(&pure, theta, &phis)?;
    let shifted: Vec<f64> = phis.iter().map(|x| x + PI).collect();
    let q = simulate_fringe(&pure, theta, &shifted)?;
    let period_error = p
        .iter()
        .zip(&q)
        .map(|(a, b)| (a[1] - b[1]).abs())
        .fold(0.0, f64::max);
    let p11: Vec<f64> = p.iter().map(|x| x[1]).collect();
    let min = p11.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = p11.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let vs: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
    let mut vis = Vec::new();
    let mut closed_form_error: f64 = 0.0;
    for &v in &vs {
        let curve = simulate_fringe(&SourceParams::new(0.0, v)?, theta, &phis)?;
        let x = visibilities(&curve)[1];
        let expected = v / (v + 2.0 * (1.0 - v) / 3.0);
        closed_form_error = closed_form_error.max((x - expected).abs());
        vis.push(x);
    }
    let min_step = vis
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    Ok(vec![
        Check::at_most("|P11(phi) - P11(phi + pi)|", period_error, 1e-10),
        Check::within("min P11", min, 0.0, 1e-10),
        Check::within("max P11", max, 1.0, 1e-10),
        Check::new(
            "smallest visibility increase over V steps of 0.05",
            min_step,
            Bound::Above { limit: 0.0 },
        ),
        Check::within("visibility at V = 0", vis[0], 0.0, 1e-10),
        Check::within("visibility at V = 1", vis[vis.len() - 1], 1.0, 1e-10),
        Check::at_most("visibility vs V/(V + 2(1-V)/3)", closed_form_error, 1e-10),
    ])
}

pub const FIT_TRIALS: u64 = 100;
pub const FIT_POINTS: usize = 50;

fn fit_coverage(seed: u64) -> Result<Vec<Check>> {
    let reference = Reference::load()?;
    let (v, r) = (0.98, reference.fringe.r);
    let theta = FRAC_PI_2;
    let phis = phase_grid(0.0, 2.0 * PI, FIT_POINTS);
    let probs = simulate_fringe(&SourceParams::new(r, v)?, theta, &phis)?;
    let mut covered = 0;
    let mut converged = 0;
    for trial in 0..FIT_TRIALS {
        let mut rng = stream(seed, (8 << 32) | trial);
        let scan = synthesize_counts_with(theta, &phis, &probs, reference.fringe.n, &mut rng)?;
        let Ok(fit) = fit_fringe(&scan) else { continue };
        converged += fit.converged as u32;
        if (fit.v - v).abs() <= 3.0 * fit.sigma_v && (fit.r - r).abs() <= 3.0 * fit.sigma_r {
            covered += 1;
        }
    }
    Ok(vec![
        Check::at_least("trials with V and R inside 3 sigma", covered as f64, 95.0),
        Check::at_least("converged fits", converged as f64, 95.0),
    ])
}

fn random_element<R: Rng>(rng: &mut R) -> Element {
    let x = rng.random_range(-PI..PI);
    match rng.random_range(0..3) {
        0 => Element::Phase {
            param: x,
            mode: if rng.random() { Mode::C } else { Mode::D },
        },
        1 => Element::Bs { param: x },
        _ => Element::Mzi { param: x },
    }
}

fn subspace_equivalence(seed: u64) -> Result<Vec<Check>> {
    let mut rng = stream(seed, 9 << 32);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let len = rng.random_range(1..=6);
        let elements: Vec<Element> = (0..len).map(|_| random_element(&mut rng)).collect();
        let input = random_pure_state(&mut rng);
        let small = circuit_unitary(&elements, Rep::Spin1)?.apply(&input)?;
        let big = circuit_unitary(&elements, Rep::TwoColor)?.apply(&input.lift()?)?;
        let projected = crate::fock::symmetrize(&big)?;
        let diff = (projected - small.as_spin1().expect("spin-1"))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        worst = worst.max(diff);
    }
    Ok(vec![Check::at_most(
        "largest amplitude difference",
        worst,
        1e-12,
    )])
}

fn max_entry(m: &Matrix3<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn algebra() -> Result<Vec<Check>> {
    let s = spin_matrices();
    let (lx, ly, lz) = (s.lx, s.ly, s.lz);
    let i = C64::new(0.0, 1.0);
    let comm = |a: &Matrix3<C64>, b: &Matrix3<C64>| a * b - b * a;
    let casimir = lx * lx + ly * ly + lz * lz - Matrix3::identity().scale(2.0);

    let mut spectrum_error: f64 = 0.0;
    let mut dirs: Vec<SpinDirection> = five_directions().to_vec();
    let mut rng = stream(0, 10 << 32);
    for _ in 0..100 {
        let v = nalgebra::Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if v.norm() > 1e-3 {
            dirs.push(SpinDirection::along(v)?);
        }
    }
    for n in &dirs {
        let m = DMatrix::from_column_slice(3, 3, n.operator().as_slice());
        let ev = eigenvalues_hermitian(&m)?;
        for (got, want) in ev.iter().zip([1.0, 0.0, -1.0]) {
            spectrum_error = spectrum_error.max((got - want).abs());
        }
    }

    let l: Vec<Matrix3<C64>> = five_directions().iter().map(|n| n.operator()).collect();
    let h = FRAC_1_SQRT_2;
    let id1 = l[0] - (l[2] - l[3] + l[4]).scale(h);
    let id2 = l[1] - (l[2] + l[3] - l[4]).scale(h);
    let id3 = lz - (-l[2] + l[3] + l[4]).scale(h);

    Ok(vec![
        Check::at_most(
            "[Lx, Ly] - i Lz",
            max_entry(&(comm(&lx, &ly) - lz * i)),
            1e-12,
        ),
        Check::at_most(
            "[Ly, Lz] - i Lx",
            max_entry(&(comm(&ly, &lz) - lx * i)),
            1e-12,
        ),
        Check::at_most(
            "[Lz, Lx] - i Ly",
            max_entry(&(comm(&lz, &lx) - ly * i)),
            1e-12,
        ),
        Check::at_most("Lx^2 + Ly^2 + Lz^2 - 2I", max_entry(&casimir), 1e-12),
        Check::at_most("direction spectra vs {1, 0, -1}", spectrum_error, 1e-12),
        Check::within(
            "measurement map rank",
            measurement_map(&five_directions()).rank() as f64,
            9.0,
            0.0,
        ),
        Check::at_most("L1 - (L3 - L4 + L5)/sqrt2", max_entry(&id1), 1e-12),
        Check::at_most("L2 - (L3 + L4 - L5)/sqrt2", max_entry(&id2), 1e-12),
        Check::at_most("Lz - (-L3 + L4 + L5)/sqrt2", max_entry(&id3), 1e-12),
    ])
}

/// Events per direction for the high-statistics likelihood check.
pub const ROUND_TRIP_SHOTS: u64 = 10_000_000;

fn round_trips(seed: u64) -> Result<Vec<Check>> {
    let mut rng = stream(seed, 11 << 32);
    let dirs = five_directions();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let rho = random_unit_trace_hermitian(&mut rng);
        let back = linear_inversion(&ProbabilityTable::predicted(&rho, &dirs)?)?;
        worst = worst.max(max_entry(&(back.rho.entries() - rho.entries())));
    }
    let truth = random_density_matrix(&mut rng);
    let counts = CountRecord::synthesize(&truth, &dirs, ROUND_TRIP_SHOTS, &mut rng)?;
    let ml = mle_reconstruct(&counts, &MleSettings::default())?;
    Ok(vec![
        Check::at_most(
            "linear inversion round trip, largest entry error",
            worst,
            1e-10,
        ),
        Check::at_most(
            "Tr|rho_ml - rho_true| at 1e7 events",
            trace_norm(&ml.rho.difference(&truth)),
            0.01,
        ),
    ])
}

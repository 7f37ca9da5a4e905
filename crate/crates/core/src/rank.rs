//! Lie-algebra rank of the family at a point, the singular strata where
//! X2, X4 or X1, X3 lose independence, sampled sweeps and escape from Γ.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{energies, Params, State, Vec4};
use crate::jet::Jet;
use crate::liealg::{bracket_jets, BracketWord, Family, LieError, VectorField, DEFAULT_MAX_DEPTH};
use crate::sim::{flow, SimError, DEFAULT_DT};

pub const DEFAULT_RANK_TOL: f64 = 1e-8;
pub const DEFAULT_STRATUM_TOL: f64 = 1e-8;
pub const GENERIC_DEPTH: usize = 2;
pub const STRATUM_DEPTH: usize = 4;
pub const DEFAULT_ESCAPE_HORIZON: f64 = 1.0;
pub const DEFAULT_ESCAPE_STEPS: usize = 100;
const DIM: usize = 4;

#[derive(Debug, Clone, Error)]
pub enum RankError {
    #[error("precondition violated: {0}")]
    ParameterMisuse(String),
    #[error("no escape from Γ within horizon {horizon} (max |gamma_det| = {max_abs_gamma_det:e})")]
    NoEscapeWithinHorizon {
        horizon: f64,
        max_abs_gamma_det: f64,
        report: Option<Box<EscapeReport>>,
    },
    #[error("sweep report has no samples")]
    EmptyReport,
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankReport {
    pub point: State,
    pub rank: usize,
    /// Descending, padded with zeros to four entries.
    pub singular_values: [f64; 4],
    pub witness_words: Vec<BracketWord>,
    /// Deepest bracket level evaluated; stops early once the rank is full.
    pub depth_used: usize,
    pub words_evaluated: usize,
    pub tol: f64,
}

fn singular_values(rows: &[Vec4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    if rows.is_empty() {
        return out;
    }
    let m = DMatrix::from_fn(rows.len(), DIM, |i, j| rows[i][j]);
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    for (o, s) in out.iter_mut().zip(sv) {
        *o = s;
    }
    out
}

/// #{σ > tol·σ_max}, and 0 when σ_max = 0.
pub fn numerical_rank(sv: &[f64; 4], tol: f64) -> usize {
    let max = sv[0];
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * max).count()
}

pub fn rank_of(rows: &[Vec4], tol: f64) -> usize {
    numerical_rank(&singular_values(rows), tol)
}

fn finite(label: &BracketWord, v: Vec4) -> Result<Vec4, LieError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(LieError::NonFiniteEvaluation {
            label: label.to_string(),
        })
    }
}

fn jet_value(j: &[Jet; 4]) -> Vec4 {
    Vec4::from(std::array::from_fn::<f64, 4, _>(|i| j[i].value()))
}

/// Right-normed words `[X_i, W]` level by level: level 0 is the generators,
/// level 1 keeps `i < j`, deeper levels bracket every generator with every
/// word of the previous level. Stops at `depth` or once the rank is full.
pub fn lie_rank(
    family: &Family,
    z: &State,
    depth: usize,
    tol: f64,
) -> Result<RankReport, LieError> {
    if depth > DEFAULT_MAX_DEPTH {
        return Err(LieError::DepthExceeded {
            depth,
            max: DEFAULT_MAX_DEPTH,
        });
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(LieError::InvalidTolerance(tol));
    }
    let n = family.len();
    let mut words: Vec<BracketWord> = Vec::new();
    let mut rows: Vec<Vec4> = Vec::new();
    for (i, m) in family.members().iter().enumerate() {
        let w = BracketWord::leaf(i + 1);
        rows.push(finite(&w, m.eval(z)?)?);
        words.push(w);
    }
    let mut sv = singular_values(&rows);
    let mut rank = numerical_rank(&sv, tol);
    let mut depth_used = 0;

    if rank < DIM && depth > 0 && n > 1 {
        // leaf jets at order `depth`; level-k words are kept at order depth − k
        let leaves: Vec<[Jet; 4]> = family.members().iter().map(|m| m.jet(z, depth)).collect();
        let mut prev: Vec<(BracketWord, [Jet; 4])> = leaves
            .iter()
            .enumerate()
            .map(|(i, j)| (BracketWord::leaf(i + 1), j.clone()))
            .collect();
        for level in 1..=depth {
            let order = depth - level + 1;
            let mut next = Vec::new();
            for (i, leaf) in leaves.iter().enumerate() {
                let leaf = leaf.clone().map(|c| c.truncate(order));
                for (w, wj) in &prev {
                    if let BracketWord::Leaf(j) = w {
                        if i + 1 >= *j {
                            continue;
                        }
                    }
                    let word = BracketWord::node(BracketWord::leaf(i + 1), w.clone());
                    let jet = bracket_jets(&leaf, wj);
                    rows.push(finite(&word, jet_value(&jet))?);
                    words.push(word.clone());
                    next.push((word, jet));
                }
            }
            depth_used = level;
            sv = singular_values(&rows);
            rank = numerical_rank(&sv, tol);
            if rank == DIM {
                break;
            }
            prev = next;
        }
    }

    let mut witness: Vec<usize> = Vec::new();
    let mut picked: Vec<Vec4> = Vec::new();
    for (k, r) in rows.iter().enumerate() {
        if witness.len() == rank {
            break;
        }
        picked.push(*r);
        if rank_of(&picked, tol) > witness.len() {
            witness.push(k);
        } else {
            picked.pop();
        }
    }
    Ok(RankReport {
        point: *z,
        rank,
        singular_values: sv,
        witness_words: witness.into_iter().map(|k| words[k].clone()).collect(),
        depth_used,
        words_evaluated: words.len(),
        tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StratumLabel {
    Generic,
    Gamma,
    Upsilon,
    Sigma,
}

impl StratumLabel {
    pub fn on_gamma(self) -> bool {
        matches!(self, StratumLabel::Gamma | StratumLabel::Sigma)
    }
}

impl fmt::Display for StratumLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stratum {
    pub label: StratumLabel,
    /// det of the ω-components of (X2, X4).
    pub gamma_det: f64,
    /// det of the θ-components of (X1, X3).
    pub upsilon_det: f64,
    /// Product of the two column norms entering `gamma_det`.
    pub gamma_scale: f64,
    pub upsilon_scale: f64,
}

fn det_and_scale(c1: [f64; 2], c2: [f64; 2]) -> (f64, f64) {
    let m = Matrix2::new(c1[0], c2[0], c1[1], c2[1]);
    let scale = m.column(0).norm() * m.column(1).norm();
    (m.determinant(), scale)
}

/// Labels `z` from the first four members of `family`, taken as X1..X4.
pub fn classify_family(family: &Family, z: &State, tol: f64) -> Result<Stratum, LieError> {
    let v = family.values(z)?;
    if v.len() < 4 {
        return Err(LieError::UnknownGenerator {
            index: 4,
            size: v.len(),
        });
    }
    let (gamma_det, gamma_scale) = det_and_scale([v[1][2], v[1][3]], [v[3][2], v[3][3]]);
    let (upsilon_det, upsilon_scale) = det_and_scale([v[0][0], v[0][1]], [v[2][0], v[2][1]]);
    let on_gamma = gamma_det.abs() <= tol * gamma_scale;
    let on_upsilon = upsilon_det.abs() <= tol * upsilon_scale;
    let label = match (on_gamma, on_upsilon) {
        (false, false) => StratumLabel::Generic,
        (true, false) => StratumLabel::Gamma,
        (false, true) => StratumLabel::Upsilon,
        (true, true) => StratumLabel::Sigma,
    };
    Ok(Stratum {
        label,
        gamma_det,
        upsilon_det,
        gamma_scale,
        upsilon_scale,
    })
}

pub fn classify_stratum(p: &Params, z: &State, tol: f64) -> Result<Stratum, LieError> {
    classify_family(&Family::pidp(p), z, tol)
}

/// gamma_det and its column scale; depends on θ only.
pub fn gamma_det(family: &Family, theta1: f64, theta2: f64) -> Result<(f64, f64), LieError> {
    let s = classify_family(
        family,
        &State::new(theta1, theta2, 0.0, 0.0),
        DEFAULT_STRATUM_TOL,
    )?;
    Ok((s.gamma_det, s.gamma_scale))
}

/// Zeros of gamma_det found by bisection along the lines θ2 = c (θ1 running
/// over [−π, π)) and then θ1 = c, for c on a grid. Only zeros passing the
/// relative test `|gamma_det| ≤ tol·scale` are kept, each returned once with
/// the given ω. At most `count` points are returned.
pub fn find_gamma_points(
    p: &Params,
    omega: [f64; 2],
    count: usize,
    tol: f64,
) -> Result<Vec<State>, LieError> {
    const LINES: usize = 16;
    const SCAN: usize = 256;
    // incommensurate offsets keep scan nodes off the roots, which tend to sit
    // at rational fractions of π
    const LINE_OFFSET: f64 = 0.381_966_011_250_105;
    const SCAN_OFFSET: f64 = 0.618_033_988_749_895;
    let family = Family::pidp(p);
    let pi = std::f64::consts::PI;
    let mut out: Vec<State> = Vec::new();
    let accept = |t1: f64, t2: f64, out: &mut Vec<State>| -> Result<bool, LieError> {
        let (d, scale) = gamma_det(&family, t1, t2)?;
        let z = State::new(t1, t2, omega[0], omega[1]);
        let seen = out
            .iter()
            .any(|q| (q.theta1 - t1).abs() < 1e-9 && (q.theta2 - t2).abs() < 1e-9);
        if d.abs() <= tol * scale && !seen {
            out.push(z);
        }
        Ok(out.len() >= count)
    };
    for axis in 0..2 {
        for l in 0..LINES {
            let c = -pi + (l as f64 + LINE_OFFSET) * 2.0 * pi / LINES as f64;
            let at = |s: f64| if axis == 0 { (s, c) } else { (c, s) };
            let g = |s: f64| -> Result<f64, LieError> {
                let (t1, t2) = at(s);
                Ok(gamma_det(&family, t1, t2)?.0)
            };
            let grid: Vec<f64> = (0..SCAN)
                .map(|k| -pi + 2.0 * pi * (k as f64 + SCAN_OFFSET) / SCAN as f64)
                .collect();
            let mut prev = g(grid[0])?;
            for w in grid.windows(2) {
                let next = g(w[1])?;
                let root = if next == 0.0 {
                    Some(w[1])
                } else if prev * next < 0.0 {
                    let (mut a, mut b, mut ga) = (w[0], w[1], prev);
                    loop {
                        let mid = 0.5 * (a + b);
                        if mid <= a || mid >= b {
                            break;
                        }
                        let gm = g(mid)?;
                        if gm == 0.0 {
                            (a, b) = (mid, mid);
                            break;
                        }
                        if gm.signum() == ga.signum() {
                            a = mid;
                            ga = gm;
                        } else {
                            b = mid;
                        }
                    }
                    Some(if ga.abs() <= g(b)?.abs() { a } else { b })
                } else {
                    None
                };
                if let Some(s) = root {
                    let (t1, t2) = at(s);
                    if accept(t1, t2, &mut out)? {
                        return Ok(out);
                    }
                }
                prev = next;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EscapeSample {
    pub t: f64,
    pub state: State,
    pub gamma_det: f64,
    pub label: StratumLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EscapeReport {
    pub start: State,
    pub start_label: StratumLabel,
    /// Signed generator indices of the path that escaped, e.g. `[-2, 3]`.
    pub path: Vec<i32>,
    pub escape_time: Option<f64>,
    pub final_label: StratumLabel,
    pub gamma_det_start: f64,
    pub gamma_det_at_escape: Option<f64>,
    /// |gamma_det| grew from the start to the escape point.
    pub gamma_det_increased: bool,
    pub profile: Vec<EscapeSample>,
    pub horizon: f64,
}

/// Candidate paths, each a sequence of (signed generator, share of the horizon).
const ESCAPE_PATHS: [&[(i32, f64)]; 6] = [
    &[(3, 1.0)],
    &[(-3, 1.0)],
    &[(2, 0.5), (3, 0.5)],
    &[(-2, 0.5), (3, 0.5)],
    &[(2, 0.5), (-3, 0.5)],
    &[(-2, 0.5), (-3, 0.5)],
];

/// Flows a point of Γ along ±X2 and ±X3, classifying after every step, and
/// reports the first time it leaves Γ.
pub fn escape_test(
    p: &Params,
    z0: &State,
    horizon: f64,
    steps: usize,
    tol: f64,
) -> Result<EscapeReport, RankError> {
    let family = Family::pidp(p);
    let start = classify_family(&family, z0, tol)?;
    if !start.label.on_gamma() {
        return Err(RankError::ParameterMisuse(format!(
            "escape_test needs a point of Γ, got {}",
            start.label
        )));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) || steps == 0 {
        return Err(RankError::ParameterMisuse(format!(
            "horizon {horizon} and steps {steps} must be positive"
        )));
    }
    if horizon == 0.0 {
        return Err(RankError::NoEscapeWithinHorizon {
            horizon,
            max_abs_gamma_det: start.gamma_det.abs(),
            report: None,
        });
    }
    let h = horizon / steps as f64;
    let dt = DEFAULT_DT.min(h);
    let mut best: Option<EscapeReport> = None;
    for path in ESCAPE_PATHS {
        let mut z = *z0;
        let mut t = 0.0;
        let mut profile = vec![EscapeSample {
            t,
            state: z,
            gamma_det: start.gamma_det,
            label: start.label,
        }];
        let mut escaped = None;
        'segments: for &(g, share) in path {
            let field = family.get(g.unsigned_abs() as usize)?;
            let n = ((steps as f64 * share).round() as usize).max(1);
            for _ in 0..n {
                z = flow(field.as_ref(), z, h * g.signum() as f64, dt)?;
                t += h;
                let s = classify_family(&family, &z, tol)?;
                profile.push(EscapeSample {
                    t,
                    state: z,
                    gamma_det: s.gamma_det,
                    label: s.label,
                });
                if !s.label.on_gamma() {
                    escaped = Some(s);
                    break 'segments;
                }
            }
        }
        let report = EscapeReport {
            start: *z0,
            start_label: start.label,
            path: path.iter().map(|s| s.0).collect(),
            escape_time: escaped.map(|_| t),
            final_label: profile.last().map(|s| s.label).unwrap_or(start.label),
            gamma_det_start: start.gamma_det,
            gamma_det_at_escape: escaped.map(|s| s.gamma_det),
            gamma_det_increased: escaped
                .map(|s| s.gamma_det.abs() > start.gamma_det.abs())
                .unwrap_or(false),
            profile,
            horizon,
        };
        if escaped.is_some() {
            return Ok(report);
        }
        let better = best
            .as_ref()
            .is_none_or(|b| max_abs_det(&report) > max_abs_det(b));
        if better {
            best = Some(report);
        }
    }
    let best = best.expect("at least one path is tried");
    Err(RankError::NoEscapeWithinHorizon {
        horizon,
        max_abs_gamma_det: max_abs_det(&best),
        report: Some(Box::new(best)),
    })
}

fn max_abs_det(r: &EscapeReport) -> f64 {
    r.profile
        .iter()
        .map(|s| s.gamma_det.abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Sampling {
    /// θ uniform on [−π, π)², ω uniform on [−omega_range, omega_range]².
    Random {
        n: usize,
        seed: u64,
        omega_range: f64,
    },
    /// `theta_points`² grid over [−π, π)² for each ω-slice.
    Grid {
        theta_points: usize,
        omega_slices: Vec<[f64; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub sampling: Sampling,
    pub rank_tol: f64,
    pub stratum_tol: f64,
    pub generic_depth: usize,
    pub strata_depth: usize,
}

impl SweepSpec {
    pub fn random(n: usize, seed: u64) -> Self {
        Self::new(Sampling::Random {
            n,
            seed,
            omega_range: 2.0,
        })
    }

    pub fn new(sampling: Sampling) -> Self {
        Self {
            sampling,
            rank_tol: DEFAULT_RANK_TOL,
            stratum_tol: DEFAULT_STRATUM_TOL,
            generic_depth: GENERIC_DEPTH,
            strata_depth: STRATUM_DEPTH,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self.sampling {
            Sampling::Random { seed, .. } => Some(seed),
            Sampling::Grid { .. } => None,
        }
    }

    pub fn points(&self) -> Vec<State> {
        let pi = std::f64::consts::PI;
        match &self.sampling {
            Sampling::Random {
                n,
                seed,
                omega_range,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let w = omega_range.abs();
                (0..*n)
                    .map(|_| {
                        let t1 = rng.gen_range(-pi..pi);
                        let t2 = rng.gen_range(-pi..pi);
                        let w1 = if w > 0.0 { rng.gen_range(-w..=w) } else { 0.0 };
                        let w2 = if w > 0.0 { rng.gen_range(-w..=w) } else { 0.0 };
                        State::new(t1, t2, w1, w2)
                    })
                    .collect()
            }
            Sampling::Grid {
                theta_points,
                omega_slices,
            } => {
                let k = *theta_points;
                let at = |i: usize| -pi + 2.0 * pi * i as f64 / k as f64;
                let mut out = Vec::with_capacity(k * k * omega_slices.len());
                for w in omega_slices {
                    for i in 0..k {
                        for j in 0..k {
                            out.push(State::new(at(i), at(j), w[0], w[1]));
                        }
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct StratumCounts {
    pub generic: usize,
    pub gamma: usize,
    pub upsilon: usize,
    pub sigma: usize,
}

impl StratumCounts {
    fn add(&mut self, label: StratumLabel) {
        match label {
            StratumLabel::Generic => self.generic += 1,
            StratumLabel::Gamma => self.gamma += 1,
            StratumLabel::Upsilon => self.upsilon += 1,
            StratumLabel::Sigma => self.sigma += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.generic + self.gamma + self.upsilon + self.sigma
    }
}

/// One CSV row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub point: State,
    pub stratum: StratumLabel,
    pub rank: usize,
    pub depth_used: usize,
    pub gamma_det: f64,
    pub upsilon_det: f64,
    pub hamiltonian: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubRankPoint {
    pub index: usize,
    pub stratum: StratumLabel,
    pub report: RankReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepDefect {
    pub index: usize,
    pub point: State,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub params: Params,
    pub spec: SweepSpec,
    pub seed: Option<u64>,
    pub total: usize,
    pub counts: StratumCounts,
    pub rank4: usize,
    pub fraction_rank4: Option<f64>,
    pub generic_rank4: usize,
    pub fraction_rank4_generic: Option<f64>,
    pub sub_rank: Vec<SubRankPoint>,
    pub defects: Vec<SweepDefect>,
    #[serde(skip)]
    pub rows: Vec<SweepRow>,
}

fn fraction(k: usize, n: usize) -> Option<f64> {
    (n > 0).then(|| k as f64 / n as f64)
}

/// Classifies and ranks every sample point in parallel; per-point failures
/// become defects.
pub fn sweep(p: &Params, spec: &SweepSpec) -> SweepReport {
    let family = Family::pidp(p);
    let points = spec.points();
    let results: Vec<Result<(Stratum, RankReport), LieError>> = points
        .par_iter()
        .map(|z| {
            let s = classify_family(&family, z, spec.stratum_tol)?;
            let depth = if s.label == StratumLabel::Generic {
                spec.generic_depth
            } else {
                spec.strata_depth
            };
            let r = lie_rank(&family, z, depth, spec.rank_tol)?;
            Ok((s, r))
        })
        .collect();

    let mut counts = StratumCounts::default();
    let mut rows = Vec::with_capacity(points.len());
    let mut sub_rank = Vec::new();
    let mut defects = Vec::new();
    let (mut rank4, mut generic_rank4) = (0, 0);
    for (index, (z, r)) in points.iter().zip(results).enumerate() {
        match r {
            Ok((s, report)) => {
                counts.add(s.label);
                if report.rank == DIM {
                    rank4 += 1;
                    if s.label == StratumLabel::Generic {
                        generic_rank4 += 1;
                    }
                }
                rows.push(SweepRow {
                    index,
                    point: *z,
                    stratum: s.label,
                    rank: report.rank,
                    depth_used: report.depth_used,
                    gamma_det: s.gamma_det,
                    upsilon_det: s.upsilon_det,
                    hamiltonian: energies(p, z).hamiltonian,
                });
                if report.rank < DIM {
                    sub_rank.push(SubRankPoint {
                        index,
                        stratum: s.label,
                        report,
                    });
                }
            }
            Err(e) => defects.push(SweepDefect {
                index,
                point: *z,
                error: e.to_string(),
            }),
        }
    }
    let classified = counts.total();
    SweepReport {
        params: *p,
        spec: spec.clone(),
        seed: spec.seed(),
        total: points.len(),
        counts,
        rank4,
        fraction_rank4: fraction(rank4, classified),
        generic_rank4,
        fraction_rank4_generic: fraction(generic_rank4, counts.generic),
        sub_rank,
        defects,
        rows,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VerdictKind {
    Supported,
    NotSupported,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub verdict: VerdictKind,
    /// Always "sampled evidence": a finite sample cannot prove the property.
    pub basis: &'static str,
    pub points_checked: usize,
    pub counterexamples: Vec<SubRankPoint>,
    pub defects: Vec<SweepDefect>,
}

pub fn bracket_generating_verdict(report: &SweepReport) -> Result<Verdict, RankError> {
    if report.total == 0 {
        return Err(RankError::EmptyReport);
    }
    let ok = report.sub_rank.is_empty() && report.defects.is_empty();
    Ok(Verdict {
        verdict: if ok {
            VerdictKind::Supported
        } else {
            VerdictKind::NotSupported
        },
        basis: "sampled evidence",
        points_checked: report.total,
        counterexamples: report.sub_rank.clone(),
        defects: report.defects.clone(),
    })
}

/// `family` with member `index` (1-based) multiplied by `factor`.
pub fn rescaled_family(family: &Family, index: usize, factor: f64) -> Result<Family, LieError> {
    family.get(index)?;
    let members = family
        .members()
        .iter()
        .enumerate()
        .map(|(i, m)| {
            if i + 1 == index {
                Arc::new(crate::liealg::ScaledField::new(factor, m.clone())) as _
            } else {
                m.clone()
            }
        })
        .collect();
    Ok(Family::new(members))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liealg::{FieldKind, PidpField, ScaledField, TaylorField};

    fn x(p: &Params, k: FieldKind) -> Arc<dyn TaylorField> {
        Arc::new(PidpField::new(*p, k))
    }

    #[test]
    fn rank_examples() {
        let p = Params::unit(9.81);
        let z = State::new(0.3, -0.2, 0.5, 0.1);
        assert_eq!(
            classify_stratum(&p, &z, DEFAULT_STRATUM_TOL).unwrap().label,
            StratumLabel::Generic
        );
        let r = lie_rank(&Family::pidp(&p), &z, 2, 1e-8).unwrap();
        assert_eq!(r.rank, 4);
        assert_eq!(r.witness_words.len(), 4);
        assert!(r.singular_values.windows(2).all(|w| w[0] >= w[1]));

        let only_x2 = Family::new(vec![x(&p, FieldKind::ScaledControl)]);
        assert_eq!(lie_rank(&only_x2, &z, 3, 1e-8).unwrap().rank, 1);

        let x1 = x(&p, FieldKind::ScaledDrift);
        let copies = Family::new(vec![x1.clone(), x1.clone(), x1.clone(), x1]);
        assert!(lie_rank(&copies, &z, 3, 1e-8).unwrap().rank <= 1);
    }

    #[test]
    fn zero_family_has_rank_zero() {
        let p = Params::unit(9.81);
        let x2 = x(&p, FieldKind::ScaledControl);
        let zero: Arc<dyn TaylorField> = Arc::new(ScaledField::new(0.0, x2));
        let r = lie_rank(
            &Family::new(vec![zero]),
            &State::new(0.1, 0.2, 0.0, 0.0),
            2,
            1e-8,
        )
        .unwrap();
        assert_eq!(r.rank, 0);
        assert!(r.witness_words.is_empty());
    }

    #[test]
    fn rank_argument_errors() {
        let fam = Family::pidp(&Params::unit(9.81));
        let z = State::new(0.3, -0.2, 0.5, 0.1);
        assert!(matches!(
            lie_rank(&fam, &z, 5, 1e-8),
            Err(LieError::DepthExceeded { .. })
        ));
        assert!(matches!(
            lie_rank(&fam, &z, 2, 0.0),
            Err(LieError::InvalidTolerance(_))
        ));
    }

    #[test]
    fn synthetic_sigma() {
        let p = Params::unit(9.81);
        let x1 = x(&p, FieldKind::ScaledDrift);
        let x2 = x(&p, FieldKind::ScaledControl);
        let fam = Family::new(vec![
            x1.clone(),
            x2.clone(),
            Arc::new(ScaledField::new(2.0, x1)),
            Arc::new(ScaledField::new(2.0, x2)),
        ]);
        let s = classify_family(&fam, &State::new(0.3, -0.2, 0.5, 0.1), 1e-8).unwrap();
        assert_eq!(s.label, StratumLabel::Sigma);
    }

    #[test]
    fn verdicts() {
        let p = Params::unit(9.81);
        let report = sweep(&p, &SweepSpec::random(20, 1));
        assert_eq!(report.counts.total(), 20);
        let v = bracket_generating_verdict(&report).unwrap();
        assert_eq!(v.verdict, VerdictKind::Supported);
        assert_eq!(v.basis, "sampled evidence");

        let mut bad = report.clone();
        let mut r = lie_rank(&Family::pidp(&p), &bad.rows[0].point, 2, 1e-8).unwrap();
        r.rank = 3;
        bad.sub_rank.push(SubRankPoint {
            index: 0,
            stratum: StratumLabel::Generic,
            report: r,
        });
        let v = bracket_generating_verdict(&bad).unwrap();
        assert_eq!(v.verdict, VerdictKind::NotSupported);
        assert_eq!(v.counterexamples.len(), 1);

        let empty = sweep(&p, &SweepSpec::random(0, 1));
        assert_eq!(empty.counts, StratumCounts::default());
        assert!(matches!(
            bracket_generating_verdict(&empty),
            Err(RankError::EmptyReport)
        ));
    }

    #[test]
    fn grid_points() {
        let spec = SweepSpec::new(Sampling::Grid {
            theta_points: 3,
            omega_slices: vec![[0.0, 0.0], [1.0, -1.0]],
        });
        let pts = spec.points();
        assert_eq!(pts.len(), 18);
        assert_eq!(pts[0].theta1, -std::f64::consts::PI);
        assert_eq!(pts[17].omega2, -1.0);
    }
}

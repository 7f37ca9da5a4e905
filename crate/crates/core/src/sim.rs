//! Fixed-step integration of the controlled system, flows of family members,
//! energy diagnostics and the recurrence experiment.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{energies, rhs, wrap_angle, Params, State, Vec4};
use crate::liealg::{Family, LieError, VectorField};
use crate::trig::sin_cos;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_BLOWUP_BOUND: f64 = 1e6;

#[derive(Debug, Clone, Error)]
pub enum SimError {
    #[error("invalid argument {name} = {value}")]
    InvalidArgument { name: &'static str, value: f64 },
    #[error("invalid control schedule: {0}")]
    InvalidSchedule(String),
    #[error("blow-up at t = {time}: component {index} = {value}")]
    BlowUp {
        time: f64,
        index: usize,
        value: f64,
        /// Samples computed before the bound was hit.
        partial: Option<Box<Trajectory>>,
    },
    #[error("negative time {time} at segment {position} in attainable mode")]
    NegativeTimeInAttainableMode { position: usize, time: f64 },
    #[error("energy drift needs u = 0, schedule has nonzero values")]
    ScheduleNotZero,
    #[error(transparent)]
    Field(#[from] LieError),
}

fn positive(name: &'static str, value: f64) -> Result<(), SimError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(SimError::InvalidArgument { name, value })
    }
}

/// Piecewise-constant control: `values[i]` on `[breakpoints[i], breakpoints[i + 1])`,
/// the last value from the last breakpoint on, and 0 before the first.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule")]
pub struct ControlSchedule {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<RawSchedule> for ControlSchedule {
    type Error = SimError;
    fn try_from(raw: RawSchedule) -> Result<Self, SimError> {
        ControlSchedule::new(raw.breakpoints, raw.values)
    }
}

impl ControlSchedule {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self, SimError> {
        if breakpoints.len() != values.len() {
            return Err(SimError::InvalidSchedule(format!(
                "{} breakpoints but {} values",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints.iter().chain(&values).any(|x| !x.is_finite()) {
            return Err(SimError::InvalidSchedule("non-finite entry".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SimError::InvalidSchedule(
                "breakpoints must be strictly ascending".into(),
            ));
        }
        Ok(Self {
            breakpoints,
            values,
        })
    }

    /// u ≡ 0.
    pub fn zero() -> Self {
        Self::default()
    }

    /// u ≡ value from t = 0 on.
    pub fn constant(value: f64) -> Self {
        Self {
            breakpoints: vec![0.0],
            values: vec![value],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at(&self, t: f64) -> f64 {
        match self.breakpoints.partition_point(|&b| b <= t) {
            0 => 0.0,
            i => self.values[i - 1],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    fn breakpoints_in(&self, a: f64, b: f64) -> impl Iterator<Item = f64> + '_ {
        self.breakpoints
            .iter()
            .copied()
            .filter(move |&t| t > a && t < b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorInfo {
    pub method: &'static str,
    pub dt: f64,
    pub blowup_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Angles wrapped to [−π, π).
    pub states: Vec<State>,
    /// Angles continuous in time.
    pub unwrapped: Vec<State>,
    /// u on the interval starting at each sample.
    pub controls: Vec<f64>,
    pub params: Params,
    pub schedule: ControlSchedule,
    pub integrator: IntegratorInfo,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&State> {
        self.unwrapped.last()
    }

    pub fn hamiltonians(&self) -> Vec<f64> {
        self.states
            .iter()
            .map(|z| energies(&self.params, z).hamiltonian)
            .collect()
    }

    fn push(&mut self, t: f64, y: Vec4) {
        let raw = State::from_vector(&y);
        self.times.push(t);
        self.unwrapped.push(raw);
        self.states.push(State::new(
            wrap_angle(raw.theta1),
            wrap_angle(raw.theta2),
            raw.omega1,
            raw.omega2,
        ));
        self.controls.push(self.schedule.value_at(t));
    }
}

fn rk4_step<F>(y: &Vec4, h: f64, mut field: F) -> Result<Vec4, SimError>
where
    F: FnMut(&Vec4) -> Result<Vec4, SimError>,
{
    let k1 = field(y)?;
    let k2 = field(&(y + k1 * (h / 2.0)))?;
    let k3 = field(&(y + k2 * (h / 2.0)))?;
    let k4 = field(&(y + k3 * h))?;
    Ok(y + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0))
}

fn out_of_bounds(y: &Vec4, bound: f64) -> Option<(usize, f64)> {
    y.iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite() || v.abs() > bound)
        .map(|(i, v)| (i, *v))
}

/// Step count and step size covering `span` with steps no longer than `dt`.
fn steps(span: f64, dt: f64) -> usize {
    // the slack keeps T/dt = 10000.000000000002 from adding a step
    ((span / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

pub fn integrate(
    p: &Params,
    z0: State,
    sched: &ControlSchedule,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory, SimError> {
    integrate_with_bound(p, z0, sched, t_end, dt, DEFAULT_BLOWUP_BOUND)
}

/// Classical RK4 with fixed step `dt`; a step containing a schedule
/// breakpoint is split there so u is constant on every sub-step.
pub fn integrate_with_bound(
    p: &Params,
    z0: State,
    sched: &ControlSchedule,
    t_end: f64,
    dt: f64,
    bound: f64,
) -> Result<Trajectory, SimError> {
    positive("T", t_end)?;
    positive("dt", dt)?;
    positive("bound", bound)?;
    if !z0.is_finite() {
        return Err(SimError::InvalidArgument {
            name: "z0",
            value: f64::NAN,
        });
    }
    let n = steps(t_end, dt);
    let mut traj = Trajectory {
        times: Vec::with_capacity(n + 1),
        states: Vec::with_capacity(n + 1),
        unwrapped: Vec::with_capacity(n + 1),
        controls: Vec::with_capacity(n + 1),
        params: *p,
        schedule: sched.clone(),
        integrator: IntegratorInfo {
            method: "rk4",
            dt,
            blowup_bound: bound,
        },
    };
    let mut y = z0.to_vector();
    traj.push(0.0, y);
    for k in 0..n {
        let t0 = k as f64 * dt;
        let t1 = if k + 1 == n {
            t_end
        } else {
            (k + 1) as f64 * dt
        };
        let mut a = t0;
        let cuts: Vec<f64> = sched.breakpoints_in(t0, t1).chain([t1]).collect();
        for b in cuts {
            let u = sched.value_at(a);
            y = rk4_step(&y, b - a, |v| Ok(rhs(p, &State::from_vector(v), u)))?;
            a = b;
        }
        if let Some((index, value)) = out_of_bounds(&y, bound) {
            return Err(SimError::BlowUp {
                time: t1,
                index,
                value,
                partial: Some(Box::new(traj)),
            });
        }
        traj.push(t1, y);
    }
    Ok(traj)
}

pub fn flow<X: VectorField + ?Sized>(x: &X, z0: State, t: f64, dt: f64) -> Result<State, SimError> {
    flow_with_bound(x, z0, t, dt, DEFAULT_BLOWUP_BOUND)
}

/// Integrates ż = X(z) for signed time `t`. The result is not angle-wrapped.
pub fn flow_with_bound<X: VectorField + ?Sized>(
    x: &X,
    z0: State,
    t: f64,
    dt: f64,
    bound: f64,
) -> Result<State, SimError> {
    positive("dt", dt)?;
    if !t.is_finite() {
        return Err(SimError::InvalidArgument {
            name: "t",
            value: t,
        });
    }
    if t == 0.0 {
        return Ok(z0);
    }
    let n = steps(t.abs(), dt);
    let h = t / n as f64;
    let mut y = z0.to_vector();
    for k in 0..n {
        y = rk4_step(&y, h, |v| Ok(x.eval(&State::from_vector(v))?))?;
        if let Some((index, value)) = out_of_bounds(&y, bound) {
            return Err(SimError::BlowUp {
                time: (k + 1) as f64 * h,
                index,
                value,
                partial: None,
            });
        }
    }
    Ok(State::from_vector(&y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowMode {
    /// Segment times of either sign.
    Orbit,
    /// Nonnegative segment times only.
    Attainable,
}

impl fmt::Display for FlowMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FlowMode::Orbit => "orbit",
            FlowMode::Attainable => "attainable",
        })
    }
}

/// One segment of a flow word: 1-based generator index and signed time.
pub type FlowSegment = (usize, f64);

/// `word` rendered as `2:+0.5;1:-0.25`.
pub fn format_flow_word(word: &[FlowSegment]) -> String {
    word.iter()
        .map(|(i, t)| format!("{i}:{t:+e}"))
        .collect::<Vec<_>>()
        .join(";")
}

/// Applies the flows in `word` left to right, starting from `z0`.
pub fn compose_flows_in(
    family: &Family,
    z0: State,
    word: &[FlowSegment],
    dt: f64,
    mode: FlowMode,
) -> Result<State, SimError> {
    if mode == FlowMode::Attainable {
        if let Some((position, &(_, time))) = word.iter().enumerate().find(|(_, (_, t))| *t < 0.0) {
            return Err(SimError::NegativeTimeInAttainableMode { position, time });
        }
    }
    for &(i, _) in word {
        family.get(i)?;
    }
    word.iter()
        .try_fold(z0, |z, &(i, t)| flow(family.get(i)?.as_ref(), z, t, dt))
}

/// [`compose_flows_in`] over the family {X1, X2, X3, X4} of `p`.
pub fn compose_flows(
    p: &Params,
    z0: State,
    word: &[FlowSegment],
    dt: f64,
    mode: FlowMode,
) -> Result<State, SimError> {
    compose_flows_in(&Family::pidp(p), z0, word, dt, mode)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudSpec {
    pub n: usize,
    pub mode: FlowMode,
    pub seed: u64,
    /// Upper bound on the total |time| of a word.
    pub time_budget: f64,
    pub max_segments: usize,
    pub dt: f64,
}

impl CloudSpec {
    pub fn new(n: usize, mode: FlowMode, seed: u64, time_budget: f64) -> Self {
        Self {
            n,
            mode,
            seed,
            time_budget,
            max_segments: 4,
            dt: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CloudPoint {
    pub index: usize,
    pub word: Vec<FlowSegment>,
    /// Endpoint with wrapped angles.
    pub endpoint: State,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CloudDefect {
    pub index: usize,
    pub word: Vec<FlowSegment>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cloud {
    pub spec: CloudSpec,
    pub start: State,
    pub points: Vec<CloudPoint>,
    pub defects: Vec<CloudDefect>,
}

impl Cloud {
    pub fn endpoints(&self) -> Vec<State> {
        self.points.iter().map(|c| c.endpoint).collect()
    }
}

/// Words with 1..=max_segments segments, uniform generators and
/// exponentially distributed times capped so the total stays within budget.
fn random_words(spec: &CloudSpec) -> Vec<Vec<FlowSegment>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.n)
        .map(|_| {
            let k = rng.gen_range(1..=spec.max_segments);
            let cap = spec.time_budget / k as f64;
            (0..k)
                .map(|_| {
                    let i = rng.gen_range(1..=4usize);
                    let e: f64 = -(1.0 - rng.gen::<f64>()).ln();
                    let mut t = (e * cap / 2.0).min(cap);
                    if spec.mode == FlowMode::Orbit && rng.gen_bool(0.5) {
                        t = -t;
                    }
                    (i, t)
                })
                .collect()
        })
        .collect()
}

pub fn cloud_sample(p: &Params, z0: State, spec: &CloudSpec) -> Result<Cloud, SimError> {
    if spec.n == 0 {
        return Err(SimError::InvalidArgument {
            name: "n",
            value: 0.0,
        });
    }
    if spec.max_segments == 0 {
        return Err(SimError::InvalidArgument {
            name: "max_segments",
            value: 0.0,
        });
    }
    if !(spec.time_budget >= 0.0 && spec.time_budget.is_finite()) {
        return Err(SimError::InvalidArgument {
            name: "time_budget",
            value: spec.time_budget,
        });
    }
    positive("dt", spec.dt)?;
    let family = Family::pidp(p);
    let words = random_words(spec);
    let results: Vec<_> = words
        .into_par_iter()
        .enumerate()
        .map(|(index, word)| {
            let r = compose_flows_in(&family, z0, &word, spec.dt, spec.mode);
            (index, word, r)
        })
        .collect();
    let mut points = Vec::new();
    let mut defects = Vec::new();
    for (index, word, r) in results {
        match r {
            Ok(z) => points.push(CloudPoint {
                index,
                word,
                endpoint: State::new(
                    wrap_angle(z.theta1),
                    wrap_angle(z.theta2),
                    z.omega1,
                    z.omega2,
                ),
            }),
            Err(e) => defects.push(CloudDefect {
                index,
                word,
                error: e.to_string(),
            }),
        }
    }
    Ok(Cloud {
        spec: *spec,
        start: z0,
        points,
        defects,
    })
}

/// (sin θ1, cos θ1, sin θ2, cos θ2, ω1, ω2).
pub fn embed(z: &State) -> [f64; 6] {
    let (s1, c1) = sin_cos(z.theta1);
    let (s2, c2) = sin_cos(z.theta2);
    [s1, c1, s2, c2, z.omega1, z.omega2]
}

/// Euclidean distance between [`embed`]dings.
pub fn embedded_distance(a: &State, b: &State) -> f64 {
    let (ea, eb) = (embed(a), embed(b));
    ea.iter()
        .zip(&eb)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Nearest-neighbour distances between two point sets under [`embedded_distance`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CloudComparison {
    pub mean_a_to_b: f64,
    pub mean_b_to_a: f64,
    /// Average of the two directed means.
    pub symmetric_mean: f64,
    pub hausdorff: f64,
}

pub fn compare_clouds(a: &[State], b: &[State]) -> Option<CloudComparison> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let directed = |from: &[State], to: &[State]| -> (f64, f64) {
        let d: Vec<f64> = from
            .iter()
            .map(|x| {
                to.iter()
                    .map(|y| embedded_distance(x, y))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        (mean, d.iter().copied().fold(0.0, f64::max))
    };
    let (ab, ab_max) = directed(a, b);
    let (ba, ba_max) = directed(b, a);
    Some(CloudComparison {
        mean_a_to_b: ab,
        mean_b_to_a: ba,
        symmetric_mean: 0.5 * (ab + ba),
        hausdorff: ab_max.max(ba_max),
    })
}

/// max |H(z_t) − H(z_0)| / max(|H(z_0)|, 1) along an uncontrolled trajectory.
pub fn energy_drift(traj: &Trajectory) -> Result<f64, SimError> {
    if !traj.schedule.is_zero() {
        return Err(SimError::ScheduleNotZero);
    }
    let h = traj.hamiltonians();
    let Some(&h0) = h.first() else {
        return Ok(0.0);
    };
    let worst = h.iter().map(|x| (x - h0).abs()).fold(0.0, f64::max);
    Ok(worst / h0.abs().max(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecurrenceStatus {
    /// z0 is a fixed point; first return time is 0 by convention.
    Stationary,
    /// The trajectory stayed inside the ball for the whole horizon.
    NeverDeparted,
    Returned,
    NoReturn,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecurrenceReport {
    pub start: State,
    pub epsilon: f64,
    pub metric: &'static str,
    pub status: RecurrenceStatus,
    pub departure_time: Option<f64>,
    pub first_return_time: Option<f64>,
    pub distance_at_return: Option<f64>,
    pub min_distance_after_departure: Option<f64>,
    pub horizon: f64,
    pub dt: f64,
}

pub const RECURRENCE_METRIC: &str = "euclidean on (sin θ1, cos θ1, sin θ2, cos θ2, ω1, ω2)";

/// First re-entry of the uncontrolled trajectory into the `eps`-ball around
/// z0 after it has left the ball, checked at every step.
pub fn recurrence_experiment(
    p: &Params,
    z0: State,
    eps: f64,
    horizon: f64,
    dt: f64,
) -> Result<RecurrenceReport, SimError> {
    positive("eps", eps)?;
    let traj = integrate(p, z0, &ControlSchedule::zero(), horizon, dt)?;
    let dist: Vec<f64> = traj
        .states
        .iter()
        .map(|z| embedded_distance(&z0, z))
        .collect();
    let mut report = RecurrenceReport {
        start: z0,
        epsilon: eps,
        metric: RECURRENCE_METRIC,
        status: RecurrenceStatus::NoReturn,
        departure_time: None,
        first_return_time: None,
        distance_at_return: None,
        min_distance_after_departure: None,
        horizon,
        dt,
    };
    let Some(depart) = dist.iter().position(|&d| d > eps) else {
        if dist.iter().all(|&d| d == 0.0) {
            report.status = RecurrenceStatus::Stationary;
            report.first_return_time = Some(0.0);
        } else {
            report.status = RecurrenceStatus::NeverDeparted;
        }
        return Ok(report);
    };
    report.departure_time = Some(traj.times[depart]);
    report.min_distance_after_departure =
        Some(dist[depart..].iter().copied().fold(f64::INFINITY, f64::min));
    if let Some(k) = (depart..dist.len()).find(|&k| dist[k] <= eps) {
        report.status = RecurrenceStatus::Returned;
        report.first_return_time = Some(traj.times[k]);
        report.distance_at_return = Some(dist[k]);
    }
    Ok(report)
}

/// Independent recurrence experiments, run in parallel; output order follows `starts`.
pub fn recurrence_batch(
    p: &Params,
    starts: &[State],
    eps: f64,
    horizon: f64,
    dt: f64,
) -> Vec<Result<RecurrenceReport, SimError>> {
    starts
        .par_iter()
        .map(|z| recurrence_experiment(p, *z, eps, horizon, dt))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liealg::{ConstantField, FieldKind, PidpField};
    use std::f64::consts::PI;

    #[test]
    fn schedule_lookup() {
        let s = ControlSchedule::new(vec![1.0, 2.0], vec![3.0, -1.0]).unwrap();
        assert_eq!(s.value_at(0.5), 0.0);
        assert_eq!(s.value_at(1.0), 3.0);
        assert_eq!(s.value_at(1.999), 3.0);
        assert_eq!(s.value_at(2.0), -1.0);
        assert_eq!(s.value_at(50.0), -1.0);
        assert!(ControlSchedule::new(vec![1.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(ControlSchedule::new(vec![1.0], vec![]).is_err());
        assert!(ControlSchedule::zero().is_zero());
        let parsed: ControlSchedule =
            serde_json::from_str(r#"{"breakpoints":[0,1],"values":[1,2]}"#).unwrap();
        assert_eq!(parsed.value_at(1.5), 2.0);
        assert!(
            serde_json::from_str::<ControlSchedule>(r#"{"breakpoints":[1,0],"values":[1,2]}"#)
                .is_err()
        );
    }

    #[test]
    fn equilibria_are_constant() {
        let p = Params::unit(10.0);
        for z0 in [State::new(PI, PI, 0.0, 0.0), State::new(0.0, 0.0, 0.0, 0.0)] {
            let tr = integrate(&p, z0, &ControlSchedule::zero(), 1.0, 1e-3).unwrap();
            assert_eq!(tr.len(), 1001);
            assert!(tr.unwrapped.iter().all(|z| *z == z0));
            assert_eq!(energy_drift(&tr).unwrap(), 0.0);
        }
    }

    #[test]
    fn sample_times_end_at_horizon() {
        let p = Params::unit(10.0);
        let tr = integrate(
            &p,
            State::new(3.0, 3.0, 0.0, 0.0),
            &ControlSchedule::zero(),
            0.0105,
            1e-3,
        )
        .unwrap();
        assert_eq!(tr.len(), 12);
        assert_eq!(*tr.times.last().unwrap(), 0.0105);
        assert!(tr.times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn breakpoint_inside_step_is_respected() {
        // with u switched on at 0.0005, one step of 1e-3 must equal two half steps
        let p = Params::unit(10.0);
        let z0 = State::new(0.2, -0.1, 0.0, 0.0);
        let sched = ControlSchedule::new(vec![0.0005], vec![4.0]).unwrap();
        let a = integrate(&p, z0, &sched, 1e-3, 1e-3).unwrap();
        let b = integrate(&p, z0, &sched, 1e-3, 5e-4).unwrap();
        let d = (a.last().unwrap().to_vector() - b.last().unwrap().to_vector()).amax();
        assert!(d < 1e-15, "{d}");
    }

    #[test]
    fn blowup_keeps_partial() {
        let p = Params::unit(10.0);
        let err = integrate_with_bound(
            &p,
            State::new(0.1, 0.0, 0.0, 0.0),
            &ControlSchedule::constant(1e3),
            10.0,
            1e-3,
            50.0,
        )
        .unwrap_err();
        match err {
            SimError::BlowUp { partial, index, .. } => {
                assert!(index >= 2);
                assert!(partial.unwrap().len() > 1);
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn flow_identities() {
        let c = ConstantField::new(Vec4::new(1.0, -2.0, 0.5, 3.0));
        let z0 = State::new(0.1, 0.2, 0.3, 0.4);
        assert_eq!(flow(&c, z0, 0.0, 1e-3).unwrap(), z0);
        let z = flow(&c, z0, 0.7, 1e-3).unwrap();
        let expect = z0.to_vector() + Vec4::new(1.0, -2.0, 0.5, 3.0) * 0.7;
        assert!((z.to_vector() - expect).amax() < 1e-13);

        let x1 = PidpField::new(Params::unit(9.81), FieldKind::ScaledDrift);
        let there = flow(&x1, z0, 0.8, 1e-3).unwrap();
        let back = flow(&x1, there, -0.8, 1e-3).unwrap();
        assert!((back.to_vector() - z0.to_vector()).amax() < 1e-6);
    }

    #[test]
    fn compose_contracts() {
        let p = Params::unit(9.81);
        let z0 = State::new(0.4, -0.3, 0.2, 0.1);
        assert_eq!(
            compose_flows(&p, z0, &[], 1e-3, FlowMode::Orbit).unwrap(),
            z0
        );
        let z = compose_flows(&p, z0, &[(1, 0.3), (1, -0.3)], 1e-3, FlowMode::Orbit).unwrap();
        assert!((z.to_vector() - z0.to_vector()).amax() < 1e-6);
        assert!(matches!(
            compose_flows(&p, z0, &[(1, 0.1), (2, -0.5)], 1e-3, FlowMode::Attainable),
            Err(SimError::NegativeTimeInAttainableMode { position: 1, .. })
        ));
        assert!(matches!(
            compose_flows(&p, z0, &[(5, 0.1)], 1e-3, FlowMode::Orbit),
            Err(SimError::Field(LieError::UnknownGenerator { .. }))
        ));
    }

    #[test]
    fn cloud_zero_budget_and_determinism() {
        let p = Params::unit(9.81);
        let z0 = State::new(0.4, -0.3, 0.2, 0.1);
        let c = cloud_sample(&p, z0, &CloudSpec::new(1, FlowMode::Orbit, 3, 0.0)).unwrap();
        assert_eq!(c.points[0].endpoint, z0);
        let spec = CloudSpec::new(6, FlowMode::Attainable, 11, 0.3);
        let a = cloud_sample(&p, z0, &spec).unwrap();
        let b = cloud_sample(&p, z0, &spec).unwrap();
        assert_eq!(a, b);
        assert!(a.points.iter().all(|pt| pt.word.iter().all(|s| s.1 >= 0.0)));
        assert!(a
            .points
            .iter()
            .all(|pt| pt.word.iter().map(|s| s.1.abs()).sum::<f64>() <= 0.3 + 1e-12));
        assert!(cloud_sample(&p, z0, &CloudSpec::new(0, FlowMode::Orbit, 1, 0.1)).is_err());
    }

    #[test]
    fn cloud_comparison_of_identical_sets_is_zero() {
        let pts = vec![
            State::new(0.1, 0.2, 0.3, 0.4),
            State::new(-1.0, 2.0, 0.0, 1.0),
        ];
        let c = compare_clouds(&pts, &pts).unwrap();
        assert_eq!(c.symmetric_mean, 0.0);
        assert_eq!(c.hausdorff, 0.0);
        assert!(compare_clouds(&pts, &[]).is_none());
    }

    #[test]
    fn energy_drift_needs_zero_control() {
        let p = Params::unit(10.0);
        let tr = integrate(
            &p,
            State::new(3.0, 3.0, 0.0, 0.0),
            &ControlSchedule::constant(1.0),
            0.1,
            1e-3,
        )
        .unwrap();
        assert!(matches!(energy_drift(&tr), Err(SimError::ScheduleNotZero)));
    }

    #[test]
    fn recurrence_flags() {
        let p = Params::unit(10.0);
        let r = recurrence_experiment(&p, State::new(PI, PI, 0.0, 0.0), 0.01, 1.0, 1e-3).unwrap();
        assert_eq!(r.status, RecurrenceStatus::Stationary);
        assert_eq!(r.first_return_time, Some(0.0));
        let r = recurrence_experiment(&p, State::new(PI - 0.01, PI, 0.0, 0.0), 10.0, 1.0, 1e-3)
            .unwrap();
        assert_eq!(r.status, RecurrenceStatus::NeverDeparted);
        assert_eq!(r.first_return_time, None);
        assert!(recurrence_experiment(&p, State::new(PI, PI, 0.0, 0.0), 0.0, 1.0, 1e-3).is_err());
    }

    #[test]
    fn flow_word_format() {
        assert_eq!(
            format_flow_word(&[(2, 0.5), (1, -0.25)]),
            "2:+5e-1;1:-2.5e-1"
        );
    }
}

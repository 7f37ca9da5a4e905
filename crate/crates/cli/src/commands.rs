use std::fmt;
use std::path::PathBuf;

use anyhow::{anyhow, Result};
use pidp_core::dynamics::{
    admissibility_checks, check_positive, control_h, delta, drift_f, energies, ParamError, Params,
    State, Vec4,
};
use pidp_core::liealg::{closed_form_check, notation_components, Family};
use pidp_core::rank::{
    bracket_generating_verdict, sweep, RankError, Sampling, SweepSpec, VerdictKind,
};
use pidp_core::sim::{
    cloud_sample, compare_clouds, energy_drift, format_flow_word, integrate_with_bound,
    recurrence_experiment, Cloud, CloudSpec, FlowMode, SimError, Trajectory,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{RunConfig, SamplingKind};
use crate::output::{canonical_json, csv_bytes, fmt_float, write_atomic};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_INADMISSIBLE: u8 = 2;
pub const EXIT_NOT_SUPPORTED: u8 = 3;
pub const EXIT_BLOWUP: u8 = 4;

/// An error that carries the process exit code.
#[derive(Debug)]
pub struct ExitError {
    pub code: u8,
    pub message: String,
}

impl ExitError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for ExitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for ExitError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    CheckParams,
    Fields,
    RankMap,
    Simulate,
    Recur,
    Cloud,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CheckParams => "check-params",
            Command::Fields => "fields",
            Command::RankMap => "rank-map",
            Command::Simulate => "simulate",
            Command::Recur => "recur",
            Command::Cloud => "cloud",
        }
    }

    fn seeded(self) -> bool {
        matches!(self, Command::RankMap | Command::Cloud)
    }
}

/// Everything a command needs besides its own config block.
pub struct Run {
    pub command: Command,
    pub config: RunConfig,
    pub resolved: Value,
    pub force_inadmissible: bool,
}

/// Paths written by a command plus its exit code.
pub struct Outcome {
    pub code: u8,
    pub files: Vec<PathBuf>,
    /// Extra line for standard output.
    pub message: Option<String>,
}

struct Admissibility {
    record: Value,
    positivity: Result<(), ParamError>,
    violated: Option<ParamError>,
}

fn admissibility(p: &Params, tol: f64, forced: bool) -> Admissibility {
    let positivity = check_positive(p);
    let checks = admissibility_checks(p, tol);
    let violated = checks
        .iter()
        .find(|c| c.violated)
        .map(|c| ParamError::AdmissibilityViolation {
            condition: c.condition,
            lhs: c.lhs,
            rhs: c.rhs.unwrap_or(f64::NAN),
        });
    let admissible = positivity.is_ok() && violated.is_none();
    let record = json!({
        "admissible": admissible,
        "forced": forced && !admissible,
        "tolerance": tol,
        "positivity_error": positivity.as_ref().err().map(|e| e.to_string()),
        "checks": checks,
    });
    Admissibility {
        record,
        positivity,
        violated,
    }
}

impl Run {
    fn params(&self) -> &Params {
        &self.config.params
    }

    fn envelope(&self, adm: &Admissibility, result: Value) -> Value {
        json!({
            "tool": "pidp",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command.name(),
            "config": self.resolved,
            "seed": self.command.seeded().then_some(self.config.seed),
            "admissibility": adm.record,
            "result": result,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.config.output.dir.join(name)
    }

    fn write_json(&self, name: &str, v: &Value, files: &mut Vec<PathBuf>) -> Result<()> {
        let path = self.path(name);
        write_atomic(
            &path,
            canonical_json(v, self.config.output.pretty).as_bytes(),
        )?;
        files.push(path);
        Ok(())
    }

    fn write_csv(&self, name: &str, bytes: Vec<u8>, files: &mut Vec<PathBuf>) -> Result<()> {
        let path = self.path(name);
        write_atomic(&path, &bytes)?;
        files.push(path);
        Ok(())
    }

    /// Refuses inadmissible parameters unless forced; non-positive ones always.
    fn gate(&self) -> Result<Admissibility> {
        let adm = admissibility(
            self.params(),
            self.config.admissibility_tol,
            self.force_inadmissible,
        );
        if let Err(e) = &adm.positivity {
            return Err(ExitError::new(EXIT_INADMISSIBLE, e.to_string()).into());
        }
        if let Some(e) = &adm.violated {
            if !self.force_inadmissible {
                return Err(ExitError::new(
                    EXIT_INADMISSIBLE,
                    format!("{e}; rerun with --force-inadmissible to proceed"),
                )
                .into());
            }
        }
        Ok(adm)
    }

    pub fn execute(&self) -> Result<Outcome> {
        match self.command {
            Command::CheckParams => self.check_params(),
            Command::Fields => self.fields(),
            Command::RankMap => self.rank_map(),
            Command::Simulate => self.simulate(),
            Command::Recur => self.recur(),
            Command::Cloud => self.cloud(),
        }
    }

    fn check_params(&self) -> Result<Outcome> {
        let adm = admissibility(self.params(), self.config.admissibility_tol, false);
        let (verdict, code, violation) = match (&adm.positivity, &adm.violated) {
            (Err(e), _) => ("inadmissible", EXIT_INADMISSIBLE, Some(violation_record(e))),
            (Ok(()), Some(e)) => ("inadmissible", EXIT_INADMISSIBLE, Some(violation_record(e))),
            (Ok(()), None) => ("admissible", EXIT_OK, None),
        };
        let result = json!({ "verdict": verdict, "violation": violation });
        let mut files = Vec::new();
        self.write_json(
            "check_params.json",
            &self.envelope(&adm, result),
            &mut files,
        )?;
        Ok(Outcome {
            code,
            files,
            message: Some(verdict.to_string()),
        })
    }

    fn fields(&self) -> Result<Outcome> {
        let adm = self.gate()?;
        let z = self
            .config
            .state
            .ok_or_else(|| ExitError::new(EXIT_CONFIG, "fields needs a `state` entry"))?;
        let p = self.params();
        let x = Family::pidp(p).values(&z)?;
        let result = json!({
            "state": z,
            "f": arr(drift_f(p, &z)),
            "h": arr(control_h(p, &z)),
            "delta": delta(p, z.theta1, z.theta2),
            "X1": arr(x[0]),
            "X2": arr(x[1]),
            "X3": arr(x[2]),
            "X4": arr(x[3]),
            "energies": energies(p, &z),
            "notation": notation_components(p, &z),
            "closed_form": closed_form_check(p, &z)?,
        });
        let mut files = Vec::new();
        self.write_json("fields.json", &self.envelope(&adm, result), &mut files)?;
        Ok(Outcome {
            code: EXIT_OK,
            files,
            message: None,
        })
    }

    fn rank_map(&self) -> Result<Outcome> {
        let adm = self.gate()?;
        let c = &self.config.sweep;
        let sampling = match c.sampling {
            SamplingKind::Random => Sampling::Random {
                n: c.samples,
                seed: self.config.seed,
                omega_range: c.omega_range,
            },
            SamplingKind::Grid => Sampling::Grid {
                theta_points: c.theta_points,
                omega_slices: c.omega_slices.clone(),
            },
        };
        let spec = SweepSpec {
            sampling,
            rank_tol: c.rank_tol,
            stratum_tol: c.stratum_tol,
            generic_depth: c.generic_depth,
            strata_depth: c.strata_depth,
        };
        let report = sweep(self.params(), &spec);
        let verdict = match bracket_generating_verdict(&report) {
            Ok(v) => v,
            Err(RankError::EmptyReport) => {
                return Err(
                    ExitError::new(EXIT_CONFIG, "EmptyReport: the sweep has no samples").into(),
                )
            }
            Err(e) => return Err(e.into()),
        };
        let mut files = Vec::new();
        let rows = report.rows.iter().map(|r| {
            let z = r.point;
            vec![
                fmt_float(z.theta1),
                fmt_float(z.theta2),
                fmt_float(z.omega1),
                fmt_float(z.omega2),
                r.stratum.to_string(),
                r.rank.to_string(),
                fmt_float(r.gamma_det),
                fmt_float(r.upsilon_det),
                fmt_float(r.hamiltonian),
            ]
        });
        let header = [
            "theta1",
            "theta2",
            "omega1",
            "omega2",
            "stratum",
            "rank",
            "gamma_det",
            "upsilon_det",
            "H",
        ];
        self.write_csv("rank_map.csv", csv_bytes(&header, rows)?, &mut files)?;
        let result = json!({ "sweep": report, "verdict": verdict });
        self.write_json("rank_map.json", &self.envelope(&adm, result), &mut files)?;
        let (word, code) = match verdict.verdict {
            VerdictKind::Supported => ("SUPPORTED", EXIT_OK),
            VerdictKind::NotSupported => ("NOT_SUPPORTED", EXIT_NOT_SUPPORTED),
        };
        Ok(Outcome {
            code,
            files,
            message: Some(format!(
                "{word} ({}): {}/{} points at rank 4, {} counterexamples, {} defects",
                verdict.basis,
                report.rank4,
                report.total,
                verdict.counterexamples.len(),
                verdict.defects.len()
            )),
        })
    }

    fn simulate(&self) -> Result<Outcome> {
        let adm = self.gate()?;
        let c = &self.config.simulate;
        let mut files = Vec::new();
        let (traj, blowup) = match integrate_with_bound(
            self.params(),
            c.z0,
            &c.schedule,
            c.t_end,
            c.dt,
            c.blowup_bound,
        ) {
            Ok(t) => (t, None),
            Err(SimError::BlowUp {
                time,
                index,
                value,
                partial: Some(partial),
            }) => (
                *partial,
                Some(json!({ "time": time, "component": index, "value": value })),
            ),
            Err(e @ SimError::BlowUp { .. }) => {
                return Err(ExitError::new(EXIT_BLOWUP, e.to_string()).into())
            }
            Err(e) => return Err(ExitError::new(EXIT_CONFIG, e.to_string()).into()),
        };
        self.write_csv("trajectory.csv", trajectory_csv(&traj)?, &mut files)?;
        let drift = match energy_drift(&traj) {
            Ok(d) => json!({ "value": d }),
            Err(e) => json!({ "value": null, "reason": e.to_string() }),
        };
        let result = json!({
            "samples": traj.len(),
            "final_time": traj.times.last(),
            "final_state": traj.states.last(),
            "energy_drift": drift,
            "integrator": traj.integrator,
            "partial": blowup.is_some(),
            "blowup": blowup,
        });
        self.write_json("simulate.json", &self.envelope(&adm, result), &mut files)?;
        Ok(Outcome {
            code: if blowup.is_some() {
                EXIT_BLOWUP
            } else {
                EXIT_OK
            },
            files,
            message: blowup.map(|_| "blow-up: partial trajectory written".to_string()),
        })
    }

    fn recur(&self) -> Result<Outcome> {
        let adm = self.gate()?;
        let c = &self.config.recur;
        let report = match recurrence_experiment(self.params(), c.z0, c.eps, c.horizon, c.dt) {
            Ok(r) => r,
            Err(e @ SimError::BlowUp { .. }) => {
                return Err(ExitError::new(EXIT_BLOWUP, e.to_string()).into())
            }
            Err(e) => return Err(ExitError::new(EXIT_CONFIG, e.to_string()).into()),
        };
        let mut files = Vec::new();
        self.write_json(
            "recurrence.json",
            &self.envelope(&adm, to_value(&report)?),
            &mut files,
        )?;
        Ok(Outcome {
            code: EXIT_OK,
            files,
            message: None,
        })
    }

    fn cloud(&self) -> Result<Outcome> {
        let adm = self.gate()?;
        let c = &self.config.cloud;
        let spec = |mode| CloudSpec {
            n: c.n,
            mode,
            seed: self.config.seed,
            time_budget: c.time_budget,
            max_segments: c.max_segments,
            dt: c.dt,
        };
        let run = |mode| {
            cloud_sample(self.params(), c.z0, &spec(mode))
                .map_err(|e| anyhow!(ExitError::new(EXIT_CONFIG, e.to_string())))
        };
        let orbit = run(FlowMode::Orbit)?;
        let attainable = run(FlowMode::Attainable)?;
        let mut files = Vec::new();
        let rows = cloud_rows(&orbit).chain(cloud_rows(&attainable));
        let header = [
            "mode", "index", "theta1", "theta2", "omega1", "omega2", "word",
        ];
        self.write_csv("cloud.csv", csv_bytes(&header, rows)?, &mut files)?;
        let comparison = compare_clouds(&orbit.endpoints(), &attainable.endpoints());
        let summary = |cl: &Cloud| json!({ "points": cl.points.len(), "defects": cl.defects });
        let result = json!({
            "orbit": summary(&orbit),
            "attainable": summary(&attainable),
            "comparison": comparison,
            "comparison_metric": "nearest-neighbour distances in the (sin θ1, cos θ1, sin θ2, cos θ2, ω1, ω2) embedding",
        });
        self.write_json("cloud.json", &self.envelope(&adm, result), &mut files)?;
        Ok(Outcome {
            code: EXIT_OK,
            files,
            message: None,
        })
    }
}

fn violation_record(e: &ParamError) -> Value {
    match e {
        ParamError::AdmissibilityViolation {
            condition,
            lhs,
            rhs,
        } => json!({ "condition": condition, "lhs": lhs, "rhs": rhs, "message": e.to_string() }),
        ParamError::NonPositiveParameter { name, value } => {
            json!({ "parameter": name, "value": value, "message": e.to_string() })
        }
    }
}

fn arr(v: Vec4) -> [f64; 4] {
    [v[0], v[1], v[2], v[3]]
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn trajectory_csv(traj: &Trajectory) -> Result<Vec<u8>> {
    let h = traj.hamiltonians();
    let rows = traj.times.iter().enumerate().map(|(k, t)| {
        let z: &State = &traj.states[k];
        vec![
            fmt_float(*t),
            fmt_float(z.theta1),
            fmt_float(z.theta2),
            fmt_float(z.omega1),
            fmt_float(z.omega2),
            fmt_float(h[k]),
            fmt_float(traj.controls[k]),
        ]
    });
    csv_bytes(
        &["t", "theta1", "theta2", "omega1", "omega2", "H", "u"],
        rows,
    )
}

fn cloud_rows(cloud: &Cloud) -> impl Iterator<Item = Vec<String>> + '_ {
    cloud.points.iter().map(move |pt| {
        let z = pt.endpoint;
        vec![
            cloud.spec.mode.to_string(),
            pt.index.to_string(),
            fmt_float(z.theta1),
            fmt_float(z.theta2),
            fmt_float(z.omega1),
            fmt_float(z.omega2),
            format_flow_word(&pt.word),
        ]
    })
}

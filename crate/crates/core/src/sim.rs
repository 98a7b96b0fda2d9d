//! Closed-loop simulation: scenarios, the fixed-step runner, traces,
//! metrics, parameter sweeps and the named presets.
//!
//! The controller runs at period `h_s`; the plant is integrated with
//! `h_s / dt_sub_s` semi-implicit Euler substeps under a zero-order hold.
//! Desired forces are Cartesian and are mapped to joint torques through
//! `J(q)ᵀ` at every sample, like the measured contact force.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::admittance::{
    admittance_step, baseline_naive_step, inner_loop_term, AdmittanceGains, AdmittanceState, ConstantModel,
    ExactModel, K1Gain, Measurement, ModelEstimate, ModelSample, PdGains, StepDiagnostics, UsDiscretization,
};
use crate::msta::MstaGains;
use crate::plant::{
    contact_wrench, integrate_substep, joint_contact_torque, Disturbance, EnvironmentModel, LinearMotorParams,
    Manipulator, NoDisturbance, OneDofParams, PlantSpec, PlantState, SineDisturbance, TwoLinkParams,
};
use crate::setvalued::project_box;
use crate::{Error, JointMatrix, JointVector, Result};

/// Window used for all steady-state metrics.
pub const STEADY_WINDOW_S: f64 = 1.0;
/// Minimum continuous contact before a loss of contact counts as a rebound.
pub const REBOUND_MIN_CONTACT_S: f64 = 0.2;
/// Relative force band and dwell time of the settling criterion.
pub const SETTLE_BAND: f64 = 0.05;
pub const SETTLE_DWELL_S: f64 = 0.5;

/// Stand-ins for the stiff, medium and soft contact materials of the
/// linear-motor runs, stiffest first.
pub const LINMOTOR_STIFFNESS_N_PER_M: [f64; 3] = [5e3, 2e3, 5e2];

pub const PRESET_NAMES: [&str; 4] = ["fig3_one_dof", "fig5_two_dof", "linmotor_steps", "msta_bench"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    /// Set-valued admittance controller.
    Proposed,
    /// Proxy + PD + hard clamp.
    NaiveBaseline,
    /// Super-twisting regulation of `s = q̇ + Λ q` to zero with
    /// `τ = M̂(-Λ q̇ - u_s) + Ĉ q̇ + Ĝ`; no proxy, no contact.
    SlidingBench,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdSpec {
    pub kp_diag: Vec<f64>,
    pub kd_diag: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSpec {
    pub kind: ControllerKind,
    pub mx_diag: Vec<f64>,
    pub bx_diag: Vec<f64>,
    pub lambda_per_s: f64,
    pub k1: K1Gain,
    pub msta: MstaGains,
    /// Defaults to the scalar implicit STA on one joint, explicit MSTA otherwise.
    #[serde(default)]
    pub us: Option<UsDiscretization>,
    /// Baseline PD gains; defaults to `K_p = k1 Λ`, `K_d = k1 + M̂ Λ`.
    #[serde(default)]
    pub pd: Option<PdSpec>,
}

impl ControllerSpec {
    pub fn gains(&self, plant: &dyn Manipulator, h: f64) -> Result<AdmittanceGains> {
        let n = plant.dof();
        for d in [&self.mx_diag, &self.bx_diag] {
            if d.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: d.len() });
            }
        }
        AdmittanceGains::new(
            diag(&self.mx_diag),
            diag(&self.bx_diag),
            self.lambda_per_s,
            self.k1,
            self.msta,
            plant.torque_limits().clone(),
            h,
            self.us.unwrap_or(UsDiscretization::default_for(n)),
        )
    }
}

fn diag(d: &[f64]) -> JointMatrix {
    JointMatrix::from_diagonal(&JointVector::from_column_slice(d))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelEstimateSpec {
    /// Constant diagonal `M̂`, `Ĉ` and constant `Ĝ` (zero when omitted).
    Constant {
        m_diag: Vec<f64>,
        c_diag: Vec<f64>,
        #[serde(default)]
        g: Option<Vec<f64>>,
    },
    /// The true plant model.
    Exact,
}

impl ModelEstimateSpec {
    /// The constant model, or `None` for the exact one.
    fn constant(&self, dof: usize) -> Result<Option<ConstantModel>> {
        let ModelEstimateSpec::Constant { m_diag, c_diag, g } = self else {
            return Ok(None);
        };
        let mut model = ConstantModel::diagonal(m_diag, c_diag)?;
        if m_diag.len() != dof {
            return Err(Error::DimensionMismatch {
                expected: dof,
                got: m_diag.len(),
            });
        }
        if let Some(g) = g {
            if g.len() != m_diag.len() {
                return Err(Error::DimensionMismatch {
                    expected: m_diag.len(),
                    got: g.len(),
                });
            }
            model.g = JointVector::from_column_slice(g);
        }
        Ok(Some(model))
    }

    fn build<'a>(&self, plant: &'a dyn Manipulator) -> Result<Box<dyn ModelEstimate + 'a>> {
        Ok(match self.constant(plant.dof())? {
            Some(m) => Box::new(m),
            None => Box::new(ExactModel(plant)),
        })
    }
}

/// A model estimate that owns the plant it may delegate to.
enum OwnedModel {
    Constant(ConstantModel),
    Exact(Box<dyn Manipulator>),
}

impl ModelEstimate for OwnedModel {
    fn mass(&self, q: &JointVector) -> JointMatrix {
        match self {
            OwnedModel::Constant(m) => m.mass(q),
            OwnedModel::Exact(p) => p.mass(q),
        }
    }

    fn coriolis(&self, q: &JointVector, qd: &JointVector) -> JointMatrix {
        match self {
            OwnedModel::Constant(m) => m.coriolis(q, qd),
            OwnedModel::Exact(p) => p.coriolis(q, qd),
        }
    }

    fn gravity(&self, q: &JointVector) -> JointVector {
        match self {
            OwnedModel::Constant(m) => m.gravity(q),
            OwnedModel::Exact(p) => p.gravity(q),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisturbanceSpec {
    None,
    /// `amplitude sin(ω t + φ)` along `direction`.
    Sine {
        amplitude: f64,
        omega_rad_per_s: f64,
        #[serde(default)]
        phase_rad: f64,
        direction: Vec<f64>,
    },
    /// Sum of `terms` sinusoids with seeded random frequencies in
    /// `[0, max_omega_rad_per_s]` and phases; `|f_e| <= amplitude`.
    RandomSines {
        amplitude: f64,
        max_omega_rad_per_s: f64,
        terms: usize,
        direction: Vec<f64>,
    },
}

impl DisturbanceSpec {
    fn build(&self, dof: usize, seed: u64) -> Result<Box<dyn Disturbance>> {
        let dir = |d: &Vec<f64>| -> Result<JointVector> {
            if d.len() != dof {
                return Err(Error::DimensionMismatch { expected: dof, got: d.len() });
            }
            Ok(JointVector::from_column_slice(d))
        };
        Ok(match self {
            DisturbanceSpec::None => Box::new(NoDisturbance),
            DisturbanceSpec::Sine {
                amplitude,
                omega_rad_per_s,
                phase_rad,
                direction,
            } => Box::new(SineDisturbance {
                terms: vec![(*amplitude, *omega_rad_per_s, *phase_rad)],
                direction: dir(direction)?,
            }),
            DisturbanceSpec::RandomSines {
                amplitude,
                max_omega_rad_per_s,
                terms,
                direction,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let count = (*terms).max(1);
                let terms = (0..count)
                    .map(|_| {
                        let w = rng.random::<f64>() * max_omega_rad_per_s;
                        let p = rng.random::<f64>() * std::f64::consts::TAU;
                        (amplitude / count as f64, w, p)
                    })
                    .collect();
                Box::new(SineDisturbance {
                    terms,
                    direction: dir(direction)?,
                })
            }
        })
    }
}

/// Piecewise-constant Cartesian force command, active from `t_start_s`.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdSegment {
    pub t_start_s: f64,
    /// `(f_x, f_y)`.
    pub force_N: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Approach {
    /// Controller active from `t = 0`.
    Free,
    /// PI joint-velocity servo until the first sample with contact.
    VelocityServo { velocity_ref: Vec<f64>, kp: f64, ki: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub plant: PlantSpec,
    pub env: EnvironmentModel,
    pub disturbance: DisturbanceSpec,
    pub controller: ControllerSpec,
    pub model_estimate: ModelEstimateSpec,
    pub fd_schedule: Vec<FdSegment>,
    pub approach: Approach,
    /// Initial joint position (rad or m).
    pub q0: Vec<f64>,
    /// Initial joint velocity.
    #[serde(default)]
    pub qd0: Option<Vec<f64>>,
    pub duration_s: f64,
    pub h_s: f64,
    pub dt_sub_s: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Scenario(m));
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad(format!("duration_s must be > 0, got {}", self.duration_s));
        }
        if !(self.h_s > 0.0 && self.dt_sub_s > 0.0 && self.dt_sub_s <= self.h_s) {
            return bad(format!("need 0 < dt_sub_s <= h_s, got h_s={} dt_sub_s={}", self.h_s, self.dt_sub_s));
        }
        let ratio = self.h_s / self.dt_sub_s;
        if (ratio - ratio.round()).abs() > 1e-6 * ratio {
            return bad(format!("h_s={} is not a multiple of dt_sub_s={}", self.h_s, self.dt_sub_s));
        }
        match self.fd_schedule.first() {
            Some(seg) if seg.t_start_s <= 0.0 => {}
            _ => return bad("fd_schedule must start at t = 0".into()),
        }
        if self.fd_schedule.windows(2).any(|w| w[1].t_start_s <= w[0].t_start_s) {
            return bad("fd_schedule start times must increase".into());
        }
        let n = self.plant.dof();
        if self.q0.len() != n || self.qd0.as_ref().is_some_and(|v| v.len() != n) {
            return bad(format!("initial state must have {n} entries"));
        }
        if let Approach::VelocityServo { velocity_ref, kp, ki } = &self.approach {
            if velocity_ref.len() != n || !(*kp >= 0.0 && *ki >= 0.0) {
                return bad("velocity servo needs one reference per joint and kp, ki >= 0".into());
            }
        }
        self.env.validate()
    }

    pub fn substeps(&self) -> usize {
        (self.h_s / self.dt_sub_s).round() as usize
    }

    /// Number of controller samples, `duration / h`.
    pub fn steps(&self) -> usize {
        (self.duration_s / self.h_s).round() as usize
    }

    /// Cartesian force command at time `t`.
    pub fn fd_at(&self, t: f64) -> [f64; 2] {
        self.fd_schedule
            .iter()
            .rev()
            .find(|s| s.t_start_s <= t)
            .map(|s| s.force_N)
            .unwrap_or([0.0, 0.0])
    }

    /// Reads a scenario file, or falls back to a preset of that name.
    pub fn load(name_or_path: &str) -> Result<Self> {
        let path = Path::new(name_or_path);
        if path.is_file() {
            let text = std::fs::read_to_string(path)?;
            let sc: Scenario = serde_json::from_str(&text)?;
            sc.validate()?;
            return Ok(sc);
        }
        preset(name_or_path)
    }
}

// ---------------------------------------------------------------------------
// trace
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
    pub qx: Vec<f64>,
    pub qxd: Vec<f64>,
    pub tau: Vec<f64>,
    pub tau_star: Vec<f64>,
    pub fc_joint: Vec<f64>,
    pub fc_cart: [f64; 2],
    pub fd_cart: [f64; 2],
    pub ee: [f64; 2],
    pub s: Vec<f64>,
    pub v: Vec<f64>,
    pub u_s: Vec<f64>,
    pub saturated: Vec<bool>,
    pub contact: bool,
    /// Force controller running (false during the approach servo).
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub dof: usize,
    pub rows: Vec<TraceRow>,
}

const VEC_COLUMNS: [&str; 11] = ["q", "qd", "qx", "qxd", "tau", "tau_star", "fc_joint", "s", "v", "u_s", "saturated"];
const PAIR_COLUMNS: [&str; 3] = ["fc", "fd", "ee"];

fn header(dof: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for name in VEC_COLUMNS {
        h.extend((0..dof).map(|i| format!("{name}_{i}")));
    }
    for name in PAIR_COLUMNS {
        h.push(format!("{name}_x"));
        h.push(format!("{name}_y"));
    }
    h.push("contact".into());
    h.push("active".into());
    h
}

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

impl Trace {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(header(self.dof))?;
        for r in &self.rows {
            let mut rec = vec![r.t.to_string()];
            for col in [&r.q, &r.qd, &r.qx, &r.qxd, &r.tau, &r.tau_star, &r.fc_joint, &r.s, &r.v, &r.u_s] {
                rec.extend(col.iter().map(f64::to_string));
            }
            rec.extend(r.saturated.iter().map(|b| flag(*b)));
            for pair in [r.fc_cart, r.fd_cart, r.ee] {
                rec.extend(pair.iter().map(f64::to_string));
            }
            rec.push(flag(r.contact));
            rec.push(flag(r.active));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        let dof = headers.iter().filter(|h| h.strip_prefix("q_").is_some_and(|i| i.parse::<usize>().is_ok())).count();
        let expected = header(dof);
        if headers.iter().ne(expected.iter().map(String::as_str)) {
            return Err(Error::Scenario("trace CSV header does not match the trace layout".into()));
        }
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec[i]
                    .parse::<f64>()
                    .map_err(|e| Error::Scenario(format!("bad number `{}` in column {}: {e}", &rec[i], expected[i])))
            };
            let boolean = |i: usize| -> Result<bool> {
                match &rec[i] {
                    "1" => Ok(true),
                    "0" => Ok(false),
                    other => Err(Error::Scenario(format!("bad flag `{other}` in column {}", expected[i]))),
                }
            };
            let mut idx = 1;
            let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(10);
            for _ in 0..10 {
                vecs.push((idx..idx + dof).map(num).collect::<Result<_>>()?);
                idx += dof;
            }
            let saturated = (idx..idx + dof).map(boolean).collect::<Result<_>>()?;
            idx += dof;
            let pair = |i: usize| -> Result<[f64; 2]> { Ok([num(i)?, num(i + 1)?]) };
            let (fc_cart, fd_cart, ee) = (pair(idx)?, pair(idx + 2)?, pair(idx + 4)?);
            idx += 6;
            let mut it = vecs.into_iter();
            let mut next = || it.next().expect("ten vector columns");
            rows.push(TraceRow {
                t: num(0)?,
                q: next(),
                qd: next(),
                qx: next(),
                qxd: next(),
                tau: next(),
                tau_star: next(),
                fc_joint: next(),
                s: next(),
                v: next(),
                u_s: next(),
                saturated,
                fc_cart,
                fd_cart,
                ee,
                contact: boolean(idx)?,
                active: boolean(idx + 1)?,
            });
        }
        Ok(Trace { dof, rows })
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

// ---------------------------------------------------------------------------
// runner
// ---------------------------------------------------------------------------

fn bench_step(
    state: &AdmittanceState,
    q: &JointVector,
    qd: &JointVector,
    model: &dyn ModelEstimate,
    g: &AdmittanceGains,
) -> Result<(JointVector, AdmittanceState, StepDiagnostics)> {
    let sample = ModelSample {
        m: model.mass(q),
        c: model.coriolis(q, qd),
        g: model.gravity(q),
    };
    let s = qd + q * g.lambda;
    // the bench has no k1 coupling: the decoupled paths see β = h γ1 + 1 from the MSTA gains
    let bench_gains = AdmittanceGains {
        k1: K1Gain::Structured {
            gamma1: g.msta.gamma1.max(f64::MIN_POSITIVE),
        },
        ..g.clone()
    };
    let (u_s, msta, msta_diag) = inner_loop_term(&s, &state.msta, &sample, &bench_gains)?;
    let tau_star = &sample.m * (-(qd * g.lambda) - &u_s) + &sample.c * qd + &sample.g;
    let tau = project_box(&tau_star, &g.limits)?;
    let next = AdmittanceState {
        qx_prev: JointVector::zeros(q.len()),
        qxd_prev: JointVector::zeros(q.len()),
        ux_prev: JointVector::zeros(q.len()),
        q_prev: q.clone(),
        qe_prev: -q,
        msta,
    };
    let diag = StepDiagnostics {
        saturated: tau_star.iter().zip(tau.iter()).map(|(a, b)| (a - b).abs() > 1e-12).collect(),
        tau_star,
        tau: tau.clone(),
        ux_star: JointVector::zeros(q.len()),
        qx_star: JointVector::zeros(q.len()),
        q1_star: JointVector::zeros(q.len()),
        qe: -q,
        s,
        u_s,
        lambda_vi_residual: f64::NEG_INFINITY,
        msta: msta_diag,
    };
    Ok((tau, next, diag))
}

fn to_vec(v: &JointVector) -> Vec<f64> {
    v.iter().copied().collect()
}

fn pd_gains(sc: &Scenario, gains: &AdmittanceGains, model: &dyn ModelEstimate, n: usize) -> Result<PdGains> {
    match &sc.controller.pd {
        Some(p) => {
            if p.kp_diag.len() != n || p.kd_diag.len() != n {
                return Err(Error::Scenario(format!("PD gains need {n} entries")));
            }
            Ok(PdGains {
                kp: diag(&p.kp_diag),
                kd: diag(&p.kd_diag),
            })
        }
        None => {
            let q0 = JointVector::from_column_slice(&sc.q0);
            Ok(PdGains::matching(gains, &model.mass(&q0), &model.coriolis(&q0, &JointVector::zeros(n))))
        }
    }
}

/// Runs one scenario and returns one trace row per controller sample.
pub fn run_scenario(sc: &Scenario) -> Result<Trace> {
    sc.validate()?;
    let plant = sc.plant.build()?;
    let plant = plant.as_ref();
    let n = plant.dof();
    let h = sc.h_s;
    let n_sub = sc.substeps();
    let dt = h / n_sub as f64;
    let model = sc.model_estimate.build(plant)?;
    let gains = sc.controller.gains(plant, h)?;
    let pd = pd_gains(sc, &gains, model.as_ref(), n)?;
    let disturbance = sc.disturbance.build(n, sc.seed)?;

    let q0 = JointVector::from_column_slice(&sc.q0);
    let qd0 = sc
        .qd0
        .as_ref()
        .map(|v| JointVector::from_column_slice(v))
        .unwrap_or_else(|| JointVector::zeros(n));
    let mut plant_state = PlantState { q: q0.clone(), qd: qd0 };
    let mut ctrl = match sc.approach {
        Approach::Free => Some(AdmittanceState::at_rest(&q0)),
        Approach::VelocityServo { .. } => None,
    };
    let mut servo_integral = JointVector::zeros(n);
    let mut q_last = q0;

    let steps = sc.steps();
    let mut rows = Vec::with_capacity(steps);
    for k in 0..steps {
        let t = k as f64 * h;
        let q = plant_state.q.clone();
        let ee = plant.ee_position(&q);
        let wrench = contact_wrench(ee, plant.ee_velocity(&plant_state), &sc.env);
        let fc = joint_contact_torque(plant, &q, &wrench)?;
        let fd_cart = sc.fd_at(t);
        let fd = joint_contact_torque(plant, &q, &fd_cart)?;
        let contact = wrench[1] > 0.0;

        if ctrl.is_none() && contact {
            let vel = if k == 0 {
                plant_state.qd.clone()
            } else {
                (&q - &q_last) / h
            };
            let base = if k == 0 { &q } else { &q_last };
            ctrl = Some(AdmittanceState::in_motion(base, &vel));
        }

        let (tau, tau_star, saturated, s, u_s) = match ctrl.as_mut() {
            Some(cs) => {
                let meas = Measurement {
                    q: q.clone(),
                    fc: fc.clone(),
                    fd: fd.clone(),
                };
                let (tau, next, d) = match sc.controller.kind {
                    ControllerKind::Proposed => admittance_step(cs, &meas, model.as_ref(), &gains),
                    ControllerKind::NaiveBaseline => baseline_naive_step(cs, &meas, model.as_ref(), &pd, &gains),
                    ControllerKind::SlidingBench => bench_step(cs, &q, &plant_state.qd, model.as_ref(), &gains),
                }
                .map_err(|e| e.at_step(k))?;
                if !next.is_finite() {
                    return Err(Error::SimulationBlowUp { step: k, t });
                }
                *cs = next;
                (tau, d.tau_star, d.saturated, d.s, d.u_s)
            }
            None => {
                let Approach::VelocityServo { velocity_ref, kp, ki } = &sc.approach else {
                    unreachable!("controller is only inactive during a servo approach")
                };
                let err = JointVector::from_column_slice(velocity_ref) - &plant_state.qd;
                servo_integral += &err * h;
                let tau_star = &err * *kp + &servo_integral * *ki + model.gravity(&q);
                let tau = project_box(&tau_star, plant.torque_limits())?;
                let saturated = tau_star.iter().zip(tau.iter()).map(|(a, b)| a != b).collect();
                (tau, tau_star, saturated, JointVector::zeros(n), JointVector::zeros(n))
            }
        };

        let (qx, qxd, v) = match &ctrl {
            Some(cs) if sc.controller.kind != ControllerKind::SlidingBench => {
                (to_vec(&cs.qx_prev), to_vec(&cs.qxd_prev), to_vec(&cs.msta.v))
            }
            Some(cs) => (vec![0.0; n], vec![0.0; n], to_vec(&cs.msta.v)),
            None => (to_vec(&q), to_vec(&plant_state.qd), vec![0.0; n]),
        };
        rows.push(TraceRow {
            t,
            q: to_vec(&q),
            qd: to_vec(&plant_state.qd),
            qx,
            qxd,
            tau: to_vec(&tau),
            tau_star: to_vec(&tau_star),
            fc_joint: to_vec(&fc),
            fc_cart: wrench,
            fd_cart,
            ee,
            s: to_vec(&s),
            v,
            u_s: to_vec(&u_s),
            saturated,
            contact,
            active: ctrl.is_some(),
        });

        q_last = q;
        plant_state = integrate_substep(plant, &plant_state, &tau, &sc.env, disturbance.as_ref(), t, dt, n_sub)
            .map_err(|e| match e {
                Error::SimulationBlowUp { t, .. } => Error::SimulationBlowUp { step: k, t },
                e => e.at_step(k),
            })?;
    }
    Ok(Trace { dof: n, rows })
}

/// The controller of a scenario as a standalone object, stepped with
/// externally measured joint positions and joint-space torques.
pub struct ScenarioController {
    kind: ControllerKind,
    gains: AdmittanceGains,
    pd: PdGains,
    model: OwnedModel,
    state: AdmittanceState,
}

impl ScenarioController {
    /// Proxy starts on `q0` at rest. The sliding bench has no proxy and is rejected.
    pub fn new(sc: &Scenario) -> Result<Self> {
        sc.validate()?;
        if sc.controller.kind == ControllerKind::SlidingBench {
            return Err(Error::Scenario("the sliding bench has no standalone controller".into()));
        }
        let plant = sc.plant.build()?;
        let n = plant.dof();
        let gains = sc.controller.gains(plant.as_ref(), sc.h_s)?;
        let model = match sc.model_estimate.constant(n)? {
            Some(m) => OwnedModel::Constant(m),
            None => OwnedModel::Exact(plant),
        };
        let pd = pd_gains(sc, &gains, &model, n)?;
        let state = AdmittanceState::at_rest(&JointVector::from_column_slice(&sc.q0));
        Ok(Self {
            kind: sc.controller.kind,
            gains,
            pd,
            model,
            state,
        })
    }

    pub fn dof(&self) -> usize {
        self.gains.dof()
    }

    pub fn gains(&self) -> &AdmittanceGains {
        &self.gains
    }

    pub fn state(&self) -> &AdmittanceState {
        &self.state
    }

    /// Puts the proxy on `q` moving with `qd`, integrator cleared.
    pub fn reset(&mut self, q: &JointVector, qd: &JointVector) -> Result<()> {
        let n = self.dof();
        for v in [q, qd] {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: v.len() });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter("reset state must be finite".into()));
            }
        }
        self.state = AdmittanceState::in_motion(q, qd);
        Ok(())
    }

    /// One sample. The state is left untouched on error.
    pub fn step(&mut self, meas: &Measurement) -> Result<(JointVector, StepDiagnostics)> {
        let (tau, next, diag) = match self.kind {
            ControllerKind::Proposed => admittance_step(&self.state, meas, &self.model, &self.gains),
            _ => baseline_naive_step(&self.state, meas, &self.model, &self.pd, &self.gains),
        }?;
        if !next.is_finite() {
            return Err(Error::InvalidParameter("controller state became non-finite".into()));
        }
        self.state = next;
        Ok((tau, diag))
    }
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentMetrics {
    pub t_start_s: f64,
    pub t_end_s: f64,
    pub target_N: f64,
    /// Mean `f_c,y` over the last second of the segment (or the whole segment if shorter).
    pub mean_force_N: Option<f64>,
    pub rel_err: Option<f64>,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `|mean f_c,y - |f_d,y|| / |f_d,y|` over the last second; `None`
    /// without contact in that window or with a zero command.
    pub steady_force_err: Option<f64>,
    pub steady_mean_force_N: Option<f64>,
    pub first_contact_s: Option<f64>,
    /// First time after impact from which the force stays within 5% for 0.5 s.
    pub settle_time_s: Option<f64>,
    /// Contact losses after at least 0.2 s of continuous contact.
    pub rebound_count: usize,
    /// Time of the last contact-to-free transition of any kind.
    pub last_contact_loss_s: Option<f64>,
    /// Samples with `|τ_i| > F_i` on some joint.
    pub torque_violations: usize,
    /// Standard deviation of the sample-to-sample increments of `u_s` over the last second.
    pub chattering_index: f64,
    /// Standard deviation of `u_s` itself over the last second.
    pub u_s_std: f64,
    /// Sliding bench only: standard deviation over the last second of
    /// `u_s - M̂⁻¹ d(t)`, the distance from the equivalent control.
    pub u_s_eq_dev_std: Option<f64>,
    /// Largest `||s||` over the last second.
    pub steady_s_max: f64,
    pub max_penetration_m: f64,
    pub max_abs_tau: Vec<f64>,
    pub segments: Vec<SegmentMetrics>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn std_dev(xs: &[f64]) -> f64 {
    match mean(xs) {
        Some(m) if xs.len() > 1 => (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt(),
        _ => 0.0,
    }
}

fn equivalent_control_deviation(tail: &[&&TraceRow], sc: &Scenario) -> Option<f64> {
    if sc.controller.kind != ControllerKind::SlidingBench || tail.is_empty() {
        return None;
    }
    let plant = sc.plant.build().ok()?;
    let model = sc.model_estimate.build(plant.as_ref()).ok()?;
    let dist = sc.disturbance.build(plant.dof(), sc.seed).ok()?;
    let mut dev = Vec::new();
    for r in tail {
        let state = PlantState {
            q: JointVector::from_column_slice(&r.q),
            qd: JointVector::from_column_slice(&r.qd),
        };
        let u_eq = model.mass(&state.q).lu().solve(&dist.torque(r.t, &state))?;
        dev.extend(r.u_s.iter().zip(u_eq.iter()).map(|(u, e)| u - e));
    }
    Some(std_dev(&dev))
}

fn force_error(rows: &[&TraceRow], target: f64) -> (Option<f64>, Option<f64>) {
    if rows.is_empty() || !rows.iter().any(|r| r.contact) {
        return (None, None);
    }
    let m = mean(&rows.iter().map(|r| r.fc_cart[1]).collect::<Vec<_>>());
    let err = m.filter(|_| target > 0.0).map(|m| (m - target).abs() / target);
    (err, m)
}

pub fn compute_metrics(trace: &Trace, sc: &Scenario) -> Metrics {
    let rows = &trace.rows;
    let h = sc.h_s;
    let t_end = rows.last().map(|r| r.t + h).unwrap_or(0.0);
    let in_window = |r: &&TraceRow, a: f64, b: f64| r.t >= a - 1e-9 && r.t < b - 1e-9;
    let tail: Vec<&TraceRow> = rows.iter().filter(|r| in_window(r, t_end - STEADY_WINDOW_S, t_end)).collect();

    let target_end = sc.fd_at(t_end - h)[1].abs();
    let (steady_force_err, steady_mean_force_n) = force_error(&tail, target_end);

    let first_contact_s = rows.iter().find(|r| r.contact).map(|r| r.t);

    let mut rebound_count = 0;
    let mut last_contact_loss_s = None;
    let mut run_start: Option<f64> = None;
    for w in rows.windows(2) {
        if w[0].contact && run_start.is_none() {
            run_start = Some(w[0].t);
        }
        if w[0].contact && !w[1].contact {
            last_contact_loss_s = Some(w[1].t);
            if run_start.is_some_and(|t0| w[1].t - t0 >= REBOUND_MIN_CONTACT_S - 1e-9) {
                rebound_count += 1;
            }
            run_start = None;
        }
    }

    let settle_time_s = first_contact_s.and_then(|t0| {
        let mut candidate: Option<f64> = None;
        for r in rows.iter().filter(|r| r.t >= t0) {
            let target = r.fd_cart[1].abs();
            let ok = target > 0.0 && (r.fc_cart[1] - target).abs() <= SETTLE_BAND * target;
            match (ok, candidate) {
                (true, None) => candidate = Some(r.t),
                (true, Some(c)) if r.t - c >= SETTLE_DWELL_S - 1e-9 => return Some(c),
                (false, _) => candidate = None,
                _ => {}
            }
        }
        None
    });

    let limits = sc.plant.build().map(|p| p.torque_limits().limits().to_vec()).unwrap_or_default();
    let torque_violations = rows
        .iter()
        .filter(|r| r.tau.iter().zip(&limits).any(|(t, f)| t.abs() > *f))
        .count();
    let mut max_abs_tau = vec![0.0f64; trace.dof];
    for r in rows {
        for (m, t) in max_abs_tau.iter_mut().zip(&r.tau) {
            *m = m.max(t.abs());
        }
    }

    let active_tail: Vec<&&TraceRow> = tail.iter().filter(|r| r.active).collect();
    let mut increments = Vec::new();
    let mut values = Vec::new();
    for w in active_tail.windows(2) {
        increments.extend(w[1].u_s.iter().zip(&w[0].u_s).map(|(a, b)| a - b));
    }
    for r in &active_tail {
        values.extend(r.u_s.iter().copied());
    }
    let steady_s_max = active_tail
        .iter()
        .map(|r| r.s.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max);

    let max_penetration_m = rows.iter().map(|r| sc.env.ys_m - r.ee[1]).fold(0.0, f64::max);

    let segments = sc
        .fd_schedule
        .iter()
        .enumerate()
        .map(|(i, seg)| {
            let end = sc.fd_schedule.get(i + 1).map(|s| s.t_start_s).unwrap_or(t_end).min(t_end);
            let start = seg.t_start_s.max(end - STEADY_WINDOW_S);
            let window: Vec<&TraceRow> = rows.iter().filter(|r| in_window(r, start, end)).collect();
            let target = seg.force_N[1].abs();
            let (rel_err, mean_force_n) = force_error(&window, target);
            SegmentMetrics {
                t_start_s: seg.t_start_s,
                t_end_s: end,
                target_N: target,
                mean_force_N: mean_force_n,
                rel_err,
            }
        })
        .collect();

    Metrics {
        steady_force_err,
        steady_mean_force_N: steady_mean_force_n,
        first_contact_s,
        settle_time_s,
        rebound_count,
        last_contact_loss_s,
        torque_violations,
        chattering_index: std_dev(&increments),
        u_s_std: std_dev(&values),
        u_s_eq_dev_std: equivalent_control_deviation(&active_tail, sc),
        steady_s_max,
        max_penetration_m,
        max_abs_tau,
        segments,
    }
}

// ---------------------------------------------------------------------------
// overrides and sweeps
// ---------------------------------------------------------------------------

fn lookup<'a>(root: &'a mut Value, path: &str) -> Result<&'a mut Value> {
    let mut cur = root;
    for key in path.split('.') {
        cur = match cur {
            Value::Object(map) => map.get_mut(key),
            Value::Array(items) => key.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| Error::InvalidPath(path.to_string()))?;
    }
    Ok(cur)
}

/// Replaces the field at a dotted path (`env.ks_N_per_m`,
/// `fd_schedule.0.force_N.1`) and re-validates the scenario.
pub fn with_override(sc: &Scenario, path: &str, value: Value) -> Result<Scenario> {
    let mut doc = serde_json::to_value(sc)?;
    *lookup(&mut doc, path)? = value;
    let out: Scenario = serde_json::from_value(doc).map_err(|e| Error::Scenario(format!("override `{path}`: {e}")))?;
    out.validate()?;
    Ok(out)
}

/// Parses `key=value`; the value is read as JSON, or as a bare string.
pub fn apply_assignment(sc: &Scenario, assignment: &str) -> Result<Scenario> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Scenario(format!("override `{assignment}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    with_override(sc, key.trim(), value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub metrics: Metrics,
}

/// Rayon pool sized by `NONSMOOTH_ADM_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var("NONSMOOTH_ADM_THREADS") {
        let n: usize = raw
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("NONSMOOTH_ADM_THREADS must be a positive integer, got `{raw}`")))?;
        builder = builder.num_threads(n.max(1));
    }
    builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
}

/// Runs `template` once per value of the numeric field at `path`.
pub fn sweep(template: &Scenario, path: &str, values: &[f64]) -> Result<Vec<SweepRow>> {
    let mut probe = serde_json::to_value(template)?;
    if !lookup(&mut probe, path)?.is_number() {
        return Err(Error::InvalidPath(format!("{path} (not a numeric field)")));
    }
    let scenarios = values
        .iter()
        .map(|v| with_override(template, path, Value::from(*v)))
        .collect::<Result<Vec<_>>>()?;
    let results: Vec<Result<Metrics>> = thread_pool()?.install(|| {
        scenarios
            .par_iter()
            .map(|sc| run_scenario(sc).map(|tr| compute_metrics(&tr, sc)))
            .collect()
    });
    values
        .iter()
        .zip(results)
        .map(|(v, r)| r.map(|metrics| SweepRow { value: *v, metrics }))
        .collect()
}

// ---------------------------------------------------------------------------
// presets
// ---------------------------------------------------------------------------

fn fig3_one_dof() -> Scenario {
    let l1 = 0.5;
    Scenario {
        name: "fig3_one_dof".into(),
        plant: PlantSpec::OneDof(OneDofParams {
            g_m_per_s2: 0.0,
            ..OneDofParams::default()
        }),
        env: EnvironmentModel {
            ks_N_per_m: 2e3,
            ys_m: -l1 * 0.1f64.sin(),
            mu_fric: 0.1,
        },
        disturbance: DisturbanceSpec::None,
        controller: ControllerSpec {
            kind: ControllerKind::Proposed,
            mx_diag: vec![0.3],
            bx_diag: vec![2.0],
            lambda_per_s: 10.0,
            k1: K1Gain::Scalar(30.0),
            msta: MstaGains {
                k2: 11.6,
                k3: 66.0,
                ..MstaGains::default()
            },
            us: Some(UsDiscretization::ScalarImplicit),
            pd: None,
        },
        model_estimate: ModelEstimateSpec::Constant {
            m_diag: vec![0.1],
            c_diag: vec![0.0],
            g: None,
        },
        fd_schedule: vec![FdSegment {
            t_start_s: 0.0,
            force_N: [0.0, -2.0],
        }],
        approach: Approach::Free,
        q0: vec![0.0],
        qd0: None,
        duration_s: 5.0,
        h_s: 1e-3,
        dt_sub_s: 1e-5,
        seed: 1,
    }
}

fn fig5_two_dof() -> Scenario {
    Scenario {
        name: "fig5_two_dof".into(),
        plant: PlantSpec::TwoLink(TwoLinkParams {
            g_m_per_s2: 0.0,
            ..TwoLinkParams::default()
        }),
        env: EnvironmentModel {
            ks_N_per_m: 2e3,
            ys_m: -0.1,
            mu_fric: 0.1,
        },
        disturbance: DisturbanceSpec::None,
        controller: ControllerSpec {
            kind: ControllerKind::Proposed,
            mx_diag: vec![0.5, 0.5],
            bx_diag: vec![1.0, 1.0],
            lambda_per_s: 10.0,
            k1: K1Gain::Scalar(30.0),
            msta: MstaGains {
                k2: 11.6,
                k3: 66.0,
                ..MstaGains::default()
            },
            us: Some(UsDiscretization::Explicit),
            pd: None,
        },
        model_estimate: ModelEstimateSpec::Constant {
            m_diag: vec![0.2, 0.2],
            c_diag: vec![20.0, 20.0],
            g: None,
        },
        fd_schedule: vec![FdSegment {
            t_start_s: 0.0,
            force_N: [0.0, -2.0],
        }],
        approach: Approach::Free,
        q0: vec![0.3, -0.6],
        qd0: None,
        duration_s: 5.0,
        h_s: 1e-3,
        dt_sub_s: 1e-5,
        seed: 1,
    }
}

fn linmotor_steps() -> Scenario {
    Scenario {
        name: "linmotor_steps".into(),
        plant: PlantSpec::LinearMotor(LinearMotorParams::default()),
        env: EnvironmentModel {
            ks_N_per_m: LINMOTOR_STIFFNESS_N_PER_M[0],
            ys_m: 0.0,
            mu_fric: 0.0,
        },
        disturbance: DisturbanceSpec::None,
        controller: ControllerSpec {
            kind: ControllerKind::Proposed,
            mx_diag: vec![0.2],
            bx_diag: vec![4.0],
            lambda_per_s: 10.0,
            k1: K1Gain::Scalar(60.0),
            msta: MstaGains {
                k2: 22.25,
                k3: 242.0,
                ..MstaGains::default()
            },
            us: Some(UsDiscretization::ScalarImplicit),
            pd: None,
        },
        model_estimate: ModelEstimateSpec::Constant {
            m_diag: vec![0.22],
            c_diag: vec![0.0],
            g: None,
        },
        fd_schedule: vec![
            FdSegment {
                t_start_s: 0.0,
                force_N: [0.0, -1.5],
            },
            FdSegment {
                t_start_s: 2.5,
                force_N: [0.0, -2.0],
            },
            FdSegment {
                t_start_s: 5.0,
                force_N: [0.0, -2.5],
            },
        ],
        approach: Approach::VelocityServo {
            velocity_ref: vec![-0.04],
            kp: 20.0,
            ki: 400.0,
        },
        q0: vec![0.004],
        qd0: None,
        duration_s: 7.5,
        h_s: 4e-3,
        dt_sub_s: 4e-5,
        seed: 1,
    }
}

fn msta_bench() -> Scenario {
    Scenario {
        name: "msta_bench".into(),
        plant: PlantSpec::DoubleIntegrator {
            mass_kg: 1.0,
            limit_N: 100.0,
        },
        env: EnvironmentModel::free_space(),
        disturbance: DisturbanceSpec::Sine {
            amplitude: 1.0,
            omega_rad_per_s: 10.0,
            phase_rad: 0.0,
            direction: vec![1.0],
        },
        controller: ControllerSpec {
            kind: ControllerKind::SlidingBench,
            mx_diag: vec![1.0],
            bx_diag: vec![1.0],
            lambda_per_s: 10.0,
            k1: K1Gain::Scalar(1.0),
            msta: MstaGains {
                k2: 11.6,
                k3: 66.0,
                ..MstaGains::default()
            },
            us: Some(UsDiscretization::ScalarImplicit),
            pd: None,
        },
        model_estimate: ModelEstimateSpec::Exact,
        fd_schedule: vec![FdSegment {
            t_start_s: 0.0,
            force_N: [0.0, 0.0],
        }],
        approach: Approach::Free,
        q0: vec![0.05],
        qd0: None,
        duration_s: 3.0,
        h_s: 1e-3,
        dt_sub_s: 1e-5,
        seed: 1,
    }
}

pub fn presets() -> Vec<Scenario> {
    vec![fig3_one_dof(), fig5_two_dof(), linmotor_steps(), msta_bench()]
}

pub fn preset(name: &str) -> Result<Scenario> {
    presets()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::UnknownPreset {
            name: name.to_string(),
            available: PRESET_NAMES.join(", "),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, fy: f64, contact: bool) -> TraceRow {
        TraceRow {
            t,
            q: vec![0.0],
            qd: vec![0.0],
            qx: vec![0.0],
            qxd: vec![0.0],
            tau: vec![0.0],
            tau_star: vec![0.0],
            fc_joint: vec![0.0],
            fc_cart: [0.0, fy],
            fd_cart: [0.0, -2.0],
            ee: [0.0, 0.0],
            s: vec![0.0],
            v: vec![0.0],
            u_s: vec![0.0],
            saturated: vec![false],
            contact,
            active: true,
        }
    }

    fn synthetic(gap: Option<(f64, f64)>) -> (Trace, Scenario) {
        let mut sc = fig3_one_dof();
        sc.duration_s = 3.0;
        let rows = (0..3000)
            .map(|k| {
                let t = k as f64 * 1e-3;
                let lost = gap.is_some_and(|(a, b)| t >= a && t < b);
                row(t, if lost { 0.0 } else { 2.0 }, !lost)
            })
            .collect();
        (Trace { dof: 1, rows }, sc)
    }

    #[test]
    fn perfect_tracking_metrics() {
        let (tr, sc) = synthetic(None);
        let m = compute_metrics(&tr, &sc);
        assert_eq!(m.steady_force_err, Some(0.0));
        assert_eq!(m.rebound_count, 0);
        assert_eq!(m.torque_violations, 0);
        assert_eq!(m.settle_time_s, Some(0.0));
    }

    #[test]
    fn one_gap_is_one_rebound() {
        let (tr, sc) = synthetic(Some((1.0, 1.05)));
        let m = compute_metrics(&tr, &sc);
        assert_eq!(m.rebound_count, 1);
        assert!((m.last_contact_loss_s.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn short_contact_is_not_a_rebound() {
        let (mut tr, sc) = synthetic(None);
        for r in tr.rows.iter_mut() {
            r.contact = r.t >= 0.5 && r.t < 0.6;
        }
        assert_eq!(compute_metrics(&tr, &sc).rebound_count, 0);
    }

    #[test]
    fn no_contact_leaves_force_error_undefined() {
        let (mut tr, sc) = synthetic(None);
        for r in tr.rows.iter_mut() {
            r.contact = false;
            r.fc_cart = [0.0, 0.0];
        }
        let m = compute_metrics(&tr, &sc);
        assert_eq!(m.steady_force_err, None);
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains("\"steady_force_err\":null"));
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let (tr, _) = synthetic(Some((1.0, 1.1)));
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        assert_eq!(Trace::read_csv(buf.as_slice()).unwrap(), tr);
    }

    #[test]
    fn preset_basics() {
        assert_eq!(preset("fig3_one_dof").unwrap().h_s, 1e-3);
        assert_eq!(preset("linmotor_steps").unwrap().h_s, 4e-3);
        let two = preset("fig5_two_dof").unwrap().plant.build().unwrap();
        assert_eq!(two.torque_limits().limits(), &[3.0, 4.0]);
        let err = preset("nope").unwrap_err().to_string();
        assert!(PRESET_NAMES.iter().all(|n| err.contains(n)));
        for sc in presets() {
            sc.validate().unwrap();
            let json = serde_json::to_string(&sc).unwrap();
            assert_eq!(serde_json::from_str::<Scenario>(&json).unwrap(), sc);
        }
    }

    #[test]
    fn overrides() {
        let sc = preset("fig3_one_dof").unwrap();
        let o = apply_assignment(&sc, "env.ks_N_per_m=10000").unwrap();
        assert_eq!(o.env.ks_N_per_m, 1e4);
        let o = apply_assignment(&sc, "fd_schedule.0.force_N.1=-3").unwrap();
        assert_eq!(o.fd_at(0.0), [0.0, -3.0]);
        assert!(matches!(apply_assignment(&sc, "env.nope=1"), Err(Error::InvalidPath(_))));
        assert!(apply_assignment(&sc, "h_s=\"fast\"").is_err());
        assert!(apply_assignment(&sc, "duration_s=-1").is_err());
    }

    #[test]
    fn sweep_rejects_non_numeric_path() {
        let sc = preset("fig3_one_dof").unwrap();
        assert!(matches!(sweep(&sc, "name", &[1.0]), Err(Error::InvalidPath(_))));
        assert!(matches!(sweep(&sc, "env.missing", &[1.0]), Err(Error::InvalidPath(_))));
    }

    #[test]
    fn h_must_be_multiple_of_substep() {
        let mut sc = preset("fig3_one_dof").unwrap();
        sc.dt_sub_s = 3e-4;
        assert!(sc.validate().is_err());
    }
}

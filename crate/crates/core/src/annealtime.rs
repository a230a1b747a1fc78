//! Ehrenfest identities, the time-averaged density and the annealing-time
//! relation with its schedule-shape coefficient `C`.
//!
//! For `[H_f, H_aux] = 0` and `s = t / T`,
//!
//! `T i Tr(rho_bar [H_f, H_i]) = <H_i>_T - <H_i>_0 + <H_f>_0 - <H_f>_T + R31(1) <H_aux>_T + C`
//!
//! with `R31 = F3 / F1`, `F_sum = F1 + F2` and
//! `C = int_0^1 [(<H_f> - <H_i>) d/ds(1/F_sum) - <H_aux> d/ds(R31/F_sum)] ds`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{Sample, Trajectory};
use crate::hamiltonian::AnnealSetup;
use crate::pauli::PauliSum;
use crate::schedule::{Schedule, ScheduleSet};
use crate::state::StateVector;

/// Denominators below this withhold the prediction.
pub const MIN_DENOMINATOR: f64 = 1e-10;
/// Boundary terms below this are treated as absent.
pub const BOUNDARY_THRESHOLD: f64 = 1e-10;
const SCHEDULE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealTimeReport {
    pub t_f_actual: f64,
    pub t_f_predicted: f64,
    pub coefficient_c: f64,
    /// `C` recomputed on every other sample; absent when the sample count is even.
    pub coefficient_c_halved: Option<f64>,
    /// `i Tr(rho_bar [H_f, H_i])`
    pub denominator: f64,
    pub numerator: f64,
    /// `R31(1) <H_aux>_T`
    pub boundary_term_tf: f64,
    pub boundary_term_included: bool,
    /// Prediction with the boundary term left out.
    pub t_f_predicted_without_boundary: f64,
    /// `-<H_i>_0`, part of the numerator.
    pub initial_field_term: f64,
    /// True when `F3 = 0` and `F_sum = 1`, so `C` and the boundary term vanish.
    pub two_term: bool,
    pub residual: f64,
}

/// Trapezoid weights in normalized time for samples at times `t`; they sum to 1.
pub fn trapezoid_weights(t: &[f64]) -> Vec<f64> {
    let n = t.len();
    let span = t[n - 1] - t[0];
    let mut w = vec![0.0; n];
    for k in 0..n - 1 {
        let h = 0.5 * (t[k + 1] - t[k]) / span;
        w[k] += h;
        w[k + 1] += h;
    }
    w
}

fn require_samples(samples: &[Sample], min: usize) -> Result<()> {
    if samples.len() < min {
        return Err(Error::Domain(format!("need at least {min} trajectory samples, got {}", samples.len())));
    }
    Ok(())
}

/// `rho_bar = (1/T) int |psi><psi| dt` by the trapezoid rule over stored states.
pub fn time_averaged_density(traj: &Trajectory) -> Result<DMatrix<Complex64>> {
    let states = traj
        .states
        .as_ref()
        .ok_or_else(|| Error::Domain("trajectory was propagated without keeping states".into()))?;
    require_samples(&traj.samples, 2)?;
    let w = trapezoid_weights(&traj.times());
    let dim = states[0].dim();
    let mut rho = DMatrix::<Complex64>::zeros(dim, dim);
    for (psi, &wk) in states.iter().zip(&w) {
        let a = psi.amplitudes();
        for c in 0..dim {
            let ac = a[c].conj() * wk;
            if ac == Complex64::new(0.0, 0.0) {
                continue;
            }
            for r in 0..dim {
                rho[(r, c)] += a[r] * ac;
            }
        }
    }
    Ok(rho)
}

fn real_part(v: Complex64) -> Result<f64> {
    if v.im.abs() > 1e-10 {
        return Err(Error::Validation(format!("commutator expectation has imaginary part {}", v.im)));
    }
    Ok(v.re)
}

/// `i <psi|[A, B]|psi>`.
pub fn commutator_expectation(psi: &StateVector, a: &PauliSum, b: &PauliSum) -> Result<f64> {
    let c = PauliSum::i_commutator(a, b)?;
    real_part(psi.inner(&c.apply(psi)?))
}

/// `i Tr(rho [A, B])`.
pub fn commutator_expectation_density(rho: &DMatrix<Complex64>, a: &PauliSum, b: &PauliSum) -> Result<f64> {
    let c = PauliSum::i_commutator(a, b)?.to_dense();
    if c.nrows() != rho.nrows() {
        return Err(Error::Validation("density and operators have different dimensions".into()));
    }
    real_part((rho * c).trace())
}

/// Max-abs and RMS residuals of the three Ehrenfest identities, ordered
/// `(H_i, H_f, H_aux)`, over interior samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EhrenfestResidual {
    pub max_abs: [f64; 3],
    pub rms: [f64; 3],
}

impl EhrenfestResidual {
    pub fn max(&self) -> f64 {
        self.max_abs.iter().copied().fold(0.0, f64::max)
    }
}

/// Central-difference time derivatives of `<H_i>`, `<H_f>`, `<H_aux>` minus
/// their commutator right-hand sides.
pub fn ehrenfest_residual(traj: &Trajectory, setup: &AnnealSetup) -> Result<EhrenfestResidual> {
    let s = &traj.samples;
    require_samples(s, 3)?;
    let mut max_abs = [0.0f64; 3];
    let mut sq = [0.0f64; 3];
    for k in 1..s.len() - 1 {
        let dt = s[k + 1].t - s[k - 1].t;
        let [f1, f2, f3] = setup.schedules.weights(s[k].t / traj.total_time);
        let (fi, ai, af) = (s[k].comm_final_initial, s[k].comm_aux_initial, s[k].comm_aux_final);
        let rhs = [f2 * fi + f3 * ai, -f1 * fi + f3 * af, -f1 * ai - f2 * af];
        let lhs = [
            (s[k + 1].e_initial - s[k - 1].e_initial) / dt,
            (s[k + 1].e_final - s[k - 1].e_final) / dt,
            (s[k + 1].e_aux - s[k - 1].e_aux) / dt,
        ];
        for j in 0..3 {
            let r = (lhs[j] - rhs[j]).abs();
            max_abs[j] = max_abs[j].max(r);
            sq[j] += r * r;
        }
    }
    let m = (s.len() - 2) as f64;
    Ok(EhrenfestResidual { max_abs, rms: sq.map(|v| (v / m).sqrt()) })
}

/// `R31 = F3 / F1` and its derivative, with the `s -> 1` limit taken by
/// cancelling the common zero of the final cubic pieces.
struct Ratio<'a> {
    f1: &'a Schedule,
    f3: &'a Schedule,
    zero: bool,
    tail_width: f64,
    q1: Vec<f64>,
    q3: Vec<f64>,
}

fn poly(c: &[f64], u: f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut d = 0.0;
    for &a in c.iter().rev() {
        d = d * u + v;
        v = v * u + a;
    }
    (v, d)
}

impl<'a> Ratio<'a> {
    fn new(schedules: &'a ScheduleSet) -> Result<Self> {
        let f1 = &schedules.initial;
        let f3 = &schedules.auxiliary;
        if f3.is_identically_zero() {
            return Ok(Self { f1, f3, zero: true, tail_width: 0.0, q1: vec![], q3: vec![] });
        }
        let (c1, w1) = f1.end_taylor();
        let (c3, w3) = f3.end_taylor();
        let scale1 = c1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scale3 = c3.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let order = c1
            .iter()
            .position(|v| v.abs() > SCHEDULE_FLOOR * scale1.max(1.0))
            .ok_or_else(|| Error::DivergentLimit("F1 vanishes identically on its final piece".into()))?;
        if let Some(j) = c3[..order].iter().position(|v| v.abs() > SCHEDULE_FLOOR * scale3.max(1.0)) {
            return Err(Error::DivergentLimit(format!(
                "F3 vanishes at order {j} but F1 at order {order} as s -> 1; R31 has no finite limit"
            )));
        }
        Ok(Self {
            f1,
            f3,
            zero: false,
            tail_width: w1.min(w3),
            q1: c1[order..].to_vec(),
            q3: c3[order..].to_vec(),
        })
    }

    /// `(R31(s), dR31/ds)`.
    fn eval(&self, s: f64) -> Result<(f64, f64)> {
        if self.zero {
            return Ok((0.0, 0.0));
        }
        let u = 1.0 - s;
        let (n, d, dn, dd) = if u <= self.tail_width {
            let (v1, d1) = poly(&self.q1, u);
            let (v3, d3) = poly(&self.q3, u);
            // d/ds = -d/du
            (v3, v1, -d3, -d1)
        } else {
            (self.f3.value(s), self.f1.value(s), self.f3.derivative(s), self.f1.derivative(s))
        };
        if d.abs() <= SCHEDULE_FLOOR {
            return Err(Error::DivergentLimit(format!("F1 vanishes at s = {s} while F3 does not")));
        }
        Ok((n / d, (dn * d - n * dd) / (d * d)))
    }
}

fn fsum(schedules: &ScheduleSet, s: f64) -> Result<(f64, f64)> {
    let v = schedules.initial.value(s) + schedules.final_.value(s);
    if v <= SCHEDULE_FLOOR {
        return Err(Error::SingularSchedule(format!("F1 + F2 = {v} at s = {s}")));
    }
    Ok((v, schedules.initial.derivative(s) + schedules.final_.derivative(s)))
}

fn c_on(samples: &[Sample], total_time: f64, schedules: &ScheduleSet, ratio: &Ratio) -> Result<f64> {
    let times: Vec<f64> = samples.iter().map(|x| x.t).collect();
    let w = trapezoid_weights(&times);
    let mut c = 0.0;
    for (x, wk) in samples.iter().zip(w) {
        let s = (x.t / total_time).clamp(0.0, 1.0);
        let (fs, dfs) = fsum(schedules, s)?;
        let (r, dr) = ratio.eval(s)?;
        let d_inv = -dfs / (fs * fs);
        let d_q = dr / fs - r * dfs / (fs * fs);
        c += wk * ((x.e_final - x.e_initial) * d_inv - x.e_aux * d_q);
    }
    Ok(c)
}

/// Coefficient `C` by the trapezoid rule over the trajectory samples, with
/// the integrand at `s = 1` taken as its limit.
pub fn coefficient_c(traj: &Trajectory, schedules: &ScheduleSet) -> Result<f64> {
    require_samples(&traj.samples, 2)?;
    let ratio = Ratio::new(schedules)?;
    c_on(&traj.samples, traj.total_time, schedules, &ratio)
}

fn check_commuting(setup: &AnnealSetup) -> Result<()> {
    let c = PauliSum::i_commutator(&setup.h_final, &setup.h_aux)?;
    if c.one_norm() >= 1e-10 {
        return Err(Error::Domain(format!(
            "H_f and H_aux do not commute (commutator norm {:.3e}); the relation does not apply",
            c.one_norm()
        )));
    }
    Ok(())
}

/// Predicts the anneal time from the sampled evolution.
pub fn annealing_time_prediction(traj: &Trajectory, setup: &AnnealSetup) -> Result<AnnealTimeReport> {
    prediction_from_samples(&traj.samples, traj.total_time, setup)
}

/// Same as [`annealing_time_prediction`] for samples stored without states.
pub fn prediction_from_samples(samples: &[Sample], total_time: f64, setup: &AnnealSetup) -> Result<AnnealTimeReport> {
    require_samples(samples, 2)?;
    let aux_zero = setup.schedules.auxiliary.is_identically_zero() || setup.h_aux.terms().is_empty();
    if !aux_zero {
        check_commuting(setup)?;
    }
    let times: Vec<f64> = samples.iter().map(|x| x.t).collect();
    let w = trapezoid_weights(&times);
    let denominator: f64 = samples.iter().zip(&w).map(|(x, wk)| wk * x.comm_final_initial).sum();
    if denominator.abs() <= MIN_DENOMINATOR {
        return Err(Error::DegenerateDynamics(format!("i Tr(rho_bar [H_f, H_i]) = {denominator:e}")));
    }

    let first = samples[0];
    let last = samples[samples.len() - 1];
    let initial_field_term = -first.e_initial;
    let base = last.e_initial + initial_field_term + first.e_final - last.e_final;

    let flat_sum = samples.iter().all(|x| {
        let s = x.t / total_time;
        (setup.schedules.initial.value(s) + setup.schedules.final_.value(s) - 1.0).abs() <= SCHEDULE_FLOOR
    });
    let two_term = aux_zero && flat_sum;

    let (c, c_halved, boundary) = if two_term {
        (0.0, Some(0.0), 0.0)
    } else {
        let ratio = Ratio::new(&setup.schedules)?;
        let c = c_on(samples, total_time, &setup.schedules, &ratio)?;
        let c_halved = if samples.len() >= 3 && (samples.len() - 1).is_multiple_of(2) {
            let every_other: Vec<Sample> = samples.iter().step_by(2).copied().collect();
            Some(c_on(&every_other, total_time, &setup.schedules, &ratio)?)
        } else {
            None
        };
        let (r_end, _) = ratio.eval(1.0)?;
        (c, c_halved, r_end * last.e_aux)
    };
    let boundary_term_included = boundary.abs() > BOUNDARY_THRESHOLD;
    let numerator = base + c + if boundary_term_included { boundary } else { 0.0 };
    let t_f_predicted = numerator / denominator;
    Ok(AnnealTimeReport {
        t_f_actual: total_time,
        t_f_predicted,
        coefficient_c: c,
        coefficient_c_halved: c_halved,
        denominator,
        numerator,
        boundary_term_tf: boundary,
        boundary_term_included,
        t_f_predicted_without_boundary: (base + c) / denominator,
        initial_field_term,
        two_term,
        residual: (t_f_predicted - total_time).abs() / total_time,
    })
}

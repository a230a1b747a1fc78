//! Schedule functions `F_j : [0, 1] -> R` weighting each Hamiltonian term.
//!
//! A parametrized schedule is a monotone piecewise cubic Hermite interpolant
//! through `n + 2` equally spaced knots. The two outer knot values are fixed
//! by the schedule's role (initial, final or auxiliary term); the `n` interior
//! values are the variational parameters. Interior slopes use the harmonic
//! mean of adjacent secants (zero at local extrema), which keeps every piece
//! monotone between its endpoint values, so the whole curve never leaves the
//! range spanned by its knots.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slope convention at `x = 0` and `x = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EndpointSlopes {
    /// Zero slope at both ends.
    #[default]
    Flat,
    /// One-sided secant of the outermost segment.
    Secant,
}

/// Which term of the annealing Hamiltonian a schedule drives. Fixes the
/// boundary values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleRole {
    /// Weight of the transverse-field term: 1 -> 0.
    Initial,
    /// Weight of the problem Hamiltonian: 0 -> 1.
    Final,
    /// Weight of the auxiliary term: 0 -> 0.
    Auxiliary,
}

impl ScheduleRole {
    pub fn boundary(self) -> (f64, f64) {
        match self {
            ScheduleRole::Initial => (1.0, 0.0),
            ScheduleRole::Final => (0.0, 1.0),
            ScheduleRole::Auxiliary => (0.0, 0.0),
        }
    }
}

/// Variational parameters of one schedule function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub boundary: (f64, f64),
    pub params: Vec<f64>,
    pub bounds: (f64, f64),
}

impl ScheduleSpec {
    /// Spec with the role's boundary values and default bounds `[0, 1]`.
    pub fn new(role: ScheduleRole, params: Vec<f64>) -> Self {
        Self { boundary: role.boundary(), params, bounds: (0.0, 1.0) }
    }

    pub fn with_bounds(mut self, lo: f64, hi: f64) -> Self {
        self.bounds = (lo, hi);
        self
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Knot spacing `1 / (n + 1)`.
    pub fn spacing(&self) -> f64 {
        1.0 / (self.params.len() + 1) as f64
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounds;
        if !(lo <= hi) {
            return Err(Error::Validation(format!("empty parameter bounds [{lo}, {hi}]")));
        }
        for (index, &value) in self.params.iter().enumerate() {
            if !(value >= lo && value <= hi) {
                return Err(Error::ParamOutOfBounds { index, value, lo, hi });
            }
        }
        if !self.boundary.0.is_finite() || !self.boundary.1.is_finite() {
            return Err(Error::Validation("non-finite boundary value".into()));
        }
        Ok(())
    }

    /// All knot values, boundary included.
    pub fn knot_values(&self) -> Vec<f64> {
        let mut values = Vec::with_capacity(self.params.len() + 2);
        values.push(self.boundary.0);
        values.extend_from_slice(&self.params);
        values.push(self.boundary.1);
        values
    }
}

/// Cubic Hermite basis on the unit interval, `(h0, h1, h2, h3)`.
///
/// `h2` and `h3` multiply the scaled slopes at the left and right knot.
pub fn hermite_basis(t_hat: f64) -> Result<[f64; 4]> {
    if !(0.0..=1.0).contains(&t_hat) {
        return Err(Error::Domain(format!("basis argument {t_hat} outside [0, 1]")));
    }
    Ok(basis(t_hat))
}

#[inline]
fn basis(t: f64) -> [f64; 4] {
    let u = 1.0 - t;
    [(1.0 + 2.0 * t) * u * u, t * t * (3.0 - 2.0 * t), t * u * u, t * t * (t - 1.0)]
}

#[inline]
fn basis_d1(t: f64) -> [f64; 4] {
    [
        6.0 * t * t - 6.0 * t,
        6.0 * t - 6.0 * t * t,
        3.0 * t * t - 4.0 * t + 1.0,
        3.0 * t * t - 2.0 * t,
    ]
}

#[inline]
fn basis_d2(t: f64) -> [f64; 4] {
    [12.0 * t - 6.0, 6.0 - 12.0 * t, 6.0 * t - 4.0, 6.0 * t - 2.0]
}

/// Knot slopes of the monotone interpolant through equally spaced `values`.
pub fn monotone_slopes(values: &[f64], spacing: f64, endpoints: EndpointSlopes) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Domain(format!("need at least 2 points, got {n}")));
    }
    if !(spacing > 0.0) {
        return Err(Error::Domain(format!("knot spacing {spacing} must be positive")));
    }
    let mut slopes = vec![0.0; n];
    for k in 1..n - 1 {
        let left = values[k] - values[k - 1];
        let right = values[k + 1] - values[k];
        if left * right > 0.0 {
            slopes[k] = 2.0 * left * right / (spacing * (values[k + 1] - values[k - 1]));
        }
    }
    if endpoints == EndpointSlopes::Secant {
        slopes[0] = (values[1] - values[0]) / spacing;
        slopes[n - 1] = (values[n - 1] - values[n - 2]) / spacing;
    }
    Ok(slopes)
}

/// `C^1` piecewise cubic through equally spaced knots on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseHermite {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    spacing: f64,
}

impl PiecewiseHermite {
    pub fn build(spec: &ScheduleSpec, endpoints: EndpointSlopes) -> Result<Self> {
        spec.validate()?;
        let values = spec.knot_values();
        let spacing = spec.spacing();
        let slopes = monotone_slopes(&values, spacing, endpoints)?;
        let knots = (0..values.len()).map(|k| k as f64 * spacing).collect();
        Ok(Self { knots, values, slopes, spacing })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn n_pieces(&self) -> usize {
        self.values.len() - 1
    }

    fn piece_of(&self, x: f64) -> usize {
        let k = (x / self.spacing).floor();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.n_pieces() - 1)
        }
    }

    fn piece_terms(&self, k: usize, x: f64) -> (f64, [f64; 4]) {
        let mut t = (x - self.knots[k]) / self.spacing;
        // knots reproduce their values exactly despite rounding in k * spacing
        if (t - 1.0).abs() < 1e-12 {
            t = 1.0;
        } else if t.abs() < 1e-12 {
            t = 0.0;
        }
        let h = self.spacing;
        (t, [self.values[k], self.values[k + 1], h * self.slopes[k], h * self.slopes[k + 1]])
    }

    /// Value of piece `k` at `x`; `x` may lie anywhere on the piece's closed
    /// interval, which lets callers compare both pieces meeting at a knot.
    pub fn eval_on_piece(&self, k: usize, x: f64) -> f64 {
        let (t, c) = self.piece_terms(k, x);
        dot(basis(t), c)
    }

    pub fn derivative_on_piece(&self, k: usize, x: f64) -> f64 {
        let (t, c) = self.piece_terms(k, x);
        dot(basis_d1(t), c) / self.spacing
    }

    pub fn second_derivative_on_piece(&self, k: usize, x: f64) -> f64 {
        let (t, c) = self.piece_terms(k, x);
        dot(basis_d2(t), c) / (self.spacing * self.spacing)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.value(x))
    }

    pub fn eval_derivative(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.derivative(x))
    }

    /// Coefficients `c` with `F(1 - u) = c0 + c1 u + c2 u^2 + c3 u^3`, exact on
    /// the last piece `0 <= u <= spacing`.
    pub fn end_taylor(&self) -> [f64; 4] {
        let k = self.n_pieces() - 1;
        let h = self.spacing;
        let c = [self.values[k], self.values[k + 1], h * self.slopes[k], h * self.slopes[k + 1]];
        let d1 = dot([0.0, 0.0, 0.0, 1.0], c);
        let d2 = dot([6.0, -6.0, 2.0, 4.0], c);
        let d3 = dot([12.0, -12.0, 6.0, 6.0], c);
        [c[1], -d1 / h, d2 / (2.0 * h * h), -d3 / (6.0 * h * h * h)]
    }

    fn value(&self, x: f64) -> f64 {
        self.eval_on_piece(self.piece_of(x), x)
    }

    fn derivative(&self, x: f64) -> f64 {
        self.derivative_on_piece(self.piece_of(x), x)
    }

    fn second_derivative(&self, x: f64) -> f64 {
        self.second_derivative_on_piece(self.piece_of(x), x)
    }
}

#[inline]
fn dot(a: [f64; 4], b: [f64; 4]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(format!("normalized time {x} outside [0, 1]")))
    }
}

/// A schedule function of normalized time.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    Constant(f64),
    /// `start + (end - start) x`, evaluated exactly.
    Linear { start: f64, end: f64 },
    Hermite(PiecewiseHermite),
}

impl Schedule {
    pub fn eval(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.value(x))
    }

    pub fn eval_derivative(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.derivative(x))
    }

    /// Unchecked evaluation; callers guarantee `x` is in `[0, 1]`.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Schedule::Constant(c) => *c,
            Schedule::Linear { start, end } => start + (end - start) * x,
            Schedule::Hermite(h) => h.value(x),
        }
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Schedule::Constant(_) => 0.0,
            Schedule::Linear { start, end } => end - start,
            Schedule::Hermite(h) => h.derivative(x),
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        match self {
            Schedule::Constant(_) | Schedule::Linear { .. } => 0.0,
            Schedule::Hermite(h) => h.second_derivative(x),
        }
    }

    /// Cubic expansion about `x = 1` in `u = 1 - x` and the width of the
    /// interval `[1 - width, 1]` on which it is exact.
    pub fn end_taylor(&self) -> ([f64; 4], f64) {
        match self {
            Schedule::Constant(c) => ([*c, 0.0, 0.0, 0.0], 1.0),
            Schedule::Linear { start, end } => ([*end, start - end, 0.0, 0.0], 1.0),
            Schedule::Hermite(h) => (h.end_taylor(), h.spacing),
        }
    }

    /// True when the function is zero on all of `[0, 1]`.
    pub fn is_identically_zero(&self) -> bool {
        match self {
            Schedule::Constant(c) => *c == 0.0,
            Schedule::Linear { start, end } => *start == 0.0 && *end == 0.0,
            Schedule::Hermite(h) => h.values.iter().all(|&v| v == 0.0),
        }
    }
}

/// The three schedule functions `(F1, F2, F3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleSet {
    pub initial: Schedule,
    pub final_: Schedule,
    pub auxiliary: Schedule,
}

impl ScheduleSet {
    /// Builds the three interpolants from a flat parameter vector split as
    /// `(counts[0], counts[1], counts[2])`. A zero count for the auxiliary
    /// schedule yields the constant zero function.
    pub fn from_params(
        params: &[f64],
        counts: [usize; 3],
        bounds: [(f64, f64); 3],
        endpoints: EndpointSlopes,
    ) -> Result<Self> {
        let total: usize = counts.iter().sum();
        if params.len() != total {
            return Err(Error::Validation(format!(
                "expected {total} schedule parameters, got {}",
                params.len()
            )));
        }
        let roles = [ScheduleRole::Initial, ScheduleRole::Final, ScheduleRole::Auxiliary];
        let mut offset = 0;
        let mut built = Vec::with_capacity(3);
        for ((&count, &(lo, hi)), role) in counts.iter().zip(&bounds).zip(roles) {
            let slice = &params[offset..offset + count];
            let schedule = if role == ScheduleRole::Auxiliary && count == 0 {
                Schedule::Constant(0.0)
            } else {
                let spec = ScheduleSpec::new(role, slice.to_vec()).with_bounds(lo, hi);
                Schedule::Hermite(PiecewiseHermite::build(&spec, endpoints).map_err(|e| match e {
                    Error::ParamOutOfBounds { index, value, lo, hi } => {
                        Error::ParamOutOfBounds { index: index + offset, value, lo, hi }
                    }
                    other => other,
                })?)
            };
            built.push(schedule);
            offset += count;
        }
        let auxiliary = built.pop().unwrap();
        let final_ = built.pop().unwrap();
        let initial = built.pop().unwrap();
        Ok(Self { initial, final_, auxiliary })
    }

    /// Values `(F1, F2, F3)` at normalized time `s`.
    #[inline]
    pub fn weights(&self, s: f64) -> [f64; 3] {
        [self.initial.value(s), self.final_.value(s), self.auxiliary.value(s)]
    }

    pub fn derivatives(&self, s: f64) -> [f64; 3] {
        [self.initial.derivative(s), self.final_.derivative(s), self.auxiliary.derivative(s)]
    }
}

/// Linear ramp `F1 = 1 - x`, `F2 = x`, `F3 = 0`.
pub fn ramp_profile() -> ScheduleSet {
    ScheduleSet {
        initial: Schedule::Linear { start: 1.0, end: 0.0 },
        final_: Schedule::Linear { start: 0.0, end: 1.0 },
        auxiliary: Schedule::Constant(0.0),
    }
}

/// Interior knot values that reproduce the linear ramp: `n` parameters for
/// each of F1 and F2, then `n_aux` zeros for F3.
pub fn ramp_equivalent_params(n: usize, n_aux: usize) -> Vec<f64> {
    let spacing = 1.0 / (n + 1) as f64;
    let mut params: Vec<f64> = (1..=n).map(|k| 1.0 - k as f64 * spacing).collect();
    params.extend((1..=n).map(|k| k as f64 * spacing));
    params.extend(std::iter::repeat_n(0.0, n_aux));
    params
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn end_expansion_matches_last_piece() {
        for endpoints in [EndpointSlopes::Flat, EndpointSlopes::Secant] {
            let spec = ScheduleSpec::new(ScheduleRole::Initial, vec![0.8, 0.35]);
            let f = Schedule::Hermite(PiecewiseHermite::build(&spec, endpoints).unwrap());
            let (c, width) = f.end_taylor();
            for k in 0..=10 {
                let u = width * k as f64 / 10.0;
                let poly = c[0] + u * (c[1] + u * (c[2] + u * c[3]));
                assert_abs_diff_eq!(poly, f.value(1.0 - u), epsilon = 1e-13);
            }
        }
        let (c, _) = Schedule::Linear { start: 1.0, end: 0.0 }.end_taylor();
        assert_eq!(c, [0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn basis_endpoints_and_midpoint() {
        assert_eq!(hermite_basis(0.0).unwrap(), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(hermite_basis(1.0).unwrap(), [0.0, 1.0, 0.0, 0.0]);
        let h = hermite_basis(0.5).unwrap();
        for (got, want) in h.iter().zip([0.5, 0.5, 0.125, -0.125]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn basis_rejects_out_of_range() {
        assert!(matches!(hermite_basis(-0.1), Err(Error::Domain(_))));
        assert!(matches!(hermite_basis(1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn slopes_follow_harmonic_rule() {
        let m = monotone_slopes(&[0.0, 0.8, 0.5], 0.5, EndpointSlopes::Flat).unwrap();
        assert_eq!(m[1], 0.0);
        let m = monotone_slopes(&[0.0, 0.3, 0.9], 1.0 / 3.0, EndpointSlopes::Flat).unwrap();
        assert_abs_diff_eq!(m[1], 1.2, epsilon = 1e-12);
        assert_eq!((m[0], m[2]), (0.0, 0.0));
        let m = monotone_slopes(&[0.5, 0.5, 0.5], 0.5, EndpointSlopes::Flat).unwrap();
        assert!(m.iter().all(|&v| v == 0.0));
        assert!(matches!(monotone_slopes(&[1.0], 1.0, EndpointSlopes::Flat), Err(Error::Domain(_))));
    }

    #[test]
    fn secant_endpoints() {
        let m = monotone_slopes(&[0.0, 0.3, 0.9], 1.0 / 3.0, EndpointSlopes::Secant).unwrap();
        assert_abs_diff_eq!(m[0], 0.9, epsilon = 1e-12);
        assert_abs_diff_eq!(m[2], 1.8, epsilon = 1e-12);
    }

    #[test]
    fn no_interior_params_gives_smoothstep() {
        let spec = ScheduleSpec::new(ScheduleRole::Initial, vec![]);
        let f = PiecewiseHermite::build(&spec, EndpointSlopes::Flat).unwrap();
        assert_eq!(f.eval(0.0).unwrap(), 1.0);
        assert_eq!(f.eval(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(f.eval(0.5).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn pass_through_interior_knots() {
        let spec = ScheduleSpec::new(ScheduleRole::Auxiliary, vec![0.4, 0.4]);
        let f = PiecewiseHermite::build(&spec, EndpointSlopes::Flat).unwrap();
        assert_abs_diff_eq!(f.eval(1.0 / 3.0).unwrap(), 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(f.eval(2.0 / 3.0).unwrap(), 0.4, epsilon = 1e-15);
    }

    #[test]
    fn sign_change_data_stays_in_range() {
        let spec = ScheduleSpec::new(ScheduleRole::Initial, vec![0.9, 0.1]);
        let f = PiecewiseHermite::build(&spec, EndpointSlopes::Flat).unwrap();
        for i in 0..=1000 {
            let v = f.eval(i as f64 / 1000.0).unwrap();
            assert!((0.0..=1.0).contains(&v), "F({}) = {v}", i as f64 / 1000.0);
        }
    }

    #[test]
    fn ramp_equivalent_knots() {
        let spec = ScheduleSpec::new(ScheduleRole::Initial, vec![2.0 / 3.0, 1.0 / 3.0]);
        let f = PiecewiseHermite::build(&spec, EndpointSlopes::Flat).unwrap();
        for (x, want) in [(0.0, 1.0), (1.0 / 3.0, 2.0 / 3.0), (2.0 / 3.0, 1.0 / 3.0), (1.0, 0.0)] {
            assert_abs_diff_eq!(f.eval(x).unwrap(), want, epsilon = 1e-15);
        }
        // with secant endpoints the interpolant is exactly the line
        let g = PiecewiseHermite::build(&spec, EndpointSlopes::Secant).unwrap();
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            assert_abs_diff_eq!(g.eval(x).unwrap(), 1.0 - x, epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_aux_is_zero_everywhere() {
        let spec = ScheduleSpec::new(ScheduleRole::Auxiliary, vec![0.0, 0.0]);
        let f = PiecewiseHermite::build(&spec, EndpointSlopes::Flat).unwrap();
        for i in 0..=50 {
            assert_eq!(f.eval(i as f64 / 50.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn derivative_at_knots_equals_slope() {
        let spec = ScheduleSpec::new(ScheduleRole::Final, vec![0.2, 0.7]);
        let f = PiecewiseHermite::build(&spec, EndpointSlopes::Flat).unwrap();
        for k in 1..f.n_pieces() {
            let x = f.knots()[k];
            assert_abs_diff_eq!(f.derivative_on_piece(k - 1, x), f.slopes()[k], epsilon = 1e-12);
            assert_abs_diff_eq!(f.derivative_on_piece(k, x), f.slopes()[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_data_has_zero_derivative() {
        let spec = ScheduleSpec { boundary: (0.3, 0.3), params: vec![0.3, 0.3], bounds: (0.0, 1.0) };
        let f = PiecewiseHermite::build(&spec, EndpointSlopes::Flat).unwrap();
        for i in 0..=20 {
            assert_eq!(f.eval_derivative(i as f64 / 20.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn out_of_bounds_parameter_is_reported() {
        let spec = ScheduleSpec::new(ScheduleRole::Final, vec![0.5, 1.2]);
        match PiecewiseHermite::build(&spec, EndpointSlopes::Flat) {
            Err(Error::ParamOutOfBounds { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
        let err = ScheduleSet::from_params(
            &[0.5, 0.5, 0.5, 0.5, 0.5, -0.1],
            [2, 2, 2],
            [(0.0, 1.0); 3],
            EndpointSlopes::Flat,
        )
        .unwrap_err();
        assert!(matches!(err, Error::ParamOutOfBounds { index: 5, .. }));
    }

    #[test]
    fn eval_rejects_outside_unit_interval() {
        let spec = ScheduleSpec::new(ScheduleRole::Final, vec![0.5]);
        let f = PiecewiseHermite::build(&spec, EndpointSlopes::Flat).unwrap();
        assert!(f.eval(1.0 + 1e-9).is_err());
        assert!(f.eval_derivative(-1e-9).is_err());
        assert!(ramp_profile().initial.eval(2.0).is_err());
    }

    #[test]
    fn ramp_values() {
        let r = ramp_profile();
        assert_eq!(r.weights(0.25), [0.75, 0.25, 0.0]);
        assert_eq!(r.weights(1.0), [0.0, 1.0, 0.0]);
        for i in 0..=64 {
            let w = r.weights(i as f64 / 64.0);
            assert_eq!(w[0] + w[1], 1.0);
        }
    }

    #[test]
    fn ramp_equivalent_param_layout() {
        let p = ramp_equivalent_params(2, 2);
        assert_eq!(p.len(), 6);
        assert_abs_diff_eq!(p[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p[3], 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(&p[4..], &[0.0, 0.0]);
    }
}

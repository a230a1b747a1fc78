//! Box-constrained Nelder–Mead with dimension-adaptive coefficients.
//!
//! Every trial point is clipped into the box before it is evaluated, so the
//! simplex never leaves the feasible region. Non-finite costs rank last.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub max_evals: usize,
    /// Initial edge length as a fraction of each coordinate's box width.
    pub init_scale: f64,
    pub xtol: f64,
    pub ftol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { max_evals: 400, init_scale: 0.25, xtol: 1e-7, ftol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    /// Cost of every evaluation in order.
    pub history: Vec<f64>,
    pub converged: bool,
}

fn clip(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, &l), &h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(l, h);
    }
}

fn rank(f: f64) -> f64 {
    if f.is_nan() {
        f64::INFINITY
    } else {
        f
    }
}

struct Counter<'a, F> {
    f: &'a mut F,
    history: Vec<f64>,
}

impl<F: FnMut(&[f64]) -> f64> Counter<'_, F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        let v = rank((self.f)(x));
        self.history.push(v);
        v
    }
}

/// Minimizes `f` over the box `[lo, hi]` starting from `x0` (clipped).
pub fn minimize_box<F>(mut f: F, x0: &[f64], lo: &[f64], hi: &[f64], opts: SimplexOptions) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert!(lo.len() == n && hi.len() == n, "bounds must match the dimension");
    let mut counter = Counter { f: &mut f, history: Vec::with_capacity(opts.max_evals) };
    let mut start = x0.to_vec();
    clip(&mut start, lo, hi);
    if n == 0 {
        let v = counter.eval(&start);
        return SimplexResult { x: start, f: v, evals: 1, history: counter.history, converged: true };
    }

    let nf = n as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);

    let mut verts: Vec<Vec<f64>> = vec![start.clone()];
    for i in 0..n {
        let mut v = start.clone();
        let step = opts.init_scale * (hi[i] - lo[i]);
        v[i] = if v[i] + step <= hi[i] { v[i] + step } else { v[i] - step };
        clip(&mut v, lo, hi);
        verts.push(v);
    }
    let mut fs: Vec<f64> = Vec::with_capacity(n + 1);
    for v in &verts {
        if counter.history.len() >= opts.max_evals {
            break;
        }
        fs.push(counter.eval(v));
    }
    verts.truncate(fs.len());
    let mut converged = false;

    while verts.len() == n + 1 && counter.history.len() < opts.max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]));
        verts = order.iter().map(|&k| verts[k].clone()).collect();
        fs = order.iter().map(|&k| fs[k]).collect();

        let fspread = (fs[n] - fs[0]).abs();
        let xspread = verts[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&verts[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if fspread <= opts.ftol && xspread <= opts.xtol {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n).map(|i| verts[..n].iter().map(|v| v[i]).sum::<f64>() / nf).collect();
        let toward = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid.iter().zip(&verts[n]).map(|(c, w)| c + t * (c - w)).collect();
            clip(&mut p, lo, hi);
            p
        };

        let xr = toward(alpha);
        let fr = counter.eval(&xr);
        if fr < fs[0] {
            if counter.history.len() >= opts.max_evals {
                verts[n] = xr;
                fs[n] = fr;
                break;
            }
            let xe = toward(alpha * beta);
            let fe = counter.eval(&xe);
            if fe < fr {
                verts[n] = xe;
                fs[n] = fe;
            } else {
                verts[n] = xr;
                fs[n] = fr;
            }
            continue;
        }
        if fr < fs[n - 1] {
            verts[n] = xr;
            fs[n] = fr;
            continue;
        }
        if counter.history.len() >= opts.max_evals {
            break;
        }
        let (xc, fc, accept) = if fr < fs[n] {
            let xc = toward(alpha * gamma);
            let fc = counter.eval(&xc);
            let ok = fc <= fr;
            (xc, fc, ok)
        } else {
            let xc = toward(-gamma);
            let fc = counter.eval(&xc);
            let ok = fc < fs[n];
            (xc, fc, ok)
        };
        if accept {
            verts[n] = xc;
            fs[n] = fc;
            continue;
        }
        // shrink toward the best vertex
        for k in 1..=n {
            if counter.history.len() >= opts.max_evals {
                verts.truncate(k);
                fs.truncate(k);
                break;
            }
            let mut p: Vec<f64> = verts[0].iter().zip(&verts[k]).map(|(b, v)| b + delta * (v - b)).collect();
            clip(&mut p, lo, hi);
            fs[k] = counter.eval(&p);
            verts[k] = p;
        }
    }

    let best = (0..fs.len()).min_by(|&a, &b| fs[a].total_cmp(&fs[b])).unwrap_or(0);
    let evals = counter.history.len();
    SimplexResult { x: verts[best].clone(), f: fs[best], evals, history: counter.history, converged }
}

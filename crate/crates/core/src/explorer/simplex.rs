//! Box-constrained Nelder–Mead minimizer.
//!
//! Trial points are projected onto the box. Non-finite objective values are
//! treated as `+∞`, which keeps the simplex out of infeasible regions
//! without a penalty term.

#[derive(Clone, Copy, Debug)]
pub struct SimplexOptions {
    pub max_evals: usize,
    /// Stop once the simplex values agree to this relative tolerance.
    pub ftol: f64,
    /// ... and its vertices agree to this fraction of each box side.
    pub xtol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_evals: 4000,
            ftol: 1e-10,
            xtol: 1e-10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Runs Nelder–Mead, restarting with a fresh simplex at each converged
/// point until a restart no longer improves. Restarts undo the collapse of
/// the simplex onto a box face.
pub fn minimize<F>(mut f: F, x0: &[f64], step: &[f64], lower: &[f64], upper: &[f64], opts: SimplexOptions) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let mut total = 0;
    let mut best = run_once(&mut f, x0, step, lower, upper, opts);
    total += best.evals;
    while best.converged && total < opts.max_evals {
        let rest = SimplexOptions {
            max_evals: opts.max_evals - total,
            ..opts
        };
        let next = run_once(&mut f, &best.x, step, lower, upper, rest);
        total += next.evals;
        let improved = next.fx < best.fx - opts.ftol * best.fx.abs();
        if next.fx <= best.fx {
            best = SimplexResult { evals: 0, ..next };
        }
        if !improved {
            break;
        }
    }
    best.evals = total;
    best
}

fn run_once<F>(f: &mut F, x0: &[f64], step: &[f64], lower: &[f64], upper: &[f64], opts: SimplexOptions) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let project = |x: &mut Vec<f64>| {
        for k in 0..n {
            x[k] = x[k].clamp(lower[k], upper[k]);
        }
    };
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut start = x0.to_vec();
    project(&mut start);
    pts.push(start.clone());
    for k in 0..n {
        let mut p = start.clone();
        p[k] += step[k];
        if p[k] > upper[k] {
            p[k] = start[k] - step[k];
        }
        project(&mut p);
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p, &mut evals)).collect();

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut converged = false;
    while evals < opts.max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let (best, worst) = (vals[0], vals[n]);
        let spread = (0..n)
            .map(|k| {
                let side = (upper[k] - lower[k]).max(f64::MIN_POSITIVE);
                pts.iter().map(|p| (p[k] - pts[0][k]).abs()).fold(0.0, f64::max) / side
            })
            .fold(0.0, f64::max);
        if best.is_finite() && worst.is_finite() && worst - best <= opts.ftol * best.abs().max(1e-300) && spread <= opts.xtol
        {
            converged = true;
            break;
        }
        if spread == 0.0 {
            converged = best.is_finite();
            break;
        }

        let centroid: Vec<f64> = (0..n).map(|k| pts[..n].iter().map(|p| p[k]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| {
            let mut x: Vec<f64> = (0..n).map(|k| centroid[k] + t * (pts[n][k] - centroid[k])).collect();
            project(&mut x);
            x
        };

        let xr = along(-alpha);
        let fr = eval(&xr, &mut evals);
        if fr < vals[0] {
            let xe = along(-alpha * gamma);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let x = along(-alpha * rho);
            let v = eval(&x, &mut evals);
            (x, v)
        } else {
            let x = along(rho);
            let v = eval(&x, &mut evals);
            (x, v)
        };
        if fc < vals[n].min(fr) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        for i in 1..=n {
            let mut x: Vec<f64> = (0..n).map(|k| pts[0][k] + sigma * (pts[i][k] - pts[0][k])).collect();
            project(&mut x);
            vals[i] = eval(&x, &mut evals);
            pts[i] = x;
        }
    }

    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    SimplexResult {
        x: pts[best].clone(),
        fx: vals[best],
        evals,
        converged,
    }
}

/// Golden-section maximization of a unimodal `f` on `[a, b]`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, xtol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > xtol * (1.0 + c.abs()) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

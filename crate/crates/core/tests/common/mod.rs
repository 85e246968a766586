#![allow(dead_code)]

use excd::graphs::Dag;
use excd::oracle::FiniteMixtureModel;

/// Gamma(k / 2) for a positive integer `k`, from the factorial and
/// half-integer closed forms.
pub fn gamma_half(k: usize) -> f64 {
    let mut g = if k % 2 == 0 { 1.0 } else { std::f64::consts::PI.sqrt() };
    // Gamma(s + 1) = s Gamma(s), starting at Gamma(1) or Gamma(1/2)
    let mut s = if k % 2 == 0 { 1.0 } else { 0.5 };
    while s < k as f64 / 2.0 - 1e-9 {
        g *= s;
        s += 1.0;
    }
    g
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    // split into panels so narrow peaks are not missed by the first estimate
    let panels = 64;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + k as f64 * h;
            let hi = lo + h;
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            adaptive(f, lo, hi, fa, fm, fb, simpson(lo, hi, fa, fm, fb), tol / panels as f64, 40)
        })
        .sum()
}

/// Chi-square upper tail by direct integration of the density, after the
/// substitution `t = u^2` which removes the singularity at zero for one
/// degree of freedom.
pub fn chi2_sf_quadrature(x: f64, dof: usize) -> f64 {
    let k = dof as f64;
    let log_norm = (k / 2.0) * 2f64.ln() + gamma_half(dof).ln();
    let density = move |u: f64| {
        if u <= 0.0 {
            return if dof == 1 { 2.0 * (-log_norm).exp() } else { 0.0 };
        }
        2.0 * ((k - 1.0) * u.ln() - 0.5 * u * u - log_norm).exp()
    };
    let lo = x.sqrt();
    let hi = lo.max(k.sqrt()) + 40.0;
    integrate(&density, lo, hi, 1e-14)
}

/// Exact joint of a two-node `X -> Y` model over two samples by plain
/// summation, indexed `(x1, x2, y1, y2)` with `y2` least significant.
pub fn naive_joint_two_by_two(model: &FiniteMixtureModel) -> Vec<f64> {
    assert_eq!(model.graph, Dag::new(2, [(0, 1)]).unwrap());
    assert_eq!(model.samples_per_env, 2);
    let mut out = vec![0.0; 16];
    for ax in &model.atoms[0] {
        for ay in &model.atoms[1] {
            for x1 in 0..2 {
                for x2 in 0..2 {
                    for y1 in 0..2 {
                        for y2 in 0..2 {
                            let p = ax.weight
                                * ay.weight
                                * ax.cpt.prob(x1, 0)
                                * ax.cpt.prob(x2, 0)
                                * ay.cpt.prob(y1, x1)
                                * ay.cpt.prob(y2, x2);
                            out[((x1 * 2 + x2) * 2 + y1) * 2 + y2] += p;
                        }
                    }
                }
            }
        }
    }
    out
}

/// The 50-point grid on which the chi-square tail is checked.
pub fn chi2_grid() -> Vec<(f64, usize)> {
    let dofs = [1, 2, 3, 4, 5, 8, 13, 21, 40, 100];
    let scales = [0.05, 0.5, 1.0, 2.0, 4.0];
    dofs.iter()
        .flat_map(|&k| scales.iter().map(move |&s| (s * k as f64 + 0.01, k)))
        .collect()
}

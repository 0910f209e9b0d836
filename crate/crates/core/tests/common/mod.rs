//! Independent reference implementations and instance generators shared by
//! the property tests and the acceptance run.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use varfdr::clime::{clime_column, estimate_precision, symmetrize_min_magnitude};
use varfdr::debias::{debias_parts, Hypotheses, SeVariant, TestField};
use varfdr::lasso::{fit_row, gram, kkt_violation, LassoSettings};
use varfdr::testing::{asymptotic_threshold, search_cap, ThresholdRule};

pub type Check = Result<(), String>;

/// Generator stream independent of the library's own seeding.
pub fn gen(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed ^ 0x5eed_0f_7e57)
}

pub fn normal_matrix(rng: &mut impl Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// Well-conditioned SPD matrix `A A'/p + I/2`.
pub fn random_spd(rng: &mut impl Rng, p: usize) -> DMatrix<f64> {
    let a = normal_matrix(rng, p, p);
    let s = &a * a.transpose() / p as f64 + DMatrix::identity(p, p) * 0.5;
    (&s + s.transpose()) * 0.5
}

/// Design with correlated rows and a sparse-signal response.
pub fn regression_instance(rng: &mut impl Rng, p: usize, t: usize) -> (DMatrix<f64>, DVector<f64>) {
    let mix = normal_matrix(rng, p, p) * 0.4 + DMatrix::identity(p, p);
    let x = mix * normal_matrix(rng, p, t);
    let beta = DVector::from_fn(p, |_, _| if rng.random::<f64>() < 0.4 { rng.random_range(-1.0..1.0) } else { 0.0 });
    let noise = DVector::from_fn(t, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = x.transpose() * beta + noise;
    (x, y)
}

// Lasso -------------------------------------------------------------------

/// Exact lasso minimizer in Gram form by enumerating sign patterns; needs a
/// positive definite `G` and small `p`.
pub fn lasso_enumeration(g: &DMatrix<f64>, c: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let p = c.len();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for code in 0..3usize.pow(p as u32) {
        let mut signs = vec![0i8; p];
        let mut k = code;
        for s in signs.iter_mut() {
            *s = (k % 3) as i8 - 1;
            k /= 3;
        }
        let support: Vec<usize> = (0..p).filter(|&j| signs[j] != 0).collect();
        let mut beta = DVector::zeros(p);
        if !support.is_empty() {
            let gs = DMatrix::from_fn(support.len(), support.len(), |a, b| g[(support[a], support[b])]);
            let rhs = DVector::from_fn(support.len(), |a, _| c[support[a]] - lambda * signs[support[a]] as f64);
            let Some(sol) = gs.lu().solve(&rhs) else { continue };
            if support.iter().zip(sol.iter()).any(|(&j, &v)| v * signs[j] as f64 <= 0.0) {
                continue;
            }
            for (&j, &v) in support.iter().zip(sol.iter()) {
                beta[j] = v;
            }
        }
        let grad = c - g * &beta;
        let ok = (0..p).all(|j| signs[j] != 0 || grad[j].abs() <= lambda * (1.0 + 1e-9));
        if ok {
            let obj = -beta.dot(c) + 0.5 * (g * &beta).dot(&beta) + lambda * beta.abs().sum();
            if best.as_ref().is_none_or(|(o, _)| obj < *o) {
                best = Some((obj, beta));
            }
        }
    }
    best.expect("a positive definite Gram matrix has a lasso solution").1
}

pub fn lambda_max(x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    (x * y / x.ncols() as f64).amax()
}

/// KKT certificate of the coordinate-descent solution, recomputed here.
pub fn check_lasso_kkt(seed: u64, p: usize, t: usize, frac: f64) -> Check {
    let mut rng = gen(seed);
    let (x, y) = regression_instance(&mut rng, p, t);
    let lambda = frac * lambda_max(&x, &y);
    let fit = fit_row(&x, &y, lambda, &LassoSettings::default()).map_err(|e| e.to_string())?;
    let g = gram(&x);
    let c = &x * &y / t as f64;
    let v = kkt_violation(&g, &c, &fit.coefficients, lambda);
    if v > 1e-6 * lambda.max(1e-12) {
        return Err(format!("KKT violation {v:e} at lambda {lambda}"));
    }
    Ok(())
}

pub fn check_lasso_oracle(seed: u64, p: usize, t: usize, frac: f64) -> Check {
    let mut rng = gen(seed);
    let (x, y) = regression_instance(&mut rng, p, t);
    let lambda = frac * lambda_max(&x, &y);
    let fit = fit_row(&x, &y, lambda, &LassoSettings::default()).map_err(|e| e.to_string())?;
    let g = gram(&x);
    let c = &x * &y / t as f64;
    let exact = lasso_enumeration(&g, &c, lambda);
    let err = (&fit.coefficients - &exact).amax();
    if err > 1e-5 {
        return Err(format!("coordinate descent {} vs enumeration {}, error {err:e}", fit.coefficients, exact));
    }
    Ok(())
}

// CLIME -------------------------------------------------------------------

/// Smallest `|theta|_1` with `|Sigma theta - e_j|_inf <= lambda1`, by
/// enumerating vertices of the orthant-refined feasible polytope.
pub fn clime_vertex_value(sigma: &DMatrix<f64>, j: usize, lambda1: f64) -> Option<f64> {
    let p = sigma.nrows();
    // hyperplanes a' theta = b
    let mut planes: Vec<(DVector<f64>, f64)> = Vec::new();
    for k in 0..p {
        let row = sigma.row(k).transpose();
        let e = if k == j { 1.0 } else { 0.0 };
        planes.push((row.clone(), e + lambda1));
        planes.push((row, e - lambda1));
        let mut unit = DVector::zeros(p);
        unit[k] = 1.0;
        planes.push((unit, 0.0));
    }
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..p).collect();
    loop {
        let a = DMatrix::from_fn(p, p, |r, c| planes[idx[r]].0[c]);
        let b = DVector::from_fn(p, |r, _| planes[idx[r]].1);
        if a.determinant().abs() > 1e-12 {
            if let Some(theta) = a.lu().solve(&b) {
                let mut e = DVector::zeros(p);
                e[j] = 1.0;
                if (sigma * &theta - e).amax() <= lambda1 + 1e-9 {
                    let v = theta.abs().sum();
                    best = Some(best.map_or(v, |b: f64| b.min(v)));
                }
            }
        }
        // next combination of p indices out of planes.len()
        let n = planes.len();
        let mut i = p;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < n - p + i {
                break;
            }
        }
        idx[i] += 1;
        for k in i + 1..p {
            idx[k] = idx[k - 1] + 1;
        }
        if idx[p - 1] >= n {
            return best;
        }
    }
}

pub fn check_clime_certificate(seed: u64, p: usize, lambda1: f64) -> Check {
    let mut rng = gen(seed);
    let sigma = random_spd(&mut rng, p);
    let est = estimate_precision(&sigma, lambda1, 0.0).map_err(|e| e.to_string())?;
    let resid = (&sigma * &est.theta - DMatrix::<f64>::identity(p, p)).amax();
    if resid > lambda1 + 1e-6 {
        return Err(format!("constraint residual {resid} exceeds lambda1 {lambda1}"));
    }
    if est.omega != est.omega.transpose() {
        return Err("omega is not exactly symmetric".into());
    }
    if est.omega != symmetrize_min_magnitude(&est.theta) {
        return Err("omega is not the min-magnitude symmetrization of theta".into());
    }
    for i in 0..p {
        for k in 0..p {
            let smaller = est.theta[(i, k)].abs().min(est.theta[(k, i)].abs());
            if est.omega[(i, k)].abs() != smaller {
                return Err(format!("omega[{i},{k}] is not the smaller-magnitude entry"));
            }
        }
    }
    Ok(())
}

pub fn check_clime_inverse(seed: u64, p: usize) -> Check {
    let mut rng = gen(seed);
    let sigma = random_spd(&mut rng, p);
    let est = estimate_precision(&sigma, 1e-8, 0.0).map_err(|e| e.to_string())?;
    let inv = sigma.clone().try_inverse().ok_or("singular test matrix")?;
    let err = (&est.omega - &inv).amax();
    if err > 1e-4 {
        return Err(format!("CLIME at 1e-8 differs from the inverse by {err:e}"));
    }
    Ok(())
}

pub fn check_clime_vertex(seed: u64, p: usize, lambda1: f64) -> Check {
    let mut rng = gen(seed);
    let sigma = random_spd(&mut rng, p);
    for j in 0..p {
        let theta = clime_column(&sigma, j, lambda1).map_err(|e| e.to_string())?;
        let oracle = clime_vertex_value(&sigma, j, lambda1).ok_or("oracle found no vertex")?;
        let got = theta.abs().sum();
        if (got - oracle).abs() > 1e-6 * (1.0 + oracle) {
            return Err(format!("column {j}: l1 norm {got} vs vertex optimum {oracle}"));
        }
    }
    Ok(())
}

// Debiasing ----------------------------------------------------------------

/// With the exact inverse as `Omega`, debiasing any starting point yields OLS.
pub fn check_debias_ols(seed: u64, n: usize, p: usize, t: usize) -> Check {
    let mut rng = gen(seed);
    let x = normal_matrix(&mut rng, p, t);
    let y = normal_matrix(&mut rng, n, t);
    let start = normal_matrix(&mut rng, n, p) * 0.5;
    let sigma = gram(&x);
    let omega = sigma.try_inverse().ok_or("singular design")?;
    let resid = &y - &start * &x;
    let est = debias_parts(&start, &resid, &x, &omega).map_err(|e| e.to_string())?;
    let xxt = &x * x.transpose();
    let ols = (&xxt)
        .clone()
        .cholesky()
        .ok_or("design Gram not positive definite")?
        .solve(&(&x * y.transpose()))
        .transpose();
    let scale = 1.0 + ols.amax();
    let err = (&est.coefficients - &ols).amax();
    if err > 1e-8 * scale {
        return Err(format!("debiased estimate differs from OLS by {err:e}"));
    }
    Ok(())
}

// Thresholds ----------------------------------------------------------------

pub fn field(values: Vec<f64>) -> TestField {
    let h = values.len();
    TestField {
        standard_errors: vec![1.0; h],
        t_values: values,
        se_variant: SeVariant::Sandwich,
        hypotheses: Hypotheses::all(1, h),
    }
}

/// Null draws with a block of signals of either sign.
pub fn random_field(rng: &mut impl Rng, h: usize, signal_frac: f64, strength: f64) -> TestField {
    let values = (0..h)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            if rng.random::<f64>() < signal_frac {
                let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                z + s * strength
            } else {
                z
            }
        })
        .collect();
    field(values)
}

/// `2|H| P(Z > t) / max(1, #{|T| >= t})` from statrs and a linear scan.
pub fn oracle_ratio(values: &[f64], t: f64) -> f64 {
    let tail = Normal::standard().sf(t);
    let count = values.iter().filter(|v| v.abs() >= t).count().max(1);
    2.0 * values.len() as f64 * tail / count as f64
}

/// First point of the grid `0, step, 2 step, ...` below the search cap with
/// ratio at most `q`.
pub fn grid_threshold(values: &[f64], q: f64, cap: f64, step: f64) -> Option<f64> {
    let n = (cap / step).floor() as usize;
    (0..=n).map(|k| k as f64 * step).find(|&t| t <= cap && oracle_ratio(values, t) <= q)
}

pub fn independent_cap(h: usize, a: f64) -> f64 {
    let l = (h as f64).ln();
    (2.0 * l - a * l.ln()).sqrt()
}

/// Infimum of the admissible set below `cap`, solved piece by piece: between
/// consecutive `|T|` the count is constant and the ratio is decreasing.
pub fn exact_infimum(values: &[f64], q: f64, cap: f64) -> Option<f64> {
    let h = values.len() as f64;
    let mut abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let mut lo = 0.0;
    for (k, &hi) in abs.iter().chain([&f64::INFINITY]).enumerate() {
        let count = (abs.len() - k).max(1) as f64;
        let p = q * count / (2.0 * h);
        let root = if p >= 0.5 { 0.0 } else { Normal::standard().inverse_cdf(1.0 - p) };
        let t = root.max(lo);
        if t > cap {
            return None;
        }
        if t <= hi {
            return Some(t);
        }
        lo = hi;
    }
    None
}

pub fn check_threshold_grid(seed: u64, h: usize, q: f64, step: f64) -> Check {
    let mut rng = gen(seed);
    let signal_frac = rng.random_range(0.0..0.2);
    let strength = rng.random_range(2.0..6.0);
    let f = random_field(&mut rng, h, signal_frac, strength);
    let r = asymptotic_threshold(&f, q, 3.1).map_err(|e| e.to_string())?;
    let cap = independent_cap(h, 3.1);
    let feasible = |t: f64| oracle_ratio(&f.t_values, t) <= q * (1.0 + 1e-12);
    match (grid_threshold(&f.t_values, q, cap, step), r.rule) {
        (_, ThresholdRule::FdrSearch) if r.t0 <= cap => {
            if !feasible(r.t0) {
                return Err(format!("ratio at t0 {} exceeds q", r.t0));
            }
            // infimum: nothing admissible just below
            if r.t0 > 0.0 && feasible(r.t0 - 1e-9) {
                return Err(format!("t0 {} is not the infimum", r.t0));
            }
            if let Some(g) = grid_threshold(&f.t_values, q, cap, step) {
                if r.t0 > g + 1e-12 {
                    return Err(format!("t0 {} above first admissible grid point {g}", r.t0));
                }
            }
            if let Some(x) = exact_infimum(&f.t_values, q, cap) {
                if (x - r.t0).abs() > 1e-8 {
                    return Err(format!("t0 {} vs piecewise infimum {x}", r.t0));
                }
            }
        }
        (None, ThresholdRule::FwerFallback) => {
            let want = (2.0 * (h as f64).ln()).sqrt();
            if r.t0 != want {
                return Err(format!("fallback {} vs {want}", r.t0));
            }
        }
        (g, rule) => return Err(format!("grid {g:?} but rule {rule:?} at {}", r.t0)),
    }
    if (r.search_cap - search_cap(h, 3.1).unwrap()).abs() > 0.0 || (r.search_cap - cap).abs() > 1e-12 {
        return Err(format!("search cap {} vs {cap}", r.search_cap));
    }
    Ok(())
}

// Stationary covariance -------------------------------------------------------

/// Solves `Gamma = A Gamma A' + S` through `(I - A (x) A) vec Gamma = vec S`.
pub fn lyapunov(a: &DMatrix<f64>, s: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let kron = a.kronecker(a);
    let lhs = DMatrix::<f64>::identity(n * n, n * n) - kron;
    let rhs = DVector::from_column_slice(s.as_slice());
    let v = lhs.lu().solve(&rhs).expect("stable companion matrix");
    DMatrix::from_column_slice(n, n, v.as_slice())
}

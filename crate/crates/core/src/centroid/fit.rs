//! Least-squares fit of (attention filter, Data-Drivenness, default).
//!
//! Parameters are the seven unnormalized weights `h` plus the intercepts
//! `c = (1 - V) * default`, nine in total. `V = sum(h)` and `w = h / V`.
//!
//! The fit alternates two closed-form linear solves from a uniform start:
//!
//! * step A freezes `w` and solves `(V, c)`;
//! * step B freezes each trial's weight denominator `D_t = sum_i w(level_i)`,
//!   which makes the response linear in `h` and `c`, solves by ridge OLS and
//!   renormalizes.
//!
//! Step B's fixed point is not quite the least-squares optimum (the frozen
//! denominator drops a term from the gradient), so the alternation is
//! followed by damped Gauss-Newton on the full model. The covariance comes
//! from the Gauss-Newton normal matrix at the optimum.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};
use std::borrow::Borrow;

use crate::error::{Error, Result};
use crate::geometry::{Point, N_LEVELS};
use crate::response::TrialResponse;
use crate::stimgen::{Channel, StimulusSpec};

use super::filter::AttentionFilter;
use super::ResponseModel;

/// Six weight degrees of freedom, V, and the two default coordinates.
pub const N_PARAMS: usize = 9;

type Mat9 = SMatrix<f64, N_PARAMS, N_PARAMS>;
type Vec9 = SVector<f64, N_PARAMS>;
type Mat3 = SMatrix<f64, 3, 3>;
type Vec3 = SVector<f64, 3>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Relative SSE change that counts as converged.
    pub tolerance: f64,
    pub ridge: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-9,
            ridge: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidFit {
    pub filter: AttentionFilter,
    pub data_drivenness: f64,
    pub default_point: Point,
    /// False when V = 1 leaves the default location unconstrained.
    pub default_identified: bool,
    /// Unnormalized weight estimates; `sum(h) = V`.
    pub unnormalized: [f64; N_LEVELS],
    /// Covariance of `unnormalized`.
    pub covariance: [[f64; N_LEVELS]; N_LEVELS],
    pub sigma_hat: f64,
    pub ss_residual: f64,
    pub df: usize,
    pub n_trials: usize,
    pub converged: bool,
    pub iterations: usize,
    /// V left [0, 1] and was clamped.
    pub v_clamped: bool,
    pub negative_weights: bool,
    pub channel: Option<Channel>,
}

impl ResponseModel for CentroidFit {
    fn filter(&self) -> &AttentionFilter {
        &self.filter
    }
    fn data_drivenness(&self) -> f64 {
        self.data_drivenness
    }
    fn default_point(&self) -> Point {
        self.default_point
    }
}

/// `sqrt(ss_residual / df)`.
pub fn sigma_hat(ss_residual: f64, df: i64) -> Result<f64> {
    if df < 1 {
        return Err(Error::InvalidDf(df));
    }
    if ss_residual.is_nan() || ss_residual < 0.0 {
        return Err(Error::InvalidParams(format!("ss_residual {ss_residual} < 0")));
    }
    Ok((ss_residual / df as f64).sqrt())
}

/// Per-trial sufficient statistics: per-level coordinate sums and counts.
#[derive(Debug, Clone)]
pub(crate) struct TrialDesign {
    sx: [f64; N_LEVELS],
    sy: [f64; N_LEVELS],
    n: [f64; N_LEVELS],
    r: Point,
}

impl TrialDesign {
    fn new(stimulus: &StimulusSpec, response: Point) -> Self {
        let mut d = TrialDesign {
            sx: [0.0; N_LEVELS],
            sy: [0.0; N_LEVELS],
            n: [0.0; N_LEVELS],
            r: response,
        };
        for (p, l) in stimulus.marks() {
            let l = l as usize;
            d.sx[l] += p.x;
            d.sy[l] += p.y;
            d.n[l] += 1.0;
        }
        d
    }

    fn denominator(&self, h: &[f64]) -> f64 {
        self.n.iter().zip(h).map(|(n, h)| n * h).sum()
    }

    /// Weighted mean under (possibly unnormalized) weights `h`.
    fn mu(&self, h: &[f64]) -> Result<(f64, f64, f64)> {
        let b = self.denominator(h);
        let scale: f64 = self.n.iter().zip(h).map(|(n, h)| (n * h).abs()).sum();
        if b.abs() <= 1e-12 * scale || b == 0.0 {
            return Err(Error::ZeroDenominator);
        }
        let ax: f64 = self.sx.iter().zip(h).map(|(s, h)| s * h).sum();
        let ay: f64 = self.sy.iter().zip(h).map(|(s, h)| s * h).sum();
        Ok((ax / b, ay / b, b))
    }
}

#[derive(Debug, Clone, Copy)]
struct Params {
    h: [f64; N_LEVELS],
    c: [f64; 2],
}

impl Params {
    fn v(&self) -> f64 {
        self.h.iter().sum()
    }

    fn to_vec(self) -> Vec9 {
        let mut v = Vec9::zeros();
        for i in 0..N_LEVELS {
            v[i] = self.h[i];
        }
        v[7] = self.c[0];
        v[8] = self.c[1];
        v
    }

    fn from_vec(v: &Vec9) -> Self {
        let mut h = [0.0; N_LEVELS];
        h.copy_from_slice(&v.as_slice()[..N_LEVELS]);
        Params { h, c: [v[7], v[8]] }
    }
}

fn sse(design: &[TrialDesign], p: &Params) -> Result<f64> {
    let v = p.v();
    let mut total = 0.0;
    for t in design {
        let (mx, my, _) = t.mu(&p.h)?;
        total += (t.r.x - v * mx - p.c[0]).powi(2) + (t.r.y - v * my - p.c[1]).powi(2);
    }
    Ok(total)
}

/// Step A: with `w` fixed, least squares for `(V, c_x, c_y)`.
fn solve_gain_and_intercept(design: &[TrialDesign], w: &[f64; N_LEVELS]) -> Result<(f64, [f64; 2])> {
    let mut ata = Mat3::zeros();
    let mut atb = Vec3::zeros();
    for t in design {
        let (mx, my, _) = t.mu(w)?;
        for (row, r) in [(Vec3::new(mx, 1.0, 0.0), t.r.x), (Vec3::new(my, 0.0, 1.0), t.r.y)] {
            ata += row * row.transpose();
            atb += row * r;
        }
    }
    let sol = ata.lu().solve(&atb).ok_or(Error::Singular)?;
    Ok((sol[0], [sol[1], sol[2]]))
}

/// Step B: with per-trial denominators frozen at `w`, ridge OLS for `(h, c)`.
fn solve_frozen_denominator(design: &[TrialDesign], w: &[f64; N_LEVELS], ridge: f64) -> Result<Params> {
    let mut ata = Mat9::zeros();
    let mut atb = Vec9::zeros();
    for t in design {
        let d = t.denominator(w);
        if d == 0.0 {
            return Err(Error::ZeroDenominator);
        }
        let mut rx = Vec9::zeros();
        let mut ry = Vec9::zeros();
        for l in 0..N_LEVELS {
            rx[l] = t.sx[l] / d;
            ry[l] = t.sy[l] / d;
        }
        rx[7] = 1.0;
        ry[8] = 1.0;
        ata += rx * rx.transpose() + ry * ry.transpose();
        atb += rx * t.r.x + ry * t.r.y;
    }
    solve_ridge(ata, atb, ridge).map(|v| Params::from_vec(&v))
}

fn solve_ridge(mut ata: Mat9, atb: Vec9, ridge: f64) -> Result<Vec9> {
    let scale = ata.diagonal().max().max(1.0);
    for i in 0..N_PARAMS {
        ata[(i, i)] += ridge * scale;
    }
    if let Some(ch) = ata.cholesky() {
        return Ok(ch.solve(&atb));
    }
    ata.lu().solve(&atb).ok_or(Error::Singular)
}

/// Gauss-Newton normal equations `J'J` and `J'r` at `p`.
fn normal_equations(design: &[TrialDesign], p: &Params) -> Result<(Mat9, Vec9, f64)> {
    let v = p.v();
    let mut jtj = Mat9::zeros();
    let mut jtr = Vec9::zeros();
    let mut total = 0.0;
    for t in design {
        let (mx, my, b) = t.mu(&p.h)?;
        // d f_x / d h_k = mu_x + V (S_xk - mu_x n_k) / B
        let mut jx = Vec9::zeros();
        let mut jy = Vec9::zeros();
        for k in 0..N_LEVELS {
            jx[k] = mx + v * (t.sx[k] - mx * t.n[k]) / b;
            jy[k] = my + v * (t.sy[k] - my * t.n[k]) / b;
        }
        jx[7] = 1.0;
        jy[8] = 1.0;
        let ex = t.r.x - v * mx - p.c[0];
        let ey = t.r.y - v * my - p.c[1];
        total += ex * ex + ey * ey;
        jtj += jx * jx.transpose() + jy * jy.transpose();
        jtr += jx * ex + jy * ey;
    }
    Ok((jtj, jtr, total))
}

fn normalized_weights(h: &[f64; N_LEVELS]) -> Option<[f64; N_LEVELS]> {
    let v: f64 = h.iter().sum();
    if !v.is_finite() || v.abs() < 1e-12 {
        return None;
    }
    Some(h.map(|x| x / v))
}

fn converged(prev: f64, next: f64, tolerance: f64, n_obs: usize) -> bool {
    let floor = 1e-20 * n_obs as f64;
    next <= floor || (prev - next).abs() <= tolerance * next.max(floor)
}

/// Fit the centroid model to `(stimulus, response)` pairs.
pub fn fit<S, R>(trials: &[(S, R)], options: &FitOptions) -> Result<CentroidFit>
where
    S: Borrow<StimulusSpec>,
    R: Borrow<TrialResponse>,
{
    let observations = 2 * trials.len();
    if observations <= N_PARAMS {
        return Err(Error::Underdetermined {
            observations,
            parameters: N_PARAMS,
        });
    }
    let mut design = Vec::with_capacity(trials.len());
    for (s, r) in trials {
        let (s, r) = (s.borrow(), r.borrow());
        if !r.click.is_finite() {
            return Err(Error::NonFinite("response"));
        }
        design.push(TrialDesign::new(s, r.click));
    }
    let channel = trials.first().map(|(s, _)| s.borrow().channel());
    let channel = channel.filter(|c| trials.iter().all(|(s, _)| s.borrow().channel() == *c));
    fit_design(&design, options, channel)
}

pub(crate) fn fit_design(
    design: &[TrialDesign],
    options: &FitOptions,
    channel: Option<Channel>,
) -> Result<CentroidFit> {
    let n_obs = 2 * design.len();
    let mut iterations = 0;

    // Alternating closed-form solves.
    let mut w = [1.0 / N_LEVELS as f64; N_LEVELS];
    let (v0, c0) = solve_gain_and_intercept(design, &w)?;
    let mut params = Params { h: w.map(|x| x * v0), c: c0 };
    let mut current = sse(design, &params)?;
    let mut als_converged = false;
    while iterations < options.max_iterations {
        iterations += 1;
        let b = solve_frozen_denominator(design, &w, options.ridge)?;
        let Some(next_w) = normalized_weights(&b.h) else { break };
        let (v, c) = solve_gain_and_intercept(design, &next_w)?;
        let candidate = Params { h: next_w.map(|x| x * v), c };
        let next = sse(design, &candidate)?;
        w = next_w;
        params = candidate;
        let done = converged(current, next, options.tolerance, n_obs);
        current = next;
        if done {
            als_converged = true;
            break;
        }
    }

    // Damped Gauss-Newton to the least-squares optimum.
    let mut lambda = 1e-6;
    let mut gn_converged = false;
    let mut gn_steps = 0;
    while gn_steps < options.max_iterations {
        gn_steps += 1;
        let (jtj, jtr, base) = normal_equations(design, &params)?;
        current = base;
        if base <= 1e-20 * n_obs as f64 {
            gn_converged = true;
            break;
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut damped = jtj;
            for i in 0..N_PARAMS {
                damped[(i, i)] += lambda * jtj[(i, i)].max(options.ridge);
            }
            let Some(step) = damped.cholesky().map(|c| c.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let candidate = Params::from_vec(&(params.to_vec() + step));
            match sse(design, &candidate) {
                Ok(next) if next <= base => {
                    params = candidate;
                    current = next;
                    lambda = (lambda / 10.0).max(1e-12);
                    improved = true;
                    if converged(base, next, options.tolerance, n_obs) {
                        gn_converged = true;
                    }
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if !improved || gn_converged {
            gn_converged = gn_converged || !improved;
            break;
        }
    }
    iterations += gn_steps;

    let df = n_obs - N_PARAMS;
    let (jtj, _, _) = normal_equations(design, &params)?;
    let mut v = params.v();
    let weights = normalized_weights(&params.h).ok_or(Error::Singular)?;
    let filter = AttentionFilter::normalized(weights)?;

    let v_clamped = !(0.0..=1.0).contains(&v);
    if v_clamped {
        v = v.clamp(0.0, 1.0);
        params.h = weights.map(|x| x * v);
        let mut sums = [0.0; 2];
        for t in design {
            let (mx, my, _) = t.mu(&weights)?;
            sums[0] += t.r.x - v * mx;
            sums[1] += t.r.y - v * my;
        }
        params.c = sums.map(|s| s / design.len() as f64);
        current = sse(design, &params)?;
    }

    let sigma = sigma_hat(current, df as i64)?;
    let cov_full = invert_normal(jtj, options.ridge)? * (sigma * sigma);
    let mut covariance = [[0.0; N_LEVELS]; N_LEVELS];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = 0.5 * (cov_full[(i, j)] + cov_full[(j, i)]);
        }
    }

    let default_identified = (1.0 - v).abs() > 1e-9;
    let default_point = if default_identified {
        Point::new(params.c[0] / (1.0 - v), params.c[1] / (1.0 - v))
    } else {
        Point::center()
    };

    Ok(CentroidFit {
        negative_weights: filter.has_negative(),
        filter,
        data_drivenness: v,
        default_point,
        default_identified,
        unnormalized: params.h,
        covariance,
        sigma_hat: sigma,
        ss_residual: current,
        df,
        n_trials: design.len(),
        converged: als_converged || gn_converged,
        iterations,
        v_clamped,
        channel,
    })
}

fn invert_normal(jtj: Mat9, ridge: f64) -> Result<Mat9> {
    if let Some(inv) = jtj.try_inverse() {
        if inv.iter().all(|x| x.is_finite()) {
            return Ok(inv);
        }
    }
    let mut reg = jtj;
    let scale = jtj.diagonal().max().max(1.0);
    for i in 0..N_PARAMS {
        reg[(i, i)] += ridge * scale;
    }
    reg.try_inverse().ok_or(Error::Singular)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::observer::{weighted_average_observer, WeightedObserverParams};
    use crate::rng::derive_seed;
    use crate::stimgen::{PoolConfig, StimulusPool};
    use std::sync::OnceLock;

    pub(crate) fn pool() -> &'static StimulusPool {
        static POOL: OnceLock<StimulusPool> = OnceLock::new();
        POOL.get_or_init(|| {
            let cfg = PoolConfig { per_cell: 6, controls: 6, training_per_cell: 0 };
            StimulusPool::generate(77, Channel::Size, cfg).unwrap()
        })
    }

    fn simulate(params: &WeightedObserverParams) -> Vec<(StimulusSpec, TrialResponse)> {
        pool()
            .stimuli()
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut p = params.clone();
                p.seed = derive_seed(params.seed, i as u64);
                (s.clone(), weighted_average_observer(s, &p))
            })
            .collect()
    }

    #[test]
    fn sigma_hat_identity() {
        assert_eq!(sigma_hat(0.0, 100).unwrap(), 0.0);
        assert_eq!(sigma_hat(400.0, 100).unwrap(), 2.0);
        assert!(matches!(sigma_hat(1.0, 0), Err(Error::InvalidDf(0))));
    }

    #[test]
    fn underdetermined() {
        let trials: Vec<_> = simulate(&WeightedObserverParams::ideal()).into_iter().take(3).collect();
        assert!(matches!(
            fit(&trials, &FitOptions::default()),
            Err(Error::Underdetermined { observations: 6, parameters: 9 })
        ));
    }

    #[test]
    fn noise_free_uniform_is_exact() {
        let trials = simulate(&WeightedObserverParams::ideal());
        let f = fit(&trials, &FitOptions::default()).unwrap();
        assert!(f.sigma_hat < 1e-6, "sigma_hat {}", f.sigma_hat);
        for w in f.filter.weights() {
            assert!((w - 1.0 / 7.0).abs() < 1e-6);
        }
        assert!((f.data_drivenness - 1.0).abs() < 1e-6);
        assert!(f.converged);
    }

    #[test]
    fn noise_free_general_recovery() {
        let truth = AttentionFilter::new([0.05, 0.08, 0.1, 0.14, 0.18, 0.2, 0.25]).unwrap();
        let params = WeightedObserverParams {
            filter: truth.clone(),
            data_drivenness: 0.8,
            default_point: Point::new(240.0, 260.0),
            noise_sd: 0.0,
            seed: 1,
        };
        let f = fit(&simulate(&params), &FitOptions::default()).unwrap();
        for (a, b) in f.filter.weights().iter().zip(truth.weights()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        assert!((f.data_drivenness - 0.8).abs() < 1e-6);
        assert!(f.default_point.distance(&Point::new(240.0, 260.0)) < 1e-4);
        assert!(!f.v_clamped);
    }
}

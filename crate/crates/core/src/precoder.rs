//! Weighted-MMSE precoding under a total power budget.
//!
//! The receiver scalar uses the full received power (own signal included) in
//! its denominator, making it the exact MMSE receiver and giving
//! `e_k = 1 / (1 + SINR_k)` at the optimum. The precoder block is solved in
//! closed form, `w_k = ϖ_k u_k (A + μI)^-1 h_k^H`, with μ found by bisection
//! on the eigen-decomposed power curve.

use crate::channel::ChannelRealization;
use crate::numerics::{hermitian_eig, HermitianMatrix};
use crate::phase_sdr::PhaseConfig;
use crate::{CMatrix, Complex64, Error, Result};

/// BS precoding matrix `W` (M x K) and its power budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    pub w: CMatrix,
    pub power: f64,
}

impl Precoder {
    pub fn total_power(&self) -> f64 {
        self.w.norm_squared()
    }

    pub fn is_feasible(&self) -> bool {
        self.total_power() <= self.power * (1.0 + 1e-9) + 1e-300
    }

    /// Matched-filter directions `h_k^H / |h_k|` at equal power `P/K`.
    pub fn matched_filter(h_eff: &CMatrix, power: f64) -> Self {
        let (k, m) = h_eff.shape();
        let mut w = CMatrix::zeros(m, k);
        let per_user = (power / k as f64).sqrt();
        for user in 0..k {
            let row = h_eff.row(user);
            let norm = row.norm();
            if norm > 0.0 {
                let col = row.adjoint() * Complex64::from(per_user / norm);
                w.set_column(user, &col);
            }
        }
        Self { w, power }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmseState {
    pub u: Vec<Complex64>,
    pub weights: Vec<f64>,
    pub mse: Vec<f64>,
}

/// Rows `h_eff,k = g_k^H diag(theta) H`, a K x M matrix.
pub fn effective_channels(channels: &ChannelRealization, theta: &PhaseConfig) -> Result<CMatrix> {
    let n = channels.elements();
    if theta.len() != n || channels.g.nrows() != n {
        return Err(Error::Dimension(format!(
            "{} phases for {n} elements",
            theta.len()
        )));
    }
    // G^H diag(theta) H
    let mut scaled = channels.h.clone();
    for (i, t) in theta.values().iter().enumerate() {
        scaled.row_mut(i).iter_mut().for_each(|z| *z *= *t);
    }
    Ok(channels.g.adjoint() * scaled)
}

/// `|h_k w_l|^2` for all k, l.
fn gains(h: &CMatrix, w: &CMatrix) -> nalgebra::DMatrix<f64> {
    (h * w).map(|z| z.norm_sqr())
}

/// SINRs from effective channels, interference summed over `l != k`.
pub fn sinr_effective(h: &CMatrix, w: &CMatrix, noise: f64) -> Vec<f64> {
    let g = gains(h, w);
    (0..h.nrows())
        .map(|k| {
            let signal = g[(k, k)];
            let interference: f64 = (0..w.ncols()).filter(|&l| l != k).map(|l| g[(k, l)]).sum();
            signal / (interference + noise)
        })
        .collect()
}

pub fn sum_rate_effective(h: &CMatrix, w: &CMatrix, noise: f64) -> f64 {
    sinr_effective(h, w, noise).into_iter().map(|s| (1.0 + s).log2()).sum()
}

/// `e_k = 1 - 2 Re{u_k* h_k w_k} + |u_k|^2 q_k`, with `q_k` the total
/// received power plus noise.
pub fn mse(h_k: &CMatrix, w_k: &CMatrix, u_k: Complex64, q_k: f64) -> f64 {
    let hw = (h_k * w_k)[(0, 0)];
    1.0 - 2.0 * (u_k.conj() * hw).re + u_k.norm_sqr() * q_k
}

fn received_power(h: &CMatrix, w: &CMatrix, noise: f64) -> Vec<f64> {
    let g = gains(h, w);
    (0..h.nrows()).map(|k| g.row(k).sum() + noise).collect()
}

pub fn update_receiver_scalars(h: &CMatrix, w: &Precoder, noise: f64) -> Vec<Complex64> {
    let hw = h * &w.w;
    let q = received_power(h, &w.w, noise);
    (0..h.nrows()).map(|k| hw[(k, k)] / q[k]).collect()
}

/// MSE of every user for given receivers.
pub fn mse_all(h: &CMatrix, w: &Precoder, u: &[Complex64], noise: f64) -> Vec<f64> {
    let hw = h * &w.w;
    let q = received_power(h, &w.w, noise);
    (0..h.nrows())
        .map(|k| 1.0 - 2.0 * (u[k].conj() * hw[(k, k)]).re + u[k].norm_sqr() * q[k])
        .collect()
}

pub fn update_weights(e: &[f64]) -> Result<Vec<f64>> {
    e.iter()
        .map(|&v| {
            if v > 0.0 && v.is_finite() {
                Ok(1.0 / v)
            } else {
                Err(Error::Contract(format!("MSE must be positive, got {v}")))
            }
        })
        .collect()
}

/// `Σ_k (ϖ_k e_k - ln ϖ_k)`.
pub fn wmmse_objective(h: &CMatrix, w: &Precoder, u: &[Complex64], weights: &[f64], noise: f64) -> f64 {
    mse_all(h, w, u, noise)
        .iter()
        .zip(weights)
        .map(|(e, om)| om * e - om.ln())
        .sum()
}

/// Objective of the precoder block: `Σ_k ϖ_k e_k(W)` for fixed `u, ϖ`.
pub fn precoder_block_objective(h: &CMatrix, w: &CMatrix, u: &[Complex64], weights: &[f64], noise: f64) -> f64 {
    let p = Precoder { w: w.clone(), power: f64::INFINITY };
    mse_all(h, &p, u, noise).iter().zip(weights).map(|(e, om)| om * e).sum()
}

const BISECTION_ITERS: usize = 200;

pub fn update_precoder(h: &CMatrix, u: &[Complex64], weights: &[f64], power: f64) -> Result<Precoder> {
    let (k, m) = h.shape();
    if u.len() != k || weights.len() != k {
        return Err(Error::Dimension(format!("{} receivers, {} weights for {k} users", u.len(), weights.len())));
    }
    if let Some(bad) = weights.iter().find(|&&om| !(om > 0.0)) {
        return Err(Error::Contract(format!("weights must be positive, got {bad}")));
    }
    let mut a = CMatrix::zeros(m, m);
    let mut b = CMatrix::zeros(m, k);
    for j in 0..k {
        let hj = h.row(j);
        a += hj.adjoint() * hj * Complex64::from(weights[j] * u[j].norm_sqr());
        b.set_column(j, &(hj.adjoint() * (u[j] * weights[j])));
    }
    if power <= 0.0 || b.norm() == 0.0 {
        return Ok(Precoder { w: CMatrix::zeros(m, k), power: power.max(0.0) });
    }
    let eig = hermitian_eig(&HermitianMatrix::from_hermitian_part(&a))?;
    let lmax = eig.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let floor = 1e-12 * lmax.max(f64::MIN_POSITIVE);
    let lambdas: Vec<f64> = eig.eigenvalues.iter().map(|&l| if l > floor { l } else { 0.0 }).collect();
    let c = eig.eigenvectors.adjoint() * &b;
    let row_energy: Vec<f64> = (0..m).map(|i| c.row(i).norm_squared()).collect();
    let power_at = |mu: f64| -> f64 {
        lambdas
            .iter()
            .zip(&row_energy)
            .map(|(&l, &e)| if l + mu > 0.0 { e / (l + mu).powi(2) } else { 0.0 })
            .sum()
    };

    let mu = if power_at(0.0) <= power {
        0.0
    } else {
        let mut lo = 0.0;
        let mut hi = (b.norm_squared() / power).sqrt();
        for _ in 0..BISECTION_ITERS {
            let mid = 0.5 * (lo + hi);
            if power_at(mid) > power {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        if !(power_at(hi) <= power * (1.0 + 1e-9)) {
            return Err(Error::SolverFailure {
                message: format!("power bisection did not converge (mu in [{lo}, {hi}])"),
                best: None,
            });
        }
        hi
    };
    let mut scaled = c;
    for (i, &l) in lambdas.iter().enumerate() {
        let s = if l + mu > 0.0 { 1.0 / (l + mu) } else { 0.0 };
        scaled.row_mut(i).scale_mut(s);
    }
    let w = &eig.eigenvectors * scaled;
    Ok(Precoder { w, power })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WmmseOptions {
    pub max_iters: usize,
    /// Stop when the sum-rate changes by less than this, bits/s/Hz.
    pub tolerance: f64,
}

impl Default for WmmseOptions {
    fn default() -> Self {
        Self { max_iters: 100, tolerance: 1e-4 }
    }
}

#[derive(Debug, Clone)]
pub struct WmmseOutcome {
    pub precoder: Precoder,
    /// Sum-rate at the initial precoder followed by one entry per cycle.
    pub history: Vec<f64>,
    /// Surrogate `Σ(ϖ e - ln ϖ)` after each of the u, ϖ, W half-steps.
    pub surrogate: Vec<f64>,
    pub iterations: usize,
    pub state: Option<MmseState>,
}

/// `u -> ϖ -> W` cycles on fixed effective channels.
pub fn wmmse_effective(
    h: &CMatrix,
    power: f64,
    noise: f64,
    init: &Precoder,
    opts: &WmmseOptions,
) -> Result<WmmseOutcome> {
    if init.w.nrows() != h.ncols() || init.w.ncols() != h.nrows() {
        return Err(Error::Dimension(format!(
            "precoder {}x{} for effective channel {}x{}",
            init.w.nrows(),
            init.w.ncols(),
            h.nrows(),
            h.ncols()
        )));
    }
    let mut w = Precoder { w: init.w.clone(), power };
    let mut history = vec![sum_rate_effective(h, &w.w, noise)];
    let mut surrogate = Vec::new();
    let mut state = None;
    let mut weights = vec![1.0; h.nrows()];
    let mut iterations = 0;
    for _ in 0..opts.max_iters {
        iterations += 1;
        let u = update_receiver_scalars(h, &w, noise);
        surrogate.push(wmmse_objective(h, &w, &u, &weights, noise));
        let e = mse_all(h, &w, &u, noise);
        weights = update_weights(&e)?;
        surrogate.push(wmmse_objective(h, &w, &u, &weights, noise));
        w = update_precoder(h, &u, &weights, power)?;
        surrogate.push(wmmse_objective(h, &w, &u, &weights, noise));
        let rate = sum_rate_effective(h, &w.w, noise);
        let prev = *history.last().unwrap();
        history.push(rate);
        state = Some(MmseState { u, weights: weights.clone(), mse: e });
        if (rate - prev).abs() < opts.tolerance {
            break;
        }
    }
    Ok(WmmseOutcome { precoder: w, history, surrogate, iterations, state })
}

pub fn wmmse_loop(
    channels: &ChannelRealization,
    theta: &PhaseConfig,
    power: f64,
    noise: f64,
    init: &Precoder,
    opts: &WmmseOptions,
) -> Result<WmmseOutcome> {
    let h = effective_channels(channels, theta)?;
    wmmse_effective(&h, power, noise, init, opts)
}

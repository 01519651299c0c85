//! Multi-user phase-shift optimization by semidefinite relaxation.
//!
//! The lifted variable is `V = θ θ^H` relaxed to `{V ⪰ 0, diag(V) = 1}` (the
//! elliptope). The sum-rate is written exactly as
//! `Σ_k log2 f_k(V) - log2 g_k(V)` with `f_k = tr((A_k + B_k)V) + σ²` and
//! `g_k = tr(B_k V) + σ²`; each outer iteration linearizes the convex
//! `-log2 g_k` terms at the previous iterate and maximizes the resulting
//! concave minorant over the elliptope. The subproblem solver works on a
//! low-rank factor with unit-norm rows and certifies optimality with a
//! duality gap; Dykstra projections onto the elliptope are used to bring
//! warm starts into the feasible set.

use std::f64::consts::LN_2;

use crate::channel::ChannelRealization;
use crate::numerics::{hermitian_eig, HermitianMatrix};
use crate::precoder::{effective_channels, sum_rate_effective, Precoder};
use crate::{CMatrix, CVector, Complex64, Error, Result};

const MODULUS_TOL: f64 = 1e-9;
const START_MIX: f64 = 0.1;

/// Unit-modulus reflection coefficients `θ_1..θ_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfig(CVector);

impl PhaseConfig {
    pub fn new(theta: CVector) -> Result<Self> {
        if let Some((i, z)) = theta.iter().enumerate().find(|(_, z)| (z.norm() - 1.0).abs() > MODULUS_TOL) {
            return Err(Error::Contract(format!("phase {i} has modulus {}", z.norm())));
        }
        Ok(Self(theta))
    }

    pub fn ones(n: usize) -> Self {
        Self(CVector::from_element(n, Complex64::new(1.0, 0.0)))
    }

    pub fn from_angles(phi: &[f64]) -> Self {
        Self(CVector::from_iterator(phi.len(), phi.iter().map(|&p| Complex64::from_polar(1.0, p))))
    }

    /// Entry-wise projection `v_n / |v_n|`, with 1 for vanishing entries.
    pub fn project(v: &CVector) -> Self {
        Self(v.map(|z| if z.norm() < 1e-12 { Complex64::new(1.0, 0.0) } else { z / z.norm() }))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &CVector {
        &self.0
    }

    /// Multiplies every coefficient by `e^{j phi}`.
    pub fn rotated(&self, phi: f64) -> Self {
        Self(&self.0 * Complex64::from_polar(1.0, phi))
    }

    pub fn lifted(&self) -> CMatrix {
        &self.0 * self.0.adjoint()
    }
}

/// `v^H A_k v` is user k's signal power, `v^H B_k v` its interference.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForms {
    pub a: CMatrix,
    pub b: CMatrix,
    pub noise: f64,
}

/// Real `tr(M V)` for Hermitian `M, V`.
pub fn trace_product(m: &CMatrix, v: &CMatrix) -> f64 {
    m.dotc(v).re
}

/// Forms of user `k`: with `c_j = g_k ⊙ conj(H w_j)`, `A_k = c_k c_k^H` and
/// `B_k = Σ_{j≠k} c_j c_j^H`, so that `θ^H A_k θ = |g_k^H diag(θ) H w_k|²`.
pub fn build_quadratics(g_k: &CVector, h: &CMatrix, w: &Precoder, k: usize, noise: f64) -> Result<QuadraticForms> {
    let n = h.nrows();
    if g_k.len() != n || w.w.nrows() != h.ncols() || k >= w.w.ncols() {
        return Err(Error::Dimension(format!(
            "g {} / H {}x{} / W {}x{} / user {k}",
            g_k.len(),
            h.nrows(),
            h.ncols(),
            w.w.nrows(),
            w.w.ncols()
        )));
    }
    let hw = h * &w.w;
    let mut a = CMatrix::zeros(n, n);
    let mut b = CMatrix::zeros(n, n);
    for j in 0..w.w.ncols() {
        let c = g_k.component_mul(&hw.column(j).map(|z| z.conj()));
        let outer = &c * c.adjoint();
        if j == k {
            a = outer;
        } else {
            b += outer;
        }
    }
    Ok(QuadraticForms { a, b, noise })
}

pub fn build_all_quadratics(channels: &ChannelRealization, w: &Precoder, noise: f64) -> Result<Vec<QuadraticForms>> {
    (0..channels.users())
        .map(|k| build_quadratics(&channels.g_user(k), &channels.h, w, k, noise))
        .collect()
}

/// Exact sum-rate expressed on the lifted variable.
pub fn relaxed_sum_rate(forms: &[QuadraticForms], v: &CMatrix) -> f64 {
    forms
        .iter()
        .map(|q| {
            let s = trace_product(&q.a, v);
            let i = trace_product(&q.b, v);
            ((s + i + q.noise) / (i + q.noise)).log2()
        })
        .sum()
}

/// Smooth concave function over Hermitian matrices. `gradient` is taken with
/// respect to the real inner product `Re tr(X^H Y)`.
pub trait ConcaveObjective {
    fn value(&self, v: &CMatrix) -> f64;
    fn gradient(&self, v: &CMatrix) -> CMatrix;
}

/// `tr(C V)` for Hermitian `C`.
#[derive(Debug, Clone)]
pub struct LinearObjective(pub CMatrix);

impl ConcaveObjective for LinearObjective {
    fn value(&self, v: &CMatrix) -> f64 {
        trace_product(&self.0, v)
    }

    fn gradient(&self, _v: &CMatrix) -> CMatrix {
        self.0.clone()
    }
}

/// `Σ_k log2(tr(M_k V) + σ²) + tr(C V) + constant`.
#[derive(Debug, Clone)]
pub struct Surrogate {
    pub signal_plus_interference: Vec<CMatrix>,
    pub noise: Vec<f64>,
    pub linear: CMatrix,
    pub constant: f64,
}

impl ConcaveObjective for Surrogate {
    fn value(&self, v: &CMatrix) -> f64 {
        let logs: f64 = self
            .signal_plus_interference
            .iter()
            .zip(&self.noise)
            .map(|(m, s2)| (trace_product(m, v) + s2).max(f64::MIN_POSITIVE).log2())
            .sum();
        logs + trace_product(&self.linear, v) + self.constant
    }

    fn gradient(&self, v: &CMatrix) -> CMatrix {
        let mut g = self.linear.clone();
        for (m, s2) in self.signal_plus_interference.iter().zip(&self.noise) {
            let f = (trace_product(m, v) + s2).max(f64::MIN_POSITIVE);
            g += m * Complex64::from(1.0 / (f * LN_2));
        }
        g
    }
}

/// Concave minorant of [`relaxed_sum_rate`] that touches it at `v_prev`.
pub fn sca_surrogate(forms: &[QuadraticForms], v_prev: &CMatrix) -> Surrogate {
    let n = v_prev.nrows();
    let mut linear = CMatrix::zeros(n, n);
    let mut constant = 0.0;
    let mut mats = Vec::with_capacity(forms.len());
    let mut noise = Vec::with_capacity(forms.len());
    for q in forms {
        let interference = trace_product(&q.b, v_prev);
        let g_prev = interference + q.noise;
        linear -= &q.b * Complex64::from(1.0 / (g_prev * LN_2));
        constant += -g_prev.log2() + interference / (g_prev * LN_2);
        mats.push(&q.a + &q.b);
        noise.push(q.noise);
    }
    Surrogate {
        signal_plus_interference: mats,
        noise,
        linear,
        constant,
    }
}

/// Solution of the relaxed problem.
#[derive(Debug, Clone)]
pub struct LiftedSolution {
    pub v: CMatrix,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpOptions {
    pub max_iters: usize,
    /// Stop once the optimality gap bound falls below this, relative to the
    /// objective magnitude.
    pub gap_tolerance: f64,
    pub projection_iters: usize,
    /// Dykstra stops when the PSD and unit-diagonal iterates agree to this,
    /// relative to the norm of the point being projected.
    pub projection_tolerance: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            gap_tolerance: 1e-6,
            projection_iters: 500,
            projection_tolerance: 1e-10,
        }
    }
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::from(0.5)
}

fn project_psd(m: &CMatrix) -> Result<CMatrix> {
    let eig = hermitian_eig(&HermitianMatrix::from_hermitian_part(m))?;
    Ok(hermitian_part(&eig.reconstruct_with(|l| l.max(0.0))))
}

fn set_unit_diagonal(m: &mut CMatrix) {
    for i in 0..m.nrows() {
        m[(i, i)] = Complex64::new(1.0, 0.0);
    }
}

/// Rescales a PSD matrix to unit diagonal, which keeps it PSD.
fn normalize_diagonal(x: &CMatrix) -> Option<CMatrix> {
    let n = x.nrows();
    let d: Vec<f64> = (0..n).map(|i| x[(i, i)].re).collect();
    if d.iter().any(|&v| !(v > 1e-12)) {
        return None;
    }
    let mut out = CMatrix::from_fn(n, n, |i, j| x[(i, j)] / (d[i] * d[j]).sqrt());
    set_unit_diagonal(&mut out);
    Some(hermitian_part(&out))
}

/// Nearest point of the elliptope `{V ⪰ 0, diag(V) = 1}` to `y`.
///
/// Dykstra iterations (correction carried on the cone only, the diagonal set
/// being affine), finished by a diagonal rescaling of the PSD iterate so the
/// result is exactly feasible.
pub fn project_elliptope(y: &CMatrix, opts: &SdpOptions) -> Result<CMatrix> {
    let n = y.nrows();
    let mut target = hermitian_part(y);
    set_unit_diagonal(&mut target);
    let tol = opts.projection_tolerance * target.norm().max(1.0);
    let mut correction = CMatrix::zeros(n, n);
    let mut psd = project_psd(&target)?;
    for _ in 0..opts.projection_iters {
        let r = &target - &correction;
        psd = project_psd(&r)?;
        correction = &psd - &r;
        let mut next = psd.clone();
        set_unit_diagonal(&mut next);
        let gap = (&next - &psd).norm();
        target = next;
        if gap <= tol {
            break;
        }
    }
    Ok(normalize_diagonal(&psd).unwrap_or(target))
}

/// Upper bound on `max_W f(W) - f(V)` over the elliptope from concavity:
/// with `y_i = Re (G V)_ii`, `f(W) <= f(V) + <G, W - V> <= f(V) + n λmax(G - diag y)^+`.
pub fn duality_gap(gradient: &CMatrix, v: &CMatrix) -> Result<f64> {
    let n = v.nrows();
    let gv = gradient * v;
    let mut s = gradient.clone();
    for i in 0..n {
        s[(i, i)] -= Complex64::from(gv[(i, i)].re);
    }
    let eig = hermitian_eig(&HermitianMatrix::from_hermitian_part(&s))?;
    Ok(n as f64 * eig.eigenvalues.first().copied().unwrap_or(0.0).max(0.0))
}

fn normalize_rows(r: &mut CMatrix) {
    for mut row in r.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= Complex64::from(norm);
        }
    }
}

/// Factor `R` (n x (n+1)) with `R R^H = v`, rows of unit norm.
fn factor(v: &CMatrix) -> Result<CMatrix> {
    let n = v.nrows();
    let eig = hermitian_eig(&HermitianMatrix::from_hermitian_part(v))?;
    let mut r = CMatrix::zeros(n, n + 1);
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let col = eig.eigenvectors.column(j) * Complex64::from(l.max(0.0).sqrt());
        r.set_column(j, &col);
    }
    normalize_rows(&mut r);
    Ok(r)
}

/// Maximizes a concave objective over the `n x n` elliptope.
///
/// The iterate is kept factored as `V = R R^H` with `R` of width `n + 1` and
/// unit-norm rows, so both constraints hold exactly; `R` follows Riemannian
/// gradient ascent on the product of spheres with backtracking. Because the
/// factor is always rank deficient, its local maxima are global ones, and the
/// loop stops on the concavity certificate of [`duality_gap`].
pub fn sdp_subproblem<O: ConcaveObjective>(
    objective: &O,
    n: usize,
    start: Option<&CMatrix>,
    opts: &SdpOptions,
) -> Result<LiftedSolution> {
    let v0 = match start {
        Some(s) if s.nrows() == n && s.ncols() == n => {
            // pull a (typically rank-one) start into the interior
            let p = project_elliptope(s, opts)?;
            p * Complex64::from(1.0 - START_MIX) + CMatrix::identity(n, n) * Complex64::from(START_MIX)
        }
        Some(s) => {
            return Err(Error::Dimension(format!("start {}x{} for n = {n}", s.nrows(), s.ncols())));
        }
        None => CMatrix::identity(n, n),
    };
    if n <= 1 {
        let v = CMatrix::identity(n, n);
        return Ok(LiftedSolution { objective: objective.value(&v), v, iterations: 0 });
    }
    let mut r = factor(&v0)?;
    let mut v = &r * r.adjoint();
    let mut f = objective.value(&v);
    let mut step = 0.0;
    let mut recent = std::collections::VecDeque::from([f]);
    let mut previous: Option<(CMatrix, CMatrix)> = None;
    let (mut best_v, mut best_f) = (v.clone(), f);
    for it in 1..=opts.max_iters {
        let g = objective.gradient(&v);
        if duality_gap(&g, &v)? <= opts.gap_tolerance * f.abs().max(1.0) {
            return Ok(LiftedSolution { v, objective: f, iterations: it - 1 });
        }
        let mut xi = &g * &r * Complex64::from(2.0);
        for i in 0..n {
            let radial = r.row(i).dotc(&xi.row(i)).re;
            let ri = r.row(i).into_owned();
            let mut row = xi.row_mut(i);
            row -= ri * Complex64::from(radial);
        }
        let xi2 = xi.norm_squared();
        if xi2 == 0.0 {
            return Ok(LiftedSolution { v, objective: f, iterations: it });
        }
        // Barzilai-Borwein step from the last move, else keep growing
        step = match &previous {
            Some((r_old, xi_old)) => {
                let s_k = &r - r_old;
                let curvature = -s_k.dotc(&(&xi - xi_old)).re;
                if curvature > 0.0 { s_k.norm_squared() / curvature } else { 2.0 * step }
            }
            None => 1.0 / xi2.sqrt(),
        };
        // nonmonotone Armijo against the worst of the recent values
        let reference = recent.iter().copied().fold(f64::INFINITY, f64::min).min(f);
        loop {
            let mut cand = &r + &xi * Complex64::from(step);
            normalize_rows(&mut cand);
            let cv = &cand * cand.adjoint();
            let fc = objective.value(&cv);
            if fc >= reference + 1e-4 * step * xi2 {
                previous = Some((std::mem::replace(&mut r, cand), xi));
                v = cv;
                f = fc;
                break;
            }
            step *= 0.5;
            if step * xi2.sqrt() < 1e-15 {
                return Ok(LiftedSolution { v: best_v, objective: best_f, iterations: it });
            }
        }
        if f > best_f {
            best_f = f;
            best_v.clone_from(&v);
        }
        recent.push_back(f);
        if recent.len() > 10 {
            recent.pop_front();
        }
    }
    Err(Error::SolverFailure {
        message: format!("SDP subproblem did not converge in {} iterations", opts.max_iters),
        best: Some(Box::new(best_v)),
    })
}

/// Principal eigenpair `sqrt(λ1) u1`, projected entry-wise to unit modulus.
pub fn extract_rank_one(lifted: &LiftedSolution) -> Result<PhaseConfig> {
    let eig = hermitian_eig(&HermitianMatrix::from_hermitian_part(&lifted.v))?;
    let lmax = eig.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let v = eig.eigenvectors.column(0) * Complex64::from(lmax.sqrt());
    Ok(PhaseConfig::project(&v.into_owned()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseOptions {
    pub max_iters: usize,
    /// Outer stop on `||V_t - V_{t-1}||_F`.
    pub tolerance: f64,
    pub sdp: SdpOptions,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        Self { max_iters: 50, tolerance: 1e-4, sdp: SdpOptions::default() }
    }
}

#[derive(Debug, Clone)]
pub struct PhaseOutcome {
    /// Best extracted phases, never worse than the initial ones.
    pub phases: PhaseConfig,
    /// Best true sum-rate so far: initial value, then one entry per iteration.
    pub history: Vec<f64>,
    /// Relaxed objective at the final lifted iterate.
    pub relaxed_objective: f64,
    pub iterations: usize,
    /// Whether the outer loop reached its tolerance.
    pub converged: bool,
}

pub fn phase_sum_rate(channels: &ChannelRealization, w: &Precoder, noise: f64, theta: &PhaseConfig) -> Result<f64> {
    Ok(sum_rate_effective(&effective_channels(channels, theta)?, &w.w, noise))
}

/// SCA over the relaxed problem starting from `init`, keeping the best
/// rank-one extraction seen.
pub fn optimize_phases(
    channels: &ChannelRealization,
    w: &Precoder,
    noise: f64,
    init: &PhaseConfig,
    opts: &PhaseOptions,
) -> Result<PhaseOutcome> {
    let n = channels.elements();
    if init.len() != n {
        return Err(Error::Dimension(format!("{} initial phases for {n} elements", init.len())));
    }
    let forms = build_all_quadratics(channels, w, noise)?;
    let mut best = init.clone();
    let mut best_rate = phase_sum_rate(channels, w, noise, init)?;
    let mut history = vec![best_rate];
    let mut v = init.lifted();
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..opts.max_iters {
        iterations += 1;
        let surrogate = sca_surrogate(&forms, &v);
        let sol = match sdp_subproblem(&surrogate, n, Some(&v), &opts.sdp) {
            Ok(sol) => sol,
            // an unfinished subproblem still counts if it ascended
            Err(Error::SolverFailure { best: Some(best), .. }) => {
                if surrogate.value(&best) > surrogate.value(&v) {
                    LiftedSolution { objective: surrogate.value(&best), v: *best, iterations: opts.sdp.max_iters }
                } else {
                    converged = true;
                    break;
                }
            }
            Err(e) => return Err(e),
        };
        let theta = extract_rank_one(&sol)?;
        let rate = phase_sum_rate(channels, w, noise, &theta)?;
        if rate > best_rate {
            best_rate = rate;
            best = theta;
        }
        history.push(best_rate);
        let change = (&sol.v - &v).norm();
        v = sol.v;
        if change < opts.tolerance {
            converged = true;
            break;
        }
    }
    Ok(PhaseOutcome {
        phases: best,
        history,
        relaxed_objective: relaxed_sum_rate(&forms, &v),
        iterations,
        converged,
    })
}

//! Rates for the single-user SISO and multi-user MISO links, element
//! position search, and the alternating position / phase / precoder loop.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{realize_channels, AngleSet, ChannelRealization, FadingDraw, ScenarioGeometry};
use crate::exec::Execution;
use crate::geometry::{
    candidate_grid, ris_baseline_positions, ElementPositions, Point, SurfaceLayout,
};
use crate::phase_sdr::{optimize_phases, PhaseConfig, PhaseOptions};
use crate::precoder::{effective_channels, sinr_effective, wmmse_loop, Precoder, WmmseOptions};
use crate::pso::{penalized_fitness, pso_optimize_seeded, PsoConfig};
use crate::{CVector, Complex64, Error, Result};

/// `y = sqrt(P) g^H diag(θ) h s + η`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuSisoInstance {
    pub h: CVector,
    pub g: CVector,
    pub power: f64,
    pub noise: f64,
}

impl SuSisoInstance {
    pub fn new(h: CVector, g: CVector, power: f64, noise: f64) -> Result<Self> {
        if h.is_empty() || h.len() != g.len() {
            return Err(Error::Dimension(format!("h has {} entries, g has {}", h.len(), g.len())));
        }
        if !(power >= 0.0) || !(noise > 0.0) {
            return Err(Error::Contract(format!("power {power} / noise {noise}")));
        }
        Ok(Self { h, g, power, noise })
    }

    pub fn from_channels(channels: &ChannelRealization, power: f64, noise: f64) -> Result<Self> {
        Self::new(channels.h.column(0).into_owned(), channels.g.column(0).into_owned(), power, noise)
    }
}

/// Aligns every cascaded path: `θ_n = e^{j(∠g_n - ∠h_n)}`, which makes
/// `g^H diag(θ) h = Σ |h_n||g_n|`.
pub fn su_siso_optimal_phases(h: &CVector, g: &CVector) -> PhaseConfig {
    let angles: Vec<f64> = h.iter().zip(g.iter()).map(|(hn, gn)| gn.arg() - hn.arg()).collect();
    PhaseConfig::from_angles(&angles)
}

pub fn su_siso_gain(h: &CVector, g: &CVector, theta: &PhaseConfig) -> Complex64 {
    h.iter()
        .zip(g.iter())
        .zip(theta.values().iter())
        .map(|((hn, gn), t)| gn.conj() * t * hn)
        .sum()
}

pub fn su_siso_rate(inst: &SuSisoInstance, theta: &PhaseConfig) -> f64 {
    let gain = su_siso_gain(&inst.h, &inst.g, theta).norm_sqr();
    (1.0 + inst.power * gain / inst.noise).log2()
}

/// Rate with aligned phases, `log2(1 + P (Σ|h_n||g_n|)² / σ²)`.
pub fn su_siso_aligned_rate(inst: &SuSisoInstance) -> f64 {
    let amp: f64 = inst.h.iter().zip(inst.g.iter()).map(|(a, b)| a.norm() * b.norm()).sum();
    (1.0 + inst.power * amp * amp / inst.noise).log2()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuMisoInstance {
    pub channels: ChannelRealization,
    pub theta: PhaseConfig,
    pub w: Precoder,
    pub noise: f64,
}

pub fn mu_miso_sinr(inst: &MuMisoInstance) -> Result<Vec<f64>> {
    if inst.w.w.nrows() != inst.channels.antennas() || inst.w.w.ncols() != inst.channels.users() {
        return Err(Error::Dimension(format!(
            "precoder {}x{} for {} antennas / {} users",
            inst.w.w.nrows(),
            inst.w.w.ncols(),
            inst.channels.antennas(),
            inst.channels.users()
        )));
    }
    let h = effective_channels(&inst.channels, &inst.theta)?;
    Ok(sinr_effective(&h, &inst.w.w, inst.noise))
}

pub fn sum_rate(inst: &MuMisoInstance) -> Result<f64> {
    Ok(mu_miso_sinr(inst)?.iter().map(|g| (1.0 + g).log2()).sum())
}

fn mu_rate(channels: &ChannelRealization, theta: &PhaseConfig, w: &Precoder, noise: f64) -> Result<f64> {
    let h = effective_channels(channels, theta)?;
    Ok(sinr_effective(&h, &w.w, noise).iter().map(|g| (1.0 + g).log2()).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositionMethod {
    #[default]
    Pso,
    Grid,
}

impl FromStr for PositionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pso" => Ok(Self::Pso),
            "grid" => Ok(Self::Grid),
            _ => Err(Error::Config(format!("unknown position method `{s}`"))),
        }
    }
}

impl std::fmt::Display for PositionMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Pso => "pso",
            Self::Grid => "grid",
        })
    }
}

/// How one element's position is chosen inside its subarea.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionSearch {
    pub method: PositionMethod,
    pub grid: (usize, usize),
    pub pso: PsoConfig,
    /// Number of passes over all elements.
    pub sweeps: usize,
}

impl Default for PositionSearch {
    fn default() -> Self {
        Self { method: PositionMethod::Pso, grid: (10, 10), pso: PsoConfig::default(), sweeps: 1 }
    }
}

/// Shared inputs of a position search.
#[derive(Debug, Clone, Copy)]
pub struct Scene<'a> {
    pub layout: &'a SurfaceLayout,
    pub geometry: &'a ScenarioGeometry,
    pub angles: &'a AngleSet,
    pub draw: &'a FadingDraw,
    pub antennas: usize,
    pub users: usize,
}

impl Scene<'_> {
    pub fn channels(&self, t: &ElementPositions) -> Result<ChannelRealization> {
        realize_channels(self.geometry, self.angles, self.draw, t, self.antennas, self.users)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionOutcome {
    pub positions: ElementPositions,
    pub rate: f64,
    /// PSO global-best curve per optimized element (empty for grid search).
    pub element_histories: Vec<Vec<f64>>,
    pub sweeps: usize,
}

fn element_seed(base: u64, sweep: usize, n: usize) -> u64 {
    base ^ ((sweep as u64) << 32 | n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Per-element sequential maximization of `rate(positions)` with the other
/// elements frozen. The incumbent position always competes, so the result is
/// never worse than `start`.
fn sequential_search<F>(
    scene: &Scene<'_>,
    start: &ElementPositions,
    search: &PositionSearch,
    exec: Execution,
    rate: F,
) -> Result<PositionOutcome>
where
    F: Fn(&ElementPositions) -> Result<f64> + Sync + Send,
{
    let layout = scene.layout;
    if start.len() != layout.len() {
        return Err(Error::Dimension(format!("{} positions for {} subareas", start.len(), layout.len())));
    }
    let mut t = start.clone();
    let mut best = rate(&t)?;
    let mut histories = Vec::new();
    for sweep in 0..search.sweeps {
        for n in 0..layout.len() {
            let area = *layout.subarea(n)?;
            let current = t.points()[n];
            let (p, v) = match search.method {
                PositionMethod::Grid => {
                    let (gx, gy) = search.grid;
                    let mut cands = vec![current];
                    cands.extend(candidate_grid(layout, n, gx, gy)?);
                    let vals = exec.map(cands.len(), |i| rate(&t.with_element(n, cands[i])));
                    let mut arg = 0;
                    let mut val = f64::NEG_INFINITY;
                    for (i, v) in vals.into_iter().enumerate() {
                        let v = v?;
                        if v > val {
                            val = v;
                            arg = i;
                        }
                    }
                    (cands[arg], val)
                }
                PositionMethod::Pso => {
                    let cfg = PsoConfig { seed: element_seed(search.pso.seed, sweep, n), ..search.pso };
                    let bounds = [(area.x_min, area.x_max), (area.y_min, area.y_max)];
                    let objective = |x: &[f64]| {
                        let cand = t.with_element(n, Point::new(x[0], x[1]));
                        match rate(&cand) {
                            Ok(r) => penalized_fitness(r, cand.points(), layout.spacing, cfg.penalty),
                            Err(_) => f64::NEG_INFINITY,
                        }
                    };
                    let res = pso_optimize_seeded(objective, &bounds, &cfg, Some(&[current.x, current.y]), exec)?;
                    histories.push(res.history);
                    let p = Point::new(res.best_position[0], res.best_position[1]);
                    (p, rate(&t.with_element(n, p))?)
                }
            };
            if v > best {
                best = v;
                t = t.with_element(n, p);
            }
        }
    }
    Ok(PositionOutcome { positions: t, rate: best, element_histories: histories, sweeps: search.sweeps })
}

/// SU-SISO position search: every candidate is scored with aligned phases on
/// freshly recomputed channels.
pub fn optimize_positions_su(
    scene: &Scene<'_>,
    power: f64,
    noise: f64,
    search: &PositionSearch,
    exec: Execution,
) -> Result<PositionOutcome> {
    let start = ris_baseline_positions(scene.layout);
    sequential_search(scene, &start, search, exec, |t| {
        let ch = scene.channels(t)?;
        Ok(su_siso_aligned_rate(&SuSisoInstance::from_channels(&ch, power, noise)?))
    })
}

/// MU-MISO position step with phases and precoder held fixed.
#[allow(clippy::too_many_arguments)]
pub fn optimize_positions_mu(
    scene: &Scene<'_>,
    start: &ElementPositions,
    theta: &PhaseConfig,
    w: &Precoder,
    noise: f64,
    search: &PositionSearch,
    exec: Execution,
) -> Result<PositionOutcome> {
    sequential_search(scene, start, search, exec, |t| mu_rate(&scene.channels(t)?, theta, w, noise))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlternatingConfig {
    pub max_cycles: usize,
    /// Stop once a cycle gains less than this, bits/s/Hz.
    pub tolerance: f64,
    /// `false` freezes the elements at the subarea centers.
    pub move_elements: bool,
    pub search: PositionSearch,
    pub phases: PhaseOptions,
    pub wmmse: WmmseOptions,
}

impl Default for AlternatingConfig {
    fn default() -> Self {
        Self {
            max_cycles: 30,
            tolerance: 1e-3,
            move_elements: true,
            search: PositionSearch { method: PositionMethod::Grid, ..PositionSearch::default() },
            phases: PhaseOptions::default(),
            wmmse: WmmseOptions::default(),
        }
    }
}

/// Sum-rate trace of the alternating loop.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizationHistory {
    /// Initial sum-rate, then the rate after every cycle.
    pub sum_rate: Vec<f64>,
    /// Rate after the position, phase and precoder stage of each cycle.
    pub stage_rates: Vec<[f64; 3]>,
    pub position_iters: Vec<usize>,
    pub phase_iters: Vec<usize>,
    pub precoder_iters: Vec<usize>,
}

impl OptimizationHistory {
    pub fn cycles(&self) -> usize {
        self.stage_rates.len()
    }

    pub fn is_monotone(&self) -> bool {
        let stages = self.stage_rates.iter().flatten().copied();
        let all: Vec<f64> = self.sum_rate.first().copied().into_iter().chain(stages).collect();
        all.windows(2).all(|w| w[1] >= w[0]) && self.sum_rate.windows(2).all(|w| w[1] >= w[0])
    }
}

#[derive(Debug, Clone)]
pub struct AlternatingOutcome {
    pub positions: ElementPositions,
    pub phases: PhaseConfig,
    pub precoder: Precoder,
    pub rate: f64,
    pub history: OptimizationHistory,
    /// Set when a sub-solver failed and its stage kept the incumbent.
    pub flagged: bool,
}

/// Position, phase and precoder stages in turn, each accepted only if it does
/// not lower the sum-rate.
pub fn alternating_optimize(
    scene: &Scene<'_>,
    power: f64,
    noise: f64,
    cfg: &AlternatingConfig,
    exec: Execution,
) -> Result<AlternatingOutcome> {
    let mut t = ris_baseline_positions(scene.layout);
    let mut channels = scene.channels(&t)?;
    let mut theta = PhaseConfig::ones(t.len());
    let mut w = Precoder::matched_filter(&effective_channels(&channels, &theta)?, power);
    let mut rate = mu_rate(&channels, &theta, &w, noise)?;
    let mut history = OptimizationHistory { sum_rate: vec![rate], ..Default::default() };
    let mut flagged = false;

    for _ in 0..cfg.max_cycles {
        let cycle_start = rate;

        let mut pos_iters = 0;
        if cfg.move_elements {
            match optimize_positions_mu(scene, &t, &theta, &w, noise, &cfg.search, exec) {
                Ok(out) if out.rate >= rate => {
                    pos_iters = out.sweeps;
                    if out.positions != t {
                        t = out.positions;
                        channels = scene.channels(&t)?;
                        rate = mu_rate(&channels, &theta, &w, noise)?;
                    }
                }
                Ok(_) => {}
                Err(_) => flagged = true,
            }
        }
        let after_positions = rate;

        let mut phase_iters = 0;
        match optimize_phases(&channels, &w, noise, &theta, &cfg.phases) {
            Ok(out) => {
                phase_iters = out.iterations;
                let r = mu_rate(&channels, &out.phases, &w, noise)?;
                if r >= rate {
                    theta = out.phases;
                    rate = r;
                }
            }
            Err(_) => flagged = true,
        }
        let after_phases = rate;

        let mut prec_iters = 0;
        match wmmse_loop(&channels, &theta, power, noise, &w, &cfg.wmmse) {
            Ok(out) => {
                prec_iters = out.iterations;
                let r = mu_rate(&channels, &theta, &out.precoder, noise)?;
                if r >= rate {
                    w = out.precoder;
                    rate = r;
                }
            }
            Err(_) => flagged = true,
        }

        history.stage_rates.push([after_positions, after_phases, rate]);
        history.position_iters.push(pos_iters);
        history.phase_iters.push(phase_iters);
        history.precoder_iters.push(prec_iters);
        history.sum_rate.push(rate);
        if rate - cycle_start < cfg.tolerance {
            break;
        }
    }
    Ok(AlternatingOutcome { positions: t, phases: theta, precoder: w, rate, history, flagged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::PathLossMode;
    use crate::geometry::{partition_surface, spacing_ok};
    use crate::numerics::{complex_gaussian, RngStream};

    fn cvec(v: &[(f64, f64)]) -> CVector {
        CVector::from_iterator(v.len(), v.iter().map(|&(a, b)| Complex64::new(a, b)))
    }

    fn geometry(k: usize) -> ScenarioGeometry {
        ScenarioGeometry {
            bs: Point::new(0.0, 0.0),
            fris: Point::new(20.0, 20.0),
            users: (0..k).map(|i| Point::new(15.0 + i as f64, 0.0)).collect(),
            wavelength: 0.125,
            exponent: 2.7,
            reference_distance: 1.0,
            path_loss: PathLossMode::Normalized,
        }
    }

    struct Fixture {
        layout: SurfaceLayout,
        geom: ScenarioGeometry,
        angles: AngleSet,
        draw: FadingDraw,
        m: usize,
        k: usize,
    }

    impl Fixture {
        fn new(seed: u64, n: usize, area: f64, m: usize, k: usize, rho: f64) -> Self {
            let mut rng = RngStream::new(seed);
            Self {
                layout: partition_surface(area, n, 0.0625).unwrap(),
                geom: geometry(k),
                angles: AngleSet::random(k, &mut rng),
                draw: FadingDraw::random(&mut rng, n, m, k, rho, rho),
                m,
                k,
            }
        }

        fn scene(&self) -> Scene<'_> {
            Scene {
                layout: &self.layout,
                geometry: &self.geom,
                angles: &self.angles,
                draw: &self.draw,
                antennas: self.m,
                users: self.k,
            }
        }
    }

    #[test]
    fn aligned_phases_trivial_cases() {
        let ones = cvec(&[(1.0, 0.0); 3]);
        let theta = su_siso_optimal_phases(&ones, &ones);
        assert!(theta.values().iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        assert!((su_siso_gain(&ones, &ones, &theta) - Complex64::new(3.0, 0.0)).norm() < 1e-12);

        let h = CVector::from_element(4, Complex64::from_polar(1.0, 0.7));
        let g = CVector::from_element(4, Complex64::from_polar(1.0, -2.1));
        let gain = su_siso_gain(&h, &g, &su_siso_optimal_phases(&h, &g));
        assert!((gain - Complex64::new(4.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn aligned_gain_is_real_sum_of_magnitudes() {
        let mut rng = RngStream::new(3);
        let h = complex_gaussian(&mut rng, 5, 1).column(0).into_owned();
        let g = complex_gaussian(&mut rng, 5, 1).column(0).into_owned();
        let gain = su_siso_gain(&h, &g, &su_siso_optimal_phases(&h, &g));
        let oracle: f64 = h.iter().zip(g.iter()).map(|(a, b)| a.norm() * b.norm()).sum();
        assert!((gain.re - oracle).abs() < 1e-12 && gain.im.abs() < 1e-12);
    }

    #[test]
    fn su_rate_examples() {
        let one = cvec(&[(1.0, 0.0)]);
        let inst = SuSisoInstance::new(one.clone(), one.clone(), 0.0, 1.0).unwrap();
        assert_eq!(su_siso_rate(&inst, &PhaseConfig::ones(1)), 0.0);
        let inst = SuSisoInstance::new(one.clone(), one, 10.0, 1.0).unwrap();
        assert!((su_siso_rate(&inst, &PhaseConfig::ones(1)) - 11f64.log2()).abs() < 1e-12);
        assert!(SuSisoInstance::new(cvec(&[(1.0, 0.0)]), cvec(&[]), 1.0, 1.0).is_err());
        assert!(SuSisoInstance::new(cvec(&[(1.0, 0.0)]), cvec(&[(1.0, 0.0)]), 1.0, 0.0).is_err());
    }

    #[test]
    fn aligned_beats_random_phases() {
        let mut rng = RngStream::new(4);
        for _ in 0..5 {
            let h = complex_gaussian(&mut rng, 4, 1).column(0).into_owned();
            let g = complex_gaussian(&mut rng, 4, 1).column(0).into_owned();
            let inst = SuSisoInstance::new(h.clone(), g.clone(), 10.0, 1.0).unwrap();
            let best = su_siso_rate(&inst, &su_siso_optimal_phases(&h, &g));
            assert!(best >= su_siso_rate(&inst, &PhaseConfig::ones(4)));
            for _ in 0..2000 {
                let phi: Vec<f64> = (0..4).map(|_| rng.uniform_range(0.0, 6.3)).collect();
                assert!(best >= su_siso_rate(&inst, &PhaseConfig::from_angles(&phi)) - 1e-12);
            }
        }
    }

    fn random_mu(seed: u64, n: usize, m: usize, k: usize) -> MuMisoInstance {
        let mut rng = RngStream::new(seed);
        let channels = ChannelRealization {
            h: complex_gaussian(&mut rng, n, m),
            g: complex_gaussian(&mut rng, n, k),
            positions: ElementPositions::default(),
        };
        let phi: Vec<f64> = (0..n).map(|_| rng.uniform_range(0.0, 6.3)).collect();
        MuMisoInstance {
            channels,
            theta: PhaseConfig::from_angles(&phi),
            w: Precoder { w: complex_gaussian(&mut rng, m, k), power: 10.0 },
            noise: 0.7,
        }
    }

    #[test]
    fn sinr_matches_scalar_expansion() {
        let inst = random_mu(5, 3, 2, 3);
        let sinr = mu_miso_sinr(&inst).unwrap();
        let (h, g, th, w) = (&inst.channels.h, &inst.channels.g, inst.theta.values(), &inst.w.w);
        let resp = |k: usize, l: usize| -> Complex64 {
            let mut s = Complex64::new(0.0, 0.0);
            for n in 0..3 {
                for m in 0..2 {
                    s += g[(n, k)].conj() * th[n] * h[(n, m)] * w[(m, l)];
                }
            }
            s
        };
        let mut total = 0.0;
        for (k, &got) in sinr.iter().enumerate() {
            let sig = resp(k, k).norm_sqr();
            let int: f64 = (0..3).filter(|&l| l != k).map(|l| resp(k, l).norm_sqr()).sum();
            let oracle = sig / (int + 0.7);
            assert!((got - oracle).abs() <= 1e-12 * oracle.max(1.0));
            total += (1.0 + oracle).log2();
        }
        assert!((sum_rate(&inst).unwrap() - total).abs() < 1e-12);
    }

    #[test]
    fn sinr_trivial_cases() {
        let mut inst = random_mu(6, 3, 2, 1);
        let h = effective_channels(&inst.channels, &inst.theta).unwrap();
        let direct = (&h * &inst.w.w)[(0, 0)].norm_sqr() / 0.7;
        assert!((mu_miso_sinr(&inst).unwrap()[0] - direct).abs() < 1e-12 * direct);
        inst.w.w.fill(Complex64::new(0.0, 0.0));
        assert_eq!(mu_miso_sinr(&inst).unwrap(), vec![0.0]);
    }

    #[test]
    fn unit_sinr_gives_one_bit_per_user() {
        let rate: f64 = [1.0f64; 4].iter().map(|g| (1.0 + g).log2()).sum();
        assert_eq!(rate, 4.0);
    }

    #[test]
    fn single_antenna_single_user_reduces_to_siso() {
        let inst = random_mu(7, 4, 1, 1);
        let power: f64 = 5.0;
        let mu = MuMisoInstance {
            w: Precoder { w: crate::CMatrix::from_element(1, 1, Complex64::new(power.sqrt(), 0.0)), power },
            ..inst.clone()
        };
        let su = SuSisoInstance::from_channels(&inst.channels, power, inst.noise).unwrap();
        assert!((sum_rate(&mu).unwrap() - su_siso_rate(&su, &inst.theta)).abs() < 1e-12);
    }

    #[test]
    fn global_rotation_invariance() {
        let inst = random_mu(8, 4, 3, 2);
        let rotated = MuMisoInstance { theta: inst.theta.rotated(2.2), ..inst.clone() };
        let a = mu_miso_sinr(&inst).unwrap();
        let b = mu_miso_sinr(&rotated).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12 * x.max(1.0));
        }
    }

    #[test]
    fn su_grid_single_element_is_exhaustive() {
        let f = Fixture::new(9, 1, 1.0, 1, 1, 3.0);
        let search = PositionSearch { method: PositionMethod::Grid, grid: (5, 5), ..Default::default() };
        let out = optimize_positions_su(&f.scene(), 10.0, 1.0, &search, Execution::Sequential).unwrap();
        let mut best = f64::NEG_INFINITY;
        for p in candidate_grid(&f.layout, 0, 5, 5).unwrap() {
            let ch = f.scene().channels(&ElementPositions(vec![p])).unwrap();
            best = best.max(su_siso_aligned_rate(&SuSisoInstance::from_channels(&ch, 10.0, 1.0).unwrap()));
        }
        assert_eq!(out.rate, best);
    }

    #[test]
    fn su_methods_dominate_baseline_and_stay_valid() {
        for method in [PositionMethod::Grid, PositionMethod::Pso] {
            let f = Fixture::new(10, 4, 4.0, 1, 1, 3.0);
            let search = PositionSearch {
                method,
                grid: (4, 4),
                pso: PsoConfig { swarm_size: 8, max_iters: 10, ..Default::default() },
                sweeps: 1,
            };
            let out = optimize_positions_su(&f.scene(), 10.0, 1.0, &search, Execution::Sequential).unwrap();
            let base = f.scene().channels(&ris_baseline_positions(&f.layout)).unwrap();
            let base_rate = su_siso_aligned_rate(&SuSisoInstance::from_channels(&base, 10.0, 1.0).unwrap());
            assert!(out.rate >= base_rate);
            assert!(spacing_ok(&out.positions, 0.0625));
            for (n, p) in out.positions.points().iter().enumerate() {
                assert!(f.layout.subarea(n).unwrap().contains(*p));
            }
            let ch = f.scene().channels(&out.positions).unwrap();
            let again = su_siso_aligned_rate(&SuSisoInstance::from_channels(&ch, 10.0, 1.0).unwrap());
            assert_eq!(again, out.rate);
            if method == PositionMethod::Pso {
                assert_eq!(out.element_histories.len(), 4);
            }
        }
    }

    #[test]
    fn mu_single_candidate_grid_returns_centers() {
        let f = Fixture::new(11, 4, 4.0, 2, 2, 3.0);
        let start = ris_baseline_positions(&f.layout);
        let search = PositionSearch { method: PositionMethod::Grid, grid: (1, 1), ..Default::default() };
        let ch = f.scene().channels(&start).unwrap();
        let theta = PhaseConfig::ones(4);
        let w = Precoder::matched_filter(&effective_channels(&ch, &theta).unwrap(), 10.0);
        let out = optimize_positions_mu(&f.scene(), &start, &theta, &w, 1.0, &search, Execution::Sequential).unwrap();
        assert_eq!(out.positions, start);
    }

    #[test]
    fn zero_cycles_return_initial_configuration() {
        let f = Fixture::new(12, 4, 4.0, 2, 2, 3.0);
        let cfg = AlternatingConfig { max_cycles: 0, ..Default::default() };
        let out = alternating_optimize(&f.scene(), 10.0, 1.0, &cfg, Execution::Sequential).unwrap();
        assert_eq!(out.positions, ris_baseline_positions(&f.layout));
        assert_eq!(out.phases, PhaseConfig::ones(4));
        assert_eq!(out.history.sum_rate.len(), 1);
    }

    #[test]
    fn alternating_history_is_monotone() {
        for seed in 0..3 {
            let f = Fixture::new(13 + seed, 4, 4.0, 4, 2, 3.0);
            let search = PositionSearch { method: PositionMethod::Grid, grid: (3, 3), ..Default::default() };
            let cfg = AlternatingConfig { search, ..Default::default() };
            let out = alternating_optimize(&f.scene(), 10.0, 1.0, &cfg, Execution::Sequential).unwrap();
            assert!(out.history.is_monotone(), "{:?}", out.history);
            assert!(out.history.cycles() <= 30);
            assert!(out.precoder.is_feasible());
            assert!(spacing_ok(&out.positions, 0.0625));
            assert_eq!(*out.history.sum_rate.last().unwrap(), out.rate);
        }
    }
}

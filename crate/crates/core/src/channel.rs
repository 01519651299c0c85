//! Position-dependent Rician channels between the BS, the surface and the
//! users.
//!
//! The LoS parts are plane-wave steering vectors evaluated at the element
//! positions. The NLoS parts color a fixed white draw with the Jakes
//! correlation of the current positions, so a position search sees the same
//! small-scale fading for every candidate.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::geometry::{ElementPositions, Point};
use crate::numerics::{self, HermitianMatrix, RngStream};
use crate::{CMatrix, CVector, Complex64, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathLossMode {
    /// `l_b = l_k = 1`.
    #[default]
    Normalized,
    /// `l = (d / d0)^-alpha`.
    Physical,
}

impl std::str::FromStr for PathLossMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalized" => Ok(Self::Normalized),
            "physical" => Ok(Self::Physical),
            _ => Err(Error::Config(format!("unknown path-loss mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioGeometry {
    pub bs: Point,
    pub fris: Point,
    pub users: Vec<Point>,
    pub wavelength: f64,
    pub exponent: f64,
    pub reference_distance: f64,
    pub path_loss: PathLossMode,
}

impl ScenarioGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0) {
            return Err(Error::Config(format!("wavelength must be positive, got {}", self.wavelength)));
        }
        if !(self.exponent >= 2.0) {
            return Err(Error::Config(format!("path-loss exponent must be >= 2, got {}", self.exponent)));
        }
        if !(self.reference_distance > 0.0) {
            return Err(Error::Config("reference distance must be positive".into()));
        }
        if self.bs.distance(self.fris) <= 0.0 {
            return Err(Error::Config("BS and surface are co-located".into()));
        }
        for (k, u) in self.users.iter().enumerate() {
            if u.distance(self.fris) <= 0.0 {
                return Err(Error::Config(format!("user {k} is co-located with the surface")));
            }
        }
        Ok(())
    }

    fn loss(&self, d: f64) -> f64 {
        match self.path_loss {
            PathLossMode::Normalized => 1.0,
            PathLossMode::Physical => (d / self.reference_distance).powf(-self.exponent),
        }
    }

    pub fn path_loss_bs(&self) -> f64 {
        self.loss(self.bs.distance(self.fris))
    }

    /// Path loss of user `k`; users beyond the listed drops reuse the last
    /// one, and with no drops at all the loss is 1.
    pub fn path_loss_user(&self, k: usize) -> f64 {
        match self.users.get(k).or(self.users.last()) {
            Some(u) => self.loss(u.distance(self.fris)),
            None => 1.0,
        }
    }
}

/// Departure/arrival angles of one channel realization, radians.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleSet {
    pub bs_departure: f64,
    pub fris_arrival_azimuth: f64,
    pub fris_arrival_elevation: f64,
    /// `(azimuth, elevation)` of the surface departure towards each user.
    pub user_departure: Vec<(f64, f64)>,
}

impl AngleSet {
    /// Every angle uniform on `(0, pi)`.
    pub fn random(users: usize, rng: &mut RngStream) -> Self {
        let mut draw = || loop {
            let a = PI * rng.uniform();
            if a > 0.0 {
                break a;
            }
        };
        let bs_departure = draw();
        let fris_arrival_azimuth = draw();
        let fris_arrival_elevation = draw();
        let user_departure = (0..users).map(|_| (draw(), draw())).collect();
        Self {
            bs_departure,
            fris_arrival_azimuth,
            fris_arrival_elevation,
            user_departure,
        }
    }
}

/// White small-scale fading held fixed across a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingDraw {
    /// `N x M` white draw for the BS-surface hop.
    pub h_hat: CMatrix,
    /// `N x K` white draw, column `k` for user `k`.
    pub g_hat: CMatrix,
    pub rician_bs: f64,
    pub rician_user: f64,
}

impl FadingDraw {
    pub fn random(
        rng: &mut RngStream,
        n: usize,
        m: usize,
        k: usize,
        rician_bs: f64,
        rician_user: f64,
    ) -> Self {
        let h_hat = numerics::complex_gaussian(rng, n, m);
        let g_hat = numerics::complex_gaussian(rng, n, k);
        Self {
            h_hat,
            g_hat,
            rician_bs,
            rician_user,
        }
    }
}

/// `H` (N x M) and `G = [g_1 .. g_K]` (N x K) at a given position set.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: CMatrix,
    pub g: CMatrix,
    pub positions: ElementPositions,
}

impl ChannelRealization {
    pub fn elements(&self) -> usize {
        self.h.nrows()
    }

    pub fn antennas(&self) -> usize {
        self.h.ncols()
    }

    pub fn users(&self) -> usize {
        self.g.ncols()
    }

    pub fn g_user(&self, k: usize) -> CVector {
        self.g.column(k).into_owned()
    }
}

/// `[a_t(phi)]_m = exp(j (m-1) pi sin phi)`.
pub fn steer_bs(phi: f64, m: usize) -> CVector {
    let s = PI * phi.sin();
    CVector::from_fn(m, |i, _| Complex64::from_polar(1.0, i as f64 * s))
}

/// `[a(phi_a, phi_e, t)]_n = exp(j 2pi/lambda (x_n sin phi_a cos phi_e + y_n sin phi_e))`.
pub fn steer_fris(phi_a: f64, phi_e: f64, t: &ElementPositions, wavelength: f64) -> CVector {
    let k = 2.0 * PI / wavelength;
    let cx = phi_a.sin() * phi_e.cos();
    let cy = phi_e.sin();
    CVector::from_iterator(
        t.len(),
        t.points()
            .iter()
            .map(|p| Complex64::from_polar(1.0, k * (p.x * cx + p.y * cy))),
    )
}

/// Real Jakes correlation `J0(2 pi |t_i - t_j| / lambda)`.
pub fn jakes_correlation(t: &ElementPositions, wavelength: f64) -> Result<DMatrix<f64>> {
    let n = t.len();
    let pts = t.points();
    let mut j = DMatrix::identity(n, n);
    for a in 0..n {
        for b in a + 1..n {
            let arg = 2.0 * PI * pts[a].distance(pts[b]) / wavelength;
            let v = numerics::bessel_j0(arg)?;
            j[(a, b)] = v;
            j[(b, a)] = v;
        }
    }
    Ok(j)
}

pub fn correlation_matrix(t: &ElementPositions, wavelength: f64) -> Result<HermitianMatrix> {
    HermitianMatrix::from_real_symmetric(&jakes_correlation(t, wavelength)?)
}

fn rician_weights(rho: f64) -> (f64, f64) {
    if rho.is_infinite() {
        (1.0, 0.0)
    } else {
        ((rho / (rho + 1.0)).sqrt(), (1.0 / (rho + 1.0)).sqrt())
    }
}

fn color(l: &DMatrix<f64>, white: &CMatrix) -> CMatrix {
    let lc = l.map(|v| Complex64::new(v, 0.0));
    lc * white
}

/// Synthesizes `H` and `G` for positions `t` using `m` BS antennas and the
/// first `k` users of `angles`.
pub fn realize_channels(
    geom: &ScenarioGeometry,
    angles: &AngleSet,
    draw: &FadingDraw,
    t: &ElementPositions,
    m: usize,
    k: usize,
) -> Result<ChannelRealization> {
    let n = t.len();
    if draw.h_hat.nrows() < n || draw.h_hat.ncols() < m {
        return Err(Error::Dimension(format!(
            "fading draw {}x{} too small for {n} elements x {m} antennas",
            draw.h_hat.nrows(),
            draw.h_hat.ncols()
        )));
    }
    if draw.g_hat.nrows() < n || draw.g_hat.ncols() < k || angles.user_departure.len() < k {
        return Err(Error::Dimension(format!(
            "fading draw / angle set cannot serve {k} users on {n} elements"
        )));
    }
    let lambda = geom.wavelength;
    let coloring = numerics::real_coloring_operator(&jakes_correlation(t, lambda)?);

    let (los_b, nlos_b) = rician_weights(draw.rician_bs);
    let a_r = steer_fris(angles.fris_arrival_azimuth, angles.fris_arrival_elevation, t, lambda);
    let a_t = steer_bs(angles.bs_departure, m);
    let h_los = &a_r * a_t.adjoint();
    let h_nlos = color(&coloring, &draw.h_hat.view((0, 0), (n, m)).into_owned());
    let scale_b = geom.path_loss_bs().sqrt();
    let h = (h_los * Complex64::from(los_b) + h_nlos * Complex64::from(nlos_b)) * Complex64::from(scale_b);

    let (los_k, nlos_k) = rician_weights(draw.rician_user);
    let g_nlos = color(&coloring, &draw.g_hat.view((0, 0), (n, k)).into_owned());
    let mut g = CMatrix::zeros(n, k);
    for user in 0..k {
        let (az, el) = angles.user_departure[user];
        let a = steer_fris(az, el, t, lambda);
        let scale = geom.path_loss_user(user).sqrt();
        let col = (a * Complex64::from(los_k) + g_nlos.column(user) * Complex64::from(nlos_k))
            * Complex64::from(scale);
        g.set_column(user, &col);
    }
    if h.iter().chain(g.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Domain("non-finite channel entry".into()));
    }
    Ok(ChannelRealization {
        h,
        g,
        positions: t.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> ScenarioGeometry {
        ScenarioGeometry {
            bs: Point::new(0.0, 0.0),
            fris: Point::new(20.0, 20.0),
            users: vec![Point::new(20.0, 0.0)],
            wavelength: 0.125,
            exponent: 2.7,
            reference_distance: 1.0,
            path_loss: PathLossMode::Normalized,
        }
    }

    fn positions(n: usize) -> ElementPositions {
        ElementPositions((0..n).map(|i| Point::new(0.3 * i as f64, 0.1 * (i % 3) as f64)).collect())
    }

    #[test]
    fn bs_steering() {
        let a = steer_bs(PI, 4);
        for z in a.iter() {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
        let a = steer_bs(PI / 2.0, 2);
        assert!((a[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
        for z in steer_bs(0.7, 9).iter() {
            assert!((z.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fris_steering() {
        let origin = ElementPositions(vec![Point::default(); 3]);
        for z in steer_fris(0.4, 1.1, &origin, 0.125).iter() {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
        let quarter = ElementPositions(vec![Point::new(0.125 / 4.0, 0.0)]);
        let a = steer_fris(PI / 2.0, 0.0, &quarter, 0.125);
        assert!((a[0] - Complex64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn fris_steering_translation_is_common_phase() {
        let t = positions(5);
        let shifted = ElementPositions(t.points().iter().map(|p| Point::new(p.x + 0.37, p.y - 0.11)).collect());
        let a = steer_fris(1.0, 0.6, &t, 0.125);
        let b = steer_fris(1.0, 0.6, &shifted, 0.125);
        let ratio = b[0] / a[0];
        assert!((ratio.norm() - 1.0).abs() < 1e-12);
        for i in 0..5 {
            assert!((b[i] - a[i] * ratio).norm() < 1e-12);
        }
    }

    #[test]
    fn correlation_entries() {
        let one = correlation_matrix(&positions(1), 0.125).unwrap();
        assert_eq!(one.as_matrix()[(0, 0)], Complex64::new(1.0, 0.0));
        let same = ElementPositions(vec![Point::new(1.0, 1.0); 2]);
        let j = jakes_correlation(&same, 0.125).unwrap();
        assert!((j[(0, 1)] - 1.0).abs() < 1e-15);
        // first J0 root 2.404826 / (2 pi) = 0.38274 wavelengths
        let lambda = 0.125;
        let apart = ElementPositions(vec![Point::new(0.0, 0.0), Point::new(0.3827 * lambda, 0.0)]);
        let j = jakes_correlation(&apart, lambda).unwrap();
        assert!(j[(0, 1)].abs() < 1e-3);
    }

    #[test]
    fn correlation_is_psd_for_layouts() {
        use crate::geometry::{candidate_grid, partition_surface};
        for &n in &[4usize, 9, 16] {
            for &a in &[1.0, 4.0] {
                let l = partition_surface(a, n, 0.0625).unwrap();
                for g in [1usize, 3] {
                    let pts = (0..n).map(|i| candidate_grid(&l, i, g, g).unwrap()[0]).collect();
                    let j = correlation_matrix(&ElementPositions(pts), 0.125).unwrap();
                    let e = numerics::hermitian_eig(&j).unwrap();
                    assert!(*e.eigenvalues.last().unwrap() >= -1e-9);
                }
            }
        }
    }

    #[test]
    fn pure_los_limit_is_rank_one() {
        let mut rng = RngStream::new(5);
        let angles = AngleSet::random(2, &mut rng);
        let draw = FadingDraw::random(&mut rng, 4, 3, 2, 1e12, 1e12);
        let t = positions(4);
        let ch = realize_channels(&geom(), &angles, &draw, &t, 3, 2).unwrap();
        let a_r = steer_fris(angles.fris_arrival_azimuth, angles.fris_arrival_elevation, &t, 0.125);
        let los = &a_r * steer_bs(angles.bs_departure, 3).adjoint();
        assert!((&ch.h - &los).norm() / los.norm() < 1e-4);
    }

    #[test]
    fn deterministic_and_los_row_sensitivity() {
        let mut rng = RngStream::new(8);
        let angles = AngleSet::random(1, &mut rng);
        let draw = FadingDraw::random(&mut rng, 4, 2, 1, 1e12, 1e12);
        let t = positions(4);
        let a = realize_channels(&geom(), &angles, &draw, &t, 2, 1).unwrap();
        let b = realize_channels(&geom(), &angles, &draw, &t, 2, 1).unwrap();
        assert_eq!(a, b);
        let moved = t.with_element(2, Point::new(0.9, 0.77));
        let c = realize_channels(&geom(), &angles, &draw, &moved, 2, 1).unwrap();
        for row in 0..4 {
            let diff = (a.h.row(row) - c.h.row(row)).norm();
            if row == 2 {
                assert!(diff > 1e-3);
            } else {
                assert!(diff < 1e-5, "row {row} moved by {diff}");
            }
        }
    }

    #[test]
    fn physical_path_loss_scales_energy() {
        let mut rng = RngStream::new(2);
        let angles = AngleSet::random(1, &mut rng);
        let draw = FadingDraw::random(&mut rng, 4, 2, 1, 3.0, 3.0);
        let t = positions(4);
        let mut g = geom();
        let unit = realize_channels(&g, &angles, &draw, &t, 2, 1).unwrap();
        g.path_loss = PathLossMode::Physical;
        let phys = realize_channels(&g, &angles, &draw, &t, 2, 1).unwrap();
        let lb = (20.0f64 * 2.0f64.sqrt()).powf(-2.7);
        assert!((phys.h.norm_squared() / unit.h.norm_squared() - lb).abs() < 1e-12 * lb.max(1.0));
        assert!((g.path_loss_bs() - lb).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        let mut rng = RngStream::new(2);
        let angles = AngleSet::random(1, &mut rng);
        let draw = FadingDraw::random(&mut rng, 2, 2, 1, 3.0, 3.0);
        assert!(matches!(
            realize_channels(&geom(), &angles, &draw, &positions(4), 2, 1),
            Err(Error::Dimension(_))
        ));
        assert!(realize_channels(&geom(), &angles, &draw, &positions(2), 2, 2).is_err());
    }

    #[test]
    fn geometry_validation() {
        let mut g = geom();
        assert!(g.validate().is_ok());
        g.exponent = 1.5;
        assert!(g.validate().is_err());
        let mut g = geom();
        g.wavelength = 0.0;
        assert!(g.validate().is_err());
        let mut g = geom();
        g.users = vec![g.fris];
        assert!(g.validate().is_err());
    }

    #[test]
    fn angles_in_open_interval() {
        let mut rng = RngStream::new(1);
        for _ in 0..100 {
            let a = AngleSet::random(3, &mut rng);
            let all = [a.bs_departure, a.fris_arrival_azimuth, a.fris_arrival_elevation]
                .into_iter()
                .chain(a.user_departure.iter().flat_map(|&(x, y)| [x, y]));
            for v in all {
                assert!(v > 0.0 && v < PI);
            }
        }
    }
}

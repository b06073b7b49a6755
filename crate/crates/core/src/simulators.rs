//! Synthetic data generators: Goman–Khrabrov dynamic stall and a linear
//! longitudinal flight model forced by filtered turbulence.

use nalgebra::{DMatrix, Matrix4, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sysid::spectral_radius;
use crate::timeseries::{Channel, RecordedSeries};

/// Lower clamp for the separation point.
pub const SEPARATION_FLOOR: f64 = 1e-9;

pub const GK_LIFT: &str = "C_L";
pub const GK_ALPHA: &str = "alpha";
pub const GK_ALPHA_DOT: &str = "alpha_dot";

/// Steady separation point `x₀(α) = (1 − tanh(20(α − 0.25))) / 2`.
pub fn gk_x0(alpha: f64) -> f64 {
    0.5 * (1.0 - (20.0 * (alpha - 0.25)).tanh())
}

/// Lift coefficient `C_L = (π/2) sin(α (1 + √x)²)`.
pub fn gk_lift(alpha: f64, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("separation point must lie in [0, 1], got {x}")));
    }
    Ok(std::f64::consts::FRAC_PI_2 * (alpha * (1.0 + x.sqrt()).powi(2)).sin())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GkConfig {
    /// Quasisteady time shift.
    pub tau1: f64,
    /// Relaxation time.
    pub tau2: f64,
    /// Pitch angular frequency, rad per time unit.
    pub omega: f64,
    pub alpha_mean: f64,
    pub alpha_amp: f64,
    pub dt: f64,
    pub duration: f64,
    /// Overrides the quasisteady initial separation point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_separation: Option<f64>,
}

impl Default for GkConfig {
    fn default() -> Self {
        Self {
            tau1: 0.5,
            tau2: 4.5,
            omega: 0.05,
            alpha_mean: 0.25,
            alpha_amp: 0.25,
            dt: 0.2,
            duration: 2000.0,
            initial_separation: None,
        }
    }
}

impl GkConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [self.tau1, self.tau2, self.omega, self.alpha_mean, self.alpha_amp, self.dt, self.duration];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("GK parameters must be finite".into()));
        }
        if self.tau2 <= 0.0 {
            return Err(Error::Config(format!("tau2 must be positive, got {}", self.tau2)));
        }
        if self.dt <= 0.0 || self.duration <= self.dt {
            return Err(Error::Config(format!(
                "need 0 < dt < duration, got dt = {}, duration = {}",
                self.dt, self.duration
            )));
        }
        if let Some(x) = self.initial_separation {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::Config(format!("initial separation must lie in [0, 1], got {x}")));
            }
        }
        Ok(())
    }

    pub fn samples(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn alpha(&self, t: f64) -> f64 {
        self.alpha_mean + self.alpha_amp * (self.omega * t).sin()
    }

    pub fn alpha_dot(&self, t: f64) -> f64 {
        self.alpha_amp * self.omega * (self.omega * t).cos()
    }

    fn separation_rate(&self, t: f64, x: f64) -> f64 {
        (gk_x0(self.alpha(t) - self.tau1 * self.alpha_dot(t)) - x) / self.tau2
    }
}

/// Full GK state history, including the internal separation point.
#[derive(Debug, Clone, PartialEq)]
pub struct GkTrajectory {
    pub t: Vec<f64>,
    pub alpha: Vec<f64>,
    pub alpha_dot: Vec<f64>,
    pub separation: Vec<f64>,
    pub lift: Vec<f64>,
}

/// Integrates `τ₂ ẋ + x = x₀(α − τ₁ α̇)` with fixed-step RK4 at the sampling step.
pub fn gk_trajectory(cfg: &GkConfig) -> Result<GkTrajectory> {
    cfg.validate()?;
    let n = cfg.samples();
    let h = cfg.dt;
    let mut x = cfg
        .initial_separation
        .unwrap_or_else(|| gk_x0(cfg.alpha(0.0) - cfg.tau1 * cfg.alpha_dot(0.0)))
        .clamp(SEPARATION_FLOOR, 1.0);
    let mut out = GkTrajectory {
        t: Vec::with_capacity(n),
        alpha: Vec::with_capacity(n),
        alpha_dot: Vec::with_capacity(n),
        separation: Vec::with_capacity(n),
        lift: Vec::with_capacity(n),
    };
    for k in 0..n {
        let t = k as f64 * h;
        let alpha = cfg.alpha(t);
        out.t.push(t);
        out.alpha.push(alpha);
        out.alpha_dot.push(cfg.alpha_dot(t));
        out.separation.push(x);
        out.lift.push(gk_lift(alpha, x)?);

        let k1 = cfg.separation_rate(t, x);
        let k2 = cfg.separation_rate(t + 0.5 * h, x + 0.5 * h * k1);
        let k3 = cfg.separation_rate(t + 0.5 * h, x + 0.5 * h * k2);
        let k4 = cfg.separation_rate(t + h, x + h * k3);
        x = (x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).clamp(SEPARATION_FLOOR, 1.0);
    }
    Ok(out)
}

/// Lift, angle of attack and pitch rate sampled every `dt`.
pub fn gk_simulate(cfg: &GkConfig) -> Result<RecordedSeries> {
    let traj = gk_trajectory(cfg)?;
    RecordedSeries::new(
        vec![
            Channel::new(GK_LIFT, traj.lift),
            Channel::new(GK_ALPHA, traj.alpha),
            Channel::new(GK_ALPHA_DOT, traj.alpha_dot),
        ],
        1.0 / cfg.dt,
        0.0,
    )
}

/// Two cascaded first-order low-pass sections with a shared corner
/// frequency: the `(1 + s L/V)⁻²` denominator of the Dryden spectra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurbulenceFilter {
    /// Corner frequency `V / L` in rad/s.
    pub corner_rad_s: f64,
}

impl Default for TurbulenceFilter {
    fn default() -> Self {
        // 200 m/s through a 533 m scale length
        Self { corner_rad_s: 200.0 / 533.0 }
    }
}

fn turbulence_stream(n: usize, dt: f64, intensity: f64, filter: TurbulenceFilter, seed: u64, stream: u64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("turbulence step must be positive, got {dt}")));
    }
    if !(intensity >= 0.0 && intensity.is_finite()) {
        return Err(Error::Config(format!("turbulence intensity must be nonnegative, got {intensity}")));
    }
    if !(filter.corner_rad_s > 0.0 && filter.corner_rad_s.is_finite()) {
        return Err(Error::Config(format!("corner frequency must be positive, got {}", filter.corner_rad_s)));
    }
    if intensity == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let a = (-filter.corner_rad_s * dt).exp();
    let b = 1.0 - a;
    // stationary variance of the unit-input cascade: b⁴ (1 + a²) / (1 − a²)³
    let var = b.powi(4) * (1.0 + a * a) / (1.0 - a * a).powi(3);
    let gain = intensity / var.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let (mut s1, mut s2) = (0.0, 0.0);
    Ok((0..n)
        .map(|_| {
            let w: f64 = StandardNormal.sample(&mut rng);
            s1 = a * s1 + b * w;
            s2 = a * s2 + b * s1;
            gain * s2
        })
        .collect())
}

/// Band-limited white noise shaped by [`TurbulenceFilter`], scaled to
/// stationary standard deviation `intensity`.
pub fn turbulence_forcing(duration: f64, dt: f64, intensity: f64, filter: TurbulenceFilter, seed: u64) -> Result<Vec<f64>> {
    let n = (duration / dt).round().max(0.0) as usize;
    turbulence_stream(n, dt, intensity, filter, seed, 0)
}

pub const FLIGHT_TAS: &str = "TAS";
pub const FLIGHT_AOA: &str = "AoA";
pub const FLIGHT_INERTIAL_SPEED: &str = "inertial_speed";
pub const FLIGHT_PITCH: &str = "pitch";
pub const FLIGHT_LIFT: &str = "lift";
pub const FLIGHT_THRUST: &str = "thrust";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trim {
    /// m/s
    pub airspeed: f64,
    /// rad
    pub aoa: f64,
    /// rad
    pub pitch: f64,
    /// N
    pub lift: f64,
    /// N per rad of angle-of-attack perturbation
    pub lift_per_rad: f64,
    /// N
    pub thrust: f64,
}

impl Default for Trim {
    fn default() -> Self {
        Self { airspeed: 200.0, aoa: 0.05, pitch: 0.05, lift: 80_000.0, lift_per_rad: 1_000_000.0, thrust: 12_000.0 }
    }
}

/// Continuous-time longitudinal dynamics, state `[u, w, q, θ]`.
///
/// `u`, `w` are forward and vertical speed perturbations (m/s), `q` pitch
/// rate (rad/s) and `θ` pitch perturbation (rad). Row-major 4x4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LongitudinalDynamics {
    pub a: [[f64; 4]; 4],
}

impl Default for LongitudinalDynamics {
    fn default() -> Self {
        // generic jet at 200 m/s: short period ≈ 2.8 rad/s, lightly damped phugoid
        Self {
            a: [
                [-0.02, 0.04, 0.0, -9.81],
                [-0.2, -1.2, 200.0, 0.0],
                [0.0, -0.03, -1.5, 0.0],
                [0.0, 0.0, 1.0, 0.0],
            ],
        }
    }
}

impl LongitudinalDynamics {
    fn matrix(&self) -> Matrix4<f64> {
        Matrix4::from_fn(|i, j| self.a[i][j])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightSimConfig {
    pub dt: f64,
    pub duration: f64,
    /// Gust standard deviation, m/s, for both velocity components.
    pub turbulence_intensity: f64,
    pub filter: TurbulenceFilter,
    pub dynamics: LongitudinalDynamics,
    pub trim: Trim,
    pub seed: u64,
}

impl Default for FlightSimConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            duration: 600.0,
            turbulence_intensity: 1.0,
            filter: TurbulenceFilter::default(),
            dynamics: LongitudinalDynamics::default(),
            trim: Trim::default(),
            seed: 0,
        }
    }
}

impl FlightSimConfig {
    pub fn samples(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    /// One RK4 step of `ẋ = A x` as a matrix.
    fn rk4_step_matrix(&self) -> Matrix4<f64> {
        let ha = self.dynamics.matrix() * self.dt;
        let ha2 = ha * ha;
        let ha3 = ha2 * ha;
        let ha4 = ha3 * ha;
        Matrix4::identity() + ha + ha2 / 2.0 + ha3 / 6.0 + ha4 / 24.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite() && self.duration > self.dt && self.duration.is_finite()) {
            return Err(Error::Config(format!("need 0 < dt < duration, got dt = {}, duration = {}", self.dt, self.duration)));
        }
        if self.dynamics.a.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Config("dynamics matrix must be finite".into()));
        }
        let step = self.rk4_step_matrix();
        let radius = spectral_radius(&DMatrix::from_fn(4, 4, |i, j| step[(i, j)]))?;
        if radius > 1.0 {
            return Err(Error::Config(format!(
                "discretized longitudinal dynamics are unstable (spectral radius {radius:.6})"
            )));
        }
        if self.trim.airspeed <= 0.0 {
            return Err(Error::Config("trim airspeed must be positive".into()));
        }
        Ok(())
    }
}

/// Simulates the longitudinal surrogate and derives the six measured channels.
///
/// Gusts `(u_g, w_g)` enter through the air-relative velocity: the
/// aerodynamic columns of `A` act on `(u − u_g, w − w_g)`. Gusts are held
/// constant across each integration step.
pub fn flight_simulate(cfg: &FlightSimConfig) -> Result<RecordedSeries> {
    cfg.validate()?;
    let n = cfg.samples();
    let gust_u = turbulence_stream(n, cfg.dt, cfg.turbulence_intensity, cfg.filter, cfg.seed, 0)?;
    let gust_w = turbulence_stream(n, cfg.dt, cfg.turbulence_intensity, cfg.filter, cfg.seed, 1)?;
    let a = cfg.dynamics.matrix();
    let trim = cfg.trim;
    let h = cfg.dt;

    let mut tas = Vec::with_capacity(n);
    let mut aoa = Vec::with_capacity(n);
    let mut inertial = Vec::with_capacity(n);
    let mut pitch = Vec::with_capacity(n);
    let mut lift = Vec::with_capacity(n);
    let mut thrust = Vec::with_capacity(n);

    let mut x: Vector4<f64> = Vector4::zeros();
    for k in 0..n {
        let (ug, wg) = (gust_u[k], gust_w[k]);
        let u_rel = x[0] - ug;
        let w_rel = x[1] - wg;
        let alpha = trim.aoa + w_rel.atan2(trim.airspeed + u_rel);
        tas.push((trim.airspeed + u_rel).hypot(w_rel));
        aoa.push(alpha);
        inertial.push((trim.airspeed + x[0]).hypot(x[1]));
        pitch.push(trim.pitch + x[3]);
        lift.push(trim.lift + trim.lift_per_rad * (alpha - trim.aoa));
        thrust.push(trim.thrust);

        let gust = Vector4::new(ug, wg, 0.0, 0.0);
        let f = |s: &Vector4<f64>| {
            let mut rel = *s - gust;
            rel[2] = s[2];
            rel[3] = s[3];
            a * rel
        };
        let k1 = f(&x);
        let k2 = f(&(x + k1 * (0.5 * h)));
        let k3 = f(&(x + k2 * (0.5 * h)));
        let k4 = f(&(x + k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite { value: *bad, context: format!("flight state at step {k}") });
        }
    }
    RecordedSeries::new(
        vec![
            Channel::new(FLIGHT_TAS, tas),
            Channel::new(FLIGHT_AOA, aoa),
            Channel::new(FLIGHT_INERTIAL_SPEED, inertial),
            Channel::new(FLIGHT_PITCH, pitch),
            Channel::new(FLIGHT_LIFT, lift),
            Channel::new(FLIGHT_THRUST, thrust),
        ],
        1.0 / cfg.dt,
        0.0,
    )
}

/// Continuous-time eigenvalues of the longitudinal dynamics.
pub fn longitudinal_modes(dynamics: &LongitudinalDynamics) -> Result<Vec<num_complex::Complex64>> {
    crate::sysid::eigenvalues(&DMatrix::from_fn(4, 4, |i, j| dynamics.a[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn x0_values() {
        assert_eq!(gk_x0(0.25), 0.5);
        assert!(gk_x0(50.0) < 1e-12);
        assert!((1.0 - gk_x0(-50.0)) < 1e-12);
        // (1 - tanh(-5)) / 2
        let expect = 0.5 * (1.0 + 0.999_909_204_262_595_1);
        assert!((gk_x0(0.0) - expect).abs() < 1e-15);
        assert!((gk_x0(0.0) - 0.999_954_6).abs() < 1e-7);
    }

    proptest! {
        #[test]
        fn x0_monotone(a in -1.0f64..1.5, gap in 1e-6f64..0.5) {
            // tanh saturates far from the transition; compare where it is resolvable
            let b = a + gap;
            prop_assert!(gk_x0(a) >= gk_x0(b));
            if (a - 0.25).abs() < 0.8 && (b - 0.25).abs() < 0.8 {
                prop_assert!(gk_x0(a) > gk_x0(b));
            }
        }
    }

    #[test]
    fn lift_values() {
        assert_eq!(gk_lift(0.0, 0.3).unwrap(), 0.0);
        let a: f64 = 0.2;
        assert!((gk_lift(a, 1.0).unwrap() - std::f64::consts::FRAC_PI_2 * (4.0 * a).sin()).abs() < 1e-15);
        assert!((gk_lift(a, 0.0).unwrap() - std::f64::consts::FRAC_PI_2 * a.sin()).abs() < 1e-15);
        assert!(gk_lift(0.1, 1.5).is_err());
        assert!(gk_lift(0.1, -0.1).is_err());
    }

    #[test]
    fn gk_default_length_and_channels() {
        let s = gk_simulate(&GkConfig::default()).unwrap();
        assert_eq!(s.len(), 10_000);
        assert_eq!(s.channel_names(), vec![GK_LIFT, GK_ALPHA, GK_ALPHA_DOT]);
        assert!((s.sample_rate_hz() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn gk_constant_alpha_relaxation() {
        let alpha = 0.3;
        let x_init = 0.95;
        let cfg = GkConfig { alpha_mean: alpha, alpha_amp: 0.0, duration: 60.0, initial_separation: Some(x_init), ..GkConfig::default() };
        let traj = gk_trajectory(&cfg).unwrap();
        let target = gk_x0(alpha);
        for (t, x) in traj.t.iter().zip(&traj.separation) {
            let bound = (x_init - target).abs() * (-t / cfg.tau2).exp() + 1e-6;
            assert!((x - target).abs() <= bound, "t={t}");
        }
    }

    #[test]
    fn gk_state_bounds() {
        let traj = gk_trajectory(&GkConfig::default()).unwrap();
        assert!(traj.separation.iter().all(|&x| x > 0.0 && x <= 1.0));
    }

    #[test]
    fn gk_hysteresis_loop() {
        let cfg = GkConfig::default();
        let traj = gk_trajectory(&cfg).unwrap();
        let period = 2.0 * std::f64::consts::PI / cfg.omega;
        let per = (period / cfg.dt).round() as usize;
        let start = traj.t.len() - per - 1;
        // ∮ x dα by the trapezoid rule over the last full period
        let mut area = 0.0;
        for k in start..start + per {
            area += 0.5 * (traj.separation[k] + traj.separation[k + 1]) * (traj.alpha[k + 1] - traj.alpha[k]);
        }
        assert!(area > 1e-3, "loop area {area}");
        // mid-range: pitch-up separation point exceeds pitch-down at the mean angle
        let (mut up, mut down) = (None, None);
        for k in start..start + per {
            let (a0, a1) = (traj.alpha[k] - cfg.alpha_mean, traj.alpha[k + 1] - cfg.alpha_mean);
            if a0 < 0.0 && a1 >= 0.0 {
                up = Some(traj.separation[k]);
            } else if a0 > 0.0 && a1 <= 0.0 {
                down = Some(traj.separation[k]);
            }
        }
        assert!(up.unwrap() > down.unwrap());
    }

    #[test]
    fn gk_rk4_order() {
        let base = GkConfig { duration: 200.0, dt: 0.8, ..GkConfig::default() };
        let final_x = |dt: f64| *gk_trajectory(&GkConfig { dt, duration: 200.0 + dt, ..base }).unwrap().separation.last().unwrap();
        let (x1, x2, x3) = (final_x(0.8), final_x(0.4), final_x(0.2));
        let order = ((x1 - x2).abs() / (x2 - x3).abs()).log2();
        assert!(order >= 3.5, "measured order {order}");
    }

    #[test]
    fn gk_invalid_config() {
        assert!(gk_simulate(&GkConfig { tau2: 0.0, ..GkConfig::default() }).is_err());
        assert!(gk_simulate(&GkConfig { dt: 0.0, ..GkConfig::default() }).is_err());
        assert!(gk_simulate(&GkConfig { duration: 0.1, dt: 0.2, ..GkConfig::default() }).is_err());
    }

    #[test]
    fn turbulence_zero_and_deterministic() {
        let f = TurbulenceFilter::default();
        assert!(turbulence_forcing(10.0, 0.1, 0.0, f, 1).unwrap().iter().all(|&v| v == 0.0));
        let a = turbulence_forcing(50.0, 0.1, 2.0, f, 4).unwrap();
        assert_eq!(a, turbulence_forcing(50.0, 0.1, 2.0, f, 4).unwrap());
        assert_ne!(a, turbulence_forcing(50.0, 0.1, 2.0, f, 5).unwrap());
        assert_eq!(a.len(), 500);
    }

    #[test]
    fn turbulence_stationary_std() {
        let f = TurbulenceFilter::default();
        let x = turbulence_forcing(50_000.0, 0.1, 1.5, f, 8).unwrap();
        let tail = &x[1000..];
        let var = tail.iter().map(|v| v * v).sum::<f64>() / tail.len() as f64;
        assert!((var.sqrt() / 1.5 - 1.0).abs() < 0.1, "{}", var.sqrt());
    }

    /// Periodogram bin power via a direct DFT sum.
    fn dft_power(x: &[f64], freq_rad_per_sample: f64) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (k, v) in x.iter().enumerate() {
            let ph = freq_rad_per_sample * k as f64;
            re += v * ph.cos();
            im -= v * ph.sin();
        }
        (re * re + im * im) / x.len() as f64
    }

    #[test]
    fn turbulence_spectrum_rolloff() {
        let dt = 0.1;
        let f = TurbulenceFilter::default();
        let n = 1 << 16;
        let x = turbulence_forcing(n as f64 * dt, dt, 1.0, f, 21).unwrap();
        assert_eq!(x.len(), n);
        let bin = 2.0 * std::f64::consts::PI / n as f64;
        let corner = f.corner_rad_s * dt;
        let band = |centre: f64, count: usize| {
            let k0 = (centre / bin).round() as usize;
            (0..count).map(|i| dft_power(&x, (k0 + i) as f64 * bin)).sum::<f64>() / count as f64
        };
        let plateau = band(0.05 * corner, 40);
        let high = band(10.0 * corner, 40);
        let db = 10.0 * (plateau / high).log10();
        assert!(db >= 20.0, "roll-off only {db:.1} dB");
    }

    #[test]
    fn flight_zero_turbulence_is_trim() {
        let cfg = FlightSimConfig { turbulence_intensity: 0.0, ..FlightSimConfig::default() };
        let s = flight_simulate(&cfg).unwrap();
        let trim = cfg.trim;
        let expect = [
            (FLIGHT_TAS, trim.airspeed),
            (FLIGHT_AOA, trim.aoa),
            (FLIGHT_INERTIAL_SPEED, trim.airspeed),
            (FLIGHT_PITCH, trim.pitch),
            (FLIGHT_LIFT, trim.lift),
            (FLIGHT_THRUST, trim.thrust),
        ];
        for (name, value) in expect {
            assert!(s.channel(name).unwrap().iter().all(|&v| v == value), "{name}");
        }
    }

    #[test]
    fn flight_default_length() {
        let s = flight_simulate(&FlightSimConfig::default()).unwrap();
        assert_eq!(s.len(), 6000);
        assert_eq!(s.channels().len(), 6);
        assert!((s.sample_rate_hz() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn flight_default_modes_stable() {
        let modes = longitudinal_modes(&LongitudinalDynamics::default()).unwrap();
        assert!(modes.iter().all(|z| z.re < 0.0), "{modes:?}");
    }

    #[test]
    fn flight_turbulence_bounded_over_seeds() {
        for seed in 0..10 {
            let cfg = FlightSimConfig { seed, ..FlightSimConfig::default() };
            let s = flight_simulate(&cfg).unwrap();
            let tas = s.channel(FLIGHT_TAS).unwrap();
            let mean = tas.iter().sum::<f64>() / tas.len() as f64;
            let var = tas.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / tas.len() as f64;
            assert!(var > 0.0);
            let trim = cfg.trim.airspeed;
            assert!(tas.iter().all(|v| (v - trim).abs() <= 0.2 * trim), "seed {seed}");
            for ch in s.channels() {
                assert!(ch.values.iter().all(|v| v.is_finite()));
            }
        }
    }

    #[test]
    fn flight_deterministic() {
        let cfg = FlightSimConfig { seed: 3, ..FlightSimConfig::default() };
        assert_eq!(flight_simulate(&cfg).unwrap(), flight_simulate(&cfg).unwrap());
    }

    #[test]
    fn flight_rejects_unstable_dynamics() {
        let mut dynamics = LongitudinalDynamics::default();
        dynamics.a[2][2] = 1.5;
        let cfg = FlightSimConfig { dynamics, ..FlightSimConfig::default() };
        assert!(matches!(flight_simulate(&cfg), Err(Error::Config(_))));
    }
}

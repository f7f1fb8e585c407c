//! Link budget, Shannon rates and the network-capacity objective.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{Point2D, Scenario, BS_INDEX};
use crate::problem::{Objective, Separable};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Linear-simplex tolerance for allocation vectors.
pub const SIMPLEX_TOL: f64 = 1e-9;

pub fn db_to_linear(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}

/// dBm/MHz to W/Hz.
pub fn dbm_per_mhz_to_w_per_hz(dbm_per_mhz: f64) -> f64 {
    libm::pow(10.0, (dbm_per_mhz - 30.0) / 10.0) / 1e6
}

/// Gaussian main lobe with a constant side-lobe floor (IEEE 802.15.3c).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaModel {
    pub theta_3db: f64,
    pub theta_ml: f64,
    pub g0_db: f64,
    pub gsl_db: f64,
}

impl AntennaModel {
    pub fn new(theta_3db: f64) -> Result<Self> {
        if !(theta_3db > 0.0 && theta_3db < 180.0) {
            return Err(Error::InvalidArgument(
                "beamwidth must be in (0, 180) degrees",
            ));
        }
        let half = (theta_3db / 2.0).to_radians();
        let ratio = 1.6162 / libm::sin(half);
        let g0_db = 10.0 * libm::log10(ratio * ratio);
        let gsl_db = -0.4111 * libm::log(theta_3db) - 10.579;
        Ok(AntennaModel {
            theta_3db,
            theta_ml: 2.6 * theta_3db,
            g0_db,
            gsl_db,
        })
    }

    /// Gain in dB at `theta` degrees off boresight.
    pub fn gain_db(&self, theta: f64) -> Result<f64> {
        if !(0.0..=180.0).contains(&theta) {
            return Err(Error::InvalidArgument("angle must be in [0, 180] degrees"));
        }
        if theta <= self.theta_ml / 2.0 {
            let r = 2.0 * theta / self.theta_3db;
            Ok(self.g0_db - 3.01 * r * r)
        } else {
            Ok(self.gsl_db)
        }
    }

    pub fn boresight_linear(&self) -> f64 {
        db_to_linear(self.g0_db)
    }
}

pub fn gain_db(theta: f64, antenna: &AntennaModel) -> Result<f64> {
    antenna.gain_db(theta)
}

/// Physical-layer inputs in the units they are usually quoted in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioSettings {
    pub carrier_hz: f64,
    pub path_loss_exp: f64,
    pub pt_mw: f64,
    pub eta: f64,
    pub n0_dbm_per_mhz: f64,
    pub theta_3db_deg: f64,
    pub beta: f64,
    pub p_b: f64,
}

impl Default for RadioSettings {
    /// 60 GHz, n = 2, 1000 mW, eta = 0.5, -134 dBm/MHz, 30 degrees, P_b = 0.2.
    fn default() -> Self {
        RadioSettings {
            carrier_hz: 60e9,
            path_loss_exp: 2.0,
            pt_mw: 1000.0,
            eta: 0.5,
            n0_dbm_per_mhz: -134.0,
            theta_3db_deg: 30.0,
            beta: 1e-7,
            p_b: 0.2,
        }
    }
}

/// Physical-layer constants in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams {
    pub carrier_hz: f64,
    /// `(lambda / 4 pi)^2`.
    pub k0: f64,
    pub path_loss_exp: f64,
    pub pt_watts: f64,
    pub eta: f64,
    pub n0_w_per_hz: f64,
    /// Residual self-interference fraction at the relays.
    pub beta: f64,
    pub p_b: f64,
    pub antenna: AntennaModel,
}

impl RadioParams {
    pub fn new(s: &RadioSettings) -> Result<Self> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(s.carrier_hz) {
            return Err(Error::InvalidArgument("carrier frequency must be positive"));
        }
        if !positive(s.path_loss_exp) {
            return Err(Error::InvalidArgument(
                "path-loss exponent must be positive",
            ));
        }
        if !positive(s.pt_mw) {
            return Err(Error::InvalidArgument("transmit power must be positive"));
        }
        if !(s.eta > 0.0 && s.eta < 1.0) {
            return Err(Error::InvalidArgument("eta must be in (0, 1)"));
        }
        if !s.n0_dbm_per_mhz.is_finite() {
            return Err(Error::InvalidArgument("noise density must be finite"));
        }
        if !(s.beta.is_finite() && s.beta >= 0.0) {
            return Err(Error::InvalidArgument("beta must be non-negative"));
        }
        if !(0.0..1.0).contains(&s.p_b) {
            return Err(Error::InvalidArgument(
                "blockage probability must be in [0, 1)",
            ));
        }
        let lambda = SPEED_OF_LIGHT / s.carrier_hz;
        let k = lambda / (4.0 * core::f64::consts::PI);
        Ok(RadioParams {
            carrier_hz: s.carrier_hz,
            k0: k * k,
            path_loss_exp: s.path_loss_exp,
            pt_watts: s.pt_mw / 1000.0,
            eta: s.eta,
            n0_w_per_hz: dbm_per_mhz_to_w_per_hz(s.n0_dbm_per_mhz),
            beta: s.beta,
            p_b: s.p_b,
            antenna: AntennaModel::new(s.theta_3db_deg)?,
        })
    }

    pub fn table_one() -> Self {
        Self::new(&RadioSettings::default()).expect("default settings are valid")
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    /// Residual self-interference power seen on links of `device`.
    pub fn interference(&self, device: usize) -> f64 {
        if device == BS_INDEX {
            0.0
        } else {
            self.beta * self.pt_watts
        }
    }
}

/// Received power `k0 Gt Gr l^-n Pt` in watts; gains given in dB.
pub fn received_power(
    tx: &Point2D,
    rx: &Point2D,
    params: &RadioParams,
    tx_gain_db: f64,
    rx_gain_db: f64,
) -> Result<f64> {
    let l = tx.distance(rx);
    if l <= 0.0 {
        return Err(Error::ZeroDistance { device: usize::MAX });
    }
    if !(tx_gain_db.is_finite() && rx_gain_db.is_finite()) {
        return Err(Error::InvalidArgument("antenna gains must be finite"));
    }
    let gains = db_to_linear(tx_gain_db) * db_to_linear(rx_gain_db);
    Ok(params.k0 * gains * libm::pow(l, -params.path_loss_exp) * params.pt_watts)
}

/// Shannon rate `eta W log2(1 + Pr / (N0 W + I))`, with the `W -> 0` limit 0.
pub fn user_rate(pr: f64, w_s: f64, interference: f64, params: &RadioParams) -> f64 {
    if w_s <= 0.0 || pr <= 0.0 {
        return 0.0;
    }
    let noise = params.n0_w_per_hz * w_s + interference;
    params.eta * w_s * libm::log2(1.0 + pr / noise)
}

fn check_alpha(alpha: &[f64], devices: usize) -> Result<()> {
    if alpha.len() != devices {
        return Err(Error::DimensionMismatch);
    }
    let sum: f64 = alpha.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL || alpha.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::InvalidArgument(
            "allocation must lie on the unit simplex",
        ));
    }
    Ok(())
}

/// Received powers of one device's serving links plus its self-interference.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceLinks {
    pub received: Vec<f64>,
    pub interference: f64,
}

/// Objective `(1 - P_b) sum_s mean_k R_s(k)` with every serving link's
/// received power precomputed. Both ends of a serving link use boresight gain.
#[derive(Debug, Clone)]
pub struct CapacityModel {
    pub devices: Vec<DeviceLinks>,
    pub w_total: f64,
    pub eta: f64,
    pub n0_w_per_hz: f64,
    pub blockage_factor: f64,
}

impl CapacityModel {
    pub fn new(scenario: &Scenario, w_total: f64, params: &RadioParams) -> Result<Self> {
        if !(w_total.is_finite() && w_total > 0.0) {
            return Err(Error::InvalidArgument("total bandwidth must be positive"));
        }
        let g0 = params.antenna.g0_db;
        let mut devices: Vec<DeviceLinks> = (0..scenario.device_count())
            .map(|s| DeviceLinks {
                received: Vec::new(),
                interference: params.interference(s),
            })
            .collect();
        for (user, &s) in scenario.users.iter().zip(&scenario.association) {
            let tx = scenario.device_position(s);
            let pr = received_power(&tx, user, params, g0, g0)
                .map_err(|_| Error::ZeroDistance { device: s })?;
            devices[s].received.push(pr);
        }
        Ok(CapacityModel {
            devices,
            w_total,
            eta: params.eta,
            n0_w_per_hz: params.n0_w_per_hz,
            blockage_factor: 1.0 - params.p_b,
        })
    }

    pub fn device_count(&self) -> usize {
        self.devices.len()
    }

    pub fn has_users(&self, device: usize) -> bool {
        !self.devices[device].received.is_empty()
    }

    /// Devices with at least one associated user.
    pub fn active_devices(&self) -> Vec<usize> {
        (0..self.device_count())
            .filter(|&s| self.has_users(s))
            .collect()
    }

    /// TDMA-average user rate of `device` at share `a` (no blockage factor).
    pub fn device_avg_rate(&self, device: usize, a: f64) -> Result<f64> {
        let links = &self.devices[device];
        if links.received.is_empty() {
            return Err(Error::UndefinedAverage { device });
        }
        let w_s = self.w_total * a;
        if w_s <= 0.0 {
            return Ok(0.0);
        }
        let noise = self.n0_w_per_hz * w_s + links.interference;
        let sum: f64 = links
            .received
            .iter()
            .map(|&p| libm::log2(1.0 + p / noise))
            .sum();
        Ok(self.eta * w_s * sum / links.received.len() as f64)
    }

    /// Contribution of `device` to the capacity, including `1 - P_b`.
    /// Empty devices contribute nothing.
    pub fn device_term(&self, device: usize, a: f64) -> f64 {
        if !self.has_users(device) {
            return 0.0;
        }
        self.blockage_factor * self.device_avg_rate(device, a).unwrap_or(0.0)
    }

    /// `d term / d a` for one device.
    pub fn device_marginal(&self, device: usize, a: f64) -> Result<f64> {
        let links = &self.devices[device];
        if links.received.is_empty() {
            return Ok(0.0);
        }
        if a <= 0.0 && links.interference <= 0.0 {
            return Err(Error::Singularity { device });
        }
        let c = self.n0_w_per_hz * self.w_total;
        let w_s = self.w_total * a.max(0.0);
        let x = self.n0_w_per_hz * w_s + links.interference;
        let sum: f64 = links
            .received
            .iter()
            .map(|&p| {
                libm::log2(1.0 + p / x)
                    - a.max(0.0) * p * c / (x * (x + p) * core::f64::consts::LN_2)
            })
            .sum();
        Ok(self.blockage_factor * self.eta * self.w_total * sum / links.received.len() as f64)
    }

    /// `d^2 term / d a^2` for one device; always negative for a device with users.
    pub fn device_curvature(&self, device: usize, a: f64) -> Result<f64> {
        let links = &self.devices[device];
        if links.received.is_empty() {
            return Ok(0.0);
        }
        if a <= 0.0 && links.interference <= 0.0 {
            return Err(Error::Singularity { device });
        }
        let c = self.n0_w_per_hz * self.w_total;
        let x = c * a + links.interference;
        let sum: f64 = links
            .received
            .iter()
            .map(|&p| {
                let q = x * (x + p);
                p * c * (-2.0 / q + a * c * (2.0 * x + p) / (q * q))
            })
            .sum();
        Ok(self.blockage_factor * self.eta * self.w_total * sum
            / (core::f64::consts::LN_2 * links.received.len() as f64))
    }

    /// Network capacity in bit/s for a full device-indexed allocation.
    pub fn capacity(&self, alpha: &[f64]) -> Result<f64> {
        if alpha.len() != self.device_count() {
            return Err(Error::DimensionMismatch);
        }
        Ok(alpha
            .iter()
            .enumerate()
            .map(|(s, &a)| self.device_term(s, a))
            .sum())
    }

    /// Analytic gradient of [`CapacityModel::capacity`].
    pub fn gradient(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        if alpha.len() != self.device_count() {
            return Err(Error::DimensionMismatch);
        }
        alpha
            .iter()
            .enumerate()
            .map(|(s, &a)| self.device_marginal(s, a))
            .collect()
    }

    /// View over the devices that have users, for the solvers.
    pub fn reduced(&self) -> ReducedCapacity<'_> {
        ReducedCapacity {
            model: self,
            active: self.active_devices(),
        }
    }

    /// A copy with every received power multiplied by `factor`.
    pub fn scaled_power(&self, factor: f64) -> CapacityModel {
        let mut out = self.clone();
        for d in &mut out.devices {
            d.received.iter_mut().for_each(|p| *p *= factor);
            d.interference *= factor;
        }
        out
    }
}

/// The capacity objective restricted to devices with users; coordinate `i`
/// is device `active[i]`.
#[derive(Debug, Clone)]
pub struct ReducedCapacity<'a> {
    pub model: &'a CapacityModel,
    pub active: Vec<usize>,
}

impl ReducedCapacity<'_> {
    /// Scatter a reduced allocation back to a full device-indexed vector.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut alpha = alloc::vec![0.0; self.model.device_count()];
        for (i, &s) in self.active.iter().enumerate() {
            alpha[s] = x[i];
        }
        alpha
    }
}

impl Objective for ReducedCapacity<'_> {
    fn dim(&self) -> usize {
        self.active.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.active.len() {
            return Err(Error::DimensionMismatch);
        }
        Ok(self
            .active
            .iter()
            .zip(x)
            .map(|(&s, &a)| self.model.device_term(s, a))
            .sum())
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.active.len() || out.len() != x.len() {
            return Err(Error::DimensionMismatch);
        }
        for (i, &s) in self.active.iter().enumerate() {
            out[i] = self.model.device_marginal(s, x[i])?;
        }
        Ok(())
    }
}

impl Separable for ReducedCapacity<'_> {
    fn term(&self, i: usize, a: f64) -> f64 {
        self.model.device_term(self.active[i], a)
    }

    fn marginal(&self, i: usize, a: f64) -> Result<f64> {
        self.model.device_marginal(self.active[i], a)
    }

    fn curvature(&self, i: usize, a: f64) -> Result<f64> {
        self.model.device_curvature(self.active[i], a)
    }
}

/// Average user rate of `device` under allocation `alpha`.
pub fn device_avg_rate(
    scenario: &Scenario,
    device: usize,
    alpha: &[f64],
    w_total: f64,
    params: &RadioParams,
) -> Result<f64> {
    check_alpha(alpha, scenario.device_count())?;
    let model = CapacityModel::new(scenario, w_total, params)?;
    model.device_avg_rate(device, alpha[device])
}

/// `(1 - P_b) (R_BS + sum_i R_i)`; devices without users are skipped.
pub fn network_capacity(
    scenario: &Scenario,
    alpha: &[f64],
    w_total: f64,
    params: &RadioParams,
) -> Result<f64> {
    check_alpha(alpha, scenario.device_count())?;
    CapacityModel::new(scenario, w_total, params)?.capacity(alpha)
}

/// Gradient of [`network_capacity`] with respect to each share.
pub fn capacity_gradient(
    scenario: &Scenario,
    alpha: &[f64],
    w_total: f64,
    params: &RadioParams,
) -> Result<Vec<f64>> {
    CapacityModel::new(scenario, w_total, params)?.gradient(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn two_device_symmetric(p_b: f64, beta: f64) -> (Scenario, RadioParams) {
        // BS at (50, 60), MR at (50, 40); one user 10 m from each.
        let sc = Scenario {
            area_side: 100.0,
            bs_position: Point2D::new(50.0, 60.0),
            mr_positions: vec![Point2D::new(50.0, 40.0)],
            users: vec![Point2D::new(50.0, 70.0), Point2D::new(50.0, 30.0)],
            association: vec![0, 1],
            seed: 0,
        };
        let mut params = RadioParams::table_one().with_beta(beta);
        params.p_b = p_b;
        (sc, params)
    }

    #[test]
    fn antenna_closed_forms() {
        let ant = AntennaModel::new(30.0).unwrap();
        assert_eq!(ant.theta_ml, 2.6 * 30.0);
        assert!((ant.gain_db(0.0).unwrap() - 15.909_977_437_21).abs() < 1e-9);
        assert_eq!(ant.gain_db(15.0).unwrap(), ant.g0_db - 3.01);
        assert!((ant.gain_db(90.0).unwrap() + 11.977_232_243_60).abs() < 1e-9);
        assert!(ant.g0_db > ant.gsl_db);
    }

    #[test]
    fn antenna_main_lobe_edge_jump() {
        let ant = AntennaModel::new(30.0).unwrap();
        let edge = ant.gain_db(ant.theta_ml / 2.0).unwrap();
        assert!((edge - (ant.g0_db - 3.01 * 2.6 * 2.6)).abs() < 1e-12);
        let beyond = ant.gain_db(ant.theta_ml / 2.0 + 1e-9).unwrap();
        assert_eq!(beyond, ant.gsl_db);
        assert!(ant.gain_db(-1.0).is_err());
        assert!(ant.gain_db(180.5).is_err());
    }

    #[test]
    fn table_one_constants() {
        let p = RadioParams::table_one();
        assert!((p.k0 - 1.580_953_793_65e-7).abs() < 1e-17);
        assert!((p.n0_w_per_hz - 3.981_071_705_53e-23).abs() < 1e-32);
        assert_eq!(p.pt_watts, 1.0);
    }

    #[test]
    fn received_power_at_100m() {
        let p = RadioParams::table_one();
        let g0 = p.antenna.g0_db;
        let pr = received_power(
            &Point2D::new(0.0, 0.0),
            &Point2D::new(100.0, 0.0),
            &p,
            g0,
            g0,
        )
        .unwrap();
        // 50-digit evaluation of the same formula
        assert!((pr / 2.403_890_407_686_83e-8 - 1.0).abs() < 1e-12);
        let far = received_power(
            &Point2D::new(0.0, 0.0),
            &Point2D::new(200.0, 0.0),
            &p,
            g0,
            g0,
        )
        .unwrap();
        assert!((pr / far - 4.0).abs() < 1e-12);
        let mut silent = p;
        silent.pt_watts = 0.0;
        assert_eq!(
            received_power(
                &Point2D::new(0.0, 0.0),
                &Point2D::new(1.0, 0.0),
                &silent,
                g0,
                g0
            )
            .unwrap(),
            0.0
        );
        assert!(matches!(
            received_power(&Point2D::new(1.0, 1.0), &Point2D::new(1.0, 1.0), &p, g0, g0),
            Err(Error::ZeroDistance { .. })
        ));
    }

    #[test]
    fn user_rate_values() {
        let p = RadioParams::table_one();
        assert_eq!(user_rate(0.0, 1e8, 0.0, &p), 0.0);
        assert_eq!(user_rate(1e-8, 0.0, 0.0, &p), 0.0);
        // 50-digit oracle: 1126168722.62121216516...
        let r = user_rate(2.40e-8, 1e8, 0.0, &p);
        assert!((r / 1_126_168_722.621_212_2 - 1.0).abs() < 1e-13, "{r}");
    }

    #[test]
    fn averages_and_symmetry() {
        let (sc, p) = two_device_symmetric(0.2, 0.0);
        let alpha = [0.5, 0.5];
        let bs = device_avg_rate(&sc, 0, &alpha, 1e9, &p).unwrap();
        let mr = device_avg_rate(&sc, 1, &alpha, 1e9, &p).unwrap();
        assert_eq!(bs, mr);
        let single = user_rate(
            received_power(
                &sc.bs_position,
                &sc.users[0],
                &p,
                p.antenna.g0_db,
                p.antenna.g0_db,
            )
            .unwrap(),
            0.5e9,
            0.0,
            &p,
        );
        assert_eq!(bs, single);
        let cap = network_capacity(&sc, &alpha, 1e9, &p).unwrap();
        assert!((cap - 2.0 * 0.8 * bs).abs() <= 1e-6 * cap);
    }

    #[test]
    fn two_users_at_equal_distance() {
        let sc = Scenario {
            area_side: 100.0,
            bs_position: Point2D::new(50.0, 50.0),
            mr_positions: vec![Point2D::new(0.0, 0.0)],
            users: vec![Point2D::new(60.0, 50.0), Point2D::new(50.0, 40.0)],
            association: vec![0, 0],
            seed: 0,
        };
        let p = RadioParams::table_one();
        let model = CapacityModel::new(&sc, 1e9, &p).unwrap();
        let avg = model.device_avg_rate(0, 0.3).unwrap();
        let one = user_rate(model.devices[0].received[0], 0.3e9, 0.0, &p);
        assert!((avg - one).abs() <= 1e-9 * one);
        assert!(matches!(
            model.device_avg_rate(1, 0.7),
            Err(Error::UndefinedAverage { device: 1 })
        ));
    }

    #[test]
    fn capacity_limits() {
        let (sc, mut p) = two_device_symmetric(0.2, 1e-7);
        let bs_only = network_capacity(&sc, &[1.0, 0.0], 1e9, &p).unwrap();
        let rbs = device_avg_rate(&sc, 0, &[1.0, 0.0], 1e9, &p).unwrap();
        assert!((bs_only - 0.8 * rbs).abs() <= 1e-9 * bs_only);
        p.p_b = 0.0;
        let full = network_capacity(&sc, &[0.3, 0.7], 1e9, &p).unwrap();
        p.p_b = 0.5;
        let half = network_capacity(&sc, &[0.3, 0.7], 1e9, &p).unwrap();
        assert!((half - 0.5 * full).abs() <= 1e-12 * full);
        // p_b = 1 is excluded from RadioParams but the factor itself goes to zero
        let mut model = CapacityModel::new(&sc, 1e9, &p).unwrap();
        model.blockage_factor = 0.0;
        assert_eq!(model.capacity(&[0.3, 0.7]).unwrap(), 0.0);
        assert!(network_capacity(&sc, &[0.3, 0.6], 1e9, &p).is_err());
    }

    #[test]
    fn gradient_singularity_and_symmetry() {
        let (sc, p) = two_device_symmetric(0.2, 0.0);
        let g = capacity_gradient(&sc, &[0.5, 0.5], 1e9, &p).unwrap();
        assert_eq!(g[0], g[1]);
        assert!(matches!(
            capacity_gradient(&sc, &[0.0, 1.0], 1e9, &p),
            Err(Error::Singularity { device: 0 })
        ));
    }

    #[test]
    fn gradient_near_zero_share_with_interference() {
        // all users on the BS except one relay user; a second relay is empty
        let sc = Scenario {
            area_side: 100.0,
            bs_position: Point2D::new(50.0, 60.0),
            mr_positions: vec![Point2D::new(20.0, 40.0), Point2D::new(80.0, 40.0)],
            users: vec![Point2D::new(50.0, 90.0), Point2D::new(20.0, 30.0)],
            association: vec![0, 1],
            seed: 0,
        };
        let p = RadioParams::table_one().with_beta(1e-7);
        let model = CapacityModel::new(&sc, 1e9, &p).unwrap();
        let alpha = [1.0 - 1e-6, 1e-6, 0.0];
        let g = model.gradient(&alpha).unwrap();
        assert_eq!(g[2], 0.0);
        let h = 1e-8;
        let fd = (model.device_term(1, 1e-6 + h) - model.device_term(1, 1e-6 - h)) / (2.0 * h);
        assert!((g[1] - fd).abs() <= 1e-6 * fd.abs());
        // zero-share limit: (1 - P_b) eta W log2(1 + P / I)
        let pr = model.devices[1].received[0];
        let limit = 0.8 * 0.5 * 1e9 * libm::log2(1.0 + pr / 1e-7);
        assert!((model.device_marginal(1, 0.0).unwrap() - limit).abs() <= 1e-12 * limit);
        assert!((g[1] - limit).abs() <= 1e-3 * limit);
    }

    #[test]
    fn curvature_matches_marginal_difference() {
        let sc = Scenario::generate(500.0, 3, 40, 50.0, 50.0, 4).unwrap();
        let p = RadioParams::table_one().with_beta(1e-9);
        let model = CapacityModel::new(&sc, 1.2e9, &p).unwrap();
        for s in model.active_devices() {
            for &a in &[1e-4, 0.01, 0.3, 0.9] {
                let h = 1e-3 * a;
                let fd = (model.device_marginal(s, a + h).unwrap()
                    - model.device_marginal(s, a - h).unwrap())
                    / (2.0 * h);
                let c = model.device_curvature(s, a).unwrap();
                assert!(c < 0.0);
                assert!((c - fd).abs() <= 1e-4 * c.abs(), "{s} {a} {c} {fd}");
            }
        }
    }

    #[test]
    fn capacity_decreases_with_beta() {
        let sc = Scenario::generate(500.0, 9, 200, 50.0, 50.0, 8).unwrap();
        let alpha = [0.1; 10];
        let mut last = f64::INFINITY;
        for e in [-12, -10, -8, -6, -4] {
            let p = RadioParams::table_one().with_beta(libm::pow(10.0, e as f64));
            let c = network_capacity(&sc, &alpha, 1.2e9, &p).unwrap();
            assert!(c < last);
            last = c;
        }
    }

    #[test]
    fn settings_validation() {
        let bad = RadioSettings {
            eta: 1.0,
            ..RadioSettings::default()
        };
        assert!(RadioParams::new(&bad).is_err());
        let bad = RadioSettings {
            p_b: 1.0,
            ..RadioSettings::default()
        };
        assert!(RadioParams::new(&bad).is_err());
        let bad = RadioSettings {
            beta: -1.0,
            ..RadioSettings::default()
        };
        assert!(RadioParams::new(&bad).is_err());
    }
}

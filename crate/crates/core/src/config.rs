//! System configuration and array geometry.
//!
//! [`SystemConfig`] collects every physical and algorithmic parameter of a
//! scenario: carrier, powers, noise levels, hardware impairment factors,
//! channel-error radii, array layouts, and solver knobs. [`Geometry`]
//! materializes the 3-D element positions implied by a configuration.

use crate::error::{Error, Result};
use crate::scalar::{dbm_to_watts, r, speed_of_light, Real};

/// 3-D point in meters.
pub type Pos<T> = [T; 3];

/// Iteration and numerical knobs for the design algorithms.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions<T> {
    /// Maximum alternating-optimization iterations.
    pub max_iterations: usize,
    /// Convergence threshold on the secrecy-rate increment (bits/s/Hz).
    pub tolerance: T,
    /// Outer refinement passes over the selected-antenna design.
    pub outer_passes: usize,
    /// Lower bound on the useful-signal growth variable in the phase step.
    pub xi1_floor: T,
    /// Upper bound keeping the phase-step growth variable finite.
    pub xi1_cap: T,
    /// Optional penalty weight discouraging large phase updates (0 disables).
    pub phase_reg: T,
    /// Evaluate the eavesdropper combiner on true (perturbed) channels.
    pub eve_true_csi: bool,
    /// Recompute sparse-selection gain references on the surviving candidate
    /// set each pruning round instead of freezing the initial reference.
    pub refresh_sparsity_reference: bool,
    /// Clamp range floor for the power-split factor.
    pub alpha_floor: T,
    /// Relative eigenvalue floor used when inverting interference matrices.
    pub eig_floor: T,
}

impl<T: Real> Default for SolveOptions<T> {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            tolerance: r(1e-3),
            outer_passes: 2,
            xi1_floor: T::zero(),
            xi1_cap: r(1e4),
            phase_reg: T::zero(),
            eve_true_csi: true,
            refresh_sparsity_reference: true,
            alpha_floor: r(1e-6),
            eig_floor: r(1e-12),
        }
    }
}

/// Full scenario description.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig<T> {
    /// Carrier frequency in Hz.
    pub frequency_hz: T,
    /// Number of legitimate users.
    pub num_bobs: usize,
    /// Antennas per legitimate user.
    pub bob_antennas: usize,
    /// Antennas at the eavesdropper.
    pub eve_antennas: usize,
    /// Transmit power budget at the base station, dBm.
    pub bs_power_dbm: T,
    /// Amplification power budget at the reflecting surface, dBm.
    pub ris_power_dbm: T,
    /// Noise power at each legitimate user, dBm.
    pub bob_noise_dbm: T,
    /// Noise power at the eavesdropper, dBm.
    pub eve_noise_dbm: T,
    /// Dynamic noise power introduced by the active surface, dBm.
    pub ris_noise_dbm: T,
    /// Transmitter distortion factor (ratio of distortion to signal power).
    pub tx_impairment: T,
    /// Surface distortion factor (ratio of distortion to reflected power).
    pub ris_impairment: T,
    /// Relative error radius on each cascaded user channel estimate.
    pub err_cascaded_bob: T,
    /// Relative error radius on the cascaded eavesdropper channel estimate.
    pub err_cascaded_eve: T,
    /// Relative error radius on each direct user channel estimate.
    pub err_direct_bob: T,
    /// Relative error radius on the direct eavesdropper channel estimate.
    pub err_direct_eve: T,
    /// Horizontal count of transmit-antenna grid candidates.
    pub grid_h: usize,
    /// Vertical count of transmit-antenna grid candidates.
    pub grid_v: usize,
    /// Number of grid positions actually driven by radio-frequency chains.
    pub selected_antennas: usize,
    /// Candidate-group size used by the grouped placement search.
    pub group_size: usize,
    /// Horizontal count of surface elements.
    pub ris_h: usize,
    /// Vertical count of surface elements.
    pub ris_v: usize,
    /// Grid pitch at the base station, meters.
    pub bs_spacing_m: T,
    /// Element pitch at the surface, meters.
    pub ris_spacing_m: T,
    /// Antenna pitch at the terminals, meters.
    pub terminal_spacing_m: T,
    /// Base-station reference position, meters.
    pub bs_position: Pos<T>,
    /// Surface reference position, meters.
    pub ris_position: Pos<T>,
    /// Legitimate-user reference positions, meters (one per user).
    pub bob_positions: Vec<Pos<T>>,
    /// Eavesdropper reference position, meters.
    pub eve_position: Pos<T>,
    /// Minimum surface aperture for the radiative near-field model to apply,
    /// meters. Set to zero to accept any aperture.
    pub nf_aperture_min_m: T,
    /// Algorithm knobs.
    pub solve: SolveOptions<T>,
}

impl<T: Real> Default for SystemConfig<T> {
    fn default() -> Self {
        Self {
            frequency_hz: r(15e9),
            num_bobs: 2,
            bob_antennas: 4,
            eve_antennas: 4,
            bs_power_dbm: r(30.0),
            ris_power_dbm: r(10.0),
            bob_noise_dbm: r(-60.0),
            eve_noise_dbm: r(-60.0),
            ris_noise_dbm: r(-70.0),
            tx_impairment: r(0.01),
            ris_impairment: r(0.01),
            err_cascaded_bob: r(0.01),
            err_cascaded_eve: r(0.02),
            err_direct_bob: r(0.01),
            err_direct_eve: r(0.02),
            grid_h: 20,
            grid_v: 30,
            selected_antennas: 50,
            group_size: 3,
            ris_h: 25,
            ris_v: 25,
            bs_spacing_m: r(0.01),
            ris_spacing_m: r(0.01),
            terminal_spacing_m: r(0.01),
            bs_position: [r(0.0), r(0.0), r(2.0)],
            ris_position: [r(-1.0), r(10.0), r(1.0)],
            bob_positions: vec![[r(0.0), r(5.0), r(0.0)], [r(0.0), r(15.0), r(0.0)]],
            eve_position: [r(2.0), r(30.0), r(0.0)],
            nf_aperture_min_m: r(0.23),
            solve: SolveOptions::default(),
        }
    }
}

impl<T: Real> SystemConfig<T> {
    /// Carrier wavelength in meters.
    pub fn wavelength(&self) -> T {
        speed_of_light::<T>() / self.frequency_hz
    }

    /// Total number of transmit-grid candidates.
    pub fn grid_total(&self) -> usize {
        self.grid_h * self.grid_v
    }

    /// Total number of surface elements.
    pub fn ris_total(&self) -> usize {
        self.ris_h * self.ris_v
    }

    /// Transmit power budget in watts.
    pub fn bs_power_w(&self) -> T {
        dbm_to_watts(self.bs_power_dbm)
    }

    /// Surface amplification budget in watts.
    pub fn ris_power_w(&self) -> T {
        dbm_to_watts(self.ris_power_dbm)
    }

    /// User noise power in watts.
    pub fn bob_noise_w(&self) -> T {
        dbm_to_watts(self.bob_noise_dbm)
    }

    /// Eavesdropper noise power in watts.
    pub fn eve_noise_w(&self) -> T {
        dbm_to_watts(self.eve_noise_dbm)
    }

    /// Surface dynamic-noise power in watts.
    pub fn ris_noise_w(&self) -> T {
        dbm_to_watts(self.ris_noise_dbm)
    }

    /// Splits a flat grid-candidate index into (horizontal, vertical) indices.
    pub fn grid_index(&self, n: usize) -> (usize, usize) {
        (n / self.grid_v, n % self.grid_v)
    }

    /// Splits a flat surface-element index into (horizontal, vertical) indices.
    pub fn ris_index(&self, m: usize) -> (usize, usize) {
        (m / self.ris_v, m % self.ris_v)
    }

    /// Largest physical dimension of the surface aperture, meters.
    pub fn ris_aperture(&self) -> T {
        let h = r::<T>((self.ris_h.saturating_sub(1)) as f64) * self.ris_spacing_m;
        let v = r::<T>((self.ris_v.saturating_sub(1)) as f64) * self.ris_spacing_m;
        if h > v {
            h
        } else {
            v
        }
    }

    /// Checks internal consistency. Called by every entry point that consumes
    /// a configuration.
    pub fn validate(&self) -> Result<()> {
        fn positive<T: Real>(name: &str, v: T) -> Result<()> {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        }
        fn nonneg<T: Real>(name: &str, v: T) -> Result<()> {
            if v >= T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{name} must be nonnegative, got {v}"
                )))
            }
        }
        positive("frequency_hz", self.frequency_hz)?;
        positive("bs_spacing_m", self.bs_spacing_m)?;
        positive("ris_spacing_m", self.ris_spacing_m)?;
        positive("terminal_spacing_m", self.terminal_spacing_m)?;
        nonneg("tx_impairment", self.tx_impairment)?;
        nonneg("ris_impairment", self.ris_impairment)?;
        nonneg("err_cascaded_bob", self.err_cascaded_bob)?;
        nonneg("err_cascaded_eve", self.err_cascaded_eve)?;
        nonneg("err_direct_bob", self.err_direct_bob)?;
        nonneg("err_direct_eve", self.err_direct_eve)?;
        if !self.bs_power_dbm.is_finite() || !self.ris_power_dbm.is_finite() {
            return Err(Error::Config("power budgets must be finite".into()));
        }
        if self.num_bobs == 0 {
            return Err(Error::Config("need at least one user".into()));
        }
        if self.bob_positions.len() != self.num_bobs {
            return Err(Error::Config(format!(
                "got {} user positions for {} users",
                self.bob_positions.len(),
                self.num_bobs
            )));
        }
        if self.bob_antennas == 0 || self.eve_antennas == 0 {
            return Err(Error::Config("terminal antenna counts must be >= 1".into()));
        }
        if self.grid_h == 0 || self.grid_v == 0 {
            return Err(Error::Config("grid dimensions must be >= 1".into()));
        }
        if self.ris_h == 0 || self.ris_v == 0 {
            return Err(Error::Config("surface dimensions must be >= 1".into()));
        }
        if self.selected_antennas == 0 || self.selected_antennas > self.grid_total() {
            return Err(Error::Config(format!(
                "selected_antennas {} outside 1..={}",
                self.selected_antennas,
                self.grid_total()
            )));
        }
        if self.selected_antennas < self.num_bobs {
            return Err(Error::Config(format!(
                "selected_antennas {} cannot serve {} users",
                self.selected_antennas, self.num_bobs
            )));
        }
        if self.group_size == 0 {
            return Err(Error::Config("group_size must be >= 1".into()));
        }
        if self.ris_aperture() < self.nf_aperture_min_m {
            return Err(Error::Config(format!(
                "surface aperture {} m is below the configured near-field minimum {} m",
                self.ris_aperture(),
                self.nf_aperture_min_m
            )));
        }
        if self.solve.max_iterations == 0 || self.solve.outer_passes == 0 {
            return Err(Error::Config("iteration counts must be >= 1".into()));
        }
        positive("solve.tolerance", self.solve.tolerance)?;
        nonneg("solve.xi1_floor", self.solve.xi1_floor)?;
        positive("solve.xi1_cap", self.solve.xi1_cap)?;
        nonneg("solve.phase_reg", self.solve.phase_reg)?;
        let half = r::<T>(0.5);
        if self.solve.alpha_floor <= T::zero() || self.solve.alpha_floor >= half {
            return Err(Error::Config("alpha_floor must lie in (0, 0.5)".into()));
        }
        positive("solve.eig_floor", self.solve.eig_floor)?;
        Ok(())
    }

    /// Element positions implied by this configuration.
    pub fn geometry(&self) -> Geometry<T> {
        Geometry::from_config(self)
    }
}

/// Concrete 3-D positions of every radiating element in the scenario.
#[derive(Debug, Clone)]
pub struct Geometry<T> {
    /// Transmit-grid candidate positions, indexed like the flat grid index.
    pub bs_elements: Vec<Pos<T>>,
    /// Surface element positions, indexed like the flat surface index.
    pub ris_elements: Vec<Pos<T>>,
    /// Per-user antenna positions.
    pub bob_elements: Vec<Vec<Pos<T>>>,
    /// Eavesdropper antenna positions.
    pub eve_elements: Vec<Pos<T>>,
}

/// Offsets of `count` points centered on zero with the given pitch.
fn centered_offsets<T: Real>(count: usize, pitch: T) -> Vec<T> {
    let mid = r::<T>((count as f64 - 1.0) / 2.0);
    (0..count)
        .map(|i| (r::<T>(i as f64) - mid) * pitch)
        .collect()
}

impl<T: Real> Geometry<T> {
    fn from_config(cfg: &SystemConfig<T>) -> Self {
        // The transmit grid spans the x and z axes around the BS reference.
        let gh = centered_offsets(cfg.grid_h, cfg.bs_spacing_m);
        let gv = centered_offsets(cfg.grid_v, cfg.bs_spacing_m);
        let mut bs_elements = Vec::with_capacity(cfg.grid_total());
        for n in 0..cfg.grid_total() {
            let (ih, iv) = cfg.grid_index(n);
            bs_elements.push([
                cfg.bs_position[0] + gh[ih],
                cfg.bs_position[1],
                cfg.bs_position[2] + gv[iv],
            ]);
        }
        // The surface spans the y and z axes around its reference.
        let sh = centered_offsets(cfg.ris_h, cfg.ris_spacing_m);
        let sv = centered_offsets(cfg.ris_v, cfg.ris_spacing_m);
        let mut ris_elements = Vec::with_capacity(cfg.ris_total());
        for m in 0..cfg.ris_total() {
            let (ih, iv) = cfg.ris_index(m);
            ris_elements.push([
                cfg.ris_position[0],
                cfg.ris_position[1] + sh[ih],
                cfg.ris_position[2] + sv[iv],
            ]);
        }
        // Terminals carry short linear arrays along the x axis.
        let linear = |center: &Pos<T>, count: usize| -> Vec<Pos<T>> {
            centered_offsets(count, cfg.terminal_spacing_m)
                .into_iter()
                .map(|dx| [center[0] + dx, center[1], center[2]])
                .collect()
        };
        let bob_elements = cfg
            .bob_positions
            .iter()
            .map(|p| linear(p, cfg.bob_antennas))
            .collect();
        let eve_elements = linear(&cfg.eve_position, cfg.eve_antennas);
        Self {
            bs_elements,
            ris_elements,
            bob_elements,
            eve_elements,
        }
    }
}

/// Euclidean distance between two points.
pub fn distance<T: Real>(a: &Pos<T>, b: &Pos<T>) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = SystemConfig::<f64>::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.grid_total(), 600);
        assert_eq!(cfg.ris_total(), 625);
        assert!((cfg.wavelength() - 0.019986).abs() < 1e-4);
        assert!((cfg.bs_power_w() - 1.0).abs() < 1e-12);
        assert!((cfg.ris_power_w() - 0.01).abs() < 1e-12);
        assert!((cfg.ris_noise_w() - 1e-10).abs() < 1e-22);
    }

    #[test]
    fn aperture_gate_rejects_small_surfaces() {
        let mut cfg = SystemConfig::<f64>::default();
        cfg.ris_h = 8;
        cfg.ris_v = 8;
        assert!(cfg.validate().is_err());
        cfg.nf_aperture_min_m = 0.0;
        cfg.validate().unwrap();
    }

    #[test]
    fn index_maps_round_trip() {
        let cfg = SystemConfig::<f64>::default();
        for n in [0usize, 1, 29, 30, 599] {
            let (h, v) = cfg.grid_index(n);
            assert_eq!(h * cfg.grid_v + v, n);
            assert!(h < cfg.grid_h && v < cfg.grid_v);
        }
        for m in [0usize, 24, 25, 624] {
            let (h, v) = cfg.ris_index(m);
            assert_eq!(h * cfg.ris_v + v, m);
        }
    }

    #[test]
    fn geometry_counts_and_centering() {
        let cfg = SystemConfig::<f64>::default();
        let geo = cfg.geometry();
        assert_eq!(geo.bs_elements.len(), 600);
        assert_eq!(geo.ris_elements.len(), 625);
        assert_eq!(geo.bob_elements.len(), 2);
        assert_eq!(geo.bob_elements[0].len(), 4);
        assert_eq!(geo.eve_elements.len(), 4);
        // Grid centroid sits on the reference position.
        let mean_x: f64 = geo.bs_elements.iter().map(|p| p[0]).sum::<f64>() / 600.0;
        let mean_z: f64 = geo.bs_elements.iter().map(|p| p[2]).sum::<f64>() / 600.0;
        assert!((mean_x - cfg.bs_position[0]).abs() < 1e-12);
        assert!((mean_z - cfg.bs_position[2]).abs() < 1e-12);
        // Adjacent vertical candidates differ by one pitch in z.
        let d = distance(&geo.bs_elements[0], &geo.bs_elements[1]);
        assert!((d - cfg.bs_spacing_m).abs() < 1e-12);
    }

    #[test]
    fn validation_rejects_inconsistent_setups() {
        let mut cfg = SystemConfig::<f64>::default();
        cfg.selected_antennas = 601;
        assert!(cfg.validate().is_err());

        let mut cfg = SystemConfig::<f64>::default();
        cfg.selected_antennas = 1;
        assert!(cfg.validate().is_err(), "fewer chains than users");

        let mut cfg = SystemConfig::<f64>::default();
        cfg.bob_positions.pop();
        assert!(cfg.validate().is_err());

        let mut cfg = SystemConfig::<f64>::default();
        cfg.group_size = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = SystemConfig::<f64>::default();
        cfg.frequency_hz = -1.0;
        assert!(cfg.validate().is_err());
    }
}

//! Near-field channel synthesis and bounded channel-error draws.
//!
//! Each link is modeled as a rank-one product of spherical-wavefront steering
//! vectors taken at the two array reference points, scaled by a
//! distance-dependent amplitude. Steering phases use the exact per-axis
//! law-of-cosines distance, so the model stays valid when terminals sit inside
//! the radiative near field of the larger apertures.

use crate::config::{distance, Pos, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::fro_norm_sqr;
use crate::rng::{complex_gaussian_mat, SeedPlan, STREAM_CHANNEL_ERROR};
use crate::scalar::{cis, r, Real};
use crate::{CMat, CVec};
use num_complex::Complex;
use rand::Rng;

/// Planar (or degenerate linear) array described by a reference point, two
/// orthonormal in-plane axes, and per-element offsets along those axes.
#[derive(Debug, Clone)]
pub struct ArrayFrame<T> {
    /// Phase reference point of the array.
    pub reference: Pos<T>,
    /// Unit vector of the horizontal in-plane axis.
    pub axis_h: Pos<T>,
    /// Unit vector of the vertical in-plane axis.
    pub axis_v: Pos<T>,
    /// Per-element (horizontal, vertical) offsets in meters.
    pub offsets: Vec<(T, T)>,
}

fn dot3<T: Real>(a: &Pos<T>, b: &Pos<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn diff3<T: Real>(a: &Pos<T>, b: &Pos<T>) -> Pos<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

impl<T: Real> ArrayFrame<T> {
    /// Position of element `i` in global coordinates.
    pub fn element(&self, i: usize) -> Pos<T> {
        let (oh, ov) = self.offsets[i];
        [
            self.reference[0] + oh * self.axis_h[0] + ov * self.axis_v[0],
            self.reference[1] + oh * self.axis_h[1] + ov * self.axis_v[1],
            self.reference[2] + oh * self.axis_h[2] + ov * self.axis_v[2],
        ]
    }

    /// Spherical-wavefront steering vector toward `target`.
    ///
    /// Entry i carries the phase of the extra propagation distance of element
    /// i relative to the array reference, evaluated per axis with the law of
    /// cosines and combined separably.
    pub fn steering(&self, lambda: T, target: &Pos<T>) -> CVec<T> {
        let to_target = diff3(target, &self.reference);
        let rl = dot3(&to_target, &to_target).sqrt();
        let ch = dot3(&to_target, &self.axis_h) / rl;
        let cv = dot3(&to_target, &self.axis_v) / rl;
        let two_pi = r::<T>(2.0) * T::PI();
        CVec::from_iter(self.offsets.iter().map(|&(oh, ov)| {
            let rh = (rl * rl + oh * oh - r::<T>(2.0) * rl * oh * ch).sqrt();
            let rv = (rl * rl + ov * ov - r::<T>(2.0) * rl * ov * cv).sqrt();
            let extra = (rh - rl) + (rv - rl);
            cis(-two_pi * extra / lambda)
        }))
    }
}

/// Builds the per-array frames used for channel synthesis.
pub struct SceneFrames<T> {
    /// Transmit-candidate grid at the base station (x and z axes).
    pub bs: ArrayFrame<T>,
    /// Reflecting surface (y and z axes).
    pub ris: ArrayFrame<T>,
    /// One linear array per user (x axis).
    pub bobs: Vec<ArrayFrame<T>>,
    /// Eavesdropper linear array (x axis).
    pub eve: ArrayFrame<T>,
}

fn centered<T: Real>(count: usize, pitch: T) -> Vec<T> {
    let mid = r::<T>((count as f64 - 1.0) / 2.0);
    (0..count)
        .map(|i| (r::<T>(i as f64) - mid) * pitch)
        .collect()
}

impl<T: Real> SceneFrames<T> {
    /// Derives all frames from a configuration. Offsets follow the same flat
    /// index maps as [`SystemConfig::grid_index`] and [`SystemConfig::ris_index`].
    pub fn new(cfg: &SystemConfig<T>) -> Self {
        let zero = T::zero();
        let one = T::one();
        let xhat: Pos<T> = [one, zero, zero];
        let yhat: Pos<T> = [zero, one, zero];
        let zhat: Pos<T> = [zero, zero, one];

        let gh = centered(cfg.grid_h, cfg.bs_spacing_m);
        let gv = centered(cfg.grid_v, cfg.bs_spacing_m);
        let bs_offsets = (0..cfg.grid_total())
            .map(|n| {
                let (ih, iv) = cfg.grid_index(n);
                (gh[ih], gv[iv])
            })
            .collect();

        let sh = centered(cfg.ris_h, cfg.ris_spacing_m);
        let sv = centered(cfg.ris_v, cfg.ris_spacing_m);
        let ris_offsets = (0..cfg.ris_total())
            .map(|m| {
                let (ih, iv) = cfg.ris_index(m);
                (sh[ih], sv[iv])
            })
            .collect();

        let linear = |center: Pos<T>, count: usize| ArrayFrame {
            reference: center,
            axis_h: xhat,
            axis_v: zhat,
            offsets: centered(count, cfg.terminal_spacing_m)
                .into_iter()
                .map(|o| (o, zero))
                .collect(),
        };

        Self {
            bs: ArrayFrame {
                reference: cfg.bs_position,
                axis_h: xhat,
                axis_v: zhat,
                offsets: bs_offsets,
            },
            ris: ArrayFrame {
                reference: cfg.ris_position,
                axis_h: yhat,
                axis_v: zhat,
                offsets: ris_offsets,
            },
            bobs: cfg
                .bob_positions
                .iter()
                .map(|&p| linear(p, cfg.bob_antennas))
                .collect(),
            eve: linear(cfg.eve_position, cfg.eve_antennas),
        }
    }
}

/// Free-space amplitude of a link of length `d`.
pub fn link_gain<T: Real>(lambda: T, d: T) -> T {
    lambda / (r::<T>(4.0) * T::PI() * d).sqrt()
}

/// Rank-one near-field link matrix between two arrays.
///
/// Rows index the `row` array, columns the `col` array. Every entry has
/// magnitude equal to the link gain at the reference distance.
pub fn rank_one_link<T: Real>(lambda: T, row: &ArrayFrame<T>, col: &ArrayFrame<T>) -> CMat<T> {
    let d = distance(&row.reference, &col.reference);
    let gain = link_gain(lambda, d);
    let two_pi = r::<T>(2.0) * T::PI();
    let carrier = cis::<T>(-two_pi * d / lambda) * Complex::new(gain, T::zero());
    let a_row = row.steering(lambda, &col.reference);
    let a_col = col.steering(lambda, &row.reference);
    CMat::from_shape_fn((a_row.len(), a_col.len()), |(i, j)| {
        carrier * a_row[i] * a_col[j]
    })
}

/// All link matrices of one scenario.
///
/// Shapes follow the composite-channel convention `Q_k = H_k^H + F_k^H diag(t) G`
/// with `t` the surface response: `g` is surface-by-grid, direct links are
/// grid-by-terminal, surface links are surface-by-terminal.
#[derive(Debug, Clone)]
pub struct ChannelSet<T> {
    /// Base station to surface, `M x N`.
    pub g: CMat<T>,
    /// Direct base station to user k, `N x N_k`.
    pub h_bob: Vec<CMat<T>>,
    /// Surface to user k, `M x N_k`.
    pub f_bob: Vec<CMat<T>>,
    /// Direct base station to eavesdropper, `N x N_e`.
    pub h_eve: CMat<T>,
    /// Surface to eavesdropper, `M x N_e`.
    pub f_eve: CMat<T>,
}

impl<T: Real> ChannelSet<T> {
    /// Deterministic channels implied by the configured geometry. These act as
    /// the estimated channels available to the design algorithms.
    pub fn nominal(cfg: &SystemConfig<T>) -> Result<Self> {
        cfg.validate()?;
        let lambda = cfg.wavelength();
        let frames = SceneFrames::new(cfg);
        let g = rank_one_link(lambda, &frames.ris, &frames.bs);
        let h_bob = frames
            .bobs
            .iter()
            .map(|b| rank_one_link(lambda, &frames.bs, b))
            .collect();
        let f_bob = frames
            .bobs
            .iter()
            .map(|b| rank_one_link(lambda, &frames.ris, b))
            .collect();
        let h_eve = rank_one_link(lambda, &frames.bs, &frames.eve);
        let f_eve = rank_one_link(lambda, &frames.ris, &frames.eve);
        Ok(Self {
            g,
            h_bob,
            f_bob,
            h_eve,
            f_eve,
        })
    }

    /// Number of surface elements.
    pub fn ris_count(&self) -> usize {
        self.g.nrows()
    }

    /// Number of transmit-grid candidates.
    pub fn grid_count(&self) -> usize {
        self.g.ncols()
    }

    /// Number of users.
    pub fn num_bobs(&self) -> usize {
        self.h_bob.len()
    }

    /// Draws true channels inside the configured error balls around these
    /// estimates. Direct links use the direct radii, surface-to-terminal links
    /// use the cascaded radii, and the base-station-to-surface link is shared
    /// by all cascades and kept at its estimate. Each perturbation sits on the
    /// boundary of its ball: a random direction scaled to the full radius.
    pub fn perturbed<R: Rng>(&self, cfg: &SystemConfig<T>, rng: &mut R) -> Self {
        let bump = |a: &CMat<T>, radius_rel: T, rng: &mut R| -> CMat<T> {
            let rho = fro_norm_sqr(a).sqrt();
            let radius = radius_rel * rho;
            if radius <= T::zero() {
                return a.clone();
            }
            let z = complex_gaussian_mat::<T, _>(rng, a.nrows(), a.ncols());
            let zn = fro_norm_sqr(&z).sqrt();
            if zn <= T::zero() {
                return a.clone();
            }
            let scale = Complex::new(radius / zn, T::zero());
            a + &z.mapv(|x| x * scale)
        };
        Self {
            g: self.g.clone(),
            h_bob: self
                .h_bob
                .iter()
                .map(|h| bump(h, cfg.err_direct_bob, rng))
                .collect(),
            f_bob: self
                .f_bob
                .iter()
                .map(|f| bump(f, cfg.err_cascaded_bob, rng))
                .collect(),
            h_eve: bump(&self.h_eve, cfg.err_direct_eve, rng),
            f_eve: bump(&self.f_eve, cfg.err_cascaded_eve, rng),
        }
    }

    /// Restricts every grid-side dimension to the listed candidate columns.
    pub fn restrict_grid(&self, keep: &[usize]) -> Result<Self> {
        let n = self.grid_count();
        for &i in keep {
            if i >= n {
                return Err(Error::Dimension(format!(
                    "candidate index {i} outside grid of {n}"
                )));
            }
        }
        let pick_cols = |a: &CMat<T>| -> CMat<T> {
            CMat::from_shape_fn((a.nrows(), keep.len()), |(r0, c0)| a[(r0, keep[c0])])
        };
        let pick_rows = |a: &CMat<T>| -> CMat<T> {
            CMat::from_shape_fn((keep.len(), a.ncols()), |(r0, c0)| a[(keep[r0], c0)])
        };
        Ok(Self {
            g: pick_cols(&self.g),
            h_bob: self.h_bob.iter().map(&pick_rows).collect(),
            f_bob: self.f_bob.clone(),
            h_eve: pick_rows(&self.h_eve),
            f_eve: self.f_eve.clone(),
        })
    }
}

/// Estimated channels plus one true realization drawn from the error model.
#[derive(Debug, Clone)]
pub struct ChannelRealization<T> {
    /// Channels the design algorithms observe.
    pub estimated: ChannelSet<T>,
    /// Channels the physical link actually exhibits.
    pub actual: ChannelSet<T>,
}

/// Builds the estimated channels and one true realization for a seed.
pub fn realize<T: Real>(cfg: &SystemConfig<T>, seeds: &SeedPlan) -> Result<ChannelRealization<T>> {
    let estimated = ChannelSet::nominal(cfg)?;
    let mut rng = seeds.stream(STREAM_CHANNEL_ERROR);
    let actual = estimated.perturbed(cfg, &mut rng);
    Ok(ChannelRealization { estimated, actual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm;
    use crate::Cx;

    fn small_cfg() -> SystemConfig<f64> {
        let mut cfg = SystemConfig::<f64>::default();
        cfg.grid_h = 3;
        cfg.grid_v = 5;
        cfg.selected_antennas = 4;
        cfg.ris_h = 4;
        cfg.ris_v = 4;
        cfg.nf_aperture_min_m = 0.0;
        cfg
    }

    #[test]
    fn frames_match_geometry_positions() {
        let cfg = small_cfg();
        let frames = SceneFrames::new(&cfg);
        let geo = cfg.geometry();
        for n in 0..cfg.grid_total() {
            let a = frames.bs.element(n);
            let b = geo.bs_elements[n];
            for i in 0..3 {
                assert!((a[i] - b[i]).abs() < 1e-12);
            }
        }
        for m in 0..cfg.ris_total() {
            let a = frames.ris.element(m);
            let b = geo.ris_elements[m];
            for i in 0..3 {
                assert!((a[i] - b[i]).abs() < 1e-12);
            }
        }
        for i in 0..cfg.eve_antennas {
            let a = frames.eve.element(i);
            let b = geo.eve_elements[i];
            for d in 0..3 {
                assert!((a[d] - b[d]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn steering_entries_are_unit_modulus() {
        let cfg = small_cfg();
        let frames = SceneFrames::new(&cfg);
        let a = frames.ris.steering(cfg.wavelength(), &cfg.bs_position);
        for x in a.iter() {
            assert!((x.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn link_entries_share_the_reference_gain() {
        let cfg = small_cfg();
        let set = ChannelSet::nominal(&cfg).unwrap();
        let d = distance(&cfg.bs_position, &cfg.ris_position);
        let gain = link_gain(cfg.wavelength(), d);
        for x in set.g.iter() {
            assert!((x.norm() - gain).abs() < 1e-12 * gain);
        }
        assert_eq!(set.g.nrows(), 16);
        assert_eq!(set.g.ncols(), 15);
        assert_eq!(set.h_bob[0].shape(), &[15, 4]);
        assert_eq!(set.f_bob[0].shape(), &[16, 4]);
        assert_eq!(set.h_eve.shape(), &[15, 4]);
        assert_eq!(set.f_eve.shape(), &[16, 4]);
    }

    #[test]
    fn links_are_rank_one() {
        let cfg = small_cfg();
        let set = ChannelSet::nominal(&cfg).unwrap();
        // Every 2x2 minor of a rank-one matrix vanishes.
        let g = &set.g;
        let scale = g[(0, 0)].norm_sqr();
        for i in 1..g.nrows() {
            for j in 1..g.ncols() {
                let minor = g[(0, 0)] * g[(i, j)] - g[(0, j)] * g[(i, 0)];
                assert!(minor.norm() < 1e-10 * scale);
            }
        }
    }

    #[test]
    fn steering_reduces_to_planar_phase_in_far_field() {
        let cfg = small_cfg();
        let lambda = cfg.wavelength();
        let frames = SceneFrames::new(&cfg);
        // A target 100 km away on a known bearing.
        let target = [70_000.0f64, 70_000.0, 20.0];
        let a = frames.bs.steering(lambda, &target);
        let to_t = [
            target[0] - cfg.bs_position[0],
            target[1] - cfg.bs_position[1],
            target[2] - cfg.bs_position[2],
        ];
        let rl = (to_t[0] * to_t[0] + to_t[1] * to_t[1] + to_t[2] * to_t[2]).sqrt();
        let ch = to_t[0] / rl;
        let cv = to_t[2] / rl;
        for (i, &(oh, ov)) in frames.bs.offsets.iter().enumerate() {
            // Planar approximation: extra distance is the projected offset.
            let planar = -(oh * ch + ov * cv);
            let expect = Cx::<f64>::from_polar(1.0, -2.0 * std::f64::consts::PI * planar / lambda);
            assert!((a[i] - expect).norm() < 1e-4, "element {i}");
        }
    }

    #[test]
    fn near_field_curvature_is_visible_up_close() {
        let cfg = small_cfg();
        let lambda = cfg.wavelength();
        let frames = SceneFrames::new(&cfg);
        // Broadside target 30 cm from the surface: quadratic phase across the
        // aperture must deviate from any planar fit by a measurable amount.
        let target = [
            cfg.ris_position[0] + 0.3,
            cfg.ris_position[1],
            cfg.ris_position[2],
        ];
        let a = frames.ris.steering(lambda, &target);
        // Broadside means both direction cosines vanish, so a planar wave
        // would make every entry identical. Curvature breaks that.
        let mut max_dev = 0.0f64;
        for x in a.iter() {
            max_dev = max_dev.max((x - a[0]).norm());
        }
        assert!(max_dev > 0.1, "expected visible wavefront curvature");
    }

    #[test]
    fn perturbation_radius_is_exact_and_seeded() {
        let cfg = small_cfg();
        let set = ChannelSet::nominal(&cfg).unwrap();
        let plan = SeedPlan::new(11);
        let mut rng1 = plan.stream(STREAM_CHANNEL_ERROR);
        let p1 = set.perturbed(&cfg, &mut rng1);
        let mut rng2 = plan.stream(STREAM_CHANNEL_ERROR);
        let p2 = set.perturbed(&cfg, &mut rng2);
        // Deterministic under the same stream.
        assert_eq!(p1.h_eve, p2.h_eve);
        // g is shared and unperturbed.
        assert_eq!(p1.g, set.g);
        // Relative radii land exactly on the boundary.
        let dh = &p1.h_bob[0] - &set.h_bob[0];
        let rel = fro_norm_sqr(&dh).sqrt() / fro_norm_sqr(&set.h_bob[0]).sqrt();
        assert!((rel - cfg.err_direct_bob).abs() < 1e-12);
        let df = &p1.f_eve - &set.f_eve;
        let rel = fro_norm_sqr(&df).sqrt() / fro_norm_sqr(&set.f_eve).sqrt();
        assert!((rel - cfg.err_cascaded_eve).abs() < 1e-12);
    }

    #[test]
    fn restrict_grid_keeps_selected_columns() {
        let cfg = small_cfg();
        let set = ChannelSet::nominal(&cfg).unwrap();
        let keep = vec![0usize, 3, 7, 14];
        let sub = set.restrict_grid(&keep).unwrap();
        assert_eq!(sub.g.ncols(), 4);
        assert_eq!(sub.h_bob[0].nrows(), 4);
        for (c_new, &c_old) in keep.iter().enumerate() {
            for m in 0..set.g.nrows() {
                assert_eq!(sub.g[(m, c_new)], set.g[(m, c_old)]);
            }
            for j in 0..cfg.bob_antennas {
                assert_eq!(sub.h_bob[1][(c_new, j)], set.h_bob[1][(c_old, j)]);
            }
        }
        assert!(set.restrict_grid(&[99]).is_err());
    }

    #[test]
    fn gain_decays_with_distance() {
        let lambda = 0.02f64;
        let g1 = link_gain(lambda, 5.0);
        let g2 = link_gain(lambda, 20.0);
        assert!((g1 / g2 - 2.0).abs() < 1e-12);
        let v = CVec::from_vec(vec![Cx::new(g1, 0.0)]);
        assert!(norm(&v) > 0.0);
    }
}

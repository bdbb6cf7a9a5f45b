//! Transmit-signal model and achievable-rate evaluation.
//!
//! The base station sends, per user, an information beam plus an artificial
//! noise beam drawn from the same power budget. Rates account for multi-user
//! interference, artificial-noise leakage, transmitter and surface hardware
//! distortion, surface dynamic noise, and thermal noise. The legitimate links
//! carry the full distortion model; the eavesdropper is treated as immune to
//! surface distortion, which overestimates its rate and keeps designs on the
//! safe side.

use crate::channel::ChannelSet;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{cdot, dagger, norm, norm_sqr};
use crate::scalar::{r, Real};
use crate::{CMat, CVec, Cx, RVec};
use num_complex::Complex;
use num_traits::Zero;

/// Active transmit-grid candidates out of a larger grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    /// Total number of grid candidates.
    pub total: usize,
    /// Sorted indices of the driven candidates.
    pub active: Vec<usize>,
}

impl Selection {
    /// Builds a selection, sorting and validating the index list.
    pub fn new(total: usize, mut active: Vec<usize>) -> Result<Self> {
        active.sort_unstable();
        active.dedup();
        if let Some(&last) = active.last() {
            if last >= total {
                return Err(Error::Dimension(format!(
                    "candidate index {last} outside grid of {total}"
                )));
            }
        }
        Ok(Self { total, active })
    }

    /// Selects every candidate.
    pub fn full(total: usize) -> Self {
        Self {
            total,
            active: (0..total).collect(),
        }
    }

    /// Number of driven candidates.
    pub fn count(&self) -> usize {
        self.active.len()
    }

    /// Binary mask over the grid.
    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.total];
        for &i in &self.active {
            m[i] = true;
        }
        m
    }

    /// Zeroes the entries of `x` outside the selection.
    pub fn project<T: Real>(&self, x: &CVec<T>) -> CVec<T> {
        let mask = self.mask();
        CVec::from_shape_fn(x.len(), |i| if mask[i] { x[i] } else { Cx::<T>::zero() })
    }

    /// Energy of `x` outside the selection, relative to its total energy.
    pub fn leakage<T: Real>(&self, x: &CVec<T>) -> T {
        let mask = self.mask();
        let mut outside = T::zero();
        let mut total = T::zero();
        for (i, v) in x.iter().enumerate() {
            let p = v.norm_sqr();
            total += p;
            if !mask[i] {
                outside += p;
            }
        }
        if total > T::zero() {
            outside / total
        } else {
            T::zero()
        }
    }
}

/// Channels combined through a fixed surface response.
#[derive(Debug, Clone)]
pub struct CompositeChannels<T> {
    /// Surface response used for the composition.
    pub theta: CVec<T>,
    /// Per-user composite channel `H_k^H + F_k^H diag(theta) G`, `N_k x N`.
    pub q_bob: Vec<CMat<T>>,
    /// Eavesdropper composite channel, `N_e x N`.
    pub q_eve: CMat<T>,
    /// Per-user Gram matrix of the surface-to-user path,
    /// `(F_k^H diag(theta)) (F_k^H diag(theta))^H`, used for the dynamic-noise
    /// power seen through the surface.
    pub ris_gram_bob: Vec<CMat<T>>,
    /// Same Gram matrix for the eavesdropper.
    pub ris_gram_eve: CMat<T>,
}

/// Scales the columns of `f^H` by the surface response: returns `F^H diag(theta)`.
fn surface_path<T: Real>(f: &CMat<T>, theta: &CVec<T>) -> CMat<T> {
    let fh = dagger(f);
    CMat::from_shape_fn(fh.dim(), |(i, m)| fh[(i, m)] * theta[m])
}

/// Combines raw links and a surface response into composite channels.
pub fn compose<T: Real>(channels: &ChannelSet<T>, theta: &CVec<T>) -> Result<CompositeChannels<T>> {
    if theta.len() != channels.ris_count() {
        return Err(Error::Dimension(format!(
            "surface response length {} does not match {} elements",
            theta.len(),
            channels.ris_count()
        )));
    }
    let mut q_bob = Vec::with_capacity(channels.num_bobs());
    let mut ris_gram_bob = Vec::with_capacity(channels.num_bobs());
    for k in 0..channels.num_bobs() {
        let path = surface_path(&channels.f_bob[k], theta);
        q_bob.push(dagger(&channels.h_bob[k]) + path.dot(&channels.g));
        ris_gram_bob.push(path.dot(&dagger(&path)));
    }
    let path_e = surface_path(&channels.f_eve, theta);
    let q_eve = dagger(&channels.h_eve) + path_e.dot(&channels.g);
    let ris_gram_eve = path_e.dot(&dagger(&path_e));
    Ok(CompositeChannels {
        theta: theta.clone(),
        q_bob,
        q_eve,
        ris_gram_bob,
        ris_gram_eve,
    })
}

/// Cascaded surface channel for one user under a fixed combiner:
/// `diag(u^H F^H) G`, one row per surface element.
pub fn cascaded_rows<T: Real>(g: &CMat<T>, f: &CMat<T>, u: &CVec<T>) -> CMat<T> {
    let (m, n) = (g.nrows(), g.ncols());
    // row m of the cascade is (u^H F^H)_m * G[m, :]
    let uf = CVec::from_shape_fn(m, |mm| {
        (0..u.len()).fold(Cx::<T>::zero(), |acc, i| acc + u[i].conj() * f[(mm, i)].conj())
    });
    CMat::from_shape_fn((m, n), |(mm, nn)| uf[mm] * g[(mm, nn)])
}

/// Cascade stacked with the combined direct channel: `(M+1) x N`, whose last
/// row is `u^H H^H`. With the extended response `[theta; 1]` this reproduces
/// the combined composite channel exactly.
pub fn stacked_cascade<T: Real>(g: &CMat<T>, f: &CMat<T>, h: &CMat<T>, u: &CVec<T>) -> CMat<T> {
    let casc = cascaded_rows(g, f, u);
    let (m, n) = (casc.nrows(), casc.ncols());
    CMat::from_shape_fn((m + 1, n), |(i, j)| {
        if i < m {
            casc[(i, j)]
        } else {
            // (u^H H^H)_j = sum_r conj(u_r) conj(h[j, r])
            (0..u.len()).fold(Cx::<T>::zero(), |acc, rr| {
                acc + u[rr].conj() * h[(j, rr)].conj()
            })
        }
    })
}

/// Per-user split of one precoder into an information beam and an artificial
/// noise beam.
#[derive(Debug, Clone)]
pub struct UserSplit<T> {
    /// Unit-norm information beam direction.
    pub v: CVec<T>,
    /// Unit-norm artificial-noise direction, or zero when the split is
    /// degenerate (precoder already aligned with the matched filter).
    pub v_an: CVec<T>,
    /// Fraction of this user's power carried by the information beam.
    pub alpha: T,
    /// Amplitude correction on the artificial-noise beam making the
    /// recomposition exact; 1 whenever the power closure holds.
    pub an_scale: T,
}

impl<T: Real> UserSplit<T> {
    /// Effective artificial-noise vector including the amplitude correction.
    pub fn an_effective(&self) -> CVec<T> {
        self.v_an
            .mapv(|x| x * Complex::new(self.an_scale, T::zero()))
    }
}

/// Complete transmit and receive design for one scenario.
#[derive(Debug, Clone)]
pub struct BeamformerState<T> {
    /// Per-user precoders over the full grid, zero outside the selection.
    pub w: Vec<CVec<T>>,
    /// Per-user information/noise split of each precoder.
    pub split: Vec<UserSplit<T>>,
    /// Per-user receive combiners, unit norm.
    pub u_bob: Vec<CVec<T>>,
    /// Per-stream eavesdropper combiners, unit norm.
    pub u_eve: Vec<CVec<T>>,
}

impl<T: Real> BeamformerState<T> {
    /// Mean information-power fraction across users.
    pub fn mean_alpha(&self) -> T {
        if self.split.is_empty() {
            return T::zero();
        }
        let s: T = self.split.iter().map(|s| s.alpha).sum();
        s / r::<T>(self.split.len() as f64)
    }
}

/// Splits one precoder against its composite channel and combiner.
///
/// The information direction is the matched filter of the combined channel,
/// phased so that its overlap with the precoder is real positive. The
/// information-power fraction follows by projection, and the artificial-noise
/// direction is the normalized residual, which is orthogonal to the
/// information beam and invisible to the user's own combiner.
pub fn split_precoder<T: Real>(
    cfg: &SystemConfig<T>,
    q: &CMat<T>,
    u: &CVec<T>,
    w: &CVec<T>,
) -> UserSplit<T> {
    let kk = r::<T>(cfg.num_bobs as f64);
    let per_user = cfg.bs_power_w() / kk;
    // Matched-filter direction of the combined channel: (u^H Q)^H.
    let qu = {
        let n = q.ncols();
        CVec::from_shape_fn(n, |j| {
            (0..u.len()).fold(Cx::<T>::zero(), |acc, i| acc + q[(i, j)].conj() * u[i])
        })
    };
    let qu_norm = norm(&qu);
    if qu_norm <= T::zero() {
        // Dead channel: everything counts as artificial noise.
        let wn = norm(w);
        let v_an = if wn > T::zero() {
            w.mapv(|x| x / Complex::new(wn, T::zero()))
        } else {
            CVec::from_elem(w.len(), Cx::<T>::zero())
        };
        return UserSplit {
            v: CVec::from_elem(w.len(), Cx::<T>::zero()),
            v_an,
            alpha: T::zero(),
            an_scale: if per_user > T::zero() {
                wn / per_user.sqrt()
            } else {
                T::zero()
            },
        };
    }
    // Overlap of the precoder with the combined channel.
    let overlap = cdot(&qu, w);
    let alpha = kk * overlap.norm_sqr() / (cfg.bs_power_w() * qu_norm * qu_norm);
    let phase = if overlap.norm() > T::zero() {
        overlap / Complex::new(overlap.norm(), T::zero())
    } else {
        Complex::new(T::one(), T::zero())
    };
    let v = qu.mapv(|x| x * phase / Complex::new(qu_norm, T::zero()));
    let amp = (alpha * per_user).sqrt();
    let resid = CVec::from_shape_fn(w.len(), |i| w[i] - v[i] * Complex::new(amp, T::zero()));
    let kappa = norm(&resid);
    let ceiling = T::one() - cfg.solve.alpha_floor;
    if alpha >= ceiling || kappa <= T::zero() {
        // Precoder already aligned with the matched filter: no noise beam.
        return UserSplit {
            v,
            v_an: CVec::from_elem(w.len(), Cx::<T>::zero()),
            alpha,
            an_scale: T::zero(),
        };
    }
    let v_an = resid.mapv(|x| x / Complex::new(kappa, T::zero()));
    let an_power = (T::one() - alpha) * per_user;
    let an_scale = if an_power > T::zero() {
        kappa / an_power.sqrt()
    } else {
        T::zero()
    };
    UserSplit {
        v,
        v_an,
        alpha,
        an_scale,
    }
}

/// Degenerate split used while iterating: the whole precoder is treated as the
/// information beam with no artificial noise.
pub fn plain_split<T: Real>(w: &CVec<T>, per_user_power: T) -> UserSplit<T> {
    let wn = norm(w);
    let v = if wn > T::zero() {
        w.mapv(|x| x / Complex::new(wn, T::zero()))
    } else {
        CVec::from_elem(w.len(), Cx::<T>::zero())
    };
    // Report the fraction actually carried in case the precoder is not at
    // full per-user power.
    let alpha = if per_user_power > T::zero() {
        (wn * wn / per_user_power).min(T::one())
    } else {
        T::zero()
    };
    UserSplit {
        v,
        v_an: CVec::from_elem(w.len(), Cx::<T>::zero()),
        alpha,
        an_scale: T::zero(),
    }
}

impl<T: Real> BeamformerState<T> {
    /// State with full information/noise splits derived from the precoders.
    pub fn decomposed(
        cfg: &SystemConfig<T>,
        comp: &CompositeChannels<T>,
        w: Vec<CVec<T>>,
        u_bob: Vec<CVec<T>>,
        u_eve: Vec<CVec<T>>,
    ) -> Self {
        let split = (0..w.len())
            .map(|k| split_precoder(cfg, &comp.q_bob[k], &u_bob[k], &w[k]))
            .collect();
        Self {
            w,
            split,
            u_bob,
            u_eve,
        }
    }

    /// State that treats each precoder as pure information (no noise beams).
    pub fn plain(
        cfg: &SystemConfig<T>,
        w: Vec<CVec<T>>,
        u_bob: Vec<CVec<T>>,
        u_eve: Vec<CVec<T>>,
    ) -> Self {
        let per_user = cfg.bs_power_w() / r::<T>(cfg.num_bobs as f64);
        let split = w.iter().map(|wk| plain_split(wk, per_user)).collect();
        Self {
            w,
            split,
            u_bob,
            u_eve,
        }
    }
}

/// Diagonal of the transmit-signal covariance over the grid, in watts.
pub fn transmit_covariance_diag<T: Real>(
    cfg: &SystemConfig<T>,
    state: &BeamformerState<T>,
) -> RVec<T> {
    let n = state.w.first().map(|w| w.len()).unwrap_or(0);
    let per_user = cfg.bs_power_w() / r::<T>(cfg.num_bobs as f64);
    let mut d = RVec::zeros(n);
    for s in &state.split {
        let sig = s.alpha * per_user;
        let an = (T::one() - s.alpha) * per_user * s.an_scale * s.an_scale;
        for i in 0..n {
            d[i] += sig * s.v[i].norm_sqr() + an * s.v_an[i].norm_sqr();
        }
    }
    d
}

/// Quadratic form `u^H Q diag(d) Q^H u`.
fn diag_quadratic<T: Real>(q: &CMat<T>, d: &RVec<T>, u: &CVec<T>) -> T {
    let (rows, cols) = q.dim();
    let mut acc = T::zero();
    for j in 0..cols {
        let mut col = Cx::<T>::zero();
        for i in 0..rows {
            col += u[i].conj() * q[(i, j)];
        }
        acc += d[j] * col.norm_sqr();
    }
    acc
}

/// Combined-channel response `u^H Q x`.
fn combined_response<T: Real>(q: &CMat<T>, u: &CVec<T>, x: &CVec<T>) -> Cx<T> {
    let (rows, cols) = q.dim();
    let mut acc = Cx::<T>::zero();
    for i in 0..rows {
        let mut row = Cx::<T>::zero();
        for j in 0..cols {
            row += q[(i, j)] * x[j];
        }
        acc += u[i].conj() * row;
    }
    acc
}

/// Additive power pieces of one legitimate link.
#[derive(Debug, Clone, Copy)]
pub struct BobPieces<T> {
    /// Information power captured by the combiner.
    pub useful: T,
    /// Multi-user interference power.
    pub mui: T,
    /// Artificial-noise leakage power.
    pub an_leak: T,
    /// Transmit-distortion power, including its surface-reflected share.
    pub tx_distortion: T,
    /// Surface-distortion power.
    pub ris_distortion: T,
    /// Surface dynamic-noise power.
    pub ris_noise: T,
    /// Thermal noise power.
    pub thermal: T,
    /// Resulting signal-to-interference-plus-noise ratio.
    pub sinr: T,
    /// Achievable rate, bits/s/Hz.
    pub rate: T,
}

/// Additive power pieces of the eavesdropper's view of one stream.
#[derive(Debug, Clone, Copy)]
pub struct EvePieces<T> {
    /// Power of the targeted stream at the eavesdropper.
    pub useful: T,
    /// Other streams plus artificial noise.
    pub mui_an: T,
    /// Transmit-distortion power.
    pub tx_distortion: T,
    /// Surface dynamic-noise power.
    pub ris_noise: T,
    /// Thermal noise power.
    pub thermal: T,
    /// Interception signal-to-interference-plus-noise ratio.
    pub sinr: T,
    /// Interception rate, bits/s/Hz.
    pub rate: T,
}

/// Full rate breakdown of a design.
#[derive(Debug, Clone)]
pub struct RateReport<T> {
    /// Per-user legitimate-link pieces.
    pub bob: Vec<BobPieces<T>>,
    /// Per-stream eavesdropper pieces.
    pub eve: Vec<EvePieces<T>>,
    /// Sum rate of the legitimate links.
    pub rate_bob_sum: T,
    /// Sum interception rate.
    pub rate_eve_sum: T,
    /// Secrecy sum rate, clipped at zero.
    pub secrecy: T,
    /// Mean information-power fraction.
    pub alpha: T,
}

fn log2p1<T: Real>(x: T) -> T {
    (T::one() + x).ln() / r::<T>(std::f64::consts::LN_2)
}

/// Evaluates the achievable-rate model for a design against composite channels.
pub fn rate_report<T: Real>(
    cfg: &SystemConfig<T>,
    comp: &CompositeChannels<T>,
    state: &BeamformerState<T>,
) -> Result<RateReport<T>> {
    let kk = cfg.num_bobs;
    if state.w.len() != kk || state.u_bob.len() != kk || state.u_eve.len() != kk {
        return Err(Error::Dimension(format!(
            "state sized for {} users, config has {kk}",
            state.w.len()
        )));
    }
    let per_user = cfg.bs_power_w() / r::<T>(kk as f64);
    let mu_t = cfg.tx_impairment;
    let mu_r = cfg.ris_impairment;
    let sig_b = cfg.bob_noise_w();
    let sig_e = cfg.eve_noise_w();
    let sig_r = cfg.ris_noise_w();
    let one_mu = T::one() + mu_r;
    let tx_diag = transmit_covariance_diag(cfg, state);

    // Per-user information and noise amplitudes.
    let sig_pow: Vec<T> = state.split.iter().map(|s| s.alpha * per_user).collect();
    let an_pow: Vec<T> = state
        .split
        .iter()
        .map(|s| (T::one() - s.alpha) * per_user * s.an_scale * s.an_scale)
        .collect();

    let mut bob = Vec::with_capacity(kk);
    let mut rate_bob_sum = T::zero();
    for k in 0..kk {
        let q = &comp.q_bob[k];
        let u = &state.u_bob[k];
        let useful = sig_pow[k] * combined_response(q, u, &state.split[k].v).norm_sqr();
        let mut mui = T::zero();
        let mut an_leak = T::zero();
        for i in 0..kk {
            if i != k {
                mui += sig_pow[i] * combined_response(q, u, &state.split[i].v).norm_sqr();
            }
            an_leak += an_pow[i] * combined_response(q, u, &state.split[i].v_an).norm_sqr();
        }
        let tx_distortion = one_mu * mu_t * diag_quadratic(q, &tx_diag, u);
        let ris_noise = sig_r * {
            let g = &comp.ris_gram_bob[k];
            let mut acc = T::zero();
            for i in 0..u.len() {
                for j in 0..u.len() {
                    acc += (u[i].conj() * g[(i, j)] * u[j]).re;
                }
            }
            acc
        };
        let thermal = sig_b;
        let ris_distortion = mu_r * (useful + mui + an_leak + thermal);
        let den = mui + an_leak + tx_distortion + ris_distortion + ris_noise + thermal;
        let sinr = if den > T::zero() { useful / den } else { T::zero() };
        let rate = log2p1(sinr);
        rate_bob_sum += rate;
        bob.push(BobPieces {
            useful,
            mui,
            an_leak,
            tx_distortion,
            ris_distortion,
            ris_noise,
            thermal,
            sinr,
            rate,
        });
    }

    let mut eve = Vec::with_capacity(kk);
    let mut rate_eve_sum = T::zero();
    for k in 0..kk {
        let q = &comp.q_eve;
        let u = &state.u_eve[k];
        let useful = sig_pow[k] * combined_response(q, u, &state.split[k].v).norm_sqr();
        let mut mui_an = T::zero();
        for i in 0..kk {
            if i != k {
                mui_an += sig_pow[i] * combined_response(q, u, &state.split[i].v).norm_sqr();
            }
            mui_an += an_pow[i] * combined_response(q, u, &state.split[i].v_an).norm_sqr();
        }
        let tx_distortion = mu_t * diag_quadratic(q, &tx_diag, u);
        let ris_noise = sig_r * {
            let g = &comp.ris_gram_eve;
            let mut acc = T::zero();
            for i in 0..u.len() {
                for j in 0..u.len() {
                    acc += (u[i].conj() * g[(i, j)] * u[j]).re;
                }
            }
            acc
        };
        let thermal = sig_e;
        let den = mui_an + tx_distortion + ris_noise + thermal;
        let sinr = if den > T::zero() { useful / den } else { T::zero() };
        let rate = log2p1(sinr);
        rate_eve_sum += rate;
        eve.push(EvePieces {
            useful,
            mui_an,
            tx_distortion,
            ris_noise,
            thermal,
            sinr,
            rate,
        });
    }

    let secrecy = {
        let diff = rate_bob_sum - rate_eve_sum;
        if diff > T::zero() {
            diff
        } else {
            T::zero()
        }
    };
    Ok(RateReport {
        bob,
        eve,
        rate_bob_sum,
        rate_eve_sum,
        secrecy,
        alpha: state.mean_alpha(),
    })
}

/// Power drawn by the amplifying surface: reflected signal power plus
/// amplified dynamic noise, summed over elements.
pub fn ris_power_used<T: Real>(
    channels: &ChannelSet<T>,
    state: &BeamformerState<T>,
    theta: &CVec<T>,
    ris_noise_w: T,
) -> T {
    let m = channels.ris_count();
    let mut incident = RVec::<T>::zeros(m);
    for w in &state.w {
        let gw = channels.g.dot(w);
        for i in 0..m {
            incident[i] += gw[i].norm_sqr();
        }
    }
    (0..m)
        .map(|i| (incident[i] + ris_noise_w) * theta[i].norm_sqr())
        .sum()
}

/// Worst-case feasibility residuals of a full design. All residuals are
/// dimensionless and zero for an exactly feasible design.
#[derive(Debug, Clone, Copy)]
pub struct ConstraintReport<T> {
    /// Deviation of information beams from unit norm.
    pub beam_norm: T,
    /// Selection integrity: 0 when exactly the requested number of distinct
    /// candidates is driven and all precoder energy sits on them.
    pub selection: T,
    /// Relative surface power overdraw, 0 when within budget.
    pub ris_power_excess: T,
    /// Deviation of combiners from unit norm.
    pub combiner_norm: T,
    /// Relative deviation of each precoder from its per-user power share.
    pub per_user_power: T,
    /// Relative error in the information/noise power closure.
    pub split_closure: T,
    /// Leakage of each user's own noise beam into its combined channel,
    /// relative to the matched-filter gain.
    pub own_an_leak: T,
}

impl<T: Real> ConstraintReport<T> {
    /// Largest residual across all constraint families.
    pub fn worst(&self) -> T {
        [
            self.beam_norm,
            self.selection,
            self.ris_power_excess,
            self.combiner_norm,
            self.per_user_power,
            self.split_closure,
            self.own_an_leak,
        ]
        .into_iter()
        .fold(T::zero(), |m, x| if x > m { x } else { m })
    }
}

/// Evaluates every design constraint of a full solution.
pub fn constraint_report<T: Real>(
    cfg: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    comp: &CompositeChannels<T>,
    state: &BeamformerState<T>,
    selection: &Selection,
) -> ConstraintReport<T> {
    let per_user = cfg.bs_power_w() / r::<T>(cfg.num_bobs as f64);
    let mut beam_norm = T::zero();
    let mut per_user_power = T::zero();
    let mut split_closure = T::zero();
    let mut own_an_leak = T::zero();
    let mut selection_resid = if selection.count() == cfg.selected_antennas {
        T::zero()
    } else {
        T::one()
    };
    for k in 0..state.w.len() {
        let s = &state.split[k];
        if norm_sqr(&s.v) > T::zero() {
            let d = (norm(&s.v) - T::one()).abs();
            if d > beam_norm {
                beam_norm = d;
            }
        }
        if norm_sqr(&s.v_an) > T::zero() {
            let d = (norm(&s.v_an) - T::one()).abs();
            if d > beam_norm {
                beam_norm = d;
            }
        }
        let p = norm_sqr(&state.w[k]);
        let d = (p - per_user).abs() / per_user;
        if d > per_user_power {
            per_user_power = d;
        }
        // Energy closure: signal share plus noise share reproduces the
        // precoder power.
        let recon = s.alpha * per_user
            + (T::one() - s.alpha) * per_user * s.an_scale * s.an_scale;
        let d = (recon - p).abs() / per_user;
        if d > split_closure {
            split_closure = d;
        }
        // The user's own noise beam must vanish through its combined channel.
        let q = &comp.q_bob[k];
        let u = &state.u_bob[k];
        if norm_sqr(&s.v_an) > T::zero() {
            let leak = combined_response(q, u, &s.v_an).norm();
            let reference = {
                let n = q.ncols();
                let qu = CVec::from_shape_fn(n, |j| {
                    (0..u.len()).fold(Cx::<T>::zero(), |acc, i| acc + q[(i, j)].conj() * u[i])
                });
                norm(&qu)
            };
            if reference > T::zero() {
                let d = leak / reference;
                if d > own_an_leak {
                    own_an_leak = d;
                }
            }
        }
        let leak = selection.leakage(&state.w[k]);
        if leak > selection_resid {
            selection_resid = leak;
        }
    }
    let mut combiner_norm = T::zero();
    for u in state.u_bob.iter().chain(state.u_eve.iter()) {
        let d = (norm(u) - T::one()).abs();
        if d > combiner_norm {
            combiner_norm = d;
        }
    }
    let budget = cfg.ris_power_w();
    let used = ris_power_used(channels, state, &comp.theta, cfg.ris_noise_w());
    let ris_power_excess = if used > budget {
        (used - budget) / budget
    } else {
        T::zero()
    };
    ConstraintReport {
        beam_norm,
        selection: selection_resid,
        ris_power_excess,
        combiner_norm,
        per_user_power,
        split_closure,
        own_an_leak,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_gaussian_vec, SeedPlan};
    use crate::scalar::cone;

    fn test_cfg() -> SystemConfig<f64> {
        let mut cfg = SystemConfig::<f64>::default();
        cfg.grid_h = 2;
        cfg.grid_v = 4;
        cfg.selected_antennas = 4;
        cfg.ris_h = 2;
        cfg.ris_v = 3;
        cfg.nf_aperture_min_m = 0.0;
        cfg
    }

    fn unit_ones(n: usize) -> CVec<f64> {
        let s = 1.0 / (n as f64).sqrt();
        CVec::from_elem(n, Cx::new(s, 0.0))
    }

    #[test]
    fn composition_matches_direct_expansion() {
        let cfg = test_cfg();
        let set = ChannelSet::nominal(&cfg).unwrap();
        let m = set.ris_count();
        let mut rng = SeedPlan::new(5).stream("signal-test");
        let theta = complex_gaussian_vec::<f64, _>(&mut rng, m);
        let comp = compose(&set, &theta).unwrap();
        // Entry-by-entry reference: Q = H^H + F^H diag(theta) G.
        let k = 1usize;
        for i in 0..cfg.bob_antennas {
            for j in 0..set.grid_count() {
                let mut expect = set.h_bob[k][(j, i)].conj();
                for mm in 0..m {
                    expect += set.f_bob[k][(mm, i)].conj() * theta[mm] * set.g[(mm, j)];
                }
                assert!((comp.q_bob[k][(i, j)] - expect).norm() < 1e-12);
            }
        }
        // Zero response collapses to the direct link.
        let comp0 = compose(&set, &CVec::from_elem(m, Cx::zero())).unwrap();
        for i in 0..cfg.eve_antennas {
            for j in 0..set.grid_count() {
                assert!((comp0.q_eve[(i, j)] - set.h_eve[(j, i)].conj()).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn stacked_cascade_reproduces_combined_channel() {
        let cfg = test_cfg();
        let set = ChannelSet::nominal(&cfg).unwrap();
        let m = set.ris_count();
        let n = set.grid_count();
        let mut rng = SeedPlan::new(9).stream("signal-test");
        let theta = complex_gaussian_vec::<f64, _>(&mut rng, m);
        let u = {
            let raw = complex_gaussian_vec::<f64, _>(&mut rng, cfg.bob_antennas);
            let nn = norm(&raw);
            raw.mapv(|x| x / Cx::new(nn, 0.0))
        };
        let w = complex_gaussian_vec::<f64, _>(&mut rng, n);
        let comp = compose(&set, &theta).unwrap();
        let a = stacked_cascade(&set.g, &set.f_bob[0], &set.h_bob[0], &u);
        // Extended response [theta; 1] through the stack equals u^H Q w.
        let mut via_stack = Cx::<f64>::zero();
        for j in 0..n {
            let mut col = Cx::<f64>::zero();
            for mm in 0..m {
                col += theta[mm] * a[(mm, j)];
            }
            col += a[(m, j)];
            via_stack += col * w[j];
        }
        let direct = combined_response(&comp.q_bob[0], &u, &w);
        assert!((via_stack - direct).norm() < 1e-12 * (1.0 + direct.norm()));
    }

    #[test]
    fn split_reconstructs_the_precoder_exactly() {
        let cfg = test_cfg();
        let set = ChannelSet::nominal(&cfg).unwrap();
        let theta = CVec::from_elem(set.ris_count(), cone::<f64>());
        let comp = compose(&set, &theta).unwrap();
        let per_user = cfg.bs_power_w() / cfg.num_bobs as f64;
        let mut rng = SeedPlan::new(21).stream("signal-test");
        for trial in 0..20 {
            let raw = complex_gaussian_vec::<f64, _>(&mut rng, set.grid_count());
            let scale = (per_user / norm_sqr(&raw)).sqrt();
            let w = raw.mapv(|x| x * Cx::new(scale, 0.0));
            let u = {
                let raw = complex_gaussian_vec::<f64, _>(&mut rng, cfg.bob_antennas);
                let nn = norm(&raw);
                raw.mapv(|x| x / Cx::new(nn, 0.0))
            };
            let s = split_precoder(&cfg, &comp.q_bob[0], &u, &w);
            assert!(s.alpha > 0.0 && s.alpha < 1.0, "trial {trial}");
            assert!((norm(&s.v) - 1.0).abs() < 1e-12);
            assert!((norm(&s.v_an) - 1.0).abs() < 1e-12);
            // Information and noise beams are orthogonal.
            assert!(cdot(&s.v, &s.v_an).norm() < 1e-10);
            // Recomposition is exact.
            let amp = (s.alpha * per_user).sqrt();
            let an_amp = ((1.0 - s.alpha) * per_user).sqrt() * s.an_scale;
            for i in 0..w.len() {
                let recon = s.v[i] * Cx::new(amp, 0.0) + s.v_an[i] * Cx::new(an_amp, 0.0);
                assert!((recon - w[i]).norm() < 1e-10);
            }
            // Power closure makes the amplitude correction unity.
            assert!((s.an_scale - 1.0).abs() < 1e-9, "an_scale {}", s.an_scale);
            // Own noise beam is invisible through the combined channel.
            let leak = combined_response(&comp.q_bob[0], &u, &s.v_an).norm();
            assert!(leak < 1e-10, "leak {leak}");
            // Overlap with the information beam is the full signal amplitude.
            let got = combined_response(&comp.q_bob[0], &u, &w);
            let via_v =
                combined_response(&comp.q_bob[0], &u, &s.v) * Cx::new(amp, 0.0);
            assert!((got - via_v).norm() < 1e-12 * (1.0 + got.norm()));
        }
    }

    #[test]
    fn matched_filter_precoder_disables_the_noise_beam() {
        let cfg = test_cfg();
        let set = ChannelSet::nominal(&cfg).unwrap();
        let theta = CVec::from_elem(set.ris_count(), cone::<f64>());
        let comp = compose(&set, &theta).unwrap();
        let per_user = cfg.bs_power_w() / cfg.num_bobs as f64;
        let u = unit_ones(cfg.bob_antennas);
        let q = &comp.q_bob[0];
        let qu = CVec::from_shape_fn(q.ncols(), |j| {
            (0..u.len()).fold(Cx::<f64>::zero(), |acc, i| acc + q[(i, j)].conj() * u[i])
        });
        let scale = (per_user / norm_sqr(&qu)).sqrt();
        let w = qu.mapv(|x| x * Cx::new(scale, 0.0));
        let s = split_precoder(&cfg, q, &u, &w);
        assert!(s.alpha > 1.0 - 1e-9);
        assert_eq!(norm_sqr(&s.v_an), 0.0);
        assert_eq!(s.an_scale, 0.0);
    }

    #[test]
    fn scalar_link_rate_matches_hand_expansion() {
        // One candidate, one user antenna, one stream: the model collapses to
        // scalars that can be checked by direct arithmetic.
        let mut cfg = test_cfg();
        cfg.num_bobs = 1;
        cfg.bob_positions = vec![[0.0, 5.0, 0.0]];
        cfg.bob_antennas = 1;
        cfg.eve_antennas = 1;
        cfg.grid_h = 1;
        cfg.grid_v = 1;
        cfg.selected_antennas = 1;
        cfg.ris_h = 1;
        cfg.ris_v = 1;
        let set = ChannelSet::nominal(&cfg).unwrap();
        let theta = CVec::from_elem(1, Cx::new(2.0, 1.0));
        let comp = compose(&set, &theta).unwrap();
        let p0 = cfg.bs_power_w();
        let w = CVec::from_elem(1, Cx::new(p0.sqrt(), 0.0));
        let u = CVec::from_elem(1, cone::<f64>());
        let state = BeamformerState::plain(&cfg, vec![w], vec![u.clone()], vec![u]);
        let rep = rate_report(&cfg, &comp, &state).unwrap();

        let q = set.h_bob[0][(0, 0)].conj() + set.f_bob[0][(0, 0)].conj() * theta[0] * set.g[(0, 0)];
        let useful = p0 * q.norm_sqr();
        let f_theta = set.f_bob[0][(0, 0)].conj() * theta[0];
        let ris_noise = cfg.ris_noise_w() * f_theta.norm_sqr();
        let tx = (1.0 + cfg.ris_impairment) * cfg.tx_impairment * q.norm_sqr() * p0;
        let thermal = cfg.bob_noise_w();
        let ris_dist = cfg.ris_impairment * (useful + thermal);
        let den = tx + ris_dist + ris_noise + thermal;
        let expect = (1.0 + useful / den).log2();
        assert!(
            (rep.bob[0].rate - expect).abs() < 1e-12 * expect,
            "got {} expect {expect}",
            rep.bob[0].rate
        );

        let qe = set.h_eve[(0, 0)].conj() + set.f_eve[(0, 0)].conj() * theta[0] * set.g[(0, 0)];
        let e_useful = p0 * qe.norm_sqr();
        let fe_theta = set.f_eve[(0, 0)].conj() * theta[0];
        let e_den = cfg.tx_impairment * qe.norm_sqr() * p0
            + cfg.ris_noise_w() * fe_theta.norm_sqr()
            + cfg.eve_noise_w();
        let e_expect = (1.0 + e_useful / e_den).log2();
        assert!((rep.eve[0].rate - e_expect).abs() < 1e-12 * e_expect.max(1.0));
        let diff = (expect - e_expect).max(0.0);
        assert!((rep.secrecy - diff).abs() < 1e-12 * (1.0 + diff));
    }

    #[test]
    fn impairments_never_help_the_legitimate_link() {
        let cfg = test_cfg();
        let set = ChannelSet::nominal(&cfg).unwrap();
        let theta = CVec::from_elem(set.ris_count(), cone::<f64>());
        let comp = compose(&set, &theta).unwrap();
        let per_user = cfg.bs_power_w() / cfg.num_bobs as f64;
        let mut rng = SeedPlan::new(31).stream("signal-test");
        let w: Vec<CVec<f64>> = (0..cfg.num_bobs)
            .map(|_| {
                let raw = complex_gaussian_vec::<f64, _>(&mut rng, set.grid_count());
                let s = (per_user / norm_sqr(&raw)).sqrt();
                raw.mapv(|x| x * Cx::new(s, 0.0))
            })
            .collect();
        let u: Vec<CVec<f64>> = (0..cfg.num_bobs)
            .map(|_| unit_ones(cfg.bob_antennas))
            .collect();
        let ue: Vec<CVec<f64>> = (0..cfg.num_bobs)
            .map(|_| unit_ones(cfg.eve_antennas))
            .collect();
        let state = BeamformerState::plain(&cfg, w, u, ue);
        let with = rate_report(&cfg, &comp, &state).unwrap();
        let mut clean = cfg.clone();
        clean.tx_impairment = 0.0;
        clean.ris_impairment = 0.0;
        let without = rate_report(&clean, &comp, &state).unwrap();
        assert!(without.rate_bob_sum > with.rate_bob_sum);
    }

    #[test]
    fn surface_power_scales_with_response_gain() {
        let cfg = test_cfg();
        let set = ChannelSet::nominal(&cfg).unwrap();
        let per_user = cfg.bs_power_w() / cfg.num_bobs as f64;
        let mut rng = SeedPlan::new(13).stream("signal-test");
        let w: Vec<CVec<f64>> = (0..cfg.num_bobs)
            .map(|_| {
                let raw = complex_gaussian_vec::<f64, _>(&mut rng, set.grid_count());
                let s = (per_user / norm_sqr(&raw)).sqrt();
                raw.mapv(|x| x * Cx::new(s, 0.0))
            })
            .collect();
        let u: Vec<CVec<f64>> = (0..cfg.num_bobs)
            .map(|_| unit_ones(cfg.bob_antennas))
            .collect();
        let ue: Vec<CVec<f64>> = (0..cfg.num_bobs)
            .map(|_| unit_ones(cfg.eve_antennas))
            .collect();
        let state = BeamformerState::plain(&cfg, w, u, ue);
        let ones = CVec::from_elem(set.ris_count(), cone::<f64>());
        let twos = ones.mapv(|x| x * Cx::new(2.0, 0.0));
        let p1 = ris_power_used(&set, &state, &ones, cfg.ris_noise_w());
        let p2 = ris_power_used(&set, &state, &twos, cfg.ris_noise_w());
        assert!(p1 > 0.0);
        assert!((p2 / p1 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn constraints_flag_violations() {
        let cfg = test_cfg();
        let set = ChannelSet::nominal(&cfg).unwrap();
        let theta = CVec::from_elem(set.ris_count(), cone::<f64>());
        let comp = compose(&set, &theta).unwrap();
        let n = set.grid_count();
        let per_user = cfg.bs_power_w() / cfg.num_bobs as f64;
        let selection = Selection::new(n, vec![0, 1, 2, 3]).unwrap();
        let mut rng = SeedPlan::new(17).stream("signal-test");
        let w: Vec<CVec<f64>> = (0..cfg.num_bobs)
            .map(|_| {
                let raw = complex_gaussian_vec::<f64, _>(&mut rng, n);
                let masked = selection.project(&raw);
                let s = (per_user / norm_sqr(&masked)).sqrt();
                masked.mapv(|x| x * Cx::new(s, 0.0))
            })
            .collect();
        let u: Vec<CVec<f64>> = (0..cfg.num_bobs)
            .map(|_| unit_ones(cfg.bob_antennas))
            .collect();
        let ue: Vec<CVec<f64>> = (0..cfg.num_bobs)
            .map(|_| unit_ones(cfg.eve_antennas))
            .collect();
        let state =
            BeamformerState::decomposed(&cfg, &comp, w.clone(), u.clone(), ue.clone());
        let rep = constraint_report(&cfg, &set, &comp, &state, &selection);
        assert!(rep.beam_norm < 1e-10);
        assert!(rep.per_user_power < 1e-10);
        assert!(rep.split_closure < 1e-9);
        assert!(rep.own_an_leak < 1e-9);
        assert!(rep.selection < 1e-12);
        assert!(rep.combiner_norm < 1e-12);
        // Off-selection energy is detected.
        let mut w_bad = w.clone();
        w_bad[0][5] = Cx::new(0.5, 0.0);
        let state_bad = BeamformerState::decomposed(&cfg, &comp, w_bad, u.clone(), ue.clone());
        let rep_bad = constraint_report(&cfg, &set, &comp, &state_bad, &selection);
        assert!(rep_bad.selection > 1e-3);
        // Power violations are detected.
        let w_hot: Vec<CVec<f64>> = w
            .iter()
            .map(|wk| wk.mapv(|x| x * Cx::new(2.0, 0.0)))
            .collect();
        let state_hot = BeamformerState::decomposed(&cfg, &comp, w_hot, u, ue);
        let rep_hot = constraint_report(&cfg, &set, &comp, &state_hot, &selection);
        assert!(rep_hot.per_user_power > 1.0);
        // A huge surface response blows the amplification budget.
        let big = CVec::from_elem(set.ris_count(), Cx::new(1e6, 0.0));
        let comp_big = compose(&set, &big).unwrap();
        let state2 =
            BeamformerState::decomposed(&cfg, &comp_big, state.w.clone(), state.u_bob.clone(), state.u_eve.clone());
        let rep_big = constraint_report(&cfg, &set, &comp_big, &state2, &selection);
        assert!(rep_big.ris_power_excess > 0.0);
    }

    #[test]
    fn selection_projection_and_leakage() {
        let sel = Selection::new(6, vec![4, 1]).unwrap();
        assert_eq!(sel.active, vec![1, 4]);
        assert_eq!(sel.count(), 2);
        let x = CVec::from_vec(vec![
            Cx::<f64>::new(1.0, 0.0),
            Cx::new(2.0, 0.0),
            Cx::new(3.0, 0.0),
            Cx::new(0.0, 0.0),
            Cx::new(1.0, 0.0),
            Cx::new(0.0, 0.0),
        ]);
        let p = sel.project(&x);
        assert_eq!(p[0], Cx::zero());
        assert_eq!(p[1], Cx::new(2.0, 0.0));
        assert_eq!(p[4], Cx::new(1.0, 0.0));
        let leak = sel.leakage(&x);
        assert!((leak - 10.0 / 15.0).abs() < 1e-12);
        assert!(Selection::new(4, vec![4]).is_err());
    }

    #[test]
    fn transmit_covariance_diag_counts_both_beams() {
        let cfg = test_cfg();
        let set = ChannelSet::nominal(&cfg).unwrap();
        let theta = CVec::from_elem(set.ris_count(), cone::<f64>());
        let comp = compose(&set, &theta).unwrap();
        let per_user = cfg.bs_power_w() / cfg.num_bobs as f64;
        let mut rng = SeedPlan::new(41).stream("signal-test");
        let w: Vec<CVec<f64>> = (0..cfg.num_bobs)
            .map(|_| {
                let raw = complex_gaussian_vec::<f64, _>(&mut rng, set.grid_count());
                let s = (per_user / norm_sqr(&raw)).sqrt();
                raw.mapv(|x| x * Cx::new(s, 0.0))
            })
            .collect();
        let u: Vec<CVec<f64>> = (0..cfg.num_bobs)
            .map(|_| unit_ones(cfg.bob_antennas))
            .collect();
        let ue: Vec<CVec<f64>> = (0..cfg.num_bobs)
            .map(|_| unit_ones(cfg.eve_antennas))
            .collect();
        let state = BeamformerState::decomposed(&cfg, &comp, w, u, ue);
        let d = transmit_covariance_diag(&cfg, &state);
        let total: f64 = d.iter().sum();
        // Split closure means the diagonal sums to the full transmit power.
        assert!((total - cfg.bs_power_w()).abs() < 1e-9);
        for &x in d.iter() {
            assert!(x >= 0.0);
        }
    }
}

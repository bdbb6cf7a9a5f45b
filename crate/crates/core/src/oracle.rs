//! Independent brute-force and Monte-Carlo verifiers.
//!
//! Everything in this module exists to check the fast implementations from the
//! outside: exhaustive and randomized placement searches that bracket the
//! grouped heuristics, a sample-based estimator for every term of the rate
//! model, a dense generalized-eigenvalue path built from different
//! factorizations than the production solver, and exact-recovery certificates
//! for the l1 machinery. The code here favors directness over speed and shares
//! as little arithmetic with the production modules as it can.

use std::collections::HashMap;

use crate::channel::ChannelSet;
use crate::config::{distance, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{dagger, fro_norm_sqr, hermitize, norm};
use crate::pipeline::{alternate, RisMode};
use crate::rng::{complex_gaussian, unit_symbol};
use crate::scalar::{czero, r, Real};
use crate::signal::{
    compose, rate_report, BeamformerState, CompositeChannels, Selection,
};
use crate::{CMat, CVec, Cx, RMat, RVec};
use num_complex::Complex;
use rand::Rng;

/// Largest selection count the exhaustive search will enumerate.
pub const EXHAUSTIVE_BUDGET: u128 = 100_000;

/// Alternating-optimization rounds used for every design the brute-force
/// searches evaluate. A fixed budget keeps selections comparable: no placement
/// gets extra polish because its loop happened to converge slowly.
pub const BRUTE_FORCE_ROUNDS: usize = 10;

// ---------------------------------------------------------------------------
// Check bookkeeping.
// ---------------------------------------------------------------------------

/// One analytic-versus-oracle comparison.
#[derive(Debug, Clone)]
pub struct OracleReport<T> {
    /// What was measured.
    pub quantity: String,
    /// Value from the closed-form implementation under test.
    pub analytic: T,
    /// Independently estimated or enumerated value.
    pub oracle: T,
    /// Allowed absolute difference.
    pub tolerance: T,
    /// Whether the two values agree within tolerance.
    pub pass: bool,
    /// Sample count behind the oracle value, when it is stochastic.
    pub samples: Option<usize>,
}

impl<T: Real> OracleReport<T> {
    /// Builds a report row, deciding the pass flag from the tolerance.
    pub fn check(
        quantity: impl Into<String>,
        analytic: T,
        oracle: T,
        tolerance: T,
        samples: Option<usize>,
    ) -> Self {
        let pass = (analytic - oracle).abs() <= tolerance;
        Self {
            quantity: quantity.into(),
            analytic,
            oracle,
            tolerance,
            pass,
            samples,
        }
    }

    /// One-line rendering used by test output and the CLI.
    pub fn line(&self) -> String {
        format!(
            "{}: {} analytic={:.6e} oracle={:.6e} tol={:.2e}{}",
            if self.pass { "pass" } else { "FAIL" },
            self.quantity,
            self.analytic.to64(),
            self.oracle.to64(),
            self.tolerance.to64(),
            match self.samples {
                Some(n) => format!(" n={n}"),
                None => String::new(),
            }
        )
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct Estimate<T> {
    /// Mean over the samples.
    pub value: T,
    /// Standard error of that mean.
    pub se: T,
}

impl<T: Real> Estimate<T> {
    /// Multiplies the estimate by a nonnegative constant.
    pub fn scaled(&self, c: T) -> Self {
        Self {
            value: self.value * c,
            se: self.se * c,
        }
    }
}

/// Running sums for one per-sample scalar stream.
#[derive(Debug, Clone, Copy)]
struct Acc<T> {
    sum: T,
    sum_sq: T,
}

impl<T: Real> Acc<T> {
    fn new() -> Self {
        Self {
            sum: T::zero(),
            sum_sq: T::zero(),
        }
    }

    fn push(&mut self, x: T) {
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn estimate(&self, n: usize) -> Estimate<T> {
        let nn = r::<T>(n as f64);
        let mean = self.sum / nn;
        if n < 2 {
            return Estimate {
                value: mean,
                se: T::zero(),
            };
        }
        let var = ((self.sum_sq - self.sum * self.sum / nn) / (nn - T::one())).max(T::zero());
        Estimate {
            value: mean,
            se: (var / nn).sqrt(),
        }
    }
}

// ---------------------------------------------------------------------------
// Monte-Carlo estimation of the rate-model terms.
// ---------------------------------------------------------------------------

/// Sampled power estimates for one legitimate link, one entry per additive
/// term of the rate model.
#[derive(Debug, Clone)]
pub struct BobTermEstimates<T> {
    /// Information power captured by the combiner.
    pub useful: Estimate<T>,
    /// Multi-user interference power.
    pub mui: Estimate<T>,
    /// Artificial-noise leakage power.
    pub an_leak: Estimate<T>,
    /// Transmit-distortion power including its surface-reflected share.
    pub tx_distortion: Estimate<T>,
    /// Surface-distortion power.
    pub ris_distortion: Estimate<T>,
    /// Surface dynamic-noise power.
    pub ris_noise: Estimate<T>,
    /// Thermal noise power.
    pub thermal: Estimate<T>,
    /// Power of the drawn receiver-distortion scalar, which lumps every
    /// surface-distortion share together.
    pub receiver_lump: Estimate<T>,
    /// Defined variance of that scalar, computed from the sampler's own
    /// precomputed link gains rather than from the implementation under test.
    pub receiver_lump_target: T,
}

/// Sampled power estimates for the eavesdropper's view of one stream.
#[derive(Debug, Clone)]
pub struct EveTermEstimates<T> {
    /// Power of the targeted stream.
    pub useful: Estimate<T>,
    /// Other streams plus artificial noise.
    pub mui_an: Estimate<T>,
    /// Transmit-distortion power.
    pub tx_distortion: Estimate<T>,
    /// Surface dynamic-noise power.
    pub ris_noise: Estimate<T>,
    /// Thermal noise power.
    pub thermal: Estimate<T>,
}

/// Full set of Monte-Carlo term estimates for a design.
#[derive(Debug, Clone)]
pub struct McRateEstimates<T> {
    /// Per-user legitimate-link terms.
    pub bob: Vec<BobTermEstimates<T>>,
    /// Per-stream eavesdropper terms.
    pub eve: Vec<EveTermEstimates<T>>,
    /// Samples drawn.
    pub samples: usize,
}

/// Combined response `u^H Q x` computed through ndarray's matrix product, a
/// different code path from the hand-rolled loops in the rate evaluator.
fn response<T: Real>(q: &CMat<T>, u: &CVec<T>, x: &CVec<T>) -> Cx<T> {
    let qx = q.dot(x);
    u.iter()
        .zip(qx.iter())
        .fold(czero::<T>(), |acc, (ui, yi)| acc + ui.conj() * *yi)
}

/// Row vector `u^H Q` over the grid.
fn combiner_row<T: Real>(q: &CMat<T>, u: &CVec<T>) -> CVec<T> {
    let (rows, cols) = q.dim();
    CVec::from_shape_fn(cols, |j| {
        (0..rows).fold(czero::<T>(), |acc, i| acc + u[i].conj() * q[(i, j)])
    })
}

/// Row vector `u^H F^H diag(theta)` over the surface, scaled so that dotting
/// it with a unit-variance noise vector reproduces the surface dynamic-noise
/// term.
fn surface_row<T: Real>(f: &CMat<T>, theta: &CVec<T>, u: &CVec<T>, noise_w: T) -> CVec<T> {
    let (m, ants) = f.dim();
    let amp = noise_w.sqrt();
    CVec::from_shape_fn(m, |mm| {
        let fu = (0..ants).fold(czero::<T>(), |acc, i| acc + u[i].conj() * f[(mm, i)].conj());
        fu * theta[mm] * Complex::new(amp, T::zero())
    })
}

/// Per-receiver sampling constants.
struct LinkGains<T> {
    /// Response of each information beam through this receiver.
    sig: Vec<Cx<T>>,
    /// Response of each artificial-noise beam through this receiver.
    an: Vec<Cx<T>>,
    /// `u^H Q` entries on the transmit-distortion support, pre-scaled by the
    /// per-position distortion amplitude.
    tx: Vec<Cx<T>>,
    /// Surface noise row, pre-scaled by the noise amplitude.
    surf: CVec<T>,
    /// Thermal noise amplitude per receive antenna.
    thermal_amp: T,
}

impl<T: Real> LinkGains<T> {
    fn build(
        q: &CMat<T>,
        f: &CMat<T>,
        theta: &CVec<T>,
        u: &CVec<T>,
        sig_beams: &[CVec<T>],
        an_beams: &[CVec<T>],
        tx_support: &[(usize, T)],
        noise_w: T,
        ris_noise_w: T,
    ) -> Self {
        let row = combiner_row(q, u);
        Self {
            sig: sig_beams.iter().map(|v| response(q, u, v)).collect(),
            an: an_beams.iter().map(|v| response(q, u, v)).collect(),
            tx: tx_support
                .iter()
                .map(|&(j, amp)| row[j] * Complex::new(amp, T::zero()))
                .collect(),
            surf: surface_row(f, theta, u, ris_noise_w),
            thermal_amp: noise_w.sqrt(),
        }
    }

    /// Expected undistorted received power: every term a receiver sees before
    /// its own distortion is added.
    fn undistorted_power(&self, sig_amp: &[T], an_amp: &[T]) -> T {
        let mut p = T::zero();
        for (a, g) in sig_amp.iter().zip(self.sig.iter()) {
            p += *a * *a * g.norm_sqr();
        }
        for (a, g) in an_amp.iter().zip(self.an.iter()) {
            p += *a * *a * g.norm_sqr();
        }
        p += self.thermal_amp * self.thermal_amp;
        p += self.tx.iter().map(|c| c.norm_sqr()).sum();
        p
    }
}

/// Per-receiver accumulators.
struct BobAcc<T> {
    useful: Acc<T>,
    mui: Acc<T>,
    an: Acc<T>,
    nk: Acc<T>,
    rn: Acc<T>,
    tx_raw: Acc<T>,
    undistorted: Acc<T>,
    lump: Acc<T>,
}

struct EveAcc<T> {
    useful: Acc<T>,
    mui_an: Acc<T>,
    tx: Acc<T>,
    rn: Acc<T>,
    ne: Acc<T>,
}

/// Estimates every additive term of the rate model by sampling the transmit
/// signal: unit-modulus information and artificial-noise symbols, Gaussian
/// transmit distortion over the position grid, Gaussian surface and thermal
/// noise, and a Gaussian receiver-distortion scalar at its defined variance.
///
/// The artificial-noise beams carry independent symbols per user, matching
/// the additive power accounting of the rate evaluator. The receiver
/// distortion is drawn at the variance the model defines for it (a fixed
/// ratio of the undistorted received power); that variance is recomputed here
/// from the sampler's own link gains, so the draw shares only the definition
/// with the implementation under test, not its arithmetic.
pub fn monte_carlo_rates<T: Real, R: Rng>(
    cfg: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    theta: &CVec<T>,
    selection: &Selection,
    state: &BeamformerState<T>,
    n_samples: usize,
    rng: &mut R,
) -> Result<McRateEstimates<T>> {
    if n_samples < 1_000 {
        return Err(Error::Config(format!(
            "Monte-Carlo estimation needs at least 1000 samples, got {n_samples}"
        )));
    }
    let kk = cfg.num_bobs;
    if state.w.len() != kk || state.u_bob.len() != kk || state.u_eve.len() != kk {
        return Err(Error::Dimension(format!(
            "state sized for {} users, config has {kk}",
            state.w.len()
        )));
    }
    let comp = compose(channels, theta)?;
    let n = channels.grid_count();
    let m = channels.ris_count();
    let per_user = cfg.bs_power_w() / r::<T>(kk as f64);
    let mu_t = cfg.tx_impairment;
    let mu_r = cfg.ris_impairment;

    // Beam amplitudes and directions exactly as the model defines them.
    let sig_amp: Vec<T> = state
        .split
        .iter()
        .map(|s| (s.alpha * per_user).sqrt())
        .collect();
    let an_amp: Vec<T> = state
        .split
        .iter()
        .map(|s| ((T::one() - s.alpha) * per_user).sqrt())
        .collect();
    let sig_beams: Vec<CVec<T>> = state.split.iter().map(|s| s.v.clone()).collect();
    let an_beams: Vec<CVec<T>> = state.split.iter().map(|s| s.an_effective()).collect();

    // Transmit-distortion covariance diagonal, from the sampled beams alone.
    let mut tx_diag = RVec::<T>::zeros(n);
    for k in 0..kk {
        for j in 0..n {
            tx_diag[j] += sig_amp[k] * sig_amp[k] * sig_beams[k][j].norm_sqr()
                + an_amp[k] * an_amp[k] * an_beams[k][j].norm_sqr();
        }
    }
    let tx_support: Vec<(usize, T)> = (0..n)
        .filter(|&j| tx_diag[j] > T::zero())
        .map(|j| (j, (mu_t * tx_diag[j]).sqrt()))
        .collect();
    // The selection is part of the model contract: beams must not drive
    // positions outside it. A violation here would silently bias every term.
    for w in &state.w {
        if selection.leakage(w) > r::<T>(1e-12) {
            return Err(Error::Config(
                "beam energy outside the antenna selection".into(),
            ));
        }
    }

    let sig_b = cfg.bob_noise_w();
    let sig_e = cfg.eve_noise_w();
    let sig_r = cfg.ris_noise_w();

    let bob_gains: Vec<LinkGains<T>> = (0..kk)
        .map(|k| {
            LinkGains::build(
                &comp.q_bob[k],
                &channels.f_bob[k],
                theta,
                &state.u_bob[k],
                &sig_beams,
                &an_beams,
                &tx_support,
                sig_b,
                sig_r,
            )
        })
        .collect();
    let eve_gains: Vec<LinkGains<T>> = (0..kk)
        .map(|k| {
            LinkGains::build(
                &comp.q_eve,
                &channels.f_eve,
                theta,
                &state.u_eve[k],
                &sig_beams,
                &an_beams,
                &tx_support,
                sig_e,
                sig_r,
            )
        })
        .collect();
    let lump_targets: Vec<T> = bob_gains
        .iter()
        .map(|g| mu_r * g.undistorted_power(&sig_amp, &an_amp))
        .collect();

    let mut bob_acc: Vec<BobAcc<T>> = (0..kk)
        .map(|_| BobAcc {
            useful: Acc::new(),
            mui: Acc::new(),
            an: Acc::new(),
            nk: Acc::new(),
            rn: Acc::new(),
            tx_raw: Acc::new(),
            undistorted: Acc::new(),
            lump: Acc::new(),
        })
        .collect();
    let mut eve_acc: Vec<EveAcc<T>> = (0..kk)
        .map(|_| EveAcc {
            useful: Acc::new(),
            mui_an: Acc::new(),
            tx: Acc::new(),
            rn: Acc::new(),
            ne: Acc::new(),
        })
        .collect();

    let mut s_sym = vec![czero::<T>(); kk];
    let mut z_sym = vec![czero::<T>(); kk];
    let mut tx_draw = vec![czero::<T>(); tx_support.len()];
    let mut surf_draw = vec![czero::<T>(); m];

    for _ in 0..n_samples {
        // One physical transmission: symbols, transmit distortion, and surface
        // noise are shared by every receiver in the scene.
        for k in 0..kk {
            s_sym[k] = unit_symbol(rng);
            z_sym[k] = unit_symbol(rng);
        }
        for d in tx_draw.iter_mut() {
            *d = complex_gaussian(rng);
        }
        for d in surf_draw.iter_mut() {
            *d = complex_gaussian(rng);
        }

        for k in 0..kk {
            let g = &bob_gains[k];
            let c_use = g.sig[k] * s_sym[k] * Complex::new(sig_amp[k], T::zero());
            let mut c_mui = czero::<T>();
            for i in 0..kk {
                if i != k {
                    c_mui += g.sig[i] * s_sym[i] * Complex::new(sig_amp[i], T::zero());
                }
            }
            let mut c_an = czero::<T>();
            for i in 0..kk {
                c_an += g.an[i] * z_sym[i] * Complex::new(an_amp[i], T::zero());
            }
            let c_tx = g
                .tx
                .iter()
                .zip(tx_draw.iter())
                .fold(czero::<T>(), |acc, (c, d)| acc + *c * *d);
            let c_rn = g
                .surf
                .iter()
                .zip(surf_draw.iter())
                .fold(czero::<T>(), |acc, (c, d)| acc + *c * *d);
            let mut c_th = czero::<T>();
            for ui in state.u_bob[k].iter() {
                c_th += ui.conj() * complex_gaussian::<T, _>(rng)
                    * Complex::new(g.thermal_amp, T::zero());
            }
            let z_r = complex_gaussian::<T, _>(rng)
                * Complex::new(lump_targets[k].sqrt(), T::zero());

            let acc = &mut bob_acc[k];
            acc.useful.push(c_use.norm_sqr());
            acc.mui.push(c_mui.norm_sqr());
            acc.an.push(c_an.norm_sqr());
            acc.nk.push(c_th.norm_sqr());
            acc.rn.push(c_rn.norm_sqr());
            acc.tx_raw.push(c_tx.norm_sqr());
            acc.undistorted
                .push(c_use.norm_sqr() + c_mui.norm_sqr() + c_an.norm_sqr() + c_th.norm_sqr());
            acc.lump.push(z_r.norm_sqr());
        }

        // The eavesdropper's antennas see one thermal realization per sample,
        // shared across its per-stream combiners.
        let ne_draw: Vec<Cx<T>> = (0..cfg.eve_antennas)
            .map(|_| complex_gaussian::<T, _>(rng))
            .collect();
        for k in 0..kk {
            let g = &eve_gains[k];
            let c_use = g.sig[k] * s_sym[k] * Complex::new(sig_amp[k], T::zero());
            let mut c_int = czero::<T>();
            for i in 0..kk {
                if i != k {
                    c_int += g.sig[i] * s_sym[i] * Complex::new(sig_amp[i], T::zero());
                }
                c_int += g.an[i] * z_sym[i] * Complex::new(an_amp[i], T::zero());
            }
            let c_tx = g
                .tx
                .iter()
                .zip(tx_draw.iter())
                .fold(czero::<T>(), |acc, (c, d)| acc + *c * *d);
            let c_rn = g
                .surf
                .iter()
                .zip(surf_draw.iter())
                .fold(czero::<T>(), |acc, (c, d)| acc + *c * *d);
            let mut c_th = czero::<T>();
            for (ui, d) in state.u_eve[k].iter().zip(ne_draw.iter()) {
                c_th += ui.conj() * *d * Complex::new(g.thermal_amp, T::zero());
            }
            let acc = &mut eve_acc[k];
            acc.useful.push(c_use.norm_sqr());
            acc.mui_an.push(c_int.norm_sqr());
            acc.tx.push(c_tx.norm_sqr());
            acc.rn.push(c_rn.norm_sqr());
            acc.ne.push(c_th.norm_sqr());
        }
    }

    let one_mu = T::one() + mu_r;
    let bob = (0..kk)
        .map(|k| {
            let acc = &bob_acc[k];
            BobTermEstimates {
                useful: acc.useful.estimate(n_samples),
                mui: acc.mui.estimate(n_samples),
                an_leak: acc.an.estimate(n_samples),
                tx_distortion: acc.tx_raw.estimate(n_samples).scaled(one_mu),
                ris_distortion: acc.undistorted.estimate(n_samples).scaled(mu_r),
                ris_noise: acc.rn.estimate(n_samples),
                thermal: acc.nk.estimate(n_samples),
                receiver_lump: acc.lump.estimate(n_samples),
                receiver_lump_target: lump_targets[k],
            }
        })
        .collect();
    let eve = (0..kk)
        .map(|k| {
            let acc = &eve_acc[k];
            EveTermEstimates {
                useful: acc.useful.estimate(n_samples),
                mui_an: acc.mui_an.estimate(n_samples),
                tx_distortion: acc.tx.estimate(n_samples),
                ris_noise: acc.rn.estimate(n_samples),
                thermal: acc.ne.estimate(n_samples),
            }
        })
        .collect();
    Ok(McRateEstimates {
        bob,
        eve,
        samples: n_samples,
    })
}

/// Compares Monte-Carlo term estimates against the closed-form rate report,
/// one row per term, at three standard errors (plus a small relative floor
/// for the terms the sampler reproduces deterministically).
pub fn mc_agreement<T: Real>(
    cfg: &SystemConfig<T>,
    comp: &CompositeChannels<T>,
    state: &BeamformerState<T>,
    est: &McRateEstimates<T>,
) -> Result<Vec<OracleReport<T>>> {
    let rep = rate_report(cfg, comp, state)?;
    if rep.bob.len() != est.bob.len() || rep.eve.len() != est.eve.len() {
        return Err(Error::Dimension(
            "estimate set does not match the report's user count".into(),
        ));
    }
    let n = est.samples;
    let tol = |analytic: T, e: &Estimate<T>| -> T {
        r::<T>(3.0) * e.se + r::<T>(1e-9) * (analytic.abs() + e.value.abs())
    };
    let mut rows = Vec::new();
    for (k, (a, b)) in rep.bob.iter().zip(est.bob.iter()).enumerate() {
        let pairs: [(&str, T, &Estimate<T>); 7] = [
            ("useful", a.useful, &b.useful),
            ("interference", a.mui, &b.mui),
            ("noise leak", a.an_leak, &b.an_leak),
            ("tx distortion", a.tx_distortion, &b.tx_distortion),
            ("surface distortion", a.ris_distortion, &b.ris_distortion),
            ("surface noise", a.ris_noise, &b.ris_noise),
            ("thermal", a.thermal, &b.thermal),
        ];
        for (name, analytic, e) in pairs {
            rows.push(OracleReport::check(
                format!("bob{k} {name}"),
                analytic,
                e.value,
                tol(analytic, e),
                Some(n),
            ));
        }
        rows.push(OracleReport::check(
            format!("bob{k} receiver distortion lump"),
            b.receiver_lump_target,
            b.receiver_lump.value,
            tol(b.receiver_lump_target, &b.receiver_lump),
            Some(n),
        ));
    }
    for (k, (a, b)) in rep.eve.iter().zip(est.eve.iter()).enumerate() {
        let pairs: [(&str, T, &Estimate<T>); 5] = [
            ("useful", a.useful, &b.useful),
            ("interference", a.mui_an, &b.mui_an),
            ("tx distortion", a.tx_distortion, &b.tx_distortion),
            ("surface noise", a.ris_noise, &b.ris_noise),
            ("thermal", a.thermal, &b.thermal),
        ];
        for (name, analytic, e) in pairs {
            rows.push(OracleReport::check(
                format!("eve{k} {name}"),
                analytic,
                e.value,
                tol(analytic, e),
                Some(n),
            ));
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Placement search baselines.
// ---------------------------------------------------------------------------

/// One evaluated antenna selection.
#[derive(Debug, Clone)]
pub struct PlacementScore<T> {
    /// Selected candidate indices, ascending.
    pub members: Vec<usize>,
    /// Secrecy sum rate of the budgeted design on this selection.
    pub secrecy: T,
}

/// Everything the exhaustive search saw.
#[derive(Debug, Clone)]
pub struct ExhaustiveOutcome<T> {
    /// Highest-scoring selection (first in enumeration order on ties).
    pub best: PlacementScore<T>,
    /// Lowest-scoring selection (first in enumeration order on ties).
    pub worst: PlacementScore<T>,
    /// Every feasible selection with its score, in enumeration order.
    pub table: Vec<PlacementScore<T>>,
}

/// Result of repeated uniform random placement.
#[derive(Debug, Clone)]
pub struct RandomPlacementOutcome<T> {
    /// Best draw (earliest on ties).
    pub best: PlacementScore<T>,
    /// Worst draw (earliest on ties).
    pub worst: PlacementScore<T>,
    /// Every draw in order, duplicates included.
    pub draws: Vec<PlacementScore<T>>,
}

/// Number of ways to choose `k` of `n`, capped at the exhaustive budget;
/// `None` means the count exceeds the cap.
fn choose_capped(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)?;
        acc /= (i + 1) as u128;
        if acc > EXHAUSTIVE_BUDGET * 1_000 {
            return None;
        }
    }
    Some(acc)
}

/// Smallest pairwise distance among the selected grid positions; infinite for
/// fewer than two members.
pub fn min_selected_spacing<T: Real>(cfg: &SystemConfig<T>, members: &[usize]) -> Result<T> {
    let geo = cfg.geometry();
    for &i in members {
        if i >= geo.bs_elements.len() {
            return Err(Error::Dimension(format!(
                "candidate index {i} outside grid of {}",
                geo.bs_elements.len()
            )));
        }
    }
    let mut best = T::infinity();
    for (a, &i) in members.iter().enumerate() {
        for &j in members.iter().skip(a + 1) {
            let d = distance(&geo.bs_elements[i], &geo.bs_elements[j]);
            if d < best {
                best = d;
            }
        }
    }
    Ok(best)
}

/// Whether a selection satisfies the minimum antenna spacing. The spacing
/// limit equals the grid pitch, so any set of distinct candidates passes; the
/// check stays in the loop because it is the constraint's definition, not an
/// assumption about the grid.
pub fn spacing_feasible<T: Real>(cfg: &SystemConfig<T>, members: &[usize]) -> Result<bool> {
    let d = min_selected_spacing(cfg, members)?;
    Ok(d >= cfg.bs_spacing_m * r::<T>(1.0 - 1e-9))
}

/// Advances `idx` to the next k-combination of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] != i + n - k {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Runs the budgeted design loop on one selection and returns its secrecy sum
/// rate, caching by selection since the loop is deterministic.
fn budgeted_ssr<T: Real>(
    cfg: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    members: &[usize],
    mode: RisMode,
    cache: &mut HashMap<Vec<usize>, T>,
) -> Result<T> {
    if let Some(&v) = cache.get(members) {
        return Ok(v);
    }
    let sel = Selection::new(channels.grid_count(), members.to_vec())?;
    let out = alternate(cfg, channels, &sel, mode)?;
    cache.insert(members.to_vec(), out.report.secrecy);
    Ok(out.report.secrecy)
}

fn with_brute_force_budget<T: Real>(cfg: &SystemConfig<T>) -> SystemConfig<T> {
    let mut c = cfg.clone();
    c.solve.max_iterations = BRUTE_FORCE_ROUNDS;
    c
}

/// Scores every feasible selection of the configured size through the full
/// design loop at a fixed iteration budget and returns the extremes plus the
/// whole table.
///
/// Errors when the combination count exceeds [`EXHAUSTIVE_BUDGET`]: the point
/// of this oracle is exactness at toy scale, not scalability.
pub fn exhaustive_placement<T: Real>(
    cfg: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    mode: RisMode,
) -> Result<ExhaustiveOutcome<T>> {
    let n = channels.grid_count();
    if n != cfg.grid_total() {
        return Err(Error::Dimension(format!(
            "channels cover {n} candidates, configuration describes {}",
            cfg.grid_total()
        )));
    }
    let na = cfg.selected_antennas;
    if na == 0 || na > n {
        return Err(Error::Config(format!(
            "cannot select {na} of {n} candidates"
        )));
    }
    match choose_capped(n, na) {
        Some(c) if c <= EXHAUSTIVE_BUDGET => {}
        _ => {
            return Err(Error::Config(format!(
                "exhaustive search over C({n}, {na}) selections exceeds the budget of {EXHAUSTIVE_BUDGET}"
            )));
        }
    }
    let run_cfg = with_brute_force_budget(cfg);
    let mut cache = HashMap::new();
    let mut table = Vec::new();
    let mut idx: Vec<usize> = (0..na).collect();
    loop {
        if spacing_feasible(cfg, &idx)? {
            let secrecy = budgeted_ssr(&run_cfg, channels, &idx, mode, &mut cache)?;
            table.push(PlacementScore {
                members: idx.clone(),
                secrecy,
            });
        }
        if !next_combination(&mut idx, n) {
            break;
        }
    }
    if table.is_empty() {
        return Err(Error::Config(
            "no feasible selection satisfies the spacing limit".into(),
        ));
    }
    let mut best = 0usize;
    let mut worst = 0usize;
    for (i, row) in table.iter().enumerate() {
        if row.secrecy > table[best].secrecy {
            best = i;
        }
        if row.secrecy < table[worst].secrecy {
            worst = i;
        }
    }
    Ok(ExhaustiveOutcome {
        best: table[best].clone(),
        worst: table[worst].clone(),
        table,
    })
}

/// Draws feasible selections uniformly at random (rejection sampling over the
/// spacing limit) and scores each through the same budgeted loop as the
/// exhaustive search. Draws are sequential on the given stream, so a longer
/// run extends a shorter one's draws; repeated selections reuse the cached
/// score rather than being re-optimized.
pub fn random_placement_baseline<T: Real, R: Rng>(
    cfg: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    mode: RisMode,
    draws: usize,
    rng: &mut R,
) -> Result<RandomPlacementOutcome<T>> {
    if draws == 0 {
        return Err(Error::Config("need at least one random draw".into()));
    }
    let n = channels.grid_count();
    let na = cfg.selected_antennas;
    if na == 0 || na > n {
        return Err(Error::Config(format!(
            "cannot select {na} of {n} candidates"
        )));
    }
    const MAX_ATTEMPTS_PER_DRAW: usize = 200;
    let run_cfg = with_brute_force_budget(cfg);
    let mut cache = HashMap::new();
    let mut out: Vec<PlacementScore<T>> = Vec::with_capacity(draws);
    for _ in 0..draws {
        let mut accepted: Option<Vec<usize>> = None;
        for _ in 0..MAX_ATTEMPTS_PER_DRAW {
            let mut members: Vec<usize> = rand::seq::index::sample(rng, n, na).into_vec();
            members.sort_unstable();
            if spacing_feasible(cfg, &members)? {
                accepted = Some(members);
                break;
            }
        }
        let members = accepted.ok_or_else(|| {
            Error::Config(format!(
                "no feasible selection found in {MAX_ATTEMPTS_PER_DRAW} attempts"
            ))
        })?;
        let secrecy = budgeted_ssr(&run_cfg, channels, &members, mode, &mut cache)?;
        out.push(PlacementScore { members, secrecy });
    }
    let mut best = 0usize;
    let mut worst = 0usize;
    for (i, row) in out.iter().enumerate() {
        if row.secrecy > out[best].secrecy {
            best = i;
        }
        if row.secrecy < out[worst].secrecy {
            worst = i;
        }
    }
    Ok(RandomPlacementOutcome {
        best: out[best].clone(),
        worst: out[worst].clone(),
        draws: out,
    })
}

// ---------------------------------------------------------------------------
// Interception-null residual.
// ---------------------------------------------------------------------------

/// Largest relative response of any user's precoder through the eavesdropper's
/// composite channel: `max_k ||Q_e w_k|| / (||Q_e||_F ||w_k||)`. Designs that
/// zero-force the interceptor should drive this to numerical zero.
pub fn interception_null_residual<T: Real>(
    comp: &CompositeChannels<T>,
    state: &BeamformerState<T>,
) -> T {
    let qf = fro_norm_sqr(&comp.q_eve).sqrt();
    if qf <= T::zero() {
        return T::zero();
    }
    let mut worst = T::zero();
    for w in &state.w {
        let wn = norm(w);
        if wn <= T::zero() {
            continue;
        }
        let resid = norm(&comp.q_eve.dot(w)) / (qf * wn);
        if resid > worst {
            worst = resid;
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// Dense generalized-eigenvalue cross-check.
// ---------------------------------------------------------------------------

/// Lower-triangular Cholesky factor of a Hermitian positive-definite matrix.
fn cholesky_lower<T: Real>(b: &CMat<T>) -> Result<CMat<T>> {
    let n = b.nrows();
    if b.ncols() != n {
        return Err(Error::Dimension("Cholesky needs a square matrix".into()));
    }
    let mut scale = T::zero();
    for i in 0..n {
        let d = b[(i, i)].re;
        if d > scale {
            scale = d;
        }
    }
    let floor = scale * r::<T>(1e-14);
    let mut l = CMat::from_elem((n, n), czero::<T>());
    for j in 0..n {
        let mut d = b[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d <= floor {
            return Err(Error::Numerical(format!(
                "matrix is not positive definite at pivot {j}"
            )));
        }
        let dj = d.sqrt();
        l[(j, j)] = Complex::new(dj, T::zero());
        for i in j + 1..n {
            let mut v = b[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = v / Complex::new(dj, T::zero());
        }
    }
    Ok(l)
}

/// Solves `L X = B` column by column for lower-triangular `L`.
fn forward_solve<T: Real>(l: &CMat<T>, b: &CMat<T>) -> CMat<T> {
    let n = l.nrows();
    let cols = b.ncols();
    let mut x = CMat::from_elem((n, cols), czero::<T>());
    for j in 0..cols {
        for i in 0..n {
            let mut v = b[(i, j)];
            for k in 0..i {
                v -= l[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = v / l[(i, i)];
        }
    }
    x
}

/// Eigenvalues of a Hermitian matrix by cyclic two-sided Jacobi rotations.
///
/// Each rotation first absorbs the phase of the targeted off-diagonal entry,
/// then applies the classical real rotation that zeroes it. Quadratic
/// convergence makes a handful of sweeps enough at the sizes the oracle uses.
fn jacobi_eigenvalues<T: Real>(a: &CMat<T>) -> Result<RVec<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension("Jacobi needs a square matrix".into()));
    }
    let mut m = hermitize(a);
    if n <= 1 {
        return Ok(RVec::from_shape_fn(n, |i| m[(i, i)].re));
    }
    let fro = fro_norm_sqr(&m);
    let target = fro * r::<T>(1e-28);
    for _sweep in 0..60 {
        let mut off = T::zero();
        for i in 0..n {
            for j in i + 1..n {
                off += m[(i, j)].norm_sqr();
            }
        }
        if off * r::<T>(2.0) <= target {
            return Ok(RVec::from_shape_fn(n, |i| m[(i, i)].re));
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[(p, q)];
                let amag = apq.norm();
                if amag <= T::zero() {
                    continue;
                }
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let phase = apq / Complex::new(amag, T::zero());
                let tau = (aqq - app) / (amag * r::<T>(2.0));
                let t = if tau >= T::zero() {
                    T::one() / (tau + (T::one() + tau * tau).sqrt())
                } else {
                    -T::one() / (-tau + (T::one() + tau * tau).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                let cc = Complex::new(c, T::zero());
                let sc = Complex::new(s, T::zero());
                // Columns: A <- A V with V = [[c, s], [-s conj(ph), c conj(ph)]].
                for i in 0..n {
                    let ap = m[(i, p)];
                    let aq = m[(i, q)];
                    m[(i, p)] = ap * cc - aq * sc * phase.conj();
                    m[(i, q)] = ap * sc + aq * cc * phase.conj();
                }
                // Rows: A <- V^H A.
                for j in 0..n {
                    let ap = m[(p, j)];
                    let aq = m[(q, j)];
                    m[(p, j)] = ap * cc - aq * sc * phase;
                    m[(q, j)] = ap * sc + aq * cc * phase;
                }
            }
        }
    }
    Err(Error::Numerical(
        "Jacobi sweeps did not reach the off-diagonal target".into(),
    ))
}

/// Largest generalized eigenvalue of the Hermitian pair `(A, B)` with `B`
/// positive definite, computed by Cholesky reduction and Jacobi iteration.
/// This path shares no factorization code with the production quotient
/// solver, which whitens through an eigendecomposition instead.
pub fn max_generalized_eigenvalue<T: Real>(a: &CMat<T>, b: &CMat<T>) -> Result<T> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(Error::Dimension(
            "generalized eigenvalue needs square matrices of one size".into(),
        ));
    }
    if n == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }
    let l = cholesky_lower(&hermitize(b))?;
    // C = L^{-1} A L^{-H}, built from two triangular solves.
    let x = forward_solve(&l, &hermitize(a));
    let c = dagger(&forward_solve(&l, &dagger(&x)));
    let vals = jacobi_eigenvalues(&c)?;
    let mut best = vals[0];
    for &v in vals.iter().skip(1) {
        if v > best {
            best = v;
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Sparse-recovery certificates for the l1 machinery.
// ---------------------------------------------------------------------------

/// Solves a small dense real system by Gaussian elimination with partial
/// pivoting. Returns `None` when the system is numerically singular.
fn real_solve<T: Real>(a: &RMat<T>, b: &RVec<T>) -> Option<RVec<T>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return None;
    }
    let mut m = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if m[(row, col)].abs() > m[(piv, col)].abs() {
                piv = row;
            }
        }
        if m[(piv, col)].abs() <= T::epsilon() * r::<T>(n as f64) {
            return None;
        }
        if piv != col {
            for j in 0..n {
                let tmp = m[(col, j)];
                m[(col, j)] = m[(piv, j)];
                m[(piv, j)] = tmp;
            }
            let tmp = x[col];
            x[col] = x[piv];
            x[piv] = tmp;
        }
        for row in col + 1..n {
            let f = m[(row, col)] / m[(col, col)];
            for j in col..n {
                let sub = f * m[(col, j)];
                m[(row, j)] -= sub;
            }
            let sub = f * x[col];
            x[row] -= sub;
        }
    }
    for col in (0..n).rev() {
        let mut v = x[col];
        for j in col + 1..n {
            v -= m[(col, j)] * x[j];
        }
        x[col] = v / m[(col, col)];
    }
    Some(x)
}

/// Least-squares coefficients of `y` on the listed columns of `a`, via the
/// normal equations. Returns `None` when the columns are rank deficient.
fn support_fit<T: Real>(a: &RMat<T>, y: &RVec<T>, support: &[usize]) -> Option<RVec<T>> {
    let k = support.len();
    let rows = a.nrows();
    let gram = RMat::from_shape_fn((k, k), |(i, j)| {
        (0..rows)
            .map(|r0| a[(r0, support[i])] * a[(r0, support[j])])
            .sum()
    });
    let rhs = RVec::from_shape_fn(k, |i| {
        (0..rows).map(|r0| a[(r0, support[i])] * y[r0]).sum()
    });
    real_solve(&gram, &rhs)
}

/// Residual norm of the least-squares fit of `y` on a support.
fn support_residual<T: Real>(a: &RMat<T>, y: &RVec<T>, support: &[usize], coef: &RVec<T>) -> T {
    let rows = a.nrows();
    let mut acc = T::zero();
    for r0 in 0..rows {
        let mut v = y[r0];
        for (i, &j) in support.iter().enumerate() {
            v -= a[(r0, j)] * coef[i];
        }
        acc += v * v;
    }
    acc.sqrt()
}

/// Enumerates every size-`k` column support whose least-squares fit reproduces
/// `y` within `tol` of its norm. The l1 solver's answer on a well-posed
/// instance must match the unique entry of this list.
pub fn exact_sparse_supports<T: Real>(
    a: &RMat<T>,
    y: &RVec<T>,
    k: usize,
    tol: T,
) -> Result<Vec<Vec<usize>>> {
    let n = a.ncols();
    if y.len() != a.nrows() {
        return Err(Error::Dimension("rhs does not match matrix rows".into()));
    }
    if k == 0 || k > n {
        return Err(Error::Config(format!("support size {k} of {n} columns")));
    }
    match choose_capped(n, k) {
        Some(c) if c <= EXHAUSTIVE_BUDGET => {}
        _ => {
            return Err(Error::Config(
                "support enumeration exceeds the exhaustive budget".into(),
            ));
        }
    }
    let ynorm = {
        let mut acc = T::zero();
        for &v in y.iter() {
            acc += v * v;
        }
        acc.sqrt()
    };
    let limit = tol * (ynorm + T::one());
    let mut found = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        if let Some(coef) = support_fit(a, y, &idx) {
            if support_residual(a, y, &idx, &coef) <= limit {
                found.push(idx.clone());
            }
        }
        if !next_combination(&mut idx, n) {
            break;
        }
    }
    Ok(found)
}

/// Exact-recovery certificate for minimum-l1 reconstruction: with `y` the
/// minimum-norm dual vector satisfying `A_S^T y = signs`, recovery of a signal
/// on support `S` with those signs is guaranteed when every off-support column
/// satisfies `|a_j^T y| < 1`. Returns whether the strict bound holds with a
/// small margin, so certified instances survive solver tolerance.
pub fn l1_recovery_certificate<T: Real>(
    a: &RMat<T>,
    support: &[usize],
    signs: &[T],
) -> Result<bool> {
    let n = a.ncols();
    let rows = a.nrows();
    if signs.len() != support.len() {
        return Err(Error::Dimension("one sign per support index".into()));
    }
    for &j in support {
        if j >= n {
            return Err(Error::Dimension(format!("column {j} outside {n}")));
        }
    }
    let k = support.len();
    // Minimum-norm dual: y = A_S (A_S^T A_S)^{-1} signs.
    let gram = RMat::from_shape_fn((k, k), |(i, j)| {
        (0..rows)
            .map(|r0| a[(r0, support[i])] * a[(r0, support[j])])
            .sum()
    });
    let s_vec = RVec::from_shape_fn(k, |i| signs[i]);
    let coef = match real_solve(&gram, &s_vec) {
        Some(c) => c,
        None => return Ok(false),
    };
    let y = RVec::from_shape_fn(rows, |r0| {
        support
            .iter()
            .enumerate()
            .map(|(i, &j)| a[(r0, j)] * coef[i])
            .sum()
    });
    let margin = T::one() - r::<T>(1e-6);
    for j in 0..n {
        if support.contains(&j) {
            continue;
        }
        let corr: T = (0..rows).map(|r0| a[(r0, j)] * y[r0]).sum();
        if corr.abs() >= margin {
            return Ok(false);
        }
    }
    Ok(true)
}

//! Receive combiner design for the legitimate users and the eavesdropper.
//!
//! Combiners are design vectors, not ground truth: whatever unit-norm vector
//! comes out, the rate accounting in `signal` evaluates it exactly. The
//! maximum-ratio option matches the combined channel of the served beam; the
//! minimum-mean-square-error option whitens interference, surface noise, and
//! hardware distortion first.

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{norm, solve};
use crate::scalar::{czero, Real};
use crate::signal::CompositeChannels;
use crate::{CMat, CVec, Cx};

/// Maximum-ratio combiner for a beam `w` through composite channel `q`.
pub fn mrt_combiner<T: Real>(q: &CMat<T>, w: &CVec<T>) -> Result<CVec<T>> {
    let mut u = q.dot(w);
    let nrm = norm(&u);
    if nrm.to64() < 1e-30 {
        return Err(Error::Numerical(
            "beam arrives with zero power; no combiner direction exists".into(),
        ));
    }
    u.mapv_inplace(|v| v / Cx::new(nrm, T::zero()));
    Ok(u)
}

/// Sum over users of the received rank-one signatures `(Q w_i)(Q w_i)^H`,
/// optionally skipping one index.
fn received_covariance<T: Real>(
    q: &CMat<T>,
    beams: &[CVec<T>],
    skip: Option<usize>,
) -> CMat<T> {
    let nr = q.nrows();
    let mut cov = CMat::<T>::zeros((nr, nr));
    for (i, w) in beams.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        let s = q.dot(w);
        for a in 0..nr {
            for b in 0..nr {
                cov[(a, b)] += s[a] * s[b].conj();
            }
        }
    }
    cov
}

/// `Q diag(d) Q^H` for a real per-antenna power profile `d`.
fn distortion_covariance<T: Real>(q: &CMat<T>, d: &[T]) -> CMat<T> {
    let nr = q.nrows();
    let n = q.ncols();
    CMat::from_shape_fn((nr, nr), |(a, b)| {
        let mut acc = czero::<T>();
        for j in 0..n {
            acc += q[(a, j)] * Cx::new(d[j], T::zero()) * q[(b, j)].conj();
        }
        acc
    })
}

fn per_antenna_power<T: Real>(beams: &[CVec<T>], n: usize) -> Vec<T> {
    (0..n)
        .map(|j| beams.iter().map(|w| w[j].norm_sqr()).sum::<T>())
        .collect()
}

/// Minimum-mean-square-error combiner for user `k`.
///
/// The whitening covariance collects cross-user interference and the user's
/// own surface-distorted replica, transmit distortion driven by the total
/// per-antenna power, surface thermal noise, and receiver thermal noise.
pub fn mmse_bob_combiner<T: Real>(
    cfg: &SystemConfig<T>,
    comp: &CompositeChannels<T>,
    k: usize,
    beams: &[CVec<T>],
) -> Result<CVec<T>> {
    if k >= comp.q_bob.len() || beams.len() != comp.q_bob.len() {
        return Err(Error::Dimension("user index or beam count out of range".into()));
    }
    let q = &comp.q_bob[k];
    let nr = q.nrows();
    let n = q.ncols();
    let mu_t = cfg.tx_impairment;
    let mu_r = cfg.ris_impairment;
    let one_mr = T::one() + mu_r;

    let mut e1 = received_covariance(q, beams, Some(k)).mapv(|v| v * Cx::new(one_mr, T::zero()));
    // The surface distortion scatters a mu_r-weighted copy of the user's own
    // stream into the noise floor.
    {
        let s = q.dot(&beams[k]);
        for a in 0..nr {
            for b in 0..nr {
                e1[(a, b)] += Cx::new(mu_r, T::zero()) * s[a] * s[b].conj();
            }
        }
    }
    let d = per_antenna_power(beams, n);
    let tx = distortion_covariance(q, &d);
    e1 = &e1 + &tx.mapv(|v| v * Cx::new(one_mr * mu_t, T::zero()));
    e1 = &e1
        + &comp.ris_gram_bob[k].mapv(|v| v * Cx::new(cfg.ris_noise_w(), T::zero()));
    let floor = one_mr * cfg.bob_noise_w();
    for a in 0..nr {
        e1[(a, a)] += Cx::new(floor, T::zero());
    }
    let target = q.dot(&beams[k]);
    let mut u = solve(&e1, &target)?;
    let nrm = norm(&u);
    if nrm.to64() < 1e-30 {
        return Err(Error::Numerical("whitened combiner collapsed to zero".into()));
    }
    u.mapv_inplace(|v| v / Cx::new(nrm, T::zero()));
    Ok(u)
}

/// Minimum-mean-square-error combiner for the eavesdropper intercepting user
/// `k`'s stream. Surface distortion is deliberately absent here: crediting the
/// eavesdropper with a cleaner front end keeps the secrecy figure
/// conservative.
pub fn mmse_eve_combiner<T: Real>(
    cfg: &SystemConfig<T>,
    comp: &CompositeChannels<T>,
    k: usize,
    beams: &[CVec<T>],
) -> Result<CVec<T>> {
    if k >= beams.len() {
        return Err(Error::Dimension("user index out of range".into()));
    }
    let q = &comp.q_eve;
    let nr = q.nrows();
    let n = q.ncols();
    let mut cov = received_covariance(q, beams, Some(k));
    let d = per_antenna_power(beams, n);
    let tx = distortion_covariance(q, &d);
    cov = &cov + &tx.mapv(|v| v * Cx::new(cfg.tx_impairment, T::zero()));
    cov = &cov
        + &comp.ris_gram_eve.mapv(|v| v * Cx::new(cfg.ris_noise_w(), T::zero()));
    let floor = cfg.eve_noise_w();
    for a in 0..nr {
        cov[(a, a)] += Cx::new(floor, T::zero());
    }
    let target = q.dot(&beams[k]);
    let mut u = solve(&cov, &target)?;
    let nrm = norm(&u);
    if nrm.to64() < 1e-30 {
        return Err(Error::Numerical("whitened combiner collapsed to zero".into()));
    }
    u.mapv_inplace(|v| v / Cx::new(nrm, T::zero()));
    Ok(u)
}

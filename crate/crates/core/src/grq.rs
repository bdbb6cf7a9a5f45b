//! Transmit beamformer design by generalized Rayleigh quotient maximization.
//!
//! Each user's beam maximizes its own useful power against a denominator
//! collecting interference caused at the other users, receiver and surface
//! noise, hardware distortion, and a robustness margin for channel estimation
//! error, all restricted to the currently selected antennas and projected so
//! the eavesdropper's combined channel receives nothing.

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{cdot, eigh, hermitize, inv_sqrt_psd, norm, norm_sqr};
use crate::scalar::{czero, r, Real};
use crate::signal::{CompositeChannels, Selection};
use crate::{CMat, CVec, Cx};

/// Row of responses seen through a combiner: entry `n` is `(u^H Q)_n`.
pub fn received_row<T: Real>(q: &CMat<T>, u: &CVec<T>) -> CVec<T> {
    let (nr, nc) = q.dim();
    CVec::from_shape_fn(nc, |n| {
        let mut acc = czero::<T>();
        for j in 0..nr {
            acc += u[j].conj() * q[(j, n)];
        }
        acc
    })
}

/// Maximizes `x^H A x / x^H B x` over nonzero `x`.
///
/// `B` must be positive definite up to the relative floor, which clips its
/// small eigenvalues at `floor * lambda_max` before inversion. Returns the
/// achieved quotient and a unit-norm maximizer.
pub fn solve_grq<T: Real>(a: &CMat<T>, b: &CMat<T>, floor: T) -> Result<(T, CVec<T>)> {
    let n = a.nrows();
    if a.dim() != (n, n) || b.dim() != (n, n) {
        return Err(Error::Dimension("quotient matrices must be square and equal".into()));
    }
    if n == 0 {
        return Err(Error::Dimension("empty quotient problem".into()));
    }
    let half = inv_sqrt_psd(b, floor)?;
    let mid = hermitize(&half.dot(a).dot(&half));
    let (vals, vecs) = eigh(&mid)?;
    let top = vals[n - 1];
    let y = vecs.column(n - 1).to_owned();
    let mut x = half.dot(&y);
    let nrm = norm(&x);
    if nrm <= T::zero() {
        return Err(Error::Numerical("quotient maximizer collapsed to zero".into()));
    }
    x.mapv_inplace(|v| v / Cx::new(nrm, T::zero()));
    Ok((top, x))
}

/// Per-user beams produced by one quotient-maximization pass.
#[derive(Debug, Clone)]
pub struct BeamSet<T> {
    /// One length-N beam per user, supported on the selected antennas and
    /// scaled so each carries power P0/K.
    pub w: Vec<CVec<T>>,
    /// Achieved quotient values, one per user.
    pub quotients: Vec<T>,
}

/// Designs all users' beams for the given composite channels and combiners.
///
/// `prev_alpha` is the power fraction assigned to data (as opposed to
/// artificial noise) in the previous outer iteration; it sizes the robustness
/// margin. Use 1 before any split exists.
pub fn grq_beamformers<T: Real>(
    cfg: &SystemConfig<T>,
    comp: &CompositeChannels<T>,
    selection: &Selection,
    u_bob: &[CVec<T>],
    prev_alpha: T,
) -> Result<BeamSet<T>> {
    let k_users = comp.q_bob.len();
    if u_bob.len() != k_users {
        return Err(Error::Dimension("one combiner per user is required".into()));
    }
    let n = comp.q_bob[0].ncols();
    let sel = &selection.active;
    let ns = sel.len();
    if ns == 0 {
        return Err(Error::Config("no antennas selected".into()));
    }
    let p0 = cfg.bs_power_w();
    let kf = r::<T>(k_users as f64);
    let sigma_b = cfg.bob_noise_w();
    let sigma_r = cfg.ris_noise_w();
    let mu_t = cfg.tx_impairment;
    let mu_r = cfg.ris_impairment;
    // theta with the direct path appended has squared norm |theta|^2 + 1.
    let theta_hat_norm = (norm_sqr(&comp.theta) + T::one()).sqrt();
    let margin = (r::<T>(cfg.err_cascaded_eve.to64()) * p0 / kf
        + r::<T>(cfg.err_cascaded_bob.to64()) * (T::one() - prev_alpha) * p0)
        * theta_hat_norm;

    // Effective per-user channels through their combiners, restricted to the
    // selected antennas.
    let qu: Vec<CVec<T>> = (0..k_users)
        .map(|k| {
            let row = received_row(&comp.q_bob[k], &u_bob[k]);
            CVec::from_shape_fn(ns, |i| row[sel[i]].conj())
        })
        .collect();
    // Beams avoid the whole interception channel, not just the combiner the
    // eavesdropper currently points at it: nulling a single direction invites
    // a pursuit where the interceptor re-aims inside its remaining antenna
    // space every time the beam moves away from it.
    let eve_basis = eve_null_basis(comp, sel);

    // Hardware distortion couples every antenna's total radiated power back
    // into each user's denominator; the weight per antenna sums over all
    // users' responses there.
    let distortion_diag: Vec<T> = (0..ns)
        .map(|i| (0..k_users).map(|k| qu[k][i].norm_sqr()).sum::<T>())
        .collect();

    let mut beams = Vec::with_capacity(k_users);
    let mut quotients = Vec::with_capacity(k_users);
    for k in 0..k_users {
        // Numerator: own useful power.
        let a_mat = outer_restricted(&qu[k]);
        // Interference this beam causes at the other users.
        let mut l2 = CMat::<T>::zeros((ns, ns));
        for i in 0..k_users {
            if i != k {
                let o = outer_restricted(&qu[i]);
                l2 = &l2 + &o;
            }
        }
        let ris_at_k = {
            let g = &comp.ris_gram_bob[k];
            let mut acc = T::zero();
            for r1 in 0..g.nrows() {
                for c1 in 0..g.ncols() {
                    acc += (u_bob[k][r1].conj() * g[(r1, c1)] * u_bob[k][c1]).re;
                }
            }
            acc
        };
        let l3 = sigma_b + sigma_r * ris_at_k;
        let base = kf / p0 * l3 + margin;
        let mut b_mat = l2.clone();
        for i in 0..ns {
            b_mat[(i, i)] += Cx::new(base, T::zero());
        }
        // Distortion terms: transmit-side on the per-antenna diagonal,
        // surface-side proportional to the clean quadratic forms.
        let tx_coef = (T::one() + mu_r) * mu_t;
        for i in 0..ns {
            b_mat[(i, i)] += Cx::new(tx_coef * distortion_diag[i], T::zero());
        }
        let ris_coef = mu_r;
        let own_plus_noise = {
            let mut m = &a_mat + &l2;
            let add = kf * sigma_b / p0;
            for i in 0..ns {
                m[(i, i)] += Cx::new(add, T::zero());
            }
            m
        };
        b_mat = &b_mat + &own_plus_noise.mapv(|v| v * Cx::new(ris_coef, T::zero()));

        // Project both sides so any beam in the search space is invisible to
        // the eavesdropper, then maximize the quotient there.
        let mut a_proj = a_mat.clone();
        let mut b_proj = b_mat.clone();
        for d in &eve_basis {
            a_proj = project_out(&a_proj, d, T::one());
            b_proj = project_out(&b_proj, d, T::one());
        }
        let (val, x) = solve_grq(&a_proj, &hermitize(&b_proj), cfg.solve.eig_floor)?;
        // Re-apply the projector to the maximizer to clean up rounding, then
        // scale to the per-user power budget.
        let mut w_s = deflate(&x, &eve_basis);
        let nrm = norm(&w_s);
        if nrm.to64() < 1e-12 {
            // The null-space constraint consumed the whole subspace; fall
            // back to the unprojected maximizer rather than sending nothing.
            let (_, x2) = solve_grq(&a_mat, &hermitize(&b_mat), cfg.solve.eig_floor)?;
            w_s = x2;
        }
        let scale = (p0 / kf).sqrt() / norm(&w_s);
        w_s.mapv_inplace(|v| v * Cx::new(scale, T::zero()));
        let mut w_full = CVec::zeros(n);
        for (i, &idx) in sel.iter().enumerate() {
            w_full[idx] = w_s[i];
        }
        beams.push(w_full);
        quotients.push(val);
    }
    Ok(BeamSet {
        w: beams,
        quotients,
    })
}

/// Matched-filter beams in the eavesdropper's null space: each user's beam is
/// its own received direction with the whole interception channel projected
/// out, scaled to the per-user power budget.
///
/// No interference shaping happens here; the intent is that the receive
/// combiners reject the cross-talk spatially. When the users' received
/// directions are strongly correlated this keeps the signal energy the
/// quotient design would sacrifice to interference avoidance, so it is a
/// useful alternative candidate rather than a replacement.
pub fn matched_beamformers<T: Real>(
    comp: &CompositeChannels<T>,
    selection: &Selection,
    u_bob: &[CVec<T>],
    p0: T,
) -> Result<BeamSet<T>> {
    let k_users = comp.q_bob.len();
    if u_bob.len() != k_users {
        return Err(Error::Dimension("one combiner per user is required".into()));
    }
    let n = comp.q_bob[0].ncols();
    let sel = &selection.active;
    let ns = sel.len();
    if ns == 0 {
        return Err(Error::Config("no antennas selected".into()));
    }
    let kf = r::<T>(k_users as f64);
    let eve_basis = eve_null_basis(comp, sel);
    let mut beams = Vec::with_capacity(k_users);
    let mut quotients = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let row = received_row(&comp.q_bob[k], &u_bob[k]);
        let qu = CVec::from_shape_fn(ns, |i| row[sel[i]].conj());
        let mut w_s = deflate(&qu, &eve_basis);
        let total = norm_sqr(&qu);
        let kept = norm_sqr(&w_s);
        if kept.to64() < 1e-24 || total.to64() < 1e-24 {
            // Nothing survives the projection; send the raw direction.
            w_s = qu.clone();
        }
        let nrm = norm(&w_s);
        if nrm.to64() < 1e-30 {
            return Err(Error::Numerical("matched direction has no energy".into()));
        }
        let scale = (p0 / kf).sqrt() / nrm;
        w_s.mapv_inplace(|v| v * Cx::new(scale, T::zero()));
        let mut w_full = CVec::zeros(n);
        for (i, &idx) in sel.iter().enumerate() {
            w_full[idx] = w_s[i];
        }
        beams.push(w_full);
        quotients.push(if total > T::zero() { kept / total } else { T::zero() });
    }
    Ok(BeamSet {
        w: beams,
        quotients,
    })
}

/// Orthonormal basis of the interception channel's row space restricted to
/// the selected antennas. Beams orthogonal to every vector returned here are
/// invisible to the eavesdropper no matter how it combines its antennas.
fn eve_null_basis<T: Real>(comp: &CompositeChannels<T>, sel: &[usize]) -> Vec<CVec<T>> {
    let ns = sel.len();
    let ne = comp.q_eve.nrows();
    let mut basis: Vec<CVec<T>> = Vec::with_capacity(ne);
    for rj in 0..ne {
        let mut v = CVec::from_shape_fn(ns, |i| comp.q_eve[(rj, sel[i])].conj());
        let full = norm_sqr(&v);
        if full.to64() < 1e-30 {
            continue;
        }
        // Two Gram-Schmidt sweeps keep the basis orthonormal even when the
        // interception rows are nearly parallel.
        for _ in 0..2 {
            for b in &basis {
                let c = cdot(b, &v);
                for i in 0..ns {
                    let bi = b[i];
                    v[i] -= c * bi;
                }
            }
        }
        let rem = norm_sqr(&v);
        if rem.to64() > 1e-24 * full.to64().max(1.0) {
            let s = rem.sqrt();
            v.mapv_inplace(|x| x / Cx::new(s, T::zero()));
            basis.push(v);
        }
    }
    basis
}

/// Removes the components of `v` along an orthonormal set of directions.
fn deflate<T: Real>(v: &CVec<T>, basis: &[CVec<T>]) -> CVec<T> {
    let mut out = v.clone();
    for b in basis {
        let c = cdot(b, &out);
        for i in 0..out.len() {
            let bi = b[i];
            out[i] -= c * bi;
        }
    }
    out
}

fn outer_restricted<T: Real>(v: &CVec<T>) -> CMat<T> {
    let n = v.len();
    CMat::from_shape_fn((n, n), |(i, j)| v[i] * v[j].conj())
}

/// Gamma M Gamma for the rank-one projector Gamma = I - d d^H / nrm.
fn project_out<T: Real>(m: &CMat<T>, d: &CVec<T>, nrm: T) -> CMat<T> {
    let n = m.nrows();
    let inv = Cx::new(T::one() / nrm, T::zero());
    // md = M d, dm = d^H M
    let md = m.dot(d);
    let dm = CVec::from_shape_fn(n, |j| {
        let mut acc = czero::<T>();
        for i in 0..n {
            acc += d[i].conj() * m[(i, j)];
        }
        acc
    });
    let dmd = cdot(d, &md);
    CMat::from_shape_fn((n, n), |(i, j)| {
        m[(i, j)] - inv * d[i] * dm[j] - inv * md[i] * d[j].conj()
            + inv * inv * dmd * d[i] * d[j].conj()
    })
}

//! One surface phase-shift update, posed as a second-order cone program.
//!
//! The update variable is a complex perturbation of the current reflection
//! vector together with a growth factor `xi1 >= 0`. The program maximizes
//! `xi1` subject to:
//!
//! - every user's cascaded response growing coherently by the factor
//!   `1 + xi1` (equality rows),
//! - the eavesdropper's cascaded response staying untouched (equality rows),
//! - cross-user interference magnitudes staying within a configurable
//!   multiple of their current values (small cones),
//! - transmit-distortion coupling through the surface not growing (small
//!   cones, only when transmit impairment is present),
//! - the reflect power drawn by the surface staying within its budget (one
//!   large cone),
//! - `xi1` between its floor and cap (nonnegative rows).
//!
//! A failed or infeasible solve degrades to a zero update so the caller's
//! iteration never moves backward because of this step.

use crate::channel::ChannelSet;
use crate::config::SystemConfig;
use crate::conic::{solve_conic, ConeSpec, ConicProblem, ConicStatus, SolverOptions};
use crate::error::{Error, Result};
use crate::grq::received_row;
use crate::scalar::{czero, r, Real};
use crate::signal::{cascaded_rows, CompositeChannels};
use crate::{CVec, Cx, RMat, RVec};

/// Constraint family limiting the reflection amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReflectBudget {
    /// Amplifying surface: reflected signal plus amplified noise must fit the
    /// surface's total power budget.
    TotalPower,
    /// Passive surface: each element's amplitude stays at or below one.
    UnitModulus,
}

/// Result of one phase update.
#[derive(Debug, Clone)]
pub struct PhaseOutcome<T> {
    /// New reflection vector (equals the previous one when `solved` is false).
    pub theta: CVec<T>,
    /// Achieved growth factor.
    pub xi1: T,
    /// Whether the cone program reached optimality. On false the update is
    /// the identity.
    pub solved: bool,
}

/// Computes one phase-shift update.
///
/// `beams` must already be masked to the selected antennas. `mui_growth`
/// bounds each cross-interference magnitude at that multiple of its current
/// value (1 keeps interference from growing; smaller values force it down).
pub fn phase_step<T: Real>(
    cfg: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    comp: &CompositeChannels<T>,
    beams: &[CVec<T>],
    u_bob: &[CVec<T>],
    u_eve: &[CVec<T>],
    budget: ReflectBudget,
    mui_growth: T,
) -> Result<PhaseOutcome<T>> {
    let m = channels.ris_count();
    let k_users = beams.len();
    if k_users == 0 || u_bob.len() != k_users || u_eve.len() != k_users {
        return Err(Error::Dimension("need one beam and combiner per user".into()));
    }
    if comp.theta.len() != m {
        return Err(Error::Dimension("reflection vector does not match surface".into()));
    }
    let theta = &comp.theta;

    // Cascaded responses through the surface, one complex M-vector per
    // (observer, beam) pair. The eavesdropper's view of stream k goes through
    // the interception combiner aimed at that stream.
    let bob_rows: Vec<_> = (0..k_users)
        .map(|k| cascaded_rows(&channels.g, &channels.f_bob[k], &u_bob[k]))
        .collect();
    let own: Vec<CVec<T>> = (0..k_users).map(|k| bob_rows[k].dot(&beams[k])).collect();
    let eve_casc: Vec<CVec<T>> = (0..k_users)
        .map(|k| cascaded_rows(&channels.g, &channels.f_eve, &u_eve[k]).dot(&beams[k]))
        .collect();
    let bilinear = |v: &CVec<T>| -> Cx<T> {
        let mut acc = czero::<T>();
        for i in 0..m {
            acc += theta[i] * v[i];
        }
        acc
    };
    let current: Vec<Cx<T>> = own.iter().map(bilinear).collect();

    // Reference scale for deciding which rows are genuinely zero.
    let scale_ref = {
        let mut s = T::zero();
        for c in &current {
            if c.norm() > s {
                s = c.norm();
            }
        }
        if s == T::zero() {
            for a in &own {
                let n = a.iter().map(|v| v.norm()).sum::<T>();
                if n > s {
                    s = n;
                }
            }
        }
        if s == T::zero() {
            r::<T>(1e-30)
        } else {
            s
        }
    };
    let vac = r::<T>(1e-12) * scale_ref;

    // Variable layout: [Re d; Im d; xi1] and optionally a norm epigraph.
    let use_reg = cfg.solve.phase_reg > T::zero();
    let nv = 2 * m + 1 + usize::from(use_reg);
    let xi = 2 * m;

    // Equality rows.
    let mut eq_rows: Vec<RVec<T>> = Vec::new();
    let mut eq_rhs: Vec<T> = Vec::new();
    let push_complex_eq =
        |rows: &mut Vec<RVec<T>>, rhs: &mut Vec<T>, v: &CVec<T>, xi_coef: Cx<T>| {
            // d^T v - xi_coef * xi1 = 0, split into real and imaginary rows.
            let mut row_re = RVec::<T>::zeros(nv);
            let mut row_im = RVec::<T>::zeros(nv);
            for i in 0..m {
                row_re[i] = v[i].re;
                row_re[m + i] = -v[i].im;
                row_im[i] = v[i].im;
                row_im[m + i] = v[i].re;
            }
            row_re[xi] = -xi_coef.re;
            row_im[xi] = -xi_coef.im;
            rows.push(row_re);
            rows.push(row_im);
            rhs.push(T::zero());
            rhs.push(T::zero());
        };
    for k in 0..k_users {
        // Growth is only defined relative to a nonzero current response.
        if current[k].norm() > vac {
            push_complex_eq(&mut eq_rows, &mut eq_rhs, &own[k], current[k]);
        }
    }
    for k in 0..k_users {
        let strength: T = eve_casc[k].iter().map(|v| v.norm()).sum();
        if strength > vac {
            push_complex_eq(&mut eq_rows, &mut eq_rhs, &eve_casc[k], czero());
        }
    }

    // Cone rows, nonnegative first.
    let mut g_rows: Vec<RVec<T>> = Vec::new();
    let mut h_vals: Vec<T> = Vec::new();
    let mut soc_dims: Vec<usize> = Vec::new();
    // xi1 >= floor
    {
        let mut row = RVec::<T>::zeros(nv);
        row[xi] = -T::one();
        g_rows.push(row);
        h_vals.push(-cfg.solve.xi1_floor);
    }
    // xi1 <= cap
    {
        let mut row = RVec::<T>::zeros(nv);
        row[xi] = T::one();
        g_rows.push(row);
        h_vals.push(cfg.solve.xi1_cap);
    }
    let nonneg_count = 2;

    // |cur + d^T a| <= mui_growth * |cur| bounds the cross-interference
    // between every ordered user pair.
    let push_affine_abs_cone = |g_rows: &mut Vec<RVec<T>>,
                                h_vals: &mut Vec<T>,
                                soc_dims: &mut Vec<usize>,
                                v: &CVec<T>,
                                cur: Cx<T>,
                                bound: T| {
        let mut row0 = RVec::<T>::zeros(nv);
        row0.fill(T::zero());
        g_rows.push(row0);
        h_vals.push(bound);
        let mut row_re = RVec::<T>::zeros(nv);
        let mut row_im = RVec::<T>::zeros(nv);
        for i in 0..m {
            row_re[i] = -v[i].re;
            row_re[m + i] = v[i].im;
            row_im[i] = -v[i].im;
            row_im[m + i] = -v[i].re;
        }
        g_rows.push(row_re);
        h_vals.push(cur.re);
        g_rows.push(row_im);
        h_vals.push(cur.im);
        soc_dims.push(3);
    };
    for k in 0..k_users {
        let u_row = received_row(&comp.q_bob[k], &u_bob[k]);
        for i in 0..k_users {
            if i == k {
                continue;
            }
            let cross_casc = bob_rows[k].dot(&beams[i]);
            let cur: Cx<T> = {
                let mut acc = czero::<T>();
                for n in 0..beams[i].len() {
                    acc += u_row[n] * beams[i][n];
                }
                acc
            };
            let casc_strength: T = cross_casc.iter().map(|v| v.norm()).sum();
            if cur.norm() <= vac && casc_strength <= vac {
                continue;
            }
            let bound = mui_growth * cur.norm() + vac;
            push_affine_abs_cone(&mut g_rows, &mut h_vals, &mut soc_dims, &cross_casc, cur, bound);
        }
    }

    // Transmit distortion couples through the surface along the entrywise
    // magnitude profile of the beams; that coupling must not grow.
    if cfg.tx_impairment > T::zero() {
        let n_grid = beams[0].len();
        let absw = CVec::from_shape_fn(n_grid, |n| {
            let s: T = beams.iter().map(|w| w[n].norm()).sum();
            Cx::new(s, T::zero())
        });
        for k in 0..k_users {
            let coupling = bob_rows[k].dot(&absw);
            let cur = bilinear(&coupling);
            let strength: T = coupling.iter().map(|v| v.norm()).sum();
            if cur.norm() <= vac && strength <= vac {
                continue;
            }
            push_affine_abs_cone(
                &mut g_rows,
                &mut h_vals,
                &mut soc_dims,
                &coupling,
                cur,
                cur.norm(),
            );
        }
    }

    match budget {
        // Reflect power: sum_m (g_m + sigma_r^2) |theta_m + d_m|^2 <= P.
        ReflectBudget::TotalPower => {
            let sigma_r = cfg.ris_noise_w();
            let weights: Vec<T> = (0..m)
                .map(|mm| {
                    let mut g_m = T::zero();
                    for w in beams {
                        let gw = channels.g.row(mm).dot(w);
                        g_m += gw.norm_sqr();
                    }
                    (g_m + sigma_r).sqrt()
                })
                .collect();
            let mut row0 = RVec::<T>::zeros(nv);
            row0.fill(T::zero());
            g_rows.push(row0);
            h_vals.push(cfg.ris_power_w().sqrt());
            for mm in 0..m {
                let mut row_re = RVec::<T>::zeros(nv);
                row_re[mm] = -weights[mm];
                g_rows.push(row_re);
                h_vals.push(weights[mm] * theta[mm].re);
                let mut row_im = RVec::<T>::zeros(nv);
                row_im[m + mm] = -weights[mm];
                g_rows.push(row_im);
                h_vals.push(weights[mm] * theta[mm].im);
            }
            soc_dims.push(2 * m + 1);
        }
        // Per-element amplitude: |theta_m + d_m| <= 1 for every element.
        ReflectBudget::UnitModulus => {
            for mm in 0..m {
                let mut row0 = RVec::<T>::zeros(nv);
                row0.fill(T::zero());
                g_rows.push(row0);
                h_vals.push(T::one());
                let mut row_re = RVec::<T>::zeros(nv);
                row_re[mm] = -T::one();
                g_rows.push(row_re);
                h_vals.push(theta[mm].re);
                let mut row_im = RVec::<T>::zeros(nv);
                row_im[m + mm] = -T::one();
                g_rows.push(row_im);
                h_vals.push(theta[mm].im);
                soc_dims.push(3);
            }
        }
    }

    // Optional pull toward small reflection vectors.
    if use_reg {
        let t2 = nv - 1;
        let mut row0 = RVec::<T>::zeros(nv);
        row0[t2] = -T::one();
        g_rows.push(row0);
        h_vals.push(T::zero());
        for mm in 0..m {
            let mut row_re = RVec::<T>::zeros(nv);
            row_re[mm] = -T::one();
            g_rows.push(row_re);
            h_vals.push(theta[mm].re);
            let mut row_im = RVec::<T>::zeros(nv);
            row_im[m + mm] = -T::one();
            g_rows.push(row_im);
            h_vals.push(theta[mm].im);
        }
        soc_dims.push(2 * m + 1);
    }

    let p_eq = eq_rows.len();
    let m_cone = g_rows.len();
    let mut a_mat = RMat::<T>::zeros((p_eq, nv));
    for (i, row) in eq_rows.iter().enumerate() {
        for j in 0..nv {
            a_mat[(i, j)] = row[j];
        }
    }
    let b_vec = RVec::from_vec(eq_rhs);
    let mut g_mat = RMat::<T>::zeros((m_cone, nv));
    for (i, row) in g_rows.iter().enumerate() {
        for j in 0..nv {
            g_mat[(i, j)] = row[j];
        }
    }
    let h_vec = RVec::from_vec(h_vals);
    let mut c = RVec::<T>::zeros(nv);
    c[xi] = -T::one();
    if use_reg {
        c[nv - 1] = cfg.solve.phase_reg;
    }
    let problem = ConicProblem {
        c,
        a: a_mat,
        b: b_vec,
        g: g_mat,
        h: h_vec,
        cones: ConeSpec {
            nonneg: nonneg_count,
            soc: soc_dims,
        },
    };
    let sol = solve_conic(&problem, &SolverOptions::default())?;
    if sol.status != ConicStatus::Optimal || !sol.x.iter().all(|v| v.is_finite()) {
        return Ok(PhaseOutcome {
            theta: theta.clone(),
            xi1: T::zero(),
            solved: false,
        });
    }
    let theta_new = CVec::from_shape_fn(m, |mm| theta[mm] + Cx::new(sol.x[mm], sol.x[m + mm]));
    Ok(PhaseOutcome {
        theta: theta_new,
        xi1: sol.x[xi],
        solved: true,
    })
}

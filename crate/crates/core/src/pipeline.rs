//! Alternating optimization of combiners, beams, and surface reflection for a
//! fixed antenna selection, plus the end-to-end scenario drivers.
//!
//! One round of the inner loop designs, in order, the receive combiners
//! (whitening against everything the previous beams radiate), the transmit
//! beams (quotient maximization inside the eavesdropper's null space), and the
//! surface reflection (common-growth cone program). A candidate round is kept
//! only if the secrecy sum rate did not drop; otherwise progressively smaller
//! pieces of it are kept, and the round is abandoned entirely when even the
//! beam update alone hurts. That guard makes the reported trace monotone
//! without assuming anything about the underlying geometry.

use crate::channel::ChannelSet;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::grq::{grq_beamformers, matched_beamformers};
use crate::linalg::norm;
use crate::phase::{phase_step, ReflectBudget};
use crate::receivers::{mmse_bob_combiner, mmse_eve_combiner};
use crate::scalar::{r, Real};
use crate::signal::{
    compose, rate_report, ris_power_used, BeamformerState, CompositeChannels, RateReport,
    Selection,
};
use crate::{CVec, Cx};

/// Surface architecture driven by the alternating loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RisMode {
    /// No surface: reflection fixed at zero, phase updates skipped.
    Off,
    /// Passive surface: per-element amplitudes at most one.
    Passive,
    /// Amplifying surface: reflection limited by the power budget.
    Active,
}

/// Converged design for one antenna selection.
#[derive(Debug, Clone)]
pub struct AoOutcome<T> {
    /// Final transmit and receive design.
    pub state: BeamformerState<T>,
    /// Final surface reflection.
    pub theta: CVec<T>,
    /// Rate breakdown on the channels the loop optimized against.
    pub report: RateReport<T>,
    /// Secrecy sum rate after every accepted round, starting with the
    /// initial design.
    pub trace: Vec<T>,
    /// Number of rounds executed (accepted or not).
    pub iterations: usize,
}

pub(crate) fn uniform_combiner<T: Real>(len: usize) -> CVec<T> {
    let v = CVec::from_elem(len, Cx::new(T::one(), T::zero()));
    let s = norm(&v);
    v.mapv(|x| x / Cx::new(s, T::zero()))
}

/// Deterministic initial combiner patterns for the multi-start loop: a
/// uniform sum, a single-element spot, and a quarter-turn phase ramp. The
/// alternating ascent is guarded but greedy, so where it lands depends on
/// where it starts; racing a few cheap starts and keeping the best converged
/// design smooths out that dependence without introducing randomness.
fn start_combiner<T: Real>(len: usize, start: usize) -> CVec<T> {
    match start {
        0 => uniform_combiner(len),
        1 => {
            let mut v = CVec::from_elem(len, Cx::new(T::zero(), T::zero()));
            v[0] = Cx::new(T::one(), T::zero());
            v
        }
        _ => {
            let v = CVec::from_shape_fn(len, |i| match i % 4 {
                0 => Cx::new(T::one(), T::zero()),
                1 => Cx::new(T::zero(), T::one()),
                2 => Cx::new(-T::one(), T::zero()),
                _ => Cx::new(T::zero(), -T::one()),
            });
            let s = norm(&v);
            v.mapv(|x| x / Cx::new(s, T::zero()))
        }
    }
}

/// Initial reflection vector for each architecture.
///
/// The active surface starts on a uniform vector scaled to sit inside its
/// power budget under the given beams; the passive surface starts slightly
/// inside the unit-modulus boundary so the first cone program has an interior
/// point to work from.
fn initial_theta<T: Real>(
    cfg: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    beams: &[CVec<T>],
    mode: RisMode,
) -> CVec<T> {
    let m = channels.ris_count();
    match mode {
        RisMode::Off => CVec::from_elem(m, Cx::new(T::zero(), T::zero())),
        RisMode::Passive => CVec::from_elem(m, Cx::new(r::<T>(0.95), T::zero())),
        RisMode::Active => {
            let sigma_r = cfg.ris_noise_w();
            let mut total = T::zero();
            for mm in 0..m {
                let mut g_m = T::zero();
                for w in beams {
                    g_m += channels.g.row(mm).dot(w).norm_sqr();
                }
                total += g_m + sigma_r;
            }
            let scale = if total > T::zero() {
                (cfg.ris_power_w() / total).sqrt() * r::<T>(0.9)
            } else {
                T::one()
            };
            CVec::from_elem(m, Cx::new(scale, T::zero()))
        }
    }
}

/// Scales a reflection vector back inside the architecture's limit.
///
/// The cone program guarantees feasibility only for the beams it was solved
/// with; when a round falls back to an older reflection under newer beams the
/// budget can be overdrawn, and rates computed from an overdrawn surface are
/// inflated. Shrinking the whole vector is always feasible and keeps the
/// comparison honest.
fn repair_theta<T: Real>(
    cfg: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    beams: &[CVec<T>],
    mut theta: CVec<T>,
    mode: RisMode,
) -> CVec<T> {
    match mode {
        RisMode::Off => theta,
        RisMode::Passive => {
            let mx = theta
                .iter()
                .map(|v| v.norm())
                .fold(T::zero(), |m, x| if x > m { x } else { m });
            if mx > T::one() {
                let s = (T::one() - r::<T>(1e-12)) / mx;
                theta.mapv_inplace(|v| v * Cx::new(s, T::zero()));
            }
            theta
        }
        RisMode::Active => {
            let sigma_r = cfg.ris_noise_w();
            let m = channels.ris_count();
            let mut used = T::zero();
            for mm in 0..m {
                let mut g_m = T::zero();
                for w in beams {
                    g_m += channels.g.row(mm).dot(w).norm_sqr();
                }
                used += (g_m + sigma_r) * theta[mm].norm_sqr();
            }
            let budget = cfg.ris_power_w();
            if used > budget {
                let s = (budget / used).sqrt() * (T::one() - r::<T>(1e-12));
                theta.mapv_inplace(|v| v * Cx::new(s, T::zero()));
            }
            theta
        }
    }
}

pub(crate) struct Design<T> {
    pub(crate) theta: CVec<T>,
    pub(crate) comp: CompositeChannels<T>,
    pub(crate) state: BeamformerState<T>,
    pub(crate) report: RateReport<T>,
}

/// Scores a candidate design. The eavesdropper is adversarial, so its
/// combiners are always re-derived against the candidate beams; scoring a
/// candidate with stale interception combiners that the fresh beams happen to
/// null would credit the design with secrecy it does not have.
pub(crate) fn evaluate<T: Real>(
    cfg: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    theta: CVec<T>,
    w: Vec<CVec<T>>,
    u_bob: Vec<CVec<T>>,
) -> Result<Design<T>> {
    let comp = compose(channels, &theta)?;
    let u_eve: Vec<CVec<T>> = (0..w.len())
        .map(|k| mmse_eve_combiner(cfg, &comp, k, &w))
        .collect::<Result<_>>()?;
    let state = BeamformerState::decomposed(cfg, &comp, w, u_bob, u_eve);
    let report = rate_report(cfg, &comp, &state)?;
    Ok(Design {
        theta,
        comp,
        state,
        report,
    })
}

/// Runs the alternating loop on a fixed antenna selection.
///
/// The channels passed in are the ones the optimizer believes; callers who
/// model estimation error evaluate the returned design against the true
/// channels afterwards.
pub fn alternate<T: Real>(
    cfg: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    selection: &Selection,
    mode: RisMode,
) -> Result<AoOutcome<T>> {
    let mut best: Option<AoOutcome<T>> = None;
    for start in 0..3 {
        let out = alternate_from(cfg, channels, selection, mode, start)?;
        if best
            .as_ref()
            .map(|b| out.report.secrecy > b.report.secrecy)
            .unwrap_or(true)
        {
            best = Some(out);
        }
    }
    Ok(best.expect("at least one start always runs"))
}

fn alternate_from<T: Real>(
    cfg: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    selection: &Selection,
    mode: RisMode,
    start: usize,
) -> Result<AoOutcome<T>> {
    let kk = cfg.num_bobs;
    if channels.num_bobs() != kk {
        return Err(Error::Dimension(format!(
            "channel set has {} users, config expects {kk}",
            channels.num_bobs()
        )));
    }
    let u_bob0: Vec<CVec<T>> = (0..kk)
        .map(|_| start_combiner(cfg.bob_antennas, start))
        .collect();

    // Bootstrap: beams with the surface dark, then the surface scaled to them.
    let comp_dark = compose(channels, &CVec::from_elem(channels.ris_count(), Cx::new(T::zero(), T::zero())))?;
    let beams0 = grq_beamformers(cfg, &comp_dark, selection, &u_bob0, T::one())?;
    let theta0 = initial_theta(cfg, channels, &beams0.w, mode);
    let mut cur = evaluate(cfg, channels, theta0, beams0.w, u_bob0)?;

    let budget = if mode == RisMode::Passive {
        ReflectBudget::UnitModulus
    } else {
        ReflectBudget::TotalPower
    };
    let tiny = r::<T>(1e-12);
    let trace_on = std::env::var("AO_TRACE").is_ok();

    let mut trace = vec![cur.report.secrecy];
    let mut mui_growth = T::one();
    let mut iterations = 0;
    for _ in 0..cfg.solve.max_iterations {
        iterations += 1;
        let round_start = cur.report.secrecy;

        // Block 1: legitimate combiners. The eavesdropper's combiners are
        // adversarial and re-armed inside every evaluation, so there is no
        // separate block for them. The whitening combiner maximizes each
        // user's ratio under the lumped-beam covariance, which is a surrogate
        // for the exact objective (it ignores how the combiner re-splits the
        // precoder into signal and noise shares), so a damped variant is
        // offered alongside it and the better of the two is kept, if either
        // helps at all.
        {
            let mut u_full = Vec::with_capacity(kk);
            for k in 0..kk {
                u_full.push(mmse_bob_combiner(cfg, &cur.comp, k, &cur.state.w)?);
            }
            let damped = |t: T| -> Vec<CVec<T>> {
                (0..kk)
                    .map(|k| {
                        let mut v = CVec::from_shape_fn(cfg.bob_antennas, |i| {
                            cur.state.u_bob[k][i]
                                + (u_full[k][i] - cur.state.u_bob[k][i]) * Cx::new(t, T::zero())
                        });
                        let s = norm(&v);
                        if s > T::zero() {
                            v.mapv_inplace(|x| x / Cx::new(s, T::zero()));
                        }
                        v
                    })
                    .collect()
            };
            let ladder = [damped(T::one()), damped(r::<T>(0.5)), damped(r::<T>(0.25))];
            let mut best: Option<Design<T>> = None;
            for u_cand in ladder {
                let cand =
                    evaluate(cfg, channels, cur.theta.clone(), cur.state.w.clone(), u_cand)?;
                if trace_on {
                    eprintln!(
                        "  combiners: {:.6} -> {:.6}",
                        cur.report.secrecy.to64(),
                        cand.report.secrecy.to64()
                    );
                }
                if best
                    .as_ref()
                    .map(|b| cand.report.secrecy > b.report.secrecy)
                    .unwrap_or(true)
                {
                    best = Some(cand);
                }
            }
            if let Some(cand) = best {
                if cand.report.secrecy + tiny >= cur.report.secrecy {
                    cur = cand;
                }
            }
        }

        // Block 2: transmit beams. Each margin variant of the quotient design
        // is scored twice, once with the combiners held where they are and
        // once with the combiners re-aimed at the candidate beams. New beams
        // usually look bad through old combiners even when the joint move is
        // a clear win, so scoring only the kept-combiner pairing would veto
        // most useful beam updates.
        {
            let prev_alpha = cur.state.mean_alpha();
            let mut variants: Vec<T> = vec![prev_alpha];
            if (prev_alpha - T::one()).abs() > r::<T>(1e-6) {
                variants.push(T::one());
            }
            let mut best: Option<Design<T>> = None;
            let consider = |cand: Design<T>, best: &mut Option<Design<T>>| {
                if best
                    .as_ref()
                    .map(|b| cand.report.secrecy > b.report.secrecy)
                    .unwrap_or(true)
                {
                    *best = Some(cand);
                }
            };
            for a in &variants {
                let beams = grq_beamformers(cfg, &cur.comp, selection, &cur.state.u_bob, *a)?;
                let theta_rep = repair_theta(cfg, channels, &beams.w, cur.theta.clone(), mode);
                let comp_rep = compose(channels, &theta_rep)?;
                let keep =
                    evaluate(cfg, channels, theta_rep.clone(), beams.w.clone(), cur.state.u_bob.clone())?;
                let u_aim: Vec<CVec<T>> = (0..kk)
                    .map(|kk| mmse_bob_combiner(cfg, &comp_rep, kk, &beams.w))
                    .collect::<Result<_>>()?;
                let aim = evaluate(cfg, channels, theta_rep, beams.w, u_aim)?;
                if trace_on {
                    eprintln!(
                        "  beams:     {:.6} -> keep {:.6} / re-aim {:.6} (margin alpha {:.3})",
                        cur.report.secrecy.to64(),
                        keep.report.secrecy.to64(),
                        aim.report.secrecy.to64(),
                        a.to64()
                    );
                }
                consider(keep, &mut best);
                consider(aim, &mut best);
            }
            // Alignment-first alternative: matched beams inside the
            // eavesdropper's null space, leaving interference rejection to
            // the combiners. Wins when the users' received directions are so
            // correlated that quotient designs sacrifice most of the signal.
            {
                let beams = matched_beamformers(
                    &cur.comp,
                    selection,
                    &cur.state.u_bob,
                    cfg.bs_power_w(),
                )?;
                let theta_rep = repair_theta(cfg, channels, &beams.w, cur.theta.clone(), mode);
                let comp_rep = compose(channels, &theta_rep)?;
                let keep = evaluate(
                    cfg,
                    channels,
                    theta_rep.clone(),
                    beams.w.clone(),
                    cur.state.u_bob.clone(),
                )?;
                let u_aim: Vec<CVec<T>> = (0..kk)
                    .map(|i| mmse_bob_combiner(cfg, &comp_rep, i, &beams.w))
                    .collect::<Result<_>>()?;
                let aim = evaluate(cfg, channels, theta_rep, beams.w, u_aim)?;
                if trace_on {
                    eprintln!(
                        "  beams:     {:.6} -> keep {:.6} / re-aim {:.6} (matched)",
                        cur.report.secrecy.to64(),
                        keep.report.secrecy.to64(),
                        aim.report.secrecy.to64()
                    );
                }
                consider(keep, &mut best);
                consider(aim, &mut best);
            }
            if let Some(cand) = best {
                if cand.report.secrecy + tiny >= cur.report.secrecy {
                    cur = cand;
                }
            }
        }

        // Block 3: surface reflection, with one retry on a tighter
        // interference leash when the first attempt hurts.
        if mode != RisMode::Off {
            for attempt in 0..2 {
                let step = phase_step(
                    cfg,
                    channels,
                    &cur.comp,
                    &cur.state.w,
                    &cur.state.u_bob,
                    &cur.state.u_eve,
                    budget,
                    mui_growth,
                )?;
                if !step.solved {
                    break;
                }
                let theta_rep = repair_theta(cfg, channels, &cur.state.w, step.theta, mode);
                let cand = evaluate(
                    cfg,
                    channels,
                    theta_rep,
                    cur.state.w.clone(),
                    cur.state.u_bob.clone(),
                )?;
                if trace_on {
                    eprintln!(
                        "  surface:   {:.6} -> {:.6} (xi1 {:.3e}, attempt {attempt})",
                        cur.report.secrecy.to64(),
                        cand.report.secrecy.to64(),
                        step.xi1.to64()
                    );
                }
                if cand.report.secrecy + tiny >= cur.report.secrecy {
                    cur = cand;
                    break;
                }
                mui_growth = mui_growth * r::<T>(0.5);
            }
        }

        trace.push(cur.report.secrecy);
        if (cur.report.secrecy - round_start).abs() <= cfg.solve.tolerance {
            break;
        }
    }

    let report = cur.report.clone();
    Ok(AoOutcome {
        state: cur.state,
        theta: cur.theta,
        report,
        trace,
        iterations,
    })
}

/// Largest relative overdraw of the surface architecture's own limit: power
/// budget for the active mode, unit modulus for the passive one, reflection
/// magnitude for a dark surface. Zero when within limits.
pub fn surface_overdraw<T: Real>(
    cfg: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    outcome: &AoOutcome<T>,
    mode: RisMode,
) -> T {
    match mode {
        RisMode::Off => outcome
            .theta
            .iter()
            .map(|v| v.norm())
            .fold(T::zero(), |m, x| if x > m { x } else { m }),
        RisMode::Passive => outcome
            .theta
            .iter()
            .map(|v| v.norm())
            .fold(T::zero(), |m, x| if x > m { x } else { m })
            .max(T::one())
            - T::one(),
        RisMode::Active => {
            let used = ris_power_used(
                channels,
                &outcome.state,
                &outcome.theta,
                cfg.ris_noise_w(),
            );
            let budget = cfg.ris_power_w();
            let excess = used - budget;
            if excess > T::zero() {
                excess / budget
            } else {
                T::zero()
            }
        }
    }
}

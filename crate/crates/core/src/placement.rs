//! Discrete antenna placement over the candidate grid.
//!
//! Two grouping strategies reduce the combinatorial search over candidate
//! positions to a handful of scored groups. The uniform strategy tiles the
//! grid with strided groups of equal size, scores each group independently,
//! and fills the selection from the best groups down. The non-uniform
//! strategy partitions the grid by repeated group-sparsity solves: starting
//! from a design over every candidate, each round finds the fewest antennas
//! that can reproduce the users' received responses while staying invisible
//! to the eavesdropper, splits them off as a group, and repeats on the rest.

use crate::channel::ChannelSet;
use crate::config::SystemConfig;
use crate::conic::{solve_conic, ConeSpec, ConicProblem, ConicStatus, SolverOptions};
use crate::error::{Error, Result};
use crate::grq::{grq_beamformers, received_row};
use crate::pipeline::{alternate, evaluate, uniform_combiner, RisMode};
use crate::receivers::mmse_bob_combiner;
use crate::scalar::{r, Real};
use crate::signal::{compose, CompositeChannels, Selection};
use crate::{CVec, RMat, RVec};

/// One scored group of candidate positions.
#[derive(Debug, Clone)]
pub struct GroupReport<T> {
    /// Group index in construction order.
    pub id: usize,
    /// Candidate indices in the group, ascending.
    pub members: Vec<usize>,
    /// Secrecy sum rate achieved by a design restricted to the group.
    pub secrecy: T,
    /// Members actually placed in the final selection (empty if unused).
    pub taken: Vec<usize>,
}

/// Result of a placement run: the selection itself plus the group-level
/// evidence it was built from.
#[derive(Debug, Clone)]
pub struct PlacementOutcome<T> {
    /// Exactly `selected_antennas` candidate indices, ascending.
    pub selection: Selection,
    /// All groups in construction order, with scores and placements.
    pub groups: Vec<GroupReport<T>>,
    /// Surface reflection the group scoring used.
    pub theta: CVec<T>,
}

/// Tiles `total` candidates into `total / group_size` strided groups.
///
/// Group `l` holds indices `l, l + n_t, l + 2 n_t, ...` where `n_t` is the
/// group count, so members of one group are spread across the whole grid
/// rather than packed next to each other. Any remainder candidates past
/// `n_t * group_size` are left ungrouped.
pub fn uniform_groups(total: usize, group_size: usize) -> Result<Vec<Vec<usize>>> {
    if group_size == 0 {
        return Err(Error::Config("group size must be at least 1".into()));
    }
    let n_t = total / group_size;
    if n_t == 0 {
        return Err(Error::Config(format!(
            "grid of {total} cannot host even one group of {group_size}"
        )));
    }
    let groups: Vec<Vec<usize>> = (0..n_t)
        .map(|l| (0..group_size).map(|j| l + j * n_t).collect())
        .collect();
    // Verify the construction instead of trusting it: indices in range and
    // used at most once across all groups.
    let mut seen = vec![false; total];
    for g in &groups {
        for &i in g {
            if i >= total {
                return Err(Error::Config(format!(
                    "group construction produced index {i} outside grid of {total}"
                )));
            }
            if seen[i] {
                return Err(Error::Config(format!(
                    "group construction used candidate {i} twice"
                )));
            }
            seen[i] = true;
        }
    }
    Ok(groups)
}

/// Designs beams restricted to `members` at the fixed reflection and scores
/// the result exactly. Returns the secrecy sum rate and the per-member total
/// beam power used to break ties when a group is only partially placed.
fn score_group<T: Real>(
    cfg: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    comp: &CompositeChannels<T>,
    theta: &CVec<T>,
    members: &[usize],
) -> Result<(T, Vec<T>)> {
    let sel = Selection::new(channels.grid_count(), members.to_vec())?;
    let kk = cfg.num_bobs;
    let u0: Vec<CVec<T>> = (0..kk).map(|_| uniform_combiner(cfg.bob_antennas)).collect();
    let beams0 = grq_beamformers(cfg, comp, &sel, &u0, T::one())?;
    // One re-aim round: combiners matched to the first beams, then beams
    // redesigned under those combiners. Keeps the scoring deterministic and
    // cheap while avoiding the worst stale-combiner bias.
    let u1: Vec<CVec<T>> = (0..kk)
        .map(|k| mmse_bob_combiner(cfg, comp, k, &beams0.w))
        .collect::<Result<_>>()?;
    let beams1 = grq_beamformers(cfg, comp, &sel, &u1, T::one())?;
    let design = evaluate(cfg, channels, theta.clone(), beams1.w, u1)?;
    let powers: Vec<T> = members
        .iter()
        .map(|&n| {
            design
                .state
                .w
                .iter()
                .map(|w| w[n].norm_sqr())
                .fold(T::zero(), |a, b| a + b)
        })
        .collect();
    Ok((design.report.secrecy, powers))
}

/// Fills the selection from the best groups down.
///
/// Groups are ranked by secrecy (descending, ties to the lower id). Whole
/// groups are taken while they fit; the group that crosses the target is
/// truncated to its strongest members by per-antenna beam power (ties to the
/// lower candidate index). Placements are recorded on the reports.
fn fill_selection<T: Real>(
    reports: &mut [GroupReport<T>],
    powers: &[Vec<T>],
    target: usize,
) -> Result<Vec<usize>> {
    let mut order: Vec<usize> = (0..reports.len()).collect();
    order.sort_by(|&a, &b| {
        reports[b]
            .secrecy
            .partial_cmp(&reports[a].secrecy)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(reports[a].id.cmp(&reports[b].id))
    });
    let mut selected: Vec<usize> = Vec::with_capacity(target);
    for &gi in &order {
        if selected.len() == target {
            break;
        }
        let room = target - selected.len();
        let members = &reports[gi].members;
        let taken: Vec<usize> = if members.len() <= room {
            members.clone()
        } else {
            let mut by_power: Vec<usize> = (0..members.len()).collect();
            by_power.sort_by(|&a, &b| {
                powers[gi][b]
                    .partial_cmp(&powers[gi][a])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(members[a].cmp(&members[b]))
            });
            let mut t: Vec<usize> = by_power[..room].iter().map(|&i| members[i]).collect();
            t.sort_unstable();
            t
        };
        selected.extend_from_slice(&taken);
        reports[gi].taken = taken;
    }
    if selected.len() != target {
        return Err(Error::Config(format!(
            "groups hold {} candidates in total, cannot place {target}",
            selected.len()
        )));
    }
    selected.sort_unstable();
    Ok(selected)
}

/// Uniform-grouping placement.
///
/// The grid is tiled into strided groups of `group_size`. The surface comes
/// from one alternating run on group 0; every group is then scored with beams
/// restricted to it at that fixed surface, and the selection is filled from
/// the best groups down.
pub fn uniform_placement<T: Real>(
    cfg: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    mode: RisMode,
) -> Result<PlacementOutcome<T>> {
    let n = channels.grid_count();
    let n0 = cfg.group_size;
    if n0 < cfg.num_bobs + 1 {
        return Err(Error::Config(format!(
            "group_size {} cannot serve {} users; need at least {}",
            n0,
            cfg.num_bobs,
            cfg.num_bobs + 1
        )));
    }
    let groups = uniform_groups(n, n0)?;
    let sel0 = Selection::new(n, groups[0].clone())?;
    let warm = alternate(cfg, channels, &sel0, mode)?;
    let theta = warm.theta;
    let comp = compose(channels, &theta)?;

    let mut reports: Vec<GroupReport<T>> = Vec::with_capacity(groups.len());
    let mut powers: Vec<Vec<T>> = Vec::with_capacity(groups.len());
    for (id, members) in groups.into_iter().enumerate() {
        let (secrecy, p) = score_group(cfg, channels, &comp, &theta, &members)?;
        reports.push(GroupReport {
            id,
            members,
            secrecy,
            taken: Vec::new(),
        });
        powers.push(p);
    }
    let selected = fill_selection(&mut reports, &powers, cfg.selected_antennas)?;
    Ok(PlacementOutcome {
        selection: Selection::new(n, selected)?,
        groups: reports,
        theta,
    })
}

/// Per-antenna norms of the group-sparsity solution on `remaining`, or `None`
/// when the cone program did not reach optimality.
///
/// The program minimizes the sum over antennas of the joint two-norm of each
/// antenna's `k` beam weights, subject to every user's received response
/// (through `bob_rows`) matching `targets` and every interception row in
/// `eve_rows` receiving zero from every beam.
fn group_sparsity_norms<T: Real>(
    bob_rows: &[CVec<T>],
    eve_rows: &[CVec<T>],
    targets: &[Vec<crate::Cx<T>>],
    remaining: &[usize],
    opts: &SolverOptions<T>,
) -> Result<Option<Vec<T>>> {
    let k = bob_rows.len();
    let ne = eve_rows.len();
    let ns = remaining.len();
    // Layout: per antenna block of 2k reals (re/im per beam), then one
    // epigraph variable per antenna.
    let wvar = |i: usize, j: usize, im: bool| i * 2 * k + 2 * j + usize::from(im);
    let tvar = |i: usize| ns * 2 * k + i;
    let nv = ns * 2 * k + ns;

    let p = 2 * k * k + 2 * ne * k;
    let mut a = RMat::<T>::zeros((p, nv));
    let mut b = RVec::<T>::zeros(p);
    let mut row = 0;
    for (uk, urow) in bob_rows.iter().enumerate() {
        for j in 0..k {
            for (i, &idx) in remaining.iter().enumerate() {
                let c = urow[idx];
                a[(row, wvar(i, j, false))] = c.re;
                a[(row, wvar(i, j, true))] = -c.im;
                a[(row + 1, wvar(i, j, false))] = c.im;
                a[(row + 1, wvar(i, j, true))] = c.re;
            }
            b[row] = targets[uk][j].re;
            b[row + 1] = targets[uk][j].im;
            row += 2;
        }
    }
    for erow in eve_rows {
        for j in 0..k {
            for (i, &idx) in remaining.iter().enumerate() {
                let c = erow[idx];
                a[(row, wvar(i, j, false))] = c.re;
                a[(row, wvar(i, j, true))] = -c.im;
                a[(row + 1, wvar(i, j, false))] = c.im;
                a[(row + 1, wvar(i, j, true))] = c.re;
            }
            row += 2;
        }
    }

    let cone_dim = 2 * k + 1;
    let m = ns * cone_dim;
    let mut g = RMat::<T>::zeros((m, nv));
    for i in 0..ns {
        let base = i * cone_dim;
        g[(base, tvar(i))] = -T::one();
        for v in 0..2 * k {
            g[(base + 1 + v, i * 2 * k + v)] = -T::one();
        }
    }
    let mut c = RVec::<T>::zeros(nv);
    for i in 0..ns {
        c[tvar(i)] = T::one();
    }
    let problem = ConicProblem {
        c,
        a,
        b,
        g,
        h: RVec::zeros(m),
        cones: ConeSpec {
            nonneg: 0,
            soc: vec![cone_dim; ns],
        },
    };
    let sol = solve_conic(&problem, opts)?;
    if sol.status != ConicStatus::Optimal {
        return Ok(None);
    }
    let norms: Vec<T> = (0..ns)
        .map(|i| {
            (0..2 * k)
                .map(|v| sol.x[i * 2 * k + v] * sol.x[i * 2 * k + v])
                .fold(T::zero(), |acc, s| acc + s)
                .sqrt()
        })
        .collect();
    Ok(Some(norms))
}

/// Partitions all candidates into groups by repeated sparsity solves.
///
/// Each round concentrates the reference beams onto as few of the remaining
/// antennas as the response and interception constraints allow; those
/// antennas become the next group. Groups smaller than `floor` are merged
/// into the following one. A round that cannot sparsify (solver failure, or
/// support equal to everything left) closes the remainder as the final group.
fn sparsity_partition<T: Real>(
    bob_rows: &[CVec<T>],
    eve_rows: &[CVec<T>],
    w_ref: &[CVec<T>],
    total: usize,
    floor: usize,
    refresh_reference: bool,
    opts: &SolverOptions<T>,
) -> Result<Vec<Vec<usize>>> {
    let k = bob_rows.len();
    let mut remaining: Vec<usize> = (0..total).collect();
    let mut pending: Vec<usize> = Vec::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let full_targets: Vec<Vec<crate::Cx<T>>> = bob_rows
        .iter()
        .map(|urow| {
            (0..k)
                .map(|j| (0..total).map(|n| urow[n] * w_ref[j][n]).sum())
                .collect()
        })
        .collect();

    let close = |mut tail: Vec<usize>, pending: &mut Vec<usize>, groups: &mut Vec<Vec<usize>>| {
        let mut g = std::mem::take(pending);
        g.append(&mut tail);
        if !g.is_empty() {
            g.sort_unstable();
            groups.push(g);
        }
    };

    loop {
        if remaining.len() <= floor {
            close(std::mem::take(&mut remaining), &mut pending, &mut groups);
            break;
        }
        let targets: Vec<Vec<crate::Cx<T>>> = if refresh_reference {
            // Reference restricted to what is still on the table: targets a
            // design without the removed antennas can actually meet.
            bob_rows
                .iter()
                .map(|urow| {
                    (0..k)
                        .map(|j| remaining.iter().map(|&n| urow[n] * w_ref[j][n]).sum())
                        .collect()
                })
                .collect()
        } else {
            full_targets.clone()
        };
        let norms = match group_sparsity_norms(bob_rows, eve_rows, &targets, &remaining, opts)? {
            Some(nrm) => nrm,
            None => {
                close(std::mem::take(&mut remaining), &mut pending, &mut groups);
                break;
            }
        };
        let max = norms.iter().cloned().fold(T::zero(), |a, b| a.max(b));
        if max <= T::zero() {
            close(std::mem::take(&mut remaining), &mut pending, &mut groups);
            break;
        }
        let threshold = r::<T>(1e-6) * max;
        let support: Vec<usize> = remaining
            .iter()
            .enumerate()
            .filter(|(i, _)| norms[*i] > threshold)
            .map(|(_, &n)| n)
            .collect();
        if support.is_empty() || support.len() == remaining.len() {
            close(std::mem::take(&mut remaining), &mut pending, &mut groups);
            break;
        }
        remaining.retain(|n| !support.contains(n));
        let mut group = std::mem::take(&mut pending);
        group.extend_from_slice(&support);
        group.sort_unstable();
        if group.len() < floor {
            pending = group;
        } else {
            groups.push(group);
        }
        if remaining.is_empty() {
            close(Vec::new(), &mut pending, &mut groups);
            break;
        }
    }
    if !pending.is_empty() {
        // Leftover short group at the very end: attach it to the last group
        // formed, or emit it alone if it is the only one.
        if let Some(last) = groups.last_mut() {
            last.extend_from_slice(&pending);
            last.sort_unstable();
        } else {
            pending.sort_unstable();
            groups.push(pending.clone());
        }
        pending.clear();
    }
    Ok(groups)
}

/// Sparsity-grouping placement.
///
/// One alternating run over the full grid provides the reference beams,
/// combiners, and surface. The grid is then partitioned by repeated
/// group-sparsity solves that preserve each user's received response through
/// the converged combiners while keeping every beam invisible to the
/// eavesdropper. Groups are scored exactly like the uniform strategy scores
/// its tiles, and the selection is filled from the best groups down.
pub fn sparsity_placement<T: Real>(
    cfg: &SystemConfig<T>,
    channels: &ChannelSet<T>,
    mode: RisMode,
) -> Result<PlacementOutcome<T>> {
    let n = channels.grid_count();
    if cfg.selected_antennas < cfg.num_bobs + 1 {
        return Err(Error::Config(format!(
            "{} antennas cannot serve {} users; need at least {}",
            cfg.selected_antennas,
            cfg.num_bobs,
            cfg.num_bobs + 1
        )));
    }
    let full = Selection::full(n);
    let warm = alternate(cfg, channels, &full, mode)?;
    let comp = compose(channels, &warm.theta)?;
    let kk = cfg.num_bobs;
    let bob_rows: Vec<CVec<T>> = (0..kk)
        .map(|k| received_row(&comp.q_bob[k], &warm.state.u_bob[k]))
        .collect();
    let ne = comp.q_eve.nrows();
    let eve_rows: Vec<CVec<T>> = (0..ne)
        .map(|e| CVec::from_shape_fn(n, |j| comp.q_eve[(e, j)]))
        .collect();
    let opts = SolverOptions::default();
    let groups = sparsity_partition(
        &bob_rows,
        &eve_rows,
        &warm.state.w,
        n,
        cfg.num_bobs + 1,
        cfg.solve.refresh_sparsity_reference,
        &opts,
    )?;

    let mut reports: Vec<GroupReport<T>> = Vec::with_capacity(groups.len());
    let mut powers: Vec<Vec<T>> = Vec::with_capacity(groups.len());
    for (id, members) in groups.into_iter().enumerate() {
        let (secrecy, p) = score_group(cfg, channels, &comp, &warm.theta, &members)?;
        reports.push(GroupReport {
            id,
            members,
            secrecy,
            taken: Vec::new(),
        });
        powers.push(p);
    }
    let selected = fill_selection(&mut reports, &powers, cfg.selected_antennas)?;
    Ok(PlacementOutcome {
        selection: Selection::new(n, selected)?,
        groups: reports,
        theta: warm.theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cone;
    use crate::Cx;

    #[test]
    fn strided_tiling_matches_hand_layout() {
        let groups = uniform_groups(12, 3).unwrap();
        assert_eq!(groups.len(), 4);
        assert_eq!(groups[0], vec![0, 4, 8]);
        assert_eq!(groups[1], vec![1, 5, 9]);
        assert_eq!(groups[2], vec![2, 6, 10]);
        assert_eq!(groups[3], vec![3, 7, 11]);
    }

    #[test]
    fn tiling_leaves_remainder_ungrouped_and_stays_disjoint() {
        let groups = uniform_groups(13, 3).unwrap();
        assert_eq!(groups.len(), 4);
        let mut all: Vec<usize> = groups.iter().flatten().cloned().collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 12, "groups must stay disjoint");
        assert!(!all.contains(&12), "remainder index must stay ungrouped");
        assert!(uniform_groups(2, 3).is_err());
        assert!(uniform_groups(10, 0).is_err());
    }

    #[test]
    fn fill_takes_best_groups_then_truncates_by_power() {
        let mut reports = vec![
            GroupReport {
                id: 0,
                members: vec![0, 4, 8],
                secrecy: 1.0_f64,
                taken: vec![],
            },
            GroupReport {
                id: 1,
                members: vec![1, 5, 9],
                secrecy: 3.0,
                taken: vec![],
            },
            GroupReport {
                id: 2,
                members: vec![2, 6, 10],
                secrecy: 2.0,
                taken: vec![],
            },
        ];
        let powers = vec![
            vec![0.3, 0.2, 0.1],
            vec![0.1, 0.1, 0.1],
            vec![0.1, 0.9, 0.5],
        ];
        // Best group (id 1) fits whole; id 2 crosses the target of 4 and
        // contributes only its strongest member, index 6.
        let sel = fill_selection(&mut reports, &powers, 4).unwrap();
        assert_eq!(sel, vec![1, 5, 6, 9]);
        assert_eq!(reports[1].taken, vec![1, 5, 9]);
        assert_eq!(reports[2].taken, vec![6]);
        assert!(reports[0].taken.is_empty());
    }

    #[test]
    fn fill_breaks_score_ties_toward_the_earlier_group() {
        let mut reports = vec![
            GroupReport {
                id: 0,
                members: vec![0, 2],
                secrecy: 1.0_f64,
                taken: vec![],
            },
            GroupReport {
                id: 1,
                members: vec![1, 3],
                secrecy: 1.0,
                taken: vec![],
            },
        ];
        let powers = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let sel = fill_selection(&mut reports, &powers, 2).unwrap();
        assert_eq!(sel, vec![0, 2]);
    }

    #[test]
    fn sparsity_solve_concentrates_on_the_strong_antenna() {
        // One user, one beam, four antennas. The response row loads antenna 0
        // far more than the rest, so reproducing the reference response with
        // minimal summed weight norms puts everything on antenna 0.
        let row: CVec<f64> = CVec::from_shape_fn(4, |i| {
            if i == 0 {
                Cx::new(2.0, 0.0)
            } else {
                Cx::new(0.05, 0.0)
            }
        });
        let w_ref: CVec<f64> =
            CVec::from_shape_fn(4, |i| if i == 0 { cone::<f64>() } else { Cx::new(0.5, 0.0) });
        let targets = vec![vec![(0..4).map(|i| row[i] * w_ref[i]).sum::<Cx<f64>>()]];
        let remaining: Vec<usize> = (0..4).collect();
        let norms = group_sparsity_norms(
            &[row],
            &[],
            &targets,
            &remaining,
            &SolverOptions::default(),
        )
        .unwrap()
        .expect("solvable instance");
        let max = norms.iter().cloned().fold(0.0_f64, f64::max);
        assert!(norms[0] > 0.9 * max);
        for i in 1..4 {
            assert!(
                norms[i] < 1e-6 * max,
                "antenna {i} should carry nothing, has {}",
                norms[i]
            );
        }
    }

    #[test]
    fn sparsity_solve_respects_interception_null() {
        // Two antennas with identical user responses; an interception row
        // that hears only antenna 1 forces the whole solution onto antenna 0.
        let row: CVec<f64> = CVec::from_elem(2, cone::<f64>());
        let eve: CVec<f64> = CVec::from_shape_fn(2, |i| {
            if i == 1 {
                cone::<f64>()
            } else {
                Cx::new(0.0, 0.0)
            }
        });
        let targets = vec![vec![Cx::new(1.0, 0.0)]];
        let norms = group_sparsity_norms(
            &[row],
            &[eve],
            &targets,
            &[0, 1],
            &SolverOptions::default(),
        )
        .unwrap()
        .expect("solvable instance");
        assert!(norms[0] > 0.99);
        assert!(norms[1] < 1e-6);
    }

    fn desk_cfg() -> crate::SystemConfig64 {
        let mut cfg = crate::SystemConfig64::default();
        cfg.grid_h = 3;
        cfg.grid_v = 4;
        cfg.selected_antennas = 6;
        cfg.group_size = 3;
        cfg.ris_h = 2;
        cfg.ris_v = 2;
        cfg.num_bobs = 2;
        cfg.bob_antennas = 2;
        cfg.eve_antennas = 2;
        cfg.nf_aperture_min_m = 0.0;
        cfg.validate().unwrap();
        cfg
    }

    #[test]
    fn uniform_placement_fills_the_budget_and_is_deterministic() {
        let cfg = desk_cfg();
        let channels = crate::channel::ChannelSet::nominal(&cfg).unwrap();
        let out = uniform_placement(&cfg, &channels, RisMode::Active).unwrap();
        assert_eq!(out.selection.count(), cfg.selected_antennas);
        assert_eq!(out.groups.len(), 4);
        let placed: usize = out.groups.iter().map(|g| g.taken.len()).sum();
        assert_eq!(placed, cfg.selected_antennas);
        for g in &out.groups {
            for t in &g.taken {
                assert!(g.members.contains(t), "taken index outside its group");
            }
        }
        let again = uniform_placement(&cfg, &channels, RisMode::Active).unwrap();
        assert_eq!(out.selection.active, again.selection.active);
        for (a, b) in out.groups.iter().zip(again.groups.iter()) {
            assert_eq!(a.secrecy, b.secrecy, "scores must be reproducible");
        }
    }

    #[test]
    fn uniform_placement_prefers_higher_scoring_groups() {
        let cfg = desk_cfg();
        let channels = crate::channel::ChannelSet::nominal(&cfg).unwrap();
        let out = uniform_placement(&cfg, &channels, RisMode::Active).unwrap();
        let used_scores: Vec<f64> = out
            .groups
            .iter()
            .filter(|g| !g.taken.is_empty())
            .map(|g| g.secrecy)
            .collect();
        let skipped_best = out
            .groups
            .iter()
            .filter(|g| g.taken.is_empty())
            .map(|g| g.secrecy)
            .fold(f64::NEG_INFINITY, f64::max);
        let used_worst = used_scores.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(
            used_worst >= skipped_best,
            "placed a worse group ({used_worst}) over a better one ({skipped_best})"
        );
    }

    #[test]
    fn sparsity_placement_fills_the_budget_from_a_partition() {
        let cfg = desk_cfg();
        let channels = crate::channel::ChannelSet::nominal(&cfg).unwrap();
        let out = sparsity_placement(&cfg, &channels, RisMode::Active).unwrap();
        assert_eq!(out.selection.count(), cfg.selected_antennas);
        let mut all: Vec<usize> = out.groups.iter().flat_map(|g| g.members.clone()).collect();
        all.sort_unstable();
        assert_eq!(
            all,
            (0..cfg.grid_total()).collect::<Vec<_>>(),
            "sparsity groups must partition the whole grid"
        );
        let again = sparsity_placement(&cfg, &channels, RisMode::Active).unwrap();
        assert_eq!(out.selection.active, again.selection.active);
    }

    #[test]
    fn partition_covers_everything_without_overlap() {
        // Deterministic synthetic rows with a few dominant antennas per user.
        let n = 10;
        let rows: Vec<CVec<f64>> = (0..2)
            .map(|k| {
                CVec::from_shape_fn(n, |i| {
                    let boost = if i % 2 == k { 2.0 } else { 0.2 };
                    Cx::new(
                        boost * (1.0 + (i as f64 * 0.37 + k as f64).sin() * 0.3),
                        boost * 0.2 * (i as f64 * 0.61 - k as f64).cos(),
                    )
                })
            })
            .collect();
        let eve: Vec<CVec<f64>> = vec![CVec::from_shape_fn(n, |i| {
            Cx::new(0.3 * ((i * i) as f64 * 0.17).cos(), 0.2 * (i as f64 * 0.83).sin())
        })];
        let w_ref: Vec<CVec<f64>> = (0..2)
            .map(|k| {
                CVec::from_shape_fn(n, |i| {
                    Cx::new(
                        (1.0 + ((i + k) as f64 * 0.29).cos()) * 0.7,
                        ((i as f64) * 0.41 + k as f64).sin() * 0.4,
                    )
                })
            })
            .collect();
        let groups =
            sparsity_partition(&rows, &eve, &w_ref, n, 3, true, &SolverOptions::default())
                .unwrap();
        let mut all: Vec<usize> = groups.iter().flatten().cloned().collect();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>(), "groups must partition the grid");
        for (gi, g) in groups.iter().enumerate() {
            assert!(
                g.len() >= 3 || gi + 1 == groups.len(),
                "group {gi} of size {} below the floor",
                g.len()
            );
        }
        assert!(groups.len() >= 2, "partition should split at least once");
    }
}

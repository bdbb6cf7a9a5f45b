//! Primal-dual interior-point solver for linear and second-order cone programs.
//!
//! Problems are given in the standard form
//!
//! ```text
//! minimize    c^T x
//! subject to  A x = b
//!             h - G x in K
//! ```
//!
//! where `K` is a product of a nonnegative orthant and second-order cones.
//! The solver runs a Nesterov-Todd scaled predictor-corrector iteration with
//! Ruiz equilibration, static regularization, and one round of iterative
//! refinement on each KKT solve. It is deterministic: the same problem always
//! produces the same iterates.

use crate::error::{Error, Result};
use crate::scalar::{r, Real};
use crate::{RMat, RVec};

/// Cone structure of the inequality rows: first `nonneg` one-dimensional
/// nonnegativity rows, then one block per entry of `soc` with that dimension.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConeSpec {
    /// Number of scalar nonnegativity rows.
    pub nonneg: usize,
    /// Dimensions of the second-order cone blocks, in row order.
    pub soc: Vec<usize>,
}

impl ConeSpec {
    /// Total number of cone rows.
    pub fn total(&self) -> usize {
        self.nonneg + self.soc.iter().sum::<usize>()
    }

    /// Barrier degree: one per scalar row, one per cone block.
    pub fn degree(&self) -> usize {
        self.nonneg + self.soc.len()
    }
}

/// A conic program in standard form.
#[derive(Debug, Clone)]
pub struct ConicProblem<T> {
    /// Objective gradient.
    pub c: RVec<T>,
    /// Equality matrix, `p x n`.
    pub a: RMat<T>,
    /// Equality right-hand side.
    pub b: RVec<T>,
    /// Cone matrix, `m x n`.
    pub g: RMat<T>,
    /// Cone right-hand side.
    pub h: RVec<T>,
    /// Cone structure of the `m` rows.
    pub cones: ConeSpec,
}

/// Termination state of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConicStatus {
    /// Converged to the requested tolerance.
    Optimal,
    /// The equality system is inconsistent, or the iteration certified that no
    /// feasible point exists.
    Infeasible,
    /// Iteration budget exhausted or progress stalled before convergence.
    Stalled,
}

/// Result of a solve. The iterate is returned even on failure so callers can
/// inspect how far the solver got.
#[derive(Debug, Clone)]
pub struct ConicSolution<T> {
    /// Primal variables.
    pub x: RVec<T>,
    /// Equality multipliers.
    pub y: RVec<T>,
    /// Cone multipliers.
    pub z: RVec<T>,
    /// Cone slacks.
    pub s: RVec<T>,
    /// Termination state.
    pub status: ConicStatus,
    /// Iterations used.
    pub iterations: usize,
    /// Final complementarity gap.
    pub gap: T,
    /// Final worst primal residual (equalities and cone rows).
    pub primal_residual: T,
    /// Final dual residual.
    pub dual_residual: T,
    /// Objective value at the returned point.
    pub objective: T,
}

/// Solver knobs.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions<T> {
    /// Feasibility and relative-gap tolerance.
    pub tol: T,
    /// Iteration cap.
    pub max_iter: usize,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tol: r(1e-8),
            max_iter: 200,
        }
    }
}

// ---------------------------------------------------------------------------
// Real dense LU with partial pivoting (private to the solver).
// ---------------------------------------------------------------------------

struct RealLu<T> {
    lu: RMat<T>,
    piv: Vec<usize>,
}

impl<T: Real> RealLu<T> {
    fn new(a: RMat<T>) -> Result<Self> {
        let n = a.nrows();
        let mut lu = a;
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut pk = k;
            let mut best = lu[(k, k)].abs();
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    pk = i;
                }
            }
            if best == T::zero() {
                return Err(Error::Numerical("singular KKT matrix".into()));
            }
            if pk != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(pk, j)];
                    lu[(pk, j)] = tmp;
                }
                piv.swap(k, pk);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                for j in k + 1..n {
                    let sub = f * lu[(k, j)];
                    lu[(i, j)] -= sub;
                }
            }
        }
        Ok(Self { lu, piv })
    }

    fn solve(&self, b: &RVec<T>) -> RVec<T> {
        let n = self.lu.nrows();
        let mut x = RVec::from_shape_fn(n, |i| b[self.piv[i]]);
        for i in 1..n {
            for j in 0..i {
                let sub = self.lu[(i, j)] * x[j];
                x[i] -= sub;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let sub = self.lu[(i, j)] * x[j];
                x[i] -= sub;
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }
}

// ---------------------------------------------------------------------------
// Nesterov-Todd scaling blocks.
// ---------------------------------------------------------------------------

enum BlockScale<T> {
    /// Per-coordinate scaling of the nonnegative rows: w_i = sqrt(s_i / z_i).
    Nonneg { w: Vec<T> },
    /// Second-order cone scaling W = eta * H(wbar) with wbar on the unit
    /// hyperboloid.
    Soc { eta: T, wbar: Vec<T> },
}

/// Applies the hyperbolic Householder map H(u) (u on the unit hyperboloid) to
/// the slice `v`, writing into `out`.
fn hyper_apply<T: Real>(u: &[T], v: &[T], out: &mut [T]) {
    let q = u.len();
    let mut dot = T::zero();
    for i in 1..q {
        dot += u[i] * v[i];
    }
    out[0] = u[0] * v[0] + dot;
    let coef = dot / (T::one() + u[0]) + v[0];
    for i in 1..q {
        out[i] = v[i] + coef * u[i];
    }
}

/// Reflects through J = diag(1, -I).
fn jmul<T: Real>(v: &[T]) -> Vec<T> {
    let mut out = v.to_vec();
    for x in out.iter_mut().skip(1) {
        *x = -*x;
    }
    out
}

struct Scaling<T> {
    blocks: Vec<BlockScale<T>>,
    lambda: RVec<T>,
}

/// Offsets of each block in the stacked cone vector: the nonneg part is block
/// 0 spanning rows 0..l, each SOC is its own block.
fn block_ranges(spec: &ConeSpec) -> Vec<(usize, usize)> {
    let mut ranges = Vec::with_capacity(1 + spec.soc.len());
    ranges.push((0, spec.nonneg));
    let mut off = spec.nonneg;
    for &q in &spec.soc {
        ranges.push((off, off + q));
        off += q;
    }
    ranges
}

fn compute_scaling<T: Real>(spec: &ConeSpec, s: &RVec<T>, z: &RVec<T>) -> Result<Scaling<T>> {
    let ranges = block_ranges(spec);
    let m = spec.total();
    let mut blocks = Vec::with_capacity(ranges.len());
    let mut lambda = RVec::zeros(m);
    // Nonnegative part.
    let (lo, hi) = ranges[0];
    let mut w = Vec::with_capacity(hi - lo);
    for i in lo..hi {
        if s[i] <= T::zero() || z[i] <= T::zero() {
            return Err(Error::Numerical("iterate left the cone interior".into()));
        }
        w.push((s[i] / z[i]).sqrt());
        lambda[i] = (s[i] * z[i]).sqrt();
    }
    blocks.push(BlockScale::Nonneg { w });
    // Second-order cones.
    for &(lo, hi) in ranges.iter().skip(1) {
        let q = hi - lo;
        let sv: Vec<T> = (lo..hi).map(|i| s[i]).collect();
        let zv: Vec<T> = (lo..hi).map(|i| z[i]).collect();
        let det = |v: &[T]| {
            let mut d = v[0] * v[0];
            for x in v.iter().skip(1) {
                d -= *x * *x;
            }
            d
        };
        let ds = det(&sv);
        let dz = det(&zv);
        if ds <= T::zero() || dz <= T::zero() || sv[0] <= T::zero() || zv[0] <= T::zero() {
            return Err(Error::Numerical("iterate left the cone interior".into()));
        }
        let sbar: Vec<T> = sv.iter().map(|&x| x / ds.sqrt()).collect();
        let zbar: Vec<T> = zv.iter().map(|&x| x / dz.sqrt()).collect();
        let mut dot = T::zero();
        for i in 0..q {
            dot += sbar[i] * zbar[i];
        }
        let gamma = ((T::one() + dot) / r::<T>(2.0)).sqrt();
        let jz = jmul(&zbar);
        let wbar: Vec<T> = (0..q)
            .map(|i| (sbar[i] + jz[i]) / (r::<T>(2.0) * gamma))
            .collect();
        let eta = (ds / dz).sqrt().sqrt();
        // lambda = W z = eta * H(wbar) z
        let mut lam = vec![T::zero(); q];
        hyper_apply(&wbar, &zv, &mut lam);
        for (i, l) in lam.iter().enumerate() {
            lambda[lo + i] = *l * eta;
        }
        blocks.push(BlockScale::Soc { eta, wbar });
    }
    Ok(Scaling { blocks, lambda })
}

impl<T: Real> Scaling<T> {
    /// W v
    fn apply_w(&self, spec: &ConeSpec, v: &RVec<T>) -> RVec<T> {
        let ranges = block_ranges(spec);
        let mut out = RVec::zeros(v.len());
        for (bi, &(lo, hi)) in ranges.iter().enumerate() {
            match &self.blocks[bi] {
                BlockScale::Nonneg { w } => {
                    for i in lo..hi {
                        out[i] = v[i] * w[i - lo];
                    }
                }
                BlockScale::Soc { eta, wbar } => {
                    let seg: Vec<T> = (lo..hi).map(|i| v[i]).collect();
                    let mut res = vec![T::zero(); hi - lo];
                    hyper_apply(wbar, &seg, &mut res);
                    for (i, x) in res.iter().enumerate() {
                        out[lo + i] = *x * *eta;
                    }
                }
            }
        }
        out
    }

    /// W^{-1} v (uses H(J wbar) = H(wbar)^{-1} on the hyperboloid).
    fn apply_winv(&self, spec: &ConeSpec, v: &RVec<T>) -> RVec<T> {
        let ranges = block_ranges(spec);
        let mut out = RVec::zeros(v.len());
        for (bi, &(lo, hi)) in ranges.iter().enumerate() {
            match &self.blocks[bi] {
                BlockScale::Nonneg { w } => {
                    for i in lo..hi {
                        out[i] = v[i] / w[i - lo];
                    }
                }
                BlockScale::Soc { eta, wbar } => {
                    let ju = jmul(wbar);
                    let seg: Vec<T> = (lo..hi).map(|i| v[i]).collect();
                    let mut res = vec![T::zero(); hi - lo];
                    hyper_apply(&ju, &seg, &mut res);
                    for (i, x) in res.iter().enumerate() {
                        out[lo + i] = *x / *eta;
                    }
                }
            }
        }
        out
    }

    /// W^{-2} v
    fn apply_winv2(&self, spec: &ConeSpec, v: &RVec<T>) -> RVec<T> {
        let w1 = self.apply_winv(spec, v);
        self.apply_winv(spec, &w1)
    }
}

// ---------------------------------------------------------------------------
// Jordan-algebra operations on the stacked cone vector.
// ---------------------------------------------------------------------------

/// u o v per block.
fn jordan_mul<T: Real>(spec: &ConeSpec, u: &RVec<T>, v: &RVec<T>) -> RVec<T> {
    let ranges = block_ranges(spec);
    let mut out = RVec::zeros(u.len());
    let (lo, hi) = ranges[0];
    for i in lo..hi {
        out[i] = u[i] * v[i];
    }
    for &(lo, hi) in ranges.iter().skip(1) {
        let mut dot = T::zero();
        for i in lo..hi {
            dot += u[i] * v[i];
        }
        out[lo] = dot;
        for i in lo + 1..hi {
            out[i] = u[lo] * v[i] + v[lo] * u[i];
        }
    }
    out
}

/// L(lambda)^{-1} d per block.
fn jordan_div<T: Real>(spec: &ConeSpec, lambda: &RVec<T>, d: &RVec<T>) -> Result<RVec<T>> {
    let ranges = block_ranges(spec);
    let mut out = RVec::zeros(d.len());
    let (lo, hi) = ranges[0];
    for i in lo..hi {
        if lambda[i] == T::zero() {
            return Err(Error::Numerical("zero scaling point".into()));
        }
        out[i] = d[i] / lambda[i];
    }
    for &(lo, hi) in ranges.iter().skip(1) {
        let l0 = lambda[lo];
        let mut l1d1 = T::zero();
        let mut det = l0 * l0;
        for i in lo + 1..hi {
            l1d1 += lambda[i] * d[i];
            det -= lambda[i] * lambda[i];
        }
        if det == T::zero() || l0 == T::zero() {
            return Err(Error::Numerical("degenerate scaling point".into()));
        }
        let x0 = (l0 * d[lo] - l1d1) / det;
        out[lo] = x0;
        for i in lo + 1..hi {
            out[i] = (d[i] - x0 * lambda[i]) / l0;
        }
    }
    Ok(out)
}

/// Identity element of the cone algebra.
fn cone_identity<T: Real>(spec: &ConeSpec) -> RVec<T> {
    let mut e = RVec::zeros(spec.total());
    for i in 0..spec.nonneg {
        e[i] = T::one();
    }
    let mut off = spec.nonneg;
    for &q in &spec.soc {
        e[off] = T::one();
        off += q;
    }
    e
}

/// Largest step alpha with v + alpha * dv staying in the cone (up to `cap`).
fn max_step<T: Real>(spec: &ConeSpec, v: &RVec<T>, dv: &RVec<T>, cap: T) -> T {
    let ranges = block_ranges(spec);
    let mut alpha = cap;
    let (lo, hi) = ranges[0];
    for i in lo..hi {
        if dv[i] < T::zero() {
            let a = -v[i] / dv[i];
            if a < alpha {
                alpha = a;
            }
        }
    }
    for &(lo, hi) in ranges.iter().skip(1) {
        // f(a) = (v0 + a d0)^2 - |v1 + a d1|^2 must stay positive along with
        // the leading coordinate.
        let v0 = v[lo];
        let d0 = dv[lo];
        let mut v1v1 = T::zero();
        let mut v1d1 = T::zero();
        let mut d1d1 = T::zero();
        for i in lo + 1..hi {
            v1v1 += v[i] * v[i];
            v1d1 += v[i] * dv[i];
            d1d1 += dv[i] * dv[i];
        }
        let aq = d0 * d0 - d1d1;
        let bq = r::<T>(2.0) * (v0 * d0 - v1d1);
        let cq = v0 * v0 - v1v1;
        // Smallest positive root of aq t^2 + bq t + cq = 0, with cq > 0.
        let mut root = cap;
        let disc = bq * bq - r::<T>(4.0) * aq * cq;
        if aq.abs() < T::epsilon() * (d1d1 + d0 * d0 + T::one()) {
            if bq < T::zero() {
                root = -cq / bq;
            }
        } else if disc >= T::zero() {
            let sq = disc.sqrt();
            // Numerically stable pair of roots.
            let qn = -(bq + if bq >= T::zero() { sq } else { -sq }) / r::<T>(2.0);
            let mut cands = Vec::with_capacity(2);
            if aq != T::zero() {
                cands.push(qn / aq);
            }
            if qn != T::zero() {
                cands.push(cq / qn);
            }
            let mut best = cap;
            for t in cands {
                if t > T::zero() && t < best {
                    best = t;
                }
            }
            root = best;
        }
        if root < alpha {
            alpha = root;
        }
        // Leading coordinate must also stay positive.
        if d0 < T::zero() {
            let a = -v0 / d0;
            if a < alpha {
                alpha = a;
            }
        }
    }
    alpha
}

// ---------------------------------------------------------------------------
// Equilibration.
// ---------------------------------------------------------------------------

struct Equilibration<T> {
    dcol: RVec<T>,
    arow: RVec<T>,
    grow: RVec<T>,
}

/// Two rounds of Ruiz-style scaling. Rows of G are scaled with one factor per
/// cone block so cone geometry is preserved.
fn equilibrate<T: Real>(
    a: &mut RMat<T>,
    g: &mut RMat<T>,
    spec: &ConeSpec,
) -> Equilibration<T> {
    let n = if a.ncols() > 0 { a.ncols() } else { g.ncols() };
    let p = a.nrows();
    let m = g.nrows();
    let mut dcol = RVec::from_elem(n, T::one());
    let mut arow = RVec::from_elem(p, T::one());
    let mut grow = RVec::from_elem(m, T::one());
    let ranges = block_ranges(spec);
    for _round in 0..2 {
        // Column pass over the stacked matrix.
        for j in 0..n {
            let mut mx = T::zero();
            for i in 0..p {
                let v = a[(i, j)].abs();
                if v > mx {
                    mx = v;
                }
            }
            for i in 0..m {
                let v = g[(i, j)].abs();
                if v > mx {
                    mx = v;
                }
            }
            if mx > T::zero() {
                let f = T::one() / mx.sqrt();
                for i in 0..p {
                    a[(i, j)] *= f;
                }
                for i in 0..m {
                    g[(i, j)] *= f;
                }
                dcol[j] *= f;
            }
        }
        // Row pass on equalities.
        for i in 0..p {
            let mut mx = T::zero();
            for j in 0..n {
                let v = a[(i, j)].abs();
                if v > mx {
                    mx = v;
                }
            }
            if mx > T::zero() {
                let f = T::one() / mx.sqrt();
                for j in 0..n {
                    a[(i, j)] *= f;
                }
                arow[i] *= f;
            }
        }
        // Block pass on cone rows: the nonneg rows scale individually, each
        // second-order block by a common factor.
        let (lo, hi) = ranges[0];
        for i in lo..hi {
            let mut mx = T::zero();
            for j in 0..n {
                let v = g[(i, j)].abs();
                if v > mx {
                    mx = v;
                }
            }
            if mx > T::zero() {
                let f = T::one() / mx.sqrt();
                for j in 0..n {
                    g[(i, j)] *= f;
                }
                grow[i] *= f;
            }
        }
        for &(lo, hi) in ranges.iter().skip(1) {
            let mut mx = T::zero();
            for i in lo..hi {
                for j in 0..n {
                    let v = g[(i, j)].abs();
                    if v > mx {
                        mx = v;
                    }
                }
            }
            if mx > T::zero() {
                let f = T::one() / mx.sqrt();
                for i in lo..hi {
                    for j in 0..n {
                        g[(i, j)] *= f;
                    }
                    grow[i] *= f;
                }
            }
        }
    }
    Equilibration { dcol, arow, grow }
}

// ---------------------------------------------------------------------------
// Main solver.
// ---------------------------------------------------------------------------

fn dot<T: Real>(a: &RVec<T>, b: &RVec<T>) -> T {
    a.iter().zip(b.iter()).map(|(x, y)| *x * *y).sum()
}

fn norm2<T: Real>(a: &RVec<T>) -> T {
    dot(a, a).sqrt()
}

fn validate<T: Real>(p: &ConicProblem<T>) -> Result<(usize, usize, usize)> {
    let n = p.c.len();
    let pe = p.a.nrows();
    let m = p.g.nrows();
    if p.a.ncols() != n && pe > 0 {
        return Err(Error::Dimension(format!(
            "equality matrix has {} columns for {n} variables",
            p.a.ncols()
        )));
    }
    if p.g.ncols() != n {
        return Err(Error::Dimension(format!(
            "cone matrix has {} columns for {n} variables",
            p.g.ncols()
        )));
    }
    if p.b.len() != pe || p.h.len() != m {
        return Err(Error::Dimension("right-hand side sizes do not match".into()));
    }
    if p.cones.total() != m {
        return Err(Error::Dimension(format!(
            "cone spec covers {} rows, matrix has {m}",
            p.cones.total()
        )));
    }
    if p.cones.soc.iter().any(|&q| q == 0) {
        return Err(Error::Config("zero-dimensional cone block".into()));
    }
    if p.cones.degree() == 0 {
        return Err(Error::Config(
            "problem has no cone rows; nothing to optimize over".into(),
        ));
    }
    Ok((n, pe, m))
}

/// Solves a conic program. See the module docs for the standard form.
pub fn solve_conic<T: Real>(
    problem: &ConicProblem<T>,
    opts: &SolverOptions<T>,
) -> Result<ConicSolution<T>> {
    let (n, p, m) = validate(problem)?;
    let spec = problem.cones.clone();
    let nu = r::<T>(spec.degree() as f64);

    // Scaled working copies.
    let mut a = problem.a.clone();
    let mut g = problem.g.clone();
    let eq = equilibrate(&mut a, &mut g, &spec);
    let b = RVec::from_shape_fn(p, |i| problem.b[i] * eq.arow[i]);
    let h = RVec::from_shape_fn(m, |i| problem.h[i] * eq.grow[i]);
    let mut c = RVec::from_shape_fn(n, |i| problem.c[i] * eq.dcol[i]);
    // Normalize the objective so the gap tolerance is relative to the true
    // cost scale even when coefficients are tiny.
    let cost_scale = {
        let mut mx = T::zero();
        for v in c.iter() {
            let av = v.abs();
            if av > mx {
                mx = av;
            }
        }
        if mx > T::zero() {
            mx
        } else {
            T::one()
        }
    };
    c.mapv_inplace(|v| v / cost_scale);

    let at = a.t().to_owned();
    let gt = g.t().to_owned();

    // Consistency pre-check on the equalities.
    if p > 0 {
        let mut aat = a.dot(&at);
        let mut diag_max = T::zero();
        for i in 0..p {
            if aat[(i, i)] > diag_max {
                diag_max = aat[(i, i)];
            }
        }
        let ridge = r::<T>(1e-12) * (T::one() + diag_max);
        for i in 0..p {
            aat[(i, i)] += ridge;
        }
        let lam = RealLu::new(aat)?.solve(&b);
        let x_try = at.dot(&lam);
        let resid = &a.dot(&x_try) - &b;
        if norm2(&resid) > r::<T>(1e-8) * (T::one() + norm2(&b)) {
            return Ok(ConicSolution {
                x: RVec::zeros(n),
                y: RVec::zeros(p),
                z: RVec::zeros(m),
                s: RVec::zeros(m),
                status: ConicStatus::Infeasible,
                iterations: 0,
                gap: T::infinity(),
                primal_residual: norm2(&resid),
                dual_residual: T::infinity(),
                objective: T::nan(),
            });
        }
    }

    let ranges = block_ranges(&spec);

    // Least-squares start: the primal minimizes |h - Gx| over Ax = b, the
    // dual takes the least-norm multipliers, and both are shifted just far
    // enough inside the cone. This keeps wildly different row scales (a loose
    // cap next to tight physical rows) from starting the iteration with a
    // huge imbalanced gap.
    let init_reg = r::<T>(1e-9);
    let (x0, s_raw, y0, z_raw) = {
        let dim = n + p;
        let mut kkt0 = RMat::<T>::zeros((dim, dim));
        let gtg = gt.dot(&g);
        for i in 0..n {
            for j in 0..n {
                kkt0[(i, j)] = gtg[(i, j)];
            }
            kkt0[(i, i)] += init_reg;
        }
        for i in 0..p {
            for j in 0..n {
                kkt0[(n + i, j)] = a[(i, j)];
                kkt0[(j, n + i)] = a[(i, j)];
            }
            kkt0[(n + i, n + i)] = -init_reg;
        }
        let lu0 = RealLu::new(kkt0)?;
        // Primal.
        let gth = gt.dot(&h);
        let mut rhs = RVec::<T>::zeros(dim);
        for j in 0..n {
            rhs[j] = gth[j];
        }
        for i in 0..p {
            rhs[n + i] = b[i];
        }
        let sol_p = lu0.solve(&rhs);
        let x0 = RVec::from_shape_fn(n, |j| sol_p[j]);
        let s_raw = &h - &g.dot(&x0);
        // Dual: solve for the least-norm z with G^T z + A^T y = -c.
        let mut rhs_d = RVec::<T>::zeros(dim);
        for j in 0..n {
            rhs_d[j] = c[j];
        }
        let sol_d = lu0.solve(&rhs_d);
        let nu_vec = RVec::from_shape_fn(n, |j| sol_d[j]);
        let y0 = RVec::from_shape_fn(p, |i| -sol_d[n + i]);
        let z_raw = g.dot(&nu_vec).mapv(|v| -v);
        (x0, s_raw, y0, z_raw)
    };
    let cone_margin = |v: &RVec<T>| -> T {
        let mut mn = T::infinity();
        let (lo, hi) = ranges[0];
        for i in lo..hi {
            if v[i] < mn {
                mn = v[i];
            }
        }
        for &(lo, hi) in ranges.iter().skip(1) {
            let mut tail = T::zero();
            for i in lo + 1..hi {
                tail += v[i] * v[i];
            }
            let margin = v[lo] - tail.sqrt();
            if margin < mn {
                mn = margin;
            }
        }
        mn
    };
    let shift_inside = |v: &RVec<T>| -> RVec<T> {
        let margin = cone_margin(v);
        let floor = r::<T>(1e-2);
        if margin > floor {
            return v.clone();
        }
        let e = cone_identity::<T>(&spec);
        let shift = floor + if margin < T::zero() { -margin } else { T::zero() };
        RVec::from_shape_fn(v.len(), |i| v[i] + shift * e[i])
    };
    let mut x = x0;
    let mut s = shift_inside(&s_raw);
    let mut z = shift_inside(&z_raw);
    let mut y = y0;

    let mut status = ConicStatus::Stalled;
    let mut iterations = 0usize;
    let mut gap = T::infinity();
    let mut pres = T::infinity();
    let mut dres = T::infinity();

    // Regularization is tied to the (equilibrated) problem scale, not to the
    // iteration-dependent KKT diagonal: the latter grows without bound as the
    // gap closes and would wreck the dual equations.
    let reg = {
        let mut mx = T::one();
        for v in a.iter().chain(g.iter()) {
            let av = v.abs();
            if av > mx {
                mx = av;
            }
        }
        r::<T>(1e-10) * mx
    };

    // Best iterate seen so far, by worst residual. The endgame of an interior
    // point method can lose accuracy once the scaling matrices degenerate, so
    // the returned point is the best one visited, not the last.
    let mut best_metric = T::infinity();
    let mut best: Option<(RVec<T>, RVec<T>, RVec<T>, RVec<T>, T, T, T)> = None;

    for iter in 0..opts.max_iter {
        iterations = iter;
        let r_x = &c + &at.dot(&y) + &gt.dot(&z);
        let r_y = &a.dot(&x) - &b;
        let r_z = &g.dot(&x) + &s - &h;
        gap = dot(&s, &z);
        let obj = dot(&c, &x);
        pres = {
            let e1 = norm2(&r_y) / (T::one() + norm2(&b));
            let e2 = norm2(&r_z) / (T::one() + norm2(&h));
            if e1 > e2 {
                e1
            } else {
                e2
            }
        };
        dres = norm2(&r_x) / (T::one() + norm2(&c));
        let relgap = gap / {
            let d = obj.abs();
            if d > T::one() {
                d
            } else {
                T::one()
            }
        };
        if std::env::var_os("CONIC_TRACE").is_some() {
            eprintln!(
                "iter {iter}: pres {:.3e} dres {:.3e} relgap {:.3e} gap {:.3e}",
                pres.to64(),
                dres.to64(),
                relgap.to64(),
                gap.to64()
            );
        }
        let metric = {
            let mut v = pres;
            if dres > v {
                v = dres;
            }
            if relgap > v {
                v = relgap;
            }
            v
        };
        if metric.is_finite() && metric < best_metric {
            best_metric = metric;
            best = Some((x.clone(), y.clone(), z.clone(), s.clone(), gap, pres, dres));
        }
        if pres <= opts.tol && dres <= opts.tol && relgap <= opts.tol {
            status = ConicStatus::Optimal;
            break;
        }
        if !gap.is_finite() || !pres.is_finite() || !dres.is_finite() {
            break;
        }
        // Numerical breakdown: residuals sharply worse than the best visited
        // point. Stop and return that point.
        if metric > r::<T>(1e3) * best_metric && best_metric < r::<T>(1e-4) {
            break;
        }

        let mu = gap / nu;
        let scal = match compute_scaling(&spec, &s, &z) {
            Ok(sc) => sc,
            Err(_) => break,
        };

        // K = G^T W^{-2} G in Gram form: K = N^T N with N = W^{-1} G. The
        // product of a matrix with its own transpose stays positive
        // semidefinite no matter how degenerate the scaling gets, which the
        // algebraically equivalent rank-one expansion does not.
        let nmat = {
            let mut nm = RMat::<T>::zeros((m, n));
            for (bi, &(lo, hi)) in ranges.iter().enumerate() {
                match &scal.blocks[bi] {
                    BlockScale::Nonneg { w } => {
                        for i in lo..hi {
                            let coef = T::one() / w[i - lo];
                            for j in 0..n {
                                nm[(i, j)] = coef * g[(i, j)];
                            }
                        }
                    }
                    BlockScale::Soc { eta, wbar } => {
                        let q = hi - lo;
                        let ju = jmul(wbar);
                        let mut col = vec![T::zero(); q];
                        let mut out = vec![T::zero(); q];
                        for j in 0..n {
                            for i in 0..q {
                                col[i] = g[(lo + i, j)];
                            }
                            hyper_apply(&ju, &col, &mut out);
                            for i in 0..q {
                                nm[(lo + i, j)] = out[i] / *eta;
                            }
                        }
                    }
                }
            }
            nm
        };
        let kmat = nmat.t().dot(&nmat);

        let dim = n + p;
        // The factored matrix carries static regularization; refinement runs
        // against the exact matrix so the perturbation is iterated away.
        let mut kkt = RMat::<T>::zeros((dim, dim));
        for j1 in 0..n {
            for j2 in 0..n {
                kkt[(j1, j2)] = kmat[(j1, j2)];
            }
        }
        for i in 0..p {
            for j in 0..n {
                kkt[(n + i, j)] = a[(i, j)];
                kkt[(j, n + i)] = a[(i, j)];
            }
        }
        let mut kkt_reg = kkt.clone();
        for j in 0..n {
            kkt_reg[(j, j)] += reg;
        }
        for i in 0..p {
            kkt_reg[(n + i, n + i)] = -reg;
        }
        let lu = match RealLu::new(kkt_reg) {
            Ok(f) => f,
            Err(_) => break,
        };
        let solve_kkt = |rhs_x: &RVec<T>, rhs_y: &RVec<T>| -> (RVec<T>, RVec<T>) {
            let mut rhs = RVec::<T>::zeros(dim);
            for j in 0..n {
                rhs[j] = rhs_x[j];
            }
            for i in 0..p {
                rhs[n + i] = rhs_y[i];
            }
            let mut sol = lu.solve(&rhs);
            for _ in 0..2 {
                let resid = &rhs - &kkt.dot(&sol);
                let corr = lu.solve(&resid);
                sol = &sol + &corr;
            }
            let dx = RVec::from_shape_fn(n, |j| sol[j]);
            let dy = RVec::from_shape_fn(p, |i| sol[n + i]);
            (dx, dy)
        };
        // Solve the three-row Newton system for one direction. `tmp` is the
        // right side of the scaled z-row, W^2 dz - G dx = tmp. Eliminating dz
        // through W^{-2} loses accuracy as the scaling degenerates, so after
        // the reduced solve the full system's residuals are measured and the
        // correction is solved through the same elimination. Without this the
        // dual residual floors near machine epsilon over mu.
        let solve_full = |tmp: &RVec<T>| -> (RVec<T>, RVec<T>, RVec<T>) {
            let w2t = scal.apply_winv2(&spec, tmp);
            let gtw = gt.dot(&w2t);
            let rhs_x = RVec::from_shape_fn(n, |j| -r_x[j] - gtw[j]);
            let rhs_y = r_y.mapv(|v| -v);
            let (mut dx, mut dy) = solve_kkt(&rhs_x, &rhs_y);
            let mut dz = {
                let t2 = &g.dot(&dx) + tmp;
                scal.apply_winv2(&spec, &t2)
            };
            for _ in 0..2 {
                let atdy = a.t().dot(&dy);
                let gtdz = gt.dot(&dz);
                let e1 = RVec::from_shape_fn(n, |j| -r_x[j] - atdy[j] - gtdz[j]);
                let adx = a.dot(&dx);
                let e2 = RVec::from_shape_fn(p, |i| -r_y[i] - adx[i]);
                let gdx = g.dot(&dx);
                let wdz = scal.apply_w(&spec, &dz);
                let w2dz = scal.apply_w(&spec, &wdz);
                let e3 = RVec::from_shape_fn(m, |i| tmp[i] - w2dz[i] + gdx[i]);
                let w2e = scal.apply_winv2(&spec, &e3);
                let gte = gt.dot(&w2e);
                let cx = RVec::from_shape_fn(n, |j| e1[j] - gte[j]);
                let (px, py) = solve_kkt(&cx, &e2);
                let pz = {
                    let t2 = &g.dot(&px) + &e3;
                    scal.apply_winv2(&spec, &t2)
                };
                dx = &dx + &px;
                dy = &dy + &py;
                dz = &dz + &pz;
            }
            (dx, dy, dz)
        };

        // Affine (predictor) direction: d_s = -lambda o lambda, g = -lambda.
        let gvec_aff = scal.lambda.mapv(|v| -v);
        let wg_aff = scal.apply_w(&spec, &gvec_aff);
        let tmp = &r_z + &wg_aff;
        let (dx_a, _dy_a, dz_a) = solve_full(&tmp);
        let gdx = g.dot(&dx_a);
        let ds_a = RVec::from_shape_fn(m, |i| -r_z[i] - gdx[i]);
        let cap = r::<T>(10.0);
        let alpha_aff = {
            let a1 = max_step(&spec, &s, &ds_a, cap);
            let a2 = max_step(&spec, &z, &dz_a, cap);
            let a = if a1 < a2 { a1 } else { a2 };
            if a > T::one() {
                T::one()
            } else {
                a
            }
        };
        let mu_aff = {
            let sa = &s + &ds_a.mapv(|v| v * alpha_aff);
            let za = &z + &dz_a.mapv(|v| v * alpha_aff);
            dot(&sa, &za) / nu
        };
        let mut sigma = (mu_aff / mu).powi(3);
        if sigma > T::one() {
            sigma = T::one();
        }
        if sigma < T::zero() {
            sigma = T::zero();
        }

        // Combined (corrector) direction.
        let winv_ds = scal.apply_winv(&spec, &ds_a);
        let w_dz = scal.apply_w(&spec, &dz_a);
        let cross = jordan_mul(&spec, &winv_ds, &w_dz);
        let lam_lam = jordan_mul(&spec, &scal.lambda, &scal.lambda);
        let e = cone_identity::<T>(&spec);
        let d_s = RVec::from_shape_fn(m, |i| -lam_lam[i] - cross[i] + sigma * mu * e[i]);
        let gvec = match jordan_div(&spec, &scal.lambda, &d_s) {
            Ok(v) => v,
            Err(_) => break,
        };
        let wg = scal.apply_w(&spec, &gvec);
        let tmp = &r_z + &wg;
        let (dx, dy, dz) = solve_full(&tmp);
        let gdx = g.dot(&dx);
        let ds = RVec::from_shape_fn(m, |i| -r_z[i] - gdx[i]);
        let alpha = {
            let a1 = max_step(&spec, &s, &ds, cap);
            let a2 = max_step(&spec, &z, &dz, cap);
            let a = if a1 < a2 { a1 } else { a2 };
            let a = a * r::<T>(0.99);
            if a > T::one() {
                T::one()
            } else {
                a
            }
        };
        if alpha < r::<T>(1e-10) {
            break;
        }
        x = &x + &dx.mapv(|v| v * alpha);
        y = &y + &dy.mapv(|v| v * alpha);
        s = &s + &ds.mapv(|v| v * alpha);
        z = &z + &dz.mapv(|v| v * alpha);
    }

    // Fall back to the best visited point if the final iterate is worse, and
    // grant optimality if that point meets the tolerance.
    if let Some((bx, by, bz, bs, bgap, bpres, bdres)) = best {
        let final_metric = {
            let mut v = pres;
            if dres > v {
                v = dres;
            }
            v
        };
        if !final_metric.is_finite() || best_metric < final_metric {
            x = bx;
            y = by;
            z = bz;
            s = bs;
            gap = bgap;
            pres = bpres;
            dres = bdres;
        }
        if status != ConicStatus::Optimal && best_metric <= opts.tol {
            status = ConicStatus::Optimal;
        }
    }

    // Undo the equilibration; duals pick up the cost normalization.
    let x_out = RVec::from_shape_fn(n, |j| x[j] * eq.dcol[j]);
    let y_out = RVec::from_shape_fn(p, |i| y[i] * eq.arow[i] * cost_scale);
    let z_out = RVec::from_shape_fn(m, |i| z[i] * eq.grow[i] * cost_scale);
    let s_out = RVec::from_shape_fn(m, |i| s[i] / eq.grow[i]);
    let objective = dot(&problem.c, &x_out);
    Ok(ConicSolution {
        x: x_out,
        y: y_out,
        z: z_out,
        s: s_out,
        status,
        iterations,
        gap,
        primal_residual: pres,
        dual_residual: dres,
        objective,
    })
}

// ---------------------------------------------------------------------------
// Minimum-l1 equality solver built on the cone machinery.
// ---------------------------------------------------------------------------

/// Minimizes the l1 norm of `x` subject to `A x = b`.
///
/// With `nonneg` set, solves the linear-program variant with `x >= 0` and a
/// plain sum objective; otherwise each coordinate gets a two-dimensional cone
/// `|x_i| <= t_i`.
pub fn solve_l1_equality<T: Real>(
    a: &RMat<T>,
    b: &RVec<T>,
    nonneg: bool,
    opts: &SolverOptions<T>,
) -> Result<ConicSolution<T>> {
    let p = a.nrows();
    let n = a.ncols();
    if b.len() != p {
        return Err(Error::Dimension("rhs does not match equality rows".into()));
    }
    if nonneg {
        let problem = ConicProblem {
            c: RVec::from_elem(n, T::one()),
            a: a.clone(),
            b: b.clone(),
            g: RMat::from_shape_fn((n, n), |(i, j)| {
                if i == j {
                    -T::one()
                } else {
                    T::zero()
                }
            }),
            h: RVec::zeros(n),
            cones: ConeSpec {
                nonneg: n,
                soc: vec![],
            },
        };
        return solve_conic(&problem, opts);
    }
    // Variables [x; t], objective sum(t), cones (t_i, x_i) in SOC2.
    let nv = 2 * n;
    let mut c = RVec::zeros(nv);
    for i in 0..n {
        c[n + i] = T::one();
    }
    let mut aeq = RMat::zeros((p, nv));
    for i in 0..p {
        for j in 0..n {
            aeq[(i, j)] = a[(i, j)];
        }
    }
    let mut gmat = RMat::zeros((2 * n, nv));
    for i in 0..n {
        gmat[(2 * i, n + i)] = -T::one();
        gmat[(2 * i + 1, i)] = -T::one();
    }
    let problem = ConicProblem {
        c,
        a: aeq,
        b: b.clone(),
        g: gmat,
        h: RVec::zeros(2 * n),
        cones: ConeSpec {
            nonneg: 0,
            soc: vec![2; n],
        },
    };
    let mut sol = solve_conic(&problem, opts)?;
    sol.x = RVec::from_shape_fn(n, |i| sol.x[i]);
    Ok(sol)
}

// ---------------------------------------------------------------------------
// Problem dump format for reproducing solver behavior offline.
// ---------------------------------------------------------------------------

/// Serializes a problem in the `socp-dump v1` text format.
pub fn dump_problem<T: Real>(p: &ConicProblem<T>) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let n = p.c.len();
    let pe = p.a.nrows();
    let m = p.g.nrows();
    writeln!(out, "socp-dump v1").unwrap();
    write!(out, "dims {n} {pe} {m} nonneg {}", p.cones.nonneg).unwrap();
    write!(out, " soc").unwrap();
    for q in &p.cones.soc {
        write!(out, " {q}").unwrap();
    }
    writeln!(out).unwrap();
    let vec_line = |out: &mut String, name: &str, v: &RVec<T>| {
        write!(out, "{name}").unwrap();
        for x in v.iter() {
            write!(out, " {:e}", x.to64()).unwrap();
        }
        writeln!(out).unwrap();
    };
    vec_line(&mut out, "c", &p.c);
    for i in 0..pe {
        let row = RVec::from_shape_fn(n, |j| p.a[(i, j)]);
        vec_line(&mut out, "A", &row);
    }
    vec_line(&mut out, "b", &p.b);
    for i in 0..m {
        let row = RVec::from_shape_fn(n, |j| p.g[(i, j)]);
        vec_line(&mut out, "G", &row);
    }
    vec_line(&mut out, "h", &p.h);
    out
}

/// Parses the `socp-dump v1` text format back into a problem.
pub fn parse_dump(text: &str) -> Result<ConicProblem<f64>> {
    let mut lines = text.lines();
    let head = lines.next().unwrap_or_default();
    if head.trim() != "socp-dump v1" {
        return Err(Error::Config(format!("unknown dump header: {head}")));
    }
    let dims = lines
        .next()
        .ok_or_else(|| Error::Config("missing dims line".into()))?;
    let toks: Vec<&str> = dims.split_whitespace().collect();
    if toks.len() < 6 || toks[0] != "dims" || toks[4] != "nonneg" {
        return Err(Error::Config("malformed dims line".into()));
    }
    let parse_usize = |s: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::Config(format!("bad integer {s}")))
    };
    let n = parse_usize(toks[1])?;
    let pe = parse_usize(toks[2])?;
    let m = parse_usize(toks[3])?;
    let nonneg = parse_usize(toks[5])?;
    let mut soc = Vec::new();
    let mut i = 6;
    if i < toks.len() && toks[i] == "soc" {
        i += 1;
        while i < toks.len() {
            soc.push(parse_usize(toks[i])?);
            i += 1;
        }
    }
    let mut parse_vec = |tag: &str, len: usize| -> Result<RVec<f64>> {
        let line = lines
            .next()
            .ok_or_else(|| Error::Config(format!("missing {tag} line")))?;
        let mut it = line.split_whitespace();
        let got = it.next().unwrap_or_default();
        if got != tag {
            return Err(Error::Config(format!("expected {tag} line, got {got}")));
        }
        let vals: Vec<f64> = it
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::Config(format!("bad float {s}")))
            })
            .collect::<Result<_>>()?;
        if vals.len() != len {
            return Err(Error::Config(format!(
                "{tag} line has {} values, expected {len}",
                vals.len()
            )));
        }
        Ok(RVec::from_vec(vals))
    };
    let c = parse_vec("c", n)?;
    let mut a = RMat::zeros((pe, n));
    for i in 0..pe {
        let row = parse_vec("A", n)?;
        for j in 0..n {
            a[(i, j)] = row[j];
        }
    }
    let b = parse_vec("b", pe)?;
    let mut g = RMat::zeros((m, n));
    for i in 0..m {
        let row = parse_vec("G", n)?;
        for j in 0..n {
            g[(i, j)] = row[j];
        }
    }
    let h = parse_vec("h", m)?;
    Ok(ConicProblem {
        c,
        a,
        b,
        g,
        h,
        cones: ConeSpec { nonneg, soc },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn opts() -> SolverOptions<f64> {
        SolverOptions::default()
    }

    #[test]
    fn lp_with_inequalities_only() {
        // min -x1 - 2 x2  s.t.  x1 + x2 <= 1, x >= 0  ->  x = (0, 1), obj -2.
        let problem = ConicProblem {
            c: array![-1.0, -2.0],
            a: RMat::zeros((0, 2)),
            b: RVec::zeros(0),
            g: array![[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]],
            h: array![1.0, 0.0, 0.0],
            cones: ConeSpec {
                nonneg: 3,
                soc: vec![],
            },
        };
        let sol = solve_conic(&problem, &opts()).unwrap();
        assert_eq!(sol.status, ConicStatus::Optimal);
        assert!((sol.objective + 2.0).abs() < 1e-7, "obj {}", sol.objective);
        assert!(sol.x[0].abs() < 1e-7);
        assert!((sol.x[1] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn lp_with_equalities() {
        // min x1 + x2  s.t.  x1 - x2 = 1, x >= 0  ->  x = (1, 0), obj 1.
        let problem = ConicProblem {
            c: array![1.0, 1.0],
            a: array![[1.0, -1.0]],
            b: array![1.0],
            g: array![[-1.0, 0.0], [0.0, -1.0]],
            h: array![0.0, 0.0],
            cones: ConeSpec {
                nonneg: 2,
                soc: vec![],
            },
        };
        let sol = solve_conic(&problem, &opts()).unwrap();
        assert_eq!(sol.status, ConicStatus::Optimal);
        assert!((sol.objective - 1.0).abs() < 1e-7);
        assert!((sol.x[0] - 1.0).abs() < 1e-7);
        assert!(sol.x[1].abs() < 1e-7);
    }

    #[test]
    fn nearest_point_in_a_plane() {
        // min t  s.t.  |(x1, x2) - (3, 4)| <= t,  x1 = 0.
        // Distance from (3,4) to the plane x1 = 0 is 3.
        let problem = ConicProblem {
            c: array![0.0, 0.0, 1.0],
            a: array![[1.0, 0.0, 0.0]],
            b: array![0.0],
            // s = (t, x1 - 3, x2 - 4) in SOC3
            g: array![
                [0.0, 0.0, -1.0],
                [-1.0, 0.0, 0.0],
                [0.0, -1.0, 0.0]
            ],
            h: array![0.0, -3.0, -4.0],
            cones: ConeSpec {
                nonneg: 0,
                soc: vec![3],
            },
        };
        let sol = solve_conic(&problem, &opts()).unwrap();
        assert_eq!(sol.status, ConicStatus::Optimal);
        assert!((sol.objective - 3.0).abs() < 1e-6, "obj {}", sol.objective);
        assert!(sol.x[0].abs() < 1e-6);
        assert!((sol.x[1] - 4.0).abs() < 1e-5, "x2 {}", sol.x[1]);
    }

    #[test]
    fn max_coordinate_on_a_disc() {
        // min -x1  s.t.  |(x1, x2)| <= 2  ->  x = (2, 0).
        let problem = ConicProblem {
            c: array![-1.0, 0.0],
            a: RMat::zeros((0, 2)),
            b: RVec::zeros(0),
            g: array![[0.0, 0.0], [-1.0, 0.0], [0.0, -1.0]],
            h: array![2.0, 0.0, 0.0],
            cones: ConeSpec {
                nonneg: 0,
                soc: vec![3],
            },
        };
        let sol = solve_conic(&problem, &opts()).unwrap();
        assert_eq!(sol.status, ConicStatus::Optimal);
        assert!((sol.x[0] - 2.0).abs() < 1e-6);
        assert!(sol.x[1].abs() < 1e-6);
    }

    #[test]
    fn least_squares_as_cone_program() {
        // min |A x - b| compared against the normal equations.
        let a = array![[1.0, 2.0], [0.0, 1.0], [1.0, -1.0], [2.0, 0.5]];
        let b = array![1.0, -0.5, 2.0, 0.3];
        // Normal equations oracle.
        let ata = array![
            [1.0 + 0.0 + 1.0 + 4.0, 2.0 + 0.0 - 1.0 + 1.0],
            [2.0 + 0.0 - 1.0 + 1.0, 4.0 + 1.0 + 1.0 + 0.25]
        ];
        let atb = array![
            1.0 * 1.0 + 0.0 * -0.5 + 1.0 * 2.0 + 2.0 * 0.3,
            2.0 * 1.0 + 1.0 * -0.5 + -1.0 * 2.0 + 0.5 * 0.3
        ];
        let det = ata[(0, 0)] * ata[(1, 1)] - ata[(0, 1)] * ata[(1, 0)];
        let x_ls = [
            (ata[(1, 1)] * atb[0] - ata[(0, 1)] * atb[1]) / det,
            (ata[(0, 0)] * atb[1] - ata[(1, 0)] * atb[0]) / det,
        ];
        // Cone program: vars (x1, x2, t), min t, s = (t, b - A x) in SOC5.
        let mut g = RMat::zeros((5, 3));
        g[(0, 2)] = -1.0;
        for i in 0..4 {
            for j in 0..2 {
                g[(i + 1, j)] = a[(i, j)];
            }
        }
        let mut h = RVec::zeros(5);
        for i in 0..4 {
            h[i + 1] = b[i];
        }
        let problem = ConicProblem {
            c: array![0.0, 0.0, 1.0],
            a: RMat::zeros((0, 3)),
            b: RVec::zeros(0),
            g,
            h,
            cones: ConeSpec {
                nonneg: 0,
                soc: vec![5],
            },
        };
        let sol = solve_conic(&problem, &opts()).unwrap();
        assert_eq!(sol.status, ConicStatus::Optimal);
        assert!((sol.x[0] - x_ls[0]).abs() < 1e-5, "{} vs {}", sol.x[0], x_ls[0]);
        assert!((sol.x[1] - x_ls[1]).abs() < 1e-5, "{} vs {}", sol.x[1], x_ls[1]);
    }

    #[test]
    fn mixed_cones_and_equalities() {
        // min -x3  s.t.  x1 = 0.6, |(x1,x2)| <= 1, x3 <= |stuff| pattern:
        // s = (1, x1, x2) in SOC3 and x3 <= x2 via nonneg row, maximize x3.
        // Optimal: x2 = sqrt(1 - 0.36) = 0.8, x3 = 0.8.
        let problem = ConicProblem {
            c: array![0.0, 0.0, -1.0],
            a: array![[1.0, 0.0, 0.0]],
            b: array![0.6],
            g: array![
                [0.0, -1.0, 1.0],
                [0.0, 0.0, 0.0],
                [-1.0, 0.0, 0.0],
                [0.0, -1.0, 0.0]
            ],
            h: array![0.0, 1.0, 0.0, 0.0],
            cones: ConeSpec {
                nonneg: 1,
                soc: vec![3],
            },
        };
        let sol = solve_conic(&problem, &opts()).unwrap();
        assert_eq!(sol.status, ConicStatus::Optimal);
        assert!((sol.x[2] - 0.8).abs() < 1e-6, "x3 {}", sol.x[2]);
    }

    #[test]
    fn inconsistent_equalities_are_flagged() {
        let problem = ConicProblem {
            c: array![1.0],
            a: array![[1.0], [1.0]],
            b: array![1.0, 2.0],
            g: array![[-1.0]],
            h: array![0.0],
            cones: ConeSpec {
                nonneg: 1,
                soc: vec![],
            },
        };
        let sol = solve_conic(&problem, &opts()).unwrap();
        assert_eq!(sol.status, ConicStatus::Infeasible);
    }

    #[test]
    fn conflicting_inequalities_stall_rather_than_lie() {
        // x <= -1 and x >= 1 cannot both hold.
        let problem = ConicProblem {
            c: array![1.0],
            a: RMat::zeros((0, 1)),
            b: RVec::zeros(0),
            g: array![[1.0], [-1.0]],
            h: array![-1.0, -1.0],
            cones: ConeSpec {
                nonneg: 2,
                soc: vec![],
            },
        };
        let sol = solve_conic(&problem, &opts()).unwrap();
        assert_ne!(sol.status, ConicStatus::Optimal);
    }

    #[test]
    fn nt_scaling_maps_both_points_to_lambda() {
        // W z = W^{-1} s is the defining property of the scaling point.
        let spec = ConeSpec {
            nonneg: 2,
            soc: vec![3, 4],
        };
        let s: RVec<f64> = array![0.5, 2.0, 3.0, 1.0, -0.5, 2.0, 0.3, -0.2, 1.1];
        let z: RVec<f64> = array![1.5, 0.7, 2.0, -0.8, 0.3, 1.5, -0.1, 0.4, 0.6];
        let scal = compute_scaling(&spec, &s, &z).unwrap();
        let wz = scal.apply_w(&spec, &z);
        let ws = scal.apply_winv(&spec, &s);
        for i in 0..spec.total() {
            assert!((wz[i] - ws[i]).abs() < 1e-12, "row {i}: {} vs {}", wz[i], ws[i]);
            assert!((wz[i] - scal.lambda[i]).abs() < 1e-12);
        }
        // W^{-1} undoes W.
        let back = scal.apply_winv(&spec, &wz);
        for i in 0..spec.total() {
            assert!((back[i] - z[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn jordan_division_inverts_multiplication() {
        let spec = ConeSpec {
            nonneg: 3,
            soc: vec![4],
        };
        let lam: RVec<f64> = array![1.0, 2.0, 0.5, 2.0, 0.3, -0.4, 0.1];
        let d: RVec<f64> = array![0.3, -1.0, 2.0, 0.7, -0.5, 0.2, 1.0];
        let x = jordan_div(&spec, &lam, &d).unwrap();
        let back = jordan_mul(&spec, &lam, &x);
        for i in 0..spec.total() {
            assert!((back[i] - d[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn max_step_respects_cone_boundaries() {
        let spec = ConeSpec {
            nonneg: 1,
            soc: vec![3],
        };
        // Nonneg coordinate 2 shrinking at rate 1 allows a step of 2.
        let v: RVec<f64> = array![2.0, 3.0, 0.0, 0.0];
        let dv: RVec<f64> = array![-1.0, 0.0, 1.0, 0.0];
        // SOC: (3, t, 0) stays valid until t = 3, step 3 at rate 1.
        let a = max_step(&spec, &v, &dv, 100.0);
        assert!((a - 2.0).abs() < 1e-12);
        let dv2: RVec<f64> = array![0.0, 0.0, 1.0, 0.0];
        let a2 = max_step(&spec, &v, &dv2, 100.0);
        assert!((a2 - 3.0).abs() < 1e-9, "step {a2}");
        // No constraint active: capped.
        let dv3: RVec<f64> = array![1.0, 1.0, 0.0, 0.0];
        let a3 = max_step(&spec, &v, &dv3, 7.0);
        assert!((a3 - 7.0).abs() < 1e-12);
    }

    #[test]
    fn l1_recovers_a_sparse_vector() {
        // 3 equations, 6 unknowns, 2-sparse target. Uniqueness of the
        // minimum-l1 point is certified below via the dual condition
        // (A_S^T y = sign on the support, |a_j^T y| < 1 elsewhere) before the
        // solver is asked to find it.
        let mut a = RMat::<f64>::zeros((3, 6));
        let cols: [[f64; 3]; 6] = [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.6, 0.3, 0.7416],
            [-0.2, 0.4, 0.8944],
            [0.5, 0.5, 0.7071],
            [0.3, -0.2, 0.9327],
        ];
        for (j, col) in cols.iter().enumerate() {
            for i in 0..3 {
                a[(i, j)] = col[i];
            }
        }
        // Support {0, 1}, signs (+, -): least-norm certificate y = (1, -1, 0).
        let y_cert = [1.0, -1.0, 0.0];
        for j in 2..6 {
            let margin: f64 = (0..3).map(|i| a[(i, j)] * y_cert[i]).sum();
            assert!(margin.abs() < 0.999, "column {j} breaks uniqueness");
        }
        let mut x_true = RVec::<f64>::zeros(6);
        x_true[0] = 2.0;
        x_true[1] = -1.0;
        let b = a.dot(&x_true);
        let sol = solve_l1_equality(&a, &b, false, &opts()).unwrap();
        assert_eq!(sol.status, ConicStatus::Optimal);
        for j in 0..6 {
            assert!(
                (sol.x[j] - x_true[j]).abs() < 1e-6,
                "coordinate {j}: {} vs {}",
                sol.x[j],
                x_true[j]
            );
        }
        // Nonnegative variant on support {1, 4}; the analogous certificate
        // needs A_S^T y = 1 on the support and a_j^T y < 1 off it.
        let y2 = [1.0 / 3.0, 1.0, 0.4714];
        for (j, col) in cols.iter().enumerate() {
            let val: f64 = (0..3).map(|i| col[i] * y2[i]).sum();
            if j == 1 || j == 4 {
                assert!((val - 1.0).abs() < 2e-4, "support column {j}: {val}");
            } else {
                assert!(val < 0.999, "column {j} breaks uniqueness: {val}");
            }
        }
        let mut x_pos = RVec::<f64>::zeros(6);
        x_pos[1] = 2.0;
        x_pos[4] = 0.5;
        let b2 = a.dot(&x_pos);
        let sol2 = solve_l1_equality(&a, &b2, true, &opts()).unwrap();
        assert_eq!(sol2.status, ConicStatus::Optimal);
        for j in 0..6 {
            assert!(
                (sol2.x[j] - x_pos[j]).abs() < 1e-5,
                "coordinate {j}: {} vs {}",
                sol2.x[j],
                x_pos[j]
            );
        }
    }

    #[test]
    fn dump_round_trips() {
        let problem = ConicProblem {
            c: array![0.0, 0.25, 1.0],
            a: array![[1.0, 0.0, -2.5]],
            b: array![0.125],
            g: array![
                [0.0, 0.0, -1.0],
                [-1.0, 1e-8, 0.0],
                [0.0, -1.0, 3.75e2]
            ],
            h: array![0.0, -3.0, 4.5],
            cones: ConeSpec {
                nonneg: 0,
                soc: vec![3],
            },
        };
        let text = dump_problem(&problem);
        assert!(text.starts_with("socp-dump v1"));
        let back = parse_dump(&text).unwrap();
        assert_eq!(back.cones, problem.cones);
        for j in 0..3 {
            assert_eq!(back.c[j], problem.c[j]);
            assert_eq!(back.a[(0, j)], problem.a[(0, j)]);
        }
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(back.g[(i, j)], problem.g[(i, j)]);
            }
            assert_eq!(back.h[i], problem.h[i]);
        }
        assert!(parse_dump("bogus").is_err());
    }

    #[test]
    fn badly_scaled_problems_still_solve() {
        // Same geometry as the disc test but with wildly different row and
        // column magnitudes; equilibration has to absorb them.
        let problem = ConicProblem {
            c: array![-1e-6, 0.0],
            a: RMat::zeros((0, 2)),
            b: RVec::zeros(0),
            g: array![[0.0, 0.0], [-1e4, 0.0], [0.0, -1e-3]],
            h: array![2e4, 0.0, 0.0],
            cones: ConeSpec {
                nonneg: 0,
                soc: vec![3],
            },
        };
        let sol = solve_conic(&problem, &opts()).unwrap();
        assert_eq!(sol.status, ConicStatus::Optimal);
        // |(1e4 x1, 1e-3 x2)| <= 2e4 -> x1 max at 2.
        assert!((sol.x[0] - 2.0).abs() < 1e-5, "x1 {}", sol.x[0]);
    }
}

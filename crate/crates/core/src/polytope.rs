//! The market maker's feasible set `S(q) = {r : q + r >= 0, |H r| <= f, 1'r = 0}`
//! and optimization over it.
//!
//! The set is stored as inequality rows `A r <= u` with the balance equality
//! `1'r = 0` kept implicit. It is always bounded: `r_k >= -q_k` together with
//! the balance equality gives `r_k <= sum_{j != k} q_j`.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::linalg::{binomial, dot, for_each_combination, max_abs, symmetric_eigen, ConstraintBasis, Lu};
use crate::model::NetworkModel;
use crate::{Error, Result};

/// Default vertex enumeration dimension limit.
pub const DEFAULT_MAX_DIM: usize = 8;
/// Default absolute tie tolerance on objective values.
pub const DEFAULT_TIE_TOL: f64 = 1e-8;

/// Where an inequality row comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ConstraintKind {
    /// `-r_k <= q_k`.
    Demand(usize),
    /// `H_l r <= f_l`.
    LineForward(usize),
    /// `-H_l r <= f_l`.
    LineBackward(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RebalancePolytope {
    dim: usize,
    normals: Vec<Vec<f64>>,
    bounds: Vec<f64>,
    kinds: Vec<ConstraintKind>,
}

/// Assembles `S(q)`. Lines with infinite capacity contribute no rows.
/// Emptiness is not checked.
pub fn build_polytope(net: &NetworkModel, q: &[f64]) -> Result<RebalancePolytope> {
    let n = net.nodes();
    if q.len() != n {
        return Err(Error::ShapeMismatch {
            what: "production",
            expected: n,
            found: q.len(),
        });
    }
    if q.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InfeasibleProfile("production must be finite and nonnegative"));
    }
    let mut normals = Vec::with_capacity(n + 2 * net.lines());
    let mut bounds = Vec::with_capacity(normals.capacity());
    let mut kinds = Vec::with_capacity(normals.capacity());
    for (k, &qk) in q.iter().enumerate() {
        let mut row = vec![0.0; n];
        row[k] = -1.0;
        normals.push(row);
        bounds.push(qk);
        kinds.push(ConstraintKind::Demand(k));
    }
    for (l, (row, &f)) in net.shift_factors().iter_rows().zip(net.capacities()).enumerate() {
        if f.is_infinite() {
            continue;
        }
        normals.push(row.to_vec());
        bounds.push(f);
        kinds.push(ConstraintKind::LineForward(l));
        normals.push(row.iter().map(|h| -h).collect());
        bounds.push(f);
        kinds.push(ConstraintKind::LineBackward(l));
    }
    Ok(RebalancePolytope {
        dim: n,
        normals,
        bounds,
        kinds,
    })
}

impl RebalancePolytope {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constraint_count(&self) -> usize {
        self.normals.len()
    }

    pub fn normal(&self, i: usize) -> &[f64] {
        &self.normals[i]
    }

    pub fn bound(&self, i: usize) -> f64 {
        self.bounds[i]
    }

    pub fn kind(&self, i: usize) -> ConstraintKind {
        self.kinds[i]
    }

    /// Largest violation of any row or of the balance equality.
    pub fn violation(&self, r: &[f64]) -> f64 {
        let rows = self
            .normals
            .iter()
            .zip(&self.bounds)
            .fold(0.0_f64, |m, (a, u)| m.max(dot(a, r) - u));
        rows.max(r.iter().sum::<f64>().abs())
    }

    pub fn contains(&self, r: &[f64], tol: f64) -> bool {
        r.len() == self.dim && self.violation(r) <= tol
    }

    /// Rows active at `r` within `tol`.
    pub fn active_rows(&self, r: &[f64], tol: f64) -> Vec<usize> {
        (0..self.normals.len())
            .filter(|&i| (self.bounds[i] - dot(&self.normals[i], r)).abs() <= tol)
            .collect()
    }

    /// Solves the square system formed by `rows` held at equality plus the
    /// balance equality. `None` if the system is singular.
    pub(crate) fn solve_basis(&self, rows: &[usize]) -> Option<Vec<f64>> {
        let n = self.dim;
        debug_assert_eq!(rows.len() + 1, n);
        let mut m = Vec::with_capacity(n * n);
        for &i in rows {
            m.extend_from_slice(&self.normals[i]);
        }
        m.extend(core::iter::repeat_n(1.0, n));
        let lu = Lu::new(&m, n, 1e-10)?;
        let mut rhs: Vec<f64> = rows.iter().map(|&i| self.bounds[i]).collect();
        rhs.push(0.0);
        Some(lu.solve(&rhs))
    }
}

/// Enumeration limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexLimits {
    pub max_dim: usize,
    /// Largest number of candidate active sets examined.
    pub max_active_sets: u128,
}

impl Default for VertexLimits {
    fn default() -> Self {
        VertexLimits {
            max_dim: DEFAULT_MAX_DIM,
            max_active_sets: 5_000_000,
        }
    }
}

/// All vertices of the polytope, sorted lexicographically and deduplicated
/// under max-norm distance `tol`. Empty iff the polytope is empty.
pub fn enumerate_vertices(poly: &RebalancePolytope, tol: f64) -> Result<Vec<Vec<f64>>> {
    enumerate_vertices_with(poly, tol, VertexLimits::default())
}

pub fn enumerate_vertices_with(poly: &RebalancePolytope, tol: f64, limits: VertexLimits) -> Result<Vec<Vec<f64>>> {
    let n = poly.dim;
    if n > limits.max_dim {
        return Err(Error::DimensionLimit {
            dim: n,
            limit: limits.max_dim,
        });
    }
    let m = poly.constraint_count();
    let count = binomial(m, n - 1);
    if count > limits.max_active_sets {
        return Err(Error::TooManyActiveSets {
            count,
            budget: limits.max_active_sets,
        });
    }
    let mut found: Vec<Vec<f64>> = Vec::new();
    for_each_combination(m, n - 1, |rows| {
        if let Some(mut v) = poly.solve_basis(rows) {
            if poly.contains(&v, tol) && !found.iter().any(|w| max_abs_diff(w, &v) <= tol) {
                // normalize -0.0 so the lexicographic order is stable
                v.iter_mut().for_each(|x| *x += 0.0);
                found.push(v);
            }
        }
        true
    });
    found.sort_by(|a, b| lex_cmp(a, b));
    Ok(found)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    crate::linalg::max_abs_diff(a, b)
}

/// Lexicographic total order on vectors.
pub fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

/// `phi(r) = sum_k linear_k r_k + curvature_k r_k^2 / 2`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeparableQuadratic {
    pub linear: Vec<f64>,
    pub curvature: Vec<f64>,
}

impl SeparableQuadratic {
    pub fn value(&self, r: &[f64]) -> f64 {
        r.iter()
            .zip(self.linear.iter().zip(&self.curvature))
            .map(|(x, (g, h))| g * x + 0.5 * h * x * x)
            .sum()
    }

    pub fn gradient(&self, r: &[f64]) -> Vec<f64> {
        r.iter()
            .zip(self.linear.iter().zip(&self.curvature))
            .map(|(x, (g, h))| g + h * x)
            .collect()
    }

    fn check(&self, dim: usize) -> Result<()> {
        if self.linear.len() != dim || self.curvature.len() != dim {
            return Err(Error::ShapeMismatch {
                what: "quadratic coefficients",
                expected: dim,
                found: self.linear.len().min(self.curvature.len()),
            });
        }
        Ok(())
    }
}

/// Maximizer of a concave quadratic with its KKT multipliers:
/// `grad phi(r) = sum_i multipliers_i a_i + balance_multiplier * 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcaveMaximum {
    pub point: Vec<f64>,
    pub value: f64,
    /// One entry per inequality row, zero for inactive rows.
    pub multipliers: Vec<f64>,
    pub balance_multiplier: f64,
    pub iterations: usize,
}

/// Primal active-set method for a concave separable quadratic.
///
/// Zero-curvature coordinates are allowed; along directions where the
/// reduced objective is linear the method steps to the next blocking row,
/// which always exists because the set is bounded. Deterministic.
pub fn maximize_concave_quadratic(
    poly: &RebalancePolytope,
    objective: &SeparableQuadratic,
    tol: f64,
) -> Result<ConcaveMaximum> {
    let n = poly.dim;
    objective.check(n)?;
    if let Some(k) = objective.curvature.iter().position(|h| *h > 0.0 || h.is_nan()) {
        return Err(Error::WrongCurvature(k));
    }
    // minimize F(r) = sum p_k r_k^2 / 2 - g_k r_k
    let p: Vec<f64> = objective.curvature.iter().map(|h| -h).collect();
    let g = &objective.linear;
    let ones = vec![1.0; n];
    let p_scale = max_abs(&p).max(1.0);

    let mut r = vec![0.0; n];
    if !poly.contains(&r, tol) {
        r = enumerate_vertices(poly, tol)?
            .into_iter()
            .next()
            .ok_or(Error::EmptyPolytope)?;
    }

    let independent = |working: &[usize], extra: usize| -> bool {
        let mut normals: Vec<&[f64]> = Vec::with_capacity(working.len() + 2);
        normals.push(&ones);
        normals.extend(working.iter().map(|&i| poly.normal(i)));
        normals.push(poly.normal(extra));
        ConstraintBasis::new(&normals, n, 1e-10).is_some()
    };

    let mut working: Vec<usize> = Vec::new();
    for i in poly.active_rows(&r, tol) {
        if working.len() + 1 < n && independent(&working, i) {
            working.push(i);
        }
    }

    let max_iter = 100 * (poly.constraint_count() + n) + 100;
    for iter in 0..max_iter {
        let mut normals: Vec<&[f64]> = Vec::with_capacity(working.len() + 1);
        normals.push(&ones);
        normals.extend(working.iter().map(|&i| poly.normal(i)));
        let basis = ConstraintBasis::new(&normals, n, 1e-12).ok_or(Error::SolverStalled(iter))?;
        let null = basis.null_space();
        let grad: Vec<f64> = (0..n).map(|k| p[k] * r[k] - g[k]).collect();
        let grad_scale = max_abs(&grad).max(1.0);

        let (step, unbounded) = reduced_step(&null, &p, &grad, p_scale, grad_scale);
        let step_size = max_abs(&step);

        if !unbounded && step_size <= 1e-13 * max_abs(&r).max(1.0) {
            // stationary on the working set: check multiplier signs
            let neg_grad: Vec<f64> = grad.iter().map(|v| -v).collect();
            let coef = basis.least_squares(&neg_grad);
            let drop = working
                .iter()
                .enumerate()
                .filter(|(j, _)| coef[j + 1] < -1e-12 * grad_scale)
                .min_by(|(ja, ia), (jb, ib)| coef[ja + 1].total_cmp(&coef[jb + 1]).then(ia.cmp(ib)))
                .map(|(j, _)| j);
            match drop {
                Some(j) => {
                    working.remove(j);
                }
                None => {
                    let mut multipliers = vec![0.0; poly.constraint_count()];
                    for (j, &i) in working.iter().enumerate() {
                        multipliers[i] = coef[j + 1];
                    }
                    let value = objective.value(&r);
                    return Ok(ConcaveMaximum {
                        point: r,
                        value,
                        multipliers,
                        balance_multiplier: coef[0],
                        iterations: iter,
                    });
                }
            }
            continue;
        }

        // ratio test
        let mut alpha = if unbounded { f64::INFINITY } else { 1.0 };
        let mut blocking = None;
        for i in 0..poly.constraint_count() {
            if working.contains(&i) {
                continue;
            }
            let a = poly.normal(i);
            let ad = dot(a, &step);
            if ad <= 1e-14 * max_abs(a) * step_size {
                continue;
            }
            let slack = (poly.bound(i) - dot(a, &r)).max(0.0);
            let ai = slack / ad;
            if ai < alpha {
                alpha = ai;
                blocking = Some(i);
            }
        }
        if alpha.is_infinite() {
            return Err(Error::Unsupported("objective is unbounded on the feasible set"));
        }
        for k in 0..n {
            r[k] += alpha * step[k];
        }
        if let Some(i) = blocking {
            working.push(i);
        }
    }
    Err(Error::SolverStalled(max_iter))
}

/// Newton step of `F` restricted to the null space spanned by `null`, or a
/// descent direction of zero curvature when the reduced problem is
/// unbounded below. Returns `(step, unbounded)`.
fn reduced_step(null: &[Vec<f64>], p: &[f64], grad: &[f64], p_scale: f64, grad_scale: f64) -> (Vec<f64>, bool) {
    let n = p.len();
    let nz = null.len();
    if nz == 0 {
        return (vec![0.0; n], false);
    }
    let mut hess = vec![0.0; nz * nz];
    for i in 0..nz {
        for j in i..nz {
            let v: f64 = (0..n).map(|k| null[i][k] * p[k] * null[j][k]).sum();
            hess[i * nz + j] = v;
            hess[j * nz + i] = v;
        }
    }
    let zg: Vec<f64> = null.iter().map(|z| dot(z, grad)).collect();
    let (values, vectors) = symmetric_eigen(&hess, nz);
    let flat = 1e-12 * p_scale;

    let combine = |coef: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (c, z) in coef.iter().zip(null) {
            for k in 0..n {
                out[k] += c * z[k];
            }
        }
        out
    };

    // zero-curvature direction with a nonzero slope: move along it
    let mut best: Option<(f64, usize)> = None;
    for (i, (val, vec)) in values.iter().zip(&vectors).enumerate() {
        if *val <= flat {
            let slope = dot(vec, &zg);
            if slope.abs() > 1e-12 * grad_scale && best.is_none_or(|(s, _)| slope.abs() > s) {
                best = Some((slope.abs(), i));
            }
        }
    }
    if let Some((_, i)) = best {
        let slope = dot(&vectors[i], &zg);
        let coef: Vec<f64> = vectors[i].iter().map(|v| -slope.signum() * v).collect();
        return (combine(&coef), true);
    }

    let mut y = vec![0.0; nz];
    for (val, vec) in values.iter().zip(&vectors) {
        if *val > flat {
            let w = -dot(vec, &zg) / val;
            for i in 0..nz {
                y[i] += w * vec[i];
            }
        }
    }
    (combine(&y), false)
}

/// Largest violation among the KKT conditions of a concave maximization:
/// stationarity, primal feasibility, multiplier signs and complementarity.
pub fn kkt_residual(poly: &RebalancePolytope, objective: &SeparableQuadratic, sol: &ConcaveMaximum) -> f64 {
    let r = &sol.point;
    let mut stationarity = objective.gradient(r);
    for (i, lam) in sol.multipliers.iter().enumerate() {
        for (s, a) in stationarity.iter_mut().zip(poly.normal(i)) {
            *s -= lam * a;
        }
    }
    stationarity.iter_mut().for_each(|s| *s -= sol.balance_multiplier);
    let mut worst = max_abs(&stationarity).max(poly.violation(r).max(0.0));
    for (i, lam) in sol.multipliers.iter().enumerate() {
        worst = worst.max(-lam);
        worst = worst.max((lam * (poly.bound(i) - dot(poly.normal(i), r))).abs());
    }
    worst
}

/// Result of maximizing a convex quadratic over the vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexMaximum {
    /// Lexicographically smallest vertex within the tie tolerance of the best.
    pub argmax: Vec<f64>,
    pub value: f64,
    /// Every vertex within the tie tolerance of the best, lexicographic order.
    pub near_optimal: Vec<Vec<f64>>,
    /// All vertices, lexicographic order, with their objective values.
    pub vertices: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

/// A convex function attains its maximum over a polytope at a vertex, so
/// scanning the vertices is exact.
pub fn maximize_convex_quadratic_on_vertices(
    poly: &RebalancePolytope,
    objective: &SeparableQuadratic,
    tie_tol: f64,
) -> Result<VertexMaximum> {
    maximize_convex_quadratic_on_vertices_with(poly, objective, tie_tol, crate::model::DEFAULT_TOL, VertexLimits::default())
}

pub fn maximize_convex_quadratic_on_vertices_with(
    poly: &RebalancePolytope,
    objective: &SeparableQuadratic,
    tie_tol: f64,
    tol: f64,
    limits: VertexLimits,
) -> Result<VertexMaximum> {
    objective.check(poly.dim)?;
    if let Some(k) = objective.curvature.iter().position(|h| *h < 0.0 || h.is_nan()) {
        return Err(Error::WrongCurvature(k));
    }
    let vertices = enumerate_vertices_with(poly, tol, limits)?;
    if vertices.is_empty() {
        return Err(Error::EmptyPolytope);
    }
    let values: Vec<f64> = vertices.iter().map(|v| objective.value(v)).collect();
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let near_optimal: Vec<Vec<f64>> = vertices
        .iter()
        .zip(&values)
        .filter(|(_, val)| **val >= best - tie_tol)
        .map(|(v, _)| v.clone())
        .collect();
    let argmax = near_optimal[0].clone();
    Ok(VertexMaximum {
        value: objective.value(&argmax),
        argmax,
        near_optimal,
        vertices,
        values,
    })
}

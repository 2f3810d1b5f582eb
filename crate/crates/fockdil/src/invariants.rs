//! Curvature invariants and Euler characteristics, free and symmetric, and
//! the identity expressing the curvature of `A` through the characteristic
//! function of a lifting.
//!
//! Free statistics are indexed by the number `m ≥ 1` of Fock levels kept:
//! `c_m = trace[K^*(P_{≤m−1}⊗1)K]/d^m = trace(1 − Φ^m(1))/d^m`, so that the
//! creation pair gives `c_m = (2^m − 1)/2^m`. For `d = 1` the denominator is
//! `m`. Symmetric statistics keep the index `n` of `1 − Φ^{n+1}(1)`.

use serde::Serialize;

use crate::charfn::{lifting_char, visit_generators};
use crate::config::Tolerances;
use crate::cpmaps::kraus_apply;
use crate::error::{FockError, Result};
use crate::fock::{constrained_fock, ConstraintSet, TruncatedFock};
use crate::liftings::{b_star_stack, classify, Lifting};
use crate::numkit::{eye, fro_norm, kron, pinv, rank, zeros, CMat, C64};
use crate::sparse::{visit_sparse_word_blocks, visit_word_blocks, SpMat, SparseTuple, TupleAction};
use crate::symbols::{extend, MultiAnalyticSymbol};
use crate::tuples::{commutator_residual, defects, OperatorTuple};

/// How the limit of a statistic is estimated from its sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    /// The last value of the sequence.
    LastValue,
    /// First-order Richardson extrapolation in `1/n` from the last two
    /// values: `n·v_n − (n−1)·v_{n−1}`. Exact for `v_n = a + b/n`.
    Richardson,
}

/// One term of a statistic: `value = raw / normalization`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantPoint {
    pub n: usize,
    pub raw: f64,
    pub normalization: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantTrace {
    pub statistic: String,
    /// Formula of the denominator, e.g. `"d^m"`.
    pub normalization: String,
    pub sequence: Vec<InvariantPoint>,
    pub n_max: usize,
    pub estimate: f64,
    pub method: EstimateMethod,
}

impl InvariantTrace {
    pub fn new(statistic: &str, normalization: &str, sequence: Vec<InvariantPoint>, method: EstimateMethod) -> Self {
        let n_max = sequence.last().map_or(0, |p| p.n);
        let estimate = estimate(&sequence, method);
        InvariantTrace {
            statistic: statistic.to_string(),
            normalization: normalization.to_string(),
            sequence,
            n_max,
            estimate,
            method,
        }
    }

    pub fn value_at(&self, n: usize) -> Option<f64> {
        self.sequence.iter().find(|p| p.n == n).map(|p| p.value)
    }

    pub fn raw_at(&self, n: usize) -> Option<f64> {
        self.sequence.iter().find(|p| p.n == n).map(|p| p.raw)
    }
}

fn estimate(seq: &[InvariantPoint], method: EstimateMethod) -> f64 {
    match (method, seq) {
        (_, []) => f64::NAN,
        (EstimateMethod::Richardson, [.., p, q]) if q.n == p.n + 1 => q.n as f64 * q.value - p.n as f64 * p.value,
        (_, [.., q]) => q.value,
    }
}

fn point(n: usize, raw: f64, normalization: f64) -> InvariantPoint {
    InvariantPoint {
        n,
        raw,
        normalization,
        value: raw / normalization,
    }
}

/// `d^m`, or `m` when `d = 1`.
fn curvature_denominator(d: usize, m: usize) -> f64 {
    if d == 1 {
        m as f64
    } else {
        (d as f64).powi(m as i32)
    }
}

/// `1 + d + … + d^{m−1}`, the number of words of length `< m`.
fn level_count(d: usize, m: usize) -> f64 {
    (0..m).map(|k| (d as f64).powi(k as i32)).sum()
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|j| j as f64).product()
}

/// Free curvature with both routes to `trace[K^*(P_{≤m−1}⊗1)K]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreeCurvature {
    pub trace: InvariantTrace,
    /// `Σ_{|α|<m} ‖D_*T_α^*‖_F²` from the Poisson kernel blocks, `m = 1..=m_max`.
    pub kernel_route: Vec<f64>,
    /// `trace(1 − Φ^m(1))`, `m = 1..=m_max`.
    pub cp_route: Vec<f64>,
    /// Largest `|kernel − cp| / max(1, cp)`.
    pub route_gap: f64,
}

fn route_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Per-level Poisson-kernel traces `Σ_{|α|=k} ‖x0 T_α^*‖_F²` for `k < levels`,
/// and optionally the Gram sums `Σ_{|α|≤k} (x0T_α^*)^†(x0T_α^*)`.
fn kernel_levels<A: TupleAction>(t: &A, x0: &CMat, levels: usize, want_gram: bool) -> (Vec<f64>, Vec<CMat>) {
    let mut per_level = vec![0.0; levels];
    let mut grams = if want_gram {
        vec![zeros(t.dim(), t.dim()); levels]
    } else {
        vec![]
    };
    if levels == 0 {
        return (per_level, grams);
    }
    let f = TruncatedFock::new(t.d(), levels - 1);
    visit_word_blocks(t, x0, levels - 1, |idx, x| {
        let k = f.length_of(idx);
        per_level[k] += fro_norm(x).powi(2);
        if want_gram {
            grams[k] += x.adjoint() * x;
        }
    });
    for k in 1..grams.len() {
        let prev = grams[k - 1].clone();
        grams[k] += prev;
    }
    (per_level, grams)
}

fn cumulative(v: &[f64]) -> Vec<f64> {
    v.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

/// `trace(1 − Φ^m(1))` for `m = 1..=m_max` and the last `1 − Φ^m(1)` of each step.
fn cp_levels_dense(t: &OperatorTuple, m_max: usize) -> Vec<CMat> {
    let n = t.dim();
    let mut phi = eye(n);
    let mut out = Vec::with_capacity(m_max);
    for _ in 0..m_max {
        phi = kraus_apply(t, &phi);
        out.push(eye(n) - &phi);
    }
    out
}

/// [`cp_levels_dense`], switching to sparse products when the tuple has at
/// most one nonzero entry in eight.
fn cp_levels(t: &OperatorTuple, m_max: usize) -> Vec<CMat> {
    let st = SparseTuple::from_dense(t);
    let nnz: usize = st.mats.iter().map(SpMat::nnz).sum();
    if 8 * nnz > t.d() * t.dim() * t.dim() {
        return cp_levels_dense(t, m_max);
    }
    cp_levels_sparse(&st, m_max).iter().map(SpMat::to_dense).collect()
}

fn cp_levels_sparse(t: &SparseTuple, m_max: usize) -> Vec<SpMat> {
    let n = t.dim();
    let mut phi = SpMat::identity(n);
    let mut out = Vec::with_capacity(m_max);
    for _ in 0..m_max {
        phi = t.cp_apply(&phi);
        out.push(SpMat::identity(n).sub(&phi));
    }
    out
}

fn trace_re(m: &CMat) -> f64 {
    m.trace().re
}

/// `x0 = Q_*^†D_*` for a sparse tuple whose `1 − ΣT_iT_i^*` is diagonal.
fn sparse_defect_rows(t: &SparseTuple, tol: &Tolerances) -> Result<SpMat> {
    let n = t.dim();
    let dstar2 = SpMat::identity(n).sub(&t.row_gram());
    if !dstar2.is_diagonal(tol.tol) {
        return Err(FockError::Unsupported(
            "sparse curvature needs a diagonal 1 − ΣT_iT_i^*".into(),
        ));
    }
    let diag = dstar2.diagonal();
    let cut = tol.rank * diag.iter().map(|z| z.re).fold(1.0, f64::max);
    let support: Vec<usize> = (0..n).filter(|&k| diag[k].re > cut).collect();
    let trips = support
        .iter()
        .enumerate()
        .map(|(row, &k)| (row, k, C64::new(diag[k].re.sqrt(), 0.0)))
        .collect();
    Ok(SpMat::from_triplets(support.len(), n, trips))
}

/// Per-level kernel traces `Σ_{|α|=k} ‖x0 T_α^*‖_F²` with sparse blocks.
fn kernel_levels_sparse(t: &SparseTuple, x0: &SpMat, levels: usize) -> Vec<f64> {
    let mut per_level = vec![0.0; levels];
    if levels == 0 {
        return per_level;
    }
    let f = TruncatedFock::new(t.d(), levels - 1);
    visit_sparse_word_blocks(t, x0, levels - 1, |idx, x| {
        per_level[f.length_of(idx)] += x.frob2();
    });
    per_level
}

fn free_curvature_from(d: usize, kernel_route: Vec<f64>, cp_route: Vec<f64>) -> FreeCurvature {
    let sequence = cp_route
        .iter()
        .enumerate()
        .map(|(k, &raw)| point(k + 1, raw, curvature_denominator(d, k + 1)))
        .collect();
    let label = if d == 1 { "m" } else { "d^m" };
    FreeCurvature {
        trace: InvariantTrace::new("curvature_free", label, sequence, EstimateMethod::LastValue),
        route_gap: route_gap(&kernel_route, &cp_route),
        kernel_route,
        cp_route,
    }
}

/// Free curvature sequence `c_m`, `m = 1..=m_max`.
pub fn curvature_free(t: &OperatorTuple, m_max: usize, tol: &Tolerances) -> Result<FreeCurvature> {
    let dd = defects(t, tol)?;
    let x0 = dd.defect_star.basis.adjoint() * &dd.dstar;
    let (levels, _) = kernel_levels(t, &x0, m_max, false);
    let cp: Vec<f64> = cp_levels_dense(t, m_max).iter().map(trace_re).collect();
    Ok(free_curvature_from(t.d(), cumulative(&levels), cp))
}

/// [`curvature_free`] for a sparse tuple with diagonal `1 − ΣT_iT_i^*`.
pub fn curvature_free_sparse(t: &SparseTuple, m_max: usize, tol: &Tolerances) -> Result<FreeCurvature> {
    let x0 = sparse_defect_rows(t, tol)?;
    let levels = kernel_levels_sparse(t, &x0, m_max);
    let cp: Vec<f64> = cp_levels_sparse(t, m_max).iter().map(|g| g.trace().re).collect();
    Ok(free_curvature_from(t.d(), cumulative(&levels), cp))
}

/// Free Euler characteristic `rank[K^*(P_{≤m−1}⊗1)K]/(1 + d + … + d^{m−1})`,
/// with the rank taken on the accumulated Poisson Gram operator.
pub fn euler_free(t: &OperatorTuple, m_max: usize, tol: &Tolerances) -> Result<InvariantTrace> {
    let dd = defects(t, tol)?;
    let x0 = dd.defect_star.basis.adjoint() * &dd.dstar;
    let (_, grams) = kernel_levels(t, &x0, m_max, true);
    let mut sequence = Vec::with_capacity(m_max);
    for (k, g) in grams.iter().enumerate() {
        let rk = rank(g, tol.rank)? as f64;
        sequence.push(point(k + 1, rk, level_count(t.d(), k + 1)));
    }
    Ok(InvariantTrace::new(
        "euler_free",
        "1+d+...+d^(m-1)",
        sequence,
        EstimateMethod::LastValue,
    ))
}

/// [`euler_free`] for a sparse tuple; the Gram operator `1 − Φ^m(1)` must
/// stay diagonal.
pub fn euler_free_sparse(t: &SparseTuple, m_max: usize, tol: &Tolerances) -> Result<InvariantTrace> {
    let mut sequence = Vec::with_capacity(m_max);
    for (k, g) in cp_levels_sparse(t, m_max).iter().enumerate() {
        let cut = tol.rank * g.max_abs().max(1.0);
        let rk = g
            .diagonal_rank(cut)
            .ok_or_else(|| FockError::Unsupported("sparse Euler characteristic needs a diagonal Gram operator".into()))?;
        sequence.push(point(k + 1, rk as f64, level_count(t.d(), k + 1)));
    }
    Ok(InvariantTrace::new(
        "euler_free",
        "1+d+...+d^(m-1)",
        sequence,
        EstimateMethod::LastValue,
    ))
}

/// Basis vectors kept in symmetric traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceWindow {
    Full,
    /// Drops the first `n + 1` basis vectors at step `n`: the vectors whose
    /// orbit of length `n + 1` under an index-lowering adjoint (a truncated
    /// backward shift) would leave the truncation.
    LowerEdge,
}

impl TraceWindow {
    fn indices(self, dim: usize, n: usize) -> Vec<usize> {
        match self {
            TraceWindow::Full => (0..dim).collect(),
            TraceWindow::LowerEdge => (n + 1..dim).collect(),
        }
    }
}

/// Rank of a Hermitian Gram block, read off the diagonal when it is diagonal.
fn gram_rank(w: &CMat, rank_tol: f64) -> Result<usize> {
    let n = w.nrows();
    let off_diagonal = (0..n).any(|j| (0..n).any(|i| i != j && w[(i, j)] != C64::new(0.0, 0.0)));
    if off_diagonal {
        return rank(w, rank_tol);
    }
    let top = (0..n).map(|k| w[(k, k)].norm()).fold(0.0, f64::max);
    let cut = rank_tol * top.max(1.0);
    Ok((0..n).filter(|&k| w[(k, k)].norm() > cut).count())
}

fn compress(m: &CMat, idx: &[usize]) -> CMat {
    CMat::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

/// Both symmetric statistics. They use different normalizations and are
/// reported side by side, not reconciled.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetricInvariant {
    /// `d!·trace_W(1 − Φ^{n+1}(1))/n^d` (rank for the Euler variant).
    pub power: InvariantTrace,
    /// `(d−1)!·trace_W[K^*(Q_{≤n}⊗1)K]/d^n` for the trace, and
    /// `d!·rank_W[K^*(Q_{≤n}⊗1)K]/n^d` for the Euler variant, computed on
    /// the levels whose Fock space fits `poisson_max_dim`.
    pub poisson: InvariantTrace,
    pub window: TraceWindow,
}

/// Settings shared by [`curvature_sym`] and [`euler_sym`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricConfig {
    pub n_max: usize,
    pub window: TraceWindow,
    pub method: EstimateMethod,
    /// Largest `dim Γ_{≤n}(ℂ^d)` for which the Poisson statistic is formed.
    pub poisson_max_dim: usize,
}

impl SymmetricConfig {
    pub fn new(n_max: usize) -> Self {
        SymmetricConfig {
            n_max,
            window: TraceWindow::Full,
            method: EstimateMethod::LastValue,
            poisson_max_dim: 1024,
        }
    }
}

fn check_commuting(t: &OperatorTuple, tol: &Tolerances) -> Result<()> {
    let residual = commutator_residual(t);
    if residual > tol.tol.max(1e-12) * (1.0 + t.row_norm()) {
        return Err(FockError::NotCommuting { residual });
    }
    Ok(())
}

/// Symmetric-Fock projected Poisson Gram `K^*(Q_{≤n}⊗1)K` for each `n ≤ n_max`
/// that fits `max_dim`.
fn symmetric_poisson_grams(t: &OperatorTuple, n_max: usize, max_dim: usize, tol: &Tolerances) -> Result<Vec<(usize, CMat)>> {
    let d = t.d();
    let top = (1..=n_max)
        .take_while(|&n| TruncatedFock::new(d, n).total_dim() <= max_dim)
        .last();
    let Some(top) = top else { return Ok(vec![]) };
    let dd = defects(t, tol)?;
    let rs = dd.defect_star.dim();
    let x0 = dd.defect_star.basis.adjoint() * &dd.dstar;
    let blocks = crate::sparse::word_blocks(t, &x0, top);
    let k_full = crate::dilation::stack_blocks(&blocks);
    let q_top = constrained_fock(&TruncatedFock::new(d, top), &ConstraintSet::commutators(d), tol.rank)?.basis;
    let mut out = Vec::with_capacity(top);
    for n in 1..=top {
        // the piece is graded, so Q_{≤n} is spanned by the columns supported
        // on the first dim Γ_{≤n} rows
        let keep = TruncatedFock::new(d, n).total_dim();
        let cols: Vec<usize> = (0..q_top.ncols())
            .filter(|&c| q_top.column(c).rows(keep, q_top.nrows() - keep).norm() < 1e-12)
            .collect();
        let q = q_top.select_columns(&cols).rows(0, keep).into_owned();
        let k = k_full.rows(0, keep * rs).into_owned();
        let ks = kron(&q, &eye(rs)).adjoint() * k;
        out.push((n, ks.adjoint() * ks));
    }
    Ok(out)
}

enum SymKind {
    Curvature,
    Euler,
}

fn symmetric(t: &OperatorTuple, cfg: &SymmetricConfig, kind: SymKind, tol: &Tolerances) -> Result<SymmetricInvariant> {
    check_commuting(t, tol)?;
    let d = t.d();
    let dim = t.dim();
    let measure = |g: &CMat, n: usize| -> Result<f64> {
        let idx = cfg.window.indices(dim, n);
        let w = compress(g, &idx);
        Ok(match kind {
            SymKind::Curvature => trace_re(&w),
            SymKind::Euler => gram_rank(&w, tol.rank)? as f64,
        })
    };
    let nd = |n: usize| (n as f64).powi(d as i32) / factorial(d);
    let gaps = cp_levels(t, cfg.n_max + 1);
    let mut power = Vec::with_capacity(cfg.n_max);
    for n in 1..=cfg.n_max {
        power.push(point(n, measure(&gaps[n], n)?, nd(n)));
    }
    let mut poisson = Vec::new();
    for (n, g) in symmetric_poisson_grams(t, cfg.n_max, cfg.poisson_max_dim, tol)? {
        let norm = match kind {
            SymKind::Curvature => (d as f64).powi(n as i32) / factorial(d - 1),
            SymKind::Euler => nd(n),
        };
        poisson.push(point(n, measure(&g, n)?, norm));
    }
    let (name, ex_label, po_label) = match kind {
        SymKind::Curvature => ("curvature_sym", "n^d/d!", "d^n/(d-1)!"),
        SymKind::Euler => ("euler_sym", "n^d/d!", "n^d/d!"),
    };
    Ok(SymmetricInvariant {
        power: InvariantTrace::new(&format!("{name}_power"), ex_label, power, cfg.method),
        poisson: InvariantTrace::new(&format!("{name}_poisson"), po_label, poisson, cfg.method),
        window: cfg.window,
    })
}

pub fn curvature_sym(t: &OperatorTuple, cfg: &SymmetricConfig, tol: &Tolerances) -> Result<SymmetricInvariant> {
    symmetric(t, cfg, SymKind::Curvature, tol)
}

pub fn euler_sym(t: &OperatorTuple, cfg: &SymmetricConfig, tol: &Tolerances) -> Result<SymmetricInvariant> {
    symmetric(t, cfg, SymKind::Euler, tol)
}

/// `S_j = Σ_{|α|=j} ‖θ_α‖_F²` for `j = 0..=N`.
pub fn symbol_level_norms(theta: &MultiAnalyticSymbol) -> Vec<f64> {
    let f = theta.fock();
    (0..=theta.n)
        .map(|j| f.level_range(j).map(|k| fro_norm(&theta.coeffs[k]).powi(2)).sum())
        .collect()
}

/// `trace[MM^*(P_{≤n}⊗1)]` for `n = 0..len−1` by counting: a coefficient at
/// level `j` reaches level `k ≥ j` from `d^{k−j}` basis words.
pub fn split_count_traces(level_norms: &[f64], d: usize) -> Vec<f64> {
    let df = d as f64;
    let mut per_level = Vec::with_capacity(level_norms.len());
    for k in 0..level_norms.len() {
        per_level.push((0..=k).map(|j| df.powi((k - j) as i32) * level_norms[j]).sum::<f64>());
    }
    cumulative(&per_level)
}

/// Dense oracle for [`split_count_traces`]: `‖(P_{≤n}⊗1)M(P_{≤n}⊗1)‖_F²`
/// from the assembled matrix. Only coefficients of level `≤ n` can reach
/// `P_{≤n}` from the vacuum side, so the compression loses nothing.
pub fn dense_symbol_trace(theta: &MultiAnalyticSymbol, n: usize) -> f64 {
    fro_norm(&extend(theta, n)).powi(2)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureIdentityReport {
    pub rank_dc: usize,
    /// `c_m` of `A`.
    pub curvature: InvariantTrace,
    /// `rank D_C − trace[MM^*(P_{≤m−1}⊗1)]/d^m`.
    pub rhs: InvariantTrace,
    /// `S_j = Σ_{|α|=j} ‖θ_α‖_F²`.
    pub level_norms: Vec<f64>,
    /// `|curvature − rhs|` at `m_max`.
    pub difference: f64,
}

fn identity_report_from(d: usize, rank_dc: usize, curvature: InvariantTrace, level_norms: Vec<f64>) -> CurvatureIdentityReport {
    let traces = split_count_traces(&level_norms, d);
    let sequence = traces
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let m = k + 1;
            let den = curvature_denominator(d, m);
            let raw = rank_dc as f64 * den - t;
            point(m, raw, den)
        })
        .collect();
    let label = if d == 1 { "m" } else { "d^m" };
    let rhs = InvariantTrace::new("identity_rhs", label, sequence, EstimateMethod::LastValue);
    let difference = (curvature.estimate - rhs.estimate).abs();
    CurvatureIdentityReport {
        rank_dc,
        curvature,
        rhs,
        level_norms,
        difference,
    }
}

fn require_isometric_gamma(l: &Lifting, tol: &Tolerances) -> Result<()> {
    let cl = classify(l, tol)?;
    if !cl.is_reduced {
        return Err(FockError::NotReduced);
    }
    if !cl.gamma_isometric {
        return Err(FockError::Unsupported("γ is not isometric".into()));
    }
    Ok(())
}

/// Curvature of `A` against `rank D_C − lim trace[MM^*(P_{≤m−1}⊗1)]/d^m`
/// for `m = 1..=m_max`, with the trace obtained by split counting from the
/// symbol coefficients.
pub fn curvature_identity_check(l: &Lifting, m_max: usize, tol: &Tolerances) -> Result<CurvatureIdentityReport> {
    require_isometric_gamma(l, tol)?;
    let rank_dc = l.defects(tol)?.c.defect.dim();
    let theta = lifting_char(l, m_max.saturating_sub(1), false, tol)?.symbol;
    let curvature = curvature_free(&l.a, m_max, tol)?.trace;
    Ok(identity_report_from(l.d(), rank_dc, curvature, symbol_level_norms(&theta)))
}

/// `S_j` for a lifting whose `A` is sparse, when `D_E² = 1 − [E_i^*E_j]` is a
/// projection, so `pinv(D_E)Q_E = Q_E` and `‖θ_α‖_F = ‖Q_C^†G_α D_E²‖_F`.
pub fn sparse_symbol_level_norms(
    c: &OperatorTuple,
    a: &SparseTuple,
    b: &[CMat],
    n: usize,
    tol: &Tolerances,
) -> Result<Vec<f64>> {
    let d = c.d();
    let (m_c, m_a) = (c.dim(), a.dim());
    let m = m_c + m_a;
    let dc = defects(c, tol)?;
    let w = pinv(&dc.dfull, tol.rank)? * b_star_stack(b);
    let e: Vec<SpMat> = (0..d)
        .map(|i| {
            let mut trips = Vec::new();
            for (r, cc, v) in SpMat::from_dense(&c.mats[i]).iter() {
                trips.push((r, cc, v));
            }
            for (r, cc, v) in SpMat::from_dense(&b[i]).iter() {
                trips.push((m_c + r, cc, v));
            }
            for (r, cc, v) in a.mats[i].iter() {
                trips.push((m_c + r, m_c + cc, v));
            }
            SpMat::from_triplets(m, m, trips)
        })
        .collect();
    let mut trips = Vec::new();
    for i in 0..d {
        for j in 0..d {
            let g = e[i].adjoint().matmul(&e[j]);
            for (r, cc, v) in g.iter() {
                trips.push((i * m + r, j * m + cc, -v));
            }
        }
    }
    for k in 0..d * m {
        trips.push((k, k, C64::new(1.0, 0.0)));
    }
    let de2 = SpMat::from_triplets(d * m, d * m, trips);
    if !de2.is_projection(tol.tol) {
        return Err(FockError::Unsupported("D_E² is not a projection".into()));
    }
    let qc = dc.defect.basis.adjoint();
    let f = TruncatedFock::new(d, n);
    let mut out = vec![0.0; n + 1];
    visit_generators(a, &dc.dfull, &w, b, n, |idx, g| {
        let gp = de2.left_mul_dense(g);
        out[f.length_of(idx)] += fro_norm(&(&qc * gp)).powi(2);
    });
    Ok(out)
}

/// [`curvature_identity_check`] for `E = [[C, 0], [B, A]]` with sparse `A`; `γ` must be
/// isometric, checked as `W^*W = D_{*,A}²` with `W = γD_{*,A}`.
pub fn curvature_identity_check_sparse(
    c: &OperatorTuple,
    a: &SparseTuple,
    b: &[CMat],
    m_max: usize,
    tol: &Tolerances,
) -> Result<CurvatureIdentityReport> {
    let dc = defects(c, tol)?;
    let w = pinv(&dc.dfull, tol.rank)? * b_star_stack(b);
    // ‖W^*W − D²‖_F² = ‖WW^*‖_F² − 2·tr(W D² W^*) + ‖D²‖_F², all small or sparse
    let dstar2 = SpMat::identity(a.dim()).sub(&a.row_gram());
    let wd = dstar2.left_mul_dense(&w);
    let gap2 = fro_norm(&(&w * w.adjoint())).powi(2) - 2.0 * (wd * w.adjoint()).trace().re + dstar2.frob2();
    let gap = gap2.max(0.0).sqrt();
    if gap > tol.tol.max(1e-9).sqrt() {
        return Err(FockError::Unsupported(format!("γ is not isometric (residual {gap:e})")));
    }
    let level_norms = sparse_symbol_level_norms(c, a, b, m_max.saturating_sub(1), tol)?;
    let curvature = curvature_free_sparse(a, m_max, tol)?.trace;
    Ok(identity_report_from(c.d(), dc.defect.dim(), curvature, level_norms))
}

use std::fs;
use std::path::Path;

use fockdil::charfn::{
    case_two_splitting_residual, constrained_char, constrained_unitarity_residual, cocycle_product, extended_char,
    functional_model, lifting_char, popescu_char, unitarity_residual,
};
use fockdil::cpmaps::{ergodic_lifting_check, kappa, kappa_inverse, CPMap};
use fockdil::dilation::{constrained_piece_of_mid, mid, poisson_kernel};
use fockdil::fock::{constrained_fock, fock_dim, level_dims, maximal_constrained_piece, ConstraintSet, TruncatedFock};
use fockdil::invariants::{
    curvature_free, curvature_identity_check, curvature_sym, dense_symbol_trace, euler_free, euler_sym,
    split_count_traces, symbol_level_norms, EstimateMethod, InvariantTrace, SymmetricConfig, TraceWindow,
};
use fockdil::io::{matrix_to_json, parse_json, LiftingFile, SymbolFile, TupleFile};
use fockdil::liftings::{classify, recover_gamma, Lifting};
use fockdil::numkit::{eigh, eye, op_norm, CMat, CVec};
use fockdil::random::{gaussian, seeded};
use fockdil::symbols::{compose, equivalent, extend, gram_defect, MultiAnalyticSymbol};
use fockdil::tuples::{defects, eigen_frame, is_coisometric, restrict_off_omega, stability_report, OperatorTuple};
use fockdil::{FockError, Tolerances};
use serde_json::{json, Map, Value};

use crate::report::{InputEcho, Report};

/// Largest superoperator side (`dim²`) before a warning is attached.
const SUPEROPERATOR_WARN_DIM: usize = 64;
/// Largest dense extension matrix side formed for an optional check.
const DENSE_CHECK_MAX: usize = 4096;
/// Coefficient vectors below this norm are left out of coefficient listings.
const LISTING_ZERO: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub trunc: usize,
    pub tol: f64,
    pub rank_tol: f64,
    pub tol_inner: f64,
    pub check_tol: f64,
    pub limit_tol: f64,
    pub seed: u64,
    pub report: String,
}

impl RunConfig {
    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            rank: self.rank_tol,
            inner: self.tol_inner,
            tol: self.tol,
            ..Tolerances::default()
        }
    }

    fn to_map(&self) -> Map<String, Value> {
        let Value::Object(m) = json!({
            "trunc": self.trunc,
            "tol": self.tol,
            "rank_tol": self.rank_tol,
            "tol_inner": self.tol_inner,
            "check_tol": self.check_tol,
            "limit_tol": self.limit_tol,
            "seed": self.seed,
            "report": self.report,
        }) else {
            unreachable!("json! object literal")
        };
        m
    }

    /// Report skeleton with the run configuration plus command options.
    pub fn report(&self, command: &str, inputs: Vec<InputEcho>, options: Value) -> Report {
        let mut config = self.to_map();
        if let Value::Object(extra) = options {
            config.extend(extra);
        }
        Report::new(command, inputs, Value::Object(config))
    }
}

/// An input that could not be read or parsed (exit code 2).
#[derive(Debug, Clone)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn read_input(path: &Path) -> Result<(InputEcho, String), InputError> {
    let bytes = fs::read(path).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    let echo = InputEcho::new(path, &bytes);
    let text = String::from_utf8(bytes).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    Ok((echo, text))
}

fn input_error(path: &Path, e: FockError) -> InputError {
    InputError(format!("{}: {e}", path.display()))
}

pub fn load_tuple(path: &Path) -> Result<(InputEcho, OperatorTuple), InputError> {
    let (echo, text) = read_input(path)?;
    let file: TupleFile = parse_json(&text, "tuple").map_err(|e| input_error(path, e))?;
    let t = file.to_tuple().map_err(|e| input_error(path, e))?;
    Ok((echo, t))
}

pub type Blocks = (OperatorTuple, OperatorTuple, Vec<CMat>);

pub fn load_lifting(path: &Path) -> Result<(InputEcho, Blocks), InputError> {
    let (echo, text) = read_input(path)?;
    let file: LiftingFile = parse_json(&text, "lifting").map_err(|e| input_error(path, e))?;
    let blocks = file.to_blocks().map_err(|e| input_error(path, e))?;
    Ok((echo, blocks))
}

pub fn load_symbol(path: &Path) -> Result<(InputEcho, MultiAnalyticSymbol), InputError> {
    let (echo, text) = read_input(path)?;
    let file: SymbolFile = parse_json(&text, "symbol").map_err(|e| input_error(path, e))?;
    let theta = file.to_symbol().map_err(|e| input_error(path, e))?;
    Ok((echo, theta))
}

fn mat(m: &CMat) -> Value {
    json!(matrix_to_json(m))
}

fn vector(v: &CVec) -> Value {
    json!(v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>())
}

fn symbol_value(theta: &MultiAnalyticSymbol) -> Value {
    serde_json::to_value(SymbolFile::from_symbol(theta, 0.0)).unwrap_or(Value::Null)
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).unwrap_or(Value::Null)
}

fn phi_power_norm(t: &OperatorTuple, n: u64) -> f64 {
    op_norm(&CPMap::new(t).apply(&eye(t.dim()), n))
}

/// `‖Σ T_iT_i^*‖ ≤ 1`, checked before anything that takes defect roots.
fn check_contraction(r: &mut Report, name: &str, t: &OperatorTuple, cfg: &RunConfig) -> bool {
    let norm = op_norm(&t.row_gram());
    r.check(name, (norm - 1.0).max(0.0), cfg.tol)
}

fn build_lifting(r: &mut Report, blocks: Blocks, cfg: &RunConfig) -> Option<Lifting> {
    let (c, a, b) = blocks;
    let total = fockdil::liftings::assemble(&c, &a, &b);
    if !check_contraction(r, "row_contraction", &total, cfg) {
        return None;
    }
    r.attempt("lifting", Lifting::from_blocks(c, a, b, &cfg.tolerances()))
}

/// Largest eigenvalue of `Σ_α θ_α^*θ_α` minus one: nonpositive for a
/// contractive symbol.
fn gram_excess(theta: &MultiAnalyticSymbol) -> f64 {
    let gd = gram_defect(theta, f64::INFINITY);
    let (vals, _) = eigh(&gd.gram0);
    vals.last().map_or(0.0, |v| (v - 1.0).max(0.0))
}

pub fn validate(cfg: &RunConfig, echo: InputEcho, t: OperatorTuple) -> Report {
    let mut r = cfg.report("validate", vec![echo], json!({}));
    r.output("d", json!(t.d()));
    r.output("dim", json!(t.dim()));
    r.output_f64("row_gram_norm", op_norm(&t.row_gram()));
    r.output("coisometric", json!(is_coisometric(&t, cfg.tol)));
    r.output_f64("commutator_residual", fockdil::tuples::commutator_residual(&t));
    check_contraction(&mut r, "row_contraction", &t, cfg);
    r
}

pub fn defects_cmd(cfg: &RunConfig, echo: InputEcho, t: OperatorTuple) -> Report {
    let mut r = cfg.report("defects", vec![echo], json!({}));
    if !check_contraction(&mut r, "row_contraction", &t, cfg) {
        return r;
    }
    let Some(dd) = r.attempt("defects", defects(&t, &cfg.tolerances())) else {
        return r;
    };
    let row = t.row();
    let star_res = op_norm(&(&dd.dstar * &dd.dstar - (eye(t.dim()) - t.row_gram())));
    let full_res = op_norm(&(&dd.dfull * &dd.dfull - (eye(row.ncols()) - row.adjoint() * &row)));
    r.check("dstar_square", star_res, cfg.check_tol);
    r.check("d_square", full_res, cfg.check_tol);
    r.output("rank_dstar", json!(dd.defect_star.dim()));
    r.output("rank_d", json!(dd.defect.dim()));
    r.output("dstar", mat(&dd.dstar));
    r.output("d", mat(&dd.dfull));
    r
}

pub fn stability(cfg: &RunConfig, echo: InputEcho, t: OperatorTuple) -> Report {
    let mut r = cfg.report("stability", vec![echo], json!({}));
    if !check_contraction(&mut r, "row_contraction", &t, cfg) {
        return r;
    }
    let Some(sr) = r.attempt("stability", stability_report(&t, &cfg.tolerances())) else {
        return r;
    };
    let fixed = op_norm(&(CPMap::new(&t).apply_once(&sr.q) - &sr.q));
    let (vals, _) = eigh(&sr.q);
    let lo = vals.first().copied().unwrap_or(0.0);
    let hi = vals.last().copied().unwrap_or(0.0);
    r.check("q_fixed", fixed, cfg.limit_tol);
    r.check("q_between_0_and_1", (-lo).max(hi - 1.0).max(0.0), cfg.check_tol);
    r.output("star_stable", json!(sr.star_stable));
    r.output("cnc", json!(sr.cnc));
    r.output("h1_dim", json!(sr.h1.dim()));
    r.output("horizon", json!(sr.horizon));
    r.output_f64("residual", sr.residual);
    r.output_f64("q_norm", op_norm(&sr.q));
    r.output("q", mat(&sr.q));
    r
}

pub fn dilate(cfg: &RunConfig, echo: InputEcho, t: OperatorTuple, len: usize) -> Report {
    let mut r = cfg.report("dilate", vec![echo], json!({ "len": len }));
    if !check_contraction(&mut r, "row_contraction", &t, cfg) {
        return r;
    }
    let Some(m) = r.attempt("mid", mid(&t, cfg.trunc, &cfg.tolerances())) else {
        return r;
    };
    r.check("isometry", m.isometry_residual(), cfg.check_tol);
    r.check("dilation", m.dilation_residual(len), cfg.check_tol);
    r.output("dim_h", json!(m.dim_h()));
    r.output("defect_dim", json!(m.defect_dim()));
    r.output("domain_dim", json!(m.domain_dim()));
    r.output("dim", json!(m.square().dim()));
    r
}

pub fn poisson(cfg: &RunConfig, echo: InputEcho, t: OperatorTuple) -> Report {
    let mut r = cfg.report("poisson", vec![echo], json!({}));
    if !check_contraction(&mut r, "row_contraction", &t, cfg) {
        return r;
    }
    let Some(k) = r.attempt("poisson kernel", poisson_kernel(&t, cfg.trunc, &cfg.tolerances())) else {
        return r;
    };
    // K^*K telescopes to 1 − Φ^{N+1}(1)
    let tail = CPMap::new(&t).apply(&eye(t.dim()), cfg.trunc as u64 + 1);
    let res = op_norm(&(k.adjoint() * &k - (eye(t.dim()) - &tail)));
    r.check("kernel_gram", res, cfg.check_tol);
    r.output_f64("tail_norm", op_norm(&tail));
    r.output("kernel", mat(&k));
    r
}

pub fn charfn(cfg: &RunConfig, echo: InputEcho, t: OperatorTuple) -> Report {
    let mut r = cfg.report("charfn", vec![echo], json!({}));
    if !check_contraction(&mut r, "row_contraction", &t, cfg) {
        return r;
    }
    let Some(theta) = r.attempt("characteristic function", popescu_char(&t, cfg.trunc, &cfg.tolerances())) else {
        return r;
    };
    r.check("gram_bound", gram_excess(&theta), cfg.check_tol);
    let gd = gram_defect(&theta, cfg.tol_inner);
    r.output_f64("gram0_defect", gd.gram0_defect);
    r.output_f64("max_cross", gd.max_cross);
    r.output("inner_within_tol_inner", json!(gd.inner));
    r.output_f64("tail_norm", phi_power_norm(&t, cfg.trunc as u64 + 1));
    r.output("symbol", symbol_value(&theta));
    r
}

/// The unitarity identity holds with a tail term for coisometric
/// subisometric liftings; elsewhere the residual is only reported.
fn unitarity_bound(l: &Lifting, buffer: usize, cfg: &RunConfig) -> f64 {
    cfg.check_tol.max(phi_power_norm(&l.a, buffer as u64))
}

pub fn lift_charfn(cfg: &RunConfig, echo: InputEcho, blocks: Blocks, allow_nonreduced: bool, buffer: usize) -> Report {
    let mut r = cfg.report(
        "lift-charfn",
        vec![echo],
        json!({ "allow_nonreduced": allow_nonreduced, "buffer": buffer }),
    );
    let tol = cfg.tolerances();
    let Some(l) = build_lifting(&mut r, blocks, cfg) else {
        return r;
    };
    let Some(cl) = r.attempt("classify", classify(&l, &tol)) else {
        return r;
    };
    let Some(lc) = r.attempt("characteristic function", lifting_char(&l, cfg.trunc, allow_nonreduced, &tol)) else {
        return r;
    };
    r.check("consistency", lc.consistency, cfg.check_tol);
    r.check("gram_bound", gram_excess(&lc.symbol), cfg.check_tol);
    if let Some(res) = r.attempt("unitarity", unitarity_residual(&l, cfg.trunc, allow_nonreduced, &tol)) {
        if cl.is_coisometric_lifting && cl.is_subisometric {
            r.check("unitarity", res, unitarity_bound(&l, buffer, cfg));
        }
        r.output_f64("unitarity_residual", res);
    }
    r.output("classification", to_value(&cl));
    r.output("symbol", symbol_value(&lc.symbol));
    r
}

pub fn ext_charfn(cfg: &RunConfig, echo: InputEcho, t: OperatorTuple) -> Report {
    let mut r = cfg.report("ext-charfn", vec![echo], json!({ "listing_zero": LISTING_ZERO }));
    let tol = cfg.tolerances();
    if !check_contraction(&mut r, "row_contraction", &t, cfg) {
        return r;
    }
    let Some(ext) = r.attempt("extended characteristic function", extended_char(&t, None, cfg.trunc, &tol)) else {
        return r;
    };
    r.check("frame", ext.frame.residual(&t), cfg.check_tol);
    r.check("consistency", ext.consistency, cfg.check_tol);
    if let Some(res) = r.attempt("case two splitting", case_two_splitting_residual(&ext, &tol)) {
        r.check("case_two_splitting", res, cfg.check_tol);
    }
    // θ̂_A d^i_Ω: generator maps applied to Ω placed in slot i
    let f = TruncatedFock::new(t.d(), cfg.trunc);
    let dim = t.dim();
    let om = &ext.frame.omega_vec;
    let mut listing = Vec::new();
    for slot in 0..t.d() {
        for (k, g) in ext.generators.iter().enumerate() {
            let v = g.columns(slot * dim, dim) * om;
            if v.norm() > LISTING_ZERO {
                listing.push(json!({ "slot": slot + 1, "word": f.word(k).to_string(), "vector": vector(&v) }));
            }
        }
    }
    r.output("omega", json!(ext.frame.omega.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()));
    r.output("omega_vector", vector(om));
    r.output("d_omega_basis", mat(&ext.qw));
    r.output("omega_coefficients", Value::Array(listing));
    r.output("symbol", symbol_value(&ext.symbol));
    r
}

pub fn constraint_set(name: &str, d: usize) -> ConstraintSet {
    match name {
        "commutators" => ConstraintSet::commutators(d),
        _ => ConstraintSet::empty(),
    }
}

pub fn constrained_charfn(
    cfg: &RunConfig,
    echo: InputEcho,
    blocks: Blocks,
    constraints: &str,
    allow_nonreduced: bool,
    buffer: usize,
) -> Report {
    let mut r = cfg.report(
        "constrained-charfn",
        vec![echo],
        json!({ "constraints": constraints, "allow_nonreduced": allow_nonreduced, "buffer": buffer }),
    );
    let tol = cfg.tolerances();
    let Some(l) = build_lifting(&mut r, blocks, cfg) else {
        return r;
    };
    let j = constraint_set(constraints, l.d());
    let Some(cc) = r.attempt("constrained characteristic function", constrained_char(&l, &j, cfg.trunc, true, allow_nonreduced, &tol)) else {
        return r;
    };
    r.check("constraints", cc.constraint_residual, tol.tol.max(1e-9));
    r.check("contractive", (op_norm(&cc.matrix) - 1.0).max(0.0), cfg.check_tol);
    let Some(cl) = r.attempt("classify", classify(&l, &tol)) else {
        return r;
    };
    if let Some(res) = r.attempt(
        "constrained unitarity",
        constrained_unitarity_residual(&l, &j, cfg.trunc, true, allow_nonreduced, &tol),
    ) {
        if cl.is_coisometric_lifting && cl.is_subisometric {
            r.check("constrained_unitarity", res, unitarity_bound(&l, buffer, cfg));
        }
        r.output_f64("constrained_unitarity_residual", res);
    }
    let f = TruncatedFock::new(l.d(), cfg.trunc);
    r.output("fock_level_dims", json!(level_dims(&f, &cc.fock_basis)));
    r.output("shape", json!([cc.matrix.nrows(), cc.matrix.ncols()]));
    r.output_f64("norm", op_norm(&cc.matrix));
    r.output("matrix", mat(&cc.matrix));
    r
}

pub fn equiv(cfg: &RunConfig, inputs: Vec<InputEcho>, theta: &MultiAnalyticSymbol, theta_p: &MultiAnalyticSymbol) -> Report {
    let mut r = cfg.report("equiv", inputs, json!({}));
    let same = theta.d == theta_p.d && theta.cod_dim == theta_p.cod_dim;
    if !r.check_flag("dimensions", same, "symbols must share d and the codomain") {
        return r;
    }
    let eq = equivalent(theta, theta_p, cfg.tol);
    r.check("equivalent", eq.residual, cfg.tol);
    r.output_f64("residual", eq.residual);
    r.output("equivalent", json!(eq.equivalent));
    if let Some(v) = &eq.v {
        r.output("v", mat(v));
    }
    r
}

pub fn compose_cmd(cfg: &RunConfig, inputs: Vec<InputEcho>, theta: &MultiAnalyticSymbol, eta: &MultiAnalyticSymbol) -> Report {
    let mut r = cfg.report("compose", inputs, json!({}));
    let fits = theta.d == eta.d && theta.dom_dim == eta.cod_dim;
    if !r.check_flag("dimensions", fits, "the first domain must be the second codomain") {
        return r;
    }
    let Some(prod) = r.attempt("compose", compose(theta, eta)) else {
        return r;
    };
    let n = prod.n;
    let side = fock_dim(prod.d, n) * theta.dom_dim.max(theta.cod_dim).max(eta.dom_dim);
    if side <= DENSE_CHECK_MAX {
        let res = op_norm(&(extend(&prod, n) - extend(theta, n) * extend(eta, n)));
        r.check("extension_product", res, cfg.check_tol * (1.0 + theta.norm() * eta.norm()));
    } else {
        r.warnings.push(format!("extension check skipped: dense side {side} exceeds {DENSE_CHECK_MAX}"));
    }
    r.output("symbol", symbol_value(&prod));
    r
}

pub fn model(cfg: &RunConfig, inputs: Vec<InputEcho>, c: OperatorTuple, theta: &MultiAnalyticSymbol) -> Report {
    let mut r = cfg.report("model", inputs, json!({}));
    let tol = cfg.tolerances();
    if !check_contraction(&mut r, "row_contraction", &c, cfg) {
        return r;
    }
    let Some(fm) = r.attempt("functional model", functional_model(&c, theta, cfg.trunc, &tol)) else {
        return r;
    };
    let k = fm.basis.ncols();
    r.check("basis_orthonormal", op_norm(&(fm.basis.adjoint() * &fm.basis - eye(k))), cfg.check_tol);
    check_contraction(&mut r, "model_row_contraction", &fm.lifting.total(), cfg);
    if let Some(lc) = r.attempt("model characteristic function", lifting_char(&fm.lifting, fm.valid_levels, true, &tol)) {
        let eq = equivalent(&theta.truncated(fm.valid_levels), &lc.symbol, cfg.tol);
        r.output_f64("roundtrip_residual", eq.residual);
    }
    r.output("valid_levels", json!(fm.valid_levels));
    r.output("dim_a", json!(fm.lifting.dim_a()));
    r.output("lifting", to_value(&LiftingFile::from_lifting(&fm.lifting)));
    r
}

pub fn classify_cmd(cfg: &RunConfig, echo: InputEcho, blocks: Blocks) -> Report {
    let mut r = cfg.report("classify", vec![echo], json!({}));
    let tol = cfg.tolerances();
    let Some(l) = build_lifting(&mut r, blocks, cfg) else {
        return r;
    };
    let Some((gamma, res)) = r.attempt("recover gamma", recover_gamma(&l.c, &l.a, &l.b, &tol)) else {
        return r;
    };
    r.check("gamma_recovery", res, cfg.check_tol);
    r.check("gamma_contraction", (op_norm(&gamma) - 1.0).max(0.0), cfg.check_tol);
    if let Some(cl) = r.attempt("classify", classify(&l, &tol)) {
        r.output("classification", to_value(&cl));
    }
    r.output_f64("gamma_norm", op_norm(&gamma));
    r.output("gamma", mat(&gamma));
    r
}

fn warn_superoperator(r: &mut Report, dim: usize) {
    if dim > SUPEROPERATOR_WARN_DIM {
        r.warnings.push(format!(
            "dimension {dim} exceeds {SUPEROPERATOR_WARN_DIM}: the dense superoperator has side {}",
            dim * dim
        ));
    }
}

fn fixed_residual(t: &OperatorTuple, xs: &[CMat]) -> f64 {
    let phi = CPMap::new(t);
    xs.iter()
        .map(|x| op_norm(&(phi.apply_once(x) - x)) / op_norm(x).max(1.0))
        .fold(0.0, f64::max)
}

pub fn fixpoints(cfg: &RunConfig, echo: InputEcho, t: OperatorTuple) -> Report {
    let mut r = cfg.report("fixpoints", vec![echo], json!({}));
    let tol = cfg.tolerances();
    if !check_contraction(&mut r, "row_contraction", &t, cfg) {
        return r;
    }
    warn_superoperator(&mut r, t.dim());
    let phi = CPMap::new(&t);
    let Some(fix) = r.attempt("fixed points", phi.fixed_points(tol.fix)) else {
        return r;
    };
    r.check("fixed", fixed_residual(&t, &fix), cfg.check_tol);
    if let Some(herm) = r.attempt("hermitian fixed points", phi.hermitian_fixed_points(tol.fix)) {
        r.output("hermitian_basis", Value::Array(herm.iter().map(mat).collect()));
    }
    r.output("dim", json!(fix.len()));
    r.output("ergodic", json!(fix.len() == 1));
    r.output("basis", Value::Array(fix.iter().map(mat).collect()));
    r
}

pub fn kappa_inv(cfg: &RunConfig, echo: InputEcho, blocks: Blocks) -> Report {
    let mut r = cfg.report("kappa-inv", vec![echo], json!({}));
    let tol = cfg.tolerances();
    let Some(l) = build_lifting(&mut r, blocks, cfg) else {
        return r;
    };
    warn_superoperator(&mut r, l.dim());
    let Some(fc) = r.attempt("fixed points of C", CPMap::new(&l.c).hermitian_fixed_points(tol.fix)) else {
        return r;
    };
    let Some(fe) = r.attempt("fixed points of E", CPMap::new(&l.total()).fixed_points(tol.fix)) else {
        return r;
    };
    let Some(cl) = r.attempt("classify", classify(&l, &tol)) else {
        return r;
    };
    if cl.is_coisometric_lifting && cl.is_subisometric {
        let agree = fe.len() == fc.len();
        r.check_flag("fixed_point_dims", agree, &format!("dim Fix(Φ_E) = {}, dim Fix(Φ_C) = {}", fe.len(), fc.len()));
    }
    // a random Hermitian fixed point of Φ_C, drawn with the run seed
    let mut rng = seeded(cfg.seed);
    let coeffs = gaussian(&mut rng, fc.len(), 1);
    let mut x = CMat::zeros(l.dim_c(), l.dim_c());
    for (k, f) in fc.iter().enumerate() {
        x += f * fockdil::C64::new(coeffs[(k, 0)].re, 0.0);
    }
    if let Some(y) = r.attempt("kappa inverse", kappa_inverse(&l, &x, &tol)) {
        let scale = 1.0 + op_norm(&x);
        r.check("kappa_roundtrip", op_norm(&(kappa(&y, l.dim_c()) - &x)) / scale, cfg.limit_tol);
        r.check("fixed_in_e", fixed_residual(&l.total(), std::slice::from_ref(&y)), cfg.limit_tol);
        r.output("x", mat(&x));
        r.output("kappa_inverse_x", mat(&y));
    }
    if let Some(triple) = r.attempt("ergodic lifting check", ergodic_lifting_check(&l, &tol)) {
        r.output("ergodic", to_value(&triple));
    }
    r.output("fix_c_dim", json!(fc.len()));
    r.output("fix_e_dim", json!(fe.len()));
    r
}

#[derive(Debug, Clone, Copy)]
pub struct SymmetricArgs {
    pub enabled: bool,
    pub window: TraceWindow,
    pub method: EstimateMethod,
    pub poisson_max_dim: usize,
}

impl SymmetricArgs {
    fn options(&self) -> Value {
        json!({
            "symmetric": self.enabled,
            "window": to_value(&self.window),
            "method": to_value(&self.method),
            "poisson_max_dim": self.poisson_max_dim,
        })
    }

    fn config(&self, n_max: usize) -> SymmetricConfig {
        SymmetricConfig {
            n_max,
            window: self.window,
            method: self.method,
            poisson_max_dim: self.poisson_max_dim,
        }
    }
}

fn rank_dstar(r: &mut Report, t: &OperatorTuple, cfg: &RunConfig) -> Option<usize> {
    r.attempt("defects", defects(t, &cfg.tolerances())).map(|d| d.defect_star.dim())
}

fn push_trace(r: &mut Report, key: &str, trace: InvariantTrace) {
    r.output(key, to_value(&trace));
    r.traces.push(trace);
}

pub fn curv(cfg: &RunConfig, echo: InputEcho, t: OperatorTuple, sym: SymmetricArgs) -> Report {
    let mut r = cfg.report("curv", vec![echo], sym.options());
    let tol = cfg.tolerances();
    if !check_contraction(&mut r, "row_contraction", &t, cfg) {
        return r;
    }
    let Some(rank) = rank_dstar(&mut r, &t, cfg) else {
        return r;
    };
    let Some(fc) = r.attempt("curvature", curvature_free(&t, cfg.trunc, &tol)) else {
        return r;
    };
    r.check("route_agreement", fc.route_gap, cfg.check_tol);
    let outside = fc
        .trace
        .sequence
        .iter()
        .map(|p| (-p.value).max(p.value - rank as f64).max(0.0))
        .fold(0.0, f64::max);
    r.check("curvature_range", outside, cfg.check_tol);
    r.output("rank_dstar", json!(rank));
    r.output("kernel_route", to_value(&fc.kernel_route));
    r.output("cp_route", to_value(&fc.cp_route));
    push_trace(&mut r, "curvature", fc.trace);
    if sym.enabled {
        if let Some(s) = r.attempt("symmetric curvature", curvature_sym(&t, &sym.config(cfg.trunc), &tol)) {
            push_trace(&mut r, "symmetric_power", s.power);
            push_trace(&mut r, "symmetric_poisson", s.poisson);
        }
    }
    r
}

pub fn euler(cfg: &RunConfig, echo: InputEcho, t: OperatorTuple, sym: SymmetricArgs) -> Report {
    let mut r = cfg.report("euler", vec![echo], sym.options());
    let tol = cfg.tolerances();
    if !check_contraction(&mut r, "row_contraction", &t, cfg) {
        return r;
    }
    let Some(rank) = rank_dstar(&mut r, &t, cfg) else {
        return r;
    };
    let Some(chi) = r.attempt("euler", euler_free(&t, cfg.trunc, &tol)) else {
        return r;
    };
    let monotone = chi.sequence.windows(2).all(|w| w[1].raw >= w[0].raw);
    let bounded = chi.sequence.iter().all(|p| p.raw <= rank as f64 * p.normalization);
    r.check_flag("rank_monotone", monotone, "");
    r.check_flag("rank_bounded", bounded, "rank ≤ rank D_* · normalization");
    r.output("rank_dstar", json!(rank));
    push_trace(&mut r, "euler", chi);
    if sym.enabled {
        if let Some(s) = r.attempt("symmetric euler", euler_sym(&t, &sym.config(cfg.trunc), &tol)) {
            push_trace(&mut r, "symmetric_power", s.power);
            push_trace(&mut r, "symmetric_poisson", s.poisson);
        }
    }
    r
}

pub fn curvature_identity(cfg: &RunConfig, echo: InputEcho, blocks: Blocks, gap_tol: f64) -> Report {
    let mut r = cfg.report("curvature-identity", vec![echo], json!({ "gap_tol": gap_tol }));
    let tol = cfg.tolerances();
    let Some(l) = build_lifting(&mut r, blocks, cfg) else {
        return r;
    };
    let Some(rep) = r.attempt("curvature identity", curvature_identity_check(&l, cfg.trunc, &tol)) else {
        return r;
    };
    r.check("identity_gap", rep.difference, gap_tol);
    // split counting against the dense extension on the levels that fit
    let theta = r.attempt("characteristic function", lifting_char(&l, cfg.trunc.saturating_sub(1), false, &tol));
    if let Some(lc) = theta {
        let split = split_count_traces(&symbol_level_norms(&lc.symbol), l.d());
        let side = lc.symbol.dom_dim.max(lc.symbol.cod_dim);
        let mut worst: f64 = 0.0;
        let mut levels = 0;
        for (k, s) in split.iter().enumerate() {
            if fock_dim(l.d(), k) * side > DENSE_CHECK_MAX || k > lc.symbol.n {
                break;
            }
            let dense = dense_symbol_trace(&lc.symbol.truncated(k), k);
            worst = worst.max((s - dense).abs() / (1.0 + dense.abs()));
            levels += 1;
        }
        r.check("split_counting", worst, cfg.check_tol);
        r.output("split_counting_levels", json!(levels));
    }
    r.output("rank_dc", json!(rep.rank_dc));
    r.output("level_norms", to_value(&rep.level_norms));
    r.output_f64("difference", rep.difference);
    push_trace(&mut r, "curvature", rep.curvature);
    push_trace(&mut r, "rhs", rep.rhs);
    r
}

pub fn constrain(cfg: &RunConfig, echo: InputEcho, t: OperatorTuple, constraints: &str, len: usize) -> Report {
    let mut r = cfg.report("constrain", vec![echo], json!({ "constraints": constraints, "len": len }));
    let tol = cfg.tolerances();
    if !check_contraction(&mut r, "row_contraction", &t, cfg) {
        return r;
    }
    let j = constraint_set(constraints, t.d());
    let f = TruncatedFock::new(t.d(), cfg.trunc);
    if let Some(q) = r.attempt("constrained Fock space", constrained_fock(&f, &j, tol.rank)) {
        r.output("fock_level_dims", json!(level_dims(&f, &q)));
    }
    if let Some(piece) = r.attempt("maximal constrained piece", maximal_constrained_piece(&t, &j, tol.rank.max(1e-8))) {
        r.output("piece_dim", json!(piece.dim()));
    }
    if let Some(cp) = r.attempt("constrained piece of the mid", constrained_piece_of_mid(&t, &j, cfg.trunc, &tol)) {
        r.check("piece_dilation", cp.dilation_residual(&t, len), cfg.check_tol);
        r.output("mid_piece_dim", json!(cp.basis.ncols()));
    }
    r
}

pub fn cocycle(cfg: &RunConfig, echo: InputEcho, t: OperatorTuple, k_max: usize, off_omega: bool) -> Report {
    let mut r = cfg.report("cocycle", vec![echo], json!({ "k_max": k_max, "off_omega": off_omega }));
    let tol = cfg.tolerances();
    if !check_contraction(&mut r, "row_contraction", &t, cfg) {
        return r;
    }
    let ring = if off_omega {
        let Some(frame) = r.attempt("eigen frame", eigen_frame(&t, None, &tol)) else {
            return r;
        };
        let Some((ring, _)) = r.attempt("restriction off Ω", restrict_off_omega(&t, &frame, &tol)) else {
            return r;
        };
        ring
    } else {
        t
    };
    let Some(pk) = r.attempt("poisson kernel", poisson_kernel(&ring, cfg.trunc, &tol)) else {
        return r;
    };
    let phi = CPMap::new(&ring);
    let mut rows = Vec::new();
    let mut excess: f64 = 0.0;
    let mut remainder_gap: f64 = 0.0;
    for k in 1..=k_max {
        let Some(cp) = r.attempt("cocycle product", cocycle_product(&ring, k, cfg.trunc, &tol)) else {
            return r;
        };
        let phik = op_norm(&phi.apply(&eye(ring.dim()), k as u64));
        let gap = op_norm(&(&cp.fock_part - &pk));
        excess = excess.max(gap - phik.sqrt());
        remainder_gap = remainder_gap.max((cp.remainder_norm - phik).abs());
        rows.push(json!({ "k": k, "gap": gap, "bound": phik.sqrt(), "remainder_norm": cp.remainder_norm }));
    }
    r.check("cocycle_bound", excess.max(0.0), cfg.check_tol);
    r.check("remainder_norm", remainder_gap, cfg.check_tol);
    r.output("dim", json!(ring.dim()));
    r.output("steps", Value::Array(rows));
    r
}

//! Observational-equivalence transforms of ψ tables.
//!
//! A transform is indexed by η = (1 − ψ8)/(1 − ψ8′). Fixing the category law
//! of every cell forces
//!
//! ```text
//! ψ1′ = ψ1                 ψ5′ = ψ5
//! ψ8′ = 1 − (1 − ψ8)/η     ψ7′ = 1 − (1 − ψ7)/η
//! ψ6′ = 1 − η + ηψ6        ψ4′ = ψ4ψ6/ψ6′
//! ψ3′ = ψ3ψ6′ / (ψ3(1 − η)(1 − ψ6) + ψ6)
//! ψ2′ = ψ2ψ3/ψ3′
//! ```
//!
//! The last line only defines a respondent-level ψ2′ when ξ = ψ3′/ψ3 does not
//! vary with the item. When ψ6 varies with both respondent and item no η ≠ 1
//! keeps ψ6′ inside the logit-additive family, so every non-trivial transform
//! needs θ·6 = 0 or δ·6 = 0.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::forward::{category_distribution, check_necessary_equalities, EqualityReport};
use crate::params::{
    build_psi_table, lift_table, link, logit, IrtParams, LinkedProcess, ModelDims, PsiTable,
    ADDITIVE_TOL,
};

/// Cells with ψ6 above `1 − PSI6_DEGENERATE` impose no upper bound on η.
pub const PSI6_DEGENERATE: f64 = 1e-9;

/// Allowed gap between ξψ3 and the η-formula value of ψ3′.
pub const XI_CONSISTENCY_TOL: f64 = 1e-12;

/// Tolerance for generated pairs: per-cell laws must agree this closely.
pub const PAIR_TOL: f64 = 1e-12;

/// Generated pairs must differ by at least this much in some ψ.
pub const MIN_PARAM_GAP: f64 = 1e-3;

pub const DEFAULT_ETA_MARGIN: f64 = 0.05;
pub const DEFAULT_RETRY_LIMIT: usize = 1000;

const BASE_LO: f64 = 0.15;
const BASE_HI: f64 = 0.85;

/// ψ2′ = ψ2/ξ, either one ratio for all respondents or one per respondent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Xi {
    Global(f64),
    PerRespondent(Vec<f64>),
}

impl Xi {
    pub fn for_respondent(&self, t: usize) -> f64 {
        match self {
            Xi::Global(x) => *x,
            Xi::PerRespondent(v) => v[t],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaXiTransform {
    pub eta: f64,
    pub xi: Xi,
}

impl EtaXiTransform {
    pub fn identity() -> Self {
        EtaXiTransform {
            eta: 1.0,
            xi: Xi::Global(1.0),
        }
    }
}

/// Which of θ·6 and δ·6 vanish.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseLabel {
    ThetaSixZero,
    DeltaSixZero,
    BothZero,
    Neither,
}

impl CaseLabel {
    pub fn cli_name(self) -> &'static str {
        match self {
            CaseLabel::ThetaSixZero => "theta6-zero",
            CaseLabel::DeltaSixZero => "delta6-zero",
            CaseLabel::BothZero => "both-zero",
            CaseLabel::Neither => "neither",
        }
    }

    pub fn from_cli_name(s: &str) -> Option<Self> {
        [
            CaseLabel::ThetaSixZero,
            CaseLabel::DeltaSixZero,
            CaseLabel::BothZero,
            CaseLabel::Neither,
        ]
        .into_iter()
        .find(|c| c.cli_name() == s)
    }
}

/// Open interval (lo, hi) of η values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaRange {
    pub lo: f64,
    pub hi: f64,
}

impl EtaRange {
    pub fn is_empty(&self) -> bool {
        !(self.lo < self.hi)
    }

    pub fn contains(&self, eta: f64) -> bool {
        eta > self.lo && eta < self.hi
    }

    /// The part of the range with η < 1 − margin.
    pub fn below(&self, margin: f64) -> EtaRange {
        EtaRange {
            lo: self.lo,
            hi: self.hi.min(1.0 - margin),
        }
    }

    /// The part of the range with η > 1 + margin.
    pub fn above(&self, margin: f64) -> EtaRange {
        EtaRange {
            lo: self.lo.max(1.0 + margin),
            hi: self.hi,
        }
    }
}

fn lower_eta_bound(psi7: &[f64], psi8: f64) -> f64 {
    psi7.iter().map(|p| 1.0 - p).fold(1.0 - psi8, f64::max)
}

/// Largest η keeping ψ6′, ψ4′ and the ψ2 term inside (0,1) for one cell,
/// given the binding factor `m` of the ψ4/ψ2 constraints.
fn cell_upper_bound(psi6: f64, m: f64) -> f64 {
    if psi6 > 1.0 - PSI6_DEGENERATE {
        f64::INFINITY
    } else {
        (1.0 - psi6 * m) / (1.0 - psi6)
    }
}

/// Admissible η for a table, cell by cell.
///
/// `lo = max{1 − ψ8, max_k (1 − ψ7k)}`,
/// `hi = min_{t,k} [1 − ψ6 max{ψ4, ψ2(1 − ψ3)/(1 − ψ2ψ3)}] / (1 − ψ6)`.
/// Since `lo < 1 ≤ hi` the range always contains η = 1.
pub fn eta_range(table: &PsiTable) -> EtaRange {
    let (t_n, k_n) = table.shape();
    let mut hi = f64::INFINITY;
    for t in 0..t_n {
        let p2 = table.psi2[t];
        for k in 0..k_n {
            let p3 = table.psi3[(t, k)];
            let m = table.psi4[(t, k)].max(p2 * (1.0 - p3) / (1.0 - p2 * p3));
            hi = hi.min(cell_upper_bound(table.psi6[(t, k)], m));
        }
    }
    EtaRange {
        lo: lower_eta_bound(&table.psi7, table.psi8),
        hi,
    }
}

/// How a t×k matrix varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Dependence {
    Global,
    ItemOnly,
    RespondentOnly,
    Full,
}

pub fn dependence(m: &DMatrix<f64>, tol: f64) -> Dependence {
    let (t_n, k_n) = m.shape();
    let item_only = (0..k_n).all(|k| (0..t_n).all(|t| (m[(t, k)] - m[(0, k)]).abs() <= tol));
    let resp_only = (0..t_n).all(|t| (0..k_n).all(|k| (m[(t, k)] - m[(t, 0)]).abs() <= tol));
    match (item_only, resp_only) {
        (true, true) => Dependence::Global,
        (true, false) => Dependence::ItemOnly,
        (false, true) => Dependence::RespondentOnly,
        (false, false) => Dependence::Full,
    }
}

fn generator_upper_bound(psi2: &[f64], psi4: &DMatrix<f64>, psi6: &DMatrix<f64>) -> f64 {
    let mut hi = f64::INFINITY;
    for (t, &p2) in psi2.iter().enumerate() {
        for k in 0..psi6.ncols() {
            hi = hi.min(cell_upper_bound(psi6[(t, k)], psi4[(t, k)].max(p2)));
        }
    }
    hi
}

/// η range used when ψ3 is still to be solved for: the ψ2 term is bounded
/// with ψ3 = 1, i.e. `hi = min_{t,k} [1 − ψ6 max{ψ4, ψ2}] / (1 − ψ6)`.
///
/// Requires ψ3, ψ4 and ψ6 to share a respondent-free or item-free structure.
pub fn generator_eta_range(table: &PsiTable) -> Result<EtaRange> {
    const STRUCTURE_TOL: f64 = 1e-12;
    let deps = [&table.psi3, &table.psi4, &table.psi6].map(|m| dependence(m, STRUCTURE_TOL));
    let item_free = deps
        .iter()
        .all(|d| matches!(d, Dependence::Global | Dependence::RespondentOnly));
    let resp_free = deps
        .iter()
        .all(|d| matches!(d, Dependence::Global | Dependence::ItemOnly));
    if !item_free && !resp_free {
        return Err(Error::InvalidTransform(format!(
            "generator range needs psi3/psi4/psi6 varying with the item only or the respondent only, found {deps:?}"
        )));
    }
    Ok(EtaRange {
        lo: lower_eta_bound(&table.psi7, table.psi8),
        hi: generator_upper_bound(&table.psi2, &table.psi4, &table.psi6),
    })
}

fn xi_bound(eta: f64, psi6: f64) -> f64 {
    (1.0 - eta + eta * psi6) / psi6
}

fn xi_interval(eta: f64, psi6: impl Iterator<Item = f64>) -> Result<(f64, f64)> {
    if eta == 1.0 {
        return Err(Error::TrivialTransform);
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidTransform(format!("eta = {eta} must be positive")));
    }
    let bounds = psi6.map(|p| xi_bound(eta, p));
    Ok(if eta < 1.0 {
        (1.0, bounds.fold(f64::INFINITY, f64::min))
    } else {
        (bounds.fold(f64::NEG_INFINITY, f64::max), 1.0)
    })
}

/// ξ values that keep the solved ψ3 inside (0,1) for every cell:
/// `(1, min (1 − η + ηψ6)/ψ6)` for η < 1 and the mirrored
/// `(max (1 − η + ηψ6)/ψ6, 1)` for η > 1.
pub fn xi_range(eta: f64, table: &PsiTable) -> Result<(f64, f64)> {
    xi_interval(eta, table.psi6.iter().copied())
}

/// ψ3 that makes ψ3′/ψ3 equal ξ: `[(1 − η + ηψ6)/ξ − ψ6] / [(1 − η)(1 − ψ6)]`.
pub fn solve_psi3(eta: f64, xi: f64, psi6: f64) -> f64 {
    ((1.0 - eta + eta * psi6) / xi - psi6) / ((1.0 - eta) * (1.0 - psi6))
}

/// ξ implied by one cell: ψ3′/ψ3 with ψ3′ from the η formula.
pub fn cell_xi(eta: f64, psi3: f64, psi6: f64) -> f64 {
    (1.0 - eta + eta * psi6) / (psi6 + psi3 * (1.0 - eta) * (1.0 - psi6))
}

/// Per-respondent ξ for a given η; fails when ξ varies across items.
pub fn implied_xi(table: &PsiTable, eta: f64) -> Result<Vec<f64>> {
    let (t_n, k_n) = table.shape();
    let mut out = Vec::with_capacity(t_n);
    let mut bad = Vec::new();
    let mut max_gap: f64 = 0.0;
    for t in 0..t_n {
        let xi0 = cell_xi(eta, table.psi3[(t, 0)], table.psi6[(t, 0)]);
        for k in 1..k_n {
            let p3 = table.psi3[(t, k)];
            let gap = (cell_xi(eta, p3, table.psi6[(t, k)]) - xi0).abs() * p3;
            if gap > XI_CONSISTENCY_TOL {
                bad.push((t, k));
                max_gap = max_gap.max(gap);
            }
        }
        out.push(xi0);
    }
    if bad.is_empty() {
        Ok(out)
    } else {
        Err(Error::XiInconsistent { cells: bad, max_gap })
    }
}

fn range_check(entry: impl FnOnce() -> String, value: f64, bound: impl FnOnce() -> String) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::RangeViolation {
            entry: entry(),
            value,
            bound: bound(),
        })
    }
}

/// Maps a table to its η/ξ image.
///
/// All transformed entries are range-checked before ξ consistency, so an η
/// outside [`eta_range`] always reports a [`Error::RangeViolation`].
pub fn apply_transform(table: &PsiTable, tr: &EtaXiTransform) -> Result<PsiTable> {
    let eta = tr.eta;
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidTransform(format!("eta = {eta} must be positive and finite")));
    }
    let (t_n, k_n) = table.shape();
    let unit_xi = match &tr.xi {
        Xi::Global(x) => *x == 1.0,
        Xi::PerRespondent(v) => v.len() == t_n && v.iter().all(|&x| x == 1.0),
    };
    if eta == 1.0 && unit_xi {
        return Ok(table.clone());
    }
    if let Xi::PerRespondent(v) = &tr.xi {
        if v.len() != t_n {
            return Err(Error::mismatch("xi per respondent", t_n, v.len()));
        }
    }
    for t in 0..t_n {
        let xi = tr.xi.for_respondent(t);
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(Error::InvalidTransform(format!("xi[t={t}] = {xi} must be positive")));
        }
    }

    let squeeze = |p: f64| 1.0 - (1.0 - p) / eta;
    let psi8 = squeeze(table.psi8);
    range_check(|| "psi8".into(), psi8, || format!("eta > 1 - psi8 = {}", 1.0 - table.psi8))?;
    let psi7: Vec<f64> = table.psi7.iter().map(|&p| squeeze(p)).collect();
    for (k, (&p, &p0)) in psi7.iter().zip(&table.psi7).enumerate() {
        range_check(|| format!("psi7[k={k}]"), p, || format!("eta > 1 - psi7 = {}", 1.0 - p0))?;
    }

    let mut psi3 = table.psi3.clone();
    let mut psi4 = table.psi4.clone();
    let mut psi6 = table.psi6.clone();
    for t in 0..t_n {
        let p2 = table.psi2[t];
        for k in 0..k_n {
            let (p3, p4, p6) = (table.psi3[(t, k)], table.psi4[(t, k)], table.psi6[(t, k)]);
            let q6 = 1.0 - eta + eta * p6;
            range_check(
                || format!("psi6[t={t},k={k}]"),
                q6,
                || format!("0 < eta < 1/(1 - psi6) = {}", 1.0 / (1.0 - p6)),
            )?;
            let q4 = p4 * p6 / q6;
            range_check(
                || format!("psi4[t={t},k={k}]"),
                q4,
                || format!("eta < (1 - psi4 psi6)/(1 - psi6) = {}", (1.0 - p4 * p6) / (1.0 - p6)),
            )?;
            let q3 = p3 * q6 / (p3 * (1.0 - eta) * (1.0 - p6) + p6);
            range_check(|| format!("psi3[t={t},k={k}]"), q3, || "always inside for admissible psi6".into())?;
            let q2 = p2 * p3 / q3;
            range_check(
                || format!("psi2[t={t}] via cell k={k}"),
                q2,
                || {
                    let m = p2 * (1.0 - p3) / (1.0 - p2 * p3);
                    format!("eta < (1 - psi6 m)/(1 - psi6) = {} with m = {m}", cell_upper_bound(p6, m))
                },
            )?;
            psi3[(t, k)] = q3;
            psi4[(t, k)] = q4;
            psi6[(t, k)] = q6;
        }
    }

    let mut bad = Vec::new();
    let mut max_gap: f64 = 0.0;
    for t in 0..t_n {
        let xi = tr.xi.for_respondent(t);
        for k in 0..k_n {
            let gap = (xi * table.psi3[(t, k)] - psi3[(t, k)]).abs();
            if !(gap <= XI_CONSISTENCY_TOL) {
                bad.push((t, k));
                max_gap = max_gap.max(gap);
            }
        }
    }
    if !bad.is_empty() {
        return Err(Error::XiInconsistent { cells: bad, max_gap });
    }

    let mut psi2 = Vec::with_capacity(t_n);
    for t in 0..t_n {
        let q = table.psi2[t] / tr.xi.for_respondent(t);
        range_check(|| format!("psi2[t={t}]"), q, || "xi > psi2".into())?;
        psi2.push(q);
    }

    Ok(PsiTable {
        psi1: table.psi1.clone(),
        psi2,
        psi3,
        psi4,
        psi5: table.psi5.clone(),
        psi6,
        psi7,
        psi8,
    })
}

/// Case of a canonical parameter vector, judged on θ·6 and δ·6 at `tol`.
pub fn classify_case(params: &IrtParams, tol: f64) -> Result<CaseLabel> {
    params.ensure_canonical()?;
    let phon = LinkedProcess::Phon.index();
    let amax = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let theta_zero = amax(&params.theta[phon]) <= tol;
    let delta_zero = amax(&params.delta[phon]) <= tol;
    Ok(match (theta_zero, delta_zero) {
        (true, true) => CaseLabel::BothZero,
        (true, false) => CaseLabel::ThetaSixZero,
        (false, true) => CaseLabel::DeltaSixZero,
        (false, false) => CaseLabel::Neither,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairVerification {
    pub max_dist_distribution: f64,
    pub max_dist_params: f64,
    pub pass: bool,
}

/// Largest per-cell L∞ distance between category laws, plus the largest ψ
/// difference. Passes iff the law distance is at most `tol`.
pub fn verify_pair(a: &PsiTable, b: &PsiTable, tol: f64) -> Result<PairVerification> {
    verify_pair_with(a, b, tol, Execution::default())
}

pub fn verify_pair_with(a: &PsiTable, b: &PsiTable, tol: f64, exec: Execution) -> Result<PairVerification> {
    let max_dist_params = a.max_abs_diff(b)?;
    let k_n = a.n_items();
    let dists = exec.map_indexed(a.n_respondents() * k_n, |i| {
        let (t, k) = (i / k_n, i % k_n);
        let da = category_distribution(&a.cell(t, k)).expect("table entries lie in (0,1)");
        let db = category_distribution(&b.cell(t, k)).expect("table entries lie in (0,1)");
        da.max_abs_diff(&db)
    });
    let max_dist_distribution = dists.into_iter().fold(0.0, f64::max);
    Ok(PairVerification {
        max_dist_distribution,
        max_dist_params,
        pass: max_dist_distribution <= tol,
    })
}

/// Side of η = 1 the generator draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EtaBranch {
    Below,
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorConfig {
    pub eta_margin: f64,
    pub branch: EtaBranch,
    pub retry_limit: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            eta_margin: DEFAULT_ETA_MARGIN,
            branch: EtaBranch::Below,
            retry_limit: DEFAULT_RETRY_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalentPair {
    pub case: CaseLabel,
    pub omega: IrtParams,
    pub omega_table: PsiTable,
    pub omega_prime_table: PsiTable,
    pub omega_prime: Option<IrtParams>,
    pub transform: EtaXiTransform,
    pub verification: PairVerification,
    pub equalities: EqualityReport,
}

pub fn generate_nonidentifiable(dims: ModelDims, case: CaseLabel, seed: u64, eta_margin: f64) -> Result<EquivalentPair> {
    generate_with(
        dims,
        case,
        seed,
        &GeneratorConfig {
            eta_margin,
            ..GeneratorConfig::default()
        },
    )
}

/// Builds a parameter vector together with an observationally equivalent
/// partner.
///
/// Attempt `a` draws from the ChaCha stream `(seed, a)`, so the output
/// depends only on the seed and configuration.
pub fn generate_with(dims: ModelDims, case: CaseLabel, seed: u64, cfg: &GeneratorConfig) -> Result<EquivalentPair> {
    if case == CaseLabel::Neither {
        return Err(Error::NeitherCase);
    }
    if !(cfg.eta_margin >= 0.0 && cfg.eta_margin < 1.0) {
        return Err(Error::InvalidTransform(format!("eta margin {} must lie in [0,1)", cfg.eta_margin)));
    }
    let mut last_reason = String::from("retry limit is zero");
    for attempt in 0..cfg.retry_limit {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(attempt as u64);
        match draw_candidate(dims, case, cfg, &mut rng) {
            Ok((table, transform)) => return finish_pair(case, table, transform),
            Err(reason) => last_reason = reason,
        }
    }
    Err(Error::GenerationFailed {
        attempts: cfg.retry_limit,
        reason: last_reason,
    })
}

fn open_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> Option<f64> {
    if !(lo < hi) || !hi.is_finite() || !lo.is_finite() {
        return None;
    }
    for _ in 0..64 {
        let x = rng.random_range(lo..hi);
        if x > lo && x < hi {
            return Some(x);
        }
    }
    None
}

fn base<R: Rng>(rng: &mut R) -> f64 {
    rng.random_range(BASE_LO..BASE_HI)
}

/// One draw of ω and its transform; `Err` carries the reason for a retry.
fn draw_candidate<R: Rng>(
    dims: ModelDims,
    case: CaseLabel,
    cfg: &GeneratorConfig,
    rng: &mut R,
) -> std::result::Result<(PsiTable, EtaXiTransform), String> {
    let (t_n, k_n) = (dims.t, dims.k);
    let psi8 = base(rng);
    let psi7: Vec<f64> = (0..k_n).map(|_| base(rng)).collect();
    let psi2: Vec<f64> = (0..t_n).map(|_| base(rng)).collect();

    // ψ1 and ψ5 vary with both indices through the IRT link
    let mut irt = || {
        let th: Vec<f64> = (0..t_n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let de: Vec<f64> = (0..k_n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let be = logit(base(rng));
        DMatrix::from_fn(t_n, k_n, |t, k| link(th[t], de[k], be))
    };
    let psi1 = irt();
    let psi5 = irt();

    let (psi4, psi6, psi3_resp) = match case {
        CaseLabel::ThetaSixZero => {
            let p4: Vec<f64> = (0..k_n).map(|_| base(rng)).collect();
            let p6: Vec<f64> = (0..k_n).map(|_| base(rng)).collect();
            (
                DMatrix::from_fn(t_n, k_n, |_, k| p4[k]),
                DMatrix::from_fn(t_n, k_n, |_, k| p6[k]),
                None,
            )
        }
        CaseLabel::DeltaSixZero => {
            let p4: Vec<f64> = (0..t_n).map(|_| base(rng)).collect();
            let p6: Vec<f64> = (0..t_n).map(|_| base(rng)).collect();
            let p3: Vec<f64> = (0..t_n).map(|_| base(rng)).collect();
            (
                DMatrix::from_fn(t_n, k_n, |t, _| p4[t]),
                DMatrix::from_fn(t_n, k_n, |t, _| p6[t]),
                Some(p3),
            )
        }
        CaseLabel::BothZero => {
            let (p4, p6) = (base(rng), base(rng));
            (DMatrix::from_element(t_n, k_n, p4), DMatrix::from_element(t_n, k_n, p6), None)
        }
        CaseLabel::Neither => unreachable!("rejected by caller"),
    };

    let lo = lower_eta_bound(&psi7, psi8);
    let pick_eta = |rng: &mut R, hi: f64| {
        let range = EtaRange { lo, hi };
        let window = match cfg.branch {
            EtaBranch::Below => range.below(cfg.eta_margin),
            EtaBranch::Above => range.above(cfg.eta_margin),
        };
        open_uniform(rng, window.lo, window.hi)
            .ok_or_else(|| format!("eta window ({}, {}) is empty", window.lo, window.hi))
    };

    match psi3_resp {
        None => {
            let eta = pick_eta(rng, generator_upper_bound(&psi2, &psi4, &psi6))?;
            let (xlo, xhi) = xi_interval(eta, psi6.iter().copied()).map_err(|e| e.to_string())?;
            let xi = open_uniform(rng, xlo, xhi).ok_or_else(|| format!("xi window ({xlo}, {xhi}) is empty"))?;
            let psi3 = psi6.map(|p6| solve_psi3(eta, xi, p6));
            if let Some(bad) = psi3.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
                return Err(format!("solved psi3 = {bad} outside (0,1)"));
            }
            let table = PsiTable::new(psi1, psi2, psi3, psi4, psi5, psi6, psi7, psi8).map_err(|e| e.to_string())?;
            Ok((
                table,
                EtaXiTransform {
                    eta,
                    xi: Xi::Global(xi),
                },
            ))
        }
        Some(p3) => {
            let psi3 = DMatrix::from_fn(t_n, k_n, |t, _| p3[t]);
            let table = PsiTable::new(psi1, psi2, psi3, psi4, psi5, psi6, psi7, psi8).map_err(|e| e.to_string())?;
            let eta = pick_eta(rng, eta_range(&table).hi)?;
            let xi = implied_xi(&table, eta).map_err(|e| e.to_string())?;
            Ok((
                table,
                EtaXiTransform {
                    eta,
                    xi: Xi::PerRespondent(xi),
                },
            ))
        }
    }
}

fn finish_pair(case: CaseLabel, drawn: PsiTable, transform: EtaXiTransform) -> Result<EquivalentPair> {
    let internal = |what: &str, detail: String| Error::InternalConsistency(format!("{what}: {detail}"));

    let omega = lift_table(&drawn, ADDITIVE_TOL)
        .map_err(|f| internal("omega lift", format!("{} residual {:e}", f.process, f.max_residual)))?;
    let omega_table = build_psi_table(&omega);
    let omega_prime_table =
        apply_transform(&omega_table, &transform).map_err(|e| internal("transform", e.to_string()))?;

    let verification = verify_pair(&omega_table, &omega_prime_table, PAIR_TOL)?;
    if !verification.pass {
        return Err(internal(
            "distribution equality",
            format!("max distance {:e}", verification.max_dist_distribution),
        ));
    }
    if !(verification.max_dist_params >= MIN_PARAM_GAP) {
        return Err(internal(
            "pair distinctness",
            format!("max psi difference {:e}", verification.max_dist_params),
        ));
    }
    let equalities = check_necessary_equalities(&omega_table, &omega_prime_table, PAIR_TOL)?;
    if !equalities.pass {
        return Err(internal("necessary relations", format!("{:?}", equalities.failing())));
    }
    let omega_prime = lift_table(&omega_prime_table, ADDITIVE_TOL)
        .map_err(|f| internal("omega' lift", format!("{} residual {:e}", f.process, f.max_residual)))?;

    Ok(EquivalentPair {
        case,
        omega,
        omega_table,
        omega_prime_table,
        omega_prime: Some(omega_prime),
        transform,
        verification,
        equalities,
    })
}

/// Outcome of searching a table for an η ≠ 1 with item-constant ξ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformSearch {
    /// Every η keeps ξ constant across items.
    Continuum,
    /// Exactly one η ≠ 1 does.
    Isolated(f64),
    /// Only the identity does.
    None,
}

/// Finds the η ≠ 1 for which ψ3′/ψ3 is item-constant for every respondent.
///
/// Writing ξ_tk(η) = (1 − aη)/(c − bη) with a = 1 − ψ6, b = ψ3(1 − ψ6),
/// c = ψ6 + b, equality of two cells of a respondent is a quadratic in η with
/// one root at η = 1; the other root is the only candidate from that pair.
pub fn search_transform(table: &PsiTable) -> TransformSearch {
    const DEGENERATE: f64 = 1e-12;
    const AGREE: f64 = 1e-8;
    let (t_n, k_n) = table.shape();
    let coef = |t: usize, k: usize| {
        let a = 1.0 - table.psi6[(t, k)];
        let b = table.psi3[(t, k)] * a;
        (a, b, table.psi6[(t, k)] + b)
    };
    let mut candidate: Option<f64> = None;
    for t in 0..t_n {
        let (a0, b0, c0) = coef(t, 0);
        for k in 1..k_n {
            let (a1, b1, c1) = coef(t, k);
            let quad = a0 * b1 - a1 * b0;
            let lin = b0 - b1 + a1 * c0 - a0 * c1;
            let cst = c1 - c0;
            let scale = quad.abs().max(lin.abs()).max(cst.abs());
            if scale <= DEGENERATE {
                continue;
            }
            if quad.abs() <= DEGENERATE {
                // linear with root 1 only
                return TransformSearch::None;
            }
            let root = cst / quad;
            match candidate {
                None => candidate = Some(root),
                Some(c) if (c - root).abs() <= AGREE * c.abs().max(1.0) => {}
                Some(_) => return TransformSearch::None,
            }
        }
    }
    match candidate {
        None => TransformSearch::Continuum,
        Some(eta) if eta > 0.0 && (eta - 1.0).abs() > AGREE => TransformSearch::Isolated(eta),
        Some(_) => TransformSearch::None,
    }
}

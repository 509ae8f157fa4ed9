//! Numerical identifiability diagnostics.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::category::{CategoryDistribution, ResponseCategory};
use crate::equivalence::{
    apply_transform, classify_case, eta_range, implied_xi, search_transform, verify_pair, xi_range, CaseLabel,
    EtaRange, EtaXiTransform, TransformSearch, Xi, DEFAULT_ETA_MARGIN, PAIR_TOL,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::forward::category_distribution;
use crate::params::{
    build_psi_table, from_canonical_coords, lift_table, param_count, to_canonical_coords, IrtParams,
    LinkedProcess, ModelDims, PsiTable, ADDITIVE_TOL,
};

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_REL_CUTOFF: f64 = 1e-7;
pub const FIM_MIN_PROB: f64 = 1e-12;
pub const LOGLIK_MIN_PROB: f64 = 1e-300;

/// Probability rows per cell in the Jacobian; NA is implied by normalization.
pub const ROWS_PER_CELL: usize = 7;

/// Central-difference Jacobian of the map canonical coordinates → stacked
/// category probabilities (t-major cells, categories C..AN).
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianMatrix {
    pub matrix: DMatrix<f64>,
    pub step: f64,
    pub point: Vec<f64>,
    pub dims: ModelDims,
}

impl JacobianMatrix {
    pub fn row(dims: ModelDims, t: usize, k: usize, category: ResponseCategory) -> usize {
        debug_assert!(category != ResponseCategory::NA);
        (t * dims.k + k) * ROWS_PER_CELL + category.index()
    }
}

fn check_step(step: f64) -> Result<()> {
    if (1e-8..=1e-3).contains(&step) {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "finite-difference step".into(),
            value: step,
            interval: "[1e-8,1e-3]",
        })
    }
}

fn table_distributions(table: &PsiTable) -> Vec<CategoryDistribution> {
    let k_n = table.n_items();
    (0..table.n_respondents() * k_n)
        .map(|i| category_distribution(&table.cell(i / k_n, i % k_n)).expect("link output lies in [0,1]"))
        .collect()
}

fn stacked(params: &IrtParams) -> Vec<f64> {
    table_distributions(&build_psi_table(params))
        .iter()
        .flat_map(|d| d.0[..ROWS_PER_CELL].to_vec())
        .collect()
}

fn stacked_at(coords: &[f64], dims: ModelDims) -> Vec<f64> {
    stacked(&from_canonical_coords(coords, dims).expect("coordinate length fixed by dims"))
}

fn central_column(f: impl Fn(f64) -> Vec<f64>, step: f64) -> Vec<f64> {
    let plus = f(step);
    let minus = f(-step);
    plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * step)).collect()
}

pub fn jacobian(params: &IrtParams, step: f64) -> Result<JacobianMatrix> {
    jacobian_with(params, step, Execution::default())
}

/// Columns are evaluated independently, so both execution modes give
/// bit-identical matrices.
pub fn jacobian_with(params: &IrtParams, step: f64, exec: Execution) -> Result<JacobianMatrix> {
    check_step(step)?;
    let coords = to_canonical_coords(params)?;
    let dims = coords.dims;
    let x = coords.values;
    let cols = exec.map_indexed(x.len(), |c| {
        central_column(
            |h| {
                let mut y = x.clone();
                y[c] += h;
                stacked_at(&y, dims)
            },
            step,
        )
    });
    let rows = dims.cells() * ROWS_PER_CELL;
    let matrix = DMatrix::from_fn(rows, cols.len(), |r, c| cols[c][r]);
    Ok(JacobianMatrix {
        matrix,
        step,
        point: x,
        dims,
    })
}

/// Jacobian with one extra column: the derivative along a common shift of
/// every θ of process `s`, the direction removed by canonicalization.
pub fn jacobian_with_gauge_column(params: &IrtParams, step: f64, s: LinkedProcess) -> Result<JacobianMatrix> {
    let base = jacobian(params, step)?;
    let col = central_column(
        |h| {
            let mut p = params.clone();
            p.theta[s.index()].iter_mut().for_each(|v| *v += h);
            stacked(&p)
        },
        step,
    );
    let n = base.matrix.ncols();
    let mut matrix = base.matrix.insert_column(n, 0.0);
    matrix.set_column(n, &DVector::from_vec(col));
    Ok(JacobianMatrix { matrix, ..base })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankReport {
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub rel_cutoff: f64,
    pub cutoff: f64,
    pub t: usize,
    pub k: usize,
    pub param_count: usize,
    pub deficiency: usize,
}

/// Singular values in descending order and the count at or above
/// `rel_cutoff · σ_max` (zero for a zero matrix).
pub fn spectrum_rank(m: &DMatrix<f64>, rel_cutoff: f64) -> (Vec<f64>, usize, f64) {
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let smax = sv.first().copied().unwrap_or(0.0);
    let cutoff = rel_cutoff * smax;
    let rank = sv.iter().filter(|&&s| s > 0.0 && s >= cutoff).count();
    (sv, rank, cutoff)
}

pub fn numerical_rank(j: &JacobianMatrix, rel_cutoff: f64) -> RankReport {
    let (singular_values, rank, cutoff) = spectrum_rank(&j.matrix, rel_cutoff);
    let cols = j.matrix.ncols();
    RankReport {
        singular_values,
        rank,
        rel_cutoff,
        cutoff,
        t: j.dims.t,
        k: j.dims.k,
        param_count: cols,
        deficiency: cols - rank,
    }
}

/// Jacobian rows for all eight categories, each cell scaled by p^{-1/2}.
/// Its Gram matrix is the Fisher information.
fn whitened_jacobian(params: &IrtParams, step: f64) -> Result<DMatrix<f64>> {
    let j = jacobian(params, step)?;
    let dists = table_distributions(&build_psi_table(params));
    let dims = j.dims;
    let cols = j.matrix.ncols();
    let mut w = DMatrix::zeros(dims.cells() * 8, cols);
    for (cell, d) in dists.iter().enumerate() {
        for (c, &p) in d.0.iter().enumerate() {
            if !(p >= FIM_MIN_PROB) {
                return Err(Error::ProbabilityUnderflow {
                    t: cell / dims.k,
                    k: cell % dims.k,
                    category: ResponseCategory::ALL[c].label(),
                    value: p,
                    floor: FIM_MIN_PROB,
                });
            }
        }
        let scale = d.0.map(|p| p.sqrt().recip());
        for col in 0..cols {
            let mut last = 0.0;
            for c in 0..ROWS_PER_CELL {
                let v = j.matrix[(cell * ROWS_PER_CELL + c, col)];
                last -= v;
                w[(cell * 8 + c, col)] = v * scale[c];
            }
            w[(cell * 8 + 7, col)] = last * scale[7];
        }
    }
    Ok(w)
}

/// Σ_cells Jcᵀ diag(1/p) Jc over all eight categories, the eighth row being
/// minus the sum of the other seven.
pub fn fisher_information(params: &IrtParams) -> Result<DMatrix<f64>> {
    fisher_information_with_step(params, DEFAULT_STEP)
}

pub fn fisher_information_with_step(params: &IrtParams, step: f64) -> Result<DMatrix<f64>> {
    let w = whitened_jacobian(params, step)?;
    Ok(w.transpose() * &w)
}

/// Rank of the Fisher information under the Jacobian cutoff policy, applied
/// to the square roots of its eigenvalues (the singular values of the
/// whitened Jacobian).
pub fn fisher_rank(params: &IrtParams, step: f64, rel_cutoff: f64) -> Result<RankReport> {
    let w = whitened_jacobian(params, step)?;
    let dims = params.dims()?;
    let (singular_values, rank, cutoff) = spectrum_rank(&w, rel_cutoff);
    Ok(RankReport {
        singular_values,
        rank,
        rel_cutoff,
        cutoff,
        t: dims.t,
        k: dims.k,
        param_count: w.ncols(),
        deficiency: w.ncols() - rank,
    })
}

/// Category counts per (t,k) cell, t-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseCounts {
    pub t: usize,
    pub k: usize,
    pub n_per_cell: u64,
    pub counts: Vec<[u64; 8]>,
}

impl ResponseCounts {
    pub fn new(t: usize, k: usize, n_per_cell: u64, counts: Vec<[u64; 8]>) -> Result<Self> {
        if counts.len() != t * k {
            return Err(Error::mismatch("count rows", t * k, counts.len()));
        }
        if let Some((i, c)) = counts.iter().enumerate().find(|(_, c)| c.iter().sum::<u64>() != n_per_cell) {
            return Err(Error::mismatch(
                &format!("count total of cell (t={}, k={})", i / k, i % k),
                n_per_cell,
                c.iter().sum::<u64>(),
            ));
        }
        Ok(ResponseCounts { t, k, n_per_cell, counts })
    }

    pub fn cell(&self, t: usize, k: usize) -> &[u64; 8] {
        &self.counts[t * self.k + k]
    }

    /// Every count multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> Self {
        ResponseCounts {
            n_per_cell: self.n_per_cell * factor,
            counts: self.counts.iter().map(|c| c.map(|v| v * factor)).collect(),
            ..*self
        }
    }
}

/// Multinomial draw by successive conditional binomials.
fn multinomial(rng: &mut ChaCha20Rng, n: u64, probs: &[f64; 8]) -> [u64; 8] {
    let mut out = [0u64; 8];
    let mut left = n;
    let mut mass = 1.0;
    for (c, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if c == 7 {
            out[c] = left;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(left, q).expect("q lies in [0,1]").sample(rng);
        out[c] = draw;
        left -= draw;
        mass -= p;
    }
    out
}

pub fn simulate(params: &IrtParams, n_per_cell: u64, seed: u64) -> Result<ResponseCounts> {
    params.validate()?;
    simulate_table(&build_psi_table(params), n_per_cell, seed, Execution::default())
}

/// Cell (t,k) draws from ChaCha stream `t·K + k` of `seed`, so the result
/// does not depend on `exec`.
pub fn simulate_table(table: &PsiTable, n_per_cell: u64, seed: u64, exec: Execution) -> Result<ResponseCounts> {
    if n_per_cell == 0 {
        return Err(Error::Domain {
            what: "n_per_cell".into(),
            value: 0.0,
            interval: "[1,inf)",
        });
    }
    let (t_n, k_n) = table.shape();
    let counts = exec.map_indexed(t_n * k_n, |i| {
        let d = category_distribution(&table.cell(i / k_n, i % k_n)).expect("table entries lie in [0,1]");
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        multinomial(&mut rng, n_per_cell, &d.0)
    });
    Ok(ResponseCounts {
        t: t_n,
        k: k_n,
        n_per_cell,
        counts,
    })
}

/// Σ count · ln p over cells and categories; categories with zero count are
/// skipped.
pub fn log_likelihood(table: &PsiTable, data: &ResponseCounts) -> Result<f64> {
    let (t_n, k_n) = table.shape();
    if (data.t, data.k) != (t_n, k_n) {
        return Err(Error::mismatch(
            "count data dimensions",
            format!("T={t_n}, K={k_n}"),
            format!("T={}, K={}", data.t, data.k),
        ));
    }
    let mut ll = 0.0;
    for t in 0..t_n {
        for k in 0..k_n {
            let d = category_distribution(&table.cell(t, k))?;
            for (c, &n) in data.cell(t, k).iter().enumerate() {
                if n == 0 {
                    continue;
                }
                let p = d.0[c];
                if !(p >= LOGLIK_MIN_PROB) {
                    return Err(Error::ProbabilityUnderflow {
                        t,
                        k,
                        category: ResponseCategory::ALL[c].label(),
                        value: p,
                        floor: LOGLIK_MIN_PROB,
                    });
                }
                ll += n as f64 * p.ln();
            }
        }
    }
    Ok(ll)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub case_tol: f64,
    pub eta_margin: f64,
    pub step: f64,
    pub rel_cutoff: f64,
    /// η values probed across the admissible windows of a continuum.
    pub grid_points: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            case_tol: 1e-9,
            eta_margin: DEFAULT_ETA_MARGIN,
            step: DEFAULT_STEP,
            rel_cutoff: DEFAULT_REL_CUTOFF,
            grid_points: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partner {
    pub transform: EtaXiTransform,
    pub max_dist_distribution: f64,
    pub max_dist_params: f64,
    pub in_model_family: bool,
    #[serde(skip)]
    pub table: PsiTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridSummary {
    pub tried: usize,
    pub representable: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentifiabilityReport {
    pub t: usize,
    pub k: usize,
    pub param_count: usize,
    pub case: CaseLabel,
    pub eta_range: EtaRange,
    pub eta_margin: f64,
    /// Parts of `eta_range` at distance at least the margin from 1.
    pub eta_windows: Vec<EtaRange>,
    pub eta_range_empty: bool,
    pub search: Option<TransformSearch>,
    pub xi_range: Option<(f64, f64)>,
    pub rank: RankReport,
    pub partner: Option<Partner>,
    pub grid: Option<GridSummary>,
    pub statements: Vec<String>,
}

impl IdentifiabilityReport {
    pub fn summary(&self) -> String {
        let mut s = format!(
            "T={} K={} params={} case={}\n",
            self.t,
            self.k,
            self.param_count,
            self.case.cli_name()
        );
        s += &format!(
            "eta range ({:.6}, {:.6}); rank {} deficiency {}\n",
            self.eta_range.lo, self.eta_range.hi, self.rank.rank, self.rank.deficiency
        );
        if let Some(p) = &self.partner {
            s += &format!(
                "partner at eta={:.6}: distribution distance {:.3e}, parameter distance {:.3e}\n",
                p.transform.eta, p.max_dist_distribution, p.max_dist_params
            );
        }
        if let Some(g) = &self.grid {
            s += &format!("eta grid: {}/{} representable\n", g.representable, g.tried);
        }
        for st in &self.statements {
            s += st;
            s.push('\n');
        }
        s
    }
}

fn windows(range: &EtaRange, margin: f64) -> Vec<EtaRange> {
    [range.below(margin), range.above(margin)]
        .into_iter()
        .filter(|w| !w.is_empty())
        .collect()
}

/// A transform at `eta` with the ξ implied by the table, kept only when
/// the image stays inside the model family.
fn try_partner(table: &PsiTable, eta: f64) -> std::result::Result<Partner, String> {
    let xi = implied_xi(table, eta).map_err(|e| e.to_string())?;
    let transform = EtaXiTransform {
        eta,
        xi: Xi::PerRespondent(xi),
    };
    let image = apply_transform(table, &transform).map_err(|e| e.to_string())?;
    let v = verify_pair(table, &image, PAIR_TOL).map_err(|e| e.to_string())?;
    let lift = lift_table(&image, ADDITIVE_TOL);
    Ok(Partner {
        transform,
        max_dist_distribution: v.max_dist_distribution,
        max_dist_params: v.max_dist_params,
        in_model_family: lift.is_ok() && v.pass,
        table: image,
    })
}

fn interior_grid(w: &EtaRange, n: usize, margin: f64) -> Vec<f64> {
    let hi = if w.hi.is_finite() { w.hi } else { w.lo + 4.0 * margin.max(0.05) };
    (1..=n).map(|i| w.lo + (hi - w.lo) * i as f64 / (n + 1) as f64).collect()
}

/// Case, admissible η/ξ ranges, Jacobian rank and, when one exists, an
/// equivalent partner with its verification distances.
pub fn identifiability_report(params: &IrtParams, opts: &ReportOptions) -> Result<IdentifiabilityReport> {
    let dims = params.dims()?;
    let case = classify_case(params, opts.case_tol)?;
    let rank = numerical_rank(&jacobian(params, opts.step)?, opts.rel_cutoff);
    let table = build_psi_table(params);
    let range = eta_range(&table);
    let wins = windows(&range, opts.eta_margin);
    let mut report = IdentifiabilityReport {
        t: dims.t,
        k: dims.k,
        param_count: param_count(dims),
        case,
        eta_range: range,
        eta_margin: opts.eta_margin,
        eta_range_empty: wins.is_empty(),
        eta_windows: wins.clone(),
        search: None,
        xi_range: None,
        rank,
        partner: None,
        grid: None,
        statements: Vec::new(),
    };
    let rank_text = if report.rank.deficiency == 0 {
        format!("rank = param_count ({})", report.param_count)
    } else {
        format!("rank = {} < param_count ({})", report.rank.rank, report.param_count)
    };

    if case == CaseLabel::Neither {
        report.statements.push(format!("no η-transform admissible; {rank_text}"));
        return Ok(report);
    }
    if wins.is_empty() {
        report.statements.push(format!(
            "η range ({:.6}, {:.6}) is empty after excluding |η − 1| < {}; no partner constructed; {rank_text}",
            range.lo, range.hi, opts.eta_margin
        ));
        return Ok(report);
    }

    let search = search_transform(&table);
    report.search = Some(search);
    let eta = match search {
        TransformSearch::Continuum => interior_grid(&wins[0], 1, opts.eta_margin)[0],
        TransformSearch::Isolated(eta) if range.contains(eta) => eta,
        TransformSearch::Isolated(eta) => {
            report.statements.push(format!(
                "the only candidate η = {eta:.6} lies outside the admissible range; {rank_text}"
            ));
            return Ok(report);
        }
        TransformSearch::None => {
            report
                .statements
                .push(format!("no η ≠ 1 keeps ψ3′/ψ3 constant across items; {rank_text}"));
            return Ok(report);
        }
    };
    report.xi_range = xi_range(eta, &table).ok();
    match try_partner(&table, eta) {
        Ok(p) => {
            report.statements.push(format!(
                "equivalent partner at η = {eta:.6}{}; {rank_text}",
                if p.in_model_family { "" } else { " leaves the model family" }
            ));
            report.partner = Some(p);
        }
        Err(e) => report.statements.push(format!("transform at η = {eta:.6} failed: {e}; {rank_text}")),
    }
    if opts.grid_points > 0 {
        let per = opts.grid_points.div_ceil(wins.len());
        let etas: Vec<f64> = wins
            .iter()
            .flat_map(|w| interior_grid(w, per, opts.eta_margin))
            .collect();
        let representable = etas
            .iter()
            .filter(|&&e| try_partner(&table, e).is_ok_and(|p| p.in_model_family))
            .count();
        report.grid = Some(GridSummary {
            tried: etas.len(),
            representable,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equivalence::generate_nonidentifiable;
    use rand_chacha::ChaCha8Rng;

    fn random_params(t: usize, k: usize, seed: u64) -> IrtParams {
        IrtParams::random(ModelDims::new(t, k).unwrap(), &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn jacobian_shape_and_psi8_column() {
        let p = random_params(2, 3, 1);
        let j = jacobian(&p, DEFAULT_STEP).unwrap();
        assert_eq!(j.matrix.shape(), (2 * 3 * 7, 26));
        let dims = j.dims;
        let col = crate::params::CanonicalCoords::psi8_index(dims);
        for t in 0..2 {
            for k in 0..3 {
                for c in [
                    ResponseCategory::C,
                    ResponseCategory::S,
                    ResponseCategory::F,
                    ResponseCategory::M,
                    ResponseCategory::N,
                ] {
                    assert_eq!(j.matrix[(JacobianMatrix::row(dims, t, k, c), col)], 0.0);
                }
            }
        }
    }

    #[test]
    fn step_must_be_in_range() {
        let p = random_params(2, 2, 1);
        assert!(matches!(jacobian(&p, 1e-2), Err(Error::Domain { .. })));
        let mut q = p.clone();
        q.theta[0][0] += 1.0;
        assert!(matches!(jacobian(&q, 1e-5), Err(Error::NotCanonical { .. })));
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let (_, rank, _) = spectrum_rank(&DMatrix::zeros(4, 3), 1e-7);
        assert_eq!(rank, 0);
    }

    #[test]
    fn generic_point_is_full_rank() {
        let p = random_params(3, 4, 9);
        let r = numerical_rank(&jacobian(&p, DEFAULT_STEP).unwrap(), DEFAULT_REL_CUTOFF);
        assert_eq!(r.param_count, 38);
        assert_eq!(r.rank, 38, "{:?}", r.singular_values);
        assert!(r.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn both_zero_is_rank_deficient() {
        let pair = generate_nonidentifiable(ModelDims::new(3, 4).unwrap(), CaseLabel::BothZero, 2, 0.05).unwrap();
        let r = numerical_rank(&jacobian(&pair.omega, DEFAULT_STEP).unwrap(), DEFAULT_REL_CUTOFF);
        assert!(r.deficiency >= 1, "{:?}", r.singular_values);
    }

    #[test]
    fn fisher_matches_jacobian_rank() {
        let p = random_params(3, 4, 5);
        let i = fisher_information(&p).unwrap();
        assert!((&i - i.transpose()).amax() <= 1e-10);
        let r = fisher_rank(&p, DEFAULT_STEP, DEFAULT_REL_CUTOFF).unwrap();
        assert_eq!(r.rank, 38);
    }

    #[test]
    fn simulate_single_response_per_cell() {
        let p = random_params(2, 3, 3);
        let d = simulate(&p, 1, 8).unwrap();
        assert!(d.counts.iter().all(|c| c.iter().sum::<u64>() == 1));
    }

    #[test]
    fn simulate_no_attempt() {
        let mut table = build_psi_table(&IrtParams::zeros(2, 2));
        table.psi1 = DMatrix::zeros(2, 2);
        let d = simulate_table(&table, 50, 1, Execution::Sequential).unwrap();
        assert!(d.counts.iter().all(|c| c[7] == 50));
        let ll = log_likelihood(&table, &d).unwrap();
        assert_eq!(ll, 0.0);
    }

    #[test]
    fn simulation_frequencies_at_half() {
        let table = build_psi_table(&IrtParams::zeros(2, 2));
        let n = 100_000;
        let d = simulate_table(&table, n, 11, Execution::default()).unwrap();
        let want = category_distribution(&[0.5; 8]).unwrap();
        for c in &d.counts {
            for (i, &v) in c.iter().enumerate() {
                assert!((v as f64 / n as f64 - want.0[i]).abs() < 0.005);
            }
        }
    }

    #[test]
    fn loglik_is_linear_in_counts() {
        let p = random_params(2, 3, 4);
        let table = build_psi_table(&p);
        let d = simulate(&p, 40, 2).unwrap();
        let a = log_likelihood(&table, &d).unwrap();
        let b = log_likelihood(&table, &d.scaled(2)).unwrap();
        assert_eq!(b, 2.0 * a);
    }

    #[test]
    fn loglik_rejects_impossible_counts() {
        let mut table = build_psi_table(&IrtParams::zeros(2, 2));
        table.psi1 = DMatrix::zeros(2, 2);
        let d = ResponseCounts::new(2, 2, 1, vec![[1, 0, 0, 0, 0, 0, 0, 0]; 4]).unwrap();
        assert!(matches!(log_likelihood(&table, &d), Err(Error::ProbabilityUnderflow { .. })));
        let d = ResponseCounts::new(2, 3, 1, vec![[0, 0, 0, 0, 0, 0, 0, 1]; 6]).unwrap();
        assert!(matches!(log_likelihood(&table, &d), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn report_neither() {
        let r = identifiability_report(&random_params(3, 4, 9), &ReportOptions::default()).unwrap();
        assert_eq!(r.case, CaseLabel::Neither);
        assert!(r.partner.is_none());
        assert!(r.statements[0].contains("no η-transform admissible; rank = param_count"));
    }

    #[test]
    fn report_case_a_partner() {
        let pair = generate_nonidentifiable(ModelDims::new(3, 4).unwrap(), CaseLabel::ThetaSixZero, 6, 0.05).unwrap();
        let r = identifiability_report(&pair.omega, &ReportOptions::default()).unwrap();
        assert!(r.grid.is_some_and(|g| g.tried > 0 && g.representable < g.tried));
        let partner = r.partner.expect("partner");
        assert!(partner.in_model_family);
        assert!(partner.max_dist_distribution <= 1e-12);
    }

    #[test]
    fn report_empty_range() {
        let mut p = IrtParams::zeros(2, 3);
        p.psi8 = 0.01;
        let phon = LinkedProcess::Phon.index();
        let lexphon = LinkedProcess::LexPhon.index();
        p.beta[lexphon] = 4.0;
        p.beta[phon] = 0.0;
        p.delta[phon] = vec![0.1, -0.1, 0.0];
        let r = identifiability_report(&p, &ReportOptions::default()).unwrap();
        assert!(r.eta_range_empty, "{:?}", r.eta_range);
        assert!(r.partner.is_none());
        assert!(r.statements[0].contains("empty"));
    }
}

//! Closed-form category law of one cell and the conditional-probability
//! algebra built on it.

use serde::{Deserialize, Serialize};

use crate::category::{check_cell, CategoryDistribution, PsiCell, ResponseCategory as R};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::params::PsiTable;

/// Probabilities below this count as zero when conditioning.
pub const ZERO_EVENT: f64 = 1e-300;

/// Category law of a cell from its eight process probabilities.
///
/// Accepts the closed unit interval so degenerate branches can be evaluated.
pub fn category_distribution(psi: &PsiCell) -> Result<CategoryDistribution> {
    check_cell(psi)?;
    let [p1, p2, p3, p4, p5, p6, p7, p8] = *psi;
    let reach_lexsem = p1 * p2;
    let reach_lexphon = reach_lexsem * p3;
    // mass entering Word-L: every Phon node above LexPhon that fails
    let word_l = p1 * (1.0 - p2 * p3) * (1.0 - p6);
    let mut d = [0.0; 8];
    d[R::C.index()] = reach_lexphon * p4 * p5 * p6;
    d[R::S.index()] = reach_lexsem * (1.0 - p3) * p6;
    d[R::F.index()] = reach_lexphon * ((1.0 - p4) * p6 + (1.0 - p6) * p7);
    d[R::M.index()] = reach_lexphon * p4 * (1.0 - p5) * p6;
    d[R::U.index()] = p1 * (1.0 - p2) * p6 + word_l * p8;
    d[R::N.index()] = reach_lexphon * (1.0 - p6) * (1.0 - p7);
    d[R::AN.index()] = word_l * (1.0 - p8);
    d[R::NA.index()] = 1.0 - p1;
    Ok(CategoryDistribution(d))
}

/// Category law for every cell of a table, t-major.
pub fn distribution_table(table: &PsiTable, exec: Execution) -> Vec<CategoryDistribution> {
    let k = table.n_items();
    exec.map_indexed(table.n_respondents() * k, |i| {
        category_distribution(&table.cell(i / k, i % k)).expect("table entries lie in (0,1)")
    })
}

/// Conditional response probabilities of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionalProbs {
    /// P(R ≠ NA)
    pub p1: f64,
    /// P(R ∉ {AN,U,S} | R ≠ NA)
    pub p2: f64,
    /// P(R = S | R ∈ {AN,U,S})
    pub p3: f64,
    /// P(R = AN | R ∈ {AN,U,S})
    pub p4: f64,
    /// P(R = C | R ∉ {NA,AN,U,S})
    pub p5: f64,
    /// P(R = M | R ∉ {NA,AN,U,S})
    pub p6: f64,
    /// P(R = N | R ∉ {NA,AN,U,S})
    pub p7: f64,
}

impl ConditionalProbs {
    pub fn as_array(&self) -> [f64; 7] {
        [self.p1, self.p2, self.p3, self.p4, self.p5, self.p6, self.p7]
    }
}

fn conditioned(mass: f64, event: &'static str) -> Result<f64> {
    if mass < ZERO_EVENT {
        Err(Error::ZeroConditioning { event })
    } else {
        Ok(mass)
    }
}

pub fn conditional_probs_from_distribution(d: &CategoryDistribution) -> Result<ConditionalProbs> {
    let attempted: f64 = R::ALL[..7].iter().map(|&c| d[c]).sum();
    let lexical_miss = d[R::AN] + d[R::U] + d[R::S];
    let lexical_hit = d[R::C] + d[R::M] + d[R::F] + d[R::N];

    let attempted_ev = conditioned(attempted, "R != NA")?;
    let miss_ev = conditioned(lexical_miss, "R in {AN,U,S}")?;
    let hit_ev = conditioned(lexical_hit, "R not in {NA,AN,U,S}")?;

    Ok(ConditionalProbs {
        p1: attempted,
        p2: lexical_hit / attempted_ev,
        p3: d[R::S] / miss_ev,
        p4: d[R::AN] / miss_ev,
        p5: d[R::C] / hit_ev,
        p6: d[R::M] / hit_ev,
        p7: d[R::N] / hit_ev,
    })
}

/// The same conditionals written directly in ψ.
pub fn conditional_probs_from_psi(psi: &PsiCell) -> ConditionalProbs {
    let [p1, p2, p3, p4, p5, p6, p7, p8] = *psi;
    let lex = p2 * p3;
    ConditionalProbs {
        p1,
        p2: lex,
        p3: p2 * (1.0 - p3) * p6 / (1.0 - lex),
        p4: (1.0 - p6) * (1.0 - p8),
        p5: p4 * p5 * p6,
        p6: p4 * (1.0 - p5) * p6,
        p7: (1.0 - p6) * (1.0 - p7),
    }
}

/// Ratios of conditionals that isolate single process probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioSet {
    /// p5 / p6 = ψ5 / (1 − ψ5)
    pub r_a: f64,
    /// p5 + p6 = ψ4 ψ6
    pub r_b: f64,
    /// (1 − p2) p3 / p2 = (1 − ψ3) ψ6 / ψ3
    pub r_c: f64,
    /// p7 / p4 = (1 − ψ7) / (1 − ψ8)
    pub r_d: f64,
}

pub fn derived_ratios(p: &ConditionalProbs) -> Result<RatioSet> {
    let nz = |x: f64, what: &'static str| {
        if x.abs() < ZERO_EVENT {
            Err(Error::ZeroDenominator(what))
        } else {
            Ok(x)
        }
    };
    Ok(RatioSet {
        r_a: p.p5 / nz(p.p6, "p5/p6")?,
        r_b: p.p5 + p.p6,
        r_c: (1.0 - p.p2) * p.p3 / nz(p.p2, "(1-p2)p3/p2")?,
        r_d: p.p7 / nz(p.p4, "p7/p4")?,
    })
}

/// Quantities that must coincide between two observationally equivalent ψ
/// tables, cell by cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// ψ1
    Attempt,
    /// ψ5 / (1 − ψ5)
    SelectionOdds,
    /// ψ4 ψ6
    LexPhonTimesPhon,
    /// ψ2 ψ3
    SemTimesLexSem,
    /// (1 − ψ3) ψ6 / ψ3
    LexSemMissRatio,
    /// (1 − ψ6)(1 − ψ8)
    WordLAbstruse,
    /// (1 − ψ7) / (1 − ψ8)
    WordTOverWordL,
}

impl Relation {
    pub const ALL: [Relation; 7] = [
        Relation::Attempt,
        Relation::SelectionOdds,
        Relation::LexPhonTimesPhon,
        Relation::SemTimesLexSem,
        Relation::LexSemMissRatio,
        Relation::WordLAbstruse,
        Relation::WordTOverWordL,
    ];

    pub fn expression(self) -> &'static str {
        match self {
            Relation::Attempt => "psi1",
            Relation::SelectionOdds => "psi5/(1-psi5)",
            Relation::LexPhonTimesPhon => "psi4*psi6",
            Relation::SemTimesLexSem => "psi2*psi3",
            Relation::LexSemMissRatio => "(1-psi3)*psi6/psi3",
            Relation::WordLAbstruse => "(1-psi6)*(1-psi8)",
            Relation::WordTOverWordL => "(1-psi7)/(1-psi8)",
        }
    }

    pub fn evaluate(self, psi: &PsiCell) -> f64 {
        let [p1, p2, p3, p4, p5, p6, p7, p8] = *psi;
        match self {
            Relation::Attempt => p1,
            Relation::SelectionOdds => p5 / (1.0 - p5),
            Relation::LexPhonTimesPhon => p4 * p6,
            Relation::SemTimesLexSem => p2 * p3,
            Relation::LexSemMissRatio => (1.0 - p3) * p6 / p3,
            Relation::WordLAbstruse => (1.0 - p6) * (1.0 - p8),
            Relation::WordTOverWordL => (1.0 - p7) / (1.0 - p8),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EqualityReport {
    /// Max absolute discrepancy over all cells, in [`Relation::ALL`] order.
    pub discrepancies: [f64; 7],
    pub tol: f64,
    pub pass: bool,
}

impl EqualityReport {
    pub fn failing(&self) -> Vec<Relation> {
        Relation::ALL
            .into_iter()
            .zip(self.discrepancies)
            .filter(|&(_, d)| !(d <= self.tol))
            .map(|(r, _)| r)
            .collect()
    }

    pub fn discrepancy(&self, r: Relation) -> f64 {
        self.discrepancies[r as usize]
    }
}

pub fn check_necessary_equalities(a: &PsiTable, b: &PsiTable, tol: f64) -> Result<EqualityReport> {
    if a.shape() != b.shape() {
        return Err(Error::mismatch(
            "psi tables",
            format!("{:?}", a.shape()),
            format!("{:?}", b.shape()),
        ));
    }
    let (t_n, k_n) = a.shape();
    let mut discrepancies = [0.0f64; 7];
    for t in 0..t_n {
        for k in 0..k_n {
            let (ca, cb) = (a.cell(t, k), b.cell(t, k));
            for (slot, r) in discrepancies.iter_mut().zip(Relation::ALL) {
                let d = (r.evaluate(&ca) - r.evaluate(&cb)).abs();
                // NaN propagates as a failure
                if !(d <= *slot) {
                    *slot = d;
                }
            }
        }
    }
    let pass = discrepancies.iter().all(|&d| d <= tol);
    Ok(EqualityReport {
        discrepancies,
        tol,
        pass,
    })
}

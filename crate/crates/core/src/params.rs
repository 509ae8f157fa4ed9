//! IRT parameter space, the logit link, gauge handling and the ψ table.
//!
//! For the five linked processes s ∈ {1,3,4,5,6},
//! `logit ψ_stk = θ_ts − δ_ks + β_s`. The map is invariant under the gauge
//! `θ·s += u_s`, `δ·s += v_s`, `β_s += v_s − u_s`, which is fixed by requiring
//! `Σ_t θ_ts = 0` and `Σ_k δ_ks = 0`. The remaining probabilities ψ_2t, ψ_7k
//! and ψ_8 are free.

use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::category::PsiCell;
use crate::error::{Error, Result};

/// Default residual tolerance for [`additive_decompose`].
pub const ADDITIVE_TOL: f64 = 1e-9;

/// Tolerance on Σθ and Σδ for a parameter vector to count as canonical.
pub const CANONICAL_TOL: f64 = 1e-9;

const P_MIN: f64 = f64::from_bits(1); // smallest positive subnormal
const P_MAX: f64 = 1.0 - f64::EPSILON / 2.0; // largest double below 1

/// Processes whose success probability goes through the IRT link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkedProcess {
    Attempt,
    LexSem,
    LexPhon,
    LexSel,
    Phon,
}

impl LinkedProcess {
    pub const ALL: [LinkedProcess; 5] = [
        LinkedProcess::Attempt,
        LinkedProcess::LexSem,
        LinkedProcess::LexPhon,
        LinkedProcess::LexSel,
        LinkedProcess::Phon,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Process number s in the tree.
    pub fn number(self) -> u8 {
        match self {
            LinkedProcess::Attempt => 1,
            LinkedProcess::LexSem => 3,
            LinkedProcess::LexPhon => 4,
            LinkedProcess::LexSel => 5,
            LinkedProcess::Phon => 6,
        }
    }

    /// Key used in parameter files ("s1", "s3", ...).
    pub fn key(self) -> &'static str {
        match self {
            LinkedProcess::Attempt => "s1",
            LinkedProcess::LexSem => "s3",
            LinkedProcess::LexPhon => "s4",
            LinkedProcess::LexSel => "s5",
            LinkedProcess::Phon => "s6",
        }
    }
}

impl fmt::Display for LinkedProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "psi{}", self.number())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub t: usize,
    pub k: usize,
}

impl ModelDims {
    pub fn new(t: usize, k: usize) -> Result<Self> {
        if t < 2 || k < 2 {
            return Err(Error::InvalidDims { t, k });
        }
        Ok(ModelDims { t, k })
    }

    pub fn cells(&self) -> usize {
        self.t * self.k
    }
}

/// 6T + 6K − 4: five linked processes with T + K − 1 free values each, plus
/// T values of ψ_2, K of ψ_7 and the global ψ_8.
pub fn param_count(dims: ModelDims) -> usize {
    6 * dims.t + 6 * dims.k - 4
}

/// Logistic function, clamped strictly inside (0,1).
pub fn logistic(x: f64) -> f64 {
    let p = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    p.clamp(P_MIN, P_MAX)
}

pub fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

/// ψ = logistic(θ − δ + β).
pub fn link(theta: f64, delta: f64, beta: f64) -> f64 {
    logistic(theta - delta + beta)
}

fn check_open_unit(what: impl FnOnce() -> String, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what: what(),
            value: v,
            interval: "(0,1)",
        })
    }
}

fn check_finite(what: impl FnOnce() -> String, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what: what(),
            value: v,
            interval: "(-inf,inf)",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrtParams {
    /// `theta[s][t]`, indexed by [`LinkedProcess::index`].
    pub theta: [Vec<f64>; 5],
    /// `delta[s][k]`.
    pub delta: [Vec<f64>; 5],
    pub beta: [f64; 5],
    pub psi2: Vec<f64>,
    pub psi7: Vec<f64>,
    pub psi8: f64,
}

impl IrtParams {
    pub fn new(
        theta: [Vec<f64>; 5],
        delta: [Vec<f64>; 5],
        beta: [f64; 5],
        psi2: Vec<f64>,
        psi7: Vec<f64>,
        psi8: f64,
    ) -> Result<Self> {
        let p = IrtParams {
            theta,
            delta,
            beta,
            psi2,
            psi7,
            psi8,
        };
        p.validate()?;
        Ok(p)
    }

    /// All-zero coordinates: every ψ equals 1/2.
    pub fn zeros(t: usize, k: usize) -> Self {
        IrtParams {
            theta: std::array::from_fn(|_| vec![0.0; t]),
            delta: std::array::from_fn(|_| vec![0.0; k]),
            beta: [0.0; 5],
            psi2: vec![0.5; t],
            psi7: vec![0.5; k],
            psi8: 0.5,
        }
    }

    /// Generic draw: θ, δ ~ U(−1,1), β ~ U(−0.5,0.5), free probabilities
    /// ~ U(0.15,0.85); returned canonicalized.
    pub fn random<R: Rng + ?Sized>(dims: ModelDims, rng: &mut R) -> Self {
        let theta = std::array::from_fn(|_| (0..dims.t).map(|_| rng.random_range(-1.0..1.0)).collect());
        let delta = std::array::from_fn(|_| (0..dims.k).map(|_| rng.random_range(-1.0..1.0)).collect());
        let beta = std::array::from_fn(|_| rng.random_range(-0.5..0.5));
        let psi2 = (0..dims.t).map(|_| rng.random_range(0.15..0.85)).collect();
        let psi7 = (0..dims.k).map(|_| rng.random_range(0.15..0.85)).collect();
        let psi8 = rng.random_range(0.15..0.85);
        canonicalize(&IrtParams {
            theta,
            delta,
            beta,
            psi2,
            psi7,
            psi8,
        })
    }

    pub fn n_respondents(&self) -> usize {
        self.psi2.len()
    }

    pub fn n_items(&self) -> usize {
        self.psi7.len()
    }

    pub fn dims(&self) -> Result<ModelDims> {
        ModelDims::new(self.n_respondents(), self.n_items())
    }

    pub fn validate(&self) -> Result<()> {
        let (t, k) = (self.n_respondents(), self.n_items());
        if t == 0 || k == 0 {
            return Err(Error::mismatch("parameter vector", "T >= 1 and K >= 1", format!("T={t}, K={k}")));
        }
        for s in LinkedProcess::ALL {
            let i = s.index();
            if self.theta[i].len() != t {
                return Err(Error::mismatch(&format!("theta.{}", s.key()), t, self.theta[i].len()));
            }
            if self.delta[i].len() != k {
                return Err(Error::mismatch(&format!("delta.{}", s.key()), k, self.delta[i].len()));
            }
            for (j, &v) in self.theta[i].iter().enumerate() {
                check_finite(|| format!("theta.{}[{j}]", s.key()), v)?;
            }
            for (j, &v) in self.delta[i].iter().enumerate() {
                check_finite(|| format!("delta.{}[{j}]", s.key()), v)?;
            }
            check_finite(|| format!("beta.{}", s.key()), self.beta[i])?;
        }
        for (j, &v) in self.psi2.iter().enumerate() {
            check_open_unit(|| format!("psi2[{j}]"), v)?;
        }
        for (j, &v) in self.psi7.iter().enumerate() {
            check_open_unit(|| format!("psi7[{j}]"), v)?;
        }
        check_open_unit(|| "psi8".into(), self.psi8)
    }

    /// Largest |Σ_t θ_ts| or |Σ_k δ_ks| over the linked processes, with the
    /// offending field name.
    pub fn canonical_gap(&self) -> (f64, String) {
        let mut worst = (0.0, String::new());
        for s in LinkedProcess::ALL {
            let st: f64 = self.theta[s.index()].iter().sum();
            let sd: f64 = self.delta[s.index()].iter().sum();
            if st.abs() > worst.0 {
                worst = (st.abs(), format!("theta.{}", s.key()));
            }
            if sd.abs() > worst.0 {
                worst = (sd.abs(), format!("delta.{}", s.key()));
            }
        }
        worst
    }

    pub fn ensure_canonical(&self) -> Result<()> {
        let (gap, what) = self.canonical_gap();
        if gap > CANONICAL_TOL {
            return Err(Error::NotCanonical {
                what,
                max_abs_sum: gap,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeShift {
    pub u: [f64; 5],
    pub v: [f64; 5],
}

/// θ·s += u_s, δ·s += v_s, β_s += v_s − u_s.
pub fn gauge_shift(params: &IrtParams, shift: &GaugeShift) -> IrtParams {
    let mut out = params.clone();
    for s in 0..5 {
        out.theta[s].iter_mut().for_each(|x| *x += shift.u[s]);
        out.delta[s].iter_mut().for_each(|x| *x += shift.v[s]);
        out.beta[s] += shift.v[s] - shift.u[s];
    }
    out
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Representative of the gauge class with zero-sum θ·s and δ·s.
pub fn canonicalize(params: &IrtParams) -> IrtParams {
    let shift = GaugeShift {
        u: std::array::from_fn(|s| -mean(&params.theta[s])),
        v: std::array::from_fn(|s| -mean(&params.delta[s])),
    };
    gauge_shift(params, &shift)
}

/// Per-cell process probabilities. Every entry lies in the open unit
/// interval; ψ_2 depends on the respondent only, ψ_7 on the item only and
/// ψ_8 is global.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiTable {
    pub psi1: DMatrix<f64>,
    pub psi2: Vec<f64>,
    pub psi3: DMatrix<f64>,
    pub psi4: DMatrix<f64>,
    pub psi5: DMatrix<f64>,
    pub psi6: DMatrix<f64>,
    pub psi7: Vec<f64>,
    pub psi8: f64,
}

impl PsiTable {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        psi1: DMatrix<f64>,
        psi2: Vec<f64>,
        psi3: DMatrix<f64>,
        psi4: DMatrix<f64>,
        psi5: DMatrix<f64>,
        psi6: DMatrix<f64>,
        psi7: Vec<f64>,
        psi8: f64,
    ) -> Result<Self> {
        let table = PsiTable {
            psi1,
            psi2,
            psi3,
            psi4,
            psi5,
            psi6,
            psi7,
            psi8,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn n_respondents(&self) -> usize {
        self.psi2.len()
    }

    pub fn n_items(&self) -> usize {
        self.psi7.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_respondents(), self.n_items())
    }

    pub fn linked(&self, s: LinkedProcess) -> &DMatrix<f64> {
        match s {
            LinkedProcess::Attempt => &self.psi1,
            LinkedProcess::LexSem => &self.psi3,
            LinkedProcess::LexPhon => &self.psi4,
            LinkedProcess::LexSel => &self.psi5,
            LinkedProcess::Phon => &self.psi6,
        }
    }

    pub fn linked_mut(&mut self, s: LinkedProcess) -> &mut DMatrix<f64> {
        match s {
            LinkedProcess::Attempt => &mut self.psi1,
            LinkedProcess::LexSem => &mut self.psi3,
            LinkedProcess::LexPhon => &mut self.psi4,
            LinkedProcess::LexSel => &mut self.psi5,
            LinkedProcess::Phon => &mut self.psi6,
        }
    }

    pub fn cell(&self, t: usize, k: usize) -> PsiCell {
        [
            self.psi1[(t, k)],
            self.psi2[t],
            self.psi3[(t, k)],
            self.psi4[(t, k)],
            self.psi5[(t, k)],
            self.psi6[(t, k)],
            self.psi7[k],
            self.psi8,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let (t, k) = self.shape();
        if t == 0 || k == 0 {
            return Err(Error::mismatch("psi table", "T >= 1 and K >= 1", format!("T={t}, K={k}")));
        }
        for s in LinkedProcess::ALL {
            let m = self.linked(s);
            if m.shape() != (t, k) {
                return Err(Error::mismatch(&s.to_string(), format!("{t}x{k}"), format!("{}x{}", m.nrows(), m.ncols())));
            }
            for i in 0..t {
                for j in 0..k {
                    check_open_unit(|| format!("{s}[t={i},k={j}]"), m[(i, j)])?;
                }
            }
        }
        for (j, &v) in self.psi2.iter().enumerate() {
            check_open_unit(|| format!("psi2[t={j}]"), v)?;
        }
        for (j, &v) in self.psi7.iter().enumerate() {
            check_open_unit(|| format!("psi7[k={j}]"), v)?;
        }
        check_open_unit(|| "psi8".into(), self.psi8)
    }

    /// Largest absolute difference over every ψ entry.
    pub fn max_abs_diff(&self, other: &PsiTable) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(Error::mismatch(
                "psi tables",
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ));
        }
        let mut d: f64 = (self.psi8 - other.psi8).abs();
        for s in LinkedProcess::ALL {
            d = d.max((self.linked(s) - other.linked(s)).amax());
        }
        for (a, b) in self.psi2.iter().zip(&other.psi2) {
            d = d.max((a - b).abs());
        }
        for (a, b) in self.psi7.iter().zip(&other.psi7) {
            d = d.max((a - b).abs());
        }
        Ok(d)
    }
}

pub fn build_psi_table(params: &IrtParams) -> PsiTable {
    let (t, k) = (params.n_respondents(), params.n_items());
    let grid = |s: LinkedProcess| {
        let i = s.index();
        DMatrix::from_fn(t, k, |r, c| {
            link(params.theta[i][r], params.delta[i][c], params.beta[i])
        })
    };
    PsiTable {
        psi1: grid(LinkedProcess::Attempt),
        psi2: params.psi2.clone(),
        psi3: grid(LinkedProcess::LexSem),
        psi4: grid(LinkedProcess::LexPhon),
        psi5: grid(LinkedProcess::LexSel),
        psi6: grid(LinkedProcess::Phon),
        psi7: params.psi7.clone(),
        psi8: params.psi8,
    }
}

/// Flat unconstrained coordinates of a canonical parameter vector.
///
/// Layout, for each linked process in the order s = 1, 3, 4, 5, 6:
/// θ_0..θ_{T−2}, δ_0..δ_{K−2}, β (the last θ and δ are minus the sum of the
/// others). Then logit ψ_2 (T values), logit ψ_7 (K values), logit ψ_8.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalCoords {
    pub dims: ModelDims,
    pub values: Vec<f64>,
}

impl CanonicalCoords {
    /// Offset of the first coordinate belonging to linked process `s`.
    pub fn process_offset(dims: ModelDims, s: LinkedProcess) -> usize {
        s.index() * (dims.t + dims.k - 1)
    }

    pub fn theta_index(dims: ModelDims, s: LinkedProcess, t: usize) -> Option<usize> {
        (t + 1 < dims.t).then(|| Self::process_offset(dims, s) + t)
    }

    pub fn delta_index(dims: ModelDims, s: LinkedProcess, k: usize) -> Option<usize> {
        (k + 1 < dims.k).then(|| Self::process_offset(dims, s) + dims.t - 1 + k)
    }

    pub fn beta_index(dims: ModelDims, s: LinkedProcess) -> usize {
        Self::process_offset(dims, s) + dims.t + dims.k - 2
    }

    pub fn psi2_index(dims: ModelDims, t: usize) -> usize {
        5 * (dims.t + dims.k - 1) + t
    }

    pub fn psi7_index(dims: ModelDims, k: usize) -> usize {
        5 * (dims.t + dims.k - 1) + dims.t + k
    }

    pub fn psi8_index(dims: ModelDims) -> usize {
        param_count(dims) - 1
    }
}

pub fn to_canonical_coords(params: &IrtParams) -> Result<CanonicalCoords> {
    let dims = params.dims()?;
    params.ensure_canonical()?;
    let mut values = Vec::with_capacity(param_count(dims));
    for s in LinkedProcess::ALL {
        let i = s.index();
        values.extend_from_slice(&params.theta[i][..dims.t - 1]);
        values.extend_from_slice(&params.delta[i][..dims.k - 1]);
        values.push(params.beta[i]);
    }
    values.extend(params.psi2.iter().map(|&p| logit(p)));
    values.extend(params.psi7.iter().map(|&p| logit(p)));
    values.push(logit(params.psi8));
    debug_assert_eq!(values.len(), param_count(dims));
    Ok(CanonicalCoords { dims, values })
}

pub fn from_canonical_coords(coords: &[f64], dims: ModelDims) -> Result<IrtParams> {
    let expected = param_count(dims);
    if coords.len() != expected {
        return Err(Error::CoordLength {
            expected,
            found: coords.len(),
        });
    }
    let mut theta: [Vec<f64>; 5] = Default::default();
    let mut delta: [Vec<f64>; 5] = Default::default();
    let mut beta = [0.0; 5];
    let mut rest = coords;
    for s in 0..5 {
        let (th, r) = rest.split_at(dims.t - 1);
        let (de, r) = r.split_at(dims.k - 1);
        let mut th = th.to_vec();
        th.push(-th.iter().sum::<f64>());
        let mut de = de.to_vec();
        de.push(-de.iter().sum::<f64>());
        theta[s] = th;
        delta[s] = de;
        beta[s] = r[0];
        rest = &r[1..];
    }
    let (p2, r) = rest.split_at(dims.t);
    let (p7, r) = r.split_at(dims.k);
    Ok(IrtParams {
        theta,
        delta,
        beta,
        psi2: p2.iter().map(|&x| logistic(x)).collect(),
        psi7: p7.iter().map(|&x| logistic(x)).collect(),
        psi8: logistic(r[0]),
    })
}

/// Means-based additive fit L ≈ θ_t − δ_k + β with Σθ = Σδ = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveFit {
    pub theta: Vec<f64>,
    pub delta: Vec<f64>,
    pub beta: f64,
    pub max_residual: f64,
}

/// Returned when the best additive fit leaves a residual above tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct NonAdditive {
    pub max_residual: f64,
}

/// Decides whether `l[t][k] = θ_t − δ_k + β` for some (θ, δ, β).
///
/// β is the grand mean, θ_t the row-mean deviation and δ_k minus the
/// column-mean deviation. The residual of this fit is zero exactly when the
/// matrix is additive, so it decides representability.
pub fn additive_decompose(l: &DMatrix<f64>, tol: f64) -> std::result::Result<AdditiveFit, NonAdditive> {
    let fit = additive_fit(l);
    if fit.max_residual <= tol {
        Ok(fit)
    } else {
        Err(NonAdditive {
            max_residual: fit.max_residual,
        })
    }
}

pub fn additive_fit(l: &DMatrix<f64>) -> AdditiveFit {
    let (t, k) = l.shape();
    let grand = l.mean();
    let theta: Vec<f64> = (0..t).map(|r| l.row(r).mean() - grand).collect();
    let delta: Vec<f64> = (0..k).map(|c| grand - l.column(c).mean()).collect();
    let mut max_residual: f64 = 0.0;
    for r in 0..t {
        for c in 0..k {
            let fitted = theta[r] - delta[c] + grand;
            max_residual = max_residual.max((l[(r, c)] - fitted).abs());
        }
    }
    AdditiveFit {
        theta,
        delta,
        beta: grand,
        max_residual,
    }
}

/// A linked process whose logit table is not additive.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftFailure {
    pub process: LinkedProcess,
    pub max_residual: f64,
}

pub fn logit_matrix(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(logit)
}

/// Inverse of [`build_psi_table`]: recovers canonical IRT coordinates from a
/// ψ table when every linked logit table is additive within `tol`.
pub fn lift_table(table: &PsiTable, tol: f64) -> std::result::Result<IrtParams, LiftFailure> {
    let mut theta: [Vec<f64>; 5] = Default::default();
    let mut delta: [Vec<f64>; 5] = Default::default();
    let mut beta = [0.0; 5];
    for s in LinkedProcess::ALL {
        let fit = additive_decompose(&logit_matrix(table.linked(s)), tol).map_err(|e| LiftFailure {
            process: s,
            max_residual: e.max_residual,
        })?;
        theta[s.index()] = fit.theta;
        delta[s.index()] = fit.delta;
        beta[s.index()] = fit.beta;
    }
    Ok(IrtParams {
        theta,
        delta,
        beta,
        psi2: table.psi2.clone(),
        psi7: table.psi7.clone(),
        psi8: table.psi8,
    })
}

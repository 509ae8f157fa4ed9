//! File formats: parameter, table and pair-bundle JSON; distribution and
//! count CSV. Every float is written with 17 significant digits so values
//! survive a write/read cycle bit for bit.

use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::category::{CategoryDistribution, ResponseCategory};
use crate::diagnostics::ResponseCounts;
use crate::equivalence::{CaseLabel, EquivalentPair, EtaXiTransform};
use crate::error::{Error, Result};
use crate::forward::Relation;
use crate::params::{IrtParams, LinkedProcess, PsiTable};

/// Shortest decimal form carrying 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pretty JSON with floats in [`format_f64`] form.
struct SigFormatter(PrettyFormatter<'static>);

impl Formatter for SigFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        w.write_all(format_f64(value).as_bytes())
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("in-memory serialization");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Per linked process, keyed `s1, s3, s4, s5, s6`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerProcess<T> {
    pub s1: T,
    pub s3: T,
    pub s4: T,
    pub s5: T,
    pub s6: T,
}

impl<T: Clone> PerProcess<T> {
    fn from_array(a: &[T; 5]) -> Self {
        PerProcess {
            s1: a[LinkedProcess::Attempt.index()].clone(),
            s3: a[LinkedProcess::LexSem.index()].clone(),
            s4: a[LinkedProcess::LexPhon.index()].clone(),
            s5: a[LinkedProcess::LexSel.index()].clone(),
            s6: a[LinkedProcess::Phon.index()].clone(),
        }
    }

    fn into_array(self) -> [T; 5] {
        [self.s1, self.s3, self.s4, self.s5, self.s6]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub theta: PerProcess<Vec<f64>>,
    pub delta: PerProcess<Vec<f64>>,
    pub beta: PerProcess<f64>,
    pub psi2: Vec<f64>,
    pub psi7: Vec<f64>,
    pub psi8: f64,
}

impl From<&IrtParams> for ParamsFile {
    fn from(p: &IrtParams) -> Self {
        ParamsFile {
            t: p.n_respondents(),
            k: p.n_items(),
            theta: PerProcess::from_array(&p.theta),
            delta: PerProcess::from_array(&p.delta),
            beta: PerProcess::from_array(&p.beta),
            psi2: p.psi2.clone(),
            psi7: p.psi7.clone(),
            psi8: p.psi8,
        }
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn check_len(path: &Path, field: &str, found: usize, expected: usize) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(format_err(path, format!("field {field}: expected {expected} values, found {found}")))
    }
}

impl ParamsFile {
    pub fn into_params(self, path: &Path) -> Result<IrtParams> {
        let (t, k) = (self.t, self.k);
        let keys = LinkedProcess::ALL.map(|s| s.key());
        for (key, v) in keys.iter().zip(self.theta.clone().into_array()) {
            check_len(path, &format!("theta.{key}"), v.len(), t)?;
        }
        for (key, v) in keys.iter().zip(self.delta.clone().into_array()) {
            check_len(path, &format!("delta.{key}"), v.len(), k)?;
        }
        check_len(path, "psi2", self.psi2.len(), t)?;
        check_len(path, "psi7", self.psi7.len(), k)?;
        IrtParams::new(
            self.theta.into_array(),
            self.delta.into_array(),
            self.beta.into_array(),
            self.psi2,
            self.psi7,
            self.psi8,
        )
        .map_err(|e| format_err(path, e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableFile {
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub psi1: Vec<Vec<f64>>,
    pub psi2: Vec<f64>,
    pub psi3: Vec<Vec<f64>>,
    pub psi4: Vec<Vec<f64>>,
    pub psi5: Vec<Vec<f64>>,
    pub psi6: Vec<Vec<f64>>,
    pub psi7: Vec<f64>,
    pub psi8: f64,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

fn matrix(path: &Path, field: &str, rows: &[Vec<f64>], t: usize, k: usize) -> Result<DMatrix<f64>> {
    check_len(path, field, rows.len(), t)?;
    for (i, r) in rows.iter().enumerate() {
        check_len(path, &format!("{field}[{i}]"), r.len(), k)?;
    }
    Ok(DMatrix::from_fn(t, k, |i, j| rows[i][j]))
}

impl From<&PsiTable> for TableFile {
    fn from(tb: &PsiTable) -> Self {
        TableFile {
            t: tb.n_respondents(),
            k: tb.n_items(),
            psi1: rows(&tb.psi1),
            psi2: tb.psi2.clone(),
            psi3: rows(&tb.psi3),
            psi4: rows(&tb.psi4),
            psi5: rows(&tb.psi5),
            psi6: rows(&tb.psi6),
            psi7: tb.psi7.clone(),
            psi8: tb.psi8,
        }
    }
}

impl TableFile {
    pub fn into_table(self, path: &Path) -> Result<PsiTable> {
        let (t, k) = (self.t, self.k);
        check_len(path, "psi2", self.psi2.len(), t)?;
        check_len(path, "psi7", self.psi7.len(), k)?;
        PsiTable::new(
            matrix(path, "psi1", &self.psi1, t, k)?,
            self.psi2,
            matrix(path, "psi3", &self.psi3, t, k)?,
            matrix(path, "psi4", &self.psi4, t, k)?,
            matrix(path, "psi5", &self.psi5, t, k)?,
            matrix(path, "psi6", &self.psi6, t, k)?,
            self.psi7,
            self.psi8,
        )
        .map_err(|e| format_err(path, e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationEntry {
    pub relation: Relation,
    pub expression: String,
    pub discrepancy: f64,
}

/// A generated pair together with its provenance and verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleFile {
    pub case: String,
    pub seed: u64,
    pub eta_margin: f64,
    pub transform: EtaXiTransform,
    pub max_dist_distribution: f64,
    pub max_dist_params: f64,
    pub relations: Vec<RelationEntry>,
    pub omega: ParamsFile,
    pub omega_prime: Option<ParamsFile>,
    pub omega_table: TableFile,
    pub omega_prime_table: TableFile,
}

impl BundleFile {
    pub fn from_pair(pair: &EquivalentPair, seed: u64, eta_margin: f64) -> Self {
        BundleFile {
            case: pair.case.cli_name().into(),
            seed,
            eta_margin,
            transform: pair.transform.clone(),
            max_dist_distribution: pair.verification.max_dist_distribution,
            max_dist_params: pair.verification.max_dist_params,
            relations: Relation::ALL
                .into_iter()
                .map(|r| RelationEntry {
                    relation: r,
                    expression: r.expression().into(),
                    discrepancy: pair.equalities.discrepancy(r),
                })
                .collect(),
            omega: ParamsFile::from(&pair.omega),
            omega_prime: pair.omega_prime.as_ref().map(ParamsFile::from),
            omega_table: TableFile::from(&pair.omega_table),
            omega_prime_table: TableFile::from(&pair.omega_prime_table),
        }
    }

    pub fn case_label(&self) -> Option<CaseLabel> {
        CaseLabel::from_cli_name(&self.case)
    }
}

/// Which member of a pair bundle to load.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Member {
    Omega,
    OmegaPrime,
}

/// A model read from disk; `params` is absent when only a table was given.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedModel {
    pub params: Option<IrtParams>,
    pub table: PsiTable,
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| format_err(path, e.to_string()))
}

pub fn read_params(path: &Path) -> Result<IrtParams> {
    parse::<ParamsFile>(path, &read_text(path)?)?.into_params(path)
}

pub fn read_table(path: &Path) -> Result<PsiTable> {
    parse::<TableFile>(path, &read_text(path)?)?.into_table(path)
}

pub fn read_bundle(path: &Path) -> Result<BundleFile> {
    parse(path, &read_text(path)?)
}

pub struct BundleTables {
    pub omega: PsiTable,
    pub omega_prime: PsiTable,
}

pub fn bundle_tables(path: &Path, b: &BundleFile) -> Result<BundleTables> {
    Ok(BundleTables {
        omega: b.omega_table.clone().into_table(path)?,
        omega_prime: b.omega_prime_table.clone().into_table(path)?,
    })
}

/// Reads a parameter file, a table file (has `psi1`) or a pair bundle (has
/// `omega`; `member` selects the side).
pub fn read_model(path: &Path, member: Member) -> Result<LoadedModel> {
    let text = read_text(path)?;
    let probe: serde_json::Value = parse(path, &text)?;
    let obj = probe
        .as_object()
        .ok_or_else(|| format_err(path, "top level must be a JSON object"))?;
    if obj.contains_key("omega") {
        let b: BundleFile = parse(path, &text)?;
        let (p, tb) = match member {
            Member::Omega => (Some(b.omega), b.omega_table),
            Member::OmegaPrime => (b.omega_prime, b.omega_prime_table),
        };
        let table = tb.into_table(path)?;
        let params = p.map(|p| p.into_params(path)).transpose()?;
        Ok(LoadedModel { params, table })
    } else if obj.contains_key("psi1") {
        Ok(LoadedModel {
            params: None,
            table: parse::<TableFile>(path, &text)?.into_table(path)?,
        })
    } else {
        let params = parse::<ParamsFile>(path, &text)?.into_params(path)?;
        Ok(LoadedModel {
            table: crate::params::build_psi_table(&params),
            params: Some(params),
        })
    }
}

pub const CSV_HEADER: [&str; 10] = ["t", "k", "C", "S", "F", "M", "U", "N", "AN", "NA"];

fn csv_bytes(rows: impl Iterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// One row per cell, t-major.
pub fn distribution_csv(k_n: usize, dists: &[CategoryDistribution]) -> Vec<u8> {
    csv_bytes(dists.iter().enumerate().map(|(i, d)| {
        let mut r = vec![(i / k_n).to_string(), (i % k_n).to_string()];
        r.extend(d.0.iter().map(|&p| format_f64(p)));
        r
    }))
}

pub fn counts_csv(data: &ResponseCounts) -> Vec<u8> {
    csv_bytes(data.counts.iter().enumerate().map(|(i, c)| {
        let mut r = vec![(i / data.k).to_string(), (i % data.k).to_string()];
        r.extend(c.iter().map(|v| v.to_string()));
        r
    }))
}

/// Rows of a "t,k,C,..,NA" file, checked to cover every cell exactly once
/// in t-major order.
fn read_cell_rows<T: std::str::FromStr>(path: &Path) -> Result<(usize, usize, Vec<[T; 8]>)> {
    let text = read_text(path)?;
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| format_err(path, e.to_string()))?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(format_err(path, format!("header must be {}", CSV_HEADER.join(","))));
    }
    let mut cells: Vec<(usize, usize, [T; 8])> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| format_err(path, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<&str> {
            rec.get(i)
                .ok_or_else(|| format_err(path, format!("line {line}: missing column {}", CSV_HEADER[i])))
        };
        let idx = |i: usize| -> Result<usize> {
            field(i)?
                .trim()
                .parse()
                .map_err(|_| format_err(path, format!("line {line}, column {}: expected an index", CSV_HEADER[i])))
        };
        let (t, k) = (idx(0)?, idx(1)?);
        let mut vals = Vec::with_capacity(8);
        for (c, cat) in ResponseCategory::ALL.iter().enumerate() {
            let v = field(c + 2)?
                .trim()
                .parse()
                .map_err(|_| format_err(path, format!("line {line}, column {cat}: malformed value")))?;
            vals.push(v);
        }
        let Ok(arr) = <[T; 8]>::try_from(vals) else {
            unreachable!("eight columns parsed")
        };
        cells.push((t, k, arr));
    }
    let t_n = cells.iter().map(|c| c.0 + 1).max().unwrap_or(0);
    let k_n = cells.iter().map(|c| c.1 + 1).max().unwrap_or(0);
    if cells.is_empty() || cells.len() != t_n * k_n {
        return Err(format_err(
            path,
            format!("expected one row per cell of a T x K grid, found {} rows", cells.len()),
        ));
    }
    for (i, c) in cells.iter().enumerate() {
        if (c.0, c.1) != (i / k_n, i % k_n) {
            return Err(format_err(
                path,
                format!("row {} has (t={}, k={}); rows must be t-major", i + 1, c.0, c.1),
            ));
        }
    }
    Ok((t_n, k_n, cells.into_iter().map(|c| c.2).collect()))
}

pub fn read_counts(path: &Path) -> Result<ResponseCounts> {
    let (t, k, counts) = read_cell_rows::<u64>(path)?;
    let n = counts[0].iter().sum();
    ResponseCounts::new(t, k, n, counts).map_err(|e| format_err(path, e.to_string()))
}

pub fn read_distribution(path: &Path) -> Result<(usize, usize, Vec<CategoryDistribution>)> {
    let (t, k, rows) = read_cell_rows::<f64>(path)?;
    Ok((t, k, rows.into_iter().map(CategoryDistribution).collect()))
}

/// Writes through a temporary file in the target directory, so a failed
/// run never leaves a partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir: PathBuf = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{build_psi_table, ModelDims};
    use rand::SeedableRng;

    fn sample() -> IrtParams {
        IrtParams::random(ModelDims::new(2, 3).unwrap(), &mut rand_chacha::ChaCha8Rng::seed_from_u64(3))
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0, f64::MIN_POSITIVE, 0.7310585786300049] {
            let s = format_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(format_f64(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn params_json_round_trip() {
        let p = sample();
        let text = to_json_string(&ParamsFile::from(&p));
        let back = serde_json::from_str::<ParamsFile>(&text).unwrap().into_params(Path::new("x")).unwrap();
        assert_eq!(back, p);
        assert_eq!(to_json_string(&ParamsFile::from(&back)), text);
    }

    #[test]
    fn table_json_round_trip() {
        let tb = build_psi_table(&sample());
        let text = to_json_string(&TableFile::from(&tb));
        let back = serde_json::from_str::<TableFile>(&text).unwrap().into_table(Path::new("x")).unwrap();
        assert_eq!(back, tb);
    }

    #[test]
    fn bad_lengths_name_the_field() {
        let mut f = ParamsFile::from(&sample());
        f.theta.s4.pop();
        match f.into_params(Path::new("p.json")) {
            Err(Error::Format { message, .. }) => assert!(message.contains("theta.s4"), "{message}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let d = vec![CategoryDistribution([0.125; 8]); 6];
        let text = String::from_utf8(distribution_csv(3, &d)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,k,C,S,F,M,U,N,AN,NA");
        assert_eq!(lines.len(), 7);
        assert!(lines[6].starts_with("1,2,1.2500000000000000e-1,"));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}

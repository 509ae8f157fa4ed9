//! Command-line front end. [`run`] returns the process exit code.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::diagnostics::{
    identifiability_report, jacobian, log_likelihood, numerical_rank, simulate_table, ReportOptions, DEFAULT_REL_CUTOFF,
    DEFAULT_STEP,
};
use crate::equivalence::{
    classify_case, generate_with, verify_pair, CaseLabel, EtaBranch, GeneratorConfig, Xi, DEFAULT_ETA_MARGIN,
    DEFAULT_RETRY_LIMIT,
};
use crate::error::Error;
use crate::exec::Execution;
use crate::forward::{check_necessary_equalities, distribution_table, Relation};
use crate::io::{
    bundle_tables, counts_csv, distribution_csv, read_bundle, read_counts, read_model, to_json_string, write_atomic,
    BundleFile, LoadedModel, Member, ParamsFile,
};
use crate::params::{IrtParams, ModelDims};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_GENERATION_FAILED: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;

#[derive(Debug, Parser)]
#[command(name = "irtmpt", version, about = "Picture-naming MPT model with IRT-linked branches")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CaseArg {
    #[value(name = "theta6-zero")]
    ThetaSixZero,
    #[value(name = "delta6-zero")]
    DeltaSixZero,
    #[value(name = "both-zero")]
    BothZero,
    Neither,
}

impl From<CaseArg> for CaseLabel {
    fn from(c: CaseArg) -> Self {
        match c {
            CaseArg::ThetaSixZero => CaseLabel::ThetaSixZero,
            CaseArg::DeltaSixZero => CaseLabel::DeltaSixZero,
            CaseArg::BothZero => CaseLabel::BothZero,
            CaseArg::Neither => CaseLabel::Neither,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BranchArg {
    Below,
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MemberArg {
    Omega,
    #[value(name = "omega-prime")]
    OmegaPrime,
}

#[derive(Debug, Args)]
pub struct ModelInput {
    /// Parameter, table or pair-bundle JSON file
    pub input: PathBuf,
    /// Side of a pair bundle to use
    #[arg(long, value_enum, default_value = "omega")]
    pub member: MemberArg,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a parameter vector and an observationally equivalent partner
    Generate {
        #[arg(long = "T")]
        t: usize,
        #[arg(long = "K")]
        k: usize,
        #[arg(long, value_enum)]
        case: CaseArg,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_ETA_MARGIN)]
        eta_margin: f64,
        #[arg(long, value_enum, default_value = "below")]
        branch: BranchArg,
        #[arg(long, default_value_t = DEFAULT_RETRY_LIMIT)]
        retries: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Category distribution of every cell as CSV
    Distribution {
        #[command(flatten)]
        model: ModelInput,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check that both members of a pair bundle give the same observables
    Verify {
        bundle: PathBuf,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Numerical rank of the Jacobian at a parameter vector
    Rank {
        #[command(flatten)]
        model: ModelInput,
        #[arg(long, default_value_t = DEFAULT_STEP)]
        step: f64,
        #[arg(long, default_value_t = DEFAULT_REL_CUTOFF)]
        cutoff: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Multinomial counts per cell as CSV
    Simulate {
        #[command(flatten)]
        model: ModelInput,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Multinomial log-likelihood of a counts CSV
    Loglik {
        #[command(flatten)]
        model: ModelInput,
        counts: PathBuf,
    },
    /// Which of theta6 and delta6 vanish
    Classify {
        #[command(flatten)]
        model: ModelInput,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Case, admissible ranges, rank and equivalent partner in one document
    Report {
        #[command(flatten)]
        model: ModelInput,
        #[arg(long, default_value_t = DEFAULT_ETA_MARGIN)]
        eta_margin: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Random canonical parameter vector
    Random {
        #[arg(long = "T")]
        t: usize,
        #[arg(long = "K")]
        k: usize,
        #[arg(long)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

/// Failure carried to the exit code.
struct Exit {
    code: i32,
    message: String,
}

impl From<Error> for Exit {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::GenerationFailed { .. } => EXIT_GENERATION_FAILED,
            Error::InternalConsistency(_) => EXIT_INTERNAL,
            Error::NeitherCase | Error::InvalidDims { .. } => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        Exit {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = std::result::Result<i32, Exit>;

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Io<'_> {
    /// Writes `bytes` to `path`, or to stdout when no path was given.
    fn emit(&mut self, path: Option<&Path>, bytes: &[u8]) -> std::result::Result<(), Exit> {
        match path {
            Some(p) => write_atomic(p, bytes).map_err(Exit::from),
            None => self.out.write_all(bytes).map_err(|e| Exit {
                code: EXIT_DATA,
                message: format!("stdout: {e}"),
            }),
        }
    }

    /// Human-readable notes go to stdout when the data went to a file.
    fn note(&mut self, to_file: bool, line: &str) {
        let w: &mut dyn Write = if to_file { &mut *self.out } else { &mut *self.err };
        let _ = writeln!(w, "{line}");
    }
}

fn member(m: MemberArg) -> Member {
    match m {
        MemberArg::Omega => Member::Omega,
        MemberArg::OmegaPrime => Member::OmegaPrime,
    }
}

fn load(m: &ModelInput) -> std::result::Result<LoadedModel, Exit> {
    Ok(read_model(&m.input, member(m.member))?)
}

fn need_params(m: &ModelInput, loaded: LoadedModel) -> std::result::Result<IrtParams, Exit> {
    loaded.params.ok_or_else(|| Exit {
        code: EXIT_DATA,
        message: format!("{}: this command needs IRT parameters, not only a psi table", m.input.display()),
    })
}

/// Parses `args` (program name first) and runs the chosen subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    let mut io = Io { out, err };
    match dispatch(cli.command, &mut io) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(io.err, "error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(cmd: Command, io: &mut Io) -> CmdResult {
    match cmd {
        Command::Generate {
            t,
            k,
            case,
            seed,
            eta_margin,
            branch,
            retries,
            output,
        } => {
            if case == CaseArg::Neither {
                return Err(Exit {
                    code: EXIT_USAGE,
                    message: "case neither admits no equivalent partner; use theta6-zero, delta6-zero or both-zero"
                        .into(),
                });
            }
            let dims = ModelDims::new(t, k)?;
            let cfg = GeneratorConfig {
                eta_margin,
                branch: match branch {
                    BranchArg::Below => EtaBranch::Below,
                    BranchArg::Above => EtaBranch::Above,
                },
                retry_limit: retries,
            };
            let pair = generate_with(dims, case.into(), seed, &cfg)?;
            let bundle = BundleFile::from_pair(&pair, seed, eta_margin);
            io.emit(output.as_deref(), to_json_string(&bundle).as_bytes())?;
            let xi = match &pair.transform.xi {
                Xi::Global(x) => format!("{x:.12}"),
                Xi::PerRespondent(v) => format!("{v:.12?}"),
            };
            let to_file = output.is_some();
            io.note(to_file, &format!("eta = {:.12}", pair.transform.eta));
            io.note(to_file, &format!("xi = {xi}"));
            io.note(
                to_file,
                &format!("max_dist_distribution = {:e}", pair.verification.max_dist_distribution),
            );
            io.note(to_file, &format!("max_dist_params = {:e}", pair.verification.max_dist_params));
            Ok(EXIT_OK)
        }
        Command::Distribution { model, output } => {
            let loaded = load(&model)?;
            let dists = distribution_table(&loaded.table, Execution::default());
            io.emit(output.as_deref(), &distribution_csv(loaded.table.n_items(), &dists))?;
            Ok(EXIT_OK)
        }
        Command::Verify { bundle, tol } => {
            let b = read_bundle(&bundle)?;
            let tables = bundle_tables(&bundle, &b)?;
            let v = verify_pair(&tables.omega, &tables.omega_prime, tol)?;
            let eq = check_necessary_equalities(&tables.omega, &tables.omega_prime, tol)?;
            let _ = writeln!(io.out, "{:<22} {:<34} {:>24}  status", "relation", "expression", "discrepancy");
            for r in Relation::ALL {
                let d = eq.discrepancy(r);
                let _ = writeln!(
                    io.out,
                    "{:<22} {:<34} {:>24}  {}",
                    relation_name(r),
                    r.expression(),
                    format!("{d:e}"),
                    if d <= tol { "ok" } else { "FAIL" }
                );
            }
            let _ = writeln!(
                io.out,
                "max_dist_distribution = {:e} ({})",
                v.max_dist_distribution,
                if v.pass { "ok" } else { "FAIL" }
            );
            let _ = writeln!(io.out, "max_dist_params = {:e}", v.max_dist_params);
            Ok(if v.pass && eq.pass { EXIT_OK } else { EXIT_VERIFY_FAILED })
        }
        Command::Rank {
            model,
            step,
            cutoff,
            output,
        } => {
            let loaded = load(&model)?;
            let params = need_params(&model, loaded)?;
            let report = numerical_rank(&jacobian(&params, step)?, cutoff);
            io.emit(output.as_deref(), to_json_string(&report).as_bytes())?;
            Ok(EXIT_OK)
        }
        Command::Simulate { model, n, seed, output } => {
            let loaded = load(&model)?;
            let data = simulate_table(&loaded.table, n, seed, Execution::default())?;
            io.emit(output.as_deref(), &counts_csv(&data))?;
            Ok(EXIT_OK)
        }
        Command::Loglik { model, counts } => {
            let loaded = load(&model)?;
            let data = read_counts(&counts)?;
            let ll = log_likelihood(&loaded.table, &data)?;
            let _ = writeln!(io.out, "{ll:.12}");
            Ok(EXIT_OK)
        }
        Command::Classify { model, tol } => {
            let loaded = load(&model)?;
            let params = need_params(&model, loaded)?;
            let case = classify_case(&params, tol)?;
            let _ = writeln!(io.out, "{}", case.cli_name());
            Ok(EXIT_OK)
        }
        Command::Report {
            model,
            eta_margin,
            tol,
            output,
        } => {
            let loaded = load(&model)?;
            let params = need_params(&model, loaded)?;
            let opts = ReportOptions {
                case_tol: tol,
                eta_margin,
                ..ReportOptions::default()
            };
            let report = identifiability_report(&params, &opts)?;
            io.emit(output.as_deref(), to_json_string(&report).as_bytes())?;
            let to_file = output.is_some();
            io.note(to_file, report.summary().trim_end());
            Ok(EXIT_OK)
        }
        Command::Random { t, k, seed, output } => {
            let dims = ModelDims::new(t, k)?;
            let params = IrtParams::random(dims, &mut ChaCha20Rng::seed_from_u64(seed));
            io.emit(output.as_deref(), to_json_string(&ParamsFile::from(&params)).as_bytes())?;
            Ok(EXIT_OK)
        }
    }
}

fn relation_name(r: Relation) -> String {
    serde_json::to_value(r)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

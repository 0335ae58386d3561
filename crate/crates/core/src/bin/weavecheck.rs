use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use weavecheck::bounds::optimal_bounds;
use weavecheck::corpus::{random_atoms, random_instance, scaled_pair, with_cross_synthesis_k, worked_example, RandomSpec};
use weavecheck::frame_ops::frame_operator;
use weavecheck::io::{finite, parse_problem, write_atomically, IoError, ProblemFile, Report};
use weavecheck::numerics::{loewner_leq, CVector, OperatorMatrix, Tolerances};
use weavecheck::theorems::{
    check_atomic_equivalence, check_bessel_sum, check_characterization, check_cross_synthesis, check_perturbation_scalars,
    check_positive_gap, AtomicDirection, AtomicSystem, GapMode, StatedBounds, TheoremReport,
};
use weavecheck::weaving::{universal_bounds_exhaustive, universal_bounds_sampled};
use weavecheck::FrameError;

#[derive(Parser)]
#[command(name = "weavecheck", version, about = "Certify bounds of controlled K-g-frames and decide wovenness")]
struct Cli {
    /// PSD slack for Loewner and definiteness tests.
    #[arg(long, global = true)]
    tol_psd: Option<f64>,
    /// Relative termination width of the lower-bound bisection.
    #[arg(long, global = true)]
    tol_bisect: Option<f64>,
    /// Relative tolerance of commutation tests.
    #[arg(long, global = true)]
    tol_commute: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal bounds of a single family.
    Check {
        problem: PathBuf,
        /// Use the omega family instead of lambda.
        #[arg(long)]
        omega: bool,
        /// Also test `A KK* <= S` for this `A`.
        #[arg(long)]
        stated_lower: Option<f64>,
        /// Also test `S <= B I` for this `B`.
        #[arg(long)]
        stated_upper: Option<f64>,
    },
    /// Decide whether lambda and omega are woven.
    Weave {
        problem: PathBuf,
        #[arg(long, conflicts_with = "sample")]
        exhaustive: bool,
        /// Evaluate this many random subsets instead of all of them.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check the hypotheses of a weaving theorem and cross-check its claim.
    Theorem {
        #[arg(value_enum)]
        name: TheoremArg,
        problem: PathBuf,
        /// Candidate lower bound for the characterization.
        #[arg(long, required_if_eq("name", "characterization"))]
        a_candidate: Option<f64>,
        #[arg(long, value_enum, default_value = "per-index")]
        gap_mode: GapArg,
        #[arg(long, value_enum, default_value = "forward")]
        direction: DirectionArg,
        /// Use optimal bounds even when the file states bounds.
        #[arg(long)]
        ignore_stated: bool,
    },
    /// Emit the worked example truncated to dimension N.
    Example {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Emit a seeded random instance.
    Gen {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        dim: usize,
        /// Codomain dimensions, one per member.
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 2.0)]
        spread: f64,
        /// Members whose Gram operators commute with the controls.
        #[arg(long)]
        commuting: bool,
        /// Omega scales lambda coordinate-wise by factors in LO,HI; includes the expansion.
        #[arg(long, value_delimiter = ',', num_args = 2, value_names = ["LO", "HI"])]
        scaled: Option<Vec<f64>>,
        /// Replace K with the cross synthesis `sum C Lambda* Omega C'`.
        #[arg(long)]
        cross_synthesis: bool,
        /// Include random local frames with this many vectors beyond each codomain dimension.
        #[arg(long)]
        atoms: Option<usize>,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TheoremArg {
    BesselSum,
    Characterization,
    Perturbation,
    CrossSynthesis,
    Atomic,
    PositiveGap,
}

#[derive(Clone, Copy, ValueEnum)]
enum GapArg {
    PerIndex,
    AllSubsets,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Forward,
    Backward,
}

enum Failure {
    Io(IoError),
    Frame(FrameError),
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Io(e)
    }
}

impl From<FrameError> for Failure {
    fn from(e: FrameError) -> Self {
        Failure::Frame(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(e) => e.exit_code() as u8,
            Failure::Frame(FrameError::CapExceeded { .. }) => 4,
            Failure::Frame(FrameError::InvalidParameter(_) | FrameError::InvalidTolerance { .. }) => 2,
            Failure::Frame(_) => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Io(e) => e.to_string(),
            Failure::Frame(e) => e.to_string(),
        }
    }
}

fn tolerances(cli: &Cli) -> Result<Tolerances, Failure> {
    let d = Tolerances::default();
    Ok(Tolerances::new(
        cli.tol_psd.unwrap_or(d.psd_tol),
        cli.tol_bisect.unwrap_or(d.bisect_tol),
        cli.tol_commute.unwrap_or(d.commute_tol),
    )?)
}

fn pairs(v: &CVector) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

/// Report plus affirmative flag.
type Outcome = (Report, bool);

fn run(cli: &Cli) -> Result<Outcome, Failure> {
    let tol = tolerances(cli)?;
    match &cli.command {
        Command::Check {
            problem,
            omega,
            stated_lower,
            stated_upper,
        } => {
            let p = parse_problem(problem, &tol)?;
            let inst = p.instance(*omega, &tol)?;
            let cert = optimal_bounds(&inst, &tol)?;
            let fo = frame_operator(&inst);
            let mut stated = serde_json::Map::new();
            let mut stated_ok = true;
            if let Some(a) = stated_lower {
                let holds = loewner_leq(&inst.k_op().kk_star().scaled(*a), &fo.matrix, &tol)?;
                stated_ok &= holds;
                stated.insert("lower".into(), json!({ "value": a, "holds": holds }));
            }
            if let Some(b) = stated_upper {
                let holds = loewner_leq(&fo.matrix, &OperatorMatrix::identity(inst.dim()).scaled(*b), &tol)?;
                stated_ok &= holds;
                stated.insert("upper".into(), json!({ "value": b, "holds": holds }));
            }
            let affirmative = cert.is_frame && stated_ok;
            let report = Report {
                command: "check".into(),
                verdict: if cert.is_frame { "frame" } else { "not_frame" }.into(),
                lower: finite(cert.lower),
                upper: finite(cert.upper),
                worst_subset: None,
                tolerances: tol,
                instance_digest: p.digest,
                details: json!({
                    "family": if *omega { "omega" } else { "lambda" },
                    "is_frame": cert.is_frame,
                    "advisories": cert.advisories,
                    "lower_witness": cert.lower_witness.as_ref().map(pairs),
                    "upper_witness": pairs(&cert.upper_witness),
                    "hermitian_residual": fo.hermitian_residual,
                    "factorization_gap": fo.factorization_gap,
                    "stated_bounds": if stated.is_empty() { serde_json::Value::Null } else { stated.into() },
                }),
            };
            Ok((report, affirmative))
        }
        Command::Weave {
            problem,
            exhaustive: _,
            sample,
            seed,
        } => {
            let p = parse_problem(problem, &tol)?;
            let w = p.weave()?;
            let cert = match sample {
                Some(trials) => universal_bounds_sampled(&w, *trials, *seed, &tol)?,
                None => universal_bounds_exhaustive(&w, &tol)?,
            };
            let report = Report {
                command: "weave".into(),
                verdict: if cert.woven { "woven" } else { "not_woven" }.into(),
                lower: finite(cert.certificate.lower),
                upper: finite(cert.certificate.upper),
                worst_subset: cert.certificate.worst_subset.map(|s| s.indices()),
                tolerances: tol,
                instance_digest: p.digest,
                details: json!({
                    "mode": cert.mode,
                    "subsets_evaluated": cert.subsets_evaluated,
                    "upper_subset": cert.upper_subset.indices(),
                    "first_non_frame": cert.first_non_frame.map(|s| s.indices()),
                    "advisories": cert.certificate.advisories,
                    "lower_witness": cert.certificate.lower_witness.as_ref().map(pairs),
                }),
            };
            Ok((report, cert.woven))
        }
        Command::Theorem {
            name,
            problem,
            a_candidate,
            gap_mode,
            direction,
            ignore_stated,
        } => {
            let p = parse_problem(problem, &tol)?;
            let w = p.weave()?;
            let report = match name {
                TheoremArg::BesselSum => check_bessel_sum(&w, &tol)?,
                TheoremArg::Characterization => {
                    let a = a_candidate.ok_or_else(|| FrameError::InvalidParameter("--a-candidate is required".into()))?;
                    check_characterization(&w, a, &tol)?
                }
                TheoremArg::Perturbation => {
                    let exp = p.expansion.as_ref().ok_or_else(|| {
                        FrameError::InvalidParameter("the problem file has no `expansion` section".into())
                    })?;
                    let stated = if *ignore_stated { None } else { p.stated };
                    check_perturbation_scalars(&w, exp, stated, &tol)?
                }
                TheoremArg::CrossSynthesis => check_cross_synthesis(&w, &tol)?,
                TheoremArg::Atomic => {
                    let atoms = match &p.atoms {
                        Some(a) => a.clone(),
                        None => AtomicSystem::orthonormal(&w, &tol)?,
                    };
                    let dir = match direction {
                        DirectionArg::Forward => AtomicDirection::Forward,
                        DirectionArg::Backward => AtomicDirection::Backward,
                    };
                    check_atomic_equivalence(&w, &atoms, dir, &tol)?
                }
                TheoremArg::PositiveGap => {
                    let mode = match gap_mode {
                        GapArg::PerIndex => GapMode::PerIndex,
                        GapArg::AllSubsets => GapMode::AllSubsets,
                    };
                    check_positive_gap(&w, mode, &tol)?
                }
            };
            Ok(theorem_outcome(report, tol, p.digest))
        }
        Command::Example { dim, emit } => {
            let (w, exp) = worked_example(*dim)?;
            let file = ProblemFile::from_weave(&w).with_expansion(&exp).with_stated_bounds(StatedBounds {
                lambda_lower: 1.0,
                lambda_upper: 2.0,
                omega_upper: 5.0,
            });
            Ok((emitted("example", file, emit.as_ref(), tol)?, true))
        }
        Command::Gen {
            seed,
            dim,
            dims,
            spread,
            commuting,
            scaled,
            cross_synthesis,
            atoms,
            emit,
        } => {
            let spec = RandomSpec::new(*dim, dims.clone(), *spread, *commuting || scaled.is_some());
            let (mut w, exp) = match scaled {
                Some(range) => {
                    let (w, exp) = scaled_pair(*seed, &spec, (range[0], range[1]))?;
                    (w, Some(exp))
                }
                None => (random_instance(*seed, &spec)?, None),
            };
            if *cross_synthesis {
                w = with_cross_synthesis_k(&w)?;
            }
            let mut file = ProblemFile::from_weave(&w);
            if let Some(exp) = &exp {
                file = file.with_expansion(exp);
            }
            if let Some(extra) = atoms {
                file = file.with_atoms(&random_atoms(*seed, &w, *extra, &tol)?);
            }
            Ok((emitted("gen", file, emit.as_ref(), tol)?, true))
        }
    }
}

fn theorem_outcome(report: TheoremReport, tol: Tolerances, digest: String) -> Outcome {
    let counterexample = report.oracle_agrees == Some(false);
    let verdict = if counterexample {
        "counterexample"
    } else if report.hypotheses_hold {
        "hypotheses_hold"
    } else {
        "hypotheses_fail"
    };
    let affirmative = report.hypotheses_hold && !counterexample;
    let envelope = Report {
        command: format!("theorem {}", report.theorem.name()),
        verdict: verdict.into(),
        lower: finite(report.claimed_lower).filter(|_| report.hypotheses_hold),
        upper: finite(report.claimed_upper).filter(|_| report.hypotheses_hold),
        worst_subset: report.oracle.as_ref().and_then(|o| o.worst_subset.clone()),
        tolerances: tol,
        instance_digest: digest,
        details: serde_json::to_value(&report).expect("reports serialize"),
    };
    (envelope, affirmative)
}

fn emitted(command: &str, file: ProblemFile, emit: Option<&PathBuf>, tol: Tolerances) -> Result<Report, Failure> {
    let digest = file.digest();
    let details = match emit {
        Some(path) => {
            write_atomically(path, &file.to_json())?;
            json!({ "path": path, "members": file.lambda.len(), "ambient_dim": file.ambient_dim })
        }
        None => serde_json::to_value(&file).expect("problem files serialize"),
    };
    Ok(Report {
        command: command.into(),
        verdict: "emitted".into(),
        lower: None,
        upper: None,
        worst_subset: None,
        tolerances: tol,
        instance_digest: digest,
        details,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((report, affirmative)) => {
            // A closed stdout is not worth a panic; the exit code still carries the verdict.
            let _ = writeln!(std::io::stdout(), "{}", report.to_json());
            ExitCode::from(if affirmative { 0 } else { 1 })
        }
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.exit_code())
        }
    }
}

//! Command-line front end.
//!
//! Every command prints single-line, machine-readable records. Exit codes:
//! 0 for success or SAT, 1 for a bounded UNSAT answer or a failed diff, 2 for
//! usage, input, and parse errors.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::construction::build_formula;
use crate::grammar::{parse_grammar, Grammar, ParikhVector};
use crate::oracle::image_up_to;
use crate::presburger::{to_smt2, Formula};
use crate::solver::{
    default_bound, solve_membership, vectors_up_to, MembershipResult, SolverError,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_UNSAT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "parikh",
    version,
    about = "Parikh images of context-free grammars"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the Parikh-image formula as an SMT-LIB2 script.
    Build {
        #[arg(short = 'g', long = "grammar")]
        grammar: PathBuf,
        /// Output file; standard output if omitted.
        #[arg(short = 'o', long = "out")]
        out: Option<PathBuf>,
        /// Pin the letter counts, e.g. `a=2,b=2`.
        #[arg(short = 'z', long = "fixed")]
        fixed: Option<String>,
    },
    /// Decide whether a letter-count vector is in the Parikh image.
    Member {
        #[arg(short = 'g', long = "grammar")]
        grammar: PathBuf,
        #[arg(short = 'z', long = "vector")]
        z: String,
        /// Upper bound on every rule count.
        #[arg(long)]
        bound: Option<u64>,
        /// Print the witness word.
        #[arg(long)]
        witness: bool,
        /// Print the witness derivation tree.
        #[arg(long = "witness-tree")]
        witness_tree: bool,
    },
    /// List image vectors with every count at most `--max-norm`.
    Image {
        #[arg(short = 'g', long = "grammar")]
        grammar: PathBuf,
        #[arg(long = "max-norm")]
        max_norm: u64,
        #[arg(long)]
        bound: Option<u64>,
    },
    /// Compare the solver's image against brute-force enumeration.
    Diff {
        #[arg(short = 'g', long = "grammar")]
        grammar: PathBuf,
        #[arg(long = "max-norm")]
        max_norm: u64,
        /// Rule applications the enumeration may use.
        #[arg(long = "oracle-budget", default_value_t = 10)]
        oracle_budget: u64,
        #[arg(long)]
        bound: Option<u64>,
    },
}

struct Failure(i32, String);

type CmdResult = Result<i32, Failure>;

fn usage(msg: String) -> Failure {
    Failure(EXIT_USAGE, msg)
}

fn load(path: &Path) -> Result<Grammar, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    parse_grammar(&text).map_err(|e| usage(format!("{}:{e}", path.display())))
}

fn vector(g: &Grammar, spec: &str) -> Result<ParikhVector, Failure> {
    g.parse_vector(spec)
        .map_err(|e| usage(format!("invalid vector `{spec}`: {e}")))
}

fn internal(e: SolverError) -> Failure {
    usage(format!("internal error: {e}"))
}

fn io(e: std::io::Error) -> Failure {
    usage(format!("write failed: {e}"))
}

fn solve(g: &Grammar, z: &ParikhVector, bound: Option<u64>) -> Result<MembershipResult, Failure> {
    let b = bound.unwrap_or_else(|| default_bound(g, z));
    solve_membership(g, z, b).map_err(|e| match e {
        SolverError::ZeroBound | SolverError::Domain(_) => usage(e.to_string()),
        other => internal(other),
    })
}

fn solver_image(
    g: &Grammar,
    max_norm: u64,
    bound: Option<u64>,
) -> Result<BTreeSet<ParikhVector>, Failure> {
    let mut out = BTreeSet::new();
    for z in vectors_up_to(g.terminals().len(), max_norm) {
        if solve(g, &z, bound)?.is_sat() {
            out.insert(z);
        }
    }
    Ok(out)
}

fn cmd_build(
    g: &Grammar,
    out: Option<&Path>,
    fixed: Option<&str>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> CmdResult {
    let fixed = fixed.map(|s| vector(g, s)).transpose()?;
    let phi: Formula = build_formula(g);
    let script = to_smt2(g, &phi, fixed.as_ref());
    match out {
        Some(path) => {
            fs::write(path, &script).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        None => stdout.write_all(script.as_bytes()).map_err(io)?,
    }
    writeln!(
        stderr,
        "formula_size={} grammar_size={}",
        phi.size(),
        g.size()
    )
    .map_err(io)?;
    Ok(EXIT_OK)
}

fn join_counts(names: impl Iterator<Item = String>, values: &[u64]) -> String {
    names
        .zip(values)
        .map(|(n, v)| format!("{n}:{v}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn cmd_member(
    g: &Grammar,
    z: &str,
    bound: Option<u64>,
    witness: bool,
    witness_tree: bool,
    stdout: &mut dyn Write,
) -> CmdResult {
    let z = vector(g, z)?;
    match solve(g, &z, bound)? {
        MembershipResult::Sat { x, y, word, tree } => {
            let xs = join_counts((0..x.len()).map(|i| format!("p{i}")), &x);
            let ys = join_counts(g.nonterminals().iter().cloned(), &y);
            let mut line = format!("SAT x={xs} y={ys}");
            if witness {
                line.push_str(&format!(" w={}", g.spell(&word)));
            }
            if witness_tree {
                line.push_str(&format!(" tree={}", tree.to_bracketed(g)));
            }
            writeln!(stdout, "{line}").map_err(io)?;
            Ok(EXIT_OK)
        }
        MembershipResult::UnsatUpTo(b) => {
            writeln!(stdout, "UNSAT_UP_TO {b}").map_err(io)?;
            Ok(EXIT_UNSAT)
        }
    }
}

fn cmd_image(g: &Grammar, max_norm: u64, bound: Option<u64>, stdout: &mut dyn Write) -> CmdResult {
    for z in solver_image(g, max_norm, bound)? {
        writeln!(stdout, "{}", g.format_vector(&z)).map_err(io)?;
    }
    Ok(EXIT_OK)
}

fn cmd_diff(
    g: &Grammar,
    max_norm: u64,
    budget: u64,
    bound: Option<u64>,
    stdout: &mut dyn Write,
) -> CmdResult {
    let solver = solver_image(g, max_norm, bound)?;
    let oracle: BTreeSet<ParikhVector> = image_up_to(g, budget)
        .into_iter()
        .filter(|z| z.max_norm() <= max_norm)
        .collect();
    let missing: Vec<_> = oracle.difference(&solver).collect();
    for z in &missing {
        writeln!(stdout, "MISSING {}", g.format_vector(z)).map_err(io)?;
    }
    for z in solver.difference(&oracle) {
        writeln!(stdout, "ORACLE_BUDGET_SHORT {}", g.format_vector(z)).map_err(io)?;
    }
    if missing.is_empty() {
        writeln!(stdout, "OK").map_err(io)?;
        Ok(EXIT_OK)
    } else {
        writeln!(stdout, "FAIL {}", missing.len()).map_err(io)?;
        Ok(EXIT_UNSAT)
    }
}

/// Runs the command line `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{}", e.render());
                    EXIT_USAGE
                }
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Build {
            grammar,
            out,
            fixed,
        } => load(grammar)
            .and_then(|g| cmd_build(&g, out.as_deref(), fixed.as_deref(), stdout, stderr)),
        Command::Member {
            grammar,
            z,
            bound,
            witness,
            witness_tree,
        } => load(grammar).and_then(|g| cmd_member(&g, z, *bound, *witness, *witness_tree, stdout)),
        Command::Image {
            grammar,
            max_norm,
            bound,
        } => load(grammar).and_then(|g| cmd_image(&g, *max_norm, *bound, stdout)),
        Command::Diff {
            grammar,
            max_norm,
            oracle_budget,
            bound,
        } => load(grammar).and_then(|g| cmd_diff(&g, *max_norm, *oracle_budget, *bound, stdout)),
    };
    match result {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_grammar(text: &str, f: impl FnOnce(&str)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.cfg");
        fs::write(&path, text).unwrap();
        f(path.to_str().unwrap());
    }

    fn exec(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("parikh").chain(args.iter().copied());
        let code = run(argv, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn member_records() {
        with_grammar("S -> a S b | ", |g| {
            let (code, out, _) = exec(&[
                "member",
                "-g",
                g,
                "-z",
                "a=2,b=2",
                "--witness",
                "--witness-tree",
            ]);
            assert_eq!(code, 0);
            assert_eq!(
                out,
                "SAT x=p0:2,p1:1 y=S:1 w=aabb tree=S[0](a S[0](a S[1](()) b) b)\n"
            );
            let (code, out, _) = exec(&["member", "-g", g, "-z", "a=1"]);
            assert_eq!((code, out.as_str()), (1, "UNSAT_UP_TO 4\n"));
            let (code, _, err) = exec(&["member", "-g", g, "-z", "q=1"]);
            assert_eq!(code, 2);
            assert!(err.contains("`q`"), "{err}");
        });
    }

    #[test]
    fn build_reports_sizes_and_parse_errors() {
        with_grammar("S -> a S b | ", |g| {
            let (code, out, err) = exec(&["build", "-g", g]);
            assert_eq!(code, 0);
            assert!(out.starts_with("(set-logic QF_LIA)"));
            assert!(err.starts_with("formula_size="), "{err}");
            assert!(err.contains("grammar_size=8"));
        });
        with_grammar("S -> a\nS -> b ->\n", |g| {
            let (code, _, err) = exec(&["build", "-g", g]);
            assert_eq!(code, 2);
            assert!(err.contains(":2:8:"), "{err}");
        });
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(exec(&[]).0, 2);
        assert_eq!(
            exec(&["image", "-g", "/nonexistent/g.cfg", "--max-norm", "1"]).0,
            2
        );
        assert_eq!(exec(&["image", "--max-norm", "x"]).0, 2);
        assert_eq!(exec(&["--help"]).0, 0);
    }

    #[test]
    fn image_and_diff() {
        with_grammar("S -> a S b | ", |g| {
            let (code, out, _) = exec(&["image", "-g", g, "--max-norm", "2"]);
            assert_eq!((code, out.as_str()), (0, "a=0,b=0\na=1,b=1\na=2,b=2\n"));
            let (code, out, _) =
                exec(&["diff", "-g", g, "--max-norm", "3", "--oracle-budget", "6"]);
            assert_eq!((code, out.as_str()), (0, "OK\n"));
            let (code, out, _) =
                exec(&["diff", "-g", g, "--max-norm", "5", "--oracle-budget", "2"]);
            assert_eq!(code, 0);
            assert_eq!(
                out.lines()
                    .filter(|l| l.starts_with("ORACLE_BUDGET_SHORT"))
                    .count(),
                4
            );
            assert!(out.ends_with("OK\n"));
        });
    }
}

//! Command-line interface. Exit codes: 0 success, 1 verification failure,
//! 2 invalid input.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::certificate::{export_tree, Certificate};
use crate::generate::{run_dense, run_stable, DenseParams, StableParams};
use crate::stable::{abstract_label, ArrayDims};
use crate::structures::StructureKind;
use crate::tree::{TreeParams, TreeState};
use crate::verify::verify;
use crate::words::WordIter;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "densefree", version, about = "Build and check certificates for dense free groups of automorphisms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a construction and write its certificate.
    #[command(subcommand)]
    Gen(Gen),
    /// Check a certificate.
    Verify {
        file: PathBuf,
        /// Length bound for the out-of-budget count (default: the run's own bound).
        #[arg(long)]
        max_word_len: Option<usize>,
        /// Print the full report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Word utilities.
    #[command(subcommand)]
    Words(Words),
}

#[derive(Debug, Subcommand)]
enum Gen {
    /// Tree of generators over any structure kind.
    Tree(TreeArgs),
    /// Star extensions over an array in an equivalence structure.
    Stable(StableArgs),
    /// Dense extensions of random requirements over an array.
    Dense(DenseArgs),
}

#[derive(Debug, Subcommand)]
enum Words {
    /// List the nonempty reduced words in length-lex order.
    Enumerate {
        #[arg(long, default_value_t = 2)]
        rank: u32,
        #[arg(long, default_value_t = 3)]
        max_word_len: usize,
    },
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TreeArgs {
    #[arg(long, value_parser = parse_kind, default_value = "graph")]
    kind: StructureKind,
    #[arg(long, default_value_t = 5)]
    stages: u32,
    #[arg(long, default_value_t = 2)]
    branching: u32,
    #[arg(long, default_value_t = 4000)]
    words_per_stage: usize,
    #[arg(long, default_value_t = 2)]
    density_size: usize,
    #[arg(long, default_value_t = 4)]
    max_word_len: usize,
    #[arg(long, default_value_t = 1)]
    spread_len: usize,
    #[arg(long, default_value_t = 1)]
    fragment_growth: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct StableArgs {
    #[arg(long, value_parser = parse_kind, default_value = "eqrel")]
    kind: StructureKind,
    #[arg(long, default_value_t = 2)]
    rank: u32,
    #[arg(long, value_parser = parse_dims, default_value = "2,4,32")]
    dims: ArrayDims,
    #[arg(long, default_value_t = 4)]
    max_word_len: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct DenseArgs {
    #[arg(long, value_parser = parse_kind, default_value = "eqrel")]
    kind: StructureKind,
    #[arg(long, default_value_t = 3)]
    rank: u32,
    #[arg(long, value_parser = parse_dims, default_value = "4,16,64")]
    dims: ArrayDims,
    #[arg(long, default_value_t = 3)]
    max_word_len: usize,
    #[command(flatten)]
    common: Common,
}

fn parse_kind(s: &str) -> Result<StructureKind, String> {
    StructureKind::from_name(s).ok_or_else(|| format!("unknown kind {s:?} (expected set, graph, dlo or eqrel)"))
}

fn parse_dims(s: &str) -> Result<ArrayDims, String> {
    let parts: Vec<&str> = s.split(',').collect();
    let bad = || format!("expected T,C,R with positive integers, got {s:?}");
    if parts.len() != 3 {
        return Err(bad());
    }
    let t: u32 = parts[0].trim().parse().map_err(|_| bad())?;
    let c: u32 = parts[1].trim().parse().map_err(|_| bad())?;
    let r: u64 = parts[2].trim().parse().map_err(|_| bad())?;
    if t == 0 || c == 0 || r == 0 {
        return Err(bad());
    }
    Ok(ArrayDims::new(t, c, r))
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code.
pub fn run<I, T>(args: I, out: &mut impl Write, err: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_INVALID
        }
    }
}

fn eqrel_only(kind: StructureKind) -> Result<(), String> {
    if kind == StructureKind::EqClasses {
        Ok(())
    } else {
        Err(format!("array constructions need --kind eqrel, not {kind}"))
    }
}

fn dispatch(cmd: Command, out: &mut impl Write, err: &mut impl Write) -> Result<i32, String> {
    match cmd {
        Command::Gen(g) => {
            let (cert, dest) = match g {
                Gen::Tree(a) => {
                    let params = TreeParams {
                        kind: a.kind,
                        seed: a.common.seed,
                        stages: a.stages,
                        branching: a.branching,
                        words_per_stage: a.words_per_stage,
                        density_size: a.density_size,
                        max_word_len: a.max_word_len,
                        spread_len: a.spread_len,
                        fragment_growth: a.fragment_growth,
                    };
                    let st = TreeState::run(params).map_err(|e| e.to_string())?;
                    (export_tree(&st), a.common.out)
                }
                Gen::Stable(a) => {
                    eqrel_only(a.kind)?;
                    let params = StableParams {
                        seed: a.common.seed,
                        rank: a.rank,
                        dims: a.dims,
                        max_word_len: a.max_word_len,
                        ..StableParams::default()
                    };
                    (run_stable(&params).map_err(|e| e.to_string())?, a.common.out)
                }
                Gen::Dense(a) => {
                    eqrel_only(a.kind)?;
                    let params = DenseParams {
                        seed: a.common.seed,
                        rank: a.rank,
                        dims: a.dims,
                        max_word_len: a.max_word_len,
                        ..DenseParams::default()
                    };
                    (run_dense(&params).map_err(|e| e.to_string())?, a.common.out)
                }
            };
            let text = cert.to_json();
            match dest {
                Some(path) => fs::write(&path, text).map_err(|e| format!("{}: {e}", path.display()))?,
                None => out.write_all(text.as_bytes()).map_err(|e| e.to_string())?,
            }
            let s = &cert.summary;
            let _ = writeln!(
                err,
                "{} points, {} generators, {} witnessed words, {} density requirements",
                s.points, s.generators, s.killed_words, s.density_requirements
            );
            Ok(EXIT_OK)
        }
        Command::Verify { file, max_word_len, json } => {
            let text = fs::read_to_string(&file).map_err(|e| format!("{}: {e}", file.display()))?;
            let cert = Certificate::from_json(&text).map_err(|e| e.to_string())?;
            let max_len = max_word_len
                .or_else(|| cert.header.parameters.get("max_word_len").and_then(|v| v.as_u64()).map(|v| v as usize))
                .unwrap_or(4);
            let report = verify(&cert, max_len).map_err(|e| e.to_string())?;
            if json {
                let _ = writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            } else {
                print_report(&report, out);
            }
            Ok(if report.is_ok() { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Words(Words::Enumerate { rank, max_word_len }) => {
            if rank == 0 {
                return Err("rank must be positive".into());
            }
            let labels = (0..rank).map(abstract_label).collect();
            for w in WordIter::new(labels, max_word_len) {
                let _ = writeln!(out, "{}", serde_json::to_string(&w).expect("words serialize"));
            }
            Ok(EXIT_OK)
        }
    }
}

fn print_report(r: &crate::verify::VerifyReport, out: &mut impl Write) {
    let f = &r.freeness;
    let _ = writeln!(
        out,
        "freeness: {} checked, {} witnessed, {} failures, {} out of budget",
        f.words_checked,
        f.witnessed,
        f.failures.len(),
        f.out_of_budget
    );
    for x in &f.failures {
        let _ = writeln!(out, "  word #{} [{}]: {}", x.index, x.word, x.reason);
    }
    let d = &r.density;
    let _ = writeln!(
        out,
        "density: {} checked, {} satisfied, {} failures",
        d.requirements_checked,
        d.satisfied,
        d.failures.len()
    );
    for x in &d.failures {
        let at = x.index.map_or("unlogged".to_string(), |i| format!("#{i}"));
        let pairs: Vec<String> = x.requirement.iter().map(|(a, b)| format!("{a}->{b}")).collect();
        let _ = writeln!(out, "  requirement {at} {{{}}}: {}", pairs.join(", "), x.reason);
    }
    let i = &r.isomorphism;
    let _ = writeln!(out, "isomorphism: {} generators, {} failures", i.generators_checked, i.failures.len());
    for x in &i.failures {
        let _ = writeln!(out, "  generator {}: {}", x.label, x.reason);
    }
    let c = &r.chain;
    let _ = writeln!(out, "chains: {} links, {} failures", c.links_checked, c.failures.len());
    for x in &c.failures {
        let _ = writeln!(out, "  generator {}: {}", x.label, x.reason);
    }
    let _ = writeln!(out, "{}", if r.is_ok() { "verified" } else { "FAILED" });
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("densefree").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(call(&["gen", "tree", "--bogus"]).0, EXIT_INVALID);
        assert_eq!(call(&["gen", "tree", "--kind", "tree"]).0, EXIT_INVALID);
        assert_eq!(call(&["gen", "stable", "--kind", "graph"]).0, EXIT_INVALID);
        assert_eq!(call(&["gen", "dense", "--dims", "1,2"]).0, EXIT_INVALID);
        assert_eq!(call(&["verify", "/nonexistent/file.json"]).0, EXIT_INVALID);
        assert_eq!(call(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn words_enumerate() {
        let (code, out, _) = call(&["words", "enumerate", "--rank", "2", "--max-word-len", "2"]);
        assert_eq!(code, EXIT_OK);
        assert_eq!(out.lines().count(), 4 + 12);
        assert_eq!(out.lines().next(), Some(r#"[["0.0.free",1]]"#));
    }

    #[test]
    fn gen_then_verify() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        let p = path.to_str().unwrap();
        let (code, _, _) = call(&[
            "gen", "tree", "--kind", "dlo", "--stages", "3", "--words-per-stage", "100", "--out", p,
        ]);
        assert_eq!(code, EXIT_OK);
        let (code, out, _) = call(&["verify", p]);
        assert_eq!(code, EXIT_OK, "{out}");
        assert!(out.ends_with("verified\n"));

        let text = fs::read_to_string(&path).unwrap();
        let mut c = Certificate::from_json(&text).unwrap();
        c.killed_words[0].end = c.killed_words[0].start;
        fs::write(&path, c.to_json()).unwrap();
        let (code, out, _) = call(&["verify", p]);
        assert_eq!(code, EXIT_FAILED);
        assert!(out.contains("word #0"));
    }
}

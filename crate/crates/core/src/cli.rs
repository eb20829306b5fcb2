//! Command-line driver: files in, text out. Answer tuples print one per
//! line in canonical value order; Boolean queries print `true`/`false`;
//! exit code 0 on success, 1 on user errors, 2 on resource-cap errors.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::best::rewrite_best;
use crate::chase::{certain_answers_via_chase, chase, ChaseOutcome};
use crate::eval::{eval_fo, AnswerSet};
use crate::fixtures::{gen_coloring, gen_random, gen_tree_pair, Graph, RandomParams};
use crate::model::{Database, Egd, Value};
use crate::oracle::{
    best_oracle, certain_oracle, decide, enumerate_patterns, DecideKind, DecidePayload,
    OracleConfig, OracleError,
};
use crate::query::{
    parse_egds, parse_family_text, parse_query, parse_tuple_set_text, parse_tuple_text, Formula,
    QueryClass,
};
use crate::rewrite::{rewrite_certain, rewrite_certain_for_schema, RewriteTarget};

#[derive(Parser)]
#[command(
    name = "certalog",
    about = "Certain and best answers over databases with marked nulls",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Naive evaluation: nulls act as fresh constants.
    Eval { db: PathBuf, query: PathBuf },
    /// Certain answers: true under every consistent valuation.
    Certain {
        db: PathBuf,
        query: PathBuf,
        #[arg(long)]
        constraints: Option<PathBuf>,
        /// Defaults to datalog when constraints are given, fo otherwise.
        #[arg(long)]
        method: Option<CertainMethod>,
        /// With no consistent valuation, `full` materializes the vacuous
        /// answer set instead of reporting INCONSISTENT.
        #[arg(long)]
        vacuous: Option<VacuousMode>,
        #[arg(long, default_value_t = 6)]
        max_nulls: usize,
    },
    /// Best answers: maximal support among consistent valuations.
    Best {
        db: PathBuf,
        query: PathBuf,
        #[arg(long, default_value = "fo")]
        method: BestMethod,
        #[arg(long, default_value_t = 6)]
        max_nulls: usize,
    },
    /// Compile a certain-answer rewriting and print it.
    Rewrite {
        query: PathBuf,
        #[arg(long)]
        constraints: Option<PathBuf>,
        /// Defaults to datalog when constraints are given, fo otherwise.
        #[arg(long)]
        target: Option<TargetOpt>,
    },
    /// Chase a database with EGDs; prints INCONSISTENT on failure.
    Chase {
        db: PathBuf,
        #[arg(long)]
        constraints: PathBuf,
    },
    /// Decide one of the oracle's decision problems.
    Decide {
        kind: KindArg,
        variant: VariantArg,
        db: PathBuf,
        query: PathBuf,
        /// member: `(v1, v2)`; equal: `{(v1); (v2)}`; family: `[{..}; {..}]`.
        payload: String,
        #[arg(long)]
        constraints: Option<PathBuf>,
        #[arg(long, default_value_t = 6)]
        max_nulls: usize,
    },
    /// Generate example instances.
    Gen {
        #[command(subcommand)]
        what: GenCmd,
    },
}

#[derive(Subcommand)]
enum GenCmd {
    /// The two tree databases separating Datalog from FO rewritings.
    Tree {
        depth: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The coloring gadget for a graph given as an edge list.
    Coloring {
        graph: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// A seeded random instance over the built-in corpus schema.
    Random {
        seed: u64,
        #[arg(long)]
        facts: Option<usize>,
        #[arg(long)]
        consts: Option<usize>,
        #[arg(long)]
        nulls: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CertainMethod {
    Datalog,
    Fo,
    Chase,
    Brute,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BestMethod {
    Fo,
    Brute,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TargetOpt {
    Datalog,
    Fo,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Certain,
    Best,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Member,
    Equal,
    Family,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VacuousMode {
    Full,
}

#[derive(Debug)]
enum Failure {
    User(String),
    Resource(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::User(_) => 1,
            Failure::Resource(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::User(m) | Failure::Resource(m) => m,
        }
    }
}

fn user<E: std::fmt::Display>(e: E) -> Failure {
    Failure::User(e.to_string())
}

fn oracle_failure(e: OracleError) -> Failure {
    match e {
        OracleError::NullCapExceeded { .. } => Failure::Resource(e.to_string()),
        other => Failure::User(other.to_string()),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::User(format!("cannot read {}: {e}", path.display())))
}

fn load_db(path: &Path) -> Result<Database, Failure> {
    Database::from_text(&read(path)?)
        .map_err(|e| Failure::User(format!("{}: {e}", path.display())))
}

fn load_query(path: &Path) -> Result<Formula, Failure> {
    parse_query(&read(path)?).map_err(|e| Failure::User(format!("{}: {e}", path.display())))
}

fn load_egds(path: Option<&Path>) -> Result<Vec<Egd>, Failure> {
    match path {
        None => Ok(Vec::new()),
        Some(p) => parse_egds(&read(p)?).map_err(|e| Failure::User(format!("{}: {e}", p.display()))),
    }
}

/// All tuples over adom(db) plus the query's constants: the vacuously
/// certain answer set when no valuation is consistent.
fn full_candidate_set(d: &Database, q: &Formula) -> AnswerSet {
    let vars = q.answer_vars();
    let mut domain: BTreeSet<Value> = d.adom();
    domain.extend(q.constants().into_iter().map(Value::Const));
    let mut tuples: BTreeSet<Vec<Value>> = [Vec::new()].into_iter().collect();
    for _ in 0..vars.len() {
        tuples = tuples
            .iter()
            .flat_map(|t| {
                domain.iter().map(move |v| {
                    let mut t2 = t.clone();
                    t2.push(v.clone());
                    t2
                })
            })
            .collect();
    }
    AnswerSet { vars, tuples }
}

fn print_answers(out: &mut dyn Write, ans: &AnswerSet) {
    let _ = write!(out, "{ans}");
}

fn run_certain(
    out: &mut dyn Write,
    db: &Path,
    query: &Path,
    constraints: Option<&Path>,
    method: Option<CertainMethod>,
    vacuous: Option<VacuousMode>,
    max_nulls: usize,
) -> Result<(), Failure> {
    let d = load_db(db)?;
    let q = load_query(query)?;
    let sigma = load_egds(constraints)?;
    let method = method.unwrap_or(if sigma.is_empty() {
        CertainMethod::Fo
    } else {
        CertainMethod::Datalog
    });
    match method {
        CertainMethod::Fo => {
            if !sigma.is_empty() {
                return Err(Failure::User(
                    "the fo method does not support constraints; use datalog, chase or brute"
                        .into(),
                ));
            }
            let bundle = rewrite_certain(&q, &sigma, RewriteTarget::Fo).map_err(user)?;
            print_answers(out, &bundle.evaluate(&d).map_err(user)?);
        }
        CertainMethod::Datalog => {
            let schema = d.schema().clone();
            let bundle = rewrite_certain_for_schema(&q, &sigma, RewriteTarget::Datalog, &schema)
                .map_err(user)?;
            print_answers(out, &bundle.evaluate(&d).map_err(user)?);
        }
        CertainMethod::Chase => {
            if q.classify() > QueryClass::Ucq {
                return Err(Failure::User(
                    "the chase method is only sound for unions of conjunctive queries; \
                     with negation, naive evaluation of the chased database can return \
                     tuples that are not certain. Use the datalog method instead."
                        .into(),
                ));
            }
            match certain_answers_via_chase(&q, &d, &sigma).map_err(user)? {
                Some(ans) => print_answers(out, &ans),
                None => match vacuous {
                    Some(VacuousMode::Full) => print_answers(out, &full_candidate_set(&d, &q)),
                    None => {
                        let _ = writeln!(out, "INCONSISTENT");
                    }
                },
            }
        }
        CertainMethod::Brute => {
            let cfg = OracleConfig {
                max_nulls,
                ..OracleConfig::default()
            };
            let space = enumerate_patterns(&d, &q, &sigma, &cfg).map_err(oracle_failure)?;
            if space.consistent().next().is_none() && vacuous.is_none() {
                let _ = writeln!(out, "INCONSISTENT");
            } else {
                let ans = certain_oracle(&q, &d, &sigma, &cfg).map_err(oracle_failure)?;
                print_answers(out, &ans);
            }
        }
    }
    Ok(())
}

fn section(out: &mut dyn Write, name: &str, body: &str) {
    let _ = writeln!(out, "# ---- {name} ----");
    let _ = write!(out, "{body}");
    if !body.ends_with('\n') {
        let _ = writeln!(out);
    }
}

fn emit_artifacts(
    out: &mut dyn Write,
    dir: Option<&Path>,
    files: &[(&str, String)],
) -> Result<(), Failure> {
    match dir {
        Some(dir) => {
            fs::create_dir_all(dir)
                .map_err(|e| Failure::User(format!("cannot create {}: {e}", dir.display())))?;
            for (name, body) in files {
                let path = dir.join(name);
                fs::write(&path, body)
                    .map_err(|e| Failure::User(format!("cannot write {}: {e}", path.display())))?;
                let _ = writeln!(out, "wrote {}", path.display());
            }
        }
        None => {
            for (name, body) in files {
                section(out, name, body);
            }
        }
    }
    Ok(())
}

fn egds_text(sigma: &[Egd]) -> String {
    sigma
        .iter()
        .map(|e| format!("{e}\n"))
        .collect::<Vec<_>>()
        .join("")
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Eval { db, query } => {
            let d = load_db(&db)?;
            let q = load_query(&query)?;
            print_answers(out, &eval_fo(&q, &d).map_err(user)?);
            Ok(())
        }
        Cmd::Certain {
            db,
            query,
            constraints,
            method,
            vacuous,
            max_nulls,
        } => run_certain(
            out,
            &db,
            &query,
            constraints.as_deref(),
            method,
            vacuous,
            max_nulls,
        ),
        Cmd::Best {
            db,
            query,
            method,
            max_nulls,
        } => {
            let d = load_db(&db)?;
            let q = load_query(&query)?;
            let ans = match method {
                BestMethod::Fo => rewrite_best(&q).map_err(user)?.evaluate(&d).map_err(user)?,
                BestMethod::Brute => {
                    let cfg = OracleConfig {
                        max_nulls,
                        ..OracleConfig::default()
                    };
                    best_oracle(&q, &d, &[], &cfg).map_err(oracle_failure)?
                }
            };
            print_answers(out, &ans);
            Ok(())
        }
        Cmd::Rewrite {
            query,
            constraints,
            target,
        } => {
            let q = load_query(&query)?;
            let sigma = load_egds(constraints.as_deref())?;
            let target = match target {
                Some(TargetOpt::Datalog) => RewriteTarget::Datalog,
                Some(TargetOpt::Fo) => RewriteTarget::Fo,
                None if sigma.is_empty() => RewriteTarget::Fo,
                None => RewriteTarget::Datalog,
            };
            let bundle = rewrite_certain(&q, &sigma, target).map_err(user)?;
            let _ = write!(out, "{}", bundle.emit_text());
            Ok(())
        }
        Cmd::Chase { db, constraints } => {
            let d = load_db(&db)?;
            let sigma = load_egds(Some(&constraints))?;
            match chase(&d, &sigma).map_err(user)? {
                ChaseOutcome::Complete(chased) => {
                    let _ = write!(out, "{chased}");
                }
                ChaseOutcome::Inconsistent => {
                    let _ = writeln!(out, "INCONSISTENT");
                }
            }
            Ok(())
        }
        Cmd::Decide {
            kind,
            variant,
            db,
            query,
            payload,
            constraints,
            max_nulls,
        } => {
            let d = load_db(&db)?;
            let q = load_query(&query)?;
            let sigma = load_egds(constraints.as_deref())?;
            let payload = match variant {
                VariantArg::Member => DecidePayload::Member(parse_tuple_text(&payload).map_err(user)?),
                VariantArg::Equal => DecidePayload::Equal(parse_tuple_set_text(&payload).map_err(user)?),
                VariantArg::Family => DecidePayload::Family(parse_family_text(&payload).map_err(user)?),
            };
            let kind = match kind {
                KindArg::Certain => DecideKind::Certain,
                KindArg::Best => DecideKind::Best,
            };
            let cfg = OracleConfig {
                max_nulls,
                ..OracleConfig::default()
            };
            let verdict = decide(kind, &payload, &q, &d, &sigma, &cfg).map_err(oracle_failure)?;
            let _ = writeln!(out, "{verdict}");
            Ok(())
        }
        Cmd::Gen { what } => match what {
            GenCmd::Tree { depth, out: dir } => {
                let t = gen_tree_pair(depth).map_err(user)?;
                emit_artifacts(
                    out,
                    dir.as_deref(),
                    &[
                        ("d_n.db", t.separated.to_text()),
                        ("d_prime_n.db", t.joined.to_text()),
                        ("query.q", format!("{}\n", t.query)),
                        ("constraints.egd", egds_text(&t.sigma)),
                    ],
                )
            }
            GenCmd::Coloring { graph, out: dir } => {
                let g = Graph::from_text(&read(&graph)?).map_err(Failure::User)?;
                let (d, q) = gen_coloring(&g).map_err(user)?;
                emit_artifacts(
                    out,
                    dir.as_deref(),
                    &[("coloring.db", d.to_text()), ("query.q", format!("{q}\n"))],
                )
            }
            GenCmd::Random {
                seed,
                facts,
                consts,
                nulls,
                out: dir,
            } => {
                let mut params = RandomParams::default();
                if let Some(f) = facts {
                    params.max_facts = f.max(1);
                }
                if let Some(c) = consts {
                    params.max_consts = c.max(1);
                }
                if let Some(n) = nulls {
                    params.max_nulls = n;
                }
                let inst = gen_random(seed, &params);
                emit_artifacts(
                    out,
                    dir.as_deref(),
                    &[
                        ("instance.db", inst.db.to_text()),
                        ("query.q", format!("{}\n", inst.query)),
                        ("constraints.egd", egds_text(&inst.egds)),
                    ],
                )
            }
        },
    }
}

/// Runs the CLI on the given arguments, writing results to `out` and
/// diagnostics to `err`; returns the process exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{rendered}");
                    0
                }
                _ => {
                    let _ = write!(err, "{rendered}");
                    1
                }
            };
        }
    };
    match dispatch(cli, out) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message());
            f.code()
        }
    }
}

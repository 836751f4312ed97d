//! Command-line front end: consistency checks, repair computation,
//! preprocessing of constraint files into annotated form, and SQL emission.
//! Repairs are printed, never applied.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::datastore::{sql::emit_sql, Database};
use crate::engine::{repair_all, EngineError, EngineLimits, Mode};
use crate::model::{ActionKind, Aic, RuleInstance, UpdateSet};
use crate::oracle::{oracle_repairs, OracleError, OracleLimits};
use crate::parser::{parse, serialize, AicDocument};
use crate::partition::compute_partitions;
use crate::repair::{RepairError, RepairKind, RepairOutcome, TreeLimits, TreeStats};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REPAIRS: i32 = 1;
pub const EXIT_INDETERMINATE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;
pub const EXIT_NOINPUT: i32 = 66;
pub const EXIT_INTERNAL: i32 = 70;

#[derive(Parser)]
#[command(
    name = "aic-repair",
    version,
    about = "Check a relational database against active integrity constraints \
             and compute simple, founded, well-founded or justified repairs"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report whether the database satisfies every constraint
    Check(CheckArgs),
    /// Compute repairs and print them, one per line
    Repair(RepairArgs),
    /// Partition and stratify a constraint file into annotated form
    Preprocess(PreprocessArgs),
    /// Print the SQL query generated for each constraint body
    EmitSql(EmitSqlArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Simple,
    Founded,
    WellFounded,
    Justified,
}

impl From<KindArg> for RepairKind {
    fn from(kind: KindArg) -> RepairKind {
        match kind {
            KindArg::Simple => RepairKind::Simple,
            KindArg::Founded => RepairKind::Founded,
            KindArg::WellFounded => RepairKind::WellFounded,
            KindArg::Justified => RepairKind::Justified,
        }
    }
}

#[derive(Args)]
struct CheckArgs {
    /// Database file (JSON)
    #[arg(long)]
    db: PathBuf,
    /// Constraint file
    #[arg(long)]
    aics: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    output: OutputFormat,
}

#[derive(Args)]
struct RepairArgs {
    /// Database file (JSON)
    #[arg(long)]
    db: PathBuf,
    /// Constraint file, flat or annotated
    #[arg(long)]
    aics: PathBuf,
    #[arg(long, value_enum, default_value_t = KindArg::Simple)]
    kind: KindArg,
    /// Run independent partitions on worker threads
    #[arg(long)]
    parallel: bool,
    /// Print every validated leaf instead of only the minimal repairs
    #[arg(long)]
    show_weak: bool,
    /// Compute by brute-force enumeration instead of repair trees
    /// (exponential; refuses large instances)
    #[arg(long)]
    oracle: bool,
    /// Abort a tree that grows past this many nodes
    #[arg(long, default_value_t = 1_000_000)]
    node_budget: usize,
    /// Bound on candidate combinations carried between strata
    #[arg(long, default_value_t = 10_000)]
    combination_cap: usize,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    output: OutputFormat,
}

#[derive(Args)]
struct PreprocessArgs {
    /// Constraint file to partition and stratify
    #[arg(long)]
    aics: PathBuf,
    /// Write the annotated file here instead of stdout
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EmitSqlArgs {
    /// Constraint file
    #[arg(long)]
    aics: PathBuf,
}

/// Parses `argv` and runs the tool, returning the process exit code.
pub fn main_entry<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Check(args) => check(&args),
        Command::Repair(args) => repair(&args),
        Command::Preprocess(args) => preprocess(&args),
        Command::EmitSql(args) => emit_sql_command(&args),
    }
}

fn read_file(path: &Path) -> Result<String, i32> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("cannot read {}: {e}", path.display());
        if e.kind() == std::io::ErrorKind::NotFound {
            EXIT_NOINPUT
        } else {
            EXIT_DATA
        }
    })
}

fn load_document(path: &Path) -> Result<AicDocument, i32> {
    let text = read_file(path)?;
    parse(&text).map_err(|e| {
        eprintln!("{}: {e}", path.display());
        EXIT_DATA
    })
}

fn load_database(path: &Path) -> Result<Database, i32> {
    let text = read_file(path)?;
    Database::from_json_str(&text).map_err(|e| {
        eprintln!("{}: {e}", path.display());
        EXIT_DATA
    })
}

/// Compatibility diagnostics go to the error stream before any query runs.
fn ensure_compatible(db: &Database, aics: &[Aic]) -> Result<(), i32> {
    let issues = db.aics_compatible(aics);
    if issues.is_empty() {
        return Ok(());
    }
    for issue in issues {
        eprintln!("{issue}");
    }
    Err(EXIT_DATA)
}

#[derive(Serialize)]
struct ViolationJson {
    aic: usize,
    bindings: BTreeMap<String, String>,
}

fn check(args: &CheckArgs) -> i32 {
    match check_inner(args) {
        Ok(code) => code,
        Err(code) => code,
    }
}

fn check_inner(args: &CheckArgs) -> Result<i32, i32> {
    let db = load_database(&args.db)?;
    let doc = load_document(&args.aics)?;
    let aics = doc.aics();
    ensure_compatible(&db, &aics)?;
    let mut violations: Vec<(usize, RuleInstance)> = Vec::new();
    for (index, aic) in aics.iter().enumerate() {
        let found = db.find_violations(aic, index).map_err(|e| {
            eprintln!("{e}");
            EXIT_INTERNAL
        })?;
        violations.extend(found.into_iter().map(|i| (index, i)));
    }
    match args.output {
        OutputFormat::Text => {
            if violations.is_empty() {
                println!("consistent");
            } else {
                for (index, instance) in &violations {
                    let bindings: Vec<String> = instance
                        .substitution
                        .iter()
                        .map(|(v, c)| format!("${v}={c}"))
                        .collect();
                    if bindings.is_empty() {
                        println!("aic {} violated", index + 1);
                    } else {
                        println!("aic {} violated: {}", index + 1, bindings.join(", "));
                    }
                }
            }
        }
        OutputFormat::Json => {
            let report = serde_json::json!({
                "consistent": violations.is_empty(),
                "violations": violations
                    .iter()
                    .map(|(index, instance)| ViolationJson {
                        aic: index + 1,
                        bindings: instance.substitution.clone(),
                    })
                    .collect::<Vec<_>>(),
            });
            println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
        }
    }
    Ok(if violations.is_empty() { EXIT_OK } else { EXIT_REPAIRS })
}

#[derive(Serialize)]
struct ActionJson {
    op: String,
    table: String,
    bindings: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct StatsJson {
    nodes: usize,
    deduped: usize,
    partitions: usize,
    strata: usize,
}

#[derive(Serialize)]
struct ReportJson {
    consistent: bool,
    kind: String,
    repairs: Vec<Vec<ActionJson>>,
    #[serde(rename = "weakLeaves", skip_serializing_if = "Option::is_none")]
    weak_leaves: Option<Vec<Vec<ActionJson>>>,
    stats: StatsJson,
    truncated: bool,
}

fn action_json(action: &crate::model::UpdateAction) -> ActionJson {
    ActionJson {
        op: match action.kind {
            ActionKind::Insert => "+".to_string(),
            ActionKind::Delete => "-".to_string(),
        },
        table: action.atom.table().to_string(),
        bindings: action
            .atom
            .bindings()
            .iter()
            .map(|(c, t)| (c.clone(), t.as_const().expect("closed action").to_string()))
            .collect(),
    }
}

fn set_json(set: &UpdateSet) -> Vec<ActionJson> {
    set.iter().map(action_json).collect()
}

/// The repair report in fixed-order text form: one repair per line as
/// comma-separated actions in canonical order, or the word `consistent`.
pub fn format_text_report(
    consistent: bool,
    sets: &[UpdateSet],
) -> String {
    if consistent {
        return "consistent\n".to_string();
    }
    let mut out = String::new();
    for set in sets {
        out.push_str(&set.to_string());
        out.push('\n');
    }
    out
}

fn format_json_report(outcome: &RepairOutcome, weak_leaves: Option<&[UpdateSet]>) -> String {
    let report = ReportJson {
        consistent: outcome.consistent,
        kind: outcome.kind.to_string(),
        repairs: outcome.repairs.iter().map(set_json).collect(),
        weak_leaves: weak_leaves.map(|sets| sets.iter().map(set_json).collect()),
        stats: StatsJson {
            nodes: outcome.stats.nodes,
            deduped: outcome.stats.deduped,
            partitions: outcome.partitions,
            strata: outcome.strata,
        },
        truncated: outcome.truncated,
    };
    serde_json::to_string_pretty(&report).expect("serializable")
}

fn repair(args: &RepairArgs) -> i32 {
    match repair_inner(args) {
        Ok(code) => code,
        Err(code) => code,
    }
}

fn repair_inner(args: &RepairArgs) -> Result<i32, i32> {
    let db = load_database(&args.db)?;
    let doc = load_document(&args.aics)?;
    let aics = doc.aics();
    ensure_compatible(&db, &aics)?;
    let kind = RepairKind::from(args.kind);

    let outcome = if args.oracle {
        if args.show_weak {
            eprintln!("note: --show-weak has no effect with --oracle");
        }
        let repairs = oracle_repairs(&db, &aics, kind, &OracleLimits::default()).map_err(
            |e: OracleError| {
                eprintln!("{e}");
                EXIT_INTERNAL
            },
        )?;
        let mut consistent = true;
        for (index, aic) in aics.iter().enumerate() {
            let violated = db.find_violations(aic, index).map_err(|e| {
                eprintln!("{e}");
                EXIT_INTERNAL
            })?;
            if !violated.is_empty() {
                consistent = false;
                break;
            }
        }
        RepairOutcome {
            kind,
            consistent,
            weak_leaves: repairs.clone(),
            repairs,
            stats: TreeStats::default(),
            partitions: 1,
            strata: 1,
            truncated: false,
        }
    } else {
        let limits = EngineLimits {
            tree: TreeLimits { node_budget: args.node_budget, ..TreeLimits::default() },
            combination_cap: args.combination_cap,
        };
        let mode = if args.parallel { Mode::Parallel } else { Mode::Sequential };
        repair_all(&db, &doc, kind, mode, &limits).map_err(|e| {
            eprintln!("{e}");
            match e {
                EngineError::Repair(RepairError::NodeBudgetExceeded { .. }) => EXIT_INTERNAL,
                EngineError::Repair(RepairError::JustifiedCheckExceeded { .. }) => {
                    EXIT_INDETERMINATE
                }
                EngineError::Repair(RepairError::Store(_)) => EXIT_INTERNAL,
                EngineError::WellFoundedStratification => EXIT_DATA,
                EngineError::Incompatible(_) => EXIT_DATA,
            }
        })?
    };

    let listed: &[UpdateSet] = if args.show_weak && !args.oracle {
        &outcome.weak_leaves
    } else {
        &outcome.repairs
    };
    match args.output {
        OutputFormat::Text => {
            print!("{}", format_text_report(outcome.consistent, listed));
        }
        OutputFormat::Json => {
            let weak = (args.show_weak && !args.oracle).then_some(&outcome.weak_leaves[..]);
            println!("{}", format_json_report(&outcome, weak));
        }
    }
    if outcome.truncated {
        eprintln!("warning: candidate combinations were truncated; results are partial");
        return Ok(EXIT_INDETERMINATE);
    }
    Ok(if outcome.consistent { EXIT_OK } else { EXIT_REPAIRS })
}

fn preprocess(args: &PreprocessArgs) -> i32 {
    let doc = match load_document(&args.aics) {
        Ok(doc) => doc,
        Err(code) => return code,
    };
    let entries: Vec<_> = doc.entries().into_iter().cloned().collect();
    let annotated = compute_partitions(&entries);
    let text = serialize(&annotated);
    match &args.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text) {
                eprintln!("cannot write {}: {e}", path.display());
                return EXIT_DATA;
            }
        }
        None => print!("{text}"),
    }
    EXIT_OK
}

fn emit_sql_command(args: &EmitSqlArgs) -> i32 {
    let doc = match load_document(&args.aics) {
        Ok(doc) => doc,
        Err(code) => return code,
    };
    let queries: Vec<String> = doc.aics().iter().map(emit_sql).collect();
    println!("{}", queries.join("\n\n"));
    EXIT_OK
}

//! Command-line front end: parse terms and TRS files, dispatch cluster and
//! critical-peak analyses, and emit reports as text or JSON.
//!
//! Exit codes: 0 analysis completed (verdict in the report), 1 property
//! refuted, 2 parse error, 3 cap exceeded, 4 unknown due to caps.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

use clatter_core::geometry::{
    enumerate_clusters, internal_positions, tree_positions, ClusterError, GeometricCluster,
    Position, PositionSet,
};
use clatter_core::peaks::{
    classical_critical_peaks, decompose, is_critical, local_confluence_report, orthogonality,
    Joinability, Peak, PeakError, Verdict, DEFAULT_JOIN_DEPTH, DEFAULT_STATE_CAP,
};
use clatter_core::rewriting::{load_trs, multistep_from_specs, StepError, Trs, TrsError};
use clatter_core::terms::{parse_path, parse_term, Signature, Term, TermError};

#[derive(Parser)]
#[command(
    name = "clatter",
    version,
    about = "Cluster lattices and critical peaks for left-linear term rewriting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TermInput {
    /// Term in the syntax `ident` or `ident(t1,…,tn)`
    term: String,
    /// Declare an identifier as a variable (repeatable)
    #[arg(long = "var")]
    vars: Vec<String>,
}

#[derive(Args)]
struct PeakInput {
    /// COPS .trs file
    file: PathBuf,
    /// Source term of the peak (variables from the file's VAR block)
    #[arg(long)]
    source: String,
    /// Left multi-step: JSON list of {"rule": name, "pos": "1.2"}
    #[arg(long)]
    left: String,
    /// Right multi-step: JSON list of {"rule": name, "pos": "1.2"}
    #[arg(long)]
    right: String,
}

#[derive(Subcommand)]
enum Command {
    /// Print the tree and internal positions of a term
    Positions {
        #[command(flatten)]
        input: TermInput,
        /// Emit the report as JSON
        #[arg(long)]
        json: bool,
    },
    /// Enumerate all clusters of a term with their pattern decompositions
    Clusters {
        #[command(flatten)]
        input: TermInput,
        /// Cap on the number of internal positions
        #[arg(long, default_value_t = clatter_core::geometry::DEFAULT_ENUMERATION_CAP)]
        max_positions: usize,
        #[arg(long)]
        json: bool,
    },
    /// Round-trip a geometric cluster through its inductive form
    Iso {
        #[command(flatten)]
        input: TermInput,
        /// Positions such as `1:v`, `1.2:e` (vertex/edge)
        positions: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Enumerate classical critical pairs of a TRS
    CriticalPairs {
        /// COPS .trs file
        file: PathBuf,
        /// Check each pair against the lattice criticality test
        #[arg(long)]
        verify_lattice: bool,
        #[arg(long)]
        json: bool,
    },
    /// Decide lattice criticality of a peak given by its two multi-steps
    IsCritical {
        #[command(flatten)]
        input: PeakInput,
        #[arg(long)]
        json: bool,
    },
    /// Split a non-critical peak at its leftmost-outermost uncovered edge
    Decompose {
        #[command(flatten)]
        input: PeakInput,
        #[arg(long)]
        json: bool,
    },
    /// Check local confluence by joinability of all critical pairs
    LocalConfluence {
        /// COPS .trs file
        file: PathBuf,
        /// Depth bound for the joinability search
        #[arg(long, default_value_t = DEFAULT_JOIN_DEPTH)]
        depth: usize,
        /// State cap for the joinability search
        #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
        max_states: usize,
        #[arg(long)]
        json: bool,
    },
    /// Check orthogonality (left-linear and no critical pairs)
    Orthogonal {
        /// COPS .trs file
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

// Error wrapper carrying the documented exit code.
struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn parse(message: impl Into<String>) -> CliError {
        CliError {
            message: message.into(),
            code: 2,
        }
    }

    fn cap(message: impl Into<String>) -> CliError {
        CliError {
            message: message.into(),
            code: 3,
        }
    }

    fn refuted(message: impl Into<String>) -> CliError {
        CliError {
            message: message.into(),
            code: 1,
        }
    }
}

impl From<TermError> for CliError {
    fn from(e: TermError) -> CliError {
        CliError::parse(e.to_string())
    }
}

impl From<TrsError> for CliError {
    fn from(e: TrsError) -> CliError {
        CliError::parse(e.to_string())
    }
}

impl From<ClusterError> for CliError {
    fn from(e: ClusterError) -> CliError {
        match e {
            ClusterError::CapExceeded { .. } => CliError::cap(e.to_string()),
            other => CliError::parse(other.to_string()),
        }
    }
}

impl From<StepError> for CliError {
    fn from(e: StepError) -> CliError {
        match e {
            StepError::CapExceeded { .. } => CliError::cap(e.to_string()),
            other => CliError::parse(other.to_string()),
        }
    }
}

impl From<PeakError> for CliError {
    fn from(e: PeakError) -> CliError {
        match e {
            PeakError::PeakIsCritical | PeakError::SinglePattern | PeakError::NoPatterns => {
                CliError::refuted(e.to_string())
            }
            PeakError::Step(s) => s.into(),
            PeakError::Term(t) => t.into(),
            PeakError::Cluster(c) => c.into(),
            other => CliError::parse(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    // Die quietly when the downstream pipe closes (e.g. `clatter … | head`).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

fn run(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Positions { input, json } => positions_cmd(&input, json),
        Command::Clusters {
            input,
            max_positions,
            json,
        } => clusters_cmd(&input, max_positions, json),
        Command::Iso {
            input,
            positions,
            json,
        } => iso_cmd(&input, &positions, json),
        Command::CriticalPairs {
            file,
            verify_lattice,
            json,
        } => critical_pairs_cmd(&file, verify_lattice, json),
        Command::IsCritical { input, json } => is_critical_cmd(&input, json),
        Command::Decompose { input, json } => decompose_cmd(&input, json),
        Command::LocalConfluence {
            file,
            depth,
            max_states,
            json,
        } => local_confluence_cmd(&file, depth, max_states, json),
        Command::Orthogonal { file, json } => orthogonal_cmd(&file, json),
    }
}

fn parse_input_term(input: &TermInput) -> Result<Term, CliError> {
    let vars: BTreeSet<String> = input.vars.iter().cloned().collect();
    Ok(parse_term(&input.term, &vars, &mut Signature::new())?)
}

fn positions_list(set: &PositionSet) -> Value {
    json!(set.iter().map(Position::to_string).collect::<Vec<_>>())
}

fn positions_cmd(input: &TermInput, json_out: bool) -> Result<u8, CliError> {
    let term = parse_input_term(input)?;
    let tree = tree_positions(&term);
    let internal = internal_positions(&term);
    if json_out {
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({
                "term": term.to_string(),
                "treePositions": positions_list(&tree),
                "internalPositions": positions_list(&internal),
            }))
            .expect("serializable")
        );
    } else {
        println!("term: {term}");
        println!("tree positions: {tree}");
        println!("internal positions: {internal}");
    }
    Ok(0)
}

fn clusters_cmd(input: &TermInput, max_positions: usize, json_out: bool) -> Result<u8, CliError> {
    let term = parse_input_term(input)?;
    let clusters = enumerate_clusters(&term, max_positions)?;
    let entries: Vec<(PositionSet, Vec<PositionSet>)> = clusters
        .iter()
        .map(|c| (c.positions().clone(), c.components()))
        .collect();
    if json_out {
        let list: Vec<Value> = entries
            .iter()
            .map(|(positions, patterns)| {
                json!({
                    "positions": positions_list(positions),
                    "patterns": patterns.iter().map(positions_list).collect::<Vec<_>>(),
                })
            })
            .collect();
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({
                "term": term.to_string(),
                "count": entries.len(),
                "clusters": list,
            }))
            .expect("serializable")
        );
    } else {
        println!("term: {term}");
        println!("count: {}", entries.len());
        for (positions, patterns) in &entries {
            let rendered: Vec<String> = patterns.iter().map(PositionSet::to_string).collect();
            println!("cluster {positions} patterns [{}]", rendered.join(", "));
        }
    }
    Ok(0)
}

fn iso_cmd(input: &TermInput, position_args: &[String], json_out: bool) -> Result<u8, CliError> {
    let term = parse_input_term(input)?;
    let positions: PositionSet = position_args
        .iter()
        .map(|text| Position::parse(text))
        .collect::<Result<_, _>>()?;
    let cluster = GeometricCluster::new(term.clone(), positions.clone())?;
    let inductive = cluster.to_inductive();
    let round_trip = inductive.to_geometric();
    assert_eq!(round_trip, cluster, "isomorphism round-trip");
    if json_out {
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({
                "term": term.to_string(),
                "positions": positions_list(&positions),
                "inductive": inductive.to_json(),
                "roundTrip": positions_list(round_trip.positions()),
            }))
            .expect("serializable")
        );
    } else {
        println!("term: {term}");
        println!("positions: {positions}");
        println!("inductive: {inductive}");
        println!("round trip: {}", round_trip.positions());
    }
    Ok(0)
}

fn load_file(path: &PathBuf) -> Result<Trs, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::parse(format!("cannot read {}: {e}", path.display())))?;
    Ok(load_trs(&text)?)
}

fn critical_pairs_cmd(
    path: &PathBuf,
    verify_lattice: bool,
    json_out: bool,
) -> Result<u8, CliError> {
    let trs = load_file(path)?;
    let pairs = classical_critical_peaks(&trs);
    let mut mismatches = 0usize;
    let rendered: Vec<Value> = pairs
        .iter()
        .map(|pair| {
            let mut value = pair.to_json();
            if verify_lattice {
                let report = is_critical(&pair.peak);
                if !report.is_critical {
                    mismatches += 1;
                }
                value["latticeCritical"] = json!(report.is_critical);
            }
            value
        })
        .collect();
    if json_out {
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({
                "count": pairs.len(),
                "criticalPairs": rendered,
            }))
            .expect("serializable")
        );
    } else {
        println!("critical pairs: {}", pairs.len());
        for value in &rendered {
            let lattice = if verify_lattice {
                format!(
                    " lattice-critical={}",
                    value["latticeCritical"].as_bool().unwrap_or(false)
                )
            } else {
                String::new()
            };
            println!(
                "{} <- {} -> {} (outer {} at eps, inner {} at {}){}",
                value["targets"][0].as_str().unwrap_or(""),
                value["source"].as_str().unwrap_or(""),
                value["targets"][1].as_str().unwrap_or(""),
                value["outer"].as_str().unwrap_or(""),
                value["inner"].as_str().unwrap_or(""),
                value["position"].as_str().unwrap_or(""),
                lattice
            );
        }
    }
    if verify_lattice && mismatches > 0 {
        eprintln!("error: {mismatches} classical pair(s) failed the lattice criticality test");
        return Ok(1);
    }
    Ok(0)
}

#[derive(Deserialize)]
struct RedexSpec {
    rule: String,
    pos: String,
}

fn build_peak(input: &PeakInput) -> Result<(Trs, Peak), CliError> {
    let trs = load_file(&input.file)?;
    let mut sig = trs.signature().clone();
    let source = parse_term(&input.source, trs.declared_variables(), &mut sig)?;
    let parse_specs = |text: &str| -> Result<Vec<(String, Vec<usize>)>, CliError> {
        let specs: Vec<RedexSpec> = serde_json::from_str(text)
            .map_err(|e| CliError::parse(format!("bad step spec: {e}")))?;
        specs
            .into_iter()
            .map(|s| Ok((s.rule, parse_path(&s.pos)?)))
            .collect()
    };
    let left = multistep_from_specs(&source, &parse_specs(&input.left)?, &trs)?;
    let right = multistep_from_specs(&source, &parse_specs(&input.right)?, &trs)?;
    let peak = Peak::new(left, right)?;
    Ok((trs, peak))
}

fn is_critical_cmd(input: &PeakInput, json_out: bool) -> Result<u8, CliError> {
    let (_, peak) = build_peak(input)?;
    let report = is_critical(&peak);
    if json_out {
        let mut value = serde_json::to_value(&report).expect("serializable");
        value["peak"] = peak.to_json();
        println!(
            "{}",
            serde_json::to_string_pretty(&value).expect("serializable")
        );
    } else {
        println!("source: {}", peak.source());
        println!(
            "verdict: {}",
            if report.is_critical {
                "critical"
            } else {
                "not critical"
            }
        );
        println!("join: {}", report.join_positions);
        println!("top: {}", report.top_positions);
        println!("missing: {}", report.missing);
        println!("trivial: {}", report.is_trivial);
        println!("overlap size: {}", report.overlap_size);
    }
    Ok(0)
}

fn decompose_cmd(input: &PeakInput, json_out: bool) -> Result<u8, CliError> {
    let (_, peak) = build_peak(input)?;
    let decomposition = decompose(&peak)?;
    let outer = &decomposition.outer;
    let inner = &decomposition.inner;
    if json_out {
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({
                "splitEdge": decomposition.split_edge.to_string(),
                "outer": outer.to_json(),
                "inner": inner.to_json(),
            }))
            .expect("serializable")
        );
    } else {
        let specs = |m: &clatter_core::MultiStep| -> String {
            let rendered: Vec<String> = m
                .occurrence_specs()
                .into_iter()
                .map(|(rule, pos)| format!("{rule}@{}", clatter_core::terms::format_path(&pos)))
                .collect();
            format!("[{}]", rendered.join(", "))
        };
        println!("split edge: {}", decomposition.split_edge);
        for (label, peak) in [("outer", outer), ("inner", inner)] {
            println!(
                "{label} peak over {}: left {}, right {}",
                peak.source(),
                specs(peak.left()),
                specs(peak.right())
            );
        }
    }
    Ok(0)
}

fn local_confluence_cmd(
    path: &PathBuf,
    depth: usize,
    max_states: usize,
    json_out: bool,
) -> Result<u8, CliError> {
    let trs = load_file(path)?;
    let report = local_confluence_report(&trs, depth, max_states);
    if json_out {
        println!(
            "{}",
            serde_json::to_string_pretty(&report.to_json()).expect("serializable")
        );
    } else {
        let verdict = match report.verdict {
            Verdict::LocallyConfluent => "locally confluent",
            Verdict::NotLocallyConfluent => "NOT locally confluent",
            Verdict::Unknown => "unknown",
        };
        println!("verdict: {verdict}");
        for (pair, joinability) in &report.pairs {
            let witness = match joinability {
                Joinability::Joinable(w) => format!(" at {}", w.witness),
                _ => String::new(),
            };
            println!(
                "pair ({}, {}) from {}: {}{}",
                pair.targets.0,
                pair.targets.1,
                pair.peak.source(),
                joinability.verdict(),
                witness
            );
        }
        for (a, b) in &report.counterexamples {
            println!("counterexample: ({a}, {b})");
        }
    }
    Ok(match report.verdict {
        Verdict::LocallyConfluent => 0,
        Verdict::NotLocallyConfluent => 1,
        Verdict::Unknown => 4,
    })
}

fn orthogonal_cmd(path: &PathBuf, json_out: bool) -> Result<u8, CliError> {
    let trs = load_file(path)?;
    let report = orthogonality(&trs);
    if json_out {
        println!(
            "{}",
            serde_json::to_string_pretty(&report.to_json()).expect("serializable")
        );
    } else {
        println!("left-linear: {}", report.left_linear);
        println!("critical pairs: {}", report.critical_pairs.len());
        println!("orthogonal: {}", report.orthogonal);
    }
    Ok(if report.orthogonal { 0 } else { 1 })
}

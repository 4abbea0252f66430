//! Command-line front end for the net semantics workbench.
//!
//! Exit codes: 0 success / true / holds-within-bound, 1 false / violated
//! (witness printed), 2 unknown (a bound was exhausted), 64 usage error,
//! 65 input parse error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use ptsem_core::conflict::{check_structural, find_conflicts};
use ptsem_core::format::{export_process, parse_net, write_net, ProcessFormat};
use ptsem_core::generate::{
    random_net, random_one_safe_net, random_structural_conflict_net, GenParams,
};
use ptsem_core::net::{Net, Word};
use ptsem_core::oracle;
use ptsem_core::process::{build_process, pi_members, Process, TokenPolicy};
use ptsem_core::swap::{bdify, maximal_processes, swap_equivalent, SwapMethod, Uniqueness};
use ptsem_core::traces::{
    enumerate_runs, run_conflict_free, trace_class, trace_equivalent, FiniteRun,
};
use ptsem_core::verdict::Status;

const EXIT_FALSE: u8 = 1;
const EXIT_UNKNOWN: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_PARSE: u8 = 65;

#[derive(Parser)]
#[command(
    name = "ptsem",
    version,
    about = "Analyse place/transition nets: firing, processes, swapping and trace equivalence, conflicts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum PolicyArg {
    #[default]
    OldestFirst,
    NewestFirst,
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum MethodArg {
    #[default]
    ViaTraces,
    DirectBfs,
}

impl From<MethodArg> for SwapMethod {
    fn from(value: MethodArg) -> Self {
        match value {
            MethodArg::ViaTraces => SwapMethod::ViaTraces,
            MethodArg::DirectBfs => SwapMethod::DirectBfs,
        }
    }
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum FormatArg {
    #[default]
    Structured,
    Graph,
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum NetKind {
    #[default]
    Plain,
    Structural,
    OneSafe,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a net file and check the net invariants
    Validate { net: PathBuf },
    /// Fire a transition sequence from the initial marking
    Fire {
        net: PathBuf,
        /// Whitespace-separated transition names
        #[arg(long)]
        seq: String,
    },
    /// List reachable markings with one witness sequence each
    Reach {
        net: PathBuf,
        #[arg(long, default_value_t = 12)]
        depth: usize,
        #[arg(long, default_value_t = 16)]
        tokens: u64,
    },
    /// Build the process of a firing sequence and export it
    Process {
        net: PathBuf,
        #[arg(long)]
        seq: String,
        #[arg(long, value_enum, default_value_t)]
        policy: PolicyArg,
        /// Comma-separated token choices, overriding the policy
        #[arg(long)]
        choices: Option<String>,
        #[arg(long, value_enum, default_value_t)]
        format: FormatArg,
        /// Write the export here instead of standard output
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the linearisations of the process of a sequence
    Lin {
        net: PathBuf,
        #[arg(long)]
        seq: String,
        #[arg(long, value_enum, default_value_t)]
        policy: PolicyArg,
        #[arg(long)]
        choices: Option<String>,
    },
    /// Enumerate the processes of a sequence
    Pi {
        net: PathBuf,
        #[arg(long)]
        seq: String,
        #[arg(long, default_value_t = 10000)]
        limit: usize,
        /// Keep every concrete process instead of one per isomorphism class
        #[arg(long)]
        no_dedup: bool,
    },
    /// Decide swapping equivalence of the processes of two sequences
    SwapEquiv {
        net: PathBuf,
        #[arg(long)]
        seq: String,
        #[arg(long)]
        choices: Option<String>,
        #[arg(long)]
        seq2: String,
        #[arg(long)]
        choices2: Option<String>,
        #[arg(long, value_enum, default_value_t)]
        method: MethodArg,
    },
    /// Print the trace class of a firing sequence
    TraceClass {
        net: PathBuf,
        #[arg(long)]
        seq: String,
    },
    /// Decide trace equivalence of two firing sequences
    TraceEquiv {
        net: PathBuf,
        #[arg(long)]
        seq: String,
        #[arg(long)]
        seq2: String,
    },
    /// Enumerate trace classes up to a depth and report the maximal runs
    Runs {
        net: PathBuf,
        #[arg(long, default_value_t = 12)]
        depth: usize,
    },
    /// Check the run of a sequence for conflict-freeness
    RunConflictFree {
        net: PathBuf,
        #[arg(long)]
        seq: String,
        #[arg(long, default_value_t = 4)]
        gmax: u64,
    },
    /// List minimal semantic conflicts at reachable markings
    Conflicts {
        net: PathBuf,
        #[arg(long, default_value_t = 12)]
        depth: usize,
        #[arg(long, default_value_t = 16)]
        tokens: u64,
        #[arg(long, default_value_t = 4)]
        gmax: u64,
    },
    /// Check whether the net is a structural conflict net
    Structural {
        net: PathBuf,
        #[arg(long, default_value_t = 12)]
        depth: usize,
        #[arg(long, default_value_t = 16)]
        tokens: u64,
    },
    /// Swap classes of the maximal processes within a depth bound
    MaxProcesses {
        net: PathBuf,
        #[arg(long, default_value_t = 12)]
        depth: usize,
    },
    /// The run of the process of a sequence: all classes below it
    Bdify {
        net: PathBuf,
        #[arg(long)]
        seq: String,
        #[arg(long, value_enum, default_value_t)]
        policy: PolicyArg,
        #[arg(long)]
        choices: Option<String>,
    },
    /// Generate a random net and print it in the net format
    Generate {
        #[arg(long, default_value_t = 4)]
        places: usize,
        #[arg(long, default_value_t = 3)]
        transitions: usize,
        #[arg(long, default_value_t = 0.3)]
        density: f64,
        #[arg(long, default_value_t = 2)]
        max_weight: u64,
        #[arg(long, default_value_t = 2)]
        max_tokens: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t)]
        kind: NetKind,
        /// Rejection-sampling attempt cap for filtered kinds
        #[arg(long, default_value_t = 500)]
        attempts: usize,
        /// Exploration depth used by the filters
        #[arg(long, default_value_t = 8)]
        depth: usize,
        #[arg(long, default_value_t = 16)]
        tokens: u64,
    },
    /// Run the cross-checking property suites
    Theorems {
        #[arg(long, default_value_t = 189)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(Failure { code, message }) => {
            eprintln!("{message}");
            ExitCode::from(code)
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn parse(message: impl ToString) -> Failure {
        Failure {
            code: EXIT_PARSE,
            message: message.to_string(),
        }
    }

    fn result(message: impl ToString) -> Failure {
        Failure {
            code: EXIT_FALSE,
            message: message.to_string(),
        }
    }
}

fn load_net(path: &Path) -> Result<Arc<Net>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::parse(format!("cannot read {}: {e}", path.display())))?;
    parse_net(&text)
        .map(Arc::new)
        .map_err(|e| Failure::parse(format!("{}:\n{e}", path.display())))
}

fn parse_seq(net: &Net, seq: &str) -> Result<Word, Failure> {
    net.parse_word(seq)
        .map_err(|e| Failure::parse(format!("bad sequence `{seq}`: {e}")))
}

fn parse_choices(raw: &Option<String>) -> Result<Option<Vec<usize>>, Failure> {
    let Some(raw) = raw else { return Ok(None) };
    let parsed: Result<Vec<usize>, _> = raw
        .split(',')
        .map(str::trim)
        .filter(|part| !part.is_empty())
        .map(str::parse)
        .collect();
    match parsed {
        Ok(choices) => Ok(Some(choices)),
        Err(_) => Err(Failure {
            code: EXIT_USAGE,
            message: format!("bad --choices `{raw}`: expected comma-separated indices"),
        }),
    }
}

fn policy_of(policy: PolicyArg, choices: &Option<String>) -> Result<TokenPolicy, Failure> {
    Ok(match parse_choices(choices)? {
        Some(list) => TokenPolicy::Explicit(list),
        None => match policy {
            PolicyArg::OldestFirst => TokenPolicy::OldestFirst,
            PolicyArg::NewestFirst => TokenPolicy::NewestFirst,
        },
    })
}

fn build(
    net: &Arc<Net>,
    seq: &str,
    policy: PolicyArg,
    choices: &Option<String>,
) -> Result<Process, Failure> {
    let word = parse_seq(net, seq)?;
    let policy = policy_of(policy, choices)?;
    build_process(net, &word, &policy).map_err(Failure::result)
}

fn show_choices(choices: &[usize]) -> String {
    if choices.is_empty() {
        "-".to_string()
    } else {
        choices
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

fn run(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Validate { net } => {
            let net = load_net(&net)?;
            println!(
                "ok: {} places, {} transitions, {} arcs",
                net.places().count(),
                net.transitions().count(),
                net.arcs().count()
            );
            Ok(0)
        }
        Command::Fire { net, seq } => {
            let net = load_net(&net)?;
            let word = parse_seq(&net, &seq)?;
            match net.fire_sequence(net.initial_marking(), &word) {
                Ok(marking) => {
                    println!("final marking {}", net.show_multiset(&marking));
                    Ok(0)
                }
                Err(e) => Err(Failure::result(format!("not a firing sequence: {e}"))),
            }
        }
        Command::Reach { net, depth, tokens } => {
            let net = load_net(&net)?;
            let exploration = net.explore(depth, tokens);
            for state in &exploration.states {
                println!(
                    "marking {} via \"{}\"",
                    net.show_multiset(&state.marking),
                    net.show_word(&state.witness)
                );
            }
            println!(
                "{} markings, truncated: {}",
                exploration.states.len(),
                exploration.truncated
            );
            Ok(if exploration.truncated {
                EXIT_UNKNOWN
            } else {
                0
            })
        }
        Command::Process {
            net,
            seq,
            policy,
            choices,
            format,
            out,
        } => {
            let net = load_net(&net)?;
            let process = build(&net, &seq, policy, &choices)?;
            let text = export_process(
                &process,
                match format {
                    FormatArg::Structured => ProcessFormat::Structured,
                    FormatArg::Graph => ProcessFormat::Graph,
                },
            );
            match out {
                Some(path) => std::fs::write(&path, text).map_err(|e| {
                    Failure::result(format!("cannot write {}: {e}", path.display()))
                })?,
                None => print!("{text}"),
            }
            Ok(0)
        }
        Command::Lin {
            net,
            seq,
            policy,
            choices,
        } => {
            let net = load_net(&net)?;
            let process = build(&net, &seq, policy, &choices)?;
            let linearisations = process.linearisations();
            for word in &linearisations {
                println!("{}", net.show_word(word));
            }
            println!("{} linearisations", linearisations.len());
            Ok(0)
        }
        Command::Pi {
            net,
            seq,
            limit,
            no_dedup,
        } => {
            let net = load_net(&net)?;
            let word = parse_seq(&net, &seq)?;
            let members = pi_members(&net, &word, !no_dedup, limit).map_err(Failure::result)?;
            for (i, (process, choices)) in
                members.processes.iter().zip(&members.choices).enumerate()
            {
                println!(
                    "process {}: {} place occurrences, {} transition occurrences, choices {}",
                    i + 1,
                    process.place_count(),
                    process.transition_count(),
                    show_choices(choices)
                );
            }
            if no_dedup {
                println!(
                    "{} processes ({} enumerated), truncated: {}",
                    members.processes.len(),
                    members.enumerated,
                    members.truncated
                );
            } else {
                println!(
                    "{} processes up to isomorphism ({} enumerated), truncated: {}",
                    members.processes.len(),
                    members.enumerated,
                    members.truncated
                );
            }
            Ok(if members.truncated { EXIT_UNKNOWN } else { 0 })
        }
        Command::SwapEquiv {
            net,
            seq,
            choices,
            seq2,
            choices2,
            method,
        } => {
            let net = load_net(&net)?;
            let first = build(&net, &seq, PolicyArg::OldestFirst, &choices)?;
            let second = build(&net, &seq2, PolicyArg::OldestFirst, &choices2)?;
            let equivalent = swap_equivalent(&first, &second, method.into());
            println!("swap equivalent: {equivalent}");
            Ok(if equivalent { 0 } else { EXIT_FALSE })
        }
        Command::TraceClass { net, seq } => {
            let net = load_net(&net)?;
            let word = parse_seq(&net, &seq)?;
            let class = trace_class(&net, &word).map_err(Failure::result)?;
            println!(
                "class of \"{}\": size {}, length {}, representative \"{}\"",
                net.show_word(&word),
                class.size(),
                class.word_len(),
                net.show_word(class.representative())
            );
            for member in class.members() {
                println!("{}", net.show_word(member));
            }
            Ok(0)
        }
        Command::TraceEquiv { net, seq, seq2 } => {
            let net = load_net(&net)?;
            let left = parse_seq(&net, &seq)?;
            let right = parse_seq(&net, &seq2)?;
            let equivalent = trace_equivalent(&net, &left, &right).map_err(Failure::result)?;
            println!("trace equivalent: {equivalent}");
            Ok(if equivalent { 0 } else { EXIT_FALSE })
        }
        Command::Runs { net, depth } => {
            let net = load_net(&net)?;
            let runs = enumerate_runs(&net, depth);
            for (i, class) in runs.maximal_classes().enumerate() {
                println!(
                    "maximal run {}: {} sequences, representative \"{}\"",
                    i + 1,
                    class.size(),
                    net.show_word(class.representative())
                );
            }
            println!(
                "{} classes, {} maximal runs, truncated: {}",
                runs.classes.len(),
                runs.maximal.len(),
                runs.truncated
            );
            let verdict = if runs.truncated {
                Uniqueness::Unknown
            } else if runs.maximal.len() == 1 {
                Uniqueness::Unique
            } else {
                Uniqueness::Multiple
            };
            println!("verdict: {verdict}");
            Ok(match verdict {
                Uniqueness::Unique => 0,
                Uniqueness::Multiple => EXIT_FALSE,
                Uniqueness::Unknown => EXIT_UNKNOWN,
            })
        }
        Command::RunConflictFree { net, seq, gmax } => {
            let net = load_net(&net)?;
            let word = parse_seq(&net, &seq)?;
            let class = trace_class(&net, &word).map_err(Failure::result)?;
            let run = FiniteRun::of_class(&net, &class);
            let verdict = run_conflict_free(&net, &run, gmax);
            match verdict.status {
                Status::HoldsWithinBound => {
                    println!("conflict-free: holds-within-bound (gmax {gmax})");
                    Ok(0)
                }
                Status::Violated => {
                    let witness = verdict.witness.expect("violations carry witnesses");
                    println!(
                        "violated: after \"{}\" at {}, multiset {} splits the run",
                        net.show_word(&witness.sequence),
                        net.show_multiset(&witness.marking),
                        net.show_multiset(&witness.multiset)
                    );
                    Ok(EXIT_FALSE)
                }
                Status::Unknown => Ok(EXIT_UNKNOWN),
            }
        }
        Command::Conflicts {
            net,
            depth,
            tokens,
            gmax,
        } => {
            let net = load_net(&net)?;
            let scan = find_conflicts(&net, depth, tokens, gmax);
            for witness in &scan.witnesses {
                println!(
                    "conflict: sequence \"{}\", marking {}, multiset {}",
                    net.show_word(&witness.sequence),
                    net.show_multiset(&witness.marking),
                    net.show_multiset(&witness.multiset)
                );
            }
            if scan.witnesses.is_empty() {
                if scan.truncated {
                    println!(
                        "no conflicts found, but exploration was truncated ({})",
                        scan.bounds
                    );
                    Ok(EXIT_UNKNOWN)
                } else {
                    println!("conflict-free within bounds ({})", scan.bounds);
                    Ok(0)
                }
            } else {
                println!(
                    "{} minimal conflicts, truncated: {}",
                    scan.witnesses.len(),
                    scan.truncated
                );
                Ok(EXIT_FALSE)
            }
        }
        Command::Structural { net, depth, tokens } => {
            let net = load_net(&net)?;
            let verdict = check_structural(&net, depth, tokens);
            match verdict.status {
                Status::HoldsWithinBound => {
                    println!(
                        "structural conflict net: holds-within-bound ({})",
                        verdict.bounds
                    );
                    Ok(0)
                }
                Status::Violated => {
                    let w = verdict.witness.expect("violations carry witnesses");
                    let step = if w.pair.0 == w.pair.1 {
                        format!("{{{0}, {0}}}", net.name(w.pair.0))
                    } else {
                        format!("{{{}, {}}}", net.name(w.pair.0), net.name(w.pair.1))
                    };
                    println!(
                        "violated: marking {} (via \"{}\") enables step {step} sharing preplace {}",
                        net.show_multiset(&w.marking),
                        net.show_word(&w.sequence),
                        w.shared
                            .iter()
                            .map(|&s| net.name(s))
                            .collect::<Vec<_>>()
                            .join(", ")
                    );
                    Ok(EXIT_FALSE)
                }
                Status::Unknown => {
                    println!("unknown: exploration truncated ({})", verdict.bounds);
                    Ok(EXIT_UNKNOWN)
                }
            }
        }
        Command::MaxProcesses { net, depth } => {
            let net = load_net(&net)?;
            let result = maximal_processes(&net, depth);
            for (i, class) in result.classes.iter().enumerate() {
                println!(
                    "class {}: representative \"{}\", {} transitions",
                    i + 1,
                    net.show_word(class.representative_word()),
                    class.transition_count()
                );
            }
            println!(
                "{} maximal process classes within depth {depth}, verdict: {}",
                result.classes.len(),
                result.verdict
            );
            Ok(match result.verdict {
                Uniqueness::Unique => 0,
                Uniqueness::Multiple => EXIT_FALSE,
                Uniqueness::Unknown => EXIT_UNKNOWN,
            })
        }
        Command::Bdify {
            net,
            seq,
            policy,
            choices,
        } => {
            let net = load_net(&net)?;
            let process = build(&net, &seq, policy, &choices)?;
            let run = bdify(&process);
            for class in run.classes() {
                println!(
                    "class: representative \"{}\", {} transitions",
                    net.show_word(class.representative_word()),
                    class.transition_count()
                );
            }
            println!("{} classes in the run", run.class_count());
            Ok(0)
        }
        Command::Generate {
            places,
            transitions,
            density,
            max_weight,
            max_tokens,
            seed,
            kind,
            attempts,
            depth,
            tokens,
        } => {
            let params = GenParams {
                place_count: places,
                transition_count: transitions,
                arc_density: density,
                max_weight,
                max_initial_tokens: max_tokens,
                seed,
            };
            let net = match kind {
                NetKind::Plain => Ok(random_net(&params)),
                NetKind::Structural => {
                    random_structural_conflict_net(&params, depth, tokens, attempts)
                }
                NetKind::OneSafe => random_one_safe_net(&params, depth, attempts),
            };
            match net {
                Ok(net) => {
                    print!("{}", write_net(&net));
                    Ok(0)
                }
                Err(e) => {
                    eprintln!("{e}");
                    Ok(EXIT_UNKNOWN)
                }
            }
        }
        Command::Theorems { seed } => {
            let reports = oracle::run_all(seed);
            let mut all_passed = true;
            for report in &reports {
                println!("{report}");
                all_passed &= report.passed();
            }
            println!(
                "{}/{} property suites passed",
                reports.iter().filter(|r| r.passed()).count(),
                reports.len()
            );
            Ok(if all_passed { 0 } else { EXIT_FALSE })
        }
    }
}

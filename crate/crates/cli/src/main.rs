//! `kgrag`: build multilingual KGs, reformulate them into QA data, retrieve
//! context, query a generator and score the results.
//!
//! Exit codes: 0 success, 1 fatal error, 2 configuration error.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Arg, ArgAction, ArgMatches, Command};
use kgrag::config::{RunConfig, KEYS};
use kgrag::pipeline::{Pipeline, PipelineError};

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

fn cli() -> Command {
    let mut cmd = Command::new("kgrag")
        .about("Knowledge-graph completion as retrieval-augmented question answering")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .short('c')
                .global(true)
                .value_name("FILE")
                .value_parser(clap::value_parser!(PathBuf))
                .help("run configuration (`key = value` lines)"),
        );
    // One flag per config key, overriding the file.
    for key in KEYS {
        let help = match key.default {
            Some(d) if !d.is_empty() => format!("{} [default: {d}]", key.help),
            _ => key.help.to_owned(),
        };
        cmd = cmd.arg(
            Arg::new(key.name)
                .long(flag_name(key.name))
                .global(true)
                .value_name("VALUE")
                .help(help)
                .help_heading("Config overrides"),
        );
    }
    cmd.subcommand(Command::new("build-kg").about("extract the target-language KG and coverage statistics"))
        .subcommand(Command::new("make-qa").about("split the KG and reformulate triples into QA instances"))
        .subcommand(Command::new("index").about("build one BM25 index per language from the passage store"))
        .subcommand(Command::new("run").about("retrieve context and generate candidates for the test split"))
        .subcommand(
            Command::new("eval")
                .about("score predictions and write reports")
                .arg(
                    Arg::new("predictions")
                        .long("predictions")
                        .value_name("FILE")
                        .value_parser(clap::value_parser!(PathBuf))
                        .help("predictions to score [default: <out_dir>/predictions.jsonl]"),
                )
                .arg(
                    Arg::new("force")
                        .long("force")
                        .action(ArgAction::SetTrue)
                        .help("score predictions written under a different config"),
                ),
        )
        .subcommand(Command::new("export-contrastive").about("write anchor/positive/negative examples for retriever training"))
}

fn overrides(m: &ArgMatches) -> Vec<(String, String)> {
    KEYS.iter()
        .filter_map(|k| m.get_one::<String>(k.name).map(|v| (k.name.to_owned(), v.clone())))
        .collect()
}

fn init_logging(level: &str) {
    let filter = level.parse().unwrap_or(log::LevelFilter::Info);
    let _ = env_logger::Builder::new().filter_level(filter).parse_default_env().try_init();
}

fn execute(pipeline: &Pipeline, name: &str, sub: &ArgMatches) -> Result<(), PipelineError> {
    match name {
        "build-kg" => {
            let s = pipeline.build_kg()?;
            println!(
                "kg: {} triples, {} heads, {} tails; {} without target labels; {} malformed input lines",
                s.triples, s.heads, s.tails, s.excluded, s.input_diagnostics
            );
        }
        "make-qa" => {
            let s = pipeline.make_qa()?;
            println!(
                "split {}/{}/{} triples; {} instances: {}/{}/{}; {} exclusions",
                s.split_sizes.0,
                s.split_sizes.1,
                s.split_sizes.2,
                pipeline.config.mix_tag,
                s.instances.0,
                s.instances.1,
                s.instances.2,
                s.exclusions
            );
        }
        "index" => {
            for s in pipeline.index()? {
                println!("index {}: N={} avgdl={:.4} vocabulary={}", s.language, s.doc_count, s.avg_doc_length, s.vocabulary);
            }
        }
        "run" => {
            let s = pipeline.run()?;
            println!(
                "predicted {} items ({} reused), {} failed, {} backend warnings",
                s.total,
                s.reused,
                s.failed.len(),
                s.warnings
            );
            for (i, e) in &s.failed {
                println!("  failed item {i}: {e}");
            }
        }
        "eval" => {
            let predictions = sub.get_one::<PathBuf>("predictions");
            let report = pipeline.eval(predictions.map(PathBuf::as_path), sub.get_flag("force"))?;
            let hits: Vec<String> = report.hits.iter().map(|(k, v)| format!("H@{k}={v:.2}")).collect();
            println!("{} items: {}", report.n_items, hits.join(" "));
        }
        "export-contrastive" => {
            let s = pipeline.export_contrastive()?;
            println!(
                "{} contrastive examples; {} instances skipped; {} missing negative slots; {} predicate violations",
                s.examples, s.skipped, s.missing_slots, s.violations
            );
        }
        other => unreachable!("unknown subcommand {other}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let config = RunConfig::load(sub.get_one::<PathBuf>("config").map(PathBuf::as_path), &overrides(sub));
    let pipeline = match config.map_err(PipelineError::from).and_then(|c| {
        init_logging(&c.log_level);
        Pipeline::new(c)
    }) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("kgrag: configuration error: {e}");
            return ExitCode::from(2);
        }
    };
    log::debug!("config hash {}", pipeline.config_hash);
    match execute(&pipeline, name, sub).with_context(|| format!("{name} failed")) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let config_error = e.downcast_ref::<PipelineError>().is_some_and(PipelineError::is_config_error);
            eprintln!("kgrag: {e:#}");
            ExitCode::from(if config_error { 2 } else { 1 })
        }
    }
}

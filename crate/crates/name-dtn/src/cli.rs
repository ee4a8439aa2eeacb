//! Scenario-driven command line: load a scenario, run the simulation,
//! write trace and metrics, optionally dump a node's knowledge base.

use std::io::Write;
use std::path::PathBuf;

use crate::scenario::Scenario;

pub const USAGE: &str = "\
Usage: name-dtn --scenario <path> [options]

Options:
  --scenario <path>   scenario file to run (required)
  --trace <path|->    write the event trace to a file or stdout
  --metrics <path|->  write key=value metrics to a file or stdout
  --dump-kb <eid>     print the node's knowledge base after the run
  --seed <int>        override the scenario seed
  --until <seconds>   override the scenario run horizon
";

#[derive(Debug, Default, Clone, PartialEq)]
pub struct Args {
    pub scenario: PathBuf,
    pub trace: Option<String>,
    pub metrics: Option<String>,
    pub dump_kb: Option<String>,
    pub seed: Option<u64>,
    pub until: Option<f64>,
}

impl Args {
    pub fn parse(argv: &[String]) -> Result<Args, String> {
        let mut args = Args::default();
        let mut scenario = None;
        let mut it = argv.iter();
        while let Some(flag) = it.next() {
            let mut value = |name: &str| {
                it.next()
                    .cloned()
                    .ok_or_else(|| format!("{name} expects a value"))
            };
            match flag.as_str() {
                "--scenario" => scenario = Some(PathBuf::from(value("--scenario")?)),
                "--trace" => args.trace = Some(value("--trace")?),
                "--metrics" => args.metrics = Some(value("--metrics")?),
                "--dump-kb" => args.dump_kb = Some(value("--dump-kb")?),
                "--seed" => {
                    args.seed = Some(
                        value("--seed")?
                            .parse()
                            .map_err(|_| "--seed expects an integer".to_string())?,
                    )
                }
                "--until" => {
                    args.until = Some(
                        value("--until")?
                            .parse()
                            .map_err(|_| "--until expects a number".to_string())?,
                    )
                }
                other => return Err(format!("unknown flag {other:?}")),
            }
        }
        args.scenario = scenario.ok_or_else(|| "--scenario is required".to_string())?;
        Ok(args)
    }
}

/// Runs the CLI. Exit codes: 0 clean run, 1 argument or scenario errors,
/// 2 runtime invariant violation.
pub fn run(argv: &[String]) -> i32 {
    let args = match Args::parse(argv) {
        Ok(args) => args,
        Err(message) => {
            eprintln!("error: {message}\n{USAGE}");
            return 1;
        }
    };

    let mut scenario = match Scenario::load(&args.scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(until) = args.until {
        scenario.until_s = until;
    }

    let mut world = match scenario.build_world() {
        Ok(w) => w,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let metrics = match world.run(scenario.until_s) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("runtime error: {e}");
            return 2;
        }
    };

    if let Some(dest) = &args.trace {
        let mut body = world.trace().join("\n");
        if !body.is_empty() {
            body.push('\n');
        }
        if let Err(e) = write_output(dest, &body) {
            eprintln!("error: {e}");
            return 1;
        }
    }
    if let Some(dest) = &args.metrics {
        if let Err(e) = write_output(dest, &metrics.render()) {
            eprintln!("error: {e}");
            return 1;
        }
    }
    if let Some(eid) = &args.dump_kb {
        match world.nodes.get(eid) {
            Some(node) => print!("{}", node.kb.dump()),
            None => {
                eprintln!("error: unknown node {eid}");
                return 1;
            }
        }
    }
    0
}

fn write_output(dest: &str, body: &str) -> std::io::Result<()> {
    if dest == "-" {
        std::io::stdout().write_all(body.as_bytes())
    } else {
        std::fs::write(dest, body)
    }
}

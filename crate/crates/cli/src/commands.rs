use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::{anyhow, Context};
use nmp_core::summary::Summary;
use nmp_core::{
    improvement_pct, parse_scenario, run_with, summarize as summarize_trace, Adaptation, DelayBudget,
    RunError, Scenario, Trace,
};

use crate::{BaselineArg, Format, ScenarioArgs};

// A closed stdout (e.g. piped into `head`) is not an error worth a panic.
macro_rules! outln {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    fn invalid(error: anyhow::Error) -> Self {
        Self { code: 1, error }
    }

    fn runtime(error: anyhow::Error) -> Self {
        Self { code: 2, error }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Invalid(_) => Failure::invalid(anyhow!(e)),
            RunError::Runtime(_) => Failure::runtime(anyhow!(e)),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read scenario {}", path.display()))
        .map_err(Failure::invalid)?;
    parse_scenario(&text).map_err(|errs| {
        let lines: Vec<String> = errs.iter().map(|e| format!("  {e}")).collect();
        Failure::invalid(anyhow!(
            "invalid scenario {}:\n{}",
            path.display(),
            lines.join("\n")
        ))
    })
}

fn load_with_overrides(args: &ScenarioArgs) -> Result<Scenario, Failure> {
    let mut scenario = load_scenario(&args.scenario)?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(interval) = args.probe_interval_ms {
        scenario.probe.interval_ms = interval;
    }
    Ok(scenario)
}

fn adaptation(baseline: BaselineArg) -> Adaptation {
    match baseline {
        BaselineArg::None => Adaptation::Full,
        BaselineArg::NoAdapt => Adaptation::NoAdapt,
        BaselineArg::Pinned => Adaptation::Pinned,
    }
}

fn summary_of(trace: &Trace, budget: &DelayBudget) -> Result<Summary<f64>, Failure> {
    summarize_trace(trace, budget).map_err(|e| Failure::runtime(e.into()))
}

fn print_summary(label: &str, s: &Summary<f64>) {
    outln!("{label}");
    outln!("  mean e2e        {:.4} ms", s.mean_e2e_ms);
    outln!("  max e2e         {:.4} ms", s.max_e2e_ms);
    outln!(
        "  over EPT        {:.2}% of session time",
        s.over_ept_fraction * 100.0
    );
    outln!(
        "  events          {} reroutes, {} mode switches, {} best-effort entries, {} exits",
        s.counts.reroutes,
        s.counts.mode_switches,
        s.counts.best_effort_enters,
        s.counts.best_effort_exits
    );
}

pub fn run(args: &ScenarioArgs, trace_path: Option<&Path>, baseline: BaselineArg) -> CmdResult {
    let scenario = load_with_overrides(args)?;
    let trace = run_with(&scenario, adaptation(baseline))?;
    let summary = summary_of(&trace, &scenario.budget)?;
    if let Some(path) = trace_path {
        fs::write(path, nmp_core::trace::to_csv(&trace))
            .with_context(|| format!("cannot write trace {}", path.display()))
            .map_err(Failure::runtime)?;
    }
    print_summary(
        &format!("{} ({} rows)", args.scenario.display(), trace.len()),
        &summary,
    );
    Ok(())
}

pub fn compare(args: &ScenarioArgs, baseline: BaselineArg, format: Format) -> CmdResult {
    let scenario = load_with_overrides(args)?;
    let baseline = match adaptation(baseline) {
        Adaptation::Full => Adaptation::NoAdapt,
        other => other,
    };
    let adaptive = summary_of(&run_with(&scenario, Adaptation::Full)?, &scenario.budget)?;
    let reference = summary_of(&run_with(&scenario, baseline)?, &scenario.budget)?;
    let improvement = improvement_pct(&adaptive, &reference);
    let name = args
        .scenario
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match format {
        Format::Csv => {
            outln!("scenario,mean_adaptive_ms,mean_baseline_ms,improvement_pct");
            outln!(
                "{name},{:.4},{:.4},{:.4}",
                adaptive.mean_e2e_ms,
                reference.mean_e2e_ms,
                improvement
            );
        }
        Format::Text => {
            print_summary("adaptive", &adaptive);
            let label = match baseline {
                Adaptation::Pinned => "baseline (pinned path and mode)",
                _ => "baseline (rerouting only)",
            };
            print_summary(label, &reference);
            outln!("improvement     {improvement:.1}%");
        }
    }
    Ok(())
}

pub fn summarize(trace_path: &Path, ept_ms: f64) -> CmdResult {
    let text = fs::read_to_string(trace_path)
        .with_context(|| format!("cannot read trace {}", trace_path.display()))
        .map_err(Failure::invalid)?;
    let trace: Trace = nmp_core::trace::from_csv(&text).map_err(|e| Failure::invalid(e.into()))?;
    let budget = DelayBudget::new(ept_ms).map_err(|e| Failure::invalid(e.into()))?;
    let summary = summary_of(&trace, &budget)?;
    print_summary(&trace_path.display().to_string(), &summary);
    Ok(())
}

pub fn validate(path: &Path) -> CmdResult {
    let scenario = load_scenario(path)?;
    outln!(
        "{}: ok ({} nodes, {} paths, {} users, {} sessions)",
        path.display(),
        scenario.topology.nodes.len(),
        scenario.topology.paths.len(),
        scenario.users.len(),
        scenario.sessions.len()
    );
    Ok(())
}

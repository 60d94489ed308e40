//! Deterministic discrete-event loop tying monitoring, the SDN controller and
//! the session service together.
//!
//! Events at equal timestamps run in kind priority (probe, pending mode
//! change, decision sweep, session start, end of run) and then in insertion
//! order. Delay schedules are read directly by each probe, so a schedule step
//! is always visible to probes at its own timestamp.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;

use crate::controller::{apply_reroute, assign_initial_path, reroute_decision, FlowAssignment};
use crate::error::Error;
use crate::model::{DelaySample, TimeMs};
use crate::monitoring::{schedule_probes, Monitor, Snapshot};
use crate::network::{path_delay_at, PathId};
use crate::scalar::Scalar;
use crate::scenario::{Scenario, ScenarioError};
use crate::session::{mode_switch_decision, notify_application, ModeDecision, SessionProfiles, SessionState};
use crate::trace::{TraceEvent, TraceKind};

/// Which parts of the control loop are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Adaptation {
    /// Rerouting and audio-mode adaptation.
    #[default]
    Full,
    /// Rerouting only; the audio mode stays at its initial value.
    NoAdapt,
    /// Neither: initial path and mode for the whole run.
    Pinned,
}

impl Adaptation {
    fn reroutes(self) -> bool {
        self != Adaptation::Pinned
    }

    fn adapts(self) -> bool {
        self == Adaptation::Full
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    Invalid(Vec<ScenarioError>),
    Runtime(Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Invalid(errs) => {
                write!(f, "invalid scenario:")?;
                for e in errs {
                    write!(f, "\n  {e}")?;
                }
                Ok(())
            }
            RunError::Runtime(e) => write!(f, "runtime error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Runtime(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    Probe { path: usize },
    ModeEffective { session: usize },
    DecisionSweep,
    SessionStart { session: usize },
    EndOfRun,
}

impl EventKind {
    fn priority(self) -> u8 {
        match self {
            EventKind::Probe { .. } => 0,
            EventKind::ModeEffective { .. } => 1,
            EventKind::DecisionSweep => 2,
            EventKind::SessionStart { .. } => 3,
            EventKind::EndOfRun => 4,
        }
    }
}

struct Queue {
    heap: BinaryHeap<Reverse<(TimeMs, u8, u64, EventKind)>>,
    seq: u64,
}

impl Queue {
    fn push(&mut self, at: TimeMs, kind: EventKind) {
        self.heap.push(Reverse((at, kind.priority(), self.seq, kind)));
        self.seq += 1;
    }

    fn pop(&mut self) -> Option<(TimeMs, EventKind)> {
        self.heap.pop().map(|Reverse((at, _, _, kind))| (at, kind))
    }
}

struct SessionRun<S> {
    state: SessionState<S>,
    profiles: SessionProfiles<S>,
    candidates: Vec<PathId>,
    assignment: Option<FlowAssignment>,
    /// Ladder index whose delays are currently in effect.
    effective_mode: usize,
    pending_mode: Option<(usize, TimeMs)>,
    best_effort: bool,
}

struct Engine<'a, S> {
    scenario: &'a Scenario<S>,
    adaptation: Adaptation,
    monitor: Monitor<S>,
    sessions: Vec<SessionRun<S>>,
    queue: Queue,
    trace: Vec<TraceEvent<S>>,
}

/// Runs the full control loop.
pub fn run<S: Scalar>(scenario: &Scenario<S>) -> Result<Vec<TraceEvent<S>>, RunError> {
    run_with(scenario, Adaptation::Full)
}

/// Runs a comparison baseline: `NoAdapt` keeps rerouting, `Pinned` disables both.
pub fn run_baseline<S: Scalar>(
    scenario: &Scenario<S>,
    baseline: Adaptation,
) -> Result<Vec<TraceEvent<S>>, RunError> {
    run_with(scenario, baseline)
}

pub fn run_with<S: Scalar>(
    scenario: &Scenario<S>,
    adaptation: Adaptation,
) -> Result<Vec<TraceEvent<S>>, RunError> {
    let violations = scenario.violations();
    if !violations.is_empty() {
        return Err(RunError::Invalid(violations));
    }
    let mut engine = Engine::new(scenario, adaptation)?;
    engine.execute()?;
    Ok(engine.trace)
}

impl<'a, S: Scalar> Engine<'a, S> {
    fn new(scenario: &'a Scenario<S>, adaptation: Adaptation) -> Result<Self, Error> {
        let sessions = scenario
            .sessions
            .iter()
            .map(|decl| {
                let profiles = scenario.session_profiles(decl)?;
                Ok(SessionRun {
                    state: SessionState {
                        session_id: decl.id.clone(),
                        tx_user: decl.tx.clone(),
                        rx_user: decl.rx.clone(),
                        mode_index: decl.initial_mode_index,
                        budget: scenario.budget,
                        upgrade_guard_ms: scenario.upgrade_guard_ms,
                    },
                    profiles,
                    candidates: scenario.topology.candidate_paths(&decl.tx, &decl.rx),
                    assignment: None,
                    effective_mode: decl.initial_mode_index,
                    pending_mode: None,
                    best_effort: false,
                })
            })
            .collect::<Result<Vec<_>, Error>>()?;

        let mut queue = Queue {
            heap: BinaryHeap::new(),
            seq: 0,
        };
        for i in 0..sessions.len() {
            queue.push(0, EventKind::SessionStart { session: i });
        }
        let path_ids: Vec<&PathId> = scenario.topology.paths.iter().map(|p| &p.id).collect();
        let mut last_sweep = None;
        for probe in schedule_probes(
            path_ids.iter().copied(),
            scenario.probe.interval_ms,
            scenario.duration_ms,
        ) {
            let idx = scenario
                .topology
                .path_index(&probe.path_id)
                .expect("probe for declared path");
            queue.push(probe.at_ms, EventKind::Probe { path: idx });
            if last_sweep != Some(probe.at_ms) {
                queue.push(probe.at_ms, EventKind::DecisionSweep);
                last_sweep = Some(probe.at_ms);
            }
        }
        queue.push(scenario.duration_ms, EventKind::EndOfRun);

        Ok(Self {
            scenario,
            adaptation,
            monitor: Monitor::new(scenario.probe),
            sessions,
            queue,
            trace: Vec::new(),
        })
    }

    fn execute(&mut self) -> Result<(), Error> {
        while let Some((at, kind)) = self.queue.pop() {
            match kind {
                EventKind::Probe { path } => self.probe(path, at)?,
                EventKind::ModeEffective { session } => self.mode_effective(session, at),
                EventKind::DecisionSweep => {
                    for i in 0..self.sessions.len() {
                        if self.sessions[i].assignment.is_some() {
                            self.sweep(i, at)?;
                        }
                    }
                }
                EventKind::SessionStart { session } => self.start(session, at)?,
                EventKind::EndOfRun => {
                    for i in 0..self.sessions.len() {
                        if self.sessions[i].assignment.is_some() {
                            self.emit(i, at, TraceKind::EndOfRun, String::new());
                        }
                    }
                    break;
                }
            }
        }
        self.check_conservation()
    }

    fn probe(&mut self, path: usize, at: TimeMs) -> Result<(), Error> {
        let descriptor = &self.scenario.topology.paths[path];
        let delay = path_delay_at(descriptor, at, self.scenario.seed)?;
        self.monitor.record(
            &descriptor.id,
            DelaySample {
                at_ms: at,
                one_way_delay_ms: delay,
            },
        );
        Ok(())
    }

    fn start(&mut self, i: usize, at: TimeMs) -> Result<(), Error> {
        let snapshot = self.monitor.snapshot();
        let class = {
            let rx = &self.sessions[i].state.rx_user;
            self.scenario
                .user(rx)
                .map(|u| u.class)
                .ok_or_else(|| Error::Configuration(format!("unknown user {rx}")))?
        };
        let s = &mut self.sessions[i];
        let assignment = assign_initial_path(
            &s.state.session_id,
            class,
            &s.candidates,
            &snapshot,
            &self.scenario.policy,
            at,
        )?;
        s.assignment = Some(assignment);
        if self.adaptation.adapts() {
            self.adapt(i, &snapshot, at)?;
        }
        self.emit(i, at, TraceKind::Measurement, self.estimate_detail(i, &snapshot));
        Ok(())
    }

    fn sweep(&mut self, i: usize, at: TimeMs) -> Result<(), Error> {
        let snapshot = self.monitor.snapshot();
        if self.adaptation.reroutes() {
            let assignment = self.sessions[i].assignment.as_ref().expect("started session");
            if let Some(target) = reroute_decision(assignment, &snapshot, &self.scenario.policy)? {
                let (next, record) = apply_reroute(assignment, &target, &snapshot, at)?;
                self.sessions[i].assignment = Some(next);
                let detail = format!(
                    "{} ({}) -> {} ({})",
                    record.from,
                    fmt_ms(record.from_estimate_ms),
                    record.to,
                    fmt_ms(record.to_estimate_ms)
                );
                self.emit(i, at, TraceKind::Reroute, detail);
            }
        }
        if self.adaptation.adapts() && self.sessions[i].pending_mode.is_none() {
            self.adapt(i, &snapshot, at)?;
        }
        self.emit(i, at, TraceKind::Measurement, self.estimate_detail(i, &snapshot));
        Ok(())
    }

    fn adapt(&mut self, i: usize, snapshot: &Snapshot<S>, at: TimeMs) -> Result<(), Error> {
        let best = match self.sessions[i]
            .candidates
            .iter()
            .filter_map(|p| snapshot.get(p).copied())
            .reduce(S::min)
        {
            Some(b) => b,
            None => return Ok(()),
        };
        let s = &self.sessions[i];
        let decision = mode_switch_decision(&s.state, best, &s.profiles);
        match decision {
            ModeDecision::Hold | ModeDecision::Upgrade(_) => {
                if s.best_effort {
                    self.sessions[i].best_effort = false;
                    self.emit(
                        i,
                        at,
                        TraceKind::BestEffortExit,
                        format!("best path {}", fmt_ms(Some(best))),
                    );
                }
                if matches!(decision, ModeDecision::Upgrade(_)) {
                    self.switch_mode(i, decision, best, at)?;
                }
            }
            ModeDecision::Degrade(_) => self.switch_mode(i, decision, best, at)?,
            ModeDecision::BestEffort(floor) => {
                if s.state.mode_index != floor {
                    self.switch_mode(i, decision, best, at)?;
                }
                if !self.sessions[i].best_effort {
                    self.sessions[i].best_effort = true;
                    self.emit(
                        i,
                        at,
                        TraceKind::BestEffortEnter,
                        format!("no mode meets the budget; best path {}", fmt_ms(Some(best))),
                    );
                }
            }
        }
        Ok(())
    }

    fn switch_mode(&mut self, i: usize, decision: ModeDecision, best: S, at: TimeMs) -> Result<(), Error> {
        let latency = self.scenario.switch_latency_ms;
        let s = &mut self.sessions[i];
        let record = notify_application(&mut s.state, &s.profiles, decision, at, best, latency)?;
        if latency == 0 {
            s.effective_mode = record.to_index;
            let detail = format!(
                "{} -> {} (best path {})",
                record.from,
                record.to,
                fmt_ms(Some(best))
            );
            self.emit(i, at, TraceKind::ModeSwitch, detail);
        } else {
            s.pending_mode = Some((record.to_index, record.at_ms));
            self.queue
                .push(record.effective_at_ms, EventKind::ModeEffective { session: i });
        }
        Ok(())
    }

    fn mode_effective(&mut self, i: usize, at: TimeMs) {
        let s = &mut self.sessions[i];
        if let Some((to, requested_at)) = s.pending_mode.take() {
            let from = s.profiles.modes[s.effective_mode];
            s.effective_mode = to;
            let detail = format!(
                "{} -> {} (requested at {} ms)",
                from, s.profiles.modes[to], requested_at
            );
            self.emit(i, at, TraceKind::ModeSwitch, detail);
        }
    }

    fn estimate_detail(&self, i: usize, snapshot: &Snapshot<S>) -> String {
        let active = &self.sessions[i]
            .assignment
            .as_ref()
            .expect("started session")
            .active_path;
        format!("estimate {}", fmt_ms(snapshot.get(active).copied()))
    }

    fn emit(&mut self, i: usize, at: TimeMs, kind: TraceKind, detail: String) {
        let s = &self.sessions[i];
        let active = s
            .assignment
            .as_ref()
            .expect("started session")
            .active_path
            .clone();
        // delay actually experienced on the active path at its latest probe
        let net = self
            .monitor
            .estimate(&active)
            .map(|e| e.last_sample.one_way_delay_ms)
            .unwrap_or_else(S::zero);
        let m = s.effective_mode;
        let total_block = s.profiles.total_block_ms(m);
        let mode = s.profiles.modes[m];
        self.trace.push(TraceEvent {
            at_ms: at,
            session_id: s.state.session_id.clone(),
            kind,
            active_path: active,
            fs_hz: mode.sampling_rate_hz,
            fr_samples: mode.frame_size_samples,
            network_delay_ms: net,
            blocking_delay_ms: total_block / S::lit(2.0),
            e2e_ms: total_block + net,
            detail,
        });
    }

    fn check_conservation(&self) -> Result<(), Error> {
        let tolerance = S::epsilon() * S::lit(8.0);
        match self
            .trace
            .iter()
            .find(|row| row.conservation_error() > tolerance * row.e2e_ms.max(S::one()))
        {
            Some(row) => Err(Error::InvalidArgument(format!(
                "trace row at {} ms breaks e2e = 2*block + net",
                row.at_ms
            ))),
            None => Ok(()),
        }
    }
}

fn fmt_ms<S: Scalar>(v: Option<S>) -> String {
    match v {
        Some(v) => format!("{v:.4} ms"),
        None => "unmeasured".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{bundled, parse_scenario};

    fn kinds(trace: &[TraceEvent<f64>]) -> Vec<(TimeMs, TraceKind)> {
        trace
            .iter()
            .filter(|e| !matches!(e.kind, TraceKind::Measurement | TraceKind::EndOfRun))
            .map(|e| (e.at_ms, e.kind))
            .collect()
    }

    #[test]
    fn fig2_milestones() {
        let s: Scenario<f64> = parse_scenario(bundled::FIG2_REPLAY).unwrap();
        let trace = run(&s).unwrap();
        assert_eq!(
            kinds(&trace),
            vec![
                (65_000, TraceKind::Reroute),
                (118_000, TraceKind::Reroute),
                (189_000, TraceKind::ModeSwitch),
                (194_000, TraceKind::ModeSwitch),
                (241_000, TraceKind::BestEffortEnter),
                (290_000, TraceKind::BestEffortExit),
            ]
        );
        assert_eq!(trace.last().unwrap().kind, TraceKind::EndOfRun);
    }

    #[test]
    fn steady_has_only_measurements() {
        let s: Scenario<f64> = parse_scenario(bundled::STEADY).unwrap();
        let trace = run(&s).unwrap();
        assert!(kinds(&trace).is_empty());
        assert_eq!(
            trace.iter().filter(|e| e.kind == TraceKind::Measurement).count(),
            121
        );
    }

    #[test]
    fn baselines_disable_their_parts() {
        let s: Scenario<f64> = parse_scenario(bundled::FIG2_REPLAY).unwrap();
        let no_adapt = run_baseline(&s, Adaptation::NoAdapt).unwrap();
        assert_eq!(
            kinds(&no_adapt),
            vec![(65_000, TraceKind::Reroute), (118_000, TraceKind::Reroute)]
        );
        let pinned = run_baseline(&s, Adaptation::Pinned).unwrap();
        assert!(kinds(&pinned).is_empty());
        for row in &pinned {
            assert_eq!(row.active_path, PathId::from("P1"));
            let expected = s.topology.paths[0].schedule.base_delay_at(row.at_ms).unwrap();
            assert_eq!(row.network_delay_ms, expected);
        }
    }

    #[test]
    fn switch_latency_defers_mode_change() {
        let mut s: Scenario<f64> = parse_scenario(bundled::FIG2_REPLAY).unwrap();
        s.switch_latency_ms = 300;
        let trace = run(&s).unwrap();
        let switches: Vec<_> = trace.iter().filter(|e| e.kind == TraceKind::ModeSwitch).collect();
        assert_eq!(switches.len(), 2);
        assert_eq!(switches[0].at_ms, 189_300);
        assert_eq!(switches[1].at_ms, 194_300);
        let at_189 = trace.iter().rfind(|e| e.at_ms == 189_000).unwrap();
        assert_eq!(at_189.fs_hz, 44_100);
    }

    #[test]
    fn invalid_scenario_rejected_before_running() {
        let mut s: Scenario<f64> = parse_scenario(bundled::STEADY).unwrap();
        s.duration_ms = 0;
        assert!(matches!(run(&s), Err(RunError::Invalid(_))));
    }

    #[test]
    fn single_precision_run() {
        let s: Scenario<f32> = parse_scenario(bundled::FIG2_REPLAY).unwrap();
        let trace = run(&s).unwrap();
        let milestones = trace
            .iter()
            .filter(|e| !matches!(e.kind, TraceKind::Measurement | TraceKind::EndOfRun))
            .count();
        assert_eq!(milestones, 6);
    }
}

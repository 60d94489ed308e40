use nmp_core::model::AudioMode;
use nmp_core::session::{
    mode_switch_decision, notify_application, ModeDecision, SessionProfiles, SessionState,
};
use nmp_core::trace::to_csv;
use nmp_core::{
    bundled, parse_scenario, run, run_baseline, Adaptation, DelayBudget, Scenario, SoundCardProfile,
    TraceKind,
};
use proptest::prelude::*;

fn ladder() -> Vec<AudioMode> {
    [
        (44_100, 1024),
        (44_100, 512),
        (48_000, 512),
        (48_000, 256),
        (48_000, 128),
        (96_000, 128),
    ]
    .into_iter()
    .map(|(fs, fr)| AudioMode::new(fs, fr).unwrap())
    .collect()
}

fn session(mode_index: usize, guard: f64) -> SessionState<f64> {
    SessionState {
        session_id: "A->B".into(),
        tx_user: "A".into(),
        rx_user: "B".into(),
        mode_index,
        budget: DelayBudget::default(),
        upgrade_guard_ms: guard,
    }
}

/// Three-path scenario with arbitrary step schedules, no jitter, alpha 1.
fn stepped_scenario(schedules: &[Vec<(u64, f64)>; 3], seed: u64) -> Scenario {
    let mut text = String::from(
        "[topology]\nnodes = [{ id = \"A\", kind = \"user\" }, { id = \"B\", kind = \"user\" }, \
         { id = \"s\", kind = \"switch\" }]\nlinks = [{ a = \"A\", b = \"s\", base_delay_ms = 0.1 }, \
         { a = \"s\", b = \"B\", base_delay_ms = 0.1 }]\n",
    );
    for (i, steps) in schedules.iter().enumerate() {
        let segs: Vec<String> = steps.iter().map(|(t, v)| format!("[{t}, {v:?}]")).collect();
        text.push_str(&format!(
            "\n[[topology.paths]]\nid = \"P{}\"\nhops = [\"A\", \"s\", \"B\"]\nschedule = [{}]\n",
            i + 1,
            segs.join(", ")
        ));
    }
    text.push_str(
        "\n[[users]]\nid = \"A\"\nclass = \"regular\"\nd0_ms = 0.0\n\
         ladder = [[44100, 512], [48000, 512], [48000, 256], [48000, 128]]\n\
         \n[[users]]\nid = \"B\"\nclass = \"premium\"\nd0_ms = 0.5\nmode_floor_index = 2\n\
         ladder = [[44100, 512], [48000, 512], [48000, 256], [48000, 128]]\n\
         \n[[sessions]]\ntx = \"A\"\nrx = \"B\"\n",
    );
    text.push_str(&format!("\n[run]\nduration_ms = 40000\nseed = {seed}\n"));
    parse_scenario(&text).unwrap_or_else(|e| panic!("{e:?}\n{text}"))
}

fn schedule() -> impl Strategy<Value = Vec<(u64, f64)>> {
    (
        0.0f64..30.0,
        prop::collection::vec((1u64..80, 0.0f64..30.0), 0..5),
    )
        .prop_map(|(first, rest)| {
            let mut steps = vec![(0, (first * 100.0).round() / 100.0)];
            let mut t = 0;
            for (gap, v) in rest {
                t += gap * 500;
                steps.push((t, (v * 100.0).round() / 100.0));
            }
            steps
        })
}

fn parse_reroute(detail: &str) -> (f64, f64) {
    // "P1 (4.0000 ms) -> P2 (1.0000 ms)"
    let nums: Vec<f64> = detail
        .split(['(', ')'])
        .filter_map(|s| s.strip_suffix(" ms"))
        .map(|s| s.parse().unwrap())
        .collect();
    (nums[0], nums[1])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn blocking_never_rises_while_best_delay_rises(
        start in 0usize..6,
        delays in prop::collection::vec(0.0f64..30.0, 2..40),
        guard in 0.0f64..3.0,
        d0 in 0.0f64..1.5,
    ) {
        let card = SoundCardProfile::new(d0, ladder()).unwrap();
        let profiles = SessionProfiles::symmetric(&card, 5).unwrap();
        let mut state = session(start, guard);
        let mut prev: Option<(f64, f64)> = None;
        for delay in delays {
            let decision = mode_switch_decision(&state, delay, &profiles);
            if !matches!(decision, ModeDecision::Hold | ModeDecision::BestEffort(5)) || state.mode_index != 5 {
                let _ = notify_application(&mut state, &profiles, decision, 0, delay, 0);
            }
            let block = profiles.total_block_ms(state.mode_index);
            if let Some((prev_delay, prev_block)) = prev {
                if delay >= prev_delay {
                    prop_assert!(block <= prev_block, "block rose {prev_block} -> {block} as delay {prev_delay} -> {delay}");
                }
            }
            prev = Some((delay, block));
        }
    }

    #[test]
    fn hold_right_after_upgrade(start in 1usize..6, delay in 0.0f64..20.0, guard in 0.0f64..3.0) {
        let card = SoundCardProfile::new(0.0, ladder()).unwrap();
        let profiles = SessionProfiles::symmetric(&card, 5).unwrap();
        let mut state = session(start, guard);
        if let d @ ModeDecision::Upgrade(_) = mode_switch_decision(&state, delay, &profiles) {
            notify_application(&mut state, &profiles, d, 0, delay, 0).unwrap();
            prop_assert_eq!(mode_switch_decision(&state, delay, &profiles), ModeDecision::Hold);
        }
    }

    #[test]
    fn floor_is_never_crossed(floor in 0usize..6, start in 0usize..6, delay in 0.0f64..60.0) {
        let start = start.min(floor);
        let card = SoundCardProfile::new(0.0, ladder()).unwrap();
        let profiles = SessionProfiles::symmetric(&card, floor).unwrap();
        let mut state = session(start, 1.0);
        let d = mode_switch_decision(&state, delay, &profiles);
        if d != ModeDecision::Hold && d != ModeDecision::BestEffort(start) {
            notify_application(&mut state, &profiles, d, 0, delay, 0).unwrap();
        }
        prop_assert!(state.mode_index <= floor);
    }

    #[test]
    fn stepped_runs_respect_hysteresis_floor_and_conservation(
        s1 in schedule(), s2 in schedule(), s3 in schedule(), seed in 0..=i64::MAX as u64,
    ) {
        let scenario = stepped_scenario(&[s1, s2, s3], seed);
        let decl = &scenario.sessions[0];
        let profiles = scenario.session_profiles(decl).unwrap();
        let trace = run(&scenario).unwrap();
        prop_assert_eq!(trace.last().map(|e| e.kind), Some(TraceKind::EndOfRun));
        let mut last_t = 0;
        for row in &trace {
            prop_assert!(row.at_ms >= last_t);
            last_t = row.at_ms;
            prop_assert!(row.conservation_error() <= 1e-9);
            let mode = AudioMode::new(row.fs_hz, row.fr_samples).unwrap();
            let index = profiles.modes.iter().position(|m| *m == mode).unwrap();
            prop_assert!(index <= profiles.floor_index);
            if row.kind == TraceKind::Reroute {
                let (old, new) = parse_reroute(&row.detail);
                prop_assert!(old - new >= scenario.policy.hysteresis_ms - 1e-3, "{}", row.detail);
            }
        }
        let again = run(&scenario).unwrap();
        prop_assert_eq!(to_csv(&trace), to_csv(&again));
    }

    #[test]
    fn pinned_and_no_adapt_never_switch_modes(s1 in schedule(), s2 in schedule(), s3 in schedule()) {
        let scenario = stepped_scenario(&[s1, s2, s3], 0);
        for mode in [Adaptation::NoAdapt, Adaptation::Pinned] {
            let trace = run_baseline(&scenario, mode).unwrap();
            prop_assert!(trace.iter().all(|e| e.kind != TraceKind::ModeSwitch));
            if mode == Adaptation::Pinned {
                prop_assert!(trace.iter().all(|e| e.kind != TraceKind::Reroute));
                prop_assert!(trace.iter().all(|e| e.active_path == trace[0].active_path));
            }
        }
    }

    #[test]
    fn scenario_round_trips_through_toml(
        s1 in schedule(), s2 in schedule(), s3 in schedule(), seed in 0..=i64::MAX as u64,
    ) {
        let scenario = stepped_scenario(&[s1, s2, s3], seed);
        let text = scenario.to_toml();
        let back: Scenario = parse_scenario(&text).unwrap();
        prop_assert_eq!(back, scenario);
    }
}

#[test]
fn path_declaration_order_does_not_matter_without_ties() {
    let scenario: Scenario = parse_scenario(bundled::FIG2_REPLAY).unwrap();
    let mut reversed = scenario.clone();
    reversed.topology.paths.reverse();
    reversed.topology.links.reverse();
    assert_eq!(to_csv(&run(&scenario).unwrap()), to_csv(&run(&reversed).unwrap()));
}

#[test]
fn fig2_reroutes_visit_paths_in_order() {
    let scenario: Scenario = parse_scenario(bundled::FIG2_REPLAY).unwrap();
    let trace = run(&scenario).unwrap();
    let visited: Vec<&str> = trace
        .iter()
        .filter(|e| e.kind == TraceKind::Reroute)
        .map(|e| e.active_path.as_str())
        .collect();
    assert_eq!(visited, ["P2", "P3"]);
    let exit = trace
        .iter()
        .find(|e| e.kind == TraceKind::BestEffortExit)
        .unwrap();
    assert_eq!(exit.at_ms, 290_000);
}

#[test]
fn bundled_scenarios_round_trip() {
    for (name, text) in bundled::ALL {
        let s: Scenario = parse_scenario(text).unwrap();
        let back: Scenario = parse_scenario(&s.to_toml()).unwrap();
        assert_eq!(back, s, "{name}");
    }
}

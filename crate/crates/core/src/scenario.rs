//! Scenario documents: strict TOML schema, validation, and serialization.
//!
//! Parsing never yields a partially valid scenario. Structural problems
//! (missing or unknown keys) are collected first; if there are none the
//! document is typed and then checked semantically, again collecting every
//! violation.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::controller::ReroutePolicy;
use crate::model::{AudioMode, DelayBudget, SoundCardProfile, TimeMs, DEFAULT_EPT_MS};
use crate::monitoring::{ProbeConfig, DEFAULT_PROBE_INTERVAL_MS};
use crate::network::{
    validate_topology, DelaySchedule, Link, Node, NodeId, NodeKind, PathDescriptor, PathId, Topology,
};
use crate::scalar::Scalar;
use crate::session::{SessionProfiles, UserClass, UserProfile, DEFAULT_UPGRADE_GUARD_MS};

#[derive(Debug, Clone, PartialEq)]
pub struct SessionDecl {
    pub id: String,
    pub tx: NodeId,
    pub rx: NodeId,
    pub initial_mode_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<S> {
    pub topology: Topology<S>,
    pub users: Vec<UserProfile<S>>,
    pub sessions: Vec<SessionDecl>,
    pub probe: ProbeConfig<S>,
    pub policy: ReroutePolicy<S>,
    pub upgrade_guard_ms: S,
    pub switch_latency_ms: TimeMs,
    pub budget: DelayBudget<S>,
    pub duration_ms: TimeMs,
    pub seed: u64,
}

impl<S: Scalar> Scenario<S> {
    pub fn user(&self, id: &NodeId) -> Option<&UserProfile<S>> {
        self.users.iter().find(|u| &u.user_id == id)
    }

    /// Shared ladder and blocking delays for a declared session.
    pub fn session_profiles(&self, session: &SessionDecl) -> crate::Result<SessionProfiles<S>> {
        let missing = |id: &NodeId| crate::Error::Configuration(format!("unknown user {id}"));
        let tx = self.user(&session.tx).ok_or_else(|| missing(&session.tx))?;
        let rx = self.user(&session.rx).ok_or_else(|| missing(&session.rx))?;
        SessionProfiles::build(tx, rx)
    }

    /// Every semantic violation in the scenario.
    pub fn violations(&self) -> Vec<ScenarioError> {
        let mut out = Vec::new();
        let pairs: Vec<(NodeId, NodeId)> = self
            .sessions
            .iter()
            .map(|s| (s.tx.clone(), s.rx.clone()))
            .collect();
        for v in validate_topology(&self.topology, &pairs) {
            out.push(ScenarioError::new("topology", format!("{v}")));
        }
        for id in self
            .topology
            .nodes
            .iter()
            .map(|n| n.id.as_str())
            .chain(self.topology.paths.iter().map(|p| p.id.as_str()))
            .chain(self.sessions.iter().map(|s| s.id.as_str()))
        {
            if id.is_empty() || id.contains([',', '"', '\n', '\r']) {
                out.push(ScenarioError::new(
                    "id",
                    format!("{id:?} must be non-empty without commas, quotes or newlines"),
                ));
            }
        }

        let mut user_ids = BTreeSet::new();
        for u in &self.users {
            let key = format!("users.{}", u.user_id);
            if !user_ids.insert(&u.user_id) {
                out.push(ScenarioError::new(&key, "declared more than once"));
            }
            match self.topology.node(&u.user_id).map(|n| n.kind) {
                Some(NodeKind::User) => {}
                Some(NodeKind::Switch) => out.push(ScenarioError::new(&key, "refers to a switch node")),
                None => out.push(ScenarioError::new(&key, "not a topology node")),
            }
            for p in u.problems() {
                out.push(ScenarioError::new(&key, p));
            }
        }

        let mut session_ids = BTreeSet::new();
        for s in &self.sessions {
            let key = format!("sessions.{}", s.id);
            if !session_ids.insert(&s.id) {
                out.push(ScenarioError::new(&key, "declared more than once"));
            }
            if s.tx == s.rx {
                out.push(ScenarioError::new(
                    &key,
                    "transmitter and receiver are the same user",
                ));
            }
            let mut endpoints_ok = true;
            for end in [&s.tx, &s.rx] {
                if self.user(end).is_none() {
                    endpoints_ok = false;
                    out.push(ScenarioError::new(&key, format!("user {end} has no profile")));
                }
            }
            if endpoints_ok && s.tx != s.rx {
                match self.session_profiles(s) {
                    Ok(p) if s.initial_mode_index > p.floor_index => out.push(ScenarioError::new(
                        &key,
                        format!(
                            "initial_mode_index {} is below the session floor {}",
                            s.initial_mode_index, p.floor_index
                        ),
                    )),
                    Ok(_) => {}
                    Err(e) => out.push(ScenarioError::new(&key, e.to_string())),
                }
            }
        }

        if let Err(e) = self.probe.validate() {
            out.push(ScenarioError::new("probe", e.to_string()));
        }
        if let Err(e) = self.policy.validate() {
            out.push(ScenarioError::new("policy", e.to_string()));
        }
        if !(self.upgrade_guard_ms >= S::zero()) {
            out.push(ScenarioError::new(
                "policy.upgrade_guard_ms",
                "must be non-negative",
            ));
        }
        if !(self.budget.ept_ms > S::zero()) {
            out.push(ScenarioError::new("budget.ept_ms", "must be positive"));
        }
        if self.duration_ms == 0 {
            out.push(ScenarioError::new("run.duration_ms", "must be positive"));
        }
        // the file format stores integers as i64
        for (key, value) in [
            ("run.seed", self.seed),
            ("run.duration_ms", self.duration_ms),
            ("probe.interval_ms", self.probe.interval_ms),
        ] {
            if i64::try_from(value).is_err() {
                out.push(ScenarioError::new(key, format!("{value} exceeds {}", i64::MAX)));
            }
        }
        out
    }

    pub fn to_document(&self) -> Document {
        Document {
            topology: TopologyDoc {
                nodes: self
                    .topology
                    .nodes
                    .iter()
                    .map(|n| NodeDoc {
                        id: n.id.0.clone(),
                        kind: n.kind,
                    })
                    .collect(),
                links: self
                    .topology
                    .links
                    .iter()
                    .map(|l| LinkDoc {
                        a: l.a.0.clone(),
                        b: l.b.0.clone(),
                        base_delay_ms: Some(l.base_delay_ms.as_f64()),
                    })
                    .collect(),
                paths: self
                    .topology
                    .paths
                    .iter()
                    .map(|p| PathDoc {
                        id: p.id.0.clone(),
                        hops: p.hops.iter().map(|h| h.0.clone()).collect(),
                        schedule: p
                            .schedule
                            .segments
                            .iter()
                            .map(|(t, d)| (*t, d.as_f64()))
                            .collect(),
                        jitter_std_ms: p.schedule.jitter_std_ms.map(Scalar::as_f64),
                    })
                    .collect(),
            },
            users: self
                .users
                .iter()
                .map(|u| UserDoc {
                    id: u.user_id.0.clone(),
                    class: u.class,
                    d0_ms: u.card.d0_ms.as_f64(),
                    ladder: u
                        .card
                        .supported_modes
                        .iter()
                        .map(|m| (m.sampling_rate_hz, m.frame_size_samples))
                        .collect(),
                    mode_floor_index: u.mode_floor_index,
                })
                .collect(),
            sessions: self
                .sessions
                .iter()
                .map(|s| SessionDoc {
                    id: Some(s.id.clone()),
                    tx: s.tx.0.clone(),
                    rx: s.rx.0.clone(),
                    initial_mode_index: Some(s.initial_mode_index),
                })
                .collect(),
            probe: Some(ProbeDoc {
                interval_ms: Some(self.probe.interval_ms),
                alpha: Some(self.probe.smoothing_alpha.as_f64()),
            }),
            policy: Some(PolicyDoc {
                hysteresis_ms: Some(self.policy.hysteresis_ms.as_f64()),
                backup_premium: Some(self.policy.backup_count_premium),
                backup_regular: Some(self.policy.backup_count_regular),
                upgrade_guard_ms: Some(self.upgrade_guard_ms.as_f64()),
                switch_latency_ms: Some(self.switch_latency_ms),
            }),
            budget: Some(BudgetDoc {
                ept_ms: Some(self.budget.ept_ms.as_f64()),
            }),
            run: RunDoc {
                duration_ms: self.duration_ms,
                seed: Some(self.seed),
            },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_document()).expect("scenario document serializes")
    }
}

/// One problem found while reading a scenario; `key` locates it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioError {
    pub key: String,
    pub message: String,
}

impl ScenarioError {
    fn new(key: &str, message: impl Into<String>) -> Self {
        Self {
            key: key.to_owned(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub topology: TopologyDoc,
    pub users: Vec<UserDoc>,
    pub sessions: Vec<SessionDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicyDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<BudgetDoc>,
    pub run: RunDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDoc {
    pub nodes: Vec<NodeDoc>,
    pub links: Vec<LinkDoc>,
    pub paths: Vec<PathDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub id: String,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDoc {
    pub a: String,
    pub b: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_delay_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathDoc {
    pub id: String,
    pub hops: Vec<String>,
    /// `[start_ms, delay_ms]` steps.
    pub schedule: Vec<(u64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter_std_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserDoc {
    pub id: String,
    pub class: UserClass,
    pub d0_ms: f64,
    /// `[fs_hz, fr_samples]` pairs, highest preference first.
    pub ladder: Vec<(u32, u32)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode_floor_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub tx: String,
    pub rx: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_mode_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hysteresis_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backup_premium: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backup_regular: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upgrade_guard_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch_latency_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ept_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunDoc {
    pub duration_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Required and optional keys of one table in the schema.
struct TableSchema {
    required: &'static [&'static str],
    optional: &'static [&'static str],
}

const ROOT: TableSchema = TableSchema {
    required: &["topology", "users", "sessions", "run"],
    optional: &["probe", "policy", "budget"],
};
const TOPOLOGY: TableSchema = TableSchema {
    required: &["nodes", "links", "paths"],
    optional: &[],
};
const NODE: TableSchema = TableSchema {
    required: &["id", "kind"],
    optional: &[],
};
const LINK: TableSchema = TableSchema {
    required: &["a", "b"],
    optional: &["base_delay_ms"],
};
const PATH: TableSchema = TableSchema {
    required: &["id", "hops", "schedule"],
    optional: &["jitter_std_ms"],
};
const USER: TableSchema = TableSchema {
    required: &["id", "class", "d0_ms", "ladder"],
    optional: &["mode_floor_index"],
};
const SESSION: TableSchema = TableSchema {
    required: &["tx", "rx"],
    optional: &["id", "initial_mode_index"],
};
const PROBE: TableSchema = TableSchema {
    required: &[],
    optional: &["interval_ms", "alpha"],
};
const POLICY: TableSchema = TableSchema {
    required: &[],
    optional: &[
        "hysteresis_ms",
        "backup_premium",
        "backup_regular",
        "upgrade_guard_ms",
        "switch_latency_ms",
    ],
};
const BUDGET: TableSchema = TableSchema {
    required: &[],
    optional: &["ept_ms"],
};
const RUN: TableSchema = TableSchema {
    required: &["duration_ms"],
    optional: &["seed"],
};

fn check_table(table: &toml::Table, schema: &TableSchema, at: &str, out: &mut Vec<ScenarioError>) {
    let key_path = |k: &str| {
        if at.is_empty() {
            k.to_owned()
        } else {
            format!("{at}.{k}")
        }
    };
    for k in schema.required {
        if !table.contains_key(*k) {
            out.push(ScenarioError::new(&key_path(k), "missing required key"));
        }
    }
    for k in table.keys() {
        if !schema.required.contains(&k.as_str()) && !schema.optional.contains(&k.as_str()) {
            out.push(ScenarioError::new(&key_path(k), "unknown key"));
        }
    }
}

fn check_sub(table: &toml::Table, key: &str, schema: &TableSchema, at: &str, out: &mut Vec<ScenarioError>) {
    let path = if at.is_empty() {
        key.to_owned()
    } else {
        format!("{at}.{key}")
    };
    match table.get(key) {
        Some(toml::Value::Table(t)) => check_table(t, schema, &path, out),
        Some(_) => out.push(ScenarioError::new(&path, "expected a table")),
        None => {}
    }
}

fn check_array(table: &toml::Table, key: &str, schema: &TableSchema, at: &str, out: &mut Vec<ScenarioError>) {
    let path = if at.is_empty() {
        key.to_owned()
    } else {
        format!("{at}.{key}")
    };
    match table.get(key) {
        Some(toml::Value::Array(items)) => {
            for (i, item) in items.iter().enumerate() {
                match item {
                    toml::Value::Table(t) => check_table(t, schema, &format!("{path}[{i}]"), out),
                    _ => out.push(ScenarioError::new(&format!("{path}[{i}]"), "expected a table")),
                }
            }
        }
        Some(_) => out.push(ScenarioError::new(&path, "expected an array of tables")),
        None => {}
    }
}

fn structural_errors(root: &toml::Table) -> Vec<ScenarioError> {
    let mut out = Vec::new();
    check_table(root, &ROOT, "", &mut out);
    check_sub(root, "topology", &TOPOLOGY, "", &mut out);
    if let Some(toml::Value::Table(topo)) = root.get("topology") {
        check_array(topo, "nodes", &NODE, "topology", &mut out);
        check_array(topo, "links", &LINK, "topology", &mut out);
        check_array(topo, "paths", &PATH, "topology", &mut out);
    }
    check_array(root, "users", &USER, "", &mut out);
    check_array(root, "sessions", &SESSION, "", &mut out);
    check_sub(root, "probe", &PROBE, "", &mut out);
    check_sub(root, "policy", &POLICY, "", &mut out);
    check_sub(root, "budget", &BUDGET, "", &mut out);
    check_sub(root, "run", &RUN, "", &mut out);
    out
}

impl Document {
    pub fn into_scenario<S: Scalar>(self) -> Scenario<S> {
        let probe_doc = self.probe.unwrap_or(ProbeDoc {
            interval_ms: None,
            alpha: None,
        });
        let policy_doc = self.policy.unwrap_or(PolicyDoc {
            hysteresis_ms: None,
            backup_premium: None,
            backup_regular: None,
            upgrade_guard_ms: None,
            switch_latency_ms: None,
        });
        let defaults = ReroutePolicy::<S>::default();
        Scenario {
            topology: Topology {
                nodes: self
                    .topology
                    .nodes
                    .into_iter()
                    .map(|n| Node {
                        id: NodeId(n.id),
                        kind: n.kind,
                    })
                    .collect(),
                links: self
                    .topology
                    .links
                    .into_iter()
                    .map(|l| Link {
                        a: NodeId(l.a),
                        b: NodeId(l.b),
                        base_delay_ms: S::lit(l.base_delay_ms.unwrap_or(0.0)),
                    })
                    .collect(),
                paths: self
                    .topology
                    .paths
                    .into_iter()
                    .map(|p| PathDescriptor {
                        id: PathId(p.id),
                        hops: p.hops.into_iter().map(NodeId).collect(),
                        schedule: DelaySchedule {
                            segments: p.schedule.into_iter().map(|(t, d)| (t, S::lit(d))).collect(),
                            jitter_std_ms: p.jitter_std_ms.map(S::lit),
                        },
                    })
                    .collect(),
            },
            users: self
                .users
                .into_iter()
                .map(|u| UserProfile {
                    user_id: NodeId(u.id),
                    card: SoundCardProfile {
                        d0_ms: S::lit(u.d0_ms),
                        supported_modes: u
                            .ladder
                            .into_iter()
                            .map(|(fs, fr)| AudioMode {
                                sampling_rate_hz: fs,
                                frame_size_samples: fr,
                            })
                            .collect(),
                    },
                    class: u.class,
                    mode_floor_index: u.mode_floor_index,
                })
                .collect(),
            sessions: self
                .sessions
                .into_iter()
                .map(|s| SessionDecl {
                    id: s.id.unwrap_or_else(|| format!("{}->{}", s.tx, s.rx)),
                    tx: NodeId(s.tx),
                    rx: NodeId(s.rx),
                    initial_mode_index: s.initial_mode_index.unwrap_or(0),
                })
                .collect(),
            probe: ProbeConfig {
                interval_ms: probe_doc.interval_ms.unwrap_or(DEFAULT_PROBE_INTERVAL_MS),
                smoothing_alpha: S::lit(probe_doc.alpha.unwrap_or(1.0)),
            },
            policy: ReroutePolicy {
                hysteresis_ms: policy_doc
                    .hysteresis_ms
                    .map(S::lit)
                    .unwrap_or(defaults.hysteresis_ms),
                backup_count_premium: policy_doc.backup_premium.unwrap_or(defaults.backup_count_premium),
                backup_count_regular: policy_doc.backup_regular.unwrap_or(defaults.backup_count_regular),
            },
            upgrade_guard_ms: S::lit(policy_doc.upgrade_guard_ms.unwrap_or(DEFAULT_UPGRADE_GUARD_MS)),
            switch_latency_ms: policy_doc.switch_latency_ms.unwrap_or(0),
            budget: DelayBudget {
                ept_ms: S::lit(self.budget.and_then(|b| b.ept_ms).unwrap_or(DEFAULT_EPT_MS)),
            },
            duration_ms: self.run.duration_ms,
            seed: self.run.seed.unwrap_or(0),
        }
    }
}

/// Parses and fully validates a scenario document.
pub fn parse_scenario<S: Scalar>(text: &str) -> Result<Scenario<S>, Vec<ScenarioError>> {
    let root: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| vec![ScenarioError::new("document", e.message().to_owned())])?;
    let structural = structural_errors(&root);
    if !structural.is_empty() {
        return Err(structural);
    }
    let doc: Document = toml::Value::Table(root)
        .try_into()
        .map_err(|e: toml::de::Error| vec![ScenarioError::new("document", e.message().to_owned())])?;
    let scenario = doc.into_scenario::<S>();
    let violations = scenario.violations();
    if violations.is_empty() {
        Ok(scenario)
    } else {
        Err(violations)
    }
}

/// Scenario files shipped with the crate.
pub mod bundled {
    pub const FIG2_REPLAY: &str = include_str!("../scenarios/fig2-replay.scn");
    pub const STEADY: &str = include_str!("../scenarios/steady.scn");
    pub const JITTER_PREMIUM: &str = include_str!("../scenarios/jitter-premium.scn");
    pub const LINK_FAILURE: &str = include_str!("../scenarios/link-failure.scn");

    pub const ALL: [(&str, &str); 4] = [
        ("fig2-replay", FIG2_REPLAY),
        ("steady", STEADY),
        ("jitter-premium", JITTER_PREMIUM),
        ("link-failure", LINK_FAILURE),
    ];

    pub fn by_name(name: &str) -> Option<&'static str> {
        ALL.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
    }
}

//! Network monitoring service: periodic probing of every candidate path and a
//! per-path smoothed delay estimate.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{DelaySample, TimeMs};
use crate::network::PathId;
use crate::scalar::Scalar;

pub const DEFAULT_PROBE_INTERVAL_MS: TimeMs = 500;

/// Probe period and EWMA weight of the newest sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig<S> {
    pub interval_ms: TimeMs,
    pub smoothing_alpha: S,
}

impl<S: Scalar> ProbeConfig<S> {
    pub fn new(interval_ms: TimeMs, smoothing_alpha: S) -> Result<Self> {
        let cfg = Self {
            interval_ms,
            smoothing_alpha,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.interval_ms == 0 {
            return Err(Error::Configuration("probe interval must be positive".into()));
        }
        if !(self.smoothing_alpha > S::zero() && self.smoothing_alpha <= S::one()) {
            return Err(Error::Configuration(format!(
                "smoothing alpha must be in (0, 1], got {}",
                self.smoothing_alpha
            )));
        }
        Ok(())
    }
}

impl<S: Scalar> Default for ProbeConfig<S> {
    fn default() -> Self {
        Self {
            interval_ms: DEFAULT_PROBE_INTERVAL_MS,
            smoothing_alpha: S::one(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathEstimate<S> {
    pub path_id: PathId,
    pub estimate_ms: S,
    pub last_sample: DelaySample<S>,
    pub sample_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeEvent {
    pub at_ms: TimeMs,
    pub path_id: PathId,
}

/// Probe times `0, interval, 2*interval, ... <= horizon` for every path,
/// ordered by time with ties in path order.
pub fn schedule_probes<'a, I>(paths: I, interval_ms: TimeMs, horizon_ms: TimeMs) -> Vec<ProbeEvent>
where
    I: IntoIterator<Item = &'a PathId>,
{
    let paths: Vec<&PathId> = paths.into_iter().collect();
    if paths.is_empty() || interval_ms == 0 {
        return Vec::new();
    }
    (0..=horizon_ms / interval_ms)
        .flat_map(|k| {
            let at_ms = k * interval_ms;
            paths.iter().map(move |p| ProbeEvent {
                at_ms,
                path_id: (*p).clone(),
            })
        })
        .collect()
}

/// Folds one sample into an estimate: the first sample initializes, later
/// ones are blended as `alpha * sample + (1 - alpha) * estimate`.
pub fn ingest_sample<S: Scalar>(
    previous: Option<&PathEstimate<S>>,
    path_id: &PathId,
    sample: DelaySample<S>,
    cfg: &ProbeConfig<S>,
) -> PathEstimate<S> {
    match previous {
        None => PathEstimate {
            path_id: path_id.clone(),
            estimate_ms: sample.one_way_delay_ms,
            last_sample: sample,
            sample_count: 1,
        },
        Some(prev) => {
            let alpha = cfg.smoothing_alpha;
            let blended = if alpha == S::one() {
                sample.one_way_delay_ms
            } else {
                alpha * sample.one_way_delay_ms + (S::one() - alpha) * prev.estimate_ms
            };
            PathEstimate {
                path_id: path_id.clone(),
                estimate_ms: blended.max(S::zero()),
                last_sample: sample,
                sample_count: prev.sample_count + 1,
            }
        }
    }
}

/// Detached view of the current estimates; never-probed paths are absent.
pub type Snapshot<S> = BTreeMap<PathId, S>;

/// Live estimate table owned by the event loop.
#[derive(Debug, Clone)]
pub struct Monitor<S> {
    cfg: ProbeConfig<S>,
    estimates: BTreeMap<PathId, PathEstimate<S>>,
}

impl<S: Scalar> Monitor<S> {
    pub fn new(cfg: ProbeConfig<S>) -> Self {
        Self {
            cfg,
            estimates: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &ProbeConfig<S> {
        &self.cfg
    }

    pub fn record(&mut self, path_id: &PathId, sample: DelaySample<S>) -> &PathEstimate<S> {
        let next = ingest_sample(self.estimates.get(path_id), path_id, sample, &self.cfg);
        self.estimates.insert(path_id.clone(), next);
        &self.estimates[path_id]
    }

    pub fn estimate(&self, path_id: &PathId) -> Option<&PathEstimate<S>> {
        self.estimates.get(path_id)
    }

    pub fn snapshot(&self) -> Snapshot<S> {
        snapshot(self.estimates.values())
    }
}

pub fn snapshot<'a, S: Scalar>(estimates: impl IntoIterator<Item = &'a PathEstimate<S>>) -> Snapshot<S> {
    estimates
        .into_iter()
        .map(|e| (e.path_id.clone(), e.estimate_ms))
        .collect()
}

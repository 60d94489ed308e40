//! Session service: user registration and profiling, service classes, and the
//! audio-mode degrade/upgrade state machine driven by network delay.
//!
//! A session's ladder is the transmitter's ladder restricted to modes the
//! receiver also supports. Ladders are ordered by strictly decreasing blocking
//! delay, so moving down the ladder always trades quality for latency.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    blocking_delay, end_to_end_delay_asymmetric, meets_ept, AudioMode, DelayBudget, SoundCardProfile, TimeMs,
};
use crate::network::NodeId;
use crate::scalar::Scalar;

pub const DEFAULT_UPGRADE_GUARD_MS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UserClass {
    Premium,
    Regular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile<S> {
    pub user_id: NodeId,
    pub card: SoundCardProfile<S>,
    pub class: UserClass,
    /// Lowest acceptable ladder index. Only premium users may set it; regular
    /// users always accept the whole ladder.
    pub mode_floor_index: Option<usize>,
}

impl<S: Scalar> UserProfile<S> {
    pub fn floor_index(&self) -> usize {
        let last = self.card.supported_modes.len().saturating_sub(1);
        match self.class {
            UserClass::Premium => self.mode_floor_index.unwrap_or(last).min(last),
            UserClass::Regular => last,
        }
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = self.card.validate() {
            out.push(e.to_string());
        }
        if let Some(i) = self.card.ladder_ordering_violation() {
            out.push(format!(
                "ladder ordering: blocking delay of {} is not below that of {}",
                self.card.supported_modes[i],
                self.card.supported_modes[i - 1]
            ));
        }
        match (self.class, self.mode_floor_index) {
            (UserClass::Regular, Some(_)) => {
                out.push("mode_floor_index is only allowed for premium users".into())
            }
            (UserClass::Premium, Some(f)) if f >= self.card.supported_modes.len() => {
                out.push(format!("mode_floor_index {f} is outside the ladder"))
            }
            _ => {}
        }
        out
    }
}

/// Blocking delay of every supported mode, in ladder order.
pub fn profile_user<S: Scalar>(card: &SoundCardProfile<S>) -> Result<BTreeMap<AudioMode, S>> {
    card.validate()?;
    card.supported_modes
        .iter()
        .map(|m| Ok((*m, blocking_delay(m, card)?)))
        .collect()
}

/// Per-mode blocking delays of both endpoints over the shared ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionProfiles<S> {
    pub modes: Vec<AudioMode>,
    pub tx_block_ms: Vec<S>,
    pub rx_block_ms: Vec<S>,
    /// Stricter of the two endpoint floors, as an index into `modes`.
    pub floor_index: usize,
}

impl<S: Scalar> SessionProfiles<S> {
    pub fn build(tx: &UserProfile<S>, rx: &UserProfile<S>) -> Result<Self> {
        let modes: Vec<AudioMode> = tx
            .card
            .supported_modes
            .iter()
            .filter(|m| rx.card.mode_position(m).is_some())
            .copied()
            .collect();
        if modes.is_empty() {
            return Err(Error::ModeMismatch {
                user: rx.user_id.to_string(),
                mode: format!("any of {}'s ladder", tx.user_id),
            });
        }
        let endpoint_floor = |u: &UserProfile<S>| -> Result<usize> {
            let floor = u.floor_index();
            modes
                .iter()
                .rposition(|m| u.card.mode_position(m).is_some_and(|p| p <= floor))
                .ok_or_else(|| {
                    Error::Configuration(format!(
                        "no shared mode at or above the floor of user {}",
                        u.user_id
                    ))
                })
        };
        let floor_index = endpoint_floor(tx)?.min(endpoint_floor(rx)?);
        let blocks = |card: &SoundCardProfile<S>| -> Result<Vec<S>> {
            modes.iter().map(|m| blocking_delay(m, card)).collect()
        };
        Ok(Self {
            tx_block_ms: blocks(&tx.card)?,
            rx_block_ms: blocks(&rx.card)?,
            modes,
            floor_index,
        })
    }

    /// Profiles for two endpoints sharing one card.
    pub fn symmetric(card: &SoundCardProfile<S>, floor_index: usize) -> Result<Self> {
        let blocks: Vec<S> = card
            .supported_modes
            .iter()
            .map(|m| blocking_delay(m, card))
            .collect::<Result<_>>()?;
        if floor_index >= blocks.len() {
            return Err(Error::Configuration(format!(
                "floor index {floor_index} outside ladder"
            )));
        }
        Ok(Self {
            modes: card.supported_modes.clone(),
            tx_block_ms: blocks.clone(),
            rx_block_ms: blocks,
            floor_index,
        })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Combined blocking delay of both ends at ladder position `index`.
    pub fn total_block_ms(&self, index: usize) -> S {
        self.tx_block_ms[index] + self.rx_block_ms[index]
    }

    pub fn e2e_at(&self, index: usize, network_delay_ms: S) -> Result<S> {
        if index >= self.modes.len() {
            return Err(Error::ModeMismatch {
                user: "session".into(),
                mode: format!("ladder index {index}"),
            });
        }
        end_to_end_delay_asymmetric(self.tx_block_ms[index], self.rx_block_ms[index], network_delay_ms)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionState<S> {
    pub session_id: String,
    pub tx_user: NodeId,
    pub rx_user: NodeId,
    pub mode_index: usize,
    pub budget: DelayBudget<S>,
    /// Extra margin below the threshold required before moving back up the ladder.
    pub upgrade_guard_ms: S,
}

/// End-to-end delay of the session at its current mode.
pub fn session_e2e<S: Scalar>(
    session: &SessionState<S>,
    network_delay_ms: S,
    profiles: &SessionProfiles<S>,
) -> Result<S> {
    profiles.e2e_at(session.mode_index, network_delay_ms)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeDecision {
    Degrade(usize),
    Upgrade(usize),
    Hold,
    /// No mode within the floor meets the budget; operate at this index.
    BestEffort(usize),
}

/// Decides the next audio mode given the best network delay over all paths.
///
/// Within budget, moves up to the highest mode that still clears the budget
/// by the guard margin. Over budget, moves down to the nearest mode that fits;
/// when none does within the floor, reports best effort at the floor.
pub fn mode_switch_decision<S: Scalar>(
    session: &SessionState<S>,
    best_path_delay_ms: S,
    profiles: &SessionProfiles<S>,
) -> ModeDecision {
    let ept = session.budget.ept_ms;
    let e2e = |i: usize| profiles.total_block_ms(i) + best_path_delay_ms;
    let current = session.mode_index;
    if meets_ept(e2e(current), &session.budget) {
        let target = ept - session.upgrade_guard_ms;
        match (0..current).find(|&j| e2e(j) <= target) {
            Some(j) => ModeDecision::Upgrade(j),
            None => ModeDecision::Hold,
        }
    } else {
        let floor = profiles.floor_index;
        match (current + 1..=floor).find(|&j| e2e(j) <= ept) {
            Some(j) => ModeDecision::Degrade(j),
            None => ModeDecision::BestEffort(floor),
        }
    }
}

/// A mode change delivered to the application.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSwitchRecord<S> {
    pub at_ms: TimeMs,
    pub effective_at_ms: TimeMs,
    pub session_id: String,
    pub from_index: usize,
    pub to_index: usize,
    pub from: AudioMode,
    pub to: AudioMode,
    pub trigger_delay_ms: S,
}

/// Applies a mode-changing decision to the session state and returns the
/// record of the change. `Hold` and no-op targets are rejected.
pub fn notify_application<S: Scalar>(
    session: &mut SessionState<S>,
    profiles: &SessionProfiles<S>,
    decision: ModeDecision,
    at_ms: TimeMs,
    trigger_delay_ms: S,
    switch_latency_ms: TimeMs,
) -> Result<ModeSwitchRecord<S>> {
    let current = session.mode_index;
    let target = match decision {
        ModeDecision::Degrade(j) if j > current => j,
        ModeDecision::Upgrade(j) if j < current => j,
        ModeDecision::BestEffort(j) if j != current => j,
        other => {
            return Err(Error::InvalidArgument(format!(
                "{other:?} does not change mode index {current}"
            )))
        }
    };
    if target > profiles.floor_index {
        return Err(Error::FloorViolation {
            requested: target,
            floor: profiles.floor_index,
        });
    }
    session.mode_index = target;
    Ok(ModeSwitchRecord {
        at_ms,
        effective_at_ms: at_ms + switch_latency_ms,
        session_id: session.session_id.clone(),
        from_index: current,
        to_index: target,
        from: profiles.modes[current],
        to: profiles.modes[target],
        trigger_delay_ms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mode(fs: u32, fr: u32) -> AudioMode {
        AudioMode::new(fs, fr).unwrap()
    }

    fn reference_card(d0: f64) -> SoundCardProfile<f64> {
        SoundCardProfile::new(d0, vec![mode(44_100, 512), mode(48_000, 512), mode(48_000, 256)]).unwrap()
    }

    fn state(mode_index: usize, guard: f64) -> SessionState<f64> {
        SessionState {
            session_id: "A->B".into(),
            tx_user: "A".into(),
            rx_user: "B".into(),
            mode_index,
            budget: DelayBudget::default(),
            upgrade_guard_ms: guard,
        }
    }

    fn user(
        id: &str,
        card: SoundCardProfile<f64>,
        class: UserClass,
        floor: Option<usize>,
    ) -> UserProfile<f64> {
        UserProfile {
            user_id: id.into(),
            card,
            class,
            mode_floor_index: floor,
        }
    }

    #[test]
    fn profile_examples() {
        let p = profile_user(&reference_card(0.0)).unwrap();
        let got: Vec<f64> = [mode(44_100, 512), mode(48_000, 512), mode(48_000, 256)]
            .iter()
            .map(|m| p[m])
            .collect();
        assert!((got[0] - 11.6100).abs() < 1e-4);
        assert!((got[1] - 10.6667).abs() < 1e-4);
        assert!((got[2] - 5.3333).abs() < 1e-4);

        let single = SoundCardProfile::new(2.0, vec![mode(48_000, 480)]).unwrap();
        assert_eq!(profile_user(&single).unwrap()[&mode(48_000, 480)], 12.0);

        let empty = SoundCardProfile::<f64> {
            d0_ms: 0.0,
            supported_modes: vec![],
        };
        assert!(matches!(profile_user(&empty), Err(Error::Configuration(_))));
    }

    #[test]
    fn session_e2e_examples() {
        let prof = SessionProfiles::symmetric(&reference_card(0.0), 2).unwrap();
        let e = session_e2e(&state(0, 1.0), 1.0, &prof).unwrap();
        assert!((e - (2.0 * 512.0 / 44.1 + 1.0)).abs() < 1e-12);
        assert!((e - 24.2200).abs() < 1e-4);
        let e = session_e2e(&state(2, 1.0), 10.0, &prof).unwrap();
        assert!((e - 20.6667).abs() < 1e-4);
        let tiny = SoundCardProfile::new(0.0, vec![mode(48_000, 48)]).unwrap();
        let prof = SessionProfiles::symmetric(&tiny, 0).unwrap();
        assert!((session_e2e(&state(0, 1.0), 0.0, &prof).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(
            session_e2e(&state(3, 1.0), 0.0, &prof),
            Err(Error::ModeMismatch { .. })
        ));
    }

    #[test]
    fn decision_examples() {
        let prof = SessionProfiles::symmetric(&reference_card(0.0), 2).unwrap();
        assert_eq!(
            mode_switch_decision(&state(0, 1.0), 3.0, &prof),
            ModeDecision::Degrade(1)
        );
        assert_eq!(
            mode_switch_decision(&state(1, 1.0), 5.0, &prof),
            ModeDecision::Degrade(2)
        );
        assert_eq!(
            mode_switch_decision(&state(2, 1.0), 0.5, &prof),
            ModeDecision::Upgrade(0)
        );
        assert_eq!(
            mode_switch_decision(&state(2, 1.0), 30.0, &prof),
            ModeDecision::BestEffort(2)
        );
        assert_eq!(
            mode_switch_decision(&state(0, 1.0), 1.0, &prof),
            ModeDecision::Hold
        );
    }

    #[test]
    fn degrade_skips_to_nearest_feasible_step() {
        let prof = SessionProfiles::symmetric(&reference_card(0.0), 2).unwrap();
        // mode 1 would give 26.33, mode 2 gives 15.67
        assert_eq!(
            mode_switch_decision(&state(0, 1.0), 5.0, &prof),
            ModeDecision::Degrade(2)
        );
    }

    #[test]
    fn best_effort_respects_premium_floor() {
        let a = user("A", reference_card(0.0), UserClass::Premium, Some(1));
        let b = user("B", reference_card(0.0), UserClass::Regular, None);
        let prof = SessionProfiles::build(&a, &b).unwrap();
        assert_eq!(prof.floor_index, 1);
        // only mode 2 would fit, and it is below A's floor
        assert_eq!(
            mode_switch_decision(&state(0, 1.0), 5.0, &prof),
            ModeDecision::BestEffort(1)
        );
    }

    #[test]
    fn shared_ladder_and_asymmetric_delays() {
        let a = user("A", reference_card(1.0), UserClass::Regular, None);
        let b_card = SoundCardProfile::new(3.0, vec![mode(44_100, 512), mode(48_000, 256)]).unwrap();
        let b = user("B", b_card, UserClass::Regular, None);
        let prof = SessionProfiles::build(&a, &b).unwrap();
        assert_eq!(prof.modes, vec![mode(44_100, 512), mode(48_000, 256)]);
        assert_eq!(prof.floor_index, 1);
        let e = prof.e2e_at(1, 2.0).unwrap();
        assert!((e - (16.0 / 3.0 + 1.0 + 16.0 / 3.0 + 3.0 + 2.0)).abs() < 1e-12);

        let c = user(
            "C",
            SoundCardProfile::new(0.0, vec![mode(96_000, 64)]).unwrap(),
            UserClass::Regular,
            None,
        );
        assert!(matches!(
            SessionProfiles::build(&a, &c),
            Err(Error::ModeMismatch { .. })
        ));
    }

    #[test]
    fn notify_examples() {
        let prof = SessionProfiles::symmetric(&reference_card(0.0), 2).unwrap();
        let mut s = state(0, 1.0);
        let rec = notify_application(&mut s, &prof, ModeDecision::Degrade(1), 189_000, 3.0, 0).unwrap();
        assert_eq!(
            (rec.at_ms, rec.from, rec.to),
            (189_000, mode(44_100, 512), mode(48_000, 512))
        );
        assert_eq!(s.mode_index, 1);

        let mut s = state(2, 1.0);
        let rec = notify_application(&mut s, &prof, ModeDecision::Upgrade(0), 5, 0.5, 20).unwrap();
        assert_eq!((rec.from_index, rec.to_index, rec.effective_at_ms), (2, 0, 25));

        let floored = SessionProfiles::symmetric(&reference_card(0.0), 1).unwrap();
        let mut s = state(1, 1.0);
        let err = notify_application(&mut s, &floored, ModeDecision::Degrade(2), 0, 9.0, 0);
        assert!(matches!(
            err,
            Err(Error::FloorViolation {
                requested: 2,
                floor: 1
            })
        ));
        assert_eq!(s.mode_index, 1);
        assert!(notify_application(&mut s, &floored, ModeDecision::Hold, 0, 9.0, 0).is_err());
    }

    #[test]
    fn user_problems() {
        let bad = SoundCardProfile::new(0.0, vec![mode(48_000, 256), mode(44_100, 512)]).unwrap();
        assert_eq!(user("A", bad, UserClass::Regular, None).problems().len(), 1);
        assert_eq!(
            user("A", reference_card(0.0), UserClass::Regular, Some(1))
                .problems()
                .len(),
            1
        );
        assert_eq!(
            user("A", reference_card(0.0), UserClass::Premium, Some(3))
                .problems()
                .len(),
            1
        );
        assert!(user("A", reference_card(0.0), UserClass::Premium, Some(1))
            .problems()
            .is_empty());
    }
}

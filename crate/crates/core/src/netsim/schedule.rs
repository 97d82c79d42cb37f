//! Per-slot session, basis and intensity choices.
//!
//! A plan is generated lazily from its seed, so very long runs never hold
//! the slot list in memory.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::IntensitySet;
use crate::counts::{Label, Link};
use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SessionType {
    #[serde(rename = "MDI_AB")]
    MdiAb,
    #[serde(rename = "QKD_AC")]
    QkdAc,
    #[serde(rename = "QKD_BC")]
    QkdBc,
}

impl SessionType {
    pub const ALL: [SessionType; 3] = [SessionType::MdiAb, SessionType::QkdAc, SessionType::QkdBc];

    pub fn link(self) -> Link {
        match self {
            SessionType::MdiAb => Link::AB,
            SessionType::QkdAc => Link::AC,
            SessionType::QkdBc => Link::BC,
        }
    }

    /// Session implied by which senders emit light; Charlie's measurement
    /// is the same in all three.
    pub fn from_emitters(alice: bool, bob: bool) -> Option<SessionType> {
        match (alice, bob) {
            (true, true) => Some(SessionType::MdiAb),
            (true, false) => Some(SessionType::QkdAc),
            (false, true) => Some(SessionType::QkdBc),
            (false, false) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub mdi: f64,
    pub ac: f64,
    pub bc: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            mdi: 500.0,
            ac: 1.0,
            bc: 1.0,
        }
    }
}

impl Weights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.mdi, self.ac, self.bc];
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(domain(format!(
                "session weights must be non-negative: {self:?}"
            )));
        }
        if w.iter().sum::<f64>() <= 0.0 {
            return Err(domain("session weights are all zero"));
        }
        Ok(())
    }

    /// Share of slots assigned to `session`.
    pub fn fraction(&self, session: SessionType) -> f64 {
        let total = self.mdi + self.ac + self.bc;
        match session {
            SessionType::MdiAb => self.mdi / total,
            SessionType::QkdAc => self.ac / total,
            SessionType::QkdBc => self.bc / total,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
    Charlie,
}

/// One pulse slot: what each sender prepares, `None` when its emission is
/// stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub index: u64,
    pub alice: Option<Label>,
    pub bob: Option<Label>,
}

impl Slot {
    pub fn session(&self) -> Option<SessionType> {
        SessionType::from_emitters(self.alice.is_some(), self.bob.is_some())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub slots: u64,
    pub weights: Weights,
    pub intensities: IntensitySet,
    pub seed: u64,
    /// A sender whose emission is stopped in every slot.
    #[serde(default)]
    pub silenced: Option<Party>,
}

/// i.i.d. session draws with probabilities `weights / Σ weights`, then an
/// independent basis and intensity choice for every emitting sender.
pub fn schedule(
    slots: u64,
    weights: Weights,
    intensities: IntensitySet,
    seed: u64,
) -> Result<SessionPlan> {
    weights.validate()?;
    intensities.validate()?;
    Ok(SessionPlan {
        slots,
        weights,
        intensities,
        seed,
        silenced: None,
    })
}

impl SessionPlan {
    /// The same plan with `party` never emitting. Silencing Bob turns every
    /// MDI slot into an Alice-Charlie QKD slot.
    pub fn with_party_silenced(mut self, party: Party) -> Self {
        self.silenced = Some(party);
        self
    }

    pub fn iter(&self) -> SlotIter {
        SlotIter {
            rng: ChaCha8Rng::seed_from_u64(self.seed),
            next: 0,
            plan: *self,
        }
    }
}

pub struct SlotIter {
    rng: ChaCha8Rng,
    next: u64,
    plan: SessionPlan,
}

fn draw_label<R: Rng>(rng: &mut R, z_prob: f64) -> Label {
    if rng.random::<f64>() < z_prob {
        Label::S
    } else {
        Label::DECOYS[rng.random_range(0..3)]
    }
}

impl Iterator for SlotIter {
    type Item = Slot;

    fn next(&mut self) -> Option<Slot> {
        if self.next >= self.plan.slots {
            return None;
        }
        let w = &self.plan.weights;
        let total = w.mdi + w.ac + w.bc;
        let u = self.rng.random::<f64>() * total;
        let session = if u < w.mdi {
            SessionType::MdiAb
        } else if u < w.mdi + w.ac {
            SessionType::QkdAc
        } else {
            SessionType::QkdBc
        };
        let z = self.plan.intensities.z_basis_prob;
        let (mut alice_on, mut bob_on) = match session {
            SessionType::MdiAb => (true, true),
            SessionType::QkdAc => (true, false),
            SessionType::QkdBc => (false, true),
        };
        match self.plan.silenced {
            Some(Party::Alice) => alice_on = false,
            Some(Party::Bob) => bob_on = false,
            _ => {}
        }
        let alice = alice_on.then(|| draw_label(&mut self.rng, z));
        let bob = bob_on.then(|| draw_label(&mut self.rng, z));
        let slot = Slot {
            index: self.next,
            alice,
            bob,
        };
        self.next += 1;
        Some(slot)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.plan.slots - self.next) as usize;
        (left, Some(left))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(slots: u64, w: (f64, f64, f64), seed: u64) -> SessionPlan {
        schedule(
            slots,
            Weights {
                mdi: w.0,
                ac: w.1,
                bc: w.2,
            },
            IntensitySet::default(),
            seed,
        )
        .unwrap()
    }

    #[test]
    fn mdi_only_weights() {
        assert!(plan(1000, (1.0, 0.0, 0.0), 1)
            .iter()
            .all(|s| s.session() == Some(SessionType::MdiAb)));
    }

    #[test]
    fn zero_weights_rejected() {
        let w = Weights {
            mdi: 0.0,
            ac: 0.0,
            bc: 0.0,
        };
        assert!(schedule(10, w, IntensitySet::default(), 0).is_err());
    }

    #[test]
    fn duty_split_within_five_sigma() {
        let n = 1_000_000u64;
        let mdi = plan(n, (500.0, 1.0, 1.0), 7)
            .iter()
            .filter(|s| s.session() == Some(SessionType::MdiAb))
            .count() as f64;
        let p = 500.0 / 502.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((mdi - n as f64 * p).abs() < 5.0 * sigma);
    }

    #[test]
    fn seeded_plans_repeat() {
        let a: Vec<Slot> = plan(500, (500.0, 1.0, 1.0), 3).iter().collect();
        let b: Vec<Slot> = plan(500, (500.0, 1.0, 1.0), 3).iter().collect();
        assert_eq!(a, b);
    }

    #[test]
    fn labels_follow_bases() {
        for s in plan(10_000, (1.0, 1.0, 1.0), 5).iter() {
            for l in [s.alice, s.bob].into_iter().flatten() {
                assert!(matches!(l, Label::S | Label::U | Label::V | Label::W));
            }
        }
    }

    #[test]
    fn silencing_bob_leaves_alice() {
        let p = plan(1000, (1.0, 0.0, 0.0), 2).with_party_silenced(Party::Bob);
        assert!(p.iter().all(|s| s.session() == Some(SessionType::QkdAc)));
    }
}

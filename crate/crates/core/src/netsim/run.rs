//! Pulse-slot simulation: Charlie's detection events, sifting into count
//! tables and Z-basis bit pools.
//!
//! Photon numbers are never drawn explicitly. For every intensity (pair) the
//! Poisson mixture over the yield model is folded into the handful of
//! outcome probabilities a slot can produce, which is exact in distribution
//! and keeps a slot at one or two uniform draws.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{IntensitySet, YieldModel};
use crate::counts::{Basis, CountTable, Intensity, Label, Link, Mode};
use crate::error::{domain, Result};
use crate::mathkit::poisson_pmf;
use crate::netsim::schedule::{Party, SessionPlan, SessionType, Slot};

/// Charlie's four threshold detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Detector {
    H,
    V,
    D,
    A,
}

impl Detector {
    pub fn basis(self) -> Basis {
        match self {
            Detector::H | Detector::V => Basis::Z,
            Detector::D | Detector::A => Basis::X,
        }
    }

    /// Bit value read from this detector.
    pub fn bit(self) -> bool {
        matches!(self, Detector::V | Detector::A)
    }

    pub fn for_bit(basis: Basis, bit: bool) -> Detector {
        match (basis, bit) {
            (Basis::Z, false) => Detector::H,
            (Basis::Z, true) => Detector::V,
            (Basis::X, false) => Detector::D,
            (Basis::X, true) => Detector::A,
        }
    }
}

/// Set of detectors that clicked in one slot.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clicks(u8);

impl Clicks {
    pub fn of(detectors: &[Detector]) -> Clicks {
        Clicks(detectors.iter().fold(0, |m, &d| m | 1 << d as u8))
    }

    pub fn contains(self, d: Detector) -> bool {
        self.0 & (1 << d as u8) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn detectors(self) -> Vec<Detector> {
        [Detector::H, Detector::V, Detector::D, Detector::A]
            .into_iter()
            .filter(|&d| self.contains(d))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub slot: u64,
    pub clicks: Clicks,
}

/// A sender's preparation: basis and bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prepared {
    pub basis: Basis,
    pub bit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MdiSift {
    /// Usable coincidence; `error` compares Alice's bit with Bob's bit after
    /// his basis-dependent flip.
    Accepted {
        basis: Basis,
        error: bool,
    },
    BasisMismatch,
    /// Coincidence across the Z and X branches (e.g. H with D).
    CrossBranch,
    /// Anything other than a two-detector coincidence.
    NotCoincidence,
}

/// Sifting of one MDI coincidence. The accepted projection anti-correlates
/// in Z (H with V) and correlates in X (D with A), so Bob flips his bit in Z
/// and keeps it in X.
pub fn sift_mdi_event(alice: Prepared, bob: Prepared, clicks: Clicks) -> MdiSift {
    let ds = clicks.detectors();
    if ds.len() != 2 {
        return MdiSift::NotCoincidence;
    }
    let branch = ds[0].basis();
    if ds[1].basis() != branch {
        return MdiSift::CrossBranch;
    }
    if alice.basis != bob.basis || alice.basis != branch {
        return MdiSift::BasisMismatch;
    }
    let bob_bit = match branch {
        Basis::Z => !bob.bit,
        Basis::X => bob.bit,
    };
    MdiSift::Accepted {
        basis: branch,
        error: alice.bit != bob_bit,
    }
}

/// Z-basis signal bits of one link: the sender's bits and whether the
/// receiver's sifted bit disagrees.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ZPool {
    pub sender_bits: Vec<bool>,
    pub errors: Vec<bool>,
}

impl ZPool {
    pub fn len(&self) -> usize {
        self.sender_bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sender_bits.is_empty()
    }

    pub fn receiver_bits(&self) -> Vec<bool> {
        self.sender_bits
            .iter()
            .zip(&self.errors)
            .map(|(&a, &e)| a ^ e)
            .collect()
    }

    pub fn error_rate(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.errors.iter().filter(|&&e| e).count() as f64 / self.len() as f64
        }
    }

    fn push(&mut self, bit: bool, error: bool) {
        self.sender_bits.push(bit);
        self.errors.push(error);
    }
}

/// Events that never reach a count table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tallies {
    pub slots_mdi: u64,
    pub slots_ac: u64,
    pub slots_bc: u64,
    /// Slots with no emitter.
    pub slots_dark: u64,
    /// MDI slots whose senders chose different bases.
    pub mdi_basis_mismatch: u64,
    pub mdi_cross_branch: u64,
    /// QKD clicks in the branch not matching the sender's basis.
    pub qkd_branch_mismatch: u64,
    /// Double clicks inside one branch, squashed to a random bit.
    pub qkd_squashed: u64,
}

/// Yield models of the links a plan may use.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkModels {
    pub ab: Option<YieldModel>,
    pub ac: Option<YieldModel>,
    pub bc: Option<YieldModel>,
}

impl LinkModels {
    pub fn get(&self, link: Link) -> Option<&YieldModel> {
        match link {
            Link::AB => self.ab.as_ref(),
            Link::AC => self.ac.as_ref(),
            Link::BC => self.bc.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub tables: BTreeMap<Link, CountTable>,
    pub z_pools: BTreeMap<Link, ZPool>,
    pub tallies: Tallies,
    /// The first detection events, kept when tracing is requested.
    pub trace: Vec<DetectionEvent>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Number of detection events to keep in the trace.
    pub trace_events: usize,
}

/// Gain and error gain of one entry, per basis, from the model.
fn gain_and_errors(
    model: &YieldModel,
    basis: Basis,
    w: impl Fn(usize, usize) -> f64,
    n_cut: usize,
    two_sided: bool,
) -> (f64, f64) {
    let (mut g, mut e) = (0.0, 0.0);
    for n in 0..=n_cut {
        for m in 0..=if two_sided { n_cut } else { 0 } {
            let p = w(n, m);
            let y = model.yield_at(n, m);
            g += p * y;
            e += p * y * model.error_at(basis, n, m);
        }
    }
    (g, e)
}

/// Outcome probabilities of an MDI slot with matched bases.
#[derive(Debug, Clone, Copy)]
struct MdiOutcome {
    /// Accepted coincidence when the prepared bits are in the expected
    /// relation, and when they are not.
    accept_right: f64,
    accept_wrong: f64,
    cross: f64,
}

/// Outcome probabilities of a QKD slot.
#[derive(Debug, Clone, Copy)]
struct QkdOutcome {
    click: f64,
    /// Same-branch double click, given a click in the matching branch.
    double: f64,
    /// Error of a single click in the matching branch.
    single_error: f64,
}

fn pmf_row(mu: f64, n_cut: usize) -> Result<Vec<f64>> {
    (0..=n_cut)
        .map(|n| poisson_pmf(mu, n as u64).map(|p| p.get()))
        .collect()
}

fn mdi_outcome(
    model: &YieldModel,
    intensities: &IntensitySet,
    a: Label,
    b: Label,
) -> Result<MdiOutcome> {
    let basis = a.basis();
    let pa = pmf_row(intensities.mean(a), model.n_cut)?;
    let pb = pmf_row(intensities.mean(b), model.n_cut)?;
    let (g, e) = gain_and_errors(model, basis, |n, m| pa[n] * pb[m], model.n_cut, true);
    let accept_right = (2.0 * (g - e)).clamp(0.0, 1.0);
    let accept_wrong = (2.0 * e).clamp(0.0, 1.0);
    let cross = g.min(1.0 - accept_right.max(accept_wrong));
    Ok(MdiOutcome {
        accept_right,
        accept_wrong,
        cross,
    })
}

/// Same-branch double-click probability of an `n`-photon pulse, capped so
/// that squashing never contributes more errors than the model allows.
fn same_branch_double(eta: f64, n: usize, error: f64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    (0.25 * (1.0 - (1.0 - eta).powi(n as i32 - 1))).min(2.0 * error)
}

fn qkd_outcome(model: &YieldModel, intensities: &IntensitySet, l: Label) -> Result<QkdOutcome> {
    let basis = l.basis();
    let p = pmf_row(intensities.mean(l), model.n_cut)?;
    let y0 = model.yield_at(0, 0);
    let eta = if y0 < 1.0 {
        ((model.yield_at(1, 0) - y0) / (1.0 - y0)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (mut g, mut e, mut d) = (0.0, 0.0, 0.0);
    for (n, &pn) in p.iter().enumerate() {
        let y = model.yield_at(n, 0);
        let err = model.error_at(basis, n, 0);
        g += pn * y;
        e += pn * y * err;
        d += pn * y * same_branch_double(eta, n, err);
    }
    let (double, single_error) = if g > 0.0 {
        let single = g - d;
        let se = if single > 0.0 {
            ((e - 0.5 * d) / single).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (d / g, se)
    } else {
        (0.0, 0.0)
    };
    Ok(QkdOutcome {
        click: g.min(1.0),
        double,
        single_error,
    })
}

struct Simulator<'a> {
    plan: &'a SessionPlan,
    rng: ChaCha8Rng,
    mdi: BTreeMap<(Label, Label), MdiOutcome>,
    qkd: BTreeMap<(Link, Label), QkdOutcome>,
    out: RunOutput,
    trace_left: usize,
}

impl Simulator<'_> {
    fn table(&mut self, link: Link) -> &mut CountTable {
        self.out.tables.get_mut(&link).expect("table per link")
    }

    fn trace(&mut self, slot: u64, clicks: Clicks) {
        if self.trace_left > 0 {
            self.trace_left -= 1;
            self.out.trace.push(DetectionEvent { slot, clicks });
        }
    }

    fn mdi_slot(&mut self, slot: &Slot, a: Label, b: Label) -> Result<()> {
        self.out.tallies.slots_mdi += 1;
        let alice = Prepared {
            basis: a.basis(),
            bit: self.rng.random(),
        };
        let bob = Prepared {
            basis: b.basis(),
            bit: self.rng.random(),
        };
        if alice.basis != bob.basis {
            // Mismatched preparations are discarded at basis reconciliation
            // whatever Charlie announces.
            self.out.tallies.mdi_basis_mismatch += 1;
            return Ok(());
        }
        let basis = alice.basis;
        let o = self.mdi[&(a, b)];
        // Bits that a perfect projection would accept: different in Z,
        // equal in X.
        let expected = match basis {
            Basis::Z => alice.bit != bob.bit,
            Basis::X => alice.bit == bob.bit,
        };
        let accept = if expected {
            o.accept_right
        } else {
            o.accept_wrong
        };
        let u: f64 = self.rng.random();
        let intensity = Intensity::Pair(a, b);
        self.table(Link::AB).entry_mut(intensity, basis).sent += 1;
        let clicks = if u < accept {
            let pair = match basis {
                Basis::Z => [Detector::H, Detector::V],
                Basis::X => [Detector::D, Detector::A],
            };
            Clicks::of(&pair)
        } else if u < accept + o.cross {
            let z = Detector::for_bit(Basis::Z, self.rng.random());
            let x = Detector::for_bit(Basis::X, self.rng.random());
            Clicks::of(&[z, x])
        } else {
            return Ok(());
        };
        self.trace(slot.index, clicks);
        match sift_mdi_event(alice, bob, clicks) {
            MdiSift::Accepted { basis, error } => {
                let rec = self.table(Link::AB).entry_mut(intensity, basis);
                rec.detected += 1;
                rec.errors += error as u64;
                if basis == Basis::Z {
                    self.out
                        .z_pools
                        .get_mut(&Link::AB)
                        .expect("AB pool")
                        .push(alice.bit, error);
                }
            }
            MdiSift::CrossBranch => self.out.tallies.mdi_cross_branch += 1,
            MdiSift::BasisMismatch | MdiSift::NotCoincidence => {}
        }
        Ok(())
    }

    fn qkd_slot(&mut self, slot: &Slot, link: Link, l: Label) -> Result<()> {
        match link {
            Link::AC => self.out.tallies.slots_ac += 1,
            _ => self.out.tallies.slots_bc += 1,
        }
        let sender = Prepared {
            basis: l.basis(),
            bit: self.rng.random(),
        };
        let o = self.qkd[&(link, l)];
        self.table(link)
            .entry_mut(Intensity::Single(l), sender.basis)
            .sent += 1;
        if self.rng.random::<f64>() >= o.click {
            return Ok(());
        }
        // Passive 50:50 choice of measurement branch.
        let branch = if self.rng.random::<bool>() {
            Basis::Z
        } else {
            Basis::X
        };
        if branch != sender.basis {
            self.out.tallies.qkd_branch_mismatch += 1;
            let d = Detector::for_bit(branch, self.rng.random());
            self.trace(slot.index, Clicks::of(&[d]));
            return Ok(());
        }
        let (bit, clicks) = if self.rng.random::<f64>() < o.double {
            self.out.tallies.qkd_squashed += 1;
            (
                self.rng.random::<bool>(),
                Clicks::of(&[
                    Detector::for_bit(branch, false),
                    Detector::for_bit(branch, true),
                ]),
            )
        } else {
            let error = self.rng.random::<f64>() < o.single_error;
            let bit = sender.bit ^ error;
            (bit, Clicks::of(&[Detector::for_bit(branch, bit)]))
        };
        self.trace(slot.index, clicks);
        let error = bit != sender.bit;
        let rec = self.table(link).entry_mut(Intensity::Single(l), branch);
        rec.detected += 1;
        rec.errors += error as u64;
        if l == Label::S {
            self.out
                .z_pools
                .get_mut(&link)
                .expect("QKD pool")
                .push(sender.bit, error);
        }
        Ok(())
    }
}

/// Runs every slot of `plan` against the link models.
pub fn run_plan(plan: &SessionPlan, models: &LinkModels, seed: u64) -> Result<RunOutput> {
    run_plan_with(plan, models, seed, RunOptions::default())
}

pub fn run_plan_with(
    plan: &SessionPlan,
    models: &LinkModels,
    seed: u64,
    options: RunOptions,
) -> Result<RunOutput> {
    let intensities = &plan.intensities;
    intensities.validate()?;
    // Sessions that can occur: a positive weight, adjusted for silencing.
    let mut active = SessionType::ALL.map(|s| plan.weights.fraction(s) > 0.0);
    if let Some(p) = plan.silenced {
        let mdi = active[0];
        match p {
            Party::Alice => {
                active = [false, false, active[2] || mdi];
            }
            Party::Bob => {
                active = [false, active[1] || mdi, false];
            }
            Party::Charlie => {}
        }
    }

    let mut out = RunOutput {
        tables: BTreeMap::new(),
        z_pools: BTreeMap::new(),
        tallies: Tallies::default(),
        trace: Vec::new(),
    };
    let mut mdi = BTreeMap::new();
    let mut qkd = BTreeMap::new();
    for (i, session) in SessionType::ALL.into_iter().enumerate() {
        let link = session.link();
        out.tables.insert(link, CountTable::new(link));
        out.z_pools.insert(link, ZPool::default());
        if !active[i] {
            continue;
        }
        let model = models
            .get(link)
            .ok_or_else(|| domain(format!("plan uses link {link} but no model was given")))?;
        if model.kind != link.mode() {
            return Err(domain(format!("link {link} needs a {} model", link.mode())));
        }
        match link.mode() {
            Mode::Mdi => {
                for a in [Label::S, Label::U, Label::V, Label::W] {
                    for b in [Label::S, Label::U, Label::V, Label::W] {
                        if a.basis() == b.basis() {
                            mdi.insert((a, b), mdi_outcome(model, intensities, a, b)?);
                        }
                    }
                }
            }
            Mode::Qkd => {
                for l in [Label::S, Label::U, Label::V, Label::W] {
                    qkd.insert((link, l), qkd_outcome(model, intensities, l)?);
                }
            }
        }
    }

    let mut sim = Simulator {
        plan,
        rng: ChaCha8Rng::seed_from_u64(seed),
        mdi,
        qkd,
        out,
        trace_left: options.trace_events,
    };
    for slot in sim.plan.iter() {
        match (slot.alice, slot.bob) {
            (Some(a), Some(b)) => sim.mdi_slot(&slot, a, b)?,
            (Some(a), None) => sim.qkd_slot(&slot, Link::AC, a)?,
            (None, Some(b)) => sim.qkd_slot(&slot, Link::BC, b)?,
            (None, None) => sim.out.tallies.slots_dark += 1,
        }
    }
    Ok(sim.out)
}

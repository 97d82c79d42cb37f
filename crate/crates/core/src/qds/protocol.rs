//! Symmetrisation, signing and two-stage verification of one-bit messages.
//!
//! Alice shares one string with each recipient (over AB and AC). Before any
//! message is signed the recipients swap a random half of their positions
//! through a one-time-padded exchange, so that Alice cannot tell which
//! positions either of them will check. A declaration is checked half by
//! half: the bits a recipient kept and the bits it received from its peer
//! must each show a mismatch fraction strictly below the threshold.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::counts::Link;
use crate::error::{domain, Error, Result};
use crate::mathkit::Probability;
use crate::qds::blocks::SignatureBlock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Recipient {
    Bob,
    Charlie,
}

impl Recipient {
    pub fn peer(self) -> Recipient {
        match self {
            Recipient::Bob => Recipient::Charlie,
            Recipient::Charlie => Recipient::Bob,
        }
    }

    /// The link over which Alice shares this recipient's original string.
    pub fn link(self) -> Link {
        match self {
            Recipient::Bob => Link::AB,
            Recipient::Charlie => Link::AC,
        }
    }
}

/// A bit a recipient can check a declared signature against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnownBit {
    /// Which of Alice's strings the position refers to.
    pub link: Link,
    /// Offset inside that string.
    pub position: usize,
    pub bit: bool,
    /// Received from the peer rather than kept from the recipient's own
    /// string.
    pub forwarded: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetrisedKey {
    pub recipient: Recipient,
    pub known: Vec<KnownBit>,
}

/// One masked `(position, bit)` pair sent between the recipients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub from: Recipient,
    pub position: usize,
    pub masked_bit: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Symmetrisation {
    pub bob: SymmetrisedKey,
    pub charlie: SymmetrisedKey,
    pub transcript: Vec<Exchange>,
    /// One-time-pad bits consumed.
    pub key_used: usize,
}

impl Symmetrisation {
    pub fn key(&self, r: Recipient) -> &SymmetrisedKey {
        match r {
            Recipient::Bob => &self.bob,
            Recipient::Charlie => &self.charlie,
        }
    }
}

/// Each recipient keeps a random half (rounded up) of its block and sends
/// the rest to the peer, masked with its own segment of `otp_key`.
pub fn symmetrise(
    block_b: &SignatureBlock,
    block_c: &SignatureBlock,
    otp_key: &[bool],
    seed: u64,
) -> Result<Symmetrisation> {
    let (nb, nc) = (block_b.len(), block_c.len());
    let needed = nb / 2 + nc / 2;
    if otp_key.len() < needed {
        return Err(Error::Insufficient(format!(
            "symmetrisation needs {needed} one-time-pad bits, {} available",
            otp_key.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keys = [
        SymmetrisedKey {
            recipient: Recipient::Bob,
            known: Vec::with_capacity(nb.max(nc)),
        },
        SymmetrisedKey {
            recipient: Recipient::Charlie,
            known: Vec::with_capacity(nb.max(nc)),
        },
    ];
    let mut transcript = Vec::with_capacity(needed);
    let mut pad = otp_key.iter().copied();
    for (who, block) in [(Recipient::Bob, block_b), (Recipient::Charlie, block_c)] {
        let n = block.len();
        let mut sent = vec![false; n];
        for i in sample(&mut rng, n, n / 2).into_iter() {
            sent[i] = true;
        }
        let (me, peer) = match who {
            Recipient::Bob => (0, 1),
            Recipient::Charlie => (1, 0),
        };
        for (position, (&bit, &forward)) in block.bit_values.iter().zip(&sent).enumerate() {
            if forward {
                let mask = pad.next().expect("pad length checked");
                let masked_bit = bit ^ mask;
                transcript.push(Exchange {
                    from: who,
                    position,
                    masked_bit,
                });
                keys[peer].known.push(KnownBit {
                    link: who.link(),
                    position,
                    bit: masked_bit ^ mask,
                    forwarded: true,
                });
            } else {
                keys[me].known.push(KnownBit {
                    link: who.link(),
                    position,
                    bit,
                    forwarded: false,
                });
            }
        }
    }
    let [bob, charlie] = keys;
    Ok(Symmetrisation {
        bob,
        charlie,
        transcript,
        key_used: needed,
    })
}

/// Alice's strings for one signature block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AliceKeys {
    pub ab: Vec<bool>,
    pub ac: Vec<bool>,
}

/// A message bit with the signature Alice (or a forger) claims for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Declaration {
    pub message: bool,
    pub sig_ab: Vec<bool>,
    pub sig_ac: Vec<bool>,
}

impl AliceKeys {
    /// Alice's declaration: the first `l` bits of each string.
    pub fn sign(&self, message: bool, l: usize) -> Result<Declaration> {
        if self.ab.len() < l || self.ac.len() < l {
            return Err(domain(format!(
                "signature length {l} exceeds the key strings ({}, {})",
                self.ab.len(),
                self.ac.len()
            )));
        }
        Ok(Declaration {
            message,
            sig_ab: self.ab[..l].to_vec(),
            sig_ac: self.ac[..l].to_vec(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Reject(String),
}

impl Decision {
    pub fn accepted(&self) -> bool {
        matches!(self, Decision::Accept)
    }
}

/// Checks a declaration against a recipient's known bits at threshold `s`.
pub fn verify(key: &SymmetrisedKey, decl: &Declaration, s: Probability, l: usize) -> Decision {
    if decl.sig_ab.len() != l || decl.sig_ac.len() != l {
        return Decision::Reject(format!(
            "malformed declaration: expected {l} bits per string, got ({}, {})",
            decl.sig_ab.len(),
            decl.sig_ac.len()
        ));
    }
    // [kept, forwarded] × (checked, mismatches)
    let mut tally = [(0u64, 0u64); 2];
    for k in key.known.iter().filter(|k| k.position < l) {
        let declared = match k.link {
            Link::AB => decl.sig_ab[k.position],
            Link::AC => decl.sig_ac[k.position],
            Link::BC => return Decision::Reject("known bit on the BC link".into()),
        };
        let t = &mut tally[k.forwarded as usize];
        t.0 += 1;
        t.1 += (declared != k.bit) as u64;
    }
    for (half, (checked, mismatches)) in ["kept", "forwarded"].iter().zip(tally) {
        if checked == 0 {
            return Decision::Reject(format!("no {half} positions below length {l}"));
        }
        if mismatches as f64 >= s.get() * checked as f64 {
            return Decision::Reject(format!(
                "{mismatches} of {checked} {half} positions mismatch (threshold {:.4})",
                s.get()
            ));
        }
    }
    Decision::Accept
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdicts {
    pub direct: Decision,
    pub forwarded: Decision,
}

/// Alice signs `message_bit` to `direct`, who checks at `s_auth` and, on
/// acceptance, forwards the declaration to the peer, who checks at `s_ver`.
pub fn sign_and_verify(
    message_bit: bool,
    alice_keys: &AliceKeys,
    recipients: &Symmetrisation,
    direct: Recipient,
    s_auth: Probability,
    s_ver: Probability,
    l: usize,
) -> Result<Verdicts> {
    let decl = alice_keys.sign(message_bit, l)?;
    Ok(transfer(&decl, recipients, direct, s_auth, s_ver, l))
}

/// The two-stage check of an arbitrary declaration.
pub fn transfer(
    decl: &Declaration,
    recipients: &Symmetrisation,
    direct: Recipient,
    s_auth: Probability,
    s_ver: Probability,
    l: usize,
) -> Verdicts {
    let first = verify(recipients.key(direct), decl, s_auth, l);
    let second = if first.accepted() {
        verify(recipients.key(direct.peer()), decl, s_ver, l)
    } else {
        Decision::Reject("not forwarded: rejected by the direct recipient".into())
    };
    Verdicts {
        direct: first,
        forwarded: second,
    }
}

/// A dishonest recipient's best declaration for the peer: the bits it
/// holds where it knows them, Alice's bits flipped at rate `p_e` elsewhere.
pub fn forge_declaration<R: Rng>(
    forger: &SymmetrisedKey,
    alice_keys: &AliceKeys,
    message: bool,
    l: usize,
    p_e: Probability,
    rng: &mut R,
) -> Result<Declaration> {
    let mut decl = alice_keys.sign(message, l)?;
    let mut known = [vec![false; l], vec![false; l]];
    for k in forger.known.iter().filter(|k| k.position < l) {
        let (sig, seen) = match k.link {
            Link::AB => (&mut decl.sig_ab, &mut known[0]),
            _ => (&mut decl.sig_ac, &mut known[1]),
        };
        sig[k.position] = k.bit;
        seen[k.position] = true;
    }
    for (sig, seen) in [(&mut decl.sig_ab, &known[0]), (&mut decl.sig_ac, &known[1])] {
        for (b, &s) in sig.iter_mut().zip(seen) {
            if !s && rng.random::<f64>() < p_e.get() {
                *b = !*b;
            }
        }
    }
    Ok(decl)
}

/// Settings of one desk-scale protocol trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSettings {
    /// Signature length (and block size).
    pub l: usize,
    /// Channel error rate between Alice and each recipient.
    pub channel_error: Probability,
    pub s_auth: Probability,
    pub s_ver: Probability,
    /// Error rate a forger must introduce on positions it does not know.
    pub p_e: Probability,
}

fn random_bits<R: Rng>(rng: &mut R, n: usize) -> Vec<bool> {
    (0..n).map(|_| rng.random()).collect()
}

fn noisy<R: Rng>(rng: &mut R, bits: &[bool], e: f64) -> Vec<bool> {
    bits.iter()
        .map(|&b| b ^ (rng.random::<f64>() < e))
        .collect()
}

fn setup(settings: &TrialSettings, rng: &mut ChaCha8Rng) -> Result<(AliceKeys, Symmetrisation)> {
    let l = settings.l;
    let alice = AliceKeys {
        ab: random_bits(rng, l),
        ac: random_bits(rng, l),
    };
    let e = settings.channel_error.get();
    let block = |link, bits: Vec<bool>| SignatureBlock {
        link,
        bit_values: bits,
        origin_indices: (0..l as u64).collect(),
    };
    let b = block(Link::AB, noisy(rng, &alice.ab, e));
    let c = block(Link::AC, noisy(rng, &alice.ac, e));
    let otp = random_bits(rng, l);
    let sym = symmetrise(&b, &c, &otp, rng.random())?;
    Ok((alice, sym))
}

/// Honest signing of a random bit to Bob and transfer to Charlie.
pub fn honest_trial(settings: &TrialSettings, seed: u64) -> Result<Verdicts> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (alice, sym) = setup(settings, &mut rng)?;
    let m = rng.random();
    sign_and_verify(
        m,
        &alice,
        &sym,
        Recipient::Bob,
        settings.s_auth,
        settings.s_ver,
        settings.l,
    )
}

/// Bob forges a declaration and forwards it to Charlie; returns Charlie's
/// decision at the verification threshold.
pub fn forgery_trial(settings: &TrialSettings, seed: u64) -> Result<Decision> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (alice, sym) = setup(settings, &mut rng)?;
    let m = rng.random();
    let decl = forge_declaration(&sym.bob, &alice, m, settings.l, settings.p_e, &mut rng)?;
    Ok(verify(&sym.charlie, &decl, settings.s_ver, settings.l))
}

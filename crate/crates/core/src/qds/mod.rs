//! Quantum digital signatures: distillation of signature parameters from
//! decoy bounds, multi-block extraction from a single Z-basis pool, and the
//! sign, transfer and verify flows.

pub mod blocks;
pub mod compare;
pub mod distil;
pub mod protocol;

pub use blocks::{extract_blocks, BitSource, BlockPlan, Extraction, SignatureBlock, UnreadPool};
pub use compare::{compare_protocols, distil_table, pool_yield, Comparison, PoolYield};
pub use distil::{
    abort_and_forge, block_count, block_inputs, distil, eve_error_floor, qber_upper,
    signature_length, thresholds, thresholds_with, timing_report, QdsInputs, QdsOutcome, QdsParams,
    QdsReport, ThresholdRule,
};
pub use protocol::{
    forge_declaration, forgery_trial, honest_trial, sign_and_verify, symmetrise, transfer, verify,
    AliceKeys, Decision, Declaration, Exchange, KnownBit, Recipient, Symmetrisation,
    SymmetrisedKey, TrialSettings, Verdicts,
};

//! Payload whitening with a fixed maximal-length LFSR sequence.

/// Degree-15 LFSR, taps x^15 + x^14 + 1, all-ones start state. Maximal
/// length, so the XOR sequence balances to ~50% ones over any long payload.
const LFSR_INIT: u16 = 0x7FFF;

/// XOR the payload with the fixed scrambler sequence.
///
/// The sequence depends only on bit position, so applying the function twice
/// returns the original payload.
pub fn whiten_bits(bits: &[bool]) -> Vec<bool> {
    let mut state = LFSR_INIT;
    bits.iter()
        .map(|&b| {
            let out = (state >> 14) & 1 == 1;
            let feedback = ((state >> 14) ^ (state >> 13)) & 1;
            state = (state << 1) | feedback;
            b ^ out
        })
        .collect()
}

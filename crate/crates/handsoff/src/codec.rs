// Copyright 2026 Handsoff Contributors
// SPDX-License-Identifier: Apache-2.0

//! Bit-exact packet format for switching signals (`.hoc` files).
//!
//! Layout, all payload fields packed MSB-first:
//!
//! ```text
//! header (13 bytes): magic "HO" | version 0x01 | m (u8) | b (u8) | T (f64 LE)
//! per channel:       init (2 bits: 00=off, 01=+1, 10=-1, 11=reserved)
//!                    switch count (16 bits)
//!                    per switch: time index (b bits),
//!                                then a sign bit only when the previous
//!                                level was 0 (0 => +1, 1 => -1)
//!                    zero padding to the next byte boundary
//! ```
//!
//! Transitions out of +1 or -1 carry no sign bit: the no-sign-flip
//! structure of sparsest controls forces the next level to 0. Switch
//! times are quantized to the interior grid `T (i+1) / (2^b + 1)`,
//! which keeps every decoded time strictly inside `(0, T)`.

use thiserror::Error;

use crate::structure::{ChannelSignal, SwitchEvent, SwitchingSignal, Ternary};

pub const MAGIC: [u8; 2] = [0x48, 0x4F]; // "HO"
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 13;
pub const MAX_SWITCHES_PER_CHANNEL: usize = 65_535;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("invalid signal: {0}")]
    InvalidSignal(String),
    #[error("direct sign flip in input signal; only 0 <-> +/-1 transitions are encodable")]
    StructureViolation,
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("bits per switching time must lie in [1, 32], got {0}")]
    InvalidBits(u8),
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported format version {0}")]
    BadVersion(u8),
    #[error("bad header field: {0}")]
    BadHeader(String),
    #[error("reserved init code 11")]
    ReservedCode,
    #[error("truncated payload")]
    Truncated,
    #[error("switch time indices not strictly increasing")]
    NonIncreasingTimes,
    #[error("nonzero channel padding bits")]
    CorruptPadding,
    #[error("trailing bytes after final channel")]
    TrailingBytes,
}

/// An encoded packet; byte-exact, self-delimiting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedControl(Vec<u8>);

impl EncodedControl {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Number of quantization levels minus... the interior grid has `2^b`
/// representable times out of `2^b + 1` subdivisions of `[0, T]`.
fn level_divisor(bits: u8) -> f64 {
    (1u64 << bits) as f64 + 1.0
}

/// Decoded switch time for a quantization index.
pub fn quantized_time(horizon: f64, index: u64, bits: u8) -> f64 {
    horizon * (index as f64 + 1.0) / level_divisor(bits)
}

/// Nearest quantization index for a switch time in `(0, T)`.
pub fn quantize_index(horizon: f64, time: f64, bits: u8) -> u64 {
    let max_index = (1u64 << bits) - 1;
    let raw = (time / horizon * level_divisor(bits) - 1.0).round();
    if raw < 0.0 {
        0
    } else if raw > max_index as f64 {
        max_index
    } else {
        raw as u64
    }
}

struct BitWriter {
    bytes: Vec<u8>,
    used: u8, // bits used in the last byte, 0..8
}

impl BitWriter {
    fn new() -> Self {
        Self {
            bytes: Vec::new(),
            used: 0,
        }
    }

    fn push_bits(&mut self, value: u64, mut bits: u8) {
        debug_assert!(bits <= 64);
        while bits > 0 {
            if self.used == 0 {
                self.bytes.push(0);
            }
            let free = 8 - self.used;
            let take = free.min(bits);
            let shifted = (value >> (bits - take)) as u8 & ((1u16 << take) - 1) as u8;
            let last = self.bytes.last_mut().unwrap();
            *last |= shifted << (free - take);
            self.used = (self.used + take) % 8;
            bits -= take;
        }
    }

    fn pad_to_byte(&mut self) {
        self.used = 0;
    }

    fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize, // absolute bit position
}

impl<'a> BitReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn read_bits(&mut self, mut bits: u8) -> Result<u64, CodecError> {
        debug_assert!(bits <= 64);
        if self.pos + bits as usize > self.bytes.len() * 8 {
            return Err(CodecError::Truncated);
        }
        let mut out = 0u64;
        while bits > 0 {
            let byte = self.bytes[self.pos / 8];
            let offset = (self.pos % 8) as u8;
            let avail = 8 - offset;
            let take = avail.min(bits);
            let chunk = (byte >> (avail - take)) & ((1u16 << take) - 1) as u8;
            out = (out << take) | chunk as u64;
            self.pos += take as usize;
            bits -= take;
        }
        Ok(out)
    }

    /// Consume padding up to the next byte boundary; the skipped bits
    /// must be zero.
    fn align_to_byte(&mut self) -> Result<(), CodecError> {
        let rem = (8 - self.pos % 8) % 8;
        if rem > 0 {
            let pad = self.read_bits(rem as u8)?;
            if pad != 0 {
                return Err(CodecError::CorruptPadding);
            }
        }
        Ok(())
    }

    fn at_end(&self) -> bool {
        self.pos == self.bytes.len() * 8
    }
}

fn init_code(v: Ternary) -> u64 {
    match v {
        Ternary::Zero => 0b00,
        Ternary::PosOne => 0b01,
        Ternary::NegOne => 0b10,
    }
}

/// Merge switches that quantized onto the same index. A colliding pair
/// collapses to a single switch carrying the later value, or vanishes
/// entirely when the value returns to what it was before the pair. A
/// merge across a short off-run can surface a direct sign flip; that is
/// repaired by re-inserting the forced intermediate 0 one index later,
/// when representable.
fn normalize_quantized(
    init: Ternary,
    mut events: Vec<(u64, Ternary)>,
    max_index: u64,
) -> Result<Vec<(u64, Ternary)>, CodecError> {
    let budget = 4 * events.len() + 8;
    for _ in 0..budget {
        if let Some(i) = (1..events.len()).find(|&i| events[i].0 == events[i - 1].0) {
            let before = if i >= 2 { events[i - 2].1 } else { init };
            let second = events[i].1;
            if second == before {
                events.drain(i - 1..=i);
            } else {
                events[i - 1].1 = second;
                events.remove(i);
            }
            continue;
        }
        let mut prev = init;
        let mut flip = None;
        for (i, e) in events.iter().enumerate() {
            if !prev.is_zero() && !e.1.is_zero() && e.1 != prev {
                flip = Some(i);
                break;
            }
            prev = e.1;
        }
        if let Some(i) = flip {
            let (idx, v) = events[i];
            if idx + 1 > max_index {
                return Err(CodecError::StructureViolation);
            }
            events[i].1 = Ternary::Zero;
            events.insert(i + 1, (idx + 1, v));
            continue;
        }
        return Ok(events);
    }
    Err(CodecError::StructureViolation)
}

/// Encodes a switching signal with `bits`-bit switch times. Refuses
/// signals containing direct sign flips.
pub fn encode(signal: &SwitchingSignal, bits: u8) -> Result<EncodedControl, CodecError> {
    signal
        .validate()
        .map_err(|e| CodecError::InvalidSignal(e.to_string()))?;
    if !(1..=32).contains(&bits) {
        return Err(CodecError::InvalidBits(bits));
    }
    if signal.num_channels() > u8::MAX as usize {
        return Err(CodecError::Capacity(format!(
            "at most 255 channels, got {}",
            signal.num_channels()
        )));
    }
    // Structural precondition: every transition passes through zero.
    for ch in &signal.channels {
        let mut prev = ch.initial;
        for sw in &ch.switches {
            if !prev.is_zero() && !sw.value.is_zero() {
                return Err(CodecError::StructureViolation);
            }
            prev = sw.value;
        }
    }

    let max_index = (1u64 << bits) - 1;
    let mut writer = BitWriter::new();
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(&MAGIC);
    header.push(VERSION);
    header.push(signal.num_channels() as u8);
    header.push(bits);
    header.extend_from_slice(&signal.horizon.to_le_bytes());

    for ch in &signal.channels {
        let quantized: Vec<(u64, Ternary)> = ch
            .switches
            .iter()
            .map(|sw| (quantize_index(signal.horizon, sw.time, bits), sw.value))
            .collect();
        let events = normalize_quantized(ch.initial, quantized, max_index)?;
        if events.len() > MAX_SWITCHES_PER_CHANNEL {
            return Err(CodecError::Capacity(format!(
                "switch count {} exceeds {MAX_SWITCHES_PER_CHANNEL}",
                events.len()
            )));
        }
        writer.push_bits(init_code(ch.initial), 2);
        writer.push_bits(events.len() as u64, 16);
        let mut prev = ch.initial;
        for (idx, value) in events {
            writer.push_bits(idx, bits);
            if prev.is_zero() {
                writer.push_bits(if value == Ternary::NegOne { 1 } else { 0 }, 1);
            }
            prev = value;
        }
        writer.pad_to_byte();
    }

    header.extend_from_slice(&writer.into_bytes());
    Ok(EncodedControl(header))
}

fn parse(bytes: &[u8]) -> Result<(SwitchingSignal, u64), CodecError> {
    if bytes.len() < HEADER_LEN {
        return Err(CodecError::Truncated);
    }
    if bytes[0..2] != MAGIC {
        return Err(CodecError::BadMagic);
    }
    if bytes[2] != VERSION {
        return Err(CodecError::BadVersion(bytes[2]));
    }
    let m = bytes[3] as usize;
    if m == 0 {
        return Err(CodecError::BadHeader("zero channels".into()));
    }
    let bits = bytes[4];
    if !(1..=32).contains(&bits) {
        return Err(CodecError::BadHeader(format!("bits = {bits}")));
    }
    let horizon = f64::from_le_bytes(bytes[5..13].try_into().unwrap());
    if !horizon.is_finite() || horizon <= 0.0 {
        return Err(CodecError::BadHeader(format!("horizon = {horizon}")));
    }

    let mut reader = BitReader::new(&bytes[HEADER_LEN..]);
    let mut payload_bits = 0u64;
    let mut channels = Vec::with_capacity(m);
    for _ in 0..m {
        let init = match reader.read_bits(2)? {
            0b00 => Ternary::Zero,
            0b01 => Ternary::PosOne,
            0b10 => Ternary::NegOne,
            _ => return Err(CodecError::ReservedCode),
        };
        let count = reader.read_bits(16)?;
        payload_bits += 18;
        let mut prev = init;
        let mut last_index: Option<u64> = None;
        let mut switches = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let idx = reader.read_bits(bits)?;
            payload_bits += bits as u64;
            if let Some(last) = last_index {
                if idx <= last {
                    return Err(CodecError::NonIncreasingTimes);
                }
            }
            last_index = Some(idx);
            let value = if prev.is_zero() {
                payload_bits += 1;
                if reader.read_bits(1)? == 1 {
                    Ternary::NegOne
                } else {
                    Ternary::PosOne
                }
            } else {
                Ternary::Zero
            };
            switches.push(SwitchEvent {
                time: quantized_time(horizon, idx, bits),
                value,
            });
            prev = value;
        }
        reader.align_to_byte()?;
        channels.push(ChannelSignal {
            initial: init,
            switches,
        });
    }
    if !reader.at_end() {
        return Err(CodecError::TrailingBytes);
    }
    let signal = SwitchingSignal { horizon, channels };
    debug_assert!(signal.validate().is_ok());
    Ok((signal, payload_bits))
}

/// Decodes a packet back into a switching signal. Exact inverse of
/// `encode` on its range.
pub fn decode(bytes: &[u8]) -> Result<SwitchingSignal, CodecError> {
    parse(bytes).map(|(signal, _)| signal)
}

/// Exact bit accounting for a packet: `(header_bits, payload_bits)`,
/// where the payload count excludes per-channel padding.
pub fn bit_count(bytes: &[u8]) -> Result<(u64, u64), CodecError> {
    parse(bytes).map(|(_, payload)| ((HEADER_LEN * 8) as u64, payload))
}

//! Label transmission with a model-driven range coder.
//!
//! Sender and receiver start from the same learner state and see the same
//! inputs. Each label is range-coded under the current predictive
//! distribution (quantized to integer frequencies), then both sides apply
//! the same update. The receiver ends with the labels and a state that is
//! byte-identical to the sender's.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codelength::{nats_to_bits, Input, LabeledDataset, PredictiveDistribution};
use crate::error::{EdlError, Result};
use crate::learners::{LearnerKind, LearnerState};
use crate::prequential::run_prequential;

pub const MAGIC: &[u8; 4] = b"EDL1";

fn default_frequency_bits() -> u32 {
    16
}

fn default_range_bits() -> u32 {
    64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodecConfig {
    #[serde(default = "default_frequency_bits")]
    pub frequency_bits: u32,
    #[serde(default = "default_range_bits")]
    pub range_bits: u32,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            frequency_bits: default_frequency_bits(),
            range_bits: default_range_bits(),
        }
    }
}

impl CodecConfig {
    pub fn new(frequency_bits: u32, range_bits: u32) -> Result<Self> {
        let c = Self {
            frequency_bits,
            range_bits,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(8..=24).contains(&self.frequency_bits) {
            return Err(EdlError::Config(format!(
                "frequency_bits {} outside [8, 24]",
                self.frequency_bits
            )));
        }
        match self.range_bits {
            64 => Ok(()),
            32 if self.frequency_bits <= 16 => Ok(()),
            32 => Err(EdlError::Config(
                "32-bit registers support at most 16 frequency bits".into(),
            )),
            other => Err(EdlError::Config(format!("range_bits must be 32 or 64, got {other}"))),
        }
    }

    pub fn total(&self) -> u64 {
        1u64 << self.frequency_bits
    }

    fn check_alphabet(&self, k: usize) -> Result<()> {
        self.validate()?;
        if k as u64 > self.total() {
            return Err(EdlError::Config(format!(
                "{k} labels do not fit a frequency table of 2^{}",
                self.frequency_bits
            )));
        }
        Ok(())
    }
}

/// Integer frequencies summing to 2^f, each at least 1. After the floor of
/// one per symbol, the remaining 2^f − k units are split by largest
/// remainder (ties to the lower label), so q_y ≥ p_y·(2^f − k).
pub fn quantize(dist: &PredictiveDistribution, frequency_bits: u32) -> Result<Vec<u64>> {
    let k = dist.k();
    let total = 1u64 << frequency_bits;
    if k as u64 > total {
        return Err(EdlError::Config(format!(
            "{k} labels do not fit a frequency table of 2^{frequency_bits}"
        )));
    }
    let budget = total - k as u64;
    let mut freqs = Vec::with_capacity(k);
    let mut fractions = Vec::with_capacity(k);
    let mut assigned = 0u64;
    for (y, &p) in dist.probabilities().iter().enumerate() {
        let ideal = p * budget as f64;
        let base = (ideal.floor() as u64).min(budget);
        assigned += base;
        freqs.push(1 + base);
        fractions.push((ideal - base as f64, y));
    }
    let mut leftover = budget.saturating_sub(assigned);
    if assigned > budget {
        // Rounding in the inputs can overshoot by a unit; take it back from
        // the largest entries.
        let mut excess = assigned - budget;
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| freqs[b].cmp(&freqs[a]).then(a.cmp(&b)));
        for y in order.into_iter().cycle() {
            if excess == 0 {
                break;
            }
            if freqs[y] > 1 {
                freqs[y] -= 1;
                excess -= 1;
            }
        }
    }
    fractions.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, y) in fractions.iter().cycle() {
        if leftover == 0 {
            break;
        }
        freqs[y] += 1;
        leftover -= 1;
    }
    debug_assert_eq!(freqs.iter().sum::<u64>(), total);
    Ok(freqs)
}

fn cumulative(freqs: &[u64]) -> Vec<u64> {
    let mut cum = Vec::with_capacity(freqs.len() + 1);
    let mut acc = 0;
    cum.push(0);
    for &f in freqs {
        acc += f;
        cum.push(acc);
    }
    cum
}

/// Register geometry of the carry-less coder.
#[derive(Debug, Clone, Copy)]
struct Registers {
    mask: u64,
    top: u64,
    bot: u64,
    shift: u32,
}

impl Registers {
    fn new(range_bits: u32) -> Self {
        match range_bits {
            32 => Self {
                mask: u32::MAX as u64,
                top: 1 << 24,
                bot: 1 << 16,
                shift: 24,
            },
            _ => Self {
                mask: u64::MAX,
                top: 1 << 56,
                bot: 1 << 40,
                shift: 56,
            },
        }
    }

    fn bytes(&self) -> usize {
        (self.shift / 8 + 1) as usize
    }

    /// One renormalization test: true when a byte must be shifted out, with
    /// the range shrunk to the next BOT boundary if it underflowed while the
    /// top byte was still undecided.
    fn must_shift(&self, low: u64, range: &mut u64) -> bool {
        if (low ^ (low.wrapping_add(*range) & self.mask)) < self.top {
            return true;
        }
        if *range < self.bot {
            *range = low.wrapping_neg() & (self.bot - 1);
            return true;
        }
        false
    }
}

struct Encoder {
    regs: Registers,
    low: u64,
    range: u64,
    out: Vec<u8>,
}

impl Encoder {
    fn new(range_bits: u32) -> Self {
        let regs = Registers::new(range_bits);
        Self {
            regs,
            low: 0,
            range: regs.mask,
            out: Vec::new(),
        }
    }

    fn encode(&mut self, cum: u64, freq: u64, frequency_bits: u32) {
        let r = self.range >> frequency_bits;
        self.low = self.low.wrapping_add(r * cum) & self.regs.mask;
        self.range = r * freq;
        while self.regs.must_shift(self.low, &mut self.range) {
            self.out.push((self.low >> self.regs.shift) as u8);
            self.low = (self.low << 8) & self.regs.mask;
            self.range = (self.range << 8) & self.regs.mask;
        }
    }

    /// Emits the shortest prefix of some value in [low, low + range); the
    /// decoder pads with zeros. Returns payload bytes and their bit length
    /// with trailing zero bits dropped.
    fn finish(mut self) -> (Vec<u8>, u64) {
        let width = self.regs.bytes() as u32 * 8;
        let low = self.low as u128;
        let high = low + self.range as u128;
        for b in 0..=self.regs.bytes() as u32 {
            let unit = 1u128 << (width - 8 * b);
            let v = low.div_ceil(unit) * unit;
            if v < high {
                for i in 0..b {
                    self.out.push((v >> (width - 8 * (i + 1))) as u8);
                }
                break;
            }
        }
        while self.out.last() == Some(&0) {
            self.out.pop();
        }
        let bits = match self.out.last() {
            None => 0,
            Some(&last) => self.out.len() as u64 * 8 - last.trailing_zeros() as u64,
        };
        (self.out, bits)
    }
}

struct Decoder<'a> {
    regs: Registers,
    low: u64,
    range: u64,
    code: u64,
    input: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn new(range_bits: u32, input: &'a [u8]) -> Self {
        let regs = Registers::new(range_bits);
        let mut d = Self {
            regs,
            low: 0,
            range: regs.mask,
            code: 0,
            input,
            pos: 0,
        };
        for _ in 0..regs.bytes() {
            d.code = (d.code << 8) | d.next_byte();
        }
        d
    }

    fn next_byte(&mut self) -> u64 {
        let b = self.input.get(self.pos).copied().unwrap_or(0);
        self.pos += 1;
        b as u64
    }

    fn decode(&mut self, cum: &[u64], frequency_bits: u32) -> Result<usize> {
        let r = self.range >> frequency_bits;
        let offset = self.code.wrapping_sub(self.low) & self.regs.mask;
        let value = offset / r;
        let total = *cum.last().expect("non-empty table");
        if value >= total {
            return Err(EdlError::Decode("code value outside the frequency table".into()));
        }
        let symbol = cum.partition_point(|&c| c <= value) - 1;
        self.low = self.low.wrapping_add(r * cum[symbol]) & self.regs.mask;
        self.range = r * (cum[symbol + 1] - cum[symbol]);
        while self.regs.must_shift(self.low, &mut self.range) {
            self.code = ((self.code << 8) | self.next_byte()) & self.regs.mask;
            self.low = (self.low << 8) & self.regs.mask;
            self.range = (self.range << 8) & self.regs.mask;
        }
        Ok(symbol)
    }
}

/// Header of an encoded stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamHeader {
    pub n: u64,
    pub k: u64,
    pub learner_kind: LearnerKind,
    pub config: CodecConfig,
    /// Digest of (k, n, inputs, learner kind, initial state, config).
    pub fingerprint: u64,
    /// Digest of the label sequence, checked after decoding.
    pub label_digest: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedStream {
    pub header: StreamHeader,
    pub payload: Vec<u8>,
    pub payload_bits: u64,
}

fn digest64(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("sha256 has 32 bytes"))
}

fn fingerprint(k: usize, inputs: &[Input], initial: &LearnerState, config: &CodecConfig) -> u64 {
    let inputs = bincode::serialize(inputs).expect("inputs serialize");
    digest64(&[
        &(k as u64).to_le_bytes(),
        &(inputs.len() as u64).to_le_bytes(),
        &inputs,
        initial.kind().as_str().as_bytes(),
        &initial.to_canonical_bytes(),
        &config.frequency_bits.to_le_bytes(),
        &config.range_bits.to_le_bytes(),
    ])
}

fn label_digest(labels: &[usize]) -> u64 {
    let bytes: Vec<u8> = labels.iter().flat_map(|&y| (y as u64).to_le_bytes()).collect();
    digest64(&[b"labels", &bytes])
}

/// Range-codes the labels of `dataset` under the evolving learner.
pub fn encode_labels(
    dataset: &LabeledDataset,
    initial: &LearnerState,
    config: &CodecConfig,
) -> Result<EncodedStream> {
    encode_with_state(dataset, initial, config).map(|(s, _)| s)
}

/// [`encode_labels`] that also returns the sender's final state.
pub fn encode_with_state(
    dataset: &LabeledDataset,
    initial: &LearnerState,
    config: &CodecConfig,
) -> Result<(EncodedStream, LearnerState)> {
    let k = dataset.k();
    config.check_alphabet(k)?;
    if initial.k() != k {
        return Err(EdlError::Argument(format!(
            "learner has k = {} but dataset has k = {k}",
            initial.k()
        )));
    }
    let inputs = dataset.inputs();
    let header = StreamHeader {
        n: dataset.len() as u64,
        k: k as u64,
        learner_kind: initial.kind(),
        config: *config,
        fingerprint: fingerprint(k, &inputs, initial, config),
        label_digest: label_digest(&dataset.labels()),
    };
    let mut enc = Encoder::new(config.range_bits);
    let mut state = initial.clone();
    for ex in dataset.examples() {
        let freqs = quantize(&state.predict(&ex.input)?, config.frequency_bits)?;
        let cum = cumulative(&freqs);
        enc.encode(cum[ex.label], freqs[ex.label], config.frequency_bits);
        state.update_in_place(ex)?;
    }
    let (payload, payload_bits) = enc.finish();
    Ok((
        EncodedStream {
            header,
            payload,
            payload_bits,
        },
        state,
    ))
}

/// Recovers the labels and the sender's final state.
pub fn decode_labels(
    inputs: &[Input],
    stream: &EncodedStream,
    initial: &LearnerState,
) -> Result<(Vec<usize>, LearnerState)> {
    let h = &stream.header;
    h.config.check_alphabet(h.k as usize)?;
    if inputs.len() as u64 != h.n {
        return Err(EdlError::Protocol(format!(
            "stream carries {} labels but {} inputs were supplied",
            h.n,
            inputs.len()
        )));
    }
    if initial.kind() != h.learner_kind || initial.k() as u64 != h.k {
        return Err(EdlError::Protocol(format!(
            "stream was encoded with a {} learner over {} labels",
            h.learner_kind, h.k
        )));
    }
    if fingerprint(h.k as usize, inputs, initial, &h.config) != h.fingerprint {
        return Err(EdlError::Protocol(
            "fingerprint mismatch: inputs, initial state or config differ from the sender's".into(),
        ));
    }
    if (stream.payload.len() as u64) < stream.payload_bits.div_ceil(8) {
        return Err(EdlError::Decode(format!(
            "payload truncated: {} bytes for {} bits",
            stream.payload.len(),
            stream.payload_bits
        )));
    }
    let mut dec = Decoder::new(h.config.range_bits, &stream.payload);
    let mut state = initial.clone();
    let mut labels = Vec::with_capacity(inputs.len());
    for input in inputs {
        let freqs = quantize(&state.predict(input)?, h.config.frequency_bits)?;
        let y = dec.decode(&cumulative(&freqs), h.config.frequency_bits)?;
        state.update_in_place(&crate::codelength::Example::new(input.clone(), y))?;
        labels.push(y);
    }
    if label_digest(&labels) != h.label_digest {
        return Err(EdlError::Protocol("decoded labels fail the label digest".into()));
    }
    Ok((labels, state))
}

/// Payload bits minus the ideal prequential MDL in bits.
pub fn quantized_codelength_gap(
    dataset: &LabeledDataset,
    initial: &LearnerState,
    config: &CodecConfig,
) -> Result<f64> {
    let stream = encode_labels(dataset, initial, config)?;
    let ideal = run_prequential(dataset, initial, 1)?.trace.mdl();
    Ok(stream.payload_bits as f64 - nats_to_bits(ideal))
}

/// Worst-case payload excess over ideal: flush allowance plus the
/// per-symbol cost of the frequency floor.
pub fn overhead_bound_bits(n: usize, k: usize, frequency_bits: u32) -> f64 {
    let total = (1u64 << frequency_bits) as f64;
    64.0 + n as f64 * (total / (total - k as f64)).log2()
}

fn push_record(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(bytes);
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| EdlError::Decode("stream truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn record(&mut self) -> Result<&'a [u8]> {
        let len = u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes"));
        self.take(len as usize)
    }

    fn u64_record(&mut self) -> Result<u64> {
        let r = self.record()?;
        let arr: [u8; 8] = r
            .try_into()
            .map_err(|_| EdlError::Decode("malformed integer record".into()))?;
        Ok(u64::from_le_bytes(arr))
    }
}

impl EncodedStream {
    /// Serializes as magic, length-prefixed header records, payload bytes,
    /// then the payload bit length (u64, little endian).
    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = MAGIC.to_vec();
        push_record(&mut out, &h.n.to_le_bytes());
        push_record(&mut out, &h.k.to_le_bytes());
        push_record(&mut out, h.learner_kind.as_str().as_bytes());
        let mut config = h.config.frequency_bits.to_le_bytes().to_vec();
        config.extend_from_slice(&h.config.range_bits.to_le_bytes());
        push_record(&mut out, &config);
        push_record(&mut out, &h.fingerprint.to_le_bytes());
        push_record(&mut out, &h.label_digest.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out.extend_from_slice(&self.payload_bits.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(EdlError::Decode("bad magic".into()));
        }
        let n = r.u64_record()?;
        let k = r.u64_record()?;
        let kind = std::str::from_utf8(r.record()?)
            .map_err(|_| EdlError::Decode("learner kind is not UTF-8".into()))?
            .parse::<LearnerKind>()
            .map_err(|e| EdlError::Decode(e.to_string()))?;
        let cfg = r.record()?;
        if cfg.len() != 8 {
            return Err(EdlError::Decode("malformed config record".into()));
        }
        let config = CodecConfig {
            frequency_bits: u32::from_le_bytes(cfg[..4].try_into().expect("4 bytes")),
            range_bits: u32::from_le_bytes(cfg[4..].try_into().expect("4 bytes")),
        };
        let fingerprint = r.u64_record()?;
        let label_digest = r.u64_record()?;
        let rest = &bytes[r.pos..];
        if rest.len() < 8 {
            return Err(EdlError::Decode("stream truncated before footer".into()));
        }
        let (payload, footer) = rest.split_at(rest.len() - 8);
        let payload_bits = u64::from_le_bytes(footer.try_into().expect("8 bytes"));
        if payload_bits.div_ceil(8) != payload.len() as u64 {
            return Err(EdlError::Decode(format!(
                "payload holds {} bytes but footer declares {payload_bits} bits",
                payload.len()
            )));
        }
        Ok(Self {
            header: StreamHeader {
                n,
                k,
                learner_kind: kind,
                config,
                fingerprint,
                label_digest,
            },
            payload: payload.to_vec(),
            payload_bits,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codelength::{Example, LabelSpace};

    fn labels(k: usize, ys: &[usize]) -> LabeledDataset {
        LabeledDataset::new(
            ys.iter().map(|&y| Example::new(Input::Empty, y)).collect(),
            LabelSpace::new(k).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn quantization_floors_and_sums() {
        let d = PredictiveDistribution::from_weights(vec![1.0, 0.0, 0.0]).unwrap();
        let q = quantize(&d, 8).unwrap();
        assert_eq!(q, vec![254, 1, 1]);
        let u = PredictiveDistribution::uniform(4);
        assert_eq!(quantize(&u, 16).unwrap(), vec![16384; 4]);
        let skew = PredictiveDistribution::from_weights(vec![0.7, 0.2, 0.1]).unwrap();
        let q = quantize(&skew, 10).unwrap();
        assert_eq!(q.iter().sum::<u64>(), 1024);
        for (qi, p) in q.iter().zip([0.7, 0.2, 0.1]) {
            assert!(*qi as f64 >= p * (1024.0 - 3.0));
        }
        assert!(quantize(&PredictiveDistribution::uniform(300), 8).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(CodecConfig::new(7, 64).is_err());
        assert!(CodecConfig::new(25, 64).is_err());
        assert!(CodecConfig::new(16, 48).is_err());
        assert!(CodecConfig::new(20, 32).is_err());
        assert!(CodecConfig::new(16, 32).is_ok());
    }

    #[test]
    fn empty_dataset_gives_empty_payload() {
        let s = encode_labels(&labels(4, &[]), &LearnerState::kt(4), &CodecConfig::default()).unwrap();
        assert!(s.payload.is_empty());
        assert_eq!(s.payload_bits, 0);
        let (ys, _) = decode_labels(&[], &s, &LearnerState::kt(4)).unwrap();
        assert!(ys.is_empty());
    }

    #[test]
    fn round_trip_both_register_widths() {
        let ys: Vec<usize> = (0..300).map(|i| (i * i + 3 * i) % 5).collect();
        let data = labels(5, &ys);
        for config in [CodecConfig::default(), CodecConfig::new(12, 32).unwrap()] {
            let (s, sent) = encode_with_state(&data, &LearnerState::kt(5), &config).unwrap();
            let (got, state) = decode_labels(&data.inputs(), &s, &LearnerState::kt(5)).unwrap();
            assert_eq!(got, ys);
            assert_eq!(state.to_canonical_bytes(), sent.to_canonical_bytes());
        }
    }

    #[test]
    fn file_format_round_trip_and_truncation() {
        let data = labels(3, &[0, 2, 2, 1, 0, 2]);
        let s = encode_labels(&data, &LearnerState::kt(3), &CodecConfig::default()).unwrap();
        let bytes = s.to_bytes();
        assert_eq!(&bytes[..4], b"EDL1");
        assert_eq!(EncodedStream::from_bytes(&bytes).unwrap(), s);
        assert!(matches!(
            EncodedStream::from_bytes(&bytes[..bytes.len() - 9]),
            Err(EdlError::Decode(_))
        ));
        let mut cut = s.clone();
        cut.payload.pop();
        assert!(matches!(
            decode_labels(&data.inputs(), &cut, &LearnerState::kt(3)),
            Err(EdlError::Decode(_))
        ));
    }

    #[test]
    fn wrong_inputs_are_a_protocol_error() {
        let data = labels(3, &[0, 2, 2]);
        let s = encode_labels(&data, &LearnerState::kt(3), &CodecConfig::default()).unwrap();
        let wrong = vec![Input::Token(1), Input::Empty, Input::Empty];
        assert!(matches!(
            decode_labels(&wrong, &s, &LearnerState::kt(3)),
            Err(EdlError::Protocol(_))
        ));
        assert!(matches!(
            decode_labels(&data.inputs(), &s, &LearnerState::uniform(3)),
            Err(EdlError::Protocol(_))
        ));
    }
}

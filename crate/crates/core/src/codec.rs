//! Binary sketch files.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "GMBL"
//! 4       1     format version (1)
//! 5       1     variant: 0 full-replication, 1 stochastic-averaging, 2 discretized-sa
//! 6       4     k, u32 little-endian
//! 10      8     seed, u64 little-endian
//! 18      1     register encoding: 0 f64, 1 i8
//! 19      k*w   registers in index order (f64 LE IEEE-754, or i8 two's complement)
//! 19+k*w  4     CRC-32C of all preceding bytes, u32 little-endian
//! ```
//!
//! FORMAT.md at the repository root describes the layout together with the
//! hashing construction the registers depend on.

use crate::error::{CodecError, Result};
use crate::hashing::HashSeed;
use crate::sketch::{
    ContinuousSketch, DiscreteSketch, Sketch, SketchConfig, Variant, REGISTER_MAX, REGISTER_MIN,
};

pub const MAGIC: [u8; 4] = *b"GMBL";
pub const FORMAT_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 19;
pub const CHECKSUM_LEN: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum RegisterEncoding {
    F64 = 0,
    I8 = 1,
}

impl RegisterEncoding {
    pub fn width(self) -> usize {
        match self {
            RegisterEncoding::F64 => 8,
            RegisterEncoding::I8 => 1,
        }
    }

    fn for_variant(variant: Variant) -> Self {
        if variant.is_discrete() {
            RegisterEncoding::I8
        } else {
            RegisterEncoding::F64
        }
    }

    fn from_byte(b: u8) -> Result<Self, CodecError> {
        match b {
            0 => Ok(RegisterEncoding::F64),
            1 => Ok(RegisterEncoding::I8),
            _ => Err(CodecError::InvalidHeader(format!(
                "unknown register encoding {b}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SketchFileHeader {
    pub format_version: u8,
    pub variant: Variant,
    pub k: u32,
    pub seed: u64,
    pub register_encoding: RegisterEncoding,
}

impl SketchFileHeader {
    pub fn for_config(config: &SketchConfig) -> Self {
        SketchFileHeader {
            format_version: FORMAT_VERSION,
            variant: config.variant(),
            k: config.k(),
            seed: config.seed().0,
            register_encoding: RegisterEncoding::for_variant(config.variant()),
        }
    }

    /// Total file length implied by this header.
    pub fn file_len(&self) -> usize {
        HEADER_LEN + self.k as usize * self.register_encoding.width() + CHECKSUM_LEN
    }

    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&MAGIC);
        out.push(self.format_version);
        out.push(variant_byte(self.variant));
        out.extend_from_slice(&self.k.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.push(self.register_encoding as u8);
    }

    /// Parses and checks the header fields. Does not look past byte 19.
    pub fn parse(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() < 4 {
            return Err(CodecError::LengthMismatch {
                expected: HEADER_LEN + CHECKSUM_LEN,
                found: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(CodecError::BadMagic(magic));
        }
        if bytes.len() < 5 {
            return Err(CodecError::LengthMismatch {
                expected: HEADER_LEN + CHECKSUM_LEN,
                found: bytes.len(),
            });
        }
        if bytes[4] != FORMAT_VERSION {
            return Err(CodecError::UnsupportedVersion(bytes[4]));
        }
        if bytes.len() < HEADER_LEN {
            return Err(CodecError::LengthMismatch {
                expected: HEADER_LEN + CHECKSUM_LEN,
                found: bytes.len(),
            });
        }
        let variant = variant_from_byte(bytes[5])?;
        let k = u32::from_le_bytes(bytes[6..10].try_into().unwrap());
        let seed = u64::from_le_bytes(bytes[10..18].try_into().unwrap());
        let register_encoding = RegisterEncoding::from_byte(bytes[18])?;
        if k == 0 {
            return Err(CodecError::InvalidHeader("k must be at least 1".into()));
        }
        if register_encoding != RegisterEncoding::for_variant(variant) {
            return Err(CodecError::InvalidHeader(format!(
                "{variant} sketches use {:?} registers, header says {register_encoding:?}",
                RegisterEncoding::for_variant(variant)
            )));
        }
        Ok(SketchFileHeader {
            format_version: bytes[4],
            variant,
            k,
            seed,
            register_encoding,
        })
    }
}

fn variant_byte(v: Variant) -> u8 {
    match v {
        Variant::FullReplication => 0,
        Variant::StochasticAveraging => 1,
        Variant::DiscretizedSa => 2,
    }
}

fn variant_from_byte(b: u8) -> Result<Variant, CodecError> {
    match b {
        0 => Ok(Variant::FullReplication),
        1 => Ok(Variant::StochasticAveraging),
        2 => Ok(Variant::DiscretizedSa),
        _ => Err(CodecError::InvalidHeader(format!("unknown variant {b}"))),
    }
}

pub fn serialize(sketch: &Sketch) -> Vec<u8> {
    let header = SketchFileHeader::for_config(sketch.config());
    let mut out = Vec::with_capacity(header.file_len());
    header.write(&mut out);
    match sketch {
        Sketch::Continuous(s) => {
            for x in s.registers() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        Sketch::Discrete(s) => out.extend(s.registers().iter().map(|&m| m as u8)),
    }
    let crc = crc32c::crc32c(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

/// Decodes a sketch file. Checks run in order: magic, version, header
/// fields, total length, checksum, register values.
pub fn deserialize(bytes: &[u8]) -> Result<Sketch> {
    let header = SketchFileHeader::parse(bytes)?;
    let expected = header.file_len();
    if bytes.len() != expected {
        return Err(CodecError::LengthMismatch {
            expected,
            found: bytes.len(),
        }
        .into());
    }
    let body_end = expected - CHECKSUM_LEN;
    let stored = u32::from_le_bytes(bytes[body_end..].try_into().unwrap());
    let computed = crc32c::crc32c(&bytes[..body_end]);
    if stored != computed {
        return Err(CodecError::ChecksumMismatch { stored, computed }.into());
    }

    let config = SketchConfig::new(header.k, HashSeed(header.seed), header.variant)?;
    let payload = &bytes[HEADER_LEN..body_end];
    let sketch = match header.register_encoding {
        RegisterEncoding::F64 => {
            let registers: Vec<f64> = payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let sentinel_ok = header.variant == Variant::FullReplication;
            if let Some(index) = registers
                .iter()
                .position(|&x| !(x.is_finite() || (sentinel_ok && x == f64::NEG_INFINITY)))
            {
                return Err(CodecError::InvalidRegister {
                    index,
                    reason: format!(
                        "{} is not a valid {} register",
                        registers[index], header.variant
                    ),
                }
                .into());
            }
            Sketch::Continuous(ContinuousSketch::from_registers(config, registers)?)
        }
        RegisterEncoding::I8 => {
            let registers: Vec<i8> = payload.iter().map(|&b| b as i8).collect();
            if let Some(index) = registers
                .iter()
                .position(|m| !(REGISTER_MIN..=REGISTER_MAX).contains(m))
            {
                return Err(CodecError::InvalidRegister {
                    index,
                    reason: format!(
                        "{} outside [{REGISTER_MIN}, {REGISTER_MAX}]",
                        registers[index]
                    ),
                }
                .into());
            }
            Sketch::Discrete(DiscreteSketch::from_registers(config, registers)?)
        }
    };
    Ok(sketch)
}

//! Minimal RIFF/WAVE reader and writer for 32-bit IEEE-float audio,
//! little-endian, interleaved. Floats round-trip bitwise. Anything that is
//! not float-32 is rejected with an error naming the offending format tag.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use tracksep_core::acoustics::FoaSignal;

const FORMAT_IEEE_FLOAT: u16 = 3;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}: not a RIFF/WAVE container")]
    NotRiff(String),
    #[error("{0}: truncated or malformed chunk structure")]
    Malformed(String),
    #[error("{path}: unsupported codec, format tag {format_tag} ({name}); only IEEE float (tag 3) is supported")]
    UnsupportedCodec { path: String, format_tag: u16, name: &'static str },
    #[error("{path}: unsupported bit depth {bits}; only 32-bit float is supported")]
    UnsupportedBits { path: String, bits: u16 },
    #[error("{0}: missing fmt chunk")]
    MissingFmt(String),
    #[error("{0}: missing data chunk")]
    MissingData(String),
    #[error("non-finite sample at index {index}; refusing to write")]
    NonFinite { index: usize },
    #[error("{path}: expected {expected} channels, found {found}")]
    ChannelCount { path: String, expected: u16, found: u16 },
    #[error("sample count {samples} is not a multiple of {channels} channels")]
    RaggedFrames { samples: usize, channels: u16 },
}

fn format_tag_name(tag: u16) -> &'static str {
    match tag {
        1 => "PCM",
        2 => "ADPCM",
        6 => "A-law",
        7 => "mu-law",
        0xFFFE => "extensible",
        _ => "unknown",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WavData {
    pub channels: u16,
    pub sample_rate: u32,
    /// Interleaved frames.
    pub samples: Vec<f32>,
}

impl WavData {
    pub fn frames(&self) -> usize {
        self.samples.len() / self.channels.max(1) as usize
    }
}

pub fn read_wav(path: &Path) -> Result<WavData, WavError> {
    let label = path.display().to_string();
    let io_err = |source| WavError::Io { path: label.clone(), source };
    let file = File::open(path).map_err(io_err)?;
    let mut reader = BufReader::new(file);

    let mut header = [0u8; 12];
    reader
        .read_exact(&mut header)
        .map_err(|_| WavError::NotRiff(label.clone()))?;
    if &header[0..4] != b"RIFF" || &header[8..12] != b"WAVE" {
        return Err(WavError::NotRiff(label));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // tag, channels, rate, bits
    let mut data: Option<Vec<u8>> = None;
    let mut chunk_head = [0u8; 8];
    loop {
        match reader.read_exact(&mut chunk_head) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(_) => return Err(WavError::Malformed(label)),
        }
        let id = &chunk_head[0..4];
        let size = u32::from_le_bytes(chunk_head[4..8].try_into().unwrap()) as usize;
        let mut body = vec![0u8; size];
        reader
            .read_exact(&mut body)
            .map_err(|_| WavError::Malformed(label.clone()))?;
        if size % 2 == 1 {
            let mut pad = [0u8; 1];
            let _ = reader.read_exact(&mut pad);
        }
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(WavError::Malformed(label));
                }
                let tag = u16::from_le_bytes(body[0..2].try_into().unwrap());
                let channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
                fmt = Some((tag, channels, rate, bits));
            }
            b"data" => data = Some(body),
            _ => {} // fact and friends are skipped
        }
    }

    let (tag, channels, sample_rate, bits) = fmt.ok_or_else(|| WavError::MissingFmt(label.clone()))?;
    if tag != FORMAT_IEEE_FLOAT {
        return Err(WavError::UnsupportedCodec {
            path: label,
            format_tag: tag,
            name: format_tag_name(tag),
        });
    }
    if bits != 32 {
        return Err(WavError::UnsupportedBits { path: label, bits });
    }
    let body = data.ok_or_else(|| WavError::MissingData(label.clone()))?;
    if body.len() % 4 != 0 {
        return Err(WavError::Malformed(label));
    }
    let samples: Vec<f32> = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok(WavData { channels, sample_rate, samples })
}

pub fn write_wav(
    path: &Path,
    channels: u16,
    sample_rate: u32,
    interleaved: &[f32],
) -> Result<(), WavError> {
    if channels == 0 || interleaved.len() % channels as usize != 0 {
        return Err(WavError::RaggedFrames { samples: interleaved.len(), channels });
    }
    if let Some(index) = interleaved.iter().position(|v| !v.is_finite()) {
        return Err(WavError::NonFinite { index });
    }
    let label = path.display().to_string();
    let io_err = |source| WavError::Io { path: label.clone(), source };

    let data_len = interleaved.len() * 4;
    let block_align = channels as u32 * 4;
    // RIFF size: WAVE + fmt(8+16) + fact(8+4) + data(8+len).
    let riff_size = 4 + 24 + 12 + 8 + data_len;

    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    let mut out = |bytes: &[u8]| w.write_all(bytes).map_err(io_err);

    out(b"RIFF")?;
    out(&(riff_size as u32).to_le_bytes())?;
    out(b"WAVE")?;
    out(b"fmt ")?;
    out(&16u32.to_le_bytes())?;
    out(&FORMAT_IEEE_FLOAT.to_le_bytes())?;
    out(&channels.to_le_bytes())?;
    out(&sample_rate.to_le_bytes())?;
    out(&(sample_rate * block_align).to_le_bytes())?;
    out(&(block_align as u16).to_le_bytes())?;
    out(&32u16.to_le_bytes())?;
    out(b"fact")?;
    out(&4u32.to_le_bytes())?;
    out(&((interleaved.len() / channels as usize) as u32).to_le_bytes())?;
    out(b"data")?;
    out(&(data_len as u32).to_le_bytes())?;
    for v in interleaved {
        out(&v.to_le_bytes())?;
    }
    w.flush().map_err(io_err)
}

pub fn write_foa(path: &Path, signal: &FoaSignal) -> Result<(), WavError> {
    let n = signal.len();
    let mut interleaved = Vec::with_capacity(n * 4);
    for i in 0..n {
        for c in 0..4 {
            interleaved.push(signal.channel(c)[i] as f32);
        }
    }
    write_wav(path, 4, signal.sample_rate, &interleaved)
}

pub fn read_foa(path: &Path) -> Result<FoaSignal, WavError> {
    let data = read_wav(path)?;
    if data.channels != 4 {
        return Err(WavError::ChannelCount {
            path: path.display().to_string(),
            expected: 4,
            found: data.channels,
        });
    }
    let frames = data.frames();
    let mut channels: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::with_capacity(frames));
    for frame in data.samples.chunks_exact(4) {
        for c in 0..4 {
            channels[c].push(frame[c] as f64);
        }
    }
    Ok(FoaSignal::new(channels, data.sample_rate))
}

pub fn write_mono(path: &Path, samples: &[f64], sample_rate: u32) -> Result<(), WavError> {
    let interleaved: Vec<f32> = samples.iter().map(|&v| v as f32).collect();
    write_wav(path, 1, sample_rate, &interleaved)
}

pub fn read_mono(path: &Path) -> Result<(Vec<f64>, u32), WavError> {
    let data = read_wav(path)?;
    if data.channels != 1 {
        return Err(WavError::ChannelCount {
            path: path.display().to_string(),
            expected: 1,
            found: data.channels,
        });
    }
    Ok((data.samples.iter().map(|&v| v as f64).collect(), data.sample_rate))
}

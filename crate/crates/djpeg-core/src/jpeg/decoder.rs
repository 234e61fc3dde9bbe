//! Baseline sequential grayscale JPEG decoder.
//!
//! Decoding stops at entropy level for [`decode_to_coeffs`]; the quantized
//! integers come out exactly as coded. Progressive, arithmetic, and
//! multi-component streams are rejected with the offending marker named.

use super::consts::*;
use super::dct::{block_to_pixels, dequantize};
use super::huffman::{extend, DecTable};
use super::{CodecError, CoeffImage, GrayImage, QuantTable};

struct BitReader<'a> {
    data: &'a [u8],
    pos: usize,
    acc: u8,
    nbits: u8,
}

impl<'a> BitReader<'a> {
    fn new(data: &'a [u8], pos: usize) -> Self {
        BitReader {
            data,
            pos,
            acc: 0,
            nbits: 0,
        }
    }

    fn next_bit(&mut self) -> Result<u8, CodecError> {
        if self.nbits == 0 {
            if self.pos >= self.data.len() {
                return Err(CodecError::Malformed("truncated entropy data".into()));
            }
            let b = self.data[self.pos];
            if b == 0xff {
                match self.data.get(self.pos + 1) {
                    Some(0x00) => self.pos += 2, // stuffed byte
                    Some(&m) => {
                        return Err(CodecError::Malformed(format!(
                            "unexpected marker 0xff{m:02x} inside entropy data"
                        )))
                    }
                    None => {
                        return Err(CodecError::Malformed("truncated entropy data".into()))
                    }
                }
            } else {
                self.pos += 1;
            }
            self.acc = b;
            self.nbits = 8;
        }
        self.nbits -= 1;
        Ok((self.acc >> self.nbits) & 1)
    }

    fn receive(&mut self, n: u8) -> Result<u16, CodecError> {
        let mut v = 0u16;
        for _ in 0..n {
            v = (v << 1) | self.next_bit()? as u16;
        }
        Ok(v)
    }

    /// Byte-align and consume an expected restart marker.
    fn consume_rst(&mut self, n: u8) -> Result<(), CodecError> {
        self.nbits = 0;
        if self.pos + 1 >= self.data.len() {
            return Err(CodecError::Malformed("truncated at restart marker".into()));
        }
        let (a, b) = (self.data[self.pos], self.data[self.pos + 1]);
        if a != 0xff || b != 0xd0 + n {
            return Err(CodecError::Malformed(format!(
                "expected RST{n}, found {a:02x}{b:02x}"
            )));
        }
        self.pos += 2;
        Ok(())
    }
}

#[derive(Default)]
struct Frame {
    width: usize,
    height: usize,
    qtable_id: usize,
}

struct Parsed<'a> {
    frame: Frame,
    qtables: [Option<QuantTable>; 4],
    dc_table: DecTable,
    ac_table: DecTable,
    restart_interval: usize,
    entropy_start: usize,
    data: &'a [u8],
}

fn u16be(data: &[u8], pos: usize) -> Result<usize, CodecError> {
    if pos + 1 >= data.len() {
        return Err(CodecError::Malformed("truncated segment length".into()));
    }
    Ok(((data[pos] as usize) << 8) | data[pos + 1] as usize)
}

/// Segment length at `pos`, validated against the stream end.
fn segment_len(data: &[u8], pos: usize) -> Result<usize, CodecError> {
    let len = u16be(data, pos)?;
    if len < 2 || pos + len > data.len() {
        return Err(CodecError::Malformed("truncated segment".into()));
    }
    Ok(len)
}

fn reject_marker(m: u8) -> CodecError {
    let what = match m {
        0xc1 => "extended sequential (SOF1)",
        0xc2 => "progressive (SOF2)",
        0xc3 => "lossless (SOF3)",
        0xc5..=0xc7 => "differential sequential/progressive/lossless (SOF5-7)",
        0xc9..=0xcb => "arithmetic-coded (SOF9-11)",
        0xcd..=0xcf => "differential arithmetic-coded (SOF13-15)",
        _ => return CodecError::Malformed(format!("unsupported marker 0xff{m:02x}")),
    };
    CodecError::Unsupported(format!("{what} streams are not supported, marker 0xff{m:02x}"))
}

fn parse_headers(data: &[u8]) -> Result<Parsed<'_>, CodecError> {
    if data.len() < 4 || data[0] != 0xff || data[1] != MARKER_SOI {
        return Err(CodecError::Malformed("missing SOI marker".into()));
    }
    let mut pos = 2usize;
    let mut qtables: [Option<QuantTable>; 4] = [None, None, None, None];
    let mut dc_tables: [Option<DecTable>; 4] = Default::default();
    let mut ac_tables: [Option<DecTable>; 4] = Default::default();
    let mut frame: Option<Frame> = None;
    let mut restart_interval = 0usize;

    loop {
        // find the next marker, tolerating fill bytes
        while pos < data.len() && data[pos] != 0xff {
            pos += 1;
        }
        while pos < data.len() && data[pos] == 0xff {
            pos += 1;
        }
        if pos >= data.len() {
            return Err(CodecError::Malformed("no SOS marker before end".into()));
        }
        let marker = data[pos];
        pos += 1;

        match marker {
            MARKER_EOI => {
                return Err(CodecError::Malformed("EOI before scan data".into()));
            }
            MARKER_SOF0 => {
                let len = segment_len(data, pos)?;
                let seg = &data[pos + 2..pos + len];
                if seg.len() < 6 {
                    return Err(CodecError::Malformed("short SOF0".into()));
                }
                if seg[0] != 8 {
                    return Err(CodecError::Unsupported(format!(
                        "{}-bit precision not supported",
                        seg[0]
                    )));
                }
                let height = ((seg[1] as usize) << 8) | seg[2] as usize;
                let width = ((seg[3] as usize) << 8) | seg[4] as usize;
                let ncomp = seg[5] as usize;
                if ncomp != 1 {
                    return Err(CodecError::Unsupported(format!(
                        "multi-component stream ({ncomp} components); only grayscale is supported"
                    )));
                }
                let qtable_id = seg[8] as usize;
                frame = Some(Frame {
                    width,
                    height,
                    qtable_id,
                });
                pos += len;
            }
            MARKER_DQT => {
                let len = segment_len(data, pos)?;
                let mut p = pos + 2;
                let end = pos + len;
                while p < end {
                    let pq = data[p] >> 4;
                    let tq = (data[p] & 0x0f) as usize;
                    if pq != 0 {
                        return Err(CodecError::Unsupported(
                            "16-bit quantization tables are not baseline".into(),
                        ));
                    }
                    if p + 65 > end {
                        return Err(CodecError::Malformed("truncated DQT".into()));
                    }
                    let mut steps = [0u16; 64];
                    for k in 0..64 {
                        steps[ZIGZAG[k]] = data[p + 1 + k] as u16;
                    }
                    qtables[tq] = Some(QuantTable { steps });
                    p += 65;
                }
                pos += len;
            }
            MARKER_DHT => {
                let len = segment_len(data, pos)?;
                let mut p = pos + 2;
                let end = pos + len;
                while p < end {
                    let class = data[p] >> 4;
                    let id = (data[p] & 0x0f) as usize;
                    if p + 17 > end {
                        return Err(CodecError::Malformed("truncated DHT".into()));
                    }
                    let mut bits = [0u8; 16];
                    bits.copy_from_slice(&data[p + 1..p + 17]);
                    let total: usize = bits.iter().map(|&b| b as usize).sum();
                    if p + 17 + total > end {
                        return Err(CodecError::Malformed("truncated DHT values".into()));
                    }
                    let table = DecTable::build(&bits, &data[p + 17..p + 17 + total])?;
                    match class {
                        0 => dc_tables[id] = Some(table),
                        1 => ac_tables[id] = Some(table),
                        c => {
                            return Err(CodecError::Malformed(format!(
                                "bad huffman table class {c}"
                            )))
                        }
                    }
                    p += 17 + total;
                }
                pos += len;
            }
            MARKER_DRI => {
                let len = segment_len(data, pos)?;
                restart_interval = u16be(data, pos + 2)?;
                pos += len;
            }
            MARKER_SOS => {
                let len = segment_len(data, pos)?;
                let seg = &data[pos + 2..pos + len];
                if seg.is_empty() || seg[0] != 1 {
                    return Err(CodecError::Unsupported(
                        "scan with more than one component".into(),
                    ));
                }
                let td = (seg[2] >> 4) as usize;
                let ta = (seg[2] & 0x0f) as usize;
                let frame = frame
                    .ok_or_else(|| CodecError::Malformed("SOS before SOF0".into()))?;
                let dc = dc_tables[td]
                    .take()
                    .ok_or_else(|| CodecError::Malformed(format!("missing DC table {td}")))?;
                let ac = ac_tables[ta]
                    .take()
                    .ok_or_else(|| CodecError::Malformed(format!("missing AC table {ta}")))?;
                return Ok(Parsed {
                    frame,
                    qtables,
                    dc_table: dc,
                    ac_table: ac,
                    restart_interval,
                    entropy_start: pos + len,
                    data,
                });
            }
            0xc1..=0xc3 | 0xc5..=0xc7 | 0xc9..=0xcb | 0xcd..=0xcf => {
                return Err(reject_marker(marker));
            }
            0xd0..=0xd7 => {
                // restart markers are parameterless; nothing to skip
            }
            _ => {
                // APPn, COM, DNL, and anything else with a length: skip
                let len = segment_len(data, pos)?;
                pos += len;
            }
        }
    }
}

fn decode_block(
    reader: &mut BitReader,
    dc: &DecTable,
    ac: &DecTable,
    pred: &mut i32,
) -> Result<[i32; 64], CodecError> {
    let mut zz = [0i32; 64];
    let s = dc.decode(|| reader.next_bit())?;
    let diff = extend(reader.receive(s)?, s);
    *pred += diff;
    zz[0] = *pred;

    let mut k = 1usize;
    while k < 64 {
        let rs = ac.decode(|| reader.next_bit())?;
        let run = (rs >> 4) as usize;
        let size = rs & 0x0f;
        if size == 0 {
            if run == 15 {
                k += 16; // ZRL
                continue;
            }
            break; // EOB
        }
        k += run;
        if k >= 64 {
            return Err(CodecError::Malformed("AC run past end of block".into()));
        }
        zz[k] = extend(reader.receive(size)?, size);
        k += 1;
    }

    let mut nat = [0i32; 64];
    for k in 0..64 {
        nat[ZIGZAG[k]] = zz[k];
    }
    Ok(nat)
}

/// Entropy-decode a baseline grayscale stream to its quantized coefficients.
pub fn decode_to_coeffs(stream: &[u8]) -> Result<CoeffImage, CodecError> {
    let parsed = parse_headers(stream)?;
    let frame = parsed.frame;
    if frame.width == 0 || frame.height == 0 {
        return Err(CodecError::Malformed("zero image dimension".into()));
    }
    let quant = parsed.qtables[frame.qtable_id]
        .clone()
        .ok_or_else(|| {
            CodecError::Malformed(format!("missing quantization table {}", frame.qtable_id))
        })?;

    let blocks_wide = frame.width.div_ceil(8);
    let blocks_high = frame.height.div_ceil(8);
    let total = blocks_wide * blocks_high;

    let mut reader = BitReader::new(parsed.data, parsed.entropy_start);
    let mut coeffs = Vec::with_capacity(total * 64);
    let mut pred = 0i32;
    let mut rst_index = 0u8;

    for b in 0..total {
        if parsed.restart_interval > 0 && b > 0 && b % parsed.restart_interval == 0 {
            reader.consume_rst(rst_index)?;
            rst_index = (rst_index + 1) % 8;
            pred = 0;
        }
        let block = decode_block(&mut reader, &parsed.dc_table, &parsed.ac_table, &mut pred)?;
        coeffs.extend_from_slice(&block);
    }

    Ok(CoeffImage {
        blocks_high,
        blocks_wide,
        width: frame.width,
        height: frame.height,
        coeffs,
        quant,
    })
}

/// Full decode: dequantize, inverse DCT, level shift, round, clamp.
pub fn decode_to_pixels(stream: &[u8]) -> Result<GrayImage, CodecError> {
    let c = decode_to_coeffs(stream)?;
    let mut samples = vec![0u8; c.width * c.height];
    for by in 0..c.blocks_high {
        for bx in 0..c.blocks_wide {
            let mut block = [0i32; 64];
            block.copy_from_slice(c.block(by, bx));
            let px = block_to_pixels(&dequantize(&block, &c.quant));
            for y in 0..8 {
                let iy = by * 8 + y;
                if iy >= c.height {
                    break;
                }
                for x in 0..8 {
                    let ix = bx * 8 + x;
                    if ix >= c.width {
                        break;
                    }
                    samples[iy * c.width + ix] = px[y * 8 + x];
                }
            }
        }
    }
    Ok(GrayImage {
        width: c.width,
        height: c.height,
        samples,
    })
}

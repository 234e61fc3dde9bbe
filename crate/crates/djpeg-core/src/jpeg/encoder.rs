//! Baseline sequential grayscale JPEG encoder.
//!
//! Marker layout: SOI, APP0 (JFIF 1.01), DQT, SOF0 (8-bit, one component,
//! 1x1 sampling), DHT (DC), DHT (AC), SOS, entropy data, EOI. Fixed Annex K
//! luminance Huffman tables, no restart markers.

use super::consts::*;
use super::dct::{fdct8x8, quantize};
use super::huffman::{magnitude_bits, magnitude_category, EncTable};
use super::{quant_table_for_qf, CodecError, CoeffImage, GrayImage, QuantTable};

struct BitWriter {
    out: Vec<u8>,
    acc: u32,
    nbits: u8,
}

impl BitWriter {
    fn new(out: Vec<u8>) -> Self {
        BitWriter {
            out,
            acc: 0,
            nbits: 0,
        }
    }

    fn put(&mut self, code: u16, len: u8) {
        debug_assert!(len <= 16);
        self.acc = (self.acc << len) | code as u32;
        self.nbits += len;
        while self.nbits >= 8 {
            let byte = (self.acc >> (self.nbits - 8)) as u8;
            self.out.push(byte);
            if byte == 0xff {
                self.out.push(0x00); // byte stuffing
            }
            self.nbits -= 8;
            self.acc &= (1 << self.nbits) - 1;
        }
    }

    /// Pad the final partial byte with 1-bits.
    fn flush(mut self) -> Vec<u8> {
        if self.nbits > 0 {
            let pad = 8 - self.nbits;
            self.put((1u16 << pad) - 1, pad);
        }
        self.out
    }
}

fn push_segment(out: &mut Vec<u8>, marker: u8, payload: &[u8]) {
    out.push(0xff);
    out.push(marker);
    let len = payload.len() + 2;
    out.push((len >> 8) as u8);
    out.push(len as u8);
    out.extend_from_slice(payload);
}

fn write_headers(out: &mut Vec<u8>, width: usize, height: usize, q: &QuantTable) {
    out.extend_from_slice(&[0xff, 0xd8]); // SOI

    // APP0: JFIF 1.01, no density units, no thumbnail
    push_segment(
        out,
        MARKER_APP0,
        &[b'J', b'F', b'I', b'F', 0, 1, 1, 0, 0, 1, 0, 1, 0, 0],
    );

    // DQT: table 0, 8-bit precision, zigzag order
    let mut dqt = Vec::with_capacity(65);
    dqt.push(0x00);
    for k in 0..64 {
        dqt.push(q.steps[ZIGZAG[k]] as u8);
    }
    push_segment(out, MARKER_DQT, &dqt);

    // SOF0: 8-bit, one component, 1x1 sampling, quant table 0
    let sof = [
        8,
        (height >> 8) as u8,
        height as u8,
        (width >> 8) as u8,
        width as u8,
        1,    // components
        1,    // component id
        0x11, // h/v sampling
        0,    // quant table id
    ];
    push_segment(out, MARKER_SOF0, &sof);

    // DHT: DC table 0 then AC table 0
    let mut dht = Vec::new();
    dht.push(0x00);
    dht.extend_from_slice(&DC_LUMA_BITS);
    dht.extend_from_slice(&DC_LUMA_VALS);
    push_segment(out, MARKER_DHT, &dht);

    let mut dht = Vec::new();
    dht.push(0x10);
    dht.extend_from_slice(&AC_LUMA_BITS);
    dht.extend_from_slice(&AC_LUMA_VALS);
    push_segment(out, MARKER_DHT, &dht);

    // SOS: one component, DC table 0 / AC table 0, full spectral range
    push_segment(out, MARKER_SOS, &[1, 1, 0x00, 0, 63, 0]);
}

fn encode_block(
    bw: &mut BitWriter,
    zz: &[i32; 64],
    pred: &mut i32,
    dc_table: &EncTable,
    ac_table: &EncTable,
) {
    let diff = zz[0] - *pred;
    *pred = zz[0];
    let s = magnitude_category(diff);
    let (code, len) = dc_table.code(s);
    bw.put(code, len);
    if s > 0 {
        bw.put(magnitude_bits(diff, s), s);
    }

    let mut run = 0u32;
    for &v in &zz[1..] {
        if v == 0 {
            run += 1;
            continue;
        }
        while run >= 16 {
            let (code, len) = ac_table.code(0xf0); // ZRL
            bw.put(code, len);
            run -= 16;
        }
        let s = magnitude_category(v);
        let sym = ((run as u8) << 4) | s;
        let (code, len) = ac_table.code(sym);
        bw.put(code, len);
        bw.put(magnitude_bits(v, s), s);
        run = 0;
    }
    if run > 0 {
        let (code, len) = ac_table.code(0x00); // EOB
        bw.put(code, len);
    }
}

/// Encode and also return the quantized coefficients the encoder produced
/// (the round-trip oracle for the decoder).
pub fn encode_gray_with_coeffs(
    img: &GrayImage,
    qf: u32,
) -> Result<(Vec<u8>, CoeffImage), CodecError> {
    if img.width % 8 != 0 || img.height % 8 != 0 {
        return Err(CodecError::InvalidInput(format!(
            "encoder requires dimensions that are multiples of 8, got {}x{}",
            img.width, img.height
        )));
    }
    if img.width == 0 || img.height == 0 {
        return Err(CodecError::InvalidInput("empty image".into()));
    }
    let q = quant_table_for_qf(qf)?;
    let (bw_count, bh_count) = (img.width / 8, img.height / 8);

    let mut out = Vec::new();
    write_headers(&mut out, img.width, img.height, &q);

    let dc_table = EncTable::build(&DC_LUMA_BITS, &DC_LUMA_VALS);
    let ac_table = EncTable::build(&AC_LUMA_BITS, &AC_LUMA_VALS);
    let mut writer = BitWriter::new(out);
    let mut pred = 0i32;
    let mut coeffs = Vec::with_capacity(bh_count * bw_count * 64);

    for by in 0..bh_count {
        for bx in 0..bw_count {
            let mut block = [0u8; 64];
            for y in 0..8 {
                let row = (by * 8 + y) * img.width + bx * 8;
                block[y * 8..y * 8 + 8].copy_from_slice(&img.samples[row..row + 8]);
            }
            let quantized = quantize(&fdct8x8(&block), &q);
            let mut zz = [0i32; 64];
            for k in 0..64 {
                zz[k] = quantized[ZIGZAG[k]];
            }
            encode_block(&mut writer, &zz, &mut pred, &dc_table, &ac_table);
            coeffs.extend_from_slice(&quantized);
        }
    }

    let mut out = writer.flush();
    out.extend_from_slice(&[0xff, 0xd9]); // EOI

    Ok((
        out,
        CoeffImage {
            blocks_high: bh_count,
            blocks_wide: bw_count,
            width: img.width,
            height: img.height,
            coeffs,
            quant: q,
        },
    ))
}

pub fn encode_gray(img: &GrayImage, qf: u32) -> Result<Vec<u8>, CodecError> {
    encode_gray_with_coeffs(img, qf).map(|(s, _)| s)
}

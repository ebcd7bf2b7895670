use super::range::{Context, RangeDecoder, RangeEncoder};
use crate::error::{Error, Result};

/// Context-coded unary bins before the bypass exp-Golomb escape.
pub const PREFIX_BINS: u32 = 4;
const EG_ORDER: u32 = 1;

/// Zig-zag style sign mapping: 0, 1, -1, 2, -2, ... -> 0, 1, 2, 3, 4, ...
#[inline]
pub fn sign_map(r: i32) -> u32 {
    let m = r.unsigned_abs();
    if r > 0 {
        2 * m - 1
    } else {
        2 * m
    }
}

#[inline]
pub fn sign_unmap(u: u32) -> i32 {
    if u & 1 == 1 {
        (u / 2 + 1) as i32
    } else {
        -((u / 2) as i32)
    }
}

/// Length of the order-k exp-Golomb code of `v`.
pub fn exp_golomb_len(v: u64, k: u32) -> u32 {
    let mut v = v;
    let mut k = k;
    let mut len = 0;
    while v >= 1 << k {
        len += 1;
        v -= 1 << k;
        k += 1;
    }
    len + 1 + k
}

/// Number of bins the residual binarization spends on `r`.
pub fn residual_bins(r: i32) -> u32 {
    let u = sign_map(r);
    if u < PREFIX_BINS {
        u + 1
    } else {
        PREFIX_BINS + exp_golomb_len((u - PREFIX_BINS) as u64, EG_ORDER)
    }
}

fn encode_exp_golomb(enc: &mut RangeEncoder, mut v: u64, mut k: u32) {
    while v >= 1 << k {
        enc.encode_bypass(true);
        v -= 1 << k;
        k += 1;
    }
    enc.encode_bypass(false);
    enc.encode_raw(v, k);
}

fn decode_exp_golomb(dec: &mut RangeDecoder<'_>, mut k: u32) -> Result<u64> {
    let mut base = 0u64;
    while dec.decode_bypass()? {
        base += 1 << k;
        k += 1;
        if k > 40 {
            return Err(Error::Corrupt("exp-Golomb prefix too long".into()));
        }
    }
    Ok(base + dec.decode_raw(k)?)
}

/// Adaptive state for the residual and mode syntax elements.
#[derive(Debug, Clone, Default)]
pub struct SymbolContexts {
    residual: [Context; PREFIX_BINS as usize],
    mode: [Context; 2],
}

/// Truncated-unary bins of a signaled mode: 1 -> "0", 2 -> "10", 3 -> "11".
pub fn mode_bins(mode: u8) -> &'static [bool] {
    match mode {
        1 => &[false],
        2 => &[true, false],
        3 => &[true, true],
        _ => panic!("signaled mode must be 1..=3, got {mode}"),
    }
}

/// Symbol-level writer over a [`RangeEncoder`].
#[derive(Debug, Default)]
pub struct SymbolEncoder {
    rc: RangeEncoder,
    ctx: SymbolContexts,
}

impl SymbolEncoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn encode_residual(&mut self, r: i32) {
        let u = sign_map(r);
        for b in 0..PREFIX_BINS {
            let more = u > b;
            self.rc.encode_bit(&mut self.ctx.residual[b.min(3) as usize], more);
            if !more {
                return;
            }
        }
        encode_exp_golomb(&mut self.rc, (u - PREFIX_BINS) as u64, EG_ORDER);
    }

    pub fn encode_mode(&mut self, mode: u8) {
        for (i, &bin) in mode_bins(mode).iter().enumerate() {
            self.rc.encode_bit(&mut self.ctx.mode[i], bin);
        }
    }

    pub fn encode_raw(&mut self, value: u64, bits: u32) {
        self.rc.encode_raw(value, bits);
    }

    pub fn finish(self) -> Vec<u8> {
        self.rc.finish()
    }
}

#[derive(Debug)]
pub struct SymbolDecoder<'a> {
    rc: RangeDecoder<'a>,
    ctx: SymbolContexts,
}

impl<'a> SymbolDecoder<'a> {
    pub fn new(data: &'a [u8]) -> Result<Self> {
        Ok(SymbolDecoder {
            rc: RangeDecoder::new(data)?,
            ctx: SymbolContexts::default(),
        })
    }

    pub fn decode_residual(&mut self) -> Result<i32> {
        let mut u = 0u64;
        for b in 0..PREFIX_BINS {
            if !self.rc.decode_bit(&mut self.ctx.residual[b.min(3) as usize])? {
                return Ok(sign_unmap(u as u32));
            }
            u += 1;
        }
        u += decode_exp_golomb(&mut self.rc, EG_ORDER)?;
        let u = u32::try_from(u).map_err(|_| Error::Corrupt("residual out of range".into()))?;
        Ok(sign_unmap(u))
    }

    pub fn decode_mode(&mut self) -> Result<u8> {
        if !self.rc.decode_bit(&mut self.ctx.mode[0])? {
            return Ok(1);
        }
        Ok(if self.rc.decode_bit(&mut self.ctx.mode[1])? { 3 } else { 2 })
    }

    pub fn decode_raw(&mut self, bits: u32) -> Result<u64> {
        self.rc.decode_raw(bits)
    }

    pub fn finish(self) -> Result<()> {
        self.rc.finish()
    }
}

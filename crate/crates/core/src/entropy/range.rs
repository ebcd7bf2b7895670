use crate::error::{Error, Result};

/// Probability precision of an adaptive context.
pub const PROB_BITS: u32 = 15;
const PROB_ONE: u32 = 1 << PROB_BITS;
const PROB_MIN: i32 = 31;
const PROB_MAX: i32 = PROB_ONE as i32 - 31;

/// Adaptation shift grows from `RATE_MIN` to `RATE_MAX` as a context sees
/// more bins: fast learning first, low estimator noise later.
const RATE_MIN: u32 = 4;
const RATE_MAX: u32 = 7;
const RATE_STEP: [u16; 3] = [16, 48, 160];

const TOP: u32 = 1 << 24;

/// Adaptive estimate of P(bit = 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Context {
    p1: u16,
    seen: u16,
}

impl Default for Context {
    fn default() -> Self {
        Context {
            p1: (PROB_ONE / 2) as u16,
            seen: 0,
        }
    }
}

impl Context {
    pub fn p1(&self) -> u32 {
        self.p1 as u32
    }

    #[inline]
    fn rate(&self) -> u32 {
        RATE_MIN + RATE_STEP.iter().filter(|&&s| self.seen >= s).count() as u32
    }

    #[inline]
    fn update(&mut self, bit: bool) {
        let p = self.p1 as i32;
        let target = if bit { PROB_ONE as i32 } else { 0 };
        let p = (p + ((target - p) >> self.rate())).clamp(PROB_MIN, PROB_MAX);
        self.p1 = p as u16;
        debug_assert!(RATE_MAX >= self.rate());
        if self.seen < RATE_STEP[RATE_STEP.len() - 1] {
            self.seen += 1;
        }
    }
}

/// Carry-propagating binary range encoder (32-bit range, byte output).
#[derive(Debug)]
pub struct RangeEncoder {
    low: u64,
    range: u32,
    cache: u8,
    pending: u64,
    // The leading cache byte is always zero and is not emitted.
    started: bool,
    out: Vec<u8>,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeEncoder {
    pub fn new() -> Self {
        RangeEncoder {
            low: 0,
            range: u32::MAX,
            cache: 0,
            pending: 1,
            started: false,
            out: Vec::new(),
        }
    }

    fn emit(&mut self, byte: u8) {
        if self.started {
            self.out.push(byte);
        } else {
            debug_assert_eq!(byte, 0);
            self.started = true;
        }
    }

    fn shift_low(&mut self) {
        if (self.low as u32) < 0xFF00_0000 || (self.low >> 32) != 0 {
            let carry = (self.low >> 32) as u8;
            let mut byte = self.cache;
            while self.pending != 0 {
                self.emit(byte.wrapping_add(carry));
                byte = 0xFF;
                self.pending -= 1;
            }
            self.cache = (self.low >> 24) as u8;
        }
        self.pending += 1;
        self.low = (self.low & 0x00FF_FFFF) << 8;
    }

    #[inline]
    fn normalize(&mut self) {
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
    }

    pub fn encode_bit(&mut self, ctx: &mut Context, bit: bool) {
        let bound = (self.range >> PROB_BITS) * ctx.p1();
        if bit {
            self.range = bound;
        } else {
            self.low += bound as u64;
            self.range -= bound;
        }
        ctx.update(bit);
        self.normalize();
    }

    /// Equiprobable bin, no context.
    pub fn encode_bypass(&mut self, bit: bool) {
        self.range >>= 1;
        if bit {
            self.low += self.range as u64;
        }
        self.normalize();
    }

    /// `bits` low bits of `value`, most significant first.
    pub fn encode_raw(&mut self, value: u64, bits: u32) {
        for b in (0..bits).rev() {
            self.encode_bypass((value >> b) & 1 == 1);
        }
    }

    pub fn finish(mut self) -> Vec<u8> {
        for _ in 0..5 {
            self.shift_low();
        }
        self.out
    }
}

#[derive(Debug)]
pub struct RangeDecoder<'a> {
    data: &'a [u8],
    pos: usize,
    code: u32,
    range: u32,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(data: &'a [u8]) -> Result<Self> {
        let mut d = RangeDecoder {
            data,
            pos: 0,
            code: 0,
            range: u32::MAX,
        };
        for _ in 0..4 {
            d.code = (d.code << 8) | d.next_byte()? as u32;
        }
        Ok(d)
    }

    #[inline]
    fn next_byte(&mut self) -> Result<u8> {
        let b = *self.data.get(self.pos).ok_or(Error::Underrun)?;
        self.pos += 1;
        Ok(b)
    }

    #[inline]
    fn normalize(&mut self) -> Result<()> {
        while self.range < TOP {
            self.range <<= 8;
            self.code = (self.code << 8) | self.next_byte()? as u32;
        }
        Ok(())
    }

    pub fn decode_bit(&mut self, ctx: &mut Context) -> Result<bool> {
        let bound = (self.range >> PROB_BITS) * ctx.p1();
        let bit = self.code < bound;
        if bit {
            self.range = bound;
        } else {
            self.code -= bound;
            self.range -= bound;
        }
        ctx.update(bit);
        self.normalize()?;
        Ok(bit)
    }

    pub fn decode_bypass(&mut self) -> Result<bool> {
        self.range >>= 1;
        let bit = self.code >= self.range;
        if bit {
            self.code -= self.range;
        }
        self.normalize()?;
        Ok(bit)
    }

    pub fn decode_raw(&mut self, bits: u32) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..bits {
            v = (v << 1) | self.decode_bypass()? as u64;
        }
        Ok(v)
    }

    /// Bytes consumed so far.
    pub fn position(&self) -> usize {
        self.pos
    }

    /// Fails unless every byte of the stream has been consumed.
    pub fn finish(self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(Error::Corrupt(format!(
                "{} trailing payload bytes",
                self.data.len() - self.pos
            )));
        }
        Ok(())
    }
}

//! GF(2^16) with reduction polynomial x^16 + x^12 + x^3 + x + 1 (0x1100B).
//!
//! Elements are stored as `u16`; addition is XOR and multiplication goes
//! through log/antilog tables built once over the generator `x` (= 2).

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Sub};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

pub const FIELD_POLY: u32 = 0x1100B;
/// Number of nonzero field elements.
pub const GROUP_ORDER: usize = 65535;
pub const SYMBOL_BITS: usize = 16;

struct Tables {
    exp: Vec<u16>,
    log: Vec<u16>,
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut exp = vec![0u16; 2 * GROUP_ORDER];
        let mut log = vec![0u16; 1 << 16];
        let mut x: u32 = 1;
        for i in 0..GROUP_ORDER {
            exp[i] = x as u16;
            log[x as usize] = i as u16;
            x <<= 1;
            if x & 0x1_0000 != 0 {
                x ^= FIELD_POLY;
            }
        }
        assert_eq!(x, 1, "reduction polynomial is not primitive");
        for i in GROUP_ORDER..2 * GROUP_ORDER {
            exp[i] = exp[i - GROUP_ORDER];
        }
        Tables { exp, log }
    })
}

/// One element of GF(2^16).
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Symbol(pub u16);

impl Symbol {
    pub const ZERO: Symbol = Symbol(0);
    pub const ONE: Symbol = Symbol(1);

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(self) -> Option<Symbol> {
        if self.0 == 0 {
            return None;
        }
        let t = tables();
        let l = t.log[self.0 as usize] as usize;
        Some(Symbol(t.exp[(GROUP_ORDER - l) % GROUP_ORDER]))
    }

    pub fn pow(self, e: u64) -> Symbol {
        if e == 0 {
            return Symbol::ONE;
        }
        if self.0 == 0 {
            return Symbol::ZERO;
        }
        let t = tables();
        let l = t.log[self.0 as usize] as u64;
        Symbol(t.exp[((l * (e % GROUP_ORDER as u64)) % GROUP_ORDER as u64) as usize])
    }

    /// Generator power `x^k`.
    pub fn exp(k: usize) -> Symbol {
        Symbol(tables().exp[k % GROUP_ORDER])
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#06x}", self.0)
    }
}

impl From<u16> for Symbol {
    fn from(v: u16) -> Self {
        Symbol(v)
    }
}

impl Add for Symbol {
    type Output = Symbol;
    #[inline]
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn add(self, rhs: Symbol) -> Symbol {
        Symbol(self.0 ^ rhs.0)
    }
}

impl Sub for Symbol {
    type Output = Symbol;
    #[inline]
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn sub(self, rhs: Symbol) -> Symbol {
        Symbol(self.0 ^ rhs.0)
    }
}

impl AddAssign for Symbol {
    #[inline]
    fn add_assign(&mut self, rhs: Symbol) {
        self.0 ^= rhs.0;
    }
}

impl Mul for Symbol {
    type Output = Symbol;
    #[inline]
    fn mul(self, rhs: Symbol) -> Symbol {
        if self.0 == 0 || rhs.0 == 0 {
            return Symbol::ZERO;
        }
        let t = tables();
        Symbol(t.exp[t.log[self.0 as usize] as usize + t.log[rhs.0 as usize] as usize])
    }
}

impl MulAssign for Symbol {
    #[inline]
    fn mul_assign(&mut self, rhs: Symbol) {
        *self = *self * rhs;
    }
}

impl Div for Symbol {
    type Output = Symbol;
    /// Panics on division by zero.
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Symbol) -> Symbol {
        self * rhs.inv().expect("division by zero in GF(2^16)")
    }
}

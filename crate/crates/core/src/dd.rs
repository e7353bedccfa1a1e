//! Minimal double-double arithmetic for the few places where f64 rounding
//! visibly pollutes a cancellation-heavy result: centered sample moments and
//! the moment/cumulant transforms. Not a general-purpose type.

/// Knuth's TwoSum: `a + b = s + e` exactly.
pub(crate) fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let z = s - a;
    let e = (a - (s - z)) + (b - z);
    (s, e)
}

/// Unevaluated sum of two floats, `|lo| <= ulp(hi)` after normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Dd {
    pub hi: f64,
    pub lo: f64,
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn new(hi: f64, lo: f64) -> Self {
        let (s, e) = two_sum(hi, lo);
        Dd { hi: s, lo: e }
    }

    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn add(self, other: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, other.hi);
        Dd::new(s, e + self.lo + other.lo)
    }

    pub fn sub(self, other: Dd) -> Dd {
        self.add(Dd { hi: -other.hi, lo: -other.lo })
    }

    pub fn mul(self, other: Dd) -> Dd {
        let p = self.hi * other.hi;
        let e = self.hi.mul_add(other.hi, -p);
        Dd::new(p, e + self.hi * other.lo + self.lo * other.hi)
    }

    pub fn mul_f64(self, c: f64) -> Dd {
        let p = self.hi * c;
        let e = self.hi.mul_add(c, -p);
        Dd::new(p, e + self.lo * c)
    }

    pub fn div_f64(self, c: f64) -> Dd {
        let q1 = self.hi / c;
        let r = (-q1).mul_add(c, self.hi) + self.lo;
        Dd::new(q1, r / c)
    }

    pub fn powi(self, e: usize) -> Dd {
        let mut out = Dd::ONE;
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    pub fn value(self) -> f64 {
        self.hi + self.lo
    }
}

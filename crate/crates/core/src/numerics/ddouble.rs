//! Minimal double-double arithmetic, enough to sum power series whose terms
//! cancel heavily (e.g. `exp` of a large negative argument).

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let e = e + t;
        let (s, e) = quick_two_sum(s, e);
        let e = e + f;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    pub fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    pub fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn mul_f64(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let e = e + self.lo * b;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn div_f64(self, b: f64) -> Dd {
        let q1 = self.hi / b;
        let (p, e) = two_prod(q1, b);
        let (s, f) = two_sum(self.hi, -p);
        let f = f - e + self.lo;
        let q2 = (s + f) / b;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }
    }

    pub fn scale(self, factor: f64) -> Dd {
        // Exact when `factor` is a power of two.
        Dd {
            hi: self.hi * factor,
            lo: self.lo * factor,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CDd {
    pub re: Dd,
    pub im: Dd,
}

impl CDd {
    pub const ZERO: CDd = CDd {
        re: Dd::ZERO,
        im: Dd::ZERO,
    };

    pub fn from_c64(z: Complex64) -> Self {
        CDd {
            re: Dd::new(z.re),
            im: Dd::new(z.im),
        }
    }

    pub fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn add(self, o: CDd) -> CDd {
        CDd {
            re: self.re.add(o.re),
            im: self.im.add(o.im),
        }
    }

    /// Multiply by an ordinary complex number (treated as exact).
    pub fn mul_c64(self, c: Complex64) -> CDd {
        CDd {
            re: self.re.mul_f64(c.re).sub(self.im.mul_f64(c.im)),
            im: self.re.mul_f64(c.im).add(self.im.mul_f64(c.re)),
        }
    }

    pub fn div_f64(self, b: f64) -> CDd {
        CDd {
            re: self.re.div_f64(b),
            im: self.im.div_f64(b),
        }
    }

    pub fn scale(self, factor: f64) -> CDd {
        CDd {
            re: self.re.scale(factor),
            im: self.im.scale(factor),
        }
    }

    pub fn approx_norm(self) -> f64 {
        self.re.hi.hypot(self.im.hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_minus_nine_by_series() {
        // Sum of terms up to 9^9/9! ≈ 1e3 must still recover e^{-9} ≈ 1.2e-4 to ~1e-15 relative.
        let mut term = Dd::new(1.0);
        let mut sum = Dd::new(1.0);
        for k in 1..80 {
            term = term.mul_f64(-9.0).div_f64(k as f64);
            sum = sum.add(term);
        }
        let rel = (sum.to_f64() - (-9.0f64).exp()).abs() / (-9.0f64).exp();
        assert!(rel < 1e-14, "rel = {rel}");
    }

    #[test]
    fn division_round_trip() {
        let x = Dd::new(1.0).div_f64(3.0).mul_f64(3.0);
        assert!((x.to_f64() - 1.0).abs() < 1e-30 + f64::EPSILON);
        assert!(x.sub(Dd::new(1.0)).to_f64().abs() < 1e-30);
    }
}

//! Error-free transformations and the compensated accumulators built on them.

/// `a + b = s + e` exactly (Knuth's TwoSum).
#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// `a * b = p + e` exactly, via fused multiply-add.
#[inline]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

/// Compensated (Kahan-Babuska-Neumaier) summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let (s, e) = two_sum(self.sum, x);
        self.sum = s;
        self.carry += e;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator of terms.
pub fn sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    terms.into_iter().collect::<CompensatedSum>().value()
}

/// Running product kept as an unevaluated pair `hi + lo`.
#[derive(Debug, Clone, Copy)]
pub struct CompensatedProduct {
    hi: f64,
    lo: f64,
}

impl Default for CompensatedProduct {
    fn default() -> Self {
        Self { hi: 1.0, lo: 0.0 }
    }
}

impl CompensatedProduct {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn mul(&mut self, x: f64) {
        let (p, e) = two_prod(self.hi, x);
        self.lo = self.lo.mul_add(x, e);
        let (s, c) = two_sum(p, self.lo);
        self.hi = s;
        self.lo = c;
    }

    pub fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

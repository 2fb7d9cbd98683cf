/// Neumaier compensated summation. Combining partial sums in a fixed order
/// keeps results bit-reproducible regardless of thread count.
#[derive(Clone, Copy, Debug, Default)]
pub struct Accum {
    s: f64,
    c: f64,
}

impl Accum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }
    #[inline]
    pub fn value(&self) -> f64 {
        self.s + self.c
    }
    pub fn merge(&mut self, other: &Accum) {
        self.add(other.s);
        self.add(other.c);
    }
}

pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut a = Accum::default();
    for v in values {
        a.add(v);
    }
    a.value()
}

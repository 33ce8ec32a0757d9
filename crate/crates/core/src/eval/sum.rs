/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if libm::fabs(self.sum) >= libm::fabs(x) {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: KahanSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn ksum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut s = KahanSum::default();
    xs.into_iter().for_each(|x| s.add(x));
    s.total()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_terms() {
        assert_eq!(ksum([1.0, 1e100, 1.0, -1e100]), 2.0);
    }

    #[test]
    fn order_insensitive_to_1e12() {
        let xs: alloc::vec::Vec<f64> = (0..10_000).map(|i| libm::sin(i as f64) * 1e3 + 1e-7 * i as f64).collect();
        let fwd = ksum(xs.iter().copied());
        let rev = ksum(xs.iter().rev().copied());
        assert!(libm::fabs(fwd - rev) <= 1e-12 * libm::fabs(fwd).max(1.0));
    }
}

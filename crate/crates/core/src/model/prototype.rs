use super::state::{deviation, normalize_course, COG, STATE_DIMS};

/// One Gaussian component of a cell mixture.
///
/// `m2` is the symmetric matrix of summed co-deviations from the mean, so the
/// (population) covariance is `m2 / count`. Keeping raw co-moments instead of
/// a covariance makes single-record updates and pairwise merges exact.
#[derive(Debug, Clone, PartialEq)]
pub struct Prototype {
    pub count: u64,
    pub mean: [f64; STATE_DIMS],
    pub m2: [[f64; STATE_DIMS]; STATE_DIMS],
}

impl Prototype {
    /// A prototype seeded by a single record.
    pub fn from_point(x: [f64; STATE_DIMS]) -> Self {
        Self {
            count: 1,
            mean: x,
            m2: [[0.0; STATE_DIMS]; STATE_DIMS],
        }
    }

    /// Population covariance `m2 / count`.
    pub fn covariance(&self) -> [[f64; STATE_DIMS]; STATE_DIMS] {
        let n = self.count as f64;
        let mut s = self.m2;
        for row in s.iter_mut() {
            for v in row.iter_mut() {
                *v /= n;
            }
        }
        s
    }

    /// Welford update with one record. The course deviation is wrapped before
    /// it enters the mean and the co-moments.
    pub fn absorb(&mut self, x: &[f64; STATE_DIMS]) {
        self.count += 1;
        let n = self.count as f64;
        let before = deviation(x, &self.mean);
        for j in 0..STATE_DIMS {
            self.mean[j] += before[j] / n;
        }
        self.mean[COG] = normalize_course(self.mean[COG]);
        let after = deviation(x, &self.mean);
        for i in 0..STATE_DIMS {
            for j in i..STATE_DIMS {
                self.m2[i][j] += before[i] * after[j];
                self.m2[j][i] = self.m2[i][j];
            }
        }
    }

    /// Pools two prototypes (Chan et al. pairwise combination).
    ///
    /// Non-course moments equal the moments of the union of both sample sets.
    /// The result is symmetric in its arguments on those dimensions, bit for bit.
    pub fn merge(a: &Prototype, b: &Prototype) -> Prototype {
        let count = a.count + b.count;
        let (na, nb, n) = (a.count as f64, b.count as f64, count as f64);
        let delta = deviation(&b.mean, &a.mean);

        let mut mean = [0.0; STATE_DIMS];
        for j in 0..STATE_DIMS {
            mean[j] = if a.mean[j] == b.mean[j] {
                a.mean[j]
            } else {
                (na * a.mean[j] + nb * b.mean[j]) / n
            };
        }
        // Circular dimension: step from a along the wrapped difference.
        mean[COG] = if delta[COG] == 0.0 {
            a.mean[COG]
        } else {
            normalize_course(a.mean[COG] + delta[COG] * (nb / n))
        };

        let weight = na * nb / n;
        let mut m2 = [[0.0; STATE_DIMS]; STATE_DIMS];
        for i in 0..STATE_DIMS {
            for j in i..STATE_DIMS {
                m2[i][j] = a.m2[i][j] + b.m2[i][j] + delta[i] * delta[j] * weight;
                m2[j][i] = m2[i][j];
            }
        }
        Prototype { count, mean, m2 }
    }
}

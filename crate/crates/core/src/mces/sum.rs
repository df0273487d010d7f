use rayon::prelude::*;

use crate::error::{Error, Result};

/// Samples per work unit. Partial sums are formed per block and merged in
/// block order, so results do not depend on how blocks are scheduled.
pub const BLOCK: usize = 256;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &Neumaier) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sample means and standard errors of a vector-valued per-sample quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct McStats {
    pub mean: Vec<f64>,
    /// Sample standard deviation over `√used`.
    pub std_error: Vec<f64>,
    pub used: usize,
    pub aborted: usize,
}

struct Partial {
    used: usize,
    aborted: usize,
    sum: Vec<Neumaier>,
    sumsq: Vec<Neumaier>,
    error: Option<Error>,
}

/// Runs `f` for samples `0..samples` and returns entrywise means and
/// standard errors. `init` builds one scratch workspace per block.
///
/// Summands are shifted by the value of the first sample before squaring,
/// so constant summands give a zero standard error exactly. Samples whose
/// `f` returns [`Error::Divergence`] are dropped and counted; any other
/// error aborts the estimate.
pub fn monte_carlo<W, I, F>(samples: usize, width: usize, init: I, f: F) -> Result<McStats>
where
    I: Fn() -> W + Sync,
    F: Fn(&mut W, u64, &mut [f64]) -> Result<()> + Sync,
{
    if samples == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let mut shift = vec![0.0; width];
    {
        let mut ws = init();
        for s in 0..samples.min(16) as u64 {
            match f(&mut ws, s, &mut shift) {
                Ok(()) => break,
                Err(Error::Divergence { .. }) => shift.fill(0.0),
                Err(e) => return Err(e),
            }
        }
    }
    let blocks = samples.div_ceil(BLOCK);
    let partials: Vec<Partial> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut ws = init();
            let mut out = vec![0.0; width];
            let mut p = Partial {
                used: 0,
                aborted: 0,
                sum: vec![Neumaier::default(); width],
                sumsq: vec![Neumaier::default(); width],
                error: None,
            };
            for s in b * BLOCK..((b + 1) * BLOCK).min(samples) {
                match f(&mut ws, s as u64, &mut out) {
                    Ok(()) => {
                        p.used += 1;
                        for ((v, sh), (a, q)) in out.iter().zip(&shift).zip(p.sum.iter_mut().zip(p.sumsq.iter_mut())) {
                            let y = v - sh;
                            a.add(y);
                            q.add(y * y);
                        }
                    }
                    Err(Error::Divergence { .. }) => p.aborted += 1,
                    Err(e) => {
                        p.error = Some(e);
                        break;
                    }
                }
            }
            p
        })
        .collect();

    let mut used = 0;
    let mut aborted = 0;
    let mut sum = vec![Neumaier::default(); width];
    let mut sumsq = vec![Neumaier::default(); width];
    for p in partials {
        if let Some(e) = p.error {
            return Err(e);
        }
        used += p.used;
        aborted += p.aborted;
        for i in 0..width {
            sum[i].merge(&p.sum[i]);
            sumsq[i].merge(&p.sumsq[i]);
        }
    }
    if used == 0 {
        return Err(Error::AllSamplesAborted { samples });
    }
    let n = used as f64;
    let mut mean = Vec::with_capacity(width);
    let mut std_error = Vec::with_capacity(width);
    for i in 0..width {
        let s = sum[i].value();
        let m = s / n;
        mean.push(shift[i] + m);
        let var = if used > 1 { ((sumsq[i].value() - s * m) / (n - 1.0)).max(0.0) } else { 0.0 };
        std_error.push((var / n).sqrt());
    }
    Ok(McStats { mean, std_error, used, aborted })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = Neumaier::default();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn constant_summand_has_zero_error() {
        let st = monte_carlo(1000, 2, || (), |_, _, out| {
            out.copy_from_slice(&[0.1, -3.7]);
            Ok(())
        })
        .unwrap();
        assert_eq!(st.std_error, vec![0.0, 0.0]);
        assert!((st.mean[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn known_mean_and_error() {
        // Summands 0, 1, …, 9: mean 4.5, sample variance 55/6.
        let st = monte_carlo(10, 1, || (), |_, s, out| {
            out[0] = s as f64;
            Ok(())
        })
        .unwrap();
        assert!((st.mean[0] - 4.5).abs() < 1e-14);
        assert!((st.std_error[0] - (55.0f64 / 6.0 / 10.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn divergent_samples_are_counted() {
        let st = monte_carlo(600, 1, || (), |_, s, out| {
            if s % 3 == 0 {
                return Err(Error::Divergence { sample: s, step: 1 });
            }
            out[0] = 1.0;
            Ok(())
        })
        .unwrap();
        assert_eq!((st.used, st.aborted), (400, 200));
    }

    #[test]
    fn all_divergent_is_an_error() {
        let r = monte_carlo(5, 1, || (), |_, s, _| Err(Error::Divergence { sample: s, step: 0 }));
        assert_eq!(r, Err(Error::AllSamplesAborted { samples: 5 }));
    }

    #[test]
    fn result_independent_of_pool_size() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
                monte_carlo(5000, 1, || (), |_, s, out| {
                    out[0] = ((s * 2654435761) % 1000) as f64 / 7.0;
                    Ok(())
                })
                .unwrap()
            })
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.mean[0].to_bits(), b.mean[0].to_bits());
        assert_eq!(a.std_error[0].to_bits(), b.std_error[0].to_bits());
    }
}

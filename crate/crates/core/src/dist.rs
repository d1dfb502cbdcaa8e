//! Policy distributions: categorical and diagonal Gaussian.
//!
//! These carry the controller's target distribution `P` and the actor's
//! proposal `Q` at a given state. All information quantities are in bits
//! (base-2 logs) so they line up with the per-step communication
//! accounting. Sampling is a pure function of a [`StreamKey`] following the
//! draw-index convention in `docs/prng-test-vectors.md`: draw `j` of a base
//! key uses `counter = (base.counter << 32) | j`.

use crate::prng::{uniform64, StreamKey};
use thiserror::Error;

/// Probability floor applied to categorical entries at construction.
/// Guarantees finite KL divergences and finite importance ratios in the
/// codec; softmax outputs are positive anyway, the floor only guards
/// numerics.
pub const EPS_FLOOR: f64 = 1e-6;

/// Clamp range for Gaussian standard deviations.
pub const STD_MIN: f64 = 1e-4;
pub const STD_MAX: f64 = 1e3;

const LN_2: f64 = std::f64::consts::LN_2;
const TAU: f64 = std::f64::consts::TAU;

#[derive(Debug, Error, PartialEq)]
pub enum DistError {
    #[error("probability vector must be non-empty, finite and non-negative")]
    InvalidProbs,
    #[error("mean/std dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("action {0} out of support (|A| = {1})")]
    OutOfSupport(usize, usize),
    #[error("distribution families differ")]
    FamilyMismatch,
}

/// An action: a category index or a real vector.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

impl Action {
    pub fn as_discrete(&self) -> Option<usize> {
        match self {
            Action::Discrete(a) => Some(*a),
            Action::Continuous(_) => None,
        }
    }

    pub fn as_continuous(&self) -> Option<&[f64]> {
        match self {
            Action::Discrete(_) => None,
            Action::Continuous(v) => Some(v),
        }
    }
}

/// Finite distribution over `|A|` actions.
///
/// Construction clamps entries to [`EPS_FLOOR`] and renormalizes, so KL
/// divergences against any other categorical of the same arity stay finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    probs: Vec<f64>,
}

impl Categorical {
    pub fn new(mut probs: Vec<f64>) -> Result<Self, DistError> {
        if probs.is_empty() || probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(DistError::InvalidProbs);
        }
        for p in probs.iter_mut() {
            *p = p.max(EPS_FLOOR);
        }
        let sum: f64 = probs.iter().sum();
        if !sum.is_finite() || sum <= 0.0 {
            return Err(DistError::InvalidProbs);
        }
        for p in probs.iter_mut() {
            *p /= sum;
            // renormalization can push a floored entry marginally below the
            // floor; re-clamping leaves the sum within |A| * EPS_FLOOR^2 of 1
            *p = p.max(EPS_FLOOR);
        }
        Ok(Categorical { probs })
    }

    /// Uniform distribution over `n` actions.
    pub fn uniform(n: usize) -> Self {
        Categorical::new(vec![1.0 / n as f64; n]).expect("uniform is valid")
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Independent Gaussian per action dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussian {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self, DistError> {
        if mean.len() != std.len() {
            return Err(DistError::DimMismatch(mean.len(), std.len()));
        }
        if mean.is_empty()
            || mean.iter().any(|m| !m.is_finite())
            || std.iter().any(|s| !s.is_finite())
        {
            return Err(DistError::InvalidProbs);
        }
        let std = std.into_iter().map(|s| s.clamp(STD_MIN, STD_MAX)).collect();
        Ok(DiagGaussian { mean, std })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Either policy family behind one interface.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Categorical(Categorical),
    DiagGaussian(DiagGaussian),
}

impl From<Categorical> for Distribution {
    fn from(c: Categorical) -> Self {
        Distribution::Categorical(c)
    }
}

impl From<DiagGaussian> for Distribution {
    fn from(g: DiagGaussian) -> Self {
        Distribution::DiagGaussian(g)
    }
}

impl Distribution {
    /// Log-probability (categorical) or log-density (Gaussian) of `x`, in
    /// bits.
    pub fn log_prob(&self, x: &Action) -> Result<f64, DistError> {
        match (self, x) {
            (Distribution::Categorical(c), Action::Discrete(a)) => {
                if *a >= c.probs.len() {
                    return Err(DistError::OutOfSupport(*a, c.probs.len()));
                }
                Ok(c.probs[*a].log2())
            }
            (Distribution::DiagGaussian(g), Action::Continuous(x)) => {
                if x.len() != g.mean.len() {
                    return Err(DistError::DimMismatch(x.len(), g.mean.len()));
                }
                let nats: f64 = g
                    .mean
                    .iter()
                    .zip(&g.std)
                    .zip(x)
                    .map(|((m, s), xi)| {
                        let z = (xi - m) / s;
                        -0.5 * z * z - s.ln() - 0.5 * TAU.ln()
                    })
                    .sum();
                Ok(nats / LN_2)
            }
            _ => Err(DistError::FamilyMismatch),
        }
    }

    /// KL divergence `D(P || Q)` in bits. Finite for any two constructed
    /// values of the same family and dimension.
    pub fn kl(&self, q: &Distribution) -> Result<f64, DistError> {
        match (self, q) {
            (Distribution::Categorical(p), Distribution::Categorical(q)) => {
                if p.probs.len() != q.probs.len() {
                    return Err(DistError::DimMismatch(p.probs.len(), q.probs.len()));
                }
                Ok(p.probs
                    .iter()
                    .zip(&q.probs)
                    .map(|(pi, qi)| pi * (pi / qi).log2())
                    .sum())
            }
            (Distribution::DiagGaussian(p), Distribution::DiagGaussian(q)) => {
                if p.dim() != q.dim() {
                    return Err(DistError::DimMismatch(p.dim(), q.dim()));
                }
                let nats: f64 = p
                    .mean
                    .iter()
                    .zip(&p.std)
                    .zip(q.mean.iter().zip(&q.std))
                    .map(|((m1, s1), (m2, s2))| {
                        let var_ratio = (s1 / s2) * (s1 / s2);
                        let md = (m1 - m2) / s2;
                        0.5 * (var_ratio + md * md - 1.0) + (s2 / s1).ln()
                    })
                    .sum();
                Ok(nats / LN_2)
            }
            _ => Err(DistError::FamilyMismatch),
        }
    }

    /// Shannon entropy (categorical) or differential entropy (Gaussian), in
    /// bits.
    pub fn entropy(&self) -> f64 {
        match self {
            Distribution::Categorical(c) => -c.probs.iter().map(|p| p * p.log2()).sum::<f64>(),
            Distribution::DiagGaussian(g) => g
                .std
                .iter()
                .map(|s| 0.5 * (TAU * std::f64::consts::E * s * s).log2())
                .sum(),
        }
    }

    /// Deterministic sample. Categorical: inverse-CDF scan in index order
    /// from one uniform. Gaussian: per-dimension Box–Muller from two
    /// uniforms at draw indices `2k` and `2k + 1`.
    pub fn sample(&self, key: StreamKey) -> Action {
        debug_assert!(
            key.counter < (1 << 32),
            "sampling composes draw indices into the low counter bits"
        );
        let draw = |j: u64| uniform64(key.with_counter((key.counter << 32) | j));
        match self {
            Distribution::Categorical(c) => {
                let u = draw(0);
                let mut cum = 0.0;
                for (i, p) in c.probs.iter().enumerate() {
                    cum += p;
                    if u < cum {
                        return Action::Discrete(i);
                    }
                }
                Action::Discrete(c.probs.len() - 1)
            }
            Distribution::DiagGaussian(g) => {
                let x = g
                    .mean
                    .iter()
                    .zip(&g.std)
                    .enumerate()
                    .map(|(k, (m, s))| {
                        let u1 = draw(2 * k as u64);
                        let u2 = draw(2 * k as u64 + 1);
                        let z = (-2.0 * (1.0 - u1).ln()).sqrt() * (TAU * u2).cos();
                        m + s * z
                    })
                    .collect();
                Action::Continuous(x)
            }
        }
    }

    /// Highest-probability action (categorical) or the mean (Gaussian).
    pub fn mode(&self) -> Action {
        match self {
            Distribution::Categorical(c) => {
                let (i, _) = c
                    .probs
                    .iter()
                    .enumerate()
                    .max_by(|(_, a), (_, b)| a.total_cmp(b))
                    .expect("non-empty");
                Action::Discrete(i)
            }
            Distribution::DiagGaussian(g) => Action::Continuous(g.mean.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prng::Purpose;

    fn keyc(counter: u64) -> StreamKey {
        StreamKey::new(11, Purpose::ActionSample).with_counter(counter)
    }

    #[test]
    fn categorical_log_prob() {
        let d: Distribution = Categorical::new(vec![0.5, 0.5]).unwrap().into();
        assert_eq!(d.log_prob(&Action::Discrete(0)).unwrap(), -1.0);
    }

    #[test]
    fn gaussian_log_prob_standard_normal_at_zero() {
        let d: Distribution = DiagGaussian::new(vec![0.0], vec![1.0]).unwrap().into();
        // direct evaluation of the density formula
        let expected = (1.0 / TAU.sqrt()).log2();
        let got = d.log_prob(&Action::Continuous(vec![0.0])).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        assert!((got - -1.3257).abs() < 1e-4);
    }

    #[test]
    fn floored_entry_log_prob() {
        let d: Distribution = Categorical::new(vec![1.0 - EPS_FLOOR, EPS_FLOOR])
            .unwrap()
            .into();
        let got = d.log_prob(&Action::Discrete(1)).unwrap();
        assert!((got - EPS_FLOOR.log2()).abs() < 1e-3);
        assert!((got - -19.93).abs() < 0.01);
    }

    #[test]
    fn construction_enforces_floor_and_normalization() {
        let c = Categorical::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert!(c.probs().iter().all(|&p| p >= EPS_FLOOR));
        let sum: f64 = c.probs().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);

        let c = Categorical::new(vec![2.0, 2.0]).unwrap();
        assert_eq!(c.probs(), &[0.5, 0.5]);

        assert!(Categorical::new(vec![]).is_err());
        assert!(Categorical::new(vec![0.5, -0.1]).is_err());
        assert!(Categorical::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn kl_zero_for_identical() {
        let p: Distribution = Categorical::new(vec![0.2, 0.3, 0.5]).unwrap().into();
        assert!(p.kl(&p).unwrap().abs() < 1e-12);
        let g: Distribution = DiagGaussian::new(vec![1.0, -2.0], vec![0.5, 2.0])
            .unwrap()
            .into();
        assert!(g.kl(&g).unwrap().abs() < 1e-12);
    }

    #[test]
    fn kl_categorical_direct_summation() {
        let p: Distribution = Categorical::new(vec![0.75, 0.25]).unwrap().into();
        let q: Distribution = Categorical::new(vec![0.5, 0.5]).unwrap().into();
        // oracle: direct summation
        let expected = 0.75 * (0.75f64 / 0.5).log2() + 0.25 * (0.25f64 / 0.5).log2();
        let got = p.kl(&q).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.18872).abs() < 1e-5);
    }

    #[test]
    fn kl_gaussian_closed_form() {
        let p: Distribution = DiagGaussian::new(vec![1.0], vec![1.0]).unwrap().into();
        let q: Distribution = DiagGaussian::new(vec![0.0], vec![1.0]).unwrap().into();
        let got = p.kl(&q).unwrap();
        assert!((got - 0.5 / LN_2).abs() < 1e-12);
        assert!((got - 0.72135).abs() < 1e-5);
    }

    #[test]
    fn kl_family_mismatch() {
        let p: Distribution = Categorical::uniform(2).into();
        let g: Distribution = DiagGaussian::new(vec![0.0], vec![1.0]).unwrap().into();
        assert_eq!(p.kl(&g).unwrap_err(), DistError::FamilyMismatch);
    }

    #[test]
    fn entropy_values() {
        let u: Distribution = Categorical::uniform(4).into();
        assert!((u.entropy() - 2.0).abs() < 1e-12);

        let near_point: Distribution = Categorical::new(vec![1.0 - EPS_FLOOR, EPS_FLOOR])
            .unwrap()
            .into();
        // direct summation oracle
        let p = 1.0 - EPS_FLOOR;
        let expected = -(p * p.log2() + EPS_FLOOR * EPS_FLOOR.log2());
        assert!((near_point.entropy() - expected).abs() < 1e-12);
        assert!((near_point.entropy() - 2.1e-5).abs() < 1e-6);

        let g: Distribution = DiagGaussian::new(vec![0.0], vec![1.0]).unwrap().into();
        let expected = 0.5 * (TAU * std::f64::consts::E).log2();
        assert!((g.entropy() - expected).abs() < 1e-12);
        assert!((g.entropy() - 2.0471).abs() < 1e-4);
    }

    #[test]
    fn entropy_plus_kl_to_uniform_is_log_arity() {
        for probs in [vec![0.75, 0.25], vec![0.1, 0.2, 0.3, 0.4], vec![0.9, 0.05, 0.05]] {
            let n = probs.len();
            let p: Distribution = Categorical::new(probs).unwrap().into();
            let u: Distribution = Categorical::uniform(n).into();
            let lhs = p.entropy() + p.kl(&u).unwrap();
            assert!(
                (lhs - (n as f64).log2()).abs() < 1e-9,
                "identity violated: {lhs} vs log2({n})"
            );
        }
    }

    #[test]
    fn near_point_mass_sampling() {
        let d: Distribution = Categorical::new(vec![1.0 - EPS_FLOOR, EPS_FLOOR])
            .unwrap()
            .into();
        for c in 0..1000 {
            assert_eq!(d.sample(keyc(c)), Action::Discrete(0));
        }
    }

    #[test]
    fn categorical_sampling_frequency() {
        let d: Distribution = Categorical::new(vec![0.5, 0.5]).unwrap().into();
        let n = 100_000;
        let zeros = (0..n)
            .filter(|&c| d.sample(keyc(c)) == Action::Discrete(0))
            .count();
        let freq = zeros as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.005, "frequency {freq}");
    }

    #[test]
    fn gaussian_sampling_moments() {
        let d: Distribution = DiagGaussian::new(vec![0.0], vec![1.0]).unwrap().into();
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|c| d.sample(keyc(c)).as_continuous().unwrap()[0])
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let d: Distribution = DiagGaussian::new(vec![1.0, 2.0], vec![0.3, 0.7])
            .unwrap()
            .into();
        assert_eq!(d.sample(keyc(5)), d.sample(keyc(5)));
        assert_ne!(d.sample(keyc(5)), d.sample(keyc(6)));
    }

    /// Empirical mean log-likelihood of samples should sit near -entropy
    /// (within 3 standard errors), for both families.
    #[test]
    fn sample_respects_log_prob() {
        let dists: Vec<Distribution> = vec![
            Categorical::new(vec![0.6, 0.3, 0.1]).unwrap().into(),
            DiagGaussian::new(vec![0.5, -1.0], vec![0.8, 1.5])
                .unwrap()
                .into(),
        ];
        let n = 10_000;
        for d in dists {
            let lls: Vec<f64> = (0..n)
                .map(|c| d.log_prob(&d.sample(keyc(c))).unwrap())
                .collect();
            let mean = lls.iter().sum::<f64>() / n as f64;
            let var = lls.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / n as f64;
            let se = (var / n as f64).sqrt();
            let expected = -d.entropy();
            assert!(
                (mean - expected).abs() < 3.0 * se + 1e-9,
                "mean ll {mean} vs -H {expected} (se {se})"
            );
        }
    }

    #[test]
    fn mode_picks_argmax() {
        let d: Distribution = Categorical::new(vec![0.2, 0.5, 0.3]).unwrap().into();
        assert_eq!(d.mode(), Action::Discrete(1));
    }
}

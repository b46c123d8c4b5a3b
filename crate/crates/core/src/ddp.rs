//! Kernel-smoothed Dirichlet-process posterior over an open-ended set of
//! waveform labels, indexed by a scalar belief feature.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::forward::{ActionLabel, GaussianBelief};

/// Scalar summary of a belief used as the kernel covariate.
pub type BeliefFeature = f64;

/// Injectable belief-to-feature map.
pub type FeatureMap = fn(&GaussianBelief) -> BeliefFeature;

/// Default feature: the trace of the (predicted) covariance.
pub fn trace_feature(belief: &GaussianBelief) -> BeliefFeature {
    belief.trace()
}

/// Beyond this many length scales the squared-exponential weight is exactly
/// zero in double precision (`exp(-745.2)` underflows).
const KERNEL_SUPPORT: f64 = 38.62;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub signal_var: f64,
    pub length_scale: f64,
}

impl KernelParams {
    pub fn new(signal_var: f64, length_scale: f64) -> Result<Self> {
        let p = KernelParams {
            signal_var,
            length_scale,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.signal_var.is_finite() && self.signal_var > 0.0, || {
            format!("kernel signal variance must be positive, got {}", self.signal_var)
        })?;
        ensure(self.length_scale.is_finite() && self.length_scale > 0.0, || {
            format!("kernel length scale must be positive, got {}", self.length_scale)
        })
    }

    fn support(&self) -> f64 {
        KERNEL_SUPPORT * self.length_scale
    }
}

pub fn kernel_weight(f: BeliefFeature, f2: BeliefFeature, p: &KernelParams) -> f64 {
    let d = f - f2;
    p.signal_var * (-(d * d) / (2.0 * p.length_scale * p.length_scale)).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub feature: BeliefFeature,
    pub action: ActionLabel,
}

/// Uniform base measure over at most `universe_cap` labels.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseMeasure {
    universe_cap: usize,
    revealed: Vec<ActionLabel>,
}

impl BaseMeasure {
    pub fn new(universe_cap: usize) -> Result<Self> {
        ensure(universe_cap >= 1, || "universe cap must be at least 1".to_string())?;
        Ok(BaseMeasure {
            universe_cap,
            revealed: Vec::new(),
        })
    }

    pub fn universe_cap(&self) -> usize {
        self.universe_cap
    }

    /// Labels seen so far, in order of first appearance.
    pub fn revealed(&self) -> &[ActionLabel] {
        &self.revealed
    }

    pub fn atom_mass(&self) -> f64 {
        1.0 / self.universe_cap as f64
    }

    pub fn unseen_atoms(&self) -> usize {
        self.universe_cap - self.revealed.len()
    }

    pub fn unseen_mass(&self) -> f64 {
        self.unseen_atoms() as f64 / self.universe_cap as f64
    }

    fn index_of(&self, a: ActionLabel) -> Option<usize> {
        self.revealed.iter().position(|r| *r == a)
    }
}

/// Probabilities of revealed labels plus the aggregate mass of all labels
/// not yet seen, spread evenly over `unseen_atoms` hypothesized atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyDistribution {
    pub probs: Vec<(ActionLabel, f64)>,
    pub unseen_prob: f64,
    pub unseen_atoms: usize,
}

impl PolicyDistribution {
    pub fn total(&self) -> f64 {
        self.probs.iter().map(|(_, p)| p).sum::<f64>() + self.unseen_prob
    }

    /// Mass of one label; an unrevealed label gets one unseen atom's share.
    pub fn prob(&self, a: ActionLabel) -> f64 {
        match self.probs.iter().find(|(l, _)| *l == a) {
            Some((_, p)) => *p,
            None => self.unseen_atom_prob(),
        }
    }

    pub fn unseen_atom_prob(&self) -> f64 {
        if self.unseen_atoms == 0 {
            0.0
        } else {
            self.unseen_prob / self.unseen_atoms as f64
        }
    }

    /// Masses of `labels` renormalized to sum to one.
    pub fn restricted_to<const M: usize>(&self, labels: &[ActionLabel; M]) -> [f64; M] {
        let mut out = labels.map(|a| self.prob(a));
        let s: f64 = out.iter().sum();
        if s > 0.0 {
            out.iter_mut().for_each(|p| *p /= s);
        }
        out
    }

    /// Shannon entropy in nats over revealed atoms and the individual unseen
    /// atoms, with `0·ln 0 = 0`.
    pub fn entropy(&self) -> f64 {
        let h = |p: f64| if p > 0.0 { -p * p.ln() } else { 0.0 };
        let revealed: f64 = self.probs.iter().map(|(_, p)| h(*p)).sum();
        revealed + self.unseen_atoms as f64 * h(self.unseen_atom_prob())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DdpPosterior {
    pub alpha: f64,
    pub measure: PolicyDistribution,
}

#[derive(Clone, Debug, PartialEq)]
struct Bin {
    feature: BeliefFeature,
    /// Indexed like `BaseMeasure::revealed`; missing tail entries are zero.
    counts: Vec<u32>,
    total: u32,
}

/// Per-atom kernel mass at one query feature.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSums {
    pub total: f64,
    pub per_atom: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DdpStatsDoc", into = "DdpStatsDoc")]
pub struct DdpStats {
    alpha0: f64,
    base: BaseMeasure,
    kernel: KernelParams,
    history: Vec<Observation>,
    /// History grouped by exact feature value, sorted by feature.
    bins: Vec<Bin>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DdpStatsDoc {
    alpha0: f64,
    universe_cap: usize,
    kernel: KernelParams,
    history: Vec<Observation>,
}

impl TryFrom<DdpStatsDoc> for DdpStats {
    type Error = Error;

    fn try_from(doc: DdpStatsDoc) -> Result<Self> {
        let mut stats = DdpStats::new(doc.alpha0, doc.universe_cap, doc.kernel)?;
        for o in doc.history {
            stats.record_observation(o.feature, o.action)?;
        }
        Ok(stats)
    }
}

impl From<DdpStats> for DdpStatsDoc {
    fn from(s: DdpStats) -> Self {
        DdpStatsDoc {
            alpha0: s.alpha0,
            universe_cap: s.base.universe_cap,
            kernel: s.kernel,
            history: s.history,
        }
    }
}

impl DdpStats {
    pub fn new(alpha0: f64, universe_cap: usize, kernel: KernelParams) -> Result<Self> {
        ensure(alpha0.is_finite() && alpha0 > 0.0, || {
            format!("concentration must be positive, got {alpha0}")
        })?;
        kernel.validate()?;
        Ok(DdpStats {
            alpha0,
            base: BaseMeasure::new(universe_cap)?,
            kernel,
            history: Vec::new(),
            bins: Vec::new(),
        })
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn base(&self) -> &BaseMeasure {
        &self.base
    }

    pub fn kernel(&self) -> &KernelParams {
        &self.kernel
    }

    pub fn history(&self) -> &[Observation] {
        &self.history
    }

    /// Kernel mass of the history at `f`, split by revealed atom.
    ///
    /// Only bins within the kernel's numerical support are visited; the
    /// skipped terms are exactly zero, so the result equals the full sum.
    pub fn kernel_sums(&self, f: BeliefFeature) -> KernelSums {
        let mut per_atom = vec![0.0; self.base.revealed.len()];
        let mut total = 0.0;
        let reach = self.kernel.support();
        let start = self.bins.partition_point(|b| b.feature < f - reach);
        for bin in self.bins[start..].iter().take_while(|b| b.feature <= f + reach) {
            let w = kernel_weight(f, bin.feature, &self.kernel);
            total += w * bin.total as f64;
            for (acc, c) in per_atom.iter_mut().zip(&bin.counts) {
                *acc += w * *c as f64;
            }
        }
        KernelSums { total, per_atom }
    }

    fn atom_prob(&self, alpha: f64, kernel_mass: f64) -> f64 {
        (self.alpha0 * self.base.atom_mass() + kernel_mass) / alpha
    }

    pub fn posterior_at(&self, f: BeliefFeature) -> DdpPosterior {
        let sums = self.kernel_sums(f);
        let alpha = self.alpha0 + sums.total;
        let probs = self
            .base
            .revealed
            .iter()
            .zip(&sums.per_atom)
            .map(|(a, s)| (*a, self.atom_prob(alpha, *s)))
            .collect();
        DdpPosterior {
            alpha,
            measure: PolicyDistribution {
                probs,
                unseen_prob: self.alpha0 * self.base.unseen_mass() / alpha,
                unseen_atoms: self.base.unseen_atoms(),
            },
        }
    }

    /// Predictive probability that the next label at `f` is `a`.
    ///
    /// For `a` outside `revealed` this is the mass of a single unseen atom.
    pub fn predictive_prob(&self, f: BeliefFeature, a: ActionLabel, revealed: &[ActionLabel]) -> f64 {
        let sums = self.kernel_sums(f);
        let alpha = self.alpha0 + sums.total;
        if revealed.contains(&a) {
            let s = self.base.index_of(a).map(|i| sums.per_atom[i]).unwrap_or(0.0);
            self.atom_prob(alpha, s)
        } else {
            self.alpha0 * self.base.atom_mass() / alpha
        }
    }

    pub fn record_observation(&mut self, f: BeliefFeature, a: ActionLabel) -> Result<()> {
        ensure(f.is_finite(), || format!("belief feature must be finite, got {f}"))?;
        let atom = match self.base.index_of(a) {
            Some(i) => i,
            None => {
                if self.base.revealed.len() + 1 > self.base.universe_cap {
                    return Err(Error::UniverseExhausted {
                        cap: self.base.universe_cap,
                    });
                }
                self.base.revealed.push(a);
                self.base.revealed.len() - 1
            }
        };
        let pos = self.bins.partition_point(|b| b.feature < f);
        if self.bins.get(pos).is_none_or(|b| b.feature != f) {
            self.bins.insert(
                pos,
                Bin {
                    feature: f,
                    counts: Vec::new(),
                    total: 0,
                },
            );
        }
        let bin = &mut self.bins[pos];
        if bin.counts.len() <= atom {
            bin.counts.resize(atom + 1, 0);
        }
        bin.counts[atom] += 1;
        bin.total += 1;
        self.history.push(Observation { feature: f, action: a });
        Ok(())
    }

    pub fn dp_variance_at(&self, f: BeliefFeature, a: ActionLabel) -> f64 {
        let post = self.posterior_at(f);
        let h = post.measure.prob(a);
        h * (1.0 - h) / (post.alpha + 1.0)
    }
}

/// `n` draws from `Dirichlet(alpha·measure)`; zero-mass atoms stay at zero.
pub fn sample_policy_simplex<R: Rng + ?Sized>(
    alpha: f64,
    measure: &[f64],
    rng: &mut R,
    n: usize,
) -> Result<Vec<Vec<f64>>> {
    ensure(alpha.is_finite() && alpha > 0.0, || format!("alpha must be positive, got {alpha}"))?;
    ensure(measure.len() >= 2, || "simplex needs at least two atoms".to_string())?;
    ensure(measure.iter().all(|m| m.is_finite() && *m >= 0.0), || {
        "measure entries must be non-negative".to_string()
    })?;
    let total: f64 = measure.iter().sum();
    ensure((total - 1.0).abs() <= 1e-9, || format!("measure sums to {total}"))?;
    let gammas: Vec<Option<Gamma<f64>>> = measure
        .iter()
        .map(|m| {
            let shape = alpha * m;
            (shape > 0.0).then(|| Gamma::new(shape, 1.0).expect("positive shape"))
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let draw: Vec<f64> = gammas
            .iter()
            .map(|g| g.as_ref().map_or(0.0, |g| g.sample(rng)))
            .collect();
        let s: f64 = draw.iter().sum();
        if s > 0.0 && s.is_finite() {
            out.push(draw.into_iter().map(|v| v / s).collect());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_relative_eq;
    use num_rational::Ratio;
    use proptest::prelude::*;

    const U1: ActionLabel = ActionLabel(1);
    const U2: ActionLabel = ActionLabel(2);
    const U3: ActionLabel = ActionLabel(3);

    fn stats(alpha0: f64, cap: usize, ell: f64) -> DdpStats {
        DdpStats::new(alpha0, cap, KernelParams::new(1.0, ell).unwrap()).unwrap()
    }

    #[test]
    fn kernel_values() {
        let p = KernelParams::new(1.0, 1.0).unwrap();
        assert_eq!(kernel_weight(0.3, 0.3, &p), 1.0);
        assert_relative_eq!(kernel_weight(0.0, 1.0, &p), (-0.5f64).exp());
        assert_relative_eq!(kernel_weight(2.0, 1.0, &p), 0.60653, epsilon = 1e-5);
        let p2 = KernelParams::new(2.5, 0.1).unwrap();
        assert_eq!(kernel_weight(0.4, 0.4, &p2), 2.5);
        assert!(KernelParams::new(1.0, 0.0).is_err());
        assert!(KernelParams::new(0.0, 1.0).is_err());
    }

    #[test]
    fn kernel_support_cutoff_is_exact() {
        let p = KernelParams::new(1.0, 1e-4).unwrap();
        assert_eq!(kernel_weight(0.0, p.support(), &p), 0.0);
        assert!(kernel_weight(0.0, 38.5e-4, &p) > 0.0);
    }

    #[test]
    fn empty_history_recovers_prior() {
        let s = stats(7.0, 4, 0.1);
        let post = s.posterior_at(0.5);
        assert_eq!(post.alpha, 7.0);
        assert!(post.measure.probs.is_empty());
        assert_eq!(post.measure.unseen_prob, 1.0);
        assert_eq!(post.measure.unseen_atoms, 4);
        assert_eq!(post.measure.prob(U1), 0.25);
    }

    #[test]
    fn single_observation_urn() {
        let mut s = stats(1.0, 3, 0.5);
        s.record_observation(0.3, U1).unwrap();
        let post = s.posterior_at(0.3);
        assert_eq!(post.alpha, 2.0);
        assert_relative_eq!(post.measure.prob(U1), 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(s.predictive_prob(0.3, U1, &[U1]), 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(s.predictive_prob(0.3, U2, &[U1]), 1.0 / 6.0, epsilon = 1e-15);
        assert_relative_eq!(post.measure.total(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn prior_predictive_is_uniform_over_atoms() {
        let s = stats(20.0, 3, 1e-4);
        for a in [U1, U2, U3] {
            assert_relative_eq!(s.predictive_prob(0.2, a, &[]), 1.0 / 3.0);
        }
    }

    #[test]
    fn locality_far_from_history() {
        let ell = 0.01;
        let mut s = stats(5.0, 8, ell);
        for _ in 0..50 {
            s.record_observation(0.2, U1).unwrap();
        }
        let post = s.posterior_at(0.2 + 10.0 * ell);
        assert!((post.alpha - 5.0).abs() < 1e-6);
        assert!((post.measure.prob(U1) - 1.0 / 8.0).abs() < 1e-6);
        assert!((s.predictive_prob(0.2 + 10.0 * ell, U1, &[U1]) - 0.125).abs() < 1e-6);
    }

    #[test]
    fn repeated_observation_is_monotone() {
        let mut s = stats(20.0, 8, 1e-3);
        let mut last = s.predictive_prob(0.4, U2, &[]);
        for _ in 0..30 {
            s.record_observation(0.4, U2).unwrap();
            let p = s.predictive_prob(0.4, U2, &[U2]);
            assert!(p > last);
            last = p;
        }
    }

    #[test]
    fn universe_cap_is_enforced() {
        let mut s = stats(1.0, 3, 0.1);
        for a in [U1, U2, U3] {
            s.record_observation(0.1, a).unwrap();
        }
        let err = s.record_observation(0.1, ActionLabel(4)).unwrap_err();
        assert!(matches!(err, Error::UniverseExhausted { cap: 3 }));
        s.record_observation(0.2, U2).unwrap();
        assert_eq!(s.history().len(), 4);
    }

    #[test]
    fn variance_values() {
        let s = stats(20.0, 3, 1e-4);
        assert_relative_eq!(s.dp_variance_at(0.2, U1), (1.0 / 3.0) * (2.0 / 3.0) / 21.0, epsilon = 1e-15);
        assert_relative_eq!(s.dp_variance_at(0.2, U1), 0.010582, epsilon = 1e-6);
        let mut v = stats(20.0, 3, 1e-4);
        let mut last = v.dp_variance_at(0.2, U1);
        for _ in 0..20 {
            v.record_observation(0.2, U1).unwrap();
            let cur = v.dp_variance_at(0.2, U1);
            assert!(cur < last);
            last = cur;
        }
        let single = stats(1.0, 1, 1.0);
        assert_eq!(single.dp_variance_at(0.0, U1), 0.0);
    }

    #[test]
    fn unseen_mass_decays_with_identical_observations() {
        let mut s = stats(20.0, 8, 1e-4);
        for a in [U1, U2, U3] {
            s.record_observation(0.2, a).unwrap();
        }
        let h0_unseen = s.base().unseen_mass();
        for n in 4..200 {
            s.record_observation(0.2, U1).unwrap();
            let unseen = s.posterior_at(0.2).measure.unseen_prob;
            assert!(unseen <= 20.0 * h0_unseen / (20.0 + n as f64) + 1e-15);
        }
    }

    /// Exact rational urn arithmetic at zero kernel distance.
    fn rational_predictive(
        alpha0: i64,
        cap: i64,
        history: &[ActionLabel],
        a: ActionLabel,
    ) -> Ratio<i64> {
        let count = history.iter().filter(|h| **h == a).count() as i64;
        (Ratio::new(alpha0, cap) + count) / (Ratio::from_integer(alpha0) + history.len() as i64)
    }

    #[test]
    fn matches_rational_urn_on_short_histories() {
        let labels = [U1, U2, U3];
        for alpha0 in [1i64, 2, 5, 20] {
            for cap in [3i64, 4, 8] {
                for len in 0..=3usize {
                    for code in 0..3usize.pow(len as u32) {
                        let history: Vec<ActionLabel> =
                            (0..len).map(|i| labels[(code / 3usize.pow(i as u32)) % 3]).collect();
                        let mut s = stats(alpha0 as f64, cap as usize, 0.05);
                        for h in &history {
                            s.record_observation(0.3, *h).unwrap();
                        }
                        for a in labels {
                            let exact = rational_predictive(alpha0, cap, &history, a);
                            let expected = *exact.numer() as f64 / *exact.denom() as f64;
                            let got = s.predictive_prob(0.3, a, s.base().revealed());
                            assert!((got - expected).abs() <= 2.0 * f64::EPSILON * expected);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn serde_round_trip_rebuilds_index() {
        let mut s = stats(3.0, 5, 0.2);
        s.record_observation(0.1, U2).unwrap();
        s.record_observation(0.5, U1).unwrap();
        s.record_observation(0.1, U2).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"universe_cap\":5"));
        let back: DdpStats = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.posterior_at(0.2), s.posterior_at(0.2));
    }

    #[test]
    fn dirichlet_moments() {
        let alpha = 12.0;
        let h = [0.5, 0.3, 0.2];
        let mut rng = substream(23, 0);
        let n = 100_000;
        let draws = sample_policy_simplex(alpha, &h, &mut rng, n).unwrap();
        for d in &draws {
            assert_relative_eq!(d.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
        for i in 0..3 {
            let mean = draws.iter().map(|d| d[i]).sum::<f64>() / n as f64;
            let var = draws.iter().map(|d| (d[i] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!((mean - h[i]).abs() < 0.01);
            let expected = h[i] * (1.0 - h[i]) / (alpha + 1.0);
            assert!((var / expected - 1.0).abs() < 0.1, "{var} vs {expected}");
        }
    }

    #[test]
    fn dirichlet_one_one_is_uniform() {
        let mut rng = substream(29, 0);
        let n = 5000;
        let mut xs: Vec<f64> = sample_policy_simplex(2.0, &[0.5, 0.5], &mut rng, n)
            .unwrap()
            .into_iter()
            .map(|d| d[0])
            .collect();
        xs.sort_by(f64::total_cmp);
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let lo = i as f64 / n as f64;
                let hi = (i + 1) as f64 / n as f64;
                (x - lo).abs().max((hi - x).abs())
            })
            .fold(0.0, f64::max);
        // Kolmogorov limit at p = 0.01 is 1.628 / sqrt(n).
        assert!(d < 1.628 / (n as f64).sqrt(), "D = {d}");
    }

    #[test]
    fn zero_mass_atoms_stay_zero() {
        let draws = sample_policy_simplex(3.0, &[0.0, 0.4, 0.6], &mut substream(1, 0), 100).unwrap();
        assert!(draws.iter().all(|d| d[0] == 0.0));
        assert!(sample_policy_simplex(3.0, &[1.0], &mut substream(1, 0), 1).is_err());
        assert!(sample_policy_simplex(0.0, &[0.5, 0.5], &mut substream(1, 0), 1).is_err());
    }

    fn arb_stats() -> impl Strategy<Value = (DdpStats, f64)> {
        (
            0.1f64..50.0,
            3usize..10,
            0.5f64..3.0,
            1e-4f64..1.0,
            proptest::collection::vec((0.0f64..2.0, 1u32..4), 0..40),
            0.0f64..2.0,
        )
            .prop_map(|(alpha0, cap, sf, ell, hist, q)| {
                let mut s = DdpStats::new(alpha0, cap, KernelParams::new(sf, ell).unwrap()).unwrap();
                for (f, a) in hist {
                    s.record_observation(f, ActionLabel(a)).unwrap();
                }
                (s, q)
            })
    }

    proptest! {
        #[test]
        fn kernel_is_symmetric(a in -5.0f64..5.0, b in -5.0f64..5.0, sf in 0.1f64..5.0, ell in 1e-3f64..3.0) {
            let p = KernelParams::new(sf, ell).unwrap();
            prop_assert_eq!(kernel_weight(a, b, &p), kernel_weight(b, a, &p));
            let w = kernel_weight(a, b, &p);
            prop_assert!((0.0..=sf).contains(&w));
        }

        #[test]
        fn predictive_normalizes((s, q) in arb_stats()) {
            let revealed = s.base().revealed().to_vec();
            let seen: f64 = revealed.iter().map(|a| s.predictive_prob(q, *a, &revealed)).sum();
            let unseen = s.base().unseen_atoms() as f64 * s.predictive_prob(q, ActionLabel(99), &revealed);
            prop_assert!((seen + unseen - 1.0).abs() < 1e-9);
            prop_assert!((s.posterior_at(q).measure.total() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn predictive_matches_posterior_measure((s, q) in arb_stats()) {
            let post = s.posterior_at(q);
            let revealed = s.base().revealed().to_vec();
            for a in &revealed {
                prop_assert_eq!(s.predictive_prob(q, *a, &revealed), post.measure.prob(*a));
            }
        }

        #[test]
        fn banded_sum_equals_full_sum((s, q) in arb_stats()) {
            let full: f64 = s.history().iter().map(|o| kernel_weight(q, o.feature, s.kernel())).sum();
            let banded = s.kernel_sums(q).total;
            prop_assert!((full - banded).abs() <= 1e-12 * (1.0 + full));
        }
    }
}

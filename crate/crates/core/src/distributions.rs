//! Reference distributions: isotropic Gaussian samples, the closed-form
//! sliced distance between Gaussian mean shifts, and the `J_alpha` tail
//! functional.

use alloc::format;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::geometry::SampleMatrix;
use crate::normal;
use crate::rng::substream;

/// `N(mean, variance * I_d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    mean: Vec<f64>,
    variance: f64,
}

impl GaussianSpec {
    pub fn new(mean: Vec<f64>, variance: f64) -> Result<Self> {
        if mean.is_empty() {
            return Err(invalid("Gaussian mean must have dimension >= 1"));
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(invalid(format!("variance must be positive and finite, got {variance}")));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(invalid("Gaussian mean must be finite"));
        }
        Ok(Self { mean, variance })
    }

    /// `N(0, I_d)`.
    pub fn standard(d: usize) -> Result<Self> {
        Self::new(alloc::vec![0.0; d], 1.0)
    }

    /// `N(shift * e_1, I_d)`.
    pub fn shifted_first_axis(d: usize, shift: f64) -> Result<Self> {
        let mut mean = alloc::vec![0.0; d];
        if let Some(first) = mean.first_mut() {
            *first = shift;
        }
        Self::new(mean, 1.0)
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn d(&self) -> usize {
        self.mean.len()
    }
}

/// `n` i.i.d. rows `mean + sigma z`, one generator per `(seed, stream_id)`.
pub fn sample_gaussian(spec: &GaussianSpec, n: usize, seed: u64, stream_id: u64) -> Result<SampleMatrix> {
    let sigma = libm::sqrt(spec.variance);
    let mut rng = substream(seed, stream_id, 0);
    let mut data = Vec::with_capacity(n * spec.d());
    for _ in 0..n {
        for &mu in &spec.mean {
            let z: f64 = StandardNormal.sample(&mut rng);
            data.push(mu + sigma * z);
        }
    }
    SampleMatrix::new(data, n, spec.d())
}

/// `SW_2^2` between `N(a, I)` and `N(a + delta, I)`: every projection is a
/// pure shift by `<theta, delta>`, and `E[<theta, delta>^2] = |delta|^2 / d`.
pub fn gaussian_sw2_meanshift(delta: &[f64]) -> Result<f64> {
    if delta.is_empty() {
        return Err(invalid("mean shift must have dimension >= 1"));
    }
    let sq: f64 = delta.iter().map(|v| v * v).sum();
    Ok(sq / delta.len() as f64)
}

/// `t -> f(F^{-1}(t))`, the density evaluated at the quantile function.
pub trait QuantileDensity {
    fn at(&self, t: f64) -> f64;

    /// Value at `t = 1 - tail`. Override when `1 - tail` is not representable
    /// (tails below machine epsilon).
    fn at_upper(&self, tail: f64) -> f64 {
        self.at(1.0 - tail)
    }
}

impl<F: Fn(f64) -> f64> QuantileDensity for F {
    fn at(&self, t: f64) -> f64 {
        self(t)
    }
}

/// `f(F^{-1}(t))` for the standard normal, symmetric in `t <-> 1 - t`.
#[derive(Debug, Clone, Copy, Default)]
pub struct StandardNormalQuantileDensity;

impl QuantileDensity for StandardNormalQuantileDensity {
    fn at(&self, t: f64) -> f64 {
        if t <= 0.5 {
            normal::pdf(normal::quantile(t))
        } else {
            self.at_upper(1.0 - t)
        }
    }

    fn at_upper(&self, tail: f64) -> f64 {
        normal::pdf(normal::quantile(tail))
    }
}

/// Truncation ladder for `J_alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureConfig {
    epsilons: Vec<f64>,
    panels_per_level: usize,
    rel_tol: f64,
}

impl QuadratureConfig {
    /// `epsilons` strictly decreasing in `(0, 1/2)`, at least two of them.
    /// `panels_per_level` Simpson panels per level in `-ln t`, rounded up
    /// to an even number.
    pub fn new(epsilons: Vec<f64>, panels_per_level: usize, rel_tol: f64) -> Result<Self> {
        if epsilons.len() < 2 {
            return Err(invalid("the epsilon ladder needs at least two levels"));
        }
        if epsilons.iter().any(|&e| !(e > 0.0 && e < 0.5)) {
            return Err(invalid("every epsilon must lie in (0, 1/2)"));
        }
        if epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("epsilons must be strictly decreasing"));
        }
        if panels_per_level == 0 || !(rel_tol > 0.0) {
            return Err(invalid("need panels_per_level >= 1 and rel_tol > 0"));
        }
        let panels_per_level = panels_per_level + panels_per_level % 2;
        Ok(Self { epsilons, panels_per_level, rel_tol })
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }
}

impl Default for QuadratureConfig {
    /// `10^-2, 10^-4, ..., 10^-64`, 256 panels per level, tolerance `1e-6`.
    fn default() -> Self {
        let epsilons = (1..=32).map(|e| libm::pow(10.0, -2.0 * e as f64)).collect();
        Self { epsilons, panels_per_level: 256, rel_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convergence {
    Converged,
    /// Still moving by more than the tolerance at the end of the ladder.
    Diverging,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JAlpha {
    /// Integral over `(eps, 1 - eps)` for the last epsilon of the ladder.
    pub value: f64,
    pub status: Convergence,
    /// One truncated integral per epsilon.
    pub levels: Vec<f64>,
}

/// `J_alpha = int_0^1 (t(1-t))^{alpha/2} / f(F^{-1}(t))^alpha dt`, truncated
/// to `(eps, 1 - eps)` along the ladder.
///
/// Each half of the interval is integrated in `u = -ln t` (resp.
/// `u = -ln(1 - t)`), where the tails become smooth; the truncated values are
/// cumulative, so successive differences are exactly the added tail mass.
/// The status is `Converged` when the last step changes the value by less
/// than the relative tolerance.
pub fn j_alpha<Q: QuantileDensity + ?Sized>(density: &Q, alpha: f64, cfg: &QuadratureConfig) -> Result<JAlpha> {
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(invalid(format!("alpha must be a finite real >= 1, got {alpha}")));
    }
    let mut lower = core::f64::consts::LN_2;
    let mut total = 0.0;
    let mut levels = Vec::with_capacity(cfg.epsilons.len());
    for &eps in &cfg.epsilons {
        let upper = -libm::log(eps);
        let left = simpson(lower, upper, cfg.panels_per_level, |u| {
            let tail = libm::exp(-u);
            integrand(density.at(tail), tail, u, alpha)
        })?;
        let right = simpson(lower, upper, cfg.panels_per_level, |u| {
            let tail = libm::exp(-u);
            integrand(density.at_upper(tail), tail, u, alpha)
        })?;
        total += left + right;
        levels.push(total);
        lower = upper;
    }
    let n = levels.len();
    let step = libm::fabs(levels[n - 1] - levels[n - 2]);
    let status =
        if step < cfg.rel_tol * libm::fabs(levels[n - 1]) { Convergence::Converged } else { Convergence::Diverging };
    Ok(JAlpha { value: levels[n - 1], status, levels })
}

/// Integrand in `u`, where the tail probability is `e^{-u}`, including the
/// Jacobian `e^{-u}`. Evaluated in logs to survive extreme tails.
fn integrand(q: f64, tail: f64, u: f64, alpha: f64) -> Result<f64> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(invalid(format!("quantile density must be positive, got {q} at tail {tail:e}")));
    }
    let log_mass = -u + libm::log1p(-tail);
    Ok(libm::exp(0.5 * alpha * log_mass - alpha * libm::log(q) - u))
}

fn simpson(a: f64, b: f64, panels: usize, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let h = (b - a) / panels as f64;
    let mut acc = f(a)? + f(b)?;
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h)?;
    }
    Ok(acc * h / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sample_directions;

    #[test]
    fn spec_validation() {
        assert!(GaussianSpec::new(alloc::vec![], 1.0).is_err());
        assert!(GaussianSpec::new(alloc::vec![0.0], 0.0).is_err());
        assert!(GaussianSpec::new(alloc::vec![f64::NAN], 1.0).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_centered() {
        let spec = GaussianSpec::standard(3).unwrap();
        let a = sample_gaussian(&spec, 20_000, 99, 1).unwrap();
        assert_eq!(a, sample_gaussian(&spec, 20_000, 99, 1).unwrap());
        assert_ne!(a, sample_gaussian(&spec, 20_000, 99, 2).unwrap());
        for c in 0..3 {
            let mean = a.rows().map(|r| r[c]).sum::<f64>() / 20_000.0;
            assert!(mean.abs() <= 4.0 / libm::sqrt(20_000.0));
        }
    }

    #[test]
    fn sqrt_d_shift_has_unit_distance() {
        let d = 32;
        let spec = GaussianSpec::shifted_first_axis(d, libm::sqrt(d as f64)).unwrap();
        assert_eq!(spec.mean()[0], libm::sqrt(32.0));
        assert!(spec.mean()[1..].iter().all(|&v| v == 0.0));
        let sw = gaussian_sw2_meanshift(spec.mean()).unwrap();
        assert!((sw - 1.0).abs() < 1e-15);
        assert_eq!(gaussian_sw2_meanshift(&[0.0; 5]).unwrap(), 0.0);
    }

    #[test]
    fn meanshift_depends_only_on_norm() {
        let a = gaussian_sw2_meanshift(&[3.0, 4.0, 0.0]).unwrap();
        let b = gaussian_sw2_meanshift(&[0.0, 0.0, 5.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn meanshift_matches_sphere_monte_carlo() {
        let delta = [0.7, -1.3, 0.2, 2.1, -0.4, 0.9];
        let k = 1_000_000;
        let dirs = sample_directions(6, k, 31337, 5).unwrap();
        let vals: Vec<f64> = dirs
            .iter()
            .map(|t| {
                let p: f64 = t.iter().zip(&delta).map(|(a, b)| a * b).sum();
                p * p
            })
            .collect();
        let mean = crate::sum::mean(&vals);
        let se = libm::sqrt(crate::sum::population_variance(&vals) / k as f64);
        let exact = gaussian_sw2_meanshift(&delta).unwrap();
        assert!((mean - exact).abs() <= 3.0 * se, "mc {mean} exact {exact} se {se}");
    }

    #[test]
    fn uniform_alpha_two_is_one_sixth() {
        let r = j_alpha(&|_t: f64| 1.0, 2.0, &QuadratureConfig::default()).unwrap();
        assert_eq!(r.status, Convergence::Converged);
        assert!((r.value - 1.0 / 6.0).abs() < 1e-6, "{}", r.value);
    }

    #[test]
    fn uniform_matches_beta_function() {
        // B(a + 1, a + 1) with a = alpha / 2; alpha = 4 gives 1/30.
        let r = j_alpha(&|_t: f64| 1.0, 4.0, &QuadratureConfig::default()).unwrap();
        assert!((r.value - 1.0 / 30.0).abs() < 1e-7);
    }

    #[test]
    fn gaussian_tail_classification() {
        let cfg = QuadratureConfig::default();
        let below = j_alpha(&StandardNormalQuantileDensity, 1.5, &cfg).unwrap();
        assert_eq!(below.status, Convergence::Converged);
        assert!(below.value.is_finite() && below.value > 0.0);
        let above = j_alpha(&StandardNormalQuantileDensity, 2.5, &cfg).unwrap();
        assert_eq!(above.status, Convergence::Diverging);
        assert!(above.levels.windows(2).all(|w| w[1] > w[0]));
    }

    struct Scaled<Q>(f64, Q);

    impl<Q: QuantileDensity> QuantileDensity for Scaled<Q> {
        fn at(&self, t: f64) -> f64 {
            self.0 * self.1.at(t)
        }
        fn at_upper(&self, tail: f64) -> f64 {
            self.0 * self.1.at_upper(tail)
        }
    }

    #[test]
    fn scaling_the_density_scales_the_value() {
        let cfg = QuadratureConfig::default();
        for (alpha, c) in [(1.5, 3.0), (1.0, 1.7), (1.9, 10.0)] {
            let base = j_alpha(&StandardNormalQuantileDensity, alpha, &cfg).unwrap();
            let scaled = j_alpha(&Scaled(c, StandardNormalQuantileDensity), alpha, &cfg).unwrap();
            let expect = base.value * libm::pow(c, -alpha);
            assert!((scaled.value - expect).abs() <= 1e-9 * expect);
        }
        let u1 = j_alpha(&|_t: f64| 1.0, 2.0, &cfg).unwrap();
        let u3 = j_alpha(&|_t: f64| 3.0, 2.0, &cfg).unwrap();
        assert!((u3.value - u1.value / 9.0).abs() <= 1e-9 * u1.value);
    }

    #[test]
    fn invalid_inputs() {
        assert!(j_alpha(&|_t: f64| 1.0, 0.5, &QuadratureConfig::default()).is_err());
        assert!(j_alpha(&|_t: f64| -1.0, 2.0, &QuadratureConfig::default()).is_err());
        assert!(QuadratureConfig::new(alloc::vec![0.1], 10, 1e-6).is_err());
        assert!(QuadratureConfig::new(alloc::vec![0.1, 0.2], 10, 1e-6).is_err());
        assert!(QuadratureConfig::new(alloc::vec![0.6, 0.2], 10, 1e-6).is_err());
        assert!(QuadratureConfig::new(alloc::vec![0.1, 0.01], 10, 1e-6).is_ok());
    }
}

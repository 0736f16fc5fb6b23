use crate::error::{Error, Result};
use crate::linalg::{matmul, norm, DenseMatrix, NormKind, SYMMETRY_TOL};
use crate::scalar::Scalar;

use super::SolverReport;

/// Iterates whose Frobenius norm grows past this multiple of `‖X₀‖_F` abort
/// the run as divergent.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// Initial scaling `α` in `X₀ = α Wᵀ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NsScaling {
    /// `α = 2 / ‖W‖₂`. Contracts only when `α λ² < 2` for every eigenvalue,
    /// so it fails on matrices with `‖W‖₂ ≥ 1`.
    Paper,
    /// `α = 1 / (‖W‖₁ ‖W‖∞) ≤ 1 / ‖W‖₂²`, which always contracts for SPD `W`.
    Safe,
}

impl std::str::FromStr for NsScaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(NsScaling::Paper),
            "safe" => Ok(NsScaling::Safe),
            _ => Err(Error::Usage(format!("unknown scaling {s:?} (expected paper or safe)"))),
        }
    }
}

impl std::fmt::Display for NsScaling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NsScaling::Paper => "paper",
            NsScaling::Safe => "safe",
        })
    }
}

/// Diagonal perturbation added to `W` before iterating.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Perturbation<T = f64> {
    Absolute(T),
    /// `factor · ‖W‖_F / √m`
    Relative(T),
}

impl<T: Scalar> Perturbation<T> {
    pub fn resolve(&self, w: &DenseMatrix<T>) -> T {
        match *self {
            Perturbation::Absolute(e) => e,
            Perturbation::Relative(f) => f * w.frobenius_norm() / T::of_usize(w.rows()).sqrt(),
        }
    }

    fn raw(&self) -> T {
        match *self {
            Perturbation::Absolute(e) | Perturbation::Relative(e) => e,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NsConfig<T = f64> {
    pub iterations: usize,
    pub epsilon: Perturbation<T>,
    pub scaling: NsScaling,
    /// Early stop once `‖I − W Xₖ‖_F ≤ tolerance`; 0 disables.
    pub tolerance: T,
}

pub const DEFAULT_NS_ITERATIONS: usize = 30;
pub const DEFAULT_NS_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_NS_EPSILON_FACTOR: f64 = 1e-6;

impl<T: Scalar> NsConfig<T> {
    pub fn new(iterations: usize, epsilon: Perturbation<T>, scaling: NsScaling, tolerance: T) -> Result<Self> {
        let cfg = Self {
            iterations,
            epsilon,
            scaling,
            tolerance,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::contract("Newton-Schulz needs at least one iteration"));
        }
        let e = self.epsilon.raw();
        if !(e > T::zero()) || !e.is_finite() {
            return Err(Error::contract(format!("Newton-Schulz epsilon must be > 0, got {e}")));
        }
        if !(self.tolerance >= T::zero()) {
            return Err(Error::contract("Newton-Schulz tolerance must be >= 0"));
        }
        Ok(())
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn with_epsilon(mut self, epsilon: Perturbation<T>) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_scaling(mut self, scaling: NsScaling) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn with_tolerance(mut self, tolerance: T) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn default_for() -> Self {
        Self {
            iterations: DEFAULT_NS_ITERATIONS,
            epsilon: Perturbation::Relative(T::of(DEFAULT_NS_EPSILON_FACTOR)),
            scaling: NsScaling::Safe,
            tolerance: T::of(DEFAULT_NS_TOLERANCE),
        }
    }
}

impl Default for NsConfig<f64> {
    fn default() -> Self {
        Self::default_for()
    }
}

/// Stepwise Newton–Schulz state: the perturbed matrix, the current iterate
/// `Xₖ` and the product `W Xₖ`.
pub struct NsIteration<T = f64> {
    w: DenseMatrix<T>,
    x: DenseMatrix<T>,
    wx: DenseMatrix<T>,
    alpha: T,
    epsilon: T,
    step: usize,
}

impl<T: Scalar> NsIteration<T> {
    pub fn new(w: &DenseMatrix<T>, cfg: &NsConfig<T>) -> Result<Self> {
        cfg.validate()?;
        if !w.is_square() {
            return Err(Error::shape("newton_schulz", w.shape(), w.shape()));
        }
        let asym = w.asymmetry();
        if asym > T::of(SYMMETRY_TOL) {
            return Err(Error::contract(format!(
                "Newton-Schulz requires a symmetric matrix (max |w_ij - w_ji| = {asym:e})"
            )));
        }
        let epsilon = cfg.epsilon.resolve(w);
        let mut wp = w.clone();
        wp.add_to_diagonal(epsilon);
        let alpha = match cfg.scaling {
            NsScaling::Paper => T::of(2.0) / norm(&wp, NormKind::Spectral),
            NsScaling::Safe => T::one() / (norm(&wp, NormKind::One) * norm(&wp, NormKind::Inf)),
        };
        if !alpha.is_finite() {
            return Err(Error::Numerical("Newton-Schulz scaling is not finite (zero matrix?)".into()));
        }
        let x = wp.transpose().scale(alpha);
        let wx = matmul(&wp, &x)?;
        Ok(Self {
            w: wp,
            x,
            wx,
            alpha,
            epsilon,
            step: 0,
        })
    }

    /// `Xₖ₊₁ = Xₖ (2I − W Xₖ)`.
    pub fn step(&mut self) -> Result<()> {
        let mut t = self.wx.scale(-T::one());
        t.add_to_diagonal(T::of(2.0));
        self.x = matmul(&self.x, &t)?;
        self.wx = matmul(&self.w, &self.x)?;
        self.step += 1;
        Ok(())
    }

    pub fn iterate(&self) -> &DenseMatrix<T> {
        &self.x
    }

    /// `W Xₖ` with the perturbed `W`.
    pub fn product(&self) -> &DenseMatrix<T> {
        &self.wx
    }

    /// `I − W Xₖ`.
    pub fn residual(&self) -> DenseMatrix<T> {
        let mut r = self.wx.scale(-T::one());
        r.add_to_diagonal(T::one());
        r
    }

    pub fn residual_norm(&self) -> T {
        let n = self.wx.rows();
        let mut s = T::zero();
        for i in 0..n {
            for j in 0..n {
                let v = if i == j { T::one() - self.wx[(i, j)] } else { -self.wx[(i, j)] };
                s += v * v;
            }
        }
        s.sqrt()
    }

    pub fn perturbed(&self) -> &DenseMatrix<T> {
        &self.w
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn steps(&self) -> usize {
        self.step
    }
}

/// Approximates `W†` by Newton–Schulz iteration on `W + εI`.
///
/// The residual trace records `‖I − W Xₖ‖_F` after every step; when a
/// reference is given, `‖Xₖ − ref‖_F / ‖ref‖_F` is recorded alongside.
/// With `tolerance > 0` the run reports convergence once the residual
/// reaches it; with `tolerance == 0` it runs all iterations and reports
/// convergence when the final residual is below 1 (inside the quadratic
/// basin).
pub fn newton_schulz<T: Scalar>(
    w: &DenseMatrix<T>,
    cfg: &NsConfig<T>,
    reference: Option<&DenseMatrix<T>>,
) -> Result<SolverReport<T>> {
    let mut it = NsIteration::new(w, cfg)?;
    let x0_norm = it.iterate().frobenius_norm();
    let limit = T::of(DIVERGENCE_FACTOR) * x0_norm;
    let mut residual_trace = Vec::with_capacity(cfg.iterations);
    let mut iterates_error = Vec::new();
    let ref_norm = reference.map(|r| r.frobenius_norm());

    for k in 1..=cfg.iterations {
        it.step()?;
        let resid = it.residual_norm();
        residual_trace.push(resid);
        if let (Some(r), Some(rn)) = (reference, ref_norm) {
            let diff = it.iterate().sub(r)?.frobenius_norm();
            iterates_error.push(if rn > T::zero() { diff / rn } else { diff });
        }
        let xn = it.iterate().frobenius_norm();
        if !(xn <= limit) || !resid.is_finite() {
            return Err(Error::Divergence {
                iteration: k,
                residual_trace: residual_trace.iter().map(|v| v.as_f64()).collect(),
            });
        }
        if cfg.tolerance > T::zero() && resid <= cfg.tolerance {
            break;
        }
    }
    let last = *residual_trace.last().expect("at least one iteration");
    let converged = if cfg.tolerance > T::zero() {
        last <= cfg.tolerance
    } else {
        last < T::one()
    };
    Ok(SolverReport {
        iterations_used: residual_trace.len(),
        iterates_error,
        residual_trace,
        final_iterate: it.x,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(eps: f64, iters: usize) -> NsConfig {
        NsConfig::default()
            .with_epsilon(Perturbation::Absolute(eps))
            .with_iterations(iters)
            .with_tolerance(0.0)
    }

    #[test]
    fn identity_is_a_fixed_point() {
        let i = DenseMatrix::identity(4);
        let r = newton_schulz(&i, &cfg(1e-9, 20), None).unwrap();
        assert!(r.final_iterate.relative_error(&i).unwrap() < 1e-8);
        assert!(r.converged);
        assert_eq!(r.residual_trace.len(), r.iterations_used);
    }

    #[test]
    fn scalar_case_and_closed_form_recurrence() {
        // 1x1 with safe scaling: α = 1/w², so X₀ = 1/w already.
        let w = DenseMatrix::from_rows(&[[2.0]]).unwrap();
        let r = newton_schulz(&w, &cfg(1e-300, 3), None).unwrap();
        assert!((r.final_iterate[(0, 0)] - 0.5).abs() < 1e-10);

        // diag(2, 1/2): α = 1/4, residual eigenvalues start at (0, 15/16)
        // and square every step, e_k = (15/16)^(2^k).
        let w = DenseMatrix::from_diag(&[2.0, 0.5]);
        let r = newton_schulz(&w, &cfg(1e-300, 8), None).unwrap();
        let mut e = 15.0f64 / 16.0;
        for &resid in &r.residual_trace {
            e *= e;
            assert!((resid - e).abs() <= 1e-14 + 1e-12 * e, "{resid} vs {e}");
        }
    }

    #[test]
    fn two_over_norm_scaling_leaves_basin_for_scalar_two() {
        // α = 2/‖W‖₂ = 1, X₀ = 2, residual 1 − 4 = −3.
        let w = DenseMatrix::from_rows(&[[2.0]]).unwrap();
        let mut it = NsIteration::new(&w, &cfg(1e-300, 1).with_scaling(NsScaling::Paper)).unwrap();
        assert!((it.residual()[(0, 0)] + 3.0).abs() < 1e-12);
        it.step().unwrap();
        assert!((it.residual()[(0, 0)] - 9.0).abs() < 1e-12);
    }

    #[test]
    fn two_over_norm_scaling_diverges_on_large_spectrum() {
        let w = DenseMatrix::from_diag(&[2.0, 1.5]);
        let c = cfg(1e-9, 40).with_scaling(NsScaling::Paper);
        assert!(matches!(newton_schulz(&w, &c, None), Err(Error::Divergence { .. })));
    }

    #[test]
    fn rejects_bad_input() {
        let a = DenseMatrix::from_rows(&[[1.0, 0.5], [0.0, 1.0]]).unwrap();
        assert!(matches!(newton_schulz(&a, &cfg(1e-9, 5), None), Err(Error::Contract(_))));
        let rect = DenseMatrix::<f64>::zeros(2, 3);
        assert!(newton_schulz(&rect, &cfg(1e-9, 5), None).is_err());
        assert!(NsConfig::new(0, Perturbation::Absolute(1e-9), NsScaling::Safe, 0.0).is_err());
        assert!(NsConfig::new(3, Perturbation::Absolute(0.0), NsScaling::Safe, 0.0).is_err());
    }
}

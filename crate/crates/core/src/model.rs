//! Model coefficients and the constitutive functions of the tumor/drug system.
//!
//! The state equations are
//!
//! ```text
//! p_t + (V[w_p] p)_x = F(p) - C(d, p)
//! d_t - D d_xx       = Γ(I, d)
//! ```
//!
//! with `V[w] = κ w`, `F(p) = r p (1 - p/K)`, `C(d, p) = δ d p` and
//! `Γ(I, d) = Γ_ex (I - d) - λ d`. All functions are pointwise and pure.

use crate::error::{OncoError, Result};

/// Scalar coefficients of the model and the cost weights.
///
/// Units are documented per field but not enforced.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Logistic growth rate [1/time].
    pub r_growth: f64,
    /// Carrying capacity [cells/volume].
    pub k_cap: f64,
    /// Kill coefficient [volume/(drug·time)].
    pub delta: f64,
    /// Velocity gain per unit of the nonlocal term [length/time].
    pub kappa: f64,
    /// Interaction kernel standard deviation [length].
    pub sigma: f64,
    /// Drug diffusivity [length²/time].
    pub diff: f64,
    /// Blood-tissue exchange rate [1/time].
    pub gamma_ex: f64,
    /// Clearance rate [1/time].
    pub lambda_cl: f64,
    /// Weight of the running tumor burden.
    pub alpha_w: f64,
    /// Weight of the quadratic control penalty.
    pub beta_w: f64,
    /// Weight of the terminal tumor burden.
    pub gamma_w: f64,
    /// Upper bound of admissible infusion.
    pub m_tol: f64,
    /// Horizon.
    pub t_final: f64,
    pub x_min: f64,
    pub x_max: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            r_growth: 1.2,
            k_cap: 1.0,
            delta: 0.8,
            kappa: 0.05,
            sigma: 0.01,
            diff: 0.05,
            gamma_ex: 2.5,
            lambda_cl: 0.3,
            alpha_w: 1.0,
            beta_w: 0.1,
            gamma_w: 1.0,
            m_tol: 4.0,
            t_final: 1.0,
            x_min: 0.0,
            x_max: 1.0,
        }
    }
}

/// Partial derivatives needed by the linearized and adjoint systems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Partials {
    /// `F'(p)`.
    pub growth_dp: f64,
    /// `∂C/∂d`.
    pub kill_dd: f64,
    /// `∂C/∂p`.
    pub kill_dp: f64,
    /// `∂Γ/∂I`.
    pub exchange_di: f64,
    /// `∂Γ/∂d`.
    pub exchange_dd: f64,
    /// `V'(w)`.
    pub velocity_dw: f64,
}

impl ModelParams {
    /// Checks every coefficient; the first offending key is reported.
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("r_growth", self.r_growth),
            ("K_cap", self.k_cap),
            ("delta", self.delta),
            ("kappa", self.kappa),
            ("sigma", self.sigma),
            ("diff", self.diff),
            ("gamma_ex", self.gamma_ex),
            ("lambda_cl", self.lambda_cl),
            ("alpha_w", self.alpha_w),
            ("beta_w", self.beta_w),
            ("gamma_w", self.gamma_w),
            ("m_tol", self.m_tol),
            ("t_final", self.t_final),
            ("x_min", self.x_min),
            ("x_max", self.x_max),
        ];
        for (key, v) in all {
            if !v.is_finite() {
                return Err(OncoError::validation(key, format!("{v} is not finite")));
            }
        }
        let positive = [
            ("K_cap", self.k_cap),
            ("gamma_ex", self.gamma_ex),
            ("diff", self.diff),
            ("sigma", self.sigma),
            ("m_tol", self.m_tol),
            ("t_final", self.t_final),
            ("beta_w", self.beta_w),
        ];
        for (key, v) in positive {
            if v <= 0.0 {
                return Err(OncoError::validation(key, format!("must be > 0, got {v}")));
            }
        }
        // r_growth = 0 and delta = 0 are accepted: they switch off the
        // sources for conservation and decoupling checks.
        let nonneg = [
            ("r_growth", self.r_growth),
            ("delta", self.delta),
            ("lambda_cl", self.lambda_cl),
            ("kappa", self.kappa),
            ("alpha_w", self.alpha_w),
            ("gamma_w", self.gamma_w),
        ];
        for (key, v) in nonneg {
            if v < 0.0 {
                return Err(OncoError::validation(key, format!("must be >= 0, got {v}")));
            }
        }
        if self.x_max <= self.x_min {
            return Err(OncoError::validation(
                "x_max",
                format!("must exceed x_min = {}", self.x_min),
            ));
        }
        Ok(())
    }

    /// Domain length `|Ω|`.
    pub fn domain_length(&self) -> f64 {
        self.x_max - self.x_min
    }

    /// Nonlocal velocity `V[w] = κ w`.
    #[inline]
    pub fn velocity(&self, w: f64) -> f64 {
        self.kappa * w
    }

    /// Logistic growth `F(p) = r p (1 - p/K)`.
    #[inline]
    pub fn eval_growth(&self, p: f64) -> f64 {
        self.r_growth * p * (1.0 - p / self.k_cap)
    }

    /// Drug-induced death `C(d, p) = δ d p`.
    #[inline]
    pub fn eval_kill(&self, d: f64, p: f64) -> f64 {
        self.delta * d * p
    }

    /// Exchange and clearance `Γ(I, d) = Γ_ex (I - d) - λ d`.
    #[inline]
    pub fn eval_exchange(&self, i: f64, d: f64) -> f64 {
        self.gamma_ex * (i - d) - self.lambda_cl * d
    }

    /// All partials at `(d, p, i)`. The model is affine in `i` and `d`,
    /// so only `F'` and the kill partials depend on the arguments.
    pub fn partials(&self, d: f64, p: f64, _i: f64) -> Partials {
        Partials {
            growth_dp: self.growth_dp(p),
            kill_dd: self.delta * p,
            kill_dp: self.delta * d,
            exchange_di: self.gamma_ex,
            exchange_dd: -(self.gamma_ex + self.lambda_cl),
            velocity_dw: self.kappa,
        }
    }

    #[inline]
    pub(crate) fn growth_dp(&self, p: f64) -> f64 {
        self.r_growth * (1.0 - 2.0 * p / self.k_cap)
    }
}

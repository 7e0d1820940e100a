//! Discretization: uniform mesh, CFL-limited time grid and the spatial
//! kernels used by both the state and the adjoint solvers.

use std::fmt;
use std::ops::{Deref, DerefMut};
use std::sync::Arc;

use realfft::num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{OncoError, Result};
use crate::model::ModelParams;

/// Multiplier on `κ·max(w_{p0})` giving the reference speed of the CFL bound.
pub const VELOCITY_SAFETY: f64 = 4.0;

/// Uniform spatial mesh on `[x_min, x_max]`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh {
    pub x_min: f64,
    pub dx: f64,
    pub n_x: usize,
}

impl Mesh {
    pub fn new(params: &ModelParams, n_x: usize) -> Result<Self> {
        if n_x < 3 {
            return Err(OncoError::validation(
                "n_x",
                format!("need at least 3 nodes, got {n_x}"),
            ));
        }
        if !(params.x_min.is_finite() && params.x_max.is_finite()) || params.x_max <= params.x_min {
            return Err(OncoError::validation(
                "x_max",
                "domain must be a finite, non-empty interval",
            ));
        }
        Ok(Self {
            x_min: params.x_min,
            dx: params.domain_length() / (n_x - 1) as f64,
            n_x,
        })
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n_x).map(move |i| self.node(i))
    }

    /// Trapezoid weight of node `i`.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n_x {
            0.5 * self.dx
        } else {
            self.dx
        }
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Field {
        Field(self.nodes().map(f).collect())
    }
}

/// Space-time discretization. `dt` satisfies the CFL bound and divides
/// `t_final` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub mesh: Mesh,
    /// Number of time levels, including `t = 0` and `t = t_final`.
    pub n_t: usize,
    pub dt: f64,
    pub cfl: f64,
    /// Reference speed the transport CFL bound was derived from.
    pub v_ref: f64,
}

impl Grid {
    /// `dt = cfl·min(dx/v_ref, dx²/(2D))`, then shrunk so the horizon is an
    /// integer number of steps.
    pub fn build(params: &ModelParams, n_x: usize, cfl: f64, v_ref: f64) -> Result<Self> {
        params.validate()?;
        if !(cfl.is_finite() && cfl > 0.0) {
            return Err(OncoError::validation(
                "cfl",
                format!("must be > 0, got {cfl}"),
            ));
        }
        if !(v_ref.is_finite() && v_ref >= 0.0) {
            return Err(OncoError::validation(
                "v_ref",
                format!("must be finite and >= 0, got {v_ref}"),
            ));
        }
        let mesh = Mesh::new(params, n_x)?;
        let transport = if v_ref > 0.0 {
            mesh.dx / v_ref
        } else {
            f64::INFINITY
        };
        let diffusion = mesh.dx * mesh.dx / (2.0 * params.diff);
        let dt_max = cfl * transport.min(diffusion);
        let steps = (params.t_final / dt_max).ceil().max(1.0) as usize;
        Ok(Self {
            mesh,
            n_t: steps + 1,
            dt: params.t_final / steps as f64,
            cfl,
            v_ref,
        })
    }

    pub fn steps(&self) -> usize {
        self.n_t - 1
    }

    #[inline]
    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    /// Trapezoid weight of time level `n`.
    #[inline]
    pub fn time_weight(&self, n: usize) -> f64 {
        if n == 0 || n + 1 == self.n_t {
            0.5 * self.dt
        } else {
            self.dt
        }
    }
}

/// Reference speed for the CFL bound: `VELOCITY_SAFETY·κ·max(w_{p0})`.
pub fn velocity_reference(params: &ModelParams, p0: &[f64], kernel: &Kernel) -> f64 {
    let w = kernel.convolve(p0);
    let w_max = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    VELOCITY_SAFETY * params.kappa * w_max
}

/// A scalar sampled at every mesh node at one time level.
#[derive(Clone, PartialEq, Default)]
pub struct Field(pub Vec<f64>);

impl Field {
    pub fn zeros(n: usize) -> Self {
        Field(vec![0.0; n])
    }

    pub fn constant(n: usize, v: f64) -> Self {
        Field(vec![v; n])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Mirror image about the domain midpoint.
    pub fn reflect(&self) -> Field {
        Field(self.0.iter().rev().copied().collect())
    }
}

impl Deref for Field {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Field {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Field {
    fn from(v: Vec<f64>) -> Self {
        Field(v)
    }
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

/// Trapezoidal rule on the mesh.
pub fn quadrature(f: &[f64], mesh: &Mesh) -> f64 {
    debug_assert_eq!(f.len(), mesh.n_x);
    let n = f.len();
    let inner: f64 = f[1..n - 1].iter().sum();
    mesh.dx * (inner + 0.5 * (f[0] + f[n - 1]))
}

/// Normalized Gaussian `exp(-h²/2σ²)/(σ√2π)`.
#[inline]
pub fn gaussian(h: f64, sigma: f64) -> f64 {
    (-(h * h) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Gaussian interaction kernel sampled at every mesh offset, with its
/// spectrum on a zero-padded window of length `>= 2·n_x - 1`.
#[derive(Clone)]
pub struct Kernel {
    mesh: Mesh,
    /// `profile[n_x - 1 + m] = K(m·dx)` for `m` in `-(n_x-1)..=(n_x-1)`.
    profile: Vec<f64>,
    spectrum: Vec<Complex64>,
    padded: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("n_x", &self.mesh.n_x)
            .field("padded", &self.padded)
            .finish()
    }
}

/// Reusable buffers for [`Kernel::convolve_into`].
pub struct ConvScratch {
    real: Vec<f64>,
    spec: Vec<Complex64>,
    fwd: Vec<Complex64>,
    inv: Vec<Complex64>,
}

impl Kernel {
    pub fn gaussian(sigma: f64, mesh: &Mesh) -> Self {
        let n = mesh.n_x;
        let profile: Vec<f64> = (0..2 * n - 1)
            .map(|k| {
                let m = k as f64 - (n - 1) as f64;
                gaussian(m * mesh.dx, sigma)
            })
            .collect();
        Self::from_profile(profile, mesh)
    }

    /// Builds a kernel from an explicit offset profile of length `2·n_x - 1`.
    pub fn from_profile(profile: Vec<f64>, mesh: &Mesh) -> Self {
        let n = mesh.n_x;
        assert_eq!(
            profile.len(),
            2 * n - 1,
            "kernel profile must cover every offset"
        );
        let padded = (2 * n - 1).next_power_of_two();
        let mut planner = RealFftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(padded);
        let inverse = planner.plan_fft_inverse(padded);

        // Wrap negative offsets to the end of the window.
        let mut buf = vec![0.0; padded];
        for m in 0..n {
            buf[m] = profile[n - 1 + m];
        }
        for m in 1..n {
            buf[padded - m] = profile[n - 1 - m];
        }
        let mut spectrum = forward.make_output_vec();
        forward
            .process(&mut buf, &mut spectrum)
            .expect("buffer sizes come from the plan");
        // Fold in the inverse transform's 1/L so convolution is a plain product.
        let scale = 1.0 / padded as f64;
        for c in &mut spectrum {
            *c *= scale;
        }
        Self {
            mesh: *mesh,
            profile,
            spectrum,
            padded,
            forward,
            inverse,
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    /// `K(m·dx)` for a signed node offset `m`.
    pub fn at_offset(&self, m: isize) -> f64 {
        self.profile[(self.mesh.n_x as isize - 1 + m) as usize]
    }

    pub fn profile(&self) -> &[f64] {
        &self.profile
    }

    pub fn scratch(&self) -> ConvScratch {
        ConvScratch {
            real: self.forward.make_input_vec(),
            spec: self.forward.make_output_vec(),
            fwd: self.forward.make_scratch_vec(),
            inv: self.inverse.make_scratch_vec(),
        }
    }

    /// `w_i = Σ_j K(x_i - x_j) ω_j f_j` with trapezoid weights `ω`, via
    /// zero-padded real FFTs.
    pub fn convolve_into(&self, f: &[f64], out: &mut [f64], scratch: &mut ConvScratch) {
        let n = self.mesh.n_x;
        debug_assert_eq!(f.len(), n);
        debug_assert_eq!(out.len(), n);
        let ConvScratch {
            real,
            spec,
            fwd,
            inv,
        } = scratch;
        for (i, (r, v)) in real.iter_mut().zip(f).enumerate() {
            *r = self.mesh.weight(i) * v;
        }
        real[n..].fill(0.0);
        self.forward
            .process_with_scratch(real, spec, fwd)
            .expect("buffer sizes come from the plan");
        for (s, k) in spec.iter_mut().zip(&self.spectrum) {
            *s *= k;
        }
        // The imaginary parts of the DC and Nyquist bins are round-off; the
        // inverse transform rejects them otherwise.
        spec[0].im = 0.0;
        if let Some(last) = spec.last_mut() {
            last.im = 0.0;
        }
        self.inverse
            .process_with_scratch(spec, real, inv)
            .expect("buffer sizes come from the plan");
        out.copy_from_slice(&real[..n]);
    }

    pub fn convolve(&self, f: &[f64]) -> Field {
        let mut out = Field::zeros(self.mesh.n_x);
        let mut scratch = self.scratch();
        self.convolve_into(f, &mut out, &mut scratch);
        out
    }

    /// Same sum as [`Kernel::convolve`], evaluated term by term in `O(n_x²)`.
    pub fn convolve_direct(&self, f: &[f64]) -> Field {
        let n = self.mesh.n_x;
        let row = |i: usize| -> f64 {
            (0..n)
                .map(|j| self.at_offset(i as isize - j as isize) * self.mesh.weight(j) * f[j])
                .sum()
        };
        Field(crate::parallel::map_indices(n, row))
    }
}

/// `-(v p)_x` with the local Lax-Friedrichs flux
/// `F_{i+1/2} = ½(v_i p_i + v_{i+1} p_{i+1}) - ½ a_{i+1/2} (p_{i+1} - p_i)`,
/// `a_{i+1/2} = max(|v_i|, |v_{i+1}|)`.
///
/// Ghost cells carry `p = 0` and copy the boundary velocity, so nothing
/// enters through the boundary while outflow leaves at the upwind rate.
pub fn advection_rhs(p: &[f64], vel: &[f64], mesh: &Mesh, out: &mut [f64]) {
    let n = mesh.n_x;
    debug_assert!(p.len() == n && vel.len() == n && out.len() == n);
    let inv_dx = 1.0 / mesh.dx;
    let flux = |pl: f64, vl: f64, pr: f64, vr: f64| -> f64 {
        let a = vl.abs().max(vr.abs());
        0.5 * (vl * pl + vr * pr) - 0.5 * a * (pr - pl)
    };
    let mut left = flux(0.0, vel[0], p[0], vel[0]);
    for i in 0..n {
        let right = if i + 1 < n {
            flux(p[i], vel[i], p[i + 1], vel[i + 1])
        } else {
            flux(p[i], vel[i], 0.0, vel[i])
        };
        out[i] = -(right - left) * inv_dx;
        left = right;
    }
}

/// Net flux through the boundaries for [`advection_rhs`]: inflow at the left
/// minus outflow at the right.
pub fn advection_boundary_flux(p: &[f64], vel: &[f64]) -> f64 {
    let n = p.len();
    let left = 0.5 * vel[0] * p[0] - 0.5 * vel[0].abs() * p[0];
    let right = 0.5 * vel[n - 1] * p[n - 1] + 0.5 * vel[n - 1].abs() * p[n - 1];
    left - right
}

/// `D·d_xx` by central differences with mirrored (homogeneous Neumann)
/// ghost values.
pub fn diffusion_rhs(d: &[f64], diff: f64, mesh: &Mesh, out: &mut [f64]) {
    let n = mesh.n_x;
    debug_assert!(d.len() == n && out.len() == n);
    let c = diff / (mesh.dx * mesh.dx);
    out[0] = c * (2.0 * d[1] - 2.0 * d[0]);
    for i in 1..n - 1 {
        out[i] = c * (d[i - 1] - 2.0 * d[i] + d[i + 1]);
    }
    out[n - 1] = c * (2.0 * d[n - 2] - 2.0 * d[n - 1]);
}

/// First derivative: central in the interior, second-order one-sided at the
/// two boundary nodes.
pub fn derivative(f: &[f64], mesh: &Mesh, out: &mut [f64]) {
    let n = mesh.n_x;
    debug_assert!(f.len() == n && out.len() == n);
    let h2 = 0.5 / mesh.dx;
    out[0] = h2 * (-3.0 * f[0] + 4.0 * f[1] - f[2]);
    for i in 1..n - 1 {
        out[i] = h2 * (f[i + 1] - f[i - 1]);
    }
    out[n - 1] = h2 * (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]);
}

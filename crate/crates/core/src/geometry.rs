//! Exterior Schwarzschild geometry: tortoise coordinate, the charts used by
//! the estimates, null frames and frame decomposition of symmetric 2-tensors.
//!
//! Conventions: geometric units `G = c = 1`, signature `(-,+,+,+)`, Greek
//! indices run over `t, x1, x2, x3` with `x = r ω`.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance for algebraic identities (frame inner products, determinants).
pub const TOL_ALGEBRAIC: f64 = 1e-12;
/// Tolerance for round trips through iterative inverses.
pub const TOL_ROUNDTRIP: f64 = 1e-10;

/// Black-hole mass in geometric units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mass(f64);

impl Mass {
    pub fn new(m: f64) -> Result<Self> {
        if m > 0.0 && m.is_finite() {
            Ok(Mass(m))
        } else {
            Err(Error::domain("Mass::new", format!("M = {m} must be > 0")))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Horizon radius `2M`.
    #[inline]
    pub fn horizon(self) -> f64 {
        2.0 * self.0
    }

    /// Photon-sphere radius `3M`.
    #[inline]
    pub fn photon_sphere(self) -> f64 {
        3.0 * self.0
    }

    /// The lapse-like factor `1 - 2M/r`.
    #[inline]
    pub fn lapse(self, r: f64) -> f64 {
        1.0 - 2.0 * self.0 / r
    }
}

/// Closed-form tortoise coordinate; requires `r > 2M`.
///
/// Strictly increasing, `r*(3M) = 0`, and `r* -> -inf` as `r -> 2M+`.
pub fn tortoise_of_r(mass: Mass, r: f64) -> Result<f64> {
    let m = mass.value();
    if r <= 2.0 * m {
        return Err(Error::domain(
            "tortoise_of_r",
            format!("r = {r} must exceed 2M = {}", 2.0 * m),
        ));
    }
    Ok(r + 2.0 * m * (r - 2.0 * m).ln() - 3.0 * m - 2.0 * m * m.ln())
}

/// Numerical inverse of [`tortoise_of_r`]: Newton iteration with a
/// bisection fallback on a bracketing interval.
///
/// The iteration runs on `ℓ = ln((r - 2M)/M)`, in which the residual
/// `F(ℓ) = M(e^ℓ - 1 + 2ℓ) - r*` stays well conditioned arbitrarily close
/// to the horizon; the returned `r = 2M + M e^ℓ` is then accurate to a unit
/// in the last place even when `r*` is very negative.
pub fn r_of_tortoise(mass: Mass, rstar: f64) -> Result<f64> {
    let m = mass.value();
    let residual_of = |ell: f64| m * (ell.exp() - 1.0 + 2.0 * ell) - rstar;

    // Initial guess: near the horizon e^ℓ ≪ 1 so ℓ ≈ (r*/M + 1)/2,
    // far out r ≈ r* so ℓ ≈ ln(r*/M - 2).
    let mut ell = if rstar < 2.0 * m {
        (rstar / m + 1.0) / 2.0
    } else {
        (rstar / m - 2.0).max(0.5).ln()
    };

    // Bracket the root of the increasing convex residual.
    let mut lo = ell;
    while residual_of(lo) > 0.0 {
        lo -= lo.abs().max(1.0);
    }
    let mut hi = ell.max(lo + 1.0);
    while residual_of(hi) < 0.0 {
        hi += hi.abs().max(1.0);
    }
    ell = ell.clamp(lo, hi);

    let tol = 1e-13 * rstar.abs().max(1.0);
    let mut residual = f64::INFINITY;
    for _ in 0..200 {
        let f = residual_of(ell);
        residual = f.abs();
        if residual < tol {
            return Ok(2.0 * m + m * ell.exp());
        }
        if f > 0.0 {
            hi = hi.min(ell);
        } else {
            lo = lo.max(ell);
        }
        // F'(ℓ) = M (e^ℓ + 2)
        let next = ell - f / (m * (ell.exp() + 2.0));
        ell = if next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::Convergence {
        op: "r_of_tortoise",
        iters: 200,
        residual,
    })
}

/// One event of the exterior region, with the tortoise value cached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacetimePoint {
    pub t: f64,
    pub r: f64,
    pub omega: [f64; 3],
    pub rstar: f64,
}

impl SpacetimePoint {
    pub fn new(mass: Mass, t: f64, r: f64, omega: [f64; 3]) -> Result<Self> {
        let n = (omega[0] * omega[0] + omega[1] * omega[1] + omega[2] * omega[2]).sqrt();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::domain(
                "SpacetimePoint::new",
                format!("|omega| = {n} must be 1"),
            ));
        }
        let rstar = tortoise_of_r(mass, r)?;
        Ok(SpacetimePoint { t, r, omega, rstar })
    }

    /// Build from rectangular spatial coordinates.
    pub fn from_cartesian(mass: Mass, t: f64, x: [f64; 3]) -> Result<Self> {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if r <= mass.horizon() {
            return Err(Error::domain(
                "SpacetimePoint::from_cartesian",
                format!("r = {r} inside horizon"),
            ));
        }
        Self::new(mass, t, r, [x[0] / r, x[1] / r, x[2] / r])
    }

    #[inline]
    pub fn x(&self) -> [f64; 3] {
        [
            self.r * self.omega[0],
            self.r * self.omega[1],
            self.r * self.omega[2],
        ]
    }
}

/// The charts in which the metric components are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChartTag {
    /// Static diagonal chart `(t~, x)`; valid on `r > 2M`.
    BoyerLindquistTilde,
    /// Rectangular chart `(t, x)`; the closed forms used here require
    /// `r > 5M/2` (below that the chart needs an interior time function,
    /// see [`rectangular_metric_with_mu`]).
    Rectangular,
    /// Rectangular Regge-Wheeler chart `(t, x*)` with `x* = r* ω`;
    /// closed forms for `r > 5M/2`.
    RectangularReggeWheeler,
}

/// Inverse metric, its determinant and the chart it belongs to.
#[derive(Debug, Clone, Copy)]
pub struct MetricAtPoint {
    pub inv: Matrix4<f64>,
    pub det: f64,
    pub chart: ChartTag,
}

impl MetricAtPoint {
    /// Covariant components `g_{αβ}`.
    pub fn covariant(&self) -> Matrix4<f64> {
        self.inv
            .try_inverse()
            .expect("Lorentzian metric is invertible")
    }

    /// `√|g|` of the covariant metric (`|det g_{αβ}| = 1/|det g^{αβ}|`).
    pub fn sqrt_abs_det_cov(&self) -> f64 {
        1.0 / self.det.abs().sqrt()
    }

    /// Number of negative eigenvalues of the inverse metric as a quadratic
    /// form; Lorentzian signature means exactly one.
    pub fn negative_eigenvalues(&self) -> usize {
        self.inv
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .filter(|&&e| e < 0.0)
            .count()
    }
}

fn tangential_projector(omega: [f64; 3]) -> Matrix4<f64> {
    let mut p = Matrix4::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let d = if i == j { 1.0 } else { 0.0 };
            p[(i + 1, j + 1)] = d - omega[i] * omega[j];
        }
    }
    p
}

/// Inverse Schwarzschild metric in the requested chart.
///
/// Rectangular: `g^{00} = -(1-2M/r)^{-1}`, `g^{0i} = 0`,
/// `g^{ij} = (1-2M/r) ω^i ω^j + δ^{ij} - ω^i ω^j`, with determinant `-1`.
/// The Regge-Wheeler chart replaces the radial factor by its reciprocal.
pub fn metric_inverse_at(mass: Mass, p: &SpacetimePoint, chart: ChartTag) -> Result<MetricAtPoint> {
    let a = mass.lapse(p.r);
    let need = match chart {
        ChartTag::BoyerLindquistTilde => 2.0 * mass.value(),
        ChartTag::Rectangular | ChartTag::RectangularReggeWheeler => 2.5 * mass.value(),
    };
    if p.r <= need {
        return Err(Error::domain(
            "metric_inverse_at",
            format!("chart {chart:?} requires r > {need}, got r = {}", p.r),
        ));
    }
    let radial = match chart {
        ChartTag::BoyerLindquistTilde | ChartTag::Rectangular => a,
        ChartTag::RectangularReggeWheeler => 1.0 / a,
    };
    let mut inv = tangential_projector(p.omega);
    inv[(0, 0)] = -1.0 / a;
    for i in 0..3 {
        for j in 0..3 {
            inv[(i + 1, j + 1)] += radial * p.omega[i] * p.omega[j];
        }
    }
    let det = inv.determinant();
    Ok(MetricAtPoint { inv, det, chart })
}

/// Spatial partial derivatives `∂_k g_S^{αβ}` of the rectangular chart
/// closed form (the chart is static, so `∂_t g_S = 0`).
pub fn rectangular_inverse_derivs(mass: Mass, p: &SpacetimePoint) -> [Matrix4<f64>; 3] {
    let r = p.r;
    let w = p.omega;
    let ap = 2.0 * mass.value() / (r * r); // d(1-2M/r)/dr
    let a = mass.lapse(r);
    let mut out = [Matrix4::zeros(); 3];
    for (k, dk) in out.iter_mut().enumerate() {
        // g^{00} = -1/a  =>  ∂_k = a'/a^2 ω_k
        dk[(0, 0)] = ap / (a * a) * w[k];
        for i in 0..3 {
            for j in 0..3 {
                // g^{ij} = δ^{ij} + (a-1) ω^i ω^j
                let dwi = (delta(k, i) - w[k] * w[i]) / r;
                let dwj = (delta(k, j) - w[k] * w[j]) / r;
                dk[(i + 1, j + 1)] =
                    ap * w[k] * w[i] * w[j] + (a - 1.0) * (dwi * w[j] + w[i] * dwj);
            }
        }
    }
    out
}

#[inline]
fn delta(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

/// Smooth bump `e(x) = exp(-1/x)` for `x > 0`, `0` otherwise; vanishes to
/// all orders at `0`.
pub fn smooth_exp(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

fn smooth_exp_d(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp() / (x * x)
    } else {
        0.0
    }
}

/// Smooth step: `0` for `x <= 0`, `1` for `x >= 1`, strictly increasing
/// in between, flat to all orders at both ends.
pub fn smooth_step(x: f64) -> f64 {
    let e0 = smooth_exp(x);
    let e1 = smooth_exp(1.0 - x);
    if e0 == 0.0 {
        0.0
    } else if e1 == 0.0 {
        1.0
    } else {
        e0 / (e0 + e1)
    }
}

/// Derivative of [`smooth_step`].
pub fn smooth_step_d(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    let e0 = smooth_exp(x);
    let e1 = smooth_exp(1.0 - x);
    let d0 = smooth_exp_d(x);
    let d1 = smooth_exp_d(1.0 - x);
    (d0 * e1 + e0 * d1) / ((e0 + e1) * (e0 + e1))
}

/// Interior time profile `μ(r)` on `[r_e, ∞)`: equals the tortoise
/// coordinate for `r >= 5M/2`, stays smooth through the horizon, keeps
/// `μ' > 0` and `2 - (1-2M/r) μ' > 0`, and dominates `r*` on the exterior.
#[derive(Debug, Clone)]
pub struct MuProfile {
    mass: Mass,
    r_e: f64,
    anchor_r: f64,
    anchor_value: f64,
}

impl MuProfile {
    /// `1/μ'`, interpolating between a fixed positive floor inside and
    /// the exterior value `1 - 2M/r`.
    fn lambda(&self, r: f64) -> f64 {
        let m = self.mass.value();
        let s = smooth_step((r - 2.25 * m) / (0.25 * m));
        s * self.mass.lapse(r) + (1.0 - s) * 0.2
    }

    fn lambda_deriv(&self, r: f64) -> f64 {
        let m = self.mass.value();
        let x = (r - 2.25 * m) / (0.25 * m);
        let s = smooth_step(x);
        let sd = smooth_step_d(x) / (0.25 * m);
        let ap = 2.0 * m / (r * r);
        sd * (self.mass.lapse(r) - 0.2) + s * ap
    }

    pub fn deriv(&self, r: f64) -> f64 {
        1.0 / self.lambda(r)
    }

    pub fn deriv2(&self, r: f64) -> f64 {
        let l = self.lambda(r);
        -self.lambda_deriv(r) / (l * l)
    }

    /// μ(r); exact tortoise value for `r >= 5M/2`, quadrature of `μ'` below.
    pub fn value(&self, r: f64) -> f64 {
        if r >= self.anchor_r {
            return tortoise_of_r(self.mass, r).expect("r >= 5M/2 is exterior");
        }
        // Composite Simpson from r up to the anchor; integrand is smooth.
        let n = 400;
        let h = (self.anchor_r - r) / n as f64;
        let mut s = self.deriv(r) + self.deriv(self.anchor_r);
        for k in 1..n {
            let rk = r + k as f64 * h;
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * self.deriv(rk);
        }
        self.anchor_value - s * h / 3.0
    }

    pub fn r_e(&self) -> f64 {
        self.r_e
    }
}

/// Construct and validate an interior time profile on `[r_e, ∞)`.
///
/// Both defining conditions are checked by dense sampling:
/// `μ' > 0` and `2 - (1-2M/r) μ' > 0`, plus `μ >= r*` on the exterior.
pub fn mu_interior(mass: Mass, r_e: f64) -> Result<MuProfile> {
    let m = mass.value();
    if !(r_e > 0.0 && r_e < 2.0 * m) {
        return Err(Error::construction(
            "MuProfile",
            format!("r_e = {r_e} must lie in (0, 2M)"),
        ));
    }
    let anchor_r = 2.5 * m;
    let profile = MuProfile {
        mass,
        r_e,
        anchor_r,
        anchor_value: tortoise_of_r(mass, anchor_r)?,
    };
    let n = 10_000;
    for k in 0..=n {
        let r = r_e + (10.0 * m - r_e) * k as f64 / n as f64;
        let d = profile.deriv(r);
        let spacelike = 2.0 - mass.lapse(r) * d;
        if !(d > 0.0) || !(spacelike > 0.0) {
            return Err(Error::construction(
                "MuProfile",
                format!("conditions violated at r = {r}: mu' = {d}, 2-(1-2M/r)mu' = {spacelike}"),
            ));
        }
        if r > 2.0 * m * (1.0 + 1e-6) && r < anchor_r {
            let gap = profile.value(r) - tortoise_of_r(mass, r)?;
            if gap < -1e-9 {
                return Err(Error::construction(
                    "MuProfile",
                    format!("mu < r* at r = {r} (gap {gap:e})"),
                ));
            }
        }
    }
    Ok(profile)
}

/// Inverse metric of the `(t, x)` chart extended through the photon-sphere
/// region down to `r_e` by the interior time profile; coincides with the
/// rectangular closed form for `r >= 5M/2` and has determinant `-1`.
pub fn rectangular_metric_with_mu(mass: Mass, mu: &MuProfile, r: f64, omega: [f64; 3]) -> Matrix4<f64> {
    let a = mass.lapse(r);
    let mp = mu.deriv(r);
    let g00 = -mp * (2.0 - a * mp);
    let g0r = 1.0 - a * mp;
    let mut inv = tangential_projector(omega);
    inv[(0, 0)] = g00;
    for i in 0..3 {
        inv[(0, i + 1)] = g0r * omega[i];
        inv[(i + 1, 0)] = g0r * omega[i];
        for j in 0..3 {
            inv[(i + 1, j + 1)] += a * omega[i] * omega[j];
        }
    }
    inv
}

/// Radial derivative (at fixed `ω`) of [`rectangular_metric_with_mu`].
pub fn rectangular_metric_with_mu_dr(
    mass: Mass,
    mu: &MuProfile,
    r: f64,
    omega: [f64; 3],
) -> Matrix4<f64> {
    let m = mass.value();
    let a = mass.lapse(r);
    let ap = 2.0 * m / (r * r);
    let mp = mu.deriv(r);
    let mpp = mu.deriv2(r);
    let dg00 = -mpp * (2.0 - a * mp) + mp * (ap * mp + a * mpp);
    let dg0r = -(ap * mp + a * mpp);
    let mut d = Matrix4::zeros();
    d[(0, 0)] = dg00;
    for i in 0..3 {
        d[(0, i + 1)] = dg0r * omega[i];
        d[(i + 1, 0)] = dg0r * omega[i];
        for j in 0..3 {
            d[(i + 1, j + 1)] = ap * omega[i] * omega[j];
        }
    }
    d
}

/// Null frame `L, L̄` plus a deterministic orthonormal tangential pair.
#[derive(Debug, Clone, Copy)]
pub struct NullFrameAtPoint {
    pub l: Vector4<f64>,
    pub lbar: Vector4<f64>,
    pub a: Vector4<f64>,
    pub b: Vector4<f64>,
    pub l_low: Vector4<f64>,
    pub lbar_low: Vector4<f64>,
}

impl NullFrameAtPoint {
    /// `g_S(L, L̄) = -2 (1 - 2M/r)`.
    pub fn g_l_lbar(&self) -> f64 {
        self.l.dot(&self.lbar_low)
    }
}

/// Deterministic tangential pair: Gram-Schmidt of the coordinate axis with
/// the smallest `|ω_k|` against `ω`, then the cross product. The tangential
/// choice is conventional; every frame formula used here is invariant under
/// rotations of the pair.
pub fn tangential_pair(omega: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let mut k = 0;
    for i in 1..3 {
        if omega[i].abs() < omega[k].abs() {
            k = i;
        }
    }
    let mut a = [0.0; 3];
    a[k] = 1.0;
    let dot = a[0] * omega[0] + a[1] * omega[1] + a[2] * omega[2];
    for i in 0..3 {
        a[i] -= dot * omega[i];
    }
    let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    for v in a.iter_mut() {
        *v /= n;
    }
    let b = [
        omega[1] * a[2] - omega[2] * a[1],
        omega[2] * a[0] - omega[0] * a[2],
        omega[0] * a[1] - omega[1] * a[0],
    ];
    (a, b)
}

/// Null frame at an exterior point:
/// `L = ∂_t + ∂_{r*}`, `L̄ = ∂_t - ∂_{r*}` with
/// `∂_{r*} = (1-2M/r) ω^i ∂_i`, and lowered components
/// `L_0 = L̄_0 = -(1-2M/r)`, `L_i = ω_i`, `L̄_i = -ω_i`.
pub fn null_frame_at(mass: Mass, p: &SpacetimePoint) -> Result<NullFrameAtPoint> {
    if p.r <= mass.horizon() {
        return Err(Error::domain("null_frame_at", "r must exceed 2M"));
    }
    let a = mass.lapse(p.r);
    let w = p.omega;
    let (ta, tb) = tangential_pair(w);
    let l = Vector4::new(1.0, a * w[0], a * w[1], a * w[2]);
    let lbar = Vector4::new(1.0, -a * w[0], -a * w[1], -a * w[2]);
    let av = Vector4::new(0.0, ta[0], ta[1], ta[2]);
    let bv = Vector4::new(0.0, tb[0], tb[1], tb[2]);
    let l_low = Vector4::new(-a, w[0], w[1], w[2]);
    let lbar_low = Vector4::new(-a, -w[0], -w[1], -w[2]);
    Ok(NullFrameAtPoint {
        l,
        lbar,
        a: av,
        b: bv,
        l_low,
        lbar_low,
    })
}

/// Lower an index with the rectangular Schwarzschild metric:
/// `U_α = g_{S αβ} U^β`.
pub fn lower_index(mass: Mass, p: &SpacetimePoint, u: &Vector4<f64>) -> Result<Vector4<f64>> {
    if p.r <= mass.horizon() {
        return Err(Error::domain("lower_index", "r must exceed 2M"));
    }
    let a = mass.lapse(p.r);
    let w = p.omega;
    let radial = u[1] * w[0] + u[2] * w[1] + u[3] * w[2];
    let mut low = Vector4::zeros();
    low[0] = -a * u[0];
    for i in 0..3 {
        // g_{S ij} = a^{-1} ω_i ω_j + δ_ij - ω_i ω_j
        low[i + 1] = u[i + 1] + (1.0 / a - 1.0) * radial * w[i];
    }
    Ok(low)
}

/// Null-frame components of a symmetric contravariant 2-tensor.
///
/// `h_ll` multiplies `L̄^α L̄^β`, `h_lt[T]` the mixed `L̄`-tangential terms
/// and `h_ut` the purely tangential block, `T, U ∈ {L, A, B}`.
#[derive(Debug, Clone, Copy)]
pub struct FrameComponents {
    pub h_ll: f64,
    pub h_lt: [f64; 3],
    pub h_ut: [[f64; 3]; 3],
}

fn dual_covectors(frame: &NullFrameAtPoint) -> [Vector4<f64>; 4] {
    let g = frame.g_l_lbar();
    // Covectors extracting the (L̄, L, A, B) expansion coefficients.
    let a_low = Vector4::new(0.0, frame.a[1], frame.a[2], frame.a[3]);
    let b_low = Vector4::new(0.0, frame.b[1], frame.b[2], frame.b[3]);
    [frame.l_low / g, frame.lbar_low / g, a_low, b_low]
}

/// Decompose `h^{αβ}` in the null frame; `h_ll = h(L,L) / g_S(L,L̄)^2`.
pub fn frame_decompose(mass: Mass, p: &SpacetimePoint, h: &Matrix4<f64>) -> Result<FrameComponents> {
    let frame = null_frame_at(mass, p)?;
    let duals = dual_covectors(&frame);
    let comp = |u: usize, v: usize| (duals[u].transpose() * h * duals[v])[(0, 0)];
    let mut h_ut = [[0.0; 3]; 3];
    for u in 0..3 {
        for v in 0..3 {
            h_ut[u][v] = comp(u + 1, v + 1);
        }
    }
    Ok(FrameComponents {
        h_ll: comp(0, 0),
        h_lt: [comp(0, 1), comp(0, 2), comp(0, 3)],
        h_ut,
    })
}

/// Rebuild `h^{αβ}` from its frame components.
pub fn frame_reconstruct(
    mass: Mass,
    p: &SpacetimePoint,
    c: &FrameComponents,
) -> Result<Matrix4<f64>> {
    let frame = null_frame_at(mass, p)?;
    let vecs = [frame.l, frame.a, frame.b];
    let mut h = c.h_ll * frame.lbar * frame.lbar.transpose();
    for (t, vt) in vecs.iter().enumerate() {
        h += c.h_lt[t] * (frame.lbar * vt.transpose() + vt * frame.lbar.transpose());
        for (u, vu) in vecs.iter().enumerate() {
            h += c.h_ut[t][u] * vt * vu.transpose();
        }
    }
    Ok(h)
}

/// Smooth strictly increasing radial blend: identity for `r <= R1`, the
/// tortoise coordinate for `r >= 2 R1`.
#[derive(Debug, Clone)]
pub struct RadialBlend {
    mass: Mass,
    pub r1: f64,
}

impl RadialBlend {
    pub fn value(&self, r: f64) -> f64 {
        if r <= self.r1 {
            return r;
        }
        let rs = tortoise_of_r(self.mass, r).expect("blend region is exterior");
        if r >= 2.0 * self.r1 {
            return rs;
        }
        let s = smooth_step((r - self.r1) / self.r1);
        (1.0 - s) * r + s * rs
    }

    pub fn deriv(&self, r: f64) -> f64 {
        if r <= self.r1 {
            return 1.0;
        }
        let drs = 1.0 / self.mass.lapse(r);
        if r >= 2.0 * self.r1 {
            return drs;
        }
        let x = (r - self.r1) / self.r1;
        let s = smooth_step(x);
        let sd = smooth_step_d(x) / self.r1;
        let rs = tortoise_of_r(self.mass, r).expect("blend region is exterior");
        (1.0 - s) + s * drs + sd * (rs - r)
    }
}

/// Build the radial blend, checking strict monotonicity on a dense sample.
pub fn rtilde_blend(mass: Mass, r1: f64) -> Result<RadialBlend> {
    if r1 < 6.0 * mass.value() {
        return Err(Error::construction(
            "RadialBlend",
            format!("R1 = {r1} must be at least 6M"),
        ));
    }
    let blend = RadialBlend { mass, r1 };
    let n = 20_000;
    for k in 0..=n {
        let r = r1 * (0.5 + 1.6 * k as f64 / n as f64);
        if !(blend.deriv(r) > 0.0) {
            return Err(Error::construction(
                "RadialBlend",
                format!("non-monotone at r = {r}"),
            ));
        }
    }
    Ok(blend)
}

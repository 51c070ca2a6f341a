//! Metric perturbations `g^{αβ} = g_S^{αβ} + h^{αβ}` with analytic
//! derivatives, structural decay envelopes and their validators, the
//! divergence-mismatch vector `W`, and the null-frame split of the
//! perturbed wave operator.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::fd::{self, Event};
use crate::geometry::{
    frame_decompose, metric_inverse_at, null_frame_at, rectangular_inverse_derivs, smooth_step,
    smooth_step_d, ChartTag, Mass, SpacetimePoint,
};
use crate::norms::SpacetimeRegion;
use crate::{Error, Result};

/// Japanese bracket `⟨x⟩ = (1 + x^2)^{1/2}`.
#[inline]
pub fn jb(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

/// Smooth bump on (0,1), normalized to peak value 1 at x = 1/2.
fn bump01(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        (4.0 - 1.0 / (x * (1.0 - x))).exp()
    }
}

fn bump01_d(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        bump01(x) * (1.0 / (x * x) - 1.0 / ((1.0 - x) * (1.0 - x)))
    }
}

/// Analytic coefficient profiles `H^{αβ}(t, x)`, each with closed-form
/// first derivatives. The same shapes serve as test fields for `h` itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum HProfile {
    Zero,
    /// Constant symmetric coefficient matrix times a Gaussian in `(t, r*)`.
    ConstCoeffGaussian {
        coeffs: [[f64; 4]; 4],
        t0: f64,
        sigma_t: f64,
        c_rstar: f64,
        sigma_r: f64,
    },
    /// `H = amp · G(t, r*) · L̄ ⊗ L̄`: pure transversal component.
    LbarAligned {
        amp: f64,
        t0: f64,
        sigma_t: f64,
        c_rstar: f64,
        sigma_r: f64,
    },
    /// Constant multiple of the inverse Schwarzschild metric.
    ScaledSchwarzschild { c: f64 },
    /// Spatial identity block supported on `[5M/2, 7M/2]`, shrinking like
    /// `⟨t⟩^{-1/2}`; satisfies the trapped-set divergence condition through
    /// the sufficient bound `|H| ≲ r^{1/2} ⟨t⟩^{-1/2}`.
    PhotonSphereBump { amp: f64 },
    /// Far-field profile `amp · ⟨t-r*⟩^{-delta} χ_{r>r1}(r) L ⊗ L`: the
    /// transversal frame component vanishes identically, so the null-cone
    /// suppression holds with any margin.
    FarFieldNull { amp: f64, delta: f64, r1: f64 },
}

struct Gauss {
    v: f64,
    dt: f64,
    ds: f64,
}

fn gauss(t: f64, s: f64, t0: f64, st: f64, c: f64, sr: f64) -> Gauss {
    let ut = (t - t0) / st;
    let us = (s - c) / sr;
    let v = (-ut * ut - us * us).exp();
    Gauss {
        v,
        dt: -2.0 * ut / st * v,
        ds: -2.0 * us / sr * v,
    }
}

/// `∂_k ω_i = (δ_ki - ω_k ω_i)/r` assembled for reuse.
fn domega(r: f64, w: [f64; 3]) -> [[f64; 3]; 3] {
    let mut d = [[0.0; 3]; 3];
    for k in 0..3 {
        for i in 0..3 {
            d[k][i] = ((if k == i { 1.0 } else { 0.0 }) - w[k] * w[i]) / r;
        }
    }
    d
}

impl HProfile {
    pub fn value(&self, mass: Mass, t: f64, x: [f64; 3]) -> Matrix4<f64> {
        let p = SpacetimePoint::from_cartesian(mass, t, x).expect("profile point is exterior");
        let a = mass.lapse(p.r);
        match self {
            HProfile::Zero => Matrix4::zeros(),
            HProfile::ConstCoeffGaussian {
                coeffs,
                t0,
                sigma_t,
                c_rstar,
                sigma_r,
            } => {
                let g = gauss(t, p.rstar, *t0, *sigma_t, *c_rstar, *sigma_r);
                Matrix4::from_fn(|i, j| coeffs[i][j]) * g.v
            }
            HProfile::LbarAligned {
                amp,
                t0,
                sigma_t,
                c_rstar,
                sigma_r,
            } => {
                let g = gauss(t, p.rstar, *t0, *sigma_t, *c_rstar, *sigma_r);
                let lbar = Vector4::new(1.0, -a * p.omega[0], -a * p.omega[1], -a * p.omega[2]);
                (lbar * lbar.transpose()) * (amp * g.v)
            }
            HProfile::ScaledSchwarzschild { c } => {
                *c * metric_inverse_at(mass, &p, ChartTag::Rectangular)
                    .expect("r > 5M/2 for this profile")
                    .inv
            }
            HProfile::PhotonSphereBump { amp } => {
                let m = mass.value();
                let phi = bump01((p.r - 2.5 * m) / m);
                let tau = 1.0 / jb(t).sqrt();
                let mut h = Matrix4::zeros();
                for i in 1..4 {
                    h[(i, i)] = amp * phi * tau;
                }
                h
            }
            HProfile::FarFieldNull { amp, delta, r1 } => {
                let rho = t - p.rstar;
                let w = jb(rho).powf(-delta);
                let chi = smooth_step((p.r - r1) / r1);
                let l = Vector4::new(1.0, a * p.omega[0], a * p.omega[1], a * p.omega[2]);
                (l * l.transpose()) * (amp * w * chi)
            }
        }
    }

    /// `[∂_t H, ∂_1 H, ∂_2 H, ∂_3 H]`, all closed form.
    pub fn deriv(&self, mass: Mass, t: f64, x: [f64; 3]) -> [Matrix4<f64>; 4] {
        let p = SpacetimePoint::from_cartesian(mass, t, x).expect("profile point is exterior");
        let a = mass.lapse(p.r);
        let ap = 2.0 * mass.value() / (p.r * p.r);
        let w = p.omega;
        let dw = domega(p.r, w);
        // ∂_k r* = ω_k / a
        let sk = [w[0] / a, w[1] / a, w[2] / a];
        match self {
            HProfile::Zero => [Matrix4::zeros(); 4],
            HProfile::ConstCoeffGaussian {
                coeffs,
                t0,
                sigma_t,
                c_rstar,
                sigma_r,
            } => {
                let g = gauss(t, p.rstar, *t0, *sigma_t, *c_rstar, *sigma_r);
                let c = Matrix4::from_fn(|i, j| coeffs[i][j]);
                [
                    c * g.dt,
                    c * (g.ds * sk[0]),
                    c * (g.ds * sk[1]),
                    c * (g.ds * sk[2]),
                ]
            }
            HProfile::LbarAligned {
                amp,
                t0,
                sigma_t,
                c_rstar,
                sigma_r,
            } => {
                let g = gauss(t, p.rstar, *t0, *sigma_t, *c_rstar, *sigma_r);
                let lbar = Vector4::new(1.0, -a * w[0], -a * w[1], -a * w[2]);
                let ll = lbar * lbar.transpose();
                let mut out = [Matrix4::zeros(); 4];
                out[0] = ll * (amp * g.dt);
                for k in 0..3 {
                    let mut dl = Vector4::zeros();
                    for i in 0..3 {
                        dl[i + 1] = -(ap * w[k] * w[i] + a * dw[k][i]);
                    }
                    let dll = dl * lbar.transpose() + lbar * dl.transpose();
                    out[k + 1] = ll * (amp * g.ds * sk[k]) + dll * (amp * g.v);
                }
                out
            }
            HProfile::ScaledSchwarzschild { c } => {
                let d = rectangular_inverse_derivs(mass, &p);
                [Matrix4::zeros(), *c * d[0], *c * d[1], *c * d[2]]
            }
            HProfile::PhotonSphereBump { amp } => {
                let m = mass.value();
                let xr = (p.r - 2.5 * m) / m;
                let phi = bump01(xr);
                let dphi = bump01_d(xr) / m;
                let tb = jb(t);
                let tau = 1.0 / tb.sqrt();
                let dtau = -0.5 * t * tb.powf(-2.5);
                let mut spatial = Matrix4::zeros();
                for i in 1..4 {
                    spatial[(i, i)] = 1.0;
                }
                let mut out = [Matrix4::zeros(); 4];
                out[0] = spatial * (amp * phi * dtau);
                for k in 0..3 {
                    out[k + 1] = spatial * (amp * dphi * w[k] * tau);
                }
                out
            }
            HProfile::FarFieldNull { amp, delta, r1 } => {
                let rho = t - p.rstar;
                let b = jb(rho);
                let wv = b.powf(-delta);
                let dwv = -delta * rho * b.powf(-delta - 2.0);
                let xc = (p.r - r1) / r1;
                let chi = smooth_step(xc);
                let dchi = smooth_step_d(xc) / r1;
                let l = Vector4::new(1.0, a * w[0], a * w[1], a * w[2]);
                let ll = l * l.transpose();
                let mut out = [Matrix4::zeros(); 4];
                out[0] = ll * (amp * dwv * chi);
                for k in 0..3 {
                    let mut dl = Vector4::zeros();
                    for i in 0..3 {
                        dl[i + 1] = ap * w[k] * w[i] + a * dw[k][i];
                    }
                    let dll = dl * l.transpose() + l * dl.transpose();
                    out[k + 1] =
                        ll * amp * (-dwv * sk[k] * chi + wv * dchi * w[k]) + dll * (amp * wv * chi);
                }
                out
            }
        }
    }
}

/// The quasilinear coupling `h(t, x, u) = H(t,x) u + quadratic(t,x,u)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbationProfile {
    pub h: HProfile,
    /// Optional second-order part: a constant symmetric matrix times `u^2`.
    pub quadratic: Option<[[f64; 4]; 4]>,
    pub eps: f64,
    pub delta: f64,
}

impl PerturbationProfile {
    pub fn new(
        h: HProfile,
        quadratic: Option<[[f64; 4]; 4]>,
        eps: f64,
        delta: f64,
    ) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::domain("PerturbationProfile", "eps must be > 0"));
        }
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::domain(
                "PerturbationProfile",
                "delta must lie in (0, 1/2)",
            ));
        }
        Ok(PerturbationProfile {
            h,
            quadratic,
            eps,
            delta,
        })
    }
}

/// `h(t, x, u) = H(t,x) u + quadratic part`; vanishes at `u = 0`.
pub fn h_of_u(
    profile: &PerturbationProfile,
    mass: Mass,
    p: &SpacetimePoint,
    u: f64,
) -> Matrix4<f64> {
    let mut h = profile.h.value(mass, p.t, p.x()) * u;
    if let Some(q) = &profile.quadratic {
        h += Matrix4::from_fn(|i, j| q[i][j]) * (u * u);
    }
    h
}

/// Shapes of the structural decay envelopes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnvelopeKind {
    /// Bounded coefficients.
    SZOne,
    /// `⟨t⟩^{1+δ} / (r^{1+δ} ⟨t-r*⟩^{1/2+δ})` for coefficient derivatives
    /// in the far region.
    DerivCoeff,
    /// `ε ⟨t⟩^{-1/2}` near the trapped set.
    CptTHalf,
    /// `ε ⟨t⟩^{-1-δ}` for time derivatives near the trapped set.
    CptTOneDelta,
    /// `ε r^{-δ}` in the intermediate region.
    IntrmR,
    /// `ε ⟨t-r*⟩^{1/2-δ} ⟨t⟩^{-1/2-δ}` for generic components at the cone.
    ConeGood,
    /// `⟨t-r*⟩^{δ} ⟨t⟩^{-δ}` for the transversal component at the cone.
    ConeBadLl,
    /// `r^{1/2} ⟨t⟩^{-1/2}`: the sufficient trapped-set bound on `H`.
    WPhotosphere,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecayEnvelope {
    pub kind: EnvelopeKind,
    pub eps: f64,
    pub delta: f64,
    pub r1: f64,
}

impl DecayEnvelope {
    pub fn eval(&self, t: f64, r: f64, rstar: f64) -> f64 {
        let d = self.delta;
        let rho = t - rstar;
        match self.kind {
            EnvelopeKind::SZOne => 1.0,
            EnvelopeKind::DerivCoeff => {
                jb(t).powf(1.0 + d) / (r.powf(1.0 + d) * jb(rho).powf(0.5 + d))
            }
            EnvelopeKind::CptTHalf => self.eps / jb(t).sqrt(),
            EnvelopeKind::CptTOneDelta => self.eps / jb(t).powf(1.0 + d),
            EnvelopeKind::IntrmR => self.eps * r.powf(-d),
            EnvelopeKind::ConeGood => self.eps * jb(rho).powf(0.5 - d) * jb(t).powf(-0.5 - d),
            EnvelopeKind::ConeBadLl => jb(rho).powf(d) * jb(t).powf(-d),
            EnvelopeKind::WPhotosphere => r.sqrt() / jb(t).sqrt(),
        }
    }
}

/// Which scalar reduction of a sampled tensor field is compared against an
/// envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldComponent {
    MaxAbsValue,
    /// Largest entry over all four coordinate derivatives.
    MaxAbsDeriv,
    /// Transversal null-frame component of the value.
    FrameLl,
}

/// A tensor field sampled over spacetime points, with derivatives.
#[derive(Debug, Clone)]
pub struct TensorFieldSample {
    pub points: Vec<SpacetimePoint>,
    pub values: Vec<Matrix4<f64>>,
    pub derivs: Vec<[Matrix4<f64>; 4]>,
}

impl TensorFieldSample {
    pub fn from_profile(mass: Mass, profile: &HProfile, points: Vec<SpacetimePoint>) -> Self {
        let values = points
            .iter()
            .map(|p| profile.value(mass, p.t, p.x()))
            .collect();
        let derivs = points
            .iter()
            .map(|p| profile.deriv(mass, p.t, p.x()))
            .collect();
        TensorFieldSample {
            points,
            values,
            derivs,
        }
    }
}

/// Result of an envelope comparison: the validator never fails, it reports.
#[derive(Debug, Clone, Copy)]
pub struct EnvelopeReport {
    pub max_ratio: f64,
    pub argmax: Option<(f64, f64)>,
}

/// Max over the sample of `|field| / envelope`, restricted to `region`.
pub fn envelope_validate(
    mass: Mass,
    field: &TensorFieldSample,
    component: FieldComponent,
    env: &DecayEnvelope,
    region: &SpacetimeRegion,
) -> Result<EnvelopeReport> {
    let mut max_ratio = 0.0f64;
    let mut argmax = None;
    let mut seen = false;
    for (k, p) in field.points.iter().enumerate() {
        if !region.contains(mass, p.t, p.r, p.rstar) {
            continue;
        }
        seen = true;
        let data = match component {
            FieldComponent::MaxAbsValue => field.values[k].abs().max(),
            FieldComponent::MaxAbsDeriv => field.derivs[k]
                .iter()
                .map(|m| m.abs().max())
                .fold(0.0, f64::max),
            FieldComponent::FrameLl => frame_decompose(mass, p, &field.values[k])?.h_ll.abs(),
        };
        let e = env.eval(p.t, p.r, p.rstar);
        let ratio = data / e;
        if ratio > max_ratio {
            max_ratio = ratio;
            argmax = Some((p.t, p.r));
        }
    }
    if !seen {
        return Err(Error::invalid(
            "envelope_validate",
            "no sample points inside the requested region",
        ));
    }
    Ok(EnvelopeReport { max_ratio, argmax })
}

/// `√|det g_{αβ}|` from the inverse-component matrix.
pub fn sqrt_abs_det_from_inverse(inv: &Matrix4<f64>) -> f64 {
    1.0 / inv.determinant().abs().sqrt()
}

fn full_inverse_metric(mass: Mass, h: &HProfile, t: f64, x: [f64; 3]) -> Matrix4<f64> {
    let p = SpacetimePoint::from_cartesian(mass, t, x).expect("exterior point");
    metric_inverse_at(mass, &p, ChartTag::Rectangular)
        .expect("r > 5M/2")
        .inv
        + h.value(mass, t, x)
}

/// Divergence mismatch
/// `W^β = |g_S|^{-1/2} ∂_α(g_S^{αβ} |g_S|^{1/2}) - |g|^{-1/2} ∂_α(g^{αβ} |g|^{1/2})`,
/// evaluated through the determinant-derivative identity
/// `∂_μ ln|g| = -g_{αβ} ∂_μ g^{αβ}`. Vanishes identically for `h = 0`.
pub fn compute_w(mass: Mass, p: &SpacetimePoint, h: &HProfile) -> Result<Vector4<f64>> {
    let x = p.x();
    let gs = metric_inverse_at(mass, p, ChartTag::Rectangular)?.inv;
    let hv = h.value(mass, p.t, x);
    let g = gs + hv;
    if g.determinant() >= 0.0 {
        return Err(Error::domain(
            "compute_w",
            "perturbed metric lost its Lorentzian signature",
        ));
    }
    let g_cov = g
        .try_inverse()
        .ok_or_else(|| Error::domain("compute_w", "perturbed inverse metric is singular"))?;
    let gs_cov = gs.try_inverse().expect("Schwarzschild metric invertible");

    let ds = rectangular_inverse_derivs(mass, p);
    let dh = h.deriv(mass, p.t, x);
    let dgs = [Matrix4::zeros(), ds[0], ds[1], ds[2]];
    let dg = [
        dgs[0] + dh[0],
        dgs[1] + dh[1],
        dgs[2] + dh[2],
        dgs[3] + dh[3],
    ];

    let contract = |cov: &Matrix4<f64>, d: &Matrix4<f64>| -> f64 {
        let mut s = 0.0;
        for c in 0..4 {
            for e in 0..4 {
                s += cov[(c, e)] * d[(c, e)];
            }
        }
        s
    };

    let mut w = Vector4::zeros();
    for beta in 0..4 {
        let mut term_s = 0.0;
        let mut term_g = 0.0;
        for alpha in 0..4 {
            // ∂_α ln √|g| = -(1/2) g_{γδ} ∂_α g^{γδ}
            let dln_s = -0.5 * contract(&gs_cov, &dgs[alpha]);
            let dln_g = -0.5 * contract(&g_cov, &dg[alpha]);
            term_s += dgs[alpha][(alpha, beta)] + gs[(alpha, beta)] * dln_s;
            term_g += dg[alpha][(alpha, beta)] + g[(alpha, beta)] * dln_g;
        }
        w[beta] = term_s - term_g;
    }
    Ok(w)
}

/// Independent check of [`compute_w`]: centered finite differences of the
/// defining flux expression, with the determinants evaluated directly and
/// no use of the determinant-derivative identity.
pub fn compute_w_fd(mass: Mass, p: &SpacetimePoint, h: &HProfile, step: f64) -> Vector4<f64> {
    let here = (p.t, p.x());
    let gs_here = metric_inverse_at(mass, p, ChartTag::Rectangular).expect("r > 5M/2");
    let sqrt_s = sqrt_abs_det_from_inverse(&gs_here.inv);
    let sqrt_g = sqrt_abs_det_from_inverse(&full_inverse_metric(mass, h, p.t, p.x()));
    let mut w = Vector4::zeros();
    for beta in 0..4 {
        let mut div_s = 0.0;
        let mut div_g = 0.0;
        for alpha in 0..4 {
            let f_s = |q: Event| -> f64 {
                let pt = SpacetimePoint::from_cartesian(mass, q.0, q.1).expect("exterior");
                let g = metric_inverse_at(mass, &pt, ChartTag::Rectangular).expect("r > 5M/2");
                g.inv[(alpha, beta)] * sqrt_abs_det_from_inverse(&g.inv)
            };
            let f_g = |q: Event| -> f64 {
                let g = full_inverse_metric(mass, h, q.0, q.1);
                g[(alpha, beta)] * sqrt_abs_det_from_inverse(&g)
            };
            div_s += fd::partial(&f_s, here, alpha, step);
            div_g += fd::partial(&f_g, here, alpha, step);
        }
        w[beta] = div_s / sqrt_s - div_g / sqrt_g;
    }
    w
}

/// Measured constants for the tensor-density difference
/// `θ^{αβ} = √|g| g^{αβ} - √|g_S| g_S^{αβ}`: the ratios `|θ| / (|h| √|g|)`
/// and `|θ^{L̄L̄}| / (|h^{L̄L̄}| √|g|)` over a sample.
#[derive(Debug, Clone, Copy)]
pub struct ThetaReport {
    pub c_all: f64,
    pub c_ll: f64,
}

pub fn theta_report(mass: Mass, h: &HProfile, points: &[SpacetimePoint]) -> Result<ThetaReport> {
    let mut c_all = 0.0f64;
    let mut c_ll = 0.0f64;
    for p in points {
        let gs = metric_inverse_at(mass, p, ChartTag::Rectangular)?.inv;
        let hv = h.value(mass, p.t, p.x());
        let g = gs + hv;
        let sg = sqrt_abs_det_from_inverse(&g);
        let ss = sqrt_abs_det_from_inverse(&gs);
        let theta = sg * g - ss * gs;
        let denom = hv.abs().max() * sg;
        if denom > 1e-300 {
            c_all = c_all.max(theta.abs().max() / denom);
        }
        let h_ll = frame_decompose(mass, p, &hv)?.h_ll.abs();
        let th_ll = frame_decompose(mass, p, &theta)?.h_ll.abs();
        if h_ll * sg > 1e-300 {
            c_ll = c_ll.max(th_ll / (h_ll * sg));
        }
    }
    Ok(ThetaReport { c_all, c_ll })
}

/// Analytic scalar test fields with closed-form gradient and Hessian.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ScalarProfile {
    GaussianTR {
        amp: f64,
        t0: f64,
        sigma_t: f64,
        c_rstar: f64,
        sigma_r: f64,
    },
}

impl ScalarProfile {
    pub fn value(&self, mass: Mass, t: f64, x: [f64; 3]) -> f64 {
        let p = SpacetimePoint::from_cartesian(mass, t, x).expect("exterior");
        match self {
            ScalarProfile::GaussianTR {
                amp,
                t0,
                sigma_t,
                c_rstar,
                sigma_r,
            } => amp * gauss(t, p.rstar, *t0, *sigma_t, *c_rstar, *sigma_r).v,
        }
    }

    pub fn grad(&self, mass: Mass, t: f64, x: [f64; 3]) -> Vector4<f64> {
        let p = SpacetimePoint::from_cartesian(mass, t, x).expect("exterior");
        let a = mass.lapse(p.r);
        match self {
            ScalarProfile::GaussianTR {
                amp,
                t0,
                sigma_t,
                c_rstar,
                sigma_r,
            } => {
                let g = gauss(t, p.rstar, *t0, *sigma_t, *c_rstar, *sigma_r);
                let mut v = Vector4::zeros();
                v[0] = amp * g.dt;
                for i in 0..3 {
                    v[i + 1] = amp * g.ds * p.omega[i] / a;
                }
                v
            }
        }
    }

    pub fn hess(&self, mass: Mass, t: f64, x: [f64; 3]) -> Matrix4<f64> {
        let p = SpacetimePoint::from_cartesian(mass, t, x).expect("exterior");
        let a = mass.lapse(p.r);
        let ap = 2.0 * mass.value() / (p.r * p.r);
        let w = p.omega;
        let dw = domega(p.r, w);
        match self {
            ScalarProfile::GaussianTR {
                amp,
                t0,
                sigma_t,
                c_rstar,
                sigma_r,
            } => {
                let st = *sigma_t;
                let sr = *sigma_r;
                let g = gauss(t, p.rstar, *t0, st, *c_rstar, sr);
                let ut = (t - t0) / st;
                let us = (p.rstar - c_rstar) / sr;
                let f_tt = (4.0 * ut * ut / (st * st) - 2.0 / (st * st)) * g.v;
                let f_ss = (4.0 * us * us / (sr * sr) - 2.0 / (sr * sr)) * g.v;
                let f_ts = 4.0 * ut * us / (st * sr) * g.v;
                let mut hmat = Matrix4::zeros();
                hmat[(0, 0)] = amp * f_tt;
                for i in 0..3 {
                    let si = w[i] / a;
                    hmat[(0, i + 1)] = amp * f_ts * si;
                    hmat[(i + 1, 0)] = amp * f_ts * si;
                    for j in 0..3 {
                        let sj = w[j] / a;
                        // ∂_j s_i with s_i = ω_i / a
                        let dsi = dw[j][i] / a - w[i] * ap * w[j] / (a * a);
                        hmat[(i + 1, j + 1)] = amp * (f_ss * si * sj + g.ds * dsi);
                    }
                }
                hmat
            }
        }
    }
}

/// The five summands of the null-frame split of `(□_g - □_{g_S}) u`.
#[derive(Debug, Clone, Copy)]
pub struct NullSplit {
    /// `h^{L̄L̄} ∂_{L̄}^2 u`
    pub principal: f64,
    /// Second-derivative terms carrying at least one tangential direction.
    pub t2: f64,
    /// `|g|^{-1/2} ∂_{L̄}(√|g| h^{L̄L̄}) ∂_{L̄} u`
    pub d_ll: f64,
    /// Remaining first-order terms.
    pub t1: f64,
    /// Zeroth-order frame-connection terms (no derivatives of `h`).
    pub t0: f64,
}

impl NullSplit {
    pub fn sum(&self) -> f64 {
        self.principal + self.t2 + self.d_ll + self.t1 + self.t0
    }
}

/// Split evaluation at a point. Every derivative on the split side is a
/// finite difference (directional and nested-directional where the frame
/// calculus demands it) so that agreement with [`box_difference_direct`]
/// is a genuine consistency check rather than an algebraic tautology.
pub fn null_operator_split(
    mass: Mass,
    p: &SpacetimePoint,
    h: &HProfile,
    u: &ScalarProfile,
    step: f64,
) -> Result<NullSplit> {
    if p.r <= 2.5 * mass.value() {
        return Err(Error::domain(
            "null_operator_split",
            "the split is evaluated on the far-region chart (r > 5M/2)",
        ));
    }
    let here: Event = (p.t, p.x());
    let frame = null_frame_at(mass, p)?;
    let gframe = frame.g_l_lbar();
    let a = mass.lapse(p.r);
    let ap = 2.0 * mass.value() / (p.r * p.r);

    let u_val = |q: Event| u.value(mass, q.0, q.1);
    let lbar_dir = [frame.lbar[0], frame.lbar[1], frame.lbar[2], frame.lbar[3]];

    // Gradient and Hessian of u by centered differences.
    let grad_u = fd::gradient(&u_val, here, step);
    let hess_u = fd::hessian(&u_val, here, step);

    // L̄(L̄ u) as a nested directional derivative of the field L̄^α ∂_α u.
    let lbar_u_field = |q: Event| -> f64 {
        let pq = SpacetimePoint::from_cartesian(mass, q.0, q.1).expect("exterior");
        let fq = null_frame_at(mass, &pq).expect("exterior");
        let g = fd::gradient(&u_val, q, step);
        (0..4).map(|k| fq.lbar[k] * g[k]).sum()
    };
    let dll2_u = fd::directional(&lbar_u_field, here, lbar_dir, step);
    let lbar_u: f64 = (0..4).map(|k| frame.lbar[k] * grad_u[k]).sum();
    let drstar_u: f64 = (1..4).map(|i| a * p.omega[i - 1] * grad_u[i]).sum();

    // Frame components of h at the point.
    let hv = h.value(mass, p.t, p.x());
    let comps = frame_decompose(mass, p, &hv)?;
    let h_ll = comps.h_ll;

    let principal = h_ll * dll2_u;

    // Tangential second-derivative block: dual covectors extract the
    // (L, A, B) expansion coefficients.
    let duals = [
        frame.lbar_low / gframe,
        Vector4::new(0.0, frame.a[1], frame.a[2], frame.a[3]),
        Vector4::new(0.0, frame.b[1], frame.b[2], frame.b[3]),
    ];
    let tvecs = [frame.l, frame.a, frame.b];
    let mut t2 = 0.0;
    for (ti, tv) in tvecs.iter().enumerate() {
        // h^{T β} = (dual T)_α h^{αβ}
        let ht: Vector4<f64> = hv * duals[ti];
        for beta in 0..4 {
            let coeff = comps.h_lt[ti] * frame.lbar[beta] + ht[beta];
            let tdd: f64 = (0..4).map(|al| tv[al] * hess_u[al][beta]).sum();
            t2 += coeff * tdd;
        }
    }

    // √|g| h^{L̄L̄} as a scalar field, differentiated along L̄.
    let sqrtg_at = |q: Event| sqrt_abs_det_from_inverse(&full_inverse_metric(mass, h, q.0, q.1));
    let phi = |q: Event| -> f64 {
        let pq = SpacetimePoint::from_cartesian(mass, q.0, q.1).expect("exterior");
        let c = frame_decompose(mass, &pq, &h.value(mass, q.0, q.1)).expect("exterior");
        sqrtg_at(q) * c.h_ll
    };
    let sqrt_g = sqrtg_at(here);
    let d_ll = fd::directional(&phi, here, lbar_dir, step) / sqrt_g * lbar_u;

    // Zeroth order: frame-connection corrections, proportional to h itself.
    let lh: Vector4<f64> = hv * frame.l_low;
    let lh_omega: f64 = (0..3).map(|i| lh[i + 1] * p.omega[i]).sum();
    let corr = ap * 2.0 * lh_omega / (gframe * gframe);
    let t0 = -h_ll * ap * drstar_u - corr * lbar_u;

    // First-order remainder: full divergence term plus the log-density
    // term, minus the pieces already booked under d_ll and t0.
    let gs = metric_inverse_at(mass, p, ChartTag::Rectangular)?.inv;
    let mut div_term = 0.0;
    for beta in 0..4 {
        let mut jsum = 0.0;
        for alpha in 0..4 {
            let f = |q: Event| -> f64 { sqrtg_at(q) * h.value(mass, q.0, q.1)[(alpha, beta)] };
            jsum += fd::partial(&f, here, alpha, step);
        }
        div_term += jsum / sqrt_g * grad_u[beta];
    }
    let log_ratio = |q: Event| -> f64 {
        let pq = SpacetimePoint::from_cartesian(mass, q.0, q.1).expect("exterior");
        let gsq = metric_inverse_at(mass, &pq, ChartTag::Rectangular)
            .expect("exterior")
            .inv;
        let gq = gsq + h.value(mass, q.0, q.1);
        (gsq.determinant() / gq.determinant()).abs().ln()
    };
    let mut log_term = 0.0;
    for alpha in 0..4 {
        let dl = fd::partial(&log_ratio, here, alpha, step);
        for beta in 0..4 {
            log_term += 0.5 * dl * gs[(alpha, beta)] * grad_u[beta];
        }
    }
    let t1 = div_term + log_term - d_ll + corr * lbar_u;

    Ok(NullSplit {
        principal,
        t2,
        d_ll,
        t1,
        t0,
    })
}

/// `(□_g - □_{g_S}) u` evaluated directly from analytic derivatives of the
/// profile and the test field:
/// `h^{αβ} ∂_α∂_β u + (|g|^{-1/2} ∂_α(√|g| h^{αβ}) + ½ ∂_α ln(|g|/|g_S|) g_S^{αβ}) ∂_β u`.
pub fn box_difference_direct(
    mass: Mass,
    p: &SpacetimePoint,
    h: &HProfile,
    u: &ScalarProfile,
) -> Result<f64> {
    let x = p.x();
    let gs = metric_inverse_at(mass, p, ChartTag::Rectangular)?.inv;
    let hv = h.value(mass, p.t, x);
    let g = gs + hv;
    let g_cov = g
        .try_inverse()
        .ok_or_else(|| Error::domain("box_difference_direct", "singular metric"))?;
    let gs_cov = gs.try_inverse().expect("invertible");

    let ds = rectangular_inverse_derivs(mass, p);
    let dgs = [Matrix4::zeros(), ds[0], ds[1], ds[2]];
    let dh = h.deriv(mass, p.t, x);

    let grad_u = u.grad(mass, p.t, x);
    let hess_u = u.hess(mass, p.t, x);

    let contract = |cov: &Matrix4<f64>, d: &Matrix4<f64>| -> f64 {
        let mut s = 0.0;
        for c in 0..4 {
            for e in 0..4 {
                s += cov[(c, e)] * d[(c, e)];
            }
        }
        s
    };

    let mut total = 0.0;
    for alpha in 0..4 {
        for beta in 0..4 {
            total += hv[(alpha, beta)] * hess_u[(alpha, beta)];
        }
    }
    for beta in 0..4 {
        let mut v = 0.0;
        for alpha in 0..4 {
            let dg_a = dgs[alpha] + dh[alpha];
            let dln_g = -contract(&g_cov, &dg_a);
            let dln_s = -contract(&gs_cov, &dgs[alpha]);
            v += dh[alpha][(alpha, beta)] + 0.5 * hv[(alpha, beta)] * dln_g;
            v += 0.5 * (dln_g - dln_s) * gs[(alpha, beta)];
        }
        total += v * grad_u[beta];
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::tortoise_of_r;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn m1() -> Mass {
        Mass::new(1.0).unwrap()
    }

    fn sym_coeffs(rng: &mut impl Rng) -> [[f64; 4]; 4] {
        let mut c = [[0.0; 4]; 4];
        for a in 0..4 {
            for b in a..4 {
                let v = rng.gen_range(-0.5..0.5);
                c[a][b] = v;
                c[b][a] = v;
            }
        }
        c
    }

    #[test]
    fn h_of_u_examples() {
        let mass = m1();
        let p = SpacetimePoint::new(mass, 1.0, 8.0, [0.0, 0.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = HProfile::ConstCoeffGaussian {
            coeffs: sym_coeffs(&mut rng),
            t0: 0.0,
            sigma_t: 5.0,
            c_rstar: tortoise_of_r(mass, 8.0).unwrap(),
            sigma_r: 4.0,
        };
        let quad = sym_coeffs(&mut rng);
        let profile = PerturbationProfile::new(h.clone(), Some(quad), 1e-3, 0.1).unwrap();

        // u = 0 gives the zero tensor
        assert_eq!(h_of_u(&profile, mass, &p, 0.0).abs().max(), 0.0);

        // linearity without the quadratic part
        let lin = PerturbationProfile::new(h.clone(), None, 1e-3, 0.1).unwrap();
        let one = h_of_u(&lin, mass, &p, 1e-3);
        let two = h_of_u(&lin, mass, &p, 2e-3);
        assert!((two - 2.0 * one).abs().max() == 0.0);

        // quadratic part enters exactly as coeff * u^2
        let u = 0.37;
        let got = h_of_u(&profile, mass, &p, u);
        let want = h.value(mass, p.t, p.x()) * u + Matrix4::from_fn(|i, j| quad[i][j]) * u * u;
        assert!((got - want).abs().max() < 1e-15);
    }

    #[test]
    fn profile_derivatives_match_fd() {
        let mass = m1();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let profiles = vec![
            HProfile::ConstCoeffGaussian {
                coeffs: sym_coeffs(&mut rng),
                t0: 1.0,
                sigma_t: 6.0,
                c_rstar: 45.0,
                sigma_r: 7.0,
            },
            HProfile::LbarAligned {
                amp: 0.4,
                t0: 0.0,
                sigma_t: 8.0,
                c_rstar: 50.0,
                sigma_r: 9.0,
            },
            HProfile::FarFieldNull {
                amp: 0.3,
                delta: 0.1,
                r1: 20.0,
            },
            HProfile::PhotonSphereBump { amp: 0.2 },
            HProfile::ScaledSchwarzschild { c: 0.05 },
        ];
        for h in &profiles {
            for &(t, r) in &[(2.0, 48.0), (5.0, 52.0), (1.0, 3.1)] {
                if matches!(h, HProfile::ScaledSchwarzschild { .. }) && r < 2.6 {
                    continue;
                }
                let w = [0.48, 0.6, 0.64];
                let p = SpacetimePoint::new(mass, t, r, w).unwrap();
                let analytic = h.deriv(mass, t, p.x());
                for axis in 0..4 {
                    let comp = |q: Event| {
                        let m = h.value(mass, q.0, q.1);
                        m[(0, 0)] + m[(1, 1)] + m[(1, 3)]
                    };
                    let want =
                        analytic[axis][(0, 0)] + analytic[axis][(1, 1)] + analytic[axis][(1, 3)];
                    let e1 = (fd::partial(&comp, (t, p.x()), axis, 0.02) - want).abs();
                    let e2 = (fd::partial(&comp, (t, p.x()), axis, 0.01) - want).abs();
                    // second-order convergence of the check itself
                    if e1 > 1e-11 && e2 > 1e-12 {
                        let order = (e1 / e2).log2();
                        assert!(order > 1.9, "order {order} for {h:?} axis {axis} r {r}");
                    } else {
                        assert!(e2 < 1e-10, "fd residual {e2} for {h:?} axis {axis} r {r}");
                    }
                }
            }
        }
    }

    #[test]
    fn envelope_validate_reports_exact_half() {
        let mass = m1();
        let env = DecayEnvelope {
            kind: EnvelopeKind::ConeGood,
            eps: 1.0,
            delta: 0.1,
            r1: 20.0,
        };
        let region = SpacetimeRegion::TimeSlab { t0: 0.0, t1: 100.0 };
        let mut points = Vec::new();
        let mut values = Vec::new();
        let mut derivs = Vec::new();
        for k in 0..40 {
            let t = 1.0 + k as f64;
            let p = SpacetimePoint::new(mass, t, 30.0 + k as f64, [1.0, 0.0, 0.0]).unwrap();
            let mut v = Matrix4::zeros();
            v[(0, 0)] = 0.5 * env.eval(p.t, p.r, p.rstar);
            points.push(p);
            values.push(v);
            derivs.push([Matrix4::zeros(); 4]);
        }
        let sample = TensorFieldSample {
            points,
            values,
            derivs,
        };
        let rep =
            envelope_validate(mass, &sample, FieldComponent::MaxAbsValue, &env, &region).unwrap();
        assert_abs_diff_eq!(rep.max_ratio, 0.5, epsilon = 1e-12);

        let zero = TensorFieldSample {
            points: sample.points.clone(),
            values: vec![Matrix4::zeros(); sample.points.len()],
            derivs: vec![[Matrix4::zeros(); 4]; sample.points.len()],
        };
        let rep =
            envelope_validate(mass, &zero, FieldComponent::MaxAbsValue, &env, &region).unwrap();
        assert_eq!(rep.max_ratio, 0.0);

        let empty = SpacetimeRegion::TimeSlab { t0: 1e6, t1: 2e6 };
        assert!(envelope_validate(mass, &zero, FieldComponent::MaxAbsValue, &env, &empty).is_err());
    }

    #[test]
    fn w_vanishes_for_unperturbed_metric() {
        let mass = m1();
        let p = SpacetimePoint::new(mass, 3.0, 12.0, [0.6, 0.64, 0.48]).unwrap();
        let w = compute_w(mass, &p, &HProfile::Zero).unwrap();
        assert!(w.abs().max() < 1e-12);
    }

    #[test]
    fn w_time_component_vanishes_for_scaled_metric() {
        let mass = m1();
        let p = SpacetimePoint::new(mass, 0.0, 9.0, [0.0, 0.6, 0.8]).unwrap();
        let c = 0.01;
        let w = compute_w(mass, &p, &HProfile::ScaledSchwarzschild { c }).unwrap();
        assert!(w[0].abs() < 1e-13, "W^t = {}", w[0]);
        // spatial part has the known closed form c · 2M ω^j / r^2
        for j in 0..3 {
            let want = c * 2.0 / (9.0 * 9.0) * p.omega[j];
            assert_abs_diff_eq!(w[j + 1], want, epsilon = 1e-12);
        }
    }

    #[test]
    fn w_matches_fd_oracle() {
        let mass = m1();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = HProfile::ConstCoeffGaussian {
            coeffs: sym_coeffs(&mut rng),
            t0: 2.0,
            sigma_t: 5.0,
            c_rstar: 40.0,
            sigma_r: 6.0,
        };
        for _ in 0..5 {
            let r = rng.gen_range(38.0..46.0);
            let t = rng.gen_range(0.0..4.0);
            let p = SpacetimePoint::new(mass, t, r, [0.6, 0.0, 0.8]).unwrap();
            let w = compute_w(mass, &p, &h).unwrap();
            let w_fd = compute_w_fd(mass, &p, &h, 1e-3);
            let scale = w.abs().max().max(1e-10);
            assert!(
                (w - w_fd).abs().max() / scale < 1e-6,
                "analytic {w:?} vs fd {w_fd:?}"
            );
        }
    }

    #[test]
    fn w_pointwise_bound_reported() {
        let mass = m1();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let h = HProfile::ConstCoeffGaussian {
            coeffs: sym_coeffs(&mut rng),
            t0: 0.0,
            sigma_t: 8.0,
            c_rstar: 30.0,
            sigma_r: 5.0,
        };
        let mut max_ratio = 0.0f64;
        for _ in 0..50 {
            let r = rng.gen_range(25.0..40.0);
            let p =
                SpacetimePoint::new(mass, rng.gen_range(-3.0..3.0), r, [1.0, 0.0, 0.0]).unwrap();
            let w = compute_w(mass, &p, &h).unwrap().abs().max();
            let hv = h.value(mass, p.t, p.x()).abs().max();
            let dv: f64 = h
                .deriv(mass, p.t, p.x())
                .iter()
                .map(|m| m.abs().max())
                .fold(0.0, f64::max);
            if hv + dv > 1e-14 {
                max_ratio = max_ratio.max(w / (hv + dv));
            }
        }
        assert!(max_ratio.is_finite() && max_ratio > 0.0);
        assert!(max_ratio < 50.0, "ratio {max_ratio}");
    }

    #[test]
    fn w_signature_loss_detected() {
        let mass = m1();
        let p = SpacetimePoint::new(mass, 0.0, 6.0, [1.0, 0.0, 0.0]).unwrap();
        let h = HProfile::ScaledSchwarzschild { c: -1.0 };
        assert!(compute_w(mass, &p, &h).is_err());
    }

    #[test]
    fn theta_bounds_are_tame() {
        let mass = m1();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let h = HProfile::ConstCoeffGaussian {
            coeffs: sym_coeffs(&mut rng),
            t0: 0.0,
            sigma_t: 10.0,
            c_rstar: 35.0,
            sigma_r: 8.0,
        };
        let points: Vec<_> = (0..60)
            .map(|k| {
                SpacetimePoint::new(mass, 0.3 * k as f64, 30.0 + 0.2 * k as f64, [0.0, 0.8, 0.6])
                    .unwrap()
            })
            .collect();
        let rep = theta_report(mass, &h, &points).unwrap();
        assert!(rep.c_all.is_finite() && rep.c_all < 20.0, "{rep:?}");
        assert!(rep.c_ll.is_finite() && rep.c_ll < 20.0, "{rep:?}");
    }

    #[test]
    fn scalar_profile_derivatives_match_fd() {
        let mass = m1();
        let u = ScalarProfile::GaussianTR {
            amp: 1.3,
            t0: 0.5,
            sigma_t: 6.0,
            c_rstar: 50.0,
            sigma_r: 5.0,
        };
        let p = SpacetimePoint::new(mass, 1.0, 55.0, [0.6, 0.64, 0.48]).unwrap();
        let here = (p.t, p.x());
        let f = |q: Event| u.value(mass, q.0, q.1);
        let g = u.grad(mass, p.t, p.x());
        let gh = fd::gradient(&f, here, 1e-3);
        for k in 0..4 {
            assert!((g[k] - gh[k]).abs() < 1e-7, "grad slot {k}");
        }
        let hm = u.hess(mass, p.t, p.x());
        let hh = fd::hessian(&f, here, 1e-2);
        for a in 0..4 {
            for b in 0..4 {
                assert!((hm[(a, b)] - hh[a][b]).abs() < 1e-5, "hess {a}{b}");
            }
        }
    }

    #[test]
    fn split_zero_perturbation_gives_zero() {
        let mass = m1();
        let p = SpacetimePoint::new(mass, 1.0, 60.0, [0.6, 0.64, 0.48]).unwrap();
        let u = ScalarProfile::GaussianTR {
            amp: 1.0,
            t0: 0.0,
            sigma_t: 6.0,
            c_rstar: 55.0,
            sigma_r: 5.0,
        };
        let s = null_operator_split(mass, &p, &HProfile::Zero, &u, 0.25).unwrap();
        assert_eq!(s.principal, 0.0);
        assert_eq!(s.t2, 0.0);
        assert_eq!(s.d_ll, 0.0);
        assert!(s.t1.abs() < 1e-12);
        assert_eq!(s.t0, 0.0);
    }

    #[test]
    fn split_pure_lbar_profile_has_no_tangential_block() {
        let mass = m1();
        let p = SpacetimePoint::new(mass, 0.5, 58.0, [0.0, 0.6, 0.8]).unwrap();
        let h = HProfile::LbarAligned {
            amp: 0.1,
            t0: 0.0,
            sigma_t: 8.0,
            c_rstar: p.rstar,
            sigma_r: 6.0,
        };
        let u = ScalarProfile::GaussianTR {
            amp: 1.0,
            t0: 0.0,
            sigma_t: 7.0,
            c_rstar: p.rstar + 1.0,
            sigma_r: 5.0,
        };
        let s = null_operator_split(mass, &p, &h, &u, 0.2).unwrap();
        assert!(
            s.t2.abs() < 1e-11 * s.principal.abs().max(1e-3),
            "t2 = {} vs principal = {}",
            s.t2,
            s.principal
        );
        assert!(s.principal.abs() > 1e-6);
    }

    #[test]
    fn split_sum_converges_to_direct_difference() {
        let mass = m1();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..3 {
            let c = tortoise_of_r(mass, 55.0).unwrap();
            let h = HProfile::ConstCoeffGaussian {
                coeffs: sym_coeffs(&mut rng),
                t0: 0.0,
                sigma_t: 7.0,
                c_rstar: c,
                sigma_r: 6.0,
            };
            let u = ScalarProfile::GaussianTR {
                amp: 1.0,
                t0: 0.5,
                sigma_t: 6.0,
                c_rstar: c + rng.gen_range(-2.0..2.0),
                sigma_r: 5.0,
            };
            let p = SpacetimePoint::new(mass, 0.8, rng.gen_range(52.0..58.0), [0.6, 0.0, 0.8])
                .unwrap();
            let direct = box_difference_direct(mass, &p, &h, &u).unwrap();
            let res =
                |s: f64| (null_operator_split(mass, &p, &h, &u, s).unwrap().sum() - direct).abs();
            let e1 = res(0.4);
            let e2 = res(0.2);
            let e3 = res(0.1);
            let order = (e1 / e2).log2().min((e2 / e3).log2());
            assert!(order >= 1.9, "observed order {order} ({e1:e} {e2:e} {e3:e})");
        }
    }
}

//! Reaction profiles `g` and entropy densities `psi`.
//!
//! A [`GSpec`] fixes the fitness `f = -g(rho / rho_inf)` of the flow; a
//! [`PsiSpec`] fixes the Lyapunov functional `E_psi`. Both are closed-form
//! families. Values that are genuinely undefined at `s = 0` (such as `g(0)`
//! for the logarithm, or `psi''(0)`) are reported as `None`; downstream code
//! only needs the finite combinations `s g(s)`, `G(s)` and `psi(0)`.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};

/// Step used for one-sided slopes at `s = 0` when the exact slope is infinite.
pub const ZERO_SLOPE_STEP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GFamily {
    Log,
    Power,
    Arctangential,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum GKind {
    Log,
    Power { alpha: f64 },
    Arctangential,
}

/// A validated reaction profile `g`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileJson", into = "ProfileJson")]
pub struct GSpec(GKind);

/// Closed-form values of a [`GSpec`] at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GValues {
    /// `g(s)`; `None` at `s = 0`.
    pub g: Option<f64>,
    /// `g'(s)`; `None` at `s = 0`.
    pub g_prime: Option<f64>,
    /// `G(s) = \int_0^s xi g'(xi) dxi`.
    pub antiderivative: f64,
    /// Continuous extension of `s g(s)`.
    pub s_g: f64,
}

pub fn make_g(family: GFamily, alpha: Option<f64>) -> Result<GSpec> {
    match family {
        GFamily::Log => Ok(GSpec(GKind::Log)),
        GFamily::Arctangential => Ok(GSpec(GKind::Arctangential)),
        GFamily::Power => {
            let alpha = alpha.ok_or_else(|| domain("power profile requires alpha"))?;
            if !alpha.is_finite() || alpha <= 0.0 {
                return Err(domain(format!("power profile needs alpha > 0, got {alpha}")));
            }
            if alpha == 1.0 {
                return Err(domain("power profile is undefined at alpha = 1"));
            }
            Ok(GSpec(GKind::Power { alpha }))
        }
    }
}

pub fn eval_g(spec: &GSpec, s: f64) -> Result<GValues> {
    check_arg(s)?;
    let (g, g_prime) = if s > 0.0 {
        (Some(spec.g(s)), Some(spec.g_prime(s)))
    } else {
        (None, None)
    };
    Ok(GValues {
        g,
        g_prime,
        antiderivative: spec.antiderivative(s),
        s_g: spec.s_g(s),
    })
}

fn check_arg(s: f64) -> Result<()> {
    if s.is_nan() || s < 0.0 {
        Err(invalid(format!("profile argument must be nonnegative, got {s}")))
    } else {
        Ok(())
    }
}

impl GSpec {
    pub fn log() -> Self {
        GSpec(GKind::Log)
    }

    pub fn arctangential() -> Self {
        GSpec(GKind::Arctangential)
    }

    pub fn power(alpha: f64) -> Result<Self> {
        make_g(GFamily::Power, Some(alpha))
    }

    pub fn family(&self) -> GFamily {
        match self.0 {
            GKind::Log => GFamily::Log,
            GKind::Power { .. } => GFamily::Power,
            GKind::Arctangential => GFamily::Arctangential,
        }
    }

    /// Exponent of the power family.
    pub fn alpha(&self) -> Option<f64> {
        match self.0 {
            GKind::Power { alpha } => Some(alpha),
            _ => None,
        }
    }

    /// `g(s)` for `s > 0`. At `s = 0` this returns the (possibly infinite) limit.
    pub fn g(&self, s: f64) -> f64 {
        if s == 1.0 {
            return 0.0;
        }
        match self.0 {
            GKind::Log => s.ln(),
            GKind::Power { alpha } => {
                if s == 0.0 {
                    if alpha > 1.0 {
                        -1.0 / (alpha - 1.0)
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    ((alpha - 1.0) * s.ln()).exp_m1() / (alpha - 1.0)
                }
            }
            GKind::Arctangential => {
                if s >= 1.0 {
                    0.5 * (LN_2 - (1.0 / (s * s)).ln_1p())
                } else {
                    0.5 * (LN_2 + 2.0 * s.ln() - (s * s).ln_1p())
                }
            }
        }
    }

    pub fn g_prime(&self, s: f64) -> f64 {
        match self.0 {
            GKind::Log => 1.0 / s,
            GKind::Power { alpha } => s.powf(alpha - 2.0),
            GKind::Arctangential => 1.0 / (s * (1.0 + s * s)),
        }
    }

    /// `s g'(s) = G'(s)`, the diffusivity of the flux form, with its limit at 0.
    pub fn s_g_prime(&self, s: f64) -> f64 {
        match self.0 {
            GKind::Log => 1.0,
            GKind::Power { alpha } => s.powf(alpha - 1.0),
            GKind::Arctangential => 1.0 / (1.0 + s * s),
        }
    }

    /// `G(s) = \int_0^s xi g'(xi) dxi`.
    pub fn antiderivative(&self, s: f64) -> f64 {
        match self.0 {
            GKind::Log => s,
            GKind::Power { alpha } => s.powf(alpha) / alpha,
            GKind::Arctangential => s.atan(),
        }
    }

    /// Continuous extension of `s g(s)` to `[0, inf)`.
    pub fn s_g(&self, s: f64) -> f64 {
        if s == 0.0 {
            0.0
        } else {
            s * self.g(s)
        }
    }

    /// `d/ds (s g(s)) = g(s) + s g'(s)`, one-sided at 0 when the limit is infinite.
    pub fn reaction_slope(&self, s: f64) -> f64 {
        if s > 0.0 {
            return self.g(s) + self.s_g_prime(s);
        }
        match self.0 {
            GKind::Power { alpha } if alpha > 1.0 => -1.0 / (alpha - 1.0),
            _ => (self.s_g(ZERO_SLOPE_STEP) - self.s_g(0.0)) / ZERO_SLOPE_STEP,
        }
    }

    /// `s g'(s)` with a finite one-sided replacement at 0 for fast diffusion.
    pub fn diffusivity(&self, s: f64) -> f64 {
        match self.0 {
            GKind::Power { alpha } if alpha < 1.0 && s == 0.0 => {
                (self.antiderivative(ZERO_SLOPE_STEP) - self.antiderivative(0.0)) / ZERO_SLOPE_STEP
            }
            _ => self.s_g_prime(s),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PsiFamily {
    Beckner,
    AbsPower,
    Driving,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum PsiKind {
    Beckner { p: f64 },
    AbsPower { p: f64 },
    Driving { base: GSpec },
}

/// A validated convex entropy density `psi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileJson", into = "ProfileJson")]
pub struct PsiSpec(PsiKind);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsiValues {
    pub psi: f64,
    /// May be `-inf` at `s = 0` (Beckner `p = 1`, logarithmic driving entropy).
    pub psi_prime: f64,
    /// `None` at `s = 0`.
    pub psi_double_prime: Option<f64>,
}

pub fn make_psi(family: PsiFamily, p: Option<f64>, base: Option<GSpec>) -> Result<PsiSpec> {
    match family {
        PsiFamily::Beckner => {
            let p = p.ok_or_else(|| domain("beckner entropy requires p"))?;
            if !p.is_finite() || p < 1.0 {
                return Err(domain(format!("beckner entropy needs p >= 1, got {p}")));
            }
            Ok(PsiSpec(PsiKind::Beckner { p }))
        }
        PsiFamily::AbsPower => {
            let p = p.ok_or_else(|| domain("abs_power entropy requires p"))?;
            if !p.is_finite() || p < 2.0 {
                return Err(domain(format!("abs_power entropy needs p >= 2, got {p}")));
            }
            Ok(PsiSpec(PsiKind::AbsPower { p }))
        }
        PsiFamily::Driving => {
            let base = base.ok_or_else(|| domain("driving entropy requires a base profile"))?;
            Ok(PsiSpec(PsiKind::Driving { base }))
        }
    }
}

pub fn eval_psi(spec: &PsiSpec, s: f64) -> Result<PsiValues> {
    check_arg(s)?;
    Ok(PsiValues {
        psi: spec.psi(s),
        psi_prime: spec.psi_prime(s),
        psi_double_prime: (s > 0.0).then(|| spec.psi_double_prime(s)),
    })
}

impl PsiSpec {
    pub fn beckner(p: f64) -> Result<Self> {
        make_psi(PsiFamily::Beckner, Some(p), None)
    }

    pub fn abs_power(p: f64) -> Result<Self> {
        make_psi(PsiFamily::AbsPower, Some(p), None)
    }

    pub fn driving(base: GSpec) -> Self {
        PsiSpec(PsiKind::Driving { base })
    }

    pub fn family(&self) -> PsiFamily {
        match self.0 {
            PsiKind::Beckner { .. } => PsiFamily::Beckner,
            PsiKind::AbsPower { .. } => PsiFamily::AbsPower,
            PsiKind::Driving { .. } => PsiFamily::Driving,
        }
    }

    /// Exponent of the Beckner and absolute-power families.
    pub fn p(&self) -> Option<f64> {
        match self.0 {
            PsiKind::Beckner { p } | PsiKind::AbsPower { p } => Some(p),
            PsiKind::Driving { .. } => None,
        }
    }

    pub fn base(&self) -> Option<GSpec> {
        match self.0 {
            PsiKind::Driving { base } => Some(base),
            _ => None,
        }
    }

    pub fn psi(&self, s: f64) -> f64 {
        match self.0 {
            PsiKind::Beckner { p: 1.0 } => {
                if s == 0.0 {
                    1.0
                } else {
                    s * s.ln() - s + 1.0
                }
            }
            PsiKind::Beckner { p } => (s.powf(p) - p * s + p - 1.0) / (p * (p - 1.0)),
            PsiKind::AbsPower { p } => (s - 1.0).abs().powf(p),
            // psi_g(s) = s g(s) - G(s) + G(1), by parts
            PsiKind::Driving { base } => {
                base.s_g(s) - base.antiderivative(s) + base.antiderivative(1.0)
            }
        }
    }

    pub fn psi_prime(&self, s: f64) -> f64 {
        match self.0 {
            PsiKind::Beckner { p: 1.0 } => {
                if s == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    s.ln()
                }
            }
            PsiKind::Beckner { p } => (s.powf(p - 1.0) - 1.0) / (p - 1.0),
            PsiKind::AbsPower { p } => {
                let d = s - 1.0;
                p * d.abs().powf(p - 1.0) * d.signum()
            }
            PsiKind::Driving { base } => base.g(s),
        }
    }

    /// `psi''(s)` for `s > 0`.
    pub fn psi_double_prime(&self, s: f64) -> f64 {
        match self.0 {
            PsiKind::Beckner { p } => s.powf(p - 2.0),
            PsiKind::AbsPower { p } => {
                if p == 2.0 {
                    2.0
                } else {
                    p * (p - 1.0) * (s - 1.0).abs().powf(p - 2.0)
                }
            }
            PsiKind::Driving { base } => base.g_prime(s),
        }
    }
}

/// Limit of `s g(s) psi'(s)` as `s -> 0+`.
///
/// Zero for every built-in pair except a fast-diffusion power profile paired
/// with the driving entropy of another fast-diffusion power profile, where
/// `s g(s) psi'(s) ~ s^(a + b - 1) / ((1 - a)(1 - b))`.
pub fn hellinger_limit_at_zero(g: &GSpec, psi: &PsiSpec) -> f64 {
    match (g.0, psi.0) {
        (GKind::Power { alpha: a }, PsiKind::Driving { base }) if a < 1.0 => match base.0 {
            GKind::Power { alpha: b } if b < 1.0 => {
                let exponent = a + b - 1.0;
                if exponent < 0.0 {
                    f64::INFINITY
                } else if exponent == 0.0 {
                    1.0 / ((1.0 - a) * (1.0 - b))
                } else {
                    0.0
                }
            }
            _ => 0.0,
        },
        _ => 0.0,
    }
}

/// Hellinger integrand `s g(s) psi'(s)`, continuously extended to `s = 0`.
pub fn hellinger_density(g: &GSpec, psi: &PsiSpec, s: f64) -> f64 {
    if s == 0.0 {
        hellinger_limit_at_zero(g, psi)
    } else {
        g.s_g(s) * psi.psi_prime(s)
    }
}

/// Wasserstein weight `s g'(s) psi''(s)` for `s > 0`.
pub fn wasserstein_weight(g: &GSpec, psi: &PsiSpec, s: f64) -> f64 {
    g.s_g_prime(s) * psi.psi_double_prime(s)
}

/// JSON shape shared by both profile kinds:
/// `{"kind": string, "alpha"?: number, "p"?: number, "base"?: object}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileJson {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Box<ProfileJson>>,
}

impl ProfileJson {
    fn bare(kind: &str) -> Self {
        ProfileJson { kind: kind.to_string(), alpha: None, p: None, base: None }
    }
}

impl From<GSpec> for ProfileJson {
    fn from(g: GSpec) -> Self {
        match g.0 {
            GKind::Log => ProfileJson::bare("log"),
            GKind::Arctangential => ProfileJson::bare("arctangential"),
            GKind::Power { alpha } => ProfileJson { alpha: Some(alpha), ..ProfileJson::bare("power") },
        }
    }
}

impl TryFrom<ProfileJson> for GSpec {
    type Error = Error;

    fn try_from(j: ProfileJson) -> Result<Self> {
        let family = match j.kind.as_str() {
            "log" => GFamily::Log,
            "power" => GFamily::Power,
            "arctangential" => GFamily::Arctangential,
            other => return Err(domain(format!("unknown g kind `{other}`"))),
        };
        make_g(family, j.alpha)
    }
}

impl From<PsiSpec> for ProfileJson {
    fn from(psi: PsiSpec) -> Self {
        match psi.0 {
            PsiKind::Beckner { p } => ProfileJson { p: Some(p), ..ProfileJson::bare("beckner") },
            PsiKind::AbsPower { p } => ProfileJson { p: Some(p), ..ProfileJson::bare("abs_power") },
            PsiKind::Driving { base } => ProfileJson {
                base: Some(Box::new(base.into())),
                ..ProfileJson::bare("driving")
            },
        }
    }
}

impl TryFrom<ProfileJson> for PsiSpec {
    type Error = Error;

    fn try_from(j: ProfileJson) -> Result<Self> {
        let family = match j.kind.as_str() {
            "beckner" => PsiFamily::Beckner,
            "abs_power" => PsiFamily::AbsPower,
            "driving" => PsiFamily::Driving,
            other => return Err(domain(format!("unknown psi kind `{other}`"))),
        };
        let base = j.base.map(|b| GSpec::try_from(*b)).transpose()?;
        make_psi(family, j.p, base)
    }
}

/// Geometric sample `s_min * q^k`, `k = 0..count`, ending exactly at `s_max`.
pub fn geometric_samples(s_min: f64, s_max: f64, count: usize) -> Vec<f64> {
    assert!(s_min > 0.0 && s_max > s_min && count >= 2);
    let ratio = (s_max / s_min).ln() / (count - 1) as f64;
    let mut out: Vec<f64> = (0..count).map(|k| s_min * (ratio * k as f64).exp()).collect();
    out[count - 1] = s_max;
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub passed: bool,
    /// Sample point that witnesses the worst margin (or the first failure).
    pub worst_s: Option<f64>,
    pub worst_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub g: GSpec,
    pub psi: PsiSpec,
    pub checks: Vec<AssumptionCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Worst {
    s: Option<f64>,
    value: f64,
    failed_at: Option<(f64, f64)>,
}

impl Worst {
    fn new() -> Self {
        Worst { s: None, value: f64::INFINITY, failed_at: None }
    }

    /// Track the smallest margin; a margin that is not strictly positive fails.
    fn margin(&mut self, s: f64, margin: f64) {
        if margin.is_nan() || margin < self.value {
            self.value = margin;
            self.s = Some(s);
        }
        if self.failed_at.is_none() && !(margin > 0.0) {
            self.failed_at = Some((s, margin));
        }
    }

    fn finish(self, name: &str, note: Option<String>) -> AssumptionCheck {
        let (worst_s, worst_value) = match self.failed_at {
            Some((s, v)) => (Some(s), Some(v)),
            None => (self.s, self.s.map(|_| self.value)),
        };
        AssumptionCheck {
            name: name.to_string(),
            passed: self.failed_at.is_none(),
            worst_s,
            worst_value,
            note,
        }
    }
}

/// Sample-based check of the standing assumptions on `(g, psi)`.
pub fn validate_pair(g: &GSpec, psi: &PsiSpec, sample: &[f64]) -> ValidationReport {
    let mut sample: Vec<f64> = sample.iter().copied().filter(|s| *s > 0.0 && s.is_finite()).collect();
    sample.sort_by(f64::total_cmp);
    sample.dedup();
    let mut checks = Vec::new();

    let s_min = sample.first().copied().unwrap_or(f64::NAN);
    let s_max = sample.last().copied().unwrap_or(f64::NAN);
    let covered = sample.len() >= 1000 && s_min <= 1e-6 && s_max >= 1e6;
    checks.push(AssumptionCheck {
        name: "sample_coverage".into(),
        passed: covered,
        worst_s: None,
        worst_value: Some(sample.len() as f64),
        note: Some(format!("{} points on [{s_min:e}, {s_max:e}]", sample.len())),
    });

    let g1 = g.g(1.0);
    checks.push(AssumptionCheck {
        name: "g_at_one".into(),
        passed: g1 == 0.0,
        worst_s: Some(1.0),
        worst_value: Some(g1),
        note: None,
    });

    let mut w = Worst::new();
    for &s in &sample {
        w.margin(s, g.g_prime(s));
    }
    checks.push(w.finish("g_prime_positive", None));

    // strictness is certified by g' > 0; numerically g may saturate below one ulp
    let mut w = Worst::new();
    for pair in sample.windows(2) {
        let step = g.g(pair[1]) - g.g(pair[0]);
        w.margin(pair[1], if step >= 0.0 { step.max(f64::MIN_POSITIVE) } else { step });
    }
    checks.push(w.finish("g_monotone", None));

    let mut w = Worst::new();
    for &s in &sample {
        let bound = g.g(s).abs() + s * g.g_prime(s).abs();
        w.margin(s, if bound.is_finite() { 1.0 / (1.0 + bound) } else { -1.0 });
    }
    checks.push(w.finish(
        "dominating_bound",
        Some("|g| + s|g'| finite and locally bounded on the sample; an L1_loc majorant is not certified".into()),
    ));

    // |s g(s)| must shrink toward sg(0) = 0 along the smallest samples
    let mut w = Worst::new();
    let small: Vec<f64> = sample.iter().copied().filter(|&s| s <= 1e-2).collect();
    for pair in small.windows(2) {
        let (lo, hi) = (g.s_g(pair[0]).abs(), g.s_g(pair[1]).abs());
        let margin = if lo.is_finite() && lo <= hi { 1.0 / (1.0 + lo) } else { -1.0 };
        w.margin(pair[0], margin);
    }
    checks.push(w.finish("sg_continuous_at_zero", None));

    let psi1 = psi.psi(1.0);
    checks.push(AssumptionCheck {
        name: "psi_at_one".into(),
        passed: psi1 == 0.0,
        worst_s: Some(1.0),
        worst_value: Some(psi1),
        note: None,
    });

    let mut w = Worst::new();
    for &s in sample.iter().filter(|&&s| s != 1.0) {
        w.margin(s, psi.psi(s));
    }
    checks.push(w.finish("psi_positive", None));

    let mut w = Worst::new();
    for &s in sample.iter().filter(|&&s| s != 1.0) {
        w.margin(s, psi.psi_double_prime(s));
    }
    let note = (psi.family() == PsiFamily::AbsPower && psi.p() != Some(2.0))
        .then(|| "psi''(1) = 0 is permitted: strict convexity is required only for s != 1".to_string());
    checks.push(w.finish("psi_convex", note));

    let upper: Vec<f64> = sample.iter().copied().filter(|&s| s >= 1.0).collect();
    let mut w = Worst::new();
    for pair in upper.windows(2) {
        let step = psi.psi_prime(pair[1]) - psi.psi_prime(pair[0]);
        w.margin(pair[1], if step >= 0.0 { step.max(f64::MIN_POSITIVE) } else { step });
    }
    let mut note = None;
    if let Some(b) = upper.last() {
        let top = psi.psi_prime(*b);
        let decade = psi.psi_prime(*b / 10.0);
        if !(top > 0.0) {
            w.margin(*b, top);
        }
        let total = top - psi.psi_prime(1.0);
        if total > 0.0 && (top - decade) < 1e-2 * total {
            note = Some(format!(
                "psi' appears to saturate near {top:.6}: growth over the last decade is below 1% of its total rise"
            ));
        }
    }
    checks.push(w.finish("psi_prime_unbounded", note));

    let mut w = Worst::new();
    for &s in sample.iter().filter(|&&s| s != 1.0) {
        let target = (s - 1.0).signum();
        let ok = g.g(s).signum() == target && psi.psi_prime(s).signum() == target;
        w.margin(s, if ok { 1.0 } else { -1.0 });
    }
    checks.push(w.finish("sign_agreement", None));

    ValidationReport { g: *g, psi: *psi, checks }
}

/// Default validation sample: 2000 geometric points on `[1e-7, 1e7]`.
pub fn default_sample() -> Vec<f64> {
    geometric_samples(1e-7, 1e7, 2000)
}

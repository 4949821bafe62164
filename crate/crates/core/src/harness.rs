//! Functional-inequality reports, counterexample families, rate and decay
//! fits, the algebraic constant scan and empirical entropy-production
//! constants.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::RatioField;
use crate::error::{domain, invalid, Error, Result};
use crate::io::{extended_f64, fmt17, parse_f64};
use crate::mesh::{build_density, DensityBuilder, DensityKind, DomainKind, Field, Grid};
use crate::profiles::{geometric_samples, GFamily, GSpec, PsiFamily, PsiSpec};

/// Support of the sharp set used by the `indicator` counterexample family.
pub const INDICATOR_SET: (f64, f64) = (0.25, 0.75);

/// `lhs / rhs` with `0 / 0 = 0` and `x / 0 = inf` for `x > 0`.
pub fn safe_ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs == 0.0 {
        if lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(lhs)
        }
    } else {
        lhs / rhs
    }
}

fn xlog(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityName {
    /// `E_psi <= C D E_psi`.
    Eep,
    /// `E_psi <= C (D^H E_psi + D^W E_psi restricted to alpha < r < beta)`.
    EepBand,
    BecknerClassical,
    BecknerHellinger,
    PorousVariant,
    PorousLogVariant,
    ArctanLogsob,
}

impl InequalityName {
    pub const ALL: [InequalityName; 7] = [
        InequalityName::Eep,
        InequalityName::EepBand,
        InequalityName::BecknerClassical,
        InequalityName::BecknerHellinger,
        InequalityName::PorousVariant,
        InequalityName::PorousLogVariant,
        InequalityName::ArctanLogsob,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InequalityName::Eep => "eep",
            InequalityName::EepBand => "eep_band",
            InequalityName::BecknerClassical => "beckner_classical",
            InequalityName::BecknerHellinger => "beckner_hellinger",
            InequalityName::PorousVariant => "porous_variant",
            InequalityName::PorousLogVariant => "porous_log_variant",
            InequalityName::ArctanLogsob => "arctan_logsob",
        }
    }
}

impl fmt::Display for InequalityName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InequalityName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| domain(format!("unknown inequality `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InequalityParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<(f64, f64)>,
}

/// A named inequality bound to an admissible `(g, psi)` pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InequalityCase {
    name: InequalityName,
    g: GSpec,
    psi: PsiSpec,
    params: InequalityParams,
}

impl InequalityCase {
    /// Checks admissibility. `params.p` and `params.alpha` are filled from the
    /// profiles and must agree with them when given.
    pub fn new(name: InequalityName, g: GSpec, psi: PsiSpec, params: InequalityParams) -> Result<Self> {
        let reject = |why: &str| Err(Error::Inadmissible(format!("{name} {why}")));
        let agree = |given: Option<f64>, actual: Option<f64>, what: &str| -> Result<Option<f64>> {
            match (given, actual) {
                (Some(a), Some(b)) if a != b => {
                    Err(Error::Inadmissible(format!("{name}: params.{what} = {a} disagrees with the profile value {b}")))
                }
                (_, b) => Ok(b.or(given)),
            }
        };
        let beckner_p = (psi.family() == PsiFamily::Beckner).then(|| psi.p()).flatten();
        match name {
            InequalityName::Eep => {}
            InequalityName::EepBand => match params.band {
                Some((a, b)) if 0.0 < a && a < b && b.is_finite() => {}
                _ => return reject("needs params.band = [alpha, beta] with 0 < alpha < beta"),
            },
            InequalityName::BecknerClassical => {
                if g.family() != GFamily::Log || !beckner_p.is_some_and(|p| p > 1.0 && p <= 2.0) {
                    return reject("requires g = log and psi = beckner with 1 < p <= 2");
                }
            }
            InequalityName::BecknerHellinger => {
                if g.family() != GFamily::Log || !beckner_p.is_some_and(|p| p > 1.0) {
                    return reject("requires g = log and psi = beckner with p > 1");
                }
            }
            InequalityName::PorousVariant => {
                if g.family() != GFamily::Power || !beckner_p.is_some_and(|p| p > 1.0) {
                    return reject("requires g = power and psi = beckner with p > 1");
                }
            }
            InequalityName::PorousLogVariant => {
                if g.family() != GFamily::Power || beckner_p != Some(1.0) {
                    return reject("requires g = power and psi = beckner with p = 1");
                }
            }
            InequalityName::ArctanLogsob => {
                if g.family() != GFamily::Arctangential || beckner_p != Some(1.0) {
                    return reject("requires g = arctangential and psi = beckner with p = 1");
                }
            }
        }
        let params = InequalityParams {
            p: agree(params.p, psi.p(), "p")?,
            alpha: agree(params.alpha, g.alpha(), "alpha")?,
            band: params.band,
        };
        Ok(InequalityCase { name, g, psi, params })
    }

    pub fn name(&self) -> InequalityName {
        self.name
    }

    pub fn g(&self) -> &GSpec {
        &self.g
    }

    pub fn psi(&self) -> &PsiSpec {
        &self.psi
    }

    pub fn params(&self) -> &InequalityParams {
        &self.params
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: InequalityName,
    #[serde(with = "extended_f64")]
    pub lhs: f64,
    #[serde(with = "extended_f64")]
    pub rhs: f64,
    #[serde(with = "extended_f64")]
    pub ratio: f64,
    pub params: InequalityParams,
}

/// Evaluates both sides of the named inequality in the ratio variable
/// `r = rho / rho_inf`, integrating against `rho_inf`.
pub fn inequality_report(case: &InequalityCase, grid: &Grid, rho: &Field, steady: &Field) -> Result<InequalityReport> {
    let f = RatioField::new(grid, rho, steady)?;
    let (g, psi) = (&case.g, &case.psi);
    let m = f.integral_against_steady(|r| r);
    let (lhs, rhs) = match case.name {
        InequalityName::Eep => {
            let rep = f.report(g, psi);
            (rep.entropy, rep.production_total)
        }
        InequalityName::EepBand => {
            let (a, b) = case.params.band.expect("checked on construction");
            (f.entropy(psi), f.production_h(g, psi) + f.production_band(g, psi, a, b))
        }
        InequalityName::BecknerClassical | InequalityName::BecknerHellinger => {
            let p = psi.p().expect("beckner");
            let lhs = f.integral_against_steady(|r| r.powf(p)) - m.powf(p);
            let mut rhs = f.gradient_integral(|r| r.powf(p - 2.0), |_| true);
            if case.name == InequalityName::BecknerHellinger {
                rhs += f.integral_against_steady(|r| xlog(r, r / m) * (r.powf(p - 1.0) - m.powf(p - 1.0)));
            }
            (lhs, rhs)
        }
        InequalityName::PorousVariant => {
            let p = psi.p().expect("beckner");
            let a = g.alpha().expect("power");
            let scale = m.powf(1.0 - a);
            let lhs = f.integral_against_steady(|r| r.powf(p)) - m.powf(p);
            let grad = f.gradient_integral(|r| r.powf(p + a - 3.0), |_| true);
            let reaction = f.integral_against_steady(|r| {
                r * (r.powf(a - 1.0) - m.powf(a - 1.0)) / (a - 1.0) * (r.powf(p - 1.0) - m.powf(p - 1.0))
            });
            (lhs, scale * (grad + reaction))
        }
        InequalityName::PorousLogVariant => {
            let a = g.alpha().expect("power");
            let q = 2.0 / a;
            let scale = m.powf(1.0 - a);
            let lhs = f.integral_against_steady(|r| xlog(r, r / m));
            let grad = f.gradient_integral(|r| r.powf(a - 2.0), |_| true);
            let reaction =
                f.integral_against_steady(|r| xlog(r, r / m) * (r.powf(a - 1.0) - m.powf(a - 1.0)) / (2.0 - q));
            (lhs, scale * (grad + reaction))
        }
        InequalityName::ArctanLogsob => {
            let lhs = f.entropy(psi);
            let grad = f.gradient_integral(|r| 1.0 / (r * (1.0 + r * r)), |_| true);
            let reaction = f.integral_against_steady(|r| xlog(r, r) * 2.0 * g.g(r));
            (lhs, grad + reaction)
        }
    };
    Ok(InequalityReport { name: case.name, lhs, rhs, ratio: safe_ratio(lhs, rhs), params: case.params })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CounterexampleKind {
    /// `rho_n = rho_inf n/(n-1) 1_{(1/n, 1)}`, parametrized by `n`.
    HellingerGap,
    /// `k rho_inf`, parametrized by `k != 1`.
    Scaling,
    /// Box-mollified `rho_inf 1_A`, parametrized by the width `w > 0`.
    Indicator,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceRow {
    pub param: f64,
    #[serde(with = "extended_f64")]
    pub entropy: f64,
    #[serde(with = "extended_f64")]
    pub production_w: f64,
    #[serde(with = "extended_f64")]
    pub production_h: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceColumn {
    Param,
    Entropy,
    ProductionW,
    ProductionH,
}

impl SequenceColumn {
    fn get(self, row: &SequenceRow) -> f64 {
        match self {
            SequenceColumn::Param => row.param,
            SequenceColumn::Entropy => row.entropy,
            SequenceColumn::ProductionW => row.production_w,
            SequenceColumn::ProductionH => row.production_h,
        }
    }
}

fn sequence_member(kind: CounterexampleKind, param: f64, grid: &Grid) -> Result<DensityBuilder> {
    let bad = |why: String| Err(domain(format!("{kind:?} parameter {param}: {why}")));
    Ok(DensityBuilder::new(match kind {
        CounterexampleKind::HellingerGap => {
            if param.fract() != 0.0 || param < 4.0 {
                return bad("needs an integer n >= 4".into());
            }
            let n = param as usize;
            if grid.domain_kind() == DomainKind::Torus2d || !grid.n().is_multiple_of(n) {
                return bad(format!("needs a 1D grid whose size is divisible by n, got {:?}", grid));
            }
            DensityKind::IndicatorBand { n: n as u32 }
        }
        CounterexampleKind::Scaling => {
            if !(param > 0.0 && param != 1.0 && param.is_finite()) {
                return bad("needs k > 0, k != 1".into());
            }
            DensityKind::ScaledSteady { k: param }
        }
        CounterexampleKind::Indicator => {
            if !(param > 0.0 && param < INDICATOR_SET.1 - INDICATOR_SET.0) {
                return bad("needs a width 0 < w < |A|".into());
            }
            DensityKind::MollifiedIndicator { lo: INDICATOR_SET.0, hi: INDICATOR_SET.1, w: param }
        }
    }))
}

/// Entropy and production split along a counterexample family. Rows keep
/// the order of `range`.
pub fn counterexample_sequence(
    kind: CounterexampleKind,
    range: &[f64],
    grid_resolver: impl Fn(f64) -> Result<Grid> + Sync,
    g: &GSpec,
    psi: &PsiSpec,
    steady_builder: &DensityBuilder,
) -> Result<Vec<SequenceRow>> {
    if range.is_empty() {
        return Err(invalid("counterexample range is empty"));
    }
    range
        .par_iter()
        .map(|&param| {
            let grid = grid_resolver(param)?;
            let steady = build_density(&grid, steady_builder, None)?;
            let rho = build_density(&grid, &sequence_member(kind, param, &grid)?, Some(&steady))?;
            let rep = RatioField::new(&grid, &rho, &steady)?.report(g, psi);
            Ok(SequenceRow { param, entropy: rep.entropy, production_w: rep.production_w, production_h: rep.production_h })
        })
        .collect()
}

/// CSV with header `param,entropy,production_w,production_h`.
pub fn write_sequence_csv<W: Write>(rows: &[SequenceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["param", "entropy", "production_w", "production_h"])?;
    for r in rows {
        w.write_record([r.param, r.entropy, r.production_w, r.production_h].map(fmt17))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sequence_csv<R: Read>(input: R) -> Result<Vec<SequenceRow>> {
    let mut rd = csv::Reader::from_reader(input);
    if rd.headers()?.iter().collect::<Vec<_>>() != ["param", "entropy", "production_w", "production_h"] {
        return Err(invalid("sequence CSV header must be param,entropy,production_w,production_h"));
    }
    rd.records()
        .map(|rec| {
            let rec = rec?;
            let v: Vec<f64> = rec
                .iter()
                .map(|s| parse_f64(s).ok_or_else(|| invalid(format!("not a number: {s}"))))
                .collect::<Result<_>>()?;
            match v[..] {
                [param, entropy, production_w, production_h] => {
                    Ok(SequenceRow { param, entropy, production_w, production_h })
                }
                _ => Err(invalid("sequence CSV rows need four columns")),
            }
        })
        .collect()
}

fn least_squares(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let sst: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let sse: f64 = points.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    let r2 = if sst == 0.0 { 1.0 } else { 1.0 - sse / sst };
    (slope, my - slope * mx, r2)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn rate_fit_loglog(table: &[SequenceRow], x_field: SequenceColumn, y_field: SequenceColumn) -> Result<f64> {
    if table.len() < 4 {
        return Err(invalid(format!("log-log fit needs at least 4 rows, got {}", table.len())));
    }
    let points = table
        .iter()
        .map(|row| {
            let (x, y) = (x_field.get(row), y_field.get(row));
            if x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite() {
                Ok((x.ln(), y.ln()))
            } else {
                Err(domain(format!("log-log fit needs positive finite values, got ({x}, {y})")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    if points.iter().all(|p| p.0 == points[0].0) {
        return Err(invalid("log-log fit needs at least two distinct x values"));
    }
    Ok(least_squares(&points).0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgtermScan {
    #[serde(with = "extended_f64")]
    pub c_eps: f64,
    pub argmax_s: f64,
    /// Neighbor estimate of `psi / (s g psi')` at `s = 1`.
    pub limit_at_one: f64,
}

/// `sup psi(s) / (s g(s) psi'(s))` over a geometric sample of `[eps, s_max]`.
pub fn algterm_scan(g: &GSpec, psi: &PsiSpec, eps: f64, s_max: f64, samples: usize) -> Result<AlgtermScan> {
    if !(0.0 < eps && eps < 1.0 && 1.0 < s_max && s_max.is_finite()) {
        return Err(domain(format!("algterm scan needs 0 < eps < 1 < s_max, got ({eps}, {s_max})")));
    }
    if samples < 1000 {
        return Err(domain(format!("algterm scan needs at least 1000 samples, got {samples}")));
    }
    let mut s: Vec<f64> = geometric_samples(eps, s_max, samples).into_iter().filter(|x| (x - 1.0).abs() >= 1e-6).collect();
    let one = s.partition_point(|&x| x < 1.0);
    s.insert(one, 1.0);

    let mut ratio = Vec::with_capacity(s.len());
    for (k, &x) in s.iter().enumerate() {
        if k == one {
            ratio.push(f64::NAN);
            continue;
        }
        let den = g.s_g(x) * psi.psi_prime(x);
        if !(den > 0.0) {
            return Err(Error::PairValidation(format!("s g(s) psi'(s) = {den} is not positive at s = {x}")));
        }
        ratio.push(psi.psi(x) / den);
    }
    let (lo, hi) = (one - 1, one + 1);
    let limit = ratio[lo] + (ratio[hi] - ratio[lo]) * (1.0 - s[lo]) / (s[hi] - s[lo]);
    ratio[one] = limit;

    let (mut c_eps, mut argmax_s) = (f64::NEG_INFINITY, s[0]);
    for (&x, &q) in s.iter().zip(&ratio) {
        if q > c_eps {
            c_eps = q;
            argmax_s = x;
        }
    }
    Ok(AlgtermScan { c_eps, argmax_s, limit_at_one: limit })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub gamma_hat: f64,
    pub fit_quality: f64,
    pub bound_holds: bool,
}

/// Log-linear fit `E(t) ~ E(0) exp(-gamma t)` over samples with
/// `E > entropy_floor` (default `1e-12 E(0)`), and the check
/// `E(t) <= E(0) exp(-gamma (1 - margin) t)` at every sample. An identically
/// zero series is reported as a constant one.
pub fn decay_fit(times: &[f64], entropies: &[f64], entropy_floor: Option<f64>, margin: f64) -> Result<DecayFit> {
    if times.len() != entropies.len() || times.is_empty() {
        return Err(invalid("decay fit needs matching, nonempty time and entropy series"));
    }
    if !(0.0..1.0).contains(&margin) {
        return Err(domain(format!("margin must lie in [0, 1), got {margin}")));
    }
    let e0 = entropies[0];
    if entropies.iter().all(|&e| e == 0.0) {
        return Ok(DecayFit { gamma_hat: 0.0, fit_quality: 1.0, bound_holds: true });
    }
    let floor = entropy_floor.unwrap_or(1e-12 * e0);
    let points: Vec<(f64, f64)> =
        times.iter().zip(entropies).filter(|(_, &e)| e > floor && e.is_finite()).map(|(&t, &e)| (t, e.ln())).collect();
    if points.len() < 8 {
        return Err(invalid(format!("decay fit needs at least 8 samples above the floor, got {}", points.len())));
    }
    let (slope, _, fit_quality) = least_squares(&points);
    let gamma_hat = -slope;
    let rate = gamma_hat * (1.0 - margin);
    let bound_holds = times
        .iter()
        .zip(entropies)
        .all(|(&t, &e)| e <= e0 * (-rate * (t - times[0])).exp() * (1.0 + 1e-12));
    Ok(DecayFit { gamma_hat, fit_quality, bound_holds })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepMember {
    pub index: usize,
    pub mass: f64,
    #[serde(with = "extended_f64")]
    pub entropy: f64,
    #[serde(with = "extended_f64")]
    pub production_total: f64,
    #[serde(with = "extended_f64")]
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedMember {
    pub index: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    #[serde(rename = "empirical_C_U", with = "extended_f64")]
    pub empirical_c_u: f64,
    pub worst_case: SweepMember,
    pub admitted: Vec<SweepMember>,
    pub skipped: Vec<SkippedMember>,
}

impl SweepReport {
    pub fn infinite_entries(&self) -> usize {
        self.admitted.iter().filter(|m| m.ratio.is_infinite()).count()
    }
}

/// Largest `E_psi / D E_psi` over the admitted members of a density family.
pub fn eep_sweep(
    family: &[DensityBuilder],
    g: &GSpec,
    psi: &PsiSpec,
    grid: &Grid,
    steady: &Field,
    mass_floor: f64,
    entropy_cap: f64,
) -> Result<SweepReport> {
    let evaluated = family
        .par_iter()
        .enumerate()
        .map(|(index, builder)| {
            let rho = build_density(grid, builder, Some(steady))?;
            let f = RatioField::new(grid, &rho, steady)?;
            let rep = f.report(g, psi);
            Ok(SweepMember {
                index,
                mass: rep.mass,
                entropy: rep.entropy,
                production_total: rep.production_total,
                ratio: safe_ratio(rep.entropy, rep.production_total),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let (mut admitted, mut skipped) = (Vec::new(), Vec::new());
    for m in evaluated {
        if !(m.mass >= mass_floor) {
            skipped.push(SkippedMember { index: m.index, reason: format!("mass {} below floor {mass_floor}", m.mass) });
        } else if !(m.entropy <= entropy_cap) {
            skipped.push(SkippedMember { index: m.index, reason: format!("entropy {} above cap {entropy_cap}", m.entropy) });
        } else {
            admitted.push(m);
        }
    }
    let worst_case = admitted
        .iter()
        .fold(None::<&SweepMember>, |best, m| match best {
            Some(b) if !(m.ratio > b.ratio) => Some(b),
            _ => Some(m),
        })
        .cloned()
        .ok_or_else(|| invalid(format!("no family member admitted ({} skipped)", skipped.len())))?;
    Ok(SweepReport { empirical_c_u: worst_case.ratio, worst_case, admitted, skipped })
}

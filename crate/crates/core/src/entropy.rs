//! Relative entropy `E_psi` and its production, split into the Wasserstein
//! (gradient) and Hellinger (reaction) parts.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::io::extended_f64;
use crate::mesh::{exact_sum, gradient_sq, integrate, same_grid, Field, Grid};
use crate::profiles::{hellinger_density, wasserstein_weight, GSpec, PsiSpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    #[serde(with = "extended_f64")]
    pub entropy: f64,
    #[serde(with = "extended_f64")]
    pub production_total: f64,
    #[serde(with = "extended_f64")]
    pub production_w: f64,
    #[serde(with = "extended_f64")]
    pub production_h: f64,
    pub mass: f64,
}

/// The ratio `r = rho / rho_inf` together with `|grad r|^2`, shared by all
/// functionals evaluated on one density.
#[derive(Clone, Debug)]
pub struct RatioField<'a> {
    grid: Grid,
    rho: &'a Field,
    steady: &'a Field,
    r: Field,
    grad_sq: Field,
}

impl<'a> RatioField<'a> {
    pub fn new(grid: &Grid, rho: &'a Field, steady: &'a Field) -> Result<Self> {
        same_grid(rho, steady)?;
        if rho.grid() != grid {
            return Err(crate::Error::GridMismatch(format!("{grid:?} vs {:?}", rho.grid())));
        }
        if let Some(i) = steady.values().iter().position(|&v| !(v > 0.0)) {
            return Err(invalid(format!("steady state must be positive, cell {i} holds {}", steady.values()[i])));
        }
        if let Some(i) = rho.values().iter().position(|&v| !(v >= 0.0)) {
            return Err(invalid(format!("density must be nonnegative, cell {i} holds {}", rho.values()[i])));
        }
        let r = rho.zip_with(steady, |a, b| a / b)?;
        let grad_sq = gradient_sq(grid, &r);
        Ok(RatioField { grid: *grid, rho, steady, r, grad_sq })
    }

    pub fn r(&self) -> &Field {
        &self.r
    }

    pub fn grad_sq(&self) -> &Field {
        &self.grad_sq
    }

    pub fn steady(&self) -> &Field {
        self.steady
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mass(&self) -> f64 {
        integrate(&self.grid, self.rho)
    }

    /// `\int q(r) d rho_inf` for a cellwise integrand `q`.
    pub fn integral_against_steady(&self, q: impl Fn(f64) -> f64) -> f64 {
        let terms = self.r.values().iter().zip(self.steady.values()).map(|(&r, &w)| q(r) * w);
        exact_sum(terms) * self.grid.cell_measure()
    }

    /// `\int_{[r > 0]} q(r) |grad r|^2 d rho_inf`, with `q` further restricted
    /// to cells accepted by `keep`.
    pub fn gradient_integral(&self, q: impl Fn(f64) -> f64, keep: impl Fn(f64) -> bool) -> f64 {
        let terms = self
            .r
            .values()
            .iter()
            .zip(self.grad_sq.values())
            .zip(self.steady.values())
            .filter(|((&r, _), _)| r > 0.0 && keep(r))
            .map(|((&r, &g2), &w)| if g2 == 0.0 { 0.0 } else { q(r) * g2 * w });
        exact_sum(terms) * self.grid.cell_measure()
    }

    pub fn entropy(&self, psi: &PsiSpec) -> f64 {
        self.integral_against_steady(|r| psi.psi(r))
    }

    pub fn production_h(&self, g: &GSpec, psi: &PsiSpec) -> f64 {
        self.integral_against_steady(|r| hellinger_density(g, psi, r))
    }

    pub fn production_w(&self, g: &GSpec, psi: &PsiSpec) -> f64 {
        self.gradient_integral(|r| wasserstein_weight(g, psi, r), |_| true)
    }

    pub fn production_band(&self, g: &GSpec, psi: &PsiSpec, alpha: f64, beta: f64) -> f64 {
        self.gradient_integral(|r| wasserstein_weight(g, psi, r), |r| alpha < r && r < beta)
    }

    pub fn report(&self, g: &GSpec, psi: &PsiSpec) -> EntropyReport {
        let production_w = self.production_w(g, psi);
        let production_h = self.production_h(g, psi);
        EntropyReport {
            entropy: self.entropy(psi),
            production_total: production_w + production_h,
            production_w,
            production_h,
            mass: self.mass(),
        }
    }
}

/// `E_psi(rho) = \int psi(rho / rho_inf) d rho_inf`.
pub fn relative_entropy(grid: &Grid, rho: &Field, steady: &Field, psi: &PsiSpec) -> Result<f64> {
    Ok(RatioField::new(grid, rho, steady)?.entropy(psi))
}

/// Entropy value and the Wasserstein/Hellinger production split.
pub fn production(grid: &Grid, rho: &Field, steady: &Field, g: &GSpec, psi: &PsiSpec) -> Result<EntropyReport> {
    Ok(RatioField::new(grid, rho, steady)?.report(g, psi))
}

/// Wasserstein-type production restricted to `[alpha < r < beta]`.
pub fn production_band(
    grid: &Grid,
    rho: &Field,
    steady: &Field,
    g: &GSpec,
    psi: &PsiSpec,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < beta) {
        return Err(crate::error::domain(format!("band needs 0 < alpha < beta, got ({alpha}, {beta})")));
    }
    Ok(RatioField::new(grid, rho, steady)?.production_band(g, psi, alpha, beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_density, build_grid, DensityBuilder, DensityKind, DomainKind};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn torus(n: usize) -> Grid {
        build_grid(DomainKind::Torus1d, n).unwrap()
    }

    fn b1() -> PsiSpec {
        PsiSpec::beckner(1.0).unwrap()
    }

    #[test]
    fn steady_has_zero_entropy_and_production() {
        let g = torus(64);
        let steady = build_density(&g, &DensityBuilder::normalized(DensityKind::Cosine { a: 0.4, k: 2 }), None).unwrap();
        for gs in [GSpec::log(), GSpec::power(2.0).unwrap(), GSpec::arctangential()] {
            let rep = production(&g, &steady, &steady, &gs, &b1()).unwrap();
            assert_eq!((rep.entropy, rep.production_w, rep.production_h, rep.production_total), (0.0, 0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn relative_entropy_examples() {
        let g = torus(64);
        let steady = Field::constant(g, 1.0);
        let two = steady.scaled(2.0);
        // psi(2) = (4 - 4 + 1) / 2
        let e = relative_entropy(&g, &two, &steady, &PsiSpec::beckner(2.0).unwrap()).unwrap();
        assert!((e - 0.5).abs() < 1e-15);

        // two-level closed form: 0.1 psi(0) + 0.9 psi(10/9)
        let g = build_grid(DomainKind::IntervalNoflux, 100).unwrap();
        let steady = Field::constant(g, 1.0);
        let rho = build_density(&g, &DensityBuilder::new(DensityKind::IndicatorBand { n: 10 }), Some(&steady)).unwrap();
        let k: f64 = 10.0 / 9.0;
        let oracle = 0.1 * 1.0 + 0.9 * (k * k.ln() - k + 1.0);
        let e = relative_entropy(&g, &rho, &steady, &b1()).unwrap();
        assert!((e - oracle).abs() < 1e-12);
        assert!((e - 0.105_360).abs() < 1e-4);

        let bad = Field::constant(g, 0.0);
        assert!(relative_entropy(&g, &rho, &bad, &b1()).is_err());
    }

    #[test]
    fn scaled_steady_production() {
        let g = torus(32);
        let steady = build_density(&g, &DensityBuilder::normalized(DensityKind::Cosine { a: 0.3, k: 1 }), None).unwrap();
        let rho = steady.scaled(2.0);
        let rep = production(&g, &rho, &steady, &GSpec::log(), &b1()).unwrap();
        assert_eq!(rep.production_w, 0.0);
        let ln2 = 2.0_f64.ln();
        assert!((rep.production_h - 2.0 * ln2 * ln2).abs() < 1e-6);
    }

    #[test]
    fn sharp_indicator_has_no_hellinger_production() {
        let g = torus(100);
        let steady = build_density(&g, &DensityBuilder::normalized(DensityKind::Cosine { a: 0.5, k: 1 }), None).unwrap();
        let rho = build_density(
            &g,
            &DensityBuilder::new(DensityKind::MollifiedIndicator { lo: 0.2, hi: 0.7, w: 0.0 }),
            Some(&steady),
        )
        .unwrap();
        for gs in [GSpec::log(), GSpec::power(0.6).unwrap(), GSpec::power(2.0).unwrap(), GSpec::arctangential()] {
            for psi in [b1(), PsiSpec::beckner(3.0).unwrap(), PsiSpec::abs_power(2.0).unwrap(), PsiSpec::driving(gs)] {
                assert_eq!(production(&g, &rho, &steady, &gs, &psi).unwrap().production_h, 0.0);
            }
        }
        // s g(s) g(s) -> 1/(1 - 1/2)^2 for the fast-diffusion driving pair at alpha = 1/2
        let half = GSpec::power(0.5).unwrap();
        let rep = production(&g, &rho, &steady, &half, &PsiSpec::driving(half)).unwrap();
        let outside = integrate(&g, &steady.zip_with(&rho, |s, r| if r == 0.0 { s } else { 0.0 }).unwrap());
        assert!((rep.production_h - 4.0 * outside).abs() < 1e-12);
    }

    #[test]
    fn band_examples() {
        let g = torus(256);
        let steady = Field::constant(g, 1.0);
        let psi = PsiSpec::beckner(2.0).unwrap();
        let gs = GSpec::log();
        assert_eq!(production_band(&g, &steady, &steady, &gs, &psi, 0.5, 1.5).unwrap(), 0.0);

        let rho = Field::from_fn(g, |x, _| 1.0 + 0.1 * (2.0 * PI * x).sin());
        let full = production(&g, &rho, &steady, &gs, &psi).unwrap().production_w;
        let wide = production_band(&g, &rho, &steady, &gs, &psi, 1e-300, f64::MAX).unwrap();
        assert!((full - wide).abs() <= 1e-12 * full);

        let band = production_band(&g, &rho, &steady, &gs, &psi, 0.95, 1.05).unwrap();
        assert!(band > 0.0);
        // cellwise reference: r g'(r) psi''(r) = 1 for (log, beckner 2); central differences
        let h = g.h();
        let v = rho.values();
        let mut oracle = 0.0;
        for i in 0..256 {
            if 0.95 < v[i] && v[i] < 1.05 {
                let d = (v[(i + 1) % 256] - v[(i + 255) % 256]) / (2.0 * h);
                oracle += d * d * h;
            }
        }
        assert!((band - oracle).abs() < 1e-12);
        assert!(production_band(&g, &rho, &steady, &gs, &psi, 1.0, 0.9).is_err());
    }

    #[test]
    fn driving_pair_direct_formulas() {
        let g = build_grid(DomainKind::IntervalNoflux, 128).unwrap();
        let steady = build_density(&g, &DensityBuilder::normalized(DensityKind::Cosine { a: 0.5, k: 1 }), None).unwrap();
        let rho = Field::from_fn(g, |x, _| 0.6 + 0.5 * (3.0 * x).sin());
        for gs in [GSpec::log(), GSpec::power(2.5).unwrap(), GSpec::arctangential()] {
            let rep = production(&g, &rho, &steady, &gs, &PsiSpec::driving(gs)).unwrap();
            let ratio = RatioField::new(&g, &rho, &steady).unwrap();
            let h_direct = ratio.integral_against_steady(|r| r * gs.g(r) * gs.g(r));
            let w_direct = ratio.gradient_integral(|r| r * gs.g_prime(r) * gs.g_prime(r), |_| true);
            assert!((rep.production_h - h_direct).abs() <= 1e-12 * (1.0 + h_direct));
            assert!((rep.production_w - w_direct).abs() <= 1e-12 * (1.0 + w_direct));
            assert!(rep.production_h >= 0.0 && rep.production_w >= 0.0);
        }
    }

    #[test]
    fn report_json_keys() {
        let rep = EntropyReport { entropy: 0.5, production_total: 1.0, production_w: 0.25, production_h: 0.75, mass: 1.0 };
        let s = serde_json::to_string(&rep).unwrap();
        assert_eq!(s, r#"{"entropy":0.5,"production_total":1.0,"production_w":0.25,"production_h":0.75,"mass":1.0}"#);
    }

    fn arb_density(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(prop_oneof![1 => Just(0.0), 6 => 0.0..4.0f64], n)
    }

    proptest! {
        #[test]
        fn productions_nonnegative_and_additive(vals in arb_density(48), gi in 0usize..3, pi in 0usize..4) {
            let g = torus(48);
            let steady = Field::constant(g, 1.0);
            let rho = Field::new(g, vals).unwrap();
            let gs = [GSpec::log(), GSpec::power(2.0).unwrap(), GSpec::arctangential()][gi];
            let psi = [b1(), PsiSpec::beckner(1.5).unwrap(), PsiSpec::abs_power(3.0).unwrap(), PsiSpec::driving(gs)][pi];
            let rep = production(&g, &rho, &steady, &gs, &psi).unwrap();
            prop_assert!(rep.production_h >= 0.0);
            prop_assert!(rep.production_w >= 0.0);
            prop_assert_eq!(rep.production_total, rep.production_w + rep.production_h);
            let is_one = rho.values().iter().all(|&v| v == 1.0);
            prop_assert_eq!(rep.entropy == 0.0, is_one);
        }

        #[test]
        fn band_monotone(vals in arb_density(40), a in 0.05..1.0f64, d1 in 0.0..1.0f64, d2 in 0.0..1.0f64) {
            let g = torus(40);
            let steady = Field::constant(g, 1.0);
            let rho = Field::new(g, vals).unwrap();
            let (gs, psi) = (GSpec::log(), b1());
            let narrow = production_band(&g, &rho, &steady, &gs, &psi, a, a + 0.01 + d1).unwrap();
            let wider_beta = production_band(&g, &rho, &steady, &gs, &psi, a, a + 0.01 + d1 + d2).unwrap();
            let lower_alpha = production_band(&g, &rho, &steady, &gs, &psi, a * 0.5, a + 0.01 + d1).unwrap();
            prop_assert!(wider_beta >= narrow);
            prop_assert!(lower_alpha >= narrow);
        }
    }
}

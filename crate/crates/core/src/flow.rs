//! Explicit finite-volume integration of the reaction-drift-diffusion flow
//! `d_t rho = div(rho_inf grad G(r)) - rho_inf r g(r)`, `r = rho / rho_inf`,
//! and of its Wasserstein-only and Hellinger-only parts.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::entropy::{EntropyReport, RatioField};
use crate::error::{domain, invalid, Error, Result};
use crate::io::{fmt17, parse_f64};
use crate::mesh::{exact_sum, integrate, lp_distance, same_grid, Field, Grid};
use crate::profiles::{GSpec, PsiSpec};

/// Returned by [`stable_dt`] when no term constrains the step.
pub const DT_FLOOR: f64 = 1e-12;

/// Per-step bound on the mass removed by the positivity clamp, relative to
/// the current mass.
pub const CLAMP_MASS_TOLERANCE: f64 = 1e-6;

const UNIT_MASS_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowMode {
    /// Drift-diffusion plus reaction.
    #[default]
    Full,
    /// Drift-diffusion only; conserves mass.
    Wasserstein,
    /// Pointwise reaction only.
    Hellinger,
}

impl FlowMode {
    fn diffuses(self) -> bool {
        self != FlowMode::Hellinger
    }

    fn reacts(self) -> bool {
        self != FlowMode::Wasserstein
    }
}

/// Time stepper. Every stage is a forward-Euler step followed by the
/// positivity clamp.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Two-stage strong-stability-preserving Runge-Kutta (Heun).
    #[default]
    SspRk2,
    Euler,
}

#[derive(Clone, Debug)]
pub struct FlowConfig {
    pub mode: FlowMode,
    pub g: GSpec,
    pub psi_monitors: Vec<PsiSpec>,
    pub grid: Grid,
    pub steady: Field,
    pub initial: Field,
    pub t_end: f64,
    pub cfl: f64,
    /// Monitors are evaluated every this many steps, and at `t = 0` and `t_end`.
    pub snapshot_every: usize,
    /// Fields are stored every this many steps; `None` keeps only the first
    /// and last state.
    pub field_every: Option<usize>,
    pub integrator: Integrator,
    pub max_steps: usize,
    /// Orders `p >= 1` of the recorded distances `||rho(t) - rho_inf||_p`.
    pub lp_orders: Vec<f64>,
}

impl FlowConfig {
    /// Full-mode configuration with default `cfl = 0.45`, monitors every step
    /// and no monitor entropies.
    pub fn new(grid: Grid, g: GSpec, steady: Field, initial: Field, t_end: f64) -> Self {
        FlowConfig {
            mode: FlowMode::Full,
            g,
            psi_monitors: Vec::new(),
            grid,
            steady,
            initial,
            t_end,
            cfl: 0.45,
            snapshot_every: 1,
            field_every: None,
            integrator: Integrator::SspRk2,
            max_steps: 100_000_000,
            lp_orders: vec![2.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steady.grid() != &self.grid || self.initial.grid() != &self.grid {
            return Err(Error::GridMismatch("steady and initial fields must live on the flow grid".into()));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(domain(format!("t_end must be positive and finite, got {}", self.t_end)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(domain(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if self.snapshot_every == 0 || self.field_every == Some(0) {
            return Err(domain("snapshot cadences must be at least 1"));
        }
        if let Some(p) = self.lp_orders.iter().find(|&&p| !(p >= 1.0 && p.is_finite())) {
            return Err(domain(format!("distance orders must be finite and >= 1, got {p}")));
        }
        check_fields(&self.steady, &self.initial)?;
        let mass = integrate(&self.grid, &self.steady);
        if (mass - 1.0).abs() > UNIT_MASS_TOLERANCE {
            return Err(invalid(format!("steady state must have unit mass, got {mass}")));
        }
        Ok(())
    }
}

fn check_fields(steady: &Field, rho: &Field) -> Result<()> {
    same_grid(rho, steady)?;
    if let Some(i) = steady.values().iter().position(|&v| !(v > 0.0)) {
        return Err(invalid(format!("steady state must be positive, cell {i} holds {}", steady.values()[i])));
    }
    if let Some(i) = rho.values().iter().position(|&v| !(v >= 0.0)) {
        return Err(invalid(format!("density must be nonnegative, cell {i} holds {}", rho.values()[i])));
    }
    Ok(())
}

/// Precomputed face geometry for repeated right-hand-side evaluations.
struct Operator {
    grid: Grid,
    g: GSpec,
    mode: FlowMode,
    faces: Vec<(usize, usize)>,
    face_steady: Vec<f64>,
    steady: Vec<f64>,
}

impl Operator {
    fn new(grid: &Grid, steady: &Field, g: &GSpec, mode: FlowMode) -> Self {
        let faces = grid.faces();
        let s = steady.values();
        let face_steady = faces.iter().map(|&(a, b)| 0.5 * (s[a] + s[b])).collect();
        Operator { grid: *grid, g: *g, mode, faces, face_steady, steady: s.to_vec() }
    }

    fn ratio(&self, rho: &[f64]) -> Vec<f64> {
        rho.iter().zip(&self.steady).map(|(a, b)| a / b).collect()
    }

    fn apply(&self, rho: &[f64], out: &mut [f64]) {
        let r = self.ratio(rho);
        out.iter_mut().for_each(|v| *v = 0.0);
        if self.mode.diffuses() {
            let inv_h2 = 1.0 / (self.grid.h() * self.grid.h());
            let big_g: Vec<f64> = r.iter().map(|&x| self.g.antiderivative(x)).collect();
            for (&(a, b), &w) in self.faces.iter().zip(&self.face_steady) {
                let flux = w * (big_g[b] - big_g[a]) * inv_h2;
                out[a] += flux;
                out[b] -= flux;
            }
        }
        if self.mode.reacts() {
            for ((o, &x), &s) in out.iter_mut().zip(&r).zip(&self.steady) {
                *o -= s * self.g.s_g(x);
            }
        }
    }

    fn stable_dt(&self, rho: &[f64], cfl: f64) -> f64 {
        let r = self.ratio(rho);
        let mut limit = f64::INFINITY;
        if self.mode.diffuses() {
            let r_max = r.iter().copied().fold(0.0, f64::max);
            let mut a_max: f64 = 0.0;
            for &(a, b) in &self.faces {
                let (ra, rb) = (r[a], r[b]);
                let a_eff = if (rb - ra).abs() <= 1e-12 * r_max {
                    self.g.diffusivity(0.5 * (ra + rb))
                } else {
                    (self.g.antiderivative(rb) - self.g.antiderivative(ra)) / (rb - ra)
                };
                a_max = a_max.max(a_eff);
            }
            if a_max > 0.0 {
                let h = self.grid.h();
                limit = limit.min(h * h / (2.0 * self.grid.dim() as f64 * a_max));
            }
        }
        if self.mode.reacts() {
            let b_max = r
                .iter()
                .map(|&x| {
                    let slope = self.g.reaction_slope(x).abs();
                    if x > 0.0 {
                        slope.max(self.g.g(x).abs())
                    } else {
                        slope
                    }
                })
                .fold(0.0, f64::max);
            if b_max > 0.0 {
                limit = limit.min(1.0 / b_max);
            }
        }
        if limit.is_finite() {
            cfl * limit
        } else {
            DT_FLOOR
        }
    }
}

/// Semi-discrete right-hand side of the chosen flow.
pub fn rhs(grid: &Grid, rho: &Field, steady: &Field, g: &GSpec, mode: FlowMode) -> Result<Field> {
    check_on(grid, rho, steady)?;
    let op = Operator::new(grid, steady, g, mode);
    let mut out = vec![0.0; grid.cells()];
    op.apply(rho.values(), &mut out);
    Ok(Field::from_raw(*grid, out))
}

/// Largest explicit step allowed by the diffusion and reaction rates, times `cfl`.
/// The reaction rate per cell is `max(|d(s g)/ds|, |g|)` at `r > 0`.
pub fn stable_dt(grid: &Grid, rho: &Field, steady: &Field, g: &GSpec, mode: FlowMode, cfl: f64) -> Result<f64> {
    check_on(grid, rho, steady)?;
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(domain(format!("cfl must lie in (0, 1], got {cfl}")));
    }
    Ok(Operator::new(grid, steady, g, mode).stable_dt(rho.values(), cfl))
}

fn check_on(grid: &Grid, rho: &Field, steady: &Field) -> Result<()> {
    if rho.grid() != grid {
        return Err(Error::GridMismatch(format!("{grid:?} vs {:?}", rho.grid())));
    }
    check_fields(steady, rho)
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub field: Field,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Step index of each monitor sample.
    pub steps: Vec<usize>,
    pub mass_series: Vec<f64>,
    /// `entropy_series[i][k]`: monitor `i` at sample `k`.
    pub entropy_series: Vec<Vec<f64>>,
    pub production_series: Vec<Vec<EntropyReport>>,
    /// `lp_gap_series[j][k] = ||rho(t_k) - rho_inf||_p` for the `j`-th configured order.
    pub lp_gap_series: Vec<Vec<f64>>,
    pub snapshots: Vec<Snapshot>,
    /// Number of cell values raised to 0 by the positivity clamp.
    pub clamp_events: usize,
    pub clamped_mass: f64,
    pub total_steps: usize,
    pub final_state: Field,
}

impl Trajectory {
    /// Largest midpoint residual `|(E_{k+1} - E_k) / dt + (D_k + D_{k+1}) / 2|`
    /// of the entropy dissipation identity for monitor `i`.
    pub fn dissipation_residual(&self, monitor: usize) -> f64 {
        let e = &self.entropy_series[monitor];
        let d = &self.production_series[monitor];
        (1..self.times.len())
            .map(|k| {
                let dt = self.times[k] - self.times[k - 1];
                let de = (e[k] - e[k - 1]) / dt;
                (de + 0.5 * (d[k].production_total + d[k - 1].production_total)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `series.csv`: `t,mass` then `entropy_i,prod_total_i,prod_w_i,prod_h_i` per monitor.
    pub fn write_series_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string(), "mass".to_string()];
        for i in 0..self.entropy_series.len() {
            header.extend(["entropy", "prod_total", "prod_w", "prod_h"].map(|c| format!("{c}_{i}")));
        }
        w.write_record(&header)?;
        for k in 0..self.times.len() {
            let mut row = vec![fmt17(self.times[k]), fmt17(self.mass_series[k])];
            for (e, p) in self.entropy_series.iter().zip(&self.production_series) {
                let rep = p[k];
                row.extend([e[k], rep.production_total, rep.production_w, rep.production_h].map(fmt17));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A parsed `series.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SeriesTable {
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        if header.len() < 2 || header[0] != "t" || header[1] != "mass" || !(header.len() - 2).is_multiple_of(4) {
            return Err(invalid("series CSV header must be t,mass followed by four columns per monitor"));
        }
        let rows = rd
            .records()
            .map(|rec| {
                rec?.iter()
                    .map(|s| parse_f64(s).ok_or_else(|| invalid(format!("not a number: {s}"))))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        Ok(SeriesTable { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

struct Recorder<'a> {
    cfg: &'a FlowConfig,
    traj: Trajectory,
}

impl Recorder<'_> {
    fn sample(&mut self, rho: &Field, step: usize, t: f64) -> Result<()> {
        let cfg = self.cfg;
        let ratio = RatioField::new(&cfg.grid, rho, &cfg.steady)?;
        let mass = ratio.mass();
        let abort = |what: &str| Error::SolverAbort { time: t, step, reason: format!("non-finite {what}") };
        if !mass.is_finite() {
            return Err(abort("mass"));
        }
        let tr = &mut self.traj;
        for (i, psi) in cfg.psi_monitors.iter().enumerate() {
            let rep = ratio.report(&cfg.g, psi);
            if !(rep.entropy.is_finite() && rep.production_total.is_finite()) {
                return Err(abort(&format!("monitor {i}")));
            }
            tr.entropy_series[i].push(rep.entropy);
            tr.production_series[i].push(rep);
        }
        tr.times.push(t);
        tr.steps.push(step);
        tr.mass_series.push(mass);
        for (series, &p) in tr.lp_gap_series.iter_mut().zip(&cfg.lp_orders) {
            series.push(lp_distance(&cfg.grid, rho, &cfg.steady, p)?);
        }
        Ok(())
    }
}

/// `out = max(src + dt L(src), 0)`; returns the number of clamped cells and
/// the clamped amounts.
fn euler_stage(op: &Operator, src: &[f64], dt: f64, scratch: &mut [f64], out: &mut [f64]) -> (usize, Vec<f64>) {
    op.apply(src, scratch);
    let mut removed = Vec::new();
    for ((o, &s), &l) in out.iter_mut().zip(src).zip(scratch.iter()) {
        let v = s + dt * l;
        if v < 0.0 {
            removed.push(-v);
            *o = 0.0;
        } else {
            *o = v;
        }
    }
    (removed.len(), removed)
}

/// Integrates the flow from `initial` to `t_end`.
pub fn simulate(config: &FlowConfig) -> Result<Trajectory> {
    config.validate()?;
    let grid = config.grid;
    let op = Operator::new(&grid, &config.steady, &config.g, config.mode);
    let monitors = config.psi_monitors.len();
    let mut rec = Recorder {
        cfg: config,
        traj: Trajectory {
            times: Vec::new(),
            steps: Vec::new(),
            mass_series: Vec::new(),
            entropy_series: vec![Vec::new(); monitors],
            production_series: vec![Vec::new(); monitors],
            lp_gap_series: vec![Vec::new(); config.lp_orders.len()],
            snapshots: Vec::new(),
            clamp_events: 0,
            clamped_mass: 0.0,
            total_steps: 0,
            final_state: config.initial.clone(),
        },
    };

    let mut rho = config.initial.values().to_vec();
    let n = rho.len();
    let (mut stage, mut scratch, mut next) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    rec.sample(&config.initial, 0, 0.0)?;
    rec.traj.snapshots.push(Snapshot { step: 0, time: 0.0, field: config.initial.clone() });

    let mut t = 0.0;
    let mut step = 0;
    loop {
        if step >= config.max_steps {
            return Err(Error::SolverAbort { time: t, step, reason: format!("exceeded {} steps", config.max_steps) });
        }
        let mut dt = op.stable_dt(&rho, config.cfl);
        let last = t + dt >= config.t_end;
        if last {
            dt = config.t_end - t;
        }
        let mass = exact_sum(rho.iter().copied()) * grid.cell_measure();
        let (events, removed) = match config.integrator {
            Integrator::Euler => euler_stage(&op, &rho, dt, &mut scratch, &mut next),
            Integrator::SspRk2 => {
                let (e1, mut r1) = euler_stage(&op, &rho, dt, &mut scratch, &mut stage);
                let (e2, r2) = euler_stage(&op, &stage, dt, &mut scratch, &mut next);
                for (v, &s) in next.iter_mut().zip(&rho) {
                    *v = 0.5 * (s + *v);
                }
                r1.extend(r2.into_iter().map(|x| 0.5 * x));
                (e1 + e2, r1)
            }
        };
        std::mem::swap(&mut rho, &mut next);
        step += 1;
        t = if last { config.t_end } else { t + dt };

        if let Some(i) = rho.iter().position(|v| !v.is_finite()) {
            return Err(Error::SolverAbort { time: t, step, reason: format!("non-finite density in cell {i}") });
        }
        let removed_mass = exact_sum(removed) * grid.cell_measure();
        if removed_mass > CLAMP_MASS_TOLERANCE * mass {
            return Err(Error::SolverAbort {
                time: t,
                step,
                reason: format!("positivity clamp removed mass {removed_mass:e} against total {mass:e}"),
            });
        }
        rec.traj.clamp_events += events;
        rec.traj.clamped_mass += removed_mass;

        if last || step % config.snapshot_every == 0 || config.field_every.is_some_and(|k| step % k == 0) {
            let field = Field::from_raw(grid, rho.clone());
            if last || step % config.snapshot_every == 0 {
                rec.sample(&field, step, t)?;
            }
            if last || config.field_every.is_some_and(|k| step % k == 0) {
                rec.traj.snapshots.push(Snapshot { step, time: t, field });
            }
        }
        if last {
            break;
        }
    }
    rec.traj.total_steps = step;
    rec.traj.final_state = Field::from_raw(grid, rho);
    Ok(rec.traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_density, build_grid, DensityBuilder, DensityKind, DomainKind};

    fn cosine_steady(grid: &Grid) -> Field {
        build_density(grid, &DensityBuilder::normalized(DensityKind::Cosine { a: 0.5, k: 1 }), None).unwrap()
    }

    #[test]
    fn steady_is_a_fixed_point_of_every_mode() {
        let grid = build_grid(DomainKind::Torus2d, 16).unwrap();
        let steady = Field::from_fn(grid, |x, y| 1.0 + 0.3 * (2.0 * std::f64::consts::PI * (x + 2.0 * y)).sin());
        for g in [GSpec::log(), GSpec::power(2.0).unwrap(), GSpec::arctangential()] {
            for mode in [FlowMode::Full, FlowMode::Wasserstein, FlowMode::Hellinger] {
                let out = rhs(&grid, &steady, &steady, &g, mode).unwrap();
                assert!(out.values().iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn rhs_examples() {
        let grid = build_grid(DomainKind::IntervalNoflux, 64).unwrap();
        let steady = cosine_steady(&grid);
        let two = steady.scaled(2.0);
        let out = rhs(&grid, &two, &steady, &GSpec::log(), FlowMode::Hellinger).unwrap();
        let ln2 = 2.0_f64.ln();
        for (&o, &s) in out.values().iter().zip(steady.values()) {
            assert!((o + 2.0 * ln2 * s).abs() < 1e-12);
        }
        let three = steady.scaled(3.0);
        let out = rhs(&grid, &three, &steady, &GSpec::log(), FlowMode::Wasserstein).unwrap();
        let h = grid.h();
        assert!(out.values().iter().all(|v| v.abs() < 64.0 * f64::EPSILON / (h * h)));

        let neg = steady.map(|v| v - 2.0);
        assert!(matches!(rhs(&grid, &neg, &steady, &GSpec::log(), FlowMode::Full), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn wasserstein_rhs_is_a_divergence() {
        let grid = build_grid(DomainKind::IntervalNoflux, 50).unwrap();
        let steady = cosine_steady(&grid);
        let rho = Field::from_fn(grid, |x, _| 0.2 + x * x);
        let out = rhs(&grid, &rho, &steady, &GSpec::power(2.0).unwrap(), FlowMode::Wasserstein).unwrap();
        assert!(integrate(&grid, &out).abs() < 1e-12);
    }

    #[test]
    fn stable_dt_examples() {
        let grid = build_grid(DomainKind::IntervalNoflux, 128).unwrap();
        let steady = cosine_steady(&grid);
        let h = grid.h();
        let dt = stable_dt(&grid, &steady, &steady, &GSpec::log(), FlowMode::Full, 0.45).unwrap();
        assert!((dt - 0.45 * h * h / 2.0).abs() < 1e-12);
        let dt = stable_dt(&grid, &steady, &steady, &GSpec::log(), FlowMode::Hellinger, 0.45).unwrap();
        assert!((dt - 0.45).abs() < 1e-12);

        let zero = Field::constant(grid, 0.0);
        let p2 = GSpec::power(2.0).unwrap();
        let dt = stable_dt(&grid, &zero, &steady, &p2, FlowMode::Hellinger, 0.45).unwrap();
        assert!(dt.is_finite() && dt > 0.0 && dt <= 0.45);
        assert!(stable_dt(&grid, &zero, &steady, &p2, FlowMode::Full, 0.45).unwrap().is_finite());

        // s ln s has zero slope at 1/e, where |g| = 1 takes over
        let ones = Field::constant(grid, 1.0);
        let flat = Field::constant(grid, (-1.0_f64).exp());
        let dt = stable_dt(&grid, &flat, &ones, &GSpec::log(), FlowMode::Hellinger, 0.45).unwrap();
        assert!((dt - 0.45).abs() < 1e-12);
        assert!(stable_dt(&grid, &steady, &steady, &GSpec::log(), FlowMode::Full, 1.5).is_err());
    }

    #[test]
    fn simulate_from_steady_stays_put() {
        let grid = build_grid(DomainKind::IntervalNoflux, 32).unwrap();
        let steady = cosine_steady(&grid);
        let mut cfg = FlowConfig::new(grid, GSpec::arctangential(), steady.clone(), steady.clone(), 0.05);
        cfg.snapshot_every = 50;
        let traj = simulate(&cfg).unwrap();
        assert_eq!(traj.final_state, steady);
        assert_eq!(traj.times[0], 0.0);
        assert_eq!(*traj.times.last().unwrap(), 0.05);
        assert_eq!(traj.clamp_events, 0);
    }

    fn hellinger_run(integrator: Integrator) -> f64 {
        let grid = build_grid(DomainKind::Torus1d, 16).unwrap();
        let steady = Field::constant(grid, 1.0);
        let mut cfg = FlowConfig::new(grid, GSpec::log(), steady.clone(), steady.scaled(2.0), 1.0);
        cfg.mode = FlowMode::Hellinger;
        cfg.cfl = 0.1;
        cfg.integrator = integrator;
        let traj = simulate(&cfg).unwrap();
        let exact = (2.0_f64.ln() * (-1.0_f64).exp()).exp();
        traj.final_state.values().iter().map(|v| (v - exact).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn hellinger_flow_matches_closed_form() {
        assert!(hellinger_run(Integrator::SspRk2) < 1e-3);
        let euler = hellinger_run(Integrator::Euler);
        assert!(euler < 0.05 && euler > 1e-3);
    }

    #[test]
    fn wasserstein_flow_conserves_mass() {
        let grid = build_grid(DomainKind::IntervalNoflux, 64).unwrap();
        let steady = cosine_steady(&grid);
        let initial = build_density(&grid, &DensityBuilder::normalized(DensityKind::Cosine { a: -0.6, k: 2 }), None)
            .unwrap();
        let mut cfg = FlowConfig::new(grid, GSpec::power(2.0).unwrap(), steady, initial, 0.1);
        cfg.mode = FlowMode::Wasserstein;
        cfg.snapshot_every = 100;
        let traj = simulate(&cfg).unwrap();
        let m0 = traj.mass_series[0];
        assert!(traj.mass_series.iter().all(|m| (m - m0).abs() < 1e-12 * 0.1 + 1e-15));
    }

    #[test]
    fn entropy_decreases_along_full_flow() {
        let grid = build_grid(DomainKind::IntervalNoflux, 48).unwrap();
        let steady = cosine_steady(&grid);
        let initial = Field::from_fn(grid, |x, _| 1.3 + 0.8 * (3.0 * x).cos());
        let psi = vec![PsiSpec::beckner(1.0).unwrap(), PsiSpec::beckner(2.0).unwrap(), PsiSpec::driving(GSpec::log())];
        let mut cfg = FlowConfig::new(grid, GSpec::log(), steady, initial, 0.2);
        cfg.psi_monitors = psi;
        cfg.snapshot_every = 20;
        cfg.field_every = Some(200);
        let traj = simulate(&cfg).unwrap();
        for series in &traj.entropy_series {
            assert!(series.windows(2).all(|w| w[1] < w[0]));
        }
        assert!(traj.snapshots.len() >= 3);
        assert_eq!(traj.snapshots.last().unwrap().time, 0.2);
        let mut buf = Vec::new();
        traj.write_series_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,mass,entropy_0,prod_total_0,prod_w_0,prod_h_0,entropy_1"));
        assert_eq!(text.lines().count(), traj.times.len() + 1);
        let table = SeriesTable::read_csv(text.as_bytes()).unwrap();
        assert_eq!(table.column("t").unwrap(), traj.times);
        assert_eq!(table.column("entropy_2").unwrap(), traj.entropy_series[2]);
        assert!(table.column("entropy_3").is_none());
    }

    #[test]
    fn config_errors() {
        let grid = build_grid(DomainKind::Torus1d, 16).unwrap();
        let steady = Field::constant(grid, 1.0);
        let mut cfg = FlowConfig::new(grid, GSpec::log(), steady.clone(), steady.clone(), 1.0);
        cfg.cfl = 0.0;
        assert!(matches!(simulate(&cfg), Err(Error::ParameterDomain(_))));
        let cfg = FlowConfig::new(grid, GSpec::log(), steady.scaled(2.0), steady.clone(), 1.0);
        assert!(matches!(simulate(&cfg), Err(Error::InvalidInput(_))));
        let mut cfg = FlowConfig::new(grid, GSpec::log(), steady.clone(), steady.clone(), 1.0);
        cfg.max_steps = 3;
        assert!(matches!(simulate(&cfg), Err(Error::SolverAbort { .. })));
    }
}

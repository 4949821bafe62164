//! Uniform cell-centered grids on unit domains, densities, quadrature and
//! level-set geometry.
//!
//! All integrals use the midpoint rule with a correctly rounded cell sum
//! ([`exact_sum`]), so results do not depend on summation order. On torus
//! grids this makes every operation exactly translation-equivariant.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};
use crate::io::{fmt17, parse_f64};

/// Default cap on the number of cells of a 2D grid.
pub const DEFAULT_CELL_CAP: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    /// `(0, 1)` with zero-flux boundary faces.
    IntervalNoflux,
    Torus1d,
    Torus2d,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct GridJson {
    domain_kind: DomainKind,
    n: usize,
}

/// Uniform grid with `n` cells per axis on a unit-measure domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GridJson", into = "GridJson")]
pub struct Grid {
    domain_kind: DomainKind,
    n: usize,
}

impl TryFrom<GridJson> for Grid {
    type Error = Error;
    fn try_from(j: GridJson) -> Result<Self> {
        build_grid(j.domain_kind, j.n)
    }
}

impl From<Grid> for GridJson {
    fn from(g: Grid) -> Self {
        GridJson { domain_kind: g.domain_kind, n: g.n }
    }
}

pub fn build_grid(domain_kind: DomainKind, n: usize) -> Result<Grid> {
    build_grid_with_cap(domain_kind, n, DEFAULT_CELL_CAP)
}

pub fn build_grid_with_cap(domain_kind: DomainKind, n: usize, cap: usize) -> Result<Grid> {
    if n < 4 {
        return Err(domain(format!("grid needs at least 4 cells per axis, got {n}")));
    }
    if domain_kind == DomainKind::Torus2d && n.checked_mul(n).is_none_or(|c| c > cap) {
        return Err(domain(format!("torus2d with n = {n} exceeds the cell cap {cap}")));
    }
    Ok(Grid { domain_kind, n })
}

impl Grid {
    pub fn domain_kind(&self) -> DomainKind {
        self.domain_kind
    }

    /// Cells per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn dim(&self) -> usize {
        match self.domain_kind {
            DomainKind::Torus2d => 2,
            _ => 1,
        }
    }

    pub fn cells(&self) -> usize {
        self.n.pow(self.dim() as u32)
    }

    pub fn cell_measure(&self) -> f64 {
        self.h().powi(self.dim() as i32)
    }

    /// Measure of a cell face (a point in 1D, a segment of length `h` in 2D).
    pub fn face_measure(&self) -> f64 {
        self.h().powi(self.dim() as i32 - 1)
    }

    pub fn is_periodic(&self) -> bool {
        self.domain_kind != DomainKind::IntervalNoflux
    }

    /// Cell center `((ix + 1/2) h, (iy + 1/2) h)` of storage index `idx`.
    /// Storage is row-major with `x` varying fastest; `y` is 0 in 1D.
    pub fn center(&self, idx: usize) -> (f64, f64) {
        let h = self.h();
        let (ix, iy) = (idx % self.n, idx / self.n);
        ((ix as f64 + 0.5) * h, if self.dim() == 2 { (iy as f64 + 0.5) * h } else { 0.0 })
    }

    /// Interior faces as `(left/lower cell, right/upper cell)`.
    ///
    /// Periodic grids include the wrap-around faces; the interval excludes its
    /// two boundary faces.
    pub fn faces(&self) -> Vec<(usize, usize)> {
        let n = self.n;
        let mut out = Vec::with_capacity(self.dim() * self.cells());
        match self.domain_kind {
            DomainKind::IntervalNoflux => out.extend((0..n - 1).map(|i| (i, i + 1))),
            DomainKind::Torus1d => out.extend((0..n).map(|i| (i, (i + 1) % n))),
            DomainKind::Torus2d => {
                for iy in 0..n {
                    for ix in 0..n {
                        let here = iy * n + ix;
                        out.push((here, iy * n + (ix + 1) % n));
                        out.push((here, ((iy + 1) % n) * n + ix));
                    }
                }
            }
        }
        out
    }
}

/// Cell-centered scalar field.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(invalid(format!(
                "field has {} values, grid has {} cells",
                values.len(),
                grid.cells()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite field value {} at cell {i}", values[i])));
        }
        Ok(Field { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Field { grid, values: vec![value; grid.cells()] }
    }

    /// Samples `f(x, y)` at cell centers (`y = 0` in 1D).
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.cells())
            .map(|i| {
                let (x, y) = grid.center(i);
                f(x, y)
            })
            .collect();
        Field { grid, values }
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.cells());
        Field { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Cellwise combination of two fields on the same grid.
    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        same_grid(self, other)?;
        Ok(Field {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn scaled(&self, k: f64) -> Field {
        self.map(|v| k * v)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    /// Shift by whole cells along `x` (and `y` in 2D), wrapping around.
    pub fn shifted(&self, dx: usize, dy: usize) -> Field {
        let n = self.grid.n;
        let mut out = vec![0.0; self.values.len()];
        for (idx, &v) in self.values.iter().enumerate() {
            let (ix, iy) = (idx % n, idx / n);
            let jy = if self.grid.dim() == 2 { (iy + dy) % n } else { iy };
            out[jy * n + (ix + dx) % n] = v;
        }
        Field { grid: self.grid, values: out }
    }

    /// CSV with header `x[,y],value`, one row per cell in storage order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.grid.dim() == 2 {
            w.write_record(["x", "y", "value"])?;
        } else {
            w.write_record(["x", "value"])?;
        }
        for (i, &v) in self.values.iter().enumerate() {
            let (x, y) = self.grid.center(i);
            if self.grid.dim() == 2 {
                w.write_record([fmt17(x), fmt17(y), fmt17(v)])?;
            } else {
                w.write_record([fmt17(x), fmt17(v)])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format written by [`Field::write_csv`] onto a known grid.
    pub fn read_csv<R: Read>(grid: Grid, input: R) -> Result<Field> {
        let mut r = csv::Reader::from_reader(input);
        let expected: &[&str] = if grid.dim() == 2 { &["x", "y", "value"] } else { &["x", "value"] };
        let header = r.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != expected {
            return Err(invalid(format!("unexpected field CSV header {header:?}")));
        }
        let mut values = Vec::with_capacity(grid.cells());
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let nums: Vec<f64> = rec
                .iter()
                .map(|s| parse_f64(s).ok_or_else(|| invalid(format!("bad number `{s}` in row {i}"))))
                .collect::<Result<_>>()?;
            if i >= grid.cells() {
                return Err(invalid("field CSV has more rows than the grid has cells"));
            }
            let (x, y) = grid.center(i);
            let coords_ok = (nums[0] - x).abs() < 1e-12 && (grid.dim() == 1 || (nums[1] - y).abs() < 1e-12);
            if !coords_ok {
                return Err(invalid(format!("row {i} is not at cell center ({x}, {y})")));
            }
            values.push(*nums.last().unwrap());
        }
        Field::new(grid, values)
    }
}

pub(crate) fn same_grid(a: &Field, b: &Field) -> Result<()> {
    if a.grid != b.grid {
        Err(Error::GridMismatch(format!("{:?} vs {:?}", a.grid, b.grid)))
    } else {
        Ok(())
    }
}

/// Correctly rounded sum (Shewchuk's partials algorithm).
///
/// The result is independent of the input order. Falls back to a plain sum
/// when the input contains non-finite values.
pub fn exact_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    let mut special = 0.0_f64;
    let mut has_special = false;
    for mut x in xs {
        if !x.is_finite() {
            has_special = true;
            special += x;
            continue;
        }
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }
    if has_special {
        return special + partials.iter().sum::<f64>();
    }
    // round the expansion, with the half-way correction
    let mut n = partials.len();
    if n == 0 {
        return 0.0;
    }
    n -= 1;
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = partials[n];
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        if y == x - hi {
            hi = x;
        }
    }
    hi
}

/// Midpoint quadrature: sum of values times cell measure.
pub fn integrate(grid: &Grid, field: &Field) -> f64 {
    debug_assert_eq!(grid, field.grid());
    exact_sum(field.values.iter().copied()) * grid.cell_measure()
}

/// Cell-centered `|grad f|^2`.
///
/// Central differences in the interior and along periodic directions,
/// one-sided differences in the two boundary cells of the interval.
pub fn gradient_sq(grid: &Grid, field: &Field) -> Field {
    let n = grid.n;
    let h = grid.h();
    let v = &field.values;
    let values = match grid.domain_kind {
        DomainKind::IntervalNoflux => (0..n)
            .map(|i| {
                let d = if i == 0 {
                    (v[1] - v[0]) / h
                } else if i == n - 1 {
                    (v[n - 1] - v[n - 2]) / h
                } else {
                    (v[i + 1] - v[i - 1]) / (2.0 * h)
                };
                d * d
            })
            .collect(),
        DomainKind::Torus1d => (0..n)
            .map(|i| {
                let d = (v[(i + 1) % n] - v[(i + n - 1) % n]) / (2.0 * h);
                d * d
            })
            .collect(),
        DomainKind::Torus2d => (0..n * n)
            .map(|idx| {
                let (ix, iy) = (idx % n, idx / n);
                let dx = (v[iy * n + (ix + 1) % n] - v[iy * n + (ix + n - 1) % n]) / (2.0 * h);
                let dy = (v[((iy + 1) % n) * n + ix] - v[((iy + n - 1) % n) * n + ix]) / (2.0 * h);
                dx * dx + dy * dy
            })
            .collect(),
    };
    Field { grid: *grid, values }
}

/// Measures of `[r <= alpha]`, `[alpha < r < beta]` and `[r >= beta]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelMeasures {
    pub sigma: f64,
    pub tau: f64,
    pub high: f64,
}

fn check_band(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < beta) {
        return Err(domain(format!("level band needs 0 < alpha < beta, got ({alpha}, {beta})")));
    }
    Ok(())
}

pub fn level_measures(grid: &Grid, r: &Field, alpha: f64, beta: f64) -> Result<LevelMeasures> {
    check_band(alpha, beta)?;
    same_grid_as(grid, r)?;
    let (mut low, mut mid) = (0usize, 0usize);
    for &v in &r.values {
        if v <= alpha {
            low += 1;
        } else if v < beta {
            mid += 1;
        }
    }
    let dv = grid.cell_measure();
    let sigma = low as f64 * dv;
    let tau = mid as f64 * dv;
    Ok(LevelMeasures { sigma, tau, high: 1.0 - (sigma + tau) })
}

fn same_grid_as(grid: &Grid, f: &Field) -> Result<()> {
    if *grid != f.grid {
        Err(Error::GridMismatch(format!("{grid:?} vs {:?}", f.grid)))
    } else {
        Ok(())
    }
}

/// Discrete relative perimeter of `[r < t]`: interior faces separating a cell
/// with `r < t` from one with `r >= t`, times the face measure.
pub fn relative_perimeter(grid: &Grid, r: &Field, t: f64) -> f64 {
    let v = &r.values;
    let cuts = grid.faces().into_iter().filter(|&(a, b)| (v[a] < t) != (v[b] < t)).count();
    cuts as f64 * grid.face_measure()
}

/// Empirical isoperimetric ratio `P([r < t]) / min(|A|, |Omega \ A|)^((d-1)/d)`.
///
/// `None` when either side of the cut is empty.
pub fn isoperimetric_ratio(grid: &Grid, r: &Field, t: f64) -> Option<f64> {
    let inside = r.values.iter().filter(|&&v| v < t).count();
    let smaller = inside.min(grid.cells() - inside);
    if smaller == 0 {
        return None;
    }
    let d = grid.dim() as f64;
    let vol = smaller as f64 * grid.cell_measure();
    Some(relative_perimeter(grid, r, t) / vol.powf((d - 1.0) / d))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoareaSides {
    /// `\int_{[alpha < r < beta]} |grad r|`.
    pub variation_band: f64,
    /// `\int_alpha^beta P([r < t]; Omega) dt`, midpoint rule in `t`.
    pub perimeter_integral: f64,
}

pub fn coarea_sides(grid: &Grid, r: &Field, alpha: f64, beta: f64, t_samples: usize) -> Result<CoareaSides> {
    check_band(alpha, beta)?;
    same_grid_as(grid, r)?;
    if t_samples < 16 {
        return Err(domain(format!("coarea needs at least 16 levels, got {t_samples}")));
    }
    let grad = gradient_sq(grid, r);
    let band = r
        .values
        .iter()
        .zip(&grad.values)
        .filter(|(&v, _)| alpha < v && v < beta)
        .map(|(_, &g2)| g2.sqrt());
    let variation_band = exact_sum(band) * grid.cell_measure();

    let dt = (beta - alpha) / t_samples as f64;
    let faces = grid.faces();
    let v = &r.values;
    let mut cuts = 0usize;
    for k in 0..t_samples {
        let t = alpha + (k as f64 + 0.5) * dt;
        cuts += faces.iter().filter(|&&(a, b)| (v[a] < t) != (v[b] < t)).count();
    }
    let perimeter_integral = cuts as f64 * grid.face_measure() * dt;
    Ok(CoareaSides { variation_band, perimeter_integral })
}

/// `(\int |a - b|^p)^(1/p)` by midpoint quadrature.
pub fn lp_distance(grid: &Grid, a: &Field, b: &Field, p: f64) -> Result<f64> {
    same_grid(a, b)?;
    same_grid_as(grid, a)?;
    if !(p >= 1.0 && p.is_finite()) {
        return Err(domain(format!("L^p distance needs p in [1, inf), got {p}")));
    }
    let s = exact_sum(a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs().powf(p)));
    Ok((s * grid.cell_measure()).powf(1.0 / p))
}

/// Recipe for an initial or reference density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityKind {
    Constant {
        #[serde(default = "one")]
        value: f64,
    },
    /// `1 + a cos(2 pi k x)`, `|a| < 1`.
    Cosine {
        a: f64,
        #[serde(default = "one_u32")]
        k: u32,
    },
    /// `k rho_inf`.
    ScaledSteady { k: f64 },
    /// `rho_inf * n/(n-1) * 1_{(1/n, 1)}` along `x`.
    IndicatorBand { n: u32 },
    /// `rho_inf * (1_{(lo, hi)} convolved with a box of width w)` along `x`.
    MollifiedIndicator { lo: f64, hi: f64, w: f64 },
    /// `1 + amplitude * P / max|P|` with `P` a random trigonometric polynomial.
    TrigRandom {
        #[serde(default = "default_modes")]
        modes: u32,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
}

fn one() -> f64 {
    1.0
}
fn one_u32() -> u32 {
    1
}
fn default_modes() -> u32 {
    4
}
fn default_amplitude() -> f64 {
    0.9
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityBuilder {
    #[serde(flatten)]
    pub kind: DensityKind,
    #[serde(default)]
    pub normalize: bool,
}

impl DensityBuilder {
    pub fn new(kind: DensityKind) -> Self {
        DensityBuilder { kind, normalize: false }
    }

    pub fn normalized(kind: DensityKind) -> Self {
        DensityBuilder { kind, normalize: true }
    }

    pub fn needs_steady(&self) -> bool {
        matches!(
            self.kind,
            DensityKind::ScaledSteady { .. }
                | DensityKind::IndicatorBand { .. }
                | DensityKind::MollifiedIndicator { .. }
        )
    }
}

pub fn build_density(grid: &Grid, builder: &DensityBuilder, steady: Option<&Field>) -> Result<Field> {
    let steady_field = || -> Result<&Field> {
        let s = steady.ok_or_else(|| invalid("density builder requires the steady state"))?;
        same_grid_as(grid, s)?;
        Ok(s)
    };
    let mut field = match &builder.kind {
        DensityKind::Constant { value } => {
            if !(*value >= 0.0 && value.is_finite()) {
                return Err(domain(format!("constant density must be >= 0, got {value}")));
            }
            Field::constant(*grid, *value)
        }
        DensityKind::Cosine { a, k } => {
            if !(a.abs() < 1.0) {
                return Err(domain(format!("cosine density needs |a| < 1, got {a}")));
            }
            let k = *k as f64;
            Field::from_fn(*grid, |x, _| 1.0 + a * (2.0 * PI * k * x).cos())
        }
        DensityKind::ScaledSteady { k } => {
            if !(*k >= 0.0 && k.is_finite()) {
                return Err(domain(format!("scaled steady state needs k >= 0, got {k}")));
            }
            steady_field()?.scaled(*k)
        }
        DensityKind::IndicatorBand { n } => {
            if *n < 2 {
                return Err(domain(format!("indicator band needs n >= 2, got {n}")));
            }
            let n = *n as f64;
            let cut = 1.0 / n;
            let scale = n / (n - 1.0);
            let s = steady_field()?;
            Field::from_raw(
                *grid,
                s.values
                    .iter()
                    .enumerate()
                    .map(|(i, &rho)| if grid.center(i).0 > cut { rho * scale } else { 0.0 })
                    .collect(),
            )
        }
        DensityKind::MollifiedIndicator { lo, hi, w } => {
            if !(0.0 <= *lo && lo < hi && *hi <= 1.0) || !(*w >= 0.0) {
                return Err(domain(format!(
                    "mollified indicator needs 0 <= lo < hi <= 1 and w >= 0, got ({lo}, {hi}, {w})"
                )));
            }
            let periodic = grid.is_periodic();
            let s = steady_field()?;
            Field::from_raw(
                *grid,
                s.values
                    .iter()
                    .enumerate()
                    .map(|(i, &rho)| rho * box_mollified(grid.center(i).0, *lo, *hi, *w, periodic))
                    .collect(),
            )
        }
        DensityKind::TrigRandom { modes, amplitude, seed } => {
            if !(0.0..1.0).contains(amplitude) || *modes == 0 {
                return Err(domain(format!(
                    "trig_random needs modes >= 1 and amplitude in [0, 1), got ({modes}, {amplitude})"
                )));
            }
            trig_random(grid, *modes, *amplitude, seed.unwrap_or(0))
        }
    };
    if builder.normalize {
        let mass = integrate(grid, &field);
        if !(mass > 0.0) {
            return Err(invalid("cannot normalize a density with zero mass"));
        }
        field = field.map(|v| v / mass);
    }
    Ok(field)
}

// (1_{(lo,hi)} * box_w)(x), the box kernel having unit mass on (-w/2, w/2)
fn box_mollified(x: f64, lo: f64, hi: f64, w: f64, periodic: bool) -> f64 {
    if w == 0.0 {
        return if lo < x && x < hi { 1.0 } else { 0.0 };
    }
    let overlap = |shift: f64| {
        let a = (x - 0.5 * w).max(lo + shift);
        let b = (x + 0.5 * w).min(hi + shift);
        (b - a).max(0.0)
    };
    let total = if periodic { overlap(-1.0) + overlap(0.0) + overlap(1.0) } else { overlap(0.0) };
    (total / w).min(1.0)
}

fn trig_random(grid: &Grid, modes: u32, amplitude: f64, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = modes as i64;
    // (kx, ky, cos coefficient, sin coefficient), weighted by 1/|k|
    let mut terms = Vec::new();
    if grid.dim() == 2 {
        for ky in 0..=m {
            for kx in -m..=m {
                if ky == 0 && kx <= 0 {
                    continue;
                }
                let norm = ((kx * kx + ky * ky) as f64).sqrt();
                terms.push((kx as f64, ky as f64, rng.gen_range(-1.0..1.0) / norm, rng.gen_range(-1.0..1.0) / norm));
            }
        }
    } else {
        for k in 1..=m {
            let k = k as f64;
            terms.push((k, 0.0, rng.gen_range(-1.0..1.0) / k, rng.gen_range(-1.0..1.0) / k));
        }
    }
    let poly = Field::from_fn(*grid, |x, y| {
        terms
            .iter()
            .map(|&(kx, ky, c, s)| {
                let phase = 2.0 * PI * (kx * x + ky * y);
                c * phase.cos() + s * phase.sin()
            })
            .sum()
    });
    let peak = poly.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { amplitude / peak } else { 0.0 };
    poly.map(|p| 1.0 + scale * p)
}

//! Sampled functions on a periodic grid, STFT, modulation quasi-norms and
//! Gabor systems over separable lattices. One dimension only.

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{CdError, Result};
use crate::linalg::{self, CMat, CVec};
use crate::pointset::PointSet;
use crate::sequences::{check_exponent, lp_norm_real, Seq};
use crate::weyl::{SampledSymbol, SymbolGrid};

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Uniform periodic grid `t_k = h (k − L/2)`, `k = 0..L`, `L = 2R/h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    step: f64,
    radius: f64,
    len: usize,
}

impl Grid {
    pub fn new(step: f64, radius: f64) -> Result<Grid> {
        if !(step > 0.0) || !(radius > 0.0) {
            return Err(CdError::param("grid step and radius must be positive"));
        }
        let l = 2.0 * radius / step;
        let len = l.round() as usize;
        if (l - len as f64).abs() > 1e-9 * l || len < 2 || len % 2 != 0 {
            return Err(CdError::param(format!("2R/h = {l} must be an even integer")));
        }
        Ok(Grid { step, radius, len })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `T = L h`.
    pub fn period(&self) -> f64 {
        self.len as f64 * self.step
    }

    pub fn t(&self, k: usize) -> f64 {
        self.step * (k as f64 - (self.len / 2) as f64)
    }

    /// Frequency of bin `m`: `(m − L/2)/T`.
    pub fn xi(&self, m: usize) -> f64 {
        (m as f64 - (self.len / 2) as f64) / self.period()
    }

    /// Nearest whole-sample shift for `x`, and the snap offset.
    pub fn snap(&self, x: f64) -> (i64, f64) {
        let s = (x / self.step).round();
        (s as i64, x - s * self.step)
    }

    pub(crate) fn same(&self, other: &Grid) -> bool {
        self.len == other.len && (self.step - other.step).abs() <= 1e-12 * self.step
    }

    /// Samples within `frac` of the radius.
    pub fn interior(&self, frac: f64) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&k| self.t(k).abs() <= frac * self.radius)
    }
}

/// Planned transforms of one length.
pub(crate) struct Fourier {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fourier {
    pub(crate) fn new(n: usize) -> Self {
        let mut p = FftPlanner::new();
        Fourier {
            n,
            fwd: p.plan_fft_forward(n),
            inv: p.plan_fft_inverse(n),
        }
    }

    /// Unnormalized `Σ_k u_k e^{−2πikm/n}`.
    pub(crate) fn forward(&self, u: &mut [Complex64]) {
        debug_assert_eq!(u.len(), self.n);
        self.fwd.process(u);
    }

    /// Unnormalized `Σ_m u_m e^{2πikm/n}`.
    pub(crate) fn inverse(&self, u: &mut [Complex64]) {
        debug_assert_eq!(u.len(), self.n);
        self.inv.process(u);
    }

    /// `u_k ↦ h Σ_k u_k e^{−2πi t_k ξ_m}` on a centered grid.
    pub(crate) fn centered_forward(&self, grid: &Grid, u: &mut [Complex64]) {
        alternate(u);
        self.forward(u);
        let s = grid.step * half_sign(self.n);
        for (m, z) in u.iter_mut().enumerate() {
            *z *= if m % 2 == 0 { s } else { -s };
        }
    }

    /// `û_m ↦ T^{−1} Σ_m û_m e^{2πi t_k ξ_m}`.
    pub(crate) fn centered_inverse(&self, grid: &Grid, u: &mut [Complex64]) {
        alternate(u);
        self.inverse(u);
        let s = half_sign(self.n) / grid.period();
        for (k, z) in u.iter_mut().enumerate() {
            *z *= if k % 2 == 0 { s } else { -s };
        }
    }
}

fn alternate(u: &mut [Complex64]) {
    u.iter_mut().skip(1).step_by(2).for_each(|z| *z = -*z);
}

/// `e^{±πi n/2}` for even `n`.
fn half_sign(n: usize) -> f64 {
    if (n / 2) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    grid: Grid,
    samples: Vec<Complex64>,
}

impl SampledFunction {
    pub fn new(grid: Grid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(CdError::GridMismatch(format!(
                "{} samples for a grid of {}",
                samples.len(),
                grid.len()
            )));
        }
        Ok(SampledFunction { grid, samples })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> Complex64) -> Self {
        let samples = (0..grid.len()).map(|k| f(grid.t(k))).collect();
        SampledFunction { grid, samples }
    }

    pub fn from_real_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |t| Complex64::new(f(t), 0.0))
    }

    pub fn zeros(grid: Grid) -> Self {
        SampledFunction {
            grid,
            samples: vec![C0; grid.len()],
        }
    }

    /// `2^{1/4} e^{−πt²}`, unit norm on the line.
    pub fn gaussian(grid: Grid) -> Self {
        let c = 2f64.powf(0.25);
        Self::from_real_fn(grid, |t| c * (-std::f64::consts::PI * t * t).exp())
    }

    /// `n`-th Hermite function, eigenfunction of the Fourier transform
    /// `∫ f(t) e^{−2πitξ} dt`, unit norm.
    pub fn hermite(grid: Grid, n: usize) -> Self {
        let s = (2.0 * std::f64::consts::PI).sqrt();
        let c = s.sqrt();
        Self::from_real_fn(grid, |t| c * hermite_fn(n, s * t))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn check_grid(&self, other: &SampledFunction) -> Result<()> {
        if self.grid.same(&other.grid) {
            Ok(())
        } else {
            Err(CdError::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)))
        }
    }

    /// `h Σ f conj(g)`.
    pub fn inner(&self, other: &SampledFunction) -> Result<Complex64> {
        self.check_grid(other)?;
        let s: Complex64 = self.samples.iter().zip(&other.samples).map(|(a, b)| a * b.conj()).sum();
        Ok(s * self.grid.step)
    }

    pub fn norm(&self) -> f64 {
        (self.grid.step * self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Norm over the samples with `|t| <= frac R`.
    pub fn interior_norm(&self, frac: f64) -> f64 {
        (self.grid.step * self.grid.interior(frac).map(|k| self.samples[k].norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) {
            return Err(CdError::param("cannot normalize the zero function"));
        }
        Ok(self.scaled(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        SampledFunction {
            grid: self.grid,
            samples: self.samples.iter().map(|z| z * c).collect(),
        }
    }

    pub fn sub(&self, other: &SampledFunction) -> Result<Self> {
        self.check_grid(other)?;
        Ok(SampledFunction {
            grid: self.grid,
            samples: self.samples.iter().zip(&other.samples).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn add(&self, other: &SampledFunction) -> Result<Self> {
        self.check_grid(other)?;
        Ok(SampledFunction {
            grid: self.grid,
            samples: self.samples.iter().zip(&other.samples).map(|(a, b)| a + b).collect(),
        })
    }

    /// `f̂(ξ_m)` by quadrature.
    pub fn fourier(&self) -> Vec<Complex64> {
        let mut u = self.samples.clone();
        Fourier::new(u.len()).centered_forward(&self.grid, &mut u);
        u
    }

    pub fn from_fourier(grid: Grid, hat: &[Complex64]) -> Result<Self> {
        if hat.len() != grid.len() {
            return Err(CdError::GridMismatch("spectrum length".into()));
        }
        let mut u = hat.to_vec();
        Fourier::new(u.len()).centered_inverse(&grid, &mut u);
        Ok(SampledFunction { grid, samples: u })
    }

    pub(crate) fn to_cvec(&self) -> CVec {
        CVec::from_column_slice(&self.samples)
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "re", "im"])?;
        for (k, z) in self.samples.iter().enumerate() {
            wr.write_record(&[self.grid.t(k).to_string(), z.re.to_string(), z.im.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Grid recovered from the first two abscissae.
    pub fn read_csv(r: impl Read) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut ts = Vec::new();
        let mut samples = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let f = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| CdError::Parse("short csv row".into()))?
                    .trim()
                    .parse()
                    .map_err(|e| CdError::Parse(format!("{e}")))
            };
            ts.push(f(0)?);
            samples.push(Complex64::new(f(1)?, f(2)?));
        }
        if ts.len() < 2 {
            return Err(CdError::Parse("need at least two samples".into()));
        }
        let grid = Grid::new(ts[1] - ts[0], -ts[0])?;
        Self::new(grid, samples)
    }
}

/// Orthonormal Hermite function `ψ_n` of `e^{−x²/2}` type by recurrence.
fn hermite_fn(n: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    for j in 0..n {
        let next = (2.0 / (j as f64 + 1.0)).sqrt() * x * cur - (j as f64 / (j as f64 + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Result of a time-frequency shift; `snap_offset` is `x` minus the applied
/// whole-sample translation.
#[derive(Debug, Clone)]
pub struct Shifted {
    pub function: SampledFunction,
    pub snap_offset: f64,
}

/// `(π(z)f)(t) = e^{2πiξt} f(t − x)`, translation periodic on the grid.
pub fn tf_shift(f: &SampledFunction, x: f64, xi: f64) -> Shifted {
    let (s, off) = f.grid.snap(x);
    let mut out = vec![C0; f.len()];
    shift_modulate(&f.grid, &f.samples, s, xi, &mut out);
    Shifted {
        function: SampledFunction {
            grid: f.grid,
            samples: out,
        },
        snap_offset: off,
    }
}

fn shift_modulate(grid: &Grid, src: &[Complex64], s: i64, xi: f64, out: &mut [Complex64]) {
    let n = src.len() as i64;
    for (k, o) in out.iter_mut().enumerate() {
        let from = (k as i64 - s).rem_euclid(n) as usize;
        *o = src[from] * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * xi * grid.t(k));
    }
}

/// `V_g f(x, ξ) = h Σ_k f(t_k) conj(g(t_k − x)) e^{−2πi t_k ξ}` at
/// `x = t_{j·x_stride}` and every `xi_stride`-th frequency bin.
pub fn stft(f: &SampledFunction, g: &SampledFunction, x_stride: usize, xi_stride: usize) -> Result<SampledSymbol> {
    f.check_grid(g)?;
    if x_stride == 0 || xi_stride == 0 || f.len() % x_stride != 0 || f.len() % xi_stride != 0 {
        return Err(CdError::param("strides must divide the grid length"));
    }
    let grid = f.grid;
    let n = grid.len();
    let fourier = Fourier::new(n);
    let nx = n / x_stride;
    let nxi = n / xi_stride;
    let rows: Vec<Vec<Complex64>> = (0..nx)
        .into_par_iter()
        .map(|j| {
            let s = (j * x_stride) as i64 - (n / 2) as i64;
            let mut u: Vec<Complex64> = (0..n)
                .map(|k| f.samples[k] * g.samples[(k as i64 - s).rem_euclid(n as i64) as usize].conj())
                .collect();
            fourier.centered_forward(&grid, &mut u);
            u.into_iter().step_by(xi_stride).collect()
        })
        .collect();
    let sg = SymbolGrid::stft(&grid, x_stride, xi_stride);
    let values: Vec<Complex64> = rows.into_iter().flatten().collect();
    debug_assert_eq!(values.len(), nx * nxi);
    SampledSymbol::new(grid, sg, values)
}

/// Mixed quadrature of `|V_g f|`: inner `L^p` over `x`, outer `L^q` over `ξ`.
pub fn modulation_quasinorm(f: &SampledFunction, g: &SampledFunction, p: f64, q: f64) -> Result<f64> {
    check_exponent(p)?;
    check_exponent(q)?;
    let v = stft(f, g, 1, 1)?;
    let sg = v.symbol_grid();
    let (nx, nxi) = (sg.nx, sg.nxi);
    let wx = if p.is_infinite() { 1.0 } else { sg.dx.powf(1.0 / p) };
    let wxi = if q.is_infinite() { 1.0 } else { sg.dxi.powf(1.0 / q) };
    let inner: Vec<f64> = (0..nxi)
        .map(|m| {
            let col: Vec<f64> = (0..nx).map(|i| v.get(i, m).norm()).collect();
            wx * lp_norm_real(&col, p)
        })
        .collect();
    Ok(wxi * lp_norm_real(&inner, q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameBounds {
    pub lower: f64,
    pub upper: f64,
}

impl FrameBounds {
    pub fn ratio_minus_one(&self) -> f64 {
        if self.lower > 0.0 {
            self.upper / self.lower - 1.0
        } else {
            f64::INFINITY
        }
    }
}

/// Lower frame bounds below this fraction of the upper one count as "not a frame".
pub const FRAME_TOL: f64 = 1e-8;
/// Tightness tolerance on `B/A − 1`.
pub const TIGHT_TOL: f64 = 1e-8;

/// Gabor system `{π(λ)g}` over `Λ = αZ × βZ` with `α/h` and `βT` integers.
#[derive(Debug, Clone)]
pub struct GaborSystem {
    window: SampledFunction,
    alpha: f64,
    beta: f64,
    a: usize,
    b: usize,
    lattice: Arc<PointSet>,
    /// Columns are the sampled atoms, column `i·n_ξ + j` for `(x_i, ξ_j)`.
    atoms: CMat,
    /// `h G G^H`.
    frame_op: CMat,
    bounds: FrameBounds,
}

impl GaborSystem {
    /// Normalizes the window to unit norm first.
    pub fn new(window: &SampledFunction, alpha: f64, beta: f64) -> Result<Self> {
        Self::build(window.normalized()?, alpha, beta)
    }

    /// Keeps the window as given, used for dual and tight windows.
    pub fn with_window(window: SampledFunction, alpha: f64, beta: f64) -> Result<Self> {
        Self::build(window, alpha, beta)
    }

    fn build(window: SampledFunction, alpha: f64, beta: f64) -> Result<Self> {
        let grid = window.grid;
        let n = grid.len();
        let ra = alpha / grid.step;
        let rb = beta * grid.period();
        let a = ra.round() as usize;
        let b = rb.round() as usize;
        if !(alpha > 0.0 && beta > 0.0) || a == 0 || b == 0 || (ra - a as f64).abs() > 1e-9 || (rb - b as f64).abs() > 1e-9 {
            return Err(CdError::param("α/h and βT must be positive integers"));
        }
        if (n / 2) % a != 0 || (n / 2) % b != 0 {
            return Err(CdError::param("α and β must divide the grid radius and frequency band evenly"));
        }
        let nx = n / a;
        let nxi = n / b;
        let mut points = Vec::with_capacity(nx * nxi);
        let mut shifts = Vec::with_capacity(nx * nxi);
        for i in 0..nx {
            let s = (i * a) as i64 - (n / 2) as i64;
            for j in 0..nxi {
                let m = j * b;
                points.push(vec![s as f64 * grid.step, grid.xi(m)]);
                shifts.push((s, grid.xi(m)));
            }
        }
        let lattice = Arc::new(
            PointSet::from_points(2, &points)?
                .with_step(alpha.min(beta))?
                .with_truncation_radius(grid.radius.max(0.5 / grid.step)),
        );
        let cols: Vec<Vec<Complex64>> = shifts
            .par_iter()
            .map(|&(s, xi)| {
                let mut out = vec![C0; n];
                shift_modulate(&grid, &window.samples, s, xi, &mut out);
                out
            })
            .collect();
        let atoms = CMat::from_fn(n, cols.len(), |k, c| cols[c][k]);
        let frame_op = linalg::cgemm(&atoms, &atoms.adjoint()) * Complex64::new(grid.step, 0.0);
        let (vals, _) = linalg::hermitian_eigen(&frame_op);
        let bounds = FrameBounds {
            lower: vals[0],
            upper: *vals.last().unwrap(),
        };
        Ok(GaborSystem {
            window,
            alpha,
            beta,
            a,
            b,
            lattice,
            atoms,
            frame_op,
            bounds,
        })
    }

    pub fn window(&self) -> &SampledFunction {
        &self.window
    }

    pub fn grid(&self) -> &Grid {
        &self.window.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Lattice strides in samples and frequency bins.
    pub fn strides(&self) -> (usize, usize) {
        (self.a, self.b)
    }

    pub fn lattice(&self) -> &Arc<PointSet> {
        &self.lattice
    }

    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }

    /// Torus periods of the time-frequency plane, `(T, 1/h)`.
    pub fn periods(&self) -> [f64; 2] {
        [self.grid().period(), 1.0 / self.grid().step]
    }

    pub fn atoms(&self) -> &CMat {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> SampledFunction {
        SampledFunction {
            grid: self.window.grid,
            samples: self.atoms.column(i).iter().copied().collect(),
        }
    }

    pub fn frame_matrix(&self) -> &CMat {
        &self.frame_op
    }

    pub fn frame_bounds(&self) -> FrameBounds {
        self.bounds
    }

    pub fn is_frame(&self) -> bool {
        self.bounds.lower > FRAME_TOL * self.bounds.upper
    }

    pub fn is_tight(&self) -> bool {
        self.is_frame() && self.bounds.ratio_minus_one() <= TIGHT_TOL
    }

    pub fn require_frame(&self) -> Result<()> {
        if self.is_frame() {
            Ok(())
        } else {
            Err(CdError::NotAFrame {
                lower: self.bounds.lower,
                upper: self.bounds.upper,
            })
        }
    }

    pub fn require_tight(&self) -> Result<()> {
        self.require_frame()?;
        if self.is_tight() {
            Ok(())
        } else {
            Err(CdError::NotTight {
                lower: self.bounds.lower,
                upper: self.bounds.upper,
            })
        }
    }

    fn check_fn(&self, f: &SampledFunction) -> Result<()> {
        self.window.check_grid(f)
    }

    /// Lattice indices with `|x| <= frac R` and `|ξ| <= frac/(2h)`.
    pub fn interior_indices(&self, frac: f64) -> Vec<usize> {
        let xr = frac * self.grid().radius + 1e-12;
        let fr = frac * 0.5 / self.grid().step + 1e-12;
        (0..self.len())
            .filter(|&i| {
                let p = self.lattice.point(i);
                p[0].abs() <= xr && p[1].abs() <= fr
            })
            .collect()
    }

    /// `C_g f = (⟨f, π(λ)g⟩)_λ`.
    pub fn analysis(&self, f: &SampledFunction) -> Result<Seq> {
        self.check_fn(f)?;
        let c = self.atoms.ad_mul(&f.to_cvec()) * Complex64::new(self.grid().step, 0.0);
        Seq::new(self.lattice.clone(), c.iter().copied().collect())
    }

    /// `D_g c = Σ c_λ π(λ)g`.
    pub fn synthesis(&self, c: &Seq) -> Result<SampledFunction> {
        if c.len() != self.len() {
            return Err(CdError::IndexMismatch {
                expected: self.len(),
                got: c.len(),
            });
        }
        let v = &self.atoms * CVec::from_column_slice(c.values());
        SampledFunction::new(self.window.grid, v.iter().copied().collect())
    }

    pub fn frame_operator(&self, f: &SampledFunction) -> Result<SampledFunction> {
        self.check_fn(f)?;
        let v = &self.frame_op * f.to_cvec();
        SampledFunction::new(self.window.grid, v.iter().copied().collect())
    }

    /// Canonical dual `γ = S^{-1} g` by conjugate gradients.
    pub fn dual_window(&self) -> Result<SampledFunction> {
        self.require_frame()?;
        let (x, _, _) = linalg::conjugate_gradient(|v| &self.frame_op * v, &self.window.to_cvec(), 1e-10, 10 * self.window.len())?;
        SampledFunction::new(self.window.grid, x.iter().copied().collect())
    }

    pub fn dual_system(&self) -> Result<GaborSystem> {
        Self::with_window(self.dual_window()?, self.alpha, self.beta)
    }

    /// `S^{-1/2} g`; the resulting system has frame operator `I`.
    pub fn tight_window(&self) -> Result<SampledFunction> {
        self.require_frame()?;
        let root = linalg::hermitian_function(&self.frame_op, |l| 1.0 / l.max(f64::MIN_POSITIVE).sqrt());
        let v = root * self.window.to_cvec();
        SampledFunction::new(self.window.grid, v.iter().copied().collect())
    }

    pub fn tight_system(&self) -> Result<GaborSystem> {
        Self::with_window(self.tight_window()?, self.alpha, self.beta)
    }

    /// `D_g C_dual f`.
    pub fn reconstruct(&self, dual: &GaborSystem, f: &SampledFunction) -> Result<SampledFunction> {
        self.synthesis(&dual.analysis(f)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(1.0 / 16.0, 8.0).unwrap()
    }

    #[test]
    fn centered_transform_round_trip_and_gaussian() {
        let g = SampledFunction::gaussian(grid());
        assert!((g.norm() - 1.0).abs() < 1e-12);
        let hat = g.fourier();
        for (m, z) in hat.iter().enumerate() {
            assert!((z - g.samples()[m]).norm() < 1e-12);
        }
        let back = SampledFunction::from_fourier(grid(), &hat).unwrap();
        assert!(back.sub(&g).unwrap().norm() < 1e-13);
    }

    #[test]
    fn hermite_orthonormal() {
        let hs: Vec<_> = (0..6).map(|n| SampledFunction::hermite(grid(), n)).collect();
        for i in 0..6 {
            for j in 0..6 {
                let ip = hs[i].inner(&hs[j]).unwrap();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ip.re - want).abs() < 1e-12 && ip.im.abs() < 1e-12, "{i} {j} {ip}");
            }
        }
    }

    #[test]
    fn frame_and_non_frame() {
        let g = SampledFunction::gaussian(grid());
        let fr = GaborSystem::new(&g, 0.5, 0.5).unwrap();
        assert!(fr.is_frame());
        assert!(!fr.is_tight());
        let crit = GaborSystem::new(&g, 1.0, 1.0).unwrap();
        assert!(!crit.is_frame(), "{:?}", crit.frame_bounds());
        assert!(crit.dual_window().is_err());
    }

    #[test]
    fn tight_system_is_parseval() {
        let g = SampledFunction::gaussian(grid());
        let t = GaborSystem::new(&g, 0.5, 0.5).unwrap().tight_system().unwrap();
        let b = t.frame_bounds();
        assert!(b.ratio_minus_one() < 1e-8, "{b:?}");
        assert!((b.lower - 1.0).abs() < 1e-8);
        let f = SampledFunction::hermite(grid(), 3);
        let c = t.analysis(&f).unwrap();
        let e: f64 = c.values().iter().map(|z| z.norm_sqr()).sum();
        assert!((e - 1.0).abs() < 1e-8);
    }
}

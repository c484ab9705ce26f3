//! Wigner distribution, Weyl operators from sampled symbols, Gabor matrices
//! and symbol inversion through the `M(a) + I − P` trick.
//!
//! Symbols live on a grid with twice the spatial resolution of the function
//! grid: `x_c = (h/2)(c − L)`, `c = 0..2L`, and `ξ_m = (m − L/2)/T`,
//! `m = 0..L`. Functions are lifted to the fine grid by band-limited
//! interpolation `U`.

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cdmatrix::CDMatrix;
use crate::envelopes::Envelope;
use crate::error::{CdError, Result};
use crate::gabor::{Fourier, GaborSystem, Grid, SampledFunction};
use crate::linalg::{self, CMat, CVec};
use crate::pointset::PointSet;
use crate::sequences::{check_exponent, lp_norm_real, Seq};

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Uniform axes of a time-frequency grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolGrid {
    pub x0: f64,
    pub dx: f64,
    pub nx: usize,
    pub xi0: f64,
    pub dxi: f64,
    pub nxi: usize,
}

impl SymbolGrid {
    /// The grid Weyl symbols are sampled on.
    pub fn weyl(g: &Grid) -> Self {
        SymbolGrid {
            x0: -g.radius(),
            dx: 0.5 * g.step(),
            nx: 2 * g.len(),
            xi0: g.xi(0),
            dxi: 1.0 / g.period(),
            nxi: g.len(),
        }
    }

    pub fn stft(g: &Grid, x_stride: usize, xi_stride: usize) -> Self {
        SymbolGrid {
            x0: -g.radius(),
            dx: g.step() * x_stride as f64,
            nx: g.len() / x_stride,
            xi0: g.xi(0),
            dxi: xi_stride as f64 / g.period(),
            nxi: g.len() / xi_stride,
        }
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + self.dx * i as f64
    }

    pub fn xi(&self, m: usize) -> f64 {
        self.xi0 + self.dxi * m as f64
    }

    fn same(&self, o: &SymbolGrid) -> bool {
        self.nx == o.nx && self.nxi == o.nxi && (self.dx - o.dx).abs() <= 1e-12 * self.dx && (self.dxi - o.dxi).abs() <= 1e-12 * self.dxi
    }
}

/// Complex samples of `a(x, ξ)`, row-major in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSymbol {
    fgrid: Grid,
    sgrid: SymbolGrid,
    values: Vec<Complex64>,
}

impl SampledSymbol {
    pub fn new(fgrid: Grid, sgrid: SymbolGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != sgrid.nx * sgrid.nxi {
            return Err(CdError::GridMismatch(format!(
                "{} values for a {}x{} symbol grid",
                values.len(),
                sgrid.nx,
                sgrid.nxi
            )));
        }
        Ok(SampledSymbol { fgrid, sgrid, values })
    }

    /// Samples `a` on the Weyl grid of `fgrid`.
    pub fn from_fn(fgrid: Grid, a: impl Fn(f64, f64) -> Complex64 + Sync) -> Self {
        let sgrid = SymbolGrid::weyl(&fgrid);
        let values = (0..sgrid.nx)
            .into_par_iter()
            .flat_map_iter(|i| {
                let x = sgrid.x(i);
                let a = &a;
                (0..sgrid.nxi).map(move |m| a(x, sgrid.xi(m)))
            })
            .collect();
        SampledSymbol { fgrid, sgrid, values }
    }

    pub fn from_real_fn(fgrid: Grid, a: impl Fn(f64, f64) -> f64 + Sync) -> Self {
        Self::from_fn(fgrid, |x, xi| Complex64::new(a(x, xi), 0.0))
    }

    pub fn constant(fgrid: Grid, c: Complex64) -> Self {
        Self::from_fn(fgrid, |_, _| c)
    }

    pub fn function_grid(&self) -> &Grid {
        &self.fgrid
    }

    pub fn symbol_grid(&self) -> &SymbolGrid {
        &self.sgrid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, i: usize, m: usize) -> Complex64 {
        self.values[i * self.sgrid.nxi + m]
    }

    pub fn is_weyl_grid(&self) -> bool {
        self.sgrid.same(&SymbolGrid::weyl(&self.fgrid))
    }

    fn require_weyl(&self) -> Result<()> {
        if self.is_weyl_grid() {
            Ok(())
        } else {
            Err(CdError::GridMismatch("symbol is not on the Weyl grid of its function grid".into()))
        }
    }

    fn check_function(&self, f: &SampledFunction) -> Result<()> {
        if self.fgrid.len() == f.grid().len() && (self.fgrid.step() - f.grid().step()).abs() <= 1e-12 * self.fgrid.step() {
            Ok(())
        } else {
            Err(CdError::GridMismatch("symbol and function grids differ".into()))
        }
    }

    /// Indices `(i, m)` with `|x| <= frac R` and `|ξ| <= frac/(2h)`.
    pub fn interior(&self, frac: f64) -> Vec<(usize, usize)> {
        let xr = frac * self.fgrid.radius() + 1e-12;
        let fr = frac * 0.5 / self.fgrid.step() + 1e-12;
        let mut out = Vec::new();
        for i in 0..self.sgrid.nx {
            if self.sgrid.x(i).abs() > xr {
                continue;
            }
            for m in 0..self.sgrid.nxi {
                if self.sgrid.xi(m).abs() <= fr {
                    out.push((i, m));
                }
            }
        }
        out
    }

    /// `max |a − b|` over the interior.
    pub fn interior_max_diff(&self, other: &SampledSymbol, frac: f64) -> Result<f64> {
        if !self.sgrid.same(&other.sgrid) {
            return Err(CdError::GridMismatch("symbol grids differ".into()));
        }
        Ok(self
            .interior(frac)
            .into_iter()
            .map(|(i, m)| (self.get(i, m) - other.get(i, m)).norm())
            .fold(0.0, f64::max))
    }

    /// Columns `x, xi, re, im`.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "xi", "re", "im"])?;
        for i in 0..self.sgrid.nx {
            for m in 0..self.sgrid.nxi {
                let z = self.get(i, m);
                wr.write_record(&[
                    self.sgrid.x(i).to_string(),
                    self.sgrid.xi(m).to_string(),
                    z.re.to_string(),
                    z.im.to_string(),
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads a dump written for a Weyl grid over `fgrid`.
    pub fn read_csv(fgrid: Grid, r: impl Read) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut values = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let f = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| CdError::Parse("short csv row".into()))?
                    .trim()
                    .parse()
                    .map_err(|e| CdError::Parse(format!("{e}")))
            };
            values.push(Complex64::new(f(2)?, f(3)?));
        }
        Self::new(fgrid, SymbolGrid::weyl(&fgrid), values)
    }
}

/// Transforms shared by the Weyl routines on one function grid.
struct Plan {
    n: usize,
    fl: Fourier,
    f2l: Fourier,
}

impl Plan {
    fn new(grid: &Grid) -> Self {
        let n = grid.len();
        Plan {
            n,
            fl: Fourier::new(n),
            f2l: Fourier::new(2 * n),
        }
    }

    /// Band-limited interpolation onto the half-step grid; the Nyquist bin
    /// is read as frequency `−L/2`.
    fn upsample(&self, f: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut spec = f.to_vec();
        self.fl.forward(&mut spec);
        let mut wide = vec![C0; 2 * n];
        wide[..n / 2].copy_from_slice(&spec[..n / 2]);
        wide[2 * n - n / 2..].copy_from_slice(&spec[n / 2..]);
        self.f2l.inverse(&mut wide);
        let s = 1.0 / n as f64;
        wide.iter_mut().for_each(|z| *z *= s);
        wide
    }

    /// Adjoint of [`Plan::upsample`].
    fn upsample_adjoint(&self, u: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut wide = u.to_vec();
        self.f2l.forward(&mut wide);
        let mut spec = vec![C0; n];
        spec[..n / 2].copy_from_slice(&wide[..n / 2]);
        spec[n / 2..].copy_from_slice(&wide[2 * n - n / 2..]);
        self.fl.inverse(&mut spec);
        let s = 1.0 / n as f64;
        spec.iter_mut().for_each(|z| *z *= s);
        spec
    }

    /// `U` as a `2L × L` matrix.
    fn upsample_matrix(&self) -> CMat {
        let n = self.n;
        let cols: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|k| {
                let mut e = vec![C0; n];
                e[k] = Complex64::new(1.0, 0.0);
                self.upsample(&e)
            })
            .collect();
        CMat::from_fn(2 * n, n, |r, c| cols[c][r])
    }

    /// `â(c, j) = Σ_m a(c, m) e^{2πi(m−L/2)j/L}`, stored at `[c][j mod L]`.
    fn symbol_hat(&self, a: &SampledSymbol) -> Vec<Vec<Complex64>> {
        let n = self.n;
        (0..2 * n)
            .into_par_iter()
            .map(|c| {
                let mut row = a.values[c * n..(c + 1) * n].to_vec();
                self.fl.inverse(&mut row);
                for (j, z) in row.iter_mut().enumerate() {
                    if j % 2 == 1 {
                        *z = -*z;
                    }
                }
                row
            })
            .collect()
    }

    /// `h Σ_{|j| < L/2} P(j) e^{−2πi(m−L/2)j/L}` over `m`, where `P(j)` is
    /// supplied for `j` in `[−L/2, L/2)`.
    fn lag_transform(&self, p: impl Fn(i64) -> Complex64, scale: f64) -> Vec<Complex64> {
        let n = self.n;
        let half = (n / 2) as i64;
        let mut v = vec![C0; n];
        for j in -half..half {
            let z = p(j);
            let idx = j.rem_euclid(n as i64) as usize;
            v[idx] = if j.rem_euclid(2) == 1 { -z } else { z };
        }
        self.fl.forward(&mut v);
        v.iter_mut().for_each(|z| *z *= scale);
        v
    }
}

fn wrap(i: i64, n: usize) -> usize {
    i.rem_euclid(n as i64) as usize
}

/// `W(f, g)(x, ξ) = ∫ f(x + τ/2) conj(g(x − τ/2)) e^{−2πiξτ} dτ`, lags
/// restricted to `|τ| < R`.
pub fn wigner(f: &SampledFunction, g: &SampledFunction) -> Result<SampledSymbol> {
    if !f.grid().same(g.grid()) {
        return Err(CdError::GridMismatch("wigner arguments on different grids".into()));
    }
    let grid = *f.grid();
    let plan = Plan::new(&grid);
    let n2 = 2 * grid.len();
    let uf = plan.upsample(f.samples());
    let ug = plan.upsample(g.samples());
    let rows: Vec<Vec<Complex64>> = (0..n2)
        .into_par_iter()
        .map(|c| {
            let c = c as i64;
            plan.lag_transform(|j| uf[wrap(c + j, n2)] * ug[wrap(c - j, n2)].conj(), grid.step())
        })
        .collect();
    SampledSymbol::new(grid, SymbolGrid::weyl(&grid), rows.into_iter().flatten().collect())
}

/// Discrete pairing `⟨a, b⟩ = (h/2T) Σ a conj(b)` on the Weyl grid.
pub fn symbol_pairing(a: &SampledSymbol, b: &SampledSymbol) -> Result<Complex64> {
    a.require_weyl()?;
    if !a.sgrid.same(&b.sgrid) {
        return Err(CdError::GridMismatch("symbol grids differ".into()));
    }
    let s: Complex64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y.conj()).sum();
    Ok(s * (a.sgrid.dx * a.sgrid.dxi))
}

/// `a^w f`, the unique function with `⟨a^w f, h⟩ = ⟨a, W(h, f)⟩` for all `h`.
pub fn weyl_apply(a: &SampledSymbol, f: &SampledFunction) -> Result<SampledFunction> {
    a.require_weyl()?;
    a.check_function(f)?;
    let plan = Plan::new(&a.fgrid);
    let hat = plan.symbol_hat(a);
    let u = plan.upsample(f.samples());
    let out = apply_hat(&plan, &hat, &u);
    SampledFunction::new(*f.grid(), plan.upsample_adjoint(&out))
}

/// `u(n) = (2L)^{-1} Σ_j â(n − j, j) ũ(n − 2j)`.
fn apply_hat(plan: &Plan, hat: &[Vec<Complex64>], u: &[Complex64]) -> Vec<Complex64> {
    let n = plan.n;
    let n2 = 2 * n;
    let half = (n / 2) as i64;
    let s = 1.0 / n2 as f64;
    (0..n2)
        .into_par_iter()
        .map(|t| {
            let t = t as i64;
            let mut acc = C0;
            for j in -half..half {
                acc += hat[wrap(t - j, n2)][wrap(j, n)] * u[wrap(t - 2 * j, n2)];
            }
            acc * s
        })
        .collect()
}

/// Matrix of `a^w` on the function grid.
pub fn weyl_operator(a: &SampledSymbol) -> Result<CMat> {
    a.require_weyl()?;
    let plan = Plan::new(&a.fgrid);
    let n = plan.n;
    let n2 = 2 * n;
    let hat = plan.symbol_hat(a);
    let half = (n / 2) as i64;
    // core(t, t − 2j) = â(t − j, j) / 2L
    let s = 1.0 / n2 as f64;
    let mut core = CMat::zeros(n2, n2);
    for t in 0..n2 as i64 {
        for j in -half..half {
            core[(t as usize, wrap(t - 2 * j, n2))] = hat[wrap(t - j, n2)][wrap(j, n)] * s;
        }
    }
    let up = plan.upsample_matrix();
    Ok(linalg::cgemm(&up.adjoint(), &linalg::cgemm(&core, &up)))
}

/// Weyl symbol of the operator with matrix `op` on the function grid; exact
/// inverse of [`weyl_operator`] on its range.
pub fn operator_to_symbol(grid: &Grid, op: &CMat) -> Result<SampledSymbol> {
    let n = grid.len();
    if op.nrows() != n || op.ncols() != n {
        return Err(CdError::DimensionMismatch(op.nrows(), n));
    }
    let plan = Plan::new(grid);
    let n2 = 2 * n;
    let up = plan.upsample_matrix();
    let k = linalg::cgemm(&linalg::cgemm(&up, op), &up.adjoint());
    let rows: Vec<Vec<Complex64>> = (0..n2)
        .into_par_iter()
        .map(|c| {
            let c = c as i64;
            plan.lag_transform(|j| k[(wrap(c + j, n2), wrap(c - j, n2))], 1.0)
        })
        .collect();
    SampledSymbol::new(*grid, SymbolGrid::weyl(grid), rows.into_iter().flatten().collect())
}

/// Applies `e^{sign·πi η y}` in the symbol's Fourier domain.
fn quantization_multiplier(a: &SampledSymbol, sign: f64) -> Result<SampledSymbol> {
    a.require_weyl()?;
    let (nx, nxi) = (a.sgrid.nx, a.sgrid.nxi);
    let fx = Fourier::new(nx);
    let fxi = Fourier::new(nxi);
    let mut rows: Vec<Vec<Complex64>> = a.values.chunks(nxi).map(|r| r.to_vec()).collect();
    rows.par_iter_mut().for_each(|r| fxi.forward(r));
    let mut cols: Vec<Vec<Complex64>> = (0..nxi).map(|m| rows.iter().map(|r| r[m]).collect()).collect();
    let l = nxi as f64;
    cols.par_iter_mut().enumerate().for_each(|(m, col)| {
        fx.forward(col);
        let q = signed(m, nxi) as f64;
        for (i, z) in col.iter_mut().enumerate() {
            let p = signed(i, nx) as f64;
            *z *= Complex64::from_polar(1.0, sign * std::f64::consts::PI * p * q / l);
        }
        fx.inverse(col);
    });
    for (m, col) in cols.iter().enumerate() {
        for (i, r) in rows.iter_mut().enumerate() {
            r[m] = col[i];
        }
    }
    let s = 1.0 / (nx * nxi) as f64;
    rows.par_iter_mut().for_each(|r| {
        fxi.inverse(r);
        r.iter_mut().for_each(|z| *z *= s);
    });
    SampledSymbol::new(a.fgrid, a.sgrid, rows.into_iter().flatten().collect())
}

/// FFT index to signed frequency in `[−n/2, n/2)`.
fn signed(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Kohn–Nirenberg to Weyl: multiplier `e^{−πi η y}`.
pub fn kn_to_weyl(a_kn: &SampledSymbol) -> Result<SampledSymbol> {
    quantization_multiplier(a_kn, -1.0)
}

pub fn weyl_to_kn(a_w: &SampledSymbol) -> Result<SampledSymbol> {
    quantization_multiplier(a_w, 1.0)
}

/// `(a f)(x) = ∫ a(x, ξ) f̂(ξ) e^{2πixξ} dξ` at the function grid points.
pub fn kn_apply(a: &SampledSymbol, f: &SampledFunction) -> Result<SampledFunction> {
    a.require_weyl()?;
    a.check_function(f)?;
    let grid = *f.grid();
    let n = grid.len();
    let fh = f.fourier();
    let t = grid.period();
    let out: Vec<Complex64> = (0..n)
        .into_par_iter()
        .map(|k| {
            let x = grid.t(k);
            let row = &a.values[2 * k * n..(2 * k + 1) * n];
            let s: Complex64 = (0..n)
                .map(|m| row[m] * fh[m] * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * x * grid.xi(m)))
                .sum();
            s / t
        })
        .collect();
    SampledFunction::new(grid, out)
}

/// KN symbol of `f ↦ Σ_λ ⟨f, π(λ)g₂⟩ π(λ)g₁`:
/// `Σ g₁(x−l) conj(ĝ₂(ξ−λ)) e^{2πi(x−l)(λ−ξ)}` with differences wrapped.
pub fn frame_operator_symbol(g1: &SampledFunction, g2: &SampledFunction, alpha: f64, beta: f64) -> Result<SampledSymbol> {
    if !g1.grid().same(g2.grid()) {
        return Err(CdError::GridMismatch("windows on different grids".into()));
    }
    // the lattice checks live in the Gabor system
    let sys = GaborSystem::with_window(g1.clone(), alpha, beta)?;
    let grid = *g1.grid();
    let n = grid.len();
    let n2 = 2 * n;
    let (a, b) = sys.strides();
    let plan = Plan::new(&grid);
    let ug1 = plan.upsample(g1.samples());
    let g2h = g2.fourier();
    let sg = SymbolGrid::weyl(&grid);
    let tol = 1e-18 * ug1.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let two_pi = 2.0 * std::f64::consts::PI;
    let rows: Vec<Vec<Complex64>> = (0..n2)
        .into_par_iter()
        .map(|c| {
            let mut row = vec![C0; n];
            // lattice translations l = a·i samples = 2a·i fine-grid steps
            for i in 0..n / a {
                // x − l = (h/2)(c − 2ai), wrapped into [−T/2, T/2)
                let idx = wrap(c as i64 - 2 * (a * i) as i64 + n as i64, n2);
                let gv = ug1[idx];
                if gv.norm() <= tol {
                    continue;
                }
                let dx = sg.x(idx);
                for (m, slot) in row.iter_mut().enumerate() {
                    let mut acc = C0;
                    for j in 0..n / b {
                        // ξ − λ wrapped into [−1/2h, 1/2h)
                        let mi = wrap(m as i64 - (j * b) as i64 + (n / 2) as i64, n);
                        acc += g2h[mi].conj() * Complex64::from_polar(1.0, -two_pi * dx * grid.xi(mi));
                    }
                    *slot += gv * acc;
                }
            }
            row
        })
        .collect();
    SampledSymbol::new(grid, sg, rows.into_iter().flatten().collect())
}

/// `M(a)`, `P` and `A = M(a) + I − P` over the lattice of a tight system.
#[derive(Debug, Clone)]
pub struct GaborMatrixBundle {
    pub m: CDMatrix,
    pub p: CDMatrix,
    pub a: CDMatrix,
    pub frame: GaborSystem,
}

/// Refuses frames whose operator is not the identity.
pub fn gabor_matrix(a: &SampledSymbol, frame: &GaborSystem) -> Result<GaborMatrixBundle> {
    frame.require_tight()?;
    if (frame.frame_bounds().lower - 1.0).abs() > 1e-8 {
        return Err(CdError::NotTight {
            lower: frame.frame_bounds().lower,
            upper: frame.frame_bounds().upper,
        });
    }
    let k = weyl_operator(a)?;
    Ok(bundle_from_operator(&k, frame))
}

fn bundle_from_operator(k: &CMat, frame: &GaborSystem) -> GaborMatrixBundle {
    let g = frame.atoms();
    let h = Complex64::new(frame.grid().step(), 0.0);
    let m = linalg::cgemm_ha(g, &linalg::cgemm(k, g)) * h;
    let p = linalg::cgemm_ha(g, g) * h;
    let a = &m + linalg::identity(m.nrows()) - &p;
    let lat = frame.lattice().clone();
    let wrap = |e: CMat| CDMatrix::new(lat.clone(), lat.clone(), e).expect("lattice-sized");
    GaborMatrixBundle {
        m: wrap(m),
        p: wrap(p),
        a: wrap(a),
        frame: frame.clone(),
    }
}

impl GaborMatrixBundle {
    /// Operator `h G X G^H` on the function grid for a lattice matrix `X`.
    pub fn operator_of(&self, x: &CDMatrix) -> CMat {
        let g = self.frame.atoms();
        linalg::cgemm(&linalg::cgemm(g, x.entries()), &g.adjoint()) * Complex64::new(self.frame.grid().step(), 0.0)
    }
}

/// Diagonal-wise maxima of `|M|` and their `ℓ^{p0}` quasi-norm.
#[derive(Debug, Clone)]
pub struct AlmostDiag {
    pub envelope: Envelope,
    pub h: Seq,
    pub quasinorm: f64,
    /// Fitted `h(k) <= C e^{−c|k|}`.
    pub decay_c: f64,
    pub decay_rate: f64,
}

/// Differences are taken on the time-frequency torus of the frame grid.
pub fn almost_diag_envelope(m: &CDMatrix, frame: &GaborSystem, p0: f64) -> Result<AlmostDiag> {
    check_exponent(p0)?;
    let step = frame.alpha().min(frame.beta());
    let me = m.min_envelope_periodic(&frame.periods(), Some(step))?;
    let env = me.envelope;
    let nodes: Vec<(Vec<i64>, f64)> = env.nonzero().collect();
    let pts: Vec<Vec<f64>> = nodes.iter().map(|(k, _)| k.iter().map(|&i| i as f64 * step).collect()).collect();
    let vals: Vec<f64> = nodes.iter().map(|(_, v)| *v).collect();
    let (c, rate) = decay_fit(&pts, &vals);
    let index = if pts.is_empty() {
        Arc::new(PointSet::from_points(2, &[vec![0.0, 0.0]])?.with_step(step)?)
    } else {
        Arc::new(PointSet::from_points(2, &pts)?.with_step(step)?)
    };
    let hv = if pts.is_empty() { vec![0.0] } else { vals.clone() };
    Ok(AlmostDiag {
        quasinorm: lp_norm_real(&vals, p0),
        h: Seq::from_real(index, &hv)?,
        envelope: env,
        decay_c: c,
        decay_rate: rate,
    })
}

/// Least-squares slope of `log max_{|k| in bin} h` against radius, then the
/// smallest `C` making `h(k) <= C e^{−rate|k|}` hold everywhere.
fn decay_fit(pts: &[Vec<f64>], vals: &[f64]) -> (f64, f64) {
    let top = vals.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return (0.0, 0.0);
    }
    let floor = 1e-13 * top;
    let mut bins: std::collections::BTreeMap<i64, f64> = Default::default();
    for (p, &v) in pts.iter().zip(vals) {
        if v > floor {
            let r = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            let e = bins.entry((r * 2.0).round() as i64).or_insert(0.0);
            *e = e.max(v);
        }
    }
    let xs: Vec<f64> = bins.keys().map(|&k| k as f64 * 0.5).collect();
    let ys: Vec<f64> = bins.values().map(|v| v.ln()).collect();
    let rate = if xs.len() < 2 {
        0.0
    } else {
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        -sxy / sxx
    };
    let c = pts
        .iter()
        .zip(vals)
        .map(|(p, &v)| v * (rate * p.iter().map(|x| x * x).sum::<f64>().sqrt()).exp())
        .fold(0.0, f64::max);
    (c, rate)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvertWeylReport {
    pub condition: f64,
    /// `1/‖A^{-1}‖_{p→p}` when the norm is computable exactly.
    pub lower_bound_p: Option<f64>,
    /// `max ‖(a^w b^w − I)f‖/‖f‖` over Hermite functions `0..5`.
    pub roundtrip: f64,
    /// Frobenius norm of `M(b)M(a) − P` on the interior block.
    pub product_residual: f64,
    pub truncated_entries: usize,
}

#[derive(Debug, Clone)]
pub struct WeylInverse {
    pub symbol: SampledSymbol,
    pub m_b: CDMatrix,
    pub bundle: GaborMatrixBundle,
    pub report: InvertWeylReport,
}

/// Entries of `M(b)` at or below this magnitude are dropped before the
/// symbol is rebuilt.
pub const TRUNCATION: f64 = 1e-12;
/// Interior fraction for operator identities.
pub const INTERIOR: f64 = 0.75;

pub fn invert_weyl(a: &SampledSymbol, frame: &GaborSystem, p: f64) -> Result<WeylInverse> {
    check_exponent(p)?;
    let bundle = gabor_matrix(a, frame)?;
    let n = bundle.a.shape().0;
    let cond = linalg::condition_number(bundle.a.entries())?;
    let b = linalg::inverse(bundle.a.entries()).map_err(|_| CdError::Singular { condition: cond })?;
    if !cond.is_finite() || cond > 1e14 {
        return Err(CdError::Singular { condition: cond });
    }
    let mut mb = &b + bundle.p.entries() - linalg::identity(n);
    let mut truncated = 0;
    mb.iter_mut().for_each(|z| {
        if z.norm() <= TRUNCATION && *z != C0 {
            *z = C0;
            truncated += 1;
        }
    });
    let m_b = bundle.m.with_entries(mb)?;
    let b_inv = bundle.a.with_entries(b)?;
    let lower_bound_p = if p == 2.0 {
        Some(1.0 / linalg::sigma_max_iter(b_inv.entries(), 1e-12, 2000))
    } else {
        b_inv.operator_norm_exact(p)?.map(|x| 1.0 / x)
    };
    let op_b = bundle.operator_of(&m_b);
    let grid = *frame.grid();
    let symbol = operator_to_symbol(&grid, &op_b)?;

    let ka = weyl_operator(a)?;
    let kb = weyl_operator(&symbol)?;
    let comp = linalg::cgemm(&ka, &kb);
    let mut roundtrip = 0.0f64;
    for k in 0..5 {
        let f = SampledFunction::hermite(grid, k);
        let v = &comp * CVec::from_column_slice(f.samples());
        let r = SampledFunction::new(grid, v.iter().copied().collect())?.sub(&f)?;
        roundtrip = roundtrip.max(r.norm() / f.norm());
    }
    let prod = linalg::cgemm(m_b.entries(), bundle.m.entries()) - bundle.p.entries();
    let inner = frame.interior_indices(INTERIOR);
    let product_residual = inner
        .iter()
        .flat_map(|&i| inner.iter().map(move |&j| (i, j)))
        .map(|(i, j)| prod[(i, j)].norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(WeylInverse {
        symbol,
        m_b,
        bundle,
        report: InvertWeylReport {
            condition: cond,
            lower_bound_p,
            roundtrip,
            product_residual,
            truncated_entries: truncated,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(1.0 / 8.0, 4.0).unwrap()
    }

    #[test]
    fn wigner_of_gaussian() {
        let g = SampledFunction::gaussian(grid());
        let w = wigner(&g, &g).unwrap();
        let sg = *w.symbol_grid();
        let mut err = 0.0f64;
        for i in 0..sg.nx {
            for m in 0..sg.nxi {
                let (x, xi) = (sg.x(i), sg.xi(m));
                let want = 2.0 * (-2.0 * std::f64::consts::PI * (x * x + xi * xi)).exp();
                err = err.max((w.get(i, m) - want).norm());
            }
        }
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn identity_symbol_and_pairing() {
        let gr = grid();
        let one = SampledSymbol::constant(gr, Complex64::new(1.0, 0.0));
        let f = SampledFunction::hermite(gr, 2);
        let out = weyl_apply(&one, &f).unwrap();
        assert!(out.sub(&f).unwrap().norm() < 1e-12);
        let a = SampledSymbol::from_real_fn(gr, |x, xi| (-(x * x) - 0.5 * xi * xi).exp() + 0.1 * x);
        let h = SampledFunction::from_fn(gr, |t| Complex64::new((-t * t).exp(), 0.3 * t * (-t * t).exp()));
        let lhs = weyl_apply(&a, &f).unwrap().inner(&h).unwrap();
        let rhs = symbol_pairing(&a, &wigner(&h, &f).unwrap()).unwrap();
        assert!((lhs - rhs).norm() < 1e-12, "{lhs} {rhs}");
        let k = weyl_operator(&a).unwrap();
        let v = &k * CVec::from_column_slice(f.samples());
        let direct = weyl_apply(&a, &f).unwrap();
        assert!(v.iter().zip(direct.samples()).all(|(x, y)| (x - y).norm() < 1e-12));
        let back = operator_to_symbol(&gr, &k).unwrap();
        let k2 = weyl_operator(&back).unwrap();
        assert!(linalg::frobenius(&(k2 - &k)) < 1e-10);
    }

    #[test]
    fn kn_multiplier_sign() {
        let gr = grid();
        let a = SampledSymbol::from_fn(gr, |x, xi| Complex64::new((-(x - 0.3).powi(2) - (xi + 0.2).powi(2)).exp(), 0.2 * x * (-x * x - xi * xi).exp()));
        let f = SampledFunction::hermite(gr, 1);
        let direct = kn_apply(&a, &f).unwrap();
        let via = weyl_apply(&kn_to_weyl(&a).unwrap(), &f).unwrap();
        let e = via.sub(&direct).unwrap().norm() / direct.norm();
        assert!(e < 1e-8, "{e}");
        let rt = weyl_to_kn(&kn_to_weyl(&a).unwrap()).unwrap();
        assert!(rt.interior_max_diff(&a, 1.0).unwrap() < 1e-12);
    }
}

//! Envelopes on uniform grids of R^D, Wiener amalgam quasi-norms and the
//! localized aggregate used to choose the partition scale.

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{CdError, Result};
use crate::pointset::PointSet;
use crate::sequences::{check_exponent, pow_abs, Seq};

const BALL_TOL: f64 = 1e-12;

/// Nonnegative function on `{h k : |h k| <= R}`, zero outside.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    dim: usize,
    step: f64,
    radius: f64,
    half: i64,
    values: Vec<f64>,
}

/// Result of sampling an envelope on a point set.
#[derive(Debug, Clone)]
pub struct Sampled {
    pub seq: Seq,
    /// Number of points that fell outside the grid coverage and were set to 0.
    pub outside: usize,
}

impl Sampled {
    pub fn out_of_coverage(&self) -> bool {
        self.outside > 0
    }
}

impl Envelope {
    pub fn zeros(dim: usize, step: f64, radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(CdError::param("dimension must be positive"));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(CdError::param(format!("grid step must be positive, got {step}")));
        }
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(CdError::param(format!("radius must be nonnegative, got {radius}")));
        }
        let half = (radius / step + 1e-9).floor() as i64;
        let side = (2 * half + 1) as usize;
        let len = side
            .checked_pow(dim as u32)
            .filter(|&n| n <= 200_000_000)
            .ok_or_else(|| CdError::param("envelope grid too large"))?;
        Ok(Self {
            dim,
            step,
            radius,
            half,
            values: vec![0.0; len],
        })
    }

    pub fn from_fn(dim: usize, step: f64, radius: f64, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut env = Self::zeros(dim, step, radius)?;
        let mut x = vec![0.0; dim];
        for idx in 0..env.values.len() {
            let k = env.unflatten(idx);
            if !env.in_ball(&k) {
                continue;
            }
            for (xi, ki) in x.iter_mut().zip(&k) {
                *xi = *ki as f64 * step;
            }
            let v = f(&x);
            if !(v >= 0.0) {
                return Err(CdError::param(format!("envelope value {v} is not nonnegative")));
            }
            env.values[idx] = v;
        }
        Ok(env)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Largest `|k_i|` stored along each axis.
    pub fn half_width(&self) -> i64 {
        self.half
    }

    fn side(&self) -> i64 {
        2 * self.half + 1
    }

    fn in_ball(&self, k: &[i64]) -> bool {
        let n2: f64 = k.iter().map(|&ki| (ki as f64 * self.step).powi(2)).sum();
        n2.sqrt() <= self.radius + 1e-9 * self.step
    }

    fn flatten(&self, k: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for &ki in k {
            if ki.abs() > self.half {
                return None;
            }
            idx = idx * self.side() as usize + (ki + self.half) as usize;
        }
        Some(idx)
    }

    fn unflatten(&self, mut idx: usize) -> Vec<i64> {
        let side = self.side() as usize;
        let mut k = vec![0i64; self.dim];
        for ki in k.iter_mut().rev() {
            *ki = (idx % side) as i64 - self.half;
            idx /= side;
        }
        k
    }

    /// Value at integer node `k`, zero outside the stored section.
    pub fn get(&self, k: &[i64]) -> f64 {
        self.flatten(k).map_or(0.0, |i| self.values[i])
    }

    /// Sets a node inside the section. Nodes outside the ball are rejected.
    pub fn set(&mut self, k: &[i64], v: f64) -> Result<()> {
        if !(v >= 0.0) {
            return Err(CdError::param(format!("envelope value {v} is not nonnegative")));
        }
        match self.flatten(k) {
            Some(i) if self.in_ball(k) => {
                self.values[i] = v;
                Ok(())
            }
            _ => Err(CdError::param(format!("node {k:?} outside envelope section"))),
        }
    }

    /// Raises node `k` to at least `v`.
    pub(crate) fn raise(&mut self, k: &[i64], v: f64) -> bool {
        match self.flatten(k) {
            Some(i) if self.in_ball(k) => {
                if v > self.values[i] {
                    self.values[i] = v;
                }
                true
            }
            _ => false,
        }
    }

    /// Nearest grid node to `x`.
    pub fn nearest_node(&self, x: &[f64]) -> Vec<i64> {
        x.iter().map(|&xi| (xi / self.step).round() as i64).collect()
    }

    /// Nearest-node evaluation; `None` outside coverage.
    pub fn value_at(&self, x: &[f64]) -> Option<f64> {
        let k = self.nearest_node(x);
        let n2: f64 = x.iter().map(|v| v * v).sum();
        if n2.sqrt() > self.radius + 0.5 * self.step * (self.dim as f64).sqrt() + 1e-12 {
            return None;
        }
        Some(self.get(&k))
    }

    /// Iterates over nonzero nodes as `(k, value)`.
    pub fn nonzero(&self) -> impl Iterator<Item = (Vec<i64>, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (self.unflatten(i), v))
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &v| m.max(v))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    fn ball_offsets(&self, r: f64) -> Vec<Vec<i64>> {
        let m = (r / self.step + 1e-9).floor() as i64;
        let mut out = Vec::new();
        let mut k = vec![-m; self.dim];
        loop {
            let n2: f64 = k.iter().map(|&ki| (ki as f64 * self.step).powi(2)).sum();
            if n2.sqrt() <= r + BALL_TOL {
                out.push(k.clone());
            }
            let mut ax = self.dim;
            loop {
                if ax == 0 {
                    return out;
                }
                ax -= 1;
                if k[ax] < m {
                    k[ax] += 1;
                    break;
                }
                k[ax] = -m;
            }
        }
    }

    /// Discrete `W(C_b, L^{p0})` quasi-norm with `K` the closed unit ball.
    pub fn amalgam_quasinorm(&self, p0: f64) -> Result<f64> {
        check_exponent(p0)?;
        if self.is_zero() {
            return Ok(0.0);
        }
        if p0.is_infinite() {
            return Ok(self.max_value());
        }
        let offsets = self.ball_offsets(1.0);
        let reach = (1.0 / self.step + 1e-9).floor() as i64;
        let outer = self.half + reach;
        let side = (2 * outer + 1) as usize;
        let total = side.pow(self.dim as u32);
        let cell = self.step.powi(self.dim as i32);
        let support: Vec<Vec<i64>> = self.nonzero().map(|(k, _)| k).collect();
        let sum: f64 = (0..total)
            .into_par_iter()
            .map(|mut idx| {
                let mut x = vec![0i64; self.dim];
                for xi in x.iter_mut().rev() {
                    *xi = (idx % side) as i64 - outer;
                    idx /= side;
                }
                let mut best = 0.0f64;
                let mut y = vec![0i64; self.dim];
                if offsets.len() <= support.len() {
                    for o in &offsets {
                        for ((yi, xi), oi) in y.iter_mut().zip(&x).zip(o) {
                            *yi = xi + oi;
                        }
                        best = best.max(self.get(&y));
                    }
                } else {
                    for k in &support {
                        let d2: f64 = k
                            .iter()
                            .zip(&x)
                            .map(|(a, b)| ((a - b) as f64 * self.step).powi(2))
                            .sum();
                        if d2.sqrt() <= 1.0 + BALL_TOL {
                            best = best.max(self.get(k));
                        }
                    }
                }
                pow_abs(best, p0)
            })
            .sum();
        Ok(pow_abs(sum * cell, 1.0 / p0))
    }

    /// Nearest-node samples of the envelope on a point set.
    pub fn sample_on_pointset(&self, s: &Arc<PointSet>) -> Result<Sampled> {
        if s.dim() != self.dim {
            return Err(CdError::DimensionMismatch(s.dim(), self.dim));
        }
        let mut outside = 0;
        let values = s
            .iter()
            .map(|x| match self.value_at(x) {
                Some(v) => Complex64::new(v, 0.0),
                None => {
                    outside += 1;
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        Ok(Sampled {
            seq: Seq::new(s.clone(), values)?,
            outside,
        })
    }

    /// Sup of the envelope over grid nodes in each closed unit box `t + [0,1]^D`.
    pub fn box_sups(&self) -> BoxSups {
        let lo = (-(self.half as f64) * self.step).floor() as i64 - 1;
        let hi = ((self.half as f64) * self.step).ceil() as i64;
        let side = (hi - lo + 1) as usize;
        let mut sups = vec![0.0f64; side.pow(self.dim as u32)];
        for (k, v) in self.nonzero() {
            // a node lies in every box whose closed cell contains it
            let ranges: Vec<(i64, i64)> = k
                .iter()
                .map(|&ki| {
                    let x = ki as f64 * self.step;
                    let t_hi = (x + 1e-12).floor() as i64;
                    let t_lo = (x - 1.0 - 1e-12).ceil() as i64;
                    (t_lo.max(lo), t_hi.min(hi))
                })
                .collect();
            let mut t: Vec<i64> = ranges.iter().map(|r| r.0).collect();
            'odo: loop {
                let mut idx = 0usize;
                for ti in &t {
                    idx = idx * side + (ti - lo) as usize;
                }
                if v > sups[idx] {
                    sups[idx] = v;
                }
                let mut ax = self.dim;
                loop {
                    if ax == 0 {
                        break 'odo;
                    }
                    ax -= 1;
                    if t[ax] < ranges[ax].1 {
                        t[ax] += 1;
                        break;
                    }
                    t[ax] = ranges[ax].0;
                }
            }
        }
        BoxSups {
            dim: self.dim,
            lo,
            side,
            sups,
        }
    }

    /// `Σ_{t : |εt − s|_∞ <= 5} sup_{t+[0,1]^D} H^q`.
    pub fn delta_envelope(&self, eps: f64, q: f64, s: &[i64]) -> Result<f64> {
        check_eps(eps)?;
        check_exponent(q)?;
        if s.len() != self.dim {
            return Err(CdError::DimensionMismatch(s.len(), self.dim));
        }
        Ok(self.box_sups().delta(eps, q, s))
    }

    /// `Σ_{s ∈ Z^D, |s| > 6√D} Δ^{ε,q}(s)`.
    pub fn tail_sum(&self, eps: f64, q: f64) -> Result<f64> {
        check_eps(eps)?;
        check_exponent(q)?;
        Ok(self.box_sups().tail_sum(eps, q))
    }

    fn check_compatible(&self, other: &Envelope) -> Result<()> {
        if self.dim != other.dim {
            return Err(CdError::DimensionMismatch(self.dim, other.dim));
        }
        if (self.step - other.step).abs() > 1e-12 * self.step {
            return Err(CdError::GridMismatch(format!("steps {} and {}", self.step, other.step)));
        }
        Ok(())
    }

    fn combine(&self, other: &Envelope, f: impl Fn(f64, f64) -> f64) -> Result<Envelope> {
        self.check_compatible(other)?;
        let radius = self.radius.max(other.radius);
        let mut out = Envelope::zeros(self.dim, self.step, radius)?;
        for idx in 0..out.values.len() {
            let k = out.unflatten(idx);
            out.values[idx] = f(self.get(&k), other.get(&k));
        }
        Ok(out)
    }

    pub fn sum(&self, other: &Envelope) -> Result<Envelope> {
        self.combine(other, |a, b| a + b)
    }

    pub fn max(&self, other: &Envelope) -> Result<Envelope> {
        self.combine(other, f64::max)
    }

    pub fn scale(&self, c: f64) -> Result<Envelope> {
        if !(c >= 0.0) {
            return Err(CdError::param("envelopes scale by nonnegative factors only"));
        }
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        Ok(out)
    }

    /// Pointwise `H^r`.
    pub fn power(&self, r: f64) -> Result<Envelope> {
        check_exponent(r)?;
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = pow_abs(*v, r));
        Ok(out)
    }

    /// Reflection `H(-x)`.
    pub fn reflected(&self) -> Envelope {
        let mut out = self.clone();
        for idx in 0..out.values.len() {
            let k: Vec<i64> = self.unflatten(idx).iter().map(|x| -x).collect();
            out.values[idx] = self.get(&k);
        }
        out
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut w = std::io::BufWriter::new(w);
        writeln!(w, "{} {} {}", self.dim, self.step, self.radius)?;
        for (k, v) in self.nonzero() {
            for ki in &k {
                write!(w, "{ki} ")?;
            }
            writeln!(w, "{v:e}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(r: impl BufRead) -> Result<Envelope> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| CdError::Parse("empty envelope file".into()))??;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 3 {
            return Err(CdError::Parse(format!("bad envelope header '{header}'")));
        }
        let dim: usize = h[0].parse().map_err(|_| CdError::Parse(format!("bad D '{}'", h[0])))?;
        let step: f64 = h[1].parse().map_err(|_| CdError::Parse(format!("bad h '{}'", h[1])))?;
        let radius: f64 = h[2].parse().map_err(|_| CdError::Parse(format!("bad R '{}'", h[2])))?;
        let mut env = Envelope::zeros(dim, step, radius)?;
        for (n, line) in lines.enumerate() {
            let line = line?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.is_empty() {
                continue;
            }
            if f.len() != dim + 1 {
                return Err(CdError::Parse(format!("line {}: expected {} fields", n + 2, dim + 1)));
            }
            let k: Vec<i64> = f[..dim]
                .iter()
                .map(|s| s.parse().map_err(|_| CdError::Parse(format!("line {}: bad index", n + 2))))
                .collect::<Result<_>>()?;
            let v: f64 = f[dim].parse().map_err(|_| CdError::Parse(format!("line {}: bad value", n + 2)))?;
            env.set(&k, v)?;
        }
        Ok(env)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Envelope> {
        Envelope::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps <= 1.0 {
        Ok(())
    } else {
        Err(CdError::param(format!("eps must lie in (0, 1], got {eps}")))
    }
}

/// Unit-box suprema of an envelope, indexed by the lower corner `t ∈ Z^D`.
#[derive(Debug, Clone)]
pub struct BoxSups {
    dim: usize,
    lo: i64,
    side: usize,
    sups: Vec<f64>,
}

impl BoxSups {
    fn nonzero(&self) -> impl Iterator<Item = (Vec<i64>, f64)> + '_ {
        self.sups.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(mut i, &v)| {
            let mut t = vec![0i64; self.dim];
            for ti in t.iter_mut().rev() {
                *ti = (i % self.side) as i64 + self.lo;
                i /= self.side;
            }
            (t, v)
        })
    }

    pub fn delta(&self, eps: f64, q: f64, s: &[i64]) -> f64 {
        self.nonzero()
            .filter(|(t, _)| {
                t.iter()
                    .zip(s)
                    .all(|(&ti, &si)| (eps * ti as f64 - si as f64).abs() <= 5.0 + 1e-12)
            })
            .map(|(_, v)| pow_abs(v, q))
            .sum()
    }

    pub fn tail_sum(&self, eps: f64, q: f64) -> f64 {
        let cut = 6.0 * (self.dim as f64).sqrt();
        let c = cut.floor() as i64;
        // each box contributes once for every far s whose window covers it
        self.nonzero()
            .map(|(t, v)| {
                let ranges: Vec<(i64, i64)> = t
                    .iter()
                    .map(|&ti| {
                        let x = eps * ti as f64;
                        ((x - 5.0 - 1e-12).ceil() as i64, (x + 5.0 + 1e-12).floor() as i64)
                    })
                    .collect();
                let total: i64 = ranges.iter().map(|(a, b)| (b - a + 1).max(0)).product();
                let near = count_near(&ranges, c, cut);
                pow_abs(v, q) * (total - near) as f64
            })
            .sum()
    }
}

// integer points in the box `ranges` with Euclidean norm <= cut
fn count_near(ranges: &[(i64, i64)], c: i64, cut: f64) -> i64 {
    let clipped: Vec<(i64, i64)> = ranges.iter().map(|&(a, b)| (a.max(-c), b.min(c))).collect();
    if clipped.iter().any(|(a, b)| a > b) {
        return 0;
    }
    let mut s: Vec<i64> = clipped.iter().map(|r| r.0).collect();
    let mut n = 0;
    loop {
        let n2: i64 = s.iter().map(|x| x * x).sum();
        if (n2 as f64).sqrt() <= cut + 1e-12 {
            n += 1;
        }
        let mut ax = s.len();
        loop {
            if ax == 0 {
                return n;
            }
            ax -= 1;
            if s[ax] < clipped[ax].1 {
                s[ax] += 1;
                break;
            }
            s[ax] = clipped[ax].0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expo(h: f64, r: f64) -> Envelope {
        Envelope::from_fn(1, h, r, |x| (-x[0].abs()).exp()).unwrap()
    }

    #[test]
    fn amalgam_examples() {
        let z = Envelope::zeros(1, 0.1, 5.0).unwrap();
        assert_eq!(z.amalgam_quasinorm(0.5).unwrap(), 0.0);

        let h = 1.0 / 64.0;
        let ind = Envelope::from_fn(1, h, 4.0, |x| if x[0].abs() <= 1.0 { 1.0 } else { 0.0 }).unwrap();
        assert!((ind.amalgam_quasinorm(1.0).unwrap() - 4.0).abs() <= 2.0 * h);

        // sup of e^{-|y|} over [x-1, x+1] is 1 on |x| <= 1, e^{1-|x|} beyond
        let e = expo(1.0 / 32.0, 30.0);
        let exact = 2.0 + 2.0;
        assert!((e.amalgam_quasinorm(1.0).unwrap() - exact).abs() < 0.1);
        let fine = expo(1.0 / 320.0, 30.0);
        assert!((fine.amalgam_quasinorm(1.0).unwrap() - exact).abs() < 0.01);
    }

    #[test]
    fn sampling() {
        let e = expo(0.125, 10.0);
        let pts: Vec<Vec<f64>> = (-3..=3).map(|k| vec![k as f64]).collect();
        let s = Arc::new(PointSet::from_points(1, &pts).unwrap());
        let out = e.sample_on_pointset(&s).unwrap();
        assert!(!out.out_of_coverage());
        for (x, v) in s.iter().zip(out.seq.values()) {
            assert!((v.re - (-x[0].abs()).exp()).abs() < 1e-14);
        }
        let far = Arc::new(PointSet::from_points(1, &[vec![20.0]]).unwrap());
        let out = e.sample_on_pointset(&far).unwrap();
        assert_eq!(out.outside, 1);
        assert_eq!(out.seq.values()[0].re, 0.0);
    }

    #[test]
    fn delta_examples() {
        let z = Envelope::zeros(1, 0.25, 5.0).unwrap();
        assert_eq!(z.delta_envelope(0.5, 0.5, &[0]).unwrap(), 0.0);

        let mut spike = Envelope::zeros(1, 0.25, 5.0).unwrap();
        spike.set(&[0], 1.0).unwrap();
        // the node 0 lies in the boxes [0,1] and [-1,0]
        assert_eq!(spike.delta_envelope(1.0, 1.0, &[0]).unwrap(), 2.0);

        let e = expo(1.0 / 16.0, 12.0);
        let got = e.delta_envelope(0.5, 0.5, &[0]).unwrap();
        let mut want = 0.0;
        for t in -10i64..=10 {
            if (0.5 * t as f64).abs() <= 5.0 {
                let tf = t as f64;
                let sup = if tf <= 0.0 && tf + 1.0 >= 0.0 { 1.0 } else { (-tf.abs().min((tf + 1.0).abs())).exp() };
                want += sup.sqrt();
            }
        }
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        assert!(e.delta_envelope(0.0, 0.5, &[0]).is_err());
    }

    #[test]
    fn tail_sum_behaviour() {
        let e = expo(1.0 / 16.0, 40.0);
        let mut last = f64::INFINITY;
        for eps in [1.0, 0.5, 0.25, 0.125] {
            let t = e.tail_sum(eps, 0.5).unwrap();
            assert!(t <= last + 1e-12);
            last = t;
        }
        let bump = Envelope::from_fn(1, 0.125, 10.0, |x| if x[0].abs() <= 2.0 { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(bump.tail_sum(0.25, 0.5).unwrap(), 0.0);
        let direct: f64 = (-60i64..=60)
            .filter(|s| s.abs() > 6)
            .map(|s| e.delta_envelope(0.5, 0.5, &[s]).unwrap())
            .sum();
        assert!((e.tail_sum(0.5, 0.5).unwrap() - direct).abs() < 1e-9);
    }

    #[test]
    fn csv_round_trip_and_algebra() {
        let e = Envelope::from_fn(2, 0.5, 2.0, |x| 1.0 / (1.0 + x[0] * x[0] + 2.0 * x[1] * x[1])).unwrap();
        let mut buf = Vec::new();
        e.write_csv(&mut buf).unwrap();
        let back = Envelope::read_csv(&buf[..]).unwrap();
        assert_eq!(back, e);
        let s = e.sum(&e).unwrap();
        assert!((s.get(&[1, 1]) - 2.0 * e.get(&[1, 1])).abs() < 1e-15);
        let m = e.max(&e.scale(2.0).unwrap()).unwrap();
        assert_eq!(m.get(&[0, 1]), 2.0 * e.get(&[0, 1]));
        let p = e.power(2.0).unwrap();
        assert!((p.get(&[2, 0]) - e.get(&[2, 0]).powi(2)).abs() < 1e-15);
        assert!(e.scale(-1.0).is_err());
    }
}

//! Finite sections of relatively separated point sets and rectangular lattices.
//!
//! A [`PointSet`] stores its points flat (`dim` coordinates per point) in a
//! fixed order so that matrices indexed by it are deterministic.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{CdError, Result};

const TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
    truncation_radius: f64,
    /// Finest generator step when the set came from a lattice.
    step: Option<f64>,
}

/// Two-sided bracket on `rel(S)`. `lower == upper` means the value is exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelSep {
    pub lower: usize,
    pub upper: usize,
}

impl RelSep {
    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectangularLattice {
    pub steps: Vec<f64>,
    pub radius: f64,
}

impl RectangularLattice {
    pub fn new(steps: Vec<f64>, radius: f64) -> Result<Self> {
        if steps.is_empty() {
            return Err(CdError::param("lattice needs at least one axis"));
        }
        if steps.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(CdError::param("lattice steps must be positive"));
        }
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(CdError::param("lattice radius must be nonnegative"));
        }
        Ok(Self { steps, radius })
    }

    /// Integer lattice `Z^dim` truncated to the ball of `radius`.
    pub fn integer(dim: usize, radius: f64) -> Result<Self> {
        Self::new(vec![1.0; dim], radius)
    }

    pub fn dim(&self) -> usize {
        self.steps.len()
    }
}

/// All lattice points of Euclidean norm at most `radius`, lexicographic in the
/// integer coordinates.
pub fn enumerate(lattice: &RectangularLattice) -> Result<PointSet> {
    let lat = RectangularLattice::new(lattice.steps.clone(), lattice.radius)?;
    let dim = lat.dim();
    let bounds: Vec<i64> = lat
        .steps
        .iter()
        .map(|s| ((lat.radius + TOL) / s).floor() as i64)
        .collect();
    let mut coords = Vec::new();
    let mut idx: Vec<i64> = bounds.iter().map(|b| -b).collect();
    'outer: loop {
        let pt: Vec<f64> = idx
            .iter()
            .zip(&lat.steps)
            .map(|(k, s)| *k as f64 * s)
            .collect();
        let norm = pt.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= lat.radius + TOL {
            coords.extend_from_slice(&pt);
        }
        // odometer, last axis fastest
        for axis in (0..dim).rev() {
            if idx[axis] < bounds[axis] {
                idx[axis] += 1;
                continue 'outer;
            }
            idx[axis] = -bounds[axis];
        }
        break;
    }
    let step = lat.steps.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(PointSet {
        dim,
        coords,
        truncation_radius: lat.radius,
        step: Some(step),
    })
}

impl PointSet {
    /// Builds a point set from explicit points. Points must be pairwise distinct.
    pub fn from_points(dim: usize, points: &[Vec<f64>]) -> Result<Self> {
        if dim == 0 {
            return Err(CdError::param("dimension must be positive"));
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        let mut radius: f64 = 0.0;
        for p in points {
            if p.len() != dim {
                return Err(CdError::DimensionMismatch(dim, p.len()));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(CdError::param("non-finite coordinate"));
            }
            radius = radius.max(p.iter().map(|x| x * x).sum::<f64>().sqrt());
            coords.extend_from_slice(p);
        }
        let set = PointSet {
            dim,
            coords,
            truncation_radius: radius,
            step: None,
        };
        set.check_distinct()?;
        Ok(set)
    }

    /// Like [`PointSet::from_points`] but records a grid step hint, used as the
    /// default difference-grid step of envelopes.
    pub fn with_step(mut self, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(CdError::param("step must be positive"));
        }
        self.step = Some(step);
        Ok(self)
    }

    pub fn with_truncation_radius(mut self, radius: f64) -> Self {
        self.truncation_radius = self.truncation_radius.max(radius);
        self
    }

    fn check_distinct(&self) -> Result<()> {
        let mut seen = HashMap::new();
        for i in 0..self.len() {
            let key: Vec<i64> = self.point(i).iter().map(|x| (x * 1e9).round() as i64).collect();
            if let Some(j) = seen.insert(key, i) {
                return Err(CdError::param(format!("points {j} and {i} coincide")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn truncation_radius(&self) -> f64 {
        self.truncation_radius
    }

    pub fn step(&self) -> Option<f64> {
        self.step
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn norm(&self, i: usize) -> f64 {
        self.point(i).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.dim {
            return Err(CdError::DimensionMismatch(self.dim, shift.len()));
        }
        let coords = self
            .coords
            .chunks_exact(self.dim)
            .flat_map(|p| p.iter().zip(shift).map(|(a, b)| a + b).collect::<Vec<_>>())
            .collect::<Vec<_>>();
        let mut out = PointSet {
            dim: self.dim,
            coords,
            truncation_radius: 0.0,
            step: self.step,
        };
        out.truncation_radius = (0..out.len()).map(|i| out.norm(i)).fold(0.0, f64::max);
        Ok(out)
    }

    /// Subset of points satisfying `keep`, order preserved.
    pub fn filter(&self, mut keep: impl FnMut(&[f64]) -> bool) -> (Self, Vec<usize>) {
        let mut coords = Vec::new();
        let mut kept = Vec::new();
        for (i, p) in self.iter().enumerate() {
            if keep(p) {
                coords.extend_from_slice(p);
                kept.push(i);
            }
        }
        (
            PointSet {
                dim: self.dim,
                coords,
                truncation_radius: self.truncation_radius,
                step: self.step,
            },
            kept,
        )
    }

    /// Integer coordinates, if every coordinate is an integer.
    pub fn integer_coords(&self) -> Option<Vec<Vec<i64>>> {
        self.iter()
            .map(|p| {
                p.iter()
                    .map(|x| {
                        let r = x.round();
                        ((x - r).abs() < 1e-9).then_some(r as i64)
                    })
                    .collect::<Option<Vec<_>>>()
            })
            .collect()
    }

    pub fn relsep(&self) -> f64 {
        self.relsep_bracket().lower as f64
    }

    /// `rel(S) = sup_x #(S ∩ B_1(x))` with the open unit ball.
    ///
    /// Exact for `dim <= 2`. In higher dimensions the lower end comes from
    /// centers at points and pair midpoints, the upper end from a covering grid
    /// of centers with enlarged balls.
    pub fn relsep_bracket(&self) -> RelSep {
        if self.is_empty() {
            return RelSep { lower: 0, upper: 0 };
        }
        match self.dim {
            1 => {
                let mut xs: Vec<f64> = self.coords.clone();
                xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let mut best = 0;
                let mut j = 0;
                for i in 0..xs.len() {
                    if j < i {
                        j = i;
                    }
                    while j + 1 < xs.len() && xs[j + 1] - xs[i] < 2.0 - TOL {
                        j += 1;
                    }
                    best = best.max(j - i + 1);
                }
                RelSep { lower: best, upper: best }
            }
            2 => {
                let v = self.relsep_planar();
                RelSep { lower: v, upper: v }
            }
            _ => self.relsep_grid_bracket(),
        }
    }

    fn buckets(&self, cell: f64) -> HashMap<Vec<i64>, Vec<usize>> {
        let mut map: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (i, p) in self.iter().enumerate() {
            let key = p.iter().map(|x| (x / cell).floor() as i64).collect();
            map.entry(key).or_default().push(i);
        }
        map
    }

    fn count_within(&self, buckets: &HashMap<Vec<i64>, Vec<usize>>, cell: f64, c: &[f64], r: f64) -> usize {
        let base: Vec<i64> = c.iter().map(|x| (x / cell).floor() as i64).collect();
        let reach = (r / cell).ceil() as i64;
        let mut count = 0;
        let mut offs = vec![-reach; self.dim];
        loop {
            let key: Vec<i64> = base.iter().zip(&offs).map(|(b, o)| b + o).collect();
            if let Some(ids) = buckets.get(&key) {
                for &i in ids {
                    let d2: f64 = self.point(i).iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                    if d2 <= r * r {
                        count += 1;
                    }
                }
            }
            let mut axis = self.dim;
            loop {
                if axis == 0 {
                    return count;
                }
                axis -= 1;
                if offs[axis] < reach {
                    offs[axis] += 1;
                    break;
                }
                offs[axis] = -reach;
            }
        }
    }

    fn relsep_planar(&self) -> usize {
        // closed disks of radius just below 1: optimal disks have two points on
        // the boundary or are centered at a point
        let r = 1.0 - 1e-9;
        let cell = 2.0;
        let buckets = self.buckets(cell);
        let mut best = 0;
        for i in 0..self.len() {
            let c = self.point(i).to_vec();
            best = best.max(self.count_within(&buckets, cell, &c, r + TOL));
        }
        for i in 0..self.len() {
            let pi = self.point(i);
            let base: Vec<i64> = pi.iter().map(|x| (x / cell).floor() as i64).collect();
            for dx in -1..=1 {
                for dy in -1..=1 {
                    let key = vec![base[0] + dx, base[1] + dy];
                    let Some(ids) = buckets.get(&key) else { continue };
                    for &j in ids {
                        if j <= i {
                            continue;
                        }
                        let pj = self.point(j);
                        let (ux, uy) = (pj[0] - pi[0], pj[1] - pi[1]);
                        let d2 = ux * ux + uy * uy;
                        if d2 > 4.0 * r * r {
                            continue;
                        }
                        let d = d2.sqrt();
                        let h = (r * r - d2 / 4.0).max(0.0).sqrt();
                        let (mx, my) = (pi[0] + ux / 2.0, pi[1] + uy / 2.0);
                        let (nx, ny) = (-uy / d, ux / d);
                        for sgn in [-1.0, 1.0] {
                            let c = [mx + sgn * h * nx, my + sgn * h * ny];
                            best = best.max(self.count_within(&buckets, cell, &c, r + TOL));
                        }
                    }
                }
            }
        }
        best
    }

    fn relsep_grid_bracket(&self) -> RelSep {
        let cell = 2.0;
        let buckets = self.buckets(cell);
        let mut lower = 0;
        for i in 0..self.len() {
            let c = self.point(i).to_vec();
            lower = lower.max(self.count_within(&buckets, cell, &c, 1.0 - TOL));
            for j in (i + 1)..self.len() {
                let m: Vec<f64> = self.point(i).iter().zip(self.point(j)).map(|(a, b)| 0.5 * (a + b)).collect();
                lower = lower.max(self.count_within(&buckets, cell, &m, 1.0 - TOL));
            }
        }
        // every open unit ball sits inside a closed ball of radius 1 + covering
        // radius around the nearest grid node
        let g = 0.125;
        let cover = g * (self.dim as f64).sqrt() / 2.0;
        let mut mins = vec![f64::INFINITY; self.dim];
        let mut maxs = vec![f64::NEG_INFINITY; self.dim];
        for p in self.iter() {
            for a in 0..self.dim {
                mins[a] = mins[a].min(p[a]);
                maxs[a] = maxs[a].max(p[a]);
            }
        }
        let lo: Vec<i64> = mins.iter().map(|m| ((m - 1.0) / g).floor() as i64).collect();
        let hi: Vec<i64> = maxs.iter().map(|m| ((m + 1.0) / g).ceil() as i64).collect();
        let mut upper = lower;
        let mut idx = lo.clone();
        loop {
            let c: Vec<f64> = idx.iter().map(|k| *k as f64 * g).collect();
            upper = upper.max(self.count_within(&buckets, cell, &c, 1.0 + cover + TOL));
            let mut axis = self.dim;
            let done = loop {
                if axis == 0 {
                    break true;
                }
                axis -= 1;
                if idx[axis] < hi[axis] {
                    idx[axis] += 1;
                    break false;
                }
                idx[axis] = lo[axis];
            };
            if done {
                break;
            }
        }
        RelSep { lower, upper }
    }

    /// Plain text form: header `D R`, then one point per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.dim, self.truncation_radius);
        for p in self.iter() {
            let line: Vec<String> = p.iter().map(|x| format!("{x:?}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn write_text(&self, mut w: impl Write) -> Result<()> {
        w.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn read_text(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| CdError::Parse("missing header".into()))??;
        let mut it = header.split_whitespace();
        let dim: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| CdError::Parse("bad dimension in header".into()))?;
        let radius: f64 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| CdError::Parse("bad radius in header".into()))?;
        let mut pts = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let p: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| CdError::Parse(format!("{t}: {e}"))))
                .collect::<Result<_>>()?;
            pts.push(p);
        }
        Ok(PointSet::from_points(dim, &pts)?.with_truncation_radius(radius))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerate_examples() {
        let s = enumerate(&RectangularLattice::integer(1, 0.0).unwrap()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.point(0), &[0.0]);

        let s = enumerate(&RectangularLattice::integer(1, 2.5).unwrap()).unwrap();
        let xs: Vec<f64> = s.iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![-2.0, -1.0, 0.0, 1.0, 2.0]);

        let s = enumerate(&RectangularLattice::new(vec![0.5, 0.5], 0.6).unwrap()).unwrap();
        let pts: Vec<Vec<f64>> = s.iter().map(|p| p.to_vec()).collect();
        assert_eq!(
            pts,
            vec![vec![-0.5, 0.0], vec![0.0, -0.5], vec![0.0, 0.0], vec![0.0, 0.5], vec![0.5, 0.0]]
        );
    }

    #[test]
    fn enumerate_rejects_bad_parameters() {
        assert!(RectangularLattice::new(vec![0.0], 1.0).is_err());
        assert!(RectangularLattice::new(vec![1.0], -1.0).is_err());
        assert!(RectangularLattice::new(vec![], 1.0).is_err());
    }

    #[test]
    fn duplicate_points_rejected() {
        assert!(PointSet::from_points(1, &[vec![1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn text_round_trip() {
        let s = enumerate(&RectangularLattice::new(vec![0.5, 1.0], 2.0).unwrap()).unwrap();
        let back = PointSet::read_text(std::io::Cursor::new(s.to_text())).unwrap();
        assert_eq!(back.len(), s.len());
        assert_eq!(back.point(3), s.point(3));
        assert_eq!(back.truncation_radius(), 2.0);
    }

    #[test]
    fn relsep_grid_bracket_contains_exact_value() {
        // two neighbours always fit in an open unit ball
        let s = enumerate(&RectangularLattice::integer(3, 2.0).unwrap()).unwrap();
        let b = s.relsep_bracket();
        assert!(b.lower >= 2 && b.lower <= b.upper);
    }
}

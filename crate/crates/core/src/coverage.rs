//! Decaying coverage grid for area monitoring.
//!
//! Cells are 1 m² by default and masked to those whose centre lies inside the
//! fence. A cell within the visit radius of any robot is set to 1; otherwise
//! it loses `decay` per step down to 0. Step 1 leaves every cell at 0.
//!
//! Internally each cell stores the step of its last visit, and the grid keeps
//! a running total so that one step costs time proportional to the number of
//! visited cells rather than the grid size.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, Error};
use crate::geometry::{GeoFence, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoverageParams {
    pub cell_size: f64,
    /// Visit radius (m).
    pub radius: f64,
    /// Value lost per step by an unvisited cell.
    pub decay: f64,
}

impl Default for CoverageParams {
    fn default() -> Self {
        CoverageParams {
            cell_size: 1.0,
            radius: 5.0,
            decay: 0.001,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageGrid {
    params: CoverageParams,
    origin: Vec2,
    cols: usize,
    rows: usize,
    inside: Vec<bool>,
    cells: usize,
    /// Step of the last visit, 0 if never.
    stamp: Vec<u32>,
    step: u32,
    /// Steps until a visited cell reaches 0.
    lifetime: u32,
    /// Cells last visited at step `s`, indexed by `s % lifetime`.
    expiring: Vec<u32>,
    positive: u64,
    age_sum: u64,
}

impl CoverageGrid {
    pub fn new(fence: &GeoFence, params: CoverageParams) -> Result<Self, ConfigError> {
        if !(params.cell_size > 0.0 && params.radius >= 0.0 && params.decay > 0.0) {
            return Err(ConfigError::Invalid(format!("bad coverage parameters {params:?}")));
        }
        let (lo, hi) = fence.bounds();
        let cs = params.cell_size;
        let origin = Vec2::new((lo.x / cs).floor() * cs, (lo.y / cs).floor() * cs);
        let cols = ((hi.x - origin.x) / cs).ceil().max(1.0) as usize;
        let rows = ((hi.y - origin.y) / cs).ceil().max(1.0) as usize;
        let mut inside = vec![false; cols * rows];
        for r in 0..rows {
            for c in 0..cols {
                let centre = origin + Vec2::new((c as f64 + 0.5) * cs, (r as f64 + 0.5) * cs);
                inside[r * cols + c] = fence.contains(centre);
            }
        }
        let cells = inside.iter().filter(|&&b| b).count();
        if cells == 0 {
            return Err(ConfigError::Invalid("fence contains no grid cell".into()));
        }
        let lifetime = (1.0 / params.decay).ceil() as u32;
        Ok(CoverageGrid {
            params,
            origin,
            cols,
            rows,
            inside,
            cells,
            stamp: vec![0; cols * rows],
            step: 0,
            lifetime,
            expiring: vec![0; lifetime as usize],
            positive: 0,
            age_sum: 0,
        })
    }

    pub fn params(&self) -> &CoverageParams {
        &self.params
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of cells inside the fence.
    pub fn cell_count(&self) -> usize {
        self.cells
    }

    pub fn step_index(&self) -> u32 {
        self.step
    }

    pub fn is_inside(&self, col: usize, row: usize) -> bool {
        self.inside[row * self.cols + col]
    }

    pub fn cell_centre(&self, col: usize, row: usize) -> Vec2 {
        let cs = self.params.cell_size;
        self.origin + Vec2::new((col as f64 + 0.5) * cs, (row as f64 + 0.5) * cs)
    }

    /// Current value of a cell; `None` outside the fence.
    pub fn value(&self, col: usize, row: usize) -> Option<f64> {
        let i = row * self.cols + col;
        if !self.inside[i] {
            return None;
        }
        let s = self.stamp[i];
        if s == 0 {
            return Some(0.0);
        }
        let age = (self.step - s) as f64;
        Some((1.0 - age * self.params.decay).max(0.0))
    }

    /// Row-major values, south row first; NaN outside the fence.
    pub fn values(&self) -> Vec<f64> {
        (0..self.rows)
            .flat_map(|r| (0..self.cols).map(move |c| (c, r)))
            .map(|(c, r)| self.value(c, r).unwrap_or(f64::NAN))
            .collect()
    }

    /// Mean value over the cells inside the fence.
    pub fn mean_value(&self) -> f64 {
        let sum = self.positive as f64 - self.params.decay * self.age_sum as f64;
        sum / self.cells as f64
    }

    /// Fraction of inside cells with a non-zero value.
    pub fn covered_fraction(&self) -> f64 {
        self.positive as f64 / self.cells as f64
    }

    /// Advance one step with the robots at `positions`.
    pub fn step(&mut self, positions: &[Vec2]) {
        self.step += 1;
        let t = self.step;
        if t == 1 {
            return;
        }
        let life = self.lifetime;
        self.age_sum += self.positive;
        let slot = (t % life) as usize;
        let expired = self.expiring[slot] as u64;
        if expired > 0 && t >= life {
            self.positive -= expired;
            self.age_sum -= expired * life as u64;
            self.expiring[slot] = 0;
        }

        let cs = self.params.cell_size;
        let v = self.params.radius;
        let v2 = v * v;
        for p in positions {
            let c0 = ((p.x - v - self.origin.x) / cs - 0.5).ceil().max(0.0) as usize;
            let c1 = ((p.x + v - self.origin.x) / cs - 0.5).floor();
            let r0 = ((p.y - v - self.origin.y) / cs - 0.5).ceil().max(0.0) as usize;
            let r1 = ((p.y + v - self.origin.y) / cs - 0.5).floor();
            if c1 < 0.0 || r1 < 0.0 {
                continue;
            }
            let c1 = (c1 as usize).min(self.cols.saturating_sub(1));
            let r1 = (r1 as usize).min(self.rows.saturating_sub(1));
            for r in r0..=r1 {
                for c in c0..=c1 {
                    let i = r * self.cols + c;
                    if !self.inside[i] || self.stamp[i] == t {
                        continue;
                    }
                    if self.cell_centre(c, r).distance_sq(*p) > v2 {
                        continue;
                    }
                    let s = self.stamp[i];
                    if s != 0 && t - s < life {
                        self.age_sum -= (t - s) as u64;
                        self.expiring[(s % life) as usize] -= 1;
                    } else {
                        self.positive += 1;
                    }
                    self.stamp[i] = t;
                    self.expiring[slot] += 1;
                }
            }
        }
    }

    /// Dense text export.
    ///
    /// First line: `grid <origin_x> <origin_y> <cell_size> <cols> <rows>`, the
    /// origin being the south-west corner of cell (0, 0). Then one line per row
    /// from south to north, values separated by spaces, `NaN` for cells
    /// outside the fence.
    pub fn to_text(&self) -> String {
        grid_to_text(self.origin, self.params.cell_size, self.cols, self.rows, &self.values())
    }
}

/// Write a dense row-major grid in the coverage text format.
pub fn grid_to_text(origin: Vec2, cell: f64, cols: usize, rows: usize, values: &[f64]) -> String {
    assert_eq!(values.len(), cols * rows);
    let mut s = String::new();
    let _ = writeln!(s, "grid {} {} {} {} {}", origin.x, origin.y, cell, cols, rows);
    for r in 0..rows {
        let row: Vec<String> = values[r * cols..(r + 1) * cols]
            .iter()
            .map(|v| if v.is_nan() { "NaN".to_string() } else { format!("{v}") })
            .collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

/// A dense grid read back from the text format.
#[derive(Debug, Clone, PartialEq)]
pub struct GridData {
    pub origin: Vec2,
    pub cell_size: f64,
    pub cols: usize,
    pub rows: usize,
    pub values: Vec<f64>,
}

impl GridData {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines
            .next()
            .ok_or("empty grid file")?
            .split_whitespace()
            .collect();
        if header.len() != 6 || header[0] != "grid" {
            return Err("expected `grid <ox> <oy> <cell> <cols> <rows>` header".into());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| format!("bad number {s:?}"));
        let int = |s: &str| s.parse::<usize>().map_err(|_| format!("bad integer {s:?}"));
        let origin = Vec2::new(num(header[1])?, num(header[2])?);
        let cell_size = num(header[3])?;
        let (cols, rows) = (int(header[4])?, int(header[5])?);
        let mut values = Vec::with_capacity(cols * rows);
        for (r, line) in lines.enumerate() {
            let row: Vec<f64> = line.split_whitespace().map(num).collect::<Result<_, _>>()?;
            if row.len() != cols {
                return Err(format!("row {r} has {} values, expected {cols}", row.len()));
            }
            values.extend(row);
        }
        if values.len() != cols * rows {
            return Err(format!("expected {rows} rows"));
        }
        Ok(GridData {
            origin,
            cell_size,
            cols,
            rows,
            values,
        })
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        GridData::parse(&text).map_err(|msg| Error::Parse {
            path: path.to_path_buf(),
            msg,
        })
    }

    pub fn to_text(&self) -> String {
        grid_to_text(self.origin, self.cell_size, self.cols, self.rows, &self.values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(side: f64) -> GeoFence {
        GeoFence::rectangle(Vec2::ZERO, Vec2::new(side, side)).unwrap()
    }

    /// Dense oracle: the literal recursion, one cell at a time.
    struct Dense {
        vals: Vec<f64>,
        centres: Vec<Vec2>,
        t: u32,
    }

    impl Dense {
        fn new(g: &CoverageGrid) -> Self {
            let mut centres = Vec::new();
            for r in 0..g.rows() {
                for c in 0..g.cols() {
                    if g.is_inside(c, r) {
                        centres.push(g.cell_centre(c, r));
                    }
                }
            }
            Dense { vals: vec![0.0; centres.len()], centres, t: 0 }
        }
        fn step(&mut self, pos: &[Vec2]) {
            self.t += 1;
            for (v, c) in self.vals.iter_mut().zip(&self.centres) {
                let near = pos.iter().map(|p| p.distance(*c)).fold(f64::INFINITY, f64::min);
                *v = if self.t == 1 {
                    0.0
                } else if near > 5.0 {
                    (*v - 0.001).max(0.0)
                } else {
                    1.0
                };
            }
        }
        fn mean(&self) -> f64 {
            self.vals.iter().sum::<f64>() / self.vals.len() as f64
        }
    }

    #[test]
    fn single_visit_decays_to_zero_in_1000_steps() {
        let mut g = CoverageGrid::new(&square(20.0), CoverageParams::default()).unwrap();
        g.step(&[]);
        g.step(&[Vec2::new(10.5, 10.5)]);
        assert_eq!(g.value(10, 10), Some(1.0));
        for k in 1..=1000u32 {
            g.step(&[]);
            let v = g.value(10, 10).unwrap();
            if k < 1000 {
                assert!(v > 0.0);
                assert!((v - (1.0 - 0.001 * k as f64)).abs() < 1e-12);
            } else {
                assert_eq!(v, 0.0);
            }
        }
        assert_eq!(g.mean_value(), 0.0);
        assert_eq!(g.covered_fraction(), 0.0);
    }

    #[test]
    fn visit_radius_and_first_step() {
        let mut g = CoverageGrid::new(&square(30.0), CoverageParams::default()).unwrap();
        let p = Vec2::new(15.5, 15.5);
        g.step(&[p]);
        assert_eq!(g.mean_value(), 0.0);
        g.step(&[p]);
        for r in 0..30 {
            for c in 0..30 {
                let d = g.cell_centre(c, r).distance(p);
                let v = g.value(c, r).unwrap();
                assert_eq!(v == 1.0, d <= 5.0, "cell ({c},{r}) at {d}");
            }
        }
    }

    #[test]
    fn matches_dense_recursion() {
        let fence = GeoFence::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(40.0, 0.0),
            Vec2::new(40.0, 20.0),
            Vec2::new(20.0, 20.0),
            Vec2::new(20.0, 40.0),
            Vec2::new(0.0, 40.0),
        ])
        .unwrap();
        let mut g = CoverageGrid::new(&fence, CoverageParams::default()).unwrap();
        let mut d = Dense::new(&g);
        assert_eq!(g.cell_count(), d.vals.len());
        for t in 0..2500 {
            let a = t as f64 * 0.05;
            let pos = [
                Vec2::new(10.0 + 8.0 * a.sin(), 10.0 + 8.0 * (0.7 * a).cos()),
                Vec2::new(30.0 - (t % 300) as f64 * 0.1, 5.0),
            ];
            // the second robot pauses so cells fully expire
            let pos = if (1100..2300).contains(&t) { &pos[..1] } else { &pos[..] };
            g.step(pos);
            d.step(pos);
            assert!((g.mean_value() - d.mean()).abs() < 1e-9, "step {t}");
        }
    }

    #[test]
    fn text_round_trip() {
        let mut g = CoverageGrid::new(&square(12.0), CoverageParams::default()).unwrap();
        for _ in 0..30 {
            g.step(&[Vec2::new(3.0, 3.0)]);
        }
        let text = g.to_text();
        let data = GridData::parse(&text).unwrap();
        assert_eq!(data.to_text(), text);
        assert_eq!((data.cols, data.rows), (12, 12));
    }
}

//! Hexagonal multi-cell layout with wrap-around, deterministic user test points
//! and the large-scale coupling statistics fed into the rate model.
//!
//! Cells are pointy-top hexagons whose circumradius is `cell_radius_m`, placed
//! on a triangular lattice with inter-site distance `sqrt(3) * cell_radius_m`.
//! A cluster of `3k^2 + 3k + 1` cells (1, 7, 19, 37, ...) tiles the plane by
//! translation, which gives the six wrap-around images used for interference.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid geometry config: {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("cell index {index} out of range for {num_cells} cells")]
    CellOutOfRange { index: usize, num_cells: usize },
    #[error("invalid coupling matrix: {0}")]
    InvalidCoupling(String),
    #[error("i/o error writing coupling: {0}")]
    Io(#[from] std::io::Error),
}

/// A point in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn add(self, other: Point) -> Point {
        Point::new(self.x + other.x, self.y + other.y)
    }

    fn scale(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }

    fn rotate(self, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub cell_radius_m: f64,
    pub min_distance_m: f64,
    pub num_cells: usize,
    pub grid_points_per_cell: usize,
    pub pathloss_coeff: f64,
    pub pathloss_exponent: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            cell_radius_m: 500.0,
            min_distance_m: 35.0,
            num_cells: 19,
            grid_points_per_cell: 15_000,
            pathloss_coeff: 10f64.powf(-3.53),
            pathloss_exponent: 3.76,
        }
    }
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let invalid = |field, reason: String| Err(GeometryError::InvalidConfig { field, reason });
        if !(self.cell_radius_m.is_finite() && self.cell_radius_m > 0.0) {
            return invalid("cell_radius_m", format!("must be positive, got {}", self.cell_radius_m));
        }
        if !(self.min_distance_m > 0.0 && self.min_distance_m < self.cell_radius_m) {
            return invalid(
                "min_distance_m",
                format!(
                    "must satisfy 0 < min_distance_m < cell_radius_m ({}), got {}",
                    self.cell_radius_m, self.min_distance_m
                ),
            );
        }
        if cluster_rings(self.num_cells).is_none() {
            return invalid(
                "num_cells",
                format!("must be a centered hexagonal number (1, 7, 19, 37, ...), got {}", self.num_cells),
            );
        }
        if self.grid_points_per_cell == 0 {
            return invalid("grid_points_per_cell", "must be at least 1".into());
        }
        if !(self.pathloss_coeff.is_finite() && self.pathloss_coeff > 0.0) {
            return invalid("pathloss_coeff", format!("must be positive, got {}", self.pathloss_coeff));
        }
        if !(self.pathloss_exponent.is_finite() && self.pathloss_exponent > 2.0) {
            return invalid("pathloss_exponent", format!("must exceed 2, got {}", self.pathloss_exponent));
        }
        Ok(())
    }

    pub fn inter_site_distance_m(&self) -> f64 {
        3f64.sqrt() * self.cell_radius_m
    }
}

/// Number of rings `k` such that `3k^2 + 3k + 1 == num_cells`.
fn cluster_rings(num_cells: usize) -> Option<usize> {
    (0..)
        .map(|k: usize| (k, 3 * k * k + 3 * k + 1))
        .take_while(|&(_, n)| n <= num_cells)
        .find(|&(_, n)| n == num_cells)
        .map(|(k, _)| k)
}

/// Large-scale gain `coeff / d^exponent` at distance `distance_m`.
pub fn path_loss(distance_m: f64, cfg: &GeometryConfig) -> Result<f64, GeometryError> {
    if !(distance_m > 0.0) {
        return Err(GeometryError::NonPositiveDistance(distance_m));
    }
    Ok(cfg.pathloss_coeff / distance_m.powf(cfg.pathloss_exponent))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkLayout {
    pub cell_centers: Vec<Point>,
    /// Absolute coordinates of each cell's test points.
    pub test_points: Vec<Vec<Point>>,
    pub wrap_offsets: Vec<Point>,
}

impl NetworkLayout {
    /// Assembles a layout from explicit parts (synthetic grids, small test networks).
    pub fn from_parts(
        cell_centers: Vec<Point>,
        test_points: Vec<Vec<Point>>,
        wrap_offsets: Vec<Point>,
    ) -> Result<Self, GeometryError> {
        if test_points.len() != cell_centers.len() {
            return Err(GeometryError::InvalidConfig {
                field: "test_points",
                reason: format!("{} point sets for {} cells", test_points.len(), cell_centers.len()),
            });
        }
        Ok(Self { cell_centers, test_points, wrap_offsets })
    }

    pub fn num_cells(&self) -> usize {
        self.cell_centers.len()
    }

    /// Distance from `point` to the nearest wrap-around image of `cell`'s site.
    pub fn wrapped_distance(&self, cell: usize, point: Point) -> Result<f64, GeometryError> {
        let center = *self
            .cell_centers
            .get(cell)
            .ok_or(GeometryError::CellOutOfRange { index: cell, num_cells: self.num_cells() })?;
        Ok(self.nearest_image_distance(center, point))
    }

    fn nearest_image_distance(&self, center: Point, point: Point) -> f64 {
        self.wrap_offsets.iter().map(|&off| center.add(off).distance(point)).fold(center.distance(point), f64::min)
    }
}

pub fn build_layout(cfg: &GeometryConfig) -> Result<NetworkLayout, GeometryError> {
    cfg.validate()?;
    let rings = cluster_rings(cfg.num_cells).expect("validated") as i64;
    let isd = cfg.inter_site_distance_m();
    let a1 = Point::new(isd, 0.0);
    let a2 = Point::new(isd / 2.0, isd * 3f64.sqrt() / 2.0);
    let lattice = |q: i64, r: i64| a1.scale(q as f64).add(a2.scale(r as f64));

    // Axial coordinates ordered ring by ring so cell 0 sits at the origin.
    let mut cell_centers = vec![Point::ORIGIN];
    for ring in 1..=rings {
        let dirs = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];
        let (mut q, mut r) = (ring * dirs[4].0, ring * dirs[4].1);
        for &(dq, dr) in &dirs {
            for _ in 0..ring {
                cell_centers.push(lattice(q, r));
                q += dq;
                r += dr;
            }
        }
    }

    let wrap_offsets = if rings == 0 {
        Vec::new()
    } else {
        let shift = lattice(2 * rings + 1, -rings);
        (0..6).map(|k| shift.rotate(k as f64 * PI / 3.0)).collect()
    };

    let pattern = hexagon_grid(cfg);
    let test_points = cell_centers.iter().map(|&c| pattern.iter().map(|&u| c.add(u)).collect()).collect();

    Ok(NetworkLayout { cell_centers, test_points, wrap_offsets })
}

/// Fractional parts of the R2 low-discrepancy sequence.
fn r2_point(i: u64) -> (f64, f64) {
    // plastic number: unique real root of x^3 = x + 1
    const G: f64 = 1.324_717_957_244_746;
    let a1 = 1.0 / G;
    let a2 = 1.0 / (G * G);
    ((0.5 + a1 * i as f64).fract(), (0.5 + a2 * i as f64).fract())
}

/// Test-point offsets (relative to the cell site) covering the hexagon minus
/// the `min_distance_m` disc, uniform by area. Points are generated in one of
/// the six equilateral sectors and replicated by 60-degree rotations, so the
/// grid has the full rotational symmetry of the hexagon whenever the point
/// count is a multiple of six. Any remainder is filled from sector 0.
fn hexagon_grid(cfg: &GeometryConfig) -> Vec<Point> {
    let r = cfg.cell_radius_m;
    let v1 = Point::new(r, 0.0).rotate(-PI / 6.0);
    let v2 = Point::new(r, 0.0).rotate(PI / 6.0);
    let mut seq = 0u64;
    let mut next_in_sector = || loop {
        let (mut u, mut v) = r2_point(seq);
        seq += 1;
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        let p = v1.scale(u).add(v2.scale(v));
        if p.norm() >= cfg.min_distance_m {
            return p;
        }
    };

    let n = cfg.grid_points_per_cell;
    let per_sector = n / 6;
    let base: Vec<Point> = (0..per_sector).map(|_| next_in_sector()).collect();
    let mut points = Vec::with_capacity(n);
    for k in 0..6 {
        let angle = k as f64 * PI / 3.0;
        points.extend(base.iter().map(|p| p.rotate(angle)));
    }
    while points.len() < n {
        points.push(next_in_sector());
    }
    points
}

/// True when `offset` (relative to a site) lies inside the pointy-top hexagon of
/// circumradius `radius`.
pub fn inside_hexagon(offset: Point, radius: f64) -> bool {
    let apothem = radius * 3f64.sqrt() / 2.0;
    (0..3).all(|k| {
        let (s, c) = (k as f64 * PI / 3.0).sin_cos();
        (offset.x * c + offset.y * s).abs() <= apothem * (1.0 + 1e-12)
    })
}

/// Channel-coupling statistics between every pair of cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingMatrix {
    /// Mean inverse serving gain over the cell's users.
    pub lambda_serving: Vec<f64>,
    /// `lambda_cross[c][d]`: mean ratio of cell `d`'s gain to the serving gain
    /// over cell `c`'s users. The diagonal is zero.
    pub lambda_cross: Vec<Vec<f64>>,
}

impl CouplingMatrix {
    pub fn new(lambda_serving: Vec<f64>, lambda_cross: Vec<Vec<f64>>) -> Result<Self, GeometryError> {
        let n = lambda_serving.len();
        if lambda_cross.len() != n || lambda_cross.iter().any(|row| row.len() != n) {
            return Err(GeometryError::InvalidCoupling(format!("expected {n}x{n} cross matrix")));
        }
        if lambda_serving.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(GeometryError::InvalidCoupling("serving terms must be positive".into()));
        }
        for (c, row) in lambda_cross.iter().enumerate() {
            for (d, &v) in row.iter().enumerate() {
                if c == d && v != 0.0 {
                    return Err(GeometryError::InvalidCoupling(format!("diagonal entry {c} is {v}")));
                }
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(GeometryError::InvalidCoupling(format!("entry ({c},{d}) is {v}")));
                }
            }
        }
        Ok(Self { lambda_serving, lambda_cross })
    }

    pub fn num_cells(&self) -> usize {
        self.lambda_serving.len()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("c,d,lambda\n");
        for (c, row) in self.lambda_cross.iter().enumerate() {
            for (d, &v) in row.iter().enumerate() {
                let value = if c == d { self.lambda_serving[c] } else { v };
                let _ = writeln!(out, "{c},{d},{value:e}");
            }
        }
        out
    }

    /// Writes `coupling.csv`; the diagonal rows carry the serving term.
    pub fn write_csv(&self, path: &Path) -> Result<(), GeometryError> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

pub fn compute_coupling(layout: &NetworkLayout, cfg: &GeometryConfig) -> Result<CouplingMatrix, GeometryError> {
    cfg.validate()?;
    let num_cells = layout.num_cells();
    let alpha = cfg.pathloss_exponent;

    let rows: Vec<(f64, Vec<f64>)> = (0..num_cells)
        .into_par_iter()
        .map(|c| {
            let center = layout.cell_centers[c];
            let points = &layout.test_points[c];
            let mut inv_gain_sum = 0.0;
            let mut cross_sum = vec![0.0; num_cells];
            for &u in points {
                let serving = center.distance(u);
                inv_gain_sum += 1.0 / path_loss(serving, cfg)?;
                for (d, acc) in cross_sum.iter_mut().enumerate() {
                    if d == c {
                        continue;
                    }
                    let dist = layout.nearest_image_distance(layout.cell_centers[d], u);
                    if !(dist > 0.0) {
                        return Err(GeometryError::NonPositiveDistance(dist));
                    }
                    // coefficient cancels in the ratio
                    *acc += (serving / dist).powf(alpha);
                }
            }
            let count = points.len().max(1) as f64;
            cross_sum.iter_mut().for_each(|v| *v /= count);
            Ok((inv_gain_sum / count, cross_sum))
        })
        .collect::<Result<_, GeometryError>>()?;

    let (lambda_serving, lambda_cross) = rows.into_iter().unzip();
    CouplingMatrix::new(lambda_serving, lambda_cross)
}

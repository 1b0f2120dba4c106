use serde::{Deserialize, Serialize};

use super::{rib_polygon, CoupledPair, MaterialStack, Point, RibWaveguide};
use crate::error::{Error, Result};

/// Minimum cladding margin between any core edge and the window boundary.
pub const MIN_MARGIN_NM: f64 = 1500.0;

/// Uniform rectangular grid. The window is centered horizontally on the
/// device mid-plane and vertically on the film.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub dx_nm: f64,
    pub dy_nm: f64,
    pub width_um: f64,
    pub height_um: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { dx_nm: 10.0, dy_nm: 10.0, width_um: 6.0, height_um: 3.6 }
    }
}

impl GridSpec {
    pub fn new(dx_nm: f64, dy_nm: f64, width_um: f64, height_um: f64) -> Self {
        GridSpec { dx_nm, dy_nm, width_um, height_um }
    }

    pub fn nx(&self) -> usize {
        (self.width_um * 1e3 / self.dx_nm).round().max(1.0) as usize
    }

    pub fn ny(&self) -> usize {
        (self.height_um * 1e3 / self.dy_nm).round().max(1.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("dx_nm", self.dx_nm),
            ("dy_nm", self.dy_nm),
            ("width_um", self.width_um),
            ("height_um", self.height_um),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Geometry accepted by [`rasterize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CrossSection {
    Rib(RibWaveguide),
    Pair(CoupledPair),
}

/// Rasterized cross-section.
///
/// Each cell stores a diagonal permittivity tensor: the in-plane components
/// are blended between arithmetic (field tangential to the local interface)
/// and harmonic (field normal to it) averages of the fill fraction, while
/// `eps_zz` is always the arithmetic average.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexMap {
    pub nx: usize,
    pub ny: usize,
    pub dx_nm: f64,
    pub dy_nm: f64,
    /// Lower-left corner of the window.
    pub x0_nm: f64,
    pub y0_nm: f64,
    pub n_core: f64,
    pub n_clad: f64,
    pub eps_xx: Vec<f64>,
    pub eps_yy: Vec<f64>,
    pub eps_zz: Vec<f64>,
    /// Core fill fraction per cell.
    pub fill: Vec<f64>,
    /// Set when the map was built mirror-symmetric about `x = 0`.
    pub mirror_symmetric: bool,
}

impl IndexMap {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_center_nm(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.x0_nm + (i as f64 + 0.5) * self.dx_nm,
            self.y0_nm + (j as f64 + 0.5) * self.dy_nm,
        )
    }

    /// Scalar relative permittivity (the isotropic, arithmetic average).
    pub fn n_squared(&self) -> &[f64] {
        &self.eps_zz
    }

    pub fn cell_area_nm2(&self) -> f64 {
        self.dx_nm * self.dy_nm
    }

    /// Core area implied by the fill fractions.
    pub fn core_area_nm2(&self) -> f64 {
        self.fill.iter().sum::<f64>() * self.cell_area_nm2()
    }

    pub fn same_grid(&self, other: &IndexMap) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.dx_nm == other.dx_nm
            && self.dy_nm == other.dy_nm
            && self.x0_nm == other.x0_nm
            && self.y0_nm == other.y0_nm
    }

    /// Uniform cladding everywhere.
    pub fn uniform(grid: &GridSpec, stack: &MaterialStack) -> Result<Self> {
        grid.validate()?;
        stack.validate()?;
        let (nx, ny) = (grid.nx(), grid.ny());
        let e = stack.n_clad * stack.n_clad;
        let n = nx * ny;
        Ok(IndexMap {
            nx,
            ny,
            dx_nm: grid.dx_nm,
            dy_nm: grid.dy_nm,
            x0_nm: -(nx as f64) * grid.dx_nm / 2.0,
            y0_nm: stack.film_thickness_nm / 2.0 - ny as f64 * grid.dy_nm / 2.0,
            n_core: stack.n_core,
            n_clad: stack.n_clad,
            eps_xx: vec![e; n],
            eps_yy: vec![e; n],
            eps_zz: vec![e; n],
            fill: vec![0.0; n],
            mirror_symmetric: true,
        })
    }

    /// Planar multilayer: permittivity varies along `axis` only. The window
    /// is centered on the origin and `layers` lists `(lo_nm, hi_nm)` core
    /// intervals along `axis`.
    pub fn layered(
        axis: Axis,
        grid: &GridSpec,
        n_core: f64,
        n_clad: f64,
        layers: &[(f64, f64)],
    ) -> Result<Self> {
        grid.validate()?;
        if !(n_clad > 1.0 && n_core > n_clad) {
            return Err(Error::invalid("n_core/n_clad", "guidance requires n_core > n_clad > 1"));
        }
        let (nx, ny) = (grid.nx(), grid.ny());
        let x0 = -(nx as f64) * grid.dx_nm / 2.0;
        let y0 = -(ny as f64) * grid.dy_nm / 2.0;
        let (ec, el) = (n_core * n_core, n_clad * n_clad);
        let mut map = IndexMap {
            nx,
            ny,
            dx_nm: grid.dx_nm,
            dy_nm: grid.dy_nm,
            x0_nm: x0,
            y0_nm: y0,
            n_core,
            n_clad,
            eps_xx: vec![el; nx * ny],
            eps_yy: vec![el; nx * ny],
            eps_zz: vec![el; nx * ny],
            fill: vec![0.0; nx * ny],
            mirror_symmetric: false,
        };
        for j in 0..ny {
            for i in 0..nx {
                let (lo, hi) = match axis {
                    Axis::X => (x0 + i as f64 * grid.dx_nm, x0 + (i + 1) as f64 * grid.dx_nm),
                    Axis::Y => (y0 + j as f64 * grid.dy_nm, y0 + (j + 1) as f64 * grid.dy_nm),
                };
                let covered: f64 = layers
                    .iter()
                    .map(|&(a, b)| (hi.min(b) - lo.max(a)).max(0.0))
                    .sum();
                let f = (covered / (hi - lo)).clamp(0.0, 1.0);
                let normal = match axis {
                    Axis::X => (1.0, 0.0),
                    Axis::Y => (0.0, 1.0),
                };
                let k = map.idx(i, j);
                map.set_cell(k, f, normal, ec, el);
            }
        }
        Ok(map)
    }

    fn set_cell(&mut self, k: usize, f: f64, normal: (f64, f64), ec: f64, el: f64) {
        self.fill[k] = f;
        let arith = f * ec + (1.0 - f) * el;
        if f <= 0.0 || f >= 1.0 {
            self.eps_xx[k] = arith;
            self.eps_yy[k] = arith;
            self.eps_zz[k] = arith;
            return;
        }
        let harm = 1.0 / (f / ec + (1.0 - f) / el);
        let (nx2, ny2) = (normal.0 * normal.0, normal.1 * normal.1);
        // keep in-range despite rounding in the blend
        self.eps_xx[k] = (nx2 * harm + (1.0 - nx2) * arith).clamp(el, ec);
        self.eps_yy[k] = (ny2 * harm + (1.0 - ny2) * arith).clamp(el, ec);
        self.eps_zz[k] = arith;
    }

    /// Forces exact mirror symmetry about `x = 0` by averaging each cell with
    /// its mirror partner.
    fn symmetrize_x(&mut self) {
        let nx = self.nx;
        for j in 0..self.ny {
            for i in 0..nx / 2 {
                let (a, b) = (self.idx(i, j), self.idx(nx - 1 - i, j));
                for v in [&mut self.eps_xx, &mut self.eps_yy, &mut self.eps_zz, &mut self.fill] {
                    let m = 0.5 * (v[a] + v[b]);
                    v[a] = m;
                    v[b] = m;
                }
            }
        }
        self.mirror_symmetric = true;
    }
}

/// Rasterizes a rib or coupled pair onto `grid` with sub-cell averaging.
pub fn rasterize(geometry: &CrossSection, stack: &MaterialStack, grid: &GridSpec) -> Result<IndexMap> {
    grid.validate()?;
    stack.validate()?;
    let (rib, centers) = match geometry {
        CrossSection::Rib(rib) => (*rib, vec![0.0]),
        CrossSection::Pair(pair) => {
            pair.validate(stack)?;
            let c = pair.rib_center_nm();
            (pair.rib, vec![-c, c])
        }
    };
    let base = rib_polygon(&rib, stack)?;
    let traps: Vec<Vec<Point>> = centers
        .iter()
        .map(|&c| base.iter().map(|p| Point::new(p.x + c, p.y)).collect())
        .collect();

    let mut map = IndexMap::uniform(grid, stack)?;
    map.mirror_symmetric = false;

    // margin check against the trapezoids and the film
    let half_core = centers.iter().fold(0.0f64, |m, c| m.max(c.abs())) + rib.bottom_width_nm() / 2.0;
    let x_half = map.nx as f64 * map.dx_nm / 2.0;
    let y_lo = map.y0_nm;
    let y_hi = map.y0_nm + map.ny as f64 * map.dy_nm;
    if x_half - half_core < MIN_MARGIN_NM - 1e-9 {
        return Err(Error::WindowTooSmall(format!(
            "lateral margin {:.1} nm < {MIN_MARGIN_NM} nm (core half-extent {:.1} nm, window half-width {:.1} nm)",
            x_half - half_core,
            half_core,
            x_half
        )));
    }
    if -y_lo < MIN_MARGIN_NM - 1e-9 || y_hi - stack.film_thickness_nm < MIN_MARGIN_NM - 1e-9 {
        return Err(Error::WindowTooSmall(format!(
            "vertical margins {:.1} nm below / {:.1} nm above the film, need {MIN_MARGIN_NM} nm",
            -y_lo,
            y_hi - stack.film_thickness_nm
        )));
    }

    let h_slab = rib.slab_thickness_nm(stack);
    // slab rectangle extends past the window so its side edges never land in a cell
    let slab = (h_slab > 0.0).then(|| {
        let (a, b) = (map.x0_nm - 1e3, -map.x0_nm + 1e3);
        vec![Point::new(a, 0.0), Point::new(b, 0.0), Point::new(b, h_slab), Point::new(a, h_slab)]
    });

    let (ec, el) = (stack.n_core * stack.n_core, stack.n_clad * stack.n_clad);
    let (dx, dy) = (map.dx_nm, map.dy_nm);
    let cell_area = dx * dy;
    for j in 0..map.ny {
        let yl = map.y0_nm + j as f64 * dy;
        let yh = yl + dy;
        if yh <= 0.0 || yl >= stack.film_thickness_nm {
            continue;
        }
        for i in 0..map.nx {
            let xl = map.x0_nm + i as f64 * dx;
            let cell = Rect { xl, xh: xl + dx, yl, yh };
            let mut area = 0.0;
            if h_slab > 0.0 {
                area += cell.overlap(&Rect { xl: f64::NEG_INFINITY, xh: f64::INFINITY, yl: 0.0, yh: h_slab });
            }
            for t in &traps {
                area += polygon_area(&clip_to_rect(t, &cell));
            }
            let f = (area / cell_area).clamp(0.0, 1.0);
            let normal = if f > 0.0 && f < 1.0 {
                let mut n = (0.0, 0.0);
                for poly in traps.iter().chain(slab.iter()) {
                    let (ax, ay) = boundary_normal_in_rect(poly, &cell);
                    n.0 += ax;
                    n.1 += ay;
                }
                let len = (n.0 * n.0 + n.1 * n.1).sqrt();
                if len > 1e-12 {
                    (n.0 / len, n.1 / len)
                } else {
                    // interface only touches a corner
                    (std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2)
                }
            } else {
                (0.0, 1.0)
            };
            let k = map.idx(i, j);
            map.set_cell(k, f, normal, ec, el);
        }
    }
    if matches!(geometry, CrossSection::Pair(_)) {
        map.symmetrize_x();
    }
    Ok(map)
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    xl: f64,
    xh: f64,
    yl: f64,
    yh: f64,
}

impl Rect {
    fn overlap(&self, o: &Rect) -> f64 {
        let w = (self.xh.min(o.xh) - self.xl.max(o.xl)).max(0.0);
        let h = (self.yh.min(o.yh) - self.yl.max(o.yl)).max(0.0);
        w * h
    }
}

/// Sutherland–Hodgman clip of a polygon against an axis-aligned rectangle.
fn clip_to_rect(poly: &[Point], r: &Rect) -> Vec<Point> {
    let mut out = poly.to_vec();
    // (inside test, intersection) for each of the four half-planes
    let planes: [(u8, f64); 4] = [(0, r.xl), (1, r.xh), (2, r.yl), (3, r.yh)];
    for (side, c) in planes {
        if out.is_empty() {
            break;
        }
        let inside = |p: &Point| match side {
            0 => p.x >= c,
            1 => p.x <= c,
            2 => p.y >= c,
            _ => p.y <= c,
        };
        let cross = |a: &Point, b: &Point| {
            if side < 2 {
                let t = (c - a.x) / (b.x - a.x);
                Point::new(c, a.y + t * (b.y - a.y))
            } else {
                let t = (c - a.y) / (b.y - a.y);
                Point::new(a.x + t * (b.x - a.x), c)
            }
        };
        let input = std::mem::take(&mut out);
        for k in 0..input.len() {
            let cur = &input[k];
            let prev = &input[(k + input.len() - 1) % input.len()];
            match (inside(prev), inside(cur)) {
                (true, true) => out.push(*cur),
                (true, false) => out.push(cross(prev, cur)),
                (false, true) => {
                    out.push(cross(prev, cur));
                    out.push(*cur);
                }
                (false, false) => {}
            }
        }
    }
    out
}

fn polygon_area(poly: &[Point]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for k in 0..poly.len() {
        let a = poly[k];
        let b = poly[(k + 1) % poly.len()];
        s += a.x * b.y - b.x * a.y;
    }
    0.5 * s.abs()
}

/// Length-weighted outward normal of the polygon boundary inside `r`.
/// Edges shared by two touching polygons cancel.
fn boundary_normal_in_rect(poly: &[Point], r: &Rect) -> (f64, f64) {
    let mut n = (0.0, 0.0);
    for k in 0..poly.len() {
        let a = poly[k];
        let b = poly[(k + 1) % poly.len()];
        if let Some((p, q)) = clip_segment(a, b, r) {
            let (ex, ey) = (q.x - p.x, q.y - p.y);
            // counter-clockwise polygons: outward normal is (ey, -ex)
            n.0 += ey;
            n.1 -= ex;
        }
    }
    n
}

/// Liang–Barsky segment clipping.
fn clip_segment(a: Point, b: Point, r: &Rect) -> Option<(Point, Point)> {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for (p, q) in [(-dx, a.x - r.xl), (dx, r.xh - a.x), (-dy, a.y - r.yl), (dy, r.yh - a.y)] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let t = q / p;
            if p < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
        }
    }
    if t1 - t0 <= 1e-12 {
        return None;
    }
    Some((
        Point::new(a.x + t0 * dx, a.y + t0 * dy),
        Point::new(a.x + t1 * dx, a.y + t1 * dy),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn stack() -> MaterialStack {
        MaterialStack::default()
    }

    #[test]
    fn cladding_only_window() {
        let m = IndexMap::uniform(&GridSpec::new(50.0, 50.0, 2.0, 2.0), &stack()).unwrap();
        assert!(m.eps_zz.iter().all(|&e| e == 1.462 * 1.462));
    }

    #[test]
    fn interior_cells_are_core() {
        let grid = GridSpec::default();
        let m = rasterize(&CrossSection::Rib(RibWaveguide::default()), &stack(), &grid).unwrap();
        // cell centered at (0, 255 nm) lies inside the rib
        let i = m.nx / 2;
        let j = ((255.0 - m.y0_nm) / m.dy_nm) as usize;
        let k = m.idx(i, j);
        assert_eq!(m.fill[k], 1.0);
        assert_eq!(m.eps_xx[k], 2.34 * 2.34);
    }

    #[test]
    fn half_covered_cell_uses_arithmetic_tangential_average() {
        // vertical interface through the center of cell 1 along x
        let grid = GridSpec::new(10.0, 10.0, 0.04, 0.02);
        let m = IndexMap::layered(Axis::X, &grid, 2.34, 1.462, &[(-15.0, 200.0)]).unwrap();
        let k = m.idx(0, 0);
        assert_abs_diff_eq!(m.fill[k], 0.5, epsilon = 1e-15);
        let (ec, el) = (2.34f64 * 2.34, 1.462f64 * 1.462);
        assert_abs_diff_eq!(m.eps_yy[k], 0.5 * (ec + el), epsilon = 1e-12);
        assert_abs_diff_eq!(m.eps_xx[k], 2.0 / (1.0 / ec + 1.0 / el), epsilon = 1e-12);
    }

    #[test]
    fn pair_map_is_mirror_symmetric() {
        for gap in [40.0, 65.0, 73.0] {
            let pair = CoupledPair { gap_nm: gap, ..Default::default() };
            let m = rasterize(&CrossSection::Pair(pair), &stack(), &GridSpec::new(10.0, 10.0, 6.0, 3.6)).unwrap();
            for j in 0..m.ny {
                for i in 0..m.nx {
                    let (a, b) = (m.idx(i, j), m.idx(m.nx - 1 - i, j));
                    assert_eq!(m.eps_xx[a], m.eps_xx[b]);
                    assert_eq!(m.eps_yy[a], m.eps_yy[b]);
                }
            }
        }
    }

    #[test]
    fn values_stay_within_material_bounds() {
        let pair = CoupledPair::default();
        let m = rasterize(&CrossSection::Pair(pair), &stack(), &GridSpec::new(7.0, 9.0, 6.0, 3.6)).unwrap();
        let (lo, hi) = (1.462f64 * 1.462, 2.34f64 * 2.34);
        for v in m.eps_xx.iter().chain(&m.eps_yy).chain(&m.eps_zz) {
            assert!(*v >= lo && *v <= hi);
        }
    }

    #[test]
    fn core_area_converges_to_polygon_area() {
        let rib = RibWaveguide::default();
        let s = stack();
        let trap = 0.5 * (rib.top_width_nm() + rib.bottom_width_nm()) * rib.etch_depth_nm;
        let mut errs = Vec::new();
        for d in [40.0, 20.0, 10.0] {
            let grid = GridSpec::new(d, d, 4.0, 3.6);
            let m = rasterize(&CrossSection::Rib(rib), &s, &grid).unwrap();
            let slab = m.nx as f64 * m.dx_nm * rib.slab_thickness_nm(&s);
            errs.push((m.core_area_nm2() - slab - trap).abs() / trap);
        }
        // exact clipping: already at round-off
        assert!(errs.iter().all(|&e| e < 1e-9), "{errs:?}");
    }

    #[test]
    fn sidewall_cells_are_anisotropic() {
        let m = rasterize(&CrossSection::Rib(RibWaveguide::default()), &stack(), &GridSpec::default()).unwrap();
        let j = ((245.0 - m.y0_nm) / m.dy_nm) as usize;
        let partial: Vec<usize> = (0..m.nx).map(|i| m.idx(i, j)).filter(|&k| m.fill[k] > 0.1 && m.fill[k] < 0.9).collect();
        assert!(!partial.is_empty());
        for k in partial {
            // sidewall normal is mostly along x: Ex sees the harmonic side
            assert!(m.eps_xx[k] < m.eps_yy[k]);
        }
    }

    #[test]
    fn window_too_small_is_rejected() {
        let err = rasterize(
            &CrossSection::Pair(CoupledPair::default()),
            &stack(),
            &GridSpec::new(10.0, 10.0, 3.0, 3.6),
        );
        assert!(matches!(err, Err(Error::WindowTooSmall(_))));
        let err = rasterize(&CrossSection::Rib(RibWaveguide::default()), &stack(), &GridSpec::new(10.0, 10.0, 6.0, 2.0));
        assert!(matches!(err, Err(Error::WindowTooSmall(_))));
    }

    #[test]
    fn rasterize_is_deterministic() {
        let g = CrossSection::Pair(CoupledPair::default());
        let a = rasterize(&g, &stack(), &GridSpec::new(20.0, 20.0, 6.0, 3.6)).unwrap();
        let b = rasterize(&g, &stack(), &GridSpec::new(20.0, 20.0, 6.0, 3.6)).unwrap();
        assert_eq!(a, b);
    }
}

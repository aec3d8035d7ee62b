//! Planar geometry: convex clipping, circular-arc polygons inside the unit disk
//! with closed-form integrals of the spherical-uniform density, and polyline
//! predicates for contour checks.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type P2 = [f64; 2];

#[inline]
pub fn dot(a: P2, b: P2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn sub(a: P2, b: P2) -> P2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn cross(a: P2, b: P2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn norm2(a: P2) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist(a: P2, b: P2) -> f64 {
    norm2(sub(a, b))
}

/// Convex polygon whose edge `k` (from vertex `k` to `k + 1`) carries a label,
/// the index of the half-plane that produced it.
#[derive(Debug, Clone)]
pub struct LabeledPolygon {
    pub vertices: Vec<P2>,
    pub labels: Vec<Option<usize>>,
}

impl LabeledPolygon {
    /// Axis-aligned square `[-h, h]^2`, counterclockwise, unlabeled edges.
    pub fn square(h: f64) -> Self {
        Self {
            vertices: vec![[-h, -h], [h, -h], [h, h], [-h, h]],
            labels: vec![None; 4],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    pub fn max_norm(&self) -> f64 {
        self.vertices.iter().map(|&v| norm2(v)).fold(0.0, f64::max)
    }

    /// Intersects with `{x : <x, normal> <= offset}`; the new edge gets `label`.
    pub fn clip(&mut self, normal: P2, offset: f64, label: usize) {
        let n = self.vertices.len();
        if n == 0 {
            return;
        }
        let side: Vec<f64> = self
            .vertices
            .iter()
            .map(|&v| dot(v, normal) - offset)
            .collect();
        if side.iter().all(|&s| s <= 0.0) {
            return;
        }
        if side.iter().all(|&s| s > 0.0) {
            self.vertices.clear();
            self.labels.clear();
            return;
        }
        let mut verts = Vec::with_capacity(n + 2);
        let mut labs = Vec::with_capacity(n + 2);
        for k in 0..n {
            let next = (k + 1) % n;
            let (cur, nxt) = (self.vertices[k], self.vertices[next]);
            let (sc, sn) = (side[k], side[next]);
            let crossing = |a: P2, b: P2, sa: f64, sb: f64| {
                let t = sa / (sa - sb);
                [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
            };
            match (sc <= 0.0, sn <= 0.0) {
                (true, true) => {
                    verts.push(cur);
                    labs.push(self.labels[k]);
                }
                (true, false) => {
                    verts.push(cur);
                    labs.push(self.labels[k]);
                    verts.push(crossing(cur, nxt, sc, sn));
                    labs.push(Some(label));
                }
                (false, true) => {
                    verts.push(crossing(cur, nxt, sc, sn));
                    labs.push(self.labels[k]);
                }
                (false, false) => {}
            }
        }
        // Drop zero-length edges, keeping the label of the edge that follows.
        let m = verts.len();
        let mut keep_v = Vec::with_capacity(m);
        let mut keep_l = Vec::with_capacity(m);
        for k in 0..m {
            let next = verts[(k + 1) % m];
            if dist(verts[k], next) > 1e-15 {
                keep_v.push(verts[k]);
                keep_l.push(labs[k]);
            }
        }
        self.vertices = keep_v;
        self.labels = keep_l;
    }

    /// Winding-number containment test for a convex counterclockwise polygon.
    pub fn contains(&self, p: P2) -> bool {
        let n = self.vertices.len();
        n >= 3
            && (0..n).all(|k| {
                let a = self.vertices[k];
                let b = self.vertices[(k + 1) % n];
                cross(sub(b, a), sub(p, a)) >= 0.0
            })
    }

    /// Intersection with the closed unit disk as a circular-arc polygon.
    pub fn intersect_unit_disk(&self) -> ArcPolygon {
        let n = self.vertices.len();
        if n < 3 {
            return ArcPolygon::empty();
        }
        let mut segs: Vec<Piece> = Vec::new();
        for k in 0..n {
            let a = self.vertices[k];
            let b = self.vertices[(k + 1) % n];
            let d = sub(b, a);
            let dd = dot(d, d);
            if dd == 0.0 {
                continue;
            }
            let ad = dot(a, d);
            let disc = ad * ad - dd * (dot(a, a) - 1.0);
            if disc <= 0.0 {
                continue;
            }
            let sq = disc.sqrt();
            let t1 = (-ad - sq) / dd;
            let t2 = (-ad + sq) / dd;
            let lo = t1.max(0.0);
            let hi = t2.min(1.0);
            if hi - lo <= 0.0 {
                continue;
            }
            let at = |t: f64| [a[0] + t * d[0], a[1] + t * d[1]];
            let (p, q) = (
                if lo == 0.0 {
                    a
                } else {
                    project_to_circle(at(lo))
                },
                if hi == 1.0 {
                    b
                } else {
                    project_to_circle(at(hi))
                },
            );
            if dist(p, q) <= 1e-15 {
                continue;
            }
            segs.push(Piece::Segment {
                from: p,
                to: q,
                label: self.labels[k],
            });
        }
        if segs.is_empty() {
            return if self.contains([0.0, 0.0]) {
                ArcPolygon::full_disk()
            } else {
                ArcPolygon::empty()
            };
        }
        let m = segs.len();
        let mut pieces = Vec::with_capacity(2 * m);
        for k in 0..m {
            let end = segs[k].end();
            let start = segs[(k + 1) % m].start();
            pieces.push(segs[k].clone());
            if dist(end, start) > 1e-13 {
                let from = end[1].atan2(end[0]);
                let to = start[1].atan2(start[0]);
                let span = (to - from).rem_euclid(TAU);
                pieces.push(Piece::Arc { from, span });
            }
        }
        ArcPolygon { pieces }
    }
}

fn project_to_circle(p: P2) -> P2 {
    let r = norm2(p);
    if r > 0.0 {
        [p[0] / r, p[1] / r]
    } else {
        p
    }
}

/// Boundary piece of a region inside the unit disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Piece {
    /// Straight segment; `label` names the neighbouring cell across it.
    Segment {
        from: P2,
        to: P2,
        label: Option<usize>,
    },
    /// Counterclockwise arc of the unit circle starting at angle `from`.
    Arc { from: f64, span: f64 },
}

impl Piece {
    pub fn start(&self) -> P2 {
        match *self {
            Piece::Segment { from, .. } => from,
            Piece::Arc { from, .. } => [from.cos(), from.sin()],
        }
    }

    pub fn end(&self) -> P2 {
        match *self {
            Piece::Segment { to, .. } => to,
            Piece::Arc { from, span } => [(from + span).cos(), (from + span).sin()],
        }
    }
}

/// Line-integral data of a segment `a -> b`: signed distance `h` of its line to
/// the origin (positive on the right), and `int ds / |x|` along it.
fn segment_terms(a: P2, b: P2) -> (f64, f64, P2, P2) {
    let len = dist(a, b);
    let u = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
    let n = [u[1], -u[0]];
    let h = dot(a, n);
    let (ta, tb) = (dot(a, u), dot(b, u));
    let scale = ta.abs().max(tb.abs());
    let inv_len = if h.abs() > 1e-12 * scale {
        (tb / h.abs()).asinh() - (ta / h.abs()).asinh()
    } else if ta * tb > 0.0 {
        (tb.abs() / ta.abs()).ln().abs()
    } else {
        let hh = h.abs().max(1e-300);
        (tb / hh).asinh() - (ta / hh).asinh()
    };
    (h, inv_len, u, n)
}

/// `int_segment u_2 ds = (1 / 2 pi) int ds / |x|`.
pub fn segment_u2_integral(a: P2, b: P2) -> f64 {
    if dist(a, b) == 0.0 {
        return 0.0;
    }
    segment_terms(a, b).1 / TAU
}

/// Region inside the closed unit disk bounded by segments and unit-circle arcs,
/// traversed counterclockwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcPolygon {
    pub pieces: Vec<Piece>,
}

impl ArcPolygon {
    pub fn empty() -> Self {
        Self { pieces: Vec::new() }
    }

    pub fn full_disk() -> Self {
        Self {
            pieces: vec![Piece::Arc {
                from: 0.0,
                span: TAU,
            }],
        }
    }

    /// Angular sector `{r e^{i t} : 0 <= r <= 1, start <= t <= start + opening}`.
    pub fn sector(start: f64, opening: f64) -> Self {
        let a = [start.cos(), start.sin()];
        let b = [(start + opening).cos(), (start + opening).sin()];
        Self {
            pieces: vec![
                Piece::Segment {
                    from: [0.0, 0.0],
                    to: a,
                    label: None,
                },
                Piece::Arc {
                    from: start,
                    span: opening,
                },
                Piece::Segment {
                    from: b,
                    to: [0.0, 0.0],
                    label: None,
                },
            ],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// `U_2` mass and first moment `int x u_2(x) dx`, from the divergence
    /// theorem with the fields `x / |x|` and `x_i x / (2 |x|)`.
    pub fn mass_and_moment(&self) -> (f64, P2) {
        let mut mass = 0.0;
        let mut moment = [0.0, 0.0];
        for piece in &self.pieces {
            match *piece {
                Piece::Arc { from, span } => {
                    mass += span;
                    moment[0] += 0.5 * ((from + span).sin() - from.sin());
                    moment[1] -= 0.5 * ((from + span).cos() - from.cos());
                }
                Piece::Segment { from, to, .. } => {
                    if dist(from, to) == 0.0 {
                        continue;
                    }
                    let (h, inv_len, u, n) = segment_terms(from, to);
                    let radial = norm2(to) - norm2(from);
                    mass += h * inv_len;
                    moment[0] += 0.5 * h * (h * n[0] * inv_len + u[0] * radial);
                    moment[1] += 0.5 * h * (h * n[1] * inv_len + u[1] * radial);
                }
            }
        }
        (mass / TAU, [moment[0] / TAU, moment[1] / TAU])
    }

    pub fn u2_mass(&self) -> f64 {
        self.mass_and_moment().0
    }

    /// Pieces must chain end-to-start, stay in the closed disk, and segments must
    /// not cross each other.
    pub fn validate(&self) -> Result<()> {
        let n = self.pieces.len();
        if n == 0 {
            return Ok(());
        }
        for (k, p) in self.pieces.iter().enumerate() {
            let next = &self.pieces[(k + 1) % n];
            if dist(p.end(), next.start()) > 1e-9 {
                return Err(Error::Geometry(format!(
                    "boundary is not closed after piece {k}"
                )));
            }
            if let Piece::Segment { from, to, .. } = p {
                if norm2(*from) > 1.0 + 1e-9 || norm2(*to) > 1.0 + 1e-9 {
                    return Err(Error::Geometry(format!("segment {k} leaves the unit disk")));
                }
            }
            if let Piece::Arc { span, .. } = p {
                if !(*span >= 0.0 && *span <= TAU + 1e-12) {
                    return Err(Error::Geometry(format!("arc {k} has invalid span")));
                }
            }
        }
        let segs: Vec<(usize, P2, P2)> = self
            .pieces
            .iter()
            .enumerate()
            .filter_map(|(k, p)| match *p {
                Piece::Segment { from, to, .. } => Some((k, from, to)),
                _ => None,
            })
            .collect();
        for (i, &(ki, a, b)) in segs.iter().enumerate() {
            for &(kj, c, d) in &segs[i + 1..] {
                let adjacent = (ki + 1) % n == kj || (kj + 1) % n == ki;
                if !adjacent && segments_intersect(a, b, c, d) {
                    return Err(Error::Geometry(format!(
                        "cell boundary self-intersects (pieces {ki} and {kj})"
                    )));
                }
            }
        }
        let total_arc: f64 = self
            .pieces
            .iter()
            .map(|p| match p {
                Piece::Arc { span, .. } => *span,
                _ => 0.0,
            })
            .sum();
        if total_arc > TAU + 1e-9 {
            return Err(Error::Geometry(
                "arcs wind around the disk more than once".into(),
            ));
        }
        Ok(())
    }

    /// Largest distance between boundary points (arcs sampled finely).
    pub fn diameter(&self) -> f64 {
        let pts = self.boundary_points(64);
        polyline_diameter(&pts)
    }

    pub fn boundary_points(&self, per_arc: usize) -> Vec<P2> {
        let mut pts = Vec::new();
        for p in &self.pieces {
            match *p {
                Piece::Segment { from, .. } => pts.push(from),
                Piece::Arc { from, span } => {
                    for k in 0..per_arc {
                        let t = from + span * k as f64 / per_arc as f64;
                        pts.push([t.cos(), t.sin()]);
                    }
                }
            }
        }
        pts
    }
}

/// Integral of `u_2` over the region; validates the boundary first.
pub fn cell_mass_u2(cell: &ArcPolygon) -> Result<f64> {
    cell.validate()?;
    Ok(cell.u2_mass())
}

/// Orientation of `c` relative to the directed line `a -> b`, with a relative
/// error filter: returns 0 when the sign cannot be trusted.
pub fn orient(a: P2, b: P2, c: P2) -> i8 {
    let l = (b[0] - a[0]) * (c[1] - a[1]);
    let r = (b[1] - a[1]) * (c[0] - a[0]);
    let det = l - r;
    let bound = 1e-12 * (l.abs() + r.abs());
    if det > bound {
        1
    } else if det < -bound {
        -1
    } else {
        0
    }
}

fn on_segment(a: P2, b: P2, p: P2) -> bool {
    p[0] >= a[0].min(b[0]) - 1e-12
        && p[0] <= a[0].max(b[0]) + 1e-12
        && p[1] >= a[1].min(b[1]) - 1e-12
        && p[1] <= a[1].max(b[1]) + 1e-12
}

/// Closed segments `ab` and `cd` share at least one point.
pub fn segments_intersect(a: P2, b: P2, c: P2, d: P2) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if o1 * o2 < 0 && o3 * o4 < 0 {
        return true;
    }
    (o1 == 0 && on_segment(a, b, c))
        || (o2 == 0 && on_segment(a, b, d))
        || (o3 == 0 && on_segment(c, d, a))
        || (o4 == 0 && on_segment(c, d, b))
}

/// Removes consecutive duplicates (including the wrap-around pair).
pub fn dedup_loop(points: &[P2]) -> Vec<P2> {
    let mut out: Vec<P2> = Vec::with_capacity(points.len());
    for &p in points {
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    while out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    out
}

/// First pair of non-adjacent crossing edges of a closed loop, if any.
pub fn loop_self_intersection(points: &[P2]) -> Option<(usize, usize)> {
    let pts = dedup_loop(points);
    let n = pts.len();
    if n < 3 {
        return if n < 2 { None } else { Some((0, 1)) };
    }
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (c, d) = (pts[j], pts[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Signed shoelace area (positive for counterclockwise loops).
pub fn signed_area(points: &[P2]) -> f64 {
    let n = points.len();
    0.5 * (0..n)
        .map(|k| cross(points[k], points[(k + 1) % n]))
        .sum::<f64>()
}

/// Winding number of the closed loop around `p`.
pub fn winding_number(p: P2, points: &[P2]) -> i32 {
    let n = points.len();
    let mut wn = 0;
    for k in 0..n {
        let a = points[k];
        let b = points[(k + 1) % n];
        if a[1] <= p[1] {
            if b[1] > p[1] && orient(a, b, p) > 0 {
                wn += 1;
            }
        } else if b[1] <= p[1] && orient(a, b, p) < 0 {
            wn -= 1;
        }
    }
    wn
}

/// Convex hull, counterclockwise, without collinear points.
pub fn convex_hull(points: &[P2]) -> Vec<P2> {
    let mut pts: Vec<P2> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<P2> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2
            && cross(
                sub(lower[lower.len() - 1], lower[lower.len() - 2]),
                sub(p, lower[lower.len() - 2]),
            ) <= 0.0
        {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<P2> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2
            && cross(
                sub(upper[upper.len() - 1], upper[upper.len() - 2]),
                sub(p, upper[upper.len() - 2]),
            ) <= 0.0
        {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

pub fn polyline_diameter(points: &[P2]) -> f64 {
    let mut best = 0.0f64;
    for (i, &a) in points.iter().enumerate() {
        for &b in &points[i + 1..] {
            best = best.max(dist(a, b));
        }
    }
    best
}

/// Angle of `p` in `[0, 2 pi)`.
pub fn angle(p: P2) -> f64 {
    p[1].atan2(p[0]).rem_euclid(TAU)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn half_disk_right() -> ArcPolygon {
        ArcPolygon {
            pieces: vec![
                Piece::Arc {
                    from: -PI / 2.0,
                    span: PI,
                },
                Piece::Segment {
                    from: [0.0, 1.0],
                    to: [0.0, -1.0],
                    label: None,
                },
            ],
        }
    }

    /// Polar Monte-Carlo-free reference: U_2 mass of a convex region containing
    /// or not containing the origin, integrating the radial extent numerically.
    fn polar_reference(region: &dyn Fn(P2) -> bool) -> (f64, P2) {
        let (nt, nr) = (2000usize, 2000usize);
        let mut mass = 0.0;
        let mut m = [0.0, 0.0];
        for it in 0..nt {
            let t = (it as f64 + 0.5) * TAU / nt as f64;
            for ir in 0..nr {
                let r = (ir as f64 + 0.5) / nr as f64;
                let p = [r * t.cos(), r * t.sin()];
                if region(p) {
                    // U_2 in polar coordinates: (1 / 2 pi) dr dt.
                    let w = 1.0 / (nt as f64 * nr as f64);
                    mass += w;
                    m[0] += w * p[0];
                    m[1] += w * p[1];
                }
            }
        }
        (mass, m)
    }

    #[test]
    fn closed_form_masses() {
        assert_abs_diff_eq!(
            cell_mass_u2(&ArcPolygon::full_disk()).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            cell_mass_u2(&half_disk_right()).unwrap(),
            0.5,
            epsilon = 1e-14
        );
        for alpha in [0.3, 1.0, 2.5] {
            let s = ArcPolygon::sector(0.7, alpha);
            assert_abs_diff_eq!(cell_mass_u2(&s).unwrap(), alpha / TAU, epsilon = 1e-14);
        }
    }

    #[test]
    fn half_disk_moment() {
        let (_, m) = half_disk_right().mass_and_moment();
        assert_abs_diff_eq!(m[0], 1.0 / TAU, epsilon = 1e-14);
        assert_abs_diff_eq!(m[1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn clipped_polygons_match_polar_reference() {
        let cases: Vec<Vec<(P2, f64)>> = vec![
            vec![([1.0, 0.0], 0.3)],
            vec![([1.0, 0.2], -0.25), ([-0.3, 1.0], 0.4)],
            vec![
                ([0.0, 1.0], 0.1),
                ([0.0, -1.0], 0.1),
                ([1.0, 0.0], 0.05),
                ([-1.0, 0.0], 0.6),
            ],
            vec![([1.0, 1.0], -0.9)],
        ];
        for hp in cases {
            let mut poly = LabeledPolygon::square(1.5);
            for (k, &(n, c)) in hp.iter().enumerate() {
                poly.clip(n, c, k);
            }
            let cell = poly.intersect_unit_disk();
            cell.validate().unwrap();
            let (mass, m) = cell.mass_and_moment();
            let (rm, rmom) = polar_reference(&|p| hp.iter().all(|&(n, c)| dot(p, n) <= c));
            assert_abs_diff_eq!(mass, rm, epsilon = 2e-4);
            assert_abs_diff_eq!(m[0], rmom[0], epsilon = 2e-4);
            assert_abs_diff_eq!(m[1], rmom[1], epsilon = 2e-4);
        }
    }

    #[test]
    fn rejects_self_intersecting_boundary() {
        let bow = ArcPolygon {
            pieces: vec![
                Piece::Segment {
                    from: [0.5, 0.5],
                    to: [-0.5, -0.5],
                    label: None,
                },
                Piece::Segment {
                    from: [-0.5, -0.5],
                    to: [0.5, -0.5],
                    label: None,
                },
                Piece::Segment {
                    from: [0.5, -0.5],
                    to: [-0.5, 0.5],
                    label: None,
                },
                Piece::Segment {
                    from: [-0.5, 0.5],
                    to: [0.5, 0.5],
                    label: None,
                },
            ],
        };
        assert!(matches!(cell_mass_u2(&bow), Err(Error::Geometry(_))));
    }

    #[test]
    fn hull_and_area() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]];
        let h = convex_hull(&pts);
        assert_eq!(h.len(), 4);
        assert_abs_diff_eq!(signed_area(&h), 1.0);
        assert_eq!(winding_number([0.5, 0.5], &h), 1);
        assert_eq!(winding_number([1.5, 0.5], &h), 0);
        assert_abs_diff_eq!(polyline_diameter(&h), 2f64.sqrt());
    }

    #[test]
    fn crossing_loop_detected() {
        let bow = [[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(loop_self_intersection(&bow).is_some());
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!(loop_self_intersection(&sq).is_none());
    }

    proptest! {
        #[test]
        fn cells_partition_the_disk(
            raw in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0, -0.5f64..0.5), 2..12)
        ) {
            let pts: Vec<P2> = raw.iter().map(|&(a, b, _)| [a, b]).collect();
            let psi: Vec<f64> = raw.iter().map(|&(_, _, w)| w).collect();
            for i in 0..pts.len() {
                for j in 0..i {
                    prop_assume!(dist(pts[i], pts[j]) > 1e-3);
                }
            }
            let mut total = 0.0;
            let mut moment = [0.0, 0.0];
            for i in 0..pts.len() {
                let mut poly = LabeledPolygon::square(1.5);
                for j in 0..pts.len() {
                    if j != i {
                        poly.clip(sub(pts[j], pts[i]), psi[j] - psi[i], j);
                    }
                }
                let cell = poly.intersect_unit_disk();
                let (m, mo) = cell.mass_and_moment();
                prop_assert!(m >= -1e-14);
                total += m;
                moment[0] += mo[0];
                moment[1] += mo[1];
            }
            prop_assert!((total - 1.0).abs() < 1e-10, "total {}", total);
            prop_assert!(moment[0].abs() < 1e-10 && moment[1].abs() < 1e-10);
        }
    }
}

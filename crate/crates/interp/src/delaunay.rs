use std::collections::HashMap;

use crate::{InterpError, Result};

/// Delaunay tetrahedralization of a 3D point set.
///
/// Tets are stored with positive orientation (signed volume > 0) and their
/// union covers the convex hull of the points. `neighbors[t][v]` is the tet
/// sharing the face of `t` opposite vertex slot `v`, or `None` on the hull.
///
/// Geometric predicates run in plain `f64` on coordinates normalized to the
/// unit box, with a relative epsilon of 1e-12; points within the epsilon of
/// a circumsphere count as inside it, which keeps insertion deterministic on
/// co-spherical inputs (the triangulation of such sets depends on insertion
/// order, the interpolant does not).
#[derive(Debug, Clone)]
pub struct Tetrahedralization {
    points: Vec<[f64; 3]>,
    tets: Vec<[usize; 4]>,
    neighbors: Vec<[Option<usize>; 4]>,
    kept: Vec<usize>,
    duplicates_removed: usize,
}

const EPS_REL: f64 = 1e-12;

/// Incremental Bowyer–Watson insertion inside a super-tetrahedron that is
/// stripped afterwards. Exact duplicate points are removed first;
/// [`Tetrahedralization::duplicates_removed`] reports how many.
pub fn delaunay_build(points: &[[f64; 3]]) -> Result<Tetrahedralization> {
    // dedup exact duplicates, remembering original indices
    let mut kept: Vec<usize> = Vec::with_capacity(points.len());
    let mut unique: Vec<[f64; 3]> = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        if p.iter().any(|c| !c.is_finite()) {
            return Err(InterpError::Degenerate(format!(
                "point {i} is non-finite: {p:?}"
            )));
        }
        if !unique.contains(p) {
            unique.push(*p);
            kept.push(i);
        }
    }
    let duplicates_removed = points.len() - unique.len();
    let n = unique.len();
    if n < 4 {
        return Err(InterpError::TooFewPoints { need: 4, got: n });
    }

    // normalize to a unit-scale box for the predicates
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in &unique {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0f64, f64::max);
    if extent == 0.0 {
        return Err(InterpError::Degenerate(
            "all points coincide after deduplication".into(),
        ));
    }
    let center = [
        0.5 * (lo[0] + hi[0]),
        0.5 * (lo[1] + hi[1]),
        0.5 * (lo[2] + hi[2]),
    ];
    let mut q: Vec<[f64; 3]> = unique
        .iter()
        .map(|p| {
            [
                (p[0] - center[0]) / extent,
                (p[1] - center[1]) / extent,
                (p[2] - center[2]) / extent,
            ]
        })
        .collect();
    // coplanarity screen on normalized coordinates
    if max_tet_volume(&q) <= 1e-12 {
        return Err(InterpError::Degenerate(
            "all points are coplanar or collinear".into(),
        ));
    }

    // super-tetrahedron comfortably enclosing the unit box
    let big = 20.0;
    q.push([-big, -big, -big]);
    q.push([3.0 * big, -big, -big]);
    q.push([-big, 3.0 * big, -big]);
    q.push([-big, -big, 3.0 * big]);
    let sbase = n;

    let mut builder = Builder {
        q,
        tets: Vec::new(),
        neighbors: Vec::new(),
        alive: Vec::new(),
    };
    builder.push_tet([sbase, sbase + 1, sbase + 2, sbase + 3], [None; 4]);

    let mut last = 0usize;
    for pi in 0..n {
        last = builder.insert(pi, last)?;
    }

    // strip tets touching super vertices and compact
    let mut tets = Vec::new();
    for (t, verts) in builder.tets.iter().enumerate() {
        if builder.alive[t] && verts.iter().all(|&v| v < sbase) {
            tets.push(*verts);
        }
    }
    if tets.is_empty() {
        return Err(InterpError::Degenerate(
            "triangulation collapsed; input may be nearly coplanar".into(),
        ));
    }
    // orientation in world coordinates (normalization preserves orientation)
    for t in &mut tets {
        if orient(&unique, *t) < 0.0 {
            t.swap(2, 3);
        }
    }
    let neighbors = adjacency_from_faces(&tets);
    Ok(Tetrahedralization {
        points: unique,
        tets,
        neighbors,
        kept,
        duplicates_removed,
    })
}

impl Tetrahedralization {
    /// Deduplicated points, in first-seen input order.
    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    /// Neighbor tet across the face opposite each vertex slot; `None` on the
    /// convex hull.
    pub fn neighbors(&self) -> &[[Option<usize>; 4]] {
        &self.neighbors
    }

    /// Original input index of each kept point.
    pub fn kept_indices(&self) -> &[usize] {
        &self.kept
    }

    /// Number of exact-duplicate input points dropped during the build.
    pub fn duplicates_removed(&self) -> usize {
        self.duplicates_removed
    }

    /// Sum of signed tet volumes; equals the convex-hull volume.
    pub fn total_volume(&self) -> f64 {
        self.tets
            .iter()
            .map(|t| orient(&self.points, *t) / 6.0)
            .sum()
    }

    /// Walks from `hint` to the tet containing world point `p` and returns
    /// it with barycentric coordinates, or `None` when `p` is outside the
    /// hull. Weights are clamped non-negative and renormalized; at an
    /// interior query they are non-negative and sum to 1 up to rounding.
    pub fn locate(&self, p: [f64; 3], hint: usize) -> Option<(usize, [f64; 4])> {
        let mut t = if hint < self.tets.len() { hint } else { 0 };
        let max_steps = 4 * self.tets.len() + 64;
        let mut steps = 0;
        'walk: loop {
            steps += 1;
            if steps > max_steps {
                break; // fall back to exhaustive scan
            }
            let verts = self.tets[t];
            let vol = orient(&self.points, verts);
            let eps = vol.abs() * 1e-12;
            for slot in 0..4 {
                let o = orient_with_point(&self.points, verts, slot, p);
                if o < -eps.max(1e-300) {
                    match self.neighbors[t][slot] {
                        Some(next) => {
                            t = next;
                            continue 'walk;
                        }
                        None => return None, // crossed the hull
                    }
                }
            }
            return self.barycentric(t, p);
        }
        (0..self.tets.len()).find_map(|t| self.barycentric(t, p))
    }

    /// Barycentric coordinates of `p` in tet `t`, if all are ≥ -1e-9.
    fn barycentric(&self, t: usize, p: [f64; 3]) -> Option<(usize, [f64; 4])> {
        let verts = self.tets[t];
        let vol = orient(&self.points, verts);
        if vol <= 0.0 {
            return None;
        }
        let mut lam = [0.0f64; 4];
        for slot in 0..4 {
            lam[slot] = orient_with_point(&self.points, verts, slot, p) / vol;
        }
        if lam.iter().any(|&l| l < -1e-9) {
            return None;
        }
        let mut sum = 0.0;
        for l in &mut lam {
            *l = l.max(0.0);
            sum += *l;
        }
        if sum <= 0.0 {
            return None;
        }
        for l in &mut lam {
            *l /= sum;
        }
        Some((t, lam))
    }
}

struct Builder {
    q: Vec<[f64; 3]>,
    tets: Vec<[usize; 4]>,
    neighbors: Vec<[Option<usize>; 4]>,
    alive: Vec<bool>,
}

impl Builder {
    fn push_tet(&mut self, mut verts: [usize; 4], neighbors: [Option<usize>; 4]) -> usize {
        if orient(&self.q, verts) < 0.0 {
            verts.swap(2, 3);
        }
        self.tets.push(verts);
        self.neighbors.push(neighbors);
        self.alive.push(true);
        self.tets.len() - 1
    }

    /// Inserts point `pi`, returns a live tet id to seed the next walk.
    fn insert(&mut self, pi: usize, hint: usize) -> Result<usize> {
        let p = self.q[pi];
        let seed = self.locate_for_insert(p, hint)?;

        // grow the cavity of tets whose circumsphere contains p
        let mut bad = vec![false; self.tets.len()];
        let mut stack = vec![seed];
        let mut cavity = Vec::new();
        bad[seed] = true;
        while let Some(t) = stack.pop() {
            cavity.push(t);
            for slot in 0..4 {
                if let Some(nb) = self.neighbors[t][slot] {
                    if !bad[nb] && self.alive[nb] && self.in_sphere(nb, p) {
                        bad[nb] = true;
                        stack.push(nb);
                    }
                }
            }
        }

        // boundary faces: (face vertices, outside neighbor)
        let mut boundary: Vec<([usize; 3], Option<usize>)> = Vec::new();
        for &t in &cavity {
            let verts = self.tets[t];
            for slot in 0..4 {
                let nb = self.neighbors[t][slot];
                let outside = match nb {
                    Some(x) => {
                        if bad[x] {
                            continue;
                        }
                        Some(x)
                    }
                    None => None,
                };
                let mut face = [0usize; 3];
                let mut w = 0;
                for (s, &v) in verts.iter().enumerate() {
                    if s != slot {
                        face[w] = v;
                        w += 1;
                    }
                }
                boundary.push((face, outside));
            }
        }
        for &t in &cavity {
            self.alive[t] = false;
        }

        // re-triangulate: one tet per boundary face, wired to the outside
        // and to its siblings through the faces containing p
        let mut face_map: HashMap<[usize; 2], (usize, usize)> = HashMap::new();
        let mut created = Vec::with_capacity(boundary.len());
        for (face, outside) in &boundary {
            let t = self.push_tet([face[0], face[1], face[2], pi], [None; 4]);
            created.push(t);
            let verts = self.tets[t];
            // wire the face not containing p
            let pslot = verts.iter().position(|&v| v == pi).expect("pi in tet");
            self.neighbors[t][pslot] = *outside;
            if let Some(out) = *outside {
                let oslot = (0..4)
                    .find(|&s| shares_face(self.tets[out], s, verts, pslot))
                    .expect("outside neighbor face");
                self.neighbors[out][oslot] = Some(t);
            }
            // internal faces: the three containing p, keyed by their edge
            // opposite p (the two face vertices other than the slot vertex)
            for slot in 0..4 {
                if slot == pslot {
                    continue;
                }
                let mut edge: Vec<usize> = verts
                    .iter()
                    .enumerate()
                    .filter(|&(s, &v)| s != slot && v != pi)
                    .map(|(_, &v)| v)
                    .collect();
                edge.sort_unstable();
                let key = [edge[0], edge[1]];
                match face_map.remove(&key) {
                    Some((ot, oslot)) => {
                        self.neighbors[t][slot] = Some(ot);
                        self.neighbors[ot][oslot] = Some(t);
                    }
                    None => {
                        face_map.insert(key, (t, slot));
                    }
                }
            }
        }
        debug_assert!(face_map.is_empty(), "unpaired cavity faces");
        Ok(created[0])
    }

    /// Finds a live tet whose circumsphere contains `p`, walking from `hint`
    /// toward the containing tet first.
    fn locate_for_insert(&self, p: [f64; 3], hint: usize) -> Result<usize> {
        let mut t = hint;
        if !self.alive.get(t).copied().unwrap_or(false) {
            t = match self.alive.iter().position(|&a| a) {
                Some(x) => x,
                None => return Err(InterpError::Degenerate("no live tets".into())),
            };
        }
        let max_steps = 4 * self.tets.len() + 64;
        let mut steps = 0;
        'walk: loop {
            steps += 1;
            if steps > max_steps {
                break;
            }
            let verts = self.tets[t];
            let vol = orient(&self.q, verts);
            let eps = vol.abs() * 1e-12;
            for slot in 0..4 {
                let o = orient_with_point(&self.q, verts, slot, p);
                if o < -eps.max(1e-300) {
                    match self.neighbors[t][slot] {
                        Some(next) if self.alive[next] => {
                            t = next;
                            continue 'walk;
                        }
                        _ => break 'walk, // shouldn't happen inside the super-tet
                    }
                }
            }
            return Ok(t); // containing tet: circumsphere contains p
        }
        // exhaustive fallback
        (0..self.tets.len())
            .find(|&t| self.alive[t] && self.in_sphere(t, p))
            .ok_or_else(|| {
                InterpError::Degenerate("insertion point escaped the super-tetrahedron".into())
            })
    }

    /// Circumsphere test for live tet `t` against point `p`. Positive tets
    /// give a negative determinant for interior points; ties within the
    /// epsilon count as inside so co-spherical cavities stay closed.
    fn in_sphere(&self, t: usize, p: [f64; 3]) -> bool {
        let verts = self.tets[t];
        let mut m = [[0.0f64; 4]; 4];
        let mut scale = 0.0f64;
        for (r, &v) in verts.iter().enumerate() {
            let d = [
                self.q[v][0] - p[0],
                self.q[v][1] - p[1],
                self.q[v][2] - p[2],
            ];
            let n2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            m[r] = [d[0], d[1], d[2], n2];
            scale = scale.max(d[0].abs()).max(d[1].abs()).max(d[2].abs());
        }
        let det = det4(&m);
        let eps = EPS_REL * scale.powi(5).max(f64::MIN_POSITIVE);
        det <= eps
    }
}

/// True when face `slot_a` of `ta` equals face `slot_b` of `tb` as a set.
fn shares_face(ta: [usize; 4], slot_a: usize, tb: [usize; 4], slot_b: usize) -> bool {
    let mut fa: Vec<usize> = ta
        .iter()
        .enumerate()
        .filter(|&(s, _)| s != slot_a)
        .map(|(_, &v)| v)
        .collect();
    let mut fb: Vec<usize> = tb
        .iter()
        .enumerate()
        .filter(|&(s, _)| s != slot_b)
        .map(|(_, &v)| v)
        .collect();
    fa.sort_unstable();
    fb.sort_unstable();
    fa == fb
}

/// Signed volume ×6 of the tet: positive for right-handed vertex order.
fn orient(points: &[[f64; 3]], t: [usize; 4]) -> f64 {
    let a = points[t[0]];
    let b = points[t[1]];
    let c = points[t[2]];
    let d = points[t[3]];
    det3x3(
        [b[0] - a[0], b[1] - a[1], b[2] - a[2]],
        [c[0] - a[0], c[1] - a[1], c[2] - a[2]],
        [d[0] - a[0], d[1] - a[1], d[2] - a[2]],
    )
}

/// Orientation of tet `t` with the vertex in `slot` replaced by `p`.
fn orient_with_point(points: &[[f64; 3]], t: [usize; 4], slot: usize, p: [f64; 3]) -> f64 {
    let fetch = |s: usize| -> [f64; 3] {
        if s == slot {
            p
        } else {
            points[t[s]]
        }
    };
    let a = fetch(0);
    let b = fetch(1);
    let c = fetch(2);
    let d = fetch(3);
    det3x3(
        [b[0] - a[0], b[1] - a[1], b[2] - a[2]],
        [c[0] - a[0], c[1] - a[1], c[2] - a[2]],
        [d[0] - a[0], d[1] - a[1], d[2] - a[2]],
    )
}

fn det3x3(r0: [f64; 3], r1: [f64; 3], r2: [f64; 3]) -> f64 {
    r0[0] * (r1[1] * r2[2] - r1[2] * r2[1]) - r0[1] * (r1[0] * r2[2] - r1[2] * r2[0])
        + r0[2] * (r1[0] * r2[1] - r1[1] * r2[0])
}

fn det4(m: &[[f64; 4]; 4]) -> f64 {
    let mut det = 0.0;
    for c in 0..4 {
        let mut minor = [[0.0f64; 3]; 3];
        for r in 1..4 {
            let mut w = 0;
            for cc in 0..4 {
                if cc != c {
                    minor[r - 1][w] = m[r][cc];
                    w += 1;
                }
            }
        }
        let cof = det3x3(minor[0], minor[1], minor[2]);
        det += if c % 2 == 0 { m[0][c] * cof } else { -m[0][c] * cof };
    }
    det
}

/// Largest tet volume over a greedy vertex choice; used as a coplanarity
/// screen on normalized coordinates.
fn max_tet_volume(q: &[[f64; 3]]) -> f64 {
    let n = q.len();
    let mut best = 0.0f64;
    // greedy: farthest pair from point 0, then maximize area, then volume
    for i in 1..n.min(24) {
        for j in (i + 1)..n.min(24) {
            for k in (j + 1)..n.min(24) {
                best = best.max(orient(q, [0, i, j, k]).abs() / 6.0);
            }
        }
    }
    if best > 0.0 {
        return best;
    }
    // exhaustive fallback for adversarial orderings
    for i in 1..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let v = orient(q, [0, i, j, k]).abs() / 6.0;
                if v > 1e-12 {
                    return v;
                }
            }
        }
    }
    best
}

/// Rebuilds the neighbor table from shared faces.
fn adjacency_from_faces(tets: &[[usize; 4]]) -> Vec<[Option<usize>; 4]> {
    let mut neighbors = vec![[None; 4]; tets.len()];
    let mut map: HashMap<[usize; 3], (usize, usize)> = HashMap::new();
    for (t, verts) in tets.iter().enumerate() {
        for slot in 0..4 {
            let mut face: Vec<usize> = verts
                .iter()
                .enumerate()
                .filter(|&(s, _)| s != slot)
                .map(|(_, &v)| v)
                .collect();
            face.sort_unstable();
            let key = [face[0], face[1], face[2]];
            match map.remove(&key) {
                Some((ot, oslot)) => {
                    neighbors[t][slot] = Some(ot);
                    neighbors[ot][oslot] = Some(t);
                }
                None => {
                    map.insert(key, (t, slot));
                }
            }
        }
    }
    neighbors
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_points_make_one_tet() {
        let pts = [
            [0.0, 0.0, 0.0],
            [10.0, 0.0, 0.0],
            [0.0, 10.0, 0.0],
            [0.0, 0.0, 10.0],
        ];
        let t = delaunay_build(&pts).unwrap();
        assert_eq!(t.tets().len(), 1);
        assert!((t.total_volume() - 1000.0 / 6.0).abs() < 1e-9);
        assert_eq!(t.neighbors()[0], [None; 4]);
    }

    #[test]
    fn interior_point_splits_into_four_tets() {
        let pts = [
            [0.0, 0.0, 0.0],
            [12.0, 0.0, 0.0],
            [0.0, 12.0, 0.0],
            [0.0, 0.0, 12.0],
            [2.0, 2.0, 2.0], // interior of the hull of the first four
        ];
        let t = delaunay_build(&pts).unwrap();
        assert_eq!(t.tets().len(), 4);
        let hull_volume = 12.0f64 * 12.0 * 12.0 / 6.0;
        assert!((t.total_volume() - hull_volume).abs() < 1e-9);
        for tet in t.tets() {
            assert!(orient(t.points(), *tet) > 0.0);
        }
    }

    #[test]
    fn unit_cube_covers_volume_one_and_is_empty_sphere() {
        let mut pts = Vec::new();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    pts.push([i as f64, j as f64, k as f64]);
                }
            }
        }
        let t = delaunay_build(&pts).unwrap();
        assert!((t.total_volume() - 1.0).abs() < 1e-9);
        // brute-force empty-circumsphere check with the epsilon slack: no
        // point strictly inside any circumsphere
        for tet in t.tets() {
            let (c, r2) = circumsphere(t.points(), *tet);
            for (i, p) in t.points().iter().enumerate() {
                if tet.contains(&i) {
                    continue;
                }
                let d2 = (0..3).map(|a| (p[a] - c[a]).powi(2)).sum::<f64>();
                assert!(
                    d2 >= r2 * (1.0 - 1e-9),
                    "point {i} strictly inside circumsphere of {tet:?}"
                );
            }
        }
    }

    #[test]
    fn duplicates_are_removed_with_count() {
        let pts = [
            [0.0, 0.0, 0.0],
            [10.0, 0.0, 0.0],
            [0.0, 10.0, 0.0],
            [0.0, 0.0, 10.0],
            [10.0, 0.0, 0.0],
        ];
        let t = delaunay_build(&pts).unwrap();
        assert_eq!(t.duplicates_removed(), 1);
        assert_eq!(t.points().len(), 4);
        assert_eq!(t.kept_indices(), &[0, 1, 2, 3]);
    }

    #[test]
    fn coplanar_inputs_rejected() {
        let pts = [
            [0.0, 0.0, 5.0],
            [10.0, 0.0, 5.0],
            [0.0, 10.0, 5.0],
            [10.0, 10.0, 5.0],
            [3.0, 4.0, 5.0],
        ];
        assert!(delaunay_build(&pts).is_err());
        assert!(delaunay_build(&pts[..3]).is_err());
    }

    #[test]
    fn locate_finds_containing_tet_with_valid_barycentrics() {
        let pts = [
            [0.0, 0.0, 0.0],
            [10.0, 0.0, 0.0],
            [0.0, 10.0, 0.0],
            [0.0, 0.0, 10.0],
            [2.0, 2.0, 2.0],
            [5.0, 4.0, 1.0],
        ];
        let t = delaunay_build(&pts).unwrap();
        let (_, lam) = t.locate([1.0, 1.5, 2.0], 0).unwrap();
        let sum: f64 = lam.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(lam.iter().all(|&l| l >= 0.0));
        // outside the hull
        assert!(t.locate([11.0, 11.0, 11.0], 0).is_none());
    }

    fn circumsphere(points: &[[f64; 3]], tet: [usize; 4]) -> ([f64; 3], f64) {
        // solve |x - p_i|^2 = r^2; subtracting pairs gives a 3x3 system
        let p0 = points[tet[0]];
        let mut a = [[0.0f64; 3]; 3];
        let mut b = [0.0f64; 3];
        for r in 0..3 {
            let pr = points[tet[r + 1]];
            for c in 0..3 {
                a[r][c] = 2.0 * (pr[c] - p0[c]);
            }
            b[r] = (0..3).map(|c| pr[c] * pr[c] - p0[c] * p0[c]).sum();
        }
        let det = det3x3(a[0], a[1], a[2]);
        let mut center = [0.0f64; 3];
        for c in 0..3 {
            let mut m = a;
            for r in 0..3 {
                m[r][c] = b[r];
            }
            center[c] = det3x3(m[0], m[1], m[2]) / det;
        }
        let r2 = (0..3).map(|a| (center[a] - p0[a]).powi(2)).sum();
        (center, r2)
    }
}

use std::f64::consts::TAU;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub normal: Point,
}

/// Triangulated disk made of concentric rings around a central node.
///
/// Ring `j` carries `6 j` equally spaced nodes at radius `j R / N`, so all
/// elements have comparable size and the boundary nodes lie on the circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskMesh {
    pub radius: f64,
    pub rings: usize,
    pub nodes: Vec<Point>,
    /// Counter-clockwise node triples.
    pub triangles: Vec<[usize; 3]>,
    /// Boundary edges in counter-clockwise order.
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Longest edge.
    pub h: f64,
    /// Per triangle: area and gradients of the three barycentric coordinates.
    #[serde(skip)]
    geometry: Vec<(f64, [Point; 3])>,
    /// Unique undirected edges.
    #[serde(skip)]
    edges: Vec<[usize; 2]>,
}

fn ring_start(j: usize) -> usize {
    // 1 + 6 (1 + 2 + ... + (j - 1))
    if j == 0 {
        0
    } else {
        1 + 3 * j * (j - 1)
    }
}

impl DiskMesh {
    pub fn build(radius: f64, target_h: f64) -> Result<Self> {
        if !(radius > 0.0 && target_h > 0.0 && target_h < radius) {
            return Err(Error::invalid(format!("mesh needs 0 < h < R, got h = {target_h}, R = {radius}")));
        }
        let rings = (radius / target_h).ceil() as usize;
        let dr = radius / rings as f64;
        let mut nodes = vec![[0.0, 0.0]];
        for j in 1..=rings {
            let n = 6 * j;
            let r = if j == rings { radius } else { j as f64 * dr };
            for k in 0..n {
                let th = TAU * k as f64 / n as f64;
                nodes.push([r * th.cos(), r * th.sin()]);
            }
        }
        let mut triangles = Vec::with_capacity(6 * rings * rings);
        for k in 0..6 {
            triangles.push([0, 1 + k, 1 + (k + 1) % 6]);
        }
        for j in 1..rings {
            let (a, b) = (6 * j, 6 * (j + 1));
            let (sa, sb) = (ring_start(j), ring_start(j + 1));
            let inner = |i: usize| sa + i % a;
            let outer = |o: usize| sb + o % b;
            let (mut i, mut o) = (0, 0);
            while i < a || o < b {
                let next_in = (i + 1) as f64 / a as f64;
                let next_out = (o + 1) as f64 / b as f64;
                if o < b && (i == a || next_out <= next_in) {
                    triangles.push([inner(i), outer(o), outer(o + 1)]);
                    o += 1;
                } else {
                    triangles.push([inner(i), outer(o), inner(i + 1)]);
                    i += 1;
                }
            }
        }
        let mut h = 0.0_f64;
        for t in &mut triangles {
            if signed_area(&nodes, t) < 0.0 {
                t.swap(1, 2);
            }
            for e in 0..3 {
                h = h.max(geom::dist(nodes[t[e]], nodes[t[(e + 1) % 3]]));
            }
        }
        let sb = ring_start(rings);
        let nb = 6 * rings;
        let boundary_edges = (0..nb)
            .map(|k| {
                let (a, b) = (sb + k, sb + (k + 1) % nb);
                let mid = geom::scale(0.5, geom::add(nodes[a], nodes[b]));
                BoundaryEdge { a, b, normal: geom::scale(1.0 / geom::norm(mid), mid) }
            })
            .collect();
        let mut mesh = Self { radius, rings, nodes, triangles, boundary_edges, h, geometry: vec![], edges: vec![] };
        mesh.compute_geometry()?;
        Ok(mesh)
    }

    fn compute_geometry(&mut self) -> Result<()> {
        let floor = 1e-12 * self.h * self.h;
        self.geometry = self
            .triangles
            .iter()
            .map(|t| {
                let area = signed_area(&self.nodes, t);
                if area <= floor {
                    return Err(Error::Mesh(format!("degenerate triangle {t:?}")));
                }
                let p = [self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]];
                let mut grads = [[0.0; 2]; 3];
                for k in 0..3 {
                    let (b, c) = (p[(k + 1) % 3], p[(k + 2) % 3]);
                    // Gradient of the hat function: rotated opposite edge over twice the area.
                    grads[k] = [(b[1] - c[1]) / (2.0 * area), (c[0] - b[0]) / (2.0 * area)];
                }
                Ok((area, grads))
            })
            .collect::<Result<_>>()?;
        let mut edges: Vec<[usize; 2]> = self
            .triangles
            .iter()
            .flat_map(|t| (0..3).map(move |e| {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                [a.min(b), a.max(b)]
            }))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        self.edges = edges;
        Ok(())
    }

    /// Restores derived data after deserialisation.
    pub fn rebuild_geometry(&mut self) -> Result<()> {
        self.compute_geometry()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn area(&self, t: usize) -> f64 {
        self.geometry[t].0
    }

    pub fn hat_gradients(&self, t: usize) -> &[Point; 3] {
        &self.geometry[t].1
    }

    pub fn total_area(&self) -> f64 {
        self.geometry.iter().map(|g| g.0).sum()
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t];
        let s = geom::add(geom::add(self.nodes[a], self.nodes[b]), self.nodes[c]);
        geom::scale(1.0 / 3.0, s)
    }

    /// `int phi_i dx` for each hat function.
    pub fn node_masses(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_nodes()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &i in tri {
                m[i] += self.area(t) / 3.0;
            }
        }
        m
    }

    /// Indices of the boundary nodes in counter-clockwise order.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        self.boundary_edges.iter().map(|e| e.a).collect()
    }

    /// Angle of a boundary node in `[0, 2 pi)`.
    pub fn boundary_angle(&self, k: usize) -> f64 {
        TAU * k as f64 / (6 * self.rings) as f64
    }

    /// Gradient of a nodal field on triangle `t`.
    pub fn gradient(&self, values: &[f64], t: usize) -> Point {
        let g = self.hat_gradients(t);
        let tri = self.triangles[t];
        let mut d = [0.0, 0.0];
        for k in 0..3 {
            d = geom::add(d, geom::scale(values[tri[k]], g[k]));
        }
        d
    }

    /// Parameters in `(t0, t1)` where `a + t (b - a)` crosses a mesh edge,
    /// sorted and with `t0`, `t1` added at the ends.
    pub fn segment_breakpoints(&self, a: Point, b: Point, t0: f64, t1: f64) -> Vec<f64> {
        let d = geom::sub(b, a);
        let (lo, hi) = (geom::lerp(a, b, t0), geom::lerp(a, b, t1));
        let bb_min = [lo[0].min(hi[0]), lo[1].min(hi[1])];
        let bb_max = [lo[0].max(hi[0]), lo[1].max(hi[1])];
        let mut ts = vec![t0, t1];
        if t1 > t0 && geom::norm2(d) > 0.0 {
            for &[i, j] in &self.edges {
                let (p, q) = (self.nodes[i], self.nodes[j]);
                if p[0].max(q[0]) < bb_min[0] || p[0].min(q[0]) > bb_max[0] || p[1].max(q[1]) < bb_min[1] || p[1].min(q[1]) > bb_max[1] {
                    continue;
                }
                let e = geom::sub(q, p);
                let den = d[0] * e[1] - d[1] * e[0];
                if den == 0.0 {
                    continue;
                }
                let w = geom::sub(p, a);
                let t = (w[0] * e[1] - w[1] * e[0]) / den;
                let s = (w[0] * d[1] - w[1] * d[0]) / den;
                if t > t0 && t < t1 && (0.0..=1.0).contains(&s) {
                    ts.push(t);
                }
            }
        }
        ts.sort_by(f64::total_cmp);
        ts.dedup_by(|x, y| (*x - *y).abs() <= 1e-14);
        ts
    }

    /// Triangle containing `x`, if any.
    pub fn locate(&self, x: Point) -> Option<usize> {
        (0..self.triangles.len()).find(|&t| {
            let b = self.barycentric(t, x);
            b.iter().all(|&l| l >= -1e-12)
        })
    }

    /// Triangle whose centroid is nearest to `x`.
    pub fn nearest(&self, x: Point) -> usize {
        (0..self.triangles.len())
            .min_by(|&a, &b| geom::dist(self.centroid(a), x).total_cmp(&geom::dist(self.centroid(b), x)))
            .unwrap_or(0)
    }

    pub fn barycentric(&self, t: usize, x: Point) -> [f64; 3] {
        let a = self.nodes[self.triangles[t][0]];
        let g = self.hat_gradients(t);
        let d = geom::sub(x, a);
        let l1 = geom::dot(g[1], d);
        let l2 = geom::dot(g[2], d);
        [1.0 - l1 - l2, l1, l2]
    }

    /// Writes `node_id,x,y` rows.
    pub fn write_nodes_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["node_id", "x", "y"]).map_err(|e| Error::Serde(e.to_string()))?;
        for (k, p) in self.nodes.iter().enumerate() {
            wr.write_record([k.to_string(), p[0].to_string(), p[1].to_string()]).map_err(|e| Error::Serde(e.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Writes `triangle_id,a,b,c` rows.
    pub fn write_triangles_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["triangle_id", "a", "b", "c"]).map_err(|e| Error::Serde(e.to_string()))?;
        for (k, t) in self.triangles.iter().enumerate() {
            wr.write_record([k.to_string(), t[0].to_string(), t[1].to_string(), t[2].to_string()])
                .map_err(|e| Error::Serde(e.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn signed_area(nodes: &[Point], t: &[usize; 3]) -> f64 {
    let (a, b, c) = (nodes[t[0]], nodes[t[1]], nodes[t[2]]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

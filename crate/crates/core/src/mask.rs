//! Binary masks: dense grid, run-length wire form, 8-connected components and
//! outer-contour tracing.
//!
//! RLE convention: row-major, counts alternate background/foreground starting
//! with background, so a mask whose first pixel is set starts with a `0`.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point2, Polygon};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BitMask {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!("mask dimensions must be >= 1, got {width}x{height}")));
        }
        Ok(Self { width, height, bits: vec![false; width as usize * height as usize] })
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        let mut m = Self::new(width, height)?;
        if bits.len() != m.bits.len() {
            return Err(Error::invalid(format!(
                "expected {} bits for a {width}x{height} mask, got {}",
                m.bits.len(),
                bits.len()
            )));
        }
        m.bits = bits;
        Ok(m)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    fn idx(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[self.idx(x, y)]
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        let i = self.idx(x, y);
        self.bits[i] = v;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Run-length encoded mask, self-describing with its dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    pub width: u32,
    pub height: u32,
    pub counts: Vec<u32>,
}

impl RleMask {
    /// Checks dimensions and that the runs cover exactly `width * height` pixels.
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid(format!(
                "mask dimensions must be >= 1, got {}x{}",
                self.width, self.height
            )));
        }
        let total: u64 = self.counts.iter().map(|&c| u64::from(c)).sum();
        let expected = u64::from(self.width) * u64::from(self.height);
        if total != expected {
            return Err(Error::invalid(format!(
                "malformed RLE: runs sum to {total}, expected {expected}"
            )));
        }
        Ok(())
    }

    pub fn foreground_count(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).map(|&c| u64::from(c)).sum()
    }

    /// Canonical form of the same mask: zero-length runs merged away.
    pub fn canonical(&self) -> Result<RleMask> {
        Ok(rle_encode(&rle_decode(self)?))
    }
}

pub fn rle_encode(m: &BitMask) -> RleMask {
    let mut counts = Vec::new();
    let mut current = false;
    let mut run: u32 = 0;
    for &b in &m.bits {
        if b == current {
            run += 1;
        } else {
            counts.push(run);
            current = b;
            run = 1;
        }
    }
    counts.push(run);
    RleMask { width: m.width, height: m.height, counts }
}

pub fn rle_decode(r: &RleMask) -> Result<BitMask> {
    r.validate()?;
    let mut bits = Vec::with_capacity(r.width as usize * r.height as usize);
    for (k, &c) in r.counts.iter().enumerate() {
        bits.extend(std::iter::repeat_n(k % 2 == 1, c as usize));
    }
    BitMask::from_bits(r.width, r.height, bits)
}

/// Dense component labels, 0 for background and `1..=component_count` otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    width: u32,
    height: u32,
    labels: Vec<u32>,
    component_count: u32,
}

impl ComponentLabeling {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn component_count(&self) -> u32 {
        self.component_count
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label_at(&self, x: u32, y: u32) -> u32 {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    fn check_label(&self, label: u32) -> Result<()> {
        if label == 0 || label > self.component_count {
            return Err(Error::not_found(format!(
                "component label {label} (labeling has {} components)",
                self.component_count
            )));
        }
        Ok(())
    }

    /// Pixel coordinates of one component in raster order.
    pub fn pixels(&self, label: u32) -> Result<Vec<(u32, u32)>> {
        self.check_label(label)?;
        let w = self.width as usize;
        Ok(self
            .labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .map(|(i, _)| ((i % w) as u32, (i / w) as u32))
            .collect())
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        parent[x as usize] = parent[parent[x as usize] as usize];
        x = parent[x as usize];
    }
    x
}

/// Two-pass union-find labeling with 8-connectivity. Labels are numbered in
/// raster order of each component's first pixel.
pub fn connected_components(m: &BitMask) -> ComponentLabeling {
    let (w, h) = (m.width, m.height);
    let mut prov = vec![0u32; m.bits.len()];
    let mut parent: Vec<u32> = vec![0];
    for y in 0..h {
        for x in 0..w {
            if !m.get(x, y) {
                continue;
            }
            let mut neighbors = [0u32; 4];
            let mut k = 0;
            let mut look = |nx: i64, ny: i64| {
                if nx >= 0 && ny >= 0 && nx < i64::from(w) {
                    let l = prov[ny as usize * w as usize + nx as usize];
                    if l != 0 {
                        neighbors[k] = l;
                        k += 1;
                    }
                }
            };
            let (xi, yi) = (i64::from(x), i64::from(y));
            look(xi - 1, yi);
            look(xi - 1, yi - 1);
            look(xi, yi - 1);
            look(xi + 1, yi - 1);
            let idx = m.idx(x, y);
            if k == 0 {
                let l = parent.len() as u32;
                parent.push(l);
                prov[idx] = l;
            } else {
                let root = neighbors[..k].iter().map(|&l| find(&mut parent, l)).min().unwrap();
                for &l in &neighbors[..k] {
                    let r = find(&mut parent, l);
                    parent[r as usize] = root;
                }
                prov[idx] = root;
            }
        }
    }
    let mut dense = vec![0u32; parent.len()];
    let mut next = 0;
    let mut labels = vec![0u32; prov.len()];
    for (i, &l) in prov.iter().enumerate() {
        if l == 0 {
            continue;
        }
        let r = find(&mut parent, l) as usize;
        if dense[r] == 0 {
            next += 1;
            dense[r] = next;
        }
        labels[i] = dense[r];
    }
    ComponentLabeling { width: w, height: h, labels, component_count: next }
}

/// The four corners of every pixel in the component, deduplicated and sorted
/// by `(y, x)`.
pub fn component_corner_points(labeling: &ComponentLabeling, label: u32) -> Result<Vec<Point2>> {
    let mut corners: Vec<(u32, u32)> = labeling
        .pixels(label)?
        .into_iter()
        .flat_map(|(x, y)| [(y, x), (y, x + 1), (y + 1, x), (y + 1, x + 1)])
        .collect();
    corners.sort_unstable();
    corners.dedup();
    Ok(corners.into_iter().map(|(y, x)| Point2::new(f64::from(x), f64::from(y))).collect())
}

const PINCH_CUT: f64 = 0.25;

/// Outer boundary of a component along pixel edges, as a counter-clockwise
/// polygon. Holes are filled. Where the region touches itself only at a
/// corner (a diagonal 8-connection), the vertex is chamfered by a quarter
/// pixel on each pass so the polygon stays simple; no pixel center moves
/// in or out.
pub fn trace_contour(labeling: &ComponentLabeling, label: u32) -> Result<Polygon> {
    let pixels = labeling.pixels(label)?;
    let filled = filled_region(&pixels);

    // Directed unit edges with the region on the left.
    type V = (i64, i64);
    let mut out_edges: BTreeMap<V, Vec<V>> = BTreeMap::new();
    for &(x, y) in &filled.cells {
        let (x, y) = (i64::from(x), i64::from(y));
        let has = |dx: i64, dy: i64| filled.contains(x + dx, y + dy);
        if !has(0, -1) {
            out_edges.entry((x, y)).or_default().push((x + 1, y));
        }
        if !has(1, 0) {
            out_edges.entry((x + 1, y)).or_default().push((x + 1, y + 1));
        }
        if !has(0, 1) {
            out_edges.entry((x + 1, y + 1)).or_default().push((x, y + 1));
        }
        if !has(-1, 0) {
            out_edges.entry((x, y + 1)).or_default().push((x, y));
        }
    }
    let pinch: std::collections::BTreeSet<V> =
        out_edges.iter().filter(|(_, e)| e.len() > 1).map(|(v, _)| *v).collect();

    let (&start, first) = out_edges.iter().next().expect("non-empty component has edges");
    let first = first[0];
    let total_edges: usize = out_edges.values().map(Vec::len).sum();
    let mut path: Vec<(V, V)> = Vec::with_capacity(total_edges);
    let mut used = std::collections::BTreeSet::new();
    let (mut from, mut to) = (start, first);
    loop {
        used.insert((from, to));
        path.push((from, to));
        let d_in = (to.0 - from.0, to.1 - from.1);
        let candidates: Vec<V> = out_edges[&to]
            .iter()
            .copied()
            .filter(|&n| !used.contains(&(to, n)))
            .collect();
        let next = match candidates.len() {
            0 => break,
            1 => candidates[0],
            // Prefer the right turn so diagonal neighbors stay joined.
            _ => *candidates
                .iter()
                .find(|&&n| {
                    let d_out = (n.0 - to.0, n.1 - to.1);
                    d_in.0 * d_out.1 - d_in.1 * d_out.0 < 0
                })
                .unwrap_or(&candidates[0]),
        };
        from = to;
        to = next;
    }
    debug_assert_eq!(path.len(), total_edges, "outer boundary of a hole-free region is one cycle");

    let mut vertices = Vec::new();
    let m = path.len();
    for k in 0..m {
        let (prev_from, v) = path[(k + m - 1) % m];
        let (_, next_to) = path[k];
        let d_in = (v.0 - prev_from.0, v.1 - prev_from.1);
        let d_out = (next_to.0 - v.0, next_to.1 - v.1);
        let vp = Point2::new(v.0 as f64, v.1 as f64);
        if pinch.contains(&v) {
            vertices.push(Point2::new(vp.x - PINCH_CUT * d_in.0 as f64, vp.y - PINCH_CUT * d_in.1 as f64));
            vertices.push(Point2::new(vp.x + PINCH_CUT * d_out.0 as f64, vp.y + PINCH_CUT * d_out.1 as f64));
        } else if d_in != d_out {
            vertices.push(vp);
        }
    }
    Polygon::new(vertices)
}

/// Component pixels plus any background enclosed by them (4-connected
/// background that cannot reach the outside).
struct Filled {
    x0: i64,
    y0: i64,
    w: i64,
    h: i64,
    grid: Vec<bool>,
    cells: Vec<(u32, u32)>,
}

impl Filled {
    fn contains(&self, x: i64, y: i64) -> bool {
        let (lx, ly) = (x - self.x0, y - self.y0);
        lx >= 0 && ly >= 0 && lx < self.w && ly < self.h && self.grid[(ly * self.w + lx) as usize]
    }
}

fn filled_region(pixels: &[(u32, u32)]) -> Filled {
    let min_x = pixels.iter().map(|p| p.0).min().unwrap_or(0);
    let max_x = pixels.iter().map(|p| p.0).max().unwrap_or(0);
    let min_y = pixels.iter().map(|p| p.1).min().unwrap_or(0);
    let max_y = pixels.iter().map(|p| p.1).max().unwrap_or(0);
    // One pixel of padding so the outside is connected around the blob.
    let (x0, y0) = (i64::from(min_x) - 1, i64::from(min_y) - 1);
    let (w, h) = (i64::from(max_x - min_x) + 3, i64::from(max_y - min_y) + 3);
    let mut fg = vec![false; (w * h) as usize];
    for &(x, y) in pixels {
        fg[((i64::from(y) - y0) * w + (i64::from(x) - x0)) as usize] = true;
    }
    let mut outside = vec![false; fg.len()];
    let mut queue = VecDeque::from([(0i64, 0i64)]);
    outside[0] = true;
    while let Some((x, y)) = queue.pop_front() {
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= w || ny >= h {
                continue;
            }
            let i = (ny * w + nx) as usize;
            if !fg[i] && !outside[i] {
                outside[i] = true;
                queue.push_back((nx, ny));
            }
        }
    }
    let grid: Vec<bool> = outside.iter().map(|&o| !o).collect();
    let cells = grid
        .iter()
        .enumerate()
        .filter(|(_, &g)| g)
        .map(|(i, _)| (((i as i64 % w) + x0) as u32, ((i as i64 / w) + y0) as u32))
        .collect();
    Filled { x0, y0, w, h, grid, cells }
}

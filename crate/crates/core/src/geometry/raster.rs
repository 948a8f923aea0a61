use super::{orient, Polygon};
use crate::error::{Error, Result};
use crate::mask::{BitMask, RleMask};

/// Half-open horizontal run `[start, end)` of set pixels.
pub type Span = (u32, u32);

/// A sparse binary raster: per-row sorted, disjoint, non-adjacent spans.
///
/// This is the working representation for IoU and union matching; a dense
/// [`BitMask`] of a native 5456x3632 frame is far larger than the handful of
/// rows a damage region occupies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanMask {
    width: u32,
    height: u32,
    rows: Vec<(u32, Vec<Span>)>,
}

impl SpanMask {
    pub fn empty(width: u32, height: u32) -> Self {
        Self { width, height, rows: Vec::new() }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn rows(&self) -> impl Iterator<Item = (u32, &[Span])> {
        self.rows.iter().map(|(y, s)| (*y, s.as_slice()))
    }

    pub fn area(&self) -> u64 {
        self.rows.iter().flat_map(|(_, s)| s).map(|&(a, b)| u64::from(b - a)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rasterizes with the pixel-center rule: pixel `(i, j)` is set iff
    /// `(i + 0.5, j + 0.5)` is inside by even-odd, boundary counting as inside.
    pub fn from_polygon(p: &Polygon, width: u32, height: u32) -> Result<Self> {
        if !p.within_frame(width, height) {
            return Err(Error::invalid(format!(
                "polygon exceeds the {width}x{height} frame"
            )));
        }
        let v = p.vertices();
        let n = v.len();
        let bbox = p.aabb();
        let row_lo = (bbox.y_min - 0.5).ceil().max(0.0) as u32;
        let row_hi = ((bbox.y_max - 0.5).floor() as i64).min(i64::from(height) - 1);
        let mut rows = Vec::new();
        if row_hi < 0 {
            return Ok(Self::empty(width, height));
        }
        let mut xs: Vec<f64> = Vec::new();
        for j in row_lo..=(row_hi as u32) {
            let yc = f64::from(j) + 0.5;
            xs.clear();
            let mut spans: Vec<Span> = Vec::new();
            for i in 0..n {
                let (a, b) = (v[i], v[(i + 1) % n]);
                if (a.y > yc) != (b.y > yc) {
                    xs.push(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
                }
                // Centers lying exactly on an edge.
                if a.y == yc && b.y == yc {
                    push_center_range(&mut spans, a.x.min(b.x), a.x.max(b.x), width);
                } else if yc >= a.y.min(b.y) && yc <= a.y.max(b.y) {
                    let x = if a.y == yc {
                        a.x
                    } else if b.y == yc {
                        b.x
                    } else {
                        a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y)
                    };
                    let ic = (x - 0.5).round();
                    if ic >= 0.0 && ic < f64::from(width) {
                        let c = super::Point2::new(ic + 0.5, yc);
                        if orient(a, b, c) == 0.0 {
                            spans.push((ic as u32, ic as u32 + 1));
                        }
                    }
                }
            }
            xs.sort_by(f64::total_cmp);
            for pair in xs.chunks_exact(2) {
                push_center_range(&mut spans, pair[0], pair[1], width);
            }
            if !spans.is_empty() {
                rows.push((j, normalize_spans(spans)));
            }
        }
        Ok(Self { width, height, rows })
    }

    pub fn from_bitmask(m: &BitMask) -> Self {
        let (w, h) = (m.width(), m.height());
        let mut rows = Vec::new();
        for y in 0..h {
            let mut spans = Vec::new();
            let mut x = 0;
            while x < w {
                if m.get(x, y) {
                    let start = x;
                    while x < w && m.get(x, y) {
                        x += 1;
                    }
                    spans.push((start, x));
                } else {
                    x += 1;
                }
            }
            if !spans.is_empty() {
                rows.push((y, spans));
            }
        }
        Self { width: w, height: h, rows }
    }

    pub fn to_bitmask(&self) -> BitMask {
        let mut m = BitMask::new(self.width, self.height).expect("span mask has positive dims");
        for (y, spans) in &self.rows {
            for &(a, b) in spans {
                for x in a..b {
                    m.set(x, *y, true);
                }
            }
        }
        m
    }

    /// Decodes run-length counts straight into spans without a dense grid.
    pub fn from_rle(r: &RleMask) -> Result<Self> {
        r.validate()?;
        let w = u64::from(r.width);
        let mut rows: Vec<(u32, Vec<Span>)> = Vec::new();
        let mut pos: u64 = 0;
        for (k, &count) in r.counts.iter().enumerate() {
            let count = u64::from(count);
            if k % 2 == 1 && count > 0 {
                let (mut start, end) = (pos, pos + count);
                while start < end {
                    let y = (start / w) as u32;
                    let row_end = (u64::from(y) + 1) * w;
                    let stop = end.min(row_end);
                    let span = ((start % w) as u32, (stop - u64::from(y) * w) as u32);
                    match rows.last_mut() {
                        Some((ly, spans)) if *ly == y => spans.push(span),
                        _ => rows.push((y, vec![span])),
                    }
                    start = stop;
                }
            }
            pos += count;
        }
        for (_, spans) in rows.iter_mut() {
            *spans = normalize_spans(std::mem::take(spans));
        }
        Ok(Self { width: r.width, height: r.height, rows })
    }

    /// Canonical background-first run-length encoding.
    pub fn to_rle(&self) -> RleMask {
        let w = u64::from(self.width);
        let total = w * u64::from(self.height);
        let mut counts: Vec<u32> = Vec::new();
        let mut pos: u64 = 0;
        let mut fg_run: u64 = 0;
        for (y, spans) in &self.rows {
            for &(a, b) in spans {
                let start = u64::from(*y) * w + u64::from(a);
                let end = u64::from(*y) * w + u64::from(b);
                if start == pos && fg_run > 0 {
                    fg_run += end - start;
                } else {
                    if fg_run > 0 {
                        counts.push(fg_run as u32);
                    }
                    counts.push((start - pos) as u32);
                    fg_run = end - start;
                }
                pos = end;
            }
        }
        if fg_run > 0 {
            counts.push(fg_run as u32);
        }
        if pos < total || counts.is_empty() {
            counts.push((total - pos) as u32);
        }
        RleMask { width: self.width, height: self.height, counts }
    }

    pub fn union(&self, other: &SpanMask) -> SpanMask {
        let mut rows = Vec::with_capacity(self.rows.len() + other.rows.len());
        let (mut i, mut j) = (0, 0);
        while i < self.rows.len() || j < other.rows.len() {
            let take = match (self.rows.get(i), other.rows.get(j)) {
                (Some(a), Some(b)) => a.0.cmp(&b.0),
                (Some(_), None) => std::cmp::Ordering::Less,
                _ => std::cmp::Ordering::Greater,
            };
            match take {
                std::cmp::Ordering::Less => {
                    rows.push(self.rows[i].clone());
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    rows.push(other.rows[j].clone());
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let mut merged = self.rows[i].1.clone();
                    merged.extend_from_slice(&other.rows[j].1);
                    rows.push((self.rows[i].0, normalize_spans(merged)));
                    i += 1;
                    j += 1;
                }
            }
        }
        SpanMask { width: self.width.max(other.width), height: self.height.max(other.height), rows }
    }

    pub fn intersection_area(&self, other: &SpanMask) -> u64 {
        let (mut i, mut j) = (0, 0);
        let mut total = 0;
        while i < self.rows.len() && j < other.rows.len() {
            let (ya, sa) = &self.rows[i];
            let (yb, sb) = &other.rows[j];
            match ya.cmp(yb) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    total += row_overlap(sa, sb);
                    i += 1;
                    j += 1;
                }
            }
        }
        total
    }

    pub fn intersects(&self, other: &SpanMask) -> bool {
        self.intersection_area(other) > 0
    }

    /// Spans of row `y`, empty when the row has no set pixels.
    pub fn row(&self, y: u32) -> &[Span] {
        match self.rows.binary_search_by_key(&y, |(ry, _)| *ry) {
            Ok(k) => &self.rows[k].1,
            Err(_) => &[],
        }
    }

    pub fn contains_pixel(&self, x: u32, y: u32) -> bool {
        self.row(y).iter().any(|&(a, b)| x >= a && x < b)
    }
}

fn row_overlap(a: &[Span], b: &[Span]) -> u64 {
    let (mut i, mut j) = (0, 0);
    let mut total = 0;
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if hi > lo {
            total += u64::from(hi - lo);
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}

/// Adds pixels whose centers lie in the closed interval `[x0, x1]`.
fn push_center_range(spans: &mut Vec<Span>, x0: f64, x1: f64, width: u32) {
    let lo = (x0 - 0.5).ceil().max(0.0);
    let hi = (x1 - 0.5).floor().min(f64::from(width) - 1.0);
    if hi >= lo {
        spans.push((lo as u32, hi as u32 + 1));
    }
}

fn normalize_spans(mut spans: Vec<Span>) -> Vec<Span> {
    spans.sort_unstable();
    let mut out: Vec<Span> = Vec::with_capacity(spans.len());
    for (a, b) in spans {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// Pixel-center rasterization of `p` into a dense mask.
pub fn rasterize(p: &Polygon, width: u32, height: u32) -> Result<BitMask> {
    if width == 0 || height == 0 {
        return Err(Error::invalid("raster frame must be at least 1x1"));
    }
    Ok(SpanMask::from_polygon(p, width, height)?.to_bitmask())
}

/// Raster IoU on the `width x height` pixel grid; 0 when both are empty.
pub fn iou(a: &Polygon, b: &Polygon, width: u32, height: u32) -> Result<f64> {
    let ma = SpanMask::from_polygon(a, width, height)?;
    let mb = SpanMask::from_polygon(b, width, height)?;
    Ok(mask_iou(&ma, &mb))
}

pub(crate) fn mask_iou(a: &SpanMask, b: &SpanMask) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

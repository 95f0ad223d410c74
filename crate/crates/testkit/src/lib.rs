//! Straightforward reference implementations used as test oracles.
//!
//! Nothing here depends on the library under test; inputs and outputs are
//! plain slices so the two code paths stay independent.

use std::collections::BTreeMap;

/// Pixel of a point under the spherical projection, computed from scratch.
/// `None` for points closer than `min_range` or outside the vertical field of
/// view.
pub fn pixel_of(
    p: [f32; 3],
    width: usize,
    height: usize,
    fov_up_deg: f64,
    fov_down_deg: f64,
    min_range: f64,
) -> Option<(usize, usize)> {
    let (x, y, z) = (p[0] as f64, p[1] as f64, p[2] as f64);
    let r = (x * x + y * y + z * z).sqrt();
    if r < min_range || r == 0.0 {
        return None;
    }
    let up = fov_up_deg.to_radians();
    let down = fov_down_deg.to_radians();
    let pitch = (z / r).clamp(-1.0, 1.0).asin();
    if pitch < down || pitch > up {
        return None;
    }
    let yaw = y.atan2(x);
    let uf = 0.5 * (1.0 - yaw / std::f64::consts::PI) * width as f64;
    let vf = (1.0 - (pitch - down) / (up - down)) * height as f64;
    let clamp = |f: f64, n: usize| (f.floor().max(0.0) as usize).min(n - 1);
    Some((clamp(uf, width), clamp(vf, height)))
}

pub fn range_f32(p: [f32; 3]) -> f32 {
    let (x, y, z) = (p[0] as f64, p[1] as f64, p[2] as f64);
    (x * x + y * y + z * z).sqrt() as f32
}

/// Every point index that lands on each pixel, grouped per flat pixel index.
pub fn project_groups(
    points: &[[f32; 3]],
    width: usize,
    height: usize,
    fov_up_deg: f64,
    fov_down_deg: f64,
    min_range: f64,
) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); width * height];
    for (i, p) in points.iter().enumerate() {
        if let Some((u, v)) = pixel_of(*p, width, height, fov_up_deg, fov_down_deg, min_range) {
            groups[u + v * width].push(i);
        }
    }
    groups
}

/// Winning point per pixel: smallest range, then smallest index.
pub fn project_winners(
    points: &[[f32; 3]],
    width: usize,
    height: usize,
    fov_up_deg: f64,
    fov_down_deg: f64,
    min_range: f64,
) -> Vec<Option<usize>> {
    project_groups(points, width, height, fov_up_deg, fov_down_deg, min_range)
        .into_iter()
        .map(|g| {
            let mut best: Option<usize> = None;
            for i in g {
                best = match best {
                    None => Some(i),
                    Some(b) => {
                        let (rb, ri) = (range_f32(points[b]), range_f32(points[i]));
                        if ri < rb || (ri == rb && i < b) {
                            Some(i)
                        } else {
                            Some(b)
                        }
                    }
                };
            }
            best
        })
        .collect()
}

/// Reference scatter: buckets sources by target, sorts each bucket by
/// `(range, source)` and copies the first source's feature vector.
pub fn scatter(
    entries: &[Option<u32>],
    ranges: &[f32],
    source_valid: &[bool],
    data: &[f32],
    channels: usize,
) -> (Vec<f32>, Vec<bool>) {
    let n = entries.len();
    let mut buckets: BTreeMap<usize, Vec<(f32, usize)>> = BTreeMap::new();
    for src in 0..n {
        if let (Some(t), true) = (entries[src], source_valid[src]) {
            buckets
                .entry(t as usize)
                .or_default()
                .push((ranges[src], src));
        }
    }
    let mut out = vec![0.0f32; n * channels];
    let mut valid = vec![false; n];
    for (t, mut bucket) in buckets {
        bucket.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let src = bucket[0].1;
        out[t * channels..(t + 1) * channels]
            .copy_from_slice(&data[src * channels..(src + 1) * channels]);
        valid[t] = true;
    }
    (out, valid)
}

/// Input of the reference kNN vote. `pixel_label[q]` is `None` for pixels
/// that cannot vote (invalid or without a source point).
pub struct KnnFixture<'a> {
    pub width: usize,
    pub height: usize,
    pub pixel_range: &'a [f32],
    pub pixel_label: &'a [Option<u8>],
    /// Window center of each point, `None` to leave the point untouched.
    pub centers: &'a [Option<(i64, i64)>],
    pub point_range: &'a [f32],
    pub labels: &'a [u8],
}

/// Reference kNN vote: scans the window with explicit bounds checks and
/// extracts the `k` best candidates one at a time.
pub fn knn_vote(
    fx: &KnnFixture,
    k: usize,
    window: usize,
    cutoff: f32,
    inverse_gap: bool,
) -> Vec<u8> {
    let half = (window / 2) as i64;
    let mut out = fx.labels.to_vec();
    for (i, slot) in out.iter_mut().enumerate() {
        let Some((cu, cv)) = fx.centers[i] else {
            continue;
        };
        let mut cands: Vec<(f32, usize, u8)> = Vec::new();
        for dv in -half..=half {
            for du in -half..=half {
                let (u, v) = (cu + du, cv + dv);
                if u < 0 || v < 0 || u >= fx.width as i64 || v >= fx.height as i64 {
                    continue;
                }
                let q = u as usize + v as usize * fx.width;
                let Some(label) = fx.pixel_label[q] else {
                    continue;
                };
                let gap = (fx.pixel_range[q] - fx.point_range[i]).abs();
                if gap <= cutoff {
                    cands.push((gap, q, label));
                }
            }
        }
        if cands.is_empty() {
            continue;
        }
        let mut chosen = Vec::new();
        for _ in 0..k.min(cands.len()) {
            let mut best = 0;
            for j in 1..cands.len() {
                let (a, b) = (cands[j], cands[best]);
                if a.0 < b.0 || (a.0 == b.0 && a.1 < b.1) {
                    best = j;
                }
            }
            chosen.push(cands.remove(best));
        }
        let mut score = [0.0f64; 2];
        for (gap, _, label) in chosen {
            let w = if inverse_gap {
                1.0 / (gap + 1e-3) as f64
            } else {
                1.0
            };
            score[(label != 0) as usize] += w;
        }
        if score[1] > score[0] {
            *slot = 1;
        } else if score[0] > score[1] {
            *slot = 0;
        }
    }
    out
}

/// Reference ray cast against a bounded horizontal plane and axis-aligned
/// boxes. Boxes are intersected face by face. Returns the hit distance and
/// the surface index (0 = ground, 1.. = boxes in order).
pub fn cast_ray(
    origin: [f64; 3],
    dir: [f64; 3],
    ground: Option<(f64, f64)>,
    boxes: &[([f64; 3], [f64; 3])],
) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    let mut offer = |t: f64, s: usize| {
        if t >= 1e-6 && best.is_none_or(|(bt, _)| t < bt) {
            best = Some((t, s));
        }
    };
    if let Some((h, half)) = ground {
        if dir[2] != 0.0 {
            let t = (h - origin[2]) / dir[2];
            let x = origin[0] + t * dir[0];
            let y = origin[1] + t * dir[1];
            if x.abs() <= half && y.abs() <= half {
                offer(t, 0);
            }
        }
    }
    for (bi, (lo, hi)) in boxes.iter().enumerate() {
        for axis in 0..3 {
            if dir[axis] == 0.0 {
                continue;
            }
            for plane in [lo[axis], hi[axis]] {
                let t = (plane - origin[axis]) / dir[axis];
                let inside = (0..3).filter(|&a| a != axis).all(|a| {
                    let c = origin[a] + t * dir[a];
                    c >= lo[a] - 1e-9 && c <= hi[a] + 1e-9
                });
                if inside {
                    offer(t, bi + 1);
                }
            }
        }
    }
    best
}

//! Random scene generators and brute-force reference implementations shared
//! by the integration tests. Nothing here calls into the library's
//! algorithms; only its data types are used.

#![allow(dead_code)]

use std::collections::BTreeSet;

use cisca_core::grid::{Grid, LabelMap, Mask};
use rand::Rng;

pub fn paint_disk(labels: &mut LabelMap, id: u32, cr: f64, cc: f64, radius: f64) {
    let (h, w) = labels.shape();
    for r in 0..h {
        for c in 0..w {
            if (r as f64 - cr).powi(2) + (c as f64 - cc).powi(2) <= radius * radius {
                labels.set(r, c, id);
            }
        }
    }
}

pub fn paint_rect(labels: &mut LabelMap, id: u32, r0: usize, c0: usize, hgt: usize, wid: usize) {
    let (h, w) = labels.shape();
    for r in r0..(r0 + hgt).min(h) {
        for c in c0..(c0 + wid).min(w) {
            labels.set(r, c, id);
        }
    }
}

/// Up to `max_instances` rectangles and disks with distinct random ids;
/// later shapes overwrite earlier ones.
pub fn random_labels<R: Rng>(rng: &mut R, h: usize, w: usize, max_instances: usize) -> LabelMap {
    let mut labels = LabelMap::zeros(h, w);
    let n = rng.random_range(0..=max_instances);
    let mut ids = BTreeSet::new();
    while ids.len() < n {
        ids.insert(rng.random_range(1..1000u32));
    }
    let mut ids: Vec<u32> = ids.into_iter().collect();
    // shuffle so id order and painting order differ
    for i in (1..ids.len()).rev() {
        ids.swap(i, rng.random_range(0..=i));
    }
    for id in ids {
        if rng.random_bool(0.5) {
            let hh = rng.random_range(1..=h.div_ceil(2));
            let ww = rng.random_range(1..=w.div_ceil(2));
            let r0 = rng.random_range(0..h);
            let c0 = rng.random_range(0..w);
            paint_rect(&mut labels, id, r0, c0, hh, ww);
        } else {
            let rad = rng.random_range(0.5..(h.min(w) as f64 / 4.0).max(1.0));
            let cr = rng.random_range(0.0..h as f64);
            let cc = rng.random_range(0.0..w as f64);
            paint_disk(&mut labels, id, cr, cc, rad);
        }
    }
    labels
}

/// A prediction derived from `gt`: shifted, eroded or grown instances,
/// some dropped, some spurious ones added. Ids are reassigned.
pub fn perturb_labels<R: Rng>(rng: &mut R, gt: &LabelMap) -> LabelMap {
    let (h, w) = gt.shape();
    let mut out = LabelMap::zeros(h, w);
    let mut next = rng.random_range(1..50u32);
    for id in gt.ids() {
        if rng.random_bool(0.15) {
            continue;
        }
        let dr = rng.random_range(-2i64..=2);
        let dc = rng.random_range(-2i64..=2);
        let new_id = next;
        next += rng.random_range(1..4);
        for r in 0..h {
            for c in 0..w {
                if *gt.get(r, c) != id {
                    continue;
                }
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                if nr >= 0 && nc >= 0 && (nr as usize) < h && (nc as usize) < w && rng.random_bool(0.9) {
                    out.set(nr as usize, nc as usize, new_id);
                }
            }
        }
    }
    if rng.random_bool(0.3) {
        let r0 = rng.random_range(0..h);
        let c0 = rng.random_range(0..w);
        paint_rect(&mut out, next, r0, c0, rng.random_range(1..6), rng.random_range(1..6));
    }
    out
}

pub fn ids_of(labels: &LabelMap) -> Vec<u32> {
    let set: BTreeSet<u32> = labels.as_slice().iter().copied().filter(|&v| v != 0).collect();
    set.into_iter().collect()
}

fn area(labels: &LabelMap, id: u32) -> usize {
    labels.as_slice().iter().filter(|&&v| v == id).count()
}

fn inter(gt: &LabelMap, g: u32, pred: &LabelMap, p: u32) -> usize {
    gt.as_slice()
        .iter()
        .zip(pred.as_slice())
        .filter(|(&a, &b)| a == g && b == p)
        .count()
}

fn union(gt: &LabelMap, g: u32, pred: &LabelMap, p: u32) -> usize {
    gt.as_slice()
        .iter()
        .zip(pred.as_slice())
        .filter(|(&a, &b)| a == g || b == p)
        .count()
}

/// AJI recomputed from raw pixel sets.
pub fn oracle_aji(gt: &LabelMap, pred: &LabelMap) -> f64 {
    let gids = ids_of(gt);
    let pids = ids_of(pred);
    let mut used = BTreeSet::new();
    let (mut num, mut den) = (0usize, 0usize);
    for &g in &gids {
        let mut best: Option<(u32, f64)> = None;
        for &p in &pids {
            let i = inter(gt, g, pred, p);
            if i == 0 {
                continue;
            }
            let iou = i as f64 / union(gt, g, pred, p) as f64;
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((p, iou));
            }
        }
        match best {
            Some((p, _)) => {
                num += inter(gt, g, pred, p);
                den += union(gt, g, pred, p);
                used.insert(p);
            }
            None => den += area(gt, g),
        }
    }
    for &p in &pids {
        if !used.contains(&p) {
            den += area(pred, p);
        }
    }
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// All (gt, pred, iou) with IoU strictly above one half, exhaustive.
pub fn oracle_iou_pairs(gt: &LabelMap, pred: &LabelMap) -> Vec<(u32, u32, f64)> {
    let mut out = Vec::new();
    for g in ids_of(gt) {
        for p in ids_of(pred) {
            let i = inter(gt, g, pred, p);
            let u = union(gt, g, pred, p);
            let iou = i as f64 / u as f64;
            if iou > 0.5 {
                out.push((g, p, iou));
            }
        }
    }
    out
}

/// (dq, sq, pq) from the exhaustive IoU pairs.
pub fn oracle_pq(gt: &LabelMap, pred: &LabelMap) -> (f64, f64, f64) {
    let pairs = oracle_iou_pairs(gt, pred);
    let tp = pairs.len() as f64;
    let fp = ids_of(pred).len() as f64 - tp;
    let fn_ = ids_of(gt).len() as f64 - tp;
    if tp + fp + fn_ == 0.0 {
        return (1.0, 1.0, 1.0);
    }
    if tp == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let dq = tp / (tp + 0.5 * (fp + fn_));
    let sq = pairs.iter().map(|p| p.2).sum::<f64>() / tp;
    (dq, sq, dq * sq)
}

pub fn oracle_centroids(labels: &LabelMap) -> Vec<(u32, f64, f64)> {
    let (h, w) = labels.shape();
    ids_of(labels)
        .into_iter()
        .map(|id| {
            let (mut n, mut sr, mut sc) = (0.0, 0.0, 0.0);
            for r in 0..h {
                for c in 0..w {
                    if *labels.get(r, c) == id {
                        n += 1.0;
                        sr += r as f64;
                        sc += c as f64;
                    }
                }
            }
            (id, sr / n, sc / n)
        })
        .collect()
}

/// Every optimal centroid matching: most pairs within `radius`, then the
/// least total distance (ties within 1e-9). Returns (pairs, total).
pub fn oracle_centroid_matchings(gt: &LabelMap, pred: &LabelMap, radius: f64) -> (Vec<Vec<(u32, u32)>>, f64) {
    let g = oracle_centroids(gt);
    let p = oracle_centroids(pred);
    let mut best: (usize, f64) = (0, 0.0);
    let mut optima: Vec<Vec<(u32, u32)>> = vec![Vec::new()];

    #[allow(clippy::too_many_arguments)]
    fn rec(
        i: usize,
        g: &[(u32, f64, f64)],
        p: &[(u32, f64, f64)],
        r2: f64,
        used: &mut Vec<bool>,
        cur: &mut Vec<(u32, u32)>,
        cost: f64,
        best: &mut (usize, f64),
        optima: &mut Vec<Vec<(u32, u32)>>,
    ) {
        if i == g.len() {
            let n = cur.len();
            if n > best.0 || (n == best.0 && cost < best.1 - 1e-9) {
                *best = (n, cost);
                optima.clear();
                optima.push(cur.clone());
            } else if n == best.0 && (cost - best.1).abs() <= 1e-9 {
                optima.push(cur.clone());
            }
            return;
        }
        rec(i + 1, g, p, r2, used, cur, cost, best, optima);
        for j in 0..p.len() {
            if used[j] {
                continue;
            }
            let d2 = (g[i].1 - p[j].1).powi(2) + (g[i].2 - p[j].2).powi(2);
            if d2 <= r2 {
                used[j] = true;
                cur.push((g[i].0, p[j].0));
                rec(i + 1, g, p, r2, used, cur, cost + d2.sqrt(), best, optima);
                cur.pop();
                used[j] = false;
            }
        }
    }

    rec(
        0,
        &g,
        &p,
        radius * radius,
        &mut vec![false; p.len()],
        &mut Vec::new(),
        0.0,
        &mut best,
        &mut optima,
    );
    for m in &mut optima {
        m.sort();
    }
    optima.sort();
    optima.dedup();
    (optima, best.1)
}

const N8: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

/// Quadratic-time watershed reference.
///
/// Marker pixels inside the mask are settled first, in raster order. Then,
/// repeatedly, the unsettled mask pixel adjacent to a settled one with the
/// lowest (topo, raster index) is settled and labelled like its earliest
/// settled neighbour.
pub fn oracle_watershed(topo: &Grid<f32>, markers: &LabelMap, mask: &Mask) -> LabelMap {
    let (h, w) = topo.shape();
    let n = h * w;
    let mut order = vec![usize::MAX; n];
    let mut labels = vec![0u32; n];
    let mut t = 0usize;
    for i in 0..n {
        if markers.as_slice()[i] != 0 && mask.as_slice()[i] {
            labels[i] = markers.as_slice()[i];
            order[i] = t;
            t += 1;
        }
    }
    let neighbours = |i: usize| {
        let (r, c) = ((i / w) as isize, (i % w) as isize);
        N8.iter().filter_map(move |&(dr, dc)| {
            let (nr, nc) = (r + dr, c + dc);
            (nr >= 0 && nc >= 0 && nr < h as isize && nc < w as isize).then(|| nr as usize * w + nc as usize)
        })
    };
    loop {
        let mut pick: Option<usize> = None;
        for i in 0..n {
            if order[i] != usize::MAX || !mask.as_slice()[i] {
                continue;
            }
            if !neighbours(i).any(|j| order[j] != usize::MAX) {
                continue;
            }
            let better = match pick {
                None => true,
                Some(b) => topo.as_slice()[i] < topo.as_slice()[b],
            };
            if better {
                pick = Some(i);
            }
        }
        let Some(i) = pick else { break };
        let first = neighbours(i).filter(|&j| order[j] != usize::MAX).min_by_key(|&j| order[j]).unwrap();
        labels[i] = labels[first];
        order[i] = t;
        t += 1;
    }
    LabelMap::from_vec(h, w, labels).unwrap()
}

fn disk_offsets(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let mut out = Vec::new();
    for dr in -r..=r {
        for dc in -r..=r {
            if dr * dr + dc * dc <= r * r {
                out.push((dr, dc));
            }
        }
    }
    out
}

fn oracle_dilate(mask: &[bool], h: usize, w: usize, radius: usize) -> Vec<bool> {
    let offs = disk_offsets(radius);
    (0..h * w)
        .map(|i| {
            let (r, c) = ((i / w) as isize, (i % w) as isize);
            offs.iter().any(|&(dr, dc)| {
                let (nr, nc) = (r + dr, c + dc);
                nr >= 0 && nc >= 0 && nr < h as isize && nc < w as isize && mask[nr as usize * w + nc as usize]
            })
        })
        .collect()
}

/// Clears 8-connected components of `mask` smaller than `min_area` and
/// returns the cleared pixels.
fn oracle_drop_small(mask: &mut [bool], h: usize, w: usize, min_area: usize) -> Vec<bool> {
    let mut seen = vec![false; h * w];
    let mut removed = vec![false; h * w];
    for s in 0..h * w {
        if !mask[s] || seen[s] {
            continue;
        }
        let mut comp = vec![s];
        seen[s] = true;
        let mut k = 0;
        while k < comp.len() {
            let i = comp[k];
            k += 1;
            let (r, c) = ((i / w) as isize, (i % w) as isize);
            for (dr, dc) in N8 {
                let (nr, nc) = (r + dr, c + dc);
                if nr >= 0 && nc >= 0 && nr < h as isize && nc < w as isize {
                    let j = nr as usize * w + nc as usize;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        comp.push(j);
                    }
                }
            }
        }
        if comp.len() < min_area {
            for i in comp {
                mask[i] = false;
                removed[i] = true;
            }
        }
    }
    removed
}

/// Ternary map codes (1 = BD, 2 = CB, 3 = BG) computed step by step:
/// overlap counts of per-instance disk dilations, `T > 1`, two further
/// disk dilations, intersection with the foreground, then small-component
/// cleanup (BD → CB, then CB → BG).
pub fn oracle_ternary(labels: &LabelMap, overlap_r: usize, expand_r: usize, min_area: usize) -> Vec<u8> {
    let (h, w) = labels.shape();
    let mut count = vec![0u32; h * w];
    for id in ids_of(labels) {
        let inst: Vec<bool> = labels.as_slice().iter().map(|&v| v == id).collect();
        for (t, d) in count.iter_mut().zip(oracle_dilate(&inst, h, w, overlap_r)) {
            *t += d as u32;
        }
    }
    let crowded: Vec<bool> = count.iter().map(|&t| t > 1).collect();
    let once = oracle_dilate(&crowded, h, w, expand_r);
    let twice = oracle_dilate(&once, h, w, expand_r);
    let fg: Vec<bool> = labels.as_slice().iter().map(|&v| v != 0).collect();
    let mut bd: Vec<bool> = (0..h * w).map(|i| twice[i] && fg[i]).collect();
    let mut cb: Vec<bool> = (0..h * w).map(|i| fg[i] && !bd[i]).collect();
    if min_area > 1 {
        let demoted = oracle_drop_small(&mut bd, h, w, min_area);
        for i in 0..h * w {
            cb[i] |= demoted[i];
        }
        oracle_drop_small(&mut cb, h, w, min_area);
    }
    (0..h * w)
        .map(|i| if bd[i] { 1 } else if cb[i] { 2 } else { 3 })
        .collect()
}

/// Zero-padded 2-D correlation with a 5×5 kernel.
pub fn oracle_correlate(plane: &[f64], h: usize, w: usize, k: &[[f64; 5]; 5]) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for r in 0..h as isize {
        for c in 0..w as isize {
            let mut acc = 0.0;
            for i in 0..5isize {
                for j in 0..5isize {
                    let (rr, cc) = (r + i - 2, c + j - 2);
                    if rr >= 0 && cc >= 0 && rr < h as isize && cc < w as isize {
                        acc += k[i as usize][j as usize] * plane[rr as usize * w + cc as usize];
                    }
                }
            }
            out[r as usize * w + c as usize] = acc;
        }
    }
    out
}

/// The 5×5 Sobel x-derivative: smoothing [1,4,6,4,1] down the rows times
/// derivative [-1,-2,0,2,1] across the columns.
pub fn sobel_x() -> [[f64; 5]; 5] {
    let s = [1.0, 4.0, 6.0, 4.0, 1.0];
    let d = [-1.0, -2.0, 0.0, 2.0, 1.0];
    let mut k = [[0.0; 5]; 5];
    for i in 0..5 {
        for j in 0..5 {
            k[i][j] = s[i] * d[j];
        }
    }
    k
}

pub fn transpose5(k: &[[f64; 5]; 5]) -> [[f64; 5]; 5] {
    let mut t = [[0.0; 5]; 5];
    for i in 0..5 {
        for j in 0..5 {
            t[i][j] = k[j][i];
        }
    }
    t
}

/// Intersection over union of the pixel sets `a == ia` and `b == ib`.
pub fn iou(a: &LabelMap, ia: u32, b: &LabelMap, ib: u32) -> f64 {
    let i = inter(a, ia, b, ib);
    let u = union(a, ia, b, ib);
    if u == 0 {
        0.0
    } else {
        i as f64 / u as f64
    }
}

/// Non-overlapping blobs, some touching, on an `h × w` canvas.
pub fn blob_scene<R: Rng>(rng: &mut R, h: usize, w: usize, count: usize, rmin: f64, rmax: f64) -> LabelMap {
    let mut labels = LabelMap::zeros(h, w);
    let mut placed: Vec<(f64, f64, f64)> = Vec::new();
    let mut tries = 0;
    while placed.len() < count && tries < 10_000 {
        tries += 1;
        let rad = rng.random_range(rmin..rmax);
        let cr = rng.random_range(rad + 1.0..h as f64 - rad - 1.0);
        let cc = rng.random_range(rad + 1.0..w as f64 - rad - 1.0);
        // allow slight contact: centres at least 0.9·(r1 + r2) apart
        if placed
            .iter()
            .any(|&(r, c, q)| ((r - cr).powi(2) + (c - cc).powi(2)).sqrt() < 0.9 * (q + rad))
        {
            continue;
        }
        placed.push((cr, cc, rad));
        let id = placed.len() as u32;
        let (r0, r1) = ((cr - rad).floor().max(0.0) as usize, ((cr + rad).ceil() as usize).min(h - 1));
        let (c0, c1) = ((cc - rad).floor().max(0.0) as usize, ((cc + rad).ceil() as usize).min(w - 1));
        for r in r0..=r1 {
            for c in c0..=c1 {
                if *labels.get(r, c) == 0 && (r as f64 - cr).powi(2) + (c as f64 - cc).powi(2) <= rad * rad {
                    labels.set(r, c, id);
                }
            }
        }
    }
    labels
}

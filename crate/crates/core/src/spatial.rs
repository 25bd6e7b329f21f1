//! Spatial index over axis-aligned boxes, used to prefilter ellipsoid
//! predicates. Boxes are grouped into classes by the power-of-two size of
//! each half-extent `h <= 2^e`; a class hashes cells of width `2^(e+1-k)` for a
//! subdivision `k`, so a box touches at most `2^k + 1` cells per axis and a
//! point query visits one cell per class. Finer cells cost more registrations
//! per box but make point queries scan fewer misses.

use rustc_hash::FxHashMap as HashMap;

#[derive(Clone, Debug)]
struct SizeClass {
    cell: Vec<f64>,
    cells: HashMap<u64, Vec<u32>>,
}

#[derive(Clone, Debug)]
pub struct BoxGrid {
    dim: usize,
    subdivision: u32,
    classes: Vec<SizeClass>,
    /// Exponent vector of each class, and the class index for it.
    class_of: HashMap<Vec<i32>, usize>,
    /// Per box, `lo` then `hi`.
    boxes: Vec<f64>,
    /// Per box, the last query that reported it.
    stamp: Vec<u32>,
    epoch: u32,
}

fn cell_key(coords: impl Iterator<Item = i64>) -> u64 {
    coords.fold(0u64, |h, c| (h ^ c as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Visits the keys of all cells in the index range `[a, b]`.
fn for_each_cell(a: &[i64], b: &[i64], mut f: impl FnMut(u64)) {
    let mut k = a.to_vec();
    loop {
        f(cell_key(k.iter().copied()));
        let mut i = 0;
        loop {
            if i == k.len() {
                return;
            }
            if k[i] < b[i] {
                k[i] += 1;
                break;
            }
            k[i] = a[i];
            i += 1;
        }
    }
}

impl BoxGrid {
    /// Cells as wide as the largest half-extent of their class.
    pub fn new(dim: usize) -> Self {
        Self::with_subdivision(dim, 1)
    }

    /// Cells `2^(e+1-k)` wide for the class with half-extent exponent `e`.
    pub fn with_subdivision(dim: usize, k: u32) -> Self {
        Self {
            dim,
            subdivision: k,
            classes: Vec::new(),
            class_of: HashMap::default(),
            boxes: Vec::new(),
            stamp: Vec::new(),
            epoch: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.stamp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stamp.is_empty()
    }

    fn overlaps(&self, id: usize, lo: &[f64], hi: &[f64]) -> bool {
        let n = self.dim;
        let b = &self.boxes[2 * n * id..2 * n * (id + 1)];
        (0..n).all(|i| b[i] <= hi[i] && b[n + i] >= lo[i])
    }

    /// Adds a box and returns its id (insertion order).
    pub fn insert(&mut self, lo: &[f64], hi: &[f64]) -> usize {
        debug_assert_eq!(lo.len(), self.dim);
        let id = self.stamp.len();
        let exps: Vec<i32> = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| (0.5 * (b - a)).max(1e-12).log2().ceil() as i32)
            .collect();
        let next = self.classes.len();
        let c = *self.class_of.entry(exps.clone()).or_insert(next);
        if c == next {
            let k = self.subdivision as i32;
            let cell = exps.iter().map(|&e| 2f64.powi(e + 1 - k)).collect();
            self.classes.push(SizeClass { cell, cells: HashMap::default() });
        }
        let class = &mut self.classes[c];
        let a: Vec<i64> = lo.iter().zip(&class.cell).map(|(v, w)| (v / w).floor() as i64).collect();
        let b: Vec<i64> = hi.iter().zip(&class.cell).map(|(v, w)| (v / w).floor() as i64).collect();
        let cells = &mut class.cells;
        for_each_cell(&a, &b, |key| {
            let ids = cells.entry(key).or_default();
            // two cells may share a key
            if ids.last() != Some(&(id as u32)) {
                ids.push(id as u32);
            }
        });
        self.boxes.extend_from_slice(lo);
        self.boxes.extend_from_slice(hi);
        self.stamp.push(0);
        id
    }

    /// Ids of boxes overlapping `[lo, hi]`, ascending.
    pub fn query(&mut self, lo: &[f64], hi: &[f64]) -> Vec<usize> {
        let n = self.dim;
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        let epoch = self.epoch;
        let mut stamp = std::mem::take(&mut self.stamp);
        let mut out = Vec::new();
        let mut visit = |ids: &[u32], out: &mut Vec<usize>| {
            for &id in ids {
                let id = id as usize;
                if stamp[id] != epoch {
                    stamp[id] = epoch;
                    if self.overlaps(id, lo, hi) {
                        out.push(id);
                    }
                }
            }
        };
        let mut a = vec![0i64; n];
        let mut b = vec![0i64; n];
        for class in &self.classes {
            let mut count = 1usize;
            for i in 0..n {
                a[i] = (lo[i] / class.cell[i]).floor() as i64;
                b[i] = (hi[i] / class.cell[i]).floor() as i64;
                count = count.saturating_mul((b[i] - a[i] + 1).max(1) as usize);
            }
            if count > class.cells.len() {
                for ids in class.cells.values() {
                    visit(ids, &mut out);
                }
                continue;
            }
            for_each_cell(&a, &b, |key| {
                if let Some(ids) = class.cells.get(&key) {
                    visit(ids, &mut out);
                }
            });
        }
        self.stamp = stamp;
        out.sort_unstable();
        out
    }

    pub fn query_point(&mut self, x: &[f64]) -> Vec<usize> {
        self.query(x, x)
    }

    /// Whether `pred` holds for some box containing `x`; stops at the first hit.
    pub fn any_containing(&self, x: &[f64], mut pred: impl FnMut(usize) -> bool) -> bool {
        for class in &self.classes {
            let key = cell_key(x.iter().zip(&class.cell).map(|(v, w)| (v / w).floor() as i64));
            if let Some(ids) = class.cells.get(&key) {
                for &id in ids {
                    let id = id as usize;
                    if self.overlaps(id, x, x) && pred(id) {
                        return true;
                    }
                }
            }
        }
        false
    }
}

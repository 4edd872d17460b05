//! Axis-aligned bounds and dense voxel sets over them.
//!
//! A `VoxelSet` is a bit per cell of a regular grid, used to represent
//! Dirichlet cells, IFS attractors, and intersection tables.  Cells are
//! classified at their centers; `measure` is cell count times cell volume.
//! Sets on the same grid support boolean algebra and 6-neighbor morphology,
//! and round-trip through a small binary dump format with a JSON sidecar.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write as IoWrite};
use std::path::Path;

use nalgebra::Vector3;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HeisError, Result};
use crate::group::Model;

/// Closed axis-aligned box [lo, hi] in R^3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds3 {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl Bounds3 {
    pub fn new(lo: [f64; 3], hi: [f64; 3]) -> Self {
        for a in 0..3 {
            assert!(hi[a] > lo[a], "degenerate bounds on axis {a}: [{}, {}]", lo[a], hi[a]);
        }
        Bounds3 { lo, hi }
    }

    /// Cube [-r, r]^3.
    pub fn centered_cube(r: f64) -> Self {
        Bounds3::new([-r, -r, -r], [r, r, r])
    }

    /// Unit box [0,1]^3.
    pub fn unit() -> Self {
        Bounds3::new([0.0; 3], [1.0; 3])
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn volume(&self) -> f64 {
        self.width(0) * self.width(1) * self.width(2)
    }

    pub fn contains(&self, v: Vector3<f64>) -> bool {
        (0..3).all(|a| v[a] >= self.lo[a] && v[a] <= self.hi[a])
    }

    pub fn center(&self) -> Vector3<f64> {
        Vector3::new(
            0.5 * (self.lo[0] + self.hi[0]),
            0.5 * (self.lo[1] + self.hi[1]),
            0.5 * (self.lo[2] + self.hi[2]),
        )
    }

    /// Box grown by `margin` on every side.
    pub fn expand(&self, margin: f64) -> Self {
        Bounds3::new(
            [self.lo[0] - margin, self.lo[1] - margin, self.lo[2] - margin],
            [self.hi[0] + margin, self.hi[1] + margin, self.hi[2] + margin],
        )
    }

    /// Smallest box containing both.
    pub fn hull(&self, other: &Bounds3) -> Self {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for a in 0..3 {
            lo[a] = self.lo[a].min(other.lo[a]);
            hi[a] = self.hi[a].max(other.hi[a]);
        }
        Bounds3::new(lo, hi)
    }

    pub fn intersects(&self, other: &Bounds3) -> bool {
        (0..3).all(|a| self.lo[a] <= other.hi[a] && other.lo[a] <= self.hi[a])
    }

    pub fn sample_uniform<R: Rng>(&self, rng: &mut R) -> Vector3<f64> {
        Vector3::new(
            rng.gen_range(self.lo[0]..self.hi[0]),
            rng.gen_range(self.lo[1]..self.hi[1]),
            rng.gen_range(self.lo[2]..self.hi[2]),
        )
    }
}

/// Dense bit set over a regular grid on a `Bounds3`.
///
/// Bit index is x-fastest: `(iz*ny + iy)*nx + ix`.  Membership of a point is
/// decided by the cell that contains it; points outside the bounds are never
/// members.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelSet {
    pub bounds: Bounds3,
    pub res: [usize; 3],
    pub model: Model,
    words: Vec<u64>,
}

const MIN_RES: usize = 2;

fn word_count(res: [usize; 3]) -> usize {
    (res[0] * res[1] * res[2]).div_ceil(64)
}

impl VoxelSet {
    pub fn empty(bounds: Bounds3, res: [usize; 3], model: Model) -> Result<Self> {
        for (axis, &cells) in res.iter().enumerate() {
            if cells < MIN_RES {
                return Err(HeisError::GridTooCoarse { axis, cells, min: MIN_RES });
            }
        }
        Ok(VoxelSet { bounds, res, model, words: vec![0; word_count(res)] })
    }

    pub fn full(bounds: Bounds3, res: [usize; 3], model: Model) -> Result<Self> {
        let mut s = Self::empty(bounds, res, model)?;
        let bits = s.res[0] * s.res[1] * s.res[2];
        for w in s.words.iter_mut() {
            *w = u64::MAX;
        }
        let spare = s.words.len() * 64 - bits;
        if spare > 0 {
            let last = s.words.len() - 1;
            s.words[last] = u64::MAX >> spare;
        }
        Ok(s)
    }

    /// Classify every cell by its center, in parallel over z-slabs.
    pub fn from_fn<F>(bounds: Bounds3, res: [usize; 3], model: Model, f: F) -> Result<Self>
    where
        F: Fn(Vector3<f64>) -> bool + Sync,
    {
        let mut s = Self::empty(bounds, res, model)?;
        let (nx, ny, nz) = (res[0], res[1], res[2]);
        // one z-slab is a whole number of rows but not of words, so
        // parallelize over word-aligned chunks of the flat index space
        let words_per_chunk = 512;
        let bits = nx * ny * nz;
        s.words
            .par_chunks_mut(words_per_chunk)
            .enumerate()
            .for_each(|(chunk, words)| {
                let base = chunk * words_per_chunk * 64;
                for (wi, word) in words.iter_mut().enumerate() {
                    let mut w = 0u64;
                    for bit in 0..64 {
                        let idx = base + wi * 64 + bit;
                        if idx >= bits {
                            break;
                        }
                        let ix = idx % nx;
                        let iy = (idx / nx) % ny;
                        let iz = idx / (nx * ny);
                        if f(cell_center(&bounds, res, [ix, iy, iz])) {
                            w |= 1 << bit;
                        }
                    }
                    *word = w;
                }
            });
        Ok(s)
    }

    pub fn cell_size(&self) -> [f64; 3] {
        [
            self.bounds.width(0) / self.res[0] as f64,
            self.bounds.width(1) / self.res[1] as f64,
            self.bounds.width(2) / self.res[2] as f64,
        ]
    }

    pub fn cell_volume(&self) -> f64 {
        let h = self.cell_size();
        h[0] * h[1] * h[2]
    }

    /// Half the diagonal of one cell: every point of a cell is within this
    /// distance (Euclidean, in coordinates) of the cell center.
    pub fn cell_circumradius(&self) -> f64 {
        let h = self.cell_size();
        0.5 * (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt()
    }

    pub fn cell_center(&self, idx: [usize; 3]) -> Vector3<f64> {
        cell_center(&self.bounds, self.res, idx)
    }

    /// Grid cell containing the point, if inside the bounds.  Cells are
    /// half-open along each axis so that they partition the box: a point on
    /// the upper boundary of the box belongs to no cell.
    pub fn cell_of(&self, v: Vector3<f64>) -> Option<[usize; 3]> {
        let mut idx = [0usize; 3];
        for a in 0..3 {
            if v[a] < self.bounds.lo[a] || v[a] >= self.bounds.hi[a] {
                return None;
            }
            let t = (v[a] - self.bounds.lo[a]) / self.bounds.width(a) * self.res[a] as f64;
            idx[a] = (t.floor() as usize).min(self.res[a] - 1);
        }
        Some(idx)
    }

    fn bit(&self, idx: [usize; 3]) -> usize {
        debug_assert!(idx[0] < self.res[0] && idx[1] < self.res[1] && idx[2] < self.res[2]);
        (idx[2] * self.res[1] + idx[1]) * self.res[0] + idx[0]
    }

    pub fn get(&self, idx: [usize; 3]) -> bool {
        let b = self.bit(idx);
        self.words[b / 64] >> (b % 64) & 1 == 1
    }

    pub fn set(&mut self, idx: [usize; 3], value: bool) {
        let b = self.bit(idx);
        if value {
            self.words[b / 64] |= 1 << (b % 64);
        } else {
            self.words[b / 64] &= !(1 << (b % 64));
        }
    }

    pub fn contains_point(&self, v: Vector3<f64>) -> bool {
        match self.cell_of(v) {
            Some(idx) => self.get(idx),
            None => false,
        }
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Lebesgue measure of the cell union.
    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.cell_volume()
    }

    /// Tight coordinate box around the set cells (cell extents, not centers),
    /// or None when the set is empty.
    pub fn occupied_bounds(&self) -> Option<Bounds3> {
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        let mut any = false;
        for iz in 0..self.res[2] {
            for iy in 0..self.res[1] {
                for ix in 0..self.res[0] {
                    if self.get([ix, iy, iz]) {
                        any = true;
                        for (a, i) in [ix, iy, iz].into_iter().enumerate() {
                            lo[a] = lo[a].min(i);
                            hi[a] = hi[a].max(i);
                        }
                    }
                }
            }
        }
        if !any {
            return None;
        }
        let h = self.cell_size();
        let mut blo = [0.0; 3];
        let mut bhi = [0.0; 3];
        for a in 0..3 {
            blo[a] = self.bounds.lo[a] + lo[a] as f64 * h[a];
            bhi[a] = self.bounds.lo[a] + (hi[a] + 1) as f64 * h[a];
        }
        Some(Bounds3::new(blo, bhi))
    }

    fn assert_same_grid(&self, other: &VoxelSet) {
        assert_eq!(self.res, other.res, "voxel grids differ in resolution");
        assert_eq!(self.bounds, other.bounds, "voxel grids differ in bounds");
        assert_eq!(self.model, other.model, "voxel grids differ in coordinate model");
    }

    pub fn union(&self, other: &VoxelSet) -> VoxelSet {
        self.assert_same_grid(other);
        let mut out = self.clone();
        for (w, v) in out.words.iter_mut().zip(&other.words) {
            *w |= v;
        }
        out
    }

    pub fn intersect(&self, other: &VoxelSet) -> VoxelSet {
        self.assert_same_grid(other);
        let mut out = self.clone();
        for (w, v) in out.words.iter_mut().zip(&other.words) {
            *w &= v;
        }
        out
    }

    pub fn minus(&self, other: &VoxelSet) -> VoxelSet {
        self.assert_same_grid(other);
        let mut out = self.clone();
        for (w, v) in out.words.iter_mut().zip(&other.words) {
            *w &= !v;
        }
        out
    }

    pub fn symdiff(&self, other: &VoxelSet) -> VoxelSet {
        self.assert_same_grid(other);
        let mut out = self.clone();
        for (w, v) in out.words.iter_mut().zip(&other.words) {
            *w ^= v;
        }
        out
    }

    pub fn is_subset_of(&self, other: &VoxelSet) -> bool {
        self.assert_same_grid(other);
        self.words.iter().zip(&other.words).all(|(w, v)| w & !v == 0)
    }

    /// Keep cells whose 6 face neighbors are all present (neighbors outside
    /// the grid count as absent).
    pub fn erode6(&self) -> VoxelSet {
        self.morph(false)
    }

    /// Add the 6 face neighbors of every present cell (clipped to the grid).
    pub fn dilate6(&self) -> VoxelSet {
        self.morph(true)
    }

    pub fn dilate_layers(&self, layers: usize) -> VoxelSet {
        let mut s = self.clone();
        for _ in 0..layers {
            s = s.dilate6();
        }
        s
    }

    /// Do the two sets agree up to `layers` cells of boundary shift, i.e.
    /// each is contained in the other dilated by `layers`?
    pub fn within_layers(&self, other: &VoxelSet, layers: usize) -> bool {
        self.is_subset_of(&other.dilate_layers(layers))
            && other.is_subset_of(&self.dilate_layers(layers))
    }

    fn morph(&self, dilate: bool) -> VoxelSet {
        let (nx, ny, nz) = (self.res[0], self.res[1], self.res[2]);
        let mut out = VoxelSet {
            bounds: self.bounds,
            res: self.res,
            model: self.model,
            words: vec![0; self.words.len()],
        };
        for iz in 0..nz {
            for iy in 0..ny {
                for ix in 0..nx {
                    let here = self.get([ix, iy, iz]);
                    let decided = if dilate {
                        here || self.any_neighbor([ix, iy, iz])
                    } else {
                        here && self.all_neighbors([ix, iy, iz])
                    };
                    if decided {
                        out.set([ix, iy, iz], true);
                    }
                }
            }
        }
        out
    }

    fn any_neighbor(&self, idx: [usize; 3]) -> bool {
        self.neighbors(idx, |s, n| s.get(n), false, |acc, v| acc || v)
    }

    fn all_neighbors(&self, idx: [usize; 3]) -> bool {
        self.neighbors(idx, |s, n| s.get(n), true, |acc, v| acc && v)
    }

    fn neighbors<G, H>(&self, idx: [usize; 3], get: G, init: bool, fold: H) -> bool
    where
        G: Fn(&VoxelSet, [usize; 3]) -> bool,
        H: Fn(bool, bool) -> bool,
    {
        let mut acc = init;
        for a in 0..3 {
            for d in [-1isize, 1] {
                let v = idx[a] as isize + d;
                let inside = v >= 0 && (v as usize) < self.res[a];
                let val = if inside {
                    let mut n = idx;
                    n[a] = v as usize;
                    get(self, n)
                } else {
                    false
                };
                acc = fold(acc, val);
            }
        }
        acc
    }

    // Binary dump ######################################################

    const MAGIC: &'static [u8; 4] = b"HVOX";
    const VERSION: u32 = 1;

    /// Write the set to `path` and a human-readable `<path>.meta.json`
    /// sidecar describing grid and occupancy.
    pub fn write_dump<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(Self::MAGIC)?;
        w.write_all(&Self::VERSION.to_le_bytes())?;
        for a in 0..3 {
            w.write_all(&self.bounds.lo[a].to_le_bytes())?;
        }
        for a in 0..3 {
            w.write_all(&self.bounds.hi[a].to_le_bytes())?;
        }
        for a in 0..3 {
            w.write_all(&(self.res[a] as u32).to_le_bytes())?;
        }
        w.write_all(&[match self.model {
            Model::Polarized => 0u8,
            Model::Symmetric => 1u8,
        }])?;
        w.write_all(&(self.count() as u64).to_le_bytes())?;
        for word in &self.words {
            w.write_all(&word.to_le_bytes())?;
        }
        w.flush()?;

        let meta = serde_json::json!({
            "format": "HVOX",
            "version": Self::VERSION,
            "bounds": self.bounds,
            "resolution": self.res,
            "model": format!("{:?}", self.model).to_lowercase(),
            "cells_set": self.count(),
            "cell_volume": self.cell_volume(),
            "measure": self.measure(),
        });
        let meta_path = path.with_extension(match path.extension() {
            Some(e) => format!("{}.meta.json", e.to_string_lossy()),
            None => "meta.json".to_string(),
        });
        std::fs::write(meta_path, serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    pub fn read_dump<P: AsRef<Path>>(path: P) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(HeisError::BadDump("bad magic".into()));
        }
        let mut u32buf = [0u8; 4];
        r.read_exact(&mut u32buf)?;
        let version = u32::from_le_bytes(u32buf);
        if version != Self::VERSION {
            return Err(HeisError::BadDump(format!("unsupported version {version}")));
        }
        let mut f64buf = [0u8; 8];
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for v in lo.iter_mut() {
            r.read_exact(&mut f64buf)?;
            *v = f64::from_le_bytes(f64buf);
        }
        for v in hi.iter_mut() {
            r.read_exact(&mut f64buf)?;
            *v = f64::from_le_bytes(f64buf);
        }
        let mut res = [0usize; 3];
        for v in res.iter_mut() {
            r.read_exact(&mut u32buf)?;
            *v = u32::from_le_bytes(u32buf) as usize;
        }
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        let model = match tag[0] {
            0 => Model::Polarized,
            1 => Model::Symmetric,
            t => return Err(HeisError::BadDump(format!("unknown model tag {t}"))),
        };
        let mut u64buf = [0u8; 8];
        r.read_exact(&mut u64buf)?;
        let declared = u64::from_le_bytes(u64buf) as usize;

        let mut s = VoxelSet::empty(Bounds3::new(lo, hi), res, model)?;
        for word in s.words.iter_mut() {
            r.read_exact(&mut u64buf)?;
            *word = u64::from_le_bytes(u64buf);
        }
        if s.count() != declared {
            return Err(HeisError::BadDump(format!(
                "cell count mismatch: header {declared}, bitmap {}",
                s.count()
            )));
        }
        Ok(s)
    }
}

pub(crate) fn cell_center(bounds: &Bounds3, res: [usize; 3], idx: [usize; 3]) -> Vector3<f64> {
    let mut c = [0.0; 3];
    for a in 0..3 {
        let h = bounds.width(a) / res[a] as f64;
        c[a] = bounds.lo[a] + (idx[a] as f64 + 0.5) * h;
    }
    Vector3::new(c[0], c[1], c[2])
}

// TESTS ###############################################################

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ball(r: f64) -> VoxelSet {
        VoxelSet::from_fn(Bounds3::centered_cube(1.0), [48, 48, 48], Model::Symmetric, |v| {
            v.norm() <= r
        })
        .unwrap()
    }

    #[test]
    fn full_measure_equals_volume() {
        let b = Bounds3::new([-1.0, 0.0, 2.0], [3.0, 1.0, 2.5]);
        let s = VoxelSet::full(b, [17, 9, 33], Model::Polarized).unwrap();
        assert_eq!(s.count(), 17 * 9 * 33);
        assert_relative_eq!(s.measure(), b.volume(), epsilon = 1e-12);
    }

    #[test]
    fn ball_measure_approaches_four_thirds_pi() {
        let s = ball(0.8);
        let exact = 4.0 / 3.0 * std::f64::consts::PI * 0.8f64.powi(3);
        assert_relative_eq!(s.measure(), exact, max_relative = 0.02);
    }

    #[test]
    fn membership_matches_classifier_at_centers() {
        let s = ball(0.5);
        for idx in [[0, 0, 0], [24, 24, 24], [24, 10, 30], [47, 47, 47]] {
            let c = s.cell_center(idx);
            assert_eq!(s.get(idx), c.norm() <= 0.5);
            assert_eq!(s.contains_point(c), c.norm() <= 0.5);
        }
        assert!(!s.contains_point(Vector3::new(5.0, 0.0, 0.0)));
    }

    #[test]
    fn boolean_algebra_identities() {
        let a = ball(0.7);
        let b = ball(0.4);
        // b is a subset of a, so intersection is b and difference is disjoint
        assert!(b.is_subset_of(&a));
        assert_eq!(a.intersect(&b), b);
        assert_eq!(a.minus(&b).count() + b.count(), a.count());
        assert_eq!(a.symdiff(&b), a.minus(&b));
        assert_eq!(a.union(&b), a);
    }

    #[test]
    fn erode_then_dilate_stays_inside() {
        let a = ball(0.6);
        let opened = a.erode6().dilate6();
        assert!(opened.is_subset_of(&a));
        // opening a fat ball removes at most a boundary layer
        assert!(opened.count() > a.count() * 8 / 10);
    }

    #[test]
    fn dilation_grows_by_a_layer() {
        let a = ball(0.5);
        let d = a.dilate6();
        assert!(a.is_subset_of(&d));
        assert!(d.count() > a.count());
        assert!(a.within_layers(&d, 1));
        assert!(!a.within_layers(&d.dilate_layers(2), 1));
    }

    #[test]
    fn from_fn_matches_serial_fill() {
        let b = Bounds3::new([0.0, 0.0, 0.0], [1.0, 2.0, 3.0]);
        let f = |v: Vector3<f64>| (v.x * 7.0).sin() + (v.y * 3.0).cos() > v.z * 0.4;
        let par = VoxelSet::from_fn(b, [31, 22, 45], Model::Polarized, f).unwrap();
        let mut ser = VoxelSet::empty(b, [31, 22, 45], Model::Polarized).unwrap();
        for iz in 0..45 {
            for iy in 0..22 {
                for ix in 0..31 {
                    ser.set([ix, iy, iz], f(ser.cell_center([ix, iy, iz])));
                }
            }
        }
        assert_eq!(par, ser);
    }

    #[test]
    fn dump_round_trip() {
        let s = ball(0.55);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ball.hvox");
        s.write_dump(&path).unwrap();
        let back = VoxelSet::read_dump(&path).unwrap();
        assert_eq!(s, back);
        assert!(path.with_extension("hvox.meta.json").exists());
    }

    #[test]
    fn dump_rejects_corruption() {
        let s = ball(0.3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.hvox");
        s.write_dump(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0xff;
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(VoxelSet::read_dump(&path), Err(HeisError::BadDump(_))));
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(matches!(
            VoxelSet::empty(Bounds3::unit(), [64, 1, 64], Model::Symmetric),
            Err(HeisError::GridTooCoarse { axis: 1usize, .. })
        ));
    }

    #[test]
    fn bounds_sampling_stays_inside() {
        use rand::SeedableRng;
        let b = Bounds3::new([-2.0, 1.0, 0.0], [-1.0, 4.0, 0.25]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            assert!(b.contains(b.sample_uniform(&mut rng)));
        }
    }

    #[test]
    fn occupied_bounds_wraps_the_set_cells() {
        let b = Bounds3::new([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]);
        let mut v = VoxelSet::empty(b, [8, 8, 8], Model::Polarized).unwrap();
        assert!(v.occupied_bounds().is_none());
        v.set([2, 3, 4], true);
        v.set([5, 3, 4], true);
        let ob = v.occupied_bounds().unwrap();
        approx::assert_relative_eq!(ob.lo[0], 0.25);
        approx::assert_relative_eq!(ob.hi[0], 0.75);
        approx::assert_relative_eq!(ob.lo[1], 0.375);
        approx::assert_relative_eq!(ob.hi[1], 0.5);
        approx::assert_relative_eq!(ob.lo[2], 0.5);
        approx::assert_relative_eq!(ob.hi[2], 0.625);
    }
}

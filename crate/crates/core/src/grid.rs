//! Global grid geometry, block decomposition arithmetic and ghost-framed field
//! storage.
//!
//! All indices are 0-based. The x axis is the inner (fastest varying) storage
//! dimension, y the outer one; worker partitioning splits along y.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Global grid of `n × n` cells with the scheme constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub dx: f64,
    pub dy: f64,
    pub dt: f64,
    /// Robert-Asselin filter coefficient.
    pub alpha: f64,
}

impl GridSpec {
    pub const DEFAULT_DX: f64 = 1.0e5;
    pub const DEFAULT_DY: f64 = 1.0e5;
    pub const DEFAULT_DT: f64 = 90.0;
    pub const DEFAULT_ALPHA: f64 = 0.001;

    pub fn new(n: usize) -> Result<Self> {
        let spec = GridSpec {
            n,
            dx: Self::DEFAULT_DX,
            dy: Self::DEFAULT_DY,
            dt: Self::DEFAULT_DT,
            alpha: Self::DEFAULT_ALPHA,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(Error::InvalidGrid(format!("n = {} (need n >= 4)", self.n)));
        }
        if !(self.dx > 0.0 && self.dy > 0.0 && self.dt > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "dx = {}, dy = {}, dt = {} must all be positive",
                self.dx, self.dy, self.dt
            )));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::InvalidGrid(format!(
                "alpha = {} outside [0, 1)",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Inclusive global cell range `[sx, ex] × [sy, ey]` owned by one rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockExtent {
    pub sx: usize,
    pub ex: usize,
    pub sy: usize,
    pub ey: usize,
}

impl BlockExtent {
    pub fn whole(n: usize) -> Self {
        BlockExtent {
            sx: 0,
            ex: n - 1,
            sy: 0,
            ey: n - 1,
        }
    }

    pub fn width(&self) -> usize {
        self.ex - self.sx + 1
    }

    pub fn height(&self) -> usize {
        self.ey - self.sy + 1
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        (self.sx..=self.ex).contains(&i) && (self.sy..=self.ey).contains(&j)
    }
}

/// Splits `n` cells into `p` consecutive blocks and returns the inclusive range
/// of block `c`. The first `n mod p` blocks carry one extra cell.
pub fn decompose_1d(n: usize, p: usize, c: usize) -> Result<(usize, usize)> {
    if p == 0 || p > n {
        return Err(Error::Decomposition(format!(
            "cannot split {n} cells into {p} non-empty blocks"
        )));
    }
    if c >= p {
        return Err(Error::Decomposition(format!(
            "block index {c} out of range for {p} blocks"
        )));
    }
    let base = n / p;
    let rem = n % p;
    let start = c * base + c.min(rem);
    let len = base + usize::from(c < rem);
    Ok((start, start + len - 1))
}

/// Chooses the `(h, w)` process grid for `r` ranks.
///
/// With an override, `h` is taken as given and must divide `r`. Otherwise the
/// most balanced factor pair with `h >= w` is returned.
pub fn dims_create(r: usize, h_override: Option<usize>) -> Result<(usize, usize)> {
    if r == 0 {
        return Err(Error::Decomposition("rank count must be >= 1".into()));
    }
    match h_override {
        Some(0) => Err(Error::Decomposition("x-block count must be >= 1".into())),
        Some(h) if !r.is_multiple_of(h) => Err(Error::Decomposition(format!(
            "x-block count {h} does not divide rank count {r}"
        ))),
        Some(h) => Ok((h, r / h)),
        None => {
            let mut w = 1;
            let mut d = 1;
            while d * d <= r {
                if r.is_multiple_of(d) {
                    w = d;
                }
                d += 1;
            }
            Ok((r / w, w))
        }
    }
}

/// Block owned by `rank` in an `h × w` process grid. Ranks run x-fastest, so
/// consecutive ranks own x-adjacent blocks.
pub fn block_of(rank: usize, h: usize, w: usize, n: usize) -> Result<BlockExtent> {
    if rank >= h * w {
        return Err(Error::Decomposition(format!(
            "rank {rank} outside a {h} x {w} process grid"
        )));
    }
    let (sx, ex) = decompose_1d(n, h, rank % h)?;
    let (sy, ey) = decompose_1d(n, w, rank / h)?;
    Ok(BlockExtent { sx, ex, sy, ey })
}

/// Owned block plus a one-cell ghost frame, stored row-major with x fastest.
///
/// Frame coordinates `(li, lj)` run over `0..=width+1` and `0..=height+1`;
/// owned global cell `(i, j)` sits at `(i - sx + 1, j - sy + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    extent: BlockExtent,
    stride: usize,
    values: Vec<f64>,
}

impl Field {
    pub const GHOST: usize = 1;

    pub fn zeros(extent: BlockExtent) -> Self {
        Self::filled(extent, 0.0)
    }

    pub fn filled(extent: BlockExtent, value: f64) -> Self {
        let stride = extent.width() + 2;
        Field {
            extent,
            stride,
            values: vec![value; stride * (extent.height() + 2)],
        }
    }

    /// Builds a field by evaluating `f` at every frame cell. Ghost cells are
    /// passed as global indices wrapped periodically into `[0, n)`.
    pub fn from_fn(extent: BlockExtent, n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut field = Self::zeros(extent);
        for lj in 0..field.frame_height() {
            let j = wrap(extent.sy as isize + lj as isize - 1, n);
            for li in 0..field.stride {
                let i = wrap(extent.sx as isize + li as isize - 1, n);
                let k = lj * field.stride + li;
                field.values[k] = f(i, j);
            }
        }
        field
    }

    pub fn extent(&self) -> BlockExtent {
        self.extent
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn frame_width(&self) -> usize {
        self.stride
    }

    pub fn frame_height(&self) -> usize {
        self.extent.height() + 2
    }

    #[inline]
    pub fn at(&self, li: usize, lj: usize) -> f64 {
        self.values[lj * self.stride + li]
    }

    #[inline]
    pub fn set(&mut self, li: usize, lj: usize, value: f64) {
        self.values[lj * self.stride + li] = value;
    }

    /// Value at an owned global cell.
    pub fn get_global(&self, i: usize, j: usize) -> f64 {
        debug_assert!(self.extent.contains(i, j));
        self.at(i - self.extent.sx + 1, j - self.extent.sy + 1)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Iterates owned cells as `(i, j, value)` in global coordinates.
    pub fn owned(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let e = self.extent;
        (e.sy..=e.ey).flat_map(move |j| (e.sx..=e.ex).map(move |i| (i, j, self.get_global(i, j))))
    }

    pub fn column(&self, li: usize, rows: std::ops::RangeInclusive<usize>) -> Vec<f64> {
        rows.map(|lj| self.at(li, lj)).collect()
    }

    pub fn set_column(&mut self, li: usize, first_row: usize, data: &[f64]) {
        for (k, &v) in data.iter().enumerate() {
            self.set(li, first_row + k, v);
        }
    }

    pub fn row(&self, lj: usize) -> &[f64] {
        &self.values[lj * self.stride..(lj + 1) * self.stride]
    }

    pub fn set_row(&mut self, lj: usize, data: &[f64]) {
        self.values[lj * self.stride..(lj + 1) * self.stride].copy_from_slice(data);
    }

    pub fn all_finite(&self) -> bool {
        self.owned().all(|(_, _, v)| v.is_finite())
    }
}

#[inline]
pub(crate) fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

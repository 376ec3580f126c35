//! Classical gray-scale morphology.
//!
//! Dilation and erosion are windowed max/min over a structuring element.
//! Offsets that fall outside the frame are skipped, which is the same as
//! padding with -inf for dilation and +inf for erosion. For the square and
//! disk elements this is also identical to replicate-edge padding, since a
//! clamped offset always stays inside the element.
//!
//! The classical skeleton is the sum over levels `j = 0..=J` of the residue
//! between the `j`-fold erosion and its opening, clamped to `[0, 1]`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Cap on the automatically selected number of skeleton levels.
pub const MAX_AUTO_LEVELS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementShape {
    Square,
    Disk,
}

/// Finite set of integer offsets containing the origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuringElement {
    offsets: Vec<(isize, isize)>,
    shape: ElementShape,
    radius: usize,
}

impl StructuringElement {
    /// Square: all offsets with `max(|dy|, |dx|) <= radius`.
    /// Disk: all offsets with `dy^2 + dx^2 <= radius^2`.
    pub fn new(shape: ElementShape, radius: usize) -> Self {
        let r = radius as isize;
        let mut offsets = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                let inside = match shape {
                    ElementShape::Square => true,
                    ElementShape::Disk => dy * dy + dx * dx <= r * r,
                };
                if inside {
                    offsets.push((dy, dx));
                }
            }
        }
        Self { offsets, shape, radius }
    }

    pub fn square(radius: usize) -> Self {
        Self::new(ElementShape::Square, radius)
    }

    pub fn disk(radius: usize) -> Self {
        Self::new(ElementShape::Disk, radius)
    }

    pub fn offsets(&self) -> &[(isize, isize)] {
        &self.offsets
    }

    pub fn shape(&self) -> ElementShape {
        self.shape
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

impl Default for StructuringElement {
    fn default() -> Self {
        Self::square(1)
    }
}

impl fmt::Display for StructuringElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shape = match self.shape {
            ElementShape::Square => "square",
            ElementShape::Disk => "disk",
        };
        write!(f, "{shape}:{}", self.radius)
    }
}

/// Parses `shape:radius`, e.g. `square:1` or `disk:2`.
impl FromStr for StructuringElement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (shape, radius) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidParameter(format!("element `{s}` is not shape:radius")))?;
        let shape = match shape.trim() {
            "square" => ElementShape::Square,
            "disk" => ElementShape::Disk,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown element shape `{other}` (expected square or disk)"
                )))
            }
        };
        let radius: usize = radius
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("element radius `{radius}` is not a nonnegative integer")))?;
        Ok(Self::new(shape, radius))
    }
}

fn window_reduce(u: &GrayImage, b: &StructuringElement, init: f64, pick: impl Fn(f64, f64) -> f64) -> GrayImage {
    let (h, w) = u.shape();
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let mut acc = init;
            for &(dy, dx) in b.offsets() {
                if let Some(i) = u.offset_index(r, c, dy, dx) {
                    acc = pick(acc, u.data()[i]);
                }
            }
            out.push(acc);
        }
    }
    GrayImage::from_vec_unchecked(h, w, out)
}

/// Windowed maximum over the in-frame offsets of `b`.
pub fn dilate(u: &GrayImage, b: &StructuringElement) -> GrayImage {
    window_reduce(u, b, f64::NEG_INFINITY, f64::max)
}

/// Windowed minimum over the in-frame offsets of `b`.
pub fn erode(u: &GrayImage, b: &StructuringElement) -> GrayImage {
    window_reduce(u, b, f64::INFINITY, f64::min)
}

/// `j`-fold erosion; `j = 0` returns a copy of `u`.
pub fn erode_n(u: &GrayImage, b: &StructuringElement, j: usize) -> GrayImage {
    let mut e = u.clone();
    for _ in 0..j {
        e = erode(&e, b);
    }
    e
}

pub fn open(u: &GrayImage, b: &StructuringElement) -> GrayImage {
    dilate(&erode(u, b), b)
}

/// Sum of the per-level residues `e^j - open(e^j)` for `j = 0..=levels`,
/// clamped to `[0, 1]`.
pub fn classic_skeleton(u: &GrayImage, b: &StructuringElement, levels: usize) -> GrayImage {
    let (h, w) = u.shape();
    let mut acc = vec![0.0; h * w];
    let mut e = u.clone();
    for j in 0..=levels {
        let opened = open(&e, b);
        for ((a, &x), &o) in acc.iter_mut().zip(e.data()).zip(opened.data()) {
            *a += x - o;
        }
        if j < levels {
            e = erode(&e, b);
        }
    }
    GrayImage::from_vec_unchecked(h, w, acc.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
}

/// Smallest `J` such that `erode_n(u, b, J + 1)` is identically zero,
/// capped at [`MAX_AUTO_LEVELS`].
pub fn default_levels(u: &GrayImage, b: &StructuringElement) -> usize {
    let mut e = u.clone();
    for j in 0..MAX_AUTO_LEVELS {
        e = erode(&e, b);
        if e.all(|v| v == 0.0) {
            return j;
        }
    }
    MAX_AUTO_LEVELS
}

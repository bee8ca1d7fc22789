//! Run-length encoded binary pixel masks.
//!
//! Runs are counted over row-major pixel order and alternate between unset
//! and set pixels, always starting with an unset run (which may be empty).
//! Text form is two lines: `rle <width> <height>` followed by the
//! space-separated run lengths.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MaskError {
    #[error("run lengths sum to {got}, expected {want} pixels")]
    LengthMismatch { got: u64, want: u64 },
    #[error("malformed mask text: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    width: u32,
    height: u32,
    runs: Vec<u32>,
}

impl RleMask {
    pub fn new(width: u32, height: u32, runs: Vec<u32>) -> Result<Self, MaskError> {
        let got: u64 = runs.iter().map(|&r| r as u64).sum();
        let want = width as u64 * height as u64;
        if got != want {
            return Err(MaskError::LengthMismatch { got, want });
        }
        Ok(Self { width, height, runs })
    }

    pub fn empty(width: u32, height: u32) -> Self {
        Self { width, height, runs: vec![width * height] }
    }

    pub fn from_dense(width: u32, height: u32, pixels: &[bool]) -> Self {
        assert_eq!(pixels.len(), width as usize * height as usize, "mask size mismatch");
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0u32;
        for &p in pixels {
            if p != current {
                runs.push(len);
                current = p;
                len = 0;
            }
            len += 1;
        }
        runs.push(len);
        Self { width, height, runs }
    }

    /// Mask of every pixel inside the half-open rectangle.
    pub fn from_rect(width: u32, height: u32, rect: &PixelRect) -> Self {
        let mut dense = vec![false; width as usize * height as usize];
        for (u, v) in rect.clipped(width, height).pixels() {
            dense[v as usize * width as usize + u as usize] = true;
        }
        Self::from_dense(width, height, &dense)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn runs(&self) -> &[u32] {
        &self.runs
    }

    pub fn to_dense(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.width as usize * self.height as usize);
        for (i, &r) in self.runs.iter().enumerate() {
            out.extend(std::iter::repeat_n(i % 2 == 1, r as usize));
        }
        out
    }

    pub fn count(&self) -> usize {
        self.runs.iter().skip(1).step_by(2).map(|&r| r as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// Row-major linear indices of set pixels.
    pub fn set_indices(&self) -> impl Iterator<Item = usize> + '_ {
        let mut start = 0usize;
        self.runs.iter().enumerate().flat_map(move |(i, &r)| {
            let range = start..start + r as usize;
            start += r as usize;
            let keep = i % 2 == 1;
            range.filter(move |_| keep)
        })
    }

    pub fn set_pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.set_indices().map(move |i| ((i % w) as u32, (i / w) as u32))
    }

    /// Whether pixel `(u, v)` is set; out-of-range pixels are unset.
    pub fn get(&self, u: u32, v: u32) -> bool {
        if u >= self.width || v >= self.height {
            return false;
        }
        let target = v as u64 * self.width as u64 + u as u64;
        let mut start = 0u64;
        for (i, &r) in self.runs.iter().enumerate() {
            let end = start + r as u64;
            if target < end {
                return i % 2 == 1;
            }
            start = end;
        }
        false
    }

    /// Tight bounding rectangle of the set pixels.
    pub fn bounding_rect(&self) -> Option<PixelRect> {
        let mut rect: Option<PixelRect> = None;
        for (u, v) in self.set_pixels() {
            let r = rect.get_or_insert(PixelRect { x0: u, y0: v, x1: u + 1, y1: v + 1 });
            r.x0 = r.x0.min(u);
            r.y0 = r.y0.min(v);
            r.x1 = r.x1.max(u + 1);
            r.y1 = r.y1.max(v + 1);
        }
        rect
    }

    pub fn to_text(&self) -> String {
        let runs: Vec<String> = self.runs.iter().map(|r| r.to_string()).collect();
        format!("rle {} {}\n{}\n", self.width, self.height, runs.join(" "))
    }

    pub fn from_text(text: &str) -> Result<Self, MaskError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| MaskError::Parse("missing header".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (width, height) = match fields.as_slice() {
            ["rle", w, h] => (parse_u32(w)?, parse_u32(h)?),
            _ => return Err(MaskError::Parse(format!("bad header `{header}`"))),
        };
        let runs = lines.flat_map(str::split_whitespace).map(parse_u32).collect::<Result<Vec<_>, _>>()?;
        Self::new(width, height, runs)
    }
}

fn parse_u32(s: &str) -> Result<u32, MaskError> {
    s.parse().map_err(|_| MaskError::Parse(format!("`{s}` is not a count")))
}

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelRect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl PixelRect {
    pub fn contains(&self, u: u32, v: u32) -> bool {
        u >= self.x0 && u < self.x1 && v >= self.y0 && v < self.y1
    }

    pub fn clipped(&self, width: u32, height: u32) -> PixelRect {
        PixelRect { x0: self.x0.min(width), y0: self.y0.min(height), x1: self.x1.min(width), y1: self.y1.min(height) }
    }

    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32)> {
        let (x0, x1) = (self.x0, self.x1.max(self.x0));
        (self.y0..self.y1).flat_map(move |v| (x0..x1).map(move |u| (u, v)))
    }
}

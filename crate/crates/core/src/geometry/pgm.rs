//! Binary PGM (P5) masks with a JSON sidecar carrying grid placement.
//! Foreground is 255, background 0; the first image row is the highest `j`.

use super::{GeometryError, ShapeMask};
use crate::point::Point2;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskMeta {
    pub resolution_mm: f64,
    pub origin_x_mm: f64,
    pub origin_y_mm: f64,
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn io(e: impl std::fmt::Display) -> GeometryError {
    GeometryError::Format(e.to_string())
}

/// Write `path` (P5) and `path.json` (placement).
pub fn write_mask(mask: &ShapeMask, path: &Path) -> Result<(), GeometryError> {
    let mut data = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    for j in (0..mask.height()).rev() {
        data.extend((0..mask.width()).map(|i| if mask.get(i, j) { 255u8 } else { 0 }));
    }
    std::fs::write(path, data).map_err(io)?;
    let meta = MaskMeta {
        resolution_mm: mask.resolution(),
        origin_x_mm: mask.origin().x,
        origin_y_mm: mask.origin().y,
    };
    std::fs::write(
        sidecar(path),
        serde_json::to_string_pretty(&meta).map_err(io)?,
    )
    .map_err(io)
}

fn header_tokens(data: &[u8]) -> Result<(Vec<String>, usize), GeometryError> {
    let mut tokens = Vec::new();
    let mut pos = 0;
    while tokens.len() < 4 {
        while pos < data.len() && (data[pos].is_ascii_whitespace() || data[pos] == b'#') {
            if data[pos] == b'#' {
                while pos < data.len() && data[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < data.len() && !data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(GeometryError::Format("truncated PGM header".into()));
        }
        tokens.push(String::from_utf8_lossy(&data[start..pos]).into_owned());
    }
    // exactly one whitespace byte separates the header from the raster
    Ok((tokens, pos + 1))
}

/// Read a mask written by [`write_mask`]. Without a sidecar the grid is
/// placed at the origin with 1 mm cells. Any non-zero pixel is foreground.
pub fn read_mask(path: &Path) -> Result<ShapeMask, GeometryError> {
    let data = std::fs::read(path).map_err(io)?;
    let (tok, offset) = header_tokens(&data)?;
    if tok[0] != "P5" {
        return Err(GeometryError::Format(format!(
            "expected P5, found {}",
            tok[0]
        )));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| GeometryError::Format(format!("bad header value `{s}`")))
    };
    let (w, h, maxval) = (num(&tok[1])?, num(&tok[2])?, num(&tok[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(GeometryError::Format(format!(
            "unsupported maxval {maxval}"
        )));
    }
    let pixels = data
        .get(offset..offset + w * h)
        .ok_or_else(|| GeometryError::Format("truncated raster".into()))?;
    let meta = match std::fs::read_to_string(sidecar(path)) {
        Ok(s) => serde_json::from_str(&s).map_err(io)?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => MaskMeta {
            resolution_mm: 1.0,
            origin_x_mm: 0.0,
            origin_y_mm: 0.0,
        },
        Err(e) => return Err(io(e)),
    };
    let mut mask = ShapeMask::new(
        w,
        h,
        meta.resolution_mm,
        Point2::new(meta.origin_x_mm, meta.origin_y_mm),
    )?;
    for (row, line) in pixels.chunks(w.max(1)).enumerate().take(h) {
        for (i, &p) in line.iter().enumerate() {
            if p != 0 {
                mask.set(i, h - 1 - row, true);
            }
        }
    }
    Ok(mask)
}

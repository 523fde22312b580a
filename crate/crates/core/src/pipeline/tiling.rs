use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Top-left corner of a square patch in slide pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchOrigin {
    pub row: usize,
    pub col: usize,
    pub x: usize,
    pub y: usize,
}

/// Patch origins `(c * stride, r * stride)` in row-major order, keeping only
/// patches that fit entirely inside the image.
pub fn tile_image(width: usize, height: usize, patch_size: usize, stride: usize) -> Result<Vec<PatchOrigin>> {
    if patch_size == 0 || stride == 0 {
        return Err(Error::invalid("patch size and stride must be positive"));
    }
    if patch_size > width.min(height) {
        return Err(Error::invalid(format!(
            "patch size {patch_size} exceeds {width}x{height} image"
        )));
    }
    let cols = (width - patch_size) / stride + 1;
    let rows = (height - patch_size) / stride + 1;
    let mut out = Vec::with_capacity(rows * cols);
    for row in 0..rows {
        for col in 0..cols {
            out.push(PatchOrigin {
                row,
                col,
                x: col * stride,
                y: row * stride,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_patch() {
        assert_eq!(tile_image(768, 768, 768, 128).unwrap().len(), 1);
    }

    #[test]
    fn stride_beyond_edge() {
        let t = tile_image(1000, 1000, 768, 256).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!((t[0].x, t[0].y), (0, 0));
    }

    #[test]
    fn row_major_and_in_bounds() {
        let t = tile_image(10, 7, 4, 3).unwrap();
        assert_eq!(t.len(), 3 * 2);
        assert_eq!((t[1].row, t[1].col, t[1].x, t[1].y), (0, 1, 3, 0));
        assert_eq!((t[3].row, t[3].col, t[3].x, t[3].y), (1, 0, 0, 3));
        assert!(t.iter().all(|o| o.x + 4 <= 10 && o.y + 4 <= 7));
    }

    #[test]
    fn rejects_oversize_and_zero() {
        assert!(tile_image(500, 1000, 768, 128).is_err());
        assert!(tile_image(1000, 1000, 0, 128).is_err());
        assert!(tile_image(1000, 1000, 768, 0).is_err());
    }
}

use super::{PathError, Rect};
use crate::math::Vec2;

/// Uniform grid of square cells. Cell `(col, row)` covers
/// `origin + [col, col + 1) × [row, row + 1)` cells and has index
/// `row * width + col`.
#[derive(Debug, Clone, PartialEq)]
pub struct NavMesh {
    pub origin: Vec2,
    pub cell_size: f64,
    pub width: usize,
    pub height: usize,
    walkable: Vec<bool>,
}

/// Grid over `bounds` keeping only cells that lie wholly inside it. A cell is
/// walkable when its square shares no interior with any obstacle.
pub fn build_navmesh(bounds: &Rect, obstacles: &[Rect], cell_size: f64) -> Result<NavMesh, PathError> {
    if !(cell_size > 0.0 && cell_size.is_finite()) {
        return Err(PathError::InvalidCellSize(cell_size));
    }
    if bounds.is_degenerate() {
        return Err(PathError::DegenerateBounds);
    }
    let cells = |extent: f64| (extent / cell_size + 1e-9).floor() as usize;
    let (width, height) = (cells(bounds.size().x), cells(bounds.size().y));
    if width == 0 || height == 0 {
        return Err(PathError::EmptyMesh);
    }
    let mut mesh = NavMesh {
        origin: bounds.min,
        cell_size,
        width,
        height,
        walkable: vec![true; width * height],
    };
    for idx in 0..width * height {
        let square = mesh.cell_rect(idx);
        mesh.walkable[idx] = !obstacles.iter().any(|o| o.overlaps(&square));
    }
    if mesh.walkable_count() == 0 {
        return Err(PathError::EmptyMesh);
    }
    Ok(mesh)
}

impl NavMesh {
    pub fn len(&self) -> usize {
        self.walkable.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walkable.is_empty()
    }

    pub fn walkable_count(&self) -> usize {
        self.walkable.iter().filter(|w| **w).count()
    }

    pub fn is_walkable(&self, idx: usize) -> bool {
        self.walkable.get(idx).copied().unwrap_or(false)
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.width, idx / self.width)
    }

    pub fn cell_rect(&self, idx: usize) -> Rect {
        let (c, r) = self.coords(idx);
        let min = self.origin + Vec2::new(c as f64, r as f64) * self.cell_size;
        Rect::new(min, min + Vec2::new(self.cell_size, self.cell_size))
    }

    pub fn cell_center(&self, idx: usize) -> Vec2 {
        let (c, r) = self.coords(idx);
        self.origin + Vec2::new(c as f64 + 0.5, r as f64 + 0.5) * self.cell_size
    }

    /// Cell holding `p`; points on the far edge belong to the last cell.
    pub fn cell_at(&self, p: &Vec2) -> Option<usize> {
        let locate = |v: f64, n: usize| -> Option<usize> {
            let u = v / self.cell_size;
            if !(u >= 0.0) {
                return None;
            }
            let k = u.floor() as usize;
            if k < n {
                Some(k)
            } else if u <= n as f64 + 1e-9 {
                Some(n - 1)
            } else {
                None
            }
        };
        let local = p - self.origin;
        Some(self.index(locate(local.x, self.width)?, locate(local.y, self.height)?))
    }

    /// Walkable neighbors of a walkable cell with a flag marking diagonal
    /// steps. A diagonal is only offered when both orthogonal cells it
    /// passes between are walkable.
    pub fn neighbors(&self, idx: usize) -> impl Iterator<Item = (usize, bool)> + '_ {
        let (c, r) = self.coords(idx);
        let (c, r) = (c as i64, r as i64);
        const STEPS: [(i64, i64); 8] = [(0, -1), (-1, 0), (1, 0), (0, 1), (-1, -1), (1, -1), (-1, 1), (1, 1)];
        STEPS.iter().filter_map(move |&(dc, dr)| {
            let at = |c: i64, r: i64| -> Option<usize> {
                if c < 0 || r < 0 || c >= self.width as i64 || r >= self.height as i64 {
                    return None;
                }
                let i = self.index(c as usize, r as usize);
                self.walkable[i].then_some(i)
            };
            let target = at(c + dc, r + dr)?;
            let diagonal = dc != 0 && dr != 0;
            if diagonal && (at(c + dc, r).is_none() || at(c, r + dr).is_none()) {
                return None;
            }
            Some((target, diagonal))
        })
    }
}

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use super::{NavMesh, PathError};
use crate::math::Vec2;

/// A walkable route: the start point, then the centers of every visited cell,
/// then the goal point.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub start: Vec2,
    pub waypoints: Vec<Vec2>,
    /// Meters along the polyline from `start` through every waypoint.
    pub total_cost: f64,
    pub orthogonal_steps: u32,
    pub diagonal_steps: u32,
}

impl Path {
    pub fn goal(&self) -> Vec2 {
        *self.waypoints.last().unwrap_or(&self.start)
    }

    /// Cost of the cell-to-cell part alone.
    pub fn grid_cost(&self, cell_size: f64) -> f64 {
        step_cost(self.orthogonal_steps, self.diagonal_steps, cell_size)
    }

    /// Every vertex in order, starting at `start`.
    pub fn polyline(&self) -> impl Iterator<Item = &Vec2> {
        std::iter::once(&self.start).chain(&self.waypoints)
    }
}

fn step_cost(orthogonal: u32, diagonal: u32, cell_size: f64) -> f64 {
    cell_size * (orthogonal as f64 + diagonal as f64 * SQRT_2)
}

#[derive(Debug, Clone, Copy)]
struct Open {
    f: f64,
    h: f64,
    idx: usize,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Open {}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Open {
    // reversed: the heap pops the lowest (f, h, idx)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

/// Optimal 8-connected route between the cells holding `start` and `goal`.
pub fn find_path(mesh: &NavMesh, start: &Vec2, goal: &Vec2) -> Result<Path, PathError> {
    find_path_traced(mesh, start, goal, |_, _| {})
}

/// [`find_path`], reporting each expanded cell with its heuristic value.
pub fn find_path_traced(
    mesh: &NavMesh,
    start: &Vec2,
    goal: &Vec2,
    mut on_expand: impl FnMut(usize, f64),
) -> Result<Path, PathError> {
    let endpoint = |p: &Vec2| {
        mesh.cell_at(p)
            .filter(|i| mesh.is_walkable(*i))
            .ok_or(PathError::InvalidEndpoint { x: p.x, z: p.y })
    };
    let from = endpoint(start)?;
    let to = endpoint(goal)?;
    let target = mesh.cell_center(to);
    let heuristic = |idx: usize| (mesh.cell_center(idx) - target).norm();

    let n = mesh.len();
    // (orthogonal, diagonal) steps of the best known route to each cell
    let mut steps: Vec<Option<(u32, u32)>> = vec![None; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    steps[from] = Some((0, 0));
    open.push(Open {
        f: heuristic(from),
        h: heuristic(from),
        idx: from,
    });

    while let Some(Open { idx, h, .. }) = open.pop() {
        if closed[idx] {
            continue;
        }
        closed[idx] = true;
        on_expand(idx, h);
        if idx == to {
            break;
        }
        let (a, b) = steps[idx].expect("open cells have a route");
        for (next, diagonal) in mesh.neighbors(idx) {
            if closed[next] {
                continue;
            }
            let candidate = if diagonal { (a, b + 1) } else { (a + 1, b) };
            let g = step_cost(candidate.0, candidate.1, mesh.cell_size);
            let better = match steps[next] {
                None => true,
                Some((oa, ob)) => g < step_cost(oa, ob, mesh.cell_size),
            };
            if better {
                steps[next] = Some(candidate);
                parent[next] = idx;
                let hn = heuristic(next);
                open.push(Open {
                    f: g + hn,
                    h: hn,
                    idx: next,
                });
            }
        }
    }

    if !closed[to] {
        return Err(PathError::NoPath);
    }
    let mut cells = vec![to];
    while let Some(&last) = cells.last() {
        if last == from {
            break;
        }
        cells.push(parent[last]);
    }
    cells.reverse();
    let (orthogonal_steps, diagonal_steps) = steps[to].expect("goal reached");
    let mut waypoints: Vec<Vec2> = cells.iter().map(|&i| mesh.cell_center(i)).collect();
    waypoints.push(*goal);
    let total_cost = (mesh.cell_center(from) - start).norm()
        + step_cost(orthogonal_steps, diagonal_steps, mesh.cell_size)
        + (goal - target).norm();
    Ok(Path {
        start: *start,
        waypoints,
        total_cost,
        orthogonal_steps,
        diagonal_steps,
    })
}

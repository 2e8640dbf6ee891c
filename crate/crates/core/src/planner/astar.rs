use std::cmp::Reverse;
use std::collections::BinaryHeap;

use ordered_float::OrderedFloat;

use super::{PlanError, WaypointPath};
use crate::geometry::{to_array, Vec3};
use crate::scene::{OccupancyGrid, VoxelIndex};

/// 26-connected offsets with their Euclidean lengths in voxel units.
fn neighbourhood() -> Vec<([i64; 3], f64)> {
    let mut out = Vec::with_capacity(26);
    for dz in -1..=1i64 {
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                if (dx, dy, dz) != (0, 0, 0) {
                    let n = (dx * dx + dy * dy + dz * dz) as f64;
                    out.push(([dx, dy, dz], n.sqrt()));
                }
            }
        }
    }
    out
}

/// A diagonal move is only allowed when every voxel of the block it spans
/// is free, so the straight segment between the two centers stays in free
/// space.
fn cuts_corner(grid: &OccupancyGrid, v: VoxelIndex, off: [i64; 3]) -> bool {
    let axes = off.iter().filter(|d| **d != 0).count();
    if axes < 2 {
        return false;
    }
    (1..7u8).any(|mask| {
        let part = [0, 1, 2].map(|a| if mask & (1 << a) != 0 { off[a] } else { 0 });
        part != off && part != [0, 0, 0] && part.iter().zip(&off).all(|(p, o)| *p == 0 || p == o) && {
            grid.offset(v, part).is_none_or(|w| grid.is_occupied(w))
        }
    })
}

fn endpoint(grid: &OccupancyGrid, p: &Vec3, which: &'static str) -> Result<VoxelIndex, PlanError> {
    match grid.voxel_of(p) {
        Some(v) if !grid.is_occupied(v) => Ok(v),
        _ => Err(PlanError::EndpointInCollision { which, point: to_array(p) }),
    }
}

/// Shortest 26-connected voxel path on the inflated lattice, returned as
/// voxel-center waypoints. Points outside the grid count as occupied, and
/// diagonal moves may not cut occupied corners.
pub fn astar(grid: &OccupancyGrid, start: &Vec3, goal: &Vec3) -> Result<WaypointPath, PlanError> {
    let s = endpoint(grid, start, "start")?;
    let g = endpoint(grid, goal, "goal")?;
    let res = grid.resolution();
    let goal_center = grid.center(g);
    let heuristic = |v: VoxelIndex| (grid.center(v) - goal_center).norm();

    let n = grid.len();
    let mut cost = vec![f64::INFINITY; n];
    let mut parent = vec![u32::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let s_lin = grid.flatten(s);
    let g_lin = grid.flatten(g);
    cost[s_lin] = 0.0;
    open.push(Reverse((OrderedFloat(heuristic(s)), s_lin)));
    let moves = neighbourhood();

    while let Some(Reverse((_, lin))) = open.pop() {
        if closed[lin] {
            continue;
        }
        if lin == g_lin {
            break;
        }
        closed[lin] = true;
        let v = grid.unflatten(lin);
        for (off, len) in &moves {
            let Some(nb) = grid.offset(v, *off) else { continue };
            if grid.is_occupied(nb) || cuts_corner(grid, v, *off) {
                continue;
            }
            let nl = grid.flatten(nb);
            if closed[nl] {
                continue;
            }
            let c = cost[lin] + len * res;
            if c < cost[nl] {
                cost[nl] = c;
                parent[nl] = lin as u32;
                open.push(Reverse((OrderedFloat(c + heuristic(nb)), nl)));
            }
        }
    }

    if !cost[g_lin].is_finite() {
        return Err(PlanError::Unreachable { start: to_array(start), goal: to_array(goal) });
    }
    let mut chain = vec![g_lin];
    while let Some(&last) = chain.last() {
        if last == s_lin {
            break;
        }
        chain.push(parent[last] as usize);
    }
    chain.reverse();
    WaypointPath::new(chain.into_iter().map(|l| grid.center(grid.unflatten(l))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::path_length;

    fn grid_with(dims: [usize; 3], blocked: impl Fn([usize; 3]) -> bool) -> OccupancyGrid {
        let empty = OccupancyGrid::empty(Vec3::zeros(), 0.1, dims);
        let raw = (0..empty.len()).map(|l| blocked(empty.unflatten(l))).collect();
        OccupancyGrid::from_raw(Vec3::zeros(), 0.1, dims, raw, 0.0)
    }

    #[test]
    fn no_corner_cutting() {
        // Two voxels block the diagonal shortcut from [0,0,0] to [1,1,0].
        let grid = grid_with([3, 3, 1], |v| v == [1, 0, 0] || v == [0, 1, 0]);
        assert!(matches!(
            astar(&grid, &grid.center([0, 0, 0]), &grid.center([1, 1, 0])),
            Err(PlanError::Unreachable { .. })
        ));
        let grid = grid_with([3, 3, 1], |v| v == [1, 0, 0]);
        let p = astar(&grid, &grid.center([0, 0, 0]), &grid.center([1, 1, 0])).unwrap();
        assert_eq!(p.len(), 3);
        for w in p.waypoints().windows(2) {
            assert!(grid.segment_is_free(&w[0], &w[1]));
        }
    }

    #[test]
    fn same_voxel_is_single_waypoint() {
        let grid = grid_with([4, 4, 4], |_| false);
        let p = astar(&grid, &Vec3::new(0.12, 0.13, 0.14), &Vec3::new(0.18, 0.11, 0.19)).unwrap();
        assert_eq!(p.len(), 1);
        assert!((p.first() - Vec3::repeat(0.15)).norm() < 1e-12);
    }

    #[test]
    fn straight_run_in_empty_grid() {
        let grid = grid_with([16, 16, 16], |_| false);
        let p = astar(&grid, &Vec3::new(0.25, 0.75, 0.75), &Vec3::new(1.25, 0.75, 0.75)).unwrap();
        assert!((path_length(&p) - 1.0).abs() < 1e-12);
        assert_eq!(p.len(), 11);
    }

    #[test]
    fn wall_gap_is_used() {
        // Wall at x = 5 with a single hole at (5, 2, 2).
        let grid = grid_with([10, 5, 5], |[i, j, k]| i == 5 && (j, k) != (2, 2));
        let p = astar(&grid, &Vec3::new(0.05, 0.05, 0.05), &Vec3::new(0.95, 0.45, 0.45)).unwrap();
        let gap = grid.center([5, 2, 2]);
        assert!(p.waypoints().iter().any(|w| (w - gap).norm() < 1e-12));
        for w in p.waypoints() {
            assert!(!grid.is_occupied(grid.voxel_of(w).unwrap()));
        }
    }

    #[test]
    fn errors() {
        let grid = grid_with([6, 6, 6], |[i, _, _]| i == 3);
        let inside = Vec3::new(0.35, 0.3, 0.3);
        assert!(matches!(
            astar(&grid, &inside, &Vec3::new(0.05, 0.05, 0.05)),
            Err(PlanError::EndpointInCollision { which: "start", .. })
        ));
        let err = astar(&grid, &Vec3::new(0.05, 0.05, 0.05), &Vec3::new(0.55, 0.05, 0.05)).unwrap_err();
        assert!(matches!(err, PlanError::Unreachable { .. }));
        assert!(err.to_string().contains("0.05"));
        assert!(matches!(
            astar(&grid, &Vec3::new(-1.0, 0.0, 0.0), &Vec3::new(0.05, 0.05, 0.05)),
            Err(PlanError::EndpointInCollision { .. })
        ));
    }
}

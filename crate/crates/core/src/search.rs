//! Shortest paths on the occupancy grid: A*, Dijkstra distance fields and
//! earliest-arrival search with temporarily blocked cells.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::world::{Cell, GridAbstraction};

const SQRT2: f64 = std::f64::consts::SQRT_2;

pub fn octile(a: Cell, b: Cell) -> f64 {
    let dx = a.0.abs_diff(b.0) as f64;
    let dy = a.1.abs_diff(b.1) as f64;
    dx.max(dy) + (SQRT2 - 1.0) * dx.min(dy)
}

/// Passability mask: grid occupancy plus optional extra blocked cells.
pub struct Passable<'a> {
    grid: &'a GridAbstraction,
    extra: Vec<bool>,
}

impl<'a> Passable<'a> {
    pub fn new(grid: &'a GridAbstraction) -> Self {
        Self {
            grid,
            extra: vec![false; grid.len()],
        }
    }

    pub fn block(&mut self, c: Cell) {
        let i = self.grid.index(c);
        self.extra[i] = true;
    }

    pub fn unblock(&mut self, c: Cell) {
        let i = self.grid.index(c);
        self.extra[i] = false;
    }

    pub fn is_free(&self, c: Cell) -> bool {
        !self.grid.is_occupied(c) && !self.extra[self.grid.index(c)]
    }

    pub fn grid(&self) -> &GridAbstraction {
        self.grid
    }

    /// 8-connected moves with their step length; diagonals may not cut corners.
    pub fn neighbors(&self, c: Cell) -> impl Iterator<Item = (Cell, f64)> + '_ {
        const D: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
        let (nx, ny) = (self.grid.nx as i64, self.grid.ny as i64);
        D.iter().filter_map(move |&(dx, dy)| {
            let x = c.0 as i64 + dx;
            let y = c.1 as i64 + dy;
            if x < 0 || y < 0 || x >= nx || y >= ny {
                return None;
            }
            let n = (x as usize, y as usize);
            if !self.is_free(n) {
                return None;
            }
            if dx != 0 && dy != 0 {
                let a = (x as usize, c.1);
                let b = (c.0, y as usize);
                if !self.is_free(a) || !self.is_free(b) {
                    return None;
                }
                Some((n, SQRT2))
            } else {
                Some((n, 1.0))
            }
        })
    }
}

#[derive(Clone, Copy)]
struct Entry {
    f: f64,
    g: f64,
    idx: usize,
}

impl PartialEq for Entry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Entry {
    // min-heap on f, then larger g first, then lower index
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f)
            .then(self.g.total_cmp(&o.g))
            .then(o.idx.cmp(&self.idx))
    }
}

/// Cell path from `start` to `goal`, both inclusive. Costs are in cells.
pub fn astar(pass: &Passable, start: Cell, goal: Cell) -> Option<Vec<Cell>> {
    if !pass.is_free(start) || !pass.is_free(goal) {
        return None;
    }
    let grid = pass.grid();
    let n = grid.len();
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let s = grid.index(start);
    g[s] = 0.0;
    open.push(Entry {
        f: octile(start, goal),
        g: 0.0,
        idx: s,
    });
    let target = grid.index(goal);
    while let Some(Entry { idx, g: gi, .. }) = open.pop() {
        if closed[idx] {
            continue;
        }
        closed[idx] = true;
        if idx == target {
            let mut path = vec![grid.cell_of_index(idx)];
            let mut cur = idx;
            while parent[cur] != usize::MAX {
                cur = parent[cur];
                path.push(grid.cell_of_index(cur));
            }
            path.reverse();
            return Some(path);
        }
        for (nc, w) in pass.neighbors(grid.cell_of_index(idx)) {
            let j = grid.index(nc);
            let ng = gi + w;
            if ng < g[j] - 1e-12 {
                g[j] = ng;
                parent[j] = idx;
                open.push(Entry {
                    f: ng + octile(nc, goal),
                    g: ng,
                    idx: j,
                });
            }
        }
    }
    None
}

/// Length of a cell path in cell units.
pub fn cell_path_length(path: &[Cell]) -> f64 {
    path.windows(2).map(|w| octile(w[0], w[1])).sum()
}

/// Dijkstra distances (in cells) from every free cell to `goal`; unreachable cells are infinite.
pub fn distance_field(pass: &Passable, goal: Cell) -> Vec<f64> {
    let grid = pass.grid();
    let mut d = vec![f64::INFINITY; grid.len()];
    if !pass.is_free(goal) {
        return d;
    }
    let mut open = BinaryHeap::new();
    let s = grid.index(goal);
    d[s] = 0.0;
    open.push(Entry { f: 0.0, g: 0.0, idx: s });
    while let Some(Entry { f, idx, .. }) = open.pop() {
        if f > d[idx] {
            continue;
        }
        for (nc, w) in pass.neighbors(grid.cell_of_index(idx)) {
            let j = grid.index(nc);
            let nd = f + w;
            if nd < d[j] - 1e-12 {
                d[j] = nd;
                open.push(Entry { f: nd, g: 0.0, idx: j });
            }
        }
    }
    d
}

/// A cell path annotated with the time each cell is entered.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedCellPath {
    pub cells: Vec<Cell>,
    pub arrival: Vec<f64>,
}

/// Earliest-arrival search where `release[i]` is the time cell `i` becomes
/// passable. Travel time per cell unit is `cell_time`; the agent may wait.
pub fn earliest_arrival(
    pass: &Passable,
    release: &[f64],
    start: Cell,
    goal: Cell,
    cell_time: f64,
) -> Option<TimedCellPath> {
    if !pass.is_free(start) || !pass.is_free(goal) || release[pass.grid().index(goal)].is_infinite() {
        return None;
    }
    let grid = pass.grid();
    let n = grid.len();
    let mut t = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let s = grid.index(start);
    t[s] = 0.0;
    let h = |c: Cell| octile(c, goal) * cell_time;
    open.push(Entry {
        f: h(start),
        g: 0.0,
        idx: s,
    });
    let target = grid.index(goal);
    while let Some(Entry { idx, g: ti, .. }) = open.pop() {
        if closed[idx] {
            continue;
        }
        closed[idx] = true;
        if idx == target {
            let mut cells = vec![idx];
            let mut cur = idx;
            while parent[cur] != usize::MAX {
                cur = parent[cur];
                cells.push(cur);
            }
            cells.reverse();
            let arrival = cells.iter().map(|&i| t[i]).collect();
            return Some(TimedCellPath {
                cells: cells.into_iter().map(|i| grid.cell_of_index(i)).collect(),
                arrival,
            });
        }
        for (nc, w) in pass.neighbors(grid.cell_of_index(idx)) {
            let j = grid.index(nc);
            let nt = (ti + w * cell_time).max(release[j]);
            if nt < t[j] - 1e-12 {
                t[j] = nt;
                parent[j] = idx;
                open.push(Entry {
                    f: nt + h(nc),
                    g: nt,
                    idx: j,
                });
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec2;
    use proptest::prelude::*;
    use std::collections::VecDeque;

    fn grid(nx: usize, ny: usize, walls: &[Cell]) -> GridAbstraction {
        let mut occ = vec![false; nx * ny];
        for &(x, y) in walls {
            occ[y * nx + x] = true;
        }
        GridAbstraction::from_occupancy(Vec2::ZERO, 1.0, nx, ny, occ)
    }

    /// Exhaustive shortest path by Bellman-Ford style relaxation.
    fn relax_oracle(pass: &Passable, start: Cell) -> Vec<f64> {
        let g = pass.grid();
        let mut d = vec![f64::INFINITY; g.len()];
        d[g.index(start)] = 0.0;
        loop {
            let mut changed = false;
            for c in g.cells() {
                if !pass.is_free(c) || d[g.index(c)].is_infinite() {
                    continue;
                }
                for (n, w) in pass.neighbors(c) {
                    let nd = d[g.index(c)] + w;
                    if nd < d[g.index(n)] - 1e-12 {
                        d[g.index(n)] = nd;
                        changed = true;
                    }
                }
            }
            if !changed {
                return d;
            }
        }
    }

    fn bfs_hops(pass: &Passable, start: Cell, goal: Cell) -> Option<usize> {
        let g = pass.grid();
        let mut seen = vec![false; g.len()];
        let mut q = VecDeque::from([(start, 0)]);
        seen[g.index(start)] = true;
        while let Some((c, k)) = q.pop_front() {
            if c == goal {
                return Some(k);
            }
            for (n, _) in pass.neighbors(c) {
                if !seen[g.index(n)] {
                    seen[g.index(n)] = true;
                    q.push_back((n, k + 1));
                }
            }
        }
        None
    }

    #[test]
    fn straight_corridor() {
        let g = grid(6, 1, &[]);
        let p = Passable::new(&g);
        let path = astar(&p, (0, 0), (5, 0)).unwrap();
        assert_eq!(path, (0..6).map(|x| (x, 0)).collect::<Vec<_>>());
    }

    #[test]
    fn no_corner_cutting() {
        let g = grid(2, 2, &[(1, 0)]);
        let p = Passable::new(&g);
        let path = astar(&p, (0, 0), (1, 1)).unwrap();
        assert_eq!(path, vec![(0, 0), (0, 1), (1, 1)]);
    }

    #[test]
    fn blocked_doorway() {
        let walls: Vec<Cell> = (0..5).filter(|&y| y != 2).map(|y| (2, y)).collect();
        let g = grid(5, 5, &walls);
        let mut p = Passable::new(&g);
        assert!(astar(&p, (0, 2), (4, 2)).is_some());
        p.block((2, 2));
        assert!(astar(&p, (0, 2), (4, 2)).is_none());
        assert!(bfs_hops(&p, (0, 2), (4, 2)).is_none());
    }

    #[test]
    fn waiting_for_release() {
        let g = grid(5, 1, &[]);
        let p = Passable::new(&g);
        let mut release = vec![0.0; 5];
        release[2] = 10.0;
        let tp = earliest_arrival(&p, &release, (0, 0), (4, 0), 1.0).unwrap();
        assert_eq!(tp.cells.len(), 5);
        assert_eq!(tp.arrival, vec![0.0, 1.0, 10.0, 11.0, 12.0]);
    }

    proptest! {
        #[test]
        fn astar_is_optimal(walls in proptest::collection::vec((0usize..8, 0usize..8), 0..20)) {
            let walls: Vec<Cell> = walls.into_iter().filter(|&c| c != (0, 0) && c != (7, 7)).collect();
            let g = grid(8, 8, &walls);
            let p = Passable::new(&g);
            let oracle = relax_oracle(&p, (0, 0));
            match astar(&p, (0, 0), (7, 7)) {
                Some(path) => {
                    let len = cell_path_length(&path);
                    prop_assert!((len - oracle[g.index((7, 7))]).abs() < 1e-9);
                    let hops = bfs_hops(&p, (0, 0), (7, 7)).unwrap();
                    prop_assert!(len <= hops as f64 * SQRT2 + 1e-9);
                    let field = distance_field(&p, (7, 7));
                    prop_assert!((field[g.index((0, 0))] - len).abs() < 1e-9);
                }
                None => prop_assert!(oracle[g.index((7, 7))].is_infinite()),
            }
        }
    }
}

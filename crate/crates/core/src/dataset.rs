//! Synthetic non-overlapping path images.
//!
//! A path starts at a uniform cell with a uniform heading. Each step moves
//! forward, left or right (relative to the heading), uniformly among the
//! legal moves. A move is legal when the target is inside the grid,
//! unvisited, and not 4-adjacent to any visited cell other than the current
//! one. The walk stops when no move is legal. The first move goes along the
//! initial heading if legal, otherwise along a uniformly chosen legal
//! direction.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::evidence::{Evidence, Value};
use crate::rng::{self, SpqnRng};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridSample {
    pub width: usize,
    pub height: usize,
    /// Row-major, `pixels[row * width + col]`.
    pub pixels: Vec<bool>,
}

impl GridSample {
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.pixels[row * self.width + col]
    }

    pub fn on_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p).count()
    }

    /// Row-major flattening.
    pub fn to_evidence(&self) -> Evidence {
        Evidence::from_bits(&self.pixels)
    }

    pub fn from_evidence(width: usize, height: usize, e: &Evidence) -> Option<Self> {
        if e.len() != width * height {
            return None;
        }
        let pixels = e
            .values()
            .iter()
            .map(|v| match v {
                Value::One => Some(true),
                Value::Zero => Some(false),
                Value::Star => None,
            })
            .collect::<Option<Vec<_>>>()?;
        Some(GridSample { width, height, pixels })
    }

    fn neighbors(&self, row: usize, col: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (w, h) = (self.width as isize, self.height as isize);
        DIRS.iter().filter_map(move |(dr, dc)| {
            let (r, c) = (row as isize + dr, col as isize + dc);
            (r >= 0 && r < h && c >= 0 && c < w).then_some((r as usize, c as usize))
        })
    }

    /// Whether the on-pixels form one 4-connected simple path: every
    /// on-pixel has at most two on-neighbours, exactly two have one (unless
    /// the path is a single pixel), and the on-pixels are connected.
    pub fn is_simple_path(&self) -> bool {
        let on: Vec<(usize, usize)> = (0..self.height)
            .flat_map(|r| (0..self.width).map(move |c| (r, c)))
            .filter(|&(r, c)| self.get(r, c))
            .collect();
        if on.is_empty() {
            return false;
        }
        let degree = |&(r, c): &(usize, usize)| self.neighbors(r, c).filter(|&(a, b)| self.get(a, b)).count();
        if on.len() == 1 {
            return true;
        }
        let mut ends = 0;
        for p in &on {
            match degree(p) {
                1 => ends += 1,
                2 => {}
                _ => return false,
            }
        }
        if ends != 2 {
            return false;
        }
        let mut seen = vec![false; self.pixels.len()];
        let mut stack = vec![on[0]];
        seen[on[0].0 * self.width + on[0].1] = true;
        let mut reached = 1;
        while let Some((r, c)) = stack.pop() {
            for (a, b) in self.neighbors(r, c) {
                if self.get(a, b) && !seen[a * self.width + b] {
                    seen[a * self.width + b] = true;
                    reached += 1;
                    stack.push((a, b));
                }
            }
        }
        reached == on.len()
    }
}

// up, right, down, left: turning right is +1.
const DIRS: [(isize, isize); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

struct Walk {
    width: usize,
    height: usize,
    visited: Vec<bool>,
}

impl Walk {
    fn step(&self, (r, c): (usize, usize), dir: usize) -> Option<(usize, usize)> {
        let (dr, dc) = DIRS[dir];
        let (nr, nc) = (r as isize + dr, c as isize + dc);
        (nr >= 0 && nr < self.height as isize && nc >= 0 && nc < self.width as isize).then_some((nr as usize, nc as usize))
    }

    fn legal(&self, from: (usize, usize), dir: usize) -> Option<(usize, usize)> {
        let to = self.step(from, dir)?;
        if self.visited[to.0 * self.width + to.1] {
            return None;
        }
        for d in 0..4 {
            if let Some(nb) = self.step(to, d) {
                if nb != from && self.visited[nb.0 * self.width + nb.1] {
                    return None;
                }
            }
        }
        Some(to)
    }
}

fn generate_one(width: usize, height: usize, rng: &mut SpqnRng) -> GridSample {
    let mut walk = Walk {
        width,
        height,
        visited: vec![false; width * height],
    };
    let mut pos = (rng.random_range(0..height), rng.random_range(0..width));
    walk.visited[pos.0 * width + pos.1] = true;
    let mut heading = rng.random_range(0..4usize);

    let first = match walk.legal(pos, heading) {
        Some(to) => Some((heading, to)),
        None => {
            let options: Vec<(usize, (usize, usize))> = (0..4).filter_map(|d| walk.legal(pos, d).map(|to| (d, to))).collect();
            options.choose(rng).copied()
        }
    };
    let mut next = first;
    while let Some((dir, to)) = next {
        heading = dir;
        pos = to;
        walk.visited[pos.0 * width + pos.1] = true;
        let options: Vec<(usize, (usize, usize))> = [heading, (heading + 3) % 4, (heading + 1) % 4]
            .into_iter()
            .filter_map(|d| walk.legal(pos, d).map(|to| (d, to)))
            .collect();
        next = options.choose(rng).copied();
    }
    GridSample {
        width,
        height,
        pixels: walk.visited,
    }
}

/// `count` independent path images. Sample `i` uses random stream `i` of
/// `seed`, so results do not depend on generation order.
pub fn generate_path_dataset(width: usize, height: usize, count: usize, seed: u64) -> Vec<GridSample> {
    assert!(width >= 2 && height >= 2, "grid must be at least 2x2");
    let one = |i: usize| generate_one(width, height, &mut rng::stream(seed, i as u64));
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(one).collect()
    }
}

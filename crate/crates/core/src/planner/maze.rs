use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::se2::{wrap_angle, Pose2};

pub const CELL: f64 = 1.0;
pub const GOAL_RADIUS: f64 = 0.4;
pub const ROBOT_RADIUS: f64 = 0.35;
pub const FIELD_RESOLUTION: f64 = 0.25;
/// Stopping points keep at least this much extra clearance so that rounding
/// in later pose arithmetic cannot push them into a wall.
const SKIN: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum MazeError {
    #[error("maze is empty")]
    Empty,
    #[error("row {row} has width {got}, expected {want}")]
    Ragged { row: usize, got: usize, want: usize },
    #[error("unexpected character {ch:?} at row {row}, column {col}")]
    BadChar { ch: char, row: usize, col: usize },
    #[error("expected exactly one {0}")]
    Marker(char),
    #[error("{0} position collides with a wall")]
    Blocked(&'static str),
    #[error("goal is unreachable from the start")]
    Unreachable,
}

/// Axis-aligned wall segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

/// Shortest-path distances to the goal over a lattice of free positions.
#[derive(Debug, Clone)]
pub struct DistanceField {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    /// `f64::INFINITY` where the robot does not fit.
    pub dist: Vec<f64>,
}

impl DistanceField {
    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        [(i as f64 + 0.5) * self.h, (j as f64 + 0.5) * self.h]
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.dist[j * self.nx + i]
    }

    /// Largest finite value.
    pub fn max_finite(&self) -> f64 {
        self.dist.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max)
    }
}

/// Grid maze with unit wall cells; `y` points up the page.
#[derive(Debug, Clone)]
pub struct Maze {
    pub width: usize,
    pub height: usize,
    /// Row-major from the bottom row.
    walls: Vec<bool>,
    pub start: Pose2<f64>,
    pub goal: [f64; 2],
    pub goal_radius: f64,
    pub robot_radius: f64,
    pub field: DistanceField,
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Maze {
    /// Parses an ASCII grid of `#` walls, `.` floor, one `S` and one `G`.
    pub fn parse(text: &str) -> Result<Self, MazeError> {
        let rows: Vec<&str> = text.lines().map(|l| l.trim_end()).filter(|l| !l.is_empty()).collect();
        if rows.is_empty() {
            return Err(MazeError::Empty);
        }
        let width = rows[0].chars().count();
        let height = rows.len();
        let mut walls = vec![false; width * height];
        let (mut start, mut goal) = (Vec::new(), Vec::new());
        for (row, line) in rows.iter().enumerate() {
            let got = line.chars().count();
            if got != width {
                return Err(MazeError::Ragged { row, got, want: width });
            }
            let cy = height - 1 - row;
            for (col, ch) in line.chars().enumerate() {
                let centre = [col as f64 + 0.5, cy as f64 + 0.5];
                match ch {
                    '#' => walls[cy * width + col] = true,
                    '.' => {}
                    'S' => start.push(centre),
                    'G' => goal.push(centre),
                    _ => return Err(MazeError::BadChar { ch, row, col }),
                }
            }
        }
        if start.len() != 1 {
            return Err(MazeError::Marker('S'));
        }
        if goal.len() != 1 {
            return Err(MazeError::Marker('G'));
        }
        let s = start[0];
        let mut maze = Self {
            width,
            height,
            walls,
            start: Pose2::new(s[0] * CELL, s[1] * CELL, 0.0),
            goal: [goal[0][0] * CELL, goal[0][1] * CELL],
            goal_radius: GOAL_RADIUS,
            robot_radius: ROBOT_RADIUS,
            field: DistanceField { nx: 0, ny: 0, h: FIELD_RESOLUTION, dist: Vec::new() },
        };
        if maze.collides([maze.start.x, maze.start.y]) {
            return Err(MazeError::Blocked("start"));
        }
        if maze.collides(maze.goal) {
            return Err(MazeError::Blocked("goal"));
        }
        maze.field = maze.build_field();
        if !maze.distance(&maze.start).is_finite() {
            return Err(MazeError::Unreachable);
        }
        Ok(maze)
    }

    pub fn is_wall(&self, cx: i64, cy: i64) -> bool {
        if cx < 0 || cy < 0 || cx >= self.width as i64 || cy >= self.height as i64 {
            return true;
        }
        self.walls[cy as usize * self.width + cx as usize]
    }

    /// Distance from `p` to the nearest wall cell within `reach`, or `reach`
    /// if there is none that close.
    pub fn clearance(&self, p: [f64; 2], reach: f64) -> f64 {
        let mut best = reach;
        let (x0, x1) = (((p[0] - reach) / CELL).floor() as i64, ((p[0] + reach) / CELL).floor() as i64);
        let (y0, y1) = (((p[1] - reach) / CELL).floor() as i64, ((p[1] + reach) / CELL).floor() as i64);
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                if self.is_wall(cx, cy) {
                    let lo = [cx as f64 * CELL, cy as f64 * CELL];
                    let dx = (lo[0] - p[0]).max(p[0] - lo[0] - CELL).max(0.0);
                    let dy = (lo[1] - p[1]).max(p[1] - lo[1] - CELL).max(0.0);
                    best = best.min(dx.hypot(dy));
                }
            }
        }
        best
    }

    /// The robot's disk at `p` overlaps a wall.
    pub fn collides(&self, p: [f64; 2]) -> bool {
        self.clearance(p, self.robot_radius) < self.robot_radius
    }

    fn touches(&self, p: [f64; 2]) -> bool {
        let r = self.robot_radius + SKIN;
        self.clearance(p, r) < r
    }

    /// First pose of a trajectory whose disk overlaps a wall.
    pub fn collide(&self, trajectory: &[Pose2<f64>]) -> Option<usize> {
        trajectory.iter().position(|p| self.collides([p.x, p.y]))
    }

    /// Last collision-free point of the constant-twist motion from `a` by
    /// the body-frame displacement `delta`, as a fraction of the motion;
    /// `None` if the whole motion is free.
    ///
    /// Checks points no more than `step` apart along the arc, then bisects.
    pub fn sweep(&self, a: &Pose2<f64>, delta: &Pose2<f64>, step: f64) -> Option<f64> {
        let tw = delta.log();
        let len = tw[0].hypot(tw[1]);
        let n = ((len / step).ceil() as usize).max(1);
        let at = |t: f64| {
            let p = a.compose(&Pose2::exp(tw, t));
            [p.x, p.y]
        };
        let mut prev = 0.0;
        for k in 1..=n {
            let t = k as f64 / n as f64;
            if self.collides(at(t)) {
                return Some(self.bisect(|t| self.touches(at(t)), prev, t));
            }
            prev = t;
        }
        None
    }

    fn bisect(&self, hit: impl Fn(f64) -> bool, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if hit(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// Cuts a trajectory at its first collision. The last pose is the
    /// furthest collision-free point between the two samples around it.
    pub fn truncate(&self, trajectory: &[Pose2<f64>]) -> Option<Vec<Pose2<f64>>> {
        let k = self.collide(trajectory)?;
        if k == 0 {
            return Some(vec![trajectory[0]]);
        }
        let (a, b) = (trajectory[k - 1], trajectory[k]);
        let t = self.bisect(|t| self.touches(lerp(&a, &b, t)), 0.0, 1.0);
        let mut out = trajectory[..k].to_vec();
        let dyaw = wrap_angle(b.yaw - a.yaw);
        let p = lerp(&a, &b, t);
        out.push(Pose2::new(p[0], p[1], a.yaw + t * dyaw));
        Some(out)
    }

    pub fn at_goal(&self, p: &Pose2<f64>) -> bool {
        (p.x - self.goal[0]).hypot(p.y - self.goal[1]) <= self.goal_radius
    }

    fn build_field(&self) -> DistanceField {
        let h = FIELD_RESOLUTION;
        let nx = (self.width as f64 * CELL / h).round() as usize;
        let ny = (self.height as f64 * CELL / h).round() as usize;
        let mut f = DistanceField { nx, ny, h, dist: vec![f64::INFINITY; nx * ny] };
        let free: Vec<bool> = (0..nx * ny).map(|n| !self.collides(f.node(n % nx, n / nx))).collect();
        let mut heap = BinaryHeap::new();
        for n in 0..nx * ny {
            let p = f.node(n % nx, n / nx);
            let d = (p[0] - self.goal[0]).hypot(p[1] - self.goal[1]);
            if free[n] && d <= self.goal_radius {
                f.dist[n] = d;
                heap.push(Item(d, n));
            }
        }
        let diag = h * std::f64::consts::SQRT_2;
        while let Some(Item(d, n)) = heap.pop() {
            if d > f.dist[n] {
                continue;
            }
            let (i, j) = ((n % nx) as i64, (n / nx) as i64);
            for (di, dj) in [(-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)] {
                let (a, b) = (i + di, j + dj);
                if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                    continue;
                }
                let m = b as usize * nx + a as usize;
                if !free[m] {
                    continue;
                }
                // no corner cutting
                if di != 0 && dj != 0 && (!free[j as usize * nx + a as usize] || !free[b as usize * nx + i as usize]) {
                    continue;
                }
                let nd = d + if di != 0 && dj != 0 { diag } else { h };
                if nd < f.dist[m] {
                    f.dist[m] = nd;
                    heap.push(Item(nd, m));
                }
            }
        }
        f
    }

    /// Path distance from `p` to the goal: exact inside the goal disk,
    /// otherwise through the best nearby lattice node.
    pub fn distance(&self, p: &Pose2<f64>) -> f64 {
        let g = (p.x - self.goal[0]).hypot(p.y - self.goal[1]);
        if g <= self.goal_radius {
            return g;
        }
        let f = &self.field;
        let ci = (p.x / f.h - 0.5).floor() as i64;
        let cj = (p.y / f.h - 0.5).floor() as i64;
        let mut best = f64::INFINITY;
        for ring in 1..=4i64 {
            for j in cj - ring + 1..=cj + ring {
                for i in ci - ring + 1..=ci + ring {
                    if i < 0 || j < 0 || i >= f.nx as i64 || j >= f.ny as i64 {
                        continue;
                    }
                    let d = f.at(i as usize, j as usize);
                    if d.is_finite() {
                        let q = f.node(i as usize, j as usize);
                        best = best.min(d + (q[0] - p.x).hypot(q[1] - p.y));
                    }
                }
            }
            if best.is_finite() {
                break;
            }
        }
        best
    }

    /// Boundaries between wall cells and floor (including the outer edge),
    /// merged into maximal straight runs.
    pub fn wall_segments(&self) -> Vec<Segment> {
        let (w, h) = (self.width as i64, self.height as i64);
        let mut out = Vec::new();
        // horizontal edges at y = cy, between cell rows cy - 1 and cy
        for cy in 0..=h {
            let mut run: Option<i64> = None;
            for cx in 0..=w {
                let edge = cx < w && self.is_wall(cx, cy - 1) != self.is_wall(cx, cy);
                match (edge, run) {
                    (true, None) => run = Some(cx),
                    (false, Some(s)) => {
                        out.push(Segment { a: [s as f64 * CELL, cy as f64 * CELL], b: [cx as f64 * CELL, cy as f64 * CELL] });
                        run = None;
                    }
                    _ => {}
                }
            }
        }
        for cx in 0..=w {
            let mut run: Option<i64> = None;
            for cy in 0..=h {
                let edge = cy < h && self.is_wall(cx - 1, cy) != self.is_wall(cx, cy);
                match (edge, run) {
                    (true, None) => run = Some(cy),
                    (false, Some(s)) => {
                        out.push(Segment { a: [cx as f64 * CELL, s as f64 * CELL], b: [cx as f64 * CELL, cy as f64 * CELL] });
                        run = None;
                    }
                    _ => {}
                }
            }
        }
        out
    }
}

fn lerp(a: &Pose2<f64>, b: &Pose2<f64>, t: f64) -> [f64; 2] {
    [a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)]
}

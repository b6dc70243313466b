//! NAV-style grid navigation: a point mass whose velocity is pulled toward
//! the desired velocity of the cell it occupies.
//!
//! # Map files
//!
//! Maps are TOML:
//!
//! ```toml
//! name = "corridor"
//! time_step = 0.01        # optional, seconds
//! max_time = 100.0        # optional, seconds
//! dynamics = [[-1.2, 0.1], [0.1, -1.2]]   # optional
//! initial_lower = [0.2, 0.2, -0.5, -0.5]  # x, y, vx, vy
//! initial_upper = [0.8, 0.8, 0.5, 0.5]
//! grid = """
//! 2 2 T
//! 0 0 2
//! """
//! ```
//!
//! The grid is written top row first. Tokens are `0`..`7` (desired velocity
//! at angle `i·π/4`), `T` (terminal) and `x` (forbidden). Cell `(col, row)`
//! with `row` counted from the bottom covers `[col, col+1] × [row, row+1]`
//! and has ID `row·width + col`.

use std::f64::consts::FRAC_PI_4;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BenchmarkError, SimTrace, TraceSimulator};
use crate::geometry::InputBox;
use crate::regions::ModeSequence;
use crate::simulator::{SimError, Simulator};

/// Final token when the trajectory leaves the grid.
pub const OUT_OF_BOUNDS: &str = "out";

const DEFAULT_DYNAMICS: [[f64; 2]; 2] = [[-1.2, 0.1], [0.1, -1.2]];
const MAX_TRANSITIONS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellKind {
    Velocity(u8),
    Terminal,
    Forbidden,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NavMap {
    pub name: String,
    width: usize,
    height: usize,
    /// Indexed by cell ID.
    cells: Vec<CellKind>,
    pub dynamics: [[f64; 2]; 2],
    initial_box: InputBox,
    time_step: f64,
    pub max_time: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMap {
    #[serde(default)]
    name: String,
    time_step: Option<f64>,
    max_time: Option<f64>,
    dynamics: Option<[[f64; 2]; 2]>,
    initial_lower: Vec<f64>,
    initial_upper: Vec<f64>,
    grid: String,
}

impl NavMap {
    pub fn parse(text: &str) -> Result<Self, BenchmarkError> {
        let raw: RawMap = toml::from_str(text).map_err(|e| BenchmarkError::Parse(e.to_string()))?;
        let rows: Vec<Vec<&str>> = raw
            .grid
            .lines()
            .map(|l| l.split_whitespace().collect::<Vec<_>>())
            .filter(|r| !r.is_empty())
            .collect();
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if width == 0 {
            return Err(BenchmarkError::Invalid("grid is empty".into()));
        }
        let mut cells = vec![CellKind::Forbidden; width * height];
        for (top, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(BenchmarkError::Invalid(format!(
                    "grid row {} has {} cells, expected {width}",
                    top + 1,
                    row.len()
                )));
            }
            let r = height - 1 - top;
            for (c, tok) in row.iter().enumerate() {
                cells[r * width + c] = match *tok {
                    "T" => CellKind::Terminal,
                    "x" => CellKind::Forbidden,
                    d => match d.parse::<u8>() {
                        Ok(i) if i < 8 => CellKind::Velocity(i),
                        _ => return Err(BenchmarkError::Invalid(format!("unknown grid token `{d}`"))),
                    },
                };
            }
        }
        let initial_box = InputBox::new(raw.initial_lower, raw.initial_upper)
            .map_err(|e| BenchmarkError::Invalid(format!("initial box: {e}")))?;
        Self::new(
            raw.name,
            width,
            height,
            cells,
            raw.dynamics.unwrap_or(DEFAULT_DYNAMICS),
            initial_box,
            raw.time_step.unwrap_or(0.01),
            raw.max_time.unwrap_or(100.0),
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: String,
        width: usize,
        height: usize,
        cells: Vec<CellKind>,
        dynamics: [[f64; 2]; 2],
        initial_box: InputBox,
        time_step: f64,
        max_time: f64,
    ) -> Result<Self, BenchmarkError> {
        if width == 0 || height == 0 || cells.len() != width * height {
            return Err(BenchmarkError::Invalid("grid shape does not match cell count".into()));
        }
        if !cells.contains(&CellKind::Terminal) {
            return Err(BenchmarkError::Invalid("map needs at least one terminal cell".into()));
        }
        if cells.iter().any(|c| matches!(c, CellKind::Velocity(i) if *i >= 8)) {
            return Err(BenchmarkError::Invalid("desired velocity index must be 0-7".into()));
        }
        if !(time_step > 0.0 && time_step.is_finite()) {
            return Err(BenchmarkError::Invalid("time_step must be positive".into()));
        }
        if !(max_time > 0.0 && max_time.is_finite()) {
            return Err(BenchmarkError::Invalid("max_time must be positive".into()));
        }
        if dynamics.iter().flatten().any(|v| !v.is_finite()) {
            return Err(BenchmarkError::Invalid("dynamics must be finite".into()));
        }
        if initial_box.dimension() != 4 {
            return Err(BenchmarkError::Invalid("initial box must be 4-dimensional (x, y, vx, vy)".into()));
        }
        let (l, u) = (initial_box.lower(), initial_box.upper());
        if l[0] < 0.0 || l[1] < 0.0 || u[0] > width as f64 || u[1] > height as f64 {
            return Err(BenchmarkError::Invalid("initial positions must lie inside the grid".into()));
        }
        Ok(Self {
            name,
            width,
            height,
            cells,
            dynamics,
            initial_box,
            time_step,
            max_time,
        })
    }

    pub fn load(path: &Path) -> Result<Self, BenchmarkError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchmarkError::io(path, e))?;
        Self::parse(&text)
    }

    /// The 5×5 map shipped with the crate.
    pub fn reference() -> Self {
        Self::parse(include_str!("../../assets/nav_reference_5x5.toml")).expect("shipped map is valid")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn time_step(&self) -> f64 {
        self.time_step
    }

    pub fn with_time_step(mut self, dt: f64) -> Result<Self, BenchmarkError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(BenchmarkError::Invalid("time_step must be positive".into()));
        }
        self.time_step = dt;
        Ok(self)
    }

    pub fn initial_box(&self) -> &InputBox {
        &self.initial_box
    }

    pub fn cell(&self, col: usize, row: usize) -> CellKind {
        self.cells[self.cell_id(col, row)]
    }

    pub fn cell_id(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    pub fn desired_velocity(index: u8) -> [f64; 2] {
        let a = f64::from(index) * FRAC_PI_4;
        [a.cos(), a.sin()]
    }
}

/// A [`NavMap`] as a simulator over initial states `(x, y, vx, vy)`.
#[derive(Debug, Clone)]
pub struct NavSystem {
    map: NavMap,
}

type State = [f64; 4];

impl NavSystem {
    pub fn new(map: NavMap) -> Self {
        Self { map }
    }

    pub fn map(&self) -> &NavMap {
        &self.map
    }

    pub fn input_box(&self) -> InputBox {
        self.map.initial_box.clone()
    }

    fn deriv(&self, s: &State, vd: [f64; 2]) -> State {
        let a = &self.map.dynamics;
        let d = [s[2] - vd[0], s[3] - vd[1]];
        [s[2], s[3], a[0][0] * d[0] + a[0][1] * d[1], a[1][0] * d[0] + a[1][1] * d[1]]
    }

    fn rk4(&self, s: &State, vd: [f64; 2], h: f64) -> State {
        let add = |a: &State, k: &State, f: f64| [a[0] + f * k[0], a[1] + f * k[1], a[2] + f * k[2], a[3] + f * k[3]];
        let k1 = self.deriv(s, vd);
        let k2 = self.deriv(&add(s, &k1, h / 2.0), vd);
        let k3 = self.deriv(&add(s, &k2, h / 2.0), vd);
        let k4 = self.deriv(&add(s, &k3, h), vd);
        let mut out = *s;
        for i in 0..4 {
            out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out
    }

    /// Time in `(0, h]` at which coordinate `axis` reaches `boundary`,
    /// refined by regula falsi (Illinois variant) on RK4 sub-steps.
    fn crossing(&self, s: &State, vd: [f64; 2], h: f64, axis: usize, boundary: f64) -> f64 {
        let g = |t: f64| self.rk4(s, vd, t)[axis] - boundary;
        let (mut a, mut b) = (0.0, h);
        let (mut ga, mut gb) = (s[axis] - boundary, g(h));
        if ga == 0.0 {
            return 0.0;
        }
        let mut side = 0;
        for _ in 0..60 {
            let c = (a * gb - b * ga) / (gb - ga);
            let gc = g(c);
            if gc == 0.0 || (b - a) <= 1e-15 * h.max(1.0) {
                return c;
            }
            if (gc > 0.0) == (gb > 0.0) {
                b = c;
                gb = gc;
                if side == 1 {
                    ga /= 2.0;
                }
                side = 1;
            } else {
                a = c;
                ga = gc;
                if side == -1 {
                    gb /= 2.0;
                }
                side = -1;
            }
            if gc.abs() < 1e-13 {
                return c;
            }
        }
        b
    }

    fn token(&self, col: usize, row: usize) -> String {
        let id = self.map.cell_id(col, row);
        match self.map.cells[id] {
            CellKind::Forbidden => format!("x{id}"),
            _ => id.to_string(),
        }
    }

    fn run(&self, x0: &[f64], mut trace: Option<&mut SimTrace>) -> Result<ModeSequence, SimError> {
        let out_of_domain = |reason: &str| SimError::OutOfDomain {
            point: x0.to_vec(),
            reason: reason.to_string(),
        };
        if x0.len() != 4 {
            return Err(out_of_domain("expected (x, y, vx, vy)"));
        }
        if !self.map.initial_box.contains(x0) {
            return Err(out_of_domain("outside the map's initial box"));
        }
        let (w, h) = (self.map.width as f64, self.map.height as f64);
        if !(0.0..=w).contains(&x0[0]) || !(0.0..=h).contains(&x0[1]) {
            return Err(out_of_domain("initial position outside the grid"));
        }
        let mut s: State = [x0[0], x0[1], x0[2], x0[3]];
        let mut col = (s[0].floor() as usize).min(self.map.width - 1);
        let mut row = (s[1].floor() as usize).min(self.map.height - 1);
        let mut tokens = vec![self.token(col, row)];
        let mut t = 0.0;
        let mut record = |t: f64, s: &State, tok: &str| {
            if let Some(tr) = trace.as_deref_mut() {
                if tr.end_time().is_some_and(|last| t <= last) {
                    return;
                }
                tr.push(t, s.to_vec(), tok).expect("finite, increasing samples");
            }
        };
        record(t, &s, &tokens[0]);

        let dt = self.map.time_step;
        let mut transitions = 0;
        loop {
            let kind = self.map.cell(col, row);
            let vd = match kind {
                CellKind::Velocity(i) => NavMap::desired_velocity(i),
                CellKind::Terminal | CellKind::Forbidden => break,
            };
            if t >= self.map.max_time - 1e-12 || transitions >= MAX_TRANSITIONS {
                break;
            }
            let step = dt.min(self.map.max_time - t);
            let next = self.rk4(&s, vd, step);
            if next.iter().any(|v| !v.is_finite()) {
                return Err(SimError::NonFinite(format!("state diverged at t = {t}")));
            }
            // Exits through the current cell's closed bounds, per axis.
            let bounds = [(col as f64, col as f64 + 1.0), (row as f64, row as f64 + 1.0)];
            let mut exits = [None, None];
            for axis in 0..2 {
                let (lo, hi) = bounds[axis];
                if next[axis] < lo {
                    exits[axis] = Some((lo, -1isize));
                } else if next[axis] > hi {
                    exits[axis] = Some((hi, 1isize));
                }
            }
            if exits == [None, None] {
                s = next;
                t += step;
                let tok = tokens.last().expect("non-empty").clone();
                record(t, &s, &tok);
                continue;
            }
            let taus: Vec<(usize, f64)> = (0..2)
                .filter_map(|axis| exits[axis].map(|(b, _)| (axis, self.crossing(&s, vd, step, axis, b))))
                .collect();
            let tau = taus.iter().map(|&(_, t)| t).fold(f64::INFINITY, f64::min);
            let mut crossed = self.rk4(&s, vd, tau);
            let (mut ncol, mut nrow) = (col as isize, row as isize);
            for &(axis, ta) in &taus {
                let (b, dir) = exits[axis].expect("exit recorded");
                // A second axis counts only if it has reached its boundary too.
                let reached = ta <= tau + 1e-12 * step || (crossed[axis] - b) * dir as f64 >= -1e-12;
                if reached {
                    crossed[axis] = b;
                    if axis == 0 {
                        ncol += dir;
                    } else {
                        nrow += dir;
                    }
                }
            }
            s = crossed;
            t += tau;
            transitions += 1;
            if ncol < 0 || nrow < 0 || ncol >= self.map.width as isize || nrow >= self.map.height as isize {
                tokens.push(OUT_OF_BOUNDS.to_string());
                record(t, &s, OUT_OF_BOUNDS);
                break;
            }
            col = ncol as usize;
            row = nrow as usize;
            let tok = self.token(col, row);
            record(t, &s, &tok);
            tokens.push(tok);
        }
        Ok(ModeSequence::new(tokens))
    }
}

impl Simulator for NavSystem {
    fn dimension(&self) -> usize {
        4
    }

    fn simulate(&mut self, x: &[f64]) -> Result<ModeSequence, SimError> {
        self.run(x, None)
    }
}

impl TraceSimulator for NavSystem {
    fn dimension(&self) -> usize {
        4
    }

    /// Signals `x, y, vx, vy`; discrete column `cell`.
    fn trace(&mut self, x: &[f64]) -> Result<SimTrace, SimError> {
        let mut tr = SimTrace::new(vec!["x".into(), "y".into(), "vx".into(), "vy".into()], "cell");
        self.run(x, Some(&mut tr))?;
        Ok(tr)
    }
}

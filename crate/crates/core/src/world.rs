//! Scenario model, scenario-file parsing and the geometric queries shared by
//! the behaviors, the planner and the tracking simulator.
//!
//! Obstacles are discs. Distances to an obstacle are *surface* distances:
//! `|p - center| - radius`, negative inside the disc.

use std::fmt;

use thiserror::Error;

use crate::dynamics::Pose;

/// A point in the world frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bounds {
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    pub fn clamp(&self, p: Point) -> Point {
        Point::new(p.x.clamp(self.min_x, self.max_x), p.y.clamp(self.min_y, self.max_y))
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleObstacle {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
}

impl CircleObstacle {
    pub fn center(&self) -> Point {
        Point::new(self.cx, self.cy)
    }

    /// Signed distance from `p` to the disc surface.
    pub fn surface_distance(&self, p: Point) -> f64 {
        p.distance(self.center()) - self.radius
    }
}

/// Result of [`Scenario::nearest_obstacle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleQuery {
    /// Surface distance in meters; `f64::INFINITY` when the scene is empty.
    pub distance: f64,
    /// World-frame bearing from the query point to the obstacle center.
    pub bearing: f64,
    pub index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub bounds: Bounds,
    pub start: Pose,
    pub goal: Point,
    pub obstacles: Vec<CircleObstacle>,
    pub margin: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("invalid scenario: {0}")]
    Validation(String),
}

fn parse_err(line: usize, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Parse { line, message: message.into() }
}

fn parse_numbers(line: usize, key: &str, rest: &str, expected: usize) -> Result<Vec<f64>, ScenarioError> {
    let values = rest
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| parse_err(line, format!("`{key}`: cannot parse `{tok}` as a number")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != expected {
        return Err(parse_err(
            line,
            format!("`{key}` expects {expected} values, found {}", values.len()),
        ));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(parse_err(line, format!("`{key}`: non-finite value {v}")));
    }
    Ok(values)
}

impl Scenario {
    /// Parses and validates scenario-file text.
    ///
    /// Blank lines and `#` comments are ignored. `bounds`, `start` and `goal`
    /// are required; `margin` defaults to 0. Unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut bounds = None;
        let mut start = None;
        let mut goal = None;
        let mut margin = None;
        let mut obstacles = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, rest) = line
                .split_once(':')
                .ok_or_else(|| parse_err(line_no, format!("expected `key: values`, found `{line}`")))?;
            let key = key.trim();
            let dup = |seen: bool| {
                if seen {
                    Err(parse_err(line_no, format!("duplicate key `{key}`")))
                } else {
                    Ok(())
                }
            };
            match key {
                "bounds" => {
                    dup(bounds.is_some())?;
                    let v = parse_numbers(line_no, key, rest, 4)?;
                    bounds = Some(Bounds { min_x: v[0], min_y: v[1], max_x: v[2], max_y: v[3] });
                }
                "start" => {
                    dup(start.is_some())?;
                    let v = parse_numbers(line_no, key, rest, 3)?;
                    start = Some(Pose::new(v[0], v[1], v[2]));
                }
                "goal" => {
                    dup(goal.is_some())?;
                    let v = parse_numbers(line_no, key, rest, 2)?;
                    goal = Some(Point::new(v[0], v[1]));
                }
                "margin" => {
                    dup(margin.is_some())?;
                    margin = Some(parse_numbers(line_no, key, rest, 1)?[0]);
                }
                "obstacle" => {
                    let v = parse_numbers(line_no, key, rest, 3)?;
                    obstacles.push(CircleObstacle { cx: v[0], cy: v[1], radius: v[2] });
                }
                other => return Err(parse_err(line_no, format!("unknown key `{other}`"))),
            }
        }

        let scenario = Scenario {
            bounds: bounds.ok_or(ScenarioError::MissingKey("bounds"))?,
            start: start.ok_or(ScenarioError::MissingKey("start"))?,
            goal: goal.ok_or(ScenarioError::MissingKey("goal"))?,
            obstacles,
            margin: margin.unwrap_or(0.0),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |m: String| Err(ScenarioError::Validation(m));
        let b = &self.bounds;
        if !(b.min_x < b.max_x && b.min_y < b.max_y) {
            return invalid("bounds must satisfy min < max on both axes".into());
        }
        if self.margin.is_nan() || self.margin < 0.0 {
            return invalid(format!("margin must be >= 0, got {}", self.margin));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if o.radius.is_nan() || o.radius <= 0.0 {
                return invalid(format!("obstacle {i}: radius must be > 0, got {}", o.radius));
            }
            if o.cx - o.radius < b.min_x
                || o.cx + o.radius > b.max_x
                || o.cy - o.radius < b.min_y
                || o.cy + o.radius > b.max_y
            {
                return invalid(format!("obstacle {i} extends outside bounds"));
            }
        }
        if !self.start.is_finite() {
            return invalid("start pose is not finite".into());
        }
        if !b.contains(self.start.position()) {
            return invalid("start outside bounds".into());
        }
        if !b.contains(self.goal) {
            return invalid("goal outside bounds".into());
        }
        if self.inside_inflated(self.start.position()) {
            return invalid("start inside inflated obstacle".into());
        }
        if self.inside_inflated(self.goal) {
            return invalid("goal inside inflated obstacle".into());
        }
        Ok(())
    }

    fn inside_inflated(&self, p: Point) -> bool {
        self.obstacles.iter().any(|o| o.surface_distance(p) < self.margin)
    }

    /// Canonical text form; `parse(to_text())` reproduces the scenario exactly.
    pub fn to_text(&self) -> String {
        self.to_string()
    }

    /// Nearest obstacle by surface distance. Ties go to the lowest index.
    pub fn nearest_obstacle(&self, p: Point) -> ObstacleQuery {
        let mut best = ObstacleQuery { distance: f64::INFINITY, bearing: 0.0, index: None };
        for (i, o) in self.obstacles.iter().enumerate() {
            let d = o.surface_distance(p);
            if best.index.is_none() || d < best.distance {
                best = ObstacleQuery {
                    distance: d,
                    bearing: (o.cy - p.y).atan2(o.cx - p.x),
                    index: Some(i),
                };
            }
        }
        best
    }

    /// True iff the closed segment `p1`-`p2` touches any margin-inflated disc.
    pub fn segment_collides(&self, p1: Point, p2: Point) -> bool {
        self.obstacles
            .iter()
            .any(|o| point_segment_distance(o.center(), p1, p2) <= o.radius + self.margin)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = &self.bounds;
        writeln!(f, "bounds: {} {} {} {}", b.min_x, b.min_y, b.max_x, b.max_y)?;
        writeln!(f, "start: {} {} {}", self.start.x, self.start.y, self.start.theta)?;
        writeln!(f, "goal: {} {}", self.goal.x, self.goal.y)?;
        writeln!(f, "margin: {}", self.margin)?;
        for o in &self.obstacles {
            writeln!(f, "obstacle: {} {} {}", o.cx, o.cy, o.radius)?;
        }
        Ok(())
    }
}

/// Euclidean distance from `p` to the closed segment `a`-`b`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(Point::new(a.x + t * dx, a.y + t * dy))
}

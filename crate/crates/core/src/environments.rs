//! Built-in parametric grid environments.
//!
//! `MiniTaxi` is a fuel-constrained taxi on a grid, `Avoidance` an agent
//! evading a chasing obstacle. Both are addressed from the command line by
//! `builtin:<name>?key=value&...` URIs.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{ActionId, Distribution, EnvironmentModel, LabelSet, StateVector};

/// A grid cell `(x, y)`. `y` grows northwards.
pub type Cell = (i64, i64);

fn in_grid(cell: Cell, width: i64, height: i64) -> bool {
    (0..width).contains(&cell.0) && (0..height).contains(&cell.1)
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

const MOVES: [(i64, i64); 4] = [(0, 1), (0, -1), (1, 0), (-1, 0)];

#[derive(Clone, Debug, PartialEq)]
pub struct MiniTaxiConfig {
    pub width: i64,
    pub height: i64,
    pub max_fuel: i64,
    pub start: Cell,
    pub station: Cell,
    pub passenger_spawn: Cell,
    pub destination: Cell,
    pub jobs_target: i64,
}

impl Default for MiniTaxiConfig {
    fn default() -> Self {
        MiniTaxiConfig {
            width: 4,
            height: 4,
            max_fuel: 8,
            start: (0, 0),
            station: (3, 0),
            passenger_spawn: (0, 3),
            destination: (3, 3),
            jobs_target: 2,
        }
    }
}

impl MiniTaxiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width < 1 || self.height < 1 || self.width * self.height < 2 {
            return Err(Error::InvalidConfig(format!(
                "grid {}x{} must have at least two cells",
                self.width, self.height
            )));
        }
        for (name, cell) in [
            ("start", self.start),
            ("station", self.station),
            ("passenger_spawn", self.passenger_spawn),
            ("destination", self.destination),
        ] {
            if !in_grid(cell, self.width, self.height) {
                return Err(Error::InvalidConfig(format!(
                    "{name} {cell:?} lies outside the grid"
                )));
            }
        }
        if self.max_fuel < 1 {
            return Err(Error::InvalidConfig("max_fuel must be at least 1".into()));
        }
        if self.jobs_target < 1 {
            return Err(Error::InvalidConfig("jobs_target must be at least 1".into()));
        }
        Ok(())
    }
}

/// Taxi with a fuel tank, one passenger at a time and a refuelling station.
///
/// State `[x, y, fuel, on_board, jobs_done]`. Moves cost one unit of fuel;
/// pickup, dropoff and refuel are free. With an empty tank every action is
/// a self-loop. `jobs_done` saturates at `jobs_target` so the state space
/// stays finite.
#[derive(Clone, Debug)]
pub struct MiniTaxi {
    config: MiniTaxiConfig,
    features: Vec<String>,
    actions: Vec<String>,
}

pub mod taxi_action {
    pub const NORTH: usize = 0;
    pub const SOUTH: usize = 1;
    pub const EAST: usize = 2;
    pub const WEST: usize = 3;
    pub const PICKUP: usize = 4;
    pub const DROPOFF: usize = 5;
    pub const REFUEL: usize = 6;
}

pub fn mini_taxi(config: MiniTaxiConfig) -> Result<MiniTaxi> {
    config.validate()?;
    Ok(MiniTaxi {
        config,
        features: names(&["x", "y", "fuel", "on_board", "jobs_done"]),
        actions: names(&[
            "north", "south", "east", "west", "pickup", "dropoff", "refuel",
        ]),
    })
}

impl MiniTaxi {
    pub fn config(&self) -> &MiniTaxiConfig {
        &self.config
    }

    fn unpack(s: &StateVector) -> (Cell, i64, i64, i64) {
        let f = s.features();
        ((f[0], f[1]), f[2], f[3], f[4])
    }

    fn step(&self, s: &StateVector, action: ActionId) -> Option<StateVector> {
        use taxi_action::*;
        let c = &self.config;
        let ((x, y), fuel, on_board, jobs) = Self::unpack(s);
        if fuel == 0 {
            return Some(s.clone());
        }
        match action {
            NORTH | SOUTH | EAST | WEST => {
                let (dx, dy) = MOVES[action];
                let next = (x + dx, y + dy);
                in_grid(next, c.width, c.height)
                    .then(|| StateVector(vec![next.0, next.1, fuel - 1, on_board, jobs]))
            }
            PICKUP => ((x, y) == c.passenger_spawn && on_board == 0)
                .then(|| StateVector(vec![x, y, fuel, 1, jobs])),
            DROPOFF => ((x, y) == c.destination && on_board == 1).then(|| {
                StateVector(vec![x, y, fuel, 0, (jobs + 1).min(c.jobs_target)])
            }),
            REFUEL => ((x, y) == c.station).then(|| StateVector(vec![x, y, c.max_fuel, on_board, jobs])),
            _ => None,
        }
    }
}

impl EnvironmentModel for MiniTaxi {
    fn feature_schema(&self) -> &[String] {
        &self.features
    }

    fn action_schema(&self) -> &[String] {
        &self.actions
    }

    fn initial(&self) -> StateVector {
        let c = &self.config;
        StateVector(vec![c.start.0, c.start.1, c.max_fuel, 0, 0])
    }

    fn available_actions(&self, state: &StateVector) -> Vec<ActionId> {
        (0..self.actions.len())
            .filter(|&a| self.step(state, a).is_some())
            .collect()
    }

    fn successors(&self, state: &StateVector, action: ActionId) -> Result<Distribution> {
        self.step(state, action).map(Distribution::point).ok_or_else(|| {
            Error::InvalidModel(format!(
                "action `{}` is not available in state {state}",
                self.actions.get(action).map(String::as_str).unwrap_or("?")
            ))
        })
    }

    fn labels(&self, state: &StateVector) -> LabelSet {
        let c = &self.config;
        let ((x, y), fuel, on_board, jobs) = Self::unpack(state);
        let mut labels = LabelSet::new();
        if fuel == 0 {
            labels.insert("empty".into());
        }
        if jobs >= c.jobs_target {
            labels.insert("jobs_done_target".into());
        }
        if on_board == 1 {
            labels.insert("passenger".into());
        }
        if (x, y) == c.station {
            labels.insert("gas_station".into());
        }
        labels
    }

    fn reward(&self, state: &StateVector, action: ActionId) -> f64 {
        let ((x, y), _, on_board, _) = Self::unpack(state);
        if action == taxi_action::DROPOFF && (x, y) == self.config.destination && on_board == 1 {
            20.0
        } else {
            -1.0
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AvoidanceConfig {
    pub width: i64,
    pub height: i64,
    pub agent_start: Cell,
    pub obstacle_start: Cell,
    pub obstacle_move_prob: f64,
    /// Suggested step bound for bounded safety properties.
    pub horizon_hint: u32,
}

impl Default for AvoidanceConfig {
    fn default() -> Self {
        AvoidanceConfig {
            width: 4,
            height: 4,
            agent_start: (0, 0),
            obstacle_start: (3, 3),
            obstacle_move_prob: 0.5,
            horizon_hint: 10,
        }
    }
}

impl AvoidanceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width < 1 || self.height < 1 {
            return Err(Error::InvalidConfig("grid must be non-empty".into()));
        }
        for (name, cell) in [
            ("agent_start", self.agent_start),
            ("obstacle_start", self.obstacle_start),
        ] {
            if !in_grid(cell, self.width, self.height) {
                return Err(Error::InvalidConfig(format!(
                    "{name} {cell:?} lies outside the grid"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.obstacle_move_prob) {
            return Err(Error::InvalidConfig(format!(
                "obstacle_move_prob {} is not a probability",
                self.obstacle_move_prob
            )));
        }
        Ok(())
    }
}

/// Agent on a grid chased by an obstacle.
///
/// State `[ax, ay, ox, oy]`. The agent moves first, deterministically; the
/// obstacle then takes one step toward the agent's new cell with probability
/// `obstacle_move_prob`, preferring the x axis whenever it can close the gap
/// there.
#[derive(Clone, Debug)]
pub struct Avoidance {
    config: AvoidanceConfig,
    features: Vec<String>,
    actions: Vec<String>,
}

pub mod avoid_action {
    pub const NORTH: usize = 0;
    pub const SOUTH: usize = 1;
    pub const EAST: usize = 2;
    pub const WEST: usize = 3;
    pub const STAY: usize = 4;
}

pub fn avoidance(config: AvoidanceConfig) -> Result<Avoidance> {
    config.validate()?;
    Ok(Avoidance {
        config,
        features: names(&["ax", "ay", "ox", "oy"]),
        actions: names(&["north", "south", "east", "west", "stay"]),
    })
}

impl Avoidance {
    pub fn config(&self) -> &AvoidanceConfig {
        &self.config
    }

    fn agent_move(&self, s: &StateVector, action: ActionId) -> Option<Cell> {
        let f = s.features();
        let (dx, dy) = match action {
            avoid_action::STAY => (0, 0),
            a if a < 4 => MOVES[a],
            _ => return None,
        };
        let next = (f[0] + dx, f[1] + dy);
        in_grid(next, self.config.width, self.config.height).then_some(next)
    }
}

fn chase(obstacle: Cell, target: Cell) -> Cell {
    let dx = (target.0 - obstacle.0).signum();
    let dy = (target.1 - obstacle.1).signum();
    if dx != 0 {
        (obstacle.0 + dx, obstacle.1)
    } else {
        (obstacle.0, obstacle.1 + dy)
    }
}

impl EnvironmentModel for Avoidance {
    fn feature_schema(&self) -> &[String] {
        &self.features
    }

    fn action_schema(&self) -> &[String] {
        &self.actions
    }

    fn initial(&self) -> StateVector {
        let c = &self.config;
        StateVector(vec![
            c.agent_start.0,
            c.agent_start.1,
            c.obstacle_start.0,
            c.obstacle_start.1,
        ])
    }

    fn available_actions(&self, state: &StateVector) -> Vec<ActionId> {
        (0..self.actions.len())
            .filter(|&a| self.agent_move(state, a).is_some())
            .collect()
    }

    fn successors(&self, state: &StateVector, action: ActionId) -> Result<Distribution> {
        let agent = self.agent_move(state, action).ok_or_else(|| {
            Error::InvalidModel(format!(
                "action `{}` is not available in state {state}",
                self.actions.get(action).map(String::as_str).unwrap_or("?")
            ))
        })?;
        let f = state.features();
        let obstacle = (f[2], f[3]);
        let moved = chase(obstacle, agent);
        let mk = |o: Cell| StateVector(vec![agent.0, agent.1, o.0, o.1]);
        let p = self.config.obstacle_move_prob;
        if moved == obstacle || p == 0.0 {
            Ok(Distribution::point(mk(obstacle)))
        } else if p == 1.0 {
            Ok(Distribution::point(mk(moved)))
        } else {
            Distribution::new(vec![(mk(moved), p), (mk(obstacle), 1.0 - p)])
        }
    }

    fn labels(&self, state: &StateVector) -> LabelSet {
        let f = state.features();
        let mut labels = LabelSet::new();
        if f[0] == f[2] && f[1] == f[3] {
            labels.insert("collision".into());
        }
        labels
    }
}

fn parse_cell(key: &str, value: &str) -> Result<Cell> {
    let bad = || Error::InvalidConfig(format!("`{key}` expects `x,y`, got `{value}`"));
    let (x, y) = value.split_once(',').ok_or_else(bad)?;
    Ok((
        x.trim().parse().map_err(|_| bad())?,
        y.trim().parse().map_err(|_| bad())?,
    ))
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad value `{value}` for `{key}`")))
}

fn parse_query(query: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for pair in query.split('&').filter(|p| !p.is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("malformed parameter `{pair}`")))?;
        out.insert(k.to_string(), v.to_string());
    }
    Ok(out)
}

impl MiniTaxiConfig {
    pub fn from_query(query: &str) -> Result<Self> {
        let mut c = MiniTaxiConfig::default();
        for (k, v) in parse_query(query)? {
            match k.as_str() {
                "width" => c.width = parse_num(&k, &v)?,
                "height" => c.height = parse_num(&k, &v)?,
                "max_fuel" => c.max_fuel = parse_num(&k, &v)?,
                "jobs_target" => c.jobs_target = parse_num(&k, &v)?,
                "start" => c.start = parse_cell(&k, &v)?,
                "station" => c.station = parse_cell(&k, &v)?,
                "passenger_spawn" => c.passenger_spawn = parse_cell(&k, &v)?,
                "destination" => c.destination = parse_cell(&k, &v)?,
                _ => return Err(Error::InvalidConfig(format!("unknown mini_taxi parameter `{k}`"))),
            }
        }
        Ok(c)
    }
}

impl AvoidanceConfig {
    pub fn from_query(query: &str) -> Result<Self> {
        let params = parse_query(query)?;
        let mut c = AvoidanceConfig::default();
        let mut obstacle_given = false;
        for (k, v) in &params {
            match k.as_str() {
                "width" => c.width = parse_num(k, v)?,
                "height" => c.height = parse_num(k, v)?,
                "agent_start" => c.agent_start = parse_cell(k, v)?,
                "obstacle_start" => {
                    c.obstacle_start = parse_cell(k, v)?;
                    obstacle_given = true;
                }
                "obstacle_move_prob" => c.obstacle_move_prob = parse_num(k, v)?,
                "horizon_hint" => c.horizon_hint = parse_num(k, v)?,
                _ => return Err(Error::InvalidConfig(format!("unknown avoidance parameter `{k}`"))),
            }
        }
        if !obstacle_given {
            c.obstacle_start = (c.width - 1, c.height - 1);
        }
        Ok(c)
    }
}

/// Resolves `builtin:<name>[?query]` to an environment.
pub fn builtin(uri: &str) -> Result<Box<dyn EnvironmentModel>> {
    let rest = uri
        .strip_prefix("builtin:")
        .ok_or_else(|| Error::InvalidConfig(format!("`{uri}` is not a builtin URI")))?;
    let (name, query) = rest.split_once('?').unwrap_or((rest, ""));
    match name {
        "mini_taxi" => Ok(Box::new(mini_taxi(MiniTaxiConfig::from_query(query)?)?)),
        "avoidance" => Ok(Box::new(avoidance(AvoidanceConfig::from_query(query)?)?)),
        other => Err(Error::InvalidConfig(format!("unknown builtin environment `{other}`"))),
    }
}

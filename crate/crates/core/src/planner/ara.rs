use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use rustc_hash::FxHashMap;

use super::{Budget, Plan, PlanOutcome, PlannerConfig};
use crate::costs::CostModel;
use crate::dubins::airplane_heuristic;
use crate::geo::ContinuousState;
use crate::lattice::{apply_primitive, discretize, distance_to_goal_box, in_goal_region, GridState, Primitive};

/// One planning request.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Query {
    pub start: ContinuousState,
    pub goal: ContinuousState,
    /// Absolute time of `start`, seconds. Only matters with moving obstacles.
    pub t_start: f64,
}

impl Query {
    pub fn new(start: ContinuousState, goal: ContinuousState) -> Self {
        Self {
            start,
            goal,
            t_start: 0.0,
        }
    }

    pub fn at(mut self, t_start: f64) -> Self {
        self.t_start = t_start;
        self
    }
}

const NO_PARENT: u32 = u32::MAX;
const CLOCK_CHECK_EVERY: u64 = 256;

// Search nodes are immutable once created so that a path extracted through
// parent links always replays exactly with the recorded primitives.
struct Record {
    state: ContinuousState,
    parent: u32,
    primitive: u16,
    edge_len: f64,
    step: u32,
}

struct Cell {
    g: f64,
    /// Value of `g` when last expanded, infinite if never.
    v: f64,
    h: f64,
    rec: u32,
    closed_iter: u32,
}

struct Entry {
    f: f64,
    g: f64,
    key: GridState,
    cell: u32,
    rec: u32,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Max-heap order: smallest f, then largest g, then smallest cell.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(self.g.total_cmp(&other.g))
            .then(other.key.cmp(&self.key))
            .then(other.rec.cmp(&self.rec))
    }
}

struct Bounds {
    lo: [f64; 3],
    hi: [f64; 3],
}

impl Bounds {
    fn around(a: &ContinuousState, b: &ContinuousState, xy: f64, z: f64) -> Self {
        Self {
            lo: [a.x.min(b.x) - xy, a.y.min(b.y) - xy, a.z.min(b.z) - z],
            hi: [a.x.max(b.x) + xy, a.y.max(b.y) + xy, a.z.max(b.z) + z],
        }
    }

    fn contains(&self, s: &ContinuousState) -> bool {
        (self.lo[0]..=self.hi[0]).contains(&s.x)
            && (self.lo[1]..=self.hi[1]).contains(&s.y)
            && (self.lo[2]..=self.hi[2]).contains(&s.z)
    }
}

enum Pass {
    Completed,
    OutOfBudget,
}

struct Search<'a> {
    query: &'a Query,
    model: CostModel<'a>,
    cfg: &'a PlannerConfig,
    primitives: Vec<Primitive>,
    /// Shortest edge length and longest straight-line displacement of any
    /// primitive.
    min_edge: f64,
    max_step: f64,
    bounds: Bounds,
    timed: bool,
    records: Vec<Record>,
    cells: Vec<Cell>,
    index: FxHashMap<GridState, u32>,
    keys: Vec<GridState>,
    open: BinaryHeap<Entry>,
    best_goal: Option<u32>,
    best_goal_g: f64,
    expansions: u64,
    started: Instant,
    out_of_time: bool,
}

impl<'a> Search<'a> {
    fn new(query: &'a Query, model: CostModel<'a>, cfg: &'a PlannerConfig) -> Self {
        let primitives = cfg.controls.primitives(cfg.dt);
        let v = cfg.limits.speed;
        let min_edge = primitives.iter().map(|p| p.length(v)).fold(f64::INFINITY, f64::min);
        // A primitive never moves farther than its path length.
        let max_step = primitives.iter().map(|p| p.length(v)).fold(0.0, f64::max);
        Self {
            query,
            model,
            cfg,
            primitives,
            min_edge,
            max_step,
            bounds: Bounds::around(&query.start, &query.goal, cfg.bbox_margin_xy, cfg.bbox_margin_z),
            timed: model.is_time_dependent(),
            records: Vec::new(),
            cells: Vec::new(),
            index: FxHashMap::default(),
            keys: Vec::new(),
            open: BinaryHeap::new(),
            best_goal: None,
            best_goal_g: f64::INFINITY,
            expansions: 0,
            started: Instant::now(),
            out_of_time: false,
        }
    }

    fn heuristic(&self, s: &ContinuousState) -> f64 {
        airplane_heuristic(s, &self.query.goal, &self.cfg.limits)
    }

    fn key(&self, s: &ContinuousState, step: u32) -> GridState {
        let k = discretize(s, &self.cfg.fine);
        if self.timed {
            k.with_step(step)
        } else {
            k
        }
    }

    fn push(&mut self, cell: u32, eps: f64) {
        let c = &self.cells[cell as usize];
        self.open.push(Entry {
            f: c.g + eps * c.h,
            g: c.g,
            key: self.keys[cell as usize],
            cell,
            rec: c.rec,
        });
    }

    fn exhausted_budget(&mut self) -> bool {
        match self.cfg.budget {
            Budget::Expansions(n) => self.expansions >= n,
            Budget::WallClock(limit) => {
                if self.expansions.is_multiple_of(CLOCK_CHECK_EVERY) && !self.out_of_time {
                    self.out_of_time = self.started.elapsed() >= limit;
                }
                self.out_of_time
            }
        }
    }

    fn seed(&mut self, eps: f64) {
        let s = self.query.start;
        self.records.push(Record {
            state: s,
            parent: NO_PARENT,
            primitive: 0,
            edge_len: 0.0,
            step: 0,
        });
        let key = self.key(&s, 0);
        self.cells.push(Cell {
            g: 0.0,
            v: f64::INFINITY,
            h: self.heuristic(&s),
            rec: 0,
            closed_iter: 0,
        });
        self.keys.push(key);
        self.index.insert(key, 0);
        self.push(0, eps);
    }

    fn improve(&mut self, eps: f64, iter: u32) -> Pass {
        while let Some(top) = self.open.peek() {
            let c = &self.cells[top.cell as usize];
            if c.rec != top.rec || c.closed_iter == iter || c.g >= c.v {
                self.open.pop();
                continue;
            }
            if self.best_goal_g <= top.f {
                return Pass::Completed;
            }
            let cell = top.cell;
            if self.exhausted_budget() {
                return Pass::OutOfBudget;
            }
            self.open.pop();
            self.expand(cell, eps, iter);
        }
        Pass::Completed
    }

    fn expand(&mut self, cell: u32, eps: f64, iter: u32) {
        self.expansions += 1;
        let (g, rec_id) = {
            let c = &mut self.cells[cell as usize];
            c.v = c.g;
            c.closed_iter = iter;
            (c.g, c.rec)
        };
        let (state, step) = {
            let r = &self.records[rec_id as usize];
            (r.state, r.step + 1)
        };
        let t = self.query.t_start + f64::from(step) * self.cfg.dt;
        for pi in 0..self.primitives.len() {
            let (next, len) = apply_primitive(&state, &self.primitives[pi], self.cfg.limits.speed);
            if !self.bounds.contains(&next) {
                continue;
            }
            let ng = g + self.model.edge_cost(&next, t, len);
            let record = Record {
                state: next,
                parent: rec_id,
                primitive: pi as u16,
                edge_len: len,
                step,
            };
            if in_goal_region(&next, &self.query.goal, &self.cfg.goal) {
                if ng < self.best_goal_g {
                    self.best_goal_g = ng;
                    self.best_goal = Some(self.records.len() as u32);
                    self.records.push(record);
                }
                continue;
            }
            let key = self.key(&next, step);
            let target = match self.index.get(&key) {
                Some(&cj) if ng < self.cells[cj as usize].g => cj,
                Some(_) => continue,
                None => {
                    let cj = self.cells.len() as u32;
                    self.cells.push(Cell {
                        g: f64::INFINITY,
                        v: f64::INFINITY,
                        h: 0.0,
                        rec: NO_PARENT,
                        closed_iter: 0,
                    });
                    self.keys.push(key);
                    self.index.insert(key, cj);
                    cj
                }
            };
            let h = self.heuristic(&next);
            let rid = self.records.len() as u32;
            self.records.push(record);
            let c = &mut self.cells[target as usize];
            c.g = ng;
            c.h = h;
            c.rec = rid;
            // Cells closed in this pass wait for the next one.
            if c.closed_iter != iter {
                self.push(target, eps);
            }
        }
    }

    fn rebuild(&mut self, eps: f64) {
        let entries: Vec<Entry> = self
            .cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.g < c.v)
            .map(|(i, c)| Entry {
                f: c.g + eps * c.h,
                g: c.g,
                key: self.keys[i],
                cell: i as u32,
                rec: c.rec,
            })
            .collect();
        self.open = BinaryHeap::from(entries);
    }

    /// Admissible cost-to-go for a state outside the goal region: at least
    /// one more edge, and enough edges to cover the distance to the goal box
    /// at the longest per-edge displacement. Every edge costs at least its
    /// length.
    fn remaining_lower_bound(&self, s: &ContinuousState) -> f64 {
        let d = distance_to_goal_box(s, &self.query.goal, &self.cfg.goal);
        let edges = (d / self.max_step - 1e-9).ceil().max(1.0);
        edges * self.min_edge
    }

    /// Ratio of the incumbent cost to a lower bound on the optimum. Every
    /// optimal path either has all its states expanded at their optimal
    /// value (then the incumbent is optimal) or passes through an
    /// inconsistent cell that carries its optimal `g`.
    fn certified_eps(&self) -> f64 {
        let lb = self
            .cells
            .iter()
            .filter(|c| c.g < c.v)
            .map(|c| c.g + self.remaining_lower_bound(&self.records[c.rec as usize].state))
            .fold(f64::INFINITY, f64::min);
        if lb >= self.best_goal_g {
            1.0
        } else if lb > 0.0 {
            self.best_goal_g / lb
        } else {
            f64::INFINITY
        }
    }

    fn extract(&self, goal: u32, iterations: Vec<(f64, f64)>) -> Plan {
        let mut chain = Vec::new();
        let mut r = goal;
        while r != NO_PARENT {
            chain.push(r);
            r = self.records[r as usize].parent;
        }
        chain.reverse();
        let mut states = Vec::with_capacity(chain.len());
        let mut primitives = Vec::with_capacity(chain.len());
        let mut edge_lengths = Vec::with_capacity(chain.len());
        for (n, &id) in chain.iter().enumerate() {
            let rec = &self.records[id as usize];
            states.push(rec.state);
            if n > 0 {
                primitives.push(self.primitives[rec.primitive as usize]);
                edge_lengths.push(rec.edge_len);
            }
        }
        Plan {
            states,
            primitives,
            edge_lengths,
            cost: self.best_goal_g,
            eps_achieved: self.certified_eps(),
            expansions: self.expansions,
            iterations,
            t_start: self.query.t_start,
            dt: self.cfg.dt,
        }
    }

    fn run(mut self) -> PlanOutcome {
        let mut eps = self.cfg.eps_start;
        let mut iter = 1;
        let mut iterations = Vec::new();
        self.seed(eps);
        loop {
            match self.improve(eps, iter) {
                Pass::OutOfBudget => break,
                Pass::Completed => {
                    if self.best_goal.is_none() {
                        log::debug!("search space exhausted after {} expansions", self.expansions);
                        return PlanOutcome::Timeout {
                            expansions: self.expansions,
                            exhausted: true,
                        };
                    }
                    iterations.push((eps, self.best_goal_g));
                    if eps <= self.cfg.eps_final {
                        break;
                    }
                    eps = (eps - self.cfg.eps_step).max(self.cfg.eps_final);
                    iter += 1;
                    self.rebuild(eps);
                }
            }
        }
        match self.best_goal {
            Some(goal) => PlanOutcome::Found(self.extract(goal, iterations)),
            None => PlanOutcome::Timeout {
                expansions: self.expansions,
                exhausted: false,
            },
        }
    }
}

/// Anytime repairing A* from `query.start` to the goal region around
/// `query.goal`, pricing each edge as `(1 + penalty(end)) * length` and
/// guided by the airplane heuristic.
///
/// The inflation factor drops from `eps_start` to `eps_final` by
/// `eps_step`, reusing the search tree between passes. The best plan found
/// within the budget is returned even if a pass was cut short.
pub fn ara_star(query: &Query, model: &CostModel<'_>, cfg: &PlannerConfig) -> PlanOutcome {
    if in_goal_region(&query.start, &query.goal, &cfg.goal) {
        return PlanOutcome::Found(Plan {
            states: vec![query.start],
            primitives: Vec::new(),
            edge_lengths: Vec::new(),
            cost: 0.0,
            eps_achieved: 1.0,
            expansions: 0,
            iterations: Vec::new(),
            t_start: query.t_start,
            dt: cfg.dt,
        });
    }
    Search::new(query, *model, cfg).run()
}

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::ac3::{all_arcs, arcs_into, propagate_arcs, LiveDomains};
use super::{Assignment, Compiled, CspError, CspInstance, VarId, DEFAULT_TUPLE_CAP};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Propagation {
    /// Plain chronological backtracking with consistency checks against
    /// assigned neighbours.
    None,
    /// AC-3 after every assignment (maintaining arc consistency).
    Ac3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Find {
    First,
    CountAll,
}

#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub propagation: Propagation,
    /// Maximum number of search nodes (value assignments).
    pub node_budget: u64,
    pub find: Find,
    /// Optional cap on nodes + arc revisions.
    pub work_budget: Option<u64>,
    pub deadline: Option<Instant>,
}

impl SearchConfig {
    pub fn new(propagation: Propagation, find: Find) -> SearchConfig {
        SearchConfig { propagation, node_budget: u64::MAX, find, work_budget: None, deadline: None }
    }

    pub fn with_node_budget(mut self, budget: u64) -> SearchConfig {
        self.node_budget = budget;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchStatus {
    Sat,
    Unsat,
    BudgetExhausted,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub status: SearchStatus,
    /// First solution found, when any.
    pub assignment: Option<Assignment>,
    /// Exact solution count; only set for `Find::CountAll` runs that finished.
    pub solution_count: Option<u64>,
    pub nodes: u64,
    pub propagations: u64,
    pub backtracks: u64,
    pub max_depth: usize,
}

impl SearchOutcome {
    pub fn work(&self) -> u64 {
        self.nodes + self.propagations
    }
}

struct Search<'a> {
    compiled: &'a Compiled,
    config: &'a SearchConfig,
    ranks: Vec<Option<usize>>,
    nodes: u64,
    propagations: u64,
    backtracks: u64,
    max_depth: usize,
    solutions: u64,
    first: Option<Vec<usize>>,
    exhausted: bool,
}

enum Flow {
    Continue,
    Stop,
}

impl<'a> Search<'a> {
    fn out_of_budget(&mut self) -> bool {
        if self.nodes >= self.config.node_budget {
            return true;
        }
        if let Some(w) = self.config.work_budget {
            if self.nodes + self.propagations >= w {
                return true;
            }
        }
        if let Some(deadline) = self.config.deadline {
            if self.nodes % 256 == 0 && Instant::now() >= deadline {
                return true;
            }
        }
        false
    }

    /// Smallest live domain first, ties broken by lowest id.
    fn pick_variable(&self, dom: &LiveDomains) -> Option<VarId> {
        (0..self.ranks.len()).filter(|&v| self.ranks[v].is_none()).min_by_key(|&v| (dom.sizes[v], v))
    }

    fn consistent(&self, var: VarId, rank: usize) -> bool {
        self.compiled.adjacency[var].iter().all(|&(t, other, var_is_x)| match self.ranks[other] {
            Some(orank) => self.compiled.compatible(t, var_is_x, rank, orank),
            None => true,
        })
    }

    fn record_solution(&mut self) -> Flow {
        self.solutions += 1;
        if self.first.is_none() {
            self.first = Some(self.ranks.iter().map(|r| r.unwrap()).collect());
        }
        match self.config.find {
            Find::First => Flow::Stop,
            Find::CountAll => Flow::Continue,
        }
    }

    fn descend(&mut self, dom: &LiveDomains, depth: usize) -> Flow {
        self.max_depth = self.max_depth.max(depth);
        let Some(var) = self.pick_variable(dom) else {
            return self.record_solution();
        };
        let candidates: Vec<usize> = dom.ranks(var).collect();
        for rank in candidates {
            if self.out_of_budget() {
                self.exhausted = true;
                return Flow::Stop;
            }
            self.nodes += 1;
            let flow = match self.config.propagation {
                super::Propagation::None => {
                    if !self.consistent(var, rank) {
                        self.backtracks += 1;
                        continue;
                    }
                    self.ranks[var] = Some(rank);
                    self.descend(dom, depth + 1)
                }
                super::Propagation::Ac3 => {
                    let mut child = dom.clone();
                    child.restrict_to(var, rank);
                    let (wipeout, revisions) = propagate_arcs(self.compiled, &mut child, arcs_into(self.compiled, var));
                    self.propagations += revisions;
                    if wipeout {
                        self.backtracks += 1;
                        continue;
                    }
                    self.ranks[var] = Some(rank);
                    self.descend(&child, depth + 1)
                }
            };
            self.ranks[var] = None;
            if let Flow::Stop = flow {
                return Flow::Stop;
            }
        }
        Flow::Continue
    }
}

/// Depth-first backtracking search. Variables are chosen smallest live domain
/// first (ties by id) and values in ascending order. `BudgetExhausted` means
/// the search stopped early and says nothing about satisfiability.
pub fn solve_backtracking(instance: &CspInstance, config: &SearchConfig) -> Result<SearchOutcome, CspError> {
    let compiled = Compiled::new(instance, DEFAULT_TUPLE_CAP)?;
    let mut dom = LiveDomains::full(&compiled);
    let mut search = Search {
        compiled: &compiled,
        config,
        ranks: vec![None; instance.n_vars()],
        nodes: 0,
        propagations: 0,
        backtracks: 0,
        max_depth: 0,
        solutions: 0,
        first: None,
        exhausted: false,
    };

    let root_wipeout = dom.has_empty()
        || match config.propagation {
            super::Propagation::Ac3 => {
                let (w, revisions) = propagate_arcs(&compiled, &mut dom, all_arcs(&compiled));
                search.propagations += revisions;
                w
            }
            super::Propagation::None => false,
        };
    if !root_wipeout {
        search.descend(&dom, 0);
    }

    let status = if search.exhausted {
        if search.first.is_some() && config.find == Find::First {
            SearchStatus::Sat
        } else {
            SearchStatus::BudgetExhausted
        }
    } else if search.solutions > 0 {
        SearchStatus::Sat
    } else {
        SearchStatus::Unsat
    };
    let assignment = search.first.as_ref().map(|ranks| {
        ranks.iter().enumerate().map(|(v, &r)| (v, instance.domain(v).values()[r])).collect::<Assignment>()
    });
    let solution_count = match (config.find, search.exhausted) {
        (Find::CountAll, false) => Some(search.solutions),
        _ => None,
    };
    Ok(SearchOutcome {
        status,
        assignment,
        solution_count,
        nodes: search.nodes,
        propagations: search.propagations,
        backtracks: search.backtracks,
        max_depth: search.max_depth,
    })
}

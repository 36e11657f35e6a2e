use std::collections::VecDeque;

use super::{Compiled, CspError, CspInstance, VarId, DEFAULT_TUPLE_CAP};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ac3Outcome {
    /// Surviving values per variable id. Empty lists only occur on wipeout.
    pub domains: Vec<Vec<i64>>,
    pub wipeout: bool,
    pub revisions: u64,
}

/// Live-value masks over the ranks of each variable.
#[derive(Clone, Debug)]
pub(crate) struct LiveDomains {
    pub alive: Vec<Vec<bool>>,
    pub sizes: Vec<usize>,
}

impl LiveDomains {
    pub fn full(compiled: &Compiled) -> LiveDomains {
        let alive = compiled.unary_ok.clone();
        let sizes = alive.iter().map(|a| a.iter().filter(|&&b| b).count()).collect();
        LiveDomains { alive, sizes }
    }

    pub fn has_empty(&self) -> bool {
        self.sizes.iter().any(|&s| s == 0)
    }

    pub fn ranks(&self, var: VarId) -> impl Iterator<Item = usize> + '_ {
        self.alive[var].iter().enumerate().filter(|(_, &a)| a).map(|(r, _)| r)
    }

    pub fn restrict_to(&mut self, var: VarId, rank: usize) {
        for (r, a) in self.alive[var].iter_mut().enumerate() {
            *a = r == rank;
        }
        self.sizes[var] = 1;
    }
}

/// Removes values of `var` without support in `other` through table `t`.
fn revise(compiled: &Compiled, dom: &mut LiveDomains, t: usize, var: VarId, var_is_x: bool, other: VarId) -> bool {
    let mut changed = false;
    for a in 0..compiled.dom_sizes[var] {
        if !dom.alive[var][a] {
            continue;
        }
        let supported =
            dom.alive[other].iter().enumerate().any(|(b, &live)| live && compiled.compatible(t, var_is_x, a, b));
        if !supported {
            dom.alive[var][a] = false;
            dom.sizes[var] -= 1;
            changed = true;
        }
    }
    changed
}

/// AC-3 from a seed set of arcs `(table, var, var_is_x, other)`. Returns
/// `(wipeout, revisions)`.
pub(crate) fn propagate_arcs(
    compiled: &Compiled,
    dom: &mut LiveDomains,
    seed: impl IntoIterator<Item = (usize, VarId, bool, VarId)>,
) -> (bool, u64) {
    let n_tables = compiled.tables.len();
    // an arc is identified by (table, direction)
    let mut queued = vec![[false; 2]; n_tables];
    let mut queue = VecDeque::new();
    for arc in seed {
        let slot = &mut queued[arc.0][arc.2 as usize];
        if !*slot {
            *slot = true;
            queue.push_back(arc);
        }
    }
    let mut revisions = 0u64;
    while let Some((t, var, var_is_x, other)) = queue.pop_front() {
        queued[t][var_is_x as usize] = false;
        revisions += 1;
        if revise(compiled, dom, t, var, var_is_x, other) {
            if dom.sizes[var] == 0 {
                return (true, revisions);
            }
            for &(t2, neighbour, nb_side_is_x) in &compiled.adjacency[var] {
                if t2 == t {
                    continue;
                }
                // arc revising the neighbour against `var`
                let nb_is_x = !nb_side_is_x;
                let slot = &mut queued[t2][nb_is_x as usize];
                if !*slot {
                    *slot = true;
                    queue.push_back((t2, neighbour, nb_is_x, var));
                }
            }
        }
    }
    (false, revisions)
}

/// Every arc of the instance, both directions.
pub(crate) fn all_arcs(compiled: &Compiled) -> Vec<(usize, VarId, bool, VarId)> {
    compiled
        .tables
        .iter()
        .enumerate()
        .flat_map(|(t, tab)| [(t, tab.x, true, tab.y), (t, tab.y, false, tab.x)])
        .collect()
}

/// Arcs that must be revised after the domain of `var` shrank.
pub(crate) fn arcs_into(compiled: &Compiled, var: VarId) -> impl Iterator<Item = (usize, VarId, bool, VarId)> + '_ {
    compiled.adjacency[var].iter().map(move |&(t, other, var_is_x)| (t, other, !var_is_x, var))
}

/// Maximal arc-consistent sub-domains of `instance`. Unary constraints are
/// applied first (node consistency).
pub fn ac3(instance: &CspInstance) -> Result<Ac3Outcome, CspError> {
    let compiled = Compiled::new(instance, DEFAULT_TUPLE_CAP)?;
    let mut dom = LiveDomains::full(&compiled);
    let (wipeout, revisions) =
        if dom.has_empty() { (true, 0) } else { propagate_arcs(&compiled, &mut dom, all_arcs(&compiled)) };
    let domains = instance.variables.iter().map(|v| dom.ranks(v.id).map(|r| v.domain.values()[r]).collect()).collect();
    Ok(Ac3Outcome { domains, wipeout, revisions })
}

//! Two-watched-literal propagation engine with a chronological trail.

use super::{CnfFormula, Lit};

#[inline]
fn code(lit: Lit) -> usize {
    let v = lit.unsigned_abs() as usize;
    2 * v + usize::from(lit < 0)
}

pub(crate) struct Engine {
    clauses: Vec<Vec<Lit>>,
    /// Indexed by literal code; clauses currently watching that literal.
    watches: Vec<Vec<usize>>,
    /// 0 unassigned, 1 true, -1 false; index by variable.
    values: Vec<i8>,
    pub trail: Vec<Lit>,
    qhead: usize,
    /// Set when the formula holds an empty clause or contradictory units.
    pub root_conflict: bool,
    pub propagations: u64,
}

impl Engine {
    pub fn new(f: &CnfFormula) -> Engine {
        let n = f.n_vars();
        let mut e = Engine {
            clauses: Vec::with_capacity(f.n_clauses()),
            watches: vec![Vec::new(); 2 * n + 2],
            values: vec![0; n + 1],
            trail: Vec::new(),
            qhead: 0,
            root_conflict: false,
            propagations: 0,
        };
        for clause in f.clauses() {
            match clause.len() {
                0 => e.root_conflict = true,
                1 => {
                    if !e.enqueue(clause[0]) {
                        e.root_conflict = true;
                    }
                }
                _ => {
                    let idx = e.clauses.len();
                    e.watches[code(clause[0])].push(idx);
                    e.watches[code(clause[1])].push(idx);
                    e.clauses.push(clause.clone());
                }
            }
        }
        e
    }

    #[inline]
    pub fn value(&self, lit: Lit) -> i8 {
        let v = self.values[lit.unsigned_abs() as usize];
        if lit > 0 {
            v
        } else {
            -v
        }
    }

    /// Assigns `lit` true. Returns false if it is already false.
    pub fn enqueue(&mut self, lit: Lit) -> bool {
        match self.value(lit) {
            1 => true,
            -1 => false,
            _ => {
                self.values[lit.unsigned_abs() as usize] = if lit > 0 { 1 } else { -1 };
                self.trail.push(lit);
                true
            }
        }
    }

    /// Runs unit propagation to fixpoint. Returns false on conflict.
    pub fn propagate(&mut self) -> bool {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = -p;
            let mut ws = std::mem::take(&mut self.watches[code(false_lit)]);
            let mut i = 0;
            let mut conflict = false;
            while i < ws.len() {
                let ci = ws[i];
                let clause = &mut self.clauses[ci];
                if clause[0] == false_lit {
                    clause.swap(0, 1);
                }
                let first = clause[0];
                let first_val = {
                    let v = self.values[first.unsigned_abs() as usize];
                    if first > 0 {
                        v
                    } else {
                        -v
                    }
                };
                if first_val == 1 {
                    i += 1;
                    continue;
                }
                let mut moved = false;
                for k in 2..clause.len() {
                    let l = clause[k];
                    let v = self.values[l.unsigned_abs() as usize];
                    let lv = if l > 0 { v } else { -v };
                    if lv != -1 {
                        clause.swap(1, k);
                        let new_watch = clause[1];
                        self.watches[code(new_watch)].push(ci);
                        ws.swap_remove(i);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                if first_val == -1 {
                    conflict = true;
                    break;
                }
                // unit
                self.values[first.unsigned_abs() as usize] = if first > 0 { 1 } else { -1 };
                self.trail.push(first);
                self.propagations += 1;
                i += 1;
            }
            // restore the watch list we took
            let rest = std::mem::take(&mut self.watches[code(false_lit)]);
            ws.extend(rest);
            self.watches[code(false_lit)] = ws;
            if conflict {
                self.qhead = self.trail.len();
                return false;
            }
        }
        true
    }

    pub fn backtrack_to(&mut self, trail_len: usize) {
        while self.trail.len() > trail_len {
            let lit = self.trail.pop().unwrap();
            self.values[lit.unsigned_abs() as usize] = 0;
        }
        self.qhead = self.qhead.min(trail_len);
    }

    /// Lowest unassigned variable at or after `from`.
    pub fn next_unassigned(&self, from: usize) -> Option<usize> {
        (from.max(1)..self.values.len()).find(|&v| self.values[v] == 0)
    }

    /// True when every stored clause (length ≥ 2) has a true literal. Unit
    /// clauses are satisfied once propagated.
    pub fn all_satisfied(&self) -> bool {
        self.clauses.iter().all(|c| c.iter().any(|&l| self.value(l) == 1))
    }

    pub fn unassigned_count(&self) -> usize {
        self.values[1..].iter().filter(|&&v| v == 0).count()
    }

    pub fn model(&self) -> Vec<bool> {
        self.values[1..].iter().map(|&v| v == 1).collect()
    }
}

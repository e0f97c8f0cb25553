//! Simple cycles of a directed graph (Johnson's algorithm).

use alloc::vec;
use alloc::vec::Vec;

/// Strongly connected components of the subgraph induced by `active` nodes
/// (Tarjan). Components are returned as node lists.
fn strongly_connected(adj: &[Vec<usize>], active: &[bool]) -> Vec<Vec<usize>> {
    struct State<'a> {
        adj: &'a [Vec<usize>],
        active: &'a [bool],
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        out: Vec<Vec<usize>>,
    }

    fn visit(st: &mut State<'_>, v: usize) {
        st.index[v] = Some(st.next);
        st.low[v] = st.next;
        st.next += 1;
        st.stack.push(v);
        st.on_stack[v] = true;
        for &w in &st.adj[v] {
            if !st.active[w] {
                continue;
            }
            match st.index[w] {
                None => {
                    visit(st, w);
                    st.low[v] = st.low[v].min(st.low[w]);
                }
                Some(iw) if st.on_stack[w] => st.low[v] = st.low[v].min(iw),
                _ => {}
            }
        }
        if Some(st.low[v]) == st.index[v] {
            let mut comp = Vec::new();
            while let Some(w) = st.stack.pop() {
                st.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            st.out.push(comp);
        }
    }

    let n = adj.len();
    let mut st = State {
        adj,
        active,
        index: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    for v in 0..n {
        if active[v] && st.index[v].is_none() {
            visit(&mut st, v);
        }
    }
    st.out
}

struct Search<'a> {
    adj: &'a [Vec<usize>],
    in_scc: Vec<bool>,
    blocked: Vec<bool>,
    blocked_by: Vec<Vec<usize>>,
    stack: Vec<usize>,
    cycles: Vec<Vec<usize>>,
    limit: usize,
}

impl Search<'_> {
    fn unblock(&mut self, u: usize) {
        self.blocked[u] = false;
        while let Some(w) = self.blocked_by[u].pop() {
            if self.blocked[w] {
                self.unblock(w);
            }
        }
    }

    fn circuit(&mut self, v: usize, start: usize) -> bool {
        let mut found = false;
        self.stack.push(v);
        self.blocked[v] = true;
        let adj = self.adj;
        for &w in &adj[v] {
            if self.cycles.len() >= self.limit {
                break;
            }
            if !self.in_scc[w] {
                continue;
            }
            if w == start {
                self.cycles.push(self.stack.clone());
                found = true;
            } else if !self.blocked[w] && self.circuit(w, start) {
                found = true;
            }
        }
        if found {
            self.unblock(v);
        } else {
            for &w in &adj[v] {
                if self.in_scc[w] && !self.blocked_by[w].contains(&v) {
                    self.blocked_by[w].push(v);
                }
            }
        }
        self.stack.pop();
        found
    }
}

/// All simple cycles of the graph with adjacency lists `adj`, each listed
/// from its smallest node. Stops after `limit` cycles; the flag reports
/// whether the list is complete.
pub fn simple_cycles(adj: &[Vec<usize>], limit: usize) -> (Vec<Vec<usize>>, bool) {
    let n = adj.len();
    let mut search = Search {
        adj,
        in_scc: vec![false; n],
        blocked: vec![false; n],
        blocked_by: vec![Vec::new(); n],
        stack: Vec::new(),
        cycles: Vec::new(),
        limit,
    };
    let mut active = vec![true; n];
    for start in 0..n {
        if search.cycles.len() >= limit {
            return (search.cycles, false);
        }
        let comps = strongly_connected(adj, &active);
        active[start] = false;
        let Some(comp) = comps.into_iter().find(|c| c.contains(&start)) else {
            continue;
        };
        let self_loop = adj[start].contains(&start);
        if comp.len() < 2 && !self_loop {
            continue;
        }
        search.in_scc.iter_mut().for_each(|b| *b = false);
        for &v in &comp {
            search.in_scc[v] = true;
            search.blocked[v] = false;
            search.blocked_by[v].clear();
        }
        search.circuit(start, start);
    }
    let complete = search.cycles.len() < limit;
    (search.cycles, complete)
}

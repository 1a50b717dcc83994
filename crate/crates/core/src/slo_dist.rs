//! Dominator-based SLO distribution.
//!
//! An application DAG is split into function groups of bounded size and the
//! end-to-end SLO is divided among them in proportion to each group's average
//! normalized length (ANL). Parallel branches are first reduced into a single
//! synthetic node whose ANL is the largest branch sum; when quotas are handed
//! out, every branch of a reduced node receives the node's whole quota.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ApplicationDag, ProfileTable};

/// Immediate dominators via the iterative dataflow formulation of
/// Cooper, Harvey and Kennedy. `succ`/`pred` describe the graph; every node
/// must be reachable from `root`.
pub(crate) fn immediate_dominators(root: usize, succ: &[Vec<usize>], pred: &[Vec<usize>]) -> Vec<Option<usize>> {
    let n = succ.len();
    // Post-order from root, successors visited in index order.
    let mut post = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    let mut stack = vec![(root, 0usize)];
    visited[root] = true;
    while let Some((node, next)) = stack.pop() {
        if let Some(&s) = succ[node].get(next) {
            stack.push((node, next + 1));
            if !visited[s] {
                visited[s] = true;
                stack.push((s, 0));
            }
        } else {
            post.push(node);
        }
    }
    let mut post_num = vec![usize::MAX; n];
    for (i, &node) in post.iter().enumerate() {
        post_num[node] = i;
    }
    let mut idom: Vec<Option<usize>> = vec![None; n];
    idom[root] = Some(root);
    let intersect = |idom: &[Option<usize>], mut a: usize, mut b: usize| {
        while a != b {
            while post_num[a] < post_num[b] {
                a = idom[a].unwrap();
            }
            while post_num[b] < post_num[a] {
                b = idom[b].unwrap();
            }
        }
        a
    };
    let mut changed = true;
    while changed {
        changed = false;
        for &node in post.iter().rev() {
            if node == root {
                continue;
            }
            let mut new_idom: Option<usize> = None;
            for &p in &pred[node] {
                if idom[p].is_none() {
                    continue;
                }
                new_idom = Some(match new_idom {
                    None => p,
                    Some(cur) => intersect(&idom, p, cur),
                });
            }
            if new_idom.is_some() && idom[node] != new_idom {
                idom[node] = new_idom;
                changed = true;
            }
        }
    }
    idom[root] = None;
    idom
}

/// Dominator tree of an application DAG rooted at its entry function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominatorTree {
    names: Vec<String>,
    root: usize,
    parent: Vec<Option<usize>>,
    /// Dominator-tree children, sorted by function id.
    children: Vec<Vec<usize>>,
    /// Post-order traversal of the tree (children before parents).
    order: Vec<usize>,
    /// Immediate post-dominator in the DAG; marks where parallel branches join.
    ipdom: Vec<Option<usize>>,
}

impl DominatorTree {
    pub fn root(&self) -> &str {
        &self.names[self.root]
    }

    /// Immediate dominator of `function`, `None` for the entry.
    pub fn parent(&self, function: &str) -> Option<&str> {
        let i = self.names.iter().position(|n| n == function)?;
        self.parent[i].map(|p| self.names[p].as_str())
    }

    pub fn children(&self, function: &str) -> Vec<&str> {
        match self.names.iter().position(|n| n == function) {
            Some(i) => self.children[i].iter().map(|&c| self.names[c].as_str()).collect(),
            None => Vec::new(),
        }
    }

    pub fn post_order(&self) -> Vec<&str> {
        self.order.iter().map(|&i| self.names[i].as_str()).collect()
    }

    /// `(function, immediate dominator)` pairs for every non-entry function.
    pub fn parents(&self) -> BTreeMap<&str, &str> {
        self.parent
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|p| (self.names[i].as_str(), self.names[p].as_str())))
            .collect()
    }
}

pub fn build_dominator_tree(dag: &ApplicationDag) -> DominatorTree {
    let n = dag.len();
    let succ: Vec<Vec<usize>> = (0..n).map(|i| dag.successors(i).to_vec()).collect();
    let pred: Vec<Vec<usize>> = (0..n).map(|i| dag.predecessors(i).to_vec()).collect();
    let root = dag.entry();
    let parent = immediate_dominators(root, &succ, &pred);
    let ipdom = immediate_dominators(dag.exit(), &pred, &succ);

    let names: Vec<String> = dag.nodes().to_vec();
    let mut children = vec![Vec::new(); n];
    for (i, p) in parent.iter().enumerate() {
        if let Some(p) = *p {
            children[p].push(i);
        }
    }
    for c in &mut children {
        c.sort_by(|&a, &b| names[a].cmp(&names[b]));
    }
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![(root, 0usize)];
    while let Some((node, next)) = stack.pop() {
        if let Some(&c) = children[node].get(next) {
            stack.push((node, next + 1));
            stack.push((c, 0));
        } else {
            order.push(node);
        }
    }
    DominatorTree { names, root, parent, children, order, ipdom }
}

/// Average normalized length per function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnlLabel {
    values: BTreeMap<String, f64>,
}

impl AnlLabel {
    pub fn from_values<I, S>(values: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        Self { values: values.into_iter().map(|(k, v)| (k.into(), v)).collect() }
    }

    pub fn get(&self, function: &str) -> Option<f64> {
        self.values.get(function).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Labels every function with the mean, over the shared configuration grid,
/// of its share of the summed execution time of all application functions.
pub fn label_anl(dag: &ApplicationDag, profiles: &ProfileTable) -> Result<AnlLabel> {
    let reference = profiles.get(dag.name(dag.entry()))?;
    let configs: Vec<_> = reference.entries().iter().map(|e| e.config).collect();
    let mut times = vec![vec![0.0; configs.len()]; dag.len()];
    for (i, row) in times.iter_mut().enumerate() {
        for (slot, &cfg) in row.iter_mut().zip(&configs) {
            *slot = profiles.exec_ms(dag.name(i), cfg)?;
        }
    }
    let mut acc = vec![0.0; dag.len()];
    for c in 0..configs.len() {
        let total: f64 = times.iter().map(|row| row[c]).sum();
        for (a, row) in acc.iter_mut().zip(&times) {
            *a += row[c] / total;
        }
    }
    let count = configs.len() as f64;
    Ok(AnlLabel::from_values(dag.nodes().iter().zip(acc).map(|(n, a)| (n.clone(), a / count))))
}

/// Consecutive functions scheduled together by one search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionGroup {
    pub functions: Vec<String>,
    pub anl: f64,
    pub quota_ms: Option<f64>,
}

/// Parallel branches below `head`, collapsed into one node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedNode {
    pub head: String,
    pub anl: f64,
    pub branches: Vec<Segment>,
    pub quota_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PlanUnit {
    Group(FunctionGroup),
    Reduced(ReducedNode),
}

impl PlanUnit {
    pub fn anl(&self) -> f64 {
        match self {
            PlanUnit::Group(g) => g.anl,
            PlanUnit::Reduced(r) => r.anl,
        }
    }
}

/// A linear sequence of plan units.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Segment {
    pub units: Vec<PlanUnit>,
}

impl Segment {
    pub fn anl(&self) -> f64 {
        self.units.iter().map(PlanUnit::anl).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupPlan {
    pub max_group_size: usize,
    pub root: Segment,
    pub slo_ms: Option<f64>,
}

impl GroupPlan {
    /// All function groups, depth first in workflow order.
    pub fn groups(&self) -> Vec<&FunctionGroup> {
        fn walk<'a>(seg: &'a Segment, out: &mut Vec<&'a FunctionGroup>) {
            for unit in &seg.units {
                match unit {
                    PlanUnit::Group(g) => out.push(g),
                    PlanUnit::Reduced(r) => r.branches.iter().for_each(|b| walk(b, out)),
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    pub fn group_of(&self, function: &str) -> Option<&FunctionGroup> {
        self.groups().into_iter().find(|g| g.functions.iter().any(|f| f == function))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

enum Item {
    Func(usize),
    Reduced { head: usize, branches: Vec<Vec<Item>> },
}

fn linearize(tree: &DominatorTree, node: usize) -> Vec<Item> {
    let mut chain = vec![Item::Func(node)];
    let mut current = node;
    loop {
        let children = &tree.children[current];
        match children.len() {
            0 => break,
            1 => {
                current = children[0];
                chain.push(Item::Func(current));
            }
            _ => {
                let join = tree.ipdom[current].filter(|j| children.contains(j));
                let branches = children.iter().filter(|&&c| Some(c) != join).map(|&c| linearize(tree, c)).collect();
                chain.push(Item::Reduced { head: current, branches });
                match join {
                    Some(j) => {
                        current = j;
                        chain.push(Item::Func(j));
                    }
                    None => break,
                }
            }
        }
    }
    chain
}

fn group_chain(tree: &DominatorTree, labels: &AnlLabel, items: Vec<Item>, g: usize) -> Segment {
    let label = |i: usize| labels.get(&tree.names[i]).unwrap_or(0.0);
    let mut units = Vec::new();
    let mut run: Vec<usize> = Vec::new();
    let flush = |run: &mut Vec<usize>, units: &mut Vec<PlanUnit>| {
        if !run.is_empty() {
            let anl = run.iter().map(|&i| label(i)).sum();
            let functions = run.drain(..).map(|i| tree.names[i].clone()).collect();
            units.push(PlanUnit::Group(FunctionGroup { functions, anl, quota_ms: None }));
        }
    };
    for item in items {
        match item {
            Item::Func(i) => {
                run.push(i);
                if run.len() == g {
                    flush(&mut run, &mut units);
                }
            }
            Item::Reduced { head, branches } => {
                flush(&mut run, &mut units);
                let branches: Vec<Segment> =
                    branches.into_iter().map(|b| group_chain(tree, labels, b, g)).collect();
                let anl = branches.iter().map(Segment::anl).fold(0.0, f64::max);
                units.push(PlanUnit::Reduced(ReducedNode {
                    head: tree.names[head].clone(),
                    anl,
                    branches,
                    quota_ms: None,
                }));
            }
        }
    }
    flush(&mut run, &mut units);
    Segment { units }
}

/// Reduces parallel branches bottom-up and cuts every resulting chain into
/// consecutive groups of at most `g` functions. Reduced nodes stay as
/// individual units.
pub fn reduce_and_group(tree: &DominatorTree, labels: &AnlLabel, g: usize) -> GroupPlan {
    let g = g.max(1);
    let items = linearize(tree, tree.root);
    GroupPlan { max_group_size: g, root: group_chain(tree, labels, items, g), slo_ms: None }
}

fn assign(segment: &mut Segment, quota: f64) -> Result<()> {
    let total = segment.anl();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::DegenerateAnl);
    }
    for unit in &mut segment.units {
        let share = quota * unit.anl() / total;
        match unit {
            PlanUnit::Group(g) => g.quota_ms = Some(share),
            PlanUnit::Reduced(r) => {
                r.quota_ms = Some(share);
                for branch in &mut r.branches {
                    assign(branch, share)?;
                }
            }
        }
    }
    Ok(())
}

/// Splits `slo_ms` over the plan, reversing the recorded reductions.
pub fn distribute_slo(mut plan: GroupPlan, slo_ms: f64) -> Result<GroupPlan> {
    assign(&mut plan.root, slo_ms)?;
    plan.slo_ms = Some(slo_ms);
    Ok(plan)
}

/// Dominator tree, ANL labelling, grouping and quota assignment in one call.
pub fn plan_groups(dag: &ApplicationDag, profiles: &ProfileTable, g: usize) -> Result<GroupPlan> {
    let tree = build_dominator_tree(dag);
    let labels = label_anl(dag, profiles)?;
    distribute_slo(reduce_and_group(&tree, &labels, g), dag.slo_ms())
}

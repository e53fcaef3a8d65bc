//! Surrogate semantics of the seven transformation tokens.
//!
//! * `b`   balances every maximal single-fanout, non-inverted AND cluster.
//! * `rw`  one structural-hashing pass keyed on the original fanins, plus
//!   `x & x -> x` and `x & !x -> 0`; `rwz` repeats it to a fixpoint.
//! * `rf`  one absorption pass `x & (x & y) -> x & y`; `rfz` to a fixpoint.
//! * `rs`  drops AND nodes that currently have no fanout and drive no output.
//! * `rsz` drops every AND node not reachable from an output.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use super::{Recipe, TransformToken};
use crate::aig::{Aig, AigBuilder, Literal};

pub fn apply_transform(aig: &Aig, token: TransformToken) -> Aig {
    match token {
        TransformToken::B => balance(aig),
        TransformToken::Rw => rewrite_pass(aig),
        TransformToken::Rwz => fixpoint(aig, rewrite_pass),
        TransformToken::Rf => refactor_pass(aig),
        TransformToken::Rfz => fixpoint(aig, refactor_pass),
        TransformToken::Rs => sweep_dangling(aig),
        TransformToken::Rsz => sweep_unreachable(aig),
    }
}

pub fn apply_recipe(aig: &Aig, recipe: &Recipe) -> Aig {
    recipe
        .tokens()
        .iter()
        .fold(aig.clone(), |acc, &t| apply_transform(&acc, t))
}

fn fixpoint(aig: &Aig, pass: fn(&Aig) -> Aig) -> Aig {
    let mut current = aig.clone();
    loop {
        let next = pass(&current);
        // Every productive pass removes at least one node, so this terminates.
        if next == current {
            return current;
        }
        current = next;
    }
}

/// Rebuilds `aig` where AND node `n` is either kept (`replace[n] == None`)
/// or replaced by a literal over strictly earlier old nodes.
fn rebuild(aig: &Aig, replace: &[Option<Literal>]) -> Aig {
    let mut b = AigBuilder::new(aig.num_inputs());
    let mut map: Vec<Literal> = (0..=aig.num_inputs()).map(|n| Literal::new(n, false)).collect();
    let resolve = |map: &[Literal], l: Literal| map[l.node()].xor(l.is_inverted());
    for (i, and) in aig.ands().iter().enumerate() {
        let node = aig.first_and() + i;
        let lit = match replace[node] {
            Some(r) => resolve(&map, r),
            None => {
                let a = resolve(&map, and.fanin0);
                let c = resolve(&map, and.fanin1);
                b.and(a, c)
            }
        };
        map.push(lit);
    }
    for &o in aig.outputs() {
        b.output(resolve(&map, o));
    }
    b.build()
}

/// Keeps only the AND nodes selected by `keep`; dropped nodes must be unused.
fn retain(aig: &Aig, keep: &[bool]) -> Aig {
    let mut b = AigBuilder::new(aig.num_inputs());
    let mut map: Vec<Literal> = (0..=aig.num_inputs()).map(|n| Literal::new(n, false)).collect();
    let resolve = |map: &[Literal], l: Literal| map[l.node()].xor(l.is_inverted());
    for (i, and) in aig.ands().iter().enumerate() {
        let node = aig.first_and() + i;
        let lit = if keep[node] {
            let a = resolve(&map, and.fanin0);
            let c = resolve(&map, and.fanin1);
            b.and(a, c)
        } else {
            Literal::FALSE
        };
        map.push(lit);
    }
    for &o in aig.outputs() {
        b.output(resolve(&map, o));
    }
    b.build()
}

fn ordered(a: Literal, b: Literal) -> (Literal, Literal) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn rewrite_pass(aig: &Aig) -> Aig {
    let mut replace = vec![None; aig.node_count()];
    let mut seen: HashMap<(Literal, Literal), usize> = HashMap::new();
    for (i, and) in aig.ands().iter().enumerate() {
        let node = aig.first_and() + i;
        let (a, b) = ordered(and.fanin0, and.fanin1);
        replace[node] = if a == b {
            Some(a)
        } else if a == !b {
            Some(Literal::FALSE)
        } else if let Some(&first) = seen.get(&(a, b)) {
            Some(Literal::new(first, false))
        } else {
            seen.insert((a, b), node);
            None
        };
    }
    rebuild(aig, &replace)
}

fn refactor_pass(aig: &Aig) -> Aig {
    let mut replace = vec![None; aig.node_count()];
    for (i, and) in aig.ands().iter().enumerate() {
        let node = aig.first_and() + i;
        let absorbs = |outer: Literal, inner: Literal| {
            !inner.is_inverted()
                && aig
                    .and_of(inner.node())
                    .is_some_and(|m| m.fanin0 == outer || m.fanin1 == outer)
        };
        replace[node] = if absorbs(and.fanin0, and.fanin1) {
            Some(and.fanin1)
        } else if absorbs(and.fanin1, and.fanin0) {
            Some(and.fanin0)
        } else {
            None
        };
    }
    rebuild(aig, &replace)
}

fn sweep_dangling(aig: &Aig) -> Aig {
    let fanout = aig.fanout_counts();
    let keep: Vec<bool> = (0..aig.node_count()).map(|n| fanout[n] > 0).collect();
    retain(aig, &keep)
}

fn sweep_unreachable(aig: &Aig) -> Aig {
    let mut keep = vec![false; aig.node_count()];
    for o in aig.outputs() {
        keep[o.node()] = true;
    }
    for node in (aig.first_and()..aig.node_count()).rev() {
        if keep[node] {
            let and = aig.and_of(node).expect("AND node");
            keep[and.fanin0.node()] = true;
            keep[and.fanin1.node()] = true;
        }
    }
    retain(aig, &keep)
}

fn balance(aig: &Aig) -> Aig {
    let fanout = aig.fanout_counts();
    let mut output_driver = vec![false; aig.node_count()];
    for o in aig.outputs() {
        output_driver[o.node()] = true;
    }
    // An AND node is folded into its consumer's cluster when its one and
    // only reference is a non-inverted AND fanin.
    let mut plain_refs = vec![0usize; aig.node_count()];
    for and in aig.ands() {
        for l in and.fanins() {
            if !l.is_inverted() {
                plain_refs[l.node()] += 1;
            }
        }
    }
    let absorbed = |n: usize| aig.is_and(n) && fanout[n] == 1 && plain_refs[n] == 1 && !output_driver[n];

    let mut b = AigBuilder::new(aig.num_inputs());
    let mut map: Vec<Option<Literal>> = vec![None; aig.node_count()];
    let mut new_level: Vec<usize> = vec![0; aig.num_inputs() + 1];
    for (n, slot) in map.iter_mut().enumerate().take(aig.num_inputs() + 1) {
        *slot = Some(Literal::new(n, false));
    }

    for node in aig.first_and()..aig.node_count() {
        if absorbed(node) {
            continue;
        }
        let mut leaves = Vec::new();
        let mut stack = vec![Literal::new(node, false)];
        while let Some(lit) = stack.pop() {
            if lit.node() == node || (!lit.is_inverted() && absorbed(lit.node())) {
                let and = aig.and_of(lit.node()).expect("AND node");
                // fanin1 pushed first so fanin0 is expanded first
                stack.push(and.fanin1);
                stack.push(and.fanin0);
            } else {
                let base = map[lit.node()].expect("leaf built before its cluster root");
                let mapped = base.xor(lit.is_inverted());
                if !leaves.contains(&mapped) {
                    leaves.push(mapped);
                }
            }
        }
        // Combine the two shallowest operands first; ties keep leaf order.
        let mut heap: BinaryHeap<Reverse<(usize, usize, Literal)>> = leaves
            .iter()
            .enumerate()
            .map(|(seq, &l)| Reverse((new_level[l.node()], seq, l)))
            .collect();
        let mut seq = leaves.len();
        while heap.len() > 1 {
            let Reverse((la, sa, a)) = heap.pop().expect("two operands");
            let Reverse((lb, sb, c)) = heap.pop().expect("two operands");
            // fanin order follows operand age so untouched nodes stay as they were
            let out = if sa < sb { b.and(a, c) } else { b.and(c, a) };
            new_level.push(la.max(lb) + 1);
            heap.push(Reverse((la.max(lb) + 1, seq, out)));
            seq += 1;
        }
        let Reverse((_, _, root)) = heap.pop().expect("cluster has a leaf");
        map[node] = Some(root);
    }

    for &o in aig.outputs() {
        let base = map[o.node()].expect("output driver is a cluster root");
        b.output(base.xor(o.is_inverted()));
    }
    b.build()
}

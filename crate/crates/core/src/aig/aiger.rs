//! ASCII AIGER (`aag`) reader and writer for combinational circuits.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{Aig, AndNode, Literal};
use crate::{Error, Result};

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Aiger {
        line,
        msg: msg.into(),
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.inner.next() {
            Some((i, l)) => Ok((i + 1, l.trim_end_matches('\r'))),
            None => Err(err(0, format!("unexpected end of file, expected {what}"))),
        }
    }
}

fn parse_num(line: usize, tok: &str) -> Result<u32> {
    tok.parse::<u32>()
        .map_err(|_| err(line, format!("expected unsigned integer, found `{tok}`")))
}

fn parse_fields<const N: usize>(line: usize, text: &str) -> Result<[u32; N]> {
    let toks: Vec<&str> = text.split_ascii_whitespace().collect();
    if toks.len() != N {
        return Err(err(
            line,
            format!("expected {N} field(s), found {}", toks.len()),
        ));
    }
    let mut out = [0u32; N];
    for (slot, tok) in out.iter_mut().zip(toks) {
        *slot = parse_num(line, tok)?;
    }
    Ok(out)
}

/// Parses an ASCII AIGER document. Latches are rejected; the symbol table
/// and comment section are ignored. Variables are renumbered densely:
/// inputs in listed order, then AND nodes in ascending definition literal.
pub fn parse_aag(text: &str) -> Result<Aig> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (hl, header) = lines.next_line("header")?;
    let mut toks = header.split_ascii_whitespace();
    if toks.next() != Some("aag") {
        return Err(err(hl, "header must start with `aag`"));
    }
    let rest: Vec<&str> = toks.collect();
    if rest.len() != 5 {
        return Err(err(hl, "header must be `aag M I L O A`"));
    }
    let mut fields = [0u32; 5];
    for (slot, tok) in fields.iter_mut().zip(&rest) {
        *slot = parse_num(hl, tok)?;
    }
    let [max_var, num_inputs, num_latches, num_outputs, num_ands] = fields;
    if num_latches != 0 {
        return Err(err(hl, format!("latches are not supported (L = {num_latches})")));
    }
    if num_inputs as u64 + num_ands as u64 > max_var as u64 {
        return Err(err(hl, "M is smaller than I + A"));
    }
    let max_code = 2 * max_var + 1;

    // variable -> dense node index
    let mut var_map: HashMap<u32, usize> = HashMap::new();
    var_map.insert(0, 0);

    for i in 0..num_inputs {
        let (ln, text) = lines.next_line("input")?;
        let [lit] = parse_fields::<1>(ln, text)?;
        if lit & 1 == 1 || lit < 2 {
            return Err(err(ln, format!("input literal {lit} must be even and nonzero")));
        }
        if lit > max_code {
            return Err(err(ln, format!("input literal {lit} exceeds M")));
        }
        if var_map.insert(lit >> 1, 1 + i as usize).is_some() {
            return Err(err(ln, format!("variable {} defined twice", lit >> 1)));
        }
    }

    let mut outputs_raw = Vec::with_capacity(num_outputs as usize);
    for _ in 0..num_outputs {
        let (ln, text) = lines.next_line("output")?;
        let [lit] = parse_fields::<1>(ln, text)?;
        if lit > max_code {
            return Err(err(ln, format!("output literal {lit} exceeds M")));
        }
        outputs_raw.push((ln, lit));
    }

    let mut ands_raw = Vec::with_capacity(num_ands as usize);
    for _ in 0..num_ands {
        let (ln, text) = lines.next_line("AND definition")?;
        let [lhs, rhs0, rhs1] = parse_fields::<3>(ln, text)?;
        if lhs & 1 == 1 {
            return Err(err(ln, format!("AND definition literal {lhs} is odd")));
        }
        if lhs < 2 || lhs > max_code {
            return Err(err(ln, format!("AND definition literal {lhs} out of range")));
        }
        if rhs0 >= lhs || rhs1 >= lhs {
            return Err(err(
                ln,
                format!("AND {lhs} has fanin not smaller than itself (cycle)"),
            ));
        }
        ands_raw.push((ln, lhs, rhs0, rhs1));
    }

    // Fanins are smaller than their definition literal, so ascending lhs is
    // a topological order.
    ands_raw.sort_by_key(|&(_, lhs, _, _)| lhs);
    let first_and = 1 + num_inputs as usize;
    for (i, &(ln, lhs, _, _)) in ands_raw.iter().enumerate() {
        if var_map.insert(lhs >> 1, first_and + i).is_some() {
            return Err(err(ln, format!("variable {} defined twice", lhs >> 1)));
        }
    }

    let map_lit = |ln: usize, code: u32| -> Result<Literal> {
        var_map
            .get(&(code >> 1))
            .map(|&node| Literal::new(node, code & 1 == 1))
            .ok_or_else(|| err(ln, format!("literal {code} references undefined variable {}", code >> 1)))
    };

    let mut ands = Vec::with_capacity(ands_raw.len());
    for &(ln, _, rhs0, rhs1) in &ands_raw {
        ands.push(AndNode::new(map_lit(ln, rhs0)?, map_lit(ln, rhs1)?));
    }
    let outputs = outputs_raw
        .iter()
        .map(|&(ln, code)| map_lit(ln, code))
        .collect::<Result<Vec<_>>>()?;

    Aig::new(num_inputs as usize, ands, outputs)
}

/// Serializes with the dense numbering, so `parse_aag(write_aag(a)) == a`.
pub fn write_aag(aig: &Aig) -> String {
    let mut out = String::new();
    let max_var = aig.num_inputs() + aig.ands().len();
    let _ = writeln!(
        out,
        "aag {} {} 0 {} {}",
        max_var,
        aig.num_inputs(),
        aig.outputs().len(),
        aig.ands().len()
    );
    for i in 0..aig.num_inputs() {
        let _ = writeln!(out, "{}", 2 * (i + 1));
    }
    for o in aig.outputs() {
        let _ = writeln!(out, "{}", o.code());
    }
    for (i, and) in aig.ands().iter().enumerate() {
        let lhs = 2 * (aig.first_and() + i);
        let _ = writeln!(out, "{} {} {}", lhs, and.fanin0.code(), and.fanin1.code());
    }
    out
}

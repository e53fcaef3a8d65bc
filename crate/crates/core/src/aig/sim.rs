use super::Aig;
use crate::{Error, Result};

/// Bit-parallel evaluation: each `u64` carries 64 independent input patterns.
pub fn simulate(aig: &Aig, input_patterns: &[u64]) -> Result<Vec<u64>> {
    if input_patterns.len() != aig.num_inputs() {
        return Err(Error::InvalidArgument(format!(
            "expected {} input words, got {}",
            aig.num_inputs(),
            input_patterns.len()
        )));
    }
    let mut values = Vec::with_capacity(aig.node_count());
    values.push(0u64);
    values.extend_from_slice(input_patterns);
    let lit = |values: &[u64], l: super::Literal| {
        let v = values[l.node()];
        if l.is_inverted() {
            !v
        } else {
            v
        }
    };
    for and in aig.ands() {
        let v = lit(&values, and.fanin0) & lit(&values, and.fanin1);
        values.push(v);
    }
    Ok(aig.outputs().iter().map(|&o| lit(&values, o)).collect())
}

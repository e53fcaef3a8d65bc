use rand::Rng;

use crate::aig::{Aig, AigBuilder, Literal};
use crate::util::rng;
use crate::{Error, Result};

/// Seeded random combinational AIG. Every AND picks two distinct earlier
/// nodes (inputs or ANDs) with independent inversion flags; outputs are
/// drawn from the last `max(1, num_ands)` nodes.
pub fn random_aig(seed: u64, num_inputs: usize, num_ands: usize, num_outputs: usize) -> Result<Aig> {
    if num_inputs == 0 {
        return Err(Error::InvalidArgument("random_aig needs at least one input".into()));
    }
    if num_outputs == 0 {
        return Err(Error::InvalidArgument("random_aig needs at least one output".into()));
    }
    let mut rng = rng(seed, 0xA16);
    let mut b = AigBuilder::new(num_inputs);
    for _ in 0..num_ands {
        let available = num_inputs + b.and_count();
        let n0 = 1 + rng.gen_range(0..available);
        let n1 = if available >= 2 {
            let other = 1 + rng.gen_range(0..available - 1);
            if other >= n0 {
                other + 1
            } else {
                other
            }
        } else {
            n0
        };
        let inv0 = rng.gen_bool(0.5);
        let mut inv1 = rng.gen_bool(0.5);
        if n0 == n1 && inv0 == inv1 {
            inv1 = !inv1;
        }
        b.and(Literal::new(n0, inv0), Literal::new(n1, inv1));
    }
    let node_count = 1 + num_inputs + num_ands;
    let window = num_ands.max(1);
    for _ in 0..num_outputs {
        let node = node_count - window + rng.gen_range(0..window);
        b.output(Literal::new(node, rng.gen_bool(0.5)));
    }
    Ok(b.build())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aig::and_count;

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(random_aig(7, 4, 30, 3).unwrap(), random_aig(7, 4, 30, 3).unwrap());
        assert_ne!(random_aig(1, 4, 10, 2).unwrap(), random_aig(2, 4, 10, 2).unwrap());
    }

    #[test]
    fn sizes_honored() {
        let aig = random_aig(3, 5, 17, 4).unwrap();
        assert_eq!(aig.num_inputs(), 5);
        assert_eq!(and_count(&aig), 17);
        assert_eq!(aig.outputs().len(), 4);
        for o in aig.outputs() {
            assert!(aig.is_and(o.node()));
        }
        for and in aig.ands() {
            assert_ne!(and.fanin0, and.fanin1);
            assert!(!and.fanin0.is_const() && !and.fanin1.is_const());
        }
    }

    #[test]
    fn single_input_still_builds() {
        let aig = random_aig(0, 1, 3, 1).unwrap();
        assert_eq!(and_count(&aig), 3);
        let none = random_aig(0, 2, 0, 1).unwrap();
        assert_eq!(none.outputs()[0].node(), 2);
    }

    #[test]
    fn rejects_impossible() {
        assert!(random_aig(0, 0, 5, 1).is_err());
        assert!(random_aig(0, 2, 5, 0).is_err());
    }
}

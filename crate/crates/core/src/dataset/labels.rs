use super::DatasetIndex;
use crate::util::ceil_ratio;
use crate::{Error, Result};

/// Per-graph binary labels: `labels[g][r]` is set for the best recipes of `g`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassLabels {
    pub labels: Vec<Vec<bool>>,
}

impl ClassLabels {
    pub fn row(&self, graph: usize) -> &[bool] {
        &self.labels[graph]
    }
}

/// Marks the `ceil(rho * K)` lowest values; equal values prefer the lower
/// position.
pub fn labels_for(values: &[f64], rho: f64) -> Result<Vec<bool>> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidArgument(format!("rho must be in (0, 1], got {rho}")));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let top = ceil_ratio(rho, values.len());
    let mut labels = vec![false; values.len()];
    for &i in order.iter().take(top) {
        labels[i] = true;
    }
    Ok(labels)
}

pub fn construct_labels(index: &DatasetIndex, rho: f64) -> Result<ClassLabels> {
    let labels = (0..index.num_graphs())
        .map(|g| labels_for(&index.target_row(g), rho))
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassLabels { labels })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(labels_for(&[7.0, 3.0, 9.0, 5.0], 0.5).unwrap(), vec![false, true, false, true]);
        assert_eq!(labels_for(&[7.0, 3.0, 9.0, 5.0], 1.0).unwrap(), vec![true; 4]);
        assert_eq!(labels_for(&[2.0; 4], 0.5).unwrap(), vec![true, true, false, false]);
        assert!(labels_for(&[1.0], 0.0).is_err());
    }

    #[test]
    fn count_is_ceiling() {
        for k in 1..=50usize {
            let values: Vec<f64> = (0..k).map(|i| ((i * 37) % 11) as f64).collect();
            for tenths in 1..=10 {
                let ones = labels_for(&values, tenths as f64 / 10.0).unwrap().iter().filter(|&&b| b).count();
                assert_eq!(ones, (tenths * k).div_ceil(10));
            }
        }
    }
}

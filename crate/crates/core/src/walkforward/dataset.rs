use std::ops::Range;

use crate::error::{Error, Result};
use crate::models::WindowBatch;

/// Supervised pairs `(r[t-L..t], r[t])` for every target day `t` in a range.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowDataset {
    days: Vec<usize>,
    inputs: WindowBatch,
    targets: Vec<f64>,
}

impl WindowDataset {
    /// Targets are the days of `range` with at least `seq_len` earlier
    /// observations; inputs may reach back before `range.start`.
    pub fn build(returns: &[f64], range: Range<usize>, seq_len: usize) -> Result<Self> {
        if range.end > returns.len() {
            return Err(Error::Usage(format!(
                "range {range:?} exceeds {} available days",
                returns.len()
            )));
        }
        let days: Vec<usize> = (range.start.max(seq_len)..range.end).collect();
        if days.is_empty() {
            return Err(Error::Usage(format!(
                "range {range:?} holds no target with {seq_len} prior days"
            )));
        }
        let values = days
            .iter()
            .flat_map(|&t| returns[t - seq_len..t].iter().copied())
            .collect();
        Ok(Self {
            targets: days.iter().map(|&t| returns[t]).collect(),
            inputs: WindowBatch::new(seq_len, values)?,
            days,
        })
    }

    pub fn days(&self) -> &[usize] {
        &self.days
    }

    pub fn inputs(&self) -> &WindowBatch {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_precede_targets() {
        let r: Vec<f64> = (0..10).map(f64::from).collect();
        let ds = WindowDataset::build(&r, 5..8, 3).unwrap();
        assert_eq!(ds.days(), &[5, 6, 7]);
        assert_eq!(ds.targets(), &[5.0, 6.0, 7.0]);
        assert_eq!(ds.inputs().window(0), &[2.0, 3.0, 4.0]);
        assert_eq!(ds.inputs().window(2), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn leading_days_without_history_are_skipped() {
        let r = vec![0.0; 10];
        let ds = WindowDataset::build(&r, 0..6, 4).unwrap();
        assert_eq!(ds.days(), &[4, 5]);
        assert!(WindowDataset::build(&r, 0..4, 4).is_err());
        assert!(WindowDataset::build(&r, 5..11, 4).is_err());
    }
}

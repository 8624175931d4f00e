use serde::{Deserialize, Serialize};

use crate::error::{ChanError, Result};

/// Video indices for one fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Rotating split: video `fold` is the test video, `fold + 1` (mod n) the
/// validation video and the rest train. With 4 videos this gives 2/1/1.
pub fn split_protocol(n_videos: usize, fold: usize) -> Result<Split> {
    if n_videos < 3 {
        return Err(ChanError::invalid("split_protocol", format!("need at least 3 videos, got {n_videos}")));
    }
    if fold >= n_videos {
        return Err(ChanError::invalid("split_protocol", format!("fold {fold} out of range 0..{n_videos}")));
    }
    let test = fold;
    let val = (fold + 1) % n_videos;
    let train = (0..n_videos).filter(|&v| v != test && v != val).collect();
    Ok(Split { train, val: vec![val], test: vec![test] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn four_videos_two_one_one() {
        for fold in 0..4 {
            let s = split_protocol(4, fold).unwrap();
            assert_eq!((s.train.len(), s.val.len(), s.test.len()), (2, 1, 1));
            let all: BTreeSet<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
            assert_eq!(all, (0..4).collect());
        }
        assert_ne!(split_protocol(4, 0).unwrap().test, split_protocol(4, 1).unwrap().test);
    }

    #[test]
    fn every_video_tested_once() {
        let tests: Vec<usize> = (0..4).map(|f| split_protocol(4, f).unwrap().test[0]).collect();
        assert_eq!(tests, vec![0, 1, 2, 3]);
    }

    #[test]
    fn bad_arguments() {
        assert!(split_protocol(2, 0).is_err());
        assert!(split_protocol(4, 4).is_err());
    }
}

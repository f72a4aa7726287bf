use serde::{Deserialize, Serialize};

/// Half-open `[start, end)` interval in microseconds.
pub type Segment = (u64, u64);

pub const DEFAULT_TRAIN_LEN_US: u64 = 40_000_000;
pub const DEFAULT_TEST_LEN_US: u64 = 20_000_000;

/// Alternating train/test segments that tile a recording.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train: Vec<Segment>,
    pub test: Vec<Segment>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subset {
    Train,
    Test,
}

impl SplitPlan {
    pub fn subset_of(&self, t_us: u64) -> Option<Subset> {
        let hit = |segs: &[Segment]| segs.iter().any(|&(a, b)| a <= t_us && t_us < b);
        if hit(&self.train) {
            Some(Subset::Train)
        } else if hit(&self.test) {
            Some(Subset::Test)
        } else {
            None
        }
    }
}

/// Starts with a train segment at 0 and alternates `train_len`/`test_len`
/// until `span_us`; the last segment is truncated.
pub fn make_split(span_us: u64, train_len_us: u64, test_len_us: u64) -> SplitPlan {
    assert!(train_len_us > 0 && test_len_us > 0, "segment lengths must be positive");
    let mut plan = SplitPlan { train: Vec::new(), test: Vec::new() };
    let mut t = 0;
    let mut is_train = true;
    while t < span_us {
        let len = if is_train { train_len_us } else { test_len_us };
        let end = t.saturating_add(len).min(span_us);
        if is_train { &mut plan.train } else { &mut plan.test }.push((t, end));
        t = end;
        is_train = !is_train;
    }
    plan
}

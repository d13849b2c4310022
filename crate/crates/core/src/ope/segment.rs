use std::collections::BTreeMap;
use std::ops::Range;

use super::log::LoggedEvent;
use crate::error::Result;
use crate::space::ArmSpace;

/// Replay intervals hold at most this many events; policies restart at each.
pub const INTERVAL_LEN: usize = 1000;

/// Events sharing one user-feature combination, prepared for replay.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplaySegment {
    pub key: Vec<String>,
    /// Sorted by timestamp (stable).
    pub events: Vec<LoggedEvent>,
    /// Timestamps rescaled to `[0, 1]` over the segment.
    pub times: Vec<f64>,
    /// One arm per distinct item feature, rescaled to `[-1, 1]`.
    pub arm_space: ArmSpace,
    /// Arm index of each event's item feature.
    pub event_arm: Vec<usize>,
    /// The action a target policy plays when it picks each arm (the lowest
    /// action id carrying that item feature).
    pub arm_action: Vec<usize>,
    pub intervals: Vec<Range<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedSegment {
    pub key: Vec<String>,
    pub events: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    /// Ordered by key.
    pub segments: Vec<ReplaySegment>,
    pub skipped: Vec<SkippedSegment>,
}

fn rescale(v: f64, lo: f64, hi: f64, out_lo: f64, out_hi: f64) -> f64 {
    if hi > lo {
        if v == hi {
            return out_hi;
        }
        out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo)
    } else {
        out_lo
    }
}

/// Consecutive index ranges of at most `len` covering `0..n`.
pub fn chunk_intervals(n: usize, len: usize) -> Vec<Range<usize>> {
    (0..n).step_by(len.max(1)).map(|s| s..(s + len).min(n)).collect()
}

fn build_segment(key: Vec<String>, mut events: Vec<LoggedEvent>) -> std::result::Result<ReplaySegment, String> {
    events.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    let mut features: Vec<f64> = events.iter().map(|e| e.item_feature).collect();
    features.sort_by(f64::total_cmp);
    features.dedup();
    if features.len() < 2 {
        return Err(format!("{} distinct item feature(s); need at least 2", features.len()));
    }
    let (flo, fhi) = (features[0], features[features.len() - 1]);
    let coords: Vec<f64> = features.iter().map(|f| rescale(*f, flo, fhi, -1.0, 1.0)).collect();
    let arm_space = ArmSpace::new(coords).map_err(|e| e.to_string())?;

    let arm_of = |f: f64| features.binary_search_by(|p| p.total_cmp(&f)).expect("feature present");
    let event_arm: Vec<usize> = events.iter().map(|e| arm_of(e.item_feature)).collect();
    let mut arm_action = vec![usize::MAX; features.len()];
    for (e, &a) in events.iter().zip(&event_arm) {
        arm_action[a] = arm_action[a].min(e.action);
    }

    let tlo = events[0].timestamp;
    let thi = events[events.len() - 1].timestamp;
    let times = events.iter().map(|e| rescale(e.timestamp, tlo, thi, 0.0, 1.0)).collect();
    let intervals = chunk_intervals(events.len(), INTERVAL_LEN);
    Ok(ReplaySegment { key, events, times, arm_space, event_arm, arm_action, intervals })
}

/// Split events by user-feature tuple; each group is time-sorted, rescaled
/// and cut into replay intervals. Groups with fewer than two distinct item
/// features are skipped and reported.
pub fn segment(events: &[LoggedEvent]) -> Result<Segmentation> {
    let mut groups: BTreeMap<Vec<String>, Vec<LoggedEvent>> = BTreeMap::new();
    for e in events {
        groups.entry(e.user_features.clone()).or_default().push(e.clone());
    }
    let mut segments = Vec::new();
    let mut skipped = Vec::new();
    for (key, evs) in groups {
        let n = evs.len();
        match build_segment(key.clone(), evs) {
            Ok(s) => segments.push(s),
            Err(reason) => skipped.push(SkippedSegment { key, events: n, reason }),
        }
    }
    Ok(Segmentation { segments, skipped })
}

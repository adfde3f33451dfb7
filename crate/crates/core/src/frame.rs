//! One frame clock shared by the envelope, trajectory framing and the
//! classical estimators: windows of `win` samples advancing by `hop`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameConfig {
    pub win: usize,
    pub hop: usize,
}

impl Default for FrameConfig {
    fn default() -> Self {
        // 16 ms window, 8 ms hop at 16 kHz.
        Self { win: 256, hop: 128 }
    }
}

impl FrameConfig {
    pub fn new(win: usize, hop: usize) -> Self {
        Self { win, hop }
    }

    /// Number of full windows in a signal of `n_samples`, or `None` when the
    /// signal is shorter than one window.
    pub fn frame_count(&self, n_samples: usize) -> Option<usize> {
        if n_samples < self.win || self.win == 0 || self.hop == 0 {
            None
        } else {
            Some((n_samples - self.win) / self.hop + 1)
        }
    }

    /// First sample of frame `t`.
    pub fn start(&self, t: usize) -> usize {
        t * self.hop
    }

    /// Sample index that frame `t`'s value is anchored to (window center).
    pub fn anchor(&self, t: usize) -> usize {
        t * self.hop + self.win / 2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_count_matches_window_membership() {
        let f = FrameConfig::default();
        assert_eq!(f.frame_count(256), Some(1));
        assert_eq!(f.frame_count(255), None);
        assert_eq!(f.frame_count(384), Some(2));
        assert_eq!(f.frame_count(16000), Some(123 + 1));
    }

    #[test]
    fn anchors_sit_at_window_centers() {
        let f = FrameConfig::new(256, 128);
        assert_eq!(f.anchor(0), 128);
        assert_eq!(f.anchor(3), 3 * 128 + 128);
    }
}

use serde::{Deserialize, Serialize};

/// Logistic specific-gravity decline:
/// `sg(t) = fg + (og - fg) / (1 + exp(rate_k * (t - t_mid)))`, `t` in hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FermentationModel {
    pub og: f64,
    pub fg: f64,
    /// 1/hour
    pub rate_k: f64,
    /// hours
    pub t_mid: f64,
}

impl Default for FermentationModel {
    fn default() -> Self {
        Self {
            og: 1.060,
            fg: 1.010,
            rate_k: 0.08,
            t_mid: 72.0,
        }
    }
}

impl FermentationModel {
    pub fn is_valid(&self) -> bool {
        self.og > self.fg && self.rate_k > 0.0 && self.t_mid.is_finite()
    }

    pub fn sg_at(&self, hours: f64) -> f64 {
        let x = self.rate_k * (hours - self.t_mid);
        // exp overflows to inf for large x, which correctly gives fg.
        self.fg + (self.og - self.fg) / (1.0 + x.exp())
    }

    /// Fraction of the fermentable gravity consumed, in [0, 1].
    pub fn progress_at(&self, hours: f64) -> f64 {
        ((self.og - self.sg_at(hours)) / (self.og - self.fg)).clamp(0.0, 1.0)
    }

    /// First time the curve reaches `fg + margin`, if it ever does.
    pub fn time_to_reach(&self, margin: f64) -> Option<f64> {
        let span = self.og - self.fg;
        if !(margin > 0.0) || margin >= span || !(self.rate_k > 0.0) {
            return None;
        }
        Some(self.t_mid + (span / margin - 1.0).ln() / self.rate_k)
    }
}

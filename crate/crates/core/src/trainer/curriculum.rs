//! Curriculum controller: stage transitions gated by the smoothed average
//! episode length, monotone by construction.

use serde::{Deserialize, Serialize};

use crate::config::CurriculumSection;
use crate::env::CurriculumStage;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Curriculum {
    stage: CurriculumStage,
    /// Smoothed mean episode length L_k (s).
    l_k: f64,
    threshold_fault_s: f64,
    threshold_push_s: f64,
    ema: f64,
}

impl Curriculum {
    pub fn new(section: &CurriculumSection, ablation_curriculum_on: bool) -> Self {
        let stage = if section.enabled && ablation_curriculum_on {
            CurriculumStage::Nominal
        } else {
            // Without curriculum, everything is on from the start.
            CurriculumStage::FaultsAndPush
        };
        Self {
            stage,
            l_k: 0.0,
            threshold_fault_s: section.threshold_fault_s,
            threshold_push_s: section.threshold_push_s,
            ema: section.ema,
        }
    }

    pub fn stage(&self) -> CurriculumStage {
        self.stage
    }

    pub fn average_episode_length(&self) -> f64 {
        self.l_k
    }

    /// Fold the completed-episode mean of the last iteration into L_k and
    /// apply the stage gates. Transitions never revert.
    pub fn tick(&mut self, mean_completed_len_s: Option<f64>) -> CurriculumStage {
        if let Some(len) = mean_completed_len_s {
            self.l_k = self.ema * self.l_k + (1.0 - self.ema) * len;
        }
        self.tick_with(self.l_k)
    }

    /// Apply the gates against an explicit L_k value.
    pub fn tick_with(&mut self, l_k: f64) -> CurriculumStage {
        self.l_k = l_k;
        if self.stage == CurriculumStage::Nominal && l_k > self.threshold_fault_s {
            self.stage = CurriculumStage::FaultsEnabled;
        }
        if self.stage == CurriculumStage::FaultsEnabled && l_k > self.threshold_push_s {
            self.stage = CurriculumStage::FaultsAndPush;
        }
        self.stage
    }

    /// Reward preset switches to the fault column at the first transition.
    pub fn fault_phase_rewards(&self) -> bool {
        self.stage >= CurriculumStage::FaultsEnabled
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::CurriculumSection;

    fn curriculum() -> Curriculum {
        Curriculum::new(&CurriculumSection::default(), true)
    }

    #[test]
    fn below_first_threshold_stays_nominal() {
        let mut c = curriculum();
        assert_eq!(c.tick_with(19.0), CurriculumStage::Nominal);
        assert!(!c.fault_phase_rewards());
    }

    #[test]
    fn crossing_thresholds_advances_stages() {
        let mut c = curriculum();
        assert_eq!(c.tick_with(20.5), CurriculumStage::FaultsEnabled);
        assert!(c.fault_phase_rewards());
        assert_eq!(c.tick_with(24.1), CurriculumStage::FaultsAndPush);
    }

    #[test]
    fn stages_never_revert() {
        let mut c = curriculum();
        c.tick_with(25.0);
        assert_eq!(c.stage(), CurriculumStage::FaultsAndPush);
        assert_eq!(c.tick_with(1.0), CurriculumStage::FaultsAndPush);
    }

    #[test]
    fn disabled_curriculum_starts_fully_on() {
        let c = Curriculum::new(&CurriculumSection::default(), false);
        assert_eq!(c.stage(), CurriculumStage::FaultsAndPush);
    }

    #[test]
    fn ema_smoothing_updates_l_k() {
        let mut c = curriculum();
        c.tick(Some(10.0));
        assert!((c.average_episode_length() - 1.0).abs() < 1e-12);
        c.tick(None);
        assert!((c.average_episode_length() - 1.0).abs() < 1e-12);
    }
}

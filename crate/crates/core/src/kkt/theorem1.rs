use alloc::vec::Vec;

use super::StageBlocks;
use crate::linalg::{spd_check, SparseLu};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    QuSpd,
    QvSpd,
    QzSpd,
    KNonsingular,
}

/// Per-step outcome of the nonsingularity hypotheses: SPD weights and invertible `K_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Theorem1Report {
    pub qu_spd: Vec<bool>,
    pub qv_spd: Vec<bool>,
    pub qz_spd: Vec<bool>,
    pub k_nonsingular: Vec<bool>,
}

impl Theorem1Report {
    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }

    pub fn failures(&self) -> Vec<(Condition, usize)> {
        let mut out = Vec::new();
        for (cond, flags) in [
            (Condition::QuSpd, &self.qu_spd),
            (Condition::QvSpd, &self.qv_spd),
            (Condition::QzSpd, &self.qz_spd),
            (Condition::KNonsingular, &self.k_nonsingular),
        ] {
            out.extend(flags.iter().enumerate().filter(|(_, ok)| !**ok).map(|(i, _)| (cond, i)));
        }
        out
    }
}

pub fn check_theorem1(s: &StageBlocks) -> Theorem1Report {
    Theorem1Report {
        qu_spd: s.qu.iter().map(|q| spd_check(q).is_ok()).collect(),
        qv_spd: s.qv.iter().map(|q| spd_check(q).is_ok()).collect(),
        qz_spd: s.qz.iter().map(|q| spd_check(q).is_ok()).collect(),
        k_nonsingular: s.k.iter().map(|k| SparseLu::factor(k).is_ok()).collect(),
    }
}

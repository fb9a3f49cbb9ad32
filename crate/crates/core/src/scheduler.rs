//! Greedy beam selection: each far-field user in turn grabs the free beams on
//! which both the near-field gain and its own projected gain are strong.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precoder::EffectiveChannels;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    /// `S_k`, beam indices in pick order.
    pub beam_sets: Vec<Vec<usize>>,
    /// Far-field user riding on each beam, if any.
    pub owner: Vec<Option<usize>>,
}

impl Assignment {
    /// Builds an assignment from explicit beam sets, checking disjointness.
    pub fn from_sets(beam_sets: Vec<Vec<usize>>, num_beams: usize) -> Result<Self> {
        let mut owner = vec![None; num_beams];
        for (k, set) in beam_sets.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::EmptyBeamSet);
            }
            for &m in set {
                match owner.get_mut(m) {
                    None => return Err(Error::Dimension(format!("beam {m} out of range"))),
                    Some(Some(other)) => {
                        return Err(Error::InvalidConfig(format!(
                            "beam {m} assigned to users {other} and {k}"
                        )))
                    }
                    Some(slot) => *slot = Some(k),
                }
            }
        }
        Ok(Self { beam_sets, owner })
    }

    pub fn num_users(&self) -> usize {
        self.beam_sets.len()
    }

    pub fn num_beams(&self) -> usize {
        self.owner.len()
    }

    /// Beam of user k when every user holds exactly one.
    pub fn single_beam(&self, k: usize) -> Option<usize> {
        match self.beam_sets.get(k).map(Vec::as_slice) {
            Some([m]) => Some(*m),
            _ => None,
        }
    }
}

/// Greedy selection with users processed in index order.
pub fn greedy_assign(eff: &EffectiveChannels, far_users: usize, beams_per_user: usize) -> Result<Assignment> {
    let order: Vec<usize> = (0..far_users).collect();
    greedy_assign_ordered(eff, beams_per_user, &order)
}

/// Greedy selection with an explicit user order (a permutation of `0..K`).
///
/// Normalizers are taken over all M beams once; ties go to the lowest index.
pub fn greedy_assign_ordered(eff: &EffectiveChannels, beams_per_user: usize, order: &[usize]) -> Result<Assignment> {
    greedy_assign_masked(eff, beams_per_user, order, &vec![true; eff.num_beams()])
}

/// Greedy selection restricted to beams with `allowed[m]`. Normalizers still
/// range over all M beams.
pub fn greedy_assign_masked(
    eff: &EffectiveChannels,
    beams_per_user: usize,
    order: &[usize],
    allowed: &[bool],
) -> Result<Assignment> {
    let m = eff.num_beams();
    let k = order.len();
    if allowed.len() != m {
        return Err(Error::Dimension(format!("mask has {} entries for {m} beams", allowed.len())));
    }
    let available = allowed.iter().filter(|a| **a).count();
    if k * beams_per_user > available {
        return Err(Error::TooManyBeams {
            k,
            dx: beams_per_user,
            m: available,
        });
    }
    let mut seen = vec![false; k];
    for &u in order {
        if u >= k || std::mem::replace(&mut seen[u], true) {
            return Err(Error::InvalidConfig("user order is not a permutation".into()));
        }
        if u >= eff.num_far() {
            return Err(Error::Dimension(format!("user {u} has no effective channel")));
        }
    }

    let h_max = eff.nf_gain.iter().cloned().fold(0.0, f64::max);
    let ratio = |v: f64, max: f64| if max > 0.0 { v / max } else { 0.0 };

    let mut owner = vec![None; m];
    let mut beam_sets = vec![Vec::with_capacity(beams_per_user); k];
    for &user in order {
        let g_max = eff.ff_gain.column(user).iter().cloned().fold(0.0, f64::max);
        for _ in 0..beams_per_user {
            let mut best: Option<(usize, f64)> = None;
            for beam in (0..m).filter(|&b| allowed[b] && owner[b].is_none()) {
                let score = ratio(eff.nf_gain[beam], h_max).min(ratio(eff.ff_gain[(beam, user)], g_max));
                if best.is_none_or(|(_, s)| score > s) {
                    best = Some((beam, score));
                }
            }
            let (beam, _) = best.expect("K * D_x <= M leaves a free beam");
            owner[beam] = Some(user);
            beam_sets[user].push(beam);
        }
    }
    Ok(Assignment { beam_sets, owner })
}

//! Participant identities and protocol parameters.

use core::fmt;

/// Index of a participant in `[0, n)`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct ParticipantId(pub u16);

impl ParticipantId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Debug for ParticipantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

impl fmt::Display for ParticipantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

impl From<u16> for ParticipantId {
    fn from(v: u16) -> Self {
        ParticipantId(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParamsError {
    #[error("n = {n} cannot tolerate f = {f} Byzantine participants (need n >= 3f + 1)")]
    TooFewParticipants { n: usize, f: usize },
    #[error("round budget r_max = {0} is below the minimum of 2")]
    RoundBudget(u32),
    #[error("history depth {depth} leaves no room inside r_max = {r_max}")]
    HistoryDepth { depth: u32, r_max: u32 },
    #[error("participant count {0} does not fit a 16-bit identifier")]
    TooLarge(usize),
}

/// Static parameters shared by every participant of one dissemination
/// instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProtocolParams {
    pub n: usize,
    pub f: usize,
    /// Round budget of one instance.
    pub r_max: u32,
    /// Highest round covered by history completeness; the target is every
    /// participant's rounds `0..=history_depth`.
    pub history_depth: u32,
    /// Maximum number of enquiry rounds before giving up on completeness.
    pub e_max: u32,
}

impl ProtocolParams {
    pub const DEFAULT_R_MAX: u32 = 5;
    pub const DEFAULT_E_MAX: u32 = 2;

    /// Parameters with `f = floor((n - 1) / 3)` and default budgets.
    pub fn for_n(n: usize) -> Result<Self, ParamsError> {
        Self::new(n, n.saturating_sub(1) / 3, Self::DEFAULT_R_MAX)
    }

    pub fn new(n: usize, f: usize, r_max: u32) -> Result<Self, ParamsError> {
        let p = ProtocolParams {
            n,
            f,
            r_max,
            history_depth: 1,
            e_max: Self::DEFAULT_E_MAX,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_history_depth(mut self, depth: u32) -> Result<Self, ParamsError> {
        self.history_depth = depth;
        self.validate()?;
        Ok(self)
    }

    pub fn with_e_max(mut self, e_max: u32) -> Self {
        self.e_max = e_max;
        self
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        if self.n < 3 * self.f + 1 {
            return Err(ParamsError::TooFewParticipants {
                n: self.n,
                f: self.f,
            });
        }
        if self.n > u16::MAX as usize {
            return Err(ParamsError::TooLarge(self.n));
        }
        if self.r_max < 2 {
            return Err(ParamsError::RoundBudget(self.r_max));
        }
        if self.history_depth + 1 > self.r_max {
            return Err(ParamsError::HistoryDepth {
                depth: self.history_depth,
                r_max: self.r_max,
            });
        }
        Ok(())
    }

    /// Originals a participant must hold before it may advance a round.
    pub fn advance_quorum(&self) -> usize {
        2 * self.f + 1
    }

    /// Batches a participant must receive before it authenticates.
    pub fn auth_quorum(&self) -> usize {
        self.n - self.f
    }

    /// Support an anchor needs at the following step to commit.
    pub fn commit_support(&self) -> usize {
        self.f + 1
    }

    /// Round of the first vertex that can carry a complete history.
    pub fn completeness_round(&self) -> u32 {
        self.history_depth + 1
    }

    pub fn participants(&self) -> impl Iterator<Item = ParticipantId> + Clone {
        (0..self.n as u16).map(ParticipantId)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resilience_bound() {
        assert!(ProtocolParams::new(4, 1, 8).is_ok());
        assert_eq!(
            ProtocolParams::new(3, 1, 8),
            Err(ParamsError::TooFewParticipants { n: 3, f: 1 })
        );
        assert_eq!(ProtocolParams::new(4, 1, 1), Err(ParamsError::RoundBudget(1)));
    }

    #[test]
    fn default_f_rule() {
        for (n, f) in [(4, 1), (5, 1), (7, 2), (10, 3), (20, 6), (32, 10)] {
            assert_eq!(ProtocolParams::for_n(n).unwrap().f, f);
        }
    }

    #[test]
    fn quorums() {
        let p = ProtocolParams::for_n(4).unwrap();
        assert_eq!(p.advance_quorum(), 3);
        assert_eq!(p.auth_quorum(), 3);
        assert_eq!(p.commit_support(), 2);
        assert_eq!(p.completeness_round(), 2);
    }

    #[test]
    fn history_depth_must_fit() {
        let p = ProtocolParams::new(4, 1, 3).unwrap();
        assert!(p.with_history_depth(2).is_ok());
        assert!(p.with_history_depth(3).is_err());
    }
}

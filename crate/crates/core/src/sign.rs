use std::fmt;

/// Half-width of the tie band around a zero vote (coefficients sum to 1).
pub const VOTE_TIE_TOLERANCE: f64 = 1e-12;

/// Binary label / classifier output in `{+1, -1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Neg,
    Pos,
}

impl Sign {
    /// `sign(v)` with the tie rule `sign(0) = +1`.
    #[inline]
    pub fn of(v: f64) -> Sign {
        if v >= 0.0 {
            Sign::Pos
        } else {
            Sign::Neg
        }
    }

    /// Sign of a weighted vote. Sums within [`VOTE_TIE_TOLERANCE`] of zero are
    /// ties and vote `+1`, so the decision does not depend on summation order.
    #[inline]
    pub fn of_vote(sum: f64) -> Sign {
        Sign::of(sum + VOTE_TIE_TOLERANCE)
    }

    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Sign::Pos => 1.0,
            Sign::Neg => -1.0,
        }
    }

    #[inline]
    pub fn flip(self) -> Sign {
        match self {
            Sign::Pos => Sign::Neg,
            Sign::Neg => Sign::Pos,
        }
    }

    pub fn from_i32(v: i32) -> Option<Sign> {
        match v {
            1 => Some(Sign::Pos),
            -1 => Some(Sign::Neg),
            _ => None,
        }
    }

    pub fn as_i32(self) -> i32 {
        match self {
            Sign::Pos => 1,
            Sign::Neg => -1,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+}", self.as_i32())
    }
}

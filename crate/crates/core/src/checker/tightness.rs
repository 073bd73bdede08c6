use thiserror::Error;

use crate::builder::{build_run, BuildError, DelayPolicy};
use crate::crossing::{Params, Train, TrainPattern};
use crate::timeline::Run;
use crate::value::{format_rational, int, Rational};

use super::{check_liveness, check_liveness_with, check_safety, CheckError, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TightnessError {
    #[error("part must be 1 or 2, got {0}")]
    BadPart(u8),
    #[error("no witness: {0}")]
    NoWitness(String),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Check(#[from] CheckError),
}

/// A run showing that a liveness constant cannot be lowered to `c`.
#[derive(Debug, Clone)]
pub struct TightnessWitness {
    pub part: u8,
    pub run: Run,
    /// Parameters the run was built with, after rescaling.
    pub params: Params,
    pub c: Rational,
    /// The gate delay the construction hinges on: opening for part 1,
    /// closing for part 2.
    pub delta: Rational,
    /// Factor applied to every duration (1 when no rescaling was needed).
    pub scale: Rational,
    pub safety: Verdict,
    pub liveness: Verdict,
    /// Liveness with the constant replaced by `c`; fails.
    pub strengthened: Verdict,
}

/// Builds the single-train witness for part 1 (`dopen` replaced by `c`)
/// or part 2 (`Dclose` replaced by `c`). Large constants are scaled down
/// so the fixed traffic layout still fits around them.
pub fn tightness_witness(
    part: u8,
    params: &Params,
    c: &Rational,
) -> Result<TightnessWitness, TightnessError> {
    let limit = match part {
        1 => params.dopen.clone(),
        2 => params.big_dclose(),
        _ => return Err(TightnessError::BadPart(part)),
    };
    if *c <= int(0) || *c >= limit {
        let name = if part == 1 { "dopen" } else { "Dclose" };
        return Err(TightnessError::NoWitness(format!(
            "c = {} must lie strictly between 0 and {name} = {}; the bound with {name} itself holds",
            format_rational(c),
            format_rational(&limit)
        )));
    }

    let largest = params.dopen.clone().max(params.big_dclose());
    let scale = if largest >= int(10) {
        int(1) / (largest.floor() + int(1))
    } else {
        int(1)
    };
    let params = Params::new(
        &params.dclose * &scale,
        &params.dopen * &scale,
        &params.dmin * &scale,
        &params.dmax * &scale,
    )
    .expect("scaling preserves the parameter constraints");
    let c = c * &scale;

    let two = int(2);
    let (delta, delays) = if part == 1 {
        let delta = (&c + &params.dopen) / &two;
        (delta.clone(), vec![&params.dclose / &two, delta])
    } else {
        let delta = params.dclose.clone().min(params.big_dclose() - &c) / &two;
        (delta.clone(), vec![delta, &params.dopen / &two])
    };

    let dmax = params.dmax.clone();
    let pattern = TrainPattern::new(vec![vec![Train::new(
        int(100),
        int(100) + &dmax,
        int(110) + &dmax,
    )]]);
    let horizon = int(120) + &dmax * &two + &params.dopen + params.big_dclose();
    let (run, _) = build_run(&pattern, &params, &horizon, &DelayPolicy::Explicit(delays))?;

    let safety = check_safety(&run)?;
    let liveness = check_liveness(&run)?;
    let strengthened = if part == 1 {
        check_liveness_with(&run, &c, &params.big_dclose())?
    } else {
        check_liveness_with(&run, &params.dopen, &c)?
    };
    Ok(TightnessWitness {
        part,
        run,
        params,
        c,
        delta,
        scale,
        safety,
        liveness,
        strengthened,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::Status;
    use crate::value::rat;

    fn small() -> Params {
        Params::new(rat(1, 4), rat(1, 2), int(2), int(3)).unwrap()
    }

    #[test]
    fn opening_delay_beats_smaller_constant() {
        let w = tightness_witness(1, &small(), &rat(1, 4)).unwrap();
        assert_eq!(w.delta, rat(3, 8));
        assert_eq!(w.safety.status, Status::Pass);
        assert_eq!(w.liveness.status, Status::Pass);
        assert!(w.strengthened.failed());
        // 110 + dmax + c
        assert_eq!(w.strengthened.first_moment(), Some(&rat(453, 4)));
    }

    #[test]
    fn closing_delay_beats_smaller_constant() {
        let w = tightness_witness(2, &small(), &rat(1, 2)).unwrap();
        assert_eq!(w.strengthened.status, Status::Fail, "{}", w.strengthened);
        assert_eq!(w.liveness.status, Status::Pass, "{}", w.liveness);
    }

    #[test]
    fn constant_itself_has_no_witness() {
        let e = tightness_witness(1, &small(), &rat(1, 2)).unwrap_err();
        assert!(matches!(e, TightnessError::NoWitness(_)));
        assert!(tightness_witness(3, &small(), &rat(1, 8)).is_err());
    }

    #[test]
    fn large_constants_are_rescaled() {
        let p = Params::from_ints(10, 20, 40, 60).unwrap();
        let w = tightness_witness(2, &p, &int(15)).unwrap();
        assert!(w.scale < int(1));
        assert!(w.strengthened.failed());
        assert_eq!(w.liveness.status, Status::Pass);
    }
}

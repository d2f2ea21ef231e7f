//! The emergency dual threshold.
//!
//! An emergency election evaluates early, once accepted weight reaches the
//! frontier `t_e = 1 - (1 - t)/2`. The early tally settles the outcome only
//! when no assignment of the missing votes could change it; otherwise the
//! election falls through to the late tally.

use serde::{Deserialize, Serialize};

use crate::rational::Fraction;
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EmergencyOutcome {
    ApproveEarly,
    RejectEarly,
    Undecided,
}

pub fn emergency_threshold(t: Fraction) -> Result<Fraction, Error> {
    if !t.is_unit_interval() {
        return Err(Error::InvalidConfig(format!("threshold {t} outside (0, 1]")));
    }
    Ok(t.halfway_to_one())
}

/// Classifies an early tally against the total eligible weight.
pub fn emergency_evaluate(
    partial_yes: u64,
    arrived_weight: u64,
    total_weight: u64,
    t: Fraction,
) -> Result<EmergencyOutcome, Error> {
    let te = emergency_threshold(t)?;
    if partial_yes > arrived_weight || arrived_weight > total_weight || !te.met_by(arrived_weight, total_weight) {
        return Err(Error::FrontierNotReached);
    }
    if t.met_by(partial_yes, total_weight) {
        Ok(EmergencyOutcome::ApproveEarly)
    } else if !t.met_by(partial_yes + (total_weight - arrived_weight), total_weight) {
        Ok(EmergencyOutcome::RejectEarly)
    } else {
        Ok(EmergencyOutcome::Undecided)
    }
}

//! Plurality-vote consolidation: exact ensemble accuracy, an enumeration
//! oracle, and the runtime vote itself.
//!
//! The accuracy of a consolidated annotation is a sum over the integer
//! partitions of the vote count; everything combinatorial is exact big
//! integers, with floats entering only at the final assembly.

mod accuracy;
mod partition;
mod vote;

pub use accuracy::{
    brute_force_ensemble, ensemble_accuracy, min_votes_for_target, multinomial_coefficient,
    pmf_phi, preimage_count, success_given_partition, VoteTally,
};
pub use partition::{count_partitions, partitions, partitions_bounded, Partition, Partitions};
pub use vote::plurality_vote;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EnsembleError {
    #[error("cannot partition zero")]
    ZeroCount,
    #[error("invalid partition: {0}")]
    InvalidPartition(&'static str),
    #[error("partition has {length} parts but only {classes} classes exist")]
    InfeasiblePartition { length: usize, classes: u32 },
    #[error("invalid vote tally: {0}")]
    InvalidTally(&'static str),
    #[error("accuracy {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("need at least two classes, got {0}")]
    TooFewClasses(u32),
    #[error("vote count {0} exceeds the supported maximum of 64")]
    VoteCountTooLarge(u32),
    #[error("enumeration of {classes}^{votes} vote sequences exceeds the oracle cap")]
    InstanceTooLarge { votes: u32, classes: u32 },
    #[error("cannot vote on an empty label sequence")]
    EmptyVote,
}

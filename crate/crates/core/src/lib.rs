pub mod baselines;
pub mod embedstore;
pub mod evalrank;
pub mod numerics;
pub mod seqmodel;
pub mod synthgen;

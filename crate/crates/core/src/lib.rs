//! Query-efficient decision-based attacks with projection-based gradient
//! estimation, plus tools to check the estimator's cosine guarantees.

pub mod numerics;
pub mod projections;
pub mod victims;
pub mod estimator;
pub mod attack;
pub mod theory;

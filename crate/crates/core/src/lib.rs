pub mod circuit;
pub mod factorize;
pub mod linalg;
pub mod partition;
pub mod planner;
pub mod lchs;
pub mod runtime;

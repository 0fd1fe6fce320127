pub mod audit;
pub mod evolution;
pub mod graph;
pub mod lockfile;
pub mod remediation;
pub mod resolver;
pub mod semver;
pub mod tree;

pub mod constraint;
pub mod range;
pub mod version;

pub use constraint::{Constraint, ConstraintError, ConstraintKind};
pub use range::{Comparator, Conjunction, Op, RangeError, VersionRange};
pub use version::{Identifier, Version, VersionError};

//! Factor spaces, reference distributions, designs and run logs.

mod log;
mod reference;
mod sampling;
mod space;
mod support;

pub use log::{Record, RunLog};
pub use reference::{ReferenceDistribution, ReferenceKind};
pub use sampling::{sample_design, DesignPlan};
pub use space::{Config, Factor, FactorSpace, DEFAULT_ENUMERATION_CAP};
pub use support::{effective_sample_size, SupportCounts};

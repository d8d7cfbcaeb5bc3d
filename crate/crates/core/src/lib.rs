pub mod chip;
pub mod circuit;
pub mod harness;
pub mod oracle;
pub mod placement;
pub mod profiler;
pub mod router;
pub mod scheduler;

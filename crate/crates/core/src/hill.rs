//! Discretized Hill operator (placeholder).
pub struct SpectrumReport;

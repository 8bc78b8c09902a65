//! Verification harness (placeholder).

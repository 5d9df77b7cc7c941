//! Coarse-grained localization detection (placeholder).

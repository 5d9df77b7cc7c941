//! Obstacle surgery experiments (placeholder).

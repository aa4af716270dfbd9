//! Experiment sweeps.

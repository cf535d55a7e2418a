//! Gesture-guided hand exercise sessions driven by an 8-channel EMG armband.
//!
//! Data flows device → [`protocol`] → [`emg`] (windows, features,
//! classification) → [`session`] (exercise state machine) → feedback
//! events. [`store`] persists templates and session logs, [`sim`] stands in
//! for the armband, and [`pipeline`] wires the host side together.

pub mod emg;
pub mod pipeline;
pub mod protocol;
pub mod session;
pub mod sim;
pub mod store;

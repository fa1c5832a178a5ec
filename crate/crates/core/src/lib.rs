//! Reduced-order marine vessel simulation with a dynamic-positioning
//! control stack.
//!
//! The crate is organised bottom-up:
//!
//! * [`dynamics`]: 6-DOF prism model and equations of motion
//! * [`integrator`]: RK4 stepping and fixed-duration runs
//! * [`seastate`]: JONSWAP / Pierson–Moskowitz spectra and realizations
//! * [`gnc`]: reference filter, pose and velocity controllers, multiplexer
//! * [`allocation`]: pseudo-inverse thrust allocation with limits
//! * [`sensing`]: motion-capture noise model and observer
//! * [`harness`]: scenarios, the 4-corner mission and metrics

pub mod allocation;
pub mod dynamics;
pub mod gnc;
pub mod harness;
pub mod integrator;
pub mod seastate;
pub mod sensing;

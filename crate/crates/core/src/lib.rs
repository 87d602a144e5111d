//! Non-overshooting sliding mode control: gain design, controllers, plants
//! and a fixed-step simulator.

pub mod control;
pub mod gains;
pub mod plant;
pub mod scenario;
pub mod sim;
pub mod sliding;
pub mod sweep;

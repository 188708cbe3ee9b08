//! Synthetic data: a hard-core spatial selection process, a LoRa-style
//! packet-collision scenario, and exact draws from a known determinantal model.

mod determinantal;
mod lora;
mod spatial;

pub use determinantal::*;
pub use lora::*;
pub use spatial::*;

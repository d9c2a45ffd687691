pub mod channel;
pub mod qpt;

pub use channel::*;
pub use qpt::*;

pub mod analysis;
pub mod gen;
pub mod harness;
pub mod rational;
pub mod sim;
pub mod task;
pub mod time;

//! Set-constrained delivery broadcast (SCD-broadcast), the shared objects built
//! on it, its construction from snapshot objects, and trace-level checkers,
//! all running inside a deterministic simulator of crash-prone asynchronous
//! processes.

pub mod checkers;
pub mod fifo;
pub mod fixtures;
pub mod gen;
pub mod metrics;
pub mod objects;
pub mod runner;
pub mod scd;
pub mod scenario;
pub mod shm;
pub mod sim;
pub mod stack;
pub mod trace;
pub mod types;
pub mod verify;

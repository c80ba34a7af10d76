pub mod config;
pub mod interpreter;
pub mod sandbox;
pub mod server;
pub mod session;
pub mod source_scan;
pub mod trace;
pub mod value;

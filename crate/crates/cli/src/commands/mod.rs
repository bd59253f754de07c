pub mod eval;
pub mod gen;
pub mod recon;
pub mod selftest;
pub mod train;

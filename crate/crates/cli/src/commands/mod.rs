pub mod bench;
pub mod eye;
pub mod fit;
pub mod simulate;
pub mod sweep;

pub mod energy;
pub mod simulate;
pub mod sweep;
pub mod trace;
pub mod verify;

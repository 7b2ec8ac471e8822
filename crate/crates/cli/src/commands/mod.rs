pub mod gendata;
pub mod model;
pub mod simulate;
pub mod sweep;

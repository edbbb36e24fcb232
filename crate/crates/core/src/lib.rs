pub mod ensembles;
pub mod harness;
pub mod numerics;
pub mod spectral;
pub mod theory;

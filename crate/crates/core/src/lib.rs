pub mod config;
pub mod cycle;
pub mod divisor;
pub mod error;
pub mod fan;
pub mod gamma;
pub mod integrate;
pub mod lattice;
pub mod params;
pub mod quadrature;
pub mod series;
pub mod verify;

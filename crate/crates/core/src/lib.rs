pub mod bifurcation;
pub mod cli;
pub mod equilibria;
pub mod error;
pub mod fpe;
pub mod montecarlo;
pub mod orbit;
pub mod systems;

pub mod data;
pub mod error;
pub mod kernel;
pub mod likelihood;
pub mod prior;
pub mod rng;
pub mod subset;
pub mod sampling;
pub mod baselines;
pub mod optim;
pub mod inference;
pub mod simulation;
pub mod evaluation;
pub mod verify;

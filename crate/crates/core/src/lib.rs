pub mod linops;
pub mod prox;
pub mod solvers;
pub mod experiments;
pub mod imaging;
pub mod cli;

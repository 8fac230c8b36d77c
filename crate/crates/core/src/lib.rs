//! Base-station siting: place new macro and micro stations on a traffic grid
//! so that enough weak-coverage traffic is served at minimum cost.
//!
//! * [`model`] holds the instance, parameters and deployments;
//! * [`coverage`] scores deployments against every constraint;
//! * [`solvers`] has greedy, simulated annealing and particle swarm;
//! * [`agent`] runs feedback loops around a pluggable plan proposer;
//! * [`rag`] retrieves knowledge documents for proposer prompts;
//! * [`data_io`], [`render`] and [`experiment`] cover files, images and batch runs;
//! * [`cli`] is the `bss` command line.

pub mod agent;
pub mod cli;
pub mod coverage;
pub mod data_io;
pub mod experiment;
pub mod model;
pub mod rag;
pub mod render;
pub mod solvers;

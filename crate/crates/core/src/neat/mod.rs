//! NeuroEvolution of Augmenting Topologies.
//!
//! Genomes carry node genes and innovation-numbered connection genes. The
//! [`Population`] speciates by compatibility distance, shares fitness within
//! species and breeds the next generation with aligned crossover and
//! weight/structural mutation.

mod genome;
mod innovation;
pub mod io;
mod network;
mod params;
mod population;
mod reproduction;

pub use genome::{ConnectionGene, Genome, NodeGene, NodeRole};
pub use innovation::InnovationRegistry;
pub use network::{sigmoid, Network};
pub use params::NeatParams;
pub use population::{Population, Species};
pub use reproduction::{add_connection, add_node, compatibility_distance, crossover, mutate, mutate_weights};

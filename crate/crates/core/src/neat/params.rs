use serde::{Deserialize, Serialize};

/// NEAT hyper-parameters. Defaults are the canonical published values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeatParams {
    pub population_size: usize,
    /// Compatibility threshold for speciation.
    pub compatibility_threshold: f64,
    /// Excess-gene coefficient.
    pub c1: f64,
    /// Disjoint-gene coefficient.
    pub c2: f64,
    /// Mean weight difference coefficient.
    pub c3: f64,
    pub sigmoid_slope: f64,
    /// Fraction of each species allowed to reproduce.
    pub survival_threshold: f64,
    /// Generations without improvement before a species is culled.
    pub stagnation_limit: usize,
    /// Species larger than this keep their champion unchanged.
    pub elitism_min_species_size: usize,
    /// Always carry the population champion over unchanged.
    pub global_elitism: bool,

    pub weight_mutation_prob: f64,
    pub weight_perturb_sigma: f64,
    /// Per-connection chance of a fresh uniform weight instead of a perturbation.
    pub weight_reset_prob: f64,
    pub weight_init_range: f64,
    pub add_connection_prob: f64,
    pub add_node_prob: f64,
    pub allow_recurrent: bool,

    pub crossover_prob: f64,
    pub interspecies_mating_prob: f64,
    /// Chance a gene disabled in either parent stays disabled in the child.
    pub disable_inherit_prob: f64,
}

impl Default for NeatParams {
    fn default() -> Self {
        NeatParams {
            population_size: 150,
            compatibility_threshold: 3.0,
            c1: 1.0,
            c2: 1.0,
            c3: 0.4,
            sigmoid_slope: 4.9,
            survival_threshold: 0.2,
            stagnation_limit: 15,
            elitism_min_species_size: 5,
            global_elitism: true,
            weight_mutation_prob: 0.8,
            weight_perturb_sigma: 0.5,
            weight_reset_prob: 0.1,
            weight_init_range: 1.0,
            add_connection_prob: 0.05,
            add_node_prob: 0.03,
            allow_recurrent: true,
            crossover_prob: 0.75,
            interspecies_mating_prob: 0.001,
            disable_inherit_prob: 0.75,
        }
    }
}

impl NeatParams {
    /// Parameters with every mutation switched off.
    pub fn frozen() -> Self {
        NeatParams {
            weight_mutation_prob: 0.0,
            add_connection_prob: 0.0,
            add_node_prob: 0.0,
            ..NeatParams::default()
        }
    }
}

use rand::seq::SliceRandom;
use rand::Rng;

use super::genome::Genome;
use super::reproduction::{compatibility_distance, crossover, mutate};
use super::{InnovationRegistry, NeatParams};

#[derive(Debug, Clone, PartialEq)]
pub struct Species {
    pub id: u32,
    pub representative: Genome,
    /// Indices into the population's genome list.
    pub members: Vec<usize>,
    pub best_fitness: f64,
    /// Generations since `best_fitness` last improved.
    pub staleness: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    genomes: Vec<Genome>,
    species: Vec<Species>,
    registry: InnovationRegistry,
    params: NeatParams,
    generation: usize,
    next_species_id: u32,
}

fn fitness_of(g: &Genome) -> f64 {
    g.fitness.expect("genome must be evaluated before reproduction")
}

impl Population {
    /// Fully connected initial population with uniform random weights.
    pub fn new<R: Rng>(params: NeatParams, inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let mut registry = InnovationRegistry::new((inputs + outputs) as u32);
        let genomes = (0..params.population_size)
            .map(|_| Genome::fully_connected(inputs, outputs, &mut registry, rng))
            .collect();
        Population {
            genomes,
            species: Vec::new(),
            registry,
            params,
            generation: 0,
            next_species_id: 0,
        }
    }

    pub fn from_genomes(params: NeatParams, genomes: Vec<Genome>) -> Self {
        let first = genomes.first().expect("population must not be empty");
        let mut registry =
            InnovationRegistry::new((first.input_count() + first.output_count()) as u32);
        for g in &genomes {
            let inn = g.connections().iter().map(|c| c.innovation + 1).max().unwrap_or(0);
            let node = g.nodes().iter().map(|n| n.id + 1).max().unwrap_or(0);
            registry.reserve(inn, node);
        }
        Population {
            genomes,
            species: Vec::new(),
            registry,
            params,
            generation: 0,
            next_species_id: 0,
        }
    }

    pub fn genomes(&self) -> &[Genome] {
        &self.genomes
    }

    pub fn genomes_mut(&mut self) -> &mut [Genome] {
        &mut self.genomes
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn params(&self) -> &NeatParams {
        &self.params
    }

    pub fn registry(&self) -> &InnovationRegistry {
        &self.registry
    }

    /// Index of the best evaluated genome; ties go to the lowest index.
    pub fn champion_index(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, g) in self.genomes.iter().enumerate() {
            if let Some(f) = g.fitness {
                if best.map_or(true, |(_, b)| f > b) {
                    best = Some((i, f));
                }
            }
        }
        best.map(|(i, _)| i)
    }

    /// Assign every genome to the first species whose representative is
    /// within the compatibility threshold, founding new species as needed.
    pub fn speciate(&mut self) {
        let p = self.params;
        for s in &mut self.species {
            s.members.clear();
        }
        for (i, g) in self.genomes.iter().enumerate() {
            let found = self.species.iter_mut().find(|s| {
                compatibility_distance(g, &s.representative, p.c1, p.c2, p.c3)
                    < p.compatibility_threshold
            });
            match found {
                Some(s) => s.members.push(i),
                None => {
                    self.species.push(Species {
                        id: self.next_species_id,
                        representative: g.clone(),
                        members: vec![i],
                        best_fitness: f64::NEG_INFINITY,
                        staleness: 0,
                    });
                    self.next_species_id += 1;
                }
            }
        }
        self.species.retain(|s| !s.members.is_empty());
    }

    /// Speciate, share fitness, and replace the population with offspring.
    ///
    /// Stale species are culled; if that would remove every species, the two
    /// with the best historical fitness survive instead. The population size
    /// is restored exactly.
    pub fn next_generation<R: Rng>(&mut self, rng: &mut R) {
        let p = self.params;
        self.speciate();

        for s in &mut self.species {
            let best = s
                .members
                .iter()
                .map(|&i| fitness_of(&self.genomes[i]))
                .fold(f64::NEG_INFINITY, f64::max);
            if best > s.best_fitness {
                s.best_fitness = best;
                s.staleness = 0;
            } else {
                s.staleness += 1;
            }
        }

        let champion = self.champion_index().expect("non-empty evaluated population");
        let mut keep: Vec<usize> = (0..self.species.len())
            .filter(|&k| self.species[k].staleness < p.stagnation_limit)
            .collect();
        if keep.is_empty() {
            let mut by_best: Vec<usize> = (0..self.species.len()).collect();
            by_best.sort_by(|&a, &b| {
                self.species[b]
                    .best_fitness
                    .total_cmp(&self.species[a].best_fitness)
                    .then(a.cmp(&b))
            });
            by_best.truncate(2);
            by_best.sort_unstable();
            keep = by_best;
        }
        let species: Vec<Species> = keep.into_iter().map(|k| self.species[k].clone()).collect();

        // explicit fitness sharing on fitness shifted to be non-negative
        let min_f = self
            .genomes
            .iter()
            .map(fitness_of)
            .fold(f64::INFINITY, f64::min);
        let shares: Vec<f64> = species
            .iter()
            .map(|s| {
                s.members
                    .iter()
                    .map(|&i| fitness_of(&self.genomes[i]) - min_f)
                    .sum::<f64>()
                    / s.members.len() as f64
            })
            .collect();
        let mut quotas = allocate(&shares, &species, p.population_size);

        let champ_species = species.iter().position(|s| s.members.contains(&champion));
        if let Some(cs) = champ_species {
            if quotas[cs] == 0 && p.global_elitism {
                let donor = (0..quotas.len()).max_by_key(|&k| quotas[k]).unwrap();
                quotas[donor] -= 1;
                quotas[cs] += 1;
            }
        }

        self.registry.new_generation();
        let mut next = Vec::with_capacity(p.population_size);
        for (k, s) in species.iter().enumerate() {
            let quota = quotas[k];
            if quota == 0 {
                continue;
            }
            let mut ranked = s.members.clone();
            ranked.sort_by(|&a, &b| {
                fitness_of(&self.genomes[b])
                    .total_cmp(&fitness_of(&self.genomes[a]))
                    .then(a.cmp(&b))
            });
            let mut produced = 0;
            let species_elite = ranked.len() > p.elitism_min_species_size;
            let global_elite = p.global_elitism && Some(k) == champ_species;
            if species_elite || global_elite {
                let elite = if global_elite { champion } else { ranked[0] };
                let mut copy = self.genomes[elite].clone();
                copy.fitness = None;
                next.push(copy);
                produced += 1;
            }
            let survivors =
                ((ranked.len() as f64 * p.survival_threshold).ceil() as usize).clamp(1, ranked.len());
            let pool = &ranked[..survivors];
            while produced < quota {
                let a = *pool.choose(rng).unwrap();
                let mut child = if rng.gen_bool(p.crossover_prob.clamp(0.0, 1.0)) {
                    let b = if species.len() > 1 && rng.gen_bool(p.interspecies_mating_prob) {
                        let other = &species[rng.gen_range(0..species.len())];
                        *other.members.choose(rng).unwrap()
                    } else {
                        *pool.choose(rng).unwrap()
                    };
                    let (ga, gb) = (&self.genomes[a], &self.genomes[b]);
                    if fitness_of(gb) > fitness_of(ga) {
                        crossover(gb, ga, &p, rng)
                    } else {
                        crossover(ga, gb, &p, rng)
                    }
                } else {
                    self.genomes[a].clone()
                };
                mutate(&mut child, &p, &mut self.registry, rng);
                next.push(child);
                produced += 1;
            }
        }
        debug_assert_eq!(next.len(), p.population_size);

        // representatives for the next round are drawn from this generation
        self.species = species
            .into_iter()
            .map(|mut s| {
                let r = *s.members.choose(rng).unwrap();
                s.representative = self.genomes[r].clone();
                s.members.clear();
                s
            })
            .collect();
        self.genomes = next;
        self.generation += 1;
    }
}

/// Largest-remainder apportionment of `total` offspring proportional to
/// `shares`; falls back to species size when every share is zero.
fn allocate(shares: &[f64], species: &[Species], total: usize) -> Vec<usize> {
    let sum: f64 = shares.iter().sum();
    let weights: Vec<f64> = if sum > 0.0 && sum.is_finite() {
        shares.to_vec()
    } else {
        species.iter().map(|s| s.members.len() as f64).collect()
    };
    let wsum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / wsum * total as f64).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = total - quotas.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..exact.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        quotas[k] += 1;
        left -= 1;
    }
    quotas
}

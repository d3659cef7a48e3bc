use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::genome::{ConnectionGene, Genome, NodeGene, NodeRole};
use super::{InnovationRegistry, NeatParams};

/// Apply weight and structural mutations in place.
pub fn mutate<R: Rng>(
    genome: &mut Genome,
    params: &NeatParams,
    registry: &mut InnovationRegistry,
    rng: &mut R,
) {
    if params.weight_mutation_prob > 0.0 && rng.gen_bool(params.weight_mutation_prob.min(1.0)) {
        mutate_weights(genome, params, rng);
    }
    if params.add_connection_prob > 0.0 && rng.gen_bool(params.add_connection_prob.min(1.0)) {
        add_connection(genome, params, registry, rng);
    }
    if params.add_node_prob > 0.0 && rng.gen_bool(params.add_node_prob.min(1.0)) {
        add_node(genome, registry, rng);
    }
    genome.fitness = None;
}

pub fn mutate_weights<R: Rng>(genome: &mut Genome, params: &NeatParams, rng: &mut R) {
    let perturb = Normal::new(0.0, params.weight_perturb_sigma).expect("sigma must be finite and >= 0");
    let range = params.weight_init_range;
    for c in genome.connections.iter_mut() {
        if rng.gen_bool(params.weight_reset_prob) {
            c.weight = rng.gen_range(-range..=range);
        } else {
            c.weight += perturb.sample(rng);
        }
    }
}

fn reaches(genome: &Genome, from: u32, target: u32) -> bool {
    let mut stack = vec![from];
    let mut seen = std::collections::HashSet::new();
    while let Some(n) = stack.pop() {
        if n == target {
            return true;
        }
        if seen.insert(n) {
            stack.extend(genome.connections.iter().filter(|c| c.from == n).map(|c| c.to));
        }
    }
    false
}

/// Add one new connection between two previously unconnected nodes, chosen
/// uniformly among all legal pairs. Returns false when none exists.
pub fn add_connection<R: Rng>(
    genome: &mut Genome,
    params: &NeatParams,
    registry: &mut InnovationRegistry,
    rng: &mut R,
) -> bool {
    let mut candidates = Vec::new();
    for src in &genome.nodes {
        for dst in &genome.nodes {
            if dst.role == NodeRole::Input || genome.has_connection(src.id, dst.id) {
                continue;
            }
            if !params.allow_recurrent && (src.id == dst.id || reaches(genome, dst.id, src.id)) {
                continue;
            }
            candidates.push((src.id, dst.id));
        }
    }
    let Some(&(from, to)) = candidates.choose(rng) else {
        return false;
    };
    let range = params.weight_init_range;
    let conn = ConnectionGene {
        from,
        to,
        weight: rng.gen_range(-range..=range),
        enabled: true,
        innovation: registry.connection(from, to),
    };
    genome.insert_connection(conn);
    true
}

/// Split a random enabled connection `a -> b` (weight w) into `a -> h` with
/// weight 1 and `h -> b` with weight w, disabling the original.
pub fn add_node<R: Rng>(genome: &mut Genome, registry: &mut InnovationRegistry, rng: &mut R) -> bool {
    let enabled: Vec<usize> = (0..genome.connections.len())
        .filter(|&i| genome.connections[i].enabled)
        .collect();
    let Some(&idx) = enabled.choose(rng) else {
        return false;
    };
    let old = genome.connections[idx];
    let hidden = registry.split_node(old.innovation);
    if genome.has_node(hidden) {
        return false;
    }
    genome.connections[idx].enabled = false;
    genome.insert_node(NodeGene {
        id: hidden,
        role: NodeRole::Hidden,
    });
    let into = ConnectionGene {
        from: old.from,
        to: hidden,
        weight: 1.0,
        enabled: true,
        innovation: registry.connection(old.from, hidden),
    };
    let out = ConnectionGene {
        from: hidden,
        to: old.to,
        weight: old.weight,
        enabled: true,
        innovation: registry.connection(hidden, old.to),
    };
    genome.insert_connection(into);
    genome.insert_connection(out);
    true
}

/// Aligned NEAT crossover. `fitter` donates every disjoint and excess gene;
/// matching genes come from either parent at random. On equal fitness the
/// first argument is treated as the fitter parent.
pub fn crossover<R: Rng>(fitter: &Genome, other: &Genome, params: &NeatParams, rng: &mut R) -> Genome {
    let mut child = Genome {
        inputs: fitter.inputs,
        outputs: fitter.outputs,
        nodes: fitter.nodes.clone(),
        connections: Vec::with_capacity(fitter.connections.len()),
        fitness: None,
    };
    let mut j = 0;
    for gene in &fitter.connections {
        while j < other.connections.len() && other.connections[j].innovation < gene.innovation {
            j += 1;
        }
        let matching = other
            .connections
            .get(j)
            .filter(|o| o.innovation == gene.innovation);
        let mut inherited = match matching {
            Some(o) if rng.gen_bool(0.5) => *o,
            _ => *gene,
        };
        if let Some(o) = matching {
            if !gene.enabled || !o.enabled {
                inherited.enabled = !rng.gen_bool(params.disable_inherit_prob);
            }
        }
        child.connections.push(inherited);
    }
    child
}

/// NEAT compatibility distance `c1 E / N + c2 D / N + c3 W`.
pub fn compatibility_distance(a: &Genome, b: &Genome, c1: f64, c2: f64, c3: f64) -> f64 {
    let (ca, cb) = (&a.connections, &b.connections);
    let (mut i, mut j) = (0, 0);
    let (mut disjoint, mut matching, mut weight_diff) = (0usize, 0usize, 0.0);
    while i < ca.len() && j < cb.len() {
        let (x, y) = (ca[i].innovation, cb[j].innovation);
        if x == y {
            matching += 1;
            weight_diff += (ca[i].weight - cb[j].weight).abs();
            i += 1;
            j += 1;
        } else if x < y {
            disjoint += 1;
            i += 1;
        } else {
            disjoint += 1;
            j += 1;
        }
    }
    let excess = (ca.len() - i) + (cb.len() - j);
    let longest = ca.len().max(cb.len());
    let n = if ca.len() < 20 && cb.len() < 20 {
        1.0
    } else {
        longest as f64
    };
    let mean_w = if matching > 0 {
        weight_diff / matching as f64
    } else {
        0.0
    };
    c1 * excess as f64 / n + c2 * disjoint as f64 / n + c3 * mean_w
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn base(rng: &mut ChaCha8Rng, reg: &mut InnovationRegistry) -> Genome {
        Genome::fully_connected(11, 2, reg, rng)
    }

    #[test]
    fn add_node_rewires() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut reg = InnovationRegistry::new(13);
        let mut g = base(&mut rng, &mut reg);
        let before = g.clone();
        assert!(add_node(&mut g, &mut reg, &mut rng));
        let disabled: Vec<_> = g.connections().iter().filter(|c| !c.enabled).collect();
        assert_eq!(disabled.len(), 1);
        let old = *disabled[0];
        let hidden = g.nodes().iter().find(|n| n.role == NodeRole::Hidden).unwrap().id;
        let into = g.connections().iter().find(|c| c.to == hidden).unwrap();
        let out = g.connections().iter().find(|c| c.from == hidden).unwrap();
        assert_eq!((into.from, into.weight), (old.from, 1.0));
        assert_eq!((out.to, out.weight), (old.to, old.weight));
        assert_eq!(g.connections().len(), before.connections().len() + 2);
        g.validate().unwrap();
    }

    #[test]
    fn same_mutation_same_innovation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut reg = InnovationRegistry::new(13);
        let mut a = base(&mut rng, &mut reg);
        let mut b = a.clone();
        reg.new_generation();
        // split the same connection in two genomes
        let target = a.connections()[4].innovation;
        for g in [&mut a, &mut b] {
            for c in g.connections_mut() {
                c.enabled = c.innovation == target;
            }
            add_node(g, &mut reg, &mut rng);
        }
        assert_eq!(a.innovations(), b.innovations());
        assert_eq!(a.nodes(), b.nodes());
        // two genomes adding the same new connection
        let i1 = reg.connection(0, 1000);
        let i2 = reg.connection(0, 1000);
        assert_eq!(i1, i2);
        assert!(reg.connection(1, 1000) > i1);
    }

    #[test]
    fn zero_probabilities_leave_genome_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut reg = InnovationRegistry::new(13);
        let g = base(&mut rng, &mut reg);
        let mut m = g.clone();
        mutate(&mut m, &NeatParams::frozen(), &mut reg, &mut rng);
        assert_eq!(m.connections(), g.connections());
        assert_eq!(m.nodes(), g.nodes());
    }

    #[test]
    fn crossover_identical_parents() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut reg = InnovationRegistry::new(13);
        let g = base(&mut rng, &mut reg);
        let c = crossover(&g, &g, &NeatParams::default(), &mut rng);
        assert_eq!(c.connections(), g.connections());
        assert_eq!(c.nodes(), g.nodes());
    }

    #[test]
    fn crossover_disjoint_parents_takes_fitter() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut reg = InnovationRegistry::new(13);
        let mut a = Genome::empty(11, 2);
        let mut b = Genome::empty(11, 2);
        for (g, src) in [(&mut a, 0u32), (&mut b, 5u32)] {
            for s in src..src + 3 {
                g.insert_connection(ConnectionGene {
                    from: s,
                    to: 11,
                    weight: 0.5,
                    enabled: true,
                    innovation: reg.connection(s, 11),
                });
            }
        }
        let child = crossover(&a, &b, &NeatParams::default(), &mut rng);
        assert_eq!(child.connections(), a.connections());
        let child = crossover(&b, &a, &NeatParams::default(), &mut rng);
        assert_eq!(child.connections(), b.connections());
    }

    #[test]
    fn distance_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut reg = InnovationRegistry::new(13);
        let g = base(&mut rng, &mut reg);
        assert_eq!(compatibility_distance(&g, &g, 1.0, 1.0, 0.4), 0.0);

        // 5 matching genes, |dw| = 0.5 each
        let mut a = Genome::empty(11, 2);
        let mut b = Genome::empty(11, 2);
        for s in 0..5u32 {
            let inn = reg.connection(s, 12);
            a.insert_connection(ConnectionGene { from: s, to: 12, weight: 0.0, enabled: true, innovation: inn });
            b.insert_connection(ConnectionGene { from: s, to: 12, weight: 0.5, enabled: true, innovation: inn });
        }
        assert!((compatibility_distance(&a, &b, 1.0, 1.0, 0.4) - 0.2).abs() < 1e-15);

        // two excess genes only
        let mut c = a.clone();
        for s in 5..7u32 {
            let inn = reg.connection(s, 12);
            c.insert_connection(ConnectionGene { from: s, to: 12, weight: 0.0, enabled: true, innovation: inn });
        }
        assert_eq!(compatibility_distance(&a, &c, 1.0, 1.0, 0.4), 2.0);
    }

    #[test]
    fn add_connection_skips_when_saturated() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut reg = InnovationRegistry::new(3);
        let mut g = Genome::fully_connected(1, 2, &mut reg, &mut rng);
        let params = NeatParams::default();
        // 1 input, 2 outputs: legal targets are the outputs from any of 3 sources
        let mut added = 0;
        while add_connection(&mut g, &params, &mut reg, &mut rng) {
            added += 1;
        }
        assert_eq!(added, 4);
        assert_eq!(g.connections().len(), 6);
        g.validate().unwrap();
    }
}

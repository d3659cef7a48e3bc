use std::collections::HashMap;

use super::genome::{Genome, NodeRole};

/// Steepened logistic used by every non-input node.
pub fn sigmoid(x: f64, slope: f64) -> f64 {
    1.0 / (1.0 + (-slope * x).exp())
}

#[derive(Debug, Clone, PartialEq)]
struct Incoming {
    source: usize,
    weight: f64,
}

/// Decoded network with persistent activations.
///
/// Nodes are evaluated once per [`Network::activate`] call in a fixed order
/// (inputs first, then a depth-first topological order over enabled links).
/// A link whose source comes later in that order, including self-loops, is
/// recurrent and reads the source's activation from the previous call.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    inputs: usize,
    outputs: Vec<usize>,
    /// Evaluation order of non-input node slots with their incoming links.
    order: Vec<(usize, Vec<Incoming>)>,
    activations: Vec<f64>,
    slope: f64,
}

impl Network {
    pub fn from_genome(genome: &Genome, slope: f64) -> Self {
        let slot: HashMap<u32, usize> = genome
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id, i))
            .collect();
        let n = genome.nodes().len();
        let mut incoming: Vec<Vec<Incoming>> = vec![Vec::new(); n];
        let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); n];
        for c in genome.connections().iter().filter(|c| c.enabled) {
            let (s, t) = (slot[&c.from], slot[&c.to]);
            incoming[t].push(Incoming {
                source: s,
                weight: c.weight,
            });
            outgoing[s].push(t);
        }

        // depth-first post-order from the inputs, then from any node left
        // unreached; reversed, it gives a topological order of the acyclic
        // part with back edges treated as recurrent
        let mut state = vec![0u8; n];
        let mut post = Vec::with_capacity(n);
        let roots = (0..genome.input_count()).chain(0..n);
        for root in roots {
            if state[root] != 0 {
                continue;
            }
            let mut stack = vec![(root, 0usize)];
            state[root] = 1;
            while let Some(top) = stack.last_mut() {
                let node = top.0;
                if let Some(&child) = outgoing[node].get(top.1) {
                    top.1 += 1;
                    if state[child] == 0 {
                        state[child] = 1;
                        stack.push((child, 0));
                    }
                } else {
                    state[node] = 2;
                    post.push(node);
                    stack.pop();
                }
            }
        }
        post.reverse();
        let order = post
            .into_iter()
            .filter(|&s| genome.nodes()[s].role != NodeRole::Input)
            .map(|s| (s, std::mem::take(&mut incoming[s])))
            .collect();

        let outputs = genome.output_ids().map(|id| slot[&id]).collect();
        Network {
            inputs: genome.input_count(),
            outputs,
            order,
            activations: vec![0.0; n],
            slope,
        }
    }

    pub fn input_count(&self) -> usize {
        self.inputs
    }

    pub fn output_count(&self) -> usize {
        self.outputs.len()
    }

    /// Clear recurrent state, as at the start of a trial.
    pub fn reset(&mut self) {
        self.activations.iter_mut().for_each(|a| *a = 0.0);
    }

    /// One synchronous propagation pass. Panics if `inputs` has the wrong arity.
    pub fn activate(&mut self, inputs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.outputs.len()];
        self.activate_into(inputs, &mut out);
        out
    }

    pub fn activate_into(&mut self, inputs: &[f64], out: &mut [f64]) {
        assert_eq!(inputs.len(), self.inputs, "input arity mismatch");
        assert_eq!(out.len(), self.outputs.len(), "output arity mismatch");
        // input nodes occupy the first slots because genomes keep nodes sorted
        self.activations[..self.inputs].copy_from_slice(inputs);
        for (node, links) in &self.order {
            let sum: f64 = links
                .iter()
                .map(|l| l.weight * self.activations[l.source])
                .sum();
            self.activations[*node] = sigmoid(sum, self.slope);
        }
        for (o, &s) in out.iter_mut().zip(&self.outputs) {
            *o = self.activations[s];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neat::genome::{ConnectionGene, NodeGene};
    use crate::neat::InnovationRegistry;
    use rand::SeedableRng;

    fn link(from: u32, to: u32, weight: f64, innovation: u64) -> ConnectionGene {
        ConnectionGene {
            from,
            to,
            weight,
            enabled: true,
            innovation,
        }
    }

    #[test]
    fn zero_weights_give_half() {
        let mut reg = InnovationRegistry::new(13);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut g = Genome::fully_connected(11, 2, &mut reg, &mut rng);
        g.connections_mut().iter_mut().for_each(|c| c.weight = 0.0);
        let mut net = Network::from_genome(&g, 4.9);
        assert_eq!(net.activate(&[0.3; 11]), vec![0.5, 0.5]);
    }

    #[test]
    fn single_link_closed_form() {
        for w in [-1.3, 0.0, 0.2, 2.5] {
            let mut g = Genome::empty(11, 2);
            g.insert_connection(link(0, 11, w, 0));
            let mut net = Network::from_genome(&g, 4.9);
            let mut x = [0.0; 11];
            x[0] = 1.0;
            let out = net.activate(&x);
            assert_eq!(out[0], 1.0 / (1.0 + (-4.9 * w).exp()));
            assert_eq!(out[1], 0.5);
        }
    }

    #[test]
    fn hidden_chain_propagates_within_one_step() {
        let mut g = Genome::empty(1, 1);
        g.insert_node(NodeGene { id: 2, role: NodeRole::Hidden });
        g.insert_connection(link(0, 2, 1.0, 0));
        g.insert_connection(link(2, 1, 1.0, 1));
        let mut net = Network::from_genome(&g, 4.9);
        let h = sigmoid(1.0, 4.9);
        assert_eq!(net.activate(&[1.0]), vec![sigmoid(h, 4.9)]);
    }

    #[test]
    fn recurrent_link_uses_previous_step() {
        let mut g = Genome::empty(1, 1);
        g.insert_connection(link(0, 1, 1.0, 0));
        g.insert_connection(link(1, 1, 2.0, 1));
        let mut net = Network::from_genome(&g, 4.9);
        let first = net.activate(&[0.5])[0];
        assert_eq!(first, sigmoid(0.5, 4.9));
        let second = net.activate(&[0.5])[0];
        assert_eq!(second, sigmoid(0.5 + 2.0 * first, 4.9));
        net.reset();
        assert_eq!(net.activate(&[0.5])[0], first);
    }

    #[test]
    fn decoding_is_deterministic() {
        let mut reg = InnovationRegistry::new(13);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mut g = Genome::fully_connected(11, 2, &mut reg, &mut rng);
        let params = crate::neat::NeatParams {
            add_connection_prob: 1.0,
            add_node_prob: 1.0,
            ..Default::default()
        };
        for _ in 0..10 {
            crate::neat::mutate(&mut g, &params, &mut reg, &mut rng);
        }
        let inputs: Vec<[f64; 11]> = (0..20).map(|k| [(k as f64 * 0.37) % 1.0; 11]).collect();
        let run = || {
            let mut net = Network::from_genome(&g, 4.9);
            inputs.iter().map(|x| net.activate(x)).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    #[should_panic]
    fn wrong_arity_panics() {
        let g = Genome::empty(11, 2);
        Network::from_genome(&g, 4.9).activate(&[0.0; 3]);
    }
}

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::InnovationRegistry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Input,
    Output,
    Hidden,
}

impl NodeRole {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeRole::Input => "input",
            NodeRole::Output => "output",
            NodeRole::Hidden => "hidden",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeGene {
    pub id: u32,
    pub role: NodeRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnectionGene {
    pub from: u32,
    pub to: u32,
    pub weight: f64,
    pub enabled: bool,
    pub innovation: u64,
}

/// NEAT genotype. Nodes are sorted by id, connections by innovation number.
///
/// Node ids `0..inputs` are inputs and `inputs..inputs + outputs` are outputs;
/// hidden nodes take ids handed out by the [`InnovationRegistry`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub(crate) inputs: usize,
    pub(crate) outputs: usize,
    pub(crate) nodes: Vec<NodeGene>,
    pub(crate) connections: Vec<ConnectionGene>,
    pub fitness: Option<f64>,
}

impl Genome {
    /// Genome with input and output nodes only.
    pub fn empty(inputs: usize, outputs: usize) -> Self {
        let nodes = (0..inputs)
            .map(|i| NodeGene {
                id: i as u32,
                role: NodeRole::Input,
            })
            .chain((0..outputs).map(|o| NodeGene {
                id: (inputs + o) as u32,
                role: NodeRole::Output,
            }))
            .collect();
        Genome {
            inputs,
            outputs,
            nodes,
            connections: Vec::new(),
            fitness: None,
        }
    }

    /// Every input wired to every output, weights uniform in [-1, 1].
    pub fn fully_connected<R: Rng>(
        inputs: usize,
        outputs: usize,
        registry: &mut InnovationRegistry,
        rng: &mut R,
    ) -> Self {
        let mut g = Genome::empty(inputs, outputs);
        for i in 0..inputs as u32 {
            for o in 0..outputs as u32 {
                let to = inputs as u32 + o;
                let innovation = registry.connection(i, to);
                g.connections.push(ConnectionGene {
                    from: i,
                    to,
                    weight: rng.gen_range(-1.0..=1.0),
                    enabled: true,
                    innovation,
                });
            }
        }
        g.connections.sort_by_key(|c| c.innovation);
        g
    }

    pub fn input_count(&self) -> usize {
        self.inputs
    }

    pub fn output_count(&self) -> usize {
        self.outputs
    }

    pub fn nodes(&self) -> &[NodeGene] {
        &self.nodes
    }

    pub fn connections(&self) -> &[ConnectionGene] {
        &self.connections
    }

    pub fn connections_mut(&mut self) -> &mut [ConnectionGene] {
        &mut self.connections
    }

    pub fn output_ids(&self) -> impl Iterator<Item = u32> {
        (self.inputs as u32)..(self.inputs + self.outputs) as u32
    }

    pub fn has_node(&self, id: u32) -> bool {
        self.nodes.binary_search_by_key(&id, |n| n.id).is_ok()
    }

    pub fn node_role(&self, id: u32) -> Option<NodeRole> {
        self.nodes
            .binary_search_by_key(&id, |n| n.id)
            .ok()
            .map(|i| self.nodes[i].role)
    }

    pub fn has_connection(&self, from: u32, to: u32) -> bool {
        self.connections.iter().any(|c| c.from == from && c.to == to)
    }

    pub fn innovations(&self) -> BTreeSet<u64> {
        self.connections.iter().map(|c| c.innovation).collect()
    }

    pub(crate) fn insert_node(&mut self, node: NodeGene) {
        if let Err(pos) = self.nodes.binary_search_by_key(&node.id, |n| n.id) {
            self.nodes.insert(pos, node);
        }
    }

    pub(crate) fn insert_connection(&mut self, conn: ConnectionGene) {
        let pos = self
            .connections
            .partition_point(|c| c.innovation < conn.innovation);
        self.connections.insert(pos, conn);
    }

    /// Structural sanity: unique innovations, known endpoints, nothing feeding
    /// an input node, fixed input/output layout.
    pub fn validate(&self) -> Result<(), String> {
        for (i, n) in self.nodes.iter().enumerate() {
            let expected = if (n.id as usize) < self.inputs {
                NodeRole::Input
            } else if (n.id as usize) < self.inputs + self.outputs {
                NodeRole::Output
            } else {
                NodeRole::Hidden
            };
            if n.role != expected {
                return Err(format!("node {} has role {:?}", n.id, n.role));
            }
            if i > 0 && self.nodes[i - 1].id >= n.id {
                return Err("node ids not strictly increasing".into());
            }
        }
        let io = (0..(self.inputs + self.outputs) as u32).all(|id| self.has_node(id));
        if !io {
            return Err("missing input or output node".into());
        }
        for (i, c) in self.connections.iter().enumerate() {
            if i > 0 && self.connections[i - 1].innovation >= c.innovation {
                return Err("innovation numbers not unique and increasing".into());
            }
            if !self.has_node(c.from) || !self.has_node(c.to) {
                return Err(format!("connection {} references a missing node", c.innovation));
            }
            if self.node_role(c.to) == Some(NodeRole::Input) {
                return Err(format!("connection {} feeds an input node", c.innovation));
            }
            if !c.weight.is_finite() {
                return Err(format!("connection {} has a non-finite weight", c.innovation));
            }
        }
        Ok(())
    }
}

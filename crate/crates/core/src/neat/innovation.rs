use std::collections::HashMap;

/// Hands out innovation numbers and hidden-node ids.
///
/// Counters only ever grow. Within one generation, identical structural
/// mutations (same new connection, or a split of the same connection) get the
/// same numbers; [`InnovationRegistry::new_generation`] forgets that table.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationRegistry {
    next_innovation: u64,
    next_node: u32,
    connections: HashMap<(u32, u32), u64>,
    splits: HashMap<u64, u32>,
}

impl InnovationRegistry {
    /// `first_hidden` is the first id available for hidden nodes
    /// (inputs + outputs).
    pub fn new(first_hidden: u32) -> Self {
        InnovationRegistry {
            next_innovation: 0,
            next_node: first_hidden,
            connections: HashMap::new(),
            splits: HashMap::new(),
        }
    }

    pub fn new_generation(&mut self) {
        self.connections.clear();
        self.splits.clear();
    }

    /// Innovation number for a connection `from -> to`.
    pub fn connection(&mut self, from: u32, to: u32) -> u64 {
        if let Some(&i) = self.connections.get(&(from, to)) {
            return i;
        }
        let i = self.next_innovation;
        self.next_innovation += 1;
        self.connections.insert((from, to), i);
        i
    }

    /// Hidden node id for splitting the connection with innovation `split`.
    pub fn split_node(&mut self, split: u64) -> u32 {
        *self.splits.entry(split).or_insert_with(|| {
            let id = self.next_node;
            self.next_node += 1;
            id
        })
    }

    pub fn peek_innovation(&self) -> u64 {
        self.next_innovation
    }

    pub fn peek_node(&self) -> u32 {
        self.next_node
    }

    /// Make sure future numbers do not collide with genes loaded from disk.
    pub fn reserve(&mut self, innovation: u64, node: u32) {
        self.next_innovation = self.next_innovation.max(innovation);
        self.next_node = self.next_node.max(node);
    }
}

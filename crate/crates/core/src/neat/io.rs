//! Line-oriented genome file format.
//!
//! ```text
//! neat-genome 1
//! inputs 11
//! outputs 2
//! fitness 0.8125            (or: fitness none)
//! node <id> <input|output|hidden>
//! conn <from> <to> <weight> <enabled 0|1> <innovation>
//! ```
//!
//! Weights and fitness use Rust's shortest round-trip float formatting, so
//! writing a parsed file reproduces it byte for byte. Blank lines and lines
//! starting with `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use super::genome::{ConnectionGene, Genome, NodeGene, NodeRole};
use crate::error::{Error, GenomeParseError};

const MAGIC: &str = "neat-genome 1";

pub fn to_text(g: &Genome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "inputs {}", g.input_count());
    let _ = writeln!(s, "outputs {}", g.output_count());
    match g.fitness {
        Some(f) => {
            let _ = writeln!(s, "fitness {f}");
        }
        None => s.push_str("fitness none\n"),
    }
    for n in g.nodes() {
        let _ = writeln!(s, "node {} {}", n.id, n.role.as_str());
    }
    for c in g.connections() {
        let _ = writeln!(
            s,
            "conn {} {} {} {} {}",
            c.from,
            c.to,
            c.weight,
            u8::from(c.enabled),
            c.innovation
        );
    }
    s
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, GenomeParseError> {
    let tok = tok.ok_or_else(|| GenomeParseError::Syntax {
        line,
        msg: format!("missing {what}"),
    })?;
    tok.parse().map_err(|_| GenomeParseError::Syntax {
        line,
        msg: format!("bad {what}: {tok:?}"),
    })
}

pub fn from_text(text: &str) -> Result<Genome, GenomeParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, l)) if l == MAGIC => {}
        other => {
            return Err(GenomeParseError::Syntax {
                line: other.map_or(1, |(n, _)| n),
                msg: format!("expected header {MAGIC:?}"),
            })
        }
    }
    let mut inputs = None;
    let mut outputs = None;
    let mut fitness = None;
    let mut nodes = Vec::new();
    let mut connections = Vec::new();
    for (n, line) in lines {
        let mut tok = line.split_whitespace();
        let key = tok.next().unwrap_or_default();
        match key {
            "inputs" => inputs = Some(field::<usize>(tok.next(), n, "input count")?),
            "outputs" => outputs = Some(field::<usize>(tok.next(), n, "output count")?),
            "fitness" => {
                fitness = match tok.next() {
                    Some("none") => None,
                    t => Some(field::<f64>(t, n, "fitness")?),
                }
            }
            "node" => {
                let id = field::<u32>(tok.next(), n, "node id")?;
                let role = match tok.next() {
                    Some("input") => NodeRole::Input,
                    Some("output") => NodeRole::Output,
                    Some("hidden") => NodeRole::Hidden,
                    other => {
                        return Err(GenomeParseError::Syntax {
                            line: n,
                            msg: format!("bad node role {other:?}"),
                        })
                    }
                };
                nodes.push(NodeGene { id, role });
            }
            "conn" => {
                let from = field(tok.next(), n, "source node")?;
                let to = field(tok.next(), n, "target node")?;
                let weight = field(tok.next(), n, "weight")?;
                let enabled = match tok.next() {
                    Some("1") => true,
                    Some("0") => false,
                    other => {
                        return Err(GenomeParseError::Syntax {
                            line: n,
                            msg: format!("bad enabled flag {other:?}"),
                        })
                    }
                };
                let innovation = field(tok.next(), n, "innovation")?;
                connections.push(ConnectionGene {
                    from,
                    to,
                    weight,
                    enabled,
                    innovation,
                });
            }
            other => {
                return Err(GenomeParseError::Syntax {
                    line: n,
                    msg: format!("unknown record {other:?}"),
                })
            }
        }
    }
    let g = Genome {
        inputs: inputs.ok_or_else(|| GenomeParseError::Inconsistent("missing inputs".into()))?,
        outputs: outputs.ok_or_else(|| GenomeParseError::Inconsistent("missing outputs".into()))?,
        nodes,
        connections,
        fitness,
    };
    g.validate().map_err(GenomeParseError::Inconsistent)?;
    Ok(g)
}

pub fn save(g: &Genome, path: &Path) -> Result<(), Error> {
    std::fs::write(path, to_text(g)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Genome, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(from_text(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neat::{mutate, InnovationRegistry, NeatParams};
    use proptest::prelude::*;
    use rand::SeedableRng;

    proptest! {
        #[test]
        fn text_round_trip_is_exact(seed in any::<u64>(), steps in 0usize..15, fit in proptest::option::of(-10.0f64..10.0)) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut reg = InnovationRegistry::new(13);
            let mut g = Genome::fully_connected(11, 2, &mut reg, &mut rng);
            let params = NeatParams { add_connection_prob: 0.5, add_node_prob: 0.5, ..Default::default() };
            for _ in 0..steps {
                mutate(&mut g, &params, &mut reg, &mut rng);
            }
            g.fitness = fit;
            let text = to_text(&g);
            let back = from_text(&text).unwrap();
            prop_assert_eq!(&back, &g);
            prop_assert_eq!(to_text(&back), text);
        }
    }

    #[test]
    fn rejects_malformed() {
        assert!(from_text("").is_err());
        assert!(from_text("neat-genome 1\ninputs 1\noutputs 1\nnode 0 input\nnode 1 output\nconn 0 0 1 1 0\n").is_err());
        assert!(from_text("neat-genome 1\ninputs 1\noutputs 1\nnode 0 input\nnode 1 output\nconn 0 1 x 1 0\n").is_err());
        assert!(from_text("neat-genome 1\ninputs 1\noutputs 1\nnode 0 input\nnode 1 output\nconn 0 1 0.5 1 0\n").is_ok());
    }
}

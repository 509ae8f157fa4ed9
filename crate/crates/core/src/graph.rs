//! The processing-tree DAG and a brute-force path-enumeration oracle.
//!
//! The graph is the collapsed form of the naming tree: every observable
//! category is a terminal node and repeated leaves of the original tree become
//! multiple root-to-terminal paths. Summing path products over the enumerated
//! paths gives the category law without using any closed-form algebra, which
//! is what the forward model is checked against.

use crate::category::{check_cell, CategoryDistribution, PsiCell, ResponseCategory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Latent,
    Observable(ResponseCategory),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub name: &'static str,
    pub kind: NodeKind,
}

/// Edge factor: ψ_s when `success`, 1 − ψ_s otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeFactor {
    pub process: u8,
    pub success: bool,
}

impl EdgeFactor {
    pub const fn succ(process: u8) -> Self {
        EdgeFactor {
            process,
            success: true,
        }
    }

    pub const fn fail(process: u8) -> Self {
        EdgeFactor {
            process,
            success: false,
        }
    }

    pub fn weight(self, psi: &PsiCell) -> f64 {
        let p = psi[self.process as usize - 1];
        if self.success {
            p
        } else {
            1.0 - p
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub to: usize,
    pub factor: EdgeFactor,
}

#[derive(Debug, Clone)]
pub struct ProcessGraph {
    nodes: Vec<Node>,
    children: Vec<Vec<Edge>>,
    root: usize,
}

impl ProcessGraph {
    /// Builds a graph from explicit parts.
    ///
    /// Checks that node indices are in range, that `root` has no incoming
    /// edge, that observable nodes are terminal, and that every latent node
    /// has exactly two outgoing edges carrying ψ_s and 1 − ψ_s of the same
    /// process. Acyclicity is checked during enumeration.
    pub fn from_parts(nodes: Vec<Node>, children: Vec<Vec<Edge>>, root: usize) -> Result<Self> {
        if nodes.len() != children.len() {
            return Err(Error::Structure(format!(
                "{} nodes but {} adjacency lists",
                nodes.len(),
                children.len()
            )));
        }
        if root >= nodes.len() {
            return Err(Error::Structure(format!("root index {root} out of range")));
        }
        for (i, (node, out)) in nodes.iter().zip(&children).enumerate() {
            for e in out {
                if e.to >= nodes.len() {
                    return Err(Error::Structure(format!("edge {i} -> {} out of range", e.to)));
                }
                if e.to == root {
                    return Err(Error::Structure(format!("edge {i} -> root")));
                }
            }
            match node.kind {
                NodeKind::Observable(_) if !out.is_empty() => {
                    return Err(Error::Structure(format!(
                        "observable node {} has outgoing edges",
                        node.name
                    )));
                }
                NodeKind::Latent => {
                    let [a, b] = out.as_slice() else {
                        return Err(Error::Structure(format!(
                            "latent node {} must have exactly two children",
                            node.name
                        )));
                    };
                    if a.factor.process != b.factor.process || a.factor.success == b.factor.success {
                        return Err(Error::Structure(format!(
                            "outgoing edges of {} are not complementary",
                            node.name
                        )));
                    }
                }
                _ => {}
            }
        }
        Ok(ProcessGraph {
            nodes,
            children,
            root,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn children(&self, node: usize) -> &[Edge] {
        &self.children[node]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn observable_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Observable(_)))
            .count()
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }
}

/// The collapsed naming-tree DAG. Children are listed failure branch first.
pub fn build_default_graph() -> ProcessGraph {
    use NodeKind::{Latent, Observable};
    use ResponseCategory as R;

    const NAMES: [(&str, NodeKind); 20] = [
        ("Attempt", Latent),
        ("Sem", Latent),
        ("LexSem", Latent),
        ("LexPhon", Latent),
        ("LexSel", Latent),
        ("Phon1", Latent),
        ("Phon2", Latent),
        ("Phon3", Latent),
        ("Phon4", Latent),
        ("Phon5", Latent),
        ("Word-L", Latent),
        ("Word-T", Latent),
        ("C", Observable(R::C)),
        ("S", Observable(R::S)),
        ("F", Observable(R::F)),
        ("M", Observable(R::M)),
        ("U", Observable(R::U)),
        ("N", Observable(R::N)),
        ("AN", Observable(R::AN)),
        ("NA", Observable(R::NA)),
    ];
    let nodes: Vec<Node> = NAMES
        .iter()
        .map(|&(name, kind)| Node { name, kind })
        .collect();
    let idx = |name: &str| nodes.iter().position(|n| n.name == name).unwrap();

    let wiring: [(&str, u8, &str, &str); 12] = [
        // (node, process, failure child, success child)
        ("Attempt", 1, "NA", "Sem"),
        ("Sem", 2, "Phon1", "LexSem"),
        ("LexSem", 3, "Phon2", "LexPhon"),
        ("LexPhon", 4, "Phon3", "LexSel"),
        ("LexSel", 5, "Phon4", "Phon5"),
        ("Phon1", 6, "Word-L", "U"),
        ("Phon2", 6, "Word-L", "S"),
        ("Phon3", 6, "Word-T", "F"),
        ("Phon4", 6, "Word-T", "M"),
        ("Phon5", 6, "Word-T", "C"),
        ("Word-L", 8, "AN", "U"),
        ("Word-T", 7, "N", "F"),
    ];
    let mut children = vec![Vec::new(); nodes.len()];
    for (from, s, fail, succ) in wiring {
        children[idx(from)] = vec![
            Edge {
                to: idx(fail),
                factor: EdgeFactor::fail(s),
            },
            Edge {
                to: idx(succ),
                factor: EdgeFactor::succ(s),
            },
        ];
    }
    let root = idx("Attempt");
    ProcessGraph::from_parts(nodes, children, root).expect("default graph is well formed")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub category: ResponseCategory,
    pub factors: Vec<EdgeFactor>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathSet {
    pub paths: Vec<Path>,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn count_for(&self, category: ResponseCategory) -> usize {
        self.paths.iter().filter(|p| p.category == category).count()
    }

    pub fn for_category(&self, category: ResponseCategory) -> impl Iterator<Item = &Path> {
        self.paths.iter().filter(move |p| p.category == category)
    }
}

/// Depth-first enumeration of all root-to-observable paths, children visited
/// in stored order.
pub fn enumerate_paths(graph: &ProcessGraph) -> Result<PathSet> {
    let mut out = Vec::new();
    let mut on_stack = vec![false; graph.nodes.len()];
    let mut trail = Vec::new();
    walk(graph, graph.root, &mut on_stack, &mut trail, &mut out)?;
    Ok(PathSet { paths: out })
}

fn walk(
    graph: &ProcessGraph,
    node: usize,
    on_stack: &mut [bool],
    trail: &mut Vec<EdgeFactor>,
    out: &mut Vec<Path>,
) -> Result<()> {
    if on_stack[node] {
        return Err(Error::Structure(format!(
            "cycle through node {}",
            graph.nodes[node].name
        )));
    }
    match graph.nodes[node].kind {
        NodeKind::Observable(category) => {
            out.push(Path {
                category,
                factors: trail.clone(),
            });
            Ok(())
        }
        NodeKind::Latent => {
            on_stack[node] = true;
            for e in &graph.children[node] {
                trail.push(e.factor);
                walk(graph, e.to, on_stack, trail, out)?;
                trail.pop();
            }
            on_stack[node] = false;
            Ok(())
        }
    }
}

/// Category law obtained by summing edge-factor products over every path.
pub fn oracle_distribution(paths: &PathSet, psi: &PsiCell) -> Result<CategoryDistribution> {
    check_cell(psi)?;
    let mut probs = [0.0; 8];
    for path in &paths.paths {
        let w: f64 = path.factors.iter().map(|f| f.weight(psi)).product();
        probs[path.category.index()] += w;
    }
    Ok(CategoryDistribution(probs))
}

//! Transformer application graphs: layers, shapes, and dependencies.
//!
//! A [`Graph`] is an ordered list of [`Layer`]s forming a DAG. Compute
//! layers (matrix multiplies, batched matrix multiplies, patch embedding)
//! run on the vector-core array; everything else (normalization, softmax,
//! activation, layout and type changes, residual adds) runs on the fabric
//! engines fused into each accelerator.
//!
//! Graphs are immutable after construction and safe to share across
//! concurrent search workers. Identical model specs produce byte-identical
//! serialized graphs.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

pub type LayerId = u32;

/// Kind of one graph node.
///
/// `MatMul`, `BatchMatMul`, and `PatchEmbed` are compute-intensive and map
/// to the matrix-multiply unit of an accelerator; all other kinds map to
/// the fabric-side customized engines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LayerKind {
    MatMul,
    BatchMatMul,
    Softmax,
    LayerNorm,
    GeLU,
    Transpose,
    Reformat,
    VectorAdd,
    PatchEmbed,
}

impl LayerKind {
    /// True for kinds executed on the matrix-multiply unit.
    pub fn is_compute(self) -> bool {
        matches!(
            self,
            LayerKind::MatMul | LayerKind::BatchMatMul | LayerKind::PatchEmbed
        )
    }

    /// True for kinds that reduce along a row (more than one pass over the
    /// data without a bypass buffer).
    pub fn is_reduction(self) -> bool {
        matches!(self, LayerKind::Softmax | LayerKind::LayerNorm)
    }
}

/// One graph node.
///
/// Matrix-multiply kinds use the full `m x k x n` shape. Elementwise and
/// layout kinds use `m` = rows, `n` = row length, and `k` = 1. `heads` is
/// 1 except for batched matrix multiplies, which carry the head count as a
/// multiplier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layer {
    pub id: LayerId,
    pub kind: LayerKind,
    pub m: u64,
    pub k: u64,
    pub n: u64,
    pub heads: u64,
    /// Ids of layers this one consumes; sorted ascending.
    pub deps: Vec<LayerId>,
    /// Number of runtime-produced operands: 2 exactly for attention
    /// batched matrix multiplies, 1 otherwise.
    pub activation_inputs: u8,
}

impl Layer {
    /// Multiply-accumulate count: `heads * m * k * n` for compute kinds,
    /// zero for fabric kinds.
    pub fn macs(&self) -> u64 {
        if self.kind.is_compute() {
            self.heads * self.m * self.k * self.n
        } else {
            0
        }
    }

    /// Output bytes at one byte per element.
    pub fn out_bytes(&self) -> u64 {
        self.heads * self.m * self.n
    }

    /// Activation input bytes at one byte per element (first operand).
    pub fn in_bytes(&self) -> u64 {
        if self.kind.is_compute() {
            self.heads * self.m * self.k
        } else {
            self.heads * self.m * self.n
        }
    }

    /// Resident weight bytes: `k * n` for weight-carrying multiplies,
    /// zero for batched (two-activation) multiplies and fabric kinds.
    pub fn weight_bytes(&self) -> u64 {
        match self.kind {
            LayerKind::MatMul | LayerKind::PatchEmbed => self.k * self.n,
            _ => 0,
        }
    }
}

/// Compact description of a vision-transformer model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub heads: u64,
    pub embed_dim: u64,
    pub depth: u64,
    #[serde(default = "default_seq_len")]
    pub seq_len: u64,
    #[serde(default = "default_mlp_ratio")]
    pub mlp_ratio: f64,
    #[serde(default = "default_patch")]
    pub patch: u64,
    #[serde(default = "default_image")]
    pub image: u64,
}

fn default_seq_len() -> u64 {
    197
}
fn default_mlp_ratio() -> f64 {
    4.0
}
fn default_patch() -> u64 {
    16
}
fn default_image() -> u64 {
    224
}

impl ModelSpec {
    pub fn new(name: &str, heads: u64, embed_dim: u64, depth: u64) -> Self {
        Self {
            name: name.to_string(),
            heads,
            embed_dim,
            depth,
            seq_len: default_seq_len(),
            mlp_ratio: default_mlp_ratio(),
            patch: default_patch(),
            image: default_image(),
        }
    }

    /// Built-in model shapes. Accepts `-` or `_` separators.
    pub fn builtin(name: &str) -> Result<Self> {
        let key = name.to_ascii_lowercase().replace('-', "_");
        let spec = match key.as_str() {
            "deit_t" => Self::new("deit_t", 3, 192, 12),
            "deit_160" => Self::new("deit_160", 4, 160, 12),
            "deit_256" => Self::new("deit_256", 4, 256, 12),
            "lvvit_t" | "lv_vit_t" => {
                let mut s = Self::new("lvvit_t", 4, 240, 12);
                s.mlp_ratio = 3.0;
                s
            }
            _ => return Err(Error::UnknownBuiltin(name.to_string())),
        };
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || self.embed_dim == 0 {
            return Err(Error::InvalidSpec(
                "heads and embed_dim must be positive".into(),
            ));
        }
        if !self.embed_dim.is_multiple_of(self.heads) {
            return Err(Error::InvalidSpec(format!(
                "embed_dim {} not divisible by heads {}",
                self.embed_dim, self.heads
            )));
        }
        if self.seq_len == 0 {
            return Err(Error::InvalidSpec("seq_len must be >= 1".into()));
        }
        if self.patch == 0 || self.image == 0 || !self.image.is_multiple_of(self.patch) {
            return Err(Error::InvalidSpec(format!(
                "image {} must be a positive multiple of patch {}",
                self.image, self.patch
            )));
        }
        if !self.mlp_ratio.is_finite() || self.mlp_ratio <= 0.0 {
            return Err(Error::InvalidSpec("mlp_ratio must be positive".into()));
        }
        let hidden = (self.mlp_ratio * self.embed_dim as f64).round();
        if hidden < 1.0 {
            return Err(Error::InvalidSpec(
                "mlp hidden dimension rounds to zero".into(),
            ));
        }
        Ok(())
    }

    /// MLP hidden dimension, `round(mlp_ratio * embed_dim)`.
    pub fn mlp_hidden(&self) -> u64 {
        (self.mlp_ratio * self.embed_dim as f64).round() as u64
    }

    /// Number of image patches fed to the embedding layer.
    pub fn patches(&self) -> u64 {
        (self.image / self.patch) * (self.image / self.patch)
    }
}

/// An application graph: an ordered, batch-independent list of layers.
/// Batching is a scheduler concern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    pub layers: Vec<Layer>,
}

impl Graph {
    /// Validates ids, dependency references, shape positivity, and acyclicity.
    pub fn validate(&self) -> Result<()> {
        let ids: HashSet<LayerId> = self.layers.iter().map(|l| l.id).collect();
        if ids.len() != self.layers.len() {
            return Err(Error::InvalidGraph("duplicate layer ids".into()));
        }
        for l in &self.layers {
            if l.m == 0 || l.k == 0 || l.n == 0 || l.heads == 0 {
                return Err(Error::InvalidGraph(format!(
                    "layer {} has a zero dimension",
                    l.id
                )));
            }
            if l.activation_inputs != 1 && l.activation_inputs != 2 {
                return Err(Error::InvalidGraph(format!(
                    "layer {} activation_inputs must be 1 or 2",
                    l.id
                )));
            }
            for d in &l.deps {
                if !ids.contains(d) {
                    return Err(Error::InvalidGraph(format!(
                        "layer {} depends on missing layer {}",
                        l.id, d
                    )));
                }
            }
        }
        topo_order(self).map(|_| ())
    }

    pub fn layer(&self, id: LayerId) -> &Layer {
        &self.layers[id as usize]
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Ids of layers with no dependencies (graph inputs).
    pub fn sources(&self) -> Vec<LayerId> {
        self.layers
            .iter()
            .filter(|l| l.deps.is_empty())
            .map(|l| l.id)
            .collect()
    }

    /// Ids of layers nothing depends on (graph outputs).
    pub fn sinks(&self) -> Vec<LayerId> {
        let mut consumed: HashSet<LayerId> = HashSet::new();
        for l in &self.layers {
            consumed.extend(l.deps.iter().copied());
        }
        self.layers
            .iter()
            .filter(|l| !consumed.contains(&l.id))
            .map(|l| l.id)
            .collect()
    }

    /// Deterministic JSON dump: a list of layers with their dependencies.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serialization cannot fail")
    }
}

/// Builds the inference graph for `spec`.
///
/// The graph starts with a patch-embedding multiply and then `depth`
/// identical blocks: pre-norm, QKV projection, per-head attention score and
/// value multiplies with a softmax between them, output projection, the
/// residual add, a second norm, and the two-multiply MLP with GeLU. Layout
/// changes are explicit `Transpose` nodes, and a `Reformat` node is
/// inserted wherever a nonlinear output feeds a matrix-multiply input (the
/// type-conversion hop between fabric and array precision). The classifier
/// head is not part of the graph; blocks dominate the cost.
pub fn build_transformer(spec: &ModelSpec) -> Result<Graph> {
    spec.validate()?;

    let seq = spec.seq_len;
    let embed = spec.embed_dim;
    let heads = spec.heads;
    let head_dim = embed / heads;
    let hidden = spec.mlp_hidden();

    let mut layers: Vec<Layer> = Vec::with_capacity(1 + 18 * spec.depth as usize);
    let mut next_id: LayerId = 0;
    let mut push = |layers: &mut Vec<Layer>,
                    kind: LayerKind,
                    m: u64,
                    k: u64,
                    n: u64,
                    heads: u64,
                    deps: Vec<LayerId>,
                    activation_inputs: u8|
     -> LayerId {
        let id = next_id;
        next_id += 1;
        let mut deps = deps;
        deps.sort_unstable();
        layers.push(Layer {
            id,
            kind,
            m,
            k,
            n,
            heads,
            deps,
            activation_inputs,
        });
        id
    };

    // Patch embedding: patches x (patch^2 * 3) x embed.
    let patch_mm = push(
        &mut layers,
        LayerKind::PatchEmbed,
        spec.patches(),
        spec.patch * spec.patch * 3,
        embed,
        1,
        vec![],
        1,
    );

    let mut block_in = patch_mm;
    for _ in 0..spec.depth {
        let ln1 = push(
            &mut layers,
            LayerKind::LayerNorm,
            seq,
            1,
            embed,
            1,
            vec![block_in],
            1,
        );
        let rf1 = push(
            &mut layers,
            LayerKind::Reformat,
            seq,
            1,
            embed,
            1,
            vec![ln1],
            1,
        );
        let qkv = push(
            &mut layers,
            LayerKind::MatMul,
            seq,
            embed,
            3 * embed,
            1,
            vec![rf1],
            1,
        );
        // Head split and key transpose for the score multiply.
        let tr1 = push(
            &mut layers,
            LayerKind::Transpose,
            seq,
            1,
            3 * embed,
            1,
            vec![qkv],
            1,
        );
        // Q x K^T per head: seq x head_dim x seq.
        let score = push(
            &mut layers,
            LayerKind::BatchMatMul,
            seq,
            head_dim,
            seq,
            heads,
            vec![tr1],
            2,
        );
        let sm = push(
            &mut layers,
            LayerKind::Softmax,
            heads * seq,
            1,
            seq,
            1,
            vec![score],
            1,
        );
        let rf2 = push(
            &mut layers,
            LayerKind::Reformat,
            heads * seq,
            1,
            seq,
            1,
            vec![sm],
            1,
        );
        // Attention x V per head: seq x seq x head_dim.
        let av = push(
            &mut layers,
            LayerKind::BatchMatMul,
            seq,
            seq,
            head_dim,
            heads,
            vec![rf2, tr1],
            2,
        );
        let tr2 = push(
            &mut layers,
            LayerKind::Transpose,
            seq,
            1,
            embed,
            1,
            vec![av],
            1,
        );
        let proj = push(
            &mut layers,
            LayerKind::MatMul,
            seq,
            embed,
            embed,
            1,
            vec![tr2],
            1,
        );
        let add1 = push(
            &mut layers,
            LayerKind::VectorAdd,
            seq,
            1,
            embed,
            1,
            vec![proj, block_in],
            1,
        );
        let ln2 = push(
            &mut layers,
            LayerKind::LayerNorm,
            seq,
            1,
            embed,
            1,
            vec![add1],
            1,
        );
        let rf3 = push(
            &mut layers,
            LayerKind::Reformat,
            seq,
            1,
            embed,
            1,
            vec![ln2],
            1,
        );
        let mlp1 = push(
            &mut layers,
            LayerKind::MatMul,
            seq,
            embed,
            hidden,
            1,
            vec![rf3],
            1,
        );
        let gelu = push(
            &mut layers,
            LayerKind::GeLU,
            seq,
            1,
            hidden,
            1,
            vec![mlp1],
            1,
        );
        let rf4 = push(
            &mut layers,
            LayerKind::Reformat,
            seq,
            1,
            hidden,
            1,
            vec![gelu],
            1,
        );
        let mlp2 = push(
            &mut layers,
            LayerKind::MatMul,
            seq,
            hidden,
            embed,
            1,
            vec![rf4],
            1,
        );
        let add2 = push(
            &mut layers,
            LayerKind::VectorAdd,
            seq,
            1,
            embed,
            1,
            vec![mlp2, add1],
            1,
        );
        block_in = add2;
    }

    let g = Graph { layers };
    g.validate()?;
    Ok(g)
}

/// Sum of per-layer MAC counts.
pub fn total_macs(g: &Graph) -> u64 {
    g.layers.iter().map(Layer::macs).sum()
}

/// Deterministic topological order: every layer after all of its
/// dependencies, ties broken by ascending id. Errors on a cycle.
pub fn topo_order(g: &Graph) -> Result<Vec<LayerId>> {
    let n = g.layers.len();
    let index_of = |id: LayerId| id as usize;
    let mut indeg = vec![0usize; n];
    let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, l) in g.layers.iter().enumerate() {
        for d in &l.deps {
            if *d == l.id {
                return Err(Error::Cycle(l.id));
            }
            indeg[i] += 1;
            dependents[index_of(*d)].push(i);
        }
    }

    let mut heap = std::collections::BinaryHeap::new();
    for (i, l) in g.layers.iter().enumerate() {
        if indeg[i] == 0 {
            heap.push(std::cmp::Reverse(l.id));
        }
    }
    let mut order = Vec::with_capacity(n);
    while let Some(std::cmp::Reverse(id)) = heap.pop() {
        order.push(id);
        for &j in &dependents[index_of(id)] {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                heap.push(std::cmp::Reverse(g.layers[j].id));
            }
        }
    }
    if order.len() != n {
        let blocked = g
            .layers
            .iter()
            .enumerate()
            .find(|(i, _)| indeg[*i] > 0)
            .map(|(_, l)| l.id)
            .unwrap_or(0);
        return Err(Error::Cycle(blocked));
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deit_t() -> ModelSpec {
        ModelSpec::builtin("deit_t").unwrap()
    }

    /// Closed-form per-block MAC sum, written independently of the builder.
    fn closed_form_macs(spec: &ModelSpec) -> u64 {
        let s = spec.seq_len;
        let e = spec.embed_dim;
        let h = spec.heads;
        let hd = e / h;
        let hidden = spec.mlp_hidden();
        let qkv = s * e * (3 * e);
        let score = h * s * hd * s;
        let av = h * s * s * hd;
        let proj = s * e * e;
        let mlp = 2 * s * e * hidden;
        let block = qkv + score + av + proj + mlp;
        let patch = spec.patches() * (spec.patch * spec.patch * 3) * e;
        patch + spec.depth * block
    }

    #[test]
    fn deit_t_macs_match_closed_form_and_reference() {
        let spec = deit_t();
        let g = build_transformer(&spec).unwrap();
        let macs = total_macs(&g);
        assert_eq!(macs, closed_form_macs(&spec));
        // 1.3 G within 8%.
        let rel = (macs as f64 - 1.3e9).abs() / 1.3e9;
        assert!(rel < 0.08, "DeiT-T MACs {macs} off by {rel}");
    }

    #[test]
    fn deit_160_macs_near_reference() {
        let spec = ModelSpec::builtin("deit_160").unwrap();
        let g = build_transformer(&spec).unwrap();
        let rel = (total_macs(&g) as f64 - 0.9e9).abs() / 0.9e9;
        assert!(rel < 0.08);
    }

    #[test]
    fn lvvit_t_macs_near_reference() {
        let spec = ModelSpec::builtin("lvvit_t").unwrap();
        let g = build_transformer(&spec).unwrap();
        let rel = (total_macs(&g) as f64 - 1.6e9).abs() / 1.6e9;
        assert!(rel < 0.08);
    }

    #[test]
    fn depth_zero_is_patch_embed_only() {
        let mut spec = deit_t();
        spec.depth = 0;
        let g = build_transformer(&spec).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.layers[0].kind, LayerKind::PatchEmbed);
        assert_eq!(
            total_macs(&g),
            spec.patches() * spec.patch * spec.patch * 3 * spec.embed_dim
        );
    }

    #[test]
    fn attention_multiplies_have_two_activation_inputs() {
        let g = build_transformer(&deit_t()).unwrap();
        for l in &g.layers {
            if l.kind == LayerKind::BatchMatMul {
                assert_eq!(l.activation_inputs, 2, "layer {}", l.id);
                assert!(l.heads >= 1);
            } else if l.kind.is_compute() {
                assert_eq!(l.activation_inputs, 1, "layer {}", l.id);
                assert_eq!(l.heads, 1);
            }
        }
    }

    #[test]
    fn graph_serialization_is_deterministic() {
        let a = build_transformer(&deit_t()).unwrap().to_json();
        let b = build_transformer(&deit_t()).unwrap().to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_spec_names_violated_invariant() {
        let mut spec = deit_t();
        spec.embed_dim = 190; // not divisible by 3 heads
        let err = build_transformer(&spec).unwrap_err();
        assert!(err.to_string().contains("divisible"));
    }

    #[test]
    fn total_macs_empty_and_single() {
        assert_eq!(total_macs(&Graph { layers: vec![] }), 0);
        let g = Graph {
            layers: vec![Layer {
                id: 0,
                kind: LayerKind::MatMul,
                m: 2,
                k: 3,
                n: 4,
                heads: 1,
                deps: vec![],
                activation_inputs: 1,
            }],
        };
        assert_eq!(total_macs(&g), 24);
    }

    fn chain(n: u64) -> Graph {
        let layers = (0..n)
            .map(|i| Layer {
                id: i as LayerId,
                kind: LayerKind::MatMul,
                m: 8,
                k: 8,
                n: 8,
                heads: 1,
                deps: if i == 0 {
                    vec![]
                } else {
                    vec![(i - 1) as LayerId]
                },
                activation_inputs: 1,
            })
            .collect();
        Graph { layers }
    }

    #[test]
    fn topo_chain_and_diamond() {
        assert_eq!(topo_order(&chain(3)).unwrap(), vec![0, 1, 2]);

        let diamond = Graph {
            layers: vec![
                Layer {
                    id: 0,
                    kind: LayerKind::MatMul,
                    m: 1,
                    k: 1,
                    n: 1,
                    heads: 1,
                    deps: vec![],
                    activation_inputs: 1,
                },
                Layer {
                    id: 1,
                    kind: LayerKind::MatMul,
                    m: 1,
                    k: 1,
                    n: 1,
                    heads: 1,
                    deps: vec![0],
                    activation_inputs: 1,
                },
                Layer {
                    id: 2,
                    kind: LayerKind::MatMul,
                    m: 1,
                    k: 1,
                    n: 1,
                    heads: 1,
                    deps: vec![0],
                    activation_inputs: 1,
                },
                Layer {
                    id: 3,
                    kind: LayerKind::MatMul,
                    m: 1,
                    k: 1,
                    n: 1,
                    heads: 1,
                    deps: vec![1, 2],
                    activation_inputs: 1,
                },
            ],
        };
        assert_eq!(topo_order(&diamond).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn topo_detects_self_loop() {
        let g = Graph {
            layers: vec![Layer {
                id: 0,
                kind: LayerKind::MatMul,
                m: 1,
                k: 1,
                n: 1,
                heads: 1,
                deps: vec![0],
                activation_inputs: 1,
            }],
        };
        assert!(matches!(topo_order(&g), Err(Error::Cycle(0))));
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = deit_t();
        let s = serde_json::to_string(&spec).unwrap();
        let back: ModelSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(spec, back);
        // Defaults fill in when omitted.
        let partial: ModelSpec =
            serde_json::from_str(r#"{"name":"x","heads":4,"embed_dim":256,"depth":2}"#).unwrap();
        assert_eq!(partial.seq_len, 197);
        assert_eq!(partial.patch, 16);
    }
}

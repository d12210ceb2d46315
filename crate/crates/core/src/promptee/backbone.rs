use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tokenizer::{HashedTokenizer, SubwordTokenizer, HASHED_TOKENIZER_ID};
use crate::error::{Error, Result};
use crate::nn::{Graph, Linear, ParamId, ParamStore, Var};

/// Encoder-decoder feature extractor. Parameters live in the caller's
/// [`ParamStore`]; the adapter only keeps their ids, so a forward pass reads
/// shared state and is reentrant.
pub trait Backbone: Send + Sync + fmt::Debug {
    fn spec(&self) -> &BackboneSpec;
    fn hidden_dim(&self) -> usize {
        self.spec().hidden
    }
    fn tokenizer(&self) -> &dyn SubwordTokenizer;
    /// Encoder states of `ids`, `len × h`.
    fn encode(&self, g: &mut Graph, ids: &[usize]) -> Var;
    /// Decoder states of `ids` cross-attending to `memory`, `len × h`.
    fn decode(&self, g: &mut Graph, ids: &[usize], memory: Var) -> Var;
    fn param_ids(&self) -> &[ParamId];
}

/// Named backbone configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackboneSpec {
    pub name: String,
    pub hidden: usize,
    pub heads: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub ffn: usize,
    pub tokenizer: String,
    pub vocab_size: usize,
    pub max_piece_len: usize,
    pub max_positions: usize,
}

impl BackboneSpec {
    /// The small random-init transformer used in tests and toy runs.
    pub fn toy() -> Self {
        Self {
            name: "toy".into(),
            hidden: 32,
            heads: 2,
            encoder_layers: 1,
            decoder_layers: 1,
            ffn: 64,
            tokenizer: HASHED_TOKENIZER_ID.into(),
            vocab_size: 4096,
            max_piece_len: 6,
            max_positions: 512,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tokenizer != HASHED_TOKENIZER_ID {
            return Err(Error::Config(format!("backbone {}: unknown tokenizer {:?}", self.name, self.tokenizer)));
        }
        if self.hidden == 0 || self.heads == 0 || self.hidden % self.heads != 0 {
            return Err(Error::Config(format!(
                "backbone {}: hidden size {} must be a positive multiple of heads {}",
                self.name, self.hidden, self.heads
            )));
        }
        if self.ffn == 0 || self.vocab_size <= 5 || self.max_piece_len == 0 || self.max_positions == 0 {
            return Err(Error::Config(format!("backbone {}: sizes must be positive", self.name)));
        }
        Ok(())
    }

    /// Register fresh parameters in `store` and return the adapter.
    pub fn build<R: Rng>(&self, store: &mut ParamStore, rng: &mut R) -> Result<Arc<dyn Backbone>> {
        self.validate()?;
        Ok(Arc::new(ToyTransformer::new(self.clone(), store, rng)))
    }
}

/// Named specs, extendable from a JSON file (`[{"name": ..., ...}, ...]`).
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneRegistry {
    specs: BTreeMap<String, BackboneSpec>,
}

impl Default for BackboneRegistry {
    fn default() -> Self {
        let toy = BackboneSpec::toy();
        let small = BackboneSpec {
            name: "small".into(),
            hidden: 64,
            heads: 4,
            encoder_layers: 2,
            decoder_layers: 2,
            ffn: 128,
            vocab_size: 8192,
            ..toy.clone()
        };
        let tiny = BackboneSpec {
            name: "tiny".into(),
            hidden: 8,
            heads: 2,
            ffn: 16,
            vocab_size: 256,
            max_positions: 64,
            ..toy.clone()
        };
        let specs = [toy, small, tiny].into_iter().map(|s| (s.name.clone(), s)).collect();
        Self { specs }
    }
}

impl BackboneRegistry {
    pub fn get(&self, name: &str) -> Result<&BackboneSpec> {
        self.specs
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown backbone {name:?}; known: {}", self.names().join(", "))))
    }

    pub fn names(&self) -> Vec<String> {
        self.specs.keys().cloned().collect()
    }

    pub fn insert(&mut self, spec: BackboneSpec) -> Result<()> {
        spec.validate()?;
        self.specs.insert(spec.name.clone(), spec);
        Ok(())
    }

    /// Add (or replace) the specs listed in a JSON file.
    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let specs: Vec<BackboneSpec> = serde_json::from_str(&text).map_err(|e| Error::from(e).in_file(path))?;
        for spec in specs {
            self.insert(spec)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Norm {
    gain: ParamId,
    bias: ParamId,
}

impl Norm {
    fn new(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        Self {
            gain: store.add_filled(format!("{name}.gain"), 1, dim, 1.0),
            bias: store.add_zeros(format!("{name}.bias"), 1, dim),
        }
    }

    fn apply(&self, g: &mut Graph, x: Var) -> Var {
        let n = g.layer_norm(x, 1e-5);
        let gain = g.param(self.gain);
        let bias = g.param(self.bias);
        let scaled = g.mul_row(n, gain);
        g.add_row(scaled, bias)
    }
}

#[derive(Debug, Clone)]
struct Attention {
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
    heads: usize,
}

impl Attention {
    fn new<R: Rng>(store: &mut ParamStore, name: &str, h: usize, heads: usize, rng: &mut R) -> Self {
        Self {
            q: Linear::new(store, &format!("{name}.q"), h, h, rng),
            k: Linear::new(store, &format!("{name}.k"), h, h, rng),
            v: Linear::new(store, &format!("{name}.v"), h, h, rng),
            o: Linear::new(store, &format!("{name}.o"), h, h, rng),
            heads,
        }
    }

    fn apply(&self, g: &mut Graph, x: Var, memory: Var, causal: bool) -> Var {
        let q = self.q.apply(g, x);
        let k = self.k.apply(g, memory);
        let v = self.v.apply(g, memory);
        let (n, h) = g.shape(q);
        let m = g.shape(k).0;
        let dh = h / self.heads;
        let mask = causal.then(|| g.input(Array2::from_shape_fn((n, m), |(i, j)| if j > i { -1e30 } else { 0.0 })));
        let mut outs = Vec::with_capacity(self.heads);
        for head in 0..self.heads {
            let qh = g.slice_cols(q, head * dh, dh);
            let kh = g.slice_cols(k, head * dh, dh);
            let vh = g.slice_cols(v, head * dh, dh);
            let raw = g.matmul_t(qh, kh);
            let mut scores = g.scale(raw, 1.0 / (dh as f64).sqrt());
            if let Some(mask) = mask {
                scores = g.add(scores, mask);
            }
            let att = g.softmax_rows(scores);
            outs.push(g.matmul(att, vh));
        }
        let joined = g.concat_cols(&outs);
        self.o.apply(g, joined)
    }
}

#[derive(Debug, Clone)]
struct FeedForward {
    up: Linear,
    down: Linear,
}

impl FeedForward {
    fn apply(&self, g: &mut Graph, x: Var) -> Var {
        let u = self.up.apply(g, x);
        // x·σ(1.702x), a smooth GELU approximation
        let gate_in = g.scale(u, 1.702);
        let gate = g.sigmoid(gate_in);
        let act = g.mul(u, gate);
        self.down.apply(g, act)
    }
}

#[derive(Debug, Clone)]
struct EncoderLayer {
    attn: Attention,
    norm1: Norm,
    ffn: FeedForward,
    norm2: Norm,
}

#[derive(Debug, Clone)]
struct DecoderLayer {
    self_attn: Attention,
    norm1: Norm,
    cross_attn: Attention,
    norm2: Norm,
    ffn: FeedForward,
    norm3: Norm,
}

/// Post-norm transformer encoder-decoder with learned positions and a
/// causally masked decoder.
#[derive(Debug, Clone)]
struct ToyTransformer {
    spec: BackboneSpec,
    tokenizer: HashedTokenizer,
    tokens: ParamId,
    positions: ParamId,
    encoder: Vec<EncoderLayer>,
    decoder: Vec<DecoderLayer>,
    ids: Vec<ParamId>,
}

impl ToyTransformer {
    fn new<R: Rng>(spec: BackboneSpec, store: &mut ParamStore, rng: &mut R) -> Self {
        let first = store.len();
        let h = spec.hidden;
        let emb_bound = (3.0 / h as f64).sqrt();
        let tokens = store.add_uniform("backbone.tokens", spec.vocab_size, h, emb_bound, rng);
        let positions = store.add_uniform("backbone.positions", spec.max_positions, h, 0.1, rng);
        let ffn = |store: &mut ParamStore, name: &str, rng: &mut R| FeedForward {
            up: Linear::new(store, &format!("{name}.up"), h, spec.ffn, rng),
            down: Linear::new(store, &format!("{name}.down"), spec.ffn, h, rng),
        };
        let encoder = (0..spec.encoder_layers)
            .map(|l| {
                let p = format!("backbone.encoder.{l}");
                EncoderLayer {
                    attn: Attention::new(store, &format!("{p}.attn"), h, spec.heads, rng),
                    norm1: Norm::new(store, &format!("{p}.norm1"), h),
                    ffn: ffn(store, &format!("{p}.ffn"), rng),
                    norm2: Norm::new(store, &format!("{p}.norm2"), h),
                }
            })
            .collect();
        let decoder = (0..spec.decoder_layers)
            .map(|l| {
                let p = format!("backbone.decoder.{l}");
                DecoderLayer {
                    self_attn: Attention::new(store, &format!("{p}.self_attn"), h, spec.heads, rng),
                    norm1: Norm::new(store, &format!("{p}.norm1"), h),
                    cross_attn: Attention::new(store, &format!("{p}.cross_attn"), h, spec.heads, rng),
                    norm2: Norm::new(store, &format!("{p}.norm2"), h),
                    ffn: ffn(store, &format!("{p}.ffn"), rng),
                    norm3: Norm::new(store, &format!("{p}.norm3"), h),
                }
            })
            .collect();
        let ids = store.ids().skip(first).collect();
        Self {
            tokenizer: HashedTokenizer::new(spec.vocab_size, spec.max_piece_len),
            spec,
            tokens,
            positions,
            encoder,
            decoder,
            ids,
        }
    }

    fn embed(&self, g: &mut Graph, ids: &[usize]) -> Var {
        assert!(
            ids.len() <= self.spec.max_positions,
            "sequence of {} exceeds {} positions",
            ids.len(),
            self.spec.max_positions
        );
        let ids: Vec<usize> = ids.iter().map(|&i| i.min(self.spec.vocab_size - 1)).collect();
        let tok = g.embed(self.tokens, &ids);
        let pos: Vec<usize> = (0..ids.len()).collect();
        let pos = g.embed(self.positions, &pos);
        g.add(tok, pos)
    }
}

impl Backbone for ToyTransformer {
    fn spec(&self) -> &BackboneSpec {
        &self.spec
    }

    fn tokenizer(&self) -> &dyn SubwordTokenizer {
        &self.tokenizer
    }

    fn encode(&self, g: &mut Graph, ids: &[usize]) -> Var {
        let mut x = self.embed(g, ids);
        for layer in &self.encoder {
            let a = layer.attn.apply(g, x, x, false);
            let r = g.add(x, a);
            x = layer.norm1.apply(g, r);
            let f = layer.ffn.apply(g, x);
            let r = g.add(x, f);
            x = layer.norm2.apply(g, r);
        }
        x
    }

    fn decode(&self, g: &mut Graph, ids: &[usize], memory: Var) -> Var {
        let mut x = self.embed(g, ids);
        for layer in &self.decoder {
            let a = layer.self_attn.apply(g, x, x, true);
            let r = g.add(x, a);
            x = layer.norm1.apply(g, r);
            let c = layer.cross_attn.apply(g, x, memory, false);
            let r = g.add(x, c);
            x = layer.norm2.apply(g, r);
            let f = layer.ffn.apply(g, x);
            let r = g.add(x, f);
            x = layer.norm3.apply(g, r);
        }
        x
    }

    fn param_ids(&self) -> &[ParamId] {
        &self.ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn registry_knows_toy_and_reads_files() {
        let mut reg = BackboneRegistry::default();
        assert_eq!(reg.get("toy").unwrap().hidden, 32);
        assert!(matches!(reg.get("nope"), Err(Error::Config(_))));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("backbones.json");
        let mut wide = BackboneSpec::toy();
        wide.name = "wide".into();
        wide.hidden = 48;
        std::fs::write(&path, serde_json::to_string(&vec![wide]).unwrap()).unwrap();
        reg.load_file(&path).unwrap();
        assert_eq!(reg.get("wide").unwrap().hidden, 48);
        let mut bad = BackboneSpec::toy();
        bad.tokenizer = "sentencepiece".into();
        assert!(reg.insert(bad).is_err());
    }

    #[test]
    fn decoder_is_causal() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bb = BackboneRegistry::default().get("tiny").unwrap().build(&mut store, &mut rng).unwrap();
        let mut g = Graph::new(&store);
        let mem = bb.encode(&mut g, &[1, 9, 10, 2]);
        let a = bb.decode(&mut g, &[1, 20, 21, 22], mem);
        let b = bb.decode(&mut g, &[1, 20, 21, 99], mem);
        let (a, b) = (g.value(a).clone(), g.value(b).clone());
        for i in 0..3 {
            assert_eq!(a.row(i), b.row(i));
        }
        assert_ne!(a.row(3), b.row(3));
    }

    #[test]
    fn parameters_are_recorded_for_freezing() {
        let mut store = ParamStore::new();
        store.add_zeros("before", 1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bb = BackboneSpec::toy().build(&mut store, &mut rng).unwrap();
        assert_eq!(bb.param_ids().len(), store.len() - 1);
        assert!(bb.param_ids().iter().all(|&id| store.name(id).starts_with("backbone.")));
    }
}

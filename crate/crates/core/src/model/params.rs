//! Parameter layout and storage.
//!
//! Parameters live in one flat list whose order is fixed by [`Layout::new`]
//! and depends only on the config. The same order is used by the optimizer,
//! the gradient checker and the checkpoint blob:
//!
//! 1. `conv{b}.branch{r}.filter` `[taps, cin, cout/branches]` and `.bias`, per block then branch
//! 2. `proj.weight` `[d_c, d]`, `proj.bias`
//! 3. `local.p`, `local.w1`, `local.w2` `[d_c, d_c]`, `local.b`
//! 4. `segment.w1` `[d_c, d]`, `segment.w2` `[d_c, embed]`, `segment.b`, `segment.v` `[1, d_c]`
//! 5. `global.w1` `[d_c, d]`, `global.w2` `[d_c, d]`, `global.b`, `global.v`
//! 6. `deconv{i}.filter` `[taps, cin, fusion]` and `.bias`
//! 7. `relevance.w_f` `[fusion, fusion]`, `relevance.w_c` `[fusion, embed]`
//! 8. `mlp.hidden.weight`, `mlp.hidden.bias`, `mlp.out.weight` `[1, hidden]`, `mlp.out.bias`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ChanConfig;
use crate::error::{ChanError, Result};
use crate::init::xavier_uniform;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AffineIdx {
    pub weight: usize,
    pub bias: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttentionIdx {
    pub w1: usize,
    pub w2: usize,
    pub b: usize,
    pub v: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalIdx {
    pub p: usize,
    pub w1: usize,
    pub w2: usize,
    pub b: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    /// Xavier fans, or `None` for zero initialisation.
    pub fans: Option<(usize, usize)>,
}

/// Indices of every parameter in the flat list.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub conv: Vec<Vec<AffineIdx>>,
    pub proj: AffineIdx,
    pub local: LocalIdx,
    pub segment: AttentionIdx,
    pub global: AttentionIdx,
    pub deconv: Vec<AffineIdx>,
    pub w_f: usize,
    pub w_c: usize,
    pub mlp_hidden: AffineIdx,
    pub mlp_out: AffineIdx,
    pub specs: Vec<ParamSpec>,
}

struct Builder {
    specs: Vec<ParamSpec>,
}

impl Builder {
    fn weight(&mut self, name: String, shape: Vec<usize>, fan_in: usize, fan_out: usize) -> usize {
        self.specs.push(ParamSpec { name, shape, fans: Some((fan_in, fan_out)) });
        self.specs.len() - 1
    }

    fn matrix(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> usize {
        self.weight(name.into(), vec![rows, cols], cols, rows)
    }

    fn zeros(&mut self, name: impl Into<String>, len: usize) -> usize {
        self.specs.push(ParamSpec { name: name.into(), shape: vec![len], fans: None });
        self.specs.len() - 1
    }

    fn filter(&mut self, prefix: &str, taps: usize, cin: usize, cout: usize) -> AffineIdx {
        AffineIdx {
            weight: self.weight(format!("{prefix}.filter"), vec![taps, cin, cout], taps * cin, taps * cout),
            bias: self.zeros(format!("{prefix}.bias"), cout),
        }
    }

    fn affine(&mut self, prefix: &str, out: usize, inp: usize) -> AffineIdx {
        AffineIdx {
            weight: self.matrix(format!("{prefix}.weight"), out, inp),
            bias: self.zeros(format!("{prefix}.bias"), out),
        }
    }

    fn attention(&mut self, prefix: &str, dc: usize, left: usize, right: usize) -> AttentionIdx {
        AttentionIdx {
            w1: self.matrix(format!("{prefix}.w1"), dc, left),
            w2: self.matrix(format!("{prefix}.w2"), dc, right),
            b: self.zeros(format!("{prefix}.b"), dc),
            v: self.matrix(format!("{prefix}.v"), 1, dc),
        }
    }
}

impl Layout {
    pub fn new(cfg: &ChanConfig) -> Self {
        let mut b = Builder { specs: Vec::new() };
        let branches = cfg.kernel_sizes.len();
        let mut cin = cfg.input_dim;
        let mut conv = Vec::with_capacity(cfg.conv_channels.len());
        for (bi, &channels) in cfg.conv_channels.iter().enumerate() {
            let cout = channels / branches;
            let block = cfg
                .kernel_sizes
                .iter()
                .enumerate()
                .map(|(r, &taps)| b.filter(&format!("conv{bi}.branch{r}"), taps, cin, cout))
                .collect();
            conv.push(block);
            cin = channels;
        }
        let (d, dc, embed) = (cfg.encoded_dim(), cfg.attention_dim, cfg.concept_embed_dim);
        let proj = b.affine("proj", dc, d);
        let local = LocalIdx {
            p: b.matrix("local.p", dc, dc),
            w1: b.matrix("local.w1", dc, dc),
            w2: b.matrix("local.w2", dc, dc),
            b: b.zeros("local.b", dc),
        };
        let segment = b.attention("segment", dc, d, embed);
        let global = b.attention("global", dc, d, d);
        let mut deconv = Vec::with_capacity(cfg.conv_channels.len());
        let mut cin = cfg.fused_dim();
        for i in 0..cfg.conv_channels.len() {
            deconv.push(b.filter(&format!("deconv{i}"), cfg.deconv_taps, cin, cfg.fusion_dim));
            cin = cfg.fusion_dim;
        }
        let w_f = b.matrix("relevance.w_f", cfg.fusion_dim, cfg.fusion_dim);
        let w_c = b.matrix("relevance.w_c", cfg.fusion_dim, embed);
        let mlp_hidden = b.affine("mlp.hidden", cfg.mlp_hidden, cfg.fusion_dim);
        let mlp_out = b.affine("mlp.out", 1, cfg.mlp_hidden);
        Layout { conv, proj, local, segment, global, deconv, w_f, w_c, mlp_hidden, mlp_out, specs: b.specs }
    }
}

/// All trainable tensors of a network, in [`Layout`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct ChanParams {
    layout: Layout,
    tensors: Vec<Tensor>,
}

impl ChanParams {
    /// Xavier-uniform weights and zero biases drawn from `cfg.seed`.
    pub fn init(cfg: &ChanConfig) -> Result<Self> {
        cfg.validate()?;
        let layout = Layout::new(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let tensors = layout
            .specs
            .iter()
            .map(|s| match s.fans {
                Some((fi, fo)) => xavier_uniform(&s.shape, fi, fo, &mut rng),
                None => Tensor::zeros(&s.shape),
            })
            .collect();
        Ok(ChanParams { layout, tensors })
    }

    /// Wraps externally supplied tensors, checking them against the layout.
    pub fn from_tensors(cfg: &ChanConfig, tensors: Vec<Tensor>) -> Result<Self> {
        cfg.validate()?;
        let layout = Layout::new(cfg);
        if tensors.len() != layout.specs.len() {
            return Err(ChanError::Validation(format!(
                "expected {} parameter tensors, got {}",
                layout.specs.len(),
                tensors.len()
            )));
        }
        for (spec, t) in layout.specs.iter().zip(&tensors) {
            if t.shape() != spec.shape.as_slice() {
                return Err(ChanError::shape("params", &spec.shape, t.shape()));
            }
        }
        Ok(ChanParams { layout, tensors })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn get(&self, idx: usize) -> &Tensor {
        &self.tensors[idx]
    }

    pub fn get_mut(&mut self, idx: usize) -> &mut Tensor {
        &mut self.tensors[idx]
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.layout.specs[idx].name
    }

    pub fn named(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.layout.specs.iter().map(|s| s.name.as_str()).zip(&self.tensors)
    }

    pub fn named_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.layout.specs.iter().map(|s| s.name.as_str()).zip(self.tensors.iter_mut())
    }

    /// Owned `(name, tensor)` pairs, the form the gradient checker takes.
    pub fn to_named_vec(&self) -> Vec<(String, Tensor)> {
        self.named().map(|(n, t)| (n.to_string(), t.clone())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shapes() {
        let cfg = ChanConfig::default();
        let l = Layout::new(&cfg);
        let shape = |i: usize| l.specs[i].shape.clone();
        assert_eq!(shape(l.conv[0][0].weight), vec![3, 2048, 128]);
        assert_eq!(shape(l.conv[1][1].weight), vec![5, 256, 256]);
        assert_eq!(shape(l.proj.weight), vec![256, 512]);
        for i in [l.local.p, l.local.w1, l.local.w2] {
            assert_eq!(shape(i), vec![256, 256]);
        }
        assert_eq!(shape(l.deconv[0].weight), vec![4, 1280, 512]);
        assert_eq!(shape(l.w_c), vec![512, 300]);
    }

    #[test]
    fn names_are_unique_and_ordered() {
        let l = Layout::new(&ChanConfig::tiny());
        let mut names: Vec<&str> = l.specs.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names[0], "conv0.branch0.filter");
        assert_eq!(*names.last().unwrap(), "mlp.out.bias");
        let n = names.len();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), n);
    }

    #[test]
    fn init_is_seeded() {
        let cfg = ChanConfig::tiny();
        assert_eq!(ChanParams::init(&cfg).unwrap(), ChanParams::init(&cfg).unwrap());
        let other = ChanParams::init(&ChanConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(ChanParams::init(&ChanConfig::tiny()).unwrap(), other);
    }

    #[test]
    fn from_tensors_checks_shapes() {
        let cfg = ChanConfig::tiny();
        let p = ChanParams::init(&cfg).unwrap();
        let mut tensors = p.tensors().to_vec();
        assert!(ChanParams::from_tensors(&cfg, tensors.clone()).is_ok());
        tensors[0] = Tensor::zeros(&[1]);
        assert!(ChanParams::from_tensors(&cfg, tensors).is_err());
    }
}

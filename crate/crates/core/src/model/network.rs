//! Forward pass of the network on a [`Tape`].

use std::ops::Range;

use super::config::ChanConfig;
use super::params::{AttentionIdx, ChanParams, Layout};
use crate::dataset::{ConceptId, ConceptVocabulary, Query, ShotFeatureSequence};
use crate::error::{ChanError, Result};
use crate::segmentation::SegmentBoundaries;
use crate::tensor::{Padding, Tape, Tensor, Var};

/// Output of an attention layer together with its softmax weights.
#[derive(Debug, Clone, Copy)]
pub struct Attention {
    pub output: Var,
    pub weights: Var,
}

/// Embedding side of a query: both concept vectors and their mean `h_q`.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryEmbedding {
    pub concepts: [ConceptId; 2],
    pub embeddings: [Vec<f64>; 2],
    pub h_q: Vec<f64>,
}

impl QueryEmbedding {
    pub fn new(vocab: &ConceptVocabulary, query: Query) -> Result<Self> {
        let a = vocab.embedding(query.first)?.to_vec();
        let b = vocab.embedding(query.second)?.to_vec();
        Ok(Self::from_vectors(query.concepts(), a, b))
    }

    pub fn from_vectors(concepts: [ConceptId; 2], a: Vec<f64>, b: Vec<f64>) -> Self {
        let h_q = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        QueryEmbedding { concepts, embeddings: [a, b], h_q }
    }
}

/// Query-independent encoding of one segment.
#[derive(Debug, Clone)]
pub struct SegmentEncoding {
    pub range: Range<usize>,
    /// Temporal length before and after each pooling stage.
    pub lengths: Vec<usize>,
    /// Pooled convolutional features `v̂`, `[t × d]`.
    pub pooled: Var,
    /// Local self-attention output `v̂ˡ`, `[t × d_c]`.
    pub local: Var,
}

#[derive(Debug, Clone)]
pub struct VideoEncoding {
    pub n_shots: usize,
    pub segments: Vec<SegmentEncoding>,
    /// All pooled shots of all segments stacked in temporal order.
    pub all_pooled: Var,
}

/// Network weights plus config.
#[derive(Debug, Clone, PartialEq)]
pub struct ChanModel {
    pub config: ChanConfig,
    pub params: ChanParams,
}

impl ChanModel {
    pub fn new(config: ChanConfig) -> Result<Self> {
        let params = ChanParams::init(&config)?;
        Ok(ChanModel { config, params })
    }

    /// Registers every parameter on `tape`.
    pub fn bind(&self, tape: &mut Tape) -> Bound<'_> {
        let vars = self.params.tensors().iter().map(|t| tape.param(t)).collect();
        Bound { config: &self.config, layout: self.params.layout(), vars }
    }

    /// Uses parameters already on a tape, given in layout order.
    pub fn bind_vars(&self, vars: &[Var]) -> Result<Bound<'_>> {
        if vars.len() != self.params.len() {
            return Err(ChanError::invalid("bind_vars", format!("expected {} vars, got {}", self.params.len(), vars.len())));
        }
        Ok(Bound { config: &self.config, layout: self.params.layout(), vars: vars.to_vec() })
    }

    /// Per-shot query relevance scores in `(0, 1)`.
    pub fn scores(&self, features: &ShotFeatureSequence, boundaries: &SegmentBoundaries, query: &QueryEmbedding) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let out = bound.forward(&mut tape, features, boundaries, query)?;
        Ok(tape.value(out).to_vec())
    }
}

/// A model whose parameters live on a particular tape.
pub struct Bound<'m> {
    config: &'m ChanConfig,
    layout: &'m Layout,
    vars: Vec<Var>,
}

impl Bound<'_> {
    pub fn config(&self) -> &ChanConfig {
        self.config
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    fn v(&self, idx: usize) -> Var {
        self.vars[idx]
    }

    /// Parallel dilated branches, concatenated, `tanh`, then max-pooled.
    pub fn conv_block(&self, tape: &mut Tape, x: Var, block: usize) -> Result<Var> {
        let cfg = self.config;
        let mut outs = Vec::with_capacity(cfg.kernel_sizes.len());
        for (r, &dilation) in cfg.dilations.iter().enumerate() {
            let idx = self.layout.conv[block][r];
            let y = tape.conv1d(x, self.v(idx.weight), dilation, Padding::Same)?;
            outs.push(tape.add_row(y, self.v(idx.bias))?);
        }
        let cat = tape.concat(&outs, 1)?;
        let act = tape.tanh(cat);
        tape.max_pool1d(act, cfg.pool_window)
    }

    /// All convolution blocks, `[s × input_dim]` to `[t × d]`.
    pub fn encode_segment(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        (0..self.config.conv_channels.len()).try_fold(x, |h, b| self.conv_block(tape, h, b))
    }

    /// Per-dimension self-attention within a segment. The pooled features
    /// are first projected to `d_c`; weights have shape `[t, t, d_c]` and
    /// are normalised over the second axis.
    pub fn local_attention(&self, tape: &mut Tape, pooled: Var) -> Result<Attention> {
        let l = self.layout.local;
        let t = tape.shape(pooled)[0];
        let dc = self.config.attention_dim;
        let x = tape.linear(pooled, self.v(self.layout.proj.weight), Some(self.v(self.layout.proj.bias)))?;
        let a = tape.matmul_nt(x, self.v(l.w1))?;
        let b = tape.matmul_nt(x, self.v(l.w2))?;
        let a = tape.expand(a, 1, t)?;
        let b = tape.expand(b, 0, t)?;
        let pre = tape.add(a, b)?;
        let pre = tape.add_row(pre, self.v(l.b))?;
        let act = tape.tanh(pre);
        let flat = tape.reshape(act, &[t * t, dc])?;
        let scores = tape.matmul_nt(flat, self.v(l.p))?;
        let scores = tape.reshape(scores, &[t, t, dc])?;
        let weights = tape.softmax(scores, 1)?;
        let values = tape.expand(x, 0, t)?;
        let weighted = tape.mul(weights, values)?;
        let output = tape.sum(weighted, 1)?;
        Ok(Attention { output, weights })
    }

    /// `e_ij = vᵀ tanh(W1 left_i + W2 right_j + b)` for all pairs, shape `[n_left × n_right]`.
    fn additive_scores(&self, tape: &mut Tape, idx: AttentionIdx, left: Var, right: Var) -> Result<Var> {
        let n = tape.shape(left)[0];
        let m = tape.shape(right)[0];
        let dc = self.config.attention_dim;
        let a = tape.matmul_nt(left, self.v(idx.w1))?;
        let b = tape.matmul_nt(right, self.v(idx.w2))?;
        let pre = if m == 1 {
            tape.add_row(a, b)?
        } else {
            let a = tape.expand(a, 1, m)?;
            let b = tape.expand(b, 0, n)?;
            tape.add(a, b)?
        };
        let pre = tape.add_row(pre, self.v(idx.b))?;
        let act = tape.tanh(pre);
        let flat = tape.reshape(act, &[n * m, dc])?;
        let e = tape.matmul_nt(flat, self.v(idx.v))?;
        tape.reshape(e, &[n, m])
    }

    /// Query-aware segment summary: a softmax over shots of the segment.
    /// Output `[1 × d]`, weights `[t × 1]`.
    pub fn segment_attention(&self, tape: &mut Tape, pooled: Var, h_q: Var) -> Result<Attention> {
        let e = self.additive_scores(tape, self.layout.segment, pooled, h_q)?;
        let weights = tape.softmax(e, 0)?;
        let wt = tape.transpose(weights)?;
        let output = tape.matmul(wt, pooled)?;
        Ok(Attention { output, weights })
    }

    /// Attention of every shot over the `m` segment summaries.
    /// Output `[n × d]`, weights `[n × m]`.
    pub fn global_attention(&self, tape: &mut Tape, shots: Var, summaries: Var) -> Result<Attention> {
        let e = self.additive_scores(tape, self.layout.global, shots, summaries)?;
        let weights = tape.softmax(e, 1)?;
        let output = tape.matmul(weights, summaries)?;
        Ok(Attention { output, weights })
    }

    /// Transposed convolutions back through every pooling stage, ending at
    /// exactly `lengths[0]` steps and `fusion_dim` channels.
    pub fn decode_segment(&self, tape: &mut Tape, fused: Var, lengths: &[usize]) -> Result<Var> {
        let blocks = self.layout.deconv.len();
        let mut h = fused;
        for (i, idx) in self.layout.deconv.iter().enumerate() {
            let target = lengths[blocks - 1 - i];
            let y = tape.conv_transpose1d(h, self.v(idx.weight), self.config.pool_window, target)?;
            let y = tape.add_row(y, self.v(idx.bias))?;
            h = if i + 1 < blocks { tape.tanh(y) } else { y };
        }
        if tape.shape(h)[0] != lengths[0] {
            return Err(ChanError::invalid("decode_segment", "recovered length differs from segment length"));
        }
        Ok(h)
    }

    /// Relevance of every shot to one concept, `[n × 1]` in `(0, 1)`.
    pub fn concept_scores(&self, tape: &mut Tape, shots: Var, embedding: Var) -> Result<Var> {
        let l = self.layout;
        let visual = tape.matmul_nt(shots, self.v(l.w_f))?;
        let textual = tape.matmul_nt(embedding, self.v(l.w_c))?;
        let joint = tape.mul_row(visual, textual)?;
        let hidden = tape.linear(joint, self.v(l.mlp_hidden.weight), Some(self.v(l.mlp_hidden.bias)))?;
        let hidden = tape.tanh(hidden);
        let logit = tape.linear(hidden, self.v(l.mlp_out.weight), Some(self.v(l.mlp_out.bias)))?;
        Ok(tape.sigmoid(logit))
    }

    fn check_inputs(&self, features: &ShotFeatureSequence, boundaries: &SegmentBoundaries) -> Result<()> {
        if features.dim() != self.config.input_dim {
            return Err(ChanError::shape("forward", &[features.n_shots(), self.config.input_dim], &[features.n_shots(), features.dim()]));
        }
        if boundaries.n_shots() != features.n_shots() {
            return Err(ChanError::invalid(
                "forward",
                format!("boundaries cover {} shots, video has {}", boundaries.n_shots(), features.n_shots()),
            ));
        }
        Ok(())
    }

    /// The query-independent part: convolution blocks and local attention
    /// for every segment.
    pub fn encode_video(&self, tape: &mut Tape, features: &ShotFeatureSequence, boundaries: &SegmentBoundaries) -> Result<VideoEncoding> {
        self.check_inputs(features, boundaries)?;
        let mut segments = Vec::with_capacity(boundaries.n_segments());
        for range in boundaries.segments() {
            let x = tape.constant(features.rows_tensor(range.start, range.len()));
            let pooled = self.encode_segment(tape, x)?;
            let local = if self.config.disable_local_attention {
                let t = tape.shape(pooled)[0];
                tape.zeros(&[t, self.config.attention_dim])
            } else {
                self.local_attention(tape, pooled)?.output
            };
            let lengths = self.config.pooled_lengths(range.len());
            segments.push(SegmentEncoding { range, lengths, pooled, local });
        }
        let pooled: Vec<Var> = segments.iter().map(|s| s.pooled).collect();
        let all_pooled = tape.concat(&pooled, 0)?;
        Ok(VideoEncoding { n_shots: features.n_shots(), segments, all_pooled })
    }

    fn embedding_var(&self, tape: &mut Tape, values: &[f64]) -> Result<Var> {
        if values.len() != self.config.concept_embed_dim {
            return Err(ChanError::shape("query_embedding", &[self.config.concept_embed_dim], &[values.len()]));
        }
        Ok(tape.constant(Tensor::matrix(1, values.len(), values.to_vec())?))
    }

    /// Query-dependent part: segment and global attention, fusion,
    /// decoding and the averaged concept scores. Returns `[n × 1]`.
    pub fn query_scores(&self, tape: &mut Tape, enc: &VideoEncoding, query: &QueryEmbedding) -> Result<Var> {
        let d = self.config.encoded_dim();
        let global = if self.config.disable_global_attention {
            None
        } else {
            let h_q = self.embedding_var(tape, &query.h_q)?;
            let mut summaries = Vec::with_capacity(enc.segments.len());
            for s in &enc.segments {
                summaries.push(self.segment_attention(tape, s.pooled, h_q)?.output);
            }
            let summaries = tape.concat(&summaries, 0)?;
            Some(self.global_attention(tape, enc.all_pooled, summaries)?.output)
        };
        let mut decoded = Vec::with_capacity(enc.segments.len());
        let mut offset = 0;
        for s in &enc.segments {
            let t = tape.shape(s.pooled)[0];
            let glob = match global {
                Some(g) => tape.slice(g, 0, offset, t)?,
                None => tape.zeros(&[t, d]),
            };
            offset += t;
            let fused = tape.concat(&[s.pooled, s.local, glob], 1)?;
            decoded.push(self.decode_segment(tape, fused, &s.lengths)?);
        }
        let shots = tape.concat(&decoded, 0)?;
        let [ea, eb] = &query.embeddings;
        let (ea, eb) = (self.embedding_var(tape, ea)?, self.embedding_var(tape, eb)?);
        let sa = self.concept_scores(tape, shots, ea)?;
        let sb = self.concept_scores(tape, shots, eb)?;
        let total = tape.add(sa, sb)?;
        Ok(tape.scale(total, 0.5))
    }

    /// Full forward pass, `[n × 1]` query relevance scores.
    pub fn forward(&self, tape: &mut Tape, features: &ShotFeatureSequence, boundaries: &SegmentBoundaries, query: &QueryEmbedding) -> Result<Var> {
        let enc = self.encode_video(tape, features, boundaries)?;
        self.query_scores(tape, &enc, query)
    }
}

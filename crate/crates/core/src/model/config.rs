use serde::{Deserialize, Serialize};

use crate::error::{ChanError, Result};

/// How shots are chosen from the relevance scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionPolicy {
    /// Every shot scoring at least the threshold.
    Threshold(f64),
    /// The `k` highest scoring shots; ties go to the lower index.
    TopK(usize),
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        SelectionPolicy::Threshold(0.5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChanConfig {
    pub input_dim: usize,
    /// Output channels of each convolution block, split evenly over branches.
    pub conv_channels: Vec<usize>,
    /// One branch per entry; paired with `dilations`.
    pub kernel_sizes: Vec<usize>,
    pub dilations: Vec<usize>,
    pub pool_window: usize,
    /// `d_c`, the attention dimension.
    pub attention_dim: usize,
    pub fusion_dim: usize,
    pub mlp_hidden: usize,
    pub concept_embed_dim: usize,
    pub deconv_taps: usize,
    pub disable_local_attention: bool,
    pub disable_global_attention: bool,
    pub selection: SelectionPolicy,
    pub seed: u64,
}

impl Default for ChanConfig {
    fn default() -> Self {
        ChanConfig {
            input_dim: 2048,
            conv_channels: vec![256, 512],
            kernel_sizes: vec![3, 5],
            dilations: vec![1, 2],
            pool_window: 2,
            attention_dim: 256,
            fusion_dim: 512,
            mlp_hidden: 256,
            concept_embed_dim: 300,
            deconv_taps: 4,
            disable_local_attention: false,
            disable_global_attention: false,
            selection: SelectionPolicy::default(),
            seed: 0,
        }
    }
}

impl ChanConfig {
    /// A very small network for gradient checks and unit tests.
    pub fn tiny() -> Self {
        ChanConfig {
            input_dim: 8,
            conv_channels: vec![8, 8],
            attention_dim: 4,
            fusion_dim: 8,
            mlp_hidden: 4,
            concept_embed_dim: 4,
            ..ChanConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(ChanError::invalid("chan_config", msg));
        let dims = [
            ("input_dim", self.input_dim),
            ("pool_window", self.pool_window),
            ("attention_dim", self.attention_dim),
            ("fusion_dim", self.fusion_dim),
            ("mlp_hidden", self.mlp_hidden),
            ("concept_embed_dim", self.concept_embed_dim),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return fail(format!("{name} must be positive"));
        }
        if self.conv_channels.is_empty() {
            return fail("at least one convolution block is required".into());
        }
        let branches = self.kernel_sizes.len();
        if branches == 0 || branches != self.dilations.len() {
            return fail("kernel_sizes and dilations must be non-empty and of equal length".into());
        }
        if let Some(k) = self.kernel_sizes.iter().find(|&&k| k % 2 == 0) {
            return fail(format!("kernel size {k} is not odd"));
        }
        if self.dilations.contains(&0) {
            return fail("dilations must be positive".into());
        }
        if let Some(c) = self.conv_channels.iter().find(|&&c| c == 0 || c % branches != 0) {
            return fail(format!("{c} channels cannot be split evenly over {branches} branches"));
        }
        if self.deconv_taps < self.pool_window {
            return fail("deconv_taps must be at least pool_window to recover every length".into());
        }
        match self.selection {
            SelectionPolicy::Threshold(t) if !t.is_finite() => fail("threshold must be finite".into()),
            SelectionPolicy::TopK(0) => fail("top_k must be positive".into()),
            _ => Ok(()),
        }
    }

    /// Channels out of the last convolution block (`d`).
    pub fn encoded_dim(&self) -> usize {
        *self.conv_channels.last().expect("validated")
    }

    /// Width of `[v̂; v̂ˡ; v̂ᵍ]`.
    pub fn fused_dim(&self) -> usize {
        2 * self.encoded_dim() + self.attention_dim
    }

    /// Length of a segment of `len` shots after every pooling stage, starting
    /// with `len` itself.
    pub fn pooled_lengths(&self, len: usize) -> Vec<usize> {
        let mut lengths = vec![len];
        for _ in &self.conv_channels {
            let last = *lengths.last().expect("non-empty");
            lengths.push(last.div_ceil(self.pool_window));
        }
        lengths
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ChanConfig::default().validate().unwrap();
        ChanConfig::tiny().validate().unwrap();
        assert_eq!(ChanConfig::default().fused_dim(), 1280);
    }

    #[test]
    fn pooled_length_arithmetic() {
        assert_eq!(ChanConfig::default().pooled_lengths(8), vec![8, 4, 2]);
        assert_eq!(ChanConfig::default().pooled_lengths(7), vec![7, 4, 2]);
        assert_eq!(ChanConfig::default().pooled_lengths(1), vec![1, 1, 1]);
    }

    #[test]
    fn rejects_uneven_branches() {
        let cfg = ChanConfig { conv_channels: vec![255, 512], ..ChanConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = ChanConfig { kernel_sizes: vec![3, 4], ..ChanConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn selection_serializes_readably() {
        let s = serde_json::to_string(&SelectionPolicy::TopK(3)).unwrap();
        assert_eq!(s, r#"{"top_k":3}"#);
        let t: SelectionPolicy = serde_json::from_str(r#"{"threshold":0.5}"#).unwrap();
        assert_eq!(t, SelectionPolicy::Threshold(0.5));
    }
}

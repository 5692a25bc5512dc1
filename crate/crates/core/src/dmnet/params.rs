use std::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Network shape. The encoder maps `2 → encoder_hidden… → c_max`, the decoder maps
/// `c_max → decoder_hidden… → 2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub n_rx: usize,
    pub n_tx: usize,
    pub c_init: usize,
    pub c_max: usize,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            n_rx: 16,
            n_tx: 4,
            c_init: 16,
            c_max: 64,
            encoder_hidden: vec![32],
            decoder_hidden: vec![32, 16],
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_rx == 0 || self.n_tx == 0 {
            return Err(Error::InvalidArgument(
                "network dimensions must be positive".into(),
            ));
        }
        if self.c_init == 0 || !self.c_init.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "embedding width must be positive and even, got {}",
                self.c_init
            )));
        }
        if self.c_max == 0
            || self
                .encoder_hidden
                .iter()
                .chain(&self.decoder_hidden)
                .any(|&c| c == 0)
        {
            return Err(Error::InvalidArgument(
                "channel widths must be positive".into(),
            ));
        }
        Ok(())
    }

    /// `(in, out)` channels of each encoder convolution.
    pub fn encoder_channels(&self) -> Vec<(usize, usize)> {
        chain_pairs(2, &self.encoder_hidden, self.c_max)
    }

    /// `(in, out)` channels of each decoder convolution.
    pub fn decoder_channels(&self) -> Vec<(usize, usize)> {
        chain_pairs(self.c_max, &self.decoder_hidden, 2)
    }

    /// Σ (9·in·out + out) over all convolutions plus `c_init·2c_max + 2c_max`.
    pub fn param_count(&self) -> usize {
        let conv: usize = self
            .encoder_channels()
            .into_iter()
            .chain(self.decoder_channels())
            .map(|(i, o)| conv_param_count(i, o))
            .sum();
        conv + embedding_param_count(self.c_init, self.c_max)
    }
}

fn chain_pairs(first: usize, hidden: &[usize], last: usize) -> Vec<(usize, usize)> {
    let widths: Vec<usize> = std::iter::once(first)
        .chain(hidden.iter().copied())
        .chain([last])
        .collect();
    widths.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Scalars in one 3×3 convolution with bias.
pub fn conv_param_count(in_ch: usize, out_ch: usize) -> usize {
    9 * in_ch * out_ch + out_ch
}

/// Scalars in the embedding projection `c_init → 2·c_max`.
pub fn embedding_param_count(c_init: usize, c_max: usize) -> usize {
    c_init * 2 * c_max + 2 * c_max
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ConvSlot {
    pub in_ch: usize,
    pub out_ch: usize,
    pub weight: Range<usize>,
    pub bias: Range<usize>,
}

/// Offsets into the flat parameter vector. Order: encoder convolutions, embedding
/// projection, decoder convolutions; each block is weights then bias.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Layout {
    pub encoder: Vec<ConvSlot>,
    pub embed_weight: Range<usize>,
    pub embed_bias: Range<usize>,
    pub decoder: Vec<ConvSlot>,
    pub total: usize,
}

impl Layout {
    pub fn new(config: &NetConfig) -> Self {
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let conv = |(i, o): (usize, usize), take: &mut dyn FnMut(usize) -> Range<usize>| ConvSlot {
            in_ch: i,
            out_ch: o,
            weight: take(9 * i * o),
            bias: take(o),
        };
        let encoder = config
            .encoder_channels()
            .into_iter()
            .map(|p| conv(p, &mut take))
            .collect();
        let embed_weight = take(config.c_init * 2 * config.c_max);
        let embed_bias = take(2 * config.c_max);
        let decoder = config
            .decoder_channels()
            .into_iter()
            .map(|p| conv(p, &mut take))
            .collect();
        Self {
            encoder,
            embed_weight,
            embed_bias,
            decoder,
            total: at,
        }
    }

    /// Named parameter groups in storage order.
    pub fn groups(&self) -> Vec<(String, Range<usize>)> {
        let mut out = Vec::new();
        for (i, s) in self.encoder.iter().enumerate() {
            out.push((format!("encoder.{i}.weight"), s.weight.clone()));
            out.push((format!("encoder.{i}.bias"), s.bias.clone()));
        }
        out.push(("embedding.weight".into(), self.embed_weight.clone()));
        out.push(("embedding.bias".into(), self.embed_bias.clone()));
        for (i, s) in self.decoder.iter().enumerate() {
            out.push((format!("decoder.{i}.weight"), s.weight.clone()));
            out.push((format!("decoder.{i}.bias"), s.bias.clone()));
        }
        out
    }
}

/// All trainable scalars of the denoiser, shared across every diffusion step.
#[derive(Debug, Clone, PartialEq)]
pub struct DMNetParams {
    config: NetConfig,
    layout: Layout,
    values: Vec<f64>,
}

impl DMNetParams {
    /// All-zero parameters.
    pub fn zeros(config: NetConfig) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        let values = vec![0.0; layout.total];
        Ok(Self {
            config,
            layout,
            values,
        })
    }

    /// He-normal convolution weights, zero conv biases, and an embedding projection
    /// whose scale half starts at 1 so the modulation begins close to identity.
    pub fn init<R: Rng + ?Sized>(config: NetConfig, rng: &mut R) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let slots: Vec<ConvSlot> = p
            .layout
            .encoder
            .iter()
            .chain(&p.layout.decoder)
            .cloned()
            .collect();
        for s in slots {
            let std = (2.0 / (9 * s.in_ch) as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("finite std");
            p.values[s.weight]
                .iter_mut()
                .for_each(|w| *w = normal.sample(rng));
        }
        let embed_std = 0.1 / (p.config.c_init as f64).sqrt();
        let normal = Normal::new(0.0, embed_std).expect("finite std");
        let we = p.layout.embed_weight.clone();
        p.values[we]
            .iter_mut()
            .for_each(|w| *w = normal.sample(rng));
        let c_max = p.config.c_max;
        let start = p.layout.embed_bias.start;
        p.values[start..start + c_max]
            .iter_mut()
            .for_each(|b| *b = 1.0);
        Ok(p)
    }

    /// Wraps a flat vector in the documented storage order.
    pub fn from_values(config: NetConfig, values: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        if values.len() != p.values.len() {
            return Err(Error::shape(p.values.len(), values.len()));
        }
        p.values = values;
        Ok(p)
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub(crate) fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Exact number of scalar parameters.
    pub fn count_params(&self) -> usize {
        self.values.len()
    }

    /// Named groups (`encoder.0.weight`, `embedding.bias`, …) and their ranges.
    pub fn groups(&self) -> Vec<(String, Range<usize>)> {
        self.layout.groups()
    }

    pub fn group(&self, name: &str) -> Option<&[f64]> {
        self.groups()
            .into_iter()
            .find(|(n, _)| n == name)
            .map(|(_, r)| &self.values[r])
    }

    pub fn group_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let range = self.groups().into_iter().find(|(n, _)| n == name)?.1;
        Some(&mut self.values[range])
    }
}

/// Gradient with the same layout as [`DMNetParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub values: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(params: &DMNetParams) -> Self {
        Self {
            values: vec![0.0; params.count_params()],
        }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::stream_rng;

    #[test]
    fn single_conv_count() {
        assert_eq!(conv_param_count(2, 2), 38);
    }

    #[test]
    fn embedding_count() {
        assert_eq!(embedding_param_count(16, 64), 2176);
    }

    #[test]
    fn default_config_count() {
        let c = NetConfig::default();
        // 2→32, 32→64, 64→32, 32→16, 16→2 plus the embedding
        let want = 608 + 18_496 + 18_464 + 4_624 + 290 + 2_176;
        assert_eq!(c.param_count(), want);
        assert_eq!(want, 44_658);
        assert!((35_000..=70_000).contains(&want));
        assert_eq!(DMNetParams::zeros(c).unwrap().count_params(), want);
    }

    #[test]
    fn layout_is_contiguous_and_named() {
        let c = NetConfig {
            encoder_hidden: vec![3, 5],
            decoder_hidden: vec![],
            c_max: 4,
            c_init: 6,
            ..NetConfig::default()
        };
        let l = Layout::new(&c);
        let groups = l.groups();
        assert_eq!(groups.len(), 2 * 3 + 2 + 2);
        let mut at = 0;
        for (_, r) in &groups {
            assert_eq!(r.start, at);
            at = r.end;
        }
        assert_eq!(at, c.param_count());
        assert_eq!(groups[0].0, "encoder.0.weight");
        assert_eq!(groups[6].0, "embedding.weight");
        assert_eq!(groups.last().unwrap().0, "decoder.0.bias");
        assert_eq!(c.decoder_channels(), vec![(4, 2)]);
    }

    #[test]
    fn rejects_bad_configs() {
        for c in [
            NetConfig {
                c_init: 15,
                ..NetConfig::default()
            },
            NetConfig {
                c_init: 0,
                ..NetConfig::default()
            },
            NetConfig {
                n_tx: 0,
                ..NetConfig::default()
            },
            NetConfig {
                encoder_hidden: vec![0],
                ..NetConfig::default()
            },
        ] {
            assert!(DMNetParams::zeros(c).is_err());
        }
    }

    #[test]
    fn init_is_seeded() {
        let a = DMNetParams::init(NetConfig::default(), &mut stream_rng(1, 0, 0)).unwrap();
        let b = DMNetParams::init(NetConfig::default(), &mut stream_rng(1, 0, 0)).unwrap();
        let c = DMNetParams::init(NetConfig::default(), &mut stream_rng(2, 0, 0)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.group("embedding.bias").unwrap()[..64]
            .iter()
            .all(|&b| b == 1.0));
        assert!(a.group("decoder.2.bias").unwrap().iter().all(|&b| b == 0.0));
    }
}

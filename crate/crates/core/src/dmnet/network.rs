use num_complex::Complex64;
use rand::Rng;

use super::conv::{col2im, conv_forward, gemm, im2col};
use super::params::{ConvSlot, DMNetParams, Gradients};
use crate::diffusion::{Denoiser, NoiseSchedule};
use crate::error::{Error, Result};
use crate::numerics::{complex_gaussian, ComplexMatrix, RealTensor4};

/// Sinusoidal position encoding: `e[2i] = sin(t·ω_i)`, `e[2i+1] = cos(t·ω_i)` with
/// `ω_i = 10000^(-2i/c_init)`.
pub fn embed_time(t: usize, c_init: usize) -> Result<Vec<f64>> {
    if c_init == 0 || !c_init.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "embedding width must be positive and even, got {c_init}"
        )));
    }
    let mut e = vec![0.0; c_init];
    for i in 0..c_init / 2 {
        let freq = 10_000f64.powf(-((2 * i) as f64) / c_init as f64);
        let (s, c) = (t as f64 * freq).sin_cos();
        e[2 * i] = s;
        e[2 * i + 1] = c;
    }
    Ok(e)
}

impl DMNetParams {
    /// Modulation vector `[t_s; t_b]` of length `2·c_max` for step `t`.
    pub fn time_modulation(&self, t: usize) -> Result<Vec<f64>> {
        let cfg = self.config();
        let e = embed_time(t, cfg.c_init)?;
        let l = self.layout();
        let mut out = self.values()[l.embed_bias.clone()].to_vec();
        gemm(
            2 * cfg.c_max,
            cfg.c_init,
            1,
            &self.values()[l.embed_weight.clone()],
            false,
            &e,
            false,
            1.0,
            &mut out,
        );
        Ok(out)
    }
}

const CHUNK_PIXELS: usize = 256;

struct LayerCache {
    cols: Vec<f64>,
    /// Post-activation output (`None` for the linear output layer).
    act: Option<Vec<f64>>,
}

struct Cache {
    encoder: Vec<LayerCache>,
    embeds: Vec<Vec<f64>>,
    mods: Vec<Vec<f64>>,
    decoder: Vec<LayerCache>,
}

fn relu_inplace(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
}

fn run_conv(
    params: &DMNetParams,
    slot: &ConvSlot,
    x: &[f64],
    batch: usize,
    relu: bool,
) -> (Vec<f64>, Vec<f64>) {
    let cfg = params.config();
    let (h, w) = (cfg.n_rx, cfg.n_tx);
    let cols = im2col(x, slot.in_ch, batch, h, w);
    let v = params.values();
    let mut y = conv_forward(
        &cols,
        &v[slot.weight.clone()],
        &v[slot.bias.clone()],
        slot.out_ch,
        batch * h * w,
    );
    if relu {
        relu_inplace(&mut y);
    }
    (cols, y)
}

/// Forward pass on a channel-major `[2, B·H·W]` buffer with one step per sample.
fn forward(
    params: &DMNetParams,
    mut x: Vec<f64>,
    steps: &[usize],
    keep: bool,
) -> Result<(Vec<f64>, Option<Cache>)> {
    let cfg = params.config();
    let batch = steps.len();
    let plane = cfg.n_rx * cfg.n_tx;
    let l = params.layout();

    let mut enc_cache = Vec::new();
    for slot in &l.encoder {
        let (cols, y) = run_conv(params, slot, &x, batch, true);
        if keep {
            enc_cache.push(LayerCache {
                cols,
                act: Some(y.clone()),
            });
        }
        x = y;
    }

    let mut embeds = Vec::with_capacity(batch);
    let mut mods = Vec::with_capacity(batch);
    for &t in steps {
        if keep {
            embeds.push(embed_time(t, cfg.c_init)?);
        }
        mods.push(params.time_modulation(t)?);
    }
    let c_max = cfg.c_max;
    for c in 0..c_max {
        for (b, m) in mods.iter().enumerate() {
            let (s, o) = (m[c], m[c_max + c]);
            x[(c * batch + b) * plane..][..plane]
                .iter_mut()
                .for_each(|v| *v = *v * s + o);
        }
    }

    let mut dec_cache = Vec::new();
    let n_dec = l.decoder.len();
    for (i, slot) in l.decoder.iter().enumerate() {
        let relu = i + 1 < n_dec;
        let (cols, y) = run_conv(params, slot, &x, batch, relu);
        if keep {
            dec_cache.push(LayerCache {
                cols,
                act: relu.then(|| y.clone()),
            });
        }
        x = y;
    }

    let cache = keep.then_some(Cache {
        encoder: enc_cache,
        embeds,
        mods,
        decoder: dec_cache,
    });
    Ok((x, cache))
}

/// Accumulates a convolution's parameter gradient and returns the input gradient.
fn conv_backward(
    params: &DMNetParams,
    slot: &ConvSlot,
    cols: &[f64],
    dy: &[f64],
    batch: usize,
    grads: &mut Gradients,
    need_input: bool,
) -> Option<Vec<f64>> {
    let cfg = params.config();
    let (h, w) = (cfg.n_rx, cfg.n_tx);
    let n = batch * h * w;
    let k = slot.in_ch * 9;
    gemm(
        slot.out_ch,
        n,
        k,
        dy,
        false,
        cols,
        true,
        1.0,
        &mut grads.values[slot.weight.clone()],
    );
    for (o, g) in grads.values[slot.bias.clone()].iter_mut().enumerate() {
        *g += dy[o * n..(o + 1) * n].iter().sum::<f64>();
    }
    need_input.then(|| {
        let mut dcols = vec![0.0; k * n];
        gemm(
            k,
            slot.out_ch,
            n,
            &params.values()[slot.weight.clone()],
            true,
            dy,
            false,
            0.0,
            &mut dcols,
        );
        col2im(&dcols, slot.in_ch, batch, h, w)
    })
}

fn mask_relu(dy: &mut [f64], act: &[f64]) {
    for (d, &a) in dy.iter_mut().zip(act) {
        if a <= 0.0 {
            *d = 0.0;
        }
    }
}

/// Adds the gradient of the batch behind `cache` to `grads`.
fn backward(
    params: &DMNetParams,
    cache: &Cache,
    mut dy: Vec<f64>,
    batch: usize,
    grads: &mut Gradients,
) {
    let cfg = params.config();
    let plane = cfg.n_rx * cfg.n_tx;
    let l = params.layout();

    for (slot, lc) in l.decoder.iter().zip(&cache.decoder).rev() {
        if let Some(act) = &lc.act {
            mask_relu(&mut dy, act);
        }
        dy =
            conv_backward(params, slot, &lc.cols, &dy, batch, grads, true).expect("input gradient");
    }

    let c_max = cfg.c_max;
    let two_c = 2 * c_max;
    let pre_film = cache
        .encoder
        .last()
        .and_then(|lc| lc.act.as_deref())
        .expect("encoder output kept");
    let mut dmod = vec![vec![0.0; two_c]; batch];
    for c in 0..c_max {
        for (b, dm) in dmod.iter_mut().enumerate() {
            let s = cache.mods[b][c];
            let at = (c * batch + b) * plane;
            let (mut ds, mut db) = (0.0, 0.0);
            for (d, &a) in dy[at..at + plane].iter_mut().zip(&pre_film[at..at + plane]) {
                ds += *d * a;
                db += *d;
                *d *= s;
            }
            dm[c] = ds;
            dm[c_max + c] = db;
        }
    }
    for (dm, e) in dmod.iter().zip(&cache.embeds) {
        gemm(
            two_c,
            1,
            cfg.c_init,
            dm,
            false,
            e,
            false,
            1.0,
            &mut grads.values[l.embed_weight.clone()],
        );
        for (g, d) in grads.values[l.embed_bias.clone()].iter_mut().zip(dm) {
            *g += d;
        }
    }

    for (i, (slot, lc)) in l.encoder.iter().zip(&cache.encoder).enumerate().rev() {
        mask_relu(
            &mut dy,
            lc.act.as_deref().expect("encoder layers keep activations"),
        );
        match conv_backward(params, slot, &lc.cols, &dy, batch, grads, i > 0) {
            Some(dx) => dy = dx,
            None => break,
        }
    }
}

/// Channel-major `[2, B·H·W]` buffer from complex latents.
fn pack(latents: &[ComplexMatrix]) -> Vec<f64> {
    let batch = latents.len();
    let plane = latents.first().map_or(0, ComplexMatrix::len);
    let mut x = vec![0.0; 2 * batch * plane];
    for (b, m) in latents.iter().enumerate() {
        for (i, z) in m.as_slice().iter().enumerate() {
            x[b * plane + i] = z.re;
            x[(batch + b) * plane + i] = z.im;
        }
    }
    x
}

fn unpack(x: &[f64], batch: usize, rows: usize, cols: usize) -> Vec<ComplexMatrix> {
    let plane = rows * cols;
    (0..batch)
        .map(|b| {
            ComplexMatrix::from_fn(rows, cols, |r, c| {
                let i = r * cols + c;
                Complex64::new(x[b * plane + i], x[(batch + b) * plane + i])
            })
        })
        .collect()
}

impl DMNetParams {
    fn check_latents(&self, latents: &[ComplexMatrix]) -> Result<()> {
        let cfg = self.config();
        for m in latents {
            if m.shape() != (cfg.n_rx, cfg.n_tx) {
                return Err(Error::shape(
                    format!("{}x{}", cfg.n_rx, cfg.n_tx),
                    format!("{}x{}", m.rows(), m.cols()),
                ));
            }
        }
        Ok(())
    }

    /// Network output on a `[B, 2, N_rx, N_tx]` tensor, all samples at step `t`.
    pub fn net_forward(&self, x: &RealTensor4, t: usize) -> Result<RealTensor4> {
        let cfg = self.config();
        let [b, c, h, w] = x.dims();
        if c != 2 || h != cfg.n_rx || w != cfg.n_tx {
            return Err(Error::shape(
                format!("[B, 2, {}, {}]", cfg.n_rx, cfg.n_tx),
                format!("{:?}", x.dims()),
            ));
        }
        let plane = h * w;
        let mut buf = vec![0.0; x.as_slice().len()];
        for n in 0..b {
            for ch in 0..2 {
                buf[(ch * b + n) * plane..][..plane]
                    .copy_from_slice(&x.as_slice()[(n * 2 + ch) * plane..][..plane]);
            }
        }
        let (y, _) = forward(self, buf, &vec![t; b], false)?;
        let mut out = vec![0.0; y.len()];
        for n in 0..b {
            for ch in 0..2 {
                out[(n * 2 + ch) * plane..][..plane]
                    .copy_from_slice(&y[(ch * b + n) * plane..][..plane]);
            }
        }
        RealTensor4::from_vec([b, 2, h, w], out)
    }

    /// Predicted noise `ε̂(h_t, t)` for each latent, with a per-sample step.
    pub fn predict_noise(
        &self,
        latents: &[ComplexMatrix],
        steps: &[usize],
    ) -> Result<Vec<ComplexMatrix>> {
        if latents.len() != steps.len() {
            return Err(Error::shape(latents.len(), steps.len()));
        }
        if latents.is_empty() {
            return Ok(Vec::new());
        }
        self.check_latents(latents)?;
        let cfg = self.config();
        let chunk = self.chunk_len();
        let mut out = Vec::with_capacity(latents.len());
        for (xs, ts) in latents.chunks(chunk).zip(steps.chunks(chunk)) {
            let (y, _) = forward(self, pack(xs), ts, false)?;
            out.extend(unpack(&y, xs.len(), cfg.n_rx, cfg.n_tx));
        }
        Ok(out)
    }

    /// Samples per internal pass, sized so the unfolded activations stay cache resident.
    fn chunk_len(&self) -> usize {
        let plane = self.config().n_rx * self.config().n_tx;
        (CHUNK_PIXELS / plane).max(1)
    }
}

/// `μ(h_t, t)` from a noise prediction: `ĥ_0 = (h_t − √(1−ᾱ_t) ε̂)/√ᾱ_t`, then the forward
/// posterior mean. At `t = 1` this is `ĥ_0` itself.
pub fn mean_from_noise(
    latent: &ComplexMatrix,
    noise: &ComplexMatrix,
    t: usize,
    schedule: &NoiseSchedule,
) -> Result<ComplexMatrix> {
    let ab = schedule.alpha_bar(t)?;
    let mut h0 = latent.clone();
    h0.axpy_mut(-(1.0 - ab).sqrt(), noise)?;
    h0.scale_mut(1.0 / ab.sqrt());
    if t == 1 {
        return Ok(h0);
    }
    schedule.posterior_mean(latent, &h0, t)
}

impl Denoiser for DMNetParams {
    fn dims(&self) -> Option<(usize, usize)> {
        Some((self.config().n_rx, self.config().n_tx))
    }

    fn predict_mean(
        &self,
        latent: &ComplexMatrix,
        t: usize,
        schedule: &NoiseSchedule,
    ) -> Result<ComplexMatrix> {
        Ok(self
            .predict_mean_batch(std::slice::from_ref(latent), t, schedule)?
            .pop()
            .expect("one latent"))
    }

    fn predict_mean_batch(
        &self,
        latents: &[ComplexMatrix],
        t: usize,
        schedule: &NoiseSchedule,
    ) -> Result<Vec<ComplexMatrix>> {
        if t == 0 || t > schedule.timesteps() {
            return Err(Error::TimestepOutOfRange {
                t,
                max: schedule.timesteps(),
            });
        }
        let noise = self.predict_noise(latents, &vec![t; latents.len()])?;
        latents
            .iter()
            .zip(&noise)
            .map(|(h, e)| mean_from_noise(h, e, t, schedule))
            .collect()
    }
}

/// `Σ|ε − ε̂|² / (B·N)`: mean squared error per complex entry, 1.0 for `ε̂ = 0`.
pub fn epsilon_loss(predicted: &[ComplexMatrix], target: &[ComplexMatrix]) -> f64 {
    let entries: usize = target.iter().map(ComplexMatrix::len).sum();
    let sum: f64 = predicted
        .iter()
        .zip(target)
        .flat_map(|(p, t)| p.as_slice().iter().zip(t.as_slice()))
        .map(|(p, t)| (p - t).norm_sqr())
        .sum();
    sum / entries as f64
}

/// One noising draw per sample: `t ~ U{1..T}`, `ε ~ N_C(0, I)`.
pub fn draw_noising<R: Rng + ?Sized>(
    batch: usize,
    rows: usize,
    cols: usize,
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> (Vec<usize>, Vec<ComplexMatrix>) {
    (0..batch)
        .map(|_| {
            let t = rng.random_range(1..=schedule.timesteps());
            (t, complex_gaussian(rows, cols, rng))
        })
        .unzip()
}

fn noised_inputs(
    h0: &[ComplexMatrix],
    steps: &[usize],
    noise: &[ComplexMatrix],
    schedule: &NoiseSchedule,
) -> Result<Vec<ComplexMatrix>> {
    if h0.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if steps.len() != h0.len() || noise.len() != h0.len() {
        return Err(Error::shape(h0.len(), steps.len().min(noise.len())));
    }
    h0.iter()
        .zip(steps)
        .zip(noise)
        .map(|((h, &t), e)| schedule.forward_diffuse(h, t, e))
        .collect()
}

impl DMNetParams {
    /// Noise-prediction loss with fixed steps and noise, without gradients.
    pub fn loss_at(
        &self,
        h0: &[ComplexMatrix],
        steps: &[usize],
        noise: &[ComplexMatrix],
        schedule: &NoiseSchedule,
    ) -> Result<f64> {
        let xt = noised_inputs(h0, steps, noise, schedule)?;
        let pred = self.predict_noise(&xt, steps)?;
        Ok(epsilon_loss(&pred, noise))
    }

    /// Loss and gradient with fixed steps and noise.
    pub fn loss_and_grad_at(
        &self,
        h0: &[ComplexMatrix],
        steps: &[usize],
        noise: &[ComplexMatrix],
        schedule: &NoiseSchedule,
    ) -> Result<(f64, Gradients)> {
        let xt = noised_inputs(h0, steps, noise, schedule)?;
        self.check_latents(&xt)?;
        let entries = (h0.len() * h0[0].len()) as f64;
        let chunk = self.chunk_len();
        let mut loss = 0.0;
        let mut grads = Gradients::zeros_like(self);
        for ((xs, ts), es) in xt
            .chunks(chunk)
            .zip(steps.chunks(chunk))
            .zip(noise.chunks(chunk))
        {
            let (y, cache) = forward(self, pack(xs), ts, true)?;
            let cache = cache.expect("cache kept");
            let dy: Vec<f64> = y
                .iter()
                .zip(&pack(es))
                .map(|(p, e)| {
                    let d = p - e;
                    loss += d * d;
                    2.0 * d / entries
                })
                .collect();
            backward(self, &cache, dy, xs.len(), &mut grads);
        }
        Ok((loss / entries, grads))
    }

    /// Simplified diffusion objective on a batch of angular-domain `h_0`, drawing
    /// steps and noise from `rng`.
    pub fn loss_and_grad<R: Rng + ?Sized>(
        &self,
        h0: &[ComplexMatrix],
        schedule: &NoiseSchedule,
        rng: &mut R,
    ) -> Result<(f64, Gradients)> {
        let (rows, cols) = h0.first().map_or((0, 0), ComplexMatrix::shape);
        let (steps, noise) = draw_noising(h0.len(), rows, cols, schedule, rng);
        self.loss_and_grad_at(h0, &steps, &noise, schedule)
    }
}

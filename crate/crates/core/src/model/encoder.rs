//! Shared per-view convolutional encoder: 3×3 stride-2 convolutions with
//! ReLU, then global average pooling.

use rand::Rng;
use rayon::prelude::*;

use super::params::{conv_bias_name, conv_weight_name, ParameterStore};
use super::{EncoderConfig, Mode};
use crate::error::{Error, Result};
use crate::render::ViewStack;
use crate::rng::{stream_rng, Stream};

const K: usize = 3;
const TAPS: usize = K * K;

#[inline]
pub(crate) fn conv_out_size(n: usize) -> usize {
    (n - 1) / 2 + 1
}

#[derive(Clone, Copy)]
pub(crate) struct ConvParams<'a> {
    pub weight: &'a [f64],
    pub bias: &'a [f64],
    pub cin: usize,
    pub cout: usize,
}

pub(crate) fn conv_params<'a>(
    cfg: &EncoderConfig,
    store: &'a ParameterStore,
) -> Result<Vec<ConvParams<'a>>> {
    let mut cin = cfg.in_channels;
    let mut out = Vec::with_capacity(cfg.stage_channels.len());
    for (s, &cout) in cfg.stage_channels.iter().enumerate() {
        let w = store
            .get(&conv_weight_name(s))
            .ok_or_else(|| Error::Shape(format!("missing parameter {}", conv_weight_name(s))))?;
        let b = store
            .get(&conv_bias_name(s))
            .ok_or_else(|| Error::Shape(format!("missing parameter {}", conv_bias_name(s))))?;
        if w.shape != [cout, cin, K, K] || b.shape != [cout] {
            return Err(Error::Shape(format!(
                "stage {s} expects weight [{cout}, {cin}, 3, 3], found {:?}",
                w.shape
            )));
        }
        out.push(ConvParams {
            weight: &w.value,
            bias: &b.value,
            cin,
            cout,
        });
        cin = cout;
    }
    Ok(out)
}

/// Unfolds a `cin×h×w` input into `(cin·9) × (ho·wo)` patch rows (stride 2,
/// zero padding 1).
fn im2col<T: Copy + Into<f64>>(
    input: &[T],
    cin: usize,
    h: usize,
    w: usize,
) -> (Vec<f64>, usize, usize) {
    let (ho, wo) = (conv_out_size(h), conv_out_size(w));
    let n = ho * wo;
    let mut col = vec![0.0; cin * TAPS * n];
    for i in 0..cin {
        let plane = &input[i * h * w..(i + 1) * h * w];
        for ky in 0..K {
            for kx in 0..K {
                let row = &mut col[((i * TAPS) + ky * K + kx) * n..][..n];
                for y in 0..ho {
                    let iy = (2 * y + ky) as isize - 1;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                    let dst = &mut row[y * wo..(y + 1) * wo];
                    for (x, d) in dst.iter_mut().enumerate() {
                        let ix = (2 * x + kx) as isize - 1;
                        if ix >= 0 && ix < w as isize {
                            *d = src[ix as usize].into();
                        }
                    }
                }
            }
        }
    }
    (col, ho, wo)
}

fn col2im(dcol: &[f64], cin: usize, h: usize, w: usize) -> Vec<f64> {
    let (ho, wo) = (conv_out_size(h), conv_out_size(w));
    let n = ho * wo;
    let mut out = vec![0.0; cin * h * w];
    for i in 0..cin {
        let plane = &mut out[i * h * w..(i + 1) * h * w];
        for ky in 0..K {
            for kx in 0..K {
                let row = &dcol[((i * TAPS) + ky * K + kx) * n..][..n];
                for y in 0..ho {
                    let iy = (2 * y + ky) as isize - 1;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                    for x in 0..wo {
                        let ix = (2 * x + kx) as isize - 1;
                        if ix >= 0 && ix < w as isize {
                            dst[ix as usize] += row[y * wo + x];
                        }
                    }
                }
            }
        }
    }
    out
}

struct StageCache {
    col: Vec<f64>,
    /// post-ReLU activations, `cout × (ho·wo)`
    out: Vec<f64>,
    h_in: usize,
    w_in: usize,
}

/// Activations kept for the backward pass of one view.
pub(crate) struct ViewCache {
    stages: Vec<StageCache>,
}

fn conv_relu(layer: &ConvParams, col: &[f64], n: usize) -> Vec<f64> {
    let rows = layer.cin * TAPS;
    let mut out = vec![0.0; layer.cout * n];
    for o in 0..layer.cout {
        let dst = &mut out[o * n..(o + 1) * n];
        dst.iter_mut().for_each(|d| *d = layer.bias[o]);
        let wrow = &layer.weight[o * rows..(o + 1) * rows];
        for (k, &wk) in wrow.iter().enumerate() {
            if wk == 0.0 {
                continue;
            }
            let src = &col[k * n..(k + 1) * n];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += wk * s;
            }
        }
        dst.iter_mut().for_each(|d| *d = d.max(0.0));
    }
    out
}

/// Encodes one C×H×W view into an F-vector.
pub(crate) fn encode_view(
    view: &[f32],
    size: usize,
    layers: &[ConvParams],
    keep: bool,
) -> (Vec<f64>, Option<ViewCache>) {
    let mut stages = Vec::with_capacity(layers.len());
    let (mut h, mut w) = (size, size);
    let mut act: Vec<f64> = Vec::new();
    for (s, layer) in layers.iter().enumerate() {
        let (col, ho, wo) = if s == 0 {
            im2col(view, layer.cin, h, w)
        } else {
            im2col(&act, layer.cin, h, w)
        };
        act = conv_relu(layer, &col, ho * wo);
        if keep {
            stages.push(StageCache {
                col,
                out: act.clone(),
                h_in: h,
                w_in: w,
            });
        }
        h = ho;
        w = wo;
    }
    let n = (h * w) as f64;
    let last = layers.last().unwrap().cout;
    let features = (0..last)
        .map(|o| act[o * h * w..(o + 1) * h * w].iter().sum::<f64>() / n)
        .collect();
    (features, keep.then_some(ViewCache { stages }))
}

/// Backpropagates `dfeat` (∂L/∂features of one view) through the encoder.
/// Returns (∂L/∂weight, ∂L/∂bias) per stage.
pub(crate) fn backward_view(
    dfeat: &[f64],
    cache: &ViewCache,
    layers: &[ConvParams],
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut grads: Vec<(Vec<f64>, Vec<f64>)> = layers
        .iter()
        .map(|l| (vec![0.0; l.weight.len()], vec![0.0; l.cout]))
        .collect();
    let last = cache.stages.len() - 1;
    let n_last = cache.stages[last].out.len() / layers[last].cout;
    // global average pool
    let mut dout: Vec<f64> = (0..layers[last].cout)
        .flat_map(|o| std::iter::repeat_n(dfeat[o] / n_last as f64, n_last))
        .collect();

    for s in (0..=last).rev() {
        let layer = &layers[s];
        let st = &cache.stages[s];
        let n = st.out.len() / layer.cout;
        let rows = layer.cin * TAPS;
        // ReLU
        for (d, &a) in dout.iter_mut().zip(&st.out) {
            if a <= 0.0 {
                *d = 0.0;
            }
        }
        let (dw, db) = &mut grads[s];
        for o in 0..layer.cout {
            let g = &dout[o * n..(o + 1) * n];
            db[o] = g.iter().sum();
            for k in 0..rows {
                let src = &st.col[k * n..(k + 1) * n];
                dw[o * rows + k] = g.iter().zip(src).map(|(a, b)| a * b).sum();
            }
        }
        if s == 0 {
            break;
        }
        let mut dcol = vec![0.0; rows * n];
        for o in 0..layer.cout {
            let g = &dout[o * n..(o + 1) * n];
            if g.iter().all(|&v| v == 0.0) {
                continue;
            }
            for k in 0..rows {
                let wk = layer.weight[o * rows + k];
                if wk == 0.0 {
                    continue;
                }
                let dst = &mut dcol[k * n..(k + 1) * n];
                for (d, gv) in dst.iter_mut().zip(g) {
                    *d += wk * gv;
                }
            }
        }
        dout = col2im(&dcol, layer.cin, st.h_in, st.w_in);
    }
    grads
}

/// Inverted-dropout keep mask (entries 0 or 1/(1−p)) for one sample's
/// V×F feature matrix.
pub(crate) fn feature_dropout_mask(len: usize, p: f64, mode: Mode) -> Option<Vec<f64>> {
    match mode {
        Mode::Train {
            seed,
            sample_index,
            epoch,
        } if p > 0.0 => {
            let mut rng = stream_rng(seed, Stream::Dropout, sample_index, epoch);
            let keep = 1.0 / (1.0 - p);
            Some(
                (0..len)
                    .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
                    .collect(),
            )
        }
        _ => None,
    }
}

pub(crate) fn check_input(images: &ViewStack, cfg: &EncoderConfig) -> Result<()> {
    if images.channels() != cfg.in_channels {
        return Err(Error::Shape(format!(
            "images have {} channels, encoder expects {}",
            images.channels(),
            cfg.in_channels
        )));
    }
    if images.size() < 16 {
        return Err(Error::Shape(format!(
            "image size {} below 16",
            images.size()
        )));
    }
    Ok(())
}

/// Runs the shared encoder over every view. Returns the V×F feature matrix
/// (row-major), with internal dropout applied in train mode.
pub fn encoder_forward(
    images: &ViewStack,
    cfg: &EncoderConfig,
    params: &ParameterStore,
    mode: Mode,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    check_input(images, cfg)?;
    let layers = conv_params(cfg, params)?;
    let rows: Vec<Vec<f64>> = (0..images.views())
        .into_par_iter()
        .map(|v| encode_view(images.view(v), images.size(), &layers, false).0)
        .collect();
    let mut features: Vec<f64> = rows.concat();
    if let Some(mask) = feature_dropout_mask(features.len(), cfg.internal_dropout_p, mode) {
        features.iter_mut().zip(&mask).for_each(|(f, m)| *f *= m);
    }
    Ok(features)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct 7-loop convolution used to check the im2col path.
    fn naive_conv(input: &[f64], cin: usize, h: usize, w: usize, layer: &ConvParams) -> Vec<f64> {
        let (ho, wo) = (conv_out_size(h), conv_out_size(w));
        let mut out = vec![0.0; layer.cout * ho * wo];
        for o in 0..layer.cout {
            for y in 0..ho {
                for x in 0..wo {
                    let mut acc = layer.bias[o];
                    for i in 0..cin {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let iy = 2 * y as isize + ky as isize - 1;
                                let ix = 2 * x as isize + kx as isize - 1;
                                if iy >= 0 && iy < h as isize && ix >= 0 && ix < w as isize {
                                    acc += layer.weight[((o * cin + i) * 3 + ky) * 3 + kx]
                                        * input[(i * h + iy as usize) * w + ix as usize];
                                }
                            }
                        }
                    }
                    out[(o * ho + y) * wo + x] = acc.max(0.0);
                }
            }
        }
        out
    }

    #[test]
    fn im2col_conv_matches_naive() {
        let (cin, cout, h) = (2, 3, 7);
        let input: Vec<f64> = (0..cin * h * h)
            .map(|i| ((i * 37) % 11) as f64 / 5.0 - 1.0)
            .collect();
        let weight: Vec<f64> = (0..cout * cin * 9)
            .map(|i| ((i * 13) % 7) as f64 / 7.0 - 0.5)
            .collect();
        let bias = vec![0.1, -0.2, 0.05];
        let layer = ConvParams {
            weight: &weight,
            bias: &bias,
            cin,
            cout,
        };
        let (col, ho, wo) = im2col(&input, cin, h, h);
        assert_eq!((ho, wo), (4, 4));
        let fast = conv_relu(&layer, &col, ho * wo);
        let slow = naive_conv(&input, cin, h, h, &layer);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        // <im2col(x), y> == <x, col2im(y)>
        let (cin, h) = (2, 6);
        let x: Vec<f64> = (0..cin * h * h).map(|i| (i as f64 * 0.37).sin()).collect();
        let (col, ho, wo) = im2col(&x, cin, h, h);
        let y: Vec<f64> = (0..cin * 9 * ho * wo)
            .map(|i| (i as f64 * 0.11).cos())
            .collect();
        let lhs: f64 = col.iter().zip(&y).map(|(a, b)| a * b).sum();
        let back = col2im(&y, cin, h, h);
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn output_sizes() {
        assert_eq!(conv_out_size(224), 112);
        assert_eq!(conv_out_size(64), 32);
        assert_eq!(conv_out_size(7), 4);
        assert_eq!(conv_out_size(1), 1);
    }
}

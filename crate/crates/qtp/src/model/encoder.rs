//! Transformer encoder blocks with hand-written backward passes.
//!
//! Shapes follow one convention throughout: activations are L×d (sequence
//! length by embedding width), attention projections are d×(d/h) per
//! head, and biases are stored 1×n and broadcast over rows.

use ndarray::{concatenate, Array1, Array2, Axis};

use super::{BlockParams, ModelConfig, ModelParams};
use crate::error::ModelError;

/// Variance floor inside layer normalization.
pub const LN_EPS: f64 = 1e-9;

fn shape_err(op: &str, detail: String) -> ModelError {
    ModelError::ShapeMismatch {
        op: op.to_string(),
        detail,
    }
}

/// Row-wise softmax with max subtraction. Entries of −∞ come out as
/// exactly 0, which is how vocabulary masking is realized.
pub fn softmax_rows(m: &Array2<f64>) -> Array2<f64> {
    let mut out = m.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: f64 = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Backward through a row-wise softmax: given dL/dA and A, return dL/dS.
fn softmax_rows_backward(da: &Array2<f64>, a: &Array2<f64>) -> Array2<f64> {
    let mut ds = Array2::zeros(a.raw_dim());
    for ((mut ds_row, da_row), a_row) in ds
        .rows_mut()
        .into_iter()
        .zip(da.rows())
        .zip(a.rows())
    {
        let dot: f64 = da_row.iter().zip(a_row.iter()).map(|(x, y)| x * y).sum();
        for ((d, &g), &p) in ds_row.iter_mut().zip(da_row.iter()).zip(a_row.iter()) {
            *d = (g - dot) * p;
        }
    }
    ds
}

pub(crate) struct LayerNormCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

/// Row-wise layer norm: normalize each row to mean 0, variance 1, then
/// apply the learned gain and bias.
pub fn layer_norm(x: &Array2<f64>, gain: &Array2<f64>, bias: &Array2<f64>) -> Array2<f64> {
    layer_norm_cached(x, gain, bias).0
}

pub(crate) fn layer_norm_cached(
    x: &Array2<f64>,
    gain: &Array2<f64>,
    bias: &Array2<f64>,
) -> (Array2<f64>, LayerNormCache) {
    let d = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut inv_std = Array1::zeros(x.nrows());
    for (mut row, s) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
        let mean = row.sum() / d;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|v| v * v).sum::<f64>() / d;
        *s = 1.0 / (var + LN_EPS).sqrt();
        let scale = *s;
        row.mapv_inplace(|v| v * scale);
    }
    let mut out = xhat.clone();
    out *= &gain.broadcast(out.raw_dim()).unwrap();
    out += &bias.broadcast(out.raw_dim()).unwrap();
    (out, LayerNormCache { xhat, inv_std })
}

/// Backward through layer norm. Returns dx and accumulates the gain and
/// bias gradients.
fn layer_norm_backward(
    dy: &Array2<f64>,
    cache: &LayerNormCache,
    gain: &Array2<f64>,
    dgain: &mut Array2<f64>,
    dbias: &mut Array2<f64>,
) -> Array2<f64> {
    let d = dy.ncols() as f64;
    *dgain += &(dy * &cache.xhat)
        .sum_axis(Axis(0))
        .insert_axis(Axis(0));
    *dbias += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));

    let dxhat = dy * &gain.broadcast(dy.raw_dim()).unwrap();
    let mut dx = Array2::zeros(dy.raw_dim());
    for (((mut dx_row, dxhat_row), xhat_row), &inv_std) in dx
        .rows_mut()
        .into_iter()
        .zip(dxhat.rows())
        .zip(cache.xhat.rows())
        .zip(cache.inv_std.iter())
    {
        let mean_dxhat = dxhat_row.sum() / d;
        let mean_dxhat_xhat = dxhat_row
            .iter()
            .zip(xhat_row.iter())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / d;
        for ((out, &g), &xh) in dx_row
            .iter_mut()
            .zip(dxhat_row.iter())
            .zip(xhat_row.iter())
        {
            *out = inv_std * (g - mean_dxhat - xh * mean_dxhat_xhat);
        }
    }
    dx
}

/// One attention head: softmax((XWq)(XWk)ᵀ / √head_dim) · XWv.
pub fn attention_head(
    x: &Array2<f64>,
    wq: &Array2<f64>,
    wk: &Array2<f64>,
    wv: &Array2<f64>,
) -> Result<Array2<f64>, ModelError> {
    let d = x.ncols();
    for (name, w) in [("wq", wq), ("wk", wk), ("wv", wv)] {
        if w.nrows() != d {
            return Err(shape_err(
                "attention_head",
                format!("{name} has {} rows, input width is {d}", w.nrows()),
            ));
        }
    }
    if wq.ncols() != wk.ncols() {
        return Err(shape_err(
            "attention_head",
            "query and key widths differ".into(),
        ));
    }
    Ok(head_forward(x, wq, wk, wv).output)
}

struct HeadCache {
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    attn: Array2<f64>,
    output: Array2<f64>,
}

fn head_forward(
    x: &Array2<f64>,
    wq: &Array2<f64>,
    wk: &Array2<f64>,
    wv: &Array2<f64>,
) -> HeadCache {
    let scale = 1.0 / (wq.ncols() as f64).sqrt();
    let q = x.dot(wq);
    let k = x.dot(wk);
    let v = x.dot(wv);
    let scores = q.dot(&k.t()).mapv(|s| s * scale);
    let attn = softmax_rows(&scores);
    let output = attn.dot(&v);
    HeadCache {
        q,
        k,
        v,
        attn,
        output,
    }
}

/// Backward through one head. Accumulates weight gradients and returns
/// this head's contribution to dX.
#[allow(clippy::too_many_arguments)]
fn head_backward(
    dout: &Array2<f64>,
    x: &Array2<f64>,
    cache: &HeadCache,
    wq: &Array2<f64>,
    wk: &Array2<f64>,
    wv: &Array2<f64>,
    dwq: &mut Array2<f64>,
    dwk: &mut Array2<f64>,
    dwv: &mut Array2<f64>,
) -> Array2<f64> {
    let scale = 1.0 / (wq.ncols() as f64).sqrt();
    let dv = cache.attn.t().dot(dout);
    let dattn = dout.dot(&cache.v.t());
    let dscores = softmax_rows_backward(&dattn, &cache.attn).mapv(|v| v * scale);
    let dq = dscores.dot(&cache.k);
    let dk = dscores.t().dot(&cache.q);
    *dwq += &x.t().dot(&dq);
    *dwk += &x.t().dot(&dk);
    *dwv += &x.t().dot(&dv);
    dq.dot(&wq.t()) + dk.dot(&wk.t()) + dv.dot(&wv.t())
}

/// Multi-head attention: per-head outputs concatenated and projected back
/// to the embedding width.
pub fn multi_head(
    x: &Array2<f64>,
    attn_q: &[Array2<f64>],
    attn_k: &[Array2<f64>],
    attn_v: &[Array2<f64>],
    attn_out: &Array2<f64>,
) -> Result<Array2<f64>, ModelError> {
    if attn_q.len() != attn_k.len() || attn_q.len() != attn_v.len() || attn_q.is_empty() {
        return Err(shape_err("multi_head", "head count mismatch".into()));
    }
    let per_head: usize = attn_q.iter().map(|w| w.ncols()).sum();
    if attn_out.nrows() != per_head || attn_out.ncols() != x.ncols() {
        return Err(shape_err(
            "multi_head",
            format!(
                "output projection is {}×{}, expected {}×{}",
                attn_out.nrows(),
                attn_out.ncols(),
                per_head,
                x.ncols()
            ),
        ));
    }
    let heads = attn_q
        .iter()
        .zip(attn_k)
        .zip(attn_v)
        .map(|((wq, wk), wv)| {
            attention_head(x, wq, wk, wv)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let views: Vec<_> = heads.iter().map(|h| h.view()).collect();
    let concat = concatenate(Axis(1), &views).expect("head outputs share row count");
    Ok(concat.dot(attn_out))
}

pub(crate) struct BlockCache {
    x_in: Array2<f64>,
    heads: Vec<HeadCache>,
    concat: Array2<f64>,
    ln1: LayerNormCache,
    y1: Array2<f64>,
    ffn_pre: Array2<f64>,
    ffn_act: Array2<f64>,
    ln2: LayerNormCache,
}

fn block_forward(x: &Array2<f64>, p: &BlockParams) -> (Array2<f64>, BlockCache) {
    let heads: Vec<HeadCache> = p
        .attn_q
        .iter()
        .zip(&p.attn_k)
        .zip(&p.attn_v)
        .map(|((wq, wk), wv)| head_forward(x, wq, wk, wv))
        .collect();
    let views: Vec<_> = heads.iter().map(|h| h.output.view()).collect();
    let concat = concatenate(Axis(1), &views).expect("head outputs share row count");
    let mh = concat.dot(&p.attn_out);
    let r1 = x + &mh;
    let (y1, ln1) = layer_norm_cached(&r1, &p.ln1_gain, &p.ln1_bias);

    let mut ffn_pre = y1.dot(&p.ffn_w1);
    ffn_pre += &p.ffn_b1.broadcast(ffn_pre.raw_dim()).unwrap();
    let ffn_act = ffn_pre.mapv(|v| v.max(0.0));
    let mut ffn_out = ffn_act.dot(&p.ffn_w2);
    ffn_out += &p.ffn_b2.broadcast(ffn_out.raw_dim()).unwrap();
    let r2 = &y1 + &ffn_out;
    let (y2, ln2) = layer_norm_cached(&r2, &p.ln2_gain, &p.ln2_bias);

    (
        y2,
        BlockCache {
            x_in: x.clone(),
            heads,
            concat,
            ln1,
            y1,
            ffn_pre,
            ffn_act,
            ln2,
        },
    )
}

fn block_backward(
    dy2: &Array2<f64>,
    cache: &BlockCache,
    p: &BlockParams,
    g: &mut BlockParams,
) -> Array2<f64> {
    // second residual + layer norm
    let dr2 = layer_norm_backward(dy2, &cache.ln2, &p.ln2_gain, &mut g.ln2_gain, &mut g.ln2_bias);

    // feed-forward
    let dffn_out = &dr2;
    g.ffn_b2 += &dffn_out.sum_axis(Axis(0)).insert_axis(Axis(0));
    g.ffn_w2 += &cache.ffn_act.t().dot(dffn_out);
    let dact = dffn_out.dot(&p.ffn_w2.t());
    let dpre = ndarray::Zip::from(&dact)
        .and(&cache.ffn_pre)
        .map_collect(|&da, &pre| if pre > 0.0 { da } else { 0.0 });
    g.ffn_b1 += &dpre.sum_axis(Axis(0)).insert_axis(Axis(0));
    g.ffn_w1 += &cache.y1.t().dot(&dpre);

    // first residual + layer norm; y1 feeds both the FFN and the residual
    let dy1 = &dr2 + &dpre.dot(&p.ffn_w1.t());
    let dr1 = layer_norm_backward(&dy1, &cache.ln1, &p.ln1_gain, &mut g.ln1_gain, &mut g.ln1_bias);

    // multi-head projection
    g.attn_out += &cache.concat.t().dot(&dr1);
    let dconcat = dr1.dot(&p.attn_out.t());

    // split the concatenated gradient per head and run head backward
    let mut dx = dr1.clone();
    let mut col = 0;
    for (h, head) in cache.heads.iter().enumerate() {
        let width = head.output.ncols();
        let dout = dconcat.slice(ndarray::s![.., col..col + width]).to_owned();
        col += width;
        dx += &head_backward(
            &dout,
            &cache.x_in,
            head,
            &p.attn_q[h],
            &p.attn_k[h],
            &p.attn_v[h],
            &mut g.attn_q[h],
            &mut g.attn_k[h],
            &mut g.attn_v[h],
        );
    }
    dx
}

/// One encoder block as a pure function (residual + norm around the
/// attention sublayer, then around the feed-forward sublayer).
pub fn encoder_block(x: &Array2<f64>, p: &BlockParams) -> Result<Array2<f64>, ModelError> {
    multi_head(x, &p.attn_q, &p.attn_k, &p.attn_v, &p.attn_out)?;
    Ok(block_forward(x, p).0)
}

/// Intermediate activations kept for the backward pass.
pub struct EncoderCache {
    blocks: Vec<BlockCache>,
}

/// Run the block stack over input embeddings.
pub fn encoder_forward(
    x0: &Array2<f64>,
    params: &ModelParams,
    config: &ModelConfig,
) -> Result<(Array2<f64>, EncoderCache), ModelError> {
    if x0.ncols() != config.d_model {
        return Err(shape_err(
            "encoder_forward",
            format!("input width {} != d_model {}", x0.ncols(), config.d_model),
        ));
    }
    let mut x = x0.clone();
    let mut blocks = Vec::with_capacity(params.blocks.len());
    for p in &params.blocks {
        let (y, cache) = block_forward(&x, p);
        blocks.push(cache);
        x = y;
    }
    Ok((x, EncoderCache { blocks }))
}

/// Backward through the block stack; returns the gradient at the input
/// embeddings and accumulates all block-weight gradients.
pub fn encoder_backward(
    dh: &Array2<f64>,
    cache: &EncoderCache,
    params: &ModelParams,
    grads: &mut ModelParams,
) -> Array2<f64> {
    let mut d = dh.clone();
    for ((bc, bp), bg) in cache
        .blocks
        .iter()
        .zip(&params.blocks)
        .zip(&mut grads.blocks)
        .rev()
    {
        d = block_backward(&d, bc, bp, bg);
    }
    d
}

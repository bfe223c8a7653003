use ndarray::{Array2, ArrayView2, Axis};

use crate::{Error, Result};

/// Loss value with gradients with respect to both embedding matrices.
#[derive(Debug, Clone)]
pub struct SymmetricLoss {
    pub loss: f64,
    pub grad_image: Array2<f64>,
    pub grad_text: Array2<f64>,
}

fn log_softmax_rows(a: &Array2<f64>) -> Array2<f64> {
    let mut out = a.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

/// Softmax backward pass: gradient with respect to the logits of `probs`
/// given the gradient `g` with respect to `probs`.
fn softmax_rows_backward(probs: &Array2<f64>, g: &Array2<f64>) -> Array2<f64> {
    let dots = (probs * g).sum_axis(Axis(1)).insert_axis(Axis(1));
    probs * &(g - &dots)
}

fn check(image: &ArrayView2<f64>, text: &ArrayView2<f64>) -> Result<()> {
    if image.nrows() == 0 {
        return Err(Error::Empty("embedding batch"));
    }
    if image.nrows() != text.nrows() {
        return Err(Error::Dimension {
            context: "batch size",
            expected: image.nrows(),
            found: text.nrows(),
        });
    }
    if image.ncols() != text.ncols() {
        return Err(Error::Dimension {
            context: "embedding width",
            expected: image.ncols(),
            found: text.ncols(),
        });
    }
    if image.iter().chain(text.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("embeddings".into()));
    }
    Ok(())
}

/// Symmetric contrastive loss over a batch of `m` matched image/text rows.
///
/// The targets are the row softmax of the mean self-similarity
/// `(I·Iᵀ + T·Tᵀ) / 2`; the text loss is the mean row cross-entropy of
/// `softmax(T·Iᵀ)` against them and the image loss is the same on the
/// transposed matrices. The result is the mean of the two.
pub fn symmetric_loss(image: ArrayView2<f64>, text: ArrayView2<f64>) -> Result<f64> {
    Ok(forward(image, text)?.loss)
}

struct Forward {
    loss: f64,
    y: Array2<f64>,
    y_t: Array2<f64>,
    log_p: Array2<f64>,
    log_q: Array2<f64>,
}

fn forward(image: ArrayView2<f64>, text: ArrayView2<f64>) -> Result<Forward> {
    check(&image, &text)?;
    let m = image.nrows() as f64;
    let logits = text.dot(&image.t());
    let sim = (image.dot(&image.t()) + text.dot(&text.t())) / 2.0;
    let y = log_softmax_rows(&sim).mapv(f64::exp);
    let y_t = log_softmax_rows(&sim.t().to_owned()).mapv(f64::exp);
    let log_p = log_softmax_rows(&logits);
    let log_q = log_softmax_rows(&logits.t().to_owned());
    let text_loss = -(&y * &log_p).sum() / m;
    let image_loss = -(&y_t * &log_q).sum() / m;
    let loss = (image_loss + text_loss) / 2.0;
    if !loss.is_finite() {
        return Err(Error::NonFinite("symmetric loss".into()));
    }
    Ok(Forward {
        loss,
        y,
        y_t,
        log_p,
        log_q,
    })
}

/// [`symmetric_loss`] together with its exact gradient. Gradients flow
/// through the logits and through the similarity-derived targets.
pub fn symmetric_loss_grad(image: ArrayView2<f64>, text: ArrayView2<f64>) -> Result<SymmetricLoss> {
    let f = forward(image, text)?;
    let scale = 0.5 / image.nrows() as f64;
    let p = f.log_p.mapv(f64::exp);
    let q = f.log_q.mapv(f64::exp);

    let g_logits = ((&p - &f.y) + (&q - &f.y_t).t()) * scale;
    let g_y = &f.log_p * -scale;
    let g_yt = &f.log_q * -scale;
    let g_sim = softmax_rows_backward(&f.y, &g_y) + softmax_rows_backward(&f.y_t, &g_yt).t();
    let g_sim_sym = (&g_sim + &g_sim.t()) * 0.5;

    let grad_image = g_sim_sym.dot(&image) + g_logits.t().dot(&text);
    let grad_text = g_sim_sym.dot(&text) + g_logits.dot(&image);
    Ok(SymmetricLoss {
        loss: f.loss,
        grad_image,
        grad_text,
    })
}

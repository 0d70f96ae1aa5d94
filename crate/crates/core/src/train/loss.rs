//! Regularized BPR loss and its exact gradient through every layer.

use super::Triple;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::model::{ForwardTrace, ModelParams, Side, SpectralContext};
use crate::scalar::{sigmoid, softplus, Scalar};

/// Same shapes as the parameters.
pub type Gradients<T> = ModelParams<T>;

fn distinct(mut v: Vec<u32>) -> Vec<u32> {
    v.sort_unstable();
    v.dedup();
    v
}

/// `Σ softplus(−x_u·(y_i − y_j)) + (η/2)(Σ‖x_u‖² + Σ‖y_i‖²)`, the penalty
/// running over the distinct users and positive items of the batch.
pub fn bpr_loss<T: Scalar>(trace: &ForwardTrace<T>, batch: &[Triple], eta: T) -> Result<T> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let mut data = T::zero();
    for t in batch {
        let x = trace.users.row(t.u as usize);
        let margin = dot(x, trace.items.row(t.i as usize)) - dot(x, trace.items.row(t.j as usize));
        data += softplus(-margin);
    }
    let mut reg = T::zero();
    for u in distinct(batch.iter().map(|t| t.u).collect()) {
        let x = trace.users.row(u as usize);
        reg += dot(x, x);
    }
    for i in distinct(batch.iter().map(|t| t.i).collect()) {
        let y = trace.items.row(i as usize);
        reg += dot(y, y);
    }
    let loss = data + eta * T::of(0.5) * reg;
    if !loss.is_finite() {
        return Err(Error::NonFinite("batch loss".into()));
    }
    Ok(loss)
}

/// Gradient of the loss with respect to the concatenated embeddings,
/// stacked users over items.
pub fn embedding_gradient<T: Scalar>(trace: &ForwardTrace<T>, batch: &[Triple], eta: T) -> Matrix<T> {
    let m = trace.users.rows();
    let d = trace.users.cols();
    let mut g = Matrix::zeros(m + trace.items.rows(), d);
    for t in batch {
        let (u, i, j) = (t.u as usize, t.i as usize, t.j as usize);
        let x = trace.users.row(u).to_vec();
        let yi = trace.items.row(i).to_vec();
        let yj = trace.items.row(j).to_vec();
        let margin = dot(&x, &yi) - dot(&x, &yj);
        let c = -sigmoid(-margin);
        for ((gx, &a), &b) in g.row_mut(u).iter_mut().zip(&yi).zip(&yj) {
            *gx += c * (a - b);
        }
        for (gy, &a) in g.row_mut(m + i).iter_mut().zip(&x) {
            *gy += c * a;
        }
        for (gy, &a) in g.row_mut(m + j).iter_mut().zip(&x) {
            *gy -= c * a;
        }
    }
    for u in distinct(batch.iter().map(|t| t.u).collect()) {
        let x = trace.users.row(u as usize).to_vec();
        for (gx, a) in g.row_mut(u as usize).iter_mut().zip(x) {
            *gx += eta * a;
        }
    }
    for i in distinct(batch.iter().map(|t| t.i).collect()) {
        let y = trace.items.row(i as usize).to_vec();
        for (gy, a) in g.row_mut(m + i as usize).iter_mut().zip(y) {
            *gy += eta * a;
        }
    }
    g
}

/// Reverse-mode gradient of [`bpr_loss`] for every parameter tensor.
pub fn backward<T: Scalar>(
    trace: &ForwardTrace<T>,
    batch: &[Triple],
    params: &ModelParams<T>,
    ctx: &SpectralContext<T>,
    eta: T,
) -> Result<Gradients<T>> {
    let p = params.width();
    let layers = params.layers();
    let de = embedding_gradient(trace, batch, eta);
    let mut grads = params.zeros_like();
    let mut dz = de.col_block(layers * p, (layers + 1) * p);
    for l in (0..layers).rev() {
        let lt = &trace.layers[l];
        let mut dpre = dz;
        for (g, &a) in dpre.as_mut_slice().iter_mut().zip(lt.output.as_slice()) {
            *g *= a * (T::one() - a);
        }
        let dcoeff = ctx.analyze(&dpre, Side::Left)?;
        let scale = ctx.scale();
        let g_t = &ctx.filter.response;
        let mut diag = Vec::with_capacity(ctx.q());
        for q in 0..ctx.q() {
            let ddiag = dot(dcoeff.row(q), lt.coeff.row(q));
            let h = lt.h[q];
            grads.theta[l][q] = ddiag * scale[q] * h * (T::one() - h) * g_t[q];
            diag.push(scale[q] * h);
        }
        let mut dc = dcoeff;
        dc.scale_rows(&diag);
        let db = ctx.synthesize(&dc, Side::Right)?;
        grads.w[l] = trace.activation(l).tr_matmul(&db)?;
        dz = db.matmul_tr(&params.w[l])?;
        dz.axpy(T::one(), &de.col_block(l * p, (l + 1) * p));
    }
    let m = params.num_users();
    grads.x0 = dz.row_block(0, m);
    grads.y0 = dz.row_block(m, dz.rows());
    for (name, t) in grads.tensor_names().into_iter().zip(grads.tensors()) {
        if let Some(pos) = t.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of {name} at entry {pos}")));
        }
    }
    Ok(grads)
}

//! Batched forward and reverse-mode passes over all N x N candidate edges.
//!
//! Edge `(i, j)` (node `i` placed in `j`) lives in row `i * N + j` of every
//! per-edge matrix. The four neighbour categories of an edge reduce to
//! per-node sums: edges sharing the origin `i` are the out-edges of `i`,
//! edges sharing the destination `j` are the in-edges of `j`, edges leaving
//! the destination are the out-edges of `j`, and edges entering the origin
//! are the in-edges of `i`. Each first-layer input block can therefore be
//! split into a per-edge product plus origin- and destination-indexed terms.
//!
//! All per-edge buffers live in [`Tape`] and [`Scratch`] and are reused
//! between calls.

use std::ops::Range;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayBase, ArrayView2, Axis, Data, Ix2};

use super::params::{ModelParams, Weights};
use super::ModelConfig;

/// Row offsets of the first-layer input blocks.
#[derive(Copy, Clone)]
struct Layout {
    d: usize,
    tw: usize,
}

impl Layout {
    fn own(&self) -> Range<usize> {
        0..self.d
    }
    fn share_origin(&self) -> Range<usize> {
        self.d..2 * self.d
    }
    fn share_dest(&self) -> Range<usize> {
        2 * self.d..3 * self.d
    }
    fn from_dest(&self) -> Range<usize> {
        3 * self.d..4 * self.d
    }
    fn to_origin(&self) -> Range<usize> {
        4 * self.d..5 * self.d
    }
    fn time(&self) -> Range<usize> {
        5 * self.d..5 * self.d + self.tw
    }
    /// Round-two category `k` (same order as round one) in the output layer.
    fn second(&self, k: usize) -> Range<usize> {
        let base = 5 * self.d + self.tw + k * self.d;
        base..base + self.d
    }
}

fn rows(w: &Array2<f64>, r: Range<usize>) -> ArrayView2<'_, f64> {
    w.slice(s![r, ..])
}

/// Matrix product with a row-major result.
trait MatMul {
    fn mm<S: Data<Elem = f64>>(&self, rhs: &ArrayBase<S, Ix2>) -> Array2<f64>;
}

impl<T: Data<Elem = f64>> MatMul for ArrayBase<T, Ix2> {
    fn mm<S: Data<Elem = f64>>(&self, rhs: &ArrayBase<S, Ix2>) -> Array2<f64> {
        let mut out = Array2::zeros((self.nrows(), rhs.ncols()));
        general_mat_mul(1.0, self, rhs, 0.0, &mut out);
        out
    }
}

/// Activations of one forward pass.
pub(crate) struct Tape {
    n: usize,
    pub adj: Array2<f64>,
    pub time: Array2<f64>,
    h: Array2<f64>,
    pub lat: Array2<f64>,
    pub out1: Array2<f64>,
    pub in1: Array2<f64>,
    learned_attention: bool,
    z: Array2<f64>,
    pub att: Array1<f64>,
    pub out2: Array2<f64>,
    pub in2: Array2<f64>,
    y: Array2<f64>,
    pub logits: Array2<f64>,
}

impl Tape {
    pub fn new(n: usize, cfg: &ModelConfig) -> Self {
        let e = n * n;
        let (hd, d) = (cfg.hidden_size, cfg.latent_edge_dim);
        Tape {
            n,
            adj: Array2::zeros((n, n)),
            time: Array2::zeros((1, cfg.time_encoding.width())),
            h: Array2::zeros((e, hd)),
            lat: Array2::zeros((e, d)),
            out1: Array2::zeros((n, d)),
            in1: Array2::zeros((n, d)),
            learned_attention: false,
            z: Array2::zeros((e, hd)),
            att: Array1::zeros(e),
            out2: Array2::zeros((n, d)),
            in2: Array2::zeros((n, d)),
            y: Array2::zeros((e, hd)),
            logits: Array2::zeros((n, n)),
        }
    }
}

/// Backward-pass buffers and the resulting gradients.
pub(crate) struct Scratch {
    pub grads: Weights,
    dy: Array2<f64>,
    dz: Array2<f64>,
    dh: Array2<f64>,
    dlat: Array2<f64>,
    datt: Vec<f64>,
}

impl Scratch {
    pub fn new(n: usize, cfg: &ModelConfig) -> Self {
        let e = n * n;
        let (hd, d) = (cfg.hidden_size, cfg.latent_edge_dim);
        Scratch {
            grads: Weights::zeros(n, cfg),
            dy: Array2::zeros((e, hd)),
            dz: Array2::zeros((e, hd)),
            dh: Array2::zeros((e, hd)),
            dlat: Array2::zeros((e, d)),
            datt: vec![0.0; e],
        }
    }
}

fn slice(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("row-major buffer")
}

fn slice_mut(a: &mut Array2<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("row-major buffer")
}

/// `(Σ_j w_ij x_ij, Σ_i w_ij x_ij)`: weighted out- and in-sums per node.
fn node_sums(weights: &[f64], x: &Array2<f64>, n: usize, out: &mut Array2<f64>, inn: &mut Array2<f64>) {
    let d = x.ncols();
    let xs = slice(x);
    out.fill(0.0);
    inn.fill(0.0);
    let o = slice_mut(out);
    let inp = slice_mut(inn);
    for i in 0..n {
        let oi = &mut o[i * d..(i + 1) * d];
        for j in 0..n {
            let e = i * n + j;
            let w = weights[e];
            if w == 0.0 {
                continue;
            }
            let row = &xs[e * d..(e + 1) * d];
            let ij = &mut inp[j * d..(j + 1) * d];
            for k in 0..d {
                oi[k] += w * row[k];
                ij[k] += w * row[k];
            }
        }
    }
}

/// `x[(i, j)] = relu(x[(i, j)] + origin[i] + dest[j] + c)`.
fn add_terms_relu(x: &mut Array2<f64>, origin: &Array2<f64>, dest: &Array2<f64>, c: &Array2<f64>, n: usize) {
    let h = x.ncols();
    let p = slice_mut(x);
    let o = slice(origin);
    let d = slice(dest);
    let c = slice(c);
    let mut base = vec![0.0; h];
    for i in 0..n {
        for k in 0..h {
            base[k] = o[i * h + k] + c[k];
        }
        for j in 0..n {
            let dj = &d[j * h..(j + 1) * h];
            let row = &mut p[(i * n + j) * h..(i * n + j + 1) * h];
            for k in 0..h {
                row[k] = (row[k] + base[k] + dj[k]).max(0.0);
            }
        }
    }
}

/// Backward through `score[e] = act[e] . w` with `act = relu(pre)`.
///
/// Writes `g[e, k] = up[e] * w[k]` where `act[e, k] > 0` (else 0) and
/// `wgrad[k] = Σ_e act[e, k] * up[e]`; returns the per-origin and
/// per-destination row sums of `g`.
fn relu_outer_backward(
    up: &[f64],
    w: &[f64],
    act: &Array2<f64>,
    g: &mut Array2<f64>,
    wgrad: &mut Array2<f64>,
    n: usize,
) -> (Array2<f64>, Array2<f64>) {
    let h = act.ncols();
    let a = slice(act);
    let gs = slice_mut(g);
    let wg = slice_mut(wgrad);
    wg.fill(0.0);
    let mut by_origin = Array2::zeros((n, h));
    let mut by_dest = Array2::zeros((n, h));
    {
        let bo = slice_mut(&mut by_origin);
        let bd = slice_mut(&mut by_dest);
        for i in 0..n {
            for j in 0..n {
                let e = i * n + j;
                let u = up[e];
                let ar = &a[e * h..(e + 1) * h];
                let gr = &mut gs[e * h..(e + 1) * h];
                let bo = &mut bo[i * h..(i + 1) * h];
                let bd = &mut bd[j * h..(j + 1) * h];
                for k in 0..h {
                    wg[k] += ar[k] * u;
                    let v = u * w[k] * f64::from(u8::from(ar[k] > 0.0));
                    gr[k] = v;
                    bo[k] += v;
                    bd[k] += v;
                }
            }
        }
    }
    (by_origin, by_dest)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn layer_time(tape: &Tape, w1: &Array2<f64>, b1: &Array2<f64>, lay: Layout) -> Array2<f64> {
    tape.time.mm(&rows(w1, lay.time())) + b1
}

/// Fresh tape for a single pass.
pub(crate) fn forward(params: &ModelParams, adj: &Array2<f64>, time: &[f64], attention_override: Option<f64>) -> Tape {
    let mut tape = Tape::new(params.n_nodes, &params.config);
    forward_into(&mut tape, params, adj, time, attention_override);
    tape
}

/// Runs the network on a (possibly fractional) adjacency matrix.
///
/// `attention_override` pins every off-diagonal attention weight to a
/// constant; the attention MLP is then skipped. Diagonal candidate edges
/// (a node inside itself) never carry attention.
pub(crate) fn forward_into(
    tape: &mut Tape,
    params: &ModelParams,
    adj: &Array2<f64>,
    time: &[f64],
    attention_override: Option<f64>,
) {
    let cfg = &params.config;
    let w = &params.weights;
    let n = params.n_nodes;
    let hd = cfg.hidden_size;
    let lay = Layout {
        d: cfg.latent_edge_dim,
        tw: time.len(),
    };
    tape.adj.assign(adj);
    tape.time.row_mut(0).assign(&ndarray::ArrayView1::from(time));

    // Edge latents from [onehot(i), onehot(j), exists(i, j)].
    {
        let adj_s = slice(&tape.adj);
        let w1 = slice(&w.edge_w1);
        let b1 = slice(&w.edge_b1);
        let exist = &w1[2 * n * hd..(2 * n + 1) * hd];
        let hs = slice_mut(&mut tape.h);
        let mut base = vec![0.0; hd];
        for i in 0..n {
            for k in 0..hd {
                base[k] = w1[i * hd + k] + b1[k];
            }
            for j in 0..n {
                let wj = &w1[(n + j) * hd..(n + j + 1) * hd];
                let a = adj_s[i * n + j];
                let row = &mut hs[(i * n + j) * hd..(i * n + j + 1) * hd];
                for k in 0..hd {
                    row[k] = (base[k] + wj[k] + a * exist[k]).max(0.0);
                }
            }
        }
    }
    general_mat_mul(1.0, &tape.h, &w.edge_w2, 0.0, &mut tape.lat);
    tape.lat += &w.edge_b2;

    // Round one: sums over the input topology.
    node_sums(slice(&tape.adj), &tape.lat, n, &mut tape.out1, &mut tape.in1);

    match (attention_override, cfg.attention_enabled) {
        (Some(value), _) => {
            tape.learned_attention = false;
            tape.att.fill(value);
        }
        (None, false) => {
            tape.learned_attention = false;
            tape.att.fill(1.0);
        }
        (None, true) => {
            tape.learned_attention = true;
            let wa = &w.att_w1;
            general_mat_mul(1.0, &tape.lat, &rows(wa, lay.own()), 0.0, &mut tape.z);
            let origin = tape.out1.mm(&rows(wa, lay.share_origin())) + tape.in1.mm(&rows(wa, lay.to_origin()));
            let dest = tape.in1.mm(&rows(wa, lay.share_dest())) + tape.out1.mm(&rows(wa, lay.from_dest()));
            let c = layer_time(tape, wa, &w.att_b1, lay);
            add_terms_relu(&mut tape.z, &origin, &dest, &c, n);
            let w2 = w.att_w2.column(0);
            let b2 = w.att_b2[[0, 0]];
            for (a, z) in tape.att.iter_mut().zip(tape.z.rows()) {
                *a = sigmoid(z.dot(&w2) + b2);
            }
        }
    }
    for i in 0..n {
        tape.att[i * n + i] = 0.0;
    }

    // Round two: attention-weighted sums over the complete topology.
    node_sums(tape.att.as_slice().unwrap(), &tape.lat, n, &mut tape.out2, &mut tape.in2);

    let wo = &w.out_w1;
    general_mat_mul(1.0, &tape.lat, &rows(wo, lay.own()), 0.0, &mut tape.y);
    let origin = tape.out1.mm(&rows(wo, lay.share_origin()))
        + tape.in1.mm(&rows(wo, lay.to_origin()))
        + tape.out2.mm(&rows(wo, lay.second(0)))
        + tape.in2.mm(&rows(wo, lay.second(3)));
    let dest = tape.in1.mm(&rows(wo, lay.share_dest()))
        + tape.out1.mm(&rows(wo, lay.from_dest()))
        + tape.in2.mm(&rows(wo, lay.second(1)))
        + tape.out2.mm(&rows(wo, lay.second(2)));
    let c = layer_time(tape, wo, &w.out_b1, lay);
    add_terms_relu(&mut tape.y, &origin, &dest, &c, n);
    let w2 = w.out_w2.column(0);
    let b2 = w.out_b2[[0, 0]];
    for (l, y) in tape.logits.iter_mut().zip(tape.y.rows()) {
        *l = y.dot(&w2) + b2;
    }
}

/// Gradients of a scalar objective with respect to every weight, given its
/// gradient with respect to the logits. The result is left in `scratch.grads`.
pub(crate) fn backward_into(params: &ModelParams, tape: &Tape, dlogits: &Array2<f64>, scratch: &mut Scratch) {
    let cfg = &params.config;
    let w = &params.weights;
    let n = tape.n;
    let e = n * n;
    let d = cfg.latent_edge_dim;
    let lay = Layout {
        d,
        tw: tape.time.ncols(),
    };
    let g = &mut scratch.grads;

    // Output MLP.
    let dl = dlogits.as_slice().expect("row-major logits");
    g.out_b2[[0, 0]] = dl.iter().sum();
    let (dr, ds) = relu_outer_backward(dl, slice(&w.out_w2), &tape.y, &mut scratch.dy, &mut g.out_w2, n);
    let dy = &scratch.dy;
    let col = dr.sum_axis(Axis(0)).insert_axis(Axis(0));
    {
        let go = &mut g.out_w1;
        general_mat_mul(1.0, &tape.lat.t(), dy, 0.0, &mut go.slice_mut(s![lay.own(), ..]));
        go.slice_mut(s![lay.share_origin(), ..]).assign(&tape.out1.t().mm(&dr));
        go.slice_mut(s![lay.to_origin(), ..]).assign(&tape.in1.t().mm(&dr));
        go.slice_mut(s![lay.share_dest(), ..]).assign(&tape.in1.t().mm(&ds));
        go.slice_mut(s![lay.from_dest(), ..]).assign(&tape.out1.t().mm(&ds));
        go.slice_mut(s![lay.second(0), ..]).assign(&tape.out2.t().mm(&dr));
        go.slice_mut(s![lay.second(1), ..]).assign(&tape.in2.t().mm(&ds));
        go.slice_mut(s![lay.second(2), ..]).assign(&tape.out2.t().mm(&ds));
        go.slice_mut(s![lay.second(3), ..]).assign(&tape.in2.t().mm(&dr));
        go.slice_mut(s![lay.time(), ..]).assign(&tape.time.t().mm(&col));
    }
    g.out_b1.assign(&col);

    let wo = &w.out_w1;
    general_mat_mul(1.0, dy, &rows(wo, lay.own()).t(), 0.0, &mut scratch.dlat);
    let mut dout1 = dr.mm(&rows(wo, lay.share_origin()).t()) + ds.mm(&rows(wo, lay.from_dest()).t());
    let mut din1 = dr.mm(&rows(wo, lay.to_origin()).t()) + ds.mm(&rows(wo, lay.share_dest()).t());
    let dout2 = dr.mm(&rows(wo, lay.second(0)).t()) + ds.mm(&rows(wo, lay.second(2)).t());
    let din2 = dr.mm(&rows(wo, lay.second(3)).t()) + ds.mm(&rows(wo, lay.second(1)).t());

    // Round two.
    {
        let lat = slice(&tape.lat);
        let att = tape.att.as_slice().unwrap();
        let dls = slice_mut(&mut scratch.dlat);
        let o2 = slice(&dout2);
        let i2 = slice(&din2);
        for i in 0..n {
            for j in 0..n {
                let idx = i * n + j;
                let a = att[idx];
                let mut acc = 0.0;
                for k in 0..d {
                    let gk = o2[i * d + k] + i2[j * d + k];
                    dls[idx * d + k] += a * gk;
                    acc += lat[idx * d + k] * gk;
                }
                scratch.datt[idx] = acc;
            }
        }
    }

    // Attention MLP.
    if tape.learned_attention {
        for idx in 0..e {
            let a = tape.att[idx];
            // The diagonal is pinned to zero and carries no gradient.
            scratch.datt[idx] = if idx / n == idx % n { 0.0 } else { scratch.datt[idx] * a * (1.0 - a) };
        }
        let dscore = &scratch.datt;
        g.att_b2[[0, 0]] = dscore.iter().sum();
        let (dp, dq) = relu_outer_backward(dscore, slice(&w.att_w2), &tape.z, &mut scratch.dz, &mut g.att_w2, n);
        let dz = &scratch.dz;
        let col = dp.sum_axis(Axis(0)).insert_axis(Axis(0));
        {
            let ga = &mut g.att_w1;
            general_mat_mul(1.0, &tape.lat.t(), dz, 0.0, &mut ga.slice_mut(s![lay.own(), ..]));
            ga.slice_mut(s![lay.share_origin(), ..]).assign(&tape.out1.t().mm(&dp));
            ga.slice_mut(s![lay.to_origin(), ..]).assign(&tape.in1.t().mm(&dp));
            ga.slice_mut(s![lay.share_dest(), ..]).assign(&tape.in1.t().mm(&dq));
            ga.slice_mut(s![lay.from_dest(), ..]).assign(&tape.out1.t().mm(&dq));
            ga.slice_mut(s![lay.time(), ..]).assign(&tape.time.t().mm(&col));
        }
        g.att_b1.assign(&col);
        let wa = &w.att_w1;
        general_mat_mul(1.0, dz, &rows(wa, lay.own()).t(), 1.0, &mut scratch.dlat);
        dout1 += &(dp.mm(&rows(wa, lay.share_origin()).t()) + dq.mm(&rows(wa, lay.from_dest()).t()));
        din1 += &(dp.mm(&rows(wa, lay.to_origin()).t()) + dq.mm(&rows(wa, lay.share_dest()).t()));
    } else {
        for t in [&mut g.att_w1, &mut g.att_b1, &mut g.att_w2, &mut g.att_b2] {
            t.fill(0.0);
        }
    }

    // Round one: only existing (or fractionally existing) edges contribute.
    {
        let adj = slice(&tape.adj);
        let dls = slice_mut(&mut scratch.dlat);
        let o1 = slice(&dout1);
        let i1 = slice(&din1);
        for i in 0..n {
            for j in 0..n {
                let idx = i * n + j;
                let a = adj[idx];
                if a == 0.0 {
                    continue;
                }
                for k in 0..d {
                    dls[idx * d + k] += a * (o1[i * d + k] + i1[j * d + k]);
                }
            }
        }
    }

    // Edge MLP.
    let dlat = &scratch.dlat;
    general_mat_mul(1.0, &tape.h.t(), dlat, 0.0, &mut g.edge_w2);
    g.edge_b2.assign(&dlat.sum_axis(Axis(0)).insert_axis(Axis(0)));
    general_mat_mul(1.0, dlat, &w.edge_w2.t(), 0.0, &mut scratch.dh);
    let hd = cfg.hidden_size;
    let adj = slice(&tape.adj);
    let hs = slice(&tape.h);
    let dhs = slice(&scratch.dh);
    let gw1 = slice_mut(&mut g.edge_w1);
    gw1.fill(0.0);
    let (origin_rows, rest) = gw1.split_at_mut(n * hd);
    let (dest_rows, exist) = rest.split_at_mut(n * hd);
    for i in 0..n {
        let gi = &mut origin_rows[i * hd..(i + 1) * hd];
        for j in 0..n {
            let idx = i * n + j;
            let a = adj[idx];
            let hr = &hs[idx * hd..(idx + 1) * hd];
            let dr = &dhs[idx * hd..(idx + 1) * hd];
            let gj = &mut dest_rows[j * hd..(j + 1) * hd];
            for k in 0..hd {
                let v = dr[k] * f64::from(u8::from(hr[k] > 0.0));
                gi[k] += v;
                gj[k] += v;
            }
            if a != 0.0 {
                for k in 0..hd {
                    exist[k] += a * dr[k] * f64::from(u8::from(hr[k] > 0.0));
                }
            }
        }
    }
    let bias = g.edge_w1.slice(s![0..n, ..]).sum_axis(Axis(0));
    g.edge_b1.row_mut(0).assign(&bias);
}

/// Gradients for a single pass.
pub(crate) fn backward(params: &ModelParams, tape: &Tape, dlogits: &Array2<f64>) -> Weights {
    let mut scratch = Scratch::new(params.n_nodes, &params.config);
    backward_into(params, tape, dlogits, &mut scratch);
    scratch.grads
}

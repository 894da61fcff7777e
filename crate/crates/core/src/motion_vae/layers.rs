//! Flat parameter layout plus forward/backward kernels for dense layers and
//! GRU cells. Parameters and gradients share one layout: a single `Vec<T>`
//! addressed through [`Span`]s.

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub offset: usize,
    pub len: usize,
}

impl Span {
    #[inline]
    pub fn of<'a, T>(&self, v: &'a [T]) -> &'a [T] {
        &v[self.offset..self.offset + self.len]
    }

    #[inline]
    pub fn of_mut<'a, T>(&self, v: &'a mut [T]) -> &'a mut [T] {
        &mut v[self.offset..self.offset + self.len]
    }
}

/// Named tensor in the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub span: Span,
}

#[derive(Debug, Default)]
pub(crate) struct LayoutBuilder {
    offset: usize,
    pub tensors: Vec<TensorInfo>,
}

impl LayoutBuilder {
    pub fn tensor(&mut self, name: impl Into<String>, shape: &[usize]) -> Span {
        let len = shape.iter().product();
        let span = Span { offset: self.offset, len };
        self.offset += len;
        self.tensors.push(TensorInfo { name: name.into(), shape: shape.to_vec(), span });
        span
    }

    pub fn dense(&mut self, name: &str, inp: usize, out: usize) -> Dense {
        Dense { w: self.tensor(format!("{name}.weight"), &[out, inp]), b: self.tensor(format!("{name}.bias"), &[out]), inp, out }
    }

    pub fn gru(&mut self, name: &str, inp: usize, hidden: usize) -> Gru {
        Gru {
            w_ih: self.tensor(format!("{name}.weight_ih"), &[3 * hidden, inp]),
            w_hh: self.tensor(format!("{name}.weight_hh"), &[3 * hidden, hidden]),
            b_ih: self.tensor(format!("{name}.bias_ih"), &[3 * hidden]),
            b_hh: self.tensor(format!("{name}.bias_hh"), &[3 * hidden]),
            inp,
            hidden,
        }
    }

    pub fn total(&self) -> usize {
        self.offset
    }
}

/// `y = W x + b`, `W` row-major `[out, inp]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dense {
    pub w: Span,
    pub b: Span,
    pub inp: usize,
    pub out: usize,
}

/// `out += W x` for row-major `W` with `x.len()` columns.
#[inline]
fn matvec_acc<T: Real>(w: &[T], x: &[T], out: &mut [T]) {
    let cols = x.len();
    for (row, o) in w.chunks_exact(cols).zip(out.iter_mut()) {
        let mut acc = T::zero();
        for (a, b) in row.iter().zip(x) {
            acc = acc + *a * *b;
        }
        *o = *o + acc;
    }
}

/// `out += Wᵀ dy`.
#[inline]
fn matvec_t_acc<T: Real>(w: &[T], dy: &[T], out: &mut [T]) {
    let cols = out.len();
    for (row, d) in w.chunks_exact(cols).zip(dy) {
        if *d == T::zero() {
            continue;
        }
        for (o, a) in out.iter_mut().zip(row) {
            *o = *o + *a * *d;
        }
    }
}

/// `gw += dy xᵀ`.
#[inline]
fn outer_acc<T: Real>(gw: &mut [T], dy: &[T], x: &[T]) {
    let cols = x.len();
    for (row, d) in gw.chunks_exact_mut(cols).zip(dy) {
        if *d == T::zero() {
            continue;
        }
        for (g, xv) in row.iter_mut().zip(x) {
            *g = *g + *d * *xv;
        }
    }
}

#[inline]
fn add_into<T: Real>(dst: &mut [T], src: &[T]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d = *d + *s;
    }
}

impl Dense {
    pub fn forward<T: Real>(&self, p: &[T], x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.inp);
        let mut y = self.b.of(p).to_vec();
        matvec_acc(self.w.of(p), x, &mut y);
        y
    }

    /// Accumulates parameter gradients and, when `dx` is given, adds `Wᵀ dy` to it.
    pub fn backward<T: Real>(&self, p: &[T], grad: &mut [T], x: &[T], dy: &[T], dx: Option<&mut [T]>) {
        outer_acc(self.w.of_mut(grad), dy, x);
        add_into(self.b.of_mut(grad), dy);
        if let Some(dx) = dx {
            matvec_t_acc(self.w.of(p), dy, dx);
        }
    }
}

/// Gated recurrent unit, gate order (reset, update, candidate):
///
/// ```text
/// r  = σ(W_ir x + b_ir + W_hr h + b_hr)
/// u  = σ(W_iu x + b_iu + W_hu h + b_hu)
/// n  = tanh(W_in x + b_in + r ⊙ (W_hn h + b_hn))
/// h' = (1 - u) ⊙ n + u ⊙ h
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gru {
    pub w_ih: Span,
    pub w_hh: Span,
    pub b_ih: Span,
    pub b_hh: Span,
    pub inp: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct GruCache<T> {
    x: Vec<T>,
    h_prev: Vec<T>,
    r: Vec<T>,
    u: Vec<T>,
    n: Vec<T>,
    hn: Vec<T>,
}

#[inline]
pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl Gru {
    pub(crate) fn step<T: Real>(&self, p: &[T], x: &[T], h: &[T]) -> (Vec<T>, GruCache<T>) {
        let hs = self.hidden;
        let mut gi = self.b_ih.of(p).to_vec();
        matvec_acc(self.w_ih.of(p), x, &mut gi);
        let mut gh = self.b_hh.of(p).to_vec();
        matvec_acc(self.w_hh.of(p), h, &mut gh);

        let mut r = vec![T::zero(); hs];
        let mut u = vec![T::zero(); hs];
        let mut n = vec![T::zero(); hs];
        let mut out = vec![T::zero(); hs];
        for k in 0..hs {
            r[k] = sigmoid(gi[k] + gh[k]);
            u[k] = sigmoid(gi[hs + k] + gh[hs + k]);
            n[k] = (gi[2 * hs + k] + r[k] * gh[2 * hs + k]).tanh();
            out[k] = (T::one() - u[k]) * n[k] + u[k] * h[k];
        }
        let hn = gh[2 * hs..].to_vec();
        (out, GruCache { x: x.to_vec(), h_prev: h.to_vec(), r, u, n, hn })
    }

    /// Backpropagates `dh_out` through one step. Accumulates parameter
    /// gradients, adds the input gradient to `dx` if given, and returns the
    /// gradient with respect to the previous hidden state.
    pub(crate) fn step_backward<T: Real>(&self, p: &[T], grad: &mut [T], c: &GruCache<T>, dh_out: &[T], dx: Option<&mut [T]>) -> Vec<T> {
        let hs = self.hidden;
        let one = T::one();
        let mut d_gi = vec![T::zero(); 3 * hs];
        let mut d_gh = vec![T::zero(); 3 * hs];
        let mut dh_prev = vec![T::zero(); hs];
        for k in 0..hs {
            let dh = dh_out[k];
            let du = dh * (c.h_prev[k] - c.n[k]);
            let dn = dh * (one - c.u[k]);
            dh_prev[k] = dh * c.u[k];
            let dn_pre = dn * (one - c.n[k] * c.n[k]);
            let dr = dn_pre * c.hn[k];
            let dr_pre = dr * c.r[k] * (one - c.r[k]);
            let du_pre = du * c.u[k] * (one - c.u[k]);
            d_gi[k] = dr_pre;
            d_gi[hs + k] = du_pre;
            d_gi[2 * hs + k] = dn_pre;
            d_gh[k] = dr_pre;
            d_gh[hs + k] = du_pre;
            d_gh[2 * hs + k] = dn_pre * c.r[k];
        }
        outer_acc(self.w_ih.of_mut(grad), &d_gi, &c.x);
        add_into(self.b_ih.of_mut(grad), &d_gi);
        outer_acc(self.w_hh.of_mut(grad), &d_gh, &c.h_prev);
        add_into(self.b_hh.of_mut(grad), &d_gh);
        if let Some(dx) = dx {
            matvec_t_acc(self.w_ih.of(p), &d_gi, dx);
        }
        matvec_t_acc(self.w_hh.of(p), &d_gh, &mut dh_prev);
        dh_prev
    }
}

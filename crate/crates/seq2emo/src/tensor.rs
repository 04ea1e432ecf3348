//! Tape-based reverse-mode automatic differentiation over dense f64 tensors.
//!
//! A [`Tensor`] is a shared handle to a value buffer plus a gradient buffer
//! of the same length. Operations live on a [`Tape`]; each one computes its
//! result eagerly and records a backward rule. [`Tape::backward`] walks the
//! rules in reverse recording order, propagating adjoints through a side
//! table, and finally adds each adjoint into the `grad` buffer of every
//! `requires_grad` tensor. Gradients therefore accumulate (`+=`) across
//! backward calls until [`Tensor::zero_grad`].
//!
//! Only rank-1 and rank-2 tensors are supported, and broadcasting is limited
//! to a row vector over a matrix. Everything is single-threaded per tape.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::Rng;
use rand::RngCore;

use crate::error::{Error, Result};

static NEXT_TENSOR_ID: AtomicUsize = AtomicUsize::new(0);

struct TensorData {
    shape: Vec<usize>,
    data: Vec<f64>,
    grad: Vec<f64>,
    requires_grad: bool,
}

/// Shared handle to a dense tensor. Cloning shares the buffers.
#[derive(Clone)]
pub struct Tensor {
    id: usize,
    inner: Rc<RefCell<TensorData>>,
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Tensor {
        let n: usize = shape.iter().product();
        assert_eq!(n, data.len(), "shape {:?} does not match data length {}", shape, data.len());
        let grad = vec![0.0; n];
        Tensor {
            id: NEXT_TENSOR_ID.fetch_add(1, Ordering::Relaxed),
            inner: Rc::new(RefCell::new(TensorData {
                shape: shape.to_vec(),
                data,
                grad,
                requires_grad: false,
            })),
        }
    }

    /// A trainable tensor (participates in gradient accumulation).
    pub fn param(shape: &[usize], data: Vec<f64>) -> Tensor {
        let t = Tensor::new(shape, data);
        t.inner.borrow_mut().requires_grad = true;
        t
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor::new(shape, vec![0.0; shape.iter().product()])
    }

    pub fn scalar(v: f64) -> Tensor {
        Tensor::new(&[1], vec![v])
    }

    /// Uniform init in `(-bound, bound)`.
    pub fn uniform(shape: &[usize], bound: f64, rng: &mut dyn RngCore) -> Tensor {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
        Tensor::param(shape, data)
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn shape(&self) -> Vec<usize> {
        self.inner.borrow().shape.clone()
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rank(&self) -> usize {
        self.inner.borrow().shape.len()
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.borrow().requires_grad
    }

    pub fn set_requires_grad(&self, v: bool) {
        self.inner.borrow_mut().requires_grad = v;
    }

    pub fn data(&self) -> Vec<f64> {
        self.inner.borrow().data.clone()
    }

    pub fn grad(&self) -> Vec<f64> {
        self.inner.borrow().grad.clone()
    }

    /// Value of a scalar (length-1) tensor.
    pub fn item(&self) -> f64 {
        let d = self.inner.borrow();
        assert_eq!(d.data.len(), 1, "item() on non-scalar tensor");
        d.data[0]
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.inner.borrow().data[idx]
    }

    pub fn set(&self, idx: usize, v: f64) {
        self.inner.borrow_mut().data[idx] = v;
    }

    pub fn set_data(&self, data: &[f64]) {
        let mut d = self.inner.borrow_mut();
        assert_eq!(d.data.len(), data.len());
        d.data.copy_from_slice(data);
    }

    pub fn zero_grad(&self) {
        for g in self.inner.borrow_mut().grad.iter_mut() {
            *g = 0.0;
        }
    }

    pub(crate) fn add_to_grad(&self, delta: &[f64]) {
        let mut d = self.inner.borrow_mut();
        for (g, x) in d.grad.iter_mut().zip(delta) {
            *g += x;
        }
    }

    /// Apply `f(value, grad_index) -> new value` over the data buffer.
    pub fn update<F: FnMut(usize, f64, f64) -> f64>(&self, mut f: F) {
        let mut d = self.inner.borrow_mut();
        for i in 0..d.data.len() {
            d.data[i] = f(i, d.data[i], d.grad[i]);
        }
    }
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let d = self.inner.borrow();
        f.debug_struct("Tensor")
            .field("id", &self.id)
            .field("shape", &d.shape)
            .field("data", &d.data)
            .finish()
    }
}

/// Per-tensor adjoint storage used during a single backward sweep.
pub struct Adjoints {
    map: HashMap<usize, Vec<f64>>,
}

impl Adjoints {
    fn new() -> Adjoints {
        Adjoints { map: HashMap::new() }
    }

    /// Adjoint buffer of `t`, created zero-filled on first touch.
    pub fn entry(&mut self, t: &Tensor) -> &mut Vec<f64> {
        self.map.entry(t.id).or_insert_with(|| vec![0.0; t.len()])
    }

    /// Copy of the adjoint of `t`, zeros if never written.
    pub fn of(&self, t: &Tensor) -> Vec<f64> {
        self.map.get(&t.id).cloned().unwrap_or_else(|| vec![0.0; t.len()])
    }
}

type BackwardFn = Box<dyn Fn(&mut Adjoints)>;

struct Node {
    backward: BackwardFn,
}

/// Records operations for one forward computation.
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    // every tensor that appeared on the tape, for final grad accumulation
    touched: RefCell<HashMap<usize, Tensor>>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Tape {
        Tape {
            nodes: RefCell::new(Vec::new()),
            touched: RefCell::new(HashMap::new()),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.borrow().len()
    }

    fn touch(&self, t: &Tensor) {
        self.touched.borrow_mut().entry(t.id).or_insert_with(|| t.clone());
    }

    fn record(&self, inputs: &[&Tensor], out: &Tensor, backward: BackwardFn) {
        for t in inputs {
            self.touch(t);
        }
        self.touch(out);
        if inputs.iter().any(|t| t.requires_grad()) {
            out.set_requires_grad(true);
        }
        self.nodes.borrow_mut().push(Node { backward });
    }

    /// Propagate `d loss / d *` into the grad buffer of every
    /// `requires_grad` tensor on the tape. Accumulative across calls.
    pub fn backward(&self, loss: &Tensor) -> Result<()> {
        if loss.len() != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                loss.shape()
            )));
        }
        let mut adj = Adjoints::new();
        adj.entry(loss)[0] = 1.0;
        for node in self.nodes.borrow().iter().rev() {
            (node.backward)(&mut adj);
        }
        for t in self.touched.borrow().values() {
            if t.requires_grad() {
                if let Some(a) = adj.map.get(&t.id) {
                    t.add_to_grad(a);
                }
            }
        }
        Ok(())
    }

    // ---- elementwise ----

    fn binary_shapes(a: &Tensor, b: &Tensor, op: &str) -> Result<Broadcast> {
        let sa = a.shape();
        let sb = b.shape();
        if sa == sb {
            return Ok(Broadcast::Exact);
        }
        // row vector over matrix: [m, n] (op) [n]
        if sa.len() == 2 && sb.len() == 1 && sa[1] == sb[0] {
            return Ok(Broadcast::Row { rows: sa[0], cols: sa[1] });
        }
        Err(Error::Dimension(format!(
            "{op}: shapes {sa:?} and {sb:?} are not broadcast-compatible"
        )))
    }

    fn binary<FV, FG>(&self, a: &Tensor, b: &Tensor, op: &'static str, fv: FV, fg: FG) -> Result<Tensor>
    where
        FV: Fn(f64, f64) -> f64,
        // (a_i, b_i, d_out) -> (d_a, d_b)
        FG: Fn(f64, f64, f64) -> (f64, f64) + 'static,
    {
        let bc = Self::binary_shapes(a, b, op)?;
        let ad = a.data();
        let bd = b.data();
        let out_data: Vec<f64> = match bc {
            Broadcast::Exact => ad.iter().zip(&bd).map(|(&x, &y)| fv(x, y)).collect(),
            Broadcast::Row { rows, cols } => {
                let mut v = Vec::with_capacity(rows * cols);
                for r in 0..rows {
                    for c in 0..cols {
                        v.push(fv(ad[r * cols + c], bd[c]));
                    }
                }
                v
            }
        };
        let out = Tensor::new(&a.shape(), out_data);
        let (ta, tb, to) = (a.clone(), b.clone(), out.clone());
        self.record(&[a, b], &out, Box::new(move |adj| {
            let d_out = adj.of(&to);
            let ad = ta.data();
            let bd = tb.data();
            match bc {
                Broadcast::Exact => {
                    let ea = adj.entry(&ta);
                    for i in 0..d_out.len() {
                        let (da, _) = fg(ad[i], bd[i], d_out[i]);
                        ea[i] += da;
                    }
                    let eb = adj.entry(&tb);
                    for i in 0..d_out.len() {
                        let (_, db) = fg(ad[i], bd[i], d_out[i]);
                        eb[i] += db;
                    }
                }
                Broadcast::Row { rows, cols } => {
                    let ea = adj.entry(&ta);
                    for r in 0..rows {
                        for c in 0..cols {
                            let (da, _) = fg(ad[r * cols + c], bd[c], d_out[r * cols + c]);
                            ea[r * cols + c] += da;
                        }
                    }
                    let eb = adj.entry(&tb);
                    for r in 0..rows {
                        for c in 0..cols {
                            let (_, db) = fg(ad[r * cols + c], bd[c], d_out[r * cols + c]);
                            eb[c] += db;
                        }
                    }
                }
            }
        }));
        Ok(out)
    }

    pub fn add(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        self.binary(a, b, "add", |x, y| x + y, |_, _, d| (d, d))
    }

    pub fn sub(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        self.binary(a, b, "sub", |x, y| x - y, |_, _, d| (d, -d))
    }

    pub fn mul(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        self.binary(a, b, "mul", |x, y| x * y, |x, y, d| (d * y, d * x))
    }

    fn unary<FV, FG>(&self, x: &Tensor, fv: FV, fg: FG) -> Tensor
    where
        FV: Fn(f64) -> f64,
        // (x_i, out_i, d_out) -> d_x
        FG: Fn(f64, f64, f64) -> f64 + 'static,
    {
        let out_data: Vec<f64> = x.data().iter().map(|&v| fv(v)).collect();
        let out = Tensor::new(&x.shape(), out_data);
        let (tx, to) = (x.clone(), out.clone());
        self.record(&[x], &out, Box::new(move |adj| {
            let d_out = adj.of(&to);
            let xd = tx.data();
            let od = to.data();
            let ex = adj.entry(&tx);
            for i in 0..d_out.len() {
                ex[i] += fg(xd[i], od[i], d_out[i]);
            }
        }));
        out
    }

    pub fn sigmoid(&self, x: &Tensor) -> Tensor {
        self.unary(x, sigmoid, |_, o, d| d * o * (1.0 - o))
    }

    pub fn tanh(&self, x: &Tensor) -> Tensor {
        self.unary(x, f64::tanh, |_, o, d| d * (1.0 - o * o))
    }

    pub fn scale(&self, x: &Tensor, c: f64) -> Tensor {
        self.unary(x, move |v| c * v, move |_, _, d| d * c)
    }

    // ---- linear algebra ----

    /// `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        let sa = a.shape();
        let sb = b.shape();
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::Dimension(format!(
                "matmul: incompatible shapes {sa:?} and {sb:?}"
            )));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let ad = a.data();
        let bd = b.data();
        let mut out_data = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let aip = ad[i * k + p];
                for j in 0..n {
                    out_data[i * n + j] += aip * bd[p * n + j];
                }
            }
        }
        let out = Tensor::new(&[m, n], out_data);
        let (ta, tb, to) = (a.clone(), b.clone(), out.clone());
        self.record(&[a, b], &out, Box::new(move |adj| {
            let d_out = adj.of(&to);
            let ad = ta.data();
            let bd = tb.data();
            // dA = dC . B^T
            let ea = adj.entry(&ta);
            for i in 0..m {
                for p in 0..k {
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += d_out[i * n + j] * bd[p * n + j];
                    }
                    ea[i * k + p] += acc;
                }
            }
            // dB = A^T . dC
            let eb = adj.entry(&tb);
            for p in 0..k {
                for j in 0..n {
                    let mut acc = 0.0;
                    for i in 0..m {
                        acc += ad[i * k + p] * d_out[i * n + j];
                    }
                    eb[p * n + j] += acc;
                }
            }
        }));
        Ok(out)
    }

    /// `[m, n] x [n] -> [m]`.
    pub fn matvec(&self, a: &Tensor, x: &Tensor) -> Result<Tensor> {
        let sa = a.shape();
        let sx = x.shape();
        if sa.len() != 2 || sx.len() != 1 || sa[1] != sx[0] {
            return Err(Error::Dimension(format!(
                "matvec: incompatible shapes {sa:?} and {sx:?}"
            )));
        }
        let (m, n) = (sa[0], sa[1]);
        let ad = a.data();
        let xd = x.data();
        let out_data: Vec<f64> = (0..m)
            .map(|i| (0..n).map(|j| ad[i * n + j] * xd[j]).sum())
            .collect();
        let out = Tensor::new(&[m], out_data);
        let (ta, tx, to) = (a.clone(), x.clone(), out.clone());
        self.record(&[a, x], &out, Box::new(move |adj| {
            let d_out = adj.of(&to);
            let ad = ta.data();
            let xd = tx.data();
            let ea = adj.entry(&ta);
            for i in 0..m {
                for j in 0..n {
                    ea[i * n + j] += d_out[i] * xd[j];
                }
            }
            let ex = adj.entry(&tx);
            for j in 0..n {
                let mut acc = 0.0;
                for i in 0..m {
                    acc += ad[i * n + j] * d_out[i];
                }
                ex[j] += acc;
            }
        }));
        Ok(out)
    }

    /// `A^T x`: `[m, n] x [m] -> [n]`.
    pub fn tmatvec(&self, a: &Tensor, x: &Tensor) -> Result<Tensor> {
        let sa = a.shape();
        let sx = x.shape();
        if sa.len() != 2 || sx.len() != 1 || sa[0] != sx[0] {
            return Err(Error::Dimension(format!(
                "tmatvec: incompatible shapes {sa:?} and {sx:?}"
            )));
        }
        let (m, n) = (sa[0], sa[1]);
        let ad = a.data();
        let xd = x.data();
        let mut out_data = vec![0.0; n];
        for i in 0..m {
            for j in 0..n {
                out_data[j] += ad[i * n + j] * xd[i];
            }
        }
        let out = Tensor::new(&[n], out_data);
        let (ta, tx, to) = (a.clone(), x.clone(), out.clone());
        self.record(&[a, x], &out, Box::new(move |adj| {
            let d_out = adj.of(&to);
            let ad = ta.data();
            let xd = tx.data();
            let ea = adj.entry(&ta);
            for i in 0..m {
                for j in 0..n {
                    ea[i * n + j] += xd[i] * d_out[j];
                }
            }
            let ex = adj.entry(&tx);
            for i in 0..m {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += ad[i * n + j] * d_out[j];
                }
                ex[i] += acc;
            }
        }));
        Ok(out)
    }

    // ---- shape ops ----

    /// Concatenate along `axis`. Rank-1 tensors concatenate along axis 0;
    /// rank-2 tensors along axis 0 (rows) or 1 (columns).
    pub fn concat(&self, tensors: &[&Tensor], axis: usize) -> Result<Tensor> {
        if tensors.is_empty() {
            return Err(Error::Contract("concat: empty input list".into()));
        }
        let rank = tensors[0].rank();
        if axis >= rank {
            return Err(Error::Dimension(format!("concat: axis {axis} out of range for rank {rank}")));
        }
        for t in tensors {
            let s = t.shape();
            if s.len() != rank {
                return Err(Error::Dimension(format!(
                    "concat: mixed ranks {:?} vs {:?}", tensors[0].shape(), s
                )));
            }
            for d in 0..rank {
                if d != axis && s[d] != tensors[0].shape()[d] {
                    return Err(Error::Dimension(format!(
                        "concat: off-axis dims differ, {:?} vs {:?}", tensors[0].shape(), s
                    )));
                }
            }
        }
        let (out, spans) = match rank {
            1 => {
                let mut data = Vec::new();
                let mut spans = Vec::new();
                for t in tensors {
                    let start = data.len();
                    data.extend(t.data());
                    spans.push((start, t.len()));
                }
                let n = data.len();
                (Tensor::new(&[n], data), spans)
            }
            2 => {
                if axis == 0 {
                    let cols = tensors[0].shape()[1];
                    let mut data = Vec::new();
                    let mut spans = Vec::new();
                    for t in tensors {
                        let start = data.len();
                        data.extend(t.data());
                        spans.push((start, t.len()));
                    }
                    let rows = data.len() / cols;
                    (Tensor::new(&[rows, cols], data), spans)
                } else {
                    let rows = tensors[0].shape()[0];
                    let total_cols: usize = tensors.iter().map(|t| t.shape()[1]).sum();
                    let mut data = vec![0.0; rows * total_cols];
                    let mut spans = Vec::new();
                    let mut col0 = 0;
                    for t in tensors {
                        let tc = t.shape()[1];
                        let td = t.data();
                        for r in 0..rows {
                            data[r * total_cols + col0..r * total_cols + col0 + tc]
                                .copy_from_slice(&td[r * tc..(r + 1) * tc]);
                        }
                        spans.push((col0, tc));
                        col0 += tc;
                    }
                    (Tensor::new(&[rows, total_cols], data), spans)
                }
            }
            _ => return Err(Error::Dimension(format!("concat: unsupported rank {rank}"))),
        };
        let to = out.clone();
        let ins: Vec<Tensor> = tensors.iter().map(|t| (*t).clone()).collect();
        let col_axis = rank == 2 && axis == 1;
        let total_cols = if col_axis { out.shape()[1] } else { 0 };
        self.record(tensors, &out, Box::new(move |adj| {
            let d_out = adj.of(&to);
            for (t, &(start, span)) in ins.iter().zip(&spans) {
                let e = adj.entry(t);
                if col_axis {
                    let rows = t.shape()[0];
                    for r in 0..rows {
                        for c in 0..span {
                            e[r * span + c] += d_out[r * total_cols + start + c];
                        }
                    }
                } else {
                    for i in 0..span {
                        e[i] += d_out[start + i];
                    }
                }
            }
        }));
        Ok(out)
    }

    /// Contiguous slice of a rank-1 tensor.
    pub fn slice(&self, x: &Tensor, start: usize, len: usize) -> Result<Tensor> {
        let s = x.shape();
        if s.len() != 1 || start + len > s[0] {
            return Err(Error::Dimension(format!(
                "slice: range {start}..{} out of bounds for shape {s:?}", start + len
            )));
        }
        let out = Tensor::new(&[len], x.data()[start..start + len].to_vec());
        let (tx, to) = (x.clone(), out.clone());
        self.record(&[x], &out, Box::new(move |adj| {
            let d_out = adj.of(&to);
            let e = adj.entry(&tx);
            for i in 0..d_out.len() {
                e[start + i] += d_out[i];
            }
        }));
        Ok(out)
    }

    /// Row `i` of a rank-2 tensor as a rank-1 tensor. Gradient scatters back
    /// to the source row, so this doubles as an embedding lookup.
    pub fn row(&self, x: &Tensor, i: usize) -> Result<Tensor> {
        let s = x.shape();
        if s.len() != 2 || i >= s[0] {
            return Err(Error::Dimension(format!("row: index {i} out of bounds for shape {s:?}")));
        }
        let cols = s[1];
        let out = Tensor::new(&[cols], x.data()[i * cols..(i + 1) * cols].to_vec());
        let (tx, to) = (x.clone(), out.clone());
        self.record(&[x], &out, Box::new(move |adj| {
            let d_out = adj.of(&to);
            let e = adj.entry(&tx);
            for c in 0..cols {
                e[i * cols + c] += d_out[c];
            }
        }));
        Ok(out)
    }

    /// Stack rank-1 tensors of equal length into a rank-2 tensor.
    pub fn stack_rows(&self, rows: &[&Tensor]) -> Result<Tensor> {
        if rows.is_empty() {
            return Err(Error::Contract("stack_rows: empty input list".into()));
        }
        let cols = rows[0].len();
        for r in rows {
            if r.rank() != 1 || r.len() != cols {
                return Err(Error::Dimension(format!(
                    "stack_rows: expected rank-1 length {cols}, got shape {:?}", r.shape()
                )));
            }
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            data.extend(r.data());
        }
        let out = Tensor::new(&[rows.len(), cols], data);
        let to = out.clone();
        let ins: Vec<Tensor> = rows.iter().map(|t| (*t).clone()).collect();
        self.record(rows, &out, Box::new(move |adj| {
            let d_out = adj.of(&to);
            for (r, t) in ins.iter().enumerate() {
                let e = adj.entry(t);
                for c in 0..cols {
                    e[c] += d_out[r * cols + c];
                }
            }
        }));
        Ok(out)
    }

    // ---- reductions and normalizers ----

    pub fn sum(&self, x: &Tensor) -> Tensor {
        let out = Tensor::scalar(x.data().iter().sum());
        let (tx, to) = (x.clone(), out.clone());
        self.record(&[x], &out, Box::new(move |adj| {
            let d = adj.of(&to)[0];
            let e = adj.entry(&tx);
            for g in e.iter_mut() {
                *g += d;
            }
        }));
        out
    }

    pub fn mean(&self, x: &Tensor) -> Tensor {
        let n = x.len() as f64;
        let out = Tensor::scalar(x.data().iter().sum::<f64>() / n);
        let (tx, to) = (x.clone(), out.clone());
        self.record(&[x], &out, Box::new(move |adj| {
            let d = adj.of(&to)[0] / n;
            let e = adj.entry(&tx);
            for g in e.iter_mut() {
                *g += d;
            }
        }));
        out
    }

    /// Softmax along `axis`, computed with max subtraction.
    /// Rank-1: axis must be 0. Rank-2: axis 0 (down columns) or 1 (across rows).
    pub fn softmax(&self, x: &Tensor, axis: usize) -> Result<Tensor> {
        let s = x.shape();
        if axis >= s.len() {
            return Err(Error::Dimension(format!("softmax: axis {axis} out of range for shape {s:?}")));
        }
        let xd = x.data();
        if xd.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("softmax: non-finite input".into()));
        }
        // lanes: (start, stride, count)
        let lanes: Vec<(usize, usize, usize)> = match (s.len(), axis) {
            (1, 0) => vec![(0, 1, s[0])],
            (2, 1) => (0..s[0]).map(|r| (r * s[1], 1, s[1])).collect(),
            (2, 0) => (0..s[1]).map(|c| (c, s[1], s[0])).collect(),
            _ => return Err(Error::Dimension(format!("softmax: unsupported shape {s:?}"))),
        };
        let mut out_data = vec![0.0; xd.len()];
        for &(start, stride, count) in &lanes {
            let max = (0..count).map(|i| xd[start + i * stride]).fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for i in 0..count {
                let e = (xd[start + i * stride] - max).exp();
                out_data[start + i * stride] = e;
                z += e;
            }
            for i in 0..count {
                out_data[start + i * stride] /= z;
            }
        }
        let out = Tensor::new(&s, out_data);
        let (tx, to) = (x.clone(), out.clone());
        self.record(&[x], &out, Box::new(move |adj| {
            let d_out = adj.of(&to);
            let od = to.data();
            let e = adj.entry(&tx);
            for &(start, stride, count) in &lanes {
                let dot: f64 = (0..count)
                    .map(|i| d_out[start + i * stride] * od[start + i * stride])
                    .sum();
                for i in 0..count {
                    let idx = start + i * stride;
                    e[idx] += od[idx] * (d_out[idx] - dot);
                }
            }
        }));
        Ok(out)
    }

    /// `-log softmax(logits)[target]`, fused log-sum-exp.
    pub fn cross_entropy(&self, logits: &Tensor, target: usize) -> Result<Tensor> {
        let s = logits.shape();
        if s.len() != 1 || s[0] < 1 {
            return Err(Error::Dimension(format!("cross_entropy: expected rank-1 logits, got {s:?}")));
        }
        if target >= s[0] {
            return Err(Error::Domain(format!(
                "cross_entropy: target {target} out of range for {} classes", s[0]
            )));
        }
        let xd = logits.data();
        let max = xd.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + xd.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let out = Tensor::scalar(lse - xd[target]);
        let (tx, to) = (logits.clone(), out.clone());
        self.record(&[logits], &out, Box::new(move |adj| {
            let d = adj.of(&to)[0];
            let xd = tx.data();
            let max = xd.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = xd.iter().map(|v| (v - max).exp()).sum();
            let e = adj.entry(&tx);
            for (i, g) in e.iter_mut().enumerate() {
                let p = (xd[i] - max).exp() / z;
                *g += d * (p - if i == target { 1.0 } else { 0.0 });
            }
        }));
        Ok(out)
    }

    /// Two-class cross entropy over a pair of logits, target in {0, 1}.
    pub fn cross_entropy_2class(&self, logits: &Tensor, target: usize) -> Result<Tensor> {
        if logits.shape() != vec![2] {
            return Err(Error::Dimension(format!(
                "cross_entropy_2class: expected 2 logits, got shape {:?}", logits.shape()
            )));
        }
        if target > 1 {
            return Err(Error::Domain(format!("cross_entropy_2class: target {target} not in {{0,1}}")));
        }
        self.cross_entropy(logits, target)
    }

    /// Binary cross entropy on `sigmoid(logit)` against target in {0, 1},
    /// computed in the stable softplus form.
    pub fn bce_with_logit(&self, logit: &Tensor, target: usize) -> Result<Tensor> {
        if logit.len() != 1 {
            return Err(Error::Dimension(format!(
                "bce_with_logit: expected scalar logit, got shape {:?}", logit.shape()
            )));
        }
        if target > 1 {
            return Err(Error::Domain(format!("bce_with_logit: target {target} not in {{0,1}}")));
        }
        let z = logit.item();
        let y = target as f64;
        // max(z,0) - z*y + ln(1 + exp(-|z|))
        let loss = z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
        let out = Tensor::scalar(loss);
        let (tx, to) = (logit.clone(), out.clone());
        self.record(&[logit], &out, Box::new(move |adj| {
            let d = adj.of(&to)[0];
            let z = tx.data()[0];
            adj.entry(&tx)[0] += d * (sigmoid(z) - y);
        }));
        Ok(out)
    }

    /// Inverted dropout: kept entries scaled by `1/(1-p)` during training,
    /// identity at inference.
    pub fn dropout(&self, x: &Tensor, p: f64, training: bool, rng: &mut dyn RngCore) -> Result<Tensor> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Domain(format!("dropout: p = {p} outside [0, 1)")));
        }
        if !training || p == 0.0 {
            // identity, but still on the tape so gradients flow through
            return Ok(self.scale(x, 1.0));
        }
        let keep = 1.0 - p;
        let mask: Vec<f64> = (0..x.len())
            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let out_data: Vec<f64> = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        let out = Tensor::new(&x.shape(), out_data);
        let (tx, to) = (x.clone(), out.clone());
        self.record(&[x], &out, Box::new(move |adj| {
            let d_out = adj.of(&to);
            let e = adj.entry(&tx);
            for i in 0..d_out.len() {
                e[i] += d_out[i] * mask[i];
            }
        }));
        Ok(out)
    }
}

#[derive(Clone, Copy)]
enum Broadcast {
    Exact,
    Row { rows: usize, cols: usize },
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

//! Minimal dense-tensor engine with reverse-mode automatic differentiation.
//!
//! A [`Tape`] records every operation applied to its [`Var`] handles;
//! [`Tape::backward`] replays the record in reverse and accumulates
//! gradients into every leaf created with `requires_grad`. Both combiner
//! architectures are built from the same primitive set, so one
//! finite-difference harness ([`gradcheck`]) certifies them all.
//!
//! Tapes are single-threaded by design; independent model instances each
//! own a private tape and can run concurrently.

mod adam;
mod gradcheck;
mod serialize;
mod tensor;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use gradcheck::check_gradients;
pub use serialize::{read_tensors, write_tensors};
pub use tensor::Tensor;

use crate::error::{Error, Result};

/// Zero-padding behavior of [`Tape::conv2d`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Output spatial shape equals input spatial shape (odd kernels only).
    Same,
    /// No padding; the kernel stays fully inside the input.
    Valid,
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    MatMul(usize, usize),
    Conv2d {
        input: usize,
        kernel: usize,
        padding: Padding,
    },
    Sigmoid(usize),
    Tanh(usize),
    Exp(usize),
    Log(usize),
    Abs(usize),
    Sum(usize),
    Mean(usize),
    Concat(Vec<usize>),
    SliceRows {
        input: usize,
        start: usize,
    },
    Reshape(usize),
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Records a computation for reverse-mode differentiation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`, if `v` needed one.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Inserts a leaf tensor. Gradients flow into it only when
    /// `requires_grad` is set.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, i: usize) -> bool {
        self.nodes[i].needs_grad
    }

    // rhs broadcasts onto lhs when its shape is a suffix of lhs's shape
    // (a one-element rhs always qualifies).
    fn broadcast_ok(lhs: &[usize], rhs: &[usize]) -> bool {
        rhs.len() <= lhs.len() && lhs[lhs.len() - rhs.len()..] == *rhs
    }

    fn elementwise(
        &mut self,
        op_name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if !Self::broadcast_ok(va.shape(), vb.shape()) {
            return Err(Error::Shape {
                op: op_name,
                lhs: va.shape().to_vec(),
                rhs: vb.shape().to_vec(),
            });
        }
        let n = vb.numel().max(1);
        let data: Vec<f64> = va
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| f(x, vb.data()[i % n]))
            .collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        let needs = self.needs(a.0) || self.needs(b.0);
        Ok(self.push(value, op, needs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise("add", a, b, |x, y| x + y, Op::Add(a.0, b.0))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise("sub", a, b, |x, y| x - y, Op::Sub(a.0, b.0))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise("mul", a, b, |x, y| x * y, Op::Mul(a.0, b.0))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let (sa, sb) = (va.shape(), vb.shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::Shape {
                op: "matmul",
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for t in 0..k {
                let aik = va.data()[i * k + t];
                for j in 0..n {
                    out[i * n + j] += aik * vb.data()[t * n + j];
                }
            }
        }
        let value = Tensor::new(vec![m, n], out)?;
        let needs = self.needs(a.0) || self.needs(b.0);
        Ok(self.push(value, Op::MatMul(a.0, b.0), needs))
    }

    /// 2-D convolution over an `[H, W, Cin]` input with an
    /// `[KH, KW, Cin, Cout]` kernel bank, stride 1.
    pub fn conv2d(&mut self, input: Var, kernel: Var, padding: Padding) -> Result<Var> {
        let (vi, vk) = (&self.nodes[input.0].value, &self.nodes[kernel.0].value);
        let (si, sk) = (vi.shape(), vk.shape());
        let shape_err = || Error::Shape {
            op: "conv2d",
            lhs: si.to_vec(),
            rhs: sk.to_vec(),
        };
        if si.len() != 3 || sk.len() != 4 || si[2] != sk[2] {
            return Err(shape_err());
        }
        let (h, w, cin) = (si[0], si[1], si[2]);
        let (kh, kw, cout) = (sk[0], sk[1], sk[3]);
        let (oh, ow, pt, pl) = match padding {
            Padding::Same => {
                if kh % 2 == 0 || kw % 2 == 0 {
                    return Err(shape_err());
                }
                (h, w, (kh - 1) / 2, (kw - 1) / 2)
            }
            Padding::Valid => {
                if kh > h || kw > w {
                    return Err(shape_err());
                }
                (h - kh + 1, w - kw + 1, 0, 0)
            }
        };
        let mut out = vec![0.0; oh * ow * cout];
        for y in 0..oh {
            for x in 0..ow {
                for dy in 0..kh {
                    let iy = (y + dy) as isize - pt as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for dx in 0..kw {
                        let ix = (x + dx) as isize - pl as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let in_base = (iy as usize * w + ix as usize) * cin;
                        let k_base = (dy * kw + dx) * cin * cout;
                        let out_base = (y * ow + x) * cout;
                        for ci in 0..cin {
                            let xv = vi.data()[in_base + ci];
                            let kb = k_base + ci * cout;
                            for co in 0..cout {
                                out[out_base + co] += xv * vk.data()[kb + co];
                            }
                        }
                    }
                }
            }
        }
        let value = Tensor::new(vec![oh, ow, cout], out)?;
        let needs = self.needs(input.0) || self.needs(kernel.0);
        Ok(self.push(
            value,
            Op::Conv2d {
                input: input.0,
                kernel: kernel.0,
                padding,
            },
            needs,
        ))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let va = &self.nodes[a.0].value;
        let value = Tensor::new(
            va.shape().to_vec(),
            va.data().iter().map(|&x| f(x)).collect(),
        )
        .expect("shape preserved");
        let needs = self.needs(a.0);
        self.push(value, op, needs)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, |x| 1.0 / (1.0 + (-x).exp()), Op::Sigmoid(a.0))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a.0))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, f64::exp, Op::Exp(a.0))
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.unary(a, f64::ln, Op::Log(a.0))
    }

    /// Elementwise absolute value; the subgradient at 0 is 0.
    pub fn abs(&mut self, a: Var) -> Var {
        self.unary(a, f64::abs, Op::Abs(a.0))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s: f64 = self.nodes[a.0].value.data().iter().sum();
        let needs = self.needs(a.0);
        self.push(Tensor::scalar(s), Op::Sum(a.0), needs)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let d = self.nodes[a.0].value.data();
        let m = d.iter().sum::<f64>() / d.len() as f64;
        let needs = self.needs(a.0);
        self.push(Tensor::scalar(m), Op::Mean(a.0), needs)
    }

    /// Concatenates along axis 0; trailing dimensions must agree.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Data("concat of zero tensors".into()));
        }
        let first = self.nodes[parts[0].0].value.shape().to_vec();
        let mut rows = 0usize;
        for p in parts {
            let s = self.nodes[p.0].value.shape();
            if s.len() != first.len() || s.is_empty() || s[1..] != first[1..] {
                return Err(Error::Shape {
                    op: "concat",
                    lhs: first,
                    rhs: s.to_vec(),
                });
            }
            rows += s[0];
        }
        let mut shape = first.clone();
        shape[0] = rows;
        let mut data = Vec::with_capacity(shape.iter().product());
        for p in parts {
            data.extend_from_slice(self.nodes[p.0].value.data());
        }
        let needs = parts.iter().any(|p| self.needs(p.0));
        let value = Tensor::new(shape, data)?;
        Ok(self.push(value, Op::Concat(parts.iter().map(|p| p.0).collect()), needs))
    }

    /// Rows `start .. start + rows` along axis 0.
    pub fn slice_rows(&mut self, a: Var, start: usize, rows: usize) -> Result<Var> {
        let va = &self.nodes[a.0].value;
        let s = va.shape();
        if s.is_empty() || start + rows > s[0] {
            return Err(Error::Shape {
                op: "slice_rows",
                lhs: s.to_vec(),
                rhs: vec![start, rows],
            });
        }
        let row_len: usize = s[1..].iter().product::<usize>().max(1);
        let mut shape = s.to_vec();
        shape[0] = rows;
        let data = va.data()[start * row_len..(start + rows) * row_len].to_vec();
        let needs = self.needs(a.0);
        let value = Tensor::new(shape, data)?;
        Ok(self.push(
            value,
            Op::SliceRows {
                input: a.0,
                start,
            },
            needs,
        ))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.nodes[a.0].value.reshaped(shape)?;
        let needs = self.needs(a.0);
        Ok(self.push(value, Op::Reshape(a.0), needs))
    }

    /// Populates gradients of `loss` with respect to every grad-requiring
    /// node. `loss` must be scalar.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.nodes[loss.0].value.numel() != 1 {
            return Err(Error::Shape {
                op: "backward",
                lhs: self.nodes[loss.0].value.shape().to_vec(),
                rhs: vec![],
            });
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::new(
            self.nodes[loss.0].value.shape().to_vec(),
            vec![1.0],
        )?);

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.accumulate_parents(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], idx: usize, delta: Tensor) {
        if !self.nodes[idx].needs_grad {
            return;
        }
        match &mut grads[idx] {
            Some(g) => {
                for (gv, dv) in g.data_mut().iter_mut().zip(delta.data()) {
                    *gv += dv;
                }
            }
            slot => *slot = Some(delta),
        }
    }

    // dRhs for a broadcast elementwise op: fold the upstream gradient back
    // onto the rhs shape.
    fn reduce_to(shape: &[usize], flat: impl Iterator<Item = f64>) -> Tensor {
        let n: usize = shape.iter().product::<usize>().max(1);
        let mut out = vec![0.0; n];
        for (i, v) in flat.enumerate() {
            out[i % n] += v;
        }
        Tensor::new(shape.to_vec(), out).expect("reduce_to shape")
    }

    fn accumulate_parents(&self, i: usize, g: &Tensor, grads: &mut Vec<Option<Tensor>>) {
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                let bs = self.nodes[*b].value.shape();
                self.accumulate(grads, *b, Self::reduce_to(bs, g.data().iter().copied()));
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                let bs = self.nodes[*b].value.shape();
                self.accumulate(grads, *b, Self::reduce_to(bs, g.data().iter().map(|v| -v)));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                let n = vb.numel().max(1);
                let da: Vec<f64> = g
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(k, &gv)| gv * vb.data()[k % n])
                    .collect();
                self.accumulate(
                    grads,
                    *a,
                    Tensor::new(va.shape().to_vec(), da).expect("mul da"),
                );
                let db = Self::reduce_to(
                    vb.shape(),
                    g.data()
                        .iter()
                        .zip(va.data())
                        .map(|(&gv, &av)| gv * av),
                );
                self.accumulate(grads, *b, db);
            }
            Op::MatMul(a, b) => {
                let (va, vb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                let (m, k) = (va.shape()[0], va.shape()[1]);
                let n = vb.shape()[1];
                // dA = g . B^T
                let mut da = vec![0.0; m * k];
                for i2 in 0..m {
                    for j in 0..n {
                        let gij = g.data()[i2 * n + j];
                        for t in 0..k {
                            da[i2 * k + t] += gij * vb.data()[t * n + j];
                        }
                    }
                }
                // dB = A^T . g
                let mut db = vec![0.0; k * n];
                for t in 0..k {
                    for i2 in 0..m {
                        let ait = va.data()[i2 * k + t];
                        for j in 0..n {
                            db[t * n + j] += ait * g.data()[i2 * n + j];
                        }
                    }
                }
                self.accumulate(grads, *a, Tensor::new(vec![m, k], da).expect("matmul da"));
                self.accumulate(grads, *b, Tensor::new(vec![k, n], db).expect("matmul db"));
            }
            Op::Conv2d {
                input,
                kernel,
                padding,
            } => {
                let (vi, vk) = (&self.nodes[*input].value, &self.nodes[*kernel].value);
                let (h, w, cin) = (vi.shape()[0], vi.shape()[1], vi.shape()[2]);
                let (kh, kw, cout) = (vk.shape()[0], vk.shape()[1], vk.shape()[3]);
                let (oh, ow) = (g.shape()[0], g.shape()[1]);
                let (pt, pl) = match padding {
                    Padding::Same => ((kh - 1) / 2, (kw - 1) / 2),
                    Padding::Valid => (0, 0),
                };
                let mut din = vec![0.0; h * w * cin];
                let mut dk = vec![0.0; kh * kw * cin * cout];
                for y in 0..oh {
                    for x in 0..ow {
                        for dy in 0..kh {
                            let iy = (y + dy) as isize - pt as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for dx in 0..kw {
                                let ix = (x + dx) as isize - pl as isize;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                let in_base = (iy as usize * w + ix as usize) * cin;
                                let k_base = (dy * kw + dx) * cin * cout;
                                let out_base = (y * ow + x) * cout;
                                for ci in 0..cin {
                                    let xv = vi.data()[in_base + ci];
                                    let kb = k_base + ci * cout;
                                    for co in 0..cout {
                                        let gv = g.data()[out_base + co];
                                        din[in_base + ci] += gv * vk.data()[kb + co];
                                        dk[kb + co] += gv * xv;
                                    }
                                }
                            }
                        }
                    }
                }
                self.accumulate(
                    grads,
                    *input,
                    Tensor::new(vec![h, w, cin], din).expect("conv din"),
                );
                self.accumulate(
                    grads,
                    *kernel,
                    Tensor::new(vec![kh, kw, cin, cout], dk).expect("conv dk"),
                );
            }
            Op::Sigmoid(a) => {
                let y = &self.nodes[i].value;
                let da: Vec<f64> = g
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(&gv, &yv)| gv * yv * (1.0 - yv))
                    .collect();
                self.accumulate(
                    grads,
                    *a,
                    Tensor::new(y.shape().to_vec(), da).expect("sigmoid da"),
                );
            }
            Op::Tanh(a) => {
                let y = &self.nodes[i].value;
                let da: Vec<f64> = g
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(&gv, &yv)| gv * (1.0 - yv * yv))
                    .collect();
                self.accumulate(
                    grads,
                    *a,
                    Tensor::new(y.shape().to_vec(), da).expect("tanh da"),
                );
            }
            Op::Exp(a) => {
                let y = &self.nodes[i].value;
                let da: Vec<f64> = g
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(&gv, &yv)| gv * yv)
                    .collect();
                self.accumulate(
                    grads,
                    *a,
                    Tensor::new(y.shape().to_vec(), da).expect("exp da"),
                );
            }
            Op::Log(a) => {
                let x = &self.nodes[*a].value;
                let da: Vec<f64> = g
                    .data()
                    .iter()
                    .zip(x.data())
                    .map(|(&gv, &xv)| gv / xv)
                    .collect();
                self.accumulate(
                    grads,
                    *a,
                    Tensor::new(x.shape().to_vec(), da).expect("log da"),
                );
            }
            Op::Abs(a) => {
                let x = &self.nodes[*a].value;
                let da: Vec<f64> = g
                    .data()
                    .iter()
                    .zip(x.data())
                    .map(|(&gv, &xv)| {
                        if xv > 0.0 {
                            gv
                        } else if xv < 0.0 {
                            -gv
                        } else {
                            0.0
                        }
                    })
                    .collect();
                self.accumulate(
                    grads,
                    *a,
                    Tensor::new(x.shape().to_vec(), da).expect("abs da"),
                );
            }
            Op::Sum(a) => {
                let s = self.nodes[*a].value.shape().to_vec();
                let gv = g.data()[0];
                let n: usize = s.iter().product::<usize>().max(1);
                self.accumulate(grads, *a, Tensor::new(s, vec![gv; n]).expect("sum da"));
            }
            Op::Mean(a) => {
                let s = self.nodes[*a].value.shape().to_vec();
                let n: usize = s.iter().product::<usize>().max(1);
                let gv = g.data()[0] / n as f64;
                self.accumulate(grads, *a, Tensor::new(s, vec![gv; n]).expect("mean da"));
            }
            Op::Concat(parts) => {
                let mut offset = 0usize;
                for p in parts {
                    let s = self.nodes[*p].value.shape().to_vec();
                    let n: usize = s.iter().product();
                    let part = g.data()[offset..offset + n].to_vec();
                    offset += n;
                    self.accumulate(grads, *p, Tensor::new(s, part).expect("concat da"));
                }
            }
            Op::SliceRows { input, start } => {
                let s = self.nodes[*input].value.shape().to_vec();
                let row_len: usize = s[1..].iter().product::<usize>().max(1);
                let mut da = vec![0.0; s.iter().product()];
                let base = start * row_len;
                for (k, &gv) in g.data().iter().enumerate() {
                    da[base + k] += gv;
                }
                self.accumulate(grads, *input, Tensor::new(s, da).expect("slice da"));
            }
            Op::Reshape(a) => {
                let s = self.nodes[*a].value.shape().to_vec();
                let da = Tensor::new(s, g.data().to_vec()).expect("reshape da");
                self.accumulate(grads, *a, da);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_of(tape: &Tape, v: Var) -> f64 {
        tape.value(v).item().unwrap()
    }

    #[test]
    fn linear_gradient_is_input() {
        // loss = sum(w * x) with x fixed => dloss/dw = x
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::vector(&[1.0, 2.0, 3.0]), true);
        let x = tape.leaf(Tensor::vector(&[4.0, 5.0, 6.0]), false);
        let prod = tape.mul(w, x).unwrap();
        let loss = tape.sum(prod);
        assert_eq!(scalar_of(&tape, loss), 4.0 + 10.0 + 18.0);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(w).unwrap().data(), &[4.0, 5.0, 6.0]);
        assert!(grads.get(x).is_none());
    }

    #[test]
    fn sigmoid_at_zero_is_half() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(0.0), false);
        let y = tape.sigmoid(x);
        assert!((scalar_of(&tape, y) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn abs_subgradient_at_zero_is_zero() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(&[-2.0, 0.0, 3.0]), true);
        let y = tape.abs(x);
        let loss = tape.sum(y);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn conv2d_zero_kernel_gives_zeros() {
        let mut tape = Tape::new();
        let input = tape.leaf(Tensor::new(vec![8, 8, 1], vec![1.0; 64]).unwrap(), false);
        let kernel = tape.leaf(Tensor::zeros(&[3, 3, 1, 1]), false);
        let out = tape.conv2d(input, kernel, Padding::Same).unwrap();
        assert_eq!(tape.value(out).shape(), &[8, 8, 1]);
        assert!(tape.value(out).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv2d_valid_row_kernel_shape() {
        // 1 x M kernel with valid padding over h x M input -> h x 1
        let mut tape = Tape::new();
        let input = tape.leaf(Tensor::new(vec![8, 5, 1], vec![1.0; 40]).unwrap(), false);
        let kernel = tape.leaf(Tensor::new(vec![1, 5, 1, 1], vec![0.2; 5]).unwrap(), false);
        let out = tape.conv2d(input, kernel, Padding::Valid).unwrap();
        assert_eq!(tape.value(out).shape(), &[8, 1, 1]);
        for &v in tape.value(out).data() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn conv2d_same_keeps_spatial_shape() {
        let mut tape = Tape::new();
        let input = tape.leaf(Tensor::new(vec![6, 4, 2], vec![0.5; 48]).unwrap(), false);
        let kernel = tape.leaf(Tensor::new(vec![3, 3, 2, 3], vec![0.1; 54]).unwrap(), false);
        let out = tape.conv2d(input, kernel, Padding::Same).unwrap();
        assert_eq!(tape.value(out).shape(), &[6, 4, 3]);
    }

    #[test]
    fn matmul_matches_hand_result() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::new(vec![2, 3], vec![1., 2., 3., 4., 5., 6.]).unwrap(), false);
        let b = tape.leaf(Tensor::new(vec![3, 1], vec![1., 0., -1.]).unwrap(), false);
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[-2.0, -2.0]);
    }

    #[test]
    fn shape_mismatch_names_op_and_shapes() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::vector(&[1.0, 2.0]), false);
        let b = tape.leaf(Tensor::vector(&[1.0, 2.0, 3.0]), false);
        let err = tape.add(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("add"), "{msg}");
        assert!(msg.contains("[2]") && msg.contains("[3]"), "{msg}");
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::vector(&[1.0, 2.0]), true);
        assert!(tape.backward(a).is_err());
    }

    #[test]
    fn bias_broadcast_backward_reduces() {
        // [2,3] + [3] bias: bias grad is the column sums of the upstream grad.
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::new(vec![2, 3], vec![0.0; 6]).unwrap(), false);
        let bias = tape.leaf(Tensor::vector(&[1.0, 2.0, 3.0]), true);
        let y = tape.add(a, bias).unwrap();
        let loss = tape.sum(y);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(bias).unwrap().data(), &[2.0, 2.0, 2.0]);
    }

    #[test]
    fn concat_and_slice_round_trip_gradients() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::vector(&[1.0, 2.0]), true);
        let b = tape.leaf(Tensor::vector(&[3.0]), true);
        let cat = tape.concat(&[a, b]).unwrap();
        let piece = tape.slice_rows(cat, 1, 2).unwrap();
        let loss = tape.sum(piece);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(a).unwrap().data(), &[0.0, 1.0]);
        assert_eq!(grads.get(b).unwrap().data(), &[1.0]);
    }
}

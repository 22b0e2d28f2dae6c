//! Reverse-mode automatic differentiation over rank-3 tensors.
//!
//! A [`Tape`] records every operation; [`Tape::backward`] replays it in
//! reverse, accumulating exact adjoints in fixed tape order so gradients are
//! bitwise reproducible. Values are either real `(channels, n_t, n_x)`
//! tensors or half-spectrum complex blocks `(channels, 2·modes_t, modes_x)`
//! produced by the truncated 2-D transform.
//!
//! Spectral convention: the forward transform stores `w(k_x)·FFT2(x)` on the
//! retained modes, where `w` is 1 on the self-conjugate columns (k_x = 0 and
//! Nyquist) and 2 elsewhere; the inverse is the real part of the zero-padded
//! unnormalized inverse FFT divided by `n_t·n_x`. With that weighting the
//! dropped conjugate half-spectrum is accounted for exactly, so the round
//! trip is the identity when every mode is retained and an orthogonal
//! projection otherwise.

use crate::error::{MmlError, Result};
use crate::fft;
use crate::spectral::WavenumberLadder;
use ndarray::{ArcArray, Array3, ArrayView3, Ix3};
use rustfft::num_complex::Complex64;
use std::cell::RefCell;

/// Reference-counted tensor; cloning shares the buffer.
pub type SharedTensor = ArcArray<f64, Ix3>;

/// A value held by one tape node.
#[derive(Clone)]
pub enum Value {
    Real(SharedTensor),
    Spectral { re: SharedTensor, im: SharedTensor },
}

impl Value {
    fn kind(&self) -> &'static str {
        match self {
            Value::Real(_) => "real",
            Value::Spectral { .. } => "spectral",
        }
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    ChannelMix {
        input: Var,
        weight: Var,
        bias: Option<Var>,
    },
    Gelu(Var),
    Square(Var),
    Mean(Var),
    SliceTime {
        input: Var,
        level: usize,
    },
    WrapDiff(Var),
    FdTime {
        input: Var,
        dt: f64,
    },
    SpectralDx {
        input: Var,
        order: u32,
        length_x: f64,
    },
    Rfft2Trunc {
        input: Var,
        modes_t: usize,
        modes_x: usize,
    },
    Irfft2Pad {
        input: Var,
        n_t: usize,
        n_x: usize,
    },
    ModeMix {
        input: Var,
        w_re: Var,
        w_im: Var,
    },
}

struct Node {
    value: Value,
    op: Op,
}

/// Gradient of one node, mirroring its value layout.
pub enum Grad {
    Real(Array3<f64>),
    Spectral { re: Array3<f64>, im: Array3<f64> },
}

/// All gradients produced by one backward pass. A missing entry means the
/// node does not influence the loss, i.e. its gradient is identically zero.
pub struct Gradients {
    slots: Vec<Option<Grad>>,
}

impl Gradients {
    pub fn real(&self, var: Var) -> Option<&Array3<f64>> {
        match self.slots.get(var.0)? {
            Some(Grad::Real(g)) => Some(g),
            _ => None,
        }
    }

    pub fn spectral(&self, var: Var) -> Option<(&Array3<f64>, &Array3<f64>)> {
        match self.slots.get(var.0)? {
            Some(Grad::Spectral { re, im }) => Some((re, im)),
            _ => None,
        }
    }
}

/// Records a computation for reverse-mode differentiation.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

fn as_slice(t: &SharedTensor) -> &[f64] {
    t.as_slice().expect("tape tensors are standard layout")
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Value, op: Op) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op });
        Var(nodes.len() - 1)
    }

    /// Leaf holding an owned tensor.
    pub fn constant(&self, value: Array3<f64>) -> Var {
        self.push(Value::Real(value.into_shared()), Op::Leaf)
    }

    /// Leaf sharing an existing buffer (used for network parameters, which
    /// many per-sample tapes reference without copying).
    pub fn shared(&self, value: SharedTensor) -> Var {
        self.push(Value::Real(value), Op::Leaf)
    }

    /// The value computed at `var` (cheap clone of a shared buffer).
    pub fn value(&self, var: Var) -> Value {
        self.nodes.borrow()[var.0].value.clone()
    }

    pub fn real_value(&self, var: Var) -> Result<SharedTensor> {
        match self.value(var) {
            Value::Real(t) => Ok(t),
            other => Err(MmlError::InvalidArgument(format!(
                "expected a real tensor, found {}",
                other.kind()
            ))),
        }
    }

    /// Scalar value of a `(1,1,1)` node.
    pub fn scalar_value(&self, var: Var) -> Result<f64> {
        let t = self.real_value(var)?;
        if t.dim() != (1, 1, 1) {
            return Err(MmlError::InvalidArgument(format!(
                "expected a scalar node, found shape {:?}",
                t.dim()
            )));
        }
        Ok(t[[0, 0, 0]])
    }

    fn real_operand(&self, var: Var, op: &str) -> Result<SharedTensor> {
        self.real_value(var).map_err(|_| {
            MmlError::InvalidArgument(format!("{op} expects a real tensor operand"))
        })
    }

    fn binary_operands(&self, a: Var, b: Var, op: &str) -> Result<(SharedTensor, SharedTensor)> {
        let lhs = self.real_operand(a, op)?;
        let rhs = self.real_operand(b, op)?;
        if lhs.dim() != rhs.dim() {
            return Err(MmlError::InvalidArgument(format!(
                "{op} shape mismatch: {:?} vs {:?}",
                lhs.dim(),
                rhs.dim()
            )));
        }
        Ok((lhs, rhs))
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        let (lhs, rhs) = self.binary_operands(a, b, "add")?;
        let out = &lhs + &rhs;
        Ok(self.push(Value::Real(out.into_shared()), Op::Add(a, b)))
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var> {
        let (lhs, rhs) = self.binary_operands(a, b, "sub")?;
        let out = &lhs - &rhs;
        Ok(self.push(Value::Real(out.into_shared()), Op::Sub(a, b)))
    }

    pub fn mul(&self, a: Var, b: Var) -> Result<Var> {
        let (lhs, rhs) = self.binary_operands(a, b, "mul")?;
        let out = &lhs * &rhs;
        Ok(self.push(Value::Real(out.into_shared()), Op::Mul(a, b)))
    }

    pub fn scale(&self, a: Var, factor: f64) -> Result<Var> {
        let v = self.real_operand(a, "scale")?;
        let out = v.to_owned() * factor;
        Ok(self.push(Value::Real(out.into_shared()), Op::Scale(a, factor)))
    }

    /// Pointwise channel mixing (1×1 convolution): `weight` is
    /// `(c_out, c_in, 1)`, optional `bias` is `(c_out, 1, 1)`.
    pub fn channel_mix(&self, input: Var, weight: Var, bias: Option<Var>) -> Result<Var> {
        let x = self.real_operand(input, "channel_mix")?;
        let w = self.real_operand(weight, "channel_mix")?;
        let (c_in, n_t, n_x) = x.dim();
        let (c_out, w_in, w_one) = w.dim();
        if w_in != c_in || w_one != 1 {
            return Err(MmlError::InvalidArgument(format!(
                "channel_mix weight shape {:?} does not match {c_in} input channels",
                w.dim()
            )));
        }
        if let Some(b) = bias {
            let bv = self.real_operand(b, "channel_mix")?;
            if bv.dim() != (c_out, 1, 1) {
                return Err(MmlError::InvalidArgument(format!(
                    "channel_mix bias shape {:?}, expected ({c_out}, 1, 1)",
                    bv.dim()
                )));
            }
        }
        let pts = n_t * n_x;
        let mut out = Array3::zeros((c_out, n_t, n_x));
        matmul(
            as_slice(&w),
            as_slice(&x),
            out.as_slice_mut().unwrap(),
            c_out,
            c_in,
            pts,
            false,
            false,
        );
        if let Some(b) = bias {
            let bv = self.real_value(b)?;
            let bs = as_slice(&bv);
            for (o, mut plane) in out.outer_iter_mut().enumerate() {
                plane += bs[o];
            }
        }
        Ok(self.push(
            Value::Real(out.into_shared()),
            Op::ChannelMix {
                input,
                weight,
                bias,
            },
        ))
    }

    /// GELU in the tanh approximation:
    /// `0.5·x·(1 + tanh(√(2/π)(x + 0.044715·x³)))`.
    pub fn gelu(&self, a: Var) -> Result<Var> {
        let x = self.real_operand(a, "gelu")?;
        let out = x.mapv(gelu_value);
        Ok(self.push(Value::Real(out.into_shared()), Op::Gelu(a)))
    }

    pub fn square(&self, a: Var) -> Result<Var> {
        let x = self.real_operand(a, "square")?;
        let out = &x * &x;
        Ok(self.push(Value::Real(out.into_shared()), Op::Square(a)))
    }

    /// Mean over all elements, as a `(1,1,1)` scalar node.
    pub fn mean(&self, a: Var) -> Result<Var> {
        let x = self.real_operand(a, "mean")?;
        let m = x.sum() / x.len() as f64;
        let out = Array3::from_elem((1, 1, 1), m);
        Ok(self.push(Value::Real(out.into_shared()), Op::Mean(a)))
    }

    /// One time level as a `(channels, 1, n_x)` tensor.
    pub fn slice_time(&self, input: Var, level: usize) -> Result<Var> {
        let x = self.real_operand(input, "slice_time")?;
        let (c, n_t, n_x) = x.dim();
        if level >= n_t {
            return Err(MmlError::InvalidArgument(format!(
                "time level {level} out of range for {n_t} levels"
            )));
        }
        let mut out = Array3::zeros((c, 1, n_x));
        for ch in 0..c {
            for j in 0..n_x {
                out[[ch, 0, j]] = x[[ch, level, j]];
            }
        }
        Ok(self.push(Value::Real(out.into_shared()), Op::SliceTime { input, level }))
    }

    /// Periodic wrap difference `u[·,·,0] − u[·,·,n_x−1]`, shape `(c, n_t, 1)`.
    pub fn wrap_diff(&self, input: Var) -> Result<Var> {
        let x = self.real_operand(input, "wrap_diff")?;
        let (c, n_t, n_x) = x.dim();
        if n_x < 2 {
            return Err(MmlError::InvalidArgument(
                "wrap_diff needs at least two spatial nodes".into(),
            ));
        }
        let mut out = Array3::zeros((c, n_t, 1));
        for ch in 0..c {
            for n in 0..n_t {
                out[[ch, n, 0]] = x[[ch, n, 0]] - x[[ch, n, n_x - 1]];
            }
        }
        Ok(self.push(Value::Real(out.into_shared()), Op::WrapDiff(input)))
    }

    /// Second-order finite-difference time derivative (central interior,
    /// one-sided endpoints), matching the spectral-engine stencil.
    pub fn fd_time(&self, input: Var, dt: f64) -> Result<Var> {
        let x = self.real_operand(input, "fd_time")?;
        let (_, n_t, _) = x.dim();
        if n_t < 3 {
            return Err(MmlError::InvalidArgument(
                "fd_time needs at least three time levels".into(),
            ));
        }
        if dt <= 0.0 {
            return Err(MmlError::InvalidArgument("dt must be positive".into()));
        }
        let out = fd_time_kernel(&x.view(), dt);
        Ok(self.push(Value::Real(out.into_shared()), Op::FdTime { input, dt }))
    }

    /// Spectral x-derivative of the given order on every (channel, time) row.
    pub fn spectral_dx(&self, input: Var, order: u32, length_x: f64) -> Result<Var> {
        let x = self.real_operand(input, "spectral_dx")?;
        if order == 0 {
            return Err(MmlError::InvalidArgument(
                "derivative order must be positive".into(),
            ));
        }
        if length_x <= 0.0 {
            return Err(MmlError::InvalidArgument(
                "domain length must be positive".into(),
            ));
        }
        let (_, _, n_x) = x.dim();
        let mult = derivative_multipliers(n_x, order, length_x, false);
        let out = apply_row_multipliers(&x.view(), &mult);
        Ok(self.push(
            Value::Real(out.into_shared()),
            Op::SpectralDx {
                input,
                order,
                length_x,
            },
        ))
    }

    /// Forward 2-D transform truncated to `modes_t` signed time modes and
    /// `modes_x` non-negative space modes.
    pub fn rfft2_trunc(&self, input: Var, modes_t: usize, modes_x: usize) -> Result<Var> {
        let x = self.real_operand(input, "rfft2_trunc")?;
        let (_, n_t, n_x) = x.dim();
        check_modes(modes_t, modes_x, n_t, n_x)?;
        let (re, im) = rfft2_trunc_kernel(&x.view(), modes_t, modes_x);
        Ok(self.push(
            Value::Spectral {
                re: re.into_shared(),
                im: im.into_shared(),
            },
            Op::Rfft2Trunc {
                input,
                modes_t,
                modes_x,
            },
        ))
    }

    /// Inverse of the truncated transform onto an `(n_t, n_x)` grid.
    pub fn irfft2_pad(&self, input: Var, n_t: usize, n_x: usize) -> Result<Var> {
        let (re, im) = match self.value(input) {
            Value::Spectral { re, im } => (re, im),
            other => {
                return Err(MmlError::InvalidArgument(format!(
                    "irfft2_pad expects a spectral tensor, found {}",
                    other.kind()
                )))
            }
        };
        let (_, two_mt, mx) = re.dim();
        check_modes(two_mt / 2, mx, n_t, n_x)?;
        let out = irfft2_pad_kernel(&re.view(), &im.view(), n_t, n_x);
        Ok(self.push(
            Value::Real(out.into_shared()),
            Op::Irfft2Pad { input, n_t, n_x },
        ))
    }

    /// Per-mode dense complex channel mixing: weights are real/imaginary
    /// tensors of shape `(c_out, c_in, 2·modes_t·modes_x)`.
    pub fn mode_mix(&self, input: Var, w_re: Var, w_im: Var) -> Result<Var> {
        let (xre, xim) = match self.value(input) {
            Value::Spectral { re, im } => (re, im),
            other => {
                return Err(MmlError::InvalidArgument(format!(
                    "mode_mix expects a spectral tensor, found {}",
                    other.kind()
                )))
            }
        };
        let wre = self.real_operand(w_re, "mode_mix")?;
        let wim = self.real_operand(w_im, "mode_mix")?;
        let (c_in, rows, cols) = xre.dim();
        let modes = rows * cols;
        let (c_out, w_cin, w_modes) = wre.dim();
        if wim.dim() != wre.dim() {
            return Err(MmlError::InvalidArgument(
                "mode_mix weight parts must share a shape".into(),
            ));
        }
        if w_cin != c_in || w_modes != modes {
            return Err(MmlError::InvalidArgument(format!(
                "mode_mix weight shape {:?} does not match input ({c_in} channels, {modes} modes)",
                wre.dim()
            )));
        }
        let mut ore = Array3::zeros((c_out, rows, cols));
        let mut oim = Array3::zeros((c_out, rows, cols));
        {
            let (xr, xi) = (as_slice(&xre), as_slice(&xim));
            let (wr, wi) = (as_slice(&wre), as_slice(&wim));
            let or = ore.as_slice_mut().unwrap();
            let oi = oim.as_slice_mut().unwrap();
            for o in 0..c_out {
                for i in 0..c_in {
                    let wr = &wr[(o * c_in + i) * modes..][..modes];
                    let wi = &wi[(o * c_in + i) * modes..][..modes];
                    let xr = &xr[i * modes..][..modes];
                    let xi = &xi[i * modes..][..modes];
                    let or = &mut or[o * modes..][..modes];
                    let oi = &mut oi[o * modes..][..modes];
                    for m in 0..modes {
                        or[m] += wr[m] * xr[m] - wi[m] * xi[m];
                        oi[m] += wr[m] * xi[m] + wi[m] * xr[m];
                    }
                }
            }
        }
        Ok(self.push(
            Value::Spectral {
                re: ore.into_shared(),
                im: oim.into_shared(),
            },
            Op::ModeMix { input, w_re, w_im },
        ))
    }

    /// Reverse pass from a scalar loss node; returns one gradient per
    /// influencing node, accumulated in fixed tape order.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        {
            let t = self.real_value(loss)?;
            if t.dim() != (1, 1, 1) {
                return Err(MmlError::InvalidArgument(format!(
                    "backward needs a scalar loss, found shape {:?}",
                    t.dim()
                )));
            }
        }
        let nodes = self.nodes.borrow();
        let mut slots: Vec<Option<Grad>> = Vec::with_capacity(nodes.len());
        slots.resize_with(nodes.len(), || None);
        slots[loss.0] = Some(Grad::Real(Array3::from_elem((1, 1, 1), 1.0)));

        for idx in (0..=loss.0).rev() {
            // Take this node's accumulated gradient; leaves keep theirs.
            let grad = match &nodes[idx].op {
                Op::Leaf => continue,
                _ => match slots[idx].take() {
                    Some(g) => g,
                    None => continue,
                },
            };
            match &nodes[idx].op {
                Op::Leaf => unreachable!(),
                Op::Add(a, b) => {
                    let g = expect_real(&grad);
                    add_real(&mut slots, *a, g.clone());
                    add_real(&mut slots, *b, g.clone());
                }
                Op::Sub(a, b) => {
                    let g = expect_real(&grad);
                    add_real(&mut slots, *a, g.clone());
                    add_real(&mut slots, *b, g.mapv(|v| -v));
                }
                Op::Mul(a, b) => {
                    let g = expect_real(&grad);
                    let va = value_real(&nodes, *a);
                    let vb = value_real(&nodes, *b);
                    add_real(&mut slots, *a, g * &vb);
                    add_real(&mut slots, *b, g * &va);
                }
                Op::Scale(a, factor) => {
                    let g = expect_real(&grad);
                    add_real(&mut slots, *a, g.mapv(|v| v * factor));
                }
                Op::ChannelMix {
                    input,
                    weight,
                    bias,
                } => {
                    let g = expect_real(&grad);
                    let x = value_real(&nodes, *input);
                    let w = value_real(&nodes, *weight);
                    let (c_in, n_t, n_x) = x.dim();
                    let c_out = w.dim().0;
                    let pts = n_t * n_x;
                    let gs = g.as_slice().unwrap();

                    // dX = Wᵀ·G
                    let mut dx = Array3::zeros((c_in, n_t, n_x));
                    matmul(
                        w.as_slice().unwrap(),
                        gs,
                        dx.as_slice_mut().unwrap(),
                        c_in,
                        c_out,
                        pts,
                        true,
                        false,
                    );
                    add_real(&mut slots, *input, dx);

                    // dW = G·Xᵀ
                    let mut dw = Array3::zeros((c_out, c_in, 1));
                    matmul(
                        gs,
                        x.as_slice().unwrap(),
                        dw.as_slice_mut().unwrap(),
                        c_out,
                        pts,
                        c_in,
                        false,
                        true,
                    );
                    add_real(&mut slots, *weight, dw);

                    if let Some(b) = bias {
                        let mut db = Array3::zeros((c_out, 1, 1));
                        for o in 0..c_out {
                            db[[o, 0, 0]] = gs[o * pts..][..pts].iter().sum();
                        }
                        add_real(&mut slots, *b, db);
                    }
                }
                Op::Gelu(a) => {
                    let g = expect_real(&grad);
                    let x = value_real(&nodes, *a);
                    let mut dx = x.to_owned();
                    dx.zip_mut_with(g, |xv, gv| *xv = gelu_derivative(*xv) * gv);
                    add_real(&mut slots, *a, dx);
                }
                Op::Square(a) => {
                    let g = expect_real(&grad);
                    let x = value_real(&nodes, *a);
                    let mut dx = x.to_owned();
                    dx.zip_mut_with(g, |xv, gv| *xv = 2.0 * *xv * gv);
                    add_real(&mut slots, *a, dx);
                }
                Op::Mean(a) => {
                    let g = expect_real(&grad)[[0, 0, 0]];
                    let x = value_real(&nodes, *a);
                    let share = g / x.len() as f64;
                    add_real(&mut slots, *a, Array3::from_elem(x.dim(), share));
                }
                Op::SliceTime { input, level } => {
                    let g = expect_real(&grad);
                    let x = value_real(&nodes, *input);
                    let (c, _, n_x) = x.dim();
                    let mut dx = Array3::zeros(x.dim());
                    for ch in 0..c {
                        for j in 0..n_x {
                            dx[[ch, *level, j]] = g[[ch, 0, j]];
                        }
                    }
                    add_real(&mut slots, *input, dx);
                }
                Op::WrapDiff(a) => {
                    let g = expect_real(&grad);
                    let x = value_real(&nodes, *a);
                    let (c, n_t, n_x) = x.dim();
                    let mut dx = Array3::zeros(x.dim());
                    for ch in 0..c {
                        for n in 0..n_t {
                            let gv = g[[ch, n, 0]];
                            dx[[ch, n, 0]] += gv;
                            dx[[ch, n, n_x - 1]] -= gv;
                        }
                    }
                    add_real(&mut slots, *a, dx);
                }
                Op::FdTime { input, dt } => {
                    let g = expect_real(&grad);
                    add_real(&mut slots, *input, fd_time_adjoint(&g.view(), *dt));
                }
                Op::SpectralDx {
                    input,
                    order,
                    length_x,
                } => {
                    let g = expect_real(&grad);
                    let (_, _, n_x) = g.dim();
                    let mult = derivative_multipliers(n_x, *order, *length_x, true);
                    add_real(&mut slots, *input, apply_row_multipliers(&g.view(), &mult));
                }
                Op::Rfft2Trunc {
                    input,
                    modes_t,
                    modes_x,
                } => {
                    let (gre, gim) = expect_spectral(&grad);
                    let x = value_real(&nodes, *input);
                    let (_, n_t, n_x) = x.dim();
                    let dx = rfft2_trunc_adjoint(&gre.view(), &gim.view(), n_t, n_x);
                    let _ = modes_t;
                    let _ = modes_x;
                    add_real(&mut slots, *input, dx);
                }
                Op::Irfft2Pad { input, n_t, n_x } => {
                    let g = expect_real(&grad);
                    let (two_mt, mx) = match &nodes[input.0].value {
                        Value::Spectral { re, .. } => (re.dim().1, re.dim().2),
                        _ => unreachable!("irfft2_pad input is spectral by construction"),
                    };
                    let (dre, dim) = irfft2_pad_adjoint(&g.view(), two_mt / 2, mx);
                    let _ = (n_t, n_x);
                    add_spectral(&mut slots, *input, dre, dim);
                }
                Op::ModeMix { input, w_re, w_im } => {
                    let (gre, gim) = expect_spectral(&grad);
                    let (xre, xim) = value_spectral(&nodes, *input);
                    let wre = value_real(&nodes, *w_re);
                    let wim = value_real(&nodes, *w_im);
                    let (c_in, rows, cols) = xre.dim();
                    let modes = rows * cols;
                    let c_out = wre.dim().0;

                    let mut dxre = Array3::zeros(xre.dim());
                    let mut dxim = Array3::zeros(xre.dim());
                    let mut dwre = Array3::zeros(wre.dim());
                    let mut dwim = Array3::zeros(wre.dim());
                    {
                        let gr = gre.as_slice().unwrap();
                        let gi = gim.as_slice().unwrap();
                        let xr = xre.as_slice().unwrap();
                        let xi = xim.as_slice().unwrap();
                        let wr = wre.as_slice().unwrap();
                        let wi = wim.as_slice().unwrap();
                        let dxr = dxre.as_slice_mut().unwrap();
                        let dxi = dxim.as_slice_mut().unwrap();
                        let dwr = dwre.as_slice_mut().unwrap();
                        let dwi = dwim.as_slice_mut().unwrap();
                        for o in 0..c_out {
                            let gr = &gr[o * modes..][..modes];
                            let gi = &gi[o * modes..][..modes];
                            for i in 0..c_in {
                                let base = (o * c_in + i) * modes;
                                let wr = &wr[base..][..modes];
                                let wi = &wi[base..][..modes];
                                let xr = &xr[i * modes..][..modes];
                                let xi = &xi[i * modes..][..modes];
                                let dxr = &mut dxr[i * modes..][..modes];
                                let dxi = &mut dxi[i * modes..][..modes];
                                let dwr = &mut dwr[base..][..modes];
                                let dwi = &mut dwi[base..][..modes];
                                for m in 0..modes {
                                    dxr[m] += gr[m] * wr[m] + gi[m] * wi[m];
                                    dxi[m] += -gr[m] * wi[m] + gi[m] * wr[m];
                                    dwr[m] += gr[m] * xr[m] + gi[m] * xi[m];
                                    dwi[m] += -gr[m] * xi[m] + gi[m] * xr[m];
                                }
                            }
                        }
                    }
                    add_spectral(&mut slots, *input, dxre, dxim);
                    add_real(&mut slots, *w_re, dwre);
                    add_real(&mut slots, *w_im, dwim);
                }
            }
        }
        Ok(Gradients { slots })
    }
}

fn expect_real(grad: &Grad) -> &Array3<f64> {
    match grad {
        Grad::Real(g) => g,
        _ => unreachable!("op output kind fixes its gradient kind"),
    }
}

fn expect_spectral(grad: &Grad) -> (&Array3<f64>, &Array3<f64>) {
    match grad {
        Grad::Spectral { re, im } => (re, im),
        _ => unreachable!("op output kind fixes its gradient kind"),
    }
}

fn value_real(nodes: &[Node], var: Var) -> SharedTensor {
    match &nodes[var.0].value {
        Value::Real(t) => t.clone(),
        _ => unreachable!("operand kinds are checked at recording time"),
    }
}

fn value_spectral(nodes: &[Node], var: Var) -> (SharedTensor, SharedTensor) {
    match &nodes[var.0].value {
        Value::Spectral { re, im } => (re.clone(), im.clone()),
        _ => unreachable!("operand kinds are checked at recording time"),
    }
}

fn add_real(slots: &mut [Option<Grad>], var: Var, contribution: Array3<f64>) {
    match &mut slots[var.0] {
        Some(Grad::Real(g)) => *g += &contribution,
        slot @ None => *slot = Some(Grad::Real(contribution)),
        _ => unreachable!("gradient kind is fixed per node"),
    }
}

fn add_spectral(slots: &mut [Option<Grad>], var: Var, re: Array3<f64>, im: Array3<f64>) {
    match &mut slots[var.0] {
        Some(Grad::Spectral { re: gr, im: gi }) => {
            *gr += &re;
            *gi += &im;
        }
        slot @ None => *slot = Some(Grad::Spectral { re, im }),
        _ => unreachable!("gradient kind is fixed per node"),
    }
}

/// `C = A·B` over row-major buffers, with optional logical transposes.
#[allow(clippy::too_many_arguments)]
fn matmul(
    a: &[f64],
    b: &[f64],
    c: &mut [f64],
    m: usize,
    k: usize,
    n: usize,
    transpose_a: bool,
    transpose_b: bool,
) {
    let (rsa, csa) = if transpose_a {
        (1, m as isize)
    } else {
        (k as isize, 1)
    };
    let (rsb, csb) = if transpose_b {
        (1, k as isize)
    } else {
        (n as isize, 1)
    };
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // √(2/π)
const GELU_A: f64 = 0.044715;

fn gelu_value(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_derivative(x: f64) -> f64 {
    let inner = GELU_C * (x + GELU_A * x * x * x);
    let t = inner.tanh();
    let d_inner = GELU_C * (1.0 + 3.0 * GELU_A * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * d_inner
}

fn fd_time_kernel(x: &ArrayView3<f64>, dt: f64) -> Array3<f64> {
    let (c, n_t, n_x) = x.dim();
    let mut out = Array3::zeros((c, n_t, n_x));
    let half = 0.5 / dt;
    for ch in 0..c {
        for j in 0..n_x {
            out[[ch, 0, j]] =
                (-3.0 * x[[ch, 0, j]] + 4.0 * x[[ch, 1, j]] - x[[ch, 2, j]]) * half;
            out[[ch, n_t - 1, j]] = (3.0 * x[[ch, n_t - 1, j]] - 4.0 * x[[ch, n_t - 2, j]]
                + x[[ch, n_t - 3, j]])
                * half;
        }
        for n in 1..n_t - 1 {
            for j in 0..n_x {
                out[[ch, n, j]] = (x[[ch, n + 1, j]] - x[[ch, n - 1, j]]) * half;
            }
        }
    }
    out
}

/// Transpose of the time stencil: scatter each output row's weights back
/// onto the input levels it read.
fn fd_time_adjoint(g: &ArrayView3<f64>, dt: f64) -> Array3<f64> {
    let (c, n_t, n_x) = g.dim();
    let mut out = Array3::zeros((c, n_t, n_x));
    let half = 0.5 / dt;
    for ch in 0..c {
        for j in 0..n_x {
            let g0 = g[[ch, 0, j]];
            out[[ch, 0, j]] += -3.0 * half * g0;
            out[[ch, 1, j]] += 4.0 * half * g0;
            out[[ch, 2, j]] += -half * g0;
            let gl = g[[ch, n_t - 1, j]];
            out[[ch, n_t - 1, j]] += 3.0 * half * gl;
            out[[ch, n_t - 2, j]] += -4.0 * half * gl;
            out[[ch, n_t - 3, j]] += half * gl;
        }
        for n in 1..n_t - 1 {
            for j in 0..n_x {
                let gv = g[[ch, n, j]];
                out[[ch, n + 1, j]] += half * gv;
                out[[ch, n - 1, j]] -= half * gv;
            }
        }
    }
    out
}

/// Diagonal multipliers of the spectral derivative; `conjugate` yields the
/// adjoint, which for order p equals (−1)^p times the derivative itself.
fn derivative_multipliers(n_x: usize, order: u32, length_x: f64, conjugate: bool) -> Vec<Complex64> {
    let ladder = WavenumberLadder::new(n_x, length_x);
    (0..n_x)
        .map(|m| {
            let mult = ladder.multiplier(m, order);
            if conjugate {
                mult.conj()
            } else {
                mult
            }
        })
        .collect()
}

fn apply_row_multipliers(x: &ArrayView3<f64>, mult: &[Complex64]) -> Array3<f64> {
    let (c, n_t, n_x) = x.dim();
    let mut out = Array3::zeros((c, n_t, n_x));
    for ch in 0..c {
        for n in 0..n_t {
            let row: Vec<f64> = (0..n_x).map(|j| x[[ch, n, j]]).collect();
            let mut spec = fft::fft_real(&row);
            for (s, m) in spec.iter_mut().zip(mult) {
                *s *= m;
            }
            let back = fft::ifft_real(&spec);
            for (j, v) in back.into_iter().enumerate() {
                out[[ch, n, j]] = v;
            }
        }
    }
    out
}

fn check_modes(modes_t: usize, modes_x: usize, n_t: usize, n_x: usize) -> Result<()> {
    if modes_t == 0 || modes_x == 0 {
        return Err(MmlError::InvalidArgument(
            "mode counts must be positive".into(),
        ));
    }
    if 2 * modes_t > n_t {
        return Err(MmlError::InvalidArgument(format!(
            "2·modes_t = {} exceeds n_t = {n_t}",
            2 * modes_t
        )));
    }
    if modes_x > n_x / 2 + 1 {
        return Err(MmlError::InvalidArgument(format!(
            "modes_x = {modes_x} exceeds the {n_x}-point half spectrum"
        )));
    }
    Ok(())
}

/// Weight giving dropped conjugate columns their energy: 1 on self-conjugate
/// columns (k_x = 0 and the even-grid Nyquist), 2 elsewhere.
fn column_weight(n_x: usize, j: usize) -> f64 {
    if j == 0 || (n_x % 2 == 0 && j == n_x / 2) {
        1.0
    } else {
        2.0
    }
}

/// Rows 0..modes_t hold non-negative time modes, rows modes_t..2·modes_t the
/// most negative ones (full-spectrum rows n_t−modes_t..n_t).
pub(crate) fn rfft2_trunc_kernel(
    x: &ArrayView3<f64>,
    modes_t: usize,
    modes_x: usize,
) -> (Array3<f64>, Array3<f64>) {
    let (c, n_t, n_x) = x.dim();
    let mut re = Array3::zeros((c, 2 * modes_t, modes_x));
    let mut im = Array3::zeros((c, 2 * modes_t, modes_x));
    let mut buf = vec![Complex64::default(); n_t * n_x];
    for ch in 0..c {
        for n in 0..n_t {
            for j in 0..n_x {
                buf[n * n_x + j] = Complex64::new(x[[ch, n, j]], 0.0);
            }
        }
        for row in buf.chunks_exact_mut(n_x) {
            fft::fft_inplace(row);
        }
        fft::fft_columns(&mut buf, n_t, n_x, false, modes_x);
        for r in 0..2 * modes_t {
            let src = if r < modes_t { r } else { n_t - 2 * modes_t + r };
            for j in 0..modes_x {
                let v = buf[src * n_x + j] * column_weight(n_x, j);
                re[[ch, r, j]] = v.re;
                im[[ch, r, j]] = v.im;
            }
        }
    }
    (re, im)
}

/// Adjoint of the truncated forward transform: real part of the unnormalized
/// zero-padded inverse FFT of the column-weighted cotangent.
pub(crate) fn rfft2_trunc_adjoint(
    gre: &ArrayView3<f64>,
    gim: &ArrayView3<f64>,
    n_t: usize,
    n_x: usize,
) -> Array3<f64> {
    let (c, two_mt, mx) = gre.dim();
    let mt = two_mt / 2;
    let mut out = Array3::zeros((c, n_t, n_x));
    let mut buf = vec![Complex64::default(); n_t * n_x];
    for ch in 0..c {
        buf.fill(Complex64::default());
        for r in 0..two_mt {
            let dst = if r < mt { r } else { n_t - 2 * mt + r };
            for j in 0..mx {
                buf[dst * n_x + j] = Complex64::new(gre[[ch, r, j]], gim[[ch, r, j]])
                    * column_weight(n_x, j);
            }
        }
        fft::fft_columns(&mut buf, n_t, n_x, true, mx);
        for row in buf.chunks_exact_mut(n_x) {
            fft::ifft_inplace(row);
        }
        for n in 0..n_t {
            for j in 0..n_x {
                out[[ch, n, j]] = buf[n * n_x + j].re;
            }
        }
    }
    out
}

/// Real part of the normalized zero-padded inverse transform.
pub(crate) fn irfft2_pad_kernel(
    re: &ArrayView3<f64>,
    im: &ArrayView3<f64>,
    n_t: usize,
    n_x: usize,
) -> Array3<f64> {
    let (c, two_mt, mx) = re.dim();
    let mt = two_mt / 2;
    let scale = 1.0 / (n_t * n_x) as f64;
    let mut out = Array3::zeros((c, n_t, n_x));
    let mut buf = vec![Complex64::default(); n_t * n_x];
    for ch in 0..c {
        buf.fill(Complex64::default());
        for r in 0..two_mt {
            let dst = if r < mt { r } else { n_t - 2 * mt + r };
            for j in 0..mx {
                buf[dst * n_x + j] = Complex64::new(re[[ch, r, j]], im[[ch, r, j]]);
            }
        }
        fft::fft_columns(&mut buf, n_t, n_x, true, mx);
        for row in buf.chunks_exact_mut(n_x) {
            fft::ifft_inplace(row);
        }
        for n in 0..n_t {
            for j in 0..n_x {
                out[[ch, n, j]] = buf[n * n_x + j].re * scale;
            }
        }
    }
    out
}

/// Adjoint of the padded inverse transform: normalized forward FFT of the
/// cotangent, gathered at the retained modes without column weighting.
pub(crate) fn irfft2_pad_adjoint(
    g: &ArrayView3<f64>,
    modes_t: usize,
    modes_x: usize,
) -> (Array3<f64>, Array3<f64>) {
    let (c, n_t, n_x) = g.dim();
    let scale = 1.0 / (n_t * n_x) as f64;
    let mut re = Array3::zeros((c, 2 * modes_t, modes_x));
    let mut im = Array3::zeros((c, 2 * modes_t, modes_x));
    let mut buf = vec![Complex64::default(); n_t * n_x];
    for ch in 0..c {
        for n in 0..n_t {
            for j in 0..n_x {
                buf[n * n_x + j] = Complex64::new(g[[ch, n, j]], 0.0);
            }
        }
        for row in buf.chunks_exact_mut(n_x) {
            fft::fft_inplace(row);
        }
        fft::fft_columns(&mut buf, n_t, n_x, false, modes_x);
        for r in 0..2 * modes_t {
            let src = if r < modes_t { r } else { n_t - 2 * modes_t + r };
            for j in 0..modes_x {
                let v = buf[src * n_x + j];
                re[[ch, r, j]] = v.re * scale;
                im[[ch, r, j]] = v.im * scale;
            }
        }
    }
    (re, im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use std::f64::consts::TAU;

    fn random_tensor(rng: &mut ChaCha12Rng, shape: (usize, usize, usize)) -> Array3<f64> {
        Array3::from_shape_fn(shape, |_| rng.gen_range(-1.0..1.0))
    }

    /// Central finite differences against the analytic gradient of a scalar
    /// loss built by `build` from leaf tensors.
    fn gradcheck<F>(build: F, seeds: &[Array3<f64>], tol: f64)
    where
        F: Fn(&Tape, &[Var]) -> Var,
    {
        let eval = |tensors: &[Array3<f64>]| -> f64 {
            let tape = Tape::new();
            let vars: Vec<Var> = tensors.iter().map(|t| tape.constant(t.clone())).collect();
            let loss = build(&tape, &vars);
            tape.scalar_value(loss).unwrap()
        };
        let tape = Tape::new();
        let vars: Vec<Var> = seeds.iter().map(|t| tape.constant(t.clone())).collect();
        let loss = build(&tape, &vars);
        let grads = tape.backward(loss).unwrap();
        let eps = 1e-5;
        for (i, seed) in seeds.iter().enumerate() {
            let zero = Array3::zeros(seed.dim());
            let analytic = grads.real(vars[i]).unwrap_or(&zero);
            let mut perturbed: Vec<Array3<f64>> = seeds.to_vec();
            for idx in 0..seed.len() {
                let (c, nt, nx) = seed.dim();
                let coord = (idx / (nt * nx), (idx / nx) % nt, idx % nx);
                let _ = c;
                let base = seed[coord];
                perturbed[i][coord] = base + eps;
                let up = eval(&perturbed);
                perturbed[i][coord] = base - eps;
                let down = eval(&perturbed);
                perturbed[i][coord] = base;
                let fd = (up - down) / (2.0 * eps);
                let a = analytic[coord];
                let denom = a.abs().max(fd.abs()).max(1e-3);
                assert!(
                    ((a - fd) / denom).abs() <= tol,
                    "input {i} element {coord:?}: analytic {a} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn mean_of_square_gradient() {
        let tape = Tape::new();
        let x = tape.constant(Array3::from_elem((1, 1, 1), 3.0));
        let loss = tape.mean(tape.square(x).unwrap()).unwrap();
        assert!((tape.scalar_value(loss).unwrap() - 9.0).abs() < 1e-15);
        let grads = tape.backward(loss).unwrap();
        assert!((grads.real(x).unwrap()[[0, 0, 0]] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn gelu_at_origin() {
        assert_eq!(gelu_value(0.0), 0.0);
        assert!((gelu_derivative(0.0) - 0.5).abs() < 1e-15);
        let tape = Tape::new();
        let x = tape.constant(Array3::zeros((1, 1, 1)));
        let loss = tape.mean(tape.gelu(x).unwrap()).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert!((grads.real(x).unwrap()[[0, 0, 0]] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn elementwise_ops_match_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let a = random_tensor(&mut rng, (2, 4, 5));
        let b = random_tensor(&mut rng, (2, 4, 5));
        gradcheck(
            |tape, v| {
                let s = tape.add(v[0], v[1]).unwrap();
                let d = tape.sub(s, v[1]).unwrap();
                let p = tape.mul(d, v[1]).unwrap();
                let sc = tape.scale(p, 1.7).unwrap();
                tape.mean(tape.square(sc).unwrap()).unwrap()
            },
            &[a, b],
            1e-5,
        );
    }

    #[test]
    fn gelu_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let a = random_tensor(&mut rng, (2, 3, 4));
        gradcheck(
            |tape, v| {
                let g = tape.gelu(v[0]).unwrap();
                tape.mean(tape.square(g).unwrap()).unwrap()
            },
            &[a],
            1e-5,
        );
    }

    #[test]
    fn channel_mix_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let x = random_tensor(&mut rng, (3, 4, 5));
        let w = random_tensor(&mut rng, (2, 3, 1));
        let b = random_tensor(&mut rng, (2, 1, 1));
        gradcheck(
            |tape, v| {
                let y = tape.channel_mix(v[0], v[1], Some(v[2])).unwrap();
                tape.mean(tape.square(y).unwrap()).unwrap()
            },
            &[x, w, b],
            1e-5,
        );
    }

    #[test]
    fn structural_ops_match_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let x = random_tensor(&mut rng, (2, 5, 6));
        gradcheck(
            |tape, v| {
                let s = tape.slice_time(v[0], 2).unwrap();
                let w = tape.wrap_diff(v[0]).unwrap();
                let ls = tape.mean(tape.square(s).unwrap()).unwrap();
                let lw = tape.mean(tape.square(w).unwrap()).unwrap();
                tape.add(ls, lw).unwrap()
            },
            &[x],
            1e-5,
        );
    }

    #[test]
    fn derivative_ops_match_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let x = random_tensor(&mut rng, (1, 5, 8));
        gradcheck(
            |tape, v| {
                let dt = tape.fd_time(v[0], 0.25).unwrap();
                let dx = tape.spectral_dx(v[0], 1, TAU).unwrap();
                let dxx = tape.spectral_dx(v[0], 2, TAU).unwrap();
                let l1 = tape.mean(tape.square(dt).unwrap()).unwrap();
                let l2 = tape.mean(tape.square(dx).unwrap()).unwrap();
                let l3 = tape.mean(tape.square(dxx).unwrap()).unwrap();
                tape.add(tape.add(l1, l2).unwrap(), l3).unwrap()
            },
            &[x],
            1e-5,
        );
    }

    #[test]
    fn transform_pair_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let x = random_tensor(&mut rng, (2, 6, 8));
        gradcheck(
            |tape, v| {
                let spec = tape.rfft2_trunc(v[0], 2, 3).unwrap();
                let back = tape.irfft2_pad(spec, 6, 8).unwrap();
                tape.mean(tape.square(back).unwrap()).unwrap()
            },
            &[x],
            1e-5,
        );
    }

    #[test]
    fn mode_mix_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let x = random_tensor(&mut rng, (2, 6, 8));
        let w_re = random_tensor(&mut rng, (3, 2, 2 * 2 * 3));
        let w_im = random_tensor(&mut rng, (3, 2, 2 * 2 * 3));
        gradcheck(
            |tape, v| {
                let spec = tape.rfft2_trunc(v[0], 2, 3).unwrap();
                let mixed = tape.mode_mix(spec, v[1], v[2]).unwrap();
                let back = tape.irfft2_pad(mixed, 6, 8).unwrap();
                tape.mean(tape.square(back).unwrap()).unwrap()
            },
            &[x, w_re, w_im],
            1e-5,
        );
    }

    #[test]
    fn round_trip_is_identity_at_full_retention() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let x = random_tensor(&mut rng, (2, 8, 10));
        let tape = Tape::new();
        let v = tape.constant(x.clone());
        let spec = tape.rfft2_trunc(v, 4, 6).unwrap();
        let back = tape.irfft2_pad(spec, 8, 10).unwrap();
        let y = tape.real_value(back).unwrap();
        for (a, b) in x.iter().zip(y.iter()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn truncation_reproduces_band_limited_fields_and_contracts_energy() {
        // A field whose modes satisfy |k_t| < modes_t and |k_x| < modes_x
        // passes through forward+inverse unchanged.
        let (n_t, n_x, mt, mx) = (8, 8, 2, 3);
        let x = Array3::from_shape_fn((1, n_t, n_x), |(_, n, j)| {
            let t = TAU * n as f64 / n_t as f64;
            let s = TAU * j as f64 / n_x as f64;
            0.7 * (t + 2.0 * s).cos() + 0.4 * (t - s + 0.3).sin() + 0.2 * (2.0 * s).cos()
        });
        let tape = Tape::new();
        let v = tape.constant(x.clone());
        let spec = tape.rfft2_trunc(v, mt, mx).unwrap();
        let back = tape.irfft2_pad(spec, n_t, n_x).unwrap();
        let y = tape.real_value(back).unwrap();
        for (a, b) in x.iter().zip(y.iter()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }

        // On arbitrary fields the truncation never amplifies energy.
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..4 {
            let r = random_tensor(&mut rng, (1, n_t, n_x));
            let tape = Tape::new();
            let v = tape.constant(r.clone());
            let spec = tape.rfft2_trunc(v, mt, mx).unwrap();
            let back = tape.irfft2_pad(spec, n_t, n_x).unwrap();
            let p = tape.real_value(back).unwrap();
            let before: f64 = r.iter().map(|v| v * v).sum();
            let after: f64 = p.iter().map(|v| v * v).sum();
            assert!(after <= before + 1e-12, "{after} > {before}");
        }
    }

    #[test]
    fn spectral_derivative_adjoint_identity() {
        // ⟨D u, v⟩ = −⟨u, D v⟩ for the first derivative on a periodic row.
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let u = random_tensor(&mut rng, (1, 3, 16));
        let v = random_tensor(&mut rng, (1, 3, 16));
        let mult = derivative_multipliers(16, 1, TAU, false);
        let du = apply_row_multipliers(&u.view(), &mult);
        let dv = apply_row_multipliers(&v.view(), &mult);
        let lhs: f64 = du.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        let rhs: f64 = u.iter().zip(dv.iter()).map(|(a, b)| a * b).sum();
        assert!((lhs + rhs).abs() < 1e-10, "{lhs} vs {rhs}");
    }

    #[test]
    fn truncated_transform_adjoint_identity() {
        // ⟨F x, y⟩ = ⟨x, F† y⟩ with the real inner product on (re, im) pairs.
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let x = random_tensor(&mut rng, (2, 8, 10));
        let y_re = random_tensor(&mut rng, (2, 6, 4));
        let y_im = random_tensor(&mut rng, (2, 6, 4));
        let (fx_re, fx_im) = rfft2_trunc_kernel(&x.view(), 3, 4);
        let lhs: f64 = fx_re.iter().zip(y_re.iter()).map(|(a, b)| a * b).sum::<f64>()
            + fx_im.iter().zip(y_im.iter()).map(|(a, b)| a * b).sum::<f64>();
        let fty = rfft2_trunc_adjoint(&y_re.view(), &y_im.view(), 8, 10);
        let rhs: f64 = x.iter().zip(fty.iter()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
    }

    #[test]
    fn padded_inverse_adjoint_identity() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let c_re = random_tensor(&mut rng, (1, 4, 3));
        let c_im = random_tensor(&mut rng, (1, 4, 3));
        let y = random_tensor(&mut rng, (1, 8, 8));
        let ix = irfft2_pad_kernel(&c_re.view(), &c_im.view(), 8, 8);
        let lhs: f64 = ix.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
        let (ad_re, ad_im) = irfft2_pad_adjoint(&y.view(), 2, 3);
        let rhs: f64 = c_re.iter().zip(ad_re.iter()).map(|(a, b)| a * b).sum::<f64>()
            + c_im.iter().zip(ad_im.iter()).map(|(a, b)| a * b).sum::<f64>();
        assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
    }

    #[test]
    fn linear_functional_gradient() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let w = random_tensor(&mut rng, (1, 4, 4));
        let x = random_tensor(&mut rng, (1, 4, 4));
        let tape = Tape::new();
        let wv = tape.constant(w.clone());
        let xv = tape.constant(x);
        let loss = tape.mean(tape.mul(wv, xv).unwrap()).unwrap();
        let grads = tape.backward(loss).unwrap();
        let gx = grads.real(xv).unwrap();
        for (g, wv) in gx.iter().zip(w.iter()) {
            assert!((g - wv / 16.0).abs() < 1e-14);
        }
    }

    #[test]
    fn disconnected_leaf_has_no_gradient() {
        let tape = Tape::new();
        let x = tape.constant(Array3::from_elem((1, 2, 2), 1.0));
        let orphan = tape.constant(Array3::from_elem((1, 2, 2), 5.0));
        let loss = tape.mean(tape.square(x).unwrap()).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert!(grads.real(orphan).is_none());
        assert!(grads.real(x).is_some());
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let tape = Tape::new();
        let x = tape.constant(Array3::zeros((1, 2, 3)));
        let y = tape.square(x).unwrap();
        assert!(tape.backward(y).is_err());
    }

    #[test]
    fn backward_is_deterministic() {
        let run = || -> Vec<f64> {
            let mut rng = ChaCha12Rng::seed_from_u64(14);
            let x = random_tensor(&mut rng, (2, 6, 8));
            let w_re = random_tensor(&mut rng, (2, 2, 2 * 2 * 3));
            let w_im = random_tensor(&mut rng, (2, 2, 2 * 2 * 3));
            let tape = Tape::new();
            let xv = tape.constant(x);
            let wr = tape.constant(w_re);
            let wi = tape.constant(w_im);
            let spec = tape.rfft2_trunc(xv, 2, 3).unwrap();
            let mixed = tape.mode_mix(spec, wr, wi).unwrap();
            let back = tape.irfft2_pad(mixed, 6, 8).unwrap();
            let act = tape.gelu(back).unwrap();
            let loss = tape.mean(tape.square(act).unwrap()).unwrap();
            let grads = tape.backward(loss).unwrap();
            grads.real(wr).unwrap().iter().copied().collect()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let tape = Tape::new();
        let a = tape.constant(Array3::zeros((1, 2, 3)));
        let b = tape.constant(Array3::zeros((1, 3, 2)));
        assert!(tape.add(a, b).is_err());
        assert!(tape.mul(a, b).is_err());
        let w = tape.constant(Array3::zeros((2, 5, 1)));
        assert!(tape.channel_mix(a, w, None).is_err());
        assert!(tape.slice_time(a, 9).is_err());
        assert!(tape.rfft2_trunc(a, 2, 2).is_err()); // 2·2 > n_t = 2
    }
}

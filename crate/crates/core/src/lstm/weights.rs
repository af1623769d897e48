use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{Error, Result};

/// Input-to-gate, hidden-to-gate and bias parameters of one gate.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    /// H x D
    pub w: Array2<f64>,
    /// H x H
    pub u: Array2<f64>,
    pub b: Array1<f64>,
}

impl Gate {
    fn zeros(n_inputs: usize, hidden: usize) -> Self {
        Gate {
            w: Array2::zeros((hidden, n_inputs)),
            u: Array2::zeros((hidden, hidden)),
            b: Array1::zeros(hidden),
        }
    }
}

/// Parameters of one LSTM direction.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmDirectionWeights {
    pub input: Gate,
    pub forget: Gate,
    pub cell: Gate,
    pub output: Gate,
}

impl LstmDirectionWeights {
    pub fn zeros(n_inputs: usize, hidden: usize) -> Self {
        LstmDirectionWeights {
            input: Gate::zeros(n_inputs, hidden),
            forget: Gate::zeros(n_inputs, hidden),
            cell: Gate::zeros(n_inputs, hidden),
            output: Gate::zeros(n_inputs, hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.input.b.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.input.w.ncols()
    }

    fn gates(&self) -> [(&'static str, &Gate); 4] {
        [
            ("i", &self.input),
            ("f", &self.forget),
            ("g", &self.cell),
            ("o", &self.output),
        ]
    }

    fn gates_mut(&mut self) -> [(&'static str, &mut Gate); 4] {
        [
            ("i", &mut self.input),
            ("f", &mut self.forget),
            ("g", &mut self.cell),
            ("o", &mut self.output),
        ]
    }
}

/// All trainable parameters: both LSTM directions and the linear read-out.
///
/// The same structure doubles as a gradient and as optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmWeights {
    pub forward: LstmDirectionWeights,
    pub backward: LstmDirectionWeights,
    /// D x 2H, columns `0..H` read the forward state.
    pub dense_w: Array2<f64>,
    pub dense_b: Array1<f64>,
}

/// Shape and storage of one parameter block, row-major.
#[derive(Debug)]
pub struct Block<'a> {
    pub name: String,
    pub shape: (usize, usize),
    pub data: &'a [f64],
}

#[derive(Debug)]
pub struct BlockMut<'a> {
    pub name: String,
    pub shape: (usize, usize),
    pub data: &'a mut [f64],
}

fn slice2(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("parameter matrices are contiguous")
}

fn slice1(a: &Array1<f64>) -> &[f64] {
    a.as_slice().expect("parameter vectors are contiguous")
}

impl BiLstmWeights {
    pub fn zeros(n_series: usize, hidden: usize) -> Self {
        BiLstmWeights {
            forward: LstmDirectionWeights::zeros(n_series, hidden),
            backward: LstmDirectionWeights::zeros(n_series, hidden),
            dense_w: Array2::zeros((n_series, 2 * hidden)),
            dense_b: Array1::zeros(n_series),
        }
    }

    /// Glorot-uniform matrices, zero biases except a forget-gate bias of 1.
    pub fn init<R: Rng + ?Sized>(n_series: usize, hidden: usize, rng: &mut R) -> Self {
        let mut weights = Self::zeros(n_series, hidden);
        for direction in [&mut weights.forward, &mut weights.backward] {
            for (name, gate) in direction.gates_mut() {
                glorot(&mut gate.w, rng);
                glorot(&mut gate.u, rng);
                if name == "f" {
                    gate.b.fill(1.0);
                }
            }
        }
        glorot(&mut weights.dense_w, rng);
        weights
    }

    pub fn n_series(&self) -> usize {
        self.dense_b.len()
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden()
    }

    /// Same shapes, all zero.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.n_series(), self.hidden())
    }

    /// Parameter blocks in their canonical order.
    pub fn blocks(&self) -> Vec<Block<'_>> {
        let mut out = Vec::with_capacity(26);
        for (prefix, direction) in [("forward", &self.forward), ("backward", &self.backward)] {
            for (g, gate) in direction.gates() {
                out.push(Block {
                    name: format!("{prefix}.W_{g}"),
                    shape: gate.w.dim(),
                    data: slice2(&gate.w),
                });
                out.push(Block {
                    name: format!("{prefix}.U_{g}"),
                    shape: gate.u.dim(),
                    data: slice2(&gate.u),
                });
                out.push(Block {
                    name: format!("{prefix}.b_{g}"),
                    shape: (gate.b.len(), 1),
                    data: slice1(&gate.b),
                });
            }
        }
        out.push(Block {
            name: "dense_W".into(),
            shape: self.dense_w.dim(),
            data: slice2(&self.dense_w),
        });
        out.push(Block {
            name: "dense_b".into(),
            shape: (self.dense_b.len(), 1),
            data: slice1(&self.dense_b),
        });
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<BlockMut<'_>> {
        let mut out = Vec::with_capacity(26);
        for (prefix, direction) in [("forward", &mut self.forward), ("backward", &mut self.backward)] {
            for (g, gate) in direction.gates_mut() {
                let shape = gate.w.dim();
                out.push(BlockMut {
                    name: format!("{prefix}.W_{g}"),
                    shape,
                    data: gate.w.as_slice_mut().expect("contiguous"),
                });
                let shape = gate.u.dim();
                out.push(BlockMut {
                    name: format!("{prefix}.U_{g}"),
                    shape,
                    data: gate.u.as_slice_mut().expect("contiguous"),
                });
                let shape = (gate.b.len(), 1);
                out.push(BlockMut {
                    name: format!("{prefix}.b_{g}"),
                    shape,
                    data: gate.b.as_slice_mut().expect("contiguous"),
                });
            }
        }
        let shape = self.dense_w.dim();
        out.push(BlockMut {
            name: "dense_W".into(),
            shape,
            data: self.dense_w.as_slice_mut().expect("contiguous"),
        });
        let shape = (self.dense_b.len(), 1);
        out.push(BlockMut {
            name: "dense_b".into(),
            shape,
            data: self.dense_b.as_slice_mut().expect("contiguous"),
        });
        out
    }

    /// Errors with the name of the first block holding a NaN or infinity.
    pub fn check_finite(&self, what: &str) -> Result<()> {
        for block in self.blocks() {
            if block.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("{what} {}", block.name)));
            }
        }
        Ok(())
    }

    /// `self += scale * other`, blockwise.
    pub fn add_scaled(&mut self, scale: f64, other: &BiLstmWeights) {
        for (dst, src) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (a, b) in dst.data.iter_mut().zip(src.data) {
                *a += scale * b;
            }
        }
    }
}

fn glorot<R: Rng + ?Sized>(m: &mut Array2<f64>, rng: &mut R) {
    let (fan_out, fan_in) = m.dim();
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    m.mapv_inplace(|_| rng.random_range(-limit..limit));
}

/// Trainable weight count for `n_series` inputs/outputs and `hidden` units
/// per direction.
pub fn parameter_count(n_series: usize, hidden: usize) -> usize {
    let per_direction = 4 * (hidden * n_series + hidden * hidden + hidden);
    2 * per_direction + (n_series * 2 * hidden + n_series)
}

/// Exact number of trainable weights held by `weights`.
pub fn count_parameters(weights: &BiLstmWeights) -> usize {
    parameter_count(weights.n_series(), weights.hidden())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn counts_match_formula_and_storage() {
        assert_eq!(parameter_count(56, 32), 26_424);
        assert_eq!(parameter_count(1, 1), 27);
        let w = BiLstmWeights::zeros(5, 3);
        let stored: usize = w.blocks().iter().map(|b| b.data.len()).sum();
        assert_eq!(count_parameters(&w), stored);
        assert_eq!(w.blocks().len(), 26);
    }

    #[test]
    fn init_bounds_and_biases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = BiLstmWeights::init(4, 3, &mut rng);
        let limit = (6.0f64 / 7.0).sqrt();
        assert!(w.forward.input.w.iter().all(|v| v.abs() <= limit));
        assert!(w.backward.forget.b.iter().all(|&v| v == 1.0));
        assert!(w.forward.input.b.iter().all(|&v| v == 0.0));
        assert!(w.dense_b.iter().all(|&v| v == 0.0));
        assert!(w.check_finite("weights").is_ok());
    }

    #[test]
    fn non_finite_block_is_named() {
        let mut w = BiLstmWeights::zeros(2, 2);
        w.backward.cell.u[[1, 0]] = f64::NAN;
        let err = w.check_finite("gradient").unwrap_err();
        assert!(err.to_string().contains("backward.U_g"), "{err}");
    }
}

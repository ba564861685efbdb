//! Feed-forward classifier weights and inference.
//!
//! File layout, little-endian: magic `IERW`, version u32 = 1, layer count u32,
//! then per layer rows u32, cols u32, activation u8 (0 linear, 1 rectified
//! linear), a rows × cols f32 matrix in row-major order and cols f32 biases.
//! A layer maps a `rows`-vector `x` to `act(xᵀW + b)`.

use std::io::{Read, Write};
use std::path::Path;

use crate::candidates::Label;
use crate::{Error, Result};

pub const WEIGHTS_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"IERW";
pub const N_CLASSES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Activation {
    Linear = 0,
    Relu = 1,
}

impl Activation {
    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Activation::Linear),
            1 => Ok(Activation::Relu),
            _ => Err(Error::invalid(format!("unknown activation tag {tag}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub activation: Activation,
    /// Row-major `rows × cols`.
    pub matrix: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Layer {
    pub fn new(rows: usize, cols: usize, activation: Activation, matrix: Vec<f32>, bias: Vec<f32>) -> Result<Self> {
        let layer = Layer {
            rows,
            cols,
            activation,
            matrix,
            bias,
        };
        layer.check()?;
        Ok(layer)
    }

    fn check(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Dimension(format!("empty layer {}×{}", self.rows, self.cols)));
        }
        if self.matrix.len() != self.rows * self.cols || self.bias.len() != self.cols {
            return Err(Error::Dimension(format!(
                "layer {}×{} holds {} weights and {} biases",
                self.rows,
                self.cols,
                self.matrix.len(),
                self.bias.len()
            )));
        }
        Ok(())
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.bias.iter().map(|&b| b as f64).collect();
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            let row = &self.matrix[r * self.cols..(r + 1) * self.cols];
            for (yc, &w) in y.iter_mut().zip(row) {
                *yc += xr * w as f64;
            }
        }
        if self.activation == Activation::Relu {
            for v in &mut y {
                *v = v.max(0.0);
            }
        }
        y
    }
}

/// Output of one forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Label,
    pub logits: [f64; N_CLASSES],
    /// Softmax of the logits.
    pub scores: [f64; N_CLASSES],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierWeights {
    pub layers: Vec<Layer>,
}

impl ClassifierWeights {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let w = ClassifierWeights { layers };
        w.validate()?;
        Ok(w)
    }

    /// All-zero weights for the layer widths `dims` (e.g. `[60, 128, 64, 3]`),
    /// rectified-linear between layers and linear at the output.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Dimension("need at least an input and an output width".into()));
        }
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, d)| {
                let act = if i == last { Activation::Linear } else { Activation::Relu };
                Layer::new(d[0], d[1], act, vec![0.0; d[0] * d[1]], vec![0.0; d[1]])
            })
            .collect::<Result<Vec<_>>>()?;
        ClassifierWeights::new(layers)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].rows
    }

    /// Layer widths chain and the output has three classes.
    pub fn validate(&self) -> Result<()> {
        let Some(last) = self.layers.last() else {
            return Err(Error::Dimension("classifier has no layers".into()));
        };
        for (i, l) in self.layers.iter().enumerate() {
            l.check().map_err(|e| Error::Dimension(format!("layer {i}: {e}")))?;
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].cols != pair[1].rows {
                return Err(Error::Dimension(format!(
                    "layer {} outputs {} values but layer {} expects {}",
                    i,
                    pair[0].cols,
                    i + 1,
                    pair[1].rows
                )));
            }
        }
        if last.cols != N_CLASSES {
            return Err(Error::Dimension(format!("final layer outputs {} values, expected {N_CLASSES}", last.cols)));
        }
        Ok(())
    }

    pub fn logits(&self, features: &[f64]) -> Result<[f64; N_CLASSES]> {
        if features.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "classifier expects {} features, got {}",
                self.input_dim(),
                features.len()
            )));
        }
        let mut x = features.to_vec();
        for l in &self.layers {
            x = l.forward(&x);
        }
        Ok([x[0], x[1], x[2]])
    }

    /// Forward pass with softmax; the label is the first maximal score.
    pub fn predict(&self, features: &[f64]) -> Result<Prediction> {
        let logits = self.logits(features)?;
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e = logits.map(|z| (z - m).exp());
        let sum: f64 = e.iter().sum();
        let scores = e.map(|v| v / sum);
        let mut best = 0;
        for i in 1..N_CLASSES {
            if logits[i] > logits[best] {
                best = i;
            }
        }
        Ok(Prediction {
            label: Label::from_index(best).unwrap(),
            logits,
            scores,
        })
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        self.validate()?;
        w.write_all(MAGIC)?;
        w.write_all(&WEIGHTS_VERSION.to_le_bytes())?;
        w.write_all(&(self.layers.len() as u32).to_le_bytes())?;
        for l in &self.layers {
            w.write_all(&(l.rows as u32).to_le_bytes())?;
            w.write_all(&(l.cols as u32).to_le_bytes())?;
            w.write_all(&[l.activation as u8])?;
            for v in l.matrix.iter().chain(&l.bias) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::BadMagic {
                expected: "IERW".into(),
                found: String::from_utf8_lossy(&magic).into_owned(),
            });
        }
        let version = read_u32(&mut r)?;
        if version != WEIGHTS_VERSION {
            return Err(Error::BadVersion {
                expected: WEIGHTS_VERSION,
                found: version,
            });
        }
        let n_layers = read_u32(&mut r)?;
        if n_layers == 0 || n_layers > 1024 {
            return Err(Error::Dimension(format!("implausible layer count {n_layers}")));
        }
        let mut layers = Vec::with_capacity(n_layers as usize);
        for i in 0..n_layers {
            let rows = read_u32(&mut r)? as usize;
            let cols = read_u32(&mut r)? as usize;
            if rows == 0 || cols == 0 || rows.saturating_mul(cols) > 1 << 28 {
                return Err(Error::Dimension(format!("layer {i}: implausible shape {rows}×{cols}")));
            }
            let mut tag = [0u8];
            r.read_exact(&mut tag)?;
            let activation = Activation::from_tag(tag[0])?;
            let matrix = read_f32s(&mut r, rows * cols)?;
            let bias = read_f32s(&mut r, cols)?;
            layers.push(Layer {
                rows,
                cols,
                activation,
                matrix,
                bias,
            });
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::invalid("trailing bytes after the last layer"));
        }
        ClassifierWeights::new(layers)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path.as_ref())?;
        ClassifierWeights::read(std::io::BufReader::new(f))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path.as_ref())?;
        self.write(std::io::BufWriter::new(f))
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f32>> {
    let mut buf = vec![0u8; 4 * n];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
}

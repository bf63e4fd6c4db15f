use std::io::{self, Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    /// Embedding size.
    pub d: usize,
    /// Recurrent state size.
    pub h: usize,
    pub fp_width: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Dims {
            d: 64,
            h: 256,
            fp_width: crate::molgraph::DEFAULT_WIDTH,
        }
    }
}

/// Every learnable tensor, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tensor {
    /// Action embeddings: add block, add product, continue, stop.
    HB,
    HP,
    HI,
    HF,
    /// Fingerprint projection, one d-row per fingerprint bit.
    Proj,
    Wz,
    Uz,
    Bz,
    Wr,
    Ur,
    Br,
    Wn,
    Un,
    Bn,
    /// Node-add head: 2 x h, 2.
    NaW,
    NaB,
    /// Identity query: d x h, d.
    IdW,
    IdB,
    /// Connectivity query: d x h, d.
    CnW,
    CnB,
    /// Stop head for linear lists: 2 x h, 2.
    StW,
    StB,
}

impl Tensor {
    pub const ALL: [Tensor; 22] = [
        Tensor::HB,
        Tensor::HP,
        Tensor::HI,
        Tensor::HF,
        Tensor::Proj,
        Tensor::Wz,
        Tensor::Uz,
        Tensor::Bz,
        Tensor::Wr,
        Tensor::Ur,
        Tensor::Br,
        Tensor::Wn,
        Tensor::Un,
        Tensor::Bn,
        Tensor::NaW,
        Tensor::NaB,
        Tensor::IdW,
        Tensor::IdB,
        Tensor::CnW,
        Tensor::CnB,
        Tensor::StW,
        Tensor::StB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Tensor::HB => "h_b",
            Tensor::HP => "h_p",
            Tensor::HI => "h_i",
            Tensor::HF => "h_f",
            Tensor::Proj => "fp_projection",
            Tensor::Wz => "w_z",
            Tensor::Uz => "u_z",
            Tensor::Bz => "b_z",
            Tensor::Wr => "w_r",
            Tensor::Ur => "u_r",
            Tensor::Br => "b_r",
            Tensor::Wn => "w_n",
            Tensor::Un => "u_n",
            Tensor::Bn => "b_n",
            Tensor::NaW => "node_add_w",
            Tensor::NaB => "node_add_b",
            Tensor::IdW => "identity_w",
            Tensor::IdB => "identity_b",
            Tensor::CnW => "connect_w",
            Tensor::CnB => "connect_b",
            Tensor::StW => "stop_w",
            Tensor::StB => "stop_b",
        }
    }

    /// (rows, cols)
    pub fn shape(self, dims: &Dims) -> (usize, usize) {
        let Dims { d, h, fp_width } = *dims;
        match self {
            Tensor::HB | Tensor::HP | Tensor::HI | Tensor::HF => (1, d),
            Tensor::Proj => (fp_width, d),
            Tensor::Wz | Tensor::Wr | Tensor::Wn => (h, d),
            Tensor::Uz | Tensor::Ur | Tensor::Un => (h, h),
            Tensor::Bz | Tensor::Br | Tensor::Bn => (1, h),
            Tensor::NaW | Tensor::StW => (2, h),
            Tensor::NaB | Tensor::StB => (1, 2),
            Tensor::IdW | Tensor::CnW => (d, h),
            Tensor::IdB | Tensor::CnB => (1, d),
        }
    }

    fn index(self) -> usize {
        Tensor::ALL.iter().position(|&t| t == self).expect("listed")
    }
}

/// Offsets of each tensor in the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub dims: Dims,
    offsets: Vec<usize>,
    total: usize,
}

impl Layout {
    pub fn new(dims: Dims) -> Self {
        let mut offsets = Vec::with_capacity(Tensor::ALL.len());
        let mut total = 0;
        for t in Tensor::ALL {
            offsets.push(total);
            let (r, c) = t.shape(&dims);
            total += r * c;
        }
        Layout {
            dims,
            offsets,
            total,
        }
    }

    pub fn range(&self, t: Tensor) -> std::ops::Range<usize> {
        let (r, c) = t.shape(&self.dims);
        let o = self.offsets[t.index()];
        o..o + r * c
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }
}

/// A flat vector of values laid out by `Layout`; used for both parameters
/// and their gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layout: Layout,
    pub data: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(dims: Dims) -> Self {
        let layout = Layout::new(dims);
        let data = vec![0.0; layout.len()];
        ModelParams { layout, data }
    }

    /// Uniform in (-1/sqrt(h), 1/sqrt(h)), rounded to f32.
    pub fn init(dims: Dims, seed: u64) -> Self {
        let mut p = ModelParams::zeros(dims);
        let bound = 1.0 / (dims.h as f64).sqrt();
        let mut rng = stream_rng(seed, u64::MAX);
        for v in &mut p.data {
            *v = rng.gen_range(-bound..bound) as f32 as f64;
        }
        p
    }

    pub fn dims(&self) -> &Dims {
        &self.layout.dims
    }

    pub fn get(&self, t: Tensor) -> &[f64] {
        &self.data[self.layout.range(t)]
    }

    pub fn get_mut(&mut self, t: Tensor) -> &mut [f64] {
        let r = self.layout.range(t);
        &mut self.data[r]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn add_assign(&mut self, other: &ModelParams) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.data.iter_mut().for_each(|x| *x *= k);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Rounds every value to f32 precision so checkpoints are exact.
    pub fn round_to_f32(&mut self) {
        self.data.iter_mut().for_each(|x| *x = *x as f32 as f64);
    }

    /// Row `bit` of the projection: the contribution of one fingerprint bit.
    pub fn proj_row(&self, bit: usize) -> &[f64] {
        let d = self.dims().d;
        let p = self.get(Tensor::Proj);
        &p[bit * d..(bit + 1) * d]
    }

    /// Projection of a fingerprint given as its set bits.
    pub fn embed_bits(&self, bits: &[u32]) -> Vec<f64> {
        let mut e = vec![0.0; self.dims().d];
        for &b in bits {
            for (x, p) in e.iter_mut().zip(self.proj_row(b as usize)) {
                *x += p;
            }
        }
        e
    }
}

const MAGIC: &[u8] = b"SDGEN1\n";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub d: usize,
    pub h: usize,
    pub fp_width: usize,
    pub pool_hash: String,
    pub seed: u64,
    /// Tensor names in the order their values follow.
    pub tensors: Vec<String>,
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic)")]
    Magic,
    #[error("bad checkpoint header: {0}")]
    Header(String),
    #[error("checkpoint was trained on pool {found}, expected {expected}")]
    PoolMismatch { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Magic line, one JSON header line, then little-endian f32 values.
pub fn write_checkpoint<W: Write>(
    mut w: W,
    params: &ModelParams,
    pool_hash: &str,
    seed: u64,
) -> io::Result<()> {
    let dims = params.dims();
    let header = CheckpointHeader {
        d: dims.d,
        h: dims.h,
        fp_width: dims.fp_width,
        pool_hash: pool_hash.to_string(),
        seed,
        tensors: Tensor::ALL.iter().map(|t| t.name().to_string()).collect(),
    };
    w.write_all(MAGIC)?;
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(params.data.len() * 4);
    for v in &params.data {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(ModelParams, CheckpointHeader), CheckpointError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let rest = bytes.strip_prefix(MAGIC).ok_or(CheckpointError::Magic)?;
    let nl = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| CheckpointError::Header("unterminated header".into()))?;
    let header: CheckpointHeader =
        serde_json::from_slice(&rest[..nl]).map_err(|e| CheckpointError::Header(e.to_string()))?;
    let expected: Vec<&str> = Tensor::ALL.iter().map(|t| t.name()).collect();
    if header.tensors != expected {
        return Err(CheckpointError::Header("unexpected tensor list".into()));
    }
    let dims = Dims {
        d: header.d,
        h: header.h,
        fp_width: header.fp_width,
    };
    let mut params = ModelParams::zeros(dims);
    let body = &rest[nl + 1..];
    if body.len() != params.data.len() * 4 {
        return Err(CheckpointError::Header(format!(
            "expected {} values, found {} bytes",
            params.data.len(),
            body.len()
        )));
    }
    for (v, chunk) in params.data.iter_mut().zip(body.chunks_exact(4)) {
        *v = f32::from_le_bytes(chunk.try_into().expect("4 bytes")) as f64;
    }
    Ok((params, header))
}

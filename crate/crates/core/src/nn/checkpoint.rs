//! Binary checkpoint: `DKZ1`, little-endian `u32` header length, JSON
//! header, then every parameter as little-endian `f32` in layout order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{Network, NetworkConfig};
use super::tensor::Tensor;
use super::train::TrainConfig;
use super::NnError;

pub const MAGIC: &[u8; 4] = b"DKZ1";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    version: u32,
    network: NetworkConfig,
    /// Input width and height the model was trained at.
    input: [usize; 2],
    params: Vec<ParamEntry>,
    #[serde(default)]
    train: Option<TrainConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: Network<f32>,
    pub input_width: usize,
    pub input_height: usize,
    pub train: Option<TrainConfig>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let layout = self.network.config.layout();
        let header = Header {
            version: FORMAT_VERSION,
            network: self.network.config,
            input: [self.input_width, self.input_height],
            params: layout.into_iter().map(|(name, shape)| ParamEntry { name, shape }).collect(),
            train: self.train.clone(),
        };
        let json = serde_json::to_vec(&header).expect("header serialises");
        let mut out = Vec::with_capacity(8 + json.len() + 4 * self.network.parameter_count());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for p in &self.network.params {
            for v in &p.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&self.to_bytes())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self, NnError> {
        let bad = |m: &str| NnError::Checkpoint(m.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| bad("truncated magic"))?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        let mut len = [0u8; 4];
        r.read_exact(&mut len).map_err(|_| bad("truncated header length"))?;
        let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut json).map_err(|_| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(&json).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        if header.version != FORMAT_VERSION {
            return Err(NnError::Checkpoint(format!("unsupported version {}", header.version)));
        }
        let layout = header.network.layout();
        if layout.len() != header.params.len() || layout.iter().zip(&header.params).any(|((n, s), e)| *n != e.name || *s != e.shape) {
            return Err(bad("parameter table does not match the network configuration"));
        }
        let mut params = Vec::with_capacity(layout.len());
        for (_, shape) in &layout {
            let n: usize = shape.iter().product();
            let mut raw = vec![0u8; 4 * n];
            r.read_exact(&mut raw).map_err(|_| bad("truncated parameter data"))?;
            let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
            params.push(Tensor::from_vec(shape, data).expect("length matches shape"));
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        if !rest.is_empty() {
            return Err(bad("trailing bytes"));
        }
        Ok(Self {
            network: Network::from_params(header.network, params)?,
            input_width: header.input[0],
            input_height: header.input[1],
            train: header.train,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        crate::dataset::write_atomic(path, &self.to_bytes()).map_err(|e| NnError::Checkpoint(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let f = std::fs::File::open(path).map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::read(std::io::BufReader::new(f))
    }
}

//! Checkpoint container: a text manifest (version, seed, free-form metadata,
//! tensor shape list) followed by one flat little-endian f32 payload.
//! Loading validates the total float count against the declared shapes.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &str = "blocksmith-ckpt v1";

#[derive(Debug)]
pub enum CkptError {
    Io(std::io::Error),
    Format(String),
}

impl fmt::Display for CkptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CkptError::Io(e) => write!(f, "checkpoint io error: {e}"),
            CkptError::Format(m) => write!(f, "checkpoint format error: {m}"),
        }
    }
}

impl std::error::Error for CkptError {}

impl From<std::io::Error> for CkptError {
    fn from(e: std::io::Error) -> Self {
        CkptError::Io(e)
    }
}

#[derive(Debug, Clone)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> Tensor {
        let t = Tensor { name: name.into(), shape, data };
        assert_eq!(t.shape.iter().product::<usize>(), t.data.len(), "tensor {}", t.name);
        t
    }

    pub fn vector(name: impl Into<String>, data: Vec<f32>) -> Tensor {
        let shape = vec![data.len()];
        Tensor::new(name, shape, data)
    }
}

/// A named bundle of tensors plus string metadata.
#[derive(Debug, Clone, Default)]
pub struct Checkpoint {
    pub seed: u64,
    pub meta: BTreeMap<String, String>,
    pub tensors: Vec<Tensor>,
}

impl Checkpoint {
    pub fn new(seed: u64) -> Checkpoint {
        Checkpoint { seed, meta: BTreeMap::new(), tensors: Vec::new() }
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl fmt::Display) {
        self.meta.insert(key.into(), value.to_string());
    }

    pub fn meta_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T, CkptError> {
        let raw = self
            .meta
            .get(key)
            .ok_or_else(|| CkptError::Format(format!("missing meta key {key}")))?;
        raw.parse()
            .map_err(|_| CkptError::Format(format!("meta key {key} has unparsable value {raw}")))
    }

    pub fn push(&mut self, tensor: Tensor) {
        self.tensors.push(tensor);
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor, CkptError> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| CkptError::Format(format!("missing tensor {name}")))
    }

    /// All tensors whose name starts with `prefix`, in stored order.
    pub fn tensors_with_prefix(&self, prefix: &str) -> Vec<&Tensor> {
        self.tensors.iter().filter(|t| t.name.starts_with(prefix)).collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), CkptError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{MAGIC}")?;
        writeln!(w, "seed {}", self.seed)?;
        for (k, v) in &self.meta {
            writeln!(w, "meta {k} {v}")?;
        }
        let mut total = 0usize;
        for t in &self.tensors {
            let dims: Vec<String> = t.shape.iter().map(|d| d.to_string()).collect();
            writeln!(w, "tensor {} {}", t.name, dims.join("x"))?;
            total += t.data.len();
        }
        writeln!(w, "payload {total}")?;
        for t in &self.tensors {
            for &v in &t.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint, CkptError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut header = Vec::new();
        // read the text header byte-wise up to and including the payload line
        let mut line = String::new();
        let mut declared: Vec<(String, Vec<usize>)> = Vec::new();
        let mut seed = 0u64;
        let mut meta = BTreeMap::new();
        let mut total: Option<usize> = None;
        let mut first = true;
        loop {
            line.clear();
            let mut byte = [0u8; 1];
            loop {
                let n = r.read(&mut byte)?;
                if n == 0 {
                    return Err(CkptError::Format("truncated header".into()));
                }
                if byte[0] == b'\n' {
                    break;
                }
                line.push(byte[0] as char);
            }
            if first {
                if line != MAGIC {
                    return Err(CkptError::Format(format!("bad magic line: {line}")));
                }
                first = false;
                continue;
            }
            let mut parts = line.splitn(3, ' ');
            match parts.next() {
                Some("seed") => {
                    seed = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| CkptError::Format("bad seed line".into()))?;
                }
                Some("meta") => {
                    let k = parts.next().ok_or_else(|| CkptError::Format("bad meta line".into()))?;
                    let v = parts.next().unwrap_or("");
                    meta.insert(k.to_string(), v.to_string());
                }
                Some("tensor") => {
                    let name =
                        parts.next().ok_or_else(|| CkptError::Format("bad tensor line".into()))?;
                    let dims = parts.next().ok_or_else(|| CkptError::Format("bad tensor line".into()))?;
                    let shape: Result<Vec<usize>, _> = dims.split('x').map(|d| d.parse()).collect();
                    declared.push((
                        name.to_string(),
                        shape.map_err(|_| CkptError::Format(format!("bad shape for {name}")))?,
                    ));
                }
                Some("payload") => {
                    total = Some(
                        parts
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| CkptError::Format("bad payload line".into()))?,
                    );
                    break;
                }
                other => {
                    return Err(CkptError::Format(format!("unexpected header line: {other:?}")));
                }
            }
        }
        let total = total.ok_or_else(|| CkptError::Format("missing payload line".into()))?;
        let expected: usize = declared.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
        if expected != total {
            return Err(CkptError::Format(format!(
                "payload count {total} does not match declared shapes ({expected})"
            )));
        }
        header.resize(4 * total, 0);
        r.read_exact(&mut header)?;
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(CkptError::Format("trailing bytes after payload".into()));
        }
        let mut offset = 0usize;
        let mut tensors = Vec::with_capacity(declared.len());
        for (name, shape) in declared {
            let count: usize = shape.iter().product();
            let mut data = Vec::with_capacity(count);
            for k in 0..count {
                let at = 4 * (offset + k);
                data.push(f32::from_le_bytes([
                    header[at],
                    header[at + 1],
                    header[at + 2],
                    header[at + 3],
                ]));
            }
            offset += count;
            tensors.push(Tensor { name, shape, data });
        }
        Ok(Checkpoint { seed, meta, tensors })
    }
}

// --- dense net / lstm serialization helpers -------------------------------

use crate::nn::{Activation, DenseNet, LstmCell};

pub fn pack_dense(ckpt: &mut Checkpoint, prefix: &str, net: &DenseNet<f32>) {
    let dims: Vec<String> = net.dims.iter().map(|d| d.to_string()).collect();
    ckpt.set_meta(format!("{prefix}.dims"), dims.join(","));
    ckpt.set_meta(format!("{prefix}.head"), net.head.name());
    for (k, layer) in net.layers.iter().enumerate() {
        ckpt.push(Tensor::new(
            format!("{prefix}.layer{k}.w"),
            vec![layer.out_dim, layer.in_dim],
            layer.w.clone(),
        ));
        ckpt.push(Tensor::vector(format!("{prefix}.layer{k}.b"), layer.b.clone()));
    }
}

pub fn unpack_dense(ckpt: &Checkpoint, prefix: &str) -> Result<DenseNet<f32>, CkptError> {
    let dims_raw: String = ckpt.meta_parsed(&format!("{prefix}.dims"))?;
    let dims: Result<Vec<usize>, _> = dims_raw.split(',').map(|d| d.parse()).collect();
    let dims = dims.map_err(|_| CkptError::Format(format!("bad dims for {prefix}")))?;
    let head_raw: String = ckpt.meta_parsed(&format!("{prefix}.head"))?;
    let head = Activation::from_name(&head_raw)
        .ok_or_else(|| CkptError::Format(format!("unknown head {head_raw}")))?;
    let mut net = DenseNet::<f32>::zeros(&dims, head);
    for (k, layer) in net.layers.iter_mut().enumerate() {
        let w = ckpt.tensor(&format!("{prefix}.layer{k}.w"))?;
        let b = ckpt.tensor(&format!("{prefix}.layer{k}.b"))?;
        if w.data.len() != layer.w.len() || b.data.len() != layer.b.len() {
            return Err(CkptError::Format(format!("layer {k} of {prefix} has wrong shape")));
        }
        layer.w.copy_from_slice(&w.data);
        layer.b.copy_from_slice(&b.data);
    }
    Ok(net)
}

pub fn pack_lstm(ckpt: &mut Checkpoint, prefix: &str, cell: &LstmCell<f32>) {
    ckpt.set_meta(format!("{prefix}.x_dim"), cell.x_dim);
    ckpt.set_meta(format!("{prefix}.hidden"), cell.hidden);
    let z = cell.x_dim + cell.hidden;
    for (name, data) in [
        ("w_i", &cell.w_i),
        ("w_f", &cell.w_f),
        ("w_o", &cell.w_o),
        ("w_g", &cell.w_g),
    ] {
        ckpt.push(Tensor::new(format!("{prefix}.{name}"), vec![cell.hidden, z], data.clone()));
    }
    for (name, data) in [
        ("b_i", &cell.b_i),
        ("b_f", &cell.b_f),
        ("b_o", &cell.b_o),
        ("b_g", &cell.b_g),
    ] {
        ckpt.push(Tensor::vector(format!("{prefix}.{name}"), data.clone()));
    }
}

pub fn unpack_lstm(ckpt: &Checkpoint, prefix: &str) -> Result<LstmCell<f32>, CkptError> {
    let x_dim: usize = ckpt.meta_parsed(&format!("{prefix}.x_dim"))?;
    let hidden: usize = ckpt.meta_parsed(&format!("{prefix}.hidden"))?;
    let mut cell = LstmCell::<f32>::zeros(x_dim, hidden);
    for (name, slot) in [
        ("w_i", &mut cell.w_i),
        ("w_f", &mut cell.w_f),
        ("w_o", &mut cell.w_o),
        ("w_g", &mut cell.w_g),
        ("b_i", &mut cell.b_i),
        ("b_f", &mut cell.b_f),
        ("b_o", &mut cell.b_o),
        ("b_g", &mut cell.b_g),
    ] {
        let t = ckpt.tensor(&format!("{prefix}.{name}"))?;
        if t.data.len() != slot.len() {
            return Err(CkptError::Format(format!("{prefix}.{name} has wrong size")));
        }
        slot.copy_from_slice(&t.data);
    }
    Ok(cell)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roundtrip_preserves_everything() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ckpt");
        let mut ckpt = Checkpoint::new(99);
        ckpt.set_meta("note", "hello world");
        ckpt.push(Tensor::new("a", vec![2, 3], vec![1.0, -2.5, 3.25, 0.0, 5.0, -6.0]));
        ckpt.push(Tensor::vector("b", vec![0.5; 4]));
        ckpt.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back.seed, 99);
        assert_eq!(back.meta["note"], "hello world");
        assert_eq!(back.tensor("a").unwrap().shape, vec![2, 3]);
        assert_eq!(back.tensor("a").unwrap().data, vec![1.0, -2.5, 3.25, 0.0, 5.0, -6.0]);
        assert_eq!(back.tensor("b").unwrap().data, vec![0.5; 4]);
    }

    #[test]
    fn load_validates_total_count() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        let mut ckpt = Checkpoint::new(1);
        ckpt.push(Tensor::vector("a", vec![1.0, 2.0]));
        ckpt.save(&path).unwrap();
        // truncate the payload
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        assert!(Checkpoint::load(&path).is_err());
    }

    #[test]
    fn dense_and_lstm_roundtrip_bitexact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nets.ckpt");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = DenseNet::<f32>::new(&[5, 16, 3], Activation::Tanh, &mut rng);
        let cell = LstmCell::<f32>::new(4, 6, &mut rng);
        let mut ckpt = Checkpoint::new(7);
        pack_dense(&mut ckpt, "actor", &net);
        pack_lstm(&mut ckpt, "core", &cell);
        ckpt.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        let net2 = unpack_dense(&back, "actor").unwrap();
        let cell2 = unpack_lstm(&back, "core").unwrap();
        for (a, b) in net.param_slices().iter().zip(net2.param_slices()) {
            assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                       b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
        for (a, b) in cell.param_slices().iter().zip(cell2.param_slices()) {
            assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                       b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
    }
}

//! WBNN checkpoint format.
//!
//! Layout (all little-endian):
//!
//! ```text
//! magic   "WBNN"
//! version u16 = 1
//! ... one or more network blocks, written by the caller in a fixed order:
//!   input_shape: rank u8, dims u32[rank]
//!   layer_count u32
//!   per layer:
//!     spec: tag u8, fields u32[6], rate f64
//!     param_count u8, then per param: rank u8, dims u32[rank], data f32[numel]
//!     has_running u8; if 1: channels u32, mean f32[C], var f32[C]
//! ```
//!
//! Parameters are stored as f32 per the interchange contract; loading widens
//! back to f64.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{CoreError, Result};
use crate::wire::*;

use super::layers::{Layer, LayerSpec, Network, RunningStats};
use super::tensor::Tensor;

pub const WBNN_MAGIC: &[u8; 4] = b"WBNN";
pub const WBNN_VERSION: u16 = 1;

fn spec_encoding(spec: &LayerSpec) -> (u8, [u32; 6], f64) {
    let mut f = [0u32; 6];
    match spec {
        LayerSpec::Dense { in_features, out_features } => {
            f[0] = *in_features as u32;
            f[1] = *out_features as u32;
            (0, f, 0.0)
        }
        LayerSpec::Conv1d { in_channels, out_channels, kernel, stride, padding } => {
            f[0] = *in_channels as u32;
            f[1] = *out_channels as u32;
            f[2] = *kernel as u32;
            f[3] = *stride as u32;
            f[4] = *padding as u32;
            (1, f, 0.0)
        }
        LayerSpec::Conv2d { in_channels, out_channels, kernel, stride, padding } => {
            f[0] = *in_channels as u32;
            f[1] = *out_channels as u32;
            f[2] = *kernel as u32;
            f[3] = *stride as u32;
            f[4] = *padding as u32;
            (2, f, 0.0)
        }
        LayerSpec::BatchNorm1d { features } => {
            f[0] = *features as u32;
            (3, f, 0.0)
        }
        LayerSpec::BatchNorm2d { channels } => {
            f[0] = *channels as u32;
            (4, f, 0.0)
        }
        LayerSpec::Relu => (5, f, 0.0),
        LayerSpec::Sigmoid => (6, f, 0.0),
        LayerSpec::Softmax => (7, f, 0.0),
        LayerSpec::MaxPool2x2 => (8, f, 0.0),
        LayerSpec::Upsample2x => (9, f, 0.0),
        LayerSpec::Dropout { rate } => (10, f, *rate),
        LayerSpec::Flatten => (11, f, 0.0),
        LayerSpec::Reshape { shape } => {
            f[0] = shape.len() as u32;
            for (i, d) in shape.iter().enumerate().take(5) {
                f[i + 1] = *d as u32;
            }
            (12, f, 0.0)
        }
    }
}

fn spec_decoding(tag: u8, f: [u32; 6], rate: f64) -> Result<LayerSpec> {
    Ok(match tag {
        0 => LayerSpec::Dense { in_features: f[0] as usize, out_features: f[1] as usize },
        1 => LayerSpec::Conv1d {
            in_channels: f[0] as usize,
            out_channels: f[1] as usize,
            kernel: f[2] as usize,
            stride: f[3] as usize,
            padding: f[4] as usize,
        },
        2 => LayerSpec::Conv2d {
            in_channels: f[0] as usize,
            out_channels: f[1] as usize,
            kernel: f[2] as usize,
            stride: f[3] as usize,
            padding: f[4] as usize,
        },
        3 => LayerSpec::BatchNorm1d { features: f[0] as usize },
        4 => LayerSpec::BatchNorm2d { channels: f[0] as usize },
        5 => LayerSpec::Relu,
        6 => LayerSpec::Sigmoid,
        7 => LayerSpec::Softmax,
        8 => LayerSpec::MaxPool2x2,
        9 => LayerSpec::Upsample2x,
        10 => LayerSpec::Dropout { rate },
        11 => LayerSpec::Flatten,
        12 => {
            let rank = f[0] as usize;
            if rank > 5 {
                return Err(CoreError::Io(format!("reshape rank {rank} unsupported")));
            }
            LayerSpec::Reshape {
                shape: (0..rank).map(|i| f[i + 1] as usize).collect(),
            }
        }
        other => return Err(CoreError::Io(format!("unknown layer tag {other}"))),
    })
}

fn write_tensor<W: Write>(w: &mut W, t: &Tensor) -> Result<()> {
    write_u8(w, t.shape().len() as u8)?;
    for d in t.shape() {
        write_u32(w, *d as u32)?;
    }
    for v in t.data() {
        write_f32(w, *v as f32)?;
    }
    Ok(())
}

fn read_tensor<R: Read>(r: &mut R) -> Result<Tensor> {
    let rank = read_u8(r)? as usize;
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(read_u32(r)? as usize);
    }
    let numel: usize = shape.iter().product();
    let mut data = Vec::with_capacity(numel);
    for _ in 0..numel {
        data.push(read_f32(r)? as f64);
    }
    Tensor::new(shape, data)
}

fn write_f32_slice<W: Write>(w: &mut W, xs: &[f64]) -> Result<()> {
    for v in xs {
        write_f32(w, *v as f32)?;
    }
    Ok(())
}

fn read_f32_slice<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(read_f32(r)? as f64);
    }
    Ok(out)
}

/// Serialize one network block into an open stream.
pub fn write_network<W: Write>(w: &mut W, net: &Network) -> Result<()> {
    write_u8(w, net.input_shape().len() as u8)?;
    for d in net.input_shape() {
        write_u32(w, *d as u32)?;
    }
    write_u32(w, net.layers.len() as u32)?;
    for layer in &net.layers {
        let (tag, fields, rate) = spec_encoding(&layer.spec);
        write_u8(w, tag)?;
        for f in fields {
            write_u32(w, f)?;
        }
        write_f64(w, rate)?;
        write_u8(w, layer.params.len() as u8)?;
        for p in &layer.params {
            write_tensor(w, p)?;
        }
        match &layer.running {
            Some(rs) => {
                write_u8(w, 1)?;
                write_u32(w, rs.mean.len() as u32)?;
                write_f32_slice(w, &rs.mean)?;
                write_f32_slice(w, &rs.var)?;
            }
            None => write_u8(w, 0)?,
        }
    }
    Ok(())
}

/// Deserialize one network block from an open stream.
pub fn read_network<R: Read>(r: &mut R) -> Result<Network> {
    let rank = read_u8(r)? as usize;
    let mut input_shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        input_shape.push(read_u32(r)? as usize);
    }
    let n_layers = read_u32(r)? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let tag = read_u8(r)?;
        let mut fields = [0u32; 6];
        for f in fields.iter_mut() {
            *f = read_u32(r)?;
        }
        let rate = read_f64(r)?;
        let spec = spec_decoding(tag, fields, rate)?;
        let n_params = read_u8(r)? as usize;
        let mut params = Vec::with_capacity(n_params);
        for _ in 0..n_params {
            params.push(read_tensor(r)?);
        }
        let running = if read_u8(r)? == 1 {
            let c = read_u32(r)? as usize;
            Some(RunningStats {
                mean: read_f32_slice(r, c)?,
                var: read_f32_slice(r, c)?,
            })
        } else {
            None
        };
        layers.push(Layer { spec, params, running });
    }
    Network::from_layers(layers, &input_shape)
}

/// Write a single network with the WBNN header.
pub fn save_network(path: &Path, net: &Network) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(WBNN_MAGIC)?;
    write_u16(&mut w, WBNN_VERSION)?;
    write_u8(&mut w, 1)?; // network count
    write_network(&mut w, net)
}

/// Read a single network written by [`save_network`].
pub fn load_network(path: &Path) -> Result<Network> {
    let mut r = BufReader::new(File::open(path)?);
    check_header(&mut r)?;
    let count = read_u8(&mut r)?;
    if count != 1 {
        return Err(CoreError::Io(format!(
            "expected 1 network in {}, found {count}",
            path.display()
        )));
    }
    read_network(&mut r)
}

/// Validate the WBNN magic and version; shared by multi-network files.
pub fn check_header<R: Read>(r: &mut R) -> Result<()> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != WBNN_MAGIC {
        return Err(CoreError::Io("not a WBNN checkpoint".into()));
    }
    let version = read_u16(r)?;
    if version != WBNN_VERSION {
        return Err(CoreError::Io(format!("unsupported WBNN version {version}")));
    }
    Ok(())
}

/// Write the WBNN header and a count of following network blocks.
pub fn write_header<W: Write>(w: &mut W, network_count: u8) -> Result<()> {
    w.write_all(WBNN_MAGIC)?;
    write_u16(w, WBNN_VERSION)?;
    write_u8(w, network_count)?;
    Ok(())
}

/// Read the header and return the network block count.
pub fn read_header<R: Read>(r: &mut R) -> Result<u8> {
    check_header(r)?;
    read_u8(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn roundtrip_preserves_structure() {
        let mut rng = stream_rng(5, 0);
        let net = Network::new(
            vec![
                LayerSpec::Dense { in_features: 6, out_features: 4 },
                LayerSpec::BatchNorm1d { features: 4 },
                LayerSpec::Relu,
                LayerSpec::Dropout { rate: 0.3 },
                LayerSpec::Dense { in_features: 4, out_features: 2 },
                LayerSpec::Softmax,
            ],
            &[6],
            &mut rng,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.wbnn");
        save_network(&path, &net).unwrap();
        let loaded = load_network(&path).unwrap();
        assert_eq!(loaded.specs(), net.specs());
        assert_eq!(loaded.input_shape(), net.input_shape());
        // f32 storage: values equal after one widen/narrow cycle.
        for (a, b) in loaded.param_tensors().iter().zip(net.param_tensors()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert_eq!(*x, *y as f32 as f64);
            }
        }
    }
}

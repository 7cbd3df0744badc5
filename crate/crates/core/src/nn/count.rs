//! Analytic parameter and FLOP counting over layer spec chains.
//!
//! Formula sheet (inference-mode FLOPs, one sample):
//!
//! | layer        | parameters                    | FLOPs                                  |
//! |--------------|-------------------------------|----------------------------------------|
//! | dense        | in*out + out                  | 2*in*out + out                         |
//! | conv1d       | Cin*Cout*k + Cout             | (2*Cin*k + 1) * Cout * Lout            |
//! | conv2d       | Cin*Cout*k^2 + Cout           | (2*Cin*k^2 + 1) * Cout * Hout * Wout   |
//! | batchnorm    | 2*C (affine)                  | 2 per element (scale + shift)          |
//! | relu/sigmoid | 0                             | 1 per element                          |
//! | softmax      | 0                             | 1 per element                          |
//! | maxpool2x2   | 0                             | 1 per input element                    |
//! | upsample2x   | 0                             | 0 (data movement)                      |
//! | dropout      | 0                             | 0 (inactive at inference)              |
//! | flatten etc. | 0                             | 0                                      |
//!
//! A multiply-accumulate counts as 2 FLOPs; bias adds as 1 per output.

use crate::error::Result;

use super::layers::LayerSpec;

/// Parameter and FLOP count for one layer given its per-sample input shape.
pub fn layer_params_flops(spec: &LayerSpec, input: &[usize]) -> Result<(u64, u64)> {
    let out_shape = spec.output_shape(input)?;
    let in_numel: u64 = input.iter().product::<usize>() as u64;
    let out_numel: u64 = out_shape.iter().product::<usize>() as u64;
    Ok(match spec {
        LayerSpec::Dense { in_features, out_features } => {
            let (fi, fo) = (*in_features as u64, *out_features as u64);
            (fi * fo + fo, 2 * fi * fo + fo)
        }
        LayerSpec::Conv1d { in_channels, out_channels, kernel, .. } => {
            let (ci, co, k) = (*in_channels as u64, *out_channels as u64, *kernel as u64);
            let spatial = out_numel / co;
            (ci * co * k + co, (2 * ci * k + 1) * co * spatial)
        }
        LayerSpec::Conv2d { in_channels, out_channels, kernel, .. } => {
            let (ci, co, k) = (*in_channels as u64, *out_channels as u64, *kernel as u64);
            let spatial = out_numel / co;
            (ci * co * k * k + co, (2 * ci * k * k + 1) * co * spatial)
        }
        LayerSpec::BatchNorm1d { features } => (2 * *features as u64, 2 * out_numel),
        LayerSpec::BatchNorm2d { channels } => (2 * *channels as u64, 2 * out_numel),
        LayerSpec::Relu | LayerSpec::Sigmoid | LayerSpec::Softmax => (0, out_numel),
        LayerSpec::MaxPool2x2 => (0, in_numel),
        LayerSpec::Upsample2x
        | LayerSpec::Dropout { .. }
        | LayerSpec::Flatten
        | LayerSpec::Reshape { .. } => (0, 0),
    })
}

/// Totals over a spec chain; additive over layers.
pub fn count_params_flops(specs: &[LayerSpec], input_shape: &[usize]) -> Result<(u64, u64)> {
    let mut shape = input_shape.to_vec();
    let mut params = 0u64;
    let mut flops = 0u64;
    for spec in specs {
        let (p, f) = layer_params_flops(spec, &shape)?;
        params += p;
        flops += f;
        shape = spec.output_shape(&shape)?;
    }
    Ok((params, flops))
}

// SPDX-License-Identifier: Apache-2.0
//! Binary weight (`MXW1`) and sample (`MXI1`) files. All fields little-endian.
//!
//! MXW1: magic, version u16, layer_count u16, then per layer name_len u8,
//! name, rank u8, rank × u32 dims, f32 weights (row-major), bias_len u32,
//! f32 biases. Conv weights are `[out_channels, in_channels, kernel]`, FC
//! weights `[out_features, in_features]`.
//!
//! MXI1: magic, version u16, sample_count u32, length u32, label flag u8,
//! f32 samples, then one u8 label per sample if the flag is set.

use std::path::Path;

use crate::mapping::{BIAS_ROWS, TILE_COLS, TILE_ROWS};
use crate::nn::arch::balance_paddings;
use crate::nn::{
    Branch, Conv1dSpec, ConvBlock, FcSpec, LayerParams, NetworkParams, NetworkSpec, PoolSpec,
    Signal,
};
use crate::{Error, Result};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"MXW1";
pub const INPUTS_MAGIC: &[u8; 4] = b"MXI1";
pub const VERSION: u16 = 1;

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    format: &'static str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format {
                format: self.format,
                detail: format!("truncated while reading {what} at byte {}", self.pos),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2, what)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = self.take(
            n.checked_mul(4)
                .ok_or_else(|| self.err(format!("{what} length overflows")))?,
            what,
        )?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect())
    }

    fn err(&self, detail: String) -> Error {
        Error::Format {
            format: self.format,
            detail,
        }
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        if self.take(4, "magic")? != magic {
            return Err(self.err("bad magic".into()));
        }
        let v = self.u16("version")?;
        if v != VERSION {
            return Err(self.err(format!("unsupported version {v}")));
        }
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(self.err(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

/// One tensor pair as stored in an MXW1 file.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightRecord {
    pub name: String,
    pub dims: Vec<usize>,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

pub fn decode_weights(buf: &[u8]) -> Result<Vec<WeightRecord>> {
    let mut r = Reader {
        buf,
        pos: 0,
        format: "MXW1",
    };
    r.header(WEIGHTS_MAGIC)?;
    let count = r.u16("layer count")?;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = r.u8("name length")? as usize;
        let name = String::from_utf8(r.take(len, "layer name")?.to_vec())
            .map_err(|_| r.err("layer name is not UTF-8".into()))?;
        let rank = r.u8("rank")? as usize;
        let dims = (0..rank)
            .map(|_| r.u32("dims").map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| r.err(format!("{name}: dims overflow")))?;
        let weights = r.f32s(n, &format!("{name} weights"))?;
        let bias_len = r.u32("bias length")? as usize;
        let bias = r.f32s(bias_len, &format!("{name} biases"))?;
        out.push(WeightRecord {
            name,
            dims,
            weights,
            bias,
        });
    }
    r.finish()?;
    Ok(out)
}

pub fn encode_weights(records: &[WeightRecord]) -> Result<Vec<u8>> {
    let mut b = Vec::new();
    b.extend_from_slice(WEIGHTS_MAGIC);
    b.extend_from_slice(&VERSION.to_le_bytes());
    let count =
        u16::try_from(records.len()).map_err(|_| Error::Config("too many layers".into()))?;
    b.extend_from_slice(&count.to_le_bytes());
    for rec in records {
        let name = rec.name.as_bytes();
        let len = u8::try_from(name.len())
            .map_err(|_| Error::Config(format!("layer name {:?} too long", rec.name)))?;
        b.push(len);
        b.extend_from_slice(name);
        b.push(u8::try_from(rec.dims.len()).map_err(|_| Error::Config("rank too large".into()))?);
        for &d in &rec.dims {
            b.extend_from_slice(
                &u32::try_from(d)
                    .map_err(|_| Error::Config("dimension too large".into()))?
                    .to_le_bytes(),
            );
        }
        for &w in &rec.weights {
            b.extend_from_slice(&(w as f32).to_le_bytes());
        }
        b.extend_from_slice(&(rec.bias.len() as u32).to_le_bytes());
        for &x in &rec.bias {
            b.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    Ok(b)
}

pub fn records_from_params(params: &NetworkParams) -> Vec<WeightRecord> {
    params
        .layers
        .iter()
        .map(|l| WeightRecord {
            name: l.name.clone(),
            dims: l.shape.clone(),
            weights: l.weights.clone(),
            bias: l.bias.clone(),
        })
        .collect()
}

pub fn params_from_records(records: &[WeightRecord], spec: &NetworkSpec) -> Result<NetworkParams> {
    let params = NetworkParams {
        layers: records
            .iter()
            .map(|r| LayerParams {
                name: r.name.clone(),
                shape: r.dims.clone(),
                weights: r.weights.clone(),
                bias: r.bias.clone(),
            })
            .collect(),
        fixed_point: None,
    };
    params.validate(spec)?;
    Ok(params)
}

/// Every conv record must fit one tile under the weight-stationary layout.
pub fn check_conv_tile_fit(records: &[WeightRecord]) -> Result<()> {
    for r in records.iter().filter(|r| r.dims.len() == 3) {
        let (f, c, k) = (r.dims[0], r.dims[1], r.dims[2]);
        let rows = c * k + BIAS_ROWS;
        if rows > TILE_ROWS || 2 * f > TILE_COLS {
            return Err(Error::ExceedsTile {
                what: format!("{} (kernel {k} x {c} channel(s), {f} filters)", r.name),
                rows,
                cols: 2 * f,
                tile_rows: TILE_ROWS,
                tile_cols: TILE_COLS,
            });
        }
    }
    Ok(())
}

/// Reconstructs the architecture a weight file was exported from: all conv
/// records form parallel branches of one block (padded so they pool to the
/// same length), followed by the FC stack with ReLU on all but the last.
pub fn spec_from_records(records: &[WeightRecord], input_length: usize) -> Result<NetworkSpec> {
    let bad = |r: &WeightRecord, d: &str| Error::LayerMismatch {
        layer: r.name.clone(),
        detail: d.into(),
    };
    let convs: Vec<&WeightRecord> = records.iter().take_while(|r| r.dims.len() == 3).collect();
    let fcs = &records[convs.len()..];
    if let Some(r) = fcs.iter().find(|r| r.dims.len() != 2) {
        return Err(bad(
            r,
            &format!(
                "rank {} where a fully connected [out, in] layer was expected",
                r.dims.len()
            ),
        ));
    }
    let pool = PoolSpec::PAIR;
    let mut blocks = Vec::new();
    let mut features = input_length;
    if !convs.is_empty() {
        let in_channels = convs[0].dims[1];
        if let Some(r) = convs.iter().find(|r| r.dims[1] != in_channels) {
            return Err(bad(r, "branches disagree on input channels"));
        }
        let kernels: Vec<usize> = convs.iter().map(|r| r.dims[2]).collect();
        let pads = balance_paddings(input_length, &kernels, pool)?;
        let branches: Vec<Branch> = convs
            .iter()
            .zip(&pads)
            .map(|(r, &pad)| Branch {
                conv: Conv1dSpec {
                    in_channels,
                    out_channels: r.dims[0],
                    kernel_size: r.dims[2],
                    stride: 1,
                    padding_left: pad,
                    padding_right: 0,
                },
                pool,
            })
            .collect();
        let output_len = pool.output_len(branches[0].conv.output_len(input_length)?)?;
        let block = ConvBlock {
            input_len: input_length,
            branches,
            output_len,
        };
        features = block.output_channels() * output_len;
        blocks.push(block);
        if in_channels != 1 {
            return Err(bad(convs[0], "only single-channel inputs are supported"));
        }
    }
    let mut fc = Vec::new();
    for (i, r) in fcs.iter().enumerate() {
        if r.dims[1] != features {
            return Err(bad(
                r,
                &format!("expects {} inputs, {features} arrive", r.dims[1]),
            ));
        }
        fc.push(FcSpec {
            in_features: r.dims[1],
            out_features: r.dims[0],
            relu: i + 1 != fcs.len(),
        });
        features = r.dims[0];
    }
    NetworkSpec::from_parts(input_length, 1, blocks, fc)
}

/// Loads a weight file and the architecture it implies.
pub fn load_weights(path: &Path, input_length: usize) -> Result<(NetworkSpec, NetworkParams)> {
    let records = decode_weights(&std::fs::read(path)?)?;
    let spec = spec_from_records(&records, input_length)?;
    let params = params_from_records(&records, &spec)?;
    Ok((spec, params))
}

pub fn save_weights(path: &Path, params: &NetworkParams) -> Result<()> {
    Ok(std::fs::write(
        path,
        encode_weights(&records_from_params(params))?,
    )?)
}

/// Samples with optional labels (0 or 1).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub length: usize,
    pub samples: Vec<Signal>,
    pub labels: Option<Vec<u8>>,
}

pub fn decode_inputs(buf: &[u8]) -> Result<SampleSet> {
    let mut r = Reader {
        buf,
        pos: 0,
        format: "MXI1",
    };
    r.header(INPUTS_MAGIC)?;
    let count = r.u32("sample count")? as usize;
    let length = r.u32("length")? as usize;
    let flag = r.u8("label flag")?;
    if flag > 1 {
        return Err(r.err(format!("label flag {flag}")));
    }
    let total = count
        .checked_mul(length)
        .ok_or_else(|| r.err("sample block overflows".into()))?;
    let values = r.f32s(total, "samples")?;
    let samples = values
        .chunks(length.max(1))
        .take(count)
        .map(|c| Signal::new(c.to_vec()))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| r.err(e.to_string()))?;
    let labels = if flag == 1 {
        let l = r.take(count, "labels")?.to_vec();
        if let Some(bad) = l.iter().find(|&&x| x > 1) {
            return Err(r.err(format!("label {bad} is not 0 or 1")));
        }
        Some(l)
    } else {
        None
    };
    r.finish()?;
    Ok(SampleSet {
        length,
        samples,
        labels,
    })
}

pub fn encode_inputs(set: &SampleSet) -> Result<Vec<u8>> {
    let mut b = Vec::new();
    b.extend_from_slice(INPUTS_MAGIC);
    b.extend_from_slice(&VERSION.to_le_bytes());
    b.extend_from_slice(&(set.samples.len() as u32).to_le_bytes());
    b.extend_from_slice(&(set.length as u32).to_le_bytes());
    b.push(u8::from(set.labels.is_some()));
    for s in &set.samples {
        if s.len() != set.length {
            return Err(Error::Format {
                format: "MXI1",
                detail: format!(
                    "sample of length {} in a set of length {}",
                    s.len(),
                    set.length
                ),
            });
        }
        for &x in s.values() {
            b.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    if let Some(l) = &set.labels {
        b.extend_from_slice(l);
    }
    Ok(b)
}

pub fn load_inputs(path: &Path) -> Result<SampleSet> {
    decode_inputs(&std::fs::read(path)?)
}

pub fn save_inputs(path: &Path, set: &SampleSet) -> Result<()> {
    Ok(std::fs::write(path, encode_inputs(set)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn f32_params() -> (NetworkSpec, NetworkParams) {
        let spec = NetworkSpec::canonical();
        let mut p = NetworkParams::random(&spec, &mut ChaCha8Rng::seed_from_u64(1));
        for l in &mut p.layers {
            for x in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *x = *x as f32 as f64;
            }
        }
        (spec, p)
    }

    #[test]
    fn weights_roundtrip_is_byte_identical() {
        let (spec, p) = f32_params();
        let bytes = encode_weights(&records_from_params(&p)).unwrap();
        let recs = decode_weights(&bytes).unwrap();
        assert_eq!(spec_from_records(&recs, 64).unwrap(), spec);
        let back = params_from_records(&recs, &spec).unwrap();
        assert_eq!(back.layers, p.layers);
        assert_eq!(encode_weights(&records_from_params(&back)).unwrap(), bytes);
    }

    #[test]
    fn header_layout() {
        let rec = WeightRecord {
            name: "fc1".into(),
            dims: vec![2, 1],
            weights: vec![1.0, -2.0],
            bias: vec![0.5, 0.25],
        };
        let b = encode_weights(&[rec]).unwrap();
        assert_eq!(&b[..4], b"MXW1");
        assert_eq!(&b[4..8], &[1, 0, 1, 0]);
        assert_eq!(b[8], 3);
        assert_eq!(&b[9..12], b"fc1");
        assert_eq!(b[12], 2);
        assert_eq!(&b[13..21], &[2, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(&b[21..25], &1.0f32.to_le_bytes());
        assert_eq!(b.len(), 25 + 4 + 4 + 8);
    }

    #[test]
    fn malformed_weights() {
        let (_, p) = f32_params();
        let bytes = encode_weights(&records_from_params(&p)).unwrap();
        assert!(decode_weights(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_weights(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(decode_weights(&extra).is_err());
    }

    #[test]
    fn mismatch_names_layer() {
        let (_, p) = f32_params();
        let mut recs = records_from_params(&p);
        recs[2].dims = vec![8, 1000];
        recs[2].weights.truncate(8000);
        let err = spec_from_records(&recs, 64).unwrap_err();
        assert!(err.to_string().contains("fc1"), "{err}");
        let spec = NetworkSpec::canonical();
        let mut recs = records_from_params(&p);
        recs[3].bias.pop();
        let err = params_from_records(&recs, &spec).unwrap_err();
        assert!(err.to_string().contains("fc2"), "{err}");
    }

    #[test]
    fn tile_fit_check() {
        let rec = |k: usize| WeightRecord {
            name: "conv1".into(),
            dims: vec![32, 1, k],
            weights: vec![0.0; 32 * k],
            bias: vec![0.0; 32],
        };
        assert!(check_conv_tile_fit(&[rec(62)]).is_ok());
        let err = check_conv_tile_fit(&[rec(65)]).unwrap_err();
        assert!(err.to_string().contains("exceeds tile"));
    }

    #[test]
    fn inputs_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let samples: Vec<Signal> = (0..5)
            .map(|_| {
                Signal::new(
                    (0..64)
                        .map(|_| rng.random_range(-1.0f32..1.0) as f64)
                        .collect(),
                )
                .unwrap()
            })
            .collect();
        for labels in [None, Some(vec![0, 1, 1, 0, 1])] {
            let set = SampleSet {
                length: 64,
                samples: samples.clone(),
                labels,
            };
            let b = encode_inputs(&set).unwrap();
            assert_eq!(&b[..4], b"MXI1");
            assert_eq!(decode_inputs(&b).unwrap(), set);
        }
        let set = SampleSet {
            length: 64,
            samples,
            labels: Some(vec![0, 1, 2, 0, 1]),
        };
        assert!(decode_inputs(&encode_inputs(&set).unwrap()).is_err());
    }
}

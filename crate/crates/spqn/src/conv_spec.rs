//! `{"input_length": n, "leaf_channels": c0, "layers": [{"stride": s, "rf": r, "channels": c}, ...]}`

use std::path::Path;

use serde::{Deserialize, Serialize};
use spqn_core::builders::{ConvLayerSpec, ConvNetSpec};

use crate::{FormatError, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDoc {
    input_length: usize,
    leaf_channels: usize,
    layers: Vec<LayerDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    stride: usize,
    rf: usize,
    channels: usize,
}

pub fn parse_conv_spec(text: &str) -> Result<ConvNetSpec> {
    let doc: SpecDoc = serde_json::from_str(text)?;
    let spec = ConvNetSpec {
        input_length: doc.input_length,
        leaf_channels: doc.leaf_channels,
        layers: doc
            .layers
            .iter()
            .map(|l| ConvLayerSpec {
                stride: l.stride,
                receptive_field: l.rf,
                channels: l.channels,
            })
            .collect(),
    };
    spec.output_lengths().map_err(|e| FormatError::ConvSpec(e.to_string()))?;
    Ok(spec)
}

pub fn conv_spec_to_string(spec: &ConvNetSpec) -> String {
    let doc = SpecDoc {
        input_length: spec.input_length,
        leaf_channels: spec.leaf_channels,
        layers: spec
            .layers
            .iter()
            .map(|l| LayerDoc {
                stride: l.stride,
                rf: l.receptive_field,
                channels: l.channels,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("spec serializes")
}

pub fn read_conv_spec(path: &Path) -> Result<ConvNetSpec> {
    parse_conv_spec(&crate::read_file(path)?)
}

use std::fmt;

use super::ModelError;
use crate::nn::{ConvSpec, GruSpec};

/// One inverted-bottleneck block: expand, depthwise, linear projection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockConfig {
    pub expand: usize,
    pub kernel: usize,
    pub stride: usize,
    /// Adds the block input to its output. Only valid when the block keeps
    /// the time resolution, i.e. `stride == 1`.
    pub residual: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MagicNetConfig {
    pub n_mels: usize,
    pub prologue_kernel: usize,
    pub prologue_stride: usize,
    /// Number of pointwise convs after the prologue depthwise conv.
    pub prologue_pointwise: usize,
    /// Bottleneck channel count between stages.
    pub width: usize,
    pub blocks: Vec<BlockConfig>,
    pub gru_layers: usize,
    pub gru_hidden: usize,
}

impl Default for MagicNetConfig {
    fn default() -> Self {
        Self {
            n_mels: 40,
            prologue_kernel: 40,
            prologue_stride: 2,
            prologue_pointwise: 2,
            width: 20,
            blocks: vec![
                BlockConfig { expand: 80, kernel: 41, stride: 2, residual: false },
                BlockConfig { expand: 80, kernel: 21, stride: 2, residual: false },
            ],
            gru_layers: 2,
            gru_hidden: 20,
        }
    }
}

/// A conv + batch norm (+ optional ReLU) stage of the flattened conv stack.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitConfig {
    pub name: String,
    pub spec: ConvSpec,
    pub relu: bool,
    /// Index of the unit whose input is added to this unit's output.
    pub skip_from: Option<usize>,
}

impl MagicNetConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.units().map(|_| ())
    }

    /// Flattens the network into its conv units, in execution order.
    pub fn units(&self) -> Result<Vec<UnitConfig>, ModelError> {
        let cfg_err = |e: crate::nn::NnError| ModelError::Config(e.to_string());
        if self.prologue_pointwise == 0 {
            return Err(ModelError::Config("prologue needs at least one pointwise conv".into()));
        }
        let mut units = vec![UnitConfig {
            name: "prologue.dw".into(),
            spec: ConvSpec::depthwise(self.n_mels, self.prologue_kernel, self.prologue_stride).map_err(cfg_err)?,
            relu: true,
            skip_from: None,
        }];
        for p in 0..self.prologue_pointwise {
            let in_ch = if p == 0 { self.n_mels } else { self.width };
            units.push(UnitConfig {
                name: format!("prologue.pw{}", p + 1),
                spec: ConvSpec::pointwise(in_ch, self.width).map_err(cfg_err)?,
                relu: true,
                skip_from: None,
            });
        }
        for (b, block) in self.blocks.iter().enumerate() {
            let name = format!("block{}", b + 1);
            if block.residual && block.stride != 1 {
                return Err(ModelError::Config(format!(
                    "{name}: residual skip needs matching shapes, but stride {} maps {w}xT to {w}xceil(T/{})",
                    block.stride,
                    block.stride,
                    w = self.width
                )));
            }
            let first = units.len();
            units.push(UnitConfig {
                name: format!("{name}.expand"),
                spec: ConvSpec::pointwise(self.width, block.expand).map_err(cfg_err)?,
                relu: true,
                skip_from: None,
            });
            units.push(UnitConfig {
                name: format!("{name}.dw"),
                spec: ConvSpec::depthwise(block.expand, block.kernel, block.stride).map_err(cfg_err)?,
                relu: true,
                skip_from: None,
            });
            units.push(UnitConfig {
                name: format!("{name}.project"),
                spec: ConvSpec::pointwise(block.expand, self.width).map_err(cfg_err)?,
                relu: false,
                skip_from: block.residual.then_some(first),
            });
        }
        self.gru_spec()?;
        Ok(units)
    }

    pub fn gru_spec(&self) -> Result<GruSpec, ModelError> {
        GruSpec::new(self.gru_layers, self.width, self.gru_hidden).map_err(|e| ModelError::Config(e.to_string()))
    }

    /// Product of all conv strides: input frames per output step.
    pub fn downsample(&self) -> usize {
        self.prologue_stride * self.blocks.iter().map(|b| b.stride).product::<usize>()
    }

    /// Output steps produced from `frames` input frames.
    pub fn out_len(&self, frames: usize) -> usize {
        std::iter::once(self.prologue_stride)
            .chain(self.blocks.iter().map(|b| b.stride))
            .fold(frames, |t, s| t.div_ceil(s))
    }

    /// History window of the conv stack alone, in input frames.
    pub fn receptive_field(&self) -> Result<ReceptiveField, ModelError> {
        let mut frames = 1;
        let mut jump = 1;
        for u in self.units()? {
            frames += (u.spec.kernel - 1) * jump;
            jump *= u.spec.stride;
        }
        Ok(ReceptiveField {
            conv_frames: frames,
            recurrent: self.gru_layers > 0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReceptiveField {
    pub conv_frames: usize,
    pub recurrent: bool,
}

impl fmt::Display for ReceptiveField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.recurrent {
            write!(f, "unbounded (recurrent); conv stack {} frames", self.conv_frames)
        } else {
            write!(f, "{} frames", self.conv_frames)
        }
    }
}

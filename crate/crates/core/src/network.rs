//! Static network architecture: layer specs, simulation constants and the
//! derived per-layer geometry the forward and backward passes run on.
//!
//! Architectures can be written in the compact dash notation used for
//! convolutional SNN benchmarks, e.g.
//! `Input-15C3-AvgPool2-40C3-AvgPool2-Flatten-300FC-10FC`. Convolutions in
//! that notation use stride 1 and "same" padding (`kernel / 2`).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SnnError};

/// Channel-major activation shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape3 {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape3 {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Self { channels, height, width }
    }

    pub const fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn plane(&self) -> usize {
        self.height * self.width
    }

    /// Parses `CxHxW`, e.g. `1x28x28`.
    pub fn parse(s: &str) -> Result<Self> {
        let dims: Vec<usize> = s
            .split('x')
            .map(|d| d.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| SnnError::InvalidSpec(format!("bad shape {s:?}, expected CxHxW")))?;
        match dims[..] {
            [c, h, w] if c > 0 && h > 0 && w > 0 => Ok(Self::new(c, h, w)),
            _ => Err(SnnError::InvalidSpec(format!("bad shape {s:?}, expected CxHxW"))),
        }
    }
}

impl fmt::Display for Shape3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerSpec {
    Conv { out_channels: usize, kernel_size: usize, stride: usize, padding: usize },
    AvgPool { window: usize, stride: usize },
    MaxPool { window: usize, stride: usize },
    Fc { out_units: usize },
}

impl LayerSpec {
    /// 3x3-style convolution with stride 1 and same padding.
    pub const fn conv(out_channels: usize, kernel_size: usize) -> Self {
        LayerSpec::Conv { out_channels, kernel_size, stride: 1, padding: kernel_size / 2 }
    }

    pub const fn avg_pool(window: usize) -> Self {
        LayerSpec::AvgPool { window, stride: window }
    }

    pub const fn max_pool(window: usize) -> Self {
        LayerSpec::MaxPool { window, stride: window }
    }

    pub const fn fc(out_units: usize) -> Self {
        LayerSpec::Fc { out_units }
    }

    /// Number of prunable units (channels for conv, neurons for fc).
    /// Pooling layers carry no units.
    pub fn unit_count(&self) -> Option<usize> {
        match *self {
            LayerSpec::Conv { out_channels, .. } => Some(out_channels),
            LayerSpec::Fc { out_units } => Some(out_units),
            LayerSpec::AvgPool { .. } | LayerSpec::MaxPool { .. } => None,
        }
    }

    pub fn is_weighted(&self) -> bool {
        self.unit_count().is_some()
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            LayerSpec::Conv { out_channels, kernel_size, stride, .. } => {
                out_channels >= 1 && kernel_size >= 1 && stride >= 1
            }
            LayerSpec::AvgPool { window, stride } | LayerSpec::MaxPool { window, stride } => {
                window >= 1 && stride >= 1
            }
            LayerSpec::Fc { out_units } => out_units >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(SnnError::InvalidSpec(format!("layer {self} has a zero size parameter")))
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LayerSpec::Conv { out_channels, kernel_size, stride, padding } => {
                if stride == 1 && padding == kernel_size / 2 {
                    write!(f, "{out_channels}C{kernel_size}")
                } else {
                    write!(f, "{out_channels}C{kernel_size}s{stride}p{padding}")
                }
            }
            LayerSpec::AvgPool { window, stride } if window == stride => write!(f, "AvgPool{window}"),
            LayerSpec::AvgPool { window, stride } => write!(f, "AvgPool{window}s{stride}"),
            LayerSpec::MaxPool { window, stride } if window == stride => write!(f, "MaxPool{window}"),
            LayerSpec::MaxPool { window, stride } => write!(f, "MaxPool{window}s{stride}"),
            LayerSpec::Fc { out_units } => write!(f, "{out_units}FC"),
        }
    }
}

/// Whether the surrogate box includes its edges `v_th +- a/2`.
///
/// The two only differ at the edges, but with `v_th = a/2` the lower edge is
/// `u = 0`, which is exactly where a pruned unit sits. Only the closed window
/// lets pruned synapses see a gradient there.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SurrogateWindow {
    #[default]
    Open,
    Closed,
}

/// Architecture plus LIF simulation constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_shape: Shape3,
    pub layers: Vec<LayerSpec>,
    pub time_steps: usize,
    /// Membrane decay per step.
    pub tau: f64,
    /// Firing threshold.
    pub v_th: f64,
    /// Width `a` of the rectangular surrogate window.
    pub surrogate_width: f64,
    pub surrogate_window: SurrogateWindow,
}

impl NetworkSpec {
    pub const DEFAULT_TIME_STEPS: usize = 8;
    pub const DEFAULT_TAU: f64 = 0.2;
    pub const DEFAULT_V_TH: f64 = 0.5;
    pub const DEFAULT_SURROGATE_WIDTH: f64 = 1.0;

    /// Spec with the default LIF constants.
    pub fn new(input_shape: Shape3, layers: Vec<LayerSpec>) -> Self {
        Self {
            input_shape,
            layers,
            time_steps: Self::DEFAULT_TIME_STEPS,
            tau: Self::DEFAULT_TAU,
            v_th: Self::DEFAULT_V_TH,
            surrogate_width: Self::DEFAULT_SURROGATE_WIDTH,
            surrogate_window: SurrogateWindow::Open,
        }
    }

    /// Parses dash-separated architecture notation. `Input` and `Flatten`
    /// tokens are accepted and ignored; flattening is implicit before fc.
    pub fn parse_layers(arch: &str) -> Result<Vec<LayerSpec>> {
        let mut layers = Vec::new();
        for raw in arch.split('-') {
            let tok = raw.trim();
            if tok.is_empty() || tok.eq_ignore_ascii_case("input") || tok.eq_ignore_ascii_case("flatten") {
                continue;
            }
            layers.push(parse_layer_token(tok)?);
        }
        if layers.is_empty() {
            return Err(SnnError::InvalidSpec(format!("architecture {arch:?} has no layers")));
        }
        Ok(layers)
    }

    pub fn arch_string(&self) -> String {
        self.layers.iter().map(ToString::to_string).collect::<Vec<_>>().join("-")
    }

    pub fn class_count(&self) -> usize {
        match self.layers.last() {
            Some(LayerSpec::Fc { out_units }) => *out_units,
            _ => 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_shape.is_empty() {
            return Err(SnnError::InvalidSpec("input shape has a zero dimension".into()));
        }
        if self.time_steps < 1 {
            return Err(SnnError::InvalidSpec("time_steps must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.tau) {
            return Err(SnnError::InvalidSpec(format!("tau {} outside [0, 1)", self.tau)));
        }
        if !(self.v_th > 0.0 && self.v_th.is_finite()) {
            return Err(SnnError::InvalidSpec(format!("v_th {} must be positive", self.v_th)));
        }
        if !(self.surrogate_width > 0.0 && self.surrogate_width.is_finite()) {
            return Err(SnnError::InvalidSpec(format!(
                "surrogate width {} must be positive",
                self.surrogate_width
            )));
        }
        for layer in &self.layers {
            layer.validate()?;
        }
        match self.layers.last() {
            Some(LayerSpec::Fc { .. }) => Ok(()),
            _ => Err(SnnError::InvalidSpec("final layer must be fully connected".into())),
        }
    }
}

fn parse_layer_token(tok: &str) -> Result<LayerSpec> {
    let bad = || SnnError::InvalidSpec(format!("unrecognised layer token {tok:?}"));
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad());
    let upper = tok.to_ascii_uppercase();

    for (prefix, max) in [("AVGPOOL", false), ("AP", false), ("MAXPOOL", true), ("MP", true)] {
        if let Some(rest) = upper.strip_prefix(prefix) {
            let (window, stride) = match rest.split_once('S') {
                Some((w, s)) => (num(w)?, num(s)?),
                None => {
                    let w = num(rest)?;
                    (w, w)
                }
            };
            return Ok(if max {
                LayerSpec::MaxPool { window, stride }
            } else {
                LayerSpec::AvgPool { window, stride }
            });
        }
    }
    if let Some(units) = upper.strip_suffix("FC") {
        return Ok(LayerSpec::Fc { out_units: num(units)? });
    }
    if let Some((ch, rest)) = upper.split_once('C') {
        let out_channels = num(ch)?;
        // NcK, optionally followed by sS and pP.
        let (k, rest) = split_digits(rest);
        let kernel_size = num(k)?;
        let mut stride = 1;
        let mut padding = kernel_size / 2;
        let mut rest = rest;
        while !rest.is_empty() {
            let (key, tail) = rest.split_at(1);
            let (digits, tail) = split_digits(tail);
            match key {
                "S" => stride = num(digits)?,
                "P" => padding = num(digits)?,
                _ => return Err(bad()),
            }
            rest = tail;
        }
        return Ok(LayerSpec::Conv { out_channels, kernel_size, stride, padding });
    }
    Err(bad())
}

fn split_digits(s: &str) -> (&str, &str) {
    let end = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
    s.split_at(end)
}

/// Geometry of one weighted layer's parameters. Synapses of unit `i` occupy
/// `weights[i * fan_in .. (i + 1) * fan_in]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightLayout {
    pub units: usize,
    pub fan_in: usize,
    pub kind: WeightKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightKind {
    Conv { in_channels: usize, kernel_size: usize, stride: usize, padding: usize },
    Fc,
}

impl WeightLayout {
    pub fn synapses(&self) -> usize {
        self.units * self.fan_in
    }

    pub fn is_conv(&self) -> bool {
        matches!(self.kind, WeightKind::Conv { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerPlan {
    pub spec: LayerSpec,
    pub in_shape: Shape3,
    pub out_shape: Shape3,
    /// Index into `Parameters::layers` for weighted layers.
    pub slot: Option<usize>,
}

/// A validated spec with per-layer shapes resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    plans: Vec<LayerPlan>,
    layouts: Vec<WeightLayout>,
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let mut plans = Vec::with_capacity(spec.layers.len());
        let mut layouts = Vec::new();
        let mut shape = spec.input_shape;
        for (idx, layer) in spec.layers.iter().enumerate() {
            let (out_shape, layout) = match *layer {
                LayerSpec::Conv { out_channels, kernel_size, stride, padding } => {
                    let oh = conv_out(shape.height, kernel_size, stride, padding);
                    let ow = conv_out(shape.width, kernel_size, stride, padding);
                    let (Some(oh), Some(ow)) = (oh, ow) else {
                        return Err(SnnError::InvalidSpec(format!(
                            "layer {idx} ({layer}) does not fit input {shape}"
                        )));
                    };
                    let layout = WeightLayout {
                        units: out_channels,
                        fan_in: shape.channels * kernel_size * kernel_size,
                        kind: WeightKind::Conv {
                            in_channels: shape.channels,
                            kernel_size,
                            stride,
                            padding,
                        },
                    };
                    (Shape3::new(out_channels, oh, ow), Some(layout))
                }
                LayerSpec::AvgPool { window, stride } | LayerSpec::MaxPool { window, stride } => {
                    let oh = conv_out(shape.height, window, stride, 0);
                    let ow = conv_out(shape.width, window, stride, 0);
                    let (Some(oh), Some(ow)) = (oh, ow) else {
                        return Err(SnnError::InvalidSpec(format!(
                            "layer {idx} ({layer}) does not fit input {shape}"
                        )));
                    };
                    (Shape3::new(shape.channels, oh, ow), None)
                }
                LayerSpec::Fc { out_units } => {
                    let layout = WeightLayout { units: out_units, fan_in: shape.len(), kind: WeightKind::Fc };
                    (Shape3::new(out_units, 1, 1), Some(layout))
                }
            };
            let slot = layout.map(|l| {
                layouts.push(l);
                layouts.len() - 1
            });
            plans.push(LayerPlan { spec: *layer, in_shape: shape, out_shape, slot });
            shape = out_shape;
        }
        Ok(Self { spec, plans, layouts })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn plans(&self) -> &[LayerPlan] {
        &self.plans
    }

    /// Layouts of the weighted layers, input side first.
    pub fn layouts(&self) -> &[WeightLayout] {
        &self.layouts
    }

    pub fn weighted_count(&self) -> usize {
        self.layouts.len()
    }

    /// Slot of the readout layer (never pruned, never fires).
    pub fn output_slot(&self) -> usize {
        self.layouts.len() - 1
    }

    pub fn class_count(&self) -> usize {
        self.spec.class_count()
    }

    pub fn total_synapses(&self) -> usize {
        self.layouts.iter().map(WeightLayout::synapses).sum()
    }
}

fn conv_out(size: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = size + 2 * padding;
    if padded < kernel {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

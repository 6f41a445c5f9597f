//! Layer stacks: declarative configs, the runtime [`Network`], and the
//! manifest-plus-tensors file format for weights.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::layers::{
    ActivationKind, ChannelMaxout, ConvLayer, DenseLayer, DropoutSpec, Gradients, LayerCache, MaxPoolLayer,
    MaxoutBlock, Mode, Rng, ShareAxis,
};
use crate::tensor::{ByteCursor, Tensor};

const MAGIC: &str = "CMDNN-NET 1";

/// How a dataset row maps onto the network input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputLayout {
    /// Rows are fed as flat vectors of this width.
    Flat(usize),
    /// Rows are time-major context windows (`width` frames of `n_filters`
    /// coefficients) and are rearranged into `[1, n_filters, width]`
    /// spectro-temporal maps.
    Spectrogram { width: usize, n_filters: usize },
}

impl InputLayout {
    pub fn row_width(&self) -> usize {
        match *self {
            InputLayout::Flat(d) => d,
            InputLayout::Spectrogram { width, n_filters } => width * n_filters,
        }
    }

    /// Per-sample shape seen by the first layer.
    pub fn sample_shape(&self) -> Vec<usize> {
        match *self {
            InputLayout::Flat(d) => vec![d],
            InputLayout::Spectrogram { width, n_filters } => vec![1, n_filters, width],
        }
    }

    /// Converts `[batch, row_width]` rows into the first layer's input.
    pub fn prepare(&self, rows: &Tensor) -> Result<Tensor> {
        let batch = rows.shape()[0];
        if rows.len() != batch * self.row_width() {
            return Err(Error::shape("network input", rows.shape(), &[batch, self.row_width()]));
        }
        match *self {
            InputLayout::Flat(d) => rows.clone().reshape(&[batch, d]),
            InputLayout::Spectrogram { width, n_filters } => {
                let src = rows.data();
                let per = width * n_filters;
                let mut out = vec![0.0; rows.len()];
                for s in 0..batch {
                    for t in 0..width {
                        for f in 0..n_filters {
                            out[s * per + f * width + t] = src[s * per + t * n_filters + f];
                        }
                    }
                }
                Tensor::new(&[batch, 1, n_filters, width], out)
            }
        }
    }
}

/// One entry of a declarative layer stack.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Conv {
        channels: usize,
        kernel: (usize, usize),
        axis: ShareAxis,
    },
    ChannelMaxout {
        k: usize,
    },
    MaxPool {
        pool: (usize, usize),
    },
    Dense {
        units: usize,
        activation: ActivationKind,
        bias: bool,
    },
    Maxout {
        units: usize,
        k: usize,
    },
    Dropout {
        keep_prob: f64,
    },
    /// Linear classifier producing logits.
    Output {
        classes: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub input: InputLayout,
    pub layers: Vec<LayerSpec>,
}

impl NetworkConfig {
    /// Instantiates the stack with freshly initialized weights.
    pub fn build(&self, rng: &mut Rng) -> Result<Network> {
        let mut shape = self.input.sample_shape();
        let mut layers = Vec::new();
        for spec in &self.layers {
            let flat: usize = shape.iter().product();
            let first_new = layers.len();
            match *spec {
                LayerSpec::Conv {
                    channels,
                    kernel: (kh, kw),
                    axis,
                } => {
                    if shape.len() != 3 {
                        return Err(Error::Config("convolution needs a spectro-temporal input".into()));
                    }
                    let conv = ConvLayer::init(shape[0], channels, kh, kw, axis, rng)?;
                    layers.push(Layer::Conv(conv));
                }
                LayerSpec::ChannelMaxout { k } => layers.push(Layer::ChannelMaxout(ChannelMaxout::new(k)?)),
                LayerSpec::MaxPool { pool } => layers.push(Layer::MaxPool(MaxPoolLayer::new(pool.0, pool.1)?)),
                LayerSpec::Dense {
                    units,
                    activation,
                    bias,
                } => {
                    let gain = if activation == ActivationKind::Sigmoid {
                        4.0
                    } else {
                        1.0
                    };
                    layers.push(Layer::Dense(DenseLayer::init_with_gain(flat, units, bias, gain, rng)));
                    if activation != ActivationKind::Identity {
                        layers.push(Layer::Activation(activation));
                    }
                }
                LayerSpec::Maxout { units, k } => layers.push(Layer::Maxout(MaxoutBlock::init(flat, units, k, rng))),
                LayerSpec::Dropout { keep_prob } => layers.push(Layer::Dropout(DropoutSpec::new(keep_prob)?)),
                LayerSpec::Output { classes } => layers.push(Layer::Dense(DenseLayer::init(flat, classes, true, rng))),
            }
            for layer in &layers[first_new..] {
                shape = layer.output_shape(&shape)?;
            }
        }
        Network::new(self.input, layers)
    }
}

/// A runtime layer.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(DenseLayer),
    Activation(ActivationKind),
    Maxout(MaxoutBlock),
    Conv(ConvLayer),
    ChannelMaxout(ChannelMaxout),
    MaxPool(MaxPoolLayer),
    Dropout(DropoutSpec),
}

impl Layer {
    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let flat: usize = input.iter().product();
        match self {
            Layer::Dense(d) => {
                if flat != d.inputs() {
                    return Err(Error::shape("dense", input, &[d.inputs()]));
                }
                Ok(vec![d.outputs()])
            }
            Layer::Maxout(m) => {
                if flat != m.linear().inputs() {
                    return Err(Error::shape("maxout", input, &[m.linear().inputs()]));
                }
                Ok(vec![m.units()])
            }
            Layer::Conv(c) => Ok(c.output_shape(input)?.to_vec()),
            Layer::ChannelMaxout(cm) => match *input {
                [c, f, t] if c % cm.group_size() == 0 => Ok(vec![c / cm.group_size(), f, t]),
                _ => Err(Error::Config(format!(
                    "channel maxout k={} cannot take input {input:?}",
                    cm.group_size()
                ))),
            },
            Layer::MaxPool(p) => Ok(p.output_shape(input)?.to_vec()),
            Layer::Activation(_) | Layer::Dropout(_) => Ok(input.to_vec()),
        }
    }

    pub fn forward(&self, x: &Tensor, mode: &mut Mode<'_>, cache: &mut LayerCache) -> Result<Tensor> {
        match self {
            Layer::Dense(d) => d.forward_cached(x, cache),
            Layer::Activation(a) => Ok(a.forward_cached(x, cache)),
            Layer::Maxout(m) => m.forward_cached(x, cache),
            Layer::Conv(c) => c.forward_cached(x, cache),
            Layer::ChannelMaxout(cm) => cm.forward_cached(x, cache),
            Layer::MaxPool(p) => p.forward_cached(x, cache),
            Layer::Dropout(d) => {
                let rng = match mode {
                    Mode::Train(rng) => Some(&mut **rng),
                    Mode::Infer => None,
                };
                Ok(d.forward_cached(x, rng, cache))
            }
        }
    }

    pub fn backward(&self, cache: &LayerCache, upstream: &Tensor) -> Result<Gradients> {
        match self {
            Layer::Dense(d) => d.backward(cache, upstream),
            Layer::Activation(a) => a.backward(cache, upstream),
            Layer::Maxout(m) => m.backward(cache, upstream),
            Layer::Conv(c) => c.backward(cache, upstream),
            Layer::ChannelMaxout(cm) => cm.backward(cache, upstream),
            Layer::MaxPool(p) => p.backward(cache, upstream),
            Layer::Dropout(d) => d.backward(cache, upstream),
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Layer::Dense(d) => d.params(),
            Layer::Maxout(m) => m.linear().params(),
            Layer::Conv(c) => vec![c.kernels()],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Dense(d) => d.params_mut(),
            Layer::Maxout(m) => m.linear_mut().params_mut(),
            Layer::Conv(c) => vec![c.kernels_mut()],
            _ => Vec::new(),
        }
    }

    /// Weight tensor whose leading axis indexes output units, i.e. the
    /// tensor the max-norm constraint applies to.
    pub fn incoming_weights_mut(&mut self) -> Option<&mut Tensor> {
        match self {
            Layer::Dense(d) => Some(d.weights_mut()),
            Layer::Maxout(m) => Some(m.linear_mut().weights_mut()),
            Layer::Conv(c) => Some(c.kernels_mut()),
            _ => None,
        }
    }

    fn kind_name(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::Activation(_) => "activation",
            Layer::Maxout(_) => "maxout",
            Layer::Conv(_) => "conv",
            Layer::ChannelMaxout(_) => "chanmax",
            Layer::MaxPool(_) => "maxpool",
            Layer::Dropout(_) => "dropout",
        }
    }
}

impl fmt::Display for Layer {
    /// One manifest line: kind followed by `key=value` fields.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = self.kind_name();
        match self {
            Layer::Dense(d) => write!(
                f,
                "{name} in={} out={} bias={}",
                d.inputs(),
                d.outputs(),
                u8::from(d.use_bias())
            ),
            Layer::Activation(a) => write!(f, "{name} kind={a}"),
            Layer::Maxout(m) => write!(
                f,
                "{name} in={} units={} k={} bias={}",
                m.linear().inputs(),
                m.units(),
                m.group_size(),
                u8::from(m.linear().use_bias())
            ),
            Layer::Conv(c) => {
                let (kh, kw) = c.kernel_extent();
                write!(
                    f,
                    "{name} out={} in={} kh={kh} kw={kw} axis={}",
                    c.out_channels(),
                    c.in_channels(),
                    c.axis()
                )
            }
            Layer::ChannelMaxout(cm) => write!(f, "{name} k={}", cm.group_size()),
            Layer::MaxPool(p) => write!(
                f,
                "{name} pf={} pt={} sf={} st={}",
                p.pool().0,
                p.pool().1,
                p.stride().0,
                p.stride().1
            ),
            Layer::Dropout(d) => write!(f, "{name} p={:?}", d.keep_prob()),
        }
    }
}

/// Caches recorded by one forward pass, one per layer.
#[derive(Debug, Default)]
pub struct Tape {
    caches: Vec<LayerCache>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input: InputLayout,
    layers: Vec<Layer>,
}

impl Network {
    /// Validates that consecutive layer shapes chain.
    pub fn new(input: InputLayout, layers: Vec<Layer>) -> Result<Self> {
        let mut shape = input.sample_shape();
        for layer in &layers {
            shape = layer.output_shape(&shape)?;
        }
        Ok(Network { input, layers })
    }

    pub fn input_layout(&self) -> InputLayout {
        self.input
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn output_width(&self) -> usize {
        let mut shape = self.input.sample_shape();
        for layer in &self.layers {
            shape = layer.output_shape(&shape).expect("validated at construction");
        }
        shape.iter().product()
    }

    pub fn has_unbounded_units(&self) -> bool {
        self.layers.iter().any(|l| {
            matches!(
                l,
                Layer::Maxout(_)
                    | Layer::ChannelMaxout(_)
                    | Layer::Activation(ActivationKind::Relu | ActivationKind::Softplus)
            )
        })
    }

    pub fn has_dropout(&self) -> bool {
        self.layers.iter().any(|l| matches!(l, Layer::Dropout(_)))
    }

    /// Forward pass over `[batch, row_width]` rows; returns logits and the
    /// tape needed by [`Network::backward`].
    pub fn forward(&self, rows: &Tensor, mode: &mut Mode<'_>) -> Result<(Tensor, Tape)> {
        let mut x = self.input.prepare(rows)?;
        let mut tape = Tape {
            caches: Vec::with_capacity(self.layers.len()),
        };
        for layer in &self.layers {
            let mut cache = LayerCache::Empty;
            x = layer.forward(&x, mode, &mut cache)?;
            tape.caches.push(cache);
        }
        Ok((x.flatten_batch(), tape))
    }

    /// Parameter gradients per layer, in `params()` order.
    pub fn backward(&self, tape: &Tape, grad_logits: &Tensor) -> Result<Vec<Vec<Tensor>>> {
        if tape.caches.len() != self.layers.len() {
            return Err(Error::State("tape does not belong to this network".into()));
        }
        let mut grads = vec![Vec::new(); self.layers.len()];
        let mut up = grad_logits.clone();
        for (i, (layer, cache)) in self.layers.iter().zip(&tape.caches).enumerate().rev() {
            let g = layer.backward(cache, &up)?;
            grads[i] = g.params;
            if i > 0 {
                up = g.input;
            }
        }
        Ok(grads)
    }

    pub fn logits(&self, rows: &Tensor) -> Result<Tensor> {
        Ok(self.forward(rows, &mut Mode::Infer)?.0)
    }

    /// Argmax class per row (inference mode).
    pub fn predict(&self, rows: &Tensor) -> Result<Vec<usize>> {
        let logits = self.logits(rows)?;
        let classes = logits.shape()[1];
        Ok(logits
            .data()
            .chunks(classes)
            .map(|row| {
                let mut best = 0;
                for (j, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect())
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Copy with every dropout layer folded into the weights of the layer it
    /// feeds (`W ← p·W`) and removed. A dropout layer not followed by a
    /// weighted layer stays and scales its activations by `p` instead.
    pub fn inference_network(&self) -> Network {
        let mut layers: Vec<Layer> = Vec::with_capacity(self.layers.len());
        let mut pending: Option<DropoutSpec> = None;
        for layer in &self.layers {
            match layer {
                Layer::Dropout(d) => {
                    if let Some(prev) = pending.take() {
                        layers.push(Layer::Dropout(prev));
                    }
                    pending = Some(*d);
                }
                Layer::Dense(_) | Layer::Maxout(_) => {
                    let mut l = layer.clone();
                    if let Some(d) = pending.take() {
                        let w = l.incoming_weights_mut().unwrap();
                        let p = d.keep_prob();
                        w.data_mut().iter_mut().for_each(|v| *v *= p);
                    }
                    layers.push(l);
                }
                other => {
                    if let Some(prev) = pending.take() {
                        layers.push(Layer::Dropout(prev));
                    }
                    layers.push(other.clone());
                }
            }
        }
        if let Some(prev) = pending {
            layers.push(Layer::Dropout(prev));
        }
        Network {
            input: self.input,
            layers,
        }
    }

    /// Parameter payload only, in `params()` order.
    pub fn snapshot(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for p in self.params() {
            p.write_to(&mut out).expect("Vec write");
        }
        out
    }

    /// Restores parameters written by [`Network::snapshot`] of a network
    /// with the same architecture.
    pub fn restore(&mut self, snapshot: &[u8]) -> Result<()> {
        let mut pos = 0;
        let mut decoded = Vec::new();
        for p in self.params() {
            let (t, next) = Tensor::decode(snapshot, pos)?;
            if t.shape() != p.shape() {
                return Err(Error::shape("restore", t.shape(), p.shape()));
            }
            decoded.push(t);
            pos = next;
        }
        if pos != snapshot.len() {
            return Err(Error::Parse {
                offset: pos as u64,
                reason: "trailing bytes after last parameter".into(),
            });
        }
        for (dst, src) in self.params_mut().into_iter().zip(decoded) {
            *dst = src;
        }
        Ok(())
    }

    /// Text manifest (one line per layer) followed by the parameter tensors.
    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(self.manifest().as_bytes())?;
        w.write_all(&self.snapshot())
    }

    pub fn manifest(&self) -> String {
        let mut s = format!("{MAGIC}\n");
        match self.input {
            InputLayout::Flat(d) => s.push_str(&format!("input flat dim={d}\n")),
            InputLayout::Spectrogram { width, n_filters } => {
                s.push_str(&format!("input spectrogram width={width} filters={n_filters}\n"))
            }
        }
        s.push_str(&format!("layers {}\n", self.layers.len()));
        for l in &self.layers {
            s.push_str(&format!("{l}\n"));
        }
        s.push_str("end\n");
        s
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("Vec write");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Network> {
        let mut cur = ByteCursor { bytes, pos: 0 };
        let magic = cur.line()?;
        if magic != MAGIC {
            return Err(Error::Parse {
                offset: 0,
                reason: format!("bad network header {magic:?}"),
            });
        }
        let line_start = cur.pos;
        let (kind, fields) = split_fields(cur.line()?, line_start)?;
        let input = match kind {
            "input" if fields.contains_key("flat") || fields.contains_key("dim") => {
                InputLayout::Flat(field(&fields, "dim", line_start)?)
            }
            "input" => InputLayout::Spectrogram {
                width: field(&fields, "width", line_start)?,
                n_filters: field(&fields, "filters", line_start)?,
            },
            _ => return Err(parse_err(line_start, "expected input line")),
        };
        let line_start = cur.pos;
        let count: usize = cur
            .line()?
            .strip_prefix("layers ")
            .and_then(|n| n.trim().parse().ok())
            .ok_or_else(|| parse_err(line_start, "expected layer count"))?;
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let at = cur.pos;
            let (kind, f) = split_fields(cur.line()?, at)?;
            let get = |k: &str| field::<usize>(&f, k, at);
            let layer = match kind {
                "dense" => {
                    let (i, o) = (get("in")?, get("out")?);
                    Layer::Dense(DenseLayer::new(
                        Tensor::zeros(&[o, i]),
                        Tensor::zeros(&[o]),
                        get("bias")? == 1,
                    )?)
                }
                "activation" => Layer::Activation(f.get("kind").ok_or_else(|| parse_err(at, "missing kind"))?.parse()?),
                "maxout" => {
                    let (i, u, k) = (get("in")?, get("units")?, get("k")?);
                    let linear =
                        DenseLayer::new(Tensor::zeros(&[u * k, i]), Tensor::zeros(&[u * k]), get("bias")? == 1)?;
                    Layer::Maxout(MaxoutBlock::new(linear, k)?)
                }
                "conv" => Layer::Conv(ConvLayer::new(
                    Tensor::zeros(&[get("out")?, get("in")?, get("kh")?, get("kw")?]),
                    f.get("axis").ok_or_else(|| parse_err(at, "missing axis"))?.parse()?,
                )?),
                "chanmax" => Layer::ChannelMaxout(ChannelMaxout::new(get("k")?)?),
                "maxpool" => Layer::MaxPool(MaxPoolLayer::with_stride(
                    (get("pf")?, get("pt")?),
                    (get("sf")?, get("st")?),
                )?),
                "dropout" => Layer::Dropout(DropoutSpec::new(field(&f, "p", at)?)?),
                other => return Err(parse_err(at, &format!("unknown layer kind {other:?}"))),
            };
            layers.push(layer);
        }
        let at = cur.pos;
        if cur.line()? != "end" {
            return Err(parse_err(at, "expected end of manifest"));
        }
        let mut net = Network::new(input, layers)?;
        let payload_start = cur.pos;
        net.restore(&bytes[payload_start..]).map_err(|e| match e {
            Error::Parse { offset, reason } => Error::Parse {
                offset: offset + payload_start as u64,
                reason,
            },
            other => other,
        })?;
        Ok(net)
    }
}

fn parse_err(offset: usize, reason: &str) -> Error {
    Error::Parse {
        offset: offset as u64,
        reason: reason.to_string(),
    }
}

fn split_fields(line: &str, at: usize) -> Result<(&str, HashMap<&str, &str>)> {
    let mut parts = line.split_whitespace();
    let kind = parts.next().ok_or_else(|| parse_err(at, "empty manifest line"))?;
    let mut map = HashMap::new();
    for p in parts {
        match p.split_once('=') {
            Some((k, v)) => map.insert(k, v),
            None => map.insert(p, ""),
        };
    }
    Ok((kind, map))
}

fn field<T: std::str::FromStr>(map: &HashMap<&str, &str>, key: &str, at: usize) -> Result<T> {
    map.get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| parse_err(at, &format!("missing or invalid field {key:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng as _, SeedableRng};

    fn conv_config() -> NetworkConfig {
        NetworkConfig {
            input: InputLayout::Spectrogram { width: 6, n_filters: 5 },
            layers: vec![
                LayerSpec::Conv {
                    channels: 4,
                    kernel: (2, 3),
                    axis: ShareAxis::Both,
                },
                LayerSpec::ChannelMaxout { k: 2 },
                LayerSpec::MaxPool { pool: (2, 2) },
                LayerSpec::Maxout { units: 6, k: 2 },
                LayerSpec::Dropout { keep_prob: 0.7 },
                LayerSpec::Dense {
                    units: 5,
                    activation: ActivationKind::Relu,
                    bias: false,
                },
                LayerSpec::Output { classes: 3 },
            ],
        }
    }

    #[test]
    fn spectrogram_layout_transposes_frames() {
        let layout = InputLayout::Spectrogram { width: 2, n_filters: 3 };
        // frame0 = [1,2,3], frame1 = [4,5,6]
        let rows = Tensor::from_rows(&[&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]]);
        let x = layout.prepare(&rows).unwrap();
        assert_eq!(x.shape(), &[1, 1, 3, 2]);
        assert_eq!(x.data(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
    }

    #[test]
    fn build_chains_shapes() {
        let mut rng = Rng::seed_from_u64(1);
        let net = conv_config().build(&mut rng).unwrap();
        assert_eq!(net.output_width(), 3);
        let rows = Tensor::from_fn(&[4, 30], |_| rng.random_range(-1.0..1.0));
        let (logits, _) = net.forward(&rows, &mut Mode::Infer).unwrap();
        assert_eq!(logits.shape(), &[4, 3]);
    }

    #[test]
    fn folded_dropout_matches_scaled_activations() {
        let mut rng = Rng::seed_from_u64(8);
        let net = conv_config().build(&mut rng).unwrap();
        let folded = net.inference_network();
        assert!(!folded.has_dropout());
        let rows = Tensor::from_fn(&[3, 30], |_| rng.random_range(-1.0..1.0));
        let a = net.logits(&rows).unwrap();
        let b = folded.logits(&rows).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn serialization_round_trip() {
        let mut rng = Rng::seed_from_u64(3);
        let net = conv_config().build(&mut rng).unwrap();
        let bytes = net.to_bytes();
        let back = Network::from_bytes(&bytes).unwrap();
        assert_eq!(back, net);
        assert!(net.manifest().lines().any(|l| l == "dropout p=0.7"));
    }

    #[test]
    fn truncated_weights_report_offset() {
        let mut rng = Rng::seed_from_u64(3);
        let net = conv_config().build(&mut rng).unwrap();
        let bytes = net.to_bytes();
        let manifest_len = net.manifest().len() as u64;
        match Network::from_bytes(&bytes[..bytes.len() - 1]) {
            Err(Error::Parse { offset, .. }) => assert!(offset > manifest_len),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn snapshot_restore_is_exact() {
        let mut rng = Rng::seed_from_u64(5);
        let mut net = conv_config().build(&mut rng).unwrap();
        let snap = net.snapshot();
        let original = net.clone();
        for p in net.params_mut() {
            p.data_mut().iter_mut().for_each(|v| *v += 0.25);
        }
        assert_ne!(net, original);
        net.restore(&snap).unwrap();
        assert_eq!(net, original);
    }

    #[test]
    fn mismatched_layers_rejected() {
        let mut rng = Rng::seed_from_u64(0);
        let layers = vec![
            Layer::Dense(DenseLayer::init(4, 3, true, &mut rng)),
            Layer::Dense(DenseLayer::init(5, 2, true, &mut rng)),
        ];
        assert!(Network::new(InputLayout::Flat(4), layers).is_err());
    }
}

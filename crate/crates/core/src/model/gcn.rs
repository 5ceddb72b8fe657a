use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{FeatureTensor, INPUT_CHANNELS};
use crate::skeleton::SkeletonTopology;

/// Symmetric-normalized `A + I` stored densely and as sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    joints: usize,
    dense: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
}

impl Adjacency {
    /// `D^{-1/2} (A + I) D^{-1/2}` for an undirected edge list.
    pub fn normalized(joints: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut a = vec![0.0; joints * joints];
        for j in 0..joints {
            a[j * joints + j] = 1.0;
        }
        for (u, v) in edges {
            a[u * joints + v] = 1.0;
            a[v * joints + u] = 1.0;
        }
        Self::from_dense(joints, normalize_pattern(joints, &a))
    }

    pub fn from_topology(topo: &SkeletonTopology) -> Self {
        Self::normalized(topo.joint_count(), topo.edges())
    }

    /// Accepts a dense matrix only if it equals the symmetric normalization of
    /// its own sparsity pattern (which must include the diagonal).
    pub fn verified(joints: usize, dense: Vec<f64>) -> Result<Self> {
        if dense.len() != joints * joints {
            return Err(Error::Shape(format!("adjacency needs {} entries", joints * joints)));
        }
        let pattern: Vec<f64> = dense.iter().map(|&x| if x != 0.0 { 1.0 } else { 0.0 }).collect();
        if (0..joints).any(|j| pattern[j * joints + j] == 0.0) {
            return Err(Error::InvalidArgument("adjacency is missing self loops".into()));
        }
        for i in 0..joints {
            for j in 0..joints {
                if pattern[i * joints + j] != pattern[j * joints + i] {
                    return Err(Error::InvalidArgument("adjacency is not symmetric".into()));
                }
            }
        }
        let expect = normalize_pattern(joints, &pattern);
        if expect.iter().zip(&dense).any(|(a, b)| (a - b).abs() > 1e-12) {
            return Err(Error::InvalidArgument(
                "adjacency is not D^-1/2 (A+I) D^-1/2".into(),
            ));
        }
        Ok(Self::from_dense(joints, dense))
    }

    fn from_dense(joints: usize, dense: Vec<f64>) -> Self {
        let rows = (0..joints)
            .map(|i| {
                (0..joints)
                    .filter_map(|k| {
                        let v = dense[i * joints + k];
                        (v != 0.0).then_some((k, v))
                    })
                    .collect()
            })
            .collect();
        Self { joints, dense, rows }
    }

    pub fn joints(&self) -> usize {
        self.joints
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.dense[i * self.joints + k]
    }
}

fn normalize_pattern(joints: usize, a: &[f64]) -> Vec<f64> {
    let deg: Vec<f64> = (0..joints)
        .map(|i| a[i * joints..(i + 1) * joints].iter().sum::<f64>())
        .collect();
    let mut out = vec![0.0; joints * joints];
    for i in 0..joints {
        for k in 0..joints {
            if a[i * joints + k] != 0.0 {
                out[i * joints + k] = a[i * joints + k] / (deg[i] * deg[k]).sqrt();
            }
        }
    }
    out
}

/// Graph convolution `relu(Â H W + b)` followed by a fixed temporal moving
/// average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphConvLayer {
    pub in_channels: usize,
    pub out_channels: usize,
    /// Row-major `in_channels x out_channels`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl GraphConvLayer {
    pub fn zeros(in_channels: usize, out_channels: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            weights: vec![0.0; in_channels * out_channels],
            bias: vec![0.0; out_channels],
        }
    }

    pub fn random(in_channels: usize, out_channels: usize, rng: &mut impl Rng) -> Self {
        let std = (2.0 / in_channels as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("finite std");
        Self {
            in_channels,
            out_channels,
            weights: (0..in_channels * out_channels).map(|_| normal.sample(rng)).collect(),
            bias: vec![0.0; out_channels],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Architecture {
    pub hidden: Vec<usize>,
    pub temporal_kernel: usize,
    pub classes: usize,
    /// Multipliers applied to the position, velocity and bone branches.
    pub branch_scale: [f64; 3],
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            hidden: vec![8, 8],
            temporal_kernel: 9,
            classes: 2,
            branch_scale: [1.0, 10.0, 1.0],
        }
    }
}

/// Small GCN classifier with a global-average-pooling + affine head.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    pub(crate) adjacency: Adjacency,
    pub(crate) layers: Vec<GraphConvLayer>,
    pub(crate) temporal_kernel: usize,
    pub(crate) branch_scale: [f64; 3],
    /// Row-major `channels x classes`; column `c` holds the class weights.
    pub(crate) classifier: Vec<f64>,
    pub(crate) classifier_bias: Vec<f64>,
    pub(crate) classes: usize,
}

/// Final conv activations, `channels x frames x joints`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMapStack {
    pub channels: usize,
    pub frames: usize,
    pub joints: usize,
    pub maps: Vec<f64>,
}

impl FeatureMapStack {
    pub fn zeros(channels: usize, frames: usize, joints: usize) -> Self {
        Self {
            channels,
            frames,
            joints,
            maps: vec![0.0; channels * frames * joints],
        }
    }

    #[inline]
    pub fn at(&self, channel: usize, frame: usize, joint: usize) -> f64 {
        self.maps[(channel * self.frames + frame) * self.joints + joint]
    }

    #[inline]
    pub fn at_mut(&mut self, channel: usize, frame: usize, joint: usize) -> &mut f64 {
        &mut self.maps[(channel * self.frames + frame) * self.joints + joint]
    }

    pub fn channel(&self, channel: usize) -> &[f64] {
        let n = self.frames * self.joints;
        &self.maps[channel * n..(channel + 1) * n]
    }

    /// Global average per channel.
    pub fn pooled(&self) -> Vec<f64> {
        let n = (self.frames * self.joints) as f64;
        (0..self.channels)
            .map(|c| self.channel(c).iter().sum::<f64>() / n)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Forward {
    pub probabilities: Vec<f64>,
    pub logits: Vec<f64>,
    pub features: FeatureMapStack,
}

/// Everything the backward pass needs, in `frames x joints x channels` layout.
pub(crate) struct Trace {
    frames: usize,
    inputs: Vec<Vec<f64>>,
    preacts: Vec<Vec<f64>>,
    output: Vec<f64>,
    pooled: Vec<f64>,
    pub(crate) logits: Vec<f64>,
    pub(crate) probabilities: Vec<f64>,
}

/// Parameter gradients, mirroring the model layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<GraphConvLayer>,
    pub classifier: Vec<f64>,
    pub classifier_bias: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &GcnModel) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| GraphConvLayer::zeros(l.in_channels, l.out_channels))
                .collect(),
            classifier: vec![0.0; model.classifier.len()],
            classifier_bias: vec![0.0; model.classes],
        }
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in &self.layers {
            out.push(&l.weights);
            out.push(&l.bias);
        }
        out.push(&self.classifier);
        out.push(&self.classifier_bias);
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.layers {
            out.push(&mut l.weights);
            out.push(&mut l.bias);
        }
        out.push(&mut self.classifier);
        out.push(&mut self.classifier_bias);
        out
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Centered moving average over frames, truncated at the edges, applied to
/// a `frames x rows` buffer where `rows = joints * channels`.
fn temporal_average(data: &[f64], frames: usize, rows: usize, kernel: usize) -> Vec<f64> {
    let half = kernel / 2;
    if half == 0 {
        return data.to_vec();
    }
    let mut out = vec![0.0; data.len()];
    let mut prefix = vec![0.0; (frames + 1) * rows];
    for t in 0..frames {
        for r in 0..rows {
            prefix[(t + 1) * rows + r] = prefix[t * rows + r] + data[t * rows + r];
        }
    }
    for t in 0..frames {
        let lo = t.saturating_sub(half);
        let hi = (t + half).min(frames - 1);
        let count = (hi - lo + 1) as f64;
        for r in 0..rows {
            out[t * rows + r] = (prefix[(hi + 1) * rows + r] - prefix[lo * rows + r]) / count;
        }
    }
    out
}

/// Adjoint of [`temporal_average`].
fn temporal_average_adjoint(grad: &[f64], frames: usize, rows: usize, kernel: usize) -> Vec<f64> {
    let half = kernel / 2;
    if half == 0 {
        return grad.to_vec();
    }
    let mut out = vec![0.0; grad.len()];
    for t in 0..frames {
        let lo = t.saturating_sub(half);
        let hi = (t + half).min(frames - 1);
        let count = (hi - lo + 1) as f64;
        for s in lo..=hi {
            for r in 0..rows {
                out[s * rows + r] += grad[t * rows + r] / count;
            }
        }
    }
    out
}

impl GcnModel {
    pub fn new(topo: &SkeletonTopology, arch: &Architecture, rng: &mut impl Rng) -> Result<Self> {
        if arch.hidden.is_empty() || arch.hidden.contains(&0) {
            return Err(Error::InvalidArgument("need at least one non-empty conv layer".into()));
        }
        if arch.classes < 2 {
            return Err(Error::InvalidArgument("need at least two classes".into()));
        }
        let mut layers = Vec::with_capacity(arch.hidden.len());
        let mut width = INPUT_CHANNELS;
        for &h in &arch.hidden {
            layers.push(GraphConvLayer::random(width, h, rng));
            width = h;
        }
        let normal = Normal::new(0.0, (1.0 / width as f64).sqrt()).expect("finite std");
        Ok(Self {
            adjacency: Adjacency::from_topology(topo),
            layers,
            temporal_kernel: arch.temporal_kernel,
            branch_scale: arch.branch_scale,
            classifier: (0..width * arch.classes).map(|_| normal.sample(rng)).collect(),
            classifier_bias: vec![0.0; arch.classes],
            classes: arch.classes,
        })
    }

    /// Assembles a model from explicit parts, checking every shape.
    pub fn from_parts(
        adjacency: Adjacency,
        layers: Vec<GraphConvLayer>,
        temporal_kernel: usize,
        branch_scale: [f64; 3],
        classifier: Vec<f64>,
        classifier_bias: Vec<f64>,
    ) -> Result<Self> {
        let classes = classifier_bias.len();
        if layers.is_empty() {
            return Err(Error::Shape("no conv layers".into()));
        }
        if layers[0].in_channels != INPUT_CHANNELS {
            return Err(Error::Shape(format!(
                "first layer takes {} channels, input has {INPUT_CHANNELS}",
                layers[0].in_channels
            )));
        }
        for pair in layers.windows(2) {
            if pair[0].out_channels != pair[1].in_channels {
                return Err(Error::Shape("conv layer widths do not chain".into()));
            }
        }
        for l in &layers {
            if l.weights.len() != l.in_channels * l.out_channels || l.bias.len() != l.out_channels {
                return Err(Error::Shape("conv layer parameter sizes".into()));
            }
        }
        let width = layers.last().map(|l| l.out_channels).unwrap_or(0);
        if classes < 1 || classifier.len() != width * classes {
            return Err(Error::Shape("classifier must be channels x classes".into()));
        }
        Ok(Self {
            adjacency,
            layers,
            temporal_kernel,
            branch_scale,
            classifier,
            classifier_bias,
            classes,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn channels(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_channels)
    }

    pub fn joints(&self) -> usize {
        self.adjacency.joints
    }

    pub fn layers(&self) -> &[GraphConvLayer] {
        &self.layers
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }

    pub fn temporal_kernel(&self) -> usize {
        self.temporal_kernel
    }

    pub fn branch_scale(&self) -> [f64; 3] {
        self.branch_scale
    }

    /// Weight of channel `n` for class `class`.
    pub fn class_weight(&self, channel: usize, class: usize) -> f64 {
        self.classifier[channel * self.classes + class]
    }

    pub fn class_weights(&self, class: usize) -> Vec<f64> {
        (0..self.channels()).map(|n| self.class_weight(n, class)).collect()
    }

    pub fn classifier_bias(&self) -> &[f64] {
        &self.classifier_bias
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.layers {
            out.push(&mut l.weights);
            out.push(&mut l.bias);
        }
        out.push(&mut self.classifier);
        out.push(&mut self.classifier_bias);
        out
    }

    pub(crate) fn params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in &self.layers {
            out.push(&l.weights);
            out.push(&l.bias);
        }
        out.push(&self.classifier);
        out.push(&self.classifier_bias);
        out
    }

    fn check_input(&self, features: &FeatureTensor) -> Result<()> {
        if features.joints() != self.joints() {
            return Err(Error::Shape(format!(
                "features have {} joints, model expects {}",
                features.joints(),
                self.joints()
            )));
        }
        if features.frames() == 0 {
            return Err(Error::Shape("features have no frames".into()));
        }
        Ok(())
    }

    fn check_class(&self, class: usize) -> Result<()> {
        if class >= self.classes {
            return Err(Error::ClassIndex {
                index: class,
                classes: self.classes,
            });
        }
        Ok(())
    }

    pub(crate) fn trace(&self, features: &FeatureTensor) -> Result<Trace> {
        self.check_input(features)?;
        let frames = features.frames();
        let joints = self.joints();
        let mut h = features.concat_channels(self.branch_scale);
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (cin, cout) = (layer.in_channels, layer.out_channels);
            // U = H W
            let mut u = vec![0.0; frames * joints * cout];
            for (node, row) in h.chunks_exact(cin).enumerate() {
                let dst = &mut u[node * cout..(node + 1) * cout];
                for (c, &x) in row.iter().enumerate() {
                    if x == 0.0 {
                        continue;
                    }
                    let w = &layer.weights[c * cout..(c + 1) * cout];
                    for (d, wv) in dst.iter_mut().zip(w) {
                        *d += x * wv;
                    }
                }
            }
            // Z = Â U + b
            let mut z = vec![0.0; frames * joints * cout];
            for t in 0..frames {
                for i in 0..joints {
                    let dst = &mut z[(t * joints + i) * cout..(t * joints + i + 1) * cout];
                    dst.copy_from_slice(&layer.bias);
                    for &(k, a) in &self.adjacency.rows[i] {
                        let src = &u[(t * joints + k) * cout..(t * joints + k + 1) * cout];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += a * s;
                        }
                    }
                }
            }
            let act: Vec<f64> = z.iter().map(|&v| v.max(0.0)).collect();
            let next = temporal_average(&act, frames, joints * cout, self.temporal_kernel);
            inputs.push(std::mem::replace(&mut h, next));
            preacts.push(z);
        }
        let channels = self.channels();
        let mut pooled = vec![0.0; channels];
        for row in h.chunks_exact(channels) {
            for (p, v) in pooled.iter_mut().zip(row) {
                *p += v;
            }
        }
        let n = (frames * joints) as f64;
        pooled.iter_mut().for_each(|p| *p /= n);
        let logits = self.head(&pooled);
        let probabilities = softmax(&logits);
        Ok(Trace {
            frames,
            inputs,
            preacts,
            output: h,
            pooled,
            logits,
            probabilities,
        })
    }

    /// Affine classifier on pooled channels.
    pub fn head(&self, pooled: &[f64]) -> Vec<f64> {
        (0..self.classes)
            .map(|c| {
                self.classifier_bias[c]
                    + pooled
                        .iter()
                        .enumerate()
                        .map(|(n, g)| g * self.class_weight(n, c))
                        .sum::<f64>()
            })
            .collect()
    }

    fn stack(&self, trace: &Trace) -> FeatureMapStack {
        let (frames, joints, channels) = (trace.frames, self.joints(), self.channels());
        let mut s = FeatureMapStack::zeros(channels, frames, joints);
        for t in 0..frames {
            for j in 0..joints {
                for c in 0..channels {
                    *s.at_mut(c, t, j) = trace.output[(t * joints + j) * channels + c];
                }
            }
        }
        s
    }

    pub fn forward(&self, features: &FeatureTensor) -> Result<Forward> {
        let trace = self.trace(features)?;
        Ok(Forward {
            features: self.stack(&trace),
            probabilities: trace.probabilities,
            logits: trace.logits,
        })
    }

    /// Probabilities only.
    pub fn predict(&self, features: &FeatureTensor) -> Result<Vec<f64>> {
        Ok(self.trace(features)?.probabilities)
    }

    /// Gradient of the final feature maps from a gradient on the logits.
    fn head_backward(&self, dlogits: &[f64], frames: usize) -> Vec<f64> {
        let channels = self.channels();
        let n = (frames * self.joints()) as f64;
        (0..channels)
            .map(|ch| {
                dlogits
                    .iter()
                    .enumerate()
                    .map(|(c, d)| d * self.class_weight(ch, c))
                    .sum::<f64>()
                    / n
            })
            .collect()
    }

    /// d(target logit)/dF for every channel, frame and joint of the final
    /// conv activations.
    pub fn grad_wrt_feature_maps(&self, features: &FeatureTensor, target: usize) -> Result<FeatureMapStack> {
        self.check_class(target)?;
        self.check_input(features)?;
        let frames = features.frames();
        let mut dlogits = vec![0.0; self.classes];
        dlogits[target] = 1.0;
        let per_channel = self.head_backward(&dlogits, frames);
        let mut s = FeatureMapStack::zeros(self.channels(), frames, self.joints());
        let plane = frames * self.joints();
        for (c, g) in per_channel.iter().enumerate() {
            s.maps[c * plane..(c + 1) * plane].fill(*g);
        }
        Ok(s)
    }

    /// Full reverse pass for `dloss/dlogits`, returning parameter gradients.
    pub(crate) fn backward(&self, trace: &Trace, dlogits: &[f64]) -> Gradients {
        let mut grads = Gradients::zeros_like(self);
        let (frames, joints, channels) = (trace.frames, self.joints(), self.channels());
        for (n, g) in trace.pooled.iter().enumerate() {
            for (c, d) in dlogits.iter().enumerate() {
                grads.classifier[n * self.classes + c] = g * d;
            }
        }
        grads.classifier_bias.copy_from_slice(dlogits);

        let per_channel = self.head_backward(dlogits, frames);
        let mut dh: Vec<f64> = (0..frames * joints)
            .flat_map(|_| per_channel.iter().copied())
            .collect();
        debug_assert_eq!(dh.len(), frames * joints * channels);

        for (l, layer) in self.layers.iter().enumerate().rev() {
            let (cin, cout) = (layer.in_channels, layer.out_channels);
            let mut dz = temporal_average_adjoint(&dh, frames, joints * cout, self.temporal_kernel);
            for (d, &z) in dz.iter_mut().zip(&trace.preacts[l]) {
                if z <= 0.0 {
                    *d = 0.0;
                }
            }
            let g = &mut grads.layers[l];
            for row in dz.chunks_exact(cout) {
                for (b, d) in g.bias.iter_mut().zip(row) {
                    *b += d;
                }
            }
            // dU[t,k] = Σ_i Â[i,k] dZ[t,i]
            let mut du = vec![0.0; frames * joints * cout];
            for t in 0..frames {
                for i in 0..joints {
                    let src = &dz[(t * joints + i) * cout..(t * joints + i + 1) * cout];
                    for &(k, a) in &self.adjacency.rows[i] {
                        let dst = &mut du[(t * joints + k) * cout..(t * joints + k + 1) * cout];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += a * s;
                        }
                    }
                }
            }
            let input = &trace.inputs[l];
            for (hrow, urow) in input.chunks_exact(cin).zip(du.chunks_exact(cout)) {
                for (c, &x) in hrow.iter().enumerate() {
                    if x == 0.0 {
                        continue;
                    }
                    let gw = &mut g.weights[c * cout..(c + 1) * cout];
                    for (w, u) in gw.iter_mut().zip(urow) {
                        *w += x * u;
                    }
                }
            }
            if l > 0 {
                dh = du
                    .chunks_exact(cout)
                    .flat_map(|urow| {
                        (0..cin).map(move |c| {
                            let w = &layer.weights[c * cout..(c + 1) * cout];
                            w.iter().zip(urow).map(|(a, b)| a * b).sum::<f64>()
                        })
                    })
                    .collect();
            }
        }
        grads
    }

    /// Cross-entropy loss and its parameter gradients for one example.
    pub fn loss_and_gradients(&self, features: &FeatureTensor, label: usize) -> Result<(f64, Gradients)> {
        self.check_class(label)?;
        let trace = self.trace(features)?;
        let p = trace.probabilities[label].max(1e-300);
        let mut dlogits = trace.probabilities.clone();
        dlogits[label] -= 1.0;
        Ok((-p.ln(), self.backward(&trace, &dlogits)))
    }

    pub fn loss(&self, features: &FeatureTensor, label: usize) -> Result<f64> {
        self.check_class(label)?;
        let probs = self.predict(features)?;
        Ok(-probs[label].max(1e-300).ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::MotionWindow;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_features(rng: &mut ChaCha8Rng, frames: usize, topo: &SkeletonTopology) -> FeatureTensor {
        let pts = (0..frames * topo.joint_count())
            .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let w = MotionWindow::new(30.0, topo.joint_count(), pts).unwrap();
        crate::preprocess::extract_features(&w, topo).unwrap()
    }

    #[test]
    fn adjacency_is_normalized_and_verifiable() {
        let topo = SkeletonTopology::default();
        let a = Adjacency::from_topology(&topo);
        // pelvis: self + thorax + two hips
        assert!((a.get(12, 12) - 0.25).abs() < 1e-15);
        assert!(Adjacency::verified(19, a.dense.clone()).is_ok());
        let mut bad = a.dense.clone();
        bad[0] *= 1.01;
        assert!(Adjacency::verified(19, bad).is_err());
        let ident = vec![1.0, 0.0, 0.0, 1.0];
        assert!(Adjacency::verified(2, ident).is_ok());
    }

    #[test]
    fn zero_weights_give_uniform_probabilities() {
        let topo = SkeletonTopology::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = GcnModel::new(&topo, &Architecture::default(), &mut rng).unwrap();
        for p in m.params_mut() {
            p.fill(0.0);
        }
        let f = random_features(&mut rng, 12, &topo);
        assert_eq!(m.predict(&f).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let topo = SkeletonTopology::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let m = GcnModel::new(&topo, &Architecture::default(), &mut rng).unwrap();
            let f = random_features(&mut rng, 20, &topo);
            let p = m.predict(&f).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn hand_computed_two_joint_fixture() {
        // Two unconnected joints, one frame, one 6->1 conv, kernel 1.
        let adjacency = Adjacency::verified(2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let mut layer = GraphConvLayer::zeros(INPUT_CHANNELS, 1);
        layer.weights[0] = 1.0; // pos.x
        layer.weights[1] = -1.0; // pos.y
        layer.bias[0] = 0.5;
        let m = GcnModel::from_parts(adjacency, vec![layer], 1, [1.0; 3], vec![2.0, -1.0], vec![0.0, 0.1])
            .unwrap();
        let w = MotionWindow::new(30.0, 2, vec![[1.0, 0.25], [0.0, 1.0]]).unwrap();
        let topo = SkeletonTopology::from_file(crate::skeleton::TopologyFile {
            joints: vec!["pelvis".into(), "thorax".into()],
            parent: vec![0, 0],
            segments: Default::default(),
            root: 0,
            trunk_top: None,
            rigid: vec![],
        })
        .unwrap();
        let f = crate::preprocess::extract_features(&w, &topo).unwrap();
        // joint 0: relu(1 - 0.25 + 0.5) = 1.25; joint 1: relu(0 - 1 + 0.5) = 0
        // GAP = 0.625; logits = (1.25, -0.625 + 0.1)
        let out = m.forward(&f).unwrap();
        assert!((out.logits[0] - 1.25).abs() < 1e-15);
        assert!((out.logits[1] + 0.525).abs() < 1e-15);
        let e = (-0.525f64 - 1.25).exp();
        assert!((out.probabilities[1] - e / (1.0 + e)).abs() < 1e-15);
    }

    #[test]
    fn gap_identity_and_feature_gradient() {
        let topo = SkeletonTopology::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = GcnModel::new(&topo, &Architecture::default(), &mut rng).unwrap();
        let f = random_features(&mut rng, 15, &topo);
        let out = m.forward(&f).unwrap();
        let logits = m.head(&out.features.pooled());
        for (a, b) in logits.iter().zip(&out.logits) {
            assert!((a - b).abs() < 1e-9);
        }
        let g = m.grad_wrt_feature_maps(&f, 1).unwrap();
        let denom = (15 * 19) as f64;
        for c in 0..m.channels() {
            for &v in g.channel(c) {
                assert!((v - m.class_weight(c, 1) / denom).abs() < 1e-15);
            }
        }
        assert!(matches!(m.grad_wrt_feature_maps(&f, 2), Err(Error::ClassIndex { .. })));
    }

    #[test]
    fn zero_classifier_gives_zero_gradient() {
        let topo = SkeletonTopology::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut m = GcnModel::new(&topo, &Architecture::default(), &mut rng).unwrap();
        m.classifier.fill(0.0);
        let f = random_features(&mut rng, 8, &topo);
        assert!(m.grad_wrt_feature_maps(&f, 0).unwrap().maps.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        let topo = SkeletonTopology::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let arch = Architecture {
            hidden: vec![5, 4],
            temporal_kernel: 3,
            ..Architecture::default()
        };
        let mut m = GcnModel::new(&topo, &arch, &mut rng).unwrap();
        for layer in &mut m.layers {
            layer.bias.iter_mut().for_each(|b| *b = rng.gen_range(-0.2..0.3));
        }
        let f = random_features(&mut rng, 7, &topo);
        let (_, grads) = m.loss_and_gradients(&f, 1).unwrap();
        let analytic: Vec<f64> = grads.slices().concat();
        let h = 1e-6;
        let mut idx = 0;
        let sizes: Vec<usize> = m.params().iter().map(|p| p.len()).collect();
        for (block, &len) in sizes.iter().enumerate() {
            for i in 0..len {
                let mut plus = m.clone();
                plus.params_mut()[block][i] += h;
                let mut minus = m.clone();
                minus.params_mut()[block][i] -= h;
                let fd = (plus.loss(&f, 1).unwrap() - minus.loss(&f, 1).unwrap()) / (2.0 * h);
                let a = analytic[idx];
                let err = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
                assert!(err < 1e-4, "block {block} entry {i}: {a} vs {fd}");
                idx += 1;
            }
        }
    }
}

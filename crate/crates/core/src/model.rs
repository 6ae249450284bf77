//! Cue Balls, their Recall Net weights, and the cross links between balls.
//!
//! Each cue neuron owns a full copy of the recall-net weights (`w`, one per
//! pixel) and of its input weights from the recall net (`v`). Cue neurons
//! are only connected across adjacent balls, through a [`CrossLink`] per
//! direction. There is no intra-ball or recall-to-recall connectivity.

use thiserror::Error;

use crate::dataset::DEFAULT_ATTRIBUTES;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown cue ball {0:?}")]
    UnknownBall(String),

    #[error("cue ball {ball:?} has no neuron {index} (size {size})")]
    NeuronOutOfRange {
        ball: String,
        index: usize,
        size: usize,
    },

    #[error("input length {got} does not match recall net size {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("no cross link from {from:?} to {to:?}")]
    NoLink { from: String, to: String },

    #[error("activation must be 0.0 or 1.0, got {0}")]
    NotBinary(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub image_width: usize,
    pub image_height: usize,
    pub neurons_per_ball: usize,
    pub eps_w: f64,
    pub eps_v: f64,
    pub lambda_cb: f64,
    /// Learning target per training series, in series order.
    pub theta_series: Vec<f64>,
    pub threshold_d: f64,
    pub chain_order: Vec<String>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            image_width: 116,
            image_height: 116,
            neurons_per_ball: 7,
            eps_w: 1.0,
            eps_v: 1.0,
            lambda_cb: 1.0,
            theta_series: vec![100.0, 110.0],
            threshold_d: 72.0,
            chain_order: DEFAULT_ATTRIBUTES
                .iter()
                .map(|(name, _)| (*name).to_string())
                .collect(),
        }
    }
}

impl SystemConfig {
    pub fn pattern_len(&self) -> usize {
        self.image_width * self.image_height
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::Config(msg));
        if self.image_width == 0 || self.image_height == 0 {
            return bad(format!(
                "image size {}x{} must be positive",
                self.image_width, self.image_height
            ));
        }
        if self.neurons_per_ball == 0 {
            return bad("neurons_per_ball must be positive".into());
        }
        for (name, rate) in [
            ("eps_w", self.eps_w),
            ("eps_v", self.eps_v),
            ("lambda_cb", self.lambda_cb),
        ] {
            if !(rate > 0.0 && rate.is_finite()) {
                return bad(format!("{name} must be positive, got {rate}"));
            }
        }
        if !(self.threshold_d > 0.0 && self.threshold_d.is_finite()) {
            return bad(format!("threshold D must be positive, got {}", self.threshold_d));
        }
        if self.theta_series.is_empty() {
            return bad("theta series is empty".into());
        }
        if let Some(t) = self
            .theta_series
            .iter()
            .find(|&&t| !(t >= self.threshold_d && t.is_finite()))
        {
            return bad(format!("theta {t} is below threshold D = {}", self.threshold_d));
        }
        if self.chain_order.len() < 2 {
            return bad("chain order needs at least two balls".into());
        }
        for (i, name) in self.chain_order.iter().enumerate() {
            if name.is_empty() {
                return bad("empty ball name".into());
            }
            if self.chain_order[..i].contains(name) {
                return bad(format!("ball {name:?} appears twice in the chain order"));
            }
        }
        Ok(())
    }

    pub fn ball_index(&self, name: &str) -> Option<usize> {
        self.chain_order.iter().position(|b| b == name)
    }
}

/// One grandmother-cell neuron and its private weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CueNeuron {
    /// Cue → recall weights (`w_ji` for this neuron `i`).
    pub w: Vec<f64>,
    /// Recall → cue weights (`v_ij`).
    pub v: Vec<f64>,
    pub learned: bool,
    pub label: Option<String>,
}

impl CueNeuron {
    fn blank(len: usize) -> Self {
        Self {
            w: vec![0.0; len],
            v: vec![0.0; len],
            learned: false,
            label: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CueBall {
    pub attribute: String,
    pub neurons: Vec<CueNeuron>,
}

impl CueBall {
    pub fn new(attribute: impl Into<String>, neurons: usize, pattern_len: usize) -> Self {
        Self {
            attribute: attribute.into(),
            neurons: (0..neurons).map(|_| CueNeuron::blank(pattern_len)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.neurons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neurons.is_empty()
    }

    pub fn pattern_len(&self) -> usize {
        self.neurons.first().map_or(0, |n| n.w.len())
    }

    pub fn neuron(&self, index: usize) -> Result<&CueNeuron, ModelError> {
        self.neurons
            .get(index)
            .ok_or_else(|| self.out_of_range(index))
    }

    pub fn neuron_mut(&mut self, index: usize) -> Result<&mut CueNeuron, ModelError> {
        let size = self.neurons.len();
        let ball = self.attribute.clone();
        self.neurons
            .get_mut(index)
            .ok_or(ModelError::NeuronOutOfRange { ball, index, size })
    }

    fn out_of_range(&self, index: usize) -> ModelError {
        ModelError::NeuronOutOfRange {
            ball: self.attribute.clone(),
            index,
            size: self.neurons.len(),
        }
    }

    /// Recall-net output driven by one cue neuron: `y_j = w_ji · x`.
    pub fn recall_output(&self, index: usize, x: f64) -> Result<Vec<f64>, ModelError> {
        check_binary(x)?;
        Ok(self.neuron(index)?.w.iter().map(|w| w * x).collect())
    }

    /// `q_i = Σ_j v_ij y_j`.
    pub fn cue_preactivation(&self, index: usize, y: &[f64]) -> Result<f64, ModelError> {
        let neuron = self.neuron(index)?;
        if y.len() != neuron.v.len() {
            return Err(ModelError::LengthMismatch {
                expected: neuron.v.len(),
                got: y.len(),
            });
        }
        Ok(neuron.v.iter().zip(y).map(|(v, y)| v * y).sum())
    }
}

/// Step activation: 1.0 when `q ≥ d`, else 0.0.
pub fn threshold(q: f64, d: f64) -> f64 {
    if q >= d {
        1.0
    } else {
        0.0
    }
}

pub(crate) fn check_binary(x: f64) -> Result<(), ModelError> {
    if x == 0.0 || x == 1.0 {
        Ok(())
    } else {
        Err(ModelError::NotBinary(x))
    }
}

/// Directed cue-to-cue weights between two adjacent balls.
///
/// `u` is square, indexed `[to][from]` and stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossLink {
    pub from_ball: String,
    pub to_ball: String,
    size: usize,
    u: Vec<f64>,
}

impl CrossLink {
    pub fn new(from_ball: impl Into<String>, to_ball: impl Into<String>, size: usize) -> Self {
        Self {
            from_ball: from_ball.into(),
            to_ball: to_ball.into(),
            size,
            u: vec![0.0; size * size],
        }
    }

    pub(crate) fn from_parts(from_ball: String, to_ball: String, size: usize, u: Vec<f64>) -> Self {
        debug_assert_eq!(u.len(), size * size);
        Self {
            from_ball,
            to_ball,
            size,
            u,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Row-major `[to][from]` weights.
    pub fn weights(&self) -> &[f64] {
        &self.u
    }

    fn slot(&self, from: usize, to: usize) -> Result<usize, ModelError> {
        for (index, ball) in [(from, &self.from_ball), (to, &self.to_ball)] {
            if index >= self.size {
                return Err(ModelError::NeuronOutOfRange {
                    ball: ball.clone(),
                    index,
                    size: self.size,
                });
            }
        }
        Ok(to * self.size + from)
    }

    pub fn weight(&self, from: usize, to: usize) -> Result<f64, ModelError> {
        Ok(self.u[self.slot(from, to)?])
    }

    pub fn weight_mut(&mut self, from: usize, to: usize) -> Result<&mut f64, ModelError> {
        let slot = self.slot(from, to)?;
        Ok(&mut self.u[slot])
    }

    /// `q_l = u_lk · x_k`, a single term: one source neuron fires at a time.
    pub fn cross_preactivation(&self, from: usize, to: usize, x: f64) -> Result<f64, ModelError> {
        check_binary(x)?;
        Ok(self.weight(from, to)? * x)
    }
}

/// The full network: one ball per chain entry and a link per adjacent
/// ordered pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CbrnSystem {
    config: SystemConfig,
    balls: Vec<CueBall>,
    links: Vec<CrossLink>,
}

impl CbrnSystem {
    pub fn new(config: SystemConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let n = config.neurons_per_ball;
        let len = config.pattern_len();
        let balls = config
            .chain_order
            .iter()
            .map(|name| CueBall::new(name.clone(), n, len))
            .collect();
        let links = link_pairs(&config.chain_order)
            .map(|(a, b)| CrossLink::new(a, b, n))
            .collect();
        Ok(Self {
            config,
            balls,
            links,
        })
    }

    /// Reassembles a system from decoded parts, checking every structural
    /// invariant.
    pub(crate) fn from_parts(
        config: SystemConfig,
        balls: Vec<CueBall>,
        links: Vec<CrossLink>,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let n = config.neurons_per_ball;
        let len = config.pattern_len();
        if balls.len() != config.chain_order.len() {
            return Err(ModelError::Config(format!(
                "{} balls for a chain of {}",
                balls.len(),
                config.chain_order.len()
            )));
        }
        for (ball, name) in balls.iter().zip(&config.chain_order) {
            if &ball.attribute != name || ball.len() != n {
                return Err(ModelError::Config(format!(
                    "ball {:?} does not match chain entry {name:?} with {n} neurons",
                    ball.attribute
                )));
            }
            for neuron in &ball.neurons {
                if neuron.w.len() != len || neuron.v.len() != len {
                    return Err(ModelError::LengthMismatch {
                        expected: len,
                        got: neuron.w.len().min(neuron.v.len()),
                    });
                }
                if !neuron.learned
                    && (neuron.w.iter().chain(&neuron.v).any(|&x| x != 0.0)
                        || neuron.label.is_some())
                {
                    return Err(ModelError::Config(format!(
                        "unlearned neuron in {name:?} carries weights or a label"
                    )));
                }
            }
        }
        let expected: Vec<_> = link_pairs(&config.chain_order).collect();
        if links.len() != expected.len()
            || links
                .iter()
                .zip(&expected)
                .any(|(l, (a, b))| &l.from_ball != a || &l.to_ball != b || l.size != n)
        {
            return Err(ModelError::Config(
                "cross links do not match the chain order".into(),
            ));
        }
        Ok(Self {
            config,
            balls,
            links,
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn balls(&self) -> &[CueBall] {
        &self.balls
    }

    pub fn links(&self) -> &[CrossLink] {
        &self.links
    }

    pub fn ball(&self, name: &str) -> Result<&CueBall, ModelError> {
        self.balls
            .iter()
            .find(|b| b.attribute == name)
            .ok_or_else(|| ModelError::UnknownBall(name.to_string()))
    }

    pub fn ball_mut(&mut self, name: &str) -> Result<&mut CueBall, ModelError> {
        self.balls
            .iter_mut()
            .find(|b| b.attribute == name)
            .ok_or_else(|| ModelError::UnknownBall(name.to_string()))
    }

    pub fn link(&self, from: &str, to: &str) -> Result<&CrossLink, ModelError> {
        self.links
            .iter()
            .find(|l| l.from_ball == from && l.to_ball == to)
            .ok_or_else(|| self.no_link(from, to))
    }

    pub fn link_mut(&mut self, from: &str, to: &str) -> Result<&mut CrossLink, ModelError> {
        let err = self.no_link(from, to);
        self.links
            .iter_mut()
            .find(|l| l.from_ball == from && l.to_ball == to)
            .ok_or(err)
    }

    fn no_link(&self, from: &str, to: &str) -> ModelError {
        for name in [from, to] {
            if self.config.ball_index(name).is_none() {
                return ModelError::UnknownBall(name.to_string());
            }
        }
        ModelError::NoLink {
            from: from.to_string(),
            to: to.to_string(),
        }
    }
}

/// Adjacent ordered pairs: for each neighbor pair, forward then backward.
pub(crate) fn link_pairs(order: &[String]) -> impl Iterator<Item = (String, String)> + '_ {
    order.windows(2).flat_map(|w| {
        [
            (w[0].clone(), w[1].clone()),
            (w[1].clone(), w[0].clone()),
        ]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SystemConfig {
        SystemConfig {
            image_width: 2,
            image_height: 2,
            neurons_per_ball: 3,
            chain_order: vec!["A".into(), "B".into(), "C".into()],
            ..SystemConfig::default()
        }
    }

    #[test]
    fn default_config_is_valid() {
        let c = SystemConfig::default();
        c.validate().unwrap();
        assert_eq!(c.pattern_len(), 13_456);
        assert_eq!(c.chain_order.len(), 5);
    }

    #[test]
    fn config_validation() {
        let mut c = small_config();
        c.theta_series = vec![50.0];
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.chain_order = vec!["A".into()];
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.chain_order = vec!["A".into(), "A".into()];
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.eps_v = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn system_shape() {
        let s = CbrnSystem::new(SystemConfig::default()).unwrap();
        assert_eq!(s.balls().len(), 5);
        assert_eq!(s.links().len(), 8);
        assert!(s.balls().iter().all(|b| b.len() == 7));
        assert!(s.link("Color", "Shape").is_ok());
        assert!(s.link("Shape", "Color").is_ok());
        assert!(matches!(
            s.link("Color", "Volume"),
            Err(ModelError::NoLink { .. })
        ));
        assert!(matches!(s.link("Hue", "Shape"), Err(ModelError::UnknownBall(_))));
    }

    #[test]
    fn recall_output_examples() {
        let mut ball = CueBall::new("A", 2, 2);
        ball.neurons[0].w = vec![0.5, 0.5];
        assert_eq!(ball.recall_output(0, 1.0).unwrap(), vec![0.5, 0.5]);
        assert_eq!(ball.recall_output(0, 0.0).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(
            ball.recall_output(2, 1.0),
            Err(ModelError::NeuronOutOfRange { index: 2, .. })
        ));
        assert!(ball.recall_output(0, 0.5).is_err());
    }

    #[test]
    fn cue_preactivation_examples() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut ball = CueBall::new("A", 1, 4);
        assert_eq!(ball.cue_preactivation(0, &[h, 0.0, 0.0, h]).unwrap(), 0.0);
        ball.neurons[0].v = vec![100.0 * h, 0.0, 0.0, 100.0 * h];
        assert!((ball.cue_preactivation(0, &[h, 0.0, 0.0, h]).unwrap() - 100.0).abs() < 1e-6);
        assert!((ball.cue_preactivation(0, &[1.0, 0.0, 0.0, 0.0]).unwrap() - 70.710678).abs() < 1e-6);
        assert!(matches!(
            ball.cue_preactivation(0, &[1.0]),
            Err(ModelError::LengthMismatch { expected: 4, got: 1 })
        ));
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(threshold(71.9, 72.0), 0.0);
        assert_eq!(threshold(72.0, 72.0), 1.0);
        assert_eq!(threshold(100.0, 72.0), 1.0);
    }

    #[test]
    fn cross_preactivation_examples() {
        let mut link = CrossLink::new("A", "B", 3);
        assert_eq!(link.cross_preactivation(0, 1, 1.0).unwrap(), 0.0);
        *link.weight_mut(0, 1).unwrap() = 100.0;
        assert_eq!(link.cross_preactivation(0, 1, 1.0).unwrap(), 100.0);
        *link.weight_mut(0, 2).unwrap() = 110.0;
        assert_eq!(link.cross_preactivation(0, 2, 0.0).unwrap(), 0.0);
        assert!(link.cross_preactivation(3, 0, 1.0).is_err());
        // [to][from] layout
        assert_eq!(link.weights()[3], 100.0);
    }

    #[test]
    fn fresh_system_reads_zero() {
        let s = CbrnSystem::new(small_config()).unwrap();
        for ball in s.balls() {
            for i in 0..ball.len() {
                assert_eq!(ball.cue_preactivation(i, &[0.5; 4]).unwrap(), 0.0);
                assert!(ball.recall_output(i, 1.0).unwrap().iter().all(|&y| y == 0.0));
            }
        }
        for link in s.links() {
            for k in 0..3 {
                for l in 0..3 {
                    assert_eq!(link.cross_preactivation(k, l, 1.0).unwrap(), 0.0);
                }
            }
        }
    }

    #[test]
    fn system_is_send_and_sync() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<CbrnSystem>();
    }

    proptest::proptest! {
        #[test]
        fn threshold_is_monotone(a in -200.0f64..200.0, b in -200.0f64..200.0, d in 0.1f64..150.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (tl, th) = (threshold(lo, d), threshold(hi, d));
            proptest::prop_assert!(tl == 0.0 || tl == 1.0);
            proptest::prop_assert!(tl <= th);
        }
    }
}

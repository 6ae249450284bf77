//! Delta-rule learning of the three weight families.
//!
//! * `w`: cue → recall weights, trained so the recall net reproduces the
//!   presented pattern.
//! * `v`: recall → cue weights, trained so the cue pre-activation on the
//!   stored pattern reaches the target θ.
//! * `u`: cue → cue weights across adjacent balls, trained so the target
//!   neuron's pre-activation reaches θ when the source fires.
//!
//! Each learner iterates its update until the residual drops below
//! [`TOLERANCE`]. With unit rates, zero initialization and unit-norm
//! patterns a single update is exact.

use std::fmt;

use thiserror::Error;

use crate::dataset::Dataset;
use crate::model::{self, CbrnSystem, CrossLink, CueBall, ModelError, SystemConfig};
use crate::pattern::{self, CodecError, PatternVector};

/// Convergence bound on `|target − current|`.
pub const TOLERANCE: f64 = 1e-9;
pub const MAX_ITERATIONS: usize = 1000;
/// Allowed deviation of `Σ y²` from 1 before v-learning refuses to run.
pub const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum LearnError {
    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Codec(#[from] CodecError),

    #[error("{ball}[{index}] already stores {stored:?}, cannot store {offered:?}")]
    AlreadyLearned {
        ball: String,
        index: usize,
        stored: String,
        offered: String,
    },

    #[error("{ball}[{index}] has no stored pattern")]
    NotLearned { ball: String, index: usize },

    #[error("recall output of {ball}[{index}] has squared norm {norm_sq}, expected 1")]
    NotUnitNorm {
        ball: String,
        index: usize,
        norm_sq: f64,
    },

    #[error("{ball}[{index}] is silent; cross-link learning needs the source to fire")]
    SourceSilent { ball: String, index: usize },

    #[error("{what} did not converge in {MAX_ITERATIONS} iterations (residual {residual})")]
    NoConvergence { what: String, residual: f64 },

    #[error("invalid chain: {0}")]
    Chain(String),

    #[error("dataset does not fit the system: {0}")]
    Dataset(String),
}

// ---------------------------------------------------------------------------
// Error functions and their analytic updates

/// `½ Σ_j (d_j − w_j x)²`.
pub fn w_error(w: &[f64], d: &[f64], x: f64) -> f64 {
    0.5 * w.iter().zip(d).map(|(w, d)| (d - w * x).powi(2)).sum::<f64>()
}

/// `Δw_j = ε (d_j − w_j x) x`.
pub fn w_delta(w: &[f64], d: &[f64], x: f64, rate: f64) -> Vec<f64> {
    w.iter().zip(d).map(|(w, d)| rate * (d - w * x) * x).collect()
}

/// `½ (θ − Σ_j v_j y_j)²` for one cue neuron.
pub fn v_error(v: &[f64], y: &[f64], theta: f64) -> f64 {
    0.5 * (theta - pattern::dot(v, y).unwrap_or(f64::NAN)).powi(2)
}

/// `Δv_j = ε (θ − q) y_j`.
pub fn v_delta(v: &[f64], y: &[f64], theta: f64, rate: f64) -> Vec<f64> {
    let q: f64 = v.iter().zip(y).map(|(v, y)| v * y).sum();
    y.iter().map(|y| rate * (theta - q) * y).collect()
}

/// `½ (θ − u x)²` for one cross-link edge.
pub fn u_error(u: f64, x: f64, theta: f64) -> f64 {
    0.5 * (theta - u * x).powi(2)
}

/// `Δu = λ (θ − u x) x`.
pub fn u_delta(u: f64, x: f64, theta: f64, rate: f64) -> f64 {
    rate * (theta - u * x) * x
}

/// Applies one v update in place and returns the new pre-activation.
pub fn step_v(v: &mut [f64], y: &[f64], theta: f64, rate: f64) -> f64 {
    let delta = v_delta(v, y, theta, rate);
    for (v, dv) in v.iter_mut().zip(delta) {
        *v += dv;
    }
    v.iter().zip(y).map(|(v, y)| v * y).sum()
}

// ---------------------------------------------------------------------------
// Report

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    W,
    V,
    U,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::W => "w",
            Phase::V => "v",
            Phase::U => "u",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Neuron(usize),
    Edge { from: usize, to: usize },
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Neuron(i) => write!(f, "{i}"),
            Target::Edge { from, to } => write!(f, "{from}->{to}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRecord {
    pub phase: Phase,
    /// Ball name, or `from->to` for cross links.
    pub ball: String,
    pub target: Target,
    pub iterations: usize,
    pub final_error: f64,
    /// Learning target, for `v` and `u`.
    pub theta: Option<f64>,
    pub final_q: Option<f64>,
    /// Chain group for `u` records.
    pub group: Option<Group>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingReport {
    pub records: Vec<TrainingRecord>,
}

impl TrainingReport {
    pub fn count(&self, phase: Phase) -> usize {
        self.records.iter().filter(|r| r.phase == phase).count()
    }

    pub fn max_q_error(&self) -> f64 {
        self.records
            .iter()
            .filter_map(|r| Some((r.final_q? - r.theta?).abs()))
            .fold(0.0, f64::max)
    }

    /// `phase,ball,neuron_or_edge,iterations,final_error,final_q`
    pub fn to_csv(&self) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record([
            "phase",
            "ball",
            "neuron_or_edge",
            "iterations",
            "final_error",
            "final_q",
        ])
        .expect("in-memory write");
        for r in &self.records {
            wtr.write_record([
                r.phase.to_string(),
                r.ball.clone(),
                r.target.to_string(),
                r.iterations.to_string(),
                r.final_error.to_string(),
                r.final_q.map(|q| q.to_string()).unwrap_or_default(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }
}

// ---------------------------------------------------------------------------
// Learners

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Stores `d` in neuron `index` with the source neuron clamped to fire.
pub fn learn_w(
    ball: &mut CueBall,
    index: usize,
    d: &PatternVector,
    rate: f64,
) -> Result<TrainingRecord, LearnError> {
    const X: f64 = 1.0;
    let name = ball.attribute.clone();
    let neuron = ball.neuron_mut(index)?;
    if d.len() != neuron.w.len() {
        return Err(ModelError::LengthMismatch {
            expected: neuron.w.len(),
            got: d.len(),
        }
        .into());
    }
    if let Some(stored) = neuron.label.as_deref().filter(|s| *s != d.source_label()) {
        return Err(LearnError::AlreadyLearned {
            ball: name,
            index,
            stored: stored.to_string(),
            offered: d.source_label().to_string(),
        });
    }

    let label = d.source_label().to_string();
    let d = d.values();
    let mut iterations = 0;
    loop {
        let y: Vec<f64> = neuron.w.iter().map(|w| w * X).collect();
        let residual = max_abs_diff(d, &y);
        if residual < TOLERANCE {
            break;
        }
        if iterations == MAX_ITERATIONS {
            return Err(LearnError::NoConvergence {
                what: format!("w of {name}[{index}]"),
                residual,
            });
        }
        let delta = w_delta(&neuron.w, d, X, rate);
        for (w, dw) in neuron.w.iter_mut().zip(delta) {
            *w += dw;
        }
        iterations += 1;
    }
    neuron.learned = true;
    neuron.label = Some(label);
    let final_error = w_error(&neuron.w, d, X);
    Ok(TrainingRecord {
        phase: Phase::W,
        ball: name,
        target: Target::Neuron(index),
        iterations,
        final_error,
        theta: None,
        final_q: None,
        group: None,
    })
}

/// Trains the cue weights of a neuron whose pattern is already stored.
///
/// The input is the recall-net output of the neuron itself (`y = w · 1`).
pub fn learn_v(
    ball: &mut CueBall,
    index: usize,
    theta: f64,
    rate: f64,
) -> Result<TrainingRecord, LearnError> {
    let name = ball.attribute.clone();
    if !ball.neuron(index)?.learned {
        return Err(LearnError::NotLearned { ball: name, index });
    }
    let y = ball.recall_output(index, 1.0)?;
    let norm_sq: f64 = y.iter().map(|y| y * y).sum();
    if (norm_sq - 1.0).abs() > NORM_TOLERANCE {
        return Err(LearnError::NotUnitNorm {
            ball: name,
            index,
            norm_sq,
        });
    }

    let neuron = ball.neuron_mut(index)?;
    let mut q = pattern::dot(&neuron.v, &y)?;
    let mut iterations = 0;
    while (theta - q).abs() >= TOLERANCE {
        if iterations == MAX_ITERATIONS {
            return Err(LearnError::NoConvergence {
                what: format!("v of {name}[{index}]"),
                residual: (theta - q).abs(),
            });
        }
        q = step_v(&mut neuron.v, &y, theta, rate);
        iterations += 1;
    }
    Ok(TrainingRecord {
        phase: Phase::V,
        ball: name,
        target: Target::Neuron(index),
        iterations,
        final_error: v_error(&neuron.v, &y, theta),
        theta: Some(theta),
        final_q: Some(q),
        group: None,
    })
}

/// Trains edge `from → to` of a cross link, given the source activation.
pub fn learn_u(
    link: &mut CrossLink,
    from: usize,
    to: usize,
    x: f64,
    theta: f64,
    rate: f64,
) -> Result<TrainingRecord, LearnError> {
    model::check_binary(x)?;
    let ball = format!("{}->{}", link.from_ball, link.to_ball);
    if x == 0.0 {
        return Err(LearnError::SourceSilent {
            ball: link.from_ball.clone(),
            index: from,
        });
    }
    let u = link.weight_mut(from, to)?;
    let mut iterations = 0;
    while (theta - *u * x).abs() >= TOLERANCE {
        if iterations == MAX_ITERATIONS {
            return Err(LearnError::NoConvergence {
                what: format!("u of {ball} edge {from}->{to}"),
                residual: (theta - *u * x).abs(),
            });
        }
        *u += u_delta(*u, x, theta, rate);
        iterations += 1;
    }
    let q = *u * x;
    Ok(TrainingRecord {
        phase: Phase::U,
        ball,
        target: Target::Edge { from, to },
        iterations,
        final_error: u_error(*u, x, theta),
        theta: Some(theta),
        final_q: Some(q),
        group: None,
    })
}

// ---------------------------------------------------------------------------
// Chains

/// Direction of a chain through the balls (`cmb` 0 or 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Group {
    /// `cmb = 0`: chain order as configured.
    Forward,
    /// `cmb = 1`: chain order reversed.
    Reverse,
}

impl Group {
    pub const ALL: [Group; 2] = [Group::Forward, Group::Reverse];

    pub fn id(self) -> u8 {
        match self {
            Group::Forward => 0,
            Group::Reverse => 1,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(Group::Forward),
            1 => Some(Group::Reverse),
            _ => None,
        }
    }

    pub fn ball_order(self, config: &SystemConfig) -> Vec<String> {
        let mut order = config.chain_order.clone();
        if self == Group::Reverse {
            order.reverse();
        }
        order
    }

    pub fn start_ball(self, config: &SystemConfig) -> &str {
        match self {
            Group::Forward => config.chain_order.first(),
            Group::Reverse => config.chain_order.last(),
        }
        .map(String::as_str)
        .unwrap_or_default()
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    /// Zero-based; selects `theta_series[index]`.
    pub index: usize,
    pub theta: f64,
    /// One neuron per ball, in the group's walking order.
    pub neurons: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub group: Group,
    pub series: Vec<Series>,
}

impl ChainSpec {
    pub fn start_ball<'a>(&self, config: &'a SystemConfig) -> &'a str {
        self.group.start_ball(config)
    }

    pub fn validate(&self, config: &SystemConfig) -> Result<(), LearnError> {
        let balls = config.chain_order.len();
        for s in &self.series {
            let expected = config.theta_series.get(s.index).ok_or_else(|| {
                LearnError::Chain(format!("series {} has no configured theta", s.index + 1))
            })?;
            if s.theta != *expected {
                return Err(LearnError::Chain(format!(
                    "series {} theta {} differs from configured {expected}",
                    s.index + 1,
                    s.theta
                )));
            }
            if s.neurons.len() != balls {
                return Err(LearnError::Chain(format!(
                    "series {} lists {} neurons for {balls} balls",
                    s.index + 1,
                    s.neurons.len()
                )));
            }
            if let Some(&n) = s.neurons.iter().find(|&&n| n >= config.neurons_per_ball) {
                return Err(LearnError::Chain(format!(
                    "series {} names neuron {n}, ball size is {}",
                    s.index + 1,
                    config.neurons_per_ball
                )));
            }
        }
        Ok(())
    }

    /// `(from ball, to ball, from neuron, to neuron, theta)` for every edge,
    /// series in order.
    pub fn edges(&self, config: &SystemConfig) -> Vec<(String, String, usize, usize, f64)> {
        let order = self.group.ball_order(config);
        self.series
            .iter()
            .flat_map(|s| {
                let order = &order;
                s.neurons.windows(2).enumerate().map(move |(step, pair)| {
                    (
                        order[step].clone(),
                        order[step + 1].clone(),
                        pair[0],
                        pair[1],
                        s.theta,
                    )
                })
            })
            .collect()
    }
}

/// The two default groups with their two series each.
///
/// Requires five balls of at least seven neurons and two θ values.
pub fn default_chains(config: &SystemConfig) -> Result<Vec<ChainSpec>, LearnError> {
    const SEQUENCES: [(Group, [[usize; 5]; 2]); 2] = [
        (Group::Forward, [[0, 1, 2, 3, 4], [0, 4, 3, 2, 1]]),
        (Group::Reverse, [[0, 6, 5, 4, 3], [0, 3, 4, 5, 6]]),
    ];
    if config.theta_series.len() < 2 {
        return Err(LearnError::Chain("default chains need two theta values".into()));
    }
    let chains: Vec<ChainSpec> = SEQUENCES
        .iter()
        .map(|(group, seqs)| ChainSpec {
            group: *group,
            series: seqs
                .iter()
                .enumerate()
                .map(|(index, seq)| Series {
                    index,
                    theta: config.theta_series[index],
                    neurons: seq.to_vec(),
                })
                .collect(),
        })
        .collect();
    for c in &chains {
        c.validate(config)?;
    }
    Ok(chains)
}

// ---------------------------------------------------------------------------
// Orchestration

/// Runs the `w` phase for every ball and neuron.
pub fn train_w(system: &mut CbrnSystem, dataset: &Dataset) -> Result<Vec<TrainingRecord>, LearnError> {
    check_dataset(system.config(), dataset)?;
    let rate = system.config().eps_w;
    let mut records = Vec::new();
    for (name, images) in dataset.balls() {
        let ball = system.ball_mut(name)?;
        for (index, image) in images.iter().enumerate() {
            let d = pattern::vectorize(image)?;
            records.push(learn_w(ball, index, &d, rate)?);
        }
    }
    Ok(records)
}

/// Runs the `v` phase for every ball and neuron with `theta_series[0]`.
pub fn train_v(system: &mut CbrnSystem) -> Result<Vec<TrainingRecord>, LearnError> {
    let theta = system.config().theta_series[0];
    let rate = system.config().eps_v;
    let names = system.config().chain_order.clone();
    let mut records = Vec::new();
    for name in &names {
        let ball = system.ball_mut(name)?;
        for index in 0..ball.len() {
            records.push(learn_v(ball, index, theta, rate)?);
        }
    }
    Ok(records)
}

/// Runs the cross-link phase for the given chains, in the order given.
pub fn train_u(system: &mut CbrnSystem, chains: &[ChainSpec]) -> Result<Vec<TrainingRecord>, LearnError> {
    let config = system.config().clone();
    let mut records = Vec::new();
    for chain in chains {
        chain.validate(&config)?;
        for (from_ball, to_ball, from, to, theta) in chain.edges(&config) {
            let x = source_activation(system.ball(&from_ball)?, from, config.threshold_d)?;
            let link = system.link_mut(&from_ball, &to_ball)?;
            let mut record = learn_u(link, from, to, x, theta, config.lambda_cb)?;
            record.group = Some(chain.group);
            records.push(record);
        }
    }
    Ok(records)
}

/// Output of a cue neuron when its own stored pattern is presented.
fn source_activation(ball: &CueBall, index: usize, d: f64) -> Result<f64, LearnError> {
    if !ball.neuron(index)?.learned {
        return Err(LearnError::NotLearned {
            ball: ball.attribute.clone(),
            index,
        });
    }
    let y = ball.recall_output(index, 1.0)?;
    let x = model::threshold(ball.cue_preactivation(index, &y)?, d);
    if x == 0.0 {
        return Err(LearnError::SourceSilent {
            ball: ball.attribute.clone(),
            index,
        });
    }
    Ok(x)
}

/// All three phases in sequence: `w`, then `v`, then cross links.
pub fn train_system(
    system: &mut CbrnSystem,
    dataset: &Dataset,
    chains: &[ChainSpec],
) -> Result<TrainingReport, LearnError> {
    let mut records = train_w(system, dataset)?;
    records.extend(train_v(system)?);
    let mut chains = chains.to_vec();
    chains.sort_by_key(|c| c.group);
    records.extend(train_u(system, &chains)?);
    Ok(TrainingReport { records })
}

fn check_dataset(config: &SystemConfig, dataset: &Dataset) -> Result<(), LearnError> {
    let names: Vec<&String> = dataset.balls().iter().map(|(n, _)| n).collect();
    if names.len() != config.chain_order.len()
        || names.iter().zip(&config.chain_order).any(|(a, b)| *a != b)
    {
        return Err(LearnError::Dataset(format!(
            "balls {names:?} do not follow chain order {:?}",
            config.chain_order
        )));
    }
    for (name, images) in dataset.balls() {
        if images.len() != config.neurons_per_ball {
            return Err(LearnError::Dataset(format!(
                "{name} has {} patterns for {} neurons",
                images.len(),
                config.neurons_per_ball
            )));
        }
        if let Some(img) = images.iter().find(|i| {
            i.width() != config.image_width || i.height() != config.image_height
        }) {
            return Err(LearnError::Dataset(format!(
                "{name}: {:?} is {}x{}, expected {}x{}",
                img.label(),
                img.width(),
                img.height(),
                config.image_width,
                config.image_height
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::PatternImage;

    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn diag() -> PatternVector {
        PatternVector::from_values(vec![1.0, 0.0, 0.0, 1.0], "diag").unwrap()
    }

    #[test]
    fn w_one_step_from_zero() {
        let mut ball = CueBall::new("A", 2, 4);
        let r = learn_w(&mut ball, 0, &diag(), 1.0).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.final_error, 0.0);
        assert_eq!(ball.neurons[0].w, diag().values());
        assert!(ball.neurons[0].learned);
    }

    #[test]
    fn w_relearn_is_noop() {
        let mut ball = CueBall::new("A", 1, 4);
        learn_w(&mut ball, 0, &diag(), 1.0).unwrap();
        let before = ball.clone();
        let r = learn_w(&mut ball, 0, &diag(), 1.0).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(ball, before);

        let other = PatternVector::from_values(vec![1.0, 1.0, 0.0, 0.0], "other").unwrap();
        assert!(matches!(
            learn_w(&mut ball, 0, &other, 1.0),
            Err(LearnError::AlreadyLearned { .. })
        ));
    }

    #[test]
    fn w_half_rate_recurrence() {
        let d = PatternVector::from_values(vec![1.0], "one").unwrap();
        let mut w = vec![0.0];
        let mut residuals = Vec::new();
        for _ in 0..2 {
            let dw = w_delta(&w, d.values(), 1.0, 0.5);
            w[0] += dw[0];
            residuals.push(1.0 - w[0]);
        }
        assert_eq!(residuals, vec![0.5, 0.25]);

        let mut ball = CueBall::new("A", 1, 1);
        let r = learn_w(&mut ball, 0, &d, 0.5).unwrap();
        // residual 2^-k < 1e-9 first at k = 30
        assert_eq!(r.iterations, 30);
    }

    #[test]
    fn w_dimension_mismatch() {
        let mut ball = CueBall::new("A", 1, 3);
        assert!(matches!(
            learn_w(&mut ball, 0, &diag(), 1.0),
            Err(LearnError::Model(ModelError::LengthMismatch { .. }))
        ));
    }

    #[test]
    fn v_one_step() {
        let mut ball = CueBall::new("A", 1, 4);
        learn_w(&mut ball, 0, &diag(), 1.0).unwrap();
        let r = learn_v(&mut ball, 0, 100.0, 1.0).unwrap();
        assert_eq!(r.iterations, 1);
        assert!((r.final_q.unwrap() - 100.0).abs() < 1e-12);
        let v = &ball.neurons[0].v;
        assert!((v[0] - 100.0 * H).abs() < 1e-12 && (v[3] - 100.0 * H).abs() < 1e-12);
        assert_eq!((v[1], v[2]), (0.0, 0.0));

        let before = ball.clone();
        let again = learn_v(&mut ball, 0, 100.0, 1.0).unwrap();
        assert_eq!(again.iterations, 0);
        assert_eq!(ball, before);
    }

    #[test]
    fn v_theta_110() {
        let mut ball = CueBall::new("A", 1, 4);
        learn_w(&mut ball, 0, &diag(), 1.0).unwrap();
        let r = learn_v(&mut ball, 0, 110.0, 1.0).unwrap();
        assert!((r.final_q.unwrap() - 110.0).abs() < 1e-12);
    }

    #[test]
    fn v_requires_w_and_unit_norm() {
        let mut ball = CueBall::new("A", 1, 4);
        assert!(matches!(
            learn_v(&mut ball, 0, 100.0, 1.0),
            Err(LearnError::NotLearned { .. })
        ));
        ball.neurons[0].learned = true;
        ball.neurons[0].w = vec![1.1, 0.0, 0.0, 0.0];
        assert!(matches!(
            learn_v(&mut ball, 0, 100.0, 1.0),
            Err(LearnError::NotUnitNorm { .. })
        ));
    }

    #[test]
    fn v_endpoint_depends_on_unit_norm() {
        let y = vec![1.1, 0.0];
        let mut v = vec![0.0; 2];
        let q = step_v(&mut v, &y, 100.0, 1.0);
        // θ Σy² = 100 × 1.21
        assert!((q - 121.0).abs() < 1e-9);
    }

    #[test]
    fn u_examples() {
        let mut link = CrossLink::new("A", "B", 3);
        let r = learn_u(&mut link, 0, 1, 1.0, 100.0, 1.0).unwrap();
        assert_eq!((r.iterations, r.final_q), (1, Some(100.0)));
        assert_eq!(link.weight(0, 1).unwrap(), 100.0);
        learn_u(&mut link, 0, 2, 1.0, 110.0, 1.0).unwrap();
        assert_eq!(link.weight(0, 2).unwrap(), 110.0);
        assert!(matches!(
            learn_u(&mut link, 1, 0, 0.0, 100.0, 1.0),
            Err(LearnError::SourceSilent { .. })
        ));
        assert_eq!(link.weight(1, 0).unwrap(), 0.0);
        assert!(learn_u(&mut link, 3, 0, 1.0, 100.0, 1.0).is_err());
        let again = learn_u(&mut link, 0, 1, 1.0, 100.0, 1.0).unwrap();
        assert_eq!(again.iterations, 0);
    }

    #[test]
    fn default_chains_match_table() {
        let config = SystemConfig::default();
        let chains = default_chains(&config).unwrap();
        assert_eq!(chains.len(), 2);
        assert_eq!(chains[0].start_ball(&config), "Color");
        assert_eq!(chains[1].start_ball(&config), "Constellation");
        assert_eq!(chains[1].series[0].neurons, vec![0, 6, 5, 4, 3]);
        let edges: usize = chains.iter().map(|c| c.edges(&config).len()).sum();
        assert_eq!(edges, 16);
        let e = &chains[1].edges(&config)[0];
        assert_eq!((e.0.as_str(), e.1.as_str(), e.2, e.3), ("Constellation", "SpectacularView", 0, 6));
    }

    #[test]
    fn chain_validation() {
        let config = SystemConfig::default();
        let bad = ChainSpec {
            group: Group::Forward,
            series: vec![Series {
                index: 0,
                theta: 100.0,
                neurons: vec![0, 1, 2, 3, 7],
            }],
        };
        assert!(bad.validate(&config).is_err());
        let bad_theta = ChainSpec {
            group: Group::Forward,
            series: vec![Series {
                index: 1,
                theta: 100.0,
                neurons: vec![0, 1, 2, 3, 4],
            }],
        };
        assert!(bad_theta.validate(&config).is_err());
    }

    fn two_ball_system() -> (CbrnSystem, Dataset) {
        let config = SystemConfig {
            image_width: 8,
            image_height: 8,
            neurons_per_ball: 2,
            theta_series: vec![100.0],
            chain_order: vec!["A".into(), "B".into()],
            ..SystemConfig::default()
        };
        let text = "A\t0\ta0\tsynthetic\nA\t1\ta1\tsynthetic\nB\t0\tb0\tsynthetic\nB\t1\tb1\tsynthetic\n";
        let manifest = crate::dataset::DatasetManifest::parse(text, std::path::Path::new(".")).unwrap();
        let dataset = manifest.resolve(&config.chain_order, 2, 8, 8).unwrap();
        (CbrnSystem::new(config).unwrap(), dataset)
    }

    #[test]
    fn two_ball_single_edge() {
        let (mut system, dataset) = two_ball_system();
        let chain = ChainSpec {
            group: Group::Forward,
            series: vec![Series {
                index: 0,
                theta: 100.0,
                neurons: vec![1, 0],
            }],
        };
        let report = train_system(&mut system, &dataset, &[chain]).unwrap();
        assert_eq!(report.count(Phase::W), 4);
        assert_eq!(report.count(Phase::V), 4);
        assert_eq!(report.count(Phase::U), 1);
        assert_eq!(system.link("A", "B").unwrap().weight(1, 0).unwrap(), 100.0);
        assert!(report.max_q_error() < 1e-6);
        assert_eq!(system.ball("B").unwrap().neurons[1].label.as_deref(), Some("b1"));
    }

    #[test]
    fn dataset_shape_checked() {
        let (mut system, _) = two_ball_system();
        let other = crate::dataset::DatasetManifest::default_synthetic()
            .resolve(&["Color".to_string(), "Shape".to_string()], 7, 8, 8)
            .unwrap();
        assert!(matches!(
            train_w(&mut system, &other),
            Err(LearnError::Dataset(_))
        ));
    }

    #[test]
    fn csv_header_and_rows() {
        let (mut system, dataset) = two_ball_system();
        let report = train_system(&mut system, &dataset, &[]).unwrap();
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("phase,ball,neuron_or_edge,iterations,final_error,final_q")
        );
        assert_eq!(lines.next(), Some("w,A,0,1,0,"));
        assert!(csv.lines().any(|l| l.starts_with("v,B,1,1,")));
    }

    #[test]
    fn w_records_label() {
        let img = PatternImage::new(1, 1, vec![true], "x").unwrap();
        let d = pattern::vectorize(&img).unwrap();
        let mut ball = CueBall::new("A", 1, 1);
        learn_w(&mut ball, 0, &d, 1.0).unwrap();
        assert_eq!(ball.neurons[0].label.as_deref(), Some("x"));
    }
}

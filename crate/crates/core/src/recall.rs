//! Identification of a presented pattern and chained recall across balls.

use std::fmt::Write as _;

use thiserror::Error;

use crate::learning::Group;
use crate::model::{CbrnSystem, ModelError};
use crate::pattern::{CodecError, PatternImage, PatternVector};

/// Components above this are dark when a stored pattern is read back.
pub const DARK_CUTOFF: f64 = 1e-12;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum RecallError {
    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Codec(#[from] CodecError),

    #[error("presented pattern has squared norm {0}, expected 1")]
    NotUnitNorm(f64),

    #[error("{from:?} and {to:?} are not neighbors in the chain")]
    NotAdjacent { from: String, to: String },

    #[error("no fired neurons to propagate from {0:?}")]
    NothingFired(String),

    #[error("{ball}[{index}] has no stored pattern")]
    NotLearned { ball: String, index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Firing {
    pub neuron: usize,
    pub q: f64,
    /// Upstream neuron whose link produced `q`; `None` in the start ball.
    pub source: Option<usize>,
}

/// Pre-activations of every cue neuron in one ball.
#[derive(Debug, Clone, PartialEq)]
pub struct BallResponse {
    pub ball: String,
    pub q_values: Vec<f64>,
    /// Neurons with `q ≥ D`, ascending index.
    pub fired: Vec<Firing>,
    /// Index of the largest `q`, lowest index on ties.
    pub argmax: usize,
}

impl BallResponse {
    fn new(ball: &str, q_values: Vec<f64>, sources: Vec<Option<usize>>, d: f64) -> Self {
        let fired = q_values
            .iter()
            .zip(sources)
            .enumerate()
            .filter(|(_, (&q, _))| q >= d)
            .map(|(neuron, (&q, source))| Firing { neuron, q, source })
            .collect();
        let argmax = q_values
            .iter()
            .enumerate()
            .fold(0, |best, (i, &q)| if q > q_values[best] { i } else { best });
        Self {
            ball: ball.to_string(),
            q_values,
            fired,
            argmax,
        }
    }

    pub fn fired_indices(&self) -> Vec<usize> {
        self.fired.iter().map(|f| f.neuron).collect()
    }

    pub fn max_q(&self) -> f64 {
        self.q_values.get(self.argmax).copied().unwrap_or(0.0)
    }
}

/// Presents a pattern to a ball's recall net and reads every cue neuron.
pub fn identify(
    system: &CbrnSystem,
    ball: &str,
    presented: &PatternVector,
) -> Result<BallResponse, RecallError> {
    let cue_ball = system.ball(ball)?;
    let norm_sq = presented.norm_squared();
    if (norm_sq - 1.0).abs() > 1e-6 {
        return Err(RecallError::NotUnitNorm(norm_sq));
    }
    let y = presented.values();
    let q_values = (0..cue_ball.len())
        .map(|i| cue_ball.cue_preactivation(i, y))
        .collect::<Result<Vec<_>, _>>()?;
    let sources = vec![None; q_values.len()];
    Ok(BallResponse::new(
        ball,
        q_values,
        sources,
        system.config().threshold_d,
    ))
}

/// Feeds the fired set of `from` through the link into `to`.
///
/// A target reached by several sources takes the largest contribution.
pub fn propagate(
    system: &CbrnSystem,
    from: &str,
    to: &str,
    fired: &[Firing],
) -> Result<BallResponse, RecallError> {
    let config = system.config();
    let (a, b) = (
        config
            .ball_index(from)
            .ok_or_else(|| ModelError::UnknownBall(from.to_string()))?,
        config
            .ball_index(to)
            .ok_or_else(|| ModelError::UnknownBall(to.to_string()))?,
    );
    if a.abs_diff(b) != 1 {
        return Err(RecallError::NotAdjacent {
            from: from.to_string(),
            to: to.to_string(),
        });
    }
    if fired.is_empty() {
        return Err(RecallError::NothingFired(from.to_string()));
    }
    let link = system.link(from, to)?;
    let n = link.size();
    let mut q_values = vec![0.0; n];
    let mut sources = vec![None; n];
    for l in 0..n {
        for f in fired {
            let q = link.cross_preactivation(f.neuron, l, 1.0)?;
            if sources[l].is_none() || q > q_values[l] {
                q_values[l] = q;
                sources[l] = Some(f.neuron);
            }
        }
    }
    Ok(BallResponse::new(to, q_values, sources, config.threshold_d))
}

/// Reads back the image stored in a learned neuron.
pub fn reconstruct(
    system: &CbrnSystem,
    ball: &str,
    index: usize,
) -> Result<PatternImage, RecallError> {
    let cue_ball = system.ball(ball)?;
    let neuron = cue_ball.neuron(index)?;
    if !neuron.learned {
        return Err(RecallError::NotLearned {
            ball: ball.to_string(),
            index,
        });
    }
    let y = cue_ball.recall_output(index, 1.0)?;
    let config = system.config();
    Ok(PatternImage::new(
        config.image_width,
        config.image_height,
        y.iter().map(|&v| v > DARK_CUTOFF).collect(),
        neuron.label.clone().unwrap_or_default(),
    )?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecalledImage {
    pub ball: String,
    pub neuron: usize,
    pub q: f64,
    pub image: PatternImage,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Complete,
    /// Nothing reached the threshold in the start ball.
    Failed { ball: String, max_q: f64 },
    /// A downstream ball fired nothing; later balls were not visited.
    Truncated { ball: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecallTrace {
    pub group: Group,
    pub responses: Vec<BallResponse>,
    /// One entry per fired neuron, in chain then index order.
    pub recalled: Vec<RecalledImage>,
    pub outcome: Outcome,
}

impl RecallTrace {
    pub fn is_complete(&self) -> bool {
        self.outcome == Outcome::Complete
    }

    /// Fired neuron indices per visited ball.
    pub fn fired_by_ball(&self) -> Vec<(String, Vec<usize>)> {
        self.responses
            .iter()
            .map(|r| (r.ball.clone(), r.fired_indices()))
            .collect()
    }

    /// `cmb,ball,neuron,q,fired,label`, one row per neuron per visited ball.
    pub fn to_csv(&self, system: &CbrnSystem) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(["cmb", "ball", "neuron", "q", "fired", "label"])
            .expect("in-memory write");
        for r in &self.responses {
            let ball = system.ball(&r.ball).ok();
            for (i, q) in r.q_values.iter().enumerate() {
                let fired = r.fired.iter().any(|f| f.neuron == i);
                let label = ball
                    .and_then(|b| b.neurons.get(i))
                    .and_then(|n| n.label.clone())
                    .unwrap_or_default();
                wtr.write_record([
                    self.group.to_string(),
                    r.ball.clone(),
                    i.to_string(),
                    q.to_string(),
                    u8::from(fired).to_string(),
                    label,
                ])
                .expect("in-memory write");
            }
        }
        String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }

    /// Per-ball summary followed by every recalled image drawn in text.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "cmb={}", self.group);
        for r in &self.responses {
            let fired: Vec<String> = r
                .fired
                .iter()
                .map(|f| format!("{}:{:.2}", f.neuron, f.q))
                .collect();
            let _ = writeln!(
                out,
                "{:<16} argmax={} fired={{{}}}",
                r.ball,
                r.argmax,
                fired.join(", ")
            );
        }
        match &self.outcome {
            Outcome::Complete => {}
            Outcome::Failed { ball, max_q } => {
                let _ = writeln!(out, "recall failed at {ball}: max q = {max_q}");
            }
            Outcome::Truncated { ball, reason } => {
                let _ = writeln!(out, "chain stopped at {ball}: {reason}");
            }
        }
        for img in &self.recalled {
            let _ = writeln!(
                out,
                "\n{}[{}] {:?} q={:.2}",
                img.ball,
                img.neuron,
                img.image.label(),
                img.q
            );
            out.push_str(&img.image.to_ascii());
        }
        out
    }
}

/// Identifies `presented` in the group's start ball, then follows the
/// cross links ball by ball to the end of the chain.
pub fn chain_recall(
    system: &CbrnSystem,
    group: Group,
    presented: &PatternVector,
) -> Result<RecallTrace, RecallError> {
    let order = group.ball_order(system.config());
    let first = identify(system, &order[0], presented)?;
    let mut trace = RecallTrace {
        group,
        responses: Vec::with_capacity(order.len()),
        recalled: Vec::new(),
        outcome: Outcome::Complete,
    };
    if first.fired.is_empty() {
        trace.outcome = Outcome::Failed {
            ball: order[0].clone(),
            max_q: first.max_q(),
        };
        trace.responses.push(first);
        return Ok(trace);
    }
    record_images(system, &first, &mut trace.recalled)?;
    trace.responses.push(first);

    for pair in order.windows(2) {
        let upstream = &trace.responses.last().expect("non-empty").fired;
        let response = propagate(system, &pair[0], &pair[1], upstream)?;
        let silent = response.fired.is_empty();
        record_images(system, &response, &mut trace.recalled)?;
        trace.responses.push(response);
        if silent {
            trace.outcome = Outcome::Truncated {
                ball: pair[1].clone(),
                reason: "no cue neuron reached the threshold".into(),
            };
            break;
        }
    }
    Ok(trace)
}

fn record_images(
    system: &CbrnSystem,
    response: &BallResponse,
    out: &mut Vec<RecalledImage>,
) -> Result<(), RecallError> {
    for f in &response.fired {
        out.push(RecalledImage {
            ball: response.ball.clone(),
            neuron: f.neuron,
            q: f.q,
            image: reconstruct(system, &response.ball, f.neuron)?,
        });
    }
    Ok(())
}

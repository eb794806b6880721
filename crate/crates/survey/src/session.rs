//! One respondent's questionnaire.
//!
//! Steps run `0..=2K+3`: a block of `K` pairwise queries, three
//! cognitive-reflection questions, a second block of `K`, and a final
//! head-to-head between the two recommendations. Robust-first sessions ask
//! robust queries in the first block; random-first sessions swap the blocks.

use rand::Rng;
use robust_elicit::analysis::{
    final_recommendation, CrtAnswer, Demographics, FinalAnswer, Group, PairwiseAnswer, QuerySource, SessionRecord,
    SessionStatus, SESSION_RECORD_VERSION,
};
use robust_elicit::elicit::{sample_queries, LazyLookup, ResponsePath};
use robust_elicit::{Query, QueryHistory, Response};
use serde::{Deserialize, Serialize};

use crate::cards::{Catalog, PolicyCard};
use crate::error::{Result, ServiceError};

pub const CRT_STEPS: usize = 3;

pub const SESSION_STATE_VERSION: u32 = 1;

/// What the respondent sees at a step, before side assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    /// `index` counts queries within the strategy's block.
    Pairwise { source: QuerySource, index: usize },
    Crt { question: usize },
    Final,
    Done,
}

/// Both recommendations, fixed once the last pairwise answer is in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalOffer {
    pub robust: usize,
    pub random: usize,
    pub z_robust: f64,
    pub z_random: f64,
    pub robust_fallback: bool,
    pub random_fallback: bool,
}

/// A button press as sent by the client.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    Left,
    Indifferent,
    Right,
}

impl Choice {
    /// Canonical response, relative to the query's first alternative.
    pub fn unmap(self, swapped: bool) -> Response {
        match (self, swapped) {
            (Choice::Indifferent, _) => Response::Indifferent,
            (Choice::Left, false) | (Choice::Right, true) => Response::PrefersFirst,
            (Choice::Left, true) | (Choice::Right, false) => Response::PrefersSecond,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerRequest {
    pub step: usize,
    #[serde(default)]
    pub response: Option<Choice>,
    pub elapsed_ms: u64,
    #[serde(default)]
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepPayload {
    Pairwise {
        step: usize,
        total_steps: usize,
        left: PolicyCard,
        right: PolicyCard,
    },
    Crt {
        step: usize,
        total_steps: usize,
        question: usize,
        text: String,
    },
    Final {
        step: usize,
        total_steps: usize,
        left: PolicyCard,
        right: PolicyCard,
        same_policy: bool,
    },
    Done {
        total_steps: usize,
    },
}

/// Everything the service persists about a session. The exported record
/// is embedded as is; the remaining fields drive the state machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub v: u32,
    pub record: SessionRecord,
    pub token: String,
    pub expires_at_ms: u64,
    pub step: usize,
    pub random_queries: Vec<Query>,
    /// Side flags for the `2K` pairwise queries in presentation order,
    /// then the final query. True shows the canonical first alternative
    /// on the right.
    pub swaps: Vec<bool>,
    pub final_offer: Option<FinalOffer>,
}

/// Engine state shared by every session.
pub struct Context<'a> {
    pub lookup: &'a LazyLookup,
    pub catalog: &'a Catalog,
    pub crt_questions: &'a [String],
}

impl Context<'_> {
    pub fn k(&self) -> usize {
        self.lookup.max_queries()
    }
}

pub fn total_steps(k: usize) -> usize {
    2 * k + CRT_STEPS + 1
}

impl Session {
    /// Draw the group, the random queries and every side flag up front.
    #[allow(clippy::too_many_arguments)]
    pub fn create<R: Rng + ?Sized>(
        rng: &mut R,
        id: String,
        token: String,
        num_alternatives: usize,
        k: usize,
        demographics: Demographics,
        worker_id: Option<String>,
        now_ms: u64,
        expiry_ms: u64,
    ) -> Result<Self> {
        let group = if rng.random_bool(0.5) {
            Group::RobustFirst
        } else {
            Group::RandomFirst
        };
        let random_queries = sample_queries(rng, k, num_alternatives)?;
        let swaps = (0..=2 * k).map(|_| rng.random_bool(0.5)).collect();
        Ok(Session {
            v: SESSION_STATE_VERSION,
            record: SessionRecord {
                v: SESSION_RECORD_VERSION,
                id,
                status: SessionStatus::Active,
                group,
                worker_id,
                demographics,
                k,
                created_at_ms: now_ms,
                completed_at_ms: None,
                pairwise: Vec::new(),
                crt: Vec::new(),
                final_answer: None,
                bot_flag: false,
            },
            token,
            expires_at_ms: now_ms.saturating_add(expiry_ms),
            step: 0,
            random_queries,
            swaps,
            final_offer: None,
        })
    }

    pub fn id(&self) -> &str {
        &self.record.id
    }

    pub fn k(&self) -> usize {
        self.record.k
    }

    /// Status at `now_ms`; active sessions past their deadline are expired.
    pub fn status_at(&self, now_ms: u64) -> SessionStatus {
        match self.record.status {
            SessionStatus::Active if now_ms > self.expires_at_ms => SessionStatus::Expired,
            s => s,
        }
    }

    /// The exported form, with expiry applied.
    pub fn record_at(&self, now_ms: u64) -> SessionRecord {
        let mut r = self.record.clone();
        r.status = self.status_at(now_ms);
        r
    }

    pub fn kind_of(&self, step: usize) -> StepKind {
        let k = self.k();
        let (first, second) = match self.record.group {
            Group::RobustFirst => (QuerySource::Robust, QuerySource::Random),
            Group::RandomFirst => (QuerySource::Random, QuerySource::Robust),
        };
        if step < k {
            StepKind::Pairwise {
                source: first,
                index: step,
            }
        } else if step < k + CRT_STEPS {
            StepKind::Crt { question: step - k }
        } else if step < 2 * k + CRT_STEPS {
            StepKind::Pairwise {
                source: second,
                index: step - k - CRT_STEPS,
            }
        } else if step == 2 * k + CRT_STEPS {
            StepKind::Final
        } else {
            StepKind::Done
        }
    }

    /// Side flag for a pairwise or final step.
    fn swapped_at(&self, step: usize) -> bool {
        let k = self.k();
        let slot = if step < k {
            step
        } else if step < 2 * k + CRT_STEPS {
            step - CRT_STEPS
        } else {
            2 * k
        };
        self.swaps[slot]
    }

    fn robust_path(&self) -> ResponsePath {
        ResponsePath(self.record.answers_from(QuerySource::Robust).map(|a| a.response).collect())
    }

    fn query_at(&self, ctx: &Context, source: QuerySource, index: usize) -> Result<Query> {
        match source {
            QuerySource::Robust => {
                let path = self.robust_path();
                debug_assert_eq!(path.len(), index);
                Ok(ctx.lookup.query_for(&path)?)
            }
            QuerySource::Random => Ok(self.random_queries[index]),
        }
    }

    fn check_open(&self, now_ms: u64) -> Result<()> {
        if self.status_at(now_ms) == SessionStatus::Expired {
            return Err(ServiceError::Gone(format!("session {} has expired", self.id())));
        }
        Ok(())
    }

    fn cards(&self, ctx: &Context, first: usize, second: usize, swapped: bool) -> (PolicyCard, PolicyCard) {
        let (a, b) = (ctx.catalog.card(first), ctx.catalog.card(second));
        if swapped {
            (b, a)
        } else {
            (a, b)
        }
    }

    pub fn next_step(&self, ctx: &Context, now_ms: u64) -> Result<StepPayload> {
        self.check_open(now_ms)?;
        let step = self.step;
        let total_steps = total_steps(self.k());
        Ok(match self.kind_of(step) {
            StepKind::Pairwise { source, index } => {
                let q = self.query_at(ctx, source, index)?;
                let (left, right) = self.cards(ctx, q.first, q.second, self.swapped_at(step));
                StepPayload::Pairwise {
                    step,
                    total_steps,
                    left,
                    right,
                }
            }
            StepKind::Crt { question } => StepPayload::Crt {
                step,
                total_steps,
                question,
                text: ctx.crt_questions[question].clone(),
            },
            StepKind::Final => {
                let offer = self.final_offer.as_ref().expect("offer is fixed before the final step");
                let (left, right) = self.cards(ctx, offer.robust, offer.random, self.swapped_at(step));
                StepPayload::Final {
                    step,
                    total_steps,
                    left,
                    right,
                    same_policy: offer.robust == offer.random,
                }
            }
            StepKind::Done => StepPayload::Done { total_steps },
        })
    }

    /// Apply one answer. Returns `Ok(false)` for a replay of an answer
    /// already stored, which leaves the session untouched.
    pub fn submit(&mut self, ctx: &Context, answer: &AnswerRequest, now_ms: u64) -> Result<bool> {
        self.check_open(now_ms)?;
        if answer.step < self.step {
            return self.check_replay(answer).map(|()| false);
        }
        if self.record.status == SessionStatus::Completed {
            return Err(ServiceError::Gone(format!("session {} is complete", self.id())));
        }
        if answer.step > self.step {
            return Err(ServiceError::Conflict(format!(
                "expected an answer for step {}, got step {}",
                self.step, answer.step
            )));
        }
        let step = self.step;
        match self.kind_of(step) {
            StepKind::Pairwise { source, index } => {
                let choice = pairwise_choice(answer)?;
                let query = self.query_at(ctx, source, index)?;
                let swapped = self.swapped_at(step);
                self.record.pairwise.push(PairwiseAnswer {
                    step,
                    source,
                    query,
                    swapped,
                    response: choice.unmap(swapped),
                    elapsed_ms: answer.elapsed_ms,
                });
                if self.record.pairwise.len() == 2 * self.k() {
                    self.final_offer = Some(self.compute_offer(ctx)?);
                }
            }
            StepKind::Crt { question } => {
                let text = crt_text(answer)?;
                self.record.crt.push(CrtAnswer {
                    step,
                    question,
                    answer: text.to_string(),
                    elapsed_ms: answer.elapsed_ms,
                });
            }
            StepKind::Final => {
                let choice = pairwise_choice(answer)?;
                let offer = self.final_offer.clone().expect("offer is fixed before the final step");
                let swapped = self.swapped_at(step);
                self.record.final_answer = Some(FinalAnswer {
                    step,
                    robust: offer.robust,
                    random: offer.random,
                    z_robust: offer.z_robust,
                    z_random: offer.z_random,
                    robust_fallback: offer.robust_fallback,
                    random_fallback: offer.random_fallback,
                    swapped,
                    response: choice.unmap(swapped),
                    elapsed_ms: answer.elapsed_ms,
                });
                self.record.status = SessionStatus::Completed;
                self.record.completed_at_ms = Some(now_ms);
            }
            StepKind::Done => unreachable!("completed sessions are rejected above"),
        }
        self.step += 1;
        Ok(true)
    }

    fn compute_offer(&self, ctx: &Context) -> Result<FinalOffer> {
        let x = ctx.lookup.alternatives();
        let noise = ctx.lookup.noise();
        let history = |s: QuerySource| -> QueryHistory { self.record.history(s) };
        let (robust, robust_fallback) = final_recommendation(x, &history(QuerySource::Robust), self.k(), noise)?;
        let (random, random_fallback) = final_recommendation(x, &history(QuerySource::Random), self.k(), noise)?;
        Ok(FinalOffer {
            robust: robust.index,
            random: random.index,
            z_robust: robust.value,
            z_random: random.value,
            robust_fallback,
            random_fallback,
        })
    }

    /// A resubmission of an earlier step must carry the stored answer.
    fn check_replay(&self, answer: &AnswerRequest) -> Result<()> {
        let step = answer.step;
        let same = match self.kind_of(step) {
            StepKind::Pairwise { .. } => {
                let stored = self.record.pairwise.iter().find(|a| a.step == step).expect("answered");
                answer.response.map(|c| c.unmap(stored.swapped)) == Some(stored.response)
            }
            StepKind::Crt { .. } => {
                let stored = self.record.crt.iter().find(|a| a.step == step).expect("answered");
                answer.text.as_deref() == Some(stored.answer.as_str())
            }
            StepKind::Final => {
                let stored = self.record.final_answer.as_ref().expect("answered");
                answer.response.map(|c| c.unmap(stored.swapped)) == Some(stored.response)
            }
            StepKind::Done => false,
        };
        if same {
            Ok(())
        } else {
            Err(ServiceError::Conflict(format!("step {step} was already answered differently")))
        }
    }
}

fn pairwise_choice(answer: &AnswerRequest) -> Result<Choice> {
    if answer.text.is_some() {
        return Err(ServiceError::BadRequest("comparison steps take no free text".into()));
    }
    answer
        .response
        .ok_or_else(|| ServiceError::BadRequest("comparison steps need a response: left, indifferent or right".into()))
}

fn crt_text(answer: &AnswerRequest) -> Result<&str> {
    if answer.response.is_some() {
        return Err(ServiceError::BadRequest("reflection questions take free text, not a response".into()));
    }
    answer
        .text
        .as_deref()
        .ok_or_else(|| ServiceError::BadRequest("reflection questions need a text answer".into()))
}

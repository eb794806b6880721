//! Synthetic session records for tests, demos and the bundled export.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::records::{
    CrtAnswer, Demographics, FinalAnswer, Group, PairwiseAnswer, QuerySource, SessionRecord, SessionStatus,
    SESSION_RECORD_VERSION,
};
use crate::model::{all_queries, Response};

/// The bundled export written by the `write_fixture` example.
pub const BUNDLED_EXPORT: &str = include_str!("../../data/final_query_sessions.jsonl");

/// Alternatives assumed by fixture queries.
pub const FIXTURE_ALTERNATIVES: usize = 25;

/// Builds a completed, clean session and lets tests perturb one aspect.
#[derive(Debug, Clone)]
pub struct SessionBuilder {
    record: SessionRecord,
    duration_ms: Option<u64>,
}

impl SessionBuilder {
    /// A robust-first session with `k` queries per strategy, 20 s on the
    /// first query, 6 s on every later query and 10 s per reflection answer.
    pub fn new(id: &str, k: usize) -> Self {
        let universe = all_queries(FIXTURE_ALTERNATIVES);
        let pairwise = (0..2 * k)
            .map(|j| {
                let random = j >= k;
                PairwiseAnswer {
                    step: if random { j + 3 } else { j },
                    source: if random { QuerySource::Random } else { QuerySource::Robust },
                    query: universe[(j * 7 + if random { 150 } else { 0 }) % universe.len()],
                    swapped: j % 2 == 1,
                    response: Response::PrefersFirst,
                    elapsed_ms: if j == 0 { 20_000 } else { 6_000 },
                }
            })
            .collect();
        let crt = (0..3)
            .map(|q| CrtAnswer {
                step: k + q,
                question: q,
                answer: ["5 cents", "5 minutes", "47 days"][q].to_string(),
                elapsed_ms: 10_000,
            })
            .collect();
        let record = SessionRecord {
            v: SESSION_RECORD_VERSION,
            id: id.to_string(),
            status: SessionStatus::Completed,
            group: Group::RobustFirst,
            worker_id: None,
            demographics: Demographics::declined(),
            k,
            created_at_ms: 1_600_000_000_000,
            completed_at_ms: None,
            pairwise,
            crt,
            final_answer: Some(FinalAnswer {
                step: 2 * k + 3,
                robust: 0,
                random: 1,
                z_robust: 0.6,
                z_random: 0.5,
                robust_fallback: false,
                random_fallback: false,
                swapped: false,
                response: Response::PrefersFirst,
                elapsed_ms: 6_000,
            }),
            bot_flag: false,
        };
        SessionBuilder {
            record,
            duration_ms: None,
        }
    }

    /// Random queries come first and robust ones after the reflection block.
    pub fn random_first(mut self) -> Self {
        let k = self.record.k;
        self.record.group = Group::RandomFirst;
        for a in &mut self.record.pairwise {
            a.source = match a.source {
                QuerySource::Robust => QuerySource::Random,
                QuerySource::Random => QuerySource::Robust,
            };
        }
        debug_assert!(self.record.pairwise.len() == 2 * k);
        self
    }

    pub fn worker(mut self, id: &str) -> Self {
        self.record.worker_id = Some(id.to_string());
        self
    }

    pub fn created_at(mut self, ms: u64) -> Self {
        self.record.created_at_ms = ms;
        self
    }

    pub fn demographics(mut self, d: Demographics) -> Self {
        self.record.demographics = d;
        self
    }

    pub fn first_query_ms(mut self, ms: u64) -> Self {
        self.record.pairwise[0].elapsed_ms = ms;
        self
    }

    /// Time on every pairwise query after the first and on the final query.
    pub fn average_ms(mut self, ms: u64) -> Self {
        for a in &mut self.record.pairwise[1..] {
            a.elapsed_ms = ms;
        }
        if let Some(f) = &mut self.record.final_answer {
            f.elapsed_ms = ms;
        }
        self
    }

    /// Per-query times, first query included (must have `2k` entries).
    pub fn pairwise_ms(mut self, times: &[u64]) -> Self {
        assert_eq!(times.len(), self.record.pairwise.len());
        for (a, &t) in self.record.pairwise.iter_mut().zip(times) {
            a.elapsed_ms = t;
        }
        self
    }

    pub fn final_ms(mut self, ms: u64) -> Self {
        if let Some(f) = &mut self.record.final_answer {
            f.elapsed_ms = ms;
        }
        self
    }

    pub fn responses(mut self, source: QuerySource, responses: &[Response]) -> Self {
        let answers = self.record.pairwise.iter_mut().filter(|a| a.source == source);
        for (a, &r) in answers.zip(responses) {
            a.response = r;
        }
        self
    }

    pub fn crt_answer(mut self, question: usize, text: &str) -> Self {
        self.record.crt[question].answer = text.to_string();
        self
    }

    pub fn bot_flag(mut self) -> Self {
        self.record.bot_flag = true;
        self
    }

    /// Start-to-finish time; by default the sum of all answer times.
    pub fn duration_ms(mut self, ms: u64) -> Self {
        self.duration_ms = Some(ms);
        self
    }

    pub fn final_choice(mut self, robust: usize, random: usize, response: Response) -> Self {
        if let Some(f) = &mut self.record.final_answer {
            f.robust = robust;
            f.random = random;
            f.response = response;
        }
        self
    }

    pub fn final_swapped(mut self, swapped: bool) -> Self {
        if let Some(f) = &mut self.record.final_answer {
            f.swapped = swapped;
        }
        self
    }

    pub fn final_values(mut self, z_robust: f64, z_random: f64) -> Self {
        if let Some(f) = &mut self.record.final_answer {
            f.z_robust = z_robust;
            f.z_random = z_random;
        }
        self
    }

    pub fn build(self) -> SessionRecord {
        let mut r = self.record;
        let answered: u64 = r.pairwise.iter().map(|a| a.elapsed_ms).sum::<u64>()
            + r.crt.iter().map(|a| a.elapsed_ms).sum::<u64>()
            + r.final_answer.as_ref().map_or(0, |f| f.elapsed_ms);
        r.completed_at_ms = Some(r.created_at_ms + self.duration_ms.unwrap_or(answered));
        r
    }
}

/// Final-query outcome categories used to lay out the bundled export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Robust,
    Random,
    IndifferentDifferent,
    IndifferentSame,
}

/// The bundled example export: 193 sessions that survive cleaning, split
/// 94 / 61 / 22 / 16 across the four final-query outcomes, 94 robust-first
/// and 99 random-first, with the robust recommendation shown on the left
/// 117 times; plus one session removed by each cleaning rule and one
/// unfinished session.
pub fn final_query_fixture() -> Vec<SessionRecord> {
    const K: usize = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(20_200_815);
    let mut outcomes: Vec<Outcome> = [
        (Outcome::Robust, 94),
        (Outcome::Random, 61),
        (Outcome::IndifferentDifferent, 22),
        (Outcome::IndifferentSame, 16),
    ]
    .iter()
    .flat_map(|&(o, n)| std::iter::repeat_n(o, n))
    .collect();
    outcomes.shuffle(&mut rng);
    let mut robust_first: Vec<bool> = (0..193).map(|i| i < 94).collect();
    robust_first.shuffle(&mut rng);
    let mut shown_left: Vec<bool> = (0..193).map(|i| i < 117).collect();
    shown_left.shuffle(&mut rng);

    let popular = [2, 3, 22, 7, 11, 15, 19];
    let ages = ["18-24", "25-34", "35-44", "45-54", "55+", "declined"];
    let mut start = 1_600_000_000_000u64;
    let mut records = Vec::new();
    for i in 0..193 {
        start += rng.random_range(60_000..3_600_000);
        let robust = popular[rng.random_range(0..popular.len())];
        let random = if outcomes[i] == Outcome::IndifferentSame {
            robust
        } else {
            (robust + rng.random_range(1..FIXTURE_ALTERNATIVES)) % FIXTURE_ALTERNATIVES
        };
        let response = match outcomes[i] {
            Outcome::Robust => Response::PrefersFirst,
            Outcome::Random => Response::PrefersSecond,
            _ => Response::Indifferent,
        };
        let z_robust = 0.35 + 0.5 * rng.random::<f64>();
        let z_random = (z_robust - 0.25 + 0.4 * rng.random::<f64>()).clamp(0.0, 1.0);
        let times: Vec<u64> = (0..2 * K)
            .map(|j| {
                if j == 0 {
                    rng.random_range(16_000..90_000)
                } else {
                    rng.random_range(3_500..20_000)
                }
            })
            .collect();
        let responses: Vec<Response> = (0..2 * K)
            .map(|_| match rng.random_range(0..100) {
                0..9 => Response::Indifferent,
                9..55 => Response::PrefersFirst,
                _ => Response::PrefersSecond,
            })
            .collect();
        let demographics = Demographics {
            age_group: ages[rng.random_range(0..ages.len())].to_string(),
            ethnicity: ["white", "black", "asian", "hispanic", "other", "declined"][rng.random_range(0..6)].to_string(),
            gender: ["female", "male", "non-binary", "declined"][rng.random_range(0..4)].to_string(),
            healthcare_worker: ["yes", "no"][rng.random_range(0..2)].to_string(),
        };
        let mut b = SessionBuilder::new(&format!("s{i:03}"), K)
            .worker(&format!("W{i:04}"))
            .created_at(start)
            .demographics(demographics)
            .pairwise_ms(&times)
            .final_ms(rng.random_range(3_500..20_000))
            .responses(QuerySource::Robust, &responses[..K])
            .responses(QuerySource::Random, &responses[K..])
            .final_choice(robust, random, response)
            .final_swapped(!shown_left[i])
            .final_values(z_robust, z_random);
        if !robust_first[i] {
            b = b.random_first();
        }
        records.push(b.build());
    }

    let extra = |id: &str| SessionBuilder::new(id, K).worker(&format!("W-{id}")).created_at(start + 1_000);
    records.push(
        SessionBuilder::new("r-duplicate", K)
            .worker("W0000")
            .created_at(start + 2_000)
            .build(),
    );
    records.push(extra("r-bot").crt_answer(0, "?!").crt_answer(1, "...").build());
    records.push(extra("r-first-fast").first_query_ms(9_000).build());
    records.push(extra("r-average-fast").average_ms(2_000).build());
    records.push(extra("r-slow").duration_ms(65 * 60 * 1000).build());
    records.push(extra("r-same-policy").final_choice(4, 4, Response::PrefersFirst).build());
    let mut unfinished = extra("r-unfinished").build();
    unfinished.status = SessionStatus::Active;
    unfinished.completed_at_ms = None;
    unfinished.final_answer = None;
    unfinished.pairwise.truncate(3);
    records.push(unfinished);
    records
}

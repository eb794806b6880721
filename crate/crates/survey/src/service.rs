use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_elicit::analysis::{to_jsonl, Demographics, SessionStatus};
use robust_elicit::elicit::{LazyLookup, LookupTable, NoiseParams};
use robust_elicit::policy::AlternativesFile;
use serde::{Deserialize, Serialize};

use crate::cards::Catalog;
use crate::config::ServiceConfig;
use crate::error::{Result, ServiceError};
use crate::session::{total_steps, AnswerRequest, Context, Session, StepPayload};
use crate::store::{EventKind, SessionStore};
use crate::API_VERSION;

/// Milliseconds since the Unix epoch; injectable for tests.
pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSessionRequest {
    #[serde(default)]
    pub v: Option<u32>,
    pub demographics: Demographics,
    #[serde(default)]
    pub worker_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub v: u32,
    pub id: String,
    pub token: String,
    pub total_steps: usize,
    pub expires_at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextStep {
    pub v: u32,
    pub id: String,
    #[serde(flatten)]
    pub payload: StepPayload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub v: u32,
    pub id: String,
    pub step: usize,
    pub next_step: usize,
    pub status: SessionStatus,
    /// True when the answer repeated one already stored.
    pub duplicate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusReport {
    pub v: u32,
    pub id: String,
    pub status: SessionStatus,
    pub step: usize,
    pub total_steps: usize,
    pub created_at_ms: u64,
    pub expires_at_ms: u64,
    pub completed_at_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub v: u32,
    pub status: String,
    pub sessions: usize,
    pub alternatives: usize,
    #[serde(rename = "K")]
    pub k: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ServiceOptions {
    pub expiry_ms: u64,
    pub admin_token: Option<String>,
    pub unique_worker_ids: bool,
    pub seed: u64,
    pub crt_questions: Vec<String>,
}

impl ServiceOptions {
    pub fn from_config(config: &ServiceConfig, seed: u64) -> Self {
        ServiceOptions {
            expiry_ms: config.expiry_minutes * 60_000,
            admin_token: config.admin_token.clone(),
            unique_worker_ids: config.unique_worker_ids,
            seed,
            crt_questions: config.crt_questions.clone(),
        }
    }
}

/// The questionnaire behind the HTTP routes. Every method is synchronous;
/// the router runs them on blocking threads.
pub struct Service {
    lookup: LazyLookup,
    catalog: Catalog,
    store: SessionStore,
    options: ServiceOptions,
    rng: Mutex<ChaCha8Rng>,
    clock: Clock,
}

impl Service {
    pub fn new(
        alternatives: &AlternativesFile,
        lookup: LazyLookup,
        store: SessionStore,
        options: ServiceOptions,
        clock: Clock,
    ) -> Result<Self> {
        let set = alternatives.to_alternative_set()?;
        if set.content_hash() != lookup.alternatives().content_hash() {
            return Err(ServiceError::BadRequest("lookup was built for different alternatives".into()));
        }
        if options.crt_questions.len() != crate::session::CRT_STEPS {
            return Err(ServiceError::BadRequest("exactly three CRT questions are required".into()));
        }
        Ok(Service {
            lookup,
            catalog: Catalog::new(alternatives),
            store,
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(options.seed)),
            options,
            clock,
        })
    }

    /// Load alternatives, lookup table and event log named by `config`.
    /// Returns the service and the seed it randomizes sessions with.
    pub fn from_config(config: &ServiceConfig, clock: Clock) -> Result<(Self, u64)> {
        config.validate()?;
        let file = AlternativesFile::load(&config.alternatives)?;
        let set = file.to_alternative_set()?;
        let noise = NoiseParams::new(config.sigma, config.p)?;
        let lookup = match &config.lookup_table {
            Some(path) => {
                let table = LookupTable::load(path)?;
                let p = table.params;
                if p.max_queries != config.k || p.sigma != config.sigma || p.p != config.p {
                    return Err(ServiceError::BadRequest(format!(
                        "lookup table has K={}, sigma={}, p={} but the config asks for K={}, sigma={}, p={}",
                        p.max_queries, p.sigma, p.p, config.k, config.sigma, config.p
                    )));
                }
                LazyLookup::with_table(set, table)?
            }
            None => LazyLookup::new(set, config.k, noise)?,
        };
        let store = match &config.event_log {
            Some(path) => SessionStore::open(path, config.compact_every)?,
            None => SessionStore::in_memory(),
        };
        let seed = config.seed.unwrap_or_else(|| rand::rng().random());
        let service = Service::new(&file, lookup, store, ServiceOptions::from_config(config, seed), clock)?;
        Ok((service, seed))
    }

    fn context(&self) -> Context<'_> {
        Context {
            lookup: &self.lookup,
            catalog: &self.catalog,
            crt_questions: &self.options.crt_questions,
        }
    }

    fn now(&self) -> u64 {
        (self.clock)()
    }

    pub fn k(&self) -> usize {
        self.lookup.max_queries()
    }

    pub fn lookup(&self) -> &LazyLookup {
        &self.lookup
    }

    pub fn create_session(&self, request: CreateSessionRequest) -> Result<Created> {
        if let Some(v) = request.v.filter(|v| *v != API_VERSION) {
            return Err(ServiceError::BadRequest(format!("unsupported request version {v}")));
        }
        let d = &request.demographics;
        let fields = [&d.age_group, &d.ethnicity, &d.gender, &d.healthcare_worker];
        if fields.iter().any(|f| f.trim().is_empty()) {
            return Err(ServiceError::BadRequest(
                "every demographic field needs a value (\"declined\" is allowed)".into(),
            ));
        }
        let worker_id = request.worker_id.filter(|w| !w.trim().is_empty());
        let now = self.now();
        let session = {
            let mut rng = self.rng.lock().expect("rng poisoned");
            let id = random_hex(&mut *rng, 12);
            let token = random_hex(&mut *rng, 24);
            Session::create(
                &mut *rng,
                id,
                token,
                self.lookup.alternatives().len(),
                self.k(),
                request.demographics,
                worker_id,
                now,
                self.options.expiry_ms,
            )?
        };
        let created = Created {
            v: API_VERSION,
            id: session.id().to_string(),
            token: session.token.clone(),
            total_steps: total_steps(self.k()),
            expires_at_ms: session.expires_at_ms,
        };
        self.store.insert(session, now, self.options.unique_worker_ids)?;
        Ok(created)
    }

    fn session(&self, id: &str, token: Option<&str>) -> Result<Arc<Mutex<Session>>> {
        let handle = self.store.get(id).ok_or_else(|| ServiceError::NotFound(id.to_string()))?;
        let ok = token.is_some_and(|t| t == handle.lock().expect("session poisoned").token);
        if ok {
            Ok(handle)
        } else {
            Err(ServiceError::Unauthorized)
        }
    }

    pub fn next_step(&self, id: &str, token: Option<&str>) -> Result<NextStep> {
        let handle = self.session(id, token)?;
        let session = handle.lock().expect("session poisoned");
        let payload = session.next_step(&self.context(), self.now())?;
        Ok(NextStep {
            v: API_VERSION,
            id: id.to_string(),
            payload,
        })
    }

    /// Apply an answer on a copy, persist it, then commit; a storage
    /// failure leaves the session as it was.
    pub fn submit_answer(&self, id: &str, token: Option<&str>, answer: &AnswerRequest) -> Result<Ack> {
        let handle = self.session(id, token)?;
        let mut session = handle.lock().expect("session poisoned");
        let now = self.now();
        let mut updated = session.clone();
        let changed = updated.submit(&self.context(), answer, now)?;
        if changed {
            self.store.persist(EventKind::Answered, &updated, now)?;
            *session = updated;
        }
        Ok(Ack {
            v: API_VERSION,
            id: id.to_string(),
            step: answer.step,
            next_step: session.step,
            status: session.status_at(now),
            duplicate: !changed,
        })
    }

    pub fn status(&self, id: &str, token: Option<&str>) -> Result<StatusReport> {
        let handle = self.session(id, token)?;
        let s = handle.lock().expect("session poisoned");
        Ok(StatusReport {
            v: API_VERSION,
            id: id.to_string(),
            status: s.status_at(self.now()),
            step: s.step,
            total_steps: total_steps(s.k()),
            created_at_ms: s.record.created_at_ms,
            expires_at_ms: s.expires_at_ms,
            completed_at_ms: s.record.completed_at_ms,
        })
    }

    /// Every session as one JSONL line, oldest first.
    pub fn export(&self, token: Option<&str>) -> Result<String> {
        let expected = self
            .options
            .admin_token
            .as_deref()
            .ok_or_else(|| ServiceError::Forbidden("export is disabled: no admin token configured".into()))?;
        if token != Some(expected) {
            return Err(ServiceError::Unauthorized);
        }
        let now = self.now();
        let records: Vec<_> = self.store.all().iter().map(|s| s.record_at(now)).collect();
        Ok(to_jsonl(&records)?)
    }

    pub fn health(&self) -> Health {
        Health {
            v: API_VERSION,
            status: "ok".into(),
            sessions: self.store.len(),
            alternatives: self.lookup.alternatives().len(),
            k: self.k(),
        }
    }
}

fn random_hex<R: RngCore + ?Sized>(rng: &mut R, bytes: usize) -> String {
    let mut buf = vec![0u8; bytes];
    rng.fill_bytes(&mut buf);
    hex::encode(buf)
}

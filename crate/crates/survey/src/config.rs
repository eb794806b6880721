use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

pub const CONFIG_VERSION: u32 = 1;

/// Cognitive-reflection questions asked between the two query blocks.
pub fn default_crt_questions() -> Vec<String> {
    [
        "A bat and a ball cost $1.10 in total. The bat costs $1.00 more than the ball. \
         How much does the ball cost?",
        "If it takes 5 machines 5 minutes to make 5 widgets, how long would it take \
         100 machines to make 100 widgets?",
        "In a lake, there is a patch of lily pads. Every day, the patch doubles in size. \
         If it takes 48 days for the patch to cover the entire lake, how long would it \
         take for the patch to cover half of the lake?",
    ]
    .map(String::from)
    .to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub v: u32,
    /// Alternatives JSON written by `policies generate`.
    pub alternatives: PathBuf,
    /// Optional precomputed lookup table; missing paths are solved on demand.
    pub lookup_table: Option<PathBuf>,
    #[serde(rename = "K")]
    pub k: usize,
    pub sigma: f64,
    pub p: f64,
    pub expiry_minutes: u64,
    pub bind: String,
    /// Append-only event log; sessions live only in memory when unset.
    pub event_log: Option<PathBuf>,
    /// Rewrite the log as one snapshot per session after this many events.
    pub compact_every: usize,
    /// Bearer token for `GET /export`; export is disabled when unset.
    pub admin_token: Option<String>,
    /// Reject a second session carrying the same external worker id.
    pub unique_worker_ids: bool,
    /// Seed for session randomization; drawn from entropy when unset.
    pub seed: Option<u64>,
    pub crt_questions: Vec<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            v: CONFIG_VERSION,
            alternatives: PathBuf::from("alternatives.json"),
            lookup_table: None,
            k: 10,
            sigma: 0.1,
            p: 0.9,
            expiry_minutes: 120,
            bind: "127.0.0.1:8080".into(),
            event_log: None,
            compact_every: 1000,
            admin_token: None,
            unique_worker_ids: false,
            seed: None,
            crt_questions: default_crt_questions(),
        }
    }
}

impl ServiceConfig {
    /// Read a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::BadRequest(format!("{}: {e}", path.display())))?;
        let mut config: ServiceConfig = serde_json::from_str(&text)
            .map_err(|e| ServiceError::BadRequest(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut config.alternatives);
        config.lookup_table.as_mut().map(resolve);
        config.event_log.as_mut().map(resolve);
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ServiceError::BadRequest(m));
        if self.v != CONFIG_VERSION {
            return bad(format!("unsupported config version {}", self.v));
        }
        if self.k == 0 {
            return bad("K must be at least 1".into());
        }
        if self.crt_questions.len() != crate::session::CRT_STEPS {
            return bad(format!(
                "expected {} CRT questions, found {}",
                crate::session::CRT_STEPS,
                self.crt_questions.len()
            ));
        }
        if self.expiry_minutes == 0 {
            return bad("expiry_minutes must be positive".into());
        }
        if self.compact_every == 0 {
            return bad("compact_every must be positive".into());
        }
        Ok(())
    }
}

//! Questionnaire service: each respondent answers `K` robust and `K`
//! random pairwise queries (block order randomized), three reflection
//! questions in between, and a final comparison of the two resulting
//! recommendations.
//!
//! [`Service`] holds the state machine and storage; [`router`] exposes it
//! over HTTP:
//!
//! | method | path                     | auth          |
//! |--------|--------------------------|---------------|
//! | POST   | `/sessions`              | none          |
//! | GET    | `/sessions/{id}/next`    | session token |
//! | POST   | `/sessions/{id}/answers` | session token |
//! | GET    | `/sessions/{id}/status`  | session token |
//! | GET    | `/export`                | admin token   |
//! | GET    | `/healthz`               | none          |

mod api;
mod cards;
mod config;
mod error;
mod service;
mod session;
mod store;

pub use api::{router, serve};
pub use cards::{CardFeature, CardOutcomes, Catalog, PolicyCard};
pub use config::{default_crt_questions, ServiceConfig, CONFIG_VERSION};
pub use error::{ErrorBody, Result, ServiceError};
pub use service::{
    system_clock, Ack, Clock, CreateSessionRequest, Created, Health, NextStep, Service, ServiceOptions, StatusReport,
};
pub use session::{
    total_steps, AnswerRequest, Choice, Context, FinalOffer, Session, StepKind, StepPayload, CRT_STEPS,
    SESSION_STATE_VERSION,
};
pub use store::{Event, EventKind, EventLog, SessionStore, EVENT_VERSION};

/// Version carried in every request and response body.
pub const API_VERSION: u32 = 1;

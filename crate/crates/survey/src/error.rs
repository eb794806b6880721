use serde::Serialize;

/// Failures surfaced to HTTP clients; each maps to one status code.
#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}")]
    BadRequest(String),
    #[error("missing or invalid bearer token")]
    Unauthorized,
    #[error("{0}")]
    Forbidden(String),
    #[error("no session {0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Gone(String),
    #[error("storage failure: {0}")]
    Storage(String),
    #[error(transparent)]
    Engine(#[from] robust_elicit::Error),
}

impl ServiceError {
    pub fn status(&self) -> u16 {
        match self {
            ServiceError::BadRequest(_) => 400,
            ServiceError::Unauthorized => 401,
            ServiceError::Forbidden(_) => 403,
            ServiceError::NotFound(_) => 404,
            ServiceError::Conflict(_) => 409,
            ServiceError::Gone(_) => 410,
            ServiceError::Storage(_) | ServiceError::Engine(_) => 500,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::BadRequest(_) => "bad-request",
            ServiceError::Unauthorized => "unauthorized",
            ServiceError::Forbidden(_) => "forbidden",
            ServiceError::NotFound(_) => "not-found",
            ServiceError::Conflict(_) => "conflict",
            ServiceError::Gone(_) => "gone",
            ServiceError::Storage(_) => "storage",
            ServiceError::Engine(_) => "engine",
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody {
            v: crate::API_VERSION,
            error: self.code(),
            message: self.to_string(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub v: u32,
    pub error: &'static str,
    pub message: String,
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

use std::fmt;

use serde::Serialize;

/// A non-fatal condition reported alongside a result. The CLI prints these to
/// stderr, one JSON object per line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Warning {
    pub code: &'static str,
    pub message: String,
}

impl Warning {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let line = serde_json::json!({ "level": "warning", "code": self.code, "message": self.message });
        write!(f, "{line}")
    }
}

//! Action server wire protocol: one JSON object per LF-terminated line.
//!
//! ```text
//! -> {"id":1,"action":"concat","args":["a","b"]}
//! <- {"id":1,"ok":true,"result":"ab"}
//! ```

use serde::{Deserialize, Serialize};

use crate::value::ContextValue;

pub const UNKNOWN_ACTION: &str = "unknown action";
pub const MALFORMED: &str = "malformed request";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Request {
    pub id: u64,
    pub action: String,
    pub args: Vec<ContextValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: u64,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<ContextValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Response {
    pub fn ok(id: u64, result: ContextValue) -> Self {
        Response {
            id,
            ok: true,
            result: Some(result),
            error: None,
        }
    }

    pub fn err(id: u64, error: impl Into<String>) -> Self {
        Response {
            id,
            ok: false,
            result: None,
            error: Some(error.into()),
        }
    }

    /// The response line including its trailing LF.
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("responses serialize");
        s.push('\n');
        s
    }
}

impl Request {
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("requests serialize");
        s.push('\n');
        s
    }
}

/// Parses one request line (without its LF). On failure returns the error
/// response to send: id 0 unless a numeric id could be recovered.
pub fn parse_request(line: &str) -> Result<Request, Response> {
    serde_json::from_str::<Request>(line).map_err(|_| {
        let id = serde_json::from_str::<serde_json::Value>(line)
            .ok()
            .and_then(|v| v.get("id").and_then(|i| i.as_u64()))
            .unwrap_or(0);
        Response::err(id, MALFORMED)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn response_field_order_is_fixed() {
        assert_eq!(
            Response::ok(1, "ab".into()).to_line(),
            "{\"id\":1,\"ok\":true,\"result\":\"ab\"}\n"
        );
        assert_eq!(
            Response::err(2, UNKNOWN_ACTION).to_line(),
            "{\"id\":2,\"ok\":false,\"error\":\"unknown action\"}\n"
        );
    }

    #[test]
    fn malformed_lines_recover_ids_when_possible() {
        assert_eq!(parse_request("{oops").unwrap_err().id, 0);
        assert_eq!(parse_request("{\"id\":7}").unwrap_err().id, 7);
        assert!(parse_request("{\"id\":1,\"action\":\"a\",\"args\":[]}").is_ok());
    }
}

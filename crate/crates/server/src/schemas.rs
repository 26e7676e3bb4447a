//! JSON Schemas (draft 2020-12) for every request and response body.

macro_rules! schemas {
    ($($name:literal),* $(,)?) => {
        /// Names accepted by [`get`].
        pub const NAMES: &[&str] = &[$($name),*];

        /// Schema document by name, e.g. `job_descriptor`.
        pub fn get(name: &str) -> Option<&'static str> {
            match name {
                $($name => Some(include_str!(concat!("../schemas/", $name, ".json"))),)*
                _ => None,
            }
        }
    };
}

schemas!(
    "backend_list",
    "calibration",
    "cancel_response",
    "error",
    "health",
    "job_descriptor",
    "job_results",
    "job_status",
    "reservation",
    "reservation_request",
    "session",
    "session_request",
    "submit_response",
    "worker_ack",
    "worker_registration",
);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_schema_parses_and_names_itself() {
        for name in NAMES {
            let doc: serde_json::Value = serde_json::from_str(get(name).unwrap()).unwrap();
            assert!(doc["$id"].as_str().unwrap().ends_with(&format!("/{name}.json")));
        }
        assert!(get("nope").is_none());
    }
}

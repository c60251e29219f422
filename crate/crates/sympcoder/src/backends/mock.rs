//! Deterministic mock backend with call instrumentation.

use super::{BackendError, ChatBackend, CompletionText, InferenceParams};
use crate::prompting::Prompt;
use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

enum Behavior {
    Fixed(String),
    ByPrompt(HashMap<String, String>),
    ByReport(HashMap<String, String>),
    Script(Mutex<std::collections::VecDeque<Result<String, BackendError>>>),
}

/// Scripted chat backend for tests. Tracks call counts and the maximum
/// number of in-flight requests so concurrency bounds are observable.
pub struct MockChatBackend {
    behavior: Behavior,
    delay: Option<Duration>,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
}

impl MockChatBackend {
    fn with_behavior(behavior: Behavior) -> Self {
        Self {
            behavior,
            delay: None,
            calls: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            max_in_flight: AtomicUsize::new(0),
        }
    }

    /// Always return the same text.
    pub fn fixed(text: impl Into<String>) -> Self {
        Self::with_behavior(Behavior::Fixed(text.into()))
    }

    /// Answer by exact prompt text.
    pub fn by_prompt(map: HashMap<String, String>) -> Self {
        Self::with_behavior(Behavior::ByPrompt(map))
    }

    /// Answer by the prompt's report id.
    pub fn by_report(map: HashMap<String, String>) -> Self {
        Self::with_behavior(Behavior::ByReport(map))
    }

    /// Consume scripted results in order.
    pub fn scripted(responses: Vec<Result<String, BackendError>>) -> Self {
        Self::with_behavior(Behavior::Script(Mutex::new(responses.into())))
    }

    /// Sleep this long inside each call, so overlapping calls are visible
    /// in `max_in_flight`.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn max_in_flight(&self) -> usize {
        self.max_in_flight.load(Ordering::SeqCst)
    }
}

impl ChatBackend for MockChatBackend {
    fn complete_text(
        &self,
        prompt: &Prompt,
        _params: &InferenceParams,
    ) -> Result<CompletionText, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let current = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_in_flight.fetch_max(current, Ordering::SeqCst);
        if let Some(delay) = self.delay {
            std::thread::sleep(delay);
        }
        let result = match &self.behavior {
            Behavior::Fixed(text) => Ok(text.clone()),
            Behavior::ByPrompt(map) => map.get(&prompt.text).cloned().ok_or_else(|| {
                BackendError::BadResponse(format!("no scripted answer for prompt of {}", prompt.report_id))
            }),
            Behavior::ByReport(map) => map.get(&prompt.report_id).cloned().ok_or_else(|| {
                BackendError::BadResponse(format!("no scripted answer for report {}", prompt.report_id))
            }),
            Behavior::Script(queue) => queue
                .lock()
                .expect("script lock poisoned")
                .pop_front()
                .unwrap_or_else(|| {
                    Err(BackendError::BadResponse("script exhausted".into()))
                }),
        };
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        result.map(|text| CompletionText {
            text,
            truncated: false,
            raw_body: None,
        })
    }

    fn name(&self) -> &str {
        "mock"
    }
}

//! JSON-lines solver telemetry.

use std::io::Write;

use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    NewtonIteration {
        level: Option<usize>,
        p: f64,
        iteration: usize,
        residual_norm: f64,
        increment_norm: f64,
        alpha: f64,
        halvings: usize,
        damped: bool,
        residual_after: f64,
        linear_residual: f64,
        linear_iterations: usize,
    },
    ContinuationStep {
        level: Option<usize>,
        p: f64,
        step: f64,
        converged: bool,
        iterations: usize,
        damping_events: usize,
    },
    Level {
        level: usize,
        n_total: usize,
        error: f64,
        eta: f64,
        newton_total: usize,
        wall_ms: f64,
    },
}

/// Optional sink for [`Event`]s. Write failures are logged once and then
/// the sink is dropped so that a full disk does not abort a study.
#[derive(Default)]
pub struct Telemetry {
    sink: Option<Box<dyn Write + Send>>,
    level: Option<usize>,
}

impl std::fmt::Debug for Telemetry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Telemetry").field("enabled", &self.sink.is_some()).field("level", &self.level).finish()
    }
}

impl Telemetry {
    pub fn disabled() -> Self {
        Telemetry::default()
    }

    pub fn to_writer(w: impl Write + Send + 'static) -> Self {
        Telemetry { sink: Some(Box::new(w)), level: None }
    }

    pub fn is_enabled(&self) -> bool {
        self.sink.is_some()
    }

    /// Level index stamped on subsequent solver events.
    pub fn set_level(&mut self, level: Option<usize>) {
        self.level = level;
    }

    pub fn level(&self) -> Option<usize> {
        self.level
    }

    pub fn emit(&mut self, event: &Event) {
        let Some(w) = self.sink.as_mut() else { return };
        let res = serde_json::to_writer(&mut *w, event).map_err(std::io::Error::from).and_then(|_| w.write_all(b"\n"));
        if let Err(e) = res {
            log::warn!("telemetry disabled after write error: {e}");
            self.sink = None;
        }
    }

    pub fn flush(&mut self) {
        if let Some(w) = self.sink.as_mut() {
            if let Err(e) = w.flush() {
                log::warn!("telemetry flush failed: {e}");
            }
        }
    }
}

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock};

use futures::Stream;
use rehab_core::session::{FeedbackEvent, TimedEvent};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::broadcast;

/// One entry of the event stream. Feedback events carry the engine's
/// `kind`/`detail`; status events (`device_connected`, `snapshot`, ...) use
/// the same shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireEvent {
    pub seq: u64,
    pub t_us: u64,
    pub kind: String,
    #[serde(default)]
    pub detail: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cue: Option<String>,
}

impl WireEvent {
    /// The feedback event this entry carries, if it is one.
    pub fn feedback(&self) -> Option<TimedEvent> {
        let mut obj = serde_json::Map::new();
        obj.insert("kind".into(), Value::String(self.kind.clone()));
        if !self.detail.is_null() {
            obj.insert("detail".into(), self.detail.clone());
        }
        let event: FeedbackEvent = serde_json::from_value(Value::Object(obj)).ok()?;
        Some(TimedEvent { t_us: self.t_us, event })
    }
}

/// Append-only event history plus a wake-up channel for live subscribers.
/// The engine is the only writer.
#[derive(Debug)]
pub struct EventHub {
    history: RwLock<Vec<WireEvent>>,
    notify: broadcast::Sender<u64>,
    closed: AtomicBool,
}

impl Default for EventHub {
    fn default() -> Self {
        Self { history: RwLock::new(Vec::new()), notify: broadcast::channel(1024).0, closed: AtomicBool::new(false) }
    }
}

impl EventHub {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn publish(&self, t_us: u64, kind: &str, detail: Value, cue: Option<&str>) -> WireEvent {
        let ev = {
            let mut h = self.history.write().expect("hub lock");
            let ev = WireEvent {
                seq: h.len() as u64 + 1,
                t_us,
                kind: kind.to_string(),
                detail,
                cue: cue.map(str::to_string),
            };
            h.push(ev.clone());
            ev
        };
        let _ = self.notify.send(ev.seq);
        ev
    }

    pub fn publish_feedback(&self, e: &TimedEvent) -> WireEvent {
        let v = serde_json::to_value(e.event).expect("feedback serializes");
        let detail = v.get("detail").cloned().unwrap_or(Value::Null);
        self.publish(e.t_us, e.event.kind(), detail, e.event.cue())
    }

    /// Ends every live subscription once it has caught up.
    pub fn close(&self) {
        self.closed.store(true, Ordering::SeqCst);
        let _ = self.notify.send(0);
    }

    pub fn get(&self, seq: u64) -> Option<WireEvent> {
        let idx = usize::try_from(seq.checked_sub(1)?).ok()?;
        self.history.read().expect("hub lock").get(idx).cloned()
    }

    pub fn last_seq(&self) -> u64 {
        self.history.read().expect("hub lock").len() as u64
    }

    /// Everything after `after`.
    pub fn since(&self, after: u64) -> Vec<WireEvent> {
        let h = self.history.read().expect("hub lock");
        h.get(usize::try_from(after).unwrap_or(usize::MAX).min(h.len())..).unwrap_or_default().to_vec()
    }

    /// Events with `seq > after`, first from history and then live, in
    /// order and without gaps. Ends when the hub is closed or dropped.
    pub fn subscribe(self: &Arc<Self>, after: u64) -> impl Stream<Item = WireEvent> + Send + 'static {
        // subscribe before reading history so nothing published in between is missed
        let rx = self.notify.subscribe();
        let weak = Arc::downgrade(self);
        futures::stream::unfold((weak, after + 1, rx), |(weak, next, mut rx)| async move {
            loop {
                let hub = weak.upgrade()?;
                if let Some(ev) = hub.get(next) {
                    return Some((ev, (weak, next + 1, rx)));
                }
                if hub.closed.load(Ordering::SeqCst) {
                    return None;
                }
                drop(hub);
                match rx.recv().await {
                    Ok(_) | Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(broadcast::error::RecvError::Closed) => return None,
                }
            }
        })
    }
}

//! HTTP service that walks participants through a planned session and logs
//! their click responses.
//!
//! | Method | Path | |
//! |---|---|---|
//! | POST | `/session` | create a session, optional body `{"seed": u64}` |
//! | GET | `/session/{id}/next` | descriptor of the trial at the cursor |
//! | POST | `/session/{id}/response` | `{trial_index, x, y, rt_ms}` |
//! | GET | `/export?excluded=false` | response log as NDJSON |
//!
//! Every accepted response is appended to the [`Storage`] log (and synced)
//! before it is acknowledged; on startup the log is replayed.

mod api;
mod session;
mod store;

pub use api::{router, serve, AppState};
pub use session::{
    Ack, Feedback, MarkPayload, Phase, Progress, Session, SessionError, StimulusPayload, Timing,
    TrialDescriptor, TrialKind, ENGAGEMENT_FAIL_LIMIT, TIMING,
};
pub use store::{FileStore, LogEntry, MemoryStore, SessionRecord, Storage, StoreError};

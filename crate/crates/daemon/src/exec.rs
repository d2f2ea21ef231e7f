//! What happens to an approved command.

use privocracy_core::ElectionId;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    pub command: String,
    pub status: i32,
    pub output: String,
    /// True when nothing actually ran on the host.
    pub simulated: bool,
}

/// Runs approved commands. Deployments that really execute replace the
/// default [`ShimExecutor`].
pub trait Executor: Send {
    fn execute(&mut self, election: ElectionId, issuer: &str, command: &str) -> ExecutionRecord;
}

/// Records the command without touching the host.
#[derive(Clone, Copy, Debug, Default)]
pub struct ShimExecutor;

impl Executor for ShimExecutor {
    fn execute(&mut self, election: ElectionId, issuer: &str, command: &str) -> ExecutionRecord {
        ExecutionRecord {
            command: command.into(),
            status: 0,
            output: format!("[shim] election {election} approved `{command}` for {issuer}; not executed"),
            simulated: true,
        }
    }
}

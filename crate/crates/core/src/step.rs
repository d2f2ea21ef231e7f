use crate::ids::ProcessId;

/// Where an outgoing message goes. `All` includes the sender itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    All,
    Node(ProcessId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetedMessage<M> {
    pub target: Target,
    pub message: M,
}

/// The effects of handling one input: messages to send and outputs produced.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step<M, O> {
    pub messages: Vec<TargetedMessage<M>>,
    pub output: Vec<O>,
}

impl<M, O> Default for Step<M, O> {
    fn default() -> Self {
        Step { messages: Vec::new(), output: Vec::new() }
    }
}

impl<M, O> Step<M, O> {
    pub fn send(&mut self, target: Target, message: M) {
        self.messages.push(TargetedMessage { target, message });
    }

    pub fn broadcast(&mut self, message: M) {
        self.send(Target::All, message);
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty() && self.output.is_empty()
    }

    pub fn extend(&mut self, other: Step<M, O>) {
        self.messages.extend(other.messages);
        self.output.extend(other.output);
    }

    /// Wraps messages and outputs of a sub-protocol into this layer's types.
    pub fn map<M2, O2>(self, fm: impl Fn(M) -> M2, fo: impl FnMut(O) -> O2) -> Step<M2, O2> {
        Step {
            messages: self
                .messages
                .into_iter()
                .map(|t| TargetedMessage { target: t.target, message: fm(t.message) })
                .collect(),
            output: self.output.into_iter().map(fo).collect(),
        }
    }
}

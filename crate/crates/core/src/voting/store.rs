use std::collections::BTreeMap;

use privocracy_crypto::{Group, Scalar};

use crate::ids::ElectionId;
use crate::wire::LoggedShare;

/// A voter's log of received shares, consulted only by audits.
pub trait ShareStore<G: Group>: Send {
    fn record(&mut self, election: ElectionId, entry: LoggedShare<G>);
    fn entries(&self, election: ElectionId) -> Vec<LoggedShare<G>>;

    fn footprint(&self) -> usize {
        0
    }
}

#[derive(Debug, Default)]
pub struct MemoryShareStore<G: Group> {
    log: BTreeMap<ElectionId, Vec<LoggedShare<G>>>,
}

impl<G: Group> MemoryShareStore<G> {
    pub fn new() -> Self {
        MemoryShareStore { log: BTreeMap::new() }
    }
}

impl<G: Group> ShareStore<G> for MemoryShareStore<G> {
    fn record(&mut self, election: ElectionId, entry: LoggedShare<G>) {
        self.log.entry(election).or_default().push(entry);
    }

    fn entries(&self, election: ElectionId) -> Vec<LoggedShare<G>> {
        self.log.get(&election).cloned().unwrap_or_default()
    }

    fn footprint(&self) -> usize {
        self.log
            .values()
            .map(|v| {
                v.iter()
                    .map(|e| 12 + 2 * G::Scalar::ENCODED_LEN + e.commitment.coeffs.len() * G::ELEMENT_LEN)
                    .sum::<usize>()
            })
            .sum()
    }
}

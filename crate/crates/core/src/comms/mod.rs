//! Two-strand communication between neighbouring towers: environmental
//! broadcasts and help requests.
//!
//! Everything sent at step `t` is queued and becomes readable only when
//! [`Inboxes::deliver`] runs for a later step. Broadcasts overwrite the
//! previous message from the same sender; help requests queue up (oldest
//! first, at most [`HELP_INBOX_CAPACITY`]) and expire after
//! [`HELP_REQUEST_TTL`] steps.

pub mod encoder;

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use encoder::{gnn_encode, EncoderCache, GraphEncoder, EDGE_HIDDEN, EMBEDDING_WIDTH, OWN_WIDTH};

use crate::towers::{LocalObservation, NeighborGraph};

pub const HELP_INBOX_CAPACITY: usize = 3;
/// Steps a delivered request stays in an inbox.
pub const HELP_REQUEST_TTL: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BroadcastMessage {
    pub observation: LocalObservation,
    pub sender: usize,
    pub sent_at: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HelpRequest {
    pub id: u64,
    pub sender: usize,
    pub sent_at: u32,
}

/// What has to be true of the requester for a response to earn the bonus.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HelpCondition {
    /// The requester observes a fire when the support arrives.
    #[default]
    ObservedFire,
    /// Any accepted response counts.
    Always,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inboxes {
    /// Per tower, the towers it hears broadcasts from (its neighbour list).
    sources: Vec<Vec<usize>>,
    broadcast: Vec<Vec<Option<BroadcastMessage>>>,
    pending_broadcast: Vec<BroadcastMessage>,
    help: Vec<Vec<HelpRequest>>,
    pending_help: Vec<(usize, HelpRequest)>,
    first_responder: BTreeMap<u64, usize>,
    next_id: u64,
}

impl Inboxes {
    pub fn new(graph: &NeighborGraph) -> Self {
        let n = graph.len();
        Self {
            sources: graph.edges.clone(),
            broadcast: graph.edges.iter().map(|e| vec![None; e.len()]).collect(),
            pending_broadcast: Vec::new(),
            help: vec![Vec::new(); n],
            pending_help: Vec::new(),
            first_responder: BTreeMap::new(),
            next_id: 0,
        }
    }

    /// Makes everything sent before `t` readable and drops expired requests.
    pub fn deliver(&mut self, t: u32) {
        let mut keep = Vec::new();
        for msg in self.pending_broadcast.drain(..) {
            if msg.sent_at >= t {
                keep.push(msg);
                continue;
            }
            for (u, sources) in self.sources.iter().enumerate() {
                for (slot, &v) in sources.iter().enumerate() {
                    if v == msg.sender {
                        self.broadcast[u][slot] = Some(msg);
                    }
                }
            }
        }
        self.pending_broadcast = keep;

        let mut keep = Vec::new();
        for (receiver, req) in self.pending_help.drain(..) {
            if req.sent_at >= t {
                keep.push((receiver, req));
                continue;
            }
            if self.first_responder.contains_key(&req.id) {
                continue;
            }
            let inbox = &mut self.help[receiver];
            inbox.push(req);
            if inbox.len() > HELP_INBOX_CAPACITY {
                inbox.remove(0);
            }
        }
        self.pending_help = keep;

        for inbox in &mut self.help {
            inbox.retain(|r| t - r.sent_at <= HELP_REQUEST_TTL);
        }
    }

    /// Queues every tower's observation at `t` for its listeners.
    pub fn broadcast_step(&mut self, observations: &[LocalObservation], t: u32) {
        for (sender, obs) in observations.iter().enumerate() {
            self.pending_broadcast.push(BroadcastMessage {
                observation: *obs,
                sender,
                sent_at: t,
            });
        }
    }

    /// Queues a help request from `sender` to all of its neighbours.
    pub fn send_help_request(&mut self, graph: &NeighborGraph, sender: usize, t: u32) -> HelpRequest {
        let req = HelpRequest {
            id: self.next_id,
            sender,
            sent_at: t,
        };
        self.next_id += 1;
        for &u in graph.neighbors(sender) {
            self.pending_help.push((u, req));
        }
        req
    }

    /// Latest delivered broadcast per neighbour slot.
    pub fn broadcasts(&self, tower: usize) -> &[Option<BroadcastMessage>] {
        &self.broadcast[tower]
    }

    /// Delivered, unanswered requests, oldest first.
    pub fn help_inbox(&self, tower: usize) -> &[HelpRequest] {
        &self.help[tower]
    }

    pub fn oldest_request(&self, tower: usize) -> Option<HelpRequest> {
        self.help[tower].first().copied()
    }

    pub fn remove_request(&mut self, tower: usize, id: u64) {
        self.help[tower].retain(|r| r.id != id);
    }

    pub fn first_responder(&self, request: u64) -> Option<usize> {
        self.first_responder.get(&request).copied()
    }

    /// Records `responder` as the first helper of `request` if it may be:
    /// it must be one of the requester's neighbours, act no earlier than
    /// the step after the request, be first, and `helps` must hold.
    /// A recorded request disappears from every inbox.
    pub fn register_response(
        &mut self,
        graph: &NeighborGraph,
        request: &HelpRequest,
        responder: usize,
        t: u32,
        helps: bool,
    ) -> bool {
        if !graph.is_neighbor(request.sender, responder)
            || t < request.sent_at + 1
            || self.first_responder.contains_key(&request.id)
            || !helps
        {
            return false;
        }
        self.first_responder.insert(request.id, responder);
        for inbox in &mut self.help {
            inbox.retain(|r| r.id != request.id);
        }
        true
    }
}

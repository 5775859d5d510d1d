//! Message transports: how pushed gossip reaches its recipient.
//!
//! The protocol only needs a sink that accepts pushes without blocking and a
//! non-blocking pop from the worker's own inbox. Two realizations:
//! [`InstantNetwork`] backs the deterministic simulation with inspectable
//! in-memory queues, and [`ChannelTransport`] backs threaded runs with mpsc
//! channels. Both are reliable and FIFO per sender.

use std::collections::VecDeque;
use std::sync::mpsc::{channel, Receiver, Sender};

use crate::protocol::GossipMessage;

/// One worker's view of the messaging fabric.
pub trait GossipTransport {
    /// Enqueues a message at `peer`'s inbox; never blocks. Returns false
    /// only if delivery is impossible (receiver gone), in which case the
    /// message was not sent and the caller must roll back its side effects.
    fn push_to(&mut self, peer: usize, msg: GossipMessage) -> bool;

    /// Pops the oldest message from this worker's own inbox, if any.
    fn try_pop(&mut self) -> Option<GossipMessage>;
}

/// All workers' inboxes in one place, delivering instantly. Because the
/// queues are inspectable, conserved quantities can be checked over workers
/// *and* in-flight messages at any point — the whole reason simulation mode
/// exists.
#[derive(Debug, Default)]
pub struct InstantNetwork {
    queues: Vec<VecDeque<GossipMessage>>,
}

impl InstantNetwork {
    pub fn new(workers: usize) -> Self {
        InstantNetwork {
            queues: (0..workers).map(|_| VecDeque::new()).collect(),
        }
    }

    /// Every undelivered message, across all inboxes.
    pub fn in_flight(&self) -> impl Iterator<Item = &GossipMessage> {
        self.queues.iter().flat_map(|q| q.iter())
    }

    pub fn queued(&self) -> usize {
        self.queues.iter().map(|q| q.len()).sum()
    }

    pub fn queued_at(&self, worker: usize) -> usize {
        self.queues[worker].len()
    }

    /// Worker `me`'s handle on the network.
    pub fn view(&mut self, me: usize) -> InstantView<'_> {
        InstantView { net: self, me }
    }
}

/// A borrow of the [`InstantNetwork`] scoped to one worker.
pub struct InstantView<'a> {
    net: &'a mut InstantNetwork,
    me: usize,
}

impl GossipTransport for InstantView<'_> {
    fn push_to(&mut self, peer: usize, msg: GossipMessage) -> bool {
        self.net.queues[peer].push_back(msg);
        true
    }

    fn try_pop(&mut self) -> Option<GossipMessage> {
        self.net.queues[self.me].pop_front()
    }
}

/// Channel-backed transport for threaded runs: each worker owns the receive
/// end of its inbox plus cloned senders to every peer. Sends never block
/// (unbounded queues); pops never block (`try_recv`).
pub struct ChannelTransport {
    me: usize,
    rx: Receiver<GossipMessage>,
    txs: Vec<Sender<GossipMessage>>,
}

impl ChannelTransport {
    pub fn me(&self) -> usize {
        self.me
    }
}

/// Builds the full mesh: one transport per worker, each able to reach all
/// the others.
pub fn channel_mesh(workers: usize) -> Vec<ChannelTransport> {
    let mut txs = Vec::with_capacity(workers);
    let mut rxs = Vec::with_capacity(workers);
    for _ in 0..workers {
        let (tx, rx) = channel();
        txs.push(tx);
        rxs.push(rx);
    }
    rxs.into_iter()
        .enumerate()
        .map(|(me, rx)| ChannelTransport {
            me,
            rx,
            txs: txs.clone(),
        })
        .collect()
}

impl GossipTransport for ChannelTransport {
    fn push_to(&mut self, peer: usize, msg: GossipMessage) -> bool {
        self.txs[peer].send(msg).is_ok()
    }

    fn try_pop(&mut self) -> Option<GossipMessage> {
        self.rx.try_recv().ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::ParamVector;

    fn msg(v: f64, alpha: f64) -> GossipMessage {
        GossipMessage::new(ParamVector::from_vec(vec![v]).unwrap(), alpha)
    }

    #[test]
    fn instant_network_is_fifo() {
        let mut net = InstantNetwork::new(2);
        net.view(0).push_to(1, msg(1.0, 0.5));
        net.view(0).push_to(1, msg(2.0, 0.25));
        let mut view = net.view(1);
        assert_eq!(view.try_pop().unwrap().x().values(), &[1.0]);
        assert_eq!(view.try_pop().unwrap().x().values(), &[2.0]);
        assert!(view.try_pop().is_none());
    }

    #[test]
    fn instant_network_tracks_in_flight() {
        let mut net = InstantNetwork::new(3);
        net.view(0).push_to(1, msg(1.0, 0.5));
        net.view(2).push_to(1, msg(2.0, 0.25));
        assert_eq!(net.queued(), 2);
        assert_eq!(net.queued_at(1), 2);
        let total: f64 = net.in_flight().map(|m| m.alpha()).sum();
        assert_eq!(total, 0.75);
    }

    #[test]
    fn channels_deliver_per_sender_in_order() {
        let mut mesh = channel_mesh(2);
        let mut b = mesh.pop().unwrap();
        let mut a = mesh.pop().unwrap();
        assert!(a.push_to(1, msg(1.0, 0.5)));
        assert!(a.push_to(1, msg(2.0, 0.25)));
        assert_eq!(b.try_pop().unwrap().x().values(), &[1.0]);
        assert_eq!(b.try_pop().unwrap().x().values(), &[2.0]);
        assert!(b.try_pop().is_none());
    }

    #[test]
    fn send_to_dropped_receiver_reports_failure() {
        let mut mesh = channel_mesh(2);
        let dropped = mesh.pop().unwrap();
        let mut a = mesh.pop().unwrap();
        drop(dropped);
        assert!(!a.push_to(1, msg(1.0, 0.5)));
    }
}

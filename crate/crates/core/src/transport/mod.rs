//! Halo exchange between ranks.
//!
//! Every rank owns an [`Endpoint`]: one outbox per distinct neighbour rank and
//! one inbox per distinct neighbour rank. Links between ranks on the same
//! device always use bounded in-process channels; links between devices use
//! channels under the in-process backend and TCP under the TCP backend.
//!
//! An exchange fills the whole ghost frame of each listed field: columns first
//! (left/right), then rows including the freshly filled ghost columns
//! (top/bottom), which also populates the corners.

pub mod fabric;
pub mod tcp;
pub mod wire;

use std::collections::HashMap;
use std::sync::mpsc::{sync_channel, Receiver, RecvTimeoutError, SyncSender};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::topology::{link_class, DeviceAssignment, LinkClass, RankTopology};

use self::fabric::{FabricMode, FabricModel, LinkStats};
use self::wire::{FieldId, HaloMessage, Phase, Side};

/// Messages buffered per link before a sender blocks.
pub const CHANNEL_CAPACITY: usize = 64;

const RECV_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    InProcess,
    Tcp,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Backend::InProcess => "inproc",
            Backend::Tcp => "tcp",
        })
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inproc" | "inprocess" => Ok(Backend::InProcess),
            "tcp" => Ok(Backend::Tcp),
            other => Err(Error::Config(format!("unknown backend {other:?}"))),
        }
    }
}

/// How an outbox delivers its messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Channel,
    Tcp,
}

pub(crate) type Inbox = Receiver<Result<HaloMessage>>;
pub(crate) type InboxSender = SyncSender<Result<HaloMessage>>;

pub(crate) trait Outbox: Send {
    fn send(&mut self, msg: HaloMessage) -> Result<()>;
    fn route(&self) -> Route;
}

struct ChannelOutbox {
    tx: InboxSender,
}

impl Outbox for ChannelOutbox {
    fn send(&mut self, msg: HaloMessage) -> Result<()> {
        let (src, dst) = (msg.src as usize, msg.dst as usize);
        self.tx.send(Ok(msg)).map_err(|_| Error::Transport {
            src,
            dst,
            source: std::io::Error::new(std::io::ErrorKind::BrokenPipe, "receiver gone"),
        })
    }

    fn route(&self) -> Route {
        Route::Channel
    }
}

type Key = (usize, u32, Phase, Side, FieldId);

/// One rank's view of the communication fabric.
pub struct Endpoint {
    rank: usize,
    topology: Arc<RankTopology>,
    classes: HashMap<usize, LinkClass>,
    outboxes: HashMap<usize, Box<dyn Outbox>>,
    inboxes: HashMap<usize, Inbox>,
    stash: HashMap<Key, Vec<f64>>,
    fabric: FabricModel,
    stats: LinkStats,
    wait_seconds: f64,
}

impl std::fmt::Debug for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Endpoint")
            .field("rank", &self.rank)
            .field("peers", &self.outboxes.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Endpoint {
    pub(crate) fn new(
        rank: usize,
        topology: Arc<RankTopology>,
        assignment: &DeviceAssignment,
        fabric: FabricModel,
    ) -> Self {
        let classes = topology
            .peers(rank)
            .into_iter()
            .map(|q| (q, link_class(assignment, rank, q)))
            .collect();
        Endpoint {
            rank,
            topology,
            classes,
            outboxes: HashMap::new(),
            inboxes: HashMap::new(),
            stash: HashMap::new(),
            fabric,
            stats: LinkStats::default(),
            wait_seconds: 0.0,
        }
    }

    pub(crate) fn attach(&mut self, peer: usize, outbox: Box<dyn Outbox>, inbox: Inbox) {
        self.outboxes.insert(peer, outbox);
        self.inboxes.insert(peer, inbox);
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn topology(&self) -> &RankTopology {
        &self.topology
    }

    pub fn stats(&self) -> &LinkStats {
        &self.stats
    }

    pub fn take_stats(&mut self) -> LinkStats {
        std::mem::take(&mut self.stats)
    }

    /// Seconds spent blocked waiting for incoming halo lines.
    pub fn wait_seconds(&self) -> f64 {
        self.wait_seconds
    }

    pub fn route_to(&self, peer: usize) -> Option<Route> {
        self.outboxes.get(&peer).map(|o| o.route())
    }

    pub fn class_to(&self, peer: usize) -> Option<LinkClass> {
        self.classes.get(&peer).copied()
    }

    /// Sends one ghost line to `dst`, filling its `side` ghost.
    pub fn send(
        &mut self,
        dst: usize,
        step: u32,
        phase: Phase,
        side: Side,
        field: FieldId,
        payload: Vec<f64>,
    ) -> Result<()> {
        let class = self.classes[&dst];
        let len = payload.len();
        let msg = HaloMessage {
            src: self.rank as u32,
            dst: dst as u32,
            step,
            phase,
            side,
            field,
            payload,
        };
        let modeled = self
            .fabric
            .charge(self.fabric.class_for(class), msg.encoded_len());
        let start = Instant::now();
        if self.fabric.mode == FabricMode::Delay && modeled > 0.0 {
            std::thread::sleep(Duration::from_secs_f64(modeled));
        }
        self.outboxes
            .get_mut(&dst)
            .ok_or_else(|| Error::Protocol {
                src: self.rank,
                dst,
                detail: "no link to this rank".into(),
            })?
            .send(msg)?;
        let seconds = start.elapsed().as_secs_f64();
        self.stats
            .record(self.rank, dst, class, len, seconds, modeled);
        Ok(())
    }

    /// Receives the ghost line for `(step, phase, side, field)` from `src`.
    /// Lines for later exchanges that arrive early are held back; lines from
    /// earlier exchanges, or repeats, are protocol errors.
    pub fn recv(
        &mut self,
        src: usize,
        step: u32,
        phase: Phase,
        side: Side,
        field: FieldId,
    ) -> Result<Vec<f64>> {
        let want: Key = (src, step, phase, side, field);
        if let Some(payload) = self.stash.remove(&want) {
            return Ok(payload);
        }
        let start = Instant::now();
        let me = self.rank;
        let inbox = self.inboxes.get(&src).ok_or_else(|| Error::Protocol {
            src,
            dst: me,
            detail: "no link from this rank".into(),
        })?;
        let result = loop {
            let msg = match inbox.recv_timeout(RECV_TIMEOUT) {
                Ok(msg) => msg?,
                Err(RecvTimeoutError::Disconnected) => {
                    break Err(Error::Disconnected {
                        src,
                        dst: me,
                        step,
                        phase,
                        side,
                    })
                }
                Err(RecvTimeoutError::Timeout) => {
                    break Err(Error::Protocol {
                        src,
                        dst: me,
                        detail: format!(
                            "timed out waiting for {phase:?}/{side:?}/{field:?} at step {step}"
                        ),
                    })
                }
            };
            if msg.src as usize != src || msg.dst as usize != me {
                break Err(Error::Protocol {
                    src,
                    dst: me,
                    detail: format!("misrouted message {} -> {}", msg.src, msg.dst),
                });
            }
            if (msg.step, msg.phase) < (step, phase) {
                break Err(Error::Protocol {
                    src,
                    dst: me,
                    detail: format!(
                        "desynchronized: got step {} {:?} while at step {step} {phase:?}",
                        msg.step, msg.phase
                    ),
                });
            }
            let key: Key = (src, msg.step, msg.phase, msg.side, msg.field);
            if key == want {
                break Ok(msg.payload);
            }
            if self.stash.insert(key, msg.payload).is_some() {
                break Err(Error::Protocol {
                    src,
                    dst: me,
                    detail: format!(
                        "duplicate {:?}/{:?}/{:?} at step {}",
                        key.2, key.3, key.4, key.1
                    ),
                });
            }
        };
        self.wait_seconds += start.elapsed().as_secs_f64();
        result
    }

    /// Fills the ghost frames of `fields` from the neighbouring blocks.
    pub fn exchange(
        &mut self,
        step: u32,
        phase: Phase,
        fields: &mut [(FieldId, &mut Field)],
    ) -> Result<()> {
        let nb = self.topology.neighbors[self.rank];
        let me = self.rank;

        // x direction: ghost columns over the owned rows
        if nb.left == me {
            for (_, f) in fields.iter_mut() {
                let (nx, ny) = (f.extent().width(), f.extent().height());
                let right_edge = f.column(nx, 1..=ny);
                let left_edge = f.column(1, 1..=ny);
                f.set_column(0, 1, &right_edge);
                f.set_column(nx + 1, 1, &left_edge);
            }
        } else {
            for (id, f) in fields.iter() {
                let (nx, ny) = (f.extent().width(), f.extent().height());
                self.send(nb.left, step, phase, Side::Right, *id, f.column(1, 1..=ny))?;
                self.send(nb.right, step, phase, Side::Left, *id, f.column(nx, 1..=ny))?;
            }
            for (id, f) in fields.iter_mut() {
                let (nx, ny) = (f.extent().width(), f.extent().height());
                let left = self.recv(nb.left, step, phase, Side::Left, *id)?;
                self.check_len(nb.left, &left, ny)?;
                f.set_column(0, 1, &left);
                let right = self.recv(nb.right, step, phase, Side::Right, *id)?;
                self.check_len(nb.right, &right, ny)?;
                f.set_column(nx + 1, 1, &right);
            }
        }

        // y direction: full frame rows, ghost columns included
        if nb.bottom == me {
            for (_, f) in fields.iter_mut() {
                let ny = f.extent().height();
                let top_edge = f.row(ny).to_vec();
                let bottom_edge = f.row(1).to_vec();
                f.set_row(0, &top_edge);
                f.set_row(ny + 1, &bottom_edge);
            }
        } else {
            for (id, f) in fields.iter() {
                let ny = f.extent().height();
                self.send(nb.top, step, phase, Side::Bottom, *id, f.row(ny).to_vec())?;
                self.send(nb.bottom, step, phase, Side::Top, *id, f.row(1).to_vec())?;
            }
            for (id, f) in fields.iter_mut() {
                let (width, ny) = (f.frame_width(), f.extent().height());
                let bottom = self.recv(nb.bottom, step, phase, Side::Bottom, *id)?;
                self.check_len(nb.bottom, &bottom, width)?;
                f.set_row(0, &bottom);
                let top = self.recv(nb.top, step, phase, Side::Top, *id)?;
                self.check_len(nb.top, &top, width)?;
                f.set_row(ny + 1, &top);
            }
        }
        Ok(())
    }

    fn check_len(&self, src: usize, payload: &[f64], expected: usize) -> Result<()> {
        if payload.len() != expected {
            return Err(Error::Protocol {
                src,
                dst: self.rank,
                detail: format!("payload of {} values, expected {expected}", payload.len()),
            });
        }
        Ok(())
    }
}

/// Synchronizes the ghost frames of `fields` for `phase` of `step`.
pub fn exchange_halos(
    endpoint: &mut Endpoint,
    step: u32,
    phase: Phase,
    fields: &mut [(FieldId, &mut Field)],
) -> Result<()> {
    endpoint.exchange(step, phase, fields)
}

pub(crate) fn channel_pair(
    outboxes: &mut [Endpoint],
    a: usize,
    b: usize,
    index: &HashMap<usize, usize>,
) {
    let (tx_ab, rx_ab) = sync_channel(CHANNEL_CAPACITY);
    let (tx_ba, rx_ba) = sync_channel(CHANNEL_CAPACITY);
    outboxes[index[&a]].attach(b, Box::new(ChannelOutbox { tx: tx_ab }), rx_ba);
    outboxes[index[&b]].attach(a, Box::new(ChannelOutbox { tx: tx_ba }), rx_ab);
}

/// Wires all ranks of one process together with in-process channels.
pub fn inprocess_endpoints(
    topology: &RankTopology,
    assignment: &DeviceAssignment,
    fabric: &FabricModel,
) -> Result<Vec<Endpoint>> {
    if topology.r != assignment.r() {
        return Err(Error::Placement(format!(
            "topology has {} ranks, assignment covers {}",
            topology.r,
            assignment.r()
        )));
    }
    let topo = Arc::new(topology.clone());
    let mut endpoints: Vec<Endpoint> = (0..topology.r)
        .map(|k| Endpoint::new(k, topo.clone(), assignment, fabric.clone()))
        .collect();
    let index: HashMap<usize, usize> = (0..topology.r).map(|k| (k, k)).collect();
    for a in 0..topology.r {
        for b in topology.peers(a) {
            if a < b {
                channel_pair(&mut endpoints, a, b, &index);
            }
        }
    }
    Ok(endpoints)
}

//! TCP links for inter-device halo traffic, rendezvous listing and the control
//! connection used to gather rank summaries on rank 0.
//!
//! One duplex connection per remote neighbour pair. The lower rank connects,
//! the higher rank accepts. Every connection starts with a 9-byte handshake:
//! kind (u8: 0 halo, 1 control), src rank (u32 LE), dst rank (u32 LE). Halo
//! connections then carry one encoded [`HaloMessage`] per frame; a reader
//! thread per connection decodes frames into the receiving rank's inbox.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{ErrorKind, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::Path;
use std::sync::mpsc::sync_channel;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::topology::{link_class, DeviceAssignment, LinkClass, RankTopology};

use super::fabric::FabricModel;
use super::wire::{self, HaloMessage, HEADER_LEN};
use super::{channel_pair, Endpoint, InboxSender, Outbox, Route, CHANNEL_CAPACITY};

/// Environment variable naming the rendezvous listing.
pub const RENDEZVOUS_ENV: &str = "SHWX_RENDEZVOUS";

const CONNECT_TIMEOUT: Duration = Duration::from_secs(60);
const KIND_HALO: u8 = 0;
const KIND_CONTROL: u8 = 1;

/// `rank host:port` per line; `#` starts a comment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rendezvous {
    pub addrs: BTreeMap<usize, String>,
}

impl Rendezvous {
    pub fn parse(text: &str) -> Result<Self> {
        let mut addrs = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(rank), Some(addr), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Config(format!(
                    "rendezvous line {}: expected `rank host:port`",
                    lineno + 1
                )));
            };
            let rank: usize = rank.parse().map_err(|_| {
                Error::Config(format!("rendezvous line {}: bad rank {rank:?}", lineno + 1))
            })?;
            if !addr.contains(':') {
                return Err(Error::Config(format!(
                    "rendezvous line {}: address {addr:?} lacks a port",
                    lineno + 1
                )));
            }
            if addrs.insert(rank, addr.to_string()).is_some() {
                return Err(Error::Config(format!("rendezvous lists rank {rank} twice")));
            }
        }
        Ok(Rendezvous { addrs })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn from_env() -> Result<Option<Self>> {
        match std::env::var_os(RENDEZVOUS_ENV) {
            Some(path) => Self::load(Path::new(&path)).map(Some),
            None => Ok(None),
        }
    }

    pub fn render(&self) -> String {
        self.addrs
            .iter()
            .map(|(rank, addr)| format!("{rank} {addr}\n"))
            .collect()
    }

    pub fn check_covers(&self, r: usize) -> Result<()> {
        for rank in 0..r {
            if !self.addrs.contains_key(&rank) {
                return Err(Error::Config(format!(
                    "rendezvous has no address for rank {rank}"
                )));
            }
        }
        Ok(())
    }

    fn resolve(&self, rank: usize) -> Result<SocketAddr> {
        let addr = &self.addrs[&rank];
        addr.to_socket_addrs()?
            .next()
            .ok_or_else(|| Error::Config(format!("cannot resolve {addr}")))
    }
}

struct TcpOutbox {
    stream: TcpStream,
    src: usize,
    dst: usize,
    buf: Vec<u8>,
}

impl Outbox for TcpOutbox {
    fn send(&mut self, msg: HaloMessage) -> Result<()> {
        self.buf = wire::encode(&msg);
        self.stream
            .write_all(&self.buf)
            .map_err(|source| Error::Transport {
                src: self.src,
                dst: self.dst,
                source,
            })
    }

    fn route(&self) -> Route {
        Route::Tcp
    }
}

fn handshake(kind: u8, src: usize, dst: usize) -> [u8; 9] {
    let mut h = [0u8; 9];
    h[0] = kind;
    h[1..5].copy_from_slice(&(src as u32).to_le_bytes());
    h[5..9].copy_from_slice(&(dst as u32).to_le_bytes());
    h
}

fn read_handshake(stream: &mut TcpStream) -> std::io::Result<(u8, usize, usize)> {
    let mut h = [0u8; 9];
    stream.read_exact(&mut h)?;
    let src = u32::from_le_bytes(h[1..5].try_into().unwrap()) as usize;
    let dst = u32::from_le_bytes(h[5..9].try_into().unwrap()) as usize;
    Ok((h[0], src, dst))
}

fn connect_with_retry(addr: SocketAddr, deadline: Instant) -> std::io::Result<TcpStream> {
    loop {
        match TcpStream::connect(addr) {
            Ok(s) => return Ok(s),
            Err(e) if Instant::now() < deadline => {
                log::debug!("connect {addr}: {e}, retrying");
                std::thread::sleep(Duration::from_millis(20));
            }
            Err(e) => return Err(e),
        }
    }
}

fn accept_before(listener: &TcpListener, deadline: Instant) -> std::io::Result<TcpStream> {
    listener.set_nonblocking(true)?;
    let result = loop {
        match listener.accept() {
            Ok((stream, _)) => break Ok(stream),
            Err(e) if e.kind() == ErrorKind::WouldBlock && Instant::now() < deadline => {
                std::thread::sleep(Duration::from_millis(5));
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => {
                break Err(std::io::Error::new(
                    ErrorKind::TimedOut,
                    "no peer connected in time",
                ))
            }
            Err(e) => break Err(e),
        }
    };
    listener.set_nonblocking(false)?;
    let stream = result?;
    stream.set_nonblocking(false)?;
    Ok(stream)
}

/// Decodes frames from `stream` into `inbox` until the peer closes.
fn spawn_reader(mut stream: TcpStream, src: usize, dst: usize, inbox: InboxSender) {
    std::thread::spawn(move || {
        let mut header = [0u8; HEADER_LEN];
        loop {
            match stream.read_exact(&mut header) {
                Ok(()) => {}
                Err(e) if e.kind() == ErrorKind::UnexpectedEof => return,
                Err(e) => {
                    let _ = inbox.send(Err(Error::Transport {
                        src,
                        dst,
                        source: e,
                    }));
                    return;
                }
            }
            let frame = wire::decode_header(&header).and_then(|h| {
                let mut payload = vec![0u8; h.payload_len()];
                stream
                    .read_exact(&mut payload)
                    .map_err(|source| Error::Transport { src, dst, source })?;
                wire::decode_payload(&h, &payload)
            });
            let failed = frame.is_err();
            if inbox.send(frame).is_err() || failed {
                return;
            }
        }
    });
}

/// Endpoints of the ranks hosted by this process plus rank 0's listener,
/// kept for the control connections when other processes take part.
#[derive(Debug)]
pub struct TcpSession {
    pub endpoints: Vec<Endpoint>,
    pub control: Option<TcpListener>,
    pub rendezvous: Rendezvous,
}

/// Wires the `hosted` ranks: channels for on-device links, TCP for links
/// between devices. Without a rendezvous listing every rank must be hosted
/// and listeners bind to ephemeral loopback ports.
pub fn connect(
    topology: &RankTopology,
    assignment: &DeviceAssignment,
    fabric: &FabricModel,
    hosted: &[usize],
    rendezvous: Option<&Rendezvous>,
) -> Result<TcpSession> {
    let r = topology.r;
    if assignment.r() != r {
        return Err(Error::Placement(format!(
            "topology has {r} ranks, assignment covers {}",
            assignment.r()
        )));
    }
    let hosted_set: HashSet<usize> = hosted.iter().copied().collect();
    if hosted_set.iter().any(|&k| k >= r) {
        return Err(Error::Config("hosted rank outside the process grid".into()));
    }

    let mut listeners: HashMap<usize, TcpListener> = HashMap::new();
    let rendezvous = match rendezvous {
        Some(rv) => {
            rv.check_covers(r)?;
            for &k in hosted {
                listeners.insert(k, TcpListener::bind(rv.resolve(k)?)?);
            }
            rv.clone()
        }
        None => {
            if hosted_set.len() != r {
                return Err(Error::Config(
                    "a TCP run spread over several processes needs a rendezvous listing".into(),
                ));
            }
            let mut addrs = BTreeMap::new();
            for k in 0..r {
                let l = TcpListener::bind("127.0.0.1:0")?;
                addrs.insert(k, l.local_addr()?.to_string());
                listeners.insert(k, l);
            }
            Rendezvous { addrs }
        }
    };

    let topo = Arc::new(topology.clone());
    let mut endpoints: Vec<Endpoint> = hosted
        .iter()
        .map(|&k| Endpoint::new(k, topo.clone(), assignment, fabric.clone()))
        .collect();
    let index: HashMap<usize, usize> = hosted.iter().enumerate().map(|(i, &k)| (k, i)).collect();

    let mut remote_pairs = Vec::new();
    for &a in hosted {
        for b in topology.peers(a) {
            match (link_class(assignment, a, b), hosted_set.contains(&b)) {
                (LinkClass::Local, true) => {
                    if a < b {
                        channel_pair(&mut endpoints, a, b, &index);
                    }
                }
                (LinkClass::Local, false) => {
                    return Err(Error::Config(format!(
                        "ranks {a} and {b} share device {} but live in different processes",
                        assignment.device_of(a)
                    )))
                }
                (LinkClass::Remote, _) => remote_pairs.push((a, b)),
            }
        }
    }

    let deadline = Instant::now() + CONNECT_TIMEOUT;
    // accept side: hosted b gets one connection from every remote peer a < b
    let accepted: Vec<Result<Vec<(usize, usize, TcpStream)>>> = std::thread::scope(|s| {
        let acceptors: Vec<_> = hosted
            .iter()
            .map(|&b| {
                let expected = topology
                    .peers(b)
                    .into_iter()
                    .filter(|&a| a < b && link_class(assignment, a, b) == LinkClass::Remote)
                    .count();
                let listener = &listeners[&b];
                s.spawn(move || -> Result<Vec<(usize, usize, TcpStream)>> {
                    let mut got = Vec::with_capacity(expected);
                    while got.len() < expected {
                        let mut stream = accept_before(listener, deadline)?;
                        let (kind, src, dst) = read_handshake(&mut stream)?;
                        if kind != KIND_HALO || dst != b {
                            return Err(Error::Protocol {
                                src,
                                dst: b,
                                detail: format!("unexpected handshake kind {kind} for rank {dst}"),
                            });
                        }
                        got.push((src, b, stream));
                    }
                    Ok(got)
                })
            })
            .collect();

        let mut connected = Vec::new();
        for &(a, b) in &remote_pairs {
            if a < b {
                let result = connect_with_retry(rendezvous.resolve(b)?, deadline)
                    .and_then(|mut s| s.write_all(&handshake(KIND_HALO, a, b)).map(|_| s))
                    .map_err(|source| Error::Transport {
                        src: a,
                        dst: b,
                        source,
                    })?;
                connected.push((a, b, result));
            }
        }
        let mut all = vec![Ok(connected)];
        all.extend(
            acceptors
                .into_iter()
                .map(|h| h.join().expect("acceptor panicked")),
        );
        Ok::<_, Error>(all)
    })?;

    for batch in accepted {
        for (local, peer_or_local, stream) in batch? {
            // connector entries are (a, b) with a hosted; acceptor entries are (src, b) with b hosted
            let (me, peer) = if index.contains_key(&local) && !index.contains_key(&peer_or_local) {
                (local, peer_or_local)
            } else if index.contains_key(&peer_or_local) && !index.contains_key(&local) {
                (peer_or_local, local)
            } else {
                // both hosted: the connector side was pushed as (a, b) and the
                // acceptor side as (a, b) too; tell them apart by who is lower
                (usize::MAX, usize::MAX)
            };
            if me != usize::MAX {
                attach_stream(&mut endpoints[index[&me]], me, peer, stream)?;
            } else {
                pending_both_hosted(&mut endpoints, &index, local, peer_or_local, stream)?;
            }
        }
    }

    let control = if hosted_set.contains(&0) && rendezvous_has_foreign(&rendezvous, &hosted_set) {
        listeners.remove(&0)
    } else {
        None
    };
    Ok(TcpSession {
        endpoints,
        control,
        rendezvous,
    })
}

fn rendezvous_has_foreign(rv: &Rendezvous, hosted: &HashSet<usize>) -> bool {
    rv.addrs.keys().any(|k| !hosted.contains(k))
}

fn attach_stream(endpoint: &mut Endpoint, me: usize, peer: usize, stream: TcpStream) -> Result<()> {
    stream.set_nodelay(true)?;
    let reader = stream.try_clone()?;
    let (tx, rx) = sync_channel(CHANNEL_CAPACITY);
    spawn_reader(reader, peer, me, tx);
    endpoint.attach(
        peer,
        Box::new(TcpOutbox {
            stream,
            src: me,
            dst: peer,
            buf: Vec::new(),
        }),
        rx,
    );
    Ok(())
}

/// Both ends of a loopback connection live in this process. The first stream
/// seen for a pair is the lower rank's end, the second the higher rank's.
fn pending_both_hosted(
    endpoints: &mut [Endpoint],
    index: &HashMap<usize, usize>,
    a: usize,
    b: usize,
    stream: TcpStream,
) -> Result<()> {
    let lower_attached = endpoints[index[&a]].route_to(b).is_some();
    if lower_attached {
        attach_stream(&mut endpoints[index[&b]], b, a, stream)
    } else {
        attach_stream(&mut endpoints[index[&a]], a, b, stream)
    }
}

/// Sends a control payload (a JSON rank summary) to rank 0.
pub fn send_control(rendezvous: &Rendezvous, from: usize, payload: &[u8]) -> Result<()> {
    let addr = rendezvous.resolve(0)?;
    let mut stream =
        connect_with_retry(addr, Instant::now() + CONNECT_TIMEOUT).map_err(|source| {
            Error::Transport {
                src: from,
                dst: 0,
                source,
            }
        })?;
    stream.write_all(&handshake(KIND_CONTROL, from, 0))?;
    stream.write_all(&(payload.len() as u64).to_le_bytes())?;
    stream.write_all(payload)?;
    stream.flush()?;
    Ok(())
}

/// Receives one control payload on rank 0's listener.
pub fn accept_control(listener: &TcpListener, timeout: Duration) -> Result<(usize, Vec<u8>)> {
    let mut stream = accept_before(listener, Instant::now() + timeout)?;
    let (kind, src, _) = read_handshake(&mut stream)?;
    if kind != KIND_CONTROL {
        return Err(Error::Protocol {
            src,
            dst: 0,
            detail: format!("expected a control connection, got kind {kind}"),
        });
    }
    let mut len = [0u8; 8];
    stream.read_exact(&mut len)?;
    let mut payload = vec![0u8; u64::from_le_bytes(len) as usize];
    stream.read_exact(&mut payload)?;
    Ok((src, payload))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{assign_devices, Placement};
    use crate::transport::wire::{FieldId, Phase, Side};

    #[test]
    fn rendezvous_parsing() {
        let rv = Rendezvous::parse("# ranks\n0 127.0.0.1:7000\n1 localhost:7001\n").unwrap();
        assert_eq!(rv.addrs.len(), 2);
        assert!(rv.check_covers(2).is_ok());
        assert!(rv.check_covers(3).is_err());
        assert_eq!(Rendezvous::parse(&rv.render()).unwrap(), rv);
        assert!(Rendezvous::parse("0\n").is_err());
        assert!(Rendezvous::parse("x 1.2.3.4:5\n").is_err());
        assert!(Rendezvous::parse("0 nohost\n").is_err());
        assert!(Rendezvous::parse("0 a:1\n0 b:2\n").is_err());
    }

    #[test]
    fn routes_follow_link_class() {
        let topo = RankTopology::new(2, 2).unwrap();
        let a = assign_devices(4, 2, Placement::Contiguous).unwrap();
        let session = connect(&topo, &a, &FabricModel::ideal(), &[0, 1, 2, 3], None).unwrap();
        assert!(session.control.is_none());
        for ep in &session.endpoints {
            for peer in topo.peers(ep.rank()) {
                let expected = match ep.class_to(peer).unwrap() {
                    LinkClass::Local => Route::Channel,
                    LinkClass::Remote => Route::Tcp,
                };
                assert_eq!(ep.route_to(peer), Some(expected), "{} -> {peer}", ep.rank());
            }
        }
    }

    #[test]
    fn messages_cross_loopback_tcp() {
        let topo = RankTopology::new(2, 1).unwrap();
        let a = assign_devices(2, 2, Placement::Contiguous).unwrap();
        let mut session = connect(&topo, &a, &FabricModel::ideal(), &[0, 1], None).unwrap();
        let mut b = session.endpoints.pop().unwrap();
        let mut z = session.endpoints.pop().unwrap();
        assert_eq!(z.route_to(1), Some(Route::Tcp));
        z.send(
            1,
            5,
            Phase::Advance,
            Side::Left,
            FieldId::Cv,
            vec![1.5, -2.0],
        )
        .unwrap();
        b.send(0, 5, Phase::Advance, Side::Right, FieldId::Cv, vec![7.0])
            .unwrap();
        assert_eq!(
            b.recv(0, 5, Phase::Advance, Side::Left, FieldId::Cv)
                .unwrap(),
            vec![1.5, -2.0]
        );
        assert_eq!(
            z.recv(1, 5, Phase::Advance, Side::Right, FieldId::Cv)
                .unwrap(),
            vec![7.0]
        );
    }

    #[test]
    fn split_device_is_rejected() {
        let topo = RankTopology::new(2, 1).unwrap();
        let a = assign_devices(2, 1, Placement::Contiguous).unwrap();
        let rv = Rendezvous::parse("0 127.0.0.1:0\n1 127.0.0.1:0\n").unwrap();
        assert!(matches!(
            connect(&topo, &a, &FabricModel::ideal(), &[0], Some(&rv)),
            Err(Error::Config(_))
        ));
    }
}

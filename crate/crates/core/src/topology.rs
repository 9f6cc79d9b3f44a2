//! Process grid, periodic neighbour relation, rank → device placement and
//! local/remote link classification.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::dims_create;
use crate::transport::wire::Side;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Neighbors {
    pub left: usize,
    pub right: usize,
    pub top: usize,
    pub bottom: usize,
}

impl Neighbors {
    /// Rank in the direction of `side`.
    pub fn toward(&self, side: Side) -> usize {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
            Side::Top => self.top,
            Side::Bottom => self.bottom,
        }
    }
}

/// Periodic neighbours of `rank` in an x-fastest `h × w` grid. Top is the
/// y + 1 direction.
pub fn neighbors(rank: usize, h: usize, w: usize) -> Neighbors {
    assert!(rank < h * w, "rank {rank} outside {h} x {w}");
    let (cx, cy) = (rank % h, rank / h);
    Neighbors {
        left: (cx + h - 1) % h + cy * h,
        right: (cx + 1) % h + cy * h,
        top: cx + ((cy + 1) % w) * h,
        bottom: cx + ((cy + w - 1) % w) * h,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankTopology {
    pub r: usize,
    pub h: usize,
    pub w: usize,
    pub neighbors: Vec<Neighbors>,
}

impl RankTopology {
    pub fn new(h: usize, w: usize) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::Decomposition(format!(
                "invalid process grid {h} x {w}"
            )));
        }
        let r = h * w;
        Ok(RankTopology {
            r,
            h,
            w,
            neighbors: (0..r).map(|k| neighbors(k, h, w)).collect(),
        })
    }

    pub fn from_ranks(r: usize, h_override: Option<usize>) -> Result<Self> {
        let (h, w) = dims_create(r, h_override)?;
        Self::new(h, w)
    }

    /// Distinct non-self ranks this rank exchanges with.
    pub fn peers(&self, rank: usize) -> Vec<usize> {
        let nb = &self.neighbors[rank];
        let mut peers: Vec<usize> = Side::ALL
            .iter()
            .map(|&s| nb.toward(s))
            .filter(|&k| k != rank)
            .collect();
        peers.sort_unstable();
        peers.dedup();
        peers
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    /// Consecutive chunks of ranks per device (`host:ppn` machine files).
    #[default]
    Contiguous,
    /// Rank k on device k mod m (`-np R` with one host per line).
    RoundRobin,
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Placement::Contiguous => "contiguous",
            Placement::RoundRobin => "roundrobin",
        })
    }
}

impl FromStr for Placement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "contiguous" => Ok(Placement::Contiguous),
            "roundrobin" | "round-robin" => Ok(Placement::RoundRobin),
            other => Err(Error::Config(format!("unknown placement {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceAssignment {
    pub m: usize,
    pub placement: Placement,
    /// Device id of each rank.
    pub devices: Vec<usize>,
    /// Device names in id order, when known from a machine file.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub names: Vec<String>,
}

impl DeviceAssignment {
    pub fn r(&self) -> usize {
        self.devices.len()
    }

    pub fn device_of(&self, rank: usize) -> usize {
        self.devices[rank]
    }

    pub fn ranks_on(&self, device: usize) -> Vec<usize> {
        (0..self.r())
            .filter(|&k| self.devices[k] == device)
            .collect()
    }
}

pub fn assign_devices(r: usize, m: usize, placement: Placement) -> Result<DeviceAssignment> {
    if m == 0 || r == 0 {
        return Err(Error::Placement(format!(
            "need r >= 1 and m >= 1 (r = {r}, m = {m})"
        )));
    }
    let devices = match placement {
        Placement::Contiguous => {
            if !r.is_multiple_of(m) {
                return Err(Error::Placement(format!(
                    "contiguous placement needs the device count {m} to divide the rank count {r}"
                )));
            }
            let chunk = r / m;
            (0..r).map(|k| k / chunk).collect()
        }
        Placement::RoundRobin => (0..r).map(|k| k % m).collect(),
    };
    Ok(DeviceAssignment {
        m,
        placement,
        devices,
        names: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkClass {
    Local,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifiedLink {
    pub src: usize,
    pub dst: usize,
    /// Direction of `dst` as seen from `src`.
    pub side: Side,
    pub class: LinkClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkClassification {
    pub links: Vec<ClassifiedLink>,
    pub local: usize,
    pub remote: usize,
}

impl LinkClassification {
    pub fn remote_fraction(&self) -> f64 {
        self.remote as f64 / self.links.len() as f64
    }
}

pub fn link_class(assignment: &DeviceAssignment, a: usize, b: usize) -> LinkClass {
    if assignment.device_of(a) == assignment.device_of(b) {
        LinkClass::Local
    } else {
        LinkClass::Remote
    }
}

/// True when contiguous placement gives every device whole x-rows of the
/// process grid. Only then does it never lose to round-robin.
pub fn whole_rows_per_device(h: usize, w: usize, m: usize) -> bool {
    let r = h * w;
    m >= 1 && r.is_multiple_of(m) && (r / m).is_multiple_of(h)
}

/// Classifies all `4 r` directed (rank, neighbour) links.
pub fn classify_links(
    topology: &RankTopology,
    assignment: &DeviceAssignment,
) -> Result<LinkClassification> {
    if topology.r != assignment.r() {
        return Err(Error::Placement(format!(
            "topology has {} ranks, assignment covers {}",
            topology.r,
            assignment.r()
        )));
    }
    let mut links = Vec::with_capacity(4 * topology.r);
    for (src, nb) in topology.neighbors.iter().enumerate() {
        for side in Side::ALL {
            let dst = nb.toward(side);
            links.push(ClassifiedLink {
                src,
                dst,
                side,
                class: link_class(assignment, src, dst),
            });
        }
    }
    let remote = links
        .iter()
        .filter(|l| l.class == LinkClass::Remote)
        .count();
    Ok(LinkClassification {
        local: links.len() - remote,
        remote,
        links,
    })
}

/// Machine file: either `name:ppn` lines (contiguous chunks of `ppn` ranks
/// per device) or bare `name` lines cycled round-robin over a given rank
/// count. Blank lines and `#` comments are ignored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineFile {
    pub entries: Vec<(String, Option<usize>)>,
}

impl MachineFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let entry = match line.split_once(':') {
                Some((name, ppn)) => {
                    let ppn: usize = ppn.trim().parse().map_err(|_| {
                        Error::Config(format!("machine file line {}: bad ppn {ppn:?}", lineno + 1))
                    })?;
                    if ppn == 0 {
                        return Err(Error::Config(format!(
                            "machine file line {}: ppn must be >= 1",
                            lineno + 1
                        )));
                    }
                    (name.trim().to_string(), Some(ppn))
                }
                None => (line.to_string(), None),
            };
            if entry.0.is_empty() || entry.0.contains(char::is_whitespace) {
                return Err(Error::Config(format!(
                    "machine file line {}: bad host name {:?}",
                    lineno + 1,
                    entry.0
                )));
            }
            entries.push(entry);
        }
        if entries.is_empty() {
            return Err(Error::Config("machine file lists no hosts".into()));
        }
        let with_ppn = entries.iter().filter(|e| e.1.is_some()).count();
        if with_ppn != 0 && with_ppn != entries.len() {
            return Err(Error::Config(
                "machine file mixes host:ppn and bare host lines".into(),
            ));
        }
        Ok(MachineFile { entries })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn has_ppn(&self) -> bool {
        self.entries[0].1.is_some()
    }

    /// Rank count implied by `host:ppn` lines.
    pub fn total_ppn(&self) -> Option<usize> {
        self.has_ppn()
            .then(|| self.entries.iter().map(|e| e.1.unwrap()).sum())
    }

    /// Builds the assignment. `ranks` is required for bare-host files and,
    /// when given for `host:ppn` files, must match the ppn total.
    pub fn assignment(&self, ranks: Option<usize>) -> Result<DeviceAssignment> {
        let mut ids: HashMap<&str, usize> = HashMap::new();
        let mut names = Vec::new();
        let line_device: Vec<usize> = self
            .entries
            .iter()
            .map(|(name, _)| {
                *ids.entry(name.as_str()).or_insert_with(|| {
                    names.push(name.clone());
                    names.len() - 1
                })
            })
            .collect();

        let (devices, placement) = if let Some(total) = self.total_ppn() {
            if let Some(r) = ranks {
                if r != total {
                    return Err(Error::Placement(format!(
                        "machine file places {total} ranks, {r} requested"
                    )));
                }
            }
            let devices = self
                .entries
                .iter()
                .zip(&line_device)
                .flat_map(|((_, ppn), &d)| std::iter::repeat_n(d, ppn.unwrap()))
                .collect();
            (devices, Placement::Contiguous)
        } else {
            let r = ranks.ok_or_else(|| {
                Error::Placement("bare-host machine file needs an explicit rank count".into())
            })?;
            let devices = (0..r).map(|k| line_device[k % line_device.len()]).collect();
            (devices, Placement::RoundRobin)
        };
        Ok(DeviceAssignment {
            m: names.len(),
            placement,
            devices,
            names,
        })
    }
}

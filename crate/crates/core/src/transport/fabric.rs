//! Synthetic fabric cost model and per-link traffic accounting.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::LinkClass;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkCost {
    /// seconds per message
    pub latency: f64,
    /// seconds per byte
    pub per_byte: f64,
}

impl LinkCost {
    pub const ZERO: LinkCost = LinkCost {
        latency: 0.0,
        per_byte: 0.0,
    };

    pub fn dominates(&self, other: &LinkCost) -> bool {
        self.latency >= other.latency && self.per_byte >= other.per_byte
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FabricClass {
    /// Shared-memory copy between ranks on one device.
    Local,
    /// Fast interconnect between devices.
    RemoteFast,
    /// Commodity network between devices.
    RemoteSlow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FabricMode {
    /// Modeled cost is reported only.
    #[default]
    Accounting,
    /// Senders sleep for the modeled cost of every message.
    Delay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FabricModel {
    pub name: String,
    pub local: LinkCost,
    pub remote_fast: LinkCost,
    pub remote_slow: LinkCost,
    /// Class charged for links between devices.
    pub remote: FabricClass,
    #[serde(default)]
    pub mode: FabricMode,
}

impl Default for FabricModel {
    fn default() -> Self {
        Self::ideal()
    }
}

impl FabricModel {
    pub fn ideal() -> Self {
        FabricModel {
            name: "ideal".into(),
            local: LinkCost::ZERO,
            remote_fast: LinkCost::ZERO,
            remote_slow: LinkCost::ZERO,
            remote: FabricClass::RemoteFast,
            mode: FabricMode::Accounting,
        }
    }

    fn preset_costs(name: &str, remote: FabricClass) -> Self {
        FabricModel {
            name: name.into(),
            local: LinkCost {
                latency: 1.0e-6,
                per_byte: 1.0e-10,
            },
            remote_fast: LinkCost {
                latency: 5.0e-6,
                per_byte: 2.5e-10,
            },
            remote_slow: LinkCost {
                latency: 5.0e-5,
                per_byte: 8.0e-9,
            },
            remote,
            mode: FabricMode::Accounting,
        }
    }

    /// Shared memory on-device, fast interconnect between devices.
    pub fn infiniband() -> Self {
        Self::preset_costs("infiniband", FabricClass::RemoteFast)
    }

    /// Shared memory on-device, gigabit-class network between devices.
    pub fn ethernet() -> Self {
        Self::preset_costs("ethernet", FabricClass::RemoteSlow)
    }

    pub fn with_mode(mut self, mode: FabricMode) -> Self {
        self.mode = mode;
        self
    }

    /// Built-in names: `ideal`, `infiniband`, `ethernet`, each optionally
    /// suffixed with `-delay` to inject the modeled cost as real sleeps.
    pub fn by_name(name: &str) -> Option<Self> {
        let (base, mode) = match name.strip_suffix("-delay") {
            Some(base) => (base, FabricMode::Delay),
            None => (name, FabricMode::Accounting),
        };
        let mut model = match base {
            "ideal" => Self::ideal(),
            "infiniband" | "ib" => Self::infiniband(),
            "ethernet" | "tcp" => Self::ethernet(),
            _ => return None,
        };
        model.name = name.to_string();
        model.mode = mode;
        Some(model)
    }

    /// A preset name or the path of a JSON model file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        if let Some(model) = Self::by_name(name_or_path) {
            return Ok(model);
        }
        let path = Path::new(name_or_path);
        if !path.exists() {
            return Err(Error::Config(format!(
                "unknown fabric {name_or_path:?} (not a preset and no such file)"
            )));
        }
        let model: FabricModel = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        for (label, c) in [
            ("local", self.local),
            ("remote_fast", self.remote_fast),
            ("remote_slow", self.remote_slow),
        ] {
            if !(c.latency >= 0.0
                && c.per_byte >= 0.0
                && c.latency.is_finite()
                && c.per_byte.is_finite())
            {
                return Err(Error::Config(format!(
                    "fabric {label} cost must be finite and >= 0"
                )));
            }
        }
        if self.remote == FabricClass::Local {
            return Err(Error::Config(
                "remote links cannot be charged as local".into(),
            ));
        }
        Ok(())
    }

    pub fn cost(&self, class: FabricClass) -> LinkCost {
        match class {
            FabricClass::Local => self.local,
            FabricClass::RemoteFast => self.remote_fast,
            FabricClass::RemoteSlow => self.remote_slow,
        }
    }

    pub fn class_for(&self, link: LinkClass) -> FabricClass {
        match link {
            LinkClass::Local => FabricClass::Local,
            LinkClass::Remote => self.remote,
        }
    }

    /// Modeled seconds to move one message of `bytes` over `class`.
    pub fn charge(&self, class: FabricClass, bytes: usize) -> f64 {
        let c = self.cost(class);
        c.latency + bytes as f64 * c.per_byte
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LinkCounter {
    pub messages: u64,
    /// Wire bytes, headers included.
    pub bytes: u64,
    /// Ghost-line bytes only.
    pub payload_bytes: u64,
    /// Sender wall time spent in sends.
    pub seconds: f64,
    pub modeled_seconds: f64,
}

impl LinkCounter {
    fn add(&mut self, other: &LinkCounter) {
        self.messages += other.messages;
        self.bytes += other.bytes;
        self.payload_bytes += other.payload_bytes;
        self.seconds += other.seconds;
        self.modeled_seconds += other.modeled_seconds;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkEntry {
    pub src: usize,
    pub dst: usize,
    pub class: LinkClass,
    #[serde(flatten)]
    pub counter: LinkCounter,
}

/// Traffic per directed link, ordered by `(src, dst)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LinkStats {
    pub links: Vec<LinkEntry>,
}

impl LinkStats {
    fn entry(&mut self, src: usize, dst: usize, class: LinkClass) -> &mut LinkEntry {
        let pos = match self
            .links
            .binary_search_by_key(&(src, dst), |e| (e.src, e.dst))
        {
            Ok(pos) => pos,
            Err(pos) => {
                self.links.insert(
                    pos,
                    LinkEntry {
                        src,
                        dst,
                        class,
                        counter: LinkCounter::default(),
                    },
                );
                pos
            }
        };
        &mut self.links[pos]
    }

    pub fn record(
        &mut self,
        src: usize,
        dst: usize,
        class: LinkClass,
        payload_len: usize,
        seconds: f64,
        modeled_seconds: f64,
    ) {
        let e = self.entry(src, dst, class);
        e.counter.messages += 1;
        e.counter.payload_bytes += 8 * payload_len as u64;
        e.counter.bytes += (crate::transport::wire::HEADER_LEN + 8 * payload_len) as u64;
        e.counter.seconds += seconds;
        e.counter.modeled_seconds += modeled_seconds;
    }

    pub fn merge(&mut self, other: &LinkStats) {
        for e in &other.links {
            self.entry(e.src, e.dst, e.class).counter.add(&e.counter);
        }
    }

    pub fn by_class(&self) -> BTreeMap<LinkClass, LinkCounter> {
        let mut out = BTreeMap::new();
        for class in [LinkClass::Local, LinkClass::Remote] {
            out.insert(class, LinkCounter::default());
        }
        for e in &self.links {
            out.get_mut(&e.class).unwrap().add(&e.counter);
        }
        out
    }

    pub fn total(&self) -> LinkCounter {
        let mut t = LinkCounter::default();
        for e in &self.links {
            t.add(&e.counter);
        }
        t
    }

    /// Traffic sent by one rank.
    pub fn sent_by(&self, rank: usize) -> LinkCounter {
        let mut t = LinkCounter::default();
        for e in self.links.iter().filter(|e| e.src == rank) {
            t.add(&e.counter);
        }
        t
    }

    pub fn modeled_seconds(&self) -> f64 {
        self.links.iter().map(|e| e.counter.modeled_seconds).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_cost_model_charges_nothing() {
        let f = FabricModel::ideal();
        for class in [
            FabricClass::Local,
            FabricClass::RemoteFast,
            FabricClass::RemoteSlow,
        ] {
            assert_eq!(f.charge(class, 123_456), 0.0);
        }
    }

    #[test]
    fn charge_arithmetic() {
        let mut f = FabricModel::ideal();
        f.remote_fast = LinkCost {
            latency: 1e-6,
            per_byte: 1e-9,
        };
        let c = f.charge(FabricClass::RemoteFast, 8000);
        assert!((c - 9e-6).abs() < 1e-18);
    }

    #[test]
    fn slow_dominating_fast_costs_more() {
        for f in [FabricModel::infiniband(), FabricModel::ethernet()] {
            assert!(f.remote_slow.dominates(&f.remote_fast));
            let mut fast = 0.0;
            let mut slow = 0.0;
            for bytes in [0, 26, 1000, 80_026] {
                fast += f.charge(FabricClass::RemoteFast, bytes);
                slow += f.charge(FabricClass::RemoteSlow, bytes);
            }
            assert!(slow >= fast);
        }
    }

    #[test]
    fn presets_resolve() {
        assert_eq!(
            FabricModel::by_name("ethernet").unwrap().remote,
            FabricClass::RemoteSlow
        );
        assert_eq!(
            FabricModel::by_name("infiniband").unwrap().remote,
            FabricClass::RemoteFast
        );
        let d = FabricModel::by_name("ethernet-delay").unwrap();
        assert_eq!(d.mode, FabricMode::Delay);
        assert_eq!(d.name, "ethernet-delay");
        assert!(FabricModel::by_name("carrier-pigeon").is_none());
        assert!(FabricModel::resolve("/definitely/not/here.json").is_err());
    }

    #[test]
    fn model_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fabric.json");
        let model = FabricModel::ethernet().with_mode(FabricMode::Delay);
        std::fs::write(&path, serde_json::to_string(&model).unwrap()).unwrap();
        assert_eq!(FabricModel::resolve(path.to_str().unwrap()).unwrap(), model);

        let mut bad = model.clone();
        bad.local.latency = -1.0;
        std::fs::write(&path, serde_json::to_string(&bad).unwrap()).unwrap();
        assert!(FabricModel::resolve(path.to_str().unwrap()).is_err());
    }

    #[test]
    fn stats_bytes_include_header() {
        let mut s = LinkStats::default();
        s.record(0, 1, LinkClass::Remote, 10, 0.0, 1.0);
        s.record(0, 1, LinkClass::Remote, 0, 0.0, 1.0);
        s.record(1, 0, LinkClass::Local, 4, 0.0, 0.0);
        let c = s.links[0].counter;
        assert_eq!(c.messages, 2);
        assert_eq!(c.bytes, 106 + 26);
        assert_eq!(c.payload_bytes, 80);
        let by = s.by_class();
        assert_eq!(by[&LinkClass::Remote].modeled_seconds, 2.0);
        assert_eq!(by[&LinkClass::Local].bytes, 26 + 32);
        assert_eq!(s.sent_by(1).messages, 1);

        let mut merged = LinkStats::default();
        merged.merge(&s);
        merged.merge(&s);
        assert_eq!(merged.total().messages, 6);
    }
}

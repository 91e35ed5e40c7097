use std::net::SocketAddr;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crdtsim::{DatatypeKind, NodeIndex};

use crate::node::NetError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeerAddr {
    pub index: NodeIndex,
    pub host: String,
    pub port: u16,
}

/// Which node this process is and where every node listens.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeerConfig {
    #[serde(rename = "self")]
    pub self_index: NodeIndex,
    pub datatype: DatatypeKind,
    pub peers: Vec<PeerAddr>,
}

impl PeerConfig {
    pub fn parse(text: &str) -> Result<Self, NetError> {
        let cfg: PeerConfig = serde_json::from_str(text).map_err(|e| NetError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, NetError> {
        let text = std::fs::read_to_string(path).map_err(|e| NetError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Peer indices must be exactly `0..n` and include this node.
    pub fn validate(&self) -> Result<(), NetError> {
        let mut indices: Vec<NodeIndex> = self.peers.iter().map(|p| p.index).collect();
        indices.sort_unstable();
        if indices.iter().enumerate().any(|(i, &n)| i != n) {
            return Err(NetError::Config(format!("peer indices {indices:?} are not 0..{}", self.peers.len())));
        }
        if self.self_index >= self.peers.len() {
            return Err(NetError::Config(format!("self index {} is not among the peers", self.self_index)));
        }
        Ok(())
    }

    pub fn nodes(&self) -> usize {
        self.peers.len()
    }

    pub fn addr_of(&self, index: NodeIndex) -> Result<SocketAddr, NetError> {
        use std::net::ToSocketAddrs;
        let p = self.peers.iter().find(|p| p.index == index).ok_or(NetError::Config(format!("no peer {index}")))?;
        (p.host.as_str(), p.port)
            .to_socket_addrs()
            .map_err(|e| NetError::Config(format!("{}:{}: {e}", p.host, p.port)))?
            .next()
            .ok_or_else(|| NetError::Config(format!("{}:{} resolves to nothing", p.host, p.port)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(self_index: usize, indices: &[usize]) -> PeerConfig {
        PeerConfig {
            self_index,
            datatype: DatatypeKind::Counter,
            peers: indices
                .iter()
                .map(|&i| PeerAddr { index: i, host: "127.0.0.1".into(), port: 9000 + i as u16 })
                .collect(),
        }
    }

    #[test]
    fn dense_indices_required() {
        assert!(cfg(0, &[1, 0, 2]).validate().is_ok());
        assert!(cfg(0, &[0, 2]).validate().is_err());
        assert!(cfg(0, &[0, 0]).validate().is_err());
        assert!(cfg(3, &[0, 1, 2]).validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let c = cfg(1, &[0, 1]);
        assert_eq!(PeerConfig::parse(&c.to_json()).unwrap(), c);
        assert!(PeerConfig::parse(r#"{"self":0,"datatype":"counter","peers":[],"extra":1}"#).is_err());
    }
}

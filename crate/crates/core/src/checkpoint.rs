//! Binary checkpoint files.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! 8 bytes   magic "RESFLOW\0"
//! u32       format version (1)
//! u32       header length in bytes
//! ...       header, UTF-8 JSON: agent kind, update counter, observation
//!           width, and per network its head and the layer list of the
//!           indirect, trunk, value and policy MLPs
//! f64 x n   per network: indirect, trunk, value, policy parameters, then
//!           the log-std vector
//! f64       normalization sample count
//! f64 x d   normalization means
//! f64 x d   normalization sums of squared deviations
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::{Agent, AgentKind};
use crate::error::{Error, Result};
use crate::neural::{LayerSpec, Mlp, NetworkBundle, PolicyHead};
use crate::observe::NormStats;
use crate::scenario::ModelParams;

const MAGIC: &[u8; 8] = b"RESFLOW\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NetworkHeader {
    head: PolicyHead,
    indirect: Vec<LayerSpec>,
    trunk: Vec<LayerSpec>,
    value: Vec<LayerSpec>,
    policy: Vec<LayerSpec>,
    logstd: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    agent: AgentKind,
    updates: u64,
    obs_dim: usize,
    networks: Vec<NetworkHeader>,
}

/// Network weights, normalization statistics and training progress.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub agent: AgentKind,
    pub updates: u64,
    pub networks: Vec<NetworkBundle>,
    pub norm: NormStats,
}

impl Checkpoint {
    pub fn from_agent(agent: &Agent, updates: u64) -> Self {
        Self {
            agent: agent.kind,
            updates,
            networks: agent.networks.clone(),
            norm: agent.norm.clone(),
        }
    }

    pub fn into_agent(self, params: ModelParams) -> Agent {
        let mut a = Agent::from_parts(self.agent, self.networks, params);
        a.norm = self.norm;
        a
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            agent: self.agent,
            updates: self.updates,
            obs_dim: self.norm.dim(),
            networks: self
                .networks
                .iter()
                .map(|n| NetworkHeader {
                    head: n.head,
                    indirect: n.indirect.layers.clone(),
                    trunk: n.trunk.layers.clone(),
                    value: n.value.layers.clone(),
                    policy: n.policy.layers.clone(),
                    logstd: n.logstd.len(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(16 + json.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        let mut put = |xs: &[f64]| {
            for x in xs {
                out.extend_from_slice(&x.to_le_bytes());
            }
        };
        for n in &self.networks {
            for s in n.param_slices() {
                put(s);
            }
        }
        put(&[self.norm.count]);
        put(&self.norm.mean);
        put(&self.norm.m2);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported format version {version}")));
        }
        let hlen = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
        let body = bytes
            .get(16..16 + hlen)
            .ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(body)?;
        let mut floats = bytes[16 + hlen..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        if !(bytes.len() - 16 - hlen).is_multiple_of(8) {
            return Err(bad("trailing bytes"));
        }
        let mut take = |n: usize| -> Result<Vec<f64>> {
            let v: Vec<f64> = floats.by_ref().take(n).collect();
            if v.len() == n {
                Ok(v)
            } else {
                Err(bad("truncated parameters"))
            }
        };
        let mut networks = Vec::with_capacity(header.networks.len());
        for nh in header.networks {
            let mut load = |layers: Vec<LayerSpec>| -> Result<Mlp> {
                let mut m = Mlp::from_layers(layers)?;
                m.params = take(m.param_count())?;
                Ok(m)
            };
            let indirect = load(nh.indirect)?;
            let trunk = load(nh.trunk)?;
            let value = load(nh.value)?;
            let policy = load(nh.policy)?;
            if policy.output_dim() != nh.head.dim() || nh.logstd != nh.head.dim() {
                return Err(bad("policy head width does not match its kind"));
            }
            networks.push(NetworkBundle {
                head: nh.head,
                indirect,
                trunk,
                value,
                policy,
                logstd: take(nh.logstd)?,
            });
        }
        let count = take(1)?[0];
        let norm = NormStats {
            count,
            mean: take(header.obs_dim)?,
            m2: take(header.obs_dim)?,
        };
        if floats.next().is_some() {
            return Err(bad("trailing bytes"));
        }
        let heads: Vec<PolicyHead> = networks.iter().map(|n| n.head).collect();
        if heads != header.agent.heads() {
            return Err(bad("networks do not match the agent kind"));
        }
        Ok(Self {
            agent: header.agent,
            updates: header.updates,
            networks,
            norm,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingCheckpoint(path.to_path_buf()));
        }
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Architecture;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_every_agent_kind() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for kind in AgentKind::ALL {
            let mut agent = Agent::new(
                kind,
                ModelParams::default(),
                Architecture::default(),
                &mut rng,
            );
            agent.norm.update(&[1.5; 59]);
            agent.norm.update(&[0.5; 59]);
            let ck = Checkpoint::from_agent(&agent, 40);
            let bytes = ck.to_bytes().unwrap();
            let back = Checkpoint::from_bytes(&bytes).unwrap();
            assert_eq!(back, ck);
        }
    }

    #[test]
    fn dpn_holds_two_networks() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let agent = Agent::new(
            AgentKind::Dpn,
            ModelParams::default(),
            Architecture::default(),
            &mut rng,
        );
        let back =
            Checkpoint::from_bytes(&Checkpoint::from_agent(&agent, 1).to_bytes().unwrap()).unwrap();
        assert_eq!(back.networks.len(), 2);
    }

    #[test]
    fn corrupt_input_is_rejected() {
        assert!(Checkpoint::from_bytes(b"hello").is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let agent = Agent::new(
            AgentKind::Swpn,
            ModelParams::default(),
            Architecture::default(),
            &mut rng,
        );
        let bytes = Checkpoint::from_agent(&agent, 1).to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 8]).is_err());
        let mut longer = bytes.clone();
        longer.extend_from_slice(&[0; 8]);
        assert!(Checkpoint::from_bytes(&longer).is_err());
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = Checkpoint::load(Path::new("/nonexistent/agent.ckpt")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/agent.ckpt"));
    }
}

//! Bundle persistence: one snapshot file per network plus `manifest.json`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bundle::{ActorCritic, GuardPolicy, LearnerSettings, MoveLearner, PolicyBundle, Vdn};
use super::features::FeatureMap;
use crate::env::EnvSpec;
use crate::error::{BiclError, Result};
use crate::nn::{read_snapshot, write_snapshot, Adam, Mlp, OutputActivation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkEntry {
    pub role: String,
    pub robot: Option<usize>,
    pub file: String,
    pub activation: OutputActivation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub backend: String,
    pub env: EnvSpec,
    pub features: FeatureMap,
    pub guard_slots: usize,
    pub settings: LearnerSettings,
    /// Alignment penalty weight in force when the snapshot was taken.
    pub penalty_weight: f64,
    pub networks: Vec<NetworkEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn entry(role: &str, robot: Option<usize>, net: &Mlp) -> NetworkEntry {
    let file = match robot {
        Some(i) => format!("{role}_{i}.bin"),
        None => format!("{role}.bin"),
    };
    NetworkEntry {
        role: role.to_string(),
        robot,
        file,
        activation: net.output_activation(),
    }
}

pub(crate) fn write_networks(dir: &Path, nets: &[(NetworkEntry, &Mlp)]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| BiclError::io(dir, e))?;
    for (e, net) in nets {
        write_snapshot(net, &dir.join(&e.file))?;
    }
    Ok(())
}

pub(crate) fn write_manifest<T: Serialize>(dir: &Path, manifest: &T) -> Result<()> {
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(manifest)?;
    fs::write(&path, text).map_err(|e| BiclError::io(&path, e))
}

pub fn save_bundle(bundle: &PolicyBundle, env: &EnvSpec, settings: &LearnerSettings, penalty_weight: f64, dir: &Path) -> Result<()> {
    let mut nets: Vec<(NetworkEntry, &Mlp)> = Vec::new();
    for (i, g) in bundle.guards.iter().enumerate() {
        nets.push((entry("guard", Some(i), &g.net), &g.net));
    }
    match &bundle.movers {
        MoveLearner::ActorCritic(ac) => {
            for (i, a) in ac.actors.iter().enumerate() {
                nets.push((entry("actor", Some(i), a), a));
            }
            for (i, a) in ac.target_actors.iter().enumerate() {
                nets.push((entry("target_actor", Some(i), a), a));
            }
            nets.push((entry("critic", None, &ac.critic), &ac.critic));
            nets.push((entry("target_critic", None, &ac.target_critic), &ac.target_critic));
        }
        MoveLearner::Vdn(v) => {
            for (i, q) in v.q.iter().enumerate() {
                nets.push((entry("q", Some(i), q), q));
            }
            for (i, q) in v.target_q.iter().enumerate() {
                nets.push((entry("target_q", Some(i), q), q));
            }
        }
    }
    write_networks(dir, &nets)?;
    let manifest = BundleManifest {
        backend: bundle.backend_name().to_string(),
        env: env.clone(),
        features: bundle.features.clone(),
        guard_slots: bundle.guard_slots,
        settings: settings.clone(),
        penalty_weight,
        networks: nets.into_iter().map(|(e, _)| e).collect(),
    };
    write_manifest(dir, &manifest)
}

pub(crate) fn read_manifest<T: for<'de> Deserialize<'de>>(dir: &Path) -> Result<T> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| BiclError::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn load_role(dir: &Path, manifest: &BundleManifest, role: &str, robot: Option<usize>) -> Result<Mlp> {
    let e = manifest
        .networks
        .iter()
        .find(|e| e.role == role && e.robot == robot)
        .ok_or_else(|| BiclError::Config(format!("snapshot lacks network {role} {robot:?}")))?;
    read_snapshot(&dir.join(&e.file), e.activation)
}

/// Restores a bundle written by [`save_bundle`]; optimizer moments start fresh.
pub fn load_bundle(dir: &Path) -> Result<(PolicyBundle, BundleManifest)> {
    let manifest: BundleManifest = read_manifest(dir)?;
    let n = manifest.features.robots();
    let s = &manifest.settings;
    let guards = (0..n)
        .map(|i| {
            let net = load_role(dir, &manifest, "guard", Some(i))?;
            Ok(GuardPolicy { opt: Adam::new(&net, s.il_lr), net })
        })
        .collect::<Result<Vec<_>>>()?;
    let per_robot = |role: &str| -> Result<Vec<Mlp>> { (0..n).map(|i| load_role(dir, &manifest, role, Some(i))).collect() };
    let movers = match manifest.backend.as_str() {
        "route-actor-critic" => {
            let actors = per_robot("actor")?;
            let critic = load_role(dir, &manifest, "critic", None)?;
            MoveLearner::ActorCritic(ActorCritic {
                v_max: manifest.features.move_scale,
                action_l2: s.action_l2,
                actor_opts: actors.iter().map(|a| Adam::new(a, s.actor_lr)).collect(),
                target_actors: per_robot("target_actor")?,
                actors,
                critic_opt: Adam::new(&critic, s.critic_lr),
                target_critic: load_role(dir, &manifest, "target_critic", None)?,
                critic,
            })
        }
        "graph-vdn" => {
            let q = per_robot("q")?;
            MoveLearner::Vdn(Vdn {
                nodes: q.first().map_or(0, Mlp::output_len),
                opts: q.iter().map(|m| Adam::new(m, s.critic_lr)).collect(),
                target_q: per_robot("target_q")?,
                q,
            })
        }
        other => return Err(BiclError::Config(format!("unknown backend {other:?} in snapshot"))),
    };
    let bundle = PolicyBundle {
        features: manifest.features.clone(),
        guard_slots: manifest.guard_slots,
        guards,
        movers,
    };
    Ok((bundle, manifest))
}

/// Manifest of a full-action comparison bundle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullActionManifest {
    pub backend: String,
    pub env: EnvSpec,
    pub features: FeatureMap,
    pub guard_slots: usize,
    pub settings: LearnerSettings,
    pub networks: Vec<NetworkEntry>,
}

/// Writes `(role, robot, net)` snapshots plus a manifest built from their entries.
pub(crate) fn save_networks<F, M>(dir: &Path, nets: &[(&str, Option<usize>, &Mlp)], manifest: F) -> Result<()>
where
    F: FnOnce(Vec<NetworkEntry>) -> M,
    M: Serialize,
{
    let entries: Vec<(NetworkEntry, &Mlp)> = nets.iter().map(|(r, i, n)| (entry(r, *i, n), *n)).collect();
    write_networks(dir, &entries)?;
    write_manifest(dir, &manifest(entries.into_iter().map(|(e, _)| e).collect()))
}

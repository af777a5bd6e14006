//! Checkpoint directory layout:
//!
//! ```text
//! <dir>/manifest.json              format version, config, specs, phase, tensor index
//! <dir>/<network>.<tensor>.f32     raw little-endian float32, one file per tensor
//! ```
//!
//! Each tensor entry in the manifest carries its shape and SHA-256 digest. A
//! manifest without a `discriminator` section loads as a scoring-only bundle.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::{ModelBundle, ModelConfig, NetworkSpec, Phase};

pub const CHECKPOINT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format_version: u32,
    latent_dim: usize,
    config: ModelConfig,
    specs: Vec<NetworkSpec>,
    phase: Phase,
    sections: BTreeMap<String, Vec<TensorEntry>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    file: String,
    shape: Vec<usize>,
    sha256: String,
}

fn encode_f32<T: Scalar>(t: &Tensor<T>) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(t.len() * 4);
    for v in t.data() {
        let f = v.to_f32().unwrap_or(f32::NAN);
        bytes.extend_from_slice(&f.to_le_bytes());
    }
    bytes
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bundle` as a checkpoint directory, creating it if needed.
pub fn checkpoint_save<T: Scalar>(bundle: &ModelBundle<T>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut sections: BTreeMap<String, Vec<TensorEntry>> = BTreeMap::new();
    let mut write_section = |section: &str, params: Vec<(String, &Tensor<T>)>| -> Result<()> {
        let entries = sections.entry(section.to_string()).or_default();
        for (name, t) in params {
            let file = format!("{section}.{name}.f32");
            let bytes = encode_f32(t);
            let path = dir.join(&file);
            fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
            entries.push(TensorEntry { name, file, shape: t.shape().to_vec(), sha256: sha256_hex(&bytes) });
        }
        Ok(())
    };
    write_section("generator", bundle.generator.named_params())?;
    if let Some(d) = &bundle.discriminator {
        write_section("discriminator", d.named_params())?;
    }
    write_section("encoder", bundle.encoder.named_params())?;
    let manifest = Manifest {
        format_version: CHECKPOINT_VERSION,
        latent_dim: bundle.config.latent_dim,
        config: bundle.config.clone(),
        specs: bundle.config.network_specs().to_vec(),
        phase: bundle.phase,
        sections,
    };
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Loads a checkpoint, verifying format version, sizes and digests.
pub fn checkpoint_load<T: Scalar>(dir: &Path) -> Result<ModelBundle<T>> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let found = value.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != CHECKPOINT_VERSION {
        return Err(Error::CheckpointVersion { found, expected: CHECKPOINT_VERSION });
    }
    let manifest: Manifest = serde_json::from_value(value)?;
    if manifest.latent_dim != manifest.config.latent_dim {
        return Err(Error::format(&path, "latent_dim disagrees with config"));
    }
    let mut bundle = ModelBundle::<T>::new(manifest.config.clone())?;
    bundle.phase = Phase::new(manifest.phase.resolution, manifest.phase.fade)?;
    if bundle.phase.resolution > bundle.config.resolution {
        return Err(Error::format(&path, "phase resolution exceeds target"));
    }

    for (section, entries) in &manifest.sections {
        let mut by_name: BTreeMap<&str, &TensorEntry> = entries.iter().map(|e| (e.name.as_str(), e)).collect();
        let names: Vec<String> = match section.as_str() {
            "generator" => bundle.generator.named_params().into_iter().map(|(n, _)| n).collect(),
            "discriminator" => bundle.discriminator()?.named_params().into_iter().map(|(n, _)| n).collect(),
            "encoder" => bundle.encoder.named_params().into_iter().map(|(n, _)| n).collect(),
            other => return Err(Error::format(&path, format!("unknown section `{other}`"))),
        };
        let targets: Vec<&mut Tensor<T>> = match section.as_str() {
            "generator" => bundle.generator.params_mut(),
            "discriminator" => bundle.discriminator.as_mut().ok_or(Error::MissingDiscriminator)?.params_mut(),
            _ => bundle.encoder.params_mut(),
        };
        for (name, target) in names.iter().zip(targets) {
            let entry = by_name
                .remove(name.as_str())
                .ok_or_else(|| Error::format(&path, format!("{section}: tensor `{name}` missing")))?;
            load_tensor(dir, section, entry, target)?;
        }
        if let Some(extra) = by_name.keys().next() {
            return Err(Error::format(&path, format!("{section}: unexpected tensor `{extra}`")));
        }
    }
    for required in ["generator", "encoder"] {
        if !manifest.sections.contains_key(required) {
            return Err(Error::format(&path, format!("missing `{required}` section")));
        }
    }
    if !manifest.sections.contains_key("discriminator") {
        bundle.discriminator = None;
    }
    Ok(bundle)
}

fn load_tensor<T: Scalar>(dir: &Path, section: &str, entry: &TensorEntry, target: &mut Tensor<T>) -> Result<()> {
    let label = format!("{section}.{}", entry.name);
    if entry.shape != target.shape() {
        return Err(Error::format(dir, format!("{label}: shape {:?} != {:?}", entry.shape, target.shape())));
    }
    let path = dir.join(&entry.file);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    if bytes.len() != target.len() * 4 {
        return Err(Error::Truncated(label));
    }
    if sha256_hex(&bytes) != entry.sha256 {
        return Err(Error::DigestMismatch(label));
    }
    for (dst, chunk) in target.data_mut().iter_mut().zip(bytes.chunks_exact(4)) {
        let f = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        *dst = T::from_f32(f).expect("f32 converts into every scalar");
    }
    Ok(())
}

/// Rewrites a checkpoint directory without the discriminator section and files.
pub fn strip_discriminator(src: &Path, dst: &Path) -> Result<()> {
    let mut bundle = checkpoint_load::<f32>(src)?;
    bundle.discriminator = None;
    checkpoint_save(&bundle, dst)
}

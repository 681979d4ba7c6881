//! Versioned on-disk snapshots of the serving state.
//!
//! Layout under the snapshot directory:
//!
//! ```text
//! CURRENT               name of the live generation directory
//! gen-00000000000000000042/
//!     MANIFEST          "qdiff-snapshot<TAB>1" then "generation<TAB>42"
//!     model.bin         classifier file
//!     network.tsv       network file
//!     cache.tsv         node-score cache file
//! ```
//!
//! A snapshot is written into a temporary directory, renamed into place and
//! only then published by atomically replacing `CURRENT`, so readers see
//! either the old or the new generation, never a partial one.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::features::{read_cache, write_cache, NodeScoreCache};
use crate::graph::{read_network, write_network, DifficultyNetwork};
use crate::model::{read_model, write_model, PairClassifier};

pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "qdiff-snapshot";
const POINTER: &str = "CURRENT";
/// Generations kept on disk besides the live one.
const KEEP_PREVIOUS: usize = 1;

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub model: PairClassifier,
    pub network: DifficultyNetwork,
    pub cache: NodeScoreCache,
    pub generation: u64,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn finish(w: BufWriter<File>, path: &Path) -> Result<()> {
    let f = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    f.sync_all().map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?))
}

fn generation_dir(generation: u64) -> String {
    format!("gen-{generation:020}")
}

/// Write and publish `(model, network, cache)` as `generation`. Returns the
/// generation directory.
pub fn write_snapshot(
    dir: &Path,
    model: &PairClassifier,
    network: &DifficultyNetwork,
    cache: &NodeScoreCache,
    generation: u64,
) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let nonce = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    let tmp = dir.join(format!(".tmp-{generation}-{}-{nonce}", std::process::id()));
    fs::create_dir(&tmp).map_err(|e| Error::io(&tmp, e))?;
    let written = (|| {
        let p = tmp.join("model.bin");
        let mut w = create(&p)?;
        write_model(model, &mut w)?;
        finish(w, &p)?;
        let p = tmp.join("network.tsv");
        let mut w = create(&p)?;
        write_network(network, &mut w)?;
        finish(w, &p)?;
        let p = tmp.join("cache.tsv");
        let mut w = create(&p)?;
        write_cache(cache, &mut w)?;
        finish(w, &p)?;
        let p = tmp.join("MANIFEST");
        let mut w = create(&p)?;
        writeln!(w, "{MAGIC}\t{SNAPSHOT_FORMAT_VERSION}")?;
        writeln!(w, "generation\t{generation}")?;
        finish(w, &p)
    })();
    if let Err(e) = written {
        let _ = fs::remove_dir_all(&tmp);
        return Err(e);
    }
    let name = generation_dir(generation);
    let dest = dir.join(&name);
    if dest.exists() {
        fs::remove_dir_all(&dest).map_err(|e| Error::io(&dest, e))?;
    }
    fs::rename(&tmp, &dest).map_err(|e| Error::io(&dest, e))?;
    let pointer_tmp = dir.join(format!(".{POINTER}-{nonce}"));
    let mut w = create(&pointer_tmp)?;
    writeln!(w, "{name}")?;
    finish(w, &pointer_tmp)?;
    let pointer = dir.join(POINTER);
    fs::rename(&pointer_tmp, &pointer).map_err(|e| Error::io(&pointer, e))?;
    prune(dir, &name);
    Ok(dest)
}

/// Drop generation directories older than the newest `KEEP_PREVIOUS`
/// besides `live`. Failures only leave extra files behind.
fn prune(dir: &Path, live: &str) {
    let Ok(entries) = fs::read_dir(dir) else { return };
    let mut old: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n.starts_with("gen-") && n.as_str() != live)
        .collect();
    old.sort();
    let excess = old.len().saturating_sub(KEEP_PREVIOUS);
    for name in &old[..excess] {
        let _ = fs::remove_dir_all(dir.join(name));
    }
}

pub fn has_snapshot(dir: &Path) -> bool {
    dir.join(POINTER).is_file()
}

/// Load the generation named by `CURRENT`.
pub fn read_snapshot(dir: &Path) -> Result<Snapshot> {
    let pointer = dir.join(POINTER);
    let name = fs::read_to_string(&pointer).map_err(|e| Error::io(&pointer, e))?;
    let name = name.trim();
    if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
        return Err(Error::Corrupt(format!("bad snapshot pointer {name:?}")));
    }
    let gen_dir = dir.join(name);
    let manifest_path = gen_dir.join("MANIFEST");
    let manifest = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let mut lines = manifest.lines();
    let header = lines.next().unwrap_or("");
    let version = header
        .strip_prefix(MAGIC)
        .and_then(|v| v.trim().parse::<u32>().ok())
        .ok_or_else(|| Error::Corrupt("snapshot manifest header".into()))?;
    if version != SNAPSHOT_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: SNAPSHOT_FORMAT_VERSION,
        });
    }
    let generation = lines
        .next()
        .and_then(|l| l.strip_prefix("generation\t"))
        .and_then(|g| g.trim().parse::<u64>().ok())
        .ok_or_else(|| Error::Corrupt("snapshot manifest generation".into()))?;
    let model = read_model(open(&gen_dir.join("model.bin"))?)?;
    let network = read_network(open(&gen_dir.join("network.tsv"))?)?;
    let cache = read_cache(open(&gen_dir.join("cache.tsv"))?)?;
    Ok(Snapshot {
        model,
        network,
        cache,
        generation,
    })
}

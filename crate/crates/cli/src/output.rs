//! Output locations and provenance stamping.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::CliError;

pub const OUTPUT_DIR_ENV: &str = "MVTS_OUTPUT_DIR";
const DEFAULT_OUTPUT_DIR: &str = "out";

pub fn digest(canonical: &str) -> [u8; 32] {
    Sha256::digest(canonical.as_bytes()).into()
}

pub fn digest_bytes(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        write!(s, "{b:02x}").unwrap();
        s
    })
}

/// Flag, then config file, then `MVTS_OUTPUT_DIR`, then `./out`.
pub fn output_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    flag.or(config)
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

/// `explicit`, or `name` inside the output directory.
pub fn target(explicit: Option<&Path>, dir: &Path, name: &str) -> PathBuf {
    explicit.map_or_else(|| dir.join(name), Path::to_path_buf)
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Writes `body` (a CSV with header) behind a `# config_digest=` comment line.
pub fn write_csv(path: &Path, digest: &[u8; 32], body: &str) -> Result<(), CliError> {
    let text = format!("# config_digest={}\n{body}", hex(digest));
    write_bytes(path, text.as_bytes())
}

/// Inserts a digest comment after the magic line of a plain PBM.
pub fn stamp_pbm(pbm: &str, digest: &[u8; 32]) -> String {
    let (magic, rest) = pbm.split_once('\n').expect("PBM has a magic line");
    format!("{magic}\n# config_digest={}\n{rest}", hex(digest))
}

/// Digest of a command's own arguments, for commands that take no config file.
pub fn args_digest(command: &str, args: &[(&str, String)]) -> [u8; 32] {
    let mut canonical = format!("command = {command:?}\n");
    for (k, v) in args {
        writeln!(canonical, "{k} = {v:?}").unwrap();
    }
    digest(&canonical)
}

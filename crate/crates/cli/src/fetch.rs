//! `fedkan fetch-data`: obtain the four MNIST IDX files and check them
//! against known SHA-256 digests of the uncompressed files.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use sha2::{Digest, Sha256};

use crate::{CliError, CliResult};

/// npm package that ships the raw IDX files under `package/data/`.
pub const DEFAULT_SOURCE: &str = "https://registry.npmjs.org/mnist-data/-/mnist-data-1.2.6.tgz";

pub const MNIST_SHA256: [(&str, &str); 4] = [
    (
        "train-images-idx3-ubyte",
        "ba891046e6505d7aadcbbe25680a0738ad16aec93bde7f9b65e87a2fc25776db",
    ),
    (
        "train-labels-idx1-ubyte",
        "65a50cbbf4e906d70832878ad85ccda5333a97f0f4c3dd2ef09a8a9eef7101c5",
    ),
    (
        "t10k-images-idx3-ubyte",
        "0fa7898d509279e482958e8ce81c8e77db3f2f8254e26661ceb7762c4d494ce7",
    ),
    (
        "t10k-labels-idx1-ubyte",
        "ff7bcfd416de33731a308c3f266cc351222c34898ecbeaf847f06e48f7ec33f2",
    ),
];

fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut f = BufReader::new(File::open(path)?);
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

/// Checks that all four files exist in `dir` with the expected digests.
pub fn verify_mnist_dir(dir: &Path) -> Result<(), String> {
    let mut problems = Vec::new();
    for (name, want) in MNIST_SHA256 {
        let p = dir.join(name);
        match sha256_file(&p) {
            Ok(got) if got == want => {}
            Ok(got) => problems.push(format!("{name}: sha256 {got}, expected {want}")),
            Err(e) => problems.push(format!("{}: {e}", p.display())),
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(problems.join("; "))
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::data(format!("{}: {e}", path.display()))
}

fn copy_into(mut reader: impl Read, dest: &Path) -> CliResult<()> {
    let tmp = dest.with_extension("part");
    let mut f = File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    std::io::copy(&mut reader, &mut f).map_err(|e| io_err(&tmp, e))?;
    std::fs::rename(&tmp, dest).map_err(|e| io_err(dest, e))
}

fn from_directory(src: &Path, dir: &Path) -> CliResult<()> {
    for (name, _) in MNIST_SHA256 {
        let plain = src.join(name);
        let gz = src.join(format!("{name}.gz"));
        if plain.is_file() {
            copy_into(
                File::open(&plain).map_err(|e| io_err(&plain, e))?,
                &dir.join(name),
            )?;
        } else if gz.is_file() {
            let f = File::open(&gz).map_err(|e| io_err(&gz, e))?;
            copy_into(GzDecoder::new(BufReader::new(f)), &dir.join(name))?;
        } else {
            return Err(CliError::data(format!(
                "{} has neither {name} nor {name}.gz",
                src.display()
            )));
        }
    }
    Ok(())
}

/// Extracts the IDX files (plain or gzipped members) from a gzipped tarball.
fn from_archive(archive: &Path, dir: &Path) -> CliResult<()> {
    let f = File::open(archive).map_err(|e| io_err(archive, e))?;
    let mut tar = tar::Archive::new(GzDecoder::new(BufReader::new(f)));
    let mut found = [false; 4];
    for entry in tar.entries().map_err(|e| io_err(archive, e))? {
        let entry = entry.map_err(|e| io_err(archive, e))?;
        let member: PathBuf = entry.path().map_err(|e| io_err(archive, e))?.into_owned();
        let Some(file) = member
            .file_name()
            .and_then(|n| n.to_str())
            .map(str::to_owned)
        else {
            continue;
        };
        for (i, (name, _)) in MNIST_SHA256.iter().enumerate() {
            if file == *name {
                copy_into(entry, &dir.join(name))?;
                found[i] = true;
                break;
            } else if file == format!("{name}.gz") {
                copy_into(GzDecoder::new(entry), &dir.join(name))?;
                found[i] = true;
                break;
            }
        }
    }
    if let Some(i) = found.iter().position(|f| !f) {
        return Err(CliError::data(format!(
            "{} does not contain {}",
            archive.display(),
            MNIST_SHA256[i].0
        )));
    }
    Ok(())
}

fn download(url: &str, dest: &Path) -> CliResult<()> {
    eprintln!("downloading {url}");
    let resp = ureq::get(url)
        .call()
        .map_err(|e| CliError::data(format!("download of {url} failed: {e}")))?;
    copy_into(resp.into_body().into_reader(), dest)
}

pub fn cmd_fetch(dir: &Path, source: &str, force: bool) -> CliResult<()> {
    if !force && verify_mnist_dir(dir).is_ok() {
        println!("MNIST already present and verified in {}", dir.display());
        return Ok(());
    }
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    if source.starts_with("http://") || source.starts_with("https://") {
        let archive = dir.join("mnist-download.tgz");
        download(source, &archive)?;
        let r = from_archive(&archive, dir);
        let _ = std::fs::remove_file(&archive);
        r?;
    } else {
        let src = Path::new(source);
        if src.is_dir() {
            from_directory(src, dir)?;
        } else if src.is_file() {
            from_archive(src, dir)?;
        } else {
            return Err(CliError::data(format!("source {source} not found")));
        }
    }
    verify_mnist_dir(dir)
        .map_err(|e| CliError::data(format!("checksum verification failed: {e}")))?;
    println!("MNIST verified in {}", dir.display());
    Ok(())
}

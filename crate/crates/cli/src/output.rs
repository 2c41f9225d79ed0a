//! CSV writing and the run manifest.

use std::fmt::Display;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

/// Formats a float with 17 significant digits; missing values are empty.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Destination of one CSV table: a file in the output directory or stdout.
pub enum Sink {
    File(PathBuf, BufWriter<File>),
    Stdout(BufWriter<io::Stdout>),
}

impl Sink {
    pub fn open(out: Option<&Path>, name: &str) -> io::Result<Self> {
        match out {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                let path = dir.join(name);
                let file = File::create(&path)?;
                Ok(Sink::File(path, BufWriter::new(file)))
            }
            None => Ok(Sink::Stdout(BufWriter::new(io::stdout()))),
        }
    }

    pub fn row<I, T>(&mut self, fields: I) -> io::Result<()>
    where
        I: IntoIterator<Item = T>,
        T: Display,
    {
        let mut first = true;
        for f in fields {
            if !first {
                self.write_all(b",")?;
            }
            first = false;
            write!(self, "{f}")?;
        }
        self.write_all(b"\n")
    }

    pub fn finish(mut self) -> io::Result<Option<PathBuf>> {
        self.flush()?;
        Ok(match self {
            Sink::File(path, _) => Some(path),
            Sink::Stdout(_) => None,
        })
    }
}

impl Write for Sink {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        match self {
            Sink::File(_, w) => w.write(buf),
            Sink::Stdout(w) => w.write(buf),
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        match self {
            Sink::File(_, w) => w.flush(),
            Sink::Stdout(w) => w.flush(),
        }
    }
}

/// SHA-256 over `"blob <len>\0" + bytes`, the object id git uses in its
/// SHA-256 repository format.
pub fn git_blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub struct Manifest<'a> {
    pub config_path: &'a str,
    pub config_bytes: &'a [u8],
    pub seed: Option<u64>,
    pub subcommand: &'a str,
    pub out_dir: &'a Path,
    pub wall_clock_s: f64,
}

impl Manifest<'_> {
    pub fn write(&self) -> io::Result<()> {
        let mut sink = Sink::open(Some(self.out_dir), "manifest.csv")?;
        sink.row(["key", "value"])?;
        sink.row(["config_path", self.config_path])?;
        sink.row(["seed".to_string(), self.seed.map(|s| s.to_string()).unwrap_or_default()])?;
        sink.row(["subcommand", self.subcommand])?;
        sink.row(["out_dir".to_string(), self.out_dir.display().to_string()])?;
        sink.row(["config_hash".to_string(), git_blob_hash(self.config_bytes)])?;
        sink.row(["wall_clock_s".to_string(), format!("{:.3}", self.wall_clock_s)])?;
        sink.finish().map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        let s = num(0.1);
        assert_eq!(s, "1.0000000000000001e-1");
        assert_eq!(s.parse::<f64>().unwrap(), 0.1);
        assert_eq!(num(-1.018_285_714_285_714_3).parse::<f64>().unwrap(), -1.018_285_714_285_714_3);
        assert_eq!(opt_num(None), "");
    }

    #[test]
    fn blob_hash_tracks_content() {
        let a = git_blob_hash(b"kmax = 1\n");
        assert_eq!(a.len(), 64);
        assert_eq!(a, git_blob_hash(b"kmax = 1\n"));
        assert_ne!(a, git_blob_hash(b"kmax = 2\n"));
    }
}

//! Replica scheduling and raw-sample output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use wigner_fluct::ensembles::SeedDerivation;

use crate::Result;

/// Runs `f` for every replica index and returns results in index order.
///
/// Each replica derives its own stream from its index, so the output does not depend
/// on `parallel` or on the scheduling order.
pub fn map_replicas<T, F>(count: usize, parallel: bool, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if parallel {
        (0..count).into_par_iter().map(f).collect()
    } else {
        (0..count).map(f).collect()
    }
}

pub fn replica_seed(master_seed: u64, replica: usize, label: &str) -> SeedDerivation {
    SeedDerivation::new(master_seed, replica as u64, label)
}

/// One raw value of one entry in one replica.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawValue {
    pub replica: usize,
    pub i: usize,
    pub j: usize,
    pub value: Complex64,
}

/// Writes `replica,entry_i,entry_j,value_re,value_im` rows.
pub fn write_csv(path: &Path, rows: impl IntoIterator<Item = RawValue>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "replica,entry_i,entry_j,value_re,value_im")?;
    for r in rows {
        writeln!(w, "{},{},{},{:e},{:e}", r.replica, r.i, r.j, r.value.re, r.value.im)?;
    }
    w.flush()?;
    Ok(())
}

/// `base` for a single file, `base` with `.{tag}` before the extension otherwise.
pub fn tagged_path(base: &Path, tag: Option<&str>) -> PathBuf {
    let Some(tag) = tag else {
        return base.to_path_buf();
    };
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}.{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{tag}"),
    };
    base.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngExt;

    #[test]
    fn parallel_and_serial_agree() {
        let draw = |r: usize| -> Result<f64> {
            let mut rng = replica_seed(5, r, "probe").rng();
            Ok(rng.random::<f64>())
        };
        let a = map_replicas(257, true, draw).unwrap();
        let b = map_replicas(257, false, draw).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tagged_paths() {
        assert_eq!(tagged_path(Path::new("out/raw.csv"), Some("p1")), PathBuf::from("out/raw.p1.csv"));
        assert_eq!(tagged_path(Path::new("raw"), Some("p0")), PathBuf::from("raw.p0"));
        assert_eq!(tagged_path(Path::new("raw.csv"), None), PathBuf::from("raw.csv"));
    }

    #[test]
    fn csv_layout() {
        let dir = std::env::temp_dir().join(format!("wfluct-csv-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("raw.csv");
        write_csv(&path, [RawValue { replica: 3, i: 0, j: 1, value: Complex64::new(0.5, -2.0) }]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "replica,entry_i,entry_j,value_re,value_im\n3,0,1,5e-1,-2e0\n");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}

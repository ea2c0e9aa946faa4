//! Generate a synthetic IDX image/label pair so the full pipeline can run
//! without downloading anything.
//!
//! Usage: `make_synthetic <dir> <count> [seed] [overlap]`
//!
//! `overlap` in [0, 1) blends each image's class prototype toward a random
//! other class's, making the pool harder for linear classifiers (0 = fully
//! separable classes, the default).

use std::path::Path;
use std::process::exit;

use bilevel_core::data::synthetic::{
    write_synthetic_dataset, write_synthetic_dataset_overlapping,
};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.len() < 3 || args.len() > 5 {
        eprintln!("usage: make_synthetic <dir> <count> [seed] [overlap]");
        exit(2);
    }
    let dir = Path::new(&args[1]);
    let count: usize = match args[2].parse() {
        Ok(n) => n,
        Err(e) => {
            eprintln!("bad count {:?}: {e}", args[2]);
            exit(2);
        }
    };
    let seed: u64 = match args.get(3).map(|s| s.parse()) {
        None => 0,
        Some(Ok(s)) => s,
        Some(Err(e)) => {
            eprintln!("bad seed {:?}: {e}", args[3]);
            exit(2);
        }
    };
    let overlap: f64 = match args.get(4).map(|s| s.parse()) {
        None => 0.0,
        Some(Ok(v)) if (0.0..1.0).contains(&v) => v,
        Some(_) => {
            eprintln!("bad overlap {:?}: expected a number in [0, 1)", args[4]);
            exit(2);
        }
    };
    if let Err(e) = std::fs::create_dir_all(dir) {
        eprintln!("cannot create {}: {e}", dir.display());
        exit(1);
    }
    let written = if overlap > 0.0 {
        write_synthetic_dataset_overlapping(dir, count, seed, overlap)
    } else {
        write_synthetic_dataset(dir, count, seed)
    };
    match written {
        Ok((images, labels)) => {
            println!("{}", images.display());
            println!("{}", labels.display());
        }
        Err(e) => {
            eprintln!("{e}");
            exit(1);
        }
    }
}

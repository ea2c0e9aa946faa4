//! Trace the upper objective along a θ₂ line at high lower-level accuracy.
//!
//! Useful for eyeballing how a dataset shapes the tuning landscape before
//! spending a full run on it: where the valley flattens, how deep the floor
//! is, how steep the approach. Prints one `theta2,F` row per grid point.
//!
//! Usage: landscape_probe <data-dir> <digit-a> <digit-b> <split-seed> <theta1>

use std::path::Path;
use std::process::ExitCode;

use nalgebra::DVector;

use bilevel_core::data::{make_binary_task, read_idx, IdxFile, SplitSpec};
use bilevel_core::dfo::{evaluate_point, AccuracyRequest, EvalCache, ElasticNetObjective};
use bilevel_core::problems::HyperPoint;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [dir, da, db, seed, theta1] = args.as_slice() else {
        eprintln!("usage: landscape_probe <data-dir> <digit-a> <digit-b> <split-seed> <theta1>");
        return ExitCode::from(2);
    };
    let (Ok(da), Ok(db), Ok(seed), Ok(theta1)) = (
        da.parse::<u8>(),
        db.parse::<u8>(),
        seed.parse::<u64>(),
        theta1.parse::<f64>(),
    ) else {
        eprintln!("digits must be 0-9, seed an integer, theta1 a float");
        return ExitCode::from(2);
    };
    match probe(Path::new(dir), da, db, seed, theta1) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn probe(dir: &Path, da: u8, db: u8, seed: u64, theta1: f64) -> Result<(), String> {
    let images = match read_idx(&dir.join("synthetic-images-idx3-ubyte")).map_err(|e| e.to_string())? {
        IdxFile::Images(images) => images,
        IdxFile::Labels(_) => return Err("images file holds labels".into()),
    };
    let labels = match read_idx(&dir.join("synthetic-labels-idx1-ubyte")).map_err(|e| e.to_string())? {
        IdxFile::Labels(labels) => labels,
        IdxFile::Images(_) => return Err("labels file holds images".into()),
    };
    let spec = SplitSpec {
        train_size: 500,
        test_size: 200,
        validation_train_size: 500,
        validation_test_size: 200,
        seed,
        downsample_factor: 4,
        normalize: false,
    };
    let tasks = [da, db]
        .iter()
        .map(|&d| make_binary_task(&images, &labels, d, &spec))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let template = HyperPoint::new(
        DVector::from_vec(vec![1.0, 1.0]),
        DVector::from_vec(vec![-8.0, -8.0]),
        DVector::from_vec(vec![8.0, 8.0]),
    )
    .map_err(|e| e.to_string())?;
    let objective = ElasticNetObjective::new(tasks, template, 1e-8, 1.0).map_err(|e| e.to_string())?;
    let mut cache = EvalCache::new();
    println!("theta2,F");
    let mut t2 = 1.2;
    while t2 > -0.65 {
        let theta = DVector::from_vec(vec![theta1, t2]);
        let eval = evaluate_point(
            &objective,
            &theta,
            &AccuracyRequest::Fixed { iterations: 2000 },
            &mut cache,
        )
        .map_err(|e| e.to_string())?;
        println!("{t2:.2},{:.6}", eval.objective());
        t2 -= 0.15;
    }
    Ok(())
}

//! simulate -> reconstruct -> evaluate through the library pipeline, the
//! same path as the `jointrecon` binary.
//!
//! `cargo run --release --example pipeline -- [output_dir]`

use std::path::PathBuf;

use jointrecon::pipeline::{cmd_evaluate, cmd_reconstruct, cmd_simulate, eval_csv, ExperimentConfig, Method};

fn main() -> jointrecon::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("jointrecon_bundle"));
    let cfg = ExperimentConfig { output_dir: dir.clone(), seed_phantom: 3, seed_motion: 103, ..Default::default() };
    print!("{}", cfg.to_text());

    let manifest = cmd_simulate(&cfg)?;
    println!("\nbundle {} with {} motion states", dir.display(), manifest.num_trs);
    let mut recons = Vec::new();
    for method in Method::ALL {
        let start = std::time::Instant::now();
        let r = cmd_reconstruct(&dir, method, &[])?;
        println!("{method} done in {:.1} s", start.elapsed().as_secs_f64());
        recons.push(r.dir);
    }
    print!("\n{}", eval_csv(&cmd_evaluate(&dir, &recons)?));
    Ok(())
}

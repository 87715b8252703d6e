//! Test data: Shepp-Logan phantom, birdcage coil maps and echo-train
//! trajectories. Writes the images in the crate's binary format.

use jointrecon::io;
use jointrecon::phantom::{birdcage_maps, cartesian_trajectory, phantom_support, shepp_logan};

fn main() -> jointrecon::Result<()> {
    let n = 64;
    let x = shepp_logan(n, 0)?;
    let maps = birdcage_maps(n, 8)?;
    let support = phantom_support(n);
    let rss = maps.rss();
    let (lo, hi) = rss
        .iter()
        .zip(&support)
        .filter(|(_, &s)| s)
        .fold((f64::MAX, f64::MIN), |(lo, hi), (&v, _)| (lo.min(v), hi.max(v)));
    println!("phantom max magnitude {:.3}", x.max_magnitude());
    println!("coil RSS inside the object: [{lo:.3}, {hi:.3}]");

    for (n, etl, accel) in [(384, 8, 1.0), (384, 8, 4.0), (64, 8, 4.0), (64, 8, 8.0)] {
        let t = cartesian_trajectory(n, etl, accel)?;
        println!("n={n} etl={etl} R={accel}: {} TRs, lines of TR 0 {:?}", t.num_trs(), &t.tr_lines[0]);
    }

    let dir = std::env::temp_dir().join("jointrecon_phantom");
    std::fs::create_dir_all(&dir)?;
    io::save_image(dir.join("phantom.cimg"), &x)?;
    io::save_coil_maps(dir.join("maps.cimg"), &maps)?;
    println!("wrote {}", dir.display());
    Ok(())
}

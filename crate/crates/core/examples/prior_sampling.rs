//! Annealed Langevin sampling from an image prior alone.

use jointrecon::prior::{geometric_schedule, GaussianScore, TotalVariationScore};
use jointrecon::sampler::sample_prior;
use jointrecon::ComplexImage;

fn moments(x: &ComplexImage) -> (f64, f64) {
    let v: Vec<f64> = x.data().iter().flat_map(|c| [c.re, c.im]).collect();
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (m, v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / v.len() as f64)
}

fn main() -> jointrecon::Result<()> {
    let n = 32;
    let schedule = geometric_schedule(1.0, 0.05, 8, 200, 2e-3)?;

    let gauss = GaussianScore::isotropic(n, 0.25)?;
    let x = sample_prior(&gauss, &schedule, n, 1)?;
    let (m, v) = moments(&x);
    println!("gaussian prior (variance 0.25): sample mean {m:.3}, variance {v:.3}");

    let tv = TotalVariationScore::new(100.0)?;
    let tv_schedule = geometric_schedule(0.3, 0.003, 8, 200, 0.6 * 0.003f64.powi(2))?;
    let y = sample_prior(&tv, &tv_schedule, n, 1)?;
    println!("TV prior: sample penalty {:.1}, norm {:.3}", tv.penalty(&y, 0.003), y.norm());
    Ok(())
}

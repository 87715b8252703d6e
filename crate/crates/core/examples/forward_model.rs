//! The motion-parameterised forward model: one rigid state per TR, applied
//! as a rotation of k-space coordinates and a linear phase.

use jointrecon::acquisition::{add_noise, rotate_coords, translation_phase, MotionOperator};
use jointrecon::motion::{simulate_motion, MotionState, MotionTrajectory};
use jointrecon::phantom::{birdcage_maps, cartesian_trajectory, shepp_logan};

fn main() -> jointrecon::Result<()> {
    let n = 64;
    let x = shepp_logan(n, 1)?;
    let maps = birdcage_maps(n, 4)?;
    let traj = cartesian_trajectory(n, 8, 4.0)?;
    let op = MotionOperator::new(&maps, &traj)?;
    println!("{} coils, {} TRs, {} samples per coil", op.num_coils(), traj.num_trs(), op.num_coords());

    // conventions: 90 degrees maps (kx, ky) to (-ky, kx); a one-pixel shift in x is exp(-i kx)
    let quarter = MotionTrajectory::new(vec![MotionState::new(90.0, 0.0, 0.0); traj.num_trs()]);
    let k0 = traj.tr_coords(0)[1];
    let k1 = rotate_coords(&traj, &quarter)?.as_slice()[1];
    println!("rotate 90 deg: ({:.4}, {:.4}) -> ({:.4}, {:.4})", k0[0], k0[1], k1[0], k1[1]);
    let shift = MotionTrajectory::new(vec![MotionState::new(0.0, 1.0, 0.0); traj.num_trs()]);
    let coords = rotate_coords(&traj, &shift)?;
    let phase = translation_phase(&traj, &shift, &coords)?;
    println!("shift 1 px in x at kx = {:.4}: phase {:.4}", k0[0], phase[1]);

    let still = op.forward(&x, &MotionTrajectory::zeros(traj.num_trs()))?;
    let kappa = simulate_motion(traj.num_trs(), 2.0, 3)?;
    let moved = op.forward(&x, &kappa)?;
    let diff: f64 = still.samples.iter().zip(&moved.samples).map(|(a, b)| (a - b).norm_sqr()).sum();
    println!("k-space change from motion: {:.3} of the signal energy", diff / still.norm_sqr());

    let noisy = add_noise(&moved, 0.1, 4)?;
    let back = op.adjoint(&noisy, &kappa)?;
    println!("adjoint image norm {:.2}, lipschitz {:.1}", back.norm(), op.lipschitz(30, 1)?);
    Ok(())
}

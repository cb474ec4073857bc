//! Path loss, device placement, fading and the noisy superposition.

use bayaircomp::channel::{
    mac_receive, path_loss_db, sample_block_fading, CellGeometry, HataParams, PathLossMode,
};
use bayaircomp::rng::stream;

fn main() -> bayaircomp::Result<()> {
    let hata = HataParams::default();
    for d in [0.1, 0.25, 0.5, 1.0] {
        println!("d = {d:.2} km: path loss {:.2} dB", path_loss_db(d, &hata)?);
    }

    let geometry = CellGeometry::sample_uniform(5, 1.0, hata, &mut stream(1, "geometry", 0))?;
    println!("distances {:.3?}", geometry.distances_km);
    for mode in [
        PathLossMode::Unit,
        PathLossMode::Relative,
        PathLossMode::Absolute,
    ] {
        let all: Vec<usize> = (0..geometry.len()).collect();
        let amplitudes: Vec<String> = geometry
            .amplitudes(&all, mode)?
            .iter()
            .map(|a| format!("{a:.3e}"))
            .collect();
        println!("{mode:?} amplitudes [{}]", amplitudes.join(", "));
    }

    let channel = sample_block_fading(
        &mut stream(1, "channel", 0),
        &geometry,
        PathLossMode::Relative,
        0.5,
    )?;
    println!("fading {:.3?}", channel.coefficients);
    let blocks: Vec<Vec<f64>> = channel
        .coefficients
        .iter()
        .map(|h| vec![h.signum(); 4])
        .collect();
    let clean = mac_receive(&blocks, &channel, None::<&mut bayaircomp::rng::SimRng>)?;
    let noisy = mac_receive(&blocks, &channel, Some(&mut stream(1, "noise", 0)))?;
    println!("received (noiseless) {clean:.3?}");
    println!("received (noisy)     {noisy:.3?}");
    Ok(())
}

//! One-bit compression of a gradient: moments, centring, signs, and the
//! optional finite-precision moment report.

use bayaircomp::gradient_model::{center_gradient, compress, one_bit_quantize, MomentQuantizer};

fn main() -> bayaircomp::Result<()> {
    let g = [0.31, -0.12, 0.05, 0.44, -0.27, 0.18];
    let (moments, signs) = compress(&g)?;
    println!("mean {:.4}, std {:.4}", moments.mean, moments.std);
    let centred = center_gradient(&g, &moments);
    println!("centred {centred:.4?}");
    assert_eq!(one_bit_quantize(&centred), signs);
    println!("signs {:?}", signs.entries());

    for bits in [2, 4, 8] {
        let q = MomentQuantizer { bits }.quantize(&moments, moments.std)?;
        println!("{bits}-bit report: mean {:.4}, std {:.4}", q.mean, q.std);
    }
    Ok(())
}

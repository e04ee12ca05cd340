//! Draws from GIG(a, b, 1/2), the conditional law of the noise scales, and
//! compares the sample mean with the closed form.

use robust_sysid::dist::{GigParams, RngHandle};

fn main() -> robust_sysid::Result<()> {
    let mut rng = RngHandle::new(1, 0);
    let draws = 200_000;
    println!("     a        b    sample mean   exact mean");
    for (a, b) in [(2.0, 0.5), (0.5, 8.0), (400.0, 0.004), (1.0, 1e-12)] {
        let gig = GigParams::half(a, b)?;
        let mean = (0..draws).map(|_| gig.sample(&mut rng)).sum::<f64>() / draws as f64;
        println!("{a:>6} {b:>8} {mean:>14.6} {:>12.6}", gig.mean());
    }
    Ok(())
}

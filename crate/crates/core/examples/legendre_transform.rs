//! Discrete Legendre transform of a tabulated quadratic, checked against the
//! closed form, and the selfduality gap of `L(a, b) = a^2/2 + b^2/2`.

use sdhom::convex::{legendre_transform, selfdual_gap_check, BoxGrid, GapOptions, TabulatedFunction};

fn main() -> sdhom::Result<()> {
    let g = BoxGrid::new(1, 4.0, 129)?;
    let f = TabulatedFunction::from_fn(vec![g], |x| 0.5 * 3.0 * x[0] * x[0])?;
    // maximizers stay inside the box for |p| <= 3 * 4
    let out = BoxGrid::new(1, 2.0, 33)?;
    let fs = legendre_transform(&f, &[out])?;
    let mut worst = 0.0f64;
    for k in 0..fs.len() {
        let p = fs.node(k)[0];
        worst = worst.max((fs.values()[k] - p * p / 6.0).abs());
    }
    println!("f(x) = 3x^2/2: max |f* - p^2/6| = {worst:.3e} (h = {})", f.max_spacing());

    let g = BoxGrid::new(1, 2.0, 65)?;
    let l = TabulatedFunction::from_fn(vec![g.clone(), g], |z| 0.5 * (z[0] * z[0] + z[1] * z[1]))?;
    let r = selfdual_gap_check(&l, &GapOptions::default())?;
    println!("L(a, b) = (a^2 + b^2)/2: selfduality gap {:.3e}, min L - ab {:.3e}", r.max_gap, r.min_basic_margin);
    Ok(())
}

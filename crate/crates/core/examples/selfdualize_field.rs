//! Build the selfdual Lagrangian of a monotone field from its Fitzpatrick
//! function and recover the graph from the zero set of `L - <a, b>`.

use sdhom::convex::graph_extract;
use sdhom::fields::{graph_deviation, selfdualize_region, FieldKind, Growth, Law, MonotoneField, SelfdualizeOptions};

fn main() -> sdhom::Result<()> {
    let growth = Growth {
        c1: 1.0,
        c2: 0.25,
        m1: 1.0,
        m2: 1.0,
        p: 2.0,
    };
    // subdifferential of |x|: set-valued at the origin
    let law = Law::Polyline {
        points: vec![(-1.0, -1.0), (0.0, -1.0), (0.0, 1.0), (1.0, 1.0)],
    };
    let field = MonotoneField::uniform(FieldKind::SampledGraph1d, 1, law, growth)?;
    let opts = SelfdualizeOptions::new(4.0, 65);
    let t = selfdualize_region(&field, 0, &opts)?;
    println!("selfduality gap {:.3e}, sandwich margins {:?}", t.gap.max_gap, t.sandwich_margin);
    println!("graph deviation {:.3e} (h = {})", graph_deviation(&t.lagrangian, &field, 0, 0.5, 1e-9)?, opts.spacing());
    for a in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        let img = graph_extract(&t.lagrangian, &[a], 1e-9)?;
        match img.interval {
            Some((lo, hi)) if hi > lo => println!("a = {a:5.2}: b in [{lo:.3}, {hi:.3}]"),
            Some((lo, _)) => println!("a = {a:5.2}: b = {lo:.3}"),
            None => println!("a = {a:5.2}: empty"),
        }
    }
    Ok(())
}

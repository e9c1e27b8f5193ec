use hyperdist::*;
use hyperdist::pairing::bump_mass;
use std::time::Instant;
fn main() {
    let quad = Quadrature::new(QuadratureConfig::default());
    let grid = OmegaGrid::default_1d();
    let cfg = NetConfig::default();
    let domain = DomainBox::new(vec![(-2.0, 2.0)]);
    let k = CompactBox::new(vec![(-1.0, 1.0)]);
    let mass = bump_mass(&quad);

    let dirac = format!("omega*bump(omega*x)/{mass}");
    for src in ["omega*sin(omega*x)", "sin(x)", dirac.as_str()] {
        let t = Instant::now();
        let f = NetFunction::new(parse(src, 1).unwrap(), domain.clone());
        match local_structure(&quad, &f, &k, &grid, &cfg, 6) {
            Ok(d) => {
                println!("{src}: alpha={:?} overall={} in {:?}", d.alpha.0, d.report.overall, t.elapsed());
                println!("  residual max_rel={:.3e} pass={}", d.report.residual.max_rel, d.report.residual.pass);
                println!("  sup label={:?} cross_ratio={:.3} pass={}", d.report.sup.class.label, d.report.sup.cross_grid_ratio, d.report.sup.pass);
                println!("  s_cont={:?}", d.report.s_modulus.as_ref().map(|m| m.s_continuous));
                println!("  pairing equiv max={:.3e} pass={}", d.report.pairing_equivalence.max_residual, d.report.pairing_equivalence.pass);
            }
            Err(e) => println!("{src}: FAILED: {e} after {:?}", t.elapsed()),
        }
    }
}

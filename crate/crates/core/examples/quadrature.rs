//! Angular quadrature rules and the moments the solver relies on.

use aplr::angular::QuadratureSet;

fn main() -> aplr::Result<()> {
    let gl = QuadratureSet::gauss_legendre_1d(8)?;
    println!("Gauss-Legendre, {} nodes, measure {:.6}", gl.count(), gl.measure());
    for (mu, w) in gl.omega(0).iter().zip(gl.weights()) {
        println!("  mu = {mu:+.6}  w = {w:.6}");
    }
    println!("  <mu^2> = {:.12} (exact 1/3)", gl.second_moment(0, 0));
    println!("  C_B    = {:.6}", gl.c_b(0));

    let cl = QuadratureSet::chebyshev_legendre_2d(4)?;
    println!("\nChebyshev-Legendre on the sphere, {} directions", cl.count());
    for j in 0..2 {
        for l in 0..2 {
            print!("  <O{j} O{l}> = {:+.6}", cl.second_moment(j, l));
        }
        println!();
    }
    let mean_ox = cl.average(|k| cl.omega(0)[k]);
    println!("  <Ox> = {mean_ox:.2e}, C_B = ({:.4}, {:.4})", cl.c_b(0), cl.c_b(1));
    Ok(())
}

//! Per-coordinate decomposition of the objective's directional derivative,
//! checked against one-sided finite differences.

use featkrr::kernel::{Direction, KernelSpec};
use featkrr::ridge::krr_fit;
use featkrr::scenario::{generate, ScenarioSpec};
use featkrr::variation::{coordinate_decomposition, finite_difference_check, Tolerances};

fn main() -> featkrr::Result<()> {
    let sc = generate(&ScenarioSpec::noise_elimination(4, 300, 0.1, 2))?;
    let spec = KernelSpec::laplace();
    let lambda = 1e-2;
    let beta = [1.0, 0.0, 0.5, 0.0];

    let fit = krr_fit(&spec, &sc.data, &beta, lambda)?;
    let report = coordinate_decomposition(&spec, &sc.data, &fit)?;
    for (k, g) in &report.smooth_grad {
        println!("g_{k} = {g:+.5e}");
    }
    for (k, h) in &report.onesided_coeff {
        println!("h_{k} = {h:+.5e}  (descent available if negative)");
    }
    let tol = Tolerances::default_for(&sc.data, lambda);
    println!("stationary at tol {:.1e}: {}", tol.g, report.is_stationary);

    let v = Direction::new(vec![0.3, -1.0, 0.2, 1.0])?;
    for row in finite_difference_check(
        &spec,
        &sc.data,
        &beta,
        lambda,
        &v,
        &[1e-3, 1e-4, 1e-5, 1e-6],
    )? {
        println!(
            "s = {:.0e}: analytic {:+.8e} numeric {:+.8e} rel err {:.1e}",
            row.step, row.analytic, row.numeric, row.rel_err
        );
    }
    println!("reconstruction {:+.8e}", report.reconstruct(&v));
    Ok(())
}

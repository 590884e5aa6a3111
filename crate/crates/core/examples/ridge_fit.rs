//! Solves the inner ridge problem on a small sample and checks its identities.

use featkrr::kernel::KernelSpec;
use featkrr::ridge::{identity_defects, krr_fit, predict};
use featkrr::scenario::{generate, ScenarioSpec};

fn main() -> featkrr::Result<()> {
    let sc = generate(&ScenarioSpec::noise_elimination(4, 300, 0.1, 1))?;
    let spec = KernelSpec::laplace();
    let beta = [1.0, 1.0, 0.0, 0.0];
    println!("mean(y^2) = {:.4}", sc.data.mean_y_sq());
    for lambda in [1.0, 1e-1, 1e-2, 1e-3] {
        let fit = krr_fit(&spec, &sc.data, &beta, lambda)?;
        let defects = identity_defects(&spec, &sc.data, &fit)?;
        println!(
            "lambda = {lambda:<6} J = {:.5}  lambda*|f|^2 = {:.5}  worst identity defect = {:.1e}",
            fit.objective,
            lambda * fit.rkhs_norm_sq,
            defects.max()
        );
    }
    let fit = krr_fit(&spec, &sc.data, &beta, 1e-2)?;
    let z = [0.5, 1.0, 0.0, 0.0];
    println!(
        "f(z) = {:.4}, truth {:.4}",
        predict(&fit, &spec, &sc.data, &z)?,
        sc.truth.regression(&z)
    );
    Ok(())
}

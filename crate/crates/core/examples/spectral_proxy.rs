//! Monte Carlo relevance proxy for each coordinate on a main-effect design,
//! and how the gap to the scaled derivative shrinks with lambda.

use featkrr::kernel::KernelSpec;
use featkrr::proxy::{decomposition_gap, gap_scaling, grouped_conditional_mean, proxy_anova};
use featkrr::scenario::{generate, ScenarioSpec};

fn main() -> featkrr::Result<()> {
    let sc = generate(&ScenarioSpec::main_effect(2000, 1, 7))?;
    let spec = KernelSpec::laplace();
    let beta = [1.0, 0.0, 0.0];
    let cm = grouped_conditional_mean(&sc.data, &[0]);

    for coord in 1..3 {
        let p = proxy_anova(&spec, &sc.data, &beta, coord, Some(&cm), 5000, 1)?;
        println!("M_{coord} = {:.4e} +/- {:.1e}", p.value, p.std_error);
    }

    let rows = decomposition_gap(
        &spec,
        &sc.data,
        &beta,
        1,
        &[1e-1, 1e-2, 1e-3, 1e-4],
        &cm,
        5000,
        1,
    )?;
    for r in &rows {
        println!(
            "lambda = {:.0e}: lambda*DJ = {:+.4e}  gap = {:.3e}",
            r.lambda, r.scaled_derivative, r.gap
        );
    }
    let (slope, c) = gap_scaling(&rows);
    println!("gap ~ {c:.3e} * lambda^{slope:.2}");
    Ok(())
}

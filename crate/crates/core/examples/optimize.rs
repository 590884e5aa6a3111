//! Multistart optimization of the weights on a design with six noise coordinates.

use featkrr::kernel::KernelSpec;
use featkrr::optimizer::{multistart, OptimizerConfig};
use featkrr::scenario::{generate, support_metrics, ScenarioSpec};

fn main() -> featkrr::Result<()> {
    let sc = generate(&ScenarioSpec::noise_elimination(8, 1000, 0.1, 3))?;
    let spec = KernelSpec::laplace();
    let starts = vec![vec![0.0; 8], vec![1.0; 8]];
    let res = multistart(&spec, &sc.data, 1e-2, &OptimizerConfig::default(), &starts)?;
    for s in &res.starts {
        println!(
            "start {}: {:?} after {} iterations, J = {:.5}, support {:?}",
            s.start, s.status, s.iterations, s.objective, s.support
        );
    }
    let best = res.best();
    println!("best beta = {:.4?}", best.terminal_beta());
    let m = support_metrics(best.terminal_beta(), &sc.truth.s_star, 0.0);
    println!("exact recovery of {:?}: {}", m.s_star, m.exact_recovery);
    Ok(())
}

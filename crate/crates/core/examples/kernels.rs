//! Evaluates the Laplace and Gaussian kernels and a two-atom mixture, and
//! shows that the ℓ1 kernel's directional derivative is one-sided at a zero weight.

use featkrr::kernel::{Atom, Direction, KernelFamily, KernelSpec, MixtureMeasure};

fn main() -> featkrr::Result<()> {
    let x = [0.3, -1.0];
    let xp = [1.1, 0.5];
    let beta = [1.0, 0.0];

    let mix = MixtureMeasure::new(vec![Atom { t: 1.0, p: 0.5 }, Atom { t: 2.0, p: 0.5 }])?;
    for (name, spec) in [
        ("laplace", KernelSpec::laplace()),
        ("gaussian", KernelSpec::gaussian()),
        (
            "l1 mixture",
            KernelSpec::new(KernelFamily::L1Mixture, mix.clone()),
        ),
        (
            "radial mixture",
            KernelSpec::new(KernelFamily::RadialMixture, mix.clone()),
        ),
    ] {
        let k = spec.kernel_eval(&beta, &x, &xp)?;
        let up = spec.dkernel_directional(&beta, &x, &xp, &Direction::unit(2, 1))?;
        let down = spec.dkernel_directional(&beta, &x, &xp, &Direction::new(vec![0.0, -1.0])?)?;
        println!("{name:>15}: K = {k:.6}  DK[+e2] = {up:+.6}  DK[-e2] = {down:+.6}");
    }
    println!(
        "psi(1) for the mixture = {:.7}",
        KernelSpec::new(KernelFamily::L1Mixture, mix).psi(1.0)?
    );
    Ok(())
}

//! Derivatives of internal energies along (id + t v)_♯ μ, and the two routes to
//! the relative-entropy Hessian.

use gcm::density::DensityModel;
use gcm::evaluator::{Potential, PressureFamily};
use gcm::transport::{energy_derivative, energy_derivative_fd, hessian_two_routes, AnalyticField, FieldTerm, Trig};

fn main() -> anyhow::Result<()> {
    let mu0 = DensityModel::quartic(0.5, 0.25, 0.0)?;
    let grid = mu0.build_grid(1e-12)?;
    let v = AnalyticField::velocity(1, vec![FieldTerm::trig(0, 0.3, Trig::Sin, 1.0, 0), FieldTerm::monomial(0, 0.2, &[2])])?;
    let potential = Potential::standard_gaussian(1);

    for family in [PressureFamily::Entropy, PressureFamily::power(2.0)?, PressureFamily::power(0.7)?] {
        for n in 1..=3 {
            let formula = energy_derivative(&mu0, &v, &potential, &family, n, &grid)?;
            let fd = energy_derivative_fd(&mu0, &v, &potential, &family, n, &grid)?;
            println!("{family:?} n={n}: {formula:+.10} FD {:+.10}", fd.value);
        }
    }

    let h = hessian_two_routes(&mu0, &v, &potential, &grid)?;
    println!("Hessian: transport {:.12} integrated {:.12}", h.transport, h.integrated);
    Ok(())
}

//! Time derivatives of the entropy along the heat flow: forest values against the
//! Gaussian closed form, finite differences, and the one-dimensional Γ̃ integrands.

use gcm::density::DensityModel;
use gcm::evaluator::{entropy_time_derivative, forest_values, gaussian_forest_value, ledoux_integrand, CompileCache, Samples};

fn main() -> anyhow::Result<()> {
    let cache = CompileCache::new();

    let g = DensityModel::gaussian(&[0.0, 0.0], 2.0)?;
    let grid = g.build_grid(1e-11)?;
    for (m, v) in forest_values(5, &g, &grid, &cache)?.iter().enumerate() {
        let exact = gaussian_forest_value(&g, m + 1).expect("Gaussian");
        println!("Gaussian 2-d, s=2, m={}: {:.12} (exact {exact})", m + 1, v.value);
    }

    let q = DensityModel::quartic(0.25, 0.5, 0.0)?;
    let t = 0.5;
    let mt = q.heat_evolve(t)?;
    let grid = mt.build_grid(1e-11)?;
    let values = forest_values(4, &mt, &grid, &cache)?;
    let samples = Samples::new(&mt, &grid, 4)?;
    for (i, v) in values.iter().enumerate() {
        let m = i + 1;
        let fd = entropy_time_derivative(&q, t, m, 1e-12)?;
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        print!("quartic t={t} m={m}: {:.10} FD {:.10}", v.value, sign * fd.value);
        if m >= 3 {
            let closed = samples.integrate_with(|s| ledoux_integrand(m, s).unwrap_or(f64::NAN)).value;
            print!(" closed form {:.10}", closed * 2f64.powi(m as i32 - 1));
        }
        println!();
    }
    Ok(())
}

//! Derivatives of a linear functional along a transport flow: finite differences
//! against the sum over convective derivatives, and the collapse along a geodesic.

use std::sync::Arc;

use gcm::density::DensityModel;
use gcm::transport::{wasserstein_fdb, AnalyticField, FieldTerm, FlowSettings, Functional, Geodesic, TransportCouple, Trig};

fn main() -> anyhow::Result<()> {
    let mu0 = DensityModel::quartic(0.5, 0.25, 0.0)?;
    let grid = mu0.build_grid(1e-12)?;
    let f = Functional::Linear(AnalyticField::scalar(
        1,
        vec![FieldTerm::trig(0, 1.0, Trig::Cos, 1.5, 0), FieldTerm::monomial(0, 0.25, &[4])],
    )?);

    let v = AnalyticField::velocity(
        1,
        vec![FieldTerm::trig(0, 0.3, Trig::Sin, 1.0, 0).in_time(&[1.0, 0.5]), FieldTerm::monomial(0, -0.1, &[2])],
    )?;
    let flow = TransportCouple { mu0: mu0.clone(), velocity: Arc::new(v), settings: FlowSettings::default() };
    for n in 1..=4 {
        let r = wasserstein_fdb(&flow, &f, n, 0.4, &grid)?;
        println!("flow n={n}: FD {:+.10} formula {:+.10} terms {:?}", r.lhs.value, r.rhs, r.terms);
    }

    let v = AnalyticField::velocity(1, vec![FieldTerm::trig(0, 0.3, Trig::Sin, 1.0, 0)])?;
    let geodesic = Geodesic::new(mu0.clone(), v, &grid)?;
    let geo = TransportCouple { mu0, velocity: Arc::new(geodesic), settings: FlowSettings::default() };
    for n in 1..=4 {
        let r = wasserstein_fdb(&geo, &f, n, 0.3, &grid)?;
        println!("geodesic n={n}: FD {:+.10} formula {:+.10} terms {:?}", r.lhs.value, r.rhs, r.terms);
    }
    Ok(())
}

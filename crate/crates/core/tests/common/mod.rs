//! Reference computations that share no code with the library.
#![allow(dead_code)]

use segq::departure::DepartureModel;
use segq::policy::{ArrivalSpec, ThresholdPolicy};
use segq::service::{ServiceDist, ServiceSpec};

/// Gaussian elimination with partial pivoting on a dense system.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor != 0.0 {
                for k in col..n {
                    a[row][k] -= factor * a[col][k];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Embedded chain of an M/M/1 queue holding at most `k + 1` customers,
/// observed just after departures, solved by elimination.
pub fn mm1_embedded_stationary(lambda: f64, mu: f64, k: usize) -> Vec<f64> {
    let n = k + 1;
    let q = lambda / (lambda + mu);
    let arrivals = |j: usize| (1.0 - q) * q.powi(j as i32);
    let mut p = vec![vec![0.0; n]; n];
    for (i, row) in p.iter_mut().enumerate() {
        let start = i.max(1) - 1;
        for (j, cell) in row.iter_mut().enumerate().take(k).skip(start) {
            *cell = arrivals(j - start);
        }
        // Everything at or beyond the buffer limit lands in state k.
        row[k] = q.powi((k - start) as i32);
    }
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = p[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    a[n - 1] = vec![1.0; n];
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    gauss_solve(a, b)
}

/// Post-departure law from the M/M/1/(k+1) time-average law `ρ^n`:
/// departures see what accepted arrivals see.
pub fn mm1_truncated_geometric(lambda: f64, mu: f64, k: usize) -> Vec<f64> {
    let rho = lambda / mu;
    let w: Vec<f64> = (0..=k).map(|n| rho.powi(n as i32)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Transition matrix rebuilt entry by entry from the arrival-count law:
/// `P(i, j) = P(N_{r} = j - max(i,1) + 1)` with the tail lumped into `K`.
pub fn naive_matrix(policy: &ThresholdPolicy, services: &ServiceSpec, arrivals: &ArrivalSpec) -> Vec<Vec<f64>> {
    let k = policy.capacity();
    let mut m = vec![vec![0.0; k + 1]; k + 1];
    for (i, row) in m.iter_mut().enumerate() {
        let s = i.max(1);
        let region = policy.region_of(s);
        let mut used = 0.0;
        for (j, cell) in row.iter_mut().enumerate().take(k).skip(s - 1) {
            *cell = arrival_count_pmf(&services.regions()[region], arrivals.rate(), j + 1 - s);
            used += *cell;
        }
        row[k] = (1.0 - used).max(0.0);
    }
    m
}

/// `P(N = n)` for Poisson arrivals during one service, by direct series or
/// numerical integration of `e^{-λt}(λt)^n/n! g(t)`.
pub fn arrival_count_pmf(service: &ServiceDist, lambda: f64, n: usize) -> f64 {
    match *service {
        ServiceDist::Deterministic { duration } => {
            let x = lambda * duration;
            (-x + n as f64 * x.ln() - ln_fact(n)).exp()
        }
        ServiceDist::Exponential { rate } => {
            let q = lambda / (lambda + rate);
            (1.0 - q) * q.powi(n as i32)
        }
        ServiceDist::Erlang { phases, rate } => {
            let k = phases as f64;
            let f = |t: f64| {
                if t <= 0.0 {
                    return 0.0;
                }
                (-(lambda + rate) * t + (n as f64 + k - 1.0) * t.ln() + n as f64 * lambda.ln() + k * rate.ln()
                    - ln_fact(n)
                    - ln_fact(phases as usize - 1))
                .exp()
            };
            let scale = (n as f64 + k) / (lambda + rate);
            simpson(f, 0.0, 40.0 * scale + 40.0 / (lambda + rate), 20_000)
        }
    }
}

pub fn ln_fact(n: usize) -> f64 {
    (1..=n).map(|i| (i as f64).ln()).sum()
}

/// Repeated `p ← p (P + I)/2` until the change is below `tol`.
pub fn power_iteration(m: &[Vec<f64>], tol: f64, max_iter: usize) -> Vec<f64> {
    let n = m.len();
    let mut p = vec![1.0 / n as f64; n];
    for _ in 0..max_iter {
        let mut next = vec![0.0; n];
        for (i, pi) in p.iter().enumerate() {
            for (j, mij) in m[i].iter().enumerate() {
                next[j] += pi * mij;
            }
        }
        let next: Vec<f64> = next.iter().zip(&p).map(|(a, b)| 0.5 * (a + b)).collect();
        let change = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        p = next;
        if change < tol {
            break;
        }
    }
    let s: f64 = p.iter().sum();
    p.into_iter().map(|x| x / s).collect()
}

/// Composite Simpson rule with `n` (rounded up to even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Root of a continuous `f` with a sign change on `[lo, hi]`.
pub fn bisection<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `E[e^{-sX}]` of the departure model by quadrature of its density plus the atom sum.
pub fn departure_transform_by_quadrature(model: &DepartureModel, s: f64) -> f64 {
    let e = &model.empty;
    let f = |t: f64| e.density(t) * (-s * t).exp();
    let body = simpson(f, e.t0, e.t1 - 1e-15, 20_000);
    let tail_end = e.t1 + 60.0 / (s + e.alpha);
    let tail = simpson(|t| e.amp_c * (-(e.alpha + s) * t).exp(), e.t1, tail_end, 200_000);
    model.atoms.iter().map(|a| a.weight * (-s * a.time).exp()).sum::<f64>() + body + tail
}

/// M/M/1 mean sojourn `1/(μ-λ)`.
pub fn mm1_sojourn(lambda: f64, mu: f64) -> f64 {
    1.0 / (mu - lambda)
}

/// M/M/1 mean wait in queue `λ/(μ(μ-λ))`.
pub fn mm1_wait(lambda: f64, mu: f64) -> f64 {
    lambda / (mu * (mu - lambda))
}

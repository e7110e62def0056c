//! Shared inputs for the criterion benchmarks.

use svcredit_core::pruned_irf::{block_sizes, parse_solution};
use svcredit_core::{simulate, PrunedSolution, SvParams, TimeSeries};

/// Simulated credit-growth sample of length `t_len` at the credit posterior mean.
pub fn sv_sample(t_len: usize, seed: u64) -> (TimeSeries, SvParams) {
    let p = SvParams::credit_posterior_mean();
    let sim = simulate(&p, t_len, seed).expect("valid parameters");
    (sim.y, p)
}

/// Stable pruned solution with `n` states and `m` controls and every
/// higher-order block filled from a fixed formula.
pub fn pruned_solution(n: usize, m: usize) -> PrunedSolution {
    let (n1, n2, n3) = block_sizes(n);
    let mut s = format!("labels states {n}\n");
    for i in 0..n {
        s.push_str(&format!("x{i} log\n"));
    }
    s.push_str(&format!("labels controls {m}\n"));
    for i in 0..m {
        s.push_str(&format!("y{i} log\n"));
    }
    let wave = |r: usize, c: usize| ((3 * r + 7 * c + 1) as f64).sin();
    let mut mat = |name: &str, rows: usize, cols: usize, f: &dyn Fn(usize, usize) -> f64| {
        s.push_str(&format!("matrix {name} {rows} {cols}\n"));
        for r in 0..rows {
            let row: Vec<String> = (0..cols).map(|c| format!("{}", f(r, c))).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
    };
    let diag = 0.9 / n as f64;
    mat("h_v", n, n1, &|r, c| {
        if c < n {
            if r == c {
                0.5
            } else {
                0.4 * diag * wave(r, c)
            }
        } else {
            0.3 * wave(r, c)
        }
    });
    mat("H_vv", n, n2, &|r, c| 0.02 * wave(r, c));
    mat("H_vvv", n, n3, &|r, c| 0.01 * wave(r, c));
    mat("h_ssv", n, n1, &|r, c| 0.02 * wave(r, c));
    mat("h_sss", n, 1, &|r, c| 0.01 * wave(r, c));
    mat("g_v", m, n1, &|r, c| 0.5 * wave(r, c));
    mat("G_vv", m, n2, &|r, c| 0.02 * wave(r, c));
    mat("G_vvv", m, n3, &|r, c| 0.01 * wave(r, c));
    mat("g_ssv", m, n1, &|r, c| 0.02 * wave(r, c));
    mat("g_sss", m, 1, &|r, c| 0.01 * wave(r, c));
    parse_solution(&s).expect("well-formed solution")
}

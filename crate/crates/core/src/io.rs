//! Plain-text snapshot tables.

use std::fmt::Write as _;

use crate::flux::pow_k;
use crate::solver1d::Snapshot1D;
use crate::solver2d::Snapshot2D;

fn header(t: f64, k: f64, eps: f64) -> String {
    format!("# t={t:.12e} k={k} eps={eps}\n")
}

/// Columns `x rho p`.
pub fn snapshot_1d_table(s: &Snapshot1D) -> String {
    let g = s.field.grid();
    let mut out = header(s.t, s.k, s.eps);
    out.push_str("# x rho p\n");
    for (i, &r) in s.field.values().iter().enumerate() {
        let _ = writeln!(out, "{:.12e} {:.17e} {:.17e}", g.center(i), r, pow_k(r, s.k));
    }
    out
}

/// Columns `x y rho p`, row-major with x fastest.
pub fn snapshot_2d_table(s: &Snapshot2D) -> String {
    let g = s.field.grid();
    let mut out = header(s.t, s.k, s.eps);
    out.push_str("# x y rho p\n");
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let [x, y] = g.center(i, j);
            let r = s.field.get(i, j);
            let _ = writeln!(out, "{x:.12e} {y:.12e} {r:.17e} {:.17e}", pow_k(r, s.k));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DensityField, Grid1D};

    #[test]
    fn one_d_layout() {
        let g = Grid1D::new(0.0, 1.0, 4).unwrap();
        let field = DensityField::from_values(g, vec![0.0, 0.5, 1.0, 0.25]).unwrap();
        let s = Snapshot1D { t: 0.5, k: 2.0, eps: 0.0, field };
        let text = snapshot_1d_table(&s);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# t=5.000000000000e-1 k=2 eps=0"));
        assert_eq!(lines.len(), 6);
        let cols: Vec<f64> = lines[3].split(' ').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols, vec![0.375, 0.5, 0.25]);
    }
}

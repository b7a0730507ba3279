//! Composite Gauss-Legendre quadrature.

const NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// Integral of `f` over `[a, b]` with `panels` equal 5-point panels.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        let half = 0.5 * h;
        let mut s = 0.0;
        for (x, w) in NODES.iter().zip(WEIGHTS) {
            s += w * f(mid + half * x);
        }
        total += s * half;
    }
    total
}

/// Gauss nodes and weights for `[a, b]` split at every breakpoint inside the
/// interval. The `panels` budget is shared among the pieces in proportion to
/// their length, with at least one panel each.
pub fn nodes_piecewise(a: f64, b: f64, breaks: &[f64], panels: usize) -> Vec<(f64, f64)> {
    if b <= a {
        return Vec::new();
    }
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&c| c > a && c < b).collect();
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    let scale = panels.max(1) as f64 / (b - a);
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let n = ((w[1] - w[0]) * scale).ceil().max(1.0) as usize;
        let h = (w[1] - w[0]) / n as f64;
        for p in 0..n {
            let mid = w[0] + (p as f64 + 0.5) * h;
            for (x, wt) in NODES.iter().zip(WEIGHTS) {
                out.push((mid + 0.5 * h * x, wt * 0.5 * h));
            }
        }
    }
    out
}

/// Integral over `[a, b]` on the nodes of [`nodes_piecewise`].
pub fn integrate_piecewise(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    breaks: &[f64],
    panels: usize,
) -> f64 {
    nodes_piecewise(a, b, breaks, panels)
        .into_iter()
        .map(|(x, w)| w * f(x))
        .sum()
}

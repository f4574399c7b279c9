//! Independent oracles shared by the integration suites.
#![allow(dead_code, clippy::excessive_precision)]

/// Minimum-cost transport between two distributions on bins `0..h` with
/// ground cost `|i - j|`, solved as a min-cost flow by successive shortest
/// paths (Bellman-Ford on the residual graph). Makes no use of CDFs.
pub fn transport_cost(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    let h = p.len();
    let source = 2 * h;
    let sink = 2 * h + 1;
    let nodes = 2 * h + 2;
    // (from, to, residual capacity, cost); edge e ^ 1 is the reverse of e
    let mut edges: Vec<(usize, usize, f64, f64)> = Vec::new();
    let mut add = |a, b, cap, cost| {
        edges.push((a, b, cap, cost));
        edges.push((b, a, 0.0, -cost));
    };
    for i in 0..h {
        add(source, i, p[i], 0.0);
        add(h + i, sink, q[i], 0.0);
        for j in 0..h {
            add(i, h + j, f64::INFINITY, (i as f64 - j as f64).abs());
        }
    }
    let mut total_cost = 0.0;
    loop {
        let mut dist = vec![f64::INFINITY; nodes];
        let mut via = vec![usize::MAX; nodes];
        dist[source] = 0.0;
        for _ in 0..nodes {
            let mut changed = false;
            for (e, &(a, b, cap, cost)) in edges.iter().enumerate() {
                if cap > 1e-15 && dist[a] + cost < dist[b] - 1e-12 {
                    dist[b] = dist[a] + cost;
                    via[b] = e;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if !dist[sink].is_finite() {
            break;
        }
        let mut push = f64::INFINITY;
        let mut v = sink;
        while v != source {
            let e = via[v];
            push = push.min(edges[e].2);
            v = edges[e].0;
        }
        let mut v = sink;
        while v != source {
            let e = via[v];
            edges[e].2 -= push;
            edges[e ^ 1].2 += push;
            v = edges[e].0;
        }
        total_cost += push * dist[sink];
    }
    total_cost
}

/// Random distribution on `h` bins; some entries are forced to zero.
pub fn random_distribution(h: usize, rng: &mut impl rand::Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..h)
        .map(|_| if rng.random_bool(0.25) { 0.0 } else { rng.random::<f64>() })
        .collect();
    if v.iter().all(|x| *x == 0.0) {
        v[rng.random_range(0..h)] = 1.0;
    }
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Central difference of `f` at `x` along coordinate `i`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize, step: f64) -> f64 {
    let mut plus = x.to_vec();
    let mut minus = x.to_vec();
    plus[i] += step;
    minus[i] -= step;
    (f(&plus) - f(&minus)) / (2.0 * step)
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// `Φ(x)` evaluated with 40-digit arithmetic (mpmath `ncdf`).
pub const NORMAL_CDF_REFERENCE: [(f64, f64); 13] = [
    (-8.0, 6.220_960_574_271_784_1e-16),
    (-5.0, 2.866_515_718_791_939_1e-7),
    (-3.5, 0.000_232_629_079_035_525_036_35),
    (-1.96, 0.024_997_895_148_220_436_213),
    (-1.0, 0.158_655_253_931_457_051_41),
    (-0.3, 0.382_088_577_811_047_366_93),
    (0.0, 0.5),
    (0.25, 0.598_706_325_682_923_724_24),
    (1.0, 0.841_344_746_068_542_948_59),
    (1.96, 0.975_002_104_851_779_563_79),
    (2.79, 0.997_364_597_922_095_047_71),
    (3.5, 0.999_767_370_920_964_474_96),
    (6.0, 0.999_999_999_013_412_354_96),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transport_oracle_on_point_masses() {
        let mut p = vec![0.0; 10];
        let mut q = vec![0.0; 10];
        p[2] = 1.0;
        q[6] = 1.0;
        assert!((transport_cost(&p, &q) - 4.0).abs() < 1e-12);
        let u = vec![0.25; 4];
        let e = vec![1.0, 0.0, 0.0, 0.0];
        assert!((transport_cost(&u, &e) - 1.5).abs() < 1e-12);
    }
}

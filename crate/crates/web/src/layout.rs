//! Force-directed vertex placement for drawing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ITERATIONS: usize = 250;

/// Fruchterman–Reingold layout scaled into `[0, 1]^2`. Deterministic in
/// `seed`; isolated vertices drift to the border.
pub fn spring_layout(n: usize, edges: &[(usize, usize)], seed: u64) -> Vec<[f64; 2]> {
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![[0.5, 0.5]];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<[f64; 2]> = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
    let ideal = (1.0 / n as f64).sqrt();
    let mut temperature = 0.1;
    for _ in 0..ITERATIONS {
        let mut disp = vec![[0.0f64; 2]; n];
        for i in 0..n {
            for j in i + 1..n {
                let (dx, dy) = (pos[i][0] - pos[j][0], pos[i][1] - pos[j][1]);
                let d = (dx * dx + dy * dy).sqrt().max(1e-6);
                let f = ideal * ideal / d;
                disp[i][0] += dx / d * f;
                disp[i][1] += dy / d * f;
                disp[j][0] -= dx / d * f;
                disp[j][1] -= dy / d * f;
            }
        }
        for &(u, v) in edges {
            let (dx, dy) = (pos[u][0] - pos[v][0], pos[u][1] - pos[v][1]);
            let d = (dx * dx + dy * dy).sqrt().max(1e-6);
            let f = d * d / ideal;
            disp[u][0] -= dx / d * f;
            disp[u][1] -= dy / d * f;
            disp[v][0] += dx / d * f;
            disp[v][1] += dy / d * f;
        }
        for (p, d) in pos.iter_mut().zip(&disp) {
            let len = (d[0] * d[0] + d[1] * d[1]).sqrt().max(1e-12);
            let step = len.min(temperature);
            p[0] += d[0] / len * step;
            p[1] += d[1] / len * step;
        }
        temperature *= 0.98;
    }
    normalize(&mut pos);
    pos
}

fn normalize(pos: &mut [[f64; 2]]) {
    for axis in 0..2 {
        let lo = pos.iter().map(|p| p[axis]).fold(f64::INFINITY, f64::min);
        let hi = pos.iter().map(|p| p[axis]).fold(f64::NEG_INFINITY, f64::max);
        let span = (hi - lo).max(1e-9);
        for p in pos.iter_mut() {
            p[axis] = (p[axis] - lo) / span;
        }
    }
}

//! Euclidean projection onto the mixed l1/linf ball
//! `{y : sum_g max_j |y_gj| <= r}`.
//!
//! The solution clips each group at a level `mu_g`, where all groups that
//! survive shed the same mass `theta = sum_j (|z_gj| - mu_g)_+` and the levels
//! sum to `r`. `sum_g mu_g(theta)` is piecewise linear and decreasing, so a
//! single sorted sweep over the breakpoints finds `theta` exactly.

struct Group {
    sorted: Vec<f64>,
    prefix: Vec<f64>,
}

impl Group {
    fn new(values: &[f64]) -> Self {
        let mut sorted: Vec<f64> = values.iter().map(|v| v.abs()).collect();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut prefix = Vec::with_capacity(sorted.len());
        let mut acc = 0.0;
        for v in &sorted {
            acc += v;
            prefix.push(acc);
        }
        Group { sorted, prefix }
    }

    fn n(&self) -> usize {
        self.sorted.len()
    }

    /// Breakpoint where the segment with `k` clipped entries ends.
    fn breakpoint(&self, k: usize) -> f64 {
        let next = self.sorted.get(k).copied().unwrap_or(0.0);
        self.prefix[k - 1] - k as f64 * next
    }

    fn level(&self, theta: f64) -> f64 {
        let n = self.n();
        if n == 0 || theta >= self.prefix[n - 1] {
            return 0.0;
        }
        for k in 1..=n {
            if theta < self.breakpoint(k) || k == n {
                return ((self.prefix[k - 1] - theta) / k as f64).max(0.0);
            }
        }
        0.0
    }
}

/// Project `groups` (any signs) onto the ball of radius `r >= 0`.
pub fn project_l1_linf(groups: &[Vec<f64>], r: f64) -> Vec<Vec<f64>> {
    let norm: f64 = groups
        .iter()
        .map(|g| g.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .sum();
    if norm <= r {
        return groups.to_vec();
    }
    if r <= 0.0 {
        return groups.iter().map(|g| vec![0.0; g.len()]).collect();
    }
    let gs: Vec<Group> = groups.iter().map(|g| Group::new(g)).collect();

    let mut events: Vec<(f64, usize, usize)> = Vec::new();
    let (mut a, mut b) = (0.0, 0.0);
    for (i, g) in gs.iter().enumerate() {
        if g.n() == 0 || g.sorted[0] == 0.0 {
            continue;
        }
        a += g.prefix[0];
        b += 1.0;
        for k in 1..=g.n() {
            events.push((g.breakpoint(k), i, k));
        }
    }
    events.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

    let mut theta = 0.0;
    let mut found = false;
    for &(t_e, i, k) in &events {
        if b > 0.0 && a - b * t_e <= r {
            theta = (a - r) / b;
            found = true;
            break;
        }
        let g = &gs[i];
        a -= g.prefix[k - 1] / k as f64;
        b -= 1.0 / k as f64;
        if k < g.n() {
            a += g.prefix[k] / (k + 1) as f64;
            b += 1.0 / (k + 1) as f64;
        }
    }
    if !found {
        theta = events.last().map_or(0.0, |e| e.0);
    }

    groups
        .iter()
        .zip(&gs)
        .map(|(z, g)| {
            let mu = g.level(theta);
            z.iter().map(|v| v.signum() * v.abs().min(mu)).collect()
        })
        .collect()
}

/// The mixed norm `sum_g max_j |z_gj|`.
pub fn l1_linf_norm(groups: &[Vec<f64>]) -> f64 {
    groups
        .iter()
        .map(|g| g.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .sum()
}

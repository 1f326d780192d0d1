//! Independent reference implementations used as test oracles. They share no
//! code with the library beyond the point accessors.

#![allow(dead_code)]

use lidar_weather::{Frame, WeatherLabel};

/// Straight-line feature computation: returns values and masks for the
/// default ROI (x <= 20, -1.5 <= y <= 1.5).
pub fn reference_features(frame: &Frame) -> ([f64; 16], [bool; 16]) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut zs = Vec::new();
    let mut es = Vec::new();
    let mut ps = Vec::new();
    for p in &frame.points {
        if p.x() <= 20.0 && p.y() >= -1.5 && p.y() <= 1.5 {
            xs.push(p.x());
            ys.push(p.y());
            zs.push(p.z());
            es.push(p.echo());
            ps.push(p.pulse());
        }
    }
    let n = xs.len();
    let mut values = [0.0; 16];
    let mut mask = [true; 16];
    if n == 0 {
        return (values, mask);
    }
    let nf = n as f64;
    let ranges: Vec<f64> = (0..n).map(|i| (xs[i] * xs[i] + ys[i] * ys[i] + zs[i] * zs[i]).sqrt()).collect();

    for t in 1..=3u8 {
        let mut count = 0usize;
        let mut sum = 0.0;
        for i in 0..n {
            if es[i] == t {
                count += 1;
                sum += ranges[i];
            }
        }
        let j = (t - 1) as usize;
        values[j] = count as f64;
        mask[j] = false;
        if count > 0 {
            values[3 + j] = sum / count as f64;
            mask[3 + j] = false;
        }
    }

    let mean = |v: &[f64]| v.iter().sum::<f64>() / nf;
    let var = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / nf
    };
    let echoes: Vec<f64> = es.iter().map(|&e| e as f64).collect();
    let elevation: Vec<f64> = (0..n).map(|i| zs[i].atan2((xs[i] * xs[i] + ys[i] * ys[i]).sqrt())).collect();
    let azimuth: Vec<f64> = (0..n).map(|i| ys[i].atan2(xs[i])).collect();
    values[6] = mean(&echoes);
    values[7] = var(&echoes);
    values[8] = mean(&ranges);
    values[9] = mean(&azimuth);
    values[10] = mean(&elevation);
    values[11] = var(&ps);
    values[12] = mean(&ps);
    let eig = eigen_closed_form(covariance(&xs, &ys, &zs));
    values[13..16].copy_from_slice(&eig);
    for m in &mut mask[6..] {
        *m = false;
    }
    (values, mask)
}

/// Population covariance matrix of three coordinate columns.
pub fn covariance(xs: &[f64], ys: &[f64], zs: &[f64]) -> [[f64; 3]; 3] {
    let n = xs.len() as f64;
    let cols = [xs, ys, zs];
    let means: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    let mut cov = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            cov[a][b] = (0..xs.len())
                .map(|i| (cols[a][i] - means[a]) * (cols[b][i] - means[b]))
                .sum::<f64>()
                / n;
        }
    }
    cov
}

/// Eigenvalues of a symmetric 3x3 matrix from the trigonometric solution of
/// its characteristic polynomial, sorted descending and clamped at zero.
pub fn eigen_closed_form(a: [[f64; 3]; 3]) -> [f64; 3] {
    let p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    let mut ev = if p1 == 0.0 {
        [a[0][0], a[1][1], a[2][2]]
    } else {
        let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let mut b = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                b[i][j] = (a[i][j] - if i == j { q } else { 0.0 }) / p;
            }
        }
        let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
            + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
        let r = (det / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let e1 = q + 2.0 * p * phi.cos();
        let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        [e1, 3.0 * q - e1 - e3, e3]
    };
    ev.sort_by(|x, y| y.total_cmp(x));
    ev.map(|v| v.max(0.0))
}

/// z-scores every column with population statistics; near-constant columns
/// are centered only.
pub fn zscore_fit(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mut mean = vec![0.0; d];
    for r in rows {
        for j in 0..d {
            mean[j] += r[j];
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut sd = vec![0.0; d];
    for r in rows {
        for j in 0..d {
            sd[j] += (r[j] - mean[j]) * (r[j] - mean[j]);
        }
    }
    for j in 0..d {
        let s = (sd[j] / n).sqrt();
        sd[j] = if s > 1e-12 * mean[j].abs().max(1.0) { s } else { 1.0 };
    }
    (mean, sd)
}

pub fn zscore(x: &[f64], mean: &[f64], sd: &[f64]) -> Vec<f64> {
    (0..x.len()).map(|j| (x[j] - mean[j]) / sd[j]).collect()
}

/// Exhaustive kNN: sort every training row by (squared distance, class
/// number), vote over the first k, break vote ties by the nearest tied class.
pub fn knn_oracle(rows: &[Vec<f64>], labels: &[WeatherLabel], k: usize, query: &[f64]) -> WeatherLabel {
    let (mean, sd) = zscore_fit(rows);
    let q = zscore(query, &mean, &sd);
    let mut all: Vec<(f64, u8)> = rows
        .iter()
        .zip(labels)
        .map(|(r, l)| {
            let z = zscore(r, &mean, &sd);
            let d: f64 = (0..z.len()).map(|j| (z[j] - q[j]) * (z[j] - q[j])).sum();
            (d, l.number())
        })
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let top = &all[..k];
    let mut votes = [0usize; 4];
    for (_, l) in top {
        votes[*l as usize] += 1;
    }
    let best = *votes.iter().max().unwrap();
    let winner = top.iter().find(|(_, l)| votes[*l as usize] == best).unwrap().1;
    WeatherLabel::from_number(winner).unwrap()
}

/// Binary soft-margin dual solved by accelerated projected gradient.
/// Returns `(alpha, b)` with decision `sum a_i y_i K(x_i, x) + b`.
pub fn dual_qp_reference(gram: &[Vec<f64>], y: &[f64], c: f64, iterations: usize) -> (Vec<f64>, f64) {
    let n = y.len();
    let q: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| y[i] * y[j] * gram[i][j]).collect()).collect();
    let lipschitz = q.iter().map(|row| row.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let step = 1.0 / lipschitz;
    let project = |v: &[f64]| -> Vec<f64> {
        // find lambda with sum y_i clip(v_i - lambda y_i) = 0 by bisection
        let g = |lam: f64| -> f64 { (0..n).map(|i| y[i] * (v[i] - lam * y[i]).clamp(0.0, c)).sum() };
        let (mut lo, mut hi) = (-1e6, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lam = 0.5 * (lo + hi);
        (0..n).map(|i| (v[i] - lam * y[i]).clamp(0.0, c)).collect()
    };
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0f64;
    for _ in 0..iterations {
        let grad: Vec<f64> = (0..n).map(|i| (0..n).map(|j| q[i][j] * z[j]).sum::<f64>() - 1.0).collect();
        let step_point: Vec<f64> = (0..n).map(|i| z[i] - step * grad[i]).collect();
        let next = project(&step_point);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = (0..n).map(|i| next[i] + (t - 1.0) / t_next * (next[i] - a[i])).collect();
        a = next;
        t = t_next;
    }
    let margin = |i: usize| (0..n).map(|j| a[j] * y[j] * gram[i][j]).sum::<f64>();
    let eps = 1e-6 * c;
    let free: Vec<usize> = (0..n).filter(|&i| a[i] > eps && a[i] < c - eps).collect();
    let b = if free.is_empty() {
        // midpoint of the feasible offset interval
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for i in 0..n {
            let v = y[i] - margin(i);
            let at_upper = a[i] >= c - eps;
            if (y[i] > 0.0) == at_upper {
                lo = lo.max(v);
            } else {
                hi = hi.min(v);
            }
        }
        0.5 * (lo + hi)
    } else {
        free.iter().map(|&i| y[i] - margin(i)).sum::<f64>() / free.len() as f64
    };
    (a, b)
}

pub fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    (-gamma * (0..a.len()).map(|j| (a[j] - b[j]).powi(2)).sum::<f64>()).exp()
}

/// One-vs-one RBF SVM built on [`dual_qp_reference`]; predicts by pairwise
/// vote, ties to the largest summed margin, then to the lower class.
/// Class pair, support rows, coefficients `a_i y_i` and offset.
type PairMachine = (u8, u8, Vec<Vec<f64>>, Vec<f64>, f64);

pub struct ReferenceSvm {
    mean: Vec<f64>,
    sd: Vec<f64>,
    gamma: f64,
    machines: Vec<PairMachine>,
}

impl ReferenceSvm {
    pub fn train(rows: &[Vec<f64>], labels: &[WeatherLabel], c: f64, gamma: f64) -> Self {
        let (mean, sd) = zscore_fit(rows);
        let z: Vec<Vec<f64>> = rows.iter().map(|r| zscore(r, &mean, &sd)).collect();
        let mut machines = Vec::new();
        for pos in 1..=3u8 {
            for neg in pos + 1..=3u8 {
                let idx: Vec<usize> = (0..z.len())
                    .filter(|&i| labels[i].number() == pos || labels[i].number() == neg)
                    .collect();
                if idx.is_empty() {
                    continue;
                }
                let y: Vec<f64> = idx.iter().map(|&i| if labels[i].number() == pos { 1.0 } else { -1.0 }).collect();
                let gram: Vec<Vec<f64>> =
                    idx.iter().map(|&i| idx.iter().map(|&j| rbf(gamma, &z[i], &z[j])).collect()).collect();
                let (alpha, b) = dual_qp_reference(&gram, &y, c, 3000);
                let coef: Vec<f64> = alpha.iter().zip(&y).map(|(a, y)| a * y).collect();
                let xs = idx.iter().map(|&i| z[i].clone()).collect();
                machines.push((pos, neg, xs, coef, b));
            }
        }
        Self { mean, sd, gamma, machines }
    }

    pub fn predict(&self, x: &[f64]) -> WeatherLabel {
        let q = zscore(x, &self.mean, &self.sd);
        let mut votes = [0usize; 4];
        let mut margin = [0.0f64; 4];
        for (pos, neg, xs, coef, b) in &self.machines {
            let d = xs.iter().zip(coef).map(|(s, c)| c * rbf(self.gamma, s, &q)).sum::<f64>() + b;
            if d > 0.0 {
                votes[*pos as usize] += 1;
            } else {
                votes[*neg as usize] += 1;
            }
            margin[*pos as usize] += d;
            margin[*neg as usize] -= d;
        }
        let mut best = 1u8;
        for c in 2..=3u8 {
            let (vc, vb) = (votes[c as usize], votes[best as usize]);
            if vc > vb || (vc == vb && margin[c as usize] > margin[best as usize]) {
                best = c;
            }
        }
        WeatherLabel::from_number(best).unwrap()
    }
}

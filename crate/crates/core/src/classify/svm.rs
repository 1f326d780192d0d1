//! Soft-margin SVM, one-vs-one over the weather classes.
//!
//! Each class pair solves the standard dual
//!
//! ```text
//! min  1/2 a'Qa - e'a   s.t.  y'a = 0,  0 <= a_i <= C,   Q_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! with sequential minimal optimization: maximal-violating-pair selection for
//! the first index and second-order gain for the second. The solver stops once
//! the KKT violation `m(a) - M(a)` drops below the tolerance.

use serde::{Deserialize, Serialize};

use super::standardize::Standardizer;
use super::ClassifyError;
use crate::cloud::WeatherLabel;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

/// Kernel choice before training; an RBF without `gamma` uses
/// [`median_gamma`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub kernel: KernelSpec,
    pub c: f64,
    /// KKT violation tolerance.
    pub tol: f64,
    /// Iteration cap per class pair; `None` means `max(100_000, 100 n)`.
    pub max_iter: Option<usize>,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            kernel: KernelSpec::Rbf { gamma: None },
            c: 1.0,
            tol: 1e-3,
            max_iter: None,
        }
    }
}

impl SvmParams {
    fn validate(&self) -> Result<(), ClassifyError> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(ClassifyError::InvalidParameter(format!("C must be > 0, got {}", self.c)));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(ClassifyError::InvalidParameter(format!("tolerance must be > 0, got {}", self.tol)));
        }
        if let KernelSpec::Rbf { gamma: Some(g) } = self.kernel {
            if !(g.is_finite() && g > 0.0) {
                return Err(ClassifyError::InvalidParameter(format!("gamma must be > 0, got {g}")));
            }
        }
        Ok(())
    }
}

/// `1 / (16 * median pairwise squared distance)` over (at most 2000
/// evenly strided) rows. Falls back to `1/16` when the median is zero.
pub fn median_gamma(rows: &[Vec<f64>]) -> f64 {
    const CAP: usize = 2000;
    let stride = rows.len().div_ceil(CAP).max(1);
    let sample: Vec<&Vec<f64>> = rows.iter().step_by(stride).collect();
    let mut d2 = Vec::with_capacity(sample.len() * sample.len().saturating_sub(1) / 2);
    for (i, a) in sample.iter().enumerate() {
        for b in &sample[i + 1..] {
            d2.push(a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>());
        }
    }
    if d2.is_empty() {
        return 1.0 / 16.0;
    }
    let mid = d2.len() / 2;
    d2.select_nth_unstable_by(mid, f64::total_cmp);
    let median = if d2.len() % 2 == 1 {
        d2[mid]
    } else {
        let lower = d2[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + d2[mid])
    };
    if median > 0.0 {
        1.0 / (16.0 * median)
    } else {
        1.0 / 16.0
    }
}

/// Raw dual solution of one binary problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    /// Offset: decision is `sum a_i y_i K(x_i, x) - rho`.
    pub rho: f64,
    pub iterations: usize,
    /// Final KKT violation.
    pub gap: f64,
}

/// Solves the binary dual for a precomputed kernel matrix (row-major,
/// `n x n`) and labels `y_i = +-1`.
///
/// On hitting `max_iter` returns `Err((iterations, gap))`.
pub fn solve_dual(kernel: &[f64], y: &[f64], c: f64, tol: f64, max_iter: usize) -> Result<DualSolution, (usize, f64)> {
    let n = y.len();
    debug_assert_eq!(kernel.len(), n * n);
    let q = |i: usize, j: usize| y[i] * y[j] * kernel[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let is_upper = |a: f64| a >= c;
    let is_lower = |a: f64| a <= 0.0;

    let mut iter = 0usize;
    let mut gap;
    loop {
        // first index: maximal violation among I_up
        let mut g_max = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let in_up = if y[t] > 0.0 { !is_upper(alpha[t]) } else { !is_lower(alpha[t]) };
            if in_up && v >= g_max {
                g_max = v;
                i_sel = Some(t);
            }
        }
        // second index: best second-order gain among I_low
        let mut g_max2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        if let Some(i) = i_sel {
            let mut best = f64::INFINITY;
            let kii = kernel[i * n + i];
            for t in 0..n {
                let in_low = if y[t] > 0.0 { !is_lower(alpha[t]) } else { !is_upper(alpha[t]) };
                if !in_low {
                    continue;
                }
                let v = y[t] * grad[t];
                g_max2 = g_max2.max(v);
                let grad_diff = g_max + v;
                if grad_diff > 0.0 {
                    let quad = kii + kernel[t * n + t] - 2.0 * y[i] * y[t] * q(i, t);
                    let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= best {
                        best = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        gap = g_max + g_max2;
        let (i, j) = match (i_sel, j_sel) {
            (Some(i), Some(j)) if gap >= tol => (i, j),
            _ => break,
        };
        if iter >= max_iter {
            return Err((iter, gap));
        }
        iter += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = q(i, j);
        let (kii, kjj) = (kernel[i * n + i], kernel[j * n + j]);
        if y[i] != y[j] {
            let mut quad = kii + kjj + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = kii + kjj - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(i, t) * di + q(j, t) * dj;
        }
    }

    // offset from free variables, or the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if is_upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if is_lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { 0.5 * (ub + lb) };
    Ok(DualSolution { alpha, rho, iterations: iter, gap })
}

/// One class-pair machine. Positive decisions vote for `positive`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub positive: WeatherLabel,
    pub negative: WeatherLabel,
    /// Standardized support vectors.
    pub support_vectors: Vec<Vec<f64>>,
    /// Dual variables of the support vectors, in `(0, C]`.
    pub alpha: Vec<f64>,
    /// `+1` for `positive`, `-1` for `negative`.
    pub y: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
}

impl BinarySvm {
    pub fn decision(&self, kernel: &Kernel, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(self.alpha.iter().zip(&self.y))
            .map(|(sv, (a, y))| a * y * kernel.eval(sv, x))
            .sum::<f64>()
            - self.rho
    }

    /// `sum a_i y_i`, zero at a feasible dual point.
    pub fn equality_residual(&self) -> f64 {
        self.alpha.iter().zip(&self.y).map(|(a, y)| a * y).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    standardizer: Standardizer,
    kernel: Kernel,
    c: f64,
    classes: Vec<WeatherLabel>,
    machines: Vec<BinarySvm>,
}

pub fn svm_train(rows: &[Vec<f64>], labels: &[WeatherLabel], params: &SvmParams) -> Result<SvmModel, ClassifyError> {
    if rows.is_empty() {
        return Err(ClassifyError::EmptyTrainingSet);
    }
    if rows.len() != labels.len() {
        return Err(ClassifyError::LengthMismatch { rows: rows.len(), labels: labels.len() });
    }
    params.validate()?;
    let mut classes: Vec<WeatherLabel> = labels.to_vec();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(ClassifyError::SingleClass);
    }
    let standardizer = Standardizer::fit(rows)?;
    let z: Vec<Vec<f64>> = rows.iter().map(|r| standardizer.transform(r)).collect::<Result<_, _>>()?;
    let kernel = match params.kernel {
        KernelSpec::Linear => Kernel::Linear,
        KernelSpec::Rbf { gamma: Some(g) } => Kernel::Rbf { gamma: g },
        KernelSpec::Rbf { gamma: None } => Kernel::Rbf { gamma: median_gamma(&z) },
    };

    let mut machines = Vec::new();
    for (a, &pos) in classes.iter().enumerate() {
        for &neg in &classes[a + 1..] {
            let idx: Vec<usize> = (0..z.len()).filter(|&i| labels[i] == pos || labels[i] == neg).collect();
            let n = idx.len();
            let y: Vec<f64> = idx.iter().map(|&i| if labels[i] == pos { 1.0 } else { -1.0 }).collect();
            let mut gram = vec![0.0; n * n];
            for r in 0..n {
                for s in r..n {
                    let v = kernel.eval(&z[idx[r]], &z[idx[s]]);
                    gram[r * n + s] = v;
                    gram[s * n + r] = v;
                }
            }
            let max_iter = params.max_iter.unwrap_or_else(|| (100 * n).max(100_000));
            let sol = solve_dual(&gram, &y, params.c, params.tol, max_iter).map_err(|(iterations, gap)| {
                ClassifyError::NotConverged { positive: pos, negative: neg, iterations, gap }
            })?;
            let mut m = BinarySvm {
                positive: pos,
                negative: neg,
                support_vectors: Vec::new(),
                alpha: Vec::new(),
                y: Vec::new(),
                rho: sol.rho,
                iterations: sol.iterations,
            };
            for (t, &a) in sol.alpha.iter().enumerate() {
                if a > 0.0 {
                    m.support_vectors.push(z[idx[t]].clone());
                    m.alpha.push(a);
                    m.y.push(y[t]);
                }
            }
            log::debug!(
                "svm pair {pos}/{neg}: {} SVs of {n}, {} iterations",
                m.alpha.len(),
                sol.iterations
            );
            machines.push(m);
        }
    }
    Ok(SvmModel { standardizer, kernel, c: params.c, classes, machines })
}

impl SvmModel {
    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn classes(&self) -> &[WeatherLabel] {
        &self.classes
    }

    pub fn machines(&self) -> &[BinarySvm] {
        &self.machines
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    /// Pairwise vote; ties go to the class with the largest summed margin,
    /// then to the lower class number.
    pub fn predict(&self, x: &[f64]) -> Result<WeatherLabel, ClassifyError> {
        let z = self.standardizer.transform(x)?;
        let mut votes = [0usize; 3];
        let mut margin = [0.0f64; 3];
        for m in &self.machines {
            let d = m.decision(&self.kernel, &z);
            if d > 0.0 {
                votes[m.positive.index()] += 1;
            } else {
                votes[m.negative.index()] += 1;
            }
            margin[m.positive.index()] += d;
            margin[m.negative.index()] -= d;
        }
        let best = self
            .classes
            .iter()
            .copied()
            .max_by(|a, b| {
                votes[a.index()]
                    .cmp(&votes[b.index()])
                    .then(margin[a.index()].total_cmp(&margin[b.index()]))
                    .then(b.cmp(a))
            })
            .expect("at least two classes");
        Ok(best)
    }

    pub(crate) fn validate(&self) -> Result<(), ClassifyError> {
        self.standardizer.validate()?;
        if let Kernel::Rbf { gamma } = self.kernel {
            if !(gamma.is_finite() && gamma > 0.0) {
                return Err(ClassifyError::InvalidModel(format!("gamma {gamma} must be > 0")));
            }
        }
        if !(self.c > 0.0) || self.classes.len() < 2 {
            return Err(ClassifyError::InvalidModel("svm needs C > 0 and two classes".into()));
        }
        let expected = self.classes.len() * (self.classes.len() - 1) / 2;
        if self.machines.len() != expected {
            return Err(ClassifyError::InvalidModel("svm class-pair count mismatch".into()));
        }
        for m in &self.machines {
            let n = m.support_vectors.len();
            if m.alpha.len() != n || m.y.len() != n {
                return Err(ClassifyError::InvalidModel("svm dual arrays disagree".into()));
            }
            if m.support_vectors.iter().any(|sv| sv.len() != self.standardizer.dim()) {
                return Err(ClassifyError::InvalidModel("support vector dimension mismatch".into()));
            }
        }
        Ok(())
    }
}

/// Picks `(C, gamma)` from the grids by validation accuracy. Ties keep the
/// earliest grid point.
pub fn grid_search(
    train_rows: &[Vec<f64>],
    train_labels: &[WeatherLabel],
    valid_rows: &[Vec<f64>],
    valid_labels: &[WeatherLabel],
    c_grid: &[f64],
    gamma_grid: &[f64],
) -> Result<(SvmParams, f64), ClassifyError> {
    let mut best: Option<(SvmParams, f64)> = None;
    for &c in c_grid {
        for &gamma in gamma_grid {
            let params = SvmParams { kernel: KernelSpec::Rbf { gamma: Some(gamma) }, c, ..SvmParams::default() };
            let model = svm_train(train_rows, train_labels, &params)?;
            let mut correct = 0usize;
            for (x, l) in valid_rows.iter().zip(valid_labels) {
                if model.predict(x)? == *l {
                    correct += 1;
                }
            }
            let acc = correct as f64 / valid_rows.len().max(1) as f64;
            if best.as_ref().is_none_or(|(_, b)| acc > *b) {
                best = Some((params, acc));
            }
        }
    }
    best.ok_or_else(|| ClassifyError::InvalidParameter("empty search grid".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use WeatherLabel::*;

    fn linear() -> SvmParams {
        SvmParams { kernel: KernelSpec::Linear, ..SvmParams::default() }
    }

    #[test]
    fn separable_clusters_fit_perfectly() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..60 {
            let (cx, l) = if i % 2 == 0 { (0.0, Clear) } else { (1.0, Fog) };
            rows.push(vec![cx + rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2)]);
            labels.push(l);
        }
        for params in [linear(), SvmParams::default()] {
            let m = svm_train(&rows, &labels, &params).unwrap();
            for (x, l) in rows.iter().zip(&labels) {
                assert_eq!(m.predict(x).unwrap(), *l);
            }
        }
    }

    #[test]
    fn two_points_give_perpendicular_bisector() {
        let rows = vec![vec![1.0, 2.0], vec![3.0, 6.0]];
        let m = svm_train(&rows, &[Clear, Rain], &linear()).unwrap();
        let machine = &m.machines()[0];
        assert_eq!(machine.alpha.len(), 2);
        assert!((machine.alpha[0] - machine.alpha[1]).abs() < 1e-12);
        let mid = [2.0, 4.0];
        let z = m.standardizer().transform(&mid).unwrap();
        assert!(machine.decision(&m.kernel(), &z).abs() < 1e-9);
        let eps = 1e-3;
        assert_eq!(m.predict(&[2.0 - eps, 4.0 - 2.0 * eps]).unwrap(), Clear);
        assert_eq!(m.predict(&[2.0 + eps, 4.0 + 2.0 * eps]).unwrap(), Rain);
    }

    #[test]
    fn dual_constraints_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let rows: Vec<Vec<f64>> = (0..150).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        // overlapping classes force bounded multipliers
        let labels: Vec<WeatherLabel> = rows
            .iter()
            .map(|r| if r[0] + 0.3 * rng.random_range(-1.0..1.0) > 0.0 { Fog } else { Clear })
            .collect();
        let params = SvmParams { c: 0.5, ..SvmParams::default() };
        let m = svm_train(&rows, &labels, &params).unwrap();
        for machine in m.machines() {
            assert!(machine.alpha.iter().all(|a| *a > 0.0 && *a <= 0.5));
            assert!(machine.equality_residual().abs() <= 1e-6);
        }
    }

    #[test]
    fn iteration_cap_reports_diagnostics() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
        let labels: Vec<WeatherLabel> = (0..40).map(|i| if i % 2 == 0 { Clear } else { Rain }).collect();
        let params = SvmParams { max_iter: Some(1), ..SvmParams::default() };
        match svm_train(&rows, &labels, &params) {
            Err(ClassifyError::NotConverged { iterations, gap, .. }) => {
                assert_eq!(iterations, 1);
                assert!(gap > 1e-3);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn parameter_errors() {
        let rows = vec![vec![0.0], vec![1.0]];
        let bad_c = SvmParams { c: 0.0, ..SvmParams::default() };
        assert!(matches!(svm_train(&rows, &[Clear, Fog], &bad_c), Err(ClassifyError::InvalidParameter(_))));
        let bad_gamma = SvmParams { kernel: KernelSpec::Rbf { gamma: Some(-1.0) }, ..SvmParams::default() };
        assert!(svm_train(&rows, &[Clear, Fog], &bad_gamma).is_err());
        assert!(matches!(svm_train(&rows, &[Fog, Fog], &SvmParams::default()), Err(ClassifyError::SingleClass)));
    }

    #[test]
    fn median_gamma_heuristic() {
        // pairwise squared distances 1, 4, 1 -> median 1
        let rows = vec![vec![0.0], vec![1.0], vec![2.0]];
        assert!((median_gamma(&rows) - 1.0 / 16.0).abs() < 1e-15);
        // distances 1, 4, 9, 1, 4, 1 -> sorted 1 1 1 4 4 9, median 2.5
        let rows = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        assert!((median_gamma(&rows) - 1.0 / 40.0).abs() < 1e-15);
    }

    #[test]
    fn grid_search_picks_a_point() {
        let rows = vec![vec![0.0], vec![0.1], vec![1.0], vec![1.1]];
        let labels = [Clear, Clear, Fog, Fog];
        let (params, acc) = grid_search(&rows, &labels, &rows, &labels, &[0.1, 1.0], &[0.5, 2.0]).unwrap();
        assert_eq!(acc, 1.0);
        assert!(params.c > 0.0);
    }
}

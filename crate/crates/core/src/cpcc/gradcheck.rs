use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::batch::ClassBatch;
use super::rho::{Backend, RhoParams};
use super::{evaluate_cpcc_with_cache, PlanCache};
use crate::error::{Error, Result};
use crate::trees::LabelTree;

/// Pass threshold on the relative gradient error.
pub const GRADCHECK_TOL: f64 = 1e-3;

/// Three classes under a two-level tree: `c0` and `c1` share a parent,
/// `c2` hangs off the root, giving tree distances 2, 3 and 3.
pub fn gradcheck_tree() -> LabelTree {
    LabelTree::from_json_str(
        r#"{"name": "root", "children": [
            {"name": "left", "children": [{"label": "c0"}, {"label": "c1"}]},
            {"label": "c2"}]}"#,
    )
    .expect("fixed tree is valid")
}

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    pub backend: Backend,
    /// Samples per class; one entry per class of [`gradcheck_tree`].
    pub class_sizes: Vec<usize>,
    pub dim: usize,
    pub seed: u64,
    pub step: f64,
    pub params: RhoParams,
}

impl GradCheckConfig {
    pub fn new(backend: Backend, n: usize, dim: usize, seed: u64) -> Self {
        Self {
            backend,
            class_sizes: vec![n; 3],
            dim,
            seed,
            step: 1e-5,
            params: RhoParams::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub cpcc: f64,
    /// Largest per-class `||g_analytic - g_fd||`, relative to `||g_fd||`
    /// over all classes.
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Random three-class batch used by [`gradient_check`]: class centres are
/// spread out with standard deviation 3, samples around them with unit
/// variance.
pub fn gradcheck_batch(class_sizes: &[usize], dim: usize, seed: u64) -> Result<ClassBatch> {
    if class_sizes.len() != 3 {
        return Err(Error::InvalidParameter(format!(
            "gradient check uses three classes, got {}",
            class_sizes.len()
        )));
    }
    if dim == 0 || class_sizes.contains(&0) {
        return Err(Error::InvalidParameter(
            "class sizes and dimension must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut batch = ClassBatch::new();
    for (c, &n) in class_sizes.iter().enumerate() {
        let centre: Vec<f64> = (0..dim)
            .map(|_| 3.0 * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        let z = Array2::from_shape_fn((n, dim), |(_, k)| {
            centre[k] + Distribution::<f64>::sample(&StandardNormal, &mut rng)
        });
        batch.insert(format!("c{c}"), z, None)?;
    }
    Ok(batch)
}

/// Compares the analytic CPCC subgradient with central finite differences.
pub fn gradient_check(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    if cfg.step.is_nan() || cfg.step <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "step must be positive, got {}",
            cfg.step
        )));
    }
    let tree = gradcheck_tree();
    let batch = gradcheck_batch(&cfg.class_sizes, cfg.dim, cfg.seed)?;
    let cache = PlanCache::new();
    let base = evaluate_cpcc_with_cache(&batch, &tree, cfg.backend, &cfg.params, true, &cache)?;
    let analytic = base.gradients.expect("requested");

    let value_at = |b: &ClassBatch| -> Result<f64> {
        Ok(evaluate_cpcc_with_cache(b, &tree, cfg.backend, &cfg.params, false, &cache)?.value)
    };
    let mut fd_norm_sq = 0.0;
    let mut class_errors = Vec::new();
    for (label, grad) in &analytic {
        let (n, d) = grad.dim();
        let mut fd = Array2::zeros((n, d));
        for i in 0..n {
            for k in 0..d {
                let mut plus = batch.clone();
                plus.features_mut(label).expect("known class")[[i, k]] += cfg.step;
                let mut minus = batch.clone();
                minus.features_mut(label).expect("known class")[[i, k]] -= cfg.step;
                fd[[i, k]] = (value_at(&plus)? - value_at(&minus)?) / (2.0 * cfg.step);
            }
        }
        fd_norm_sq += fd.iter().map(|x| x * x).sum::<f64>();
        let diff = (&fd - grad).iter().map(|x| x * x).sum::<f64>().sqrt();
        class_errors.push(diff);
    }
    let fd_norm = fd_norm_sq.sqrt();
    let worst = class_errors.iter().copied().fold(0.0, f64::max);
    let max_rel_error = if fd_norm > 0.0 {
        worst / fd_norm
    } else if worst == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(GradCheckReport {
        cpcc: base.value,
        max_rel_error,
        tolerance: GRADCHECK_TOL,
        passed: max_rel_error <= GRADCHECK_TOL,
    })
}

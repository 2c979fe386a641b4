//! Composition of 1-D kernels into a kernel on the mixed space.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::categorical::CategoricalKernel;
use super::continuous::ContinuousKernel1D;
use super::schema::{InputSchema, MixedPoint};
use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineOp {
    /// `k_a + k_b`
    Sum,
    /// `k_a · k_b`
    Product,
    /// `(1 + k_a)(1 + k_b)`
    Anova,
}

/// Tree of 1-D kernels bound to inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum KernelExpr {
    Constant { value: f64 },
    /// Correlation kernel on continuous input `input` (0-based).
    Continuous { input: usize, kernel: ContinuousKernel1D },
    /// Matrix kernel on categorical input `input` (0-based).
    Categorical { input: usize, kernel: CategoricalKernel },
    Combine { op: CombineOp, terms: Vec<KernelExpr> },
}

impl KernelExpr {
    pub fn continuous(input: usize, kernel: ContinuousKernel1D) -> Self {
        Self::Continuous { input, kernel }
    }

    pub fn categorical(input: usize, kernel: CategoricalKernel) -> Self {
        Self::Categorical { input, kernel }
    }

    pub fn constant(value: f64) -> Self {
        Self::Constant { value }
    }

    /// Evaluates at two points; assumes they conform to the schema.
    pub fn eval(&self, a: &MixedPoint, b: &MixedPoint) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Continuous { input, kernel } => kernel.correlation(a.x[*input] - b.x[*input]),
            Self::Categorical { input, kernel } => {
                kernel.matrix()[(a.u[*input] - 1, b.u[*input] - 1)]
            }
            Self::Combine { op, terms } => {
                let vals = terms.iter().map(|t| t.eval(a, b));
                match op {
                    CombineOp::Sum => vals.sum(),
                    CombineOp::Product => vals.product(),
                    CombineOp::Anova => vals.map(|v| 1.0 + v).product(),
                }
            }
        }
    }

    /// (continuous inputs, categorical inputs) referenced by the leaves, in leaf order.
    pub fn inputs(&self) -> (Vec<usize>, Vec<usize>) {
        let mut cont = Vec::new();
        let mut cat = Vec::new();
        self.collect_inputs(&mut cont, &mut cat);
        (cont, cat)
    }

    fn collect_inputs(&self, cont: &mut Vec<usize>, cat: &mut Vec<usize>) {
        match self {
            Self::Constant { .. } => {}
            Self::Continuous { input, .. } => cont.push(*input),
            Self::Categorical { input, .. } => cat.push(*input),
            Self::Combine { terms, .. } => terms.iter().for_each(|t| t.collect_inputs(cont, cat)),
        }
    }

    /// Categorical leaves in depth-first order.
    pub fn categorical_leaves(&self) -> Vec<(usize, &CategoricalKernel)> {
        let mut out = Vec::new();
        self.walk_categorical(&mut out);
        out
    }

    fn walk_categorical<'a>(&'a self, out: &mut Vec<(usize, &'a CategoricalKernel)>) {
        match self {
            Self::Categorical { input, kernel } => out.push((*input, kernel)),
            Self::Combine { terms, .. } => terms.iter().for_each(|t| t.walk_categorical(out)),
            _ => {}
        }
    }

    /// Largest number of variance-carrying leaves multiplied together in one term.
    fn chain_carriers(&self) -> usize {
        match self {
            Self::Categorical { kernel, .. } => usize::from(kernel.carries_variance()),
            Self::Constant { .. } | Self::Continuous { .. } => 0,
            Self::Combine { op: CombineOp::Sum, terms } => {
                terms.iter().map(Self::chain_carriers).max().unwrap_or(0)
            }
            Self::Combine { terms, .. } => terms.iter().map(Self::chain_carriers).sum(),
        }
    }

    fn has_carrier(&self) -> bool {
        match self {
            Self::Categorical { kernel, .. } => kernel.carries_variance(),
            Self::Combine { terms, .. } => terms.iter().any(Self::has_carrier),
            _ => false,
        }
    }
}

/// Combines two expressions with disjoint inputs.
pub fn combine(op: CombineOp, a: KernelExpr, b: KernelExpr) -> Result<KernelExpr> {
    let (ca, ka) = a.inputs();
    let (cb, kb) = b.inputs();
    if let Some(i) = ca.iter().find(|i| cb.contains(i)) {
        return Err(Error::Composition(format!("continuous input {i} appears on both sides")));
    }
    if let Some(j) = ka.iter().find(|j| kb.contains(j)) {
        return Err(Error::Composition(format!("categorical input {j} appears on both sides")));
    }
    Ok(KernelExpr::Combine { op, terms: vec![a, b] })
}

/// Kernel on the mixed space: `σ² · expr(w, w')`.
///
/// Continuous leaves are correlations. At most one categorical leaf per product chain may
/// carry a covariance; when one does, the root variance must stay fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub variance: f64,
    pub variance_free: bool,
    pub expr: KernelExpr,
}

impl Kernel {
    pub fn new(expr: KernelExpr, variance: f64, variance_free: bool) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() {
            return domain(format!("root variance must be positive, got {variance}"));
        }
        let k = Self { variance, variance_free, expr };
        k.check_identifiability()?;
        Ok(k)
    }

    /// Kernel whose variance lives in a categorical leaf: root variance fixed at 1.
    pub fn with_fixed_scale(expr: KernelExpr) -> Result<Self> {
        Self::new(expr, 1.0, false)
    }

    pub fn check_identifiability(&self) -> Result<()> {
        let carriers = self.expr.chain_carriers();
        if carriers > 1 {
            return Err(Error::Composition(format!(
                "{carriers} variance-carrying categorical kernels in one product; \
                 only their product variance is identifiable"
            )));
        }
        if self.variance_free && self.expr.has_carrier() {
            return Err(Error::Composition(
                "a free root variance cannot be combined with a covariance-carrying \
                 categorical kernel"
                    .into(),
            ));
        }
        Ok(())
    }

    /// Every schema input must appear in exactly one leaf with matching level count.
    pub fn check_schema(&self, schema: &InputSchema) -> Result<()> {
        let (mut cont, mut cat) = self.expr.inputs();
        for (i, k) in self.expr.categorical_leaves() {
            match schema.categorical.get(i) {
                Some(c) if c.levels == k.level_count() => {}
                Some(c) => {
                    return domain(format!(
                        "kernel on '{}' has {} levels, schema declares {}",
                        c.name,
                        k.level_count(),
                        c.levels
                    ))
                }
                None => return domain(format!("kernel refers to categorical input {i}")),
            }
        }
        cont.sort_unstable();
        cat.sort_unstable();
        if cont != (0..schema.continuous_count()).collect::<Vec<_>>() {
            return domain(format!(
                "continuous inputs used by the kernel {cont:?} must be 0..{} each exactly once",
                schema.continuous_count()
            ));
        }
        if cat != (0..schema.categorical_count()).collect::<Vec<_>>() {
            return domain(format!(
                "categorical inputs used by the kernel {cat:?} must be 0..{} each exactly once",
                schema.categorical_count()
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, a: &MixedPoint, b: &MixedPoint) -> f64 {
        self.variance * self.expr.eval(a, b)
    }
}

fn check_points(kernel: &Kernel, points: &[MixedPoint]) -> Result<()> {
    let (cont, cat) = kernel.expr.inputs();
    let max_levels: Vec<(usize, usize)> =
        kernel.expr.categorical_leaves().iter().map(|(i, k)| (*i, k.level_count())).collect();
    for (n, p) in points.iter().enumerate() {
        if let Some(i) = cont.iter().find(|&&i| i >= p.x.len()) {
            return domain(format!("point {n} lacks continuous input {i}"));
        }
        if let Some(j) = cat.iter().find(|&&j| j >= p.u.len()) {
            return domain(format!("point {n} lacks categorical input {j}"));
        }
        for &(j, l) in &max_levels {
            let v = p.u[j];
            if v < 1 || v > l {
                return domain(format!("point {n}: level {v} of categorical input {j} outside 1..={l}"));
            }
        }
    }
    Ok(())
}

/// `N×N` Gram matrix `K[a,b] = σ² expr(w_a, w_b)` plus `nugget · mean(diag K)` on the
/// diagonal.
pub fn gram(kernel: &Kernel, points: &[MixedPoint], nugget: f64) -> Result<DMatrix<f64>> {
    if !(nugget >= 0.0) {
        return domain(format!("nugget must be >= 0, got {nugget}"));
    }
    check_points(kernel, points)?;
    let mut k = gram_unchecked(kernel, points);
    add_relative_nugget(&mut k, nugget);
    Ok(k)
}

pub(crate) fn gram_unchecked(kernel: &Kernel, points: &[MixedPoint]) -> DMatrix<f64> {
    let n = points.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval(&points[i], &points[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

pub(crate) fn add_relative_nugget(k: &mut DMatrix<f64>, nugget: f64) -> f64 {
    let n = k.nrows();
    if n == 0 || nugget == 0.0 {
        return 0.0;
    }
    let add = nugget * k.trace() / n as f64;
    for i in 0..n {
        k[(i, i)] += add;
    }
    add
}

/// `K[a,b] = σ² expr(p_a, q_b)`.
pub fn cross_gram(kernel: &Kernel, p: &[MixedPoint], q: &[MixedPoint]) -> Result<DMatrix<f64>> {
    check_points(kernel, p)?;
    check_points(kernel, q)?;
    Ok(DMatrix::from_fn(p.len(), q.len(), |i, j| kernel.eval(&p[i], &q[j])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{BlockForm, GroupPartition};

    fn pt(x: f64, u: usize) -> MixedPoint {
        MixedPoint::new(vec![x], vec![u])
    }

    fn matern() -> KernelExpr {
        KernelExpr::continuous(0, ContinuousKernel1D::matern52(0.3))
    }

    fn cs(cv: bool) -> KernelExpr {
        KernelExpr::categorical(0, CategoricalKernel::cs(3, 1.0, 0.4, cv).unwrap())
    }

    #[test]
    fn product_with_unit_constant() {
        let e = combine(CombineOp::Product, matern(), KernelExpr::constant(1.0)).unwrap();
        let (a, b) = (pt(0.1, 1), pt(0.6, 2));
        assert_eq!(e.eval(&a, &b), matern().eval(&a, &b));
    }

    #[test]
    fn anova_of_zeros_is_one() {
        let e = combine(CombineOp::Anova, KernelExpr::constant(0.0), KernelExpr::constant(0.0))
            .unwrap();
        assert_eq!(e.eval(&pt(0.0, 1), &pt(1.0, 1)), 1.0);
    }

    #[test]
    fn shared_input_rejected() {
        let r = combine(CombineOp::Sum, matern(), matern());
        assert!(matches!(r, Err(Error::Composition(_))));
        let r = combine(CombineOp::Sum, cs(false), cs(false));
        assert!(matches!(r, Err(Error::Composition(_))));
    }

    #[test]
    fn identifiability_rule() {
        let prod = combine(CombineOp::Product, matern(), cs(true)).unwrap();
        assert!(Kernel::new(prod.clone(), 1.0, true).is_err());
        assert!(Kernel::new(prod, 1.0, false).is_ok());

        let two = KernelExpr::Combine {
            op: CombineOp::Product,
            terms: vec![
                KernelExpr::categorical(0, CategoricalKernel::cs(3, 1.0, 0.1, true).unwrap()),
                KernelExpr::categorical(
                    1,
                    CategoricalKernel::gcs_default(
                        GroupPartition::new(vec![2, 2]).unwrap(),
                        BlockForm::General,
                        vec![BlockForm::Cs; 2],
                    )
                    .unwrap(),
                ),
            ],
        };
        assert!(matches!(Kernel::new(two, 1.0, false), Err(Error::Composition(_))));

        let sum = combine(CombineOp::Sum, matern(), cs(true)).unwrap();
        assert!(Kernel::new(sum, 1.0, false).is_ok());
    }

    #[test]
    fn single_point_gram() {
        let k = Kernel::new(combine(CombineOp::Product, matern(), cs(false)).unwrap(), 2.5, true)
            .unwrap();
        let g = gram(&k, &[pt(0.3, 2)], 1e-3).unwrap();
        assert!((g[(0, 0)] - 2.5 * (1.0 + 1e-3)).abs() < 1e-15);
    }

    #[test]
    fn duplicate_points_rank_deficient() {
        let k = Kernel::new(combine(CombineOp::Product, matern(), cs(false)).unwrap(), 1.0, true)
            .unwrap();
        let g = gram(&k, &[pt(0.3, 2), pt(0.3, 2), pt(0.8, 1)], 0.0).unwrap();
        assert!(crate::linalg::min_eigenvalue(&g).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_level() {
        let k = Kernel::new(combine(CombineOp::Product, matern(), cs(false)).unwrap(), 1.0, true)
            .unwrap();
        assert!(gram(&k, &[pt(0.3, 4)], 0.0).is_err());
    }

    #[test]
    fn schema_coverage() {
        let k = Kernel::new(combine(CombineOp::Product, matern(), cs(false)).unwrap(), 1.0, true)
            .unwrap();
        assert!(k.check_schema(&InputSchema::one_by_one(3)).is_ok());
        assert!(k.check_schema(&InputSchema::one_by_one(4)).is_err());
        let only_x = Kernel::new(matern(), 1.0, true).unwrap();
        assert!(only_x.check_schema(&InputSchema::one_by_one(3)).is_err());
    }
    fn random_points(n: usize, seed: u64) -> Vec<MixedPoint> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                MixedPoint::new(
                    vec![rng.random::<f64>(), rng.random::<f64>()],
                    vec![rng.random_range(1..=3), rng.random_range(1..=4)],
                )
            })
            .collect()
    }

    fn leaves() -> [KernelExpr; 4] {
        [
            KernelExpr::continuous(0, ContinuousKernel1D::matern52(0.4)),
            KernelExpr::continuous(1, ContinuousKernel1D::squared_exponential(0.2)),
            KernelExpr::categorical(0, CategoricalKernel::cs(3, 1.0, -0.2, false).unwrap()),
            KernelExpr::categorical(1, CategoricalKernel::spherical_default(4, 1.0, false).unwrap()),
        ]
    }

    fn unit(e: KernelExpr) -> Kernel {
        Kernel::new(e, 1.0, true).unwrap()
    }

    #[test]
    fn sum_gram_is_sum_of_grams() {
        let pts = random_points(5, 11);
        let [a, b, ..] = leaves();
        let ga = gram(&unit(a.clone()), &pts, 0.0).unwrap();
        let gb = gram(&unit(b.clone()), &pts, 0.0).unwrap();
        let gs = gram(&unit(combine(CombineOp::Sum, a, b).unwrap()), &pts, 0.0).unwrap();
        assert!((gs - (ga + gb)).abs().max() < 1e-15);
    }

    #[test]
    fn product_gram_entries_are_products() {
        let pts = random_points(3, 5);
        let [a, _, c, _] = leaves();
        let e = combine(CombineOp::Product, a, c).unwrap();
        let g = gram(&Kernel::new(e, 1.7, true).unwrap(), &pts, 0.0).unwrap();
        let m = CategoricalKernel::cs(3, 1.0, -0.2, false).unwrap().matrix().clone();
        for i in 0..3 {
            for j in 0..3 {
                let d = (pts[i].x[0] - pts[j].x[0]).abs();
                let r = 5f64.sqrt() * d / 0.4;
                let kx = (1.0 + r + r * r / 3.0) * (-r).exp();
                let want = 1.7 * kx * m[(pts[i].u[0] - 1, pts[j].u[0] - 1)];
                assert!((g[(i, j)] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn commutative_and_associative() {
        let pts = random_points(8, 3);
        let [a, b, c, d] = leaves();
        for op in [CombineOp::Sum, CombineOp::Product, CombineOp::Anova] {
            let ab = gram(&unit(combine(op, a.clone(), b.clone()).unwrap()), &pts, 0.0).unwrap();
            let ba = gram(&unit(combine(op, b.clone(), a.clone()).unwrap()), &pts, 0.0).unwrap();
            assert!((ab - ba).abs().max() < 1e-12);
        }
        for op in [CombineOp::Sum, CombineOp::Product] {
            let left = combine(op, combine(op, a.clone(), c.clone()).unwrap(), d.clone()).unwrap();
            let right = combine(op, a.clone(), combine(op, c.clone(), d.clone()).unwrap()).unwrap();
            let gl = gram(&unit(left), &pts, 0.0).unwrap();
            let gr = gram(&unit(right), &pts, 0.0).unwrap();
            assert!((gl - gr).abs().max() < 1e-12);
        }
    }
}

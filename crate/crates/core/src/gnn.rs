//! Graphop convolutions and layered graphop neural networks.
//!
//! The same forward pass serves continuum operators and their
//! discretizations. [`gnn_forward_matrix`] is a separate dense-matrix
//! implementation kept as a cross-check.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{lemma_e3_bound, GnnShape, Variant};
use crate::error::{Error, Result};
use crate::operator::{discretize, AssumptionFlag, Domain, Matrix, OperatorConstants, OperatorKind, POperator};
use crate::rng;
use crate::signal::{extend_pc, linear_combination, map_pointwise, DomainSignal, FiniteSignal, Signal};

/// Pointwise nonlinearities. Every variant is 1-Lipschitz with `ρ(0) = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    /// Clamp to `[-1, 1]`.
    #[default]
    Clip,
    Tanh,
    /// `x` for `x ≥ 0`, `-x/2` otherwise.
    LeakyAbs,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Self::Clip => x.clamp(-1.0, 1.0),
            Self::Tanh => x.tanh(),
            Self::LeakyAbs => {
                if x >= 0.0 {
                    x
                } else {
                    -0.5 * x
                }
            }
        }
    }

    /// Bound on `|ρ(x)|` given `|x| ≤ b`.
    pub fn range_bound(self, b: f64) -> f64 {
        match self {
            Self::Clip => b.min(1.0),
            Self::Tanh => b.tanh(),
            Self::LeakyAbs => b,
        }
    }
}

/// Filter taps `h[l][f][g][k]`: layer, output feature, input feature, power.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GnnParams {
    #[serde(rename = "L")]
    pub layers: usize,
    pub widths: Vec<usize>,
    #[serde(rename = "K")]
    pub order: usize,
    #[serde(default)]
    pub activation: Activation,
    pub h: Vec<Vec<Vec<Vec<f64>>>>,
}

impl GnnParams {
    /// Uniform taps in `[-1, 1]`.
    pub fn random(widths: &[usize], order: usize, activation: Activation, seed: u64) -> Self {
        let mut r = rng::stream(seed, &[]);
        let h = widths
            .windows(2)
            .map(|w| {
                (0..w[1])
                    .map(|_| (0..w[0]).map(|_| (0..order).map(|_| r.gen_range(-1.0..=1.0)).collect()).collect())
                    .collect()
            })
            .collect();
        Self { layers: widths.len().saturating_sub(1), widths: widths.to_vec(), order, activation, h }
    }

    /// One layer, one feature, taps `(1, 0, ..., 0)`.
    pub fn identity(order: usize, activation: Activation) -> Self {
        let mut taps = vec![0.0; order];
        if let Some(first) = taps.first_mut() {
            *first = 1.0;
        }
        Self { layers: 1, widths: vec![1, 1], order, activation, h: vec![vec![vec![taps]]] }
    }

    pub fn zero(widths: &[usize], order: usize, activation: Activation) -> Self {
        let mut p = Self::random(widths, order, activation, 0);
        p.h.iter_mut().flatten().flatten().flatten().for_each(|x| *x = 0.0);
        p
    }

    pub fn from_json_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let p: Self = serde_json::from_str(&text)?;
        p.validate()?;
        Ok(p)
    }

    /// Checks shapes, then `|h| ≤ 1`.
    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::InvalidParameter("filter order K must be at least 1".into()));
        }
        if self.layers == 0 || self.widths.len() != self.layers + 1 {
            return Err(Error::Shape(format!("{} widths for {} layers", self.widths.len(), self.layers)));
        }
        if self.widths[0] != 1 {
            return Err(Error::Shape(format!("input width must be 1, got {}", self.widths[0])));
        }
        if self.widths.contains(&0) {
            return Err(Error::Shape("widths must be positive".into()));
        }
        if self.h.len() != self.layers {
            return Err(Error::Shape(format!("h has {} layers, expected {}", self.h.len(), self.layers)));
        }
        for (l, layer) in self.h.iter().enumerate() {
            if layer.len() != self.widths[l + 1] {
                return Err(Error::Shape(format!(
                    "h[{l}] has {} outputs, expected {}",
                    layer.len(),
                    self.widths[l + 1]
                )));
            }
            for (f, row) in layer.iter().enumerate() {
                if row.len() != self.widths[l] {
                    return Err(Error::Shape(format!(
                        "h[{l}][{f}] has {} inputs, expected {}",
                        row.len(),
                        self.widths[l]
                    )));
                }
                if let Some(g) = row.iter().position(|taps| taps.len() != self.order) {
                    return Err(Error::Shape(format!(
                        "h[{l}][{f}][{g}] has {} taps, expected {}",
                        row[g].len(),
                        self.order
                    )));
                }
            }
        }
        for (l, layer) in self.h.iter().enumerate() {
            for (f, row) in layer.iter().enumerate() {
                for (g, taps) in row.iter().enumerate() {
                    for (k, &value) in taps.iter().enumerate() {
                        if value.is_nan() || value.abs() > 1.0 {
                            return Err(Error::Normalization { value, location: format!("h[{l}][{f}][{g}][{k}]") });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n_max(&self) -> usize {
        self.widths.iter().copied().max().unwrap_or(1)
    }

    pub fn shape(&self) -> GnnShape {
        GnnShape { k: self.order, l: self.layers, n_max: self.n_max() }
    }

    /// `Π_l max_f Σ_g Σ_k |h^l_{fgk}| C_A^k`, a Lipschitz constant of the
    /// network in the max-over-features `L²` norm.
    pub fn lipschitz_bound(&self, c_a: f64) -> f64 {
        self.h
            .iter()
            .map(|layer| {
                layer
                    .iter()
                    .map(|row| {
                        row.iter()
                            .flat_map(|taps| taps.iter().enumerate().map(|(k, h)| h.abs() * c_a.powi(k as i32)))
                            .sum::<f64>()
                    })
                    .fold(0.0, f64::max)
            })
            .product()
    }
}

/// Signals the forward pass can combine.
trait Field: Clone {
    fn combine(terms: Vec<(f64, &Self)>, like: &Self) -> Self;
    fn activate(&self, rho: Activation) -> Self;
    fn apply(a: &POperator, x: &Self) -> Result<Self>;
}

impl Field for Signal {
    fn combine(terms: Vec<(f64, &Self)>, _: &Self) -> Self {
        let owned: Vec<(f64, Signal)> = terms.into_iter().map(|(c, s)| (c, s.clone())).collect();
        linear_combination(&owned)
    }

    fn activate(&self, rho: Activation) -> Self {
        map_pointwise(self, move |x| rho.apply(x), rho.range_bound(self.range_bound()), self.lipschitz_const())
    }

    fn apply(a: &POperator, x: &Self) -> Result<Self> {
        a.apply_signal(x)
    }
}

impl Field for FiniteSignal {
    fn combine(terms: Vec<(f64, &Self)>, like: &Self) -> Self {
        let mut acc = vec![0.0; like.n()];
        for (c, x) in terms {
            for (a, v) in acc.iter_mut().zip(x.values()) {
                *a += c * v;
            }
        }
        FiniteSignal::new(acc).expect("finite")
    }

    fn activate(&self, rho: Activation) -> Self {
        FiniteSignal::new(self.values().iter().map(|x| rho.apply(*x)).collect()).expect("finite")
    }

    fn apply(a: &POperator, x: &Self) -> Result<Self> {
        a.apply_finite(x)
    }
}

/// `[X, AX, ..., A^{K-1}X]`.
fn powers<T: Field>(a: &POperator, x: &T, order: usize) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(order);
    out.push(x.clone());
    for _ in 1..order {
        let next = T::apply(a, out.last().expect("nonempty"))?;
        out.push(next);
    }
    Ok(out)
}

fn convolve<T: Field>(taps: &[f64], a: &POperator, x: &T) -> Result<T> {
    let p = powers(a, x, taps.len())?;
    Ok(T::combine(taps.iter().copied().zip(&p).filter(|(h, _)| *h != 0.0).collect(), x))
}

fn forward<T: Field>(params: &GnnParams, a: &POperator, x: &T) -> Result<Vec<T>> {
    params.validate()?;
    let mut features = vec![x.clone()];
    for layer in &params.h {
        let p = features.iter().map(|g| powers(a, g, params.order)).collect::<Result<Vec<_>>>()?;
        features = layer
            .iter()
            .map(|row| {
                let terms = row
                    .iter()
                    .zip(&p)
                    .flat_map(|(taps, pg)| taps.iter().copied().zip(pg))
                    .filter(|(h, _)| *h != 0.0)
                    .collect();
                T::combine(terms, x).activate(params.activation)
            })
            .collect();
    }
    Ok(features)
}

fn check_taps(taps: &[f64]) -> Result<()> {
    if taps.is_empty() {
        return Err(Error::InvalidParameter("convolution needs at least one tap".into()));
    }
    if let Some((k, &value)) = taps.iter().enumerate().find(|(_, h)| h.is_nan() || h.abs() > 1.0) {
        return Err(Error::Normalization { value, location: format!("h[{k}]") });
    }
    Ok(())
}

/// `X ↦ Σ_k h_k A^k X` with `A⁰` the identity.
pub fn graphop_conv(taps: &[f64], a: &POperator) -> Result<POperator> {
    check_taps(taps)?;
    let c = a.constants();
    let c_a = taps.iter().enumerate().map(|(k, h)| h.abs() * c.c_a.powi(k as i32)).sum();
    let mut constants = OperatorConstants::new(c_a);
    if c.has(AssumptionFlag::ConstantToConstant) && c.c_c == Some(0.0) {
        constants.c_c = Some(0.0);
        constants.flags.insert(AssumptionFlag::ConstantToConstant);
        constants.resolution_set = c.resolution_set.clone();
    }
    if c.has(AssumptionFlag::LipschitzToLipschitz) && taps.iter().map(|h| h.abs()).sum::<f64>() <= 1.0 {
        // a filter with Σ|h_k| ≤ 1 averages C_v-Lipschitz images
        constants.flags.insert(AssumptionFlag::LipschitzToLipschitz);
        constants.resolution_set = c.resolution_set.clone();
    }
    let taps = taps.to_vec();
    let inner = a.clone();
    let op = match a.domain() {
        Domain::Continuum => {
            POperator::from_continuum_fn(OperatorKind::AlgebraicComposite, constants, a.lineage(), move |f| {
                convolve(&taps, &inner, f).expect("continuum operator")
            })
        }
        Domain::Grid(n) => {
            POperator::from_grid_fn(OperatorKind::AlgebraicComposite, n, constants, a.lineage(), move |x| {
                convolve(&taps, &inner, x).expect("grid operator")
            })
        }
    };
    Ok(op
        .with_structure(a.is_linear(), a.is_linear() && a.is_self_adjoint())
        .with_label(format!("conv({})", a.label())))
}

/// Runs the network on `x`, returning the `n_L` output features.
pub fn gnn_forward(params: &GnnParams, a: &POperator, x: &DomainSignal) -> Result<Vec<DomainSignal>> {
    match x {
        DomainSignal::Continuum(f) => {
            a.apply_signal(&Signal::constant(0.0))?;
            Ok(forward(params, a, f)?.into_iter().map(DomainSignal::Continuum).collect())
        }
        DomainSignal::Finite(v) => {
            a.apply_finite(v)?;
            Ok(forward(params, a, v)?.into_iter().map(DomainSignal::Finite).collect())
        }
    }
}

/// The finite network written directly against the matrix `T` of the
/// action `X ↦ T X`.
pub fn gnn_forward_matrix(params: &GnnParams, t: &Matrix, x: &FiniteSignal) -> Result<Vec<FiniteSignal>> {
    params.validate()?;
    let n = t.n();
    if x.n() != n {
        return Err(Error::ResolutionMismatch { left: n, right: x.n() });
    }
    let mut features: Vec<Vec<f64>> = vec![x.values().to_vec()];
    for layer in &params.h {
        let mut stacks: Vec<Vec<Vec<f64>>> = Vec::with_capacity(features.len());
        for g in &features {
            let mut stack = vec![g.clone()];
            for _ in 1..params.order {
                stack.push(t.matvec(stack.last().expect("nonempty")));
            }
            stacks.push(stack);
        }
        features = layer
            .iter()
            .map(|row| {
                (0..n)
                    .map(|u| {
                        let mut s = 0.0;
                        for (taps, stack) in row.iter().zip(&stacks) {
                            for (h, power) in taps.iter().zip(stack) {
                                s += h * power[u];
                            }
                        }
                        params.activation.apply(s)
                    })
                    .collect()
            })
            .collect();
    }
    features.into_iter().map(FiniteSignal::new).collect()
}

/// The network as a nonlinear operator on scalar signals.
pub fn gnn_as_operator(params: &GnnParams, a: &POperator) -> Result<POperator> {
    params.validate()?;
    if params.widths.last() != Some(&1) {
        return Err(Error::Shape(format!("operator view needs one output feature, got {:?}", params.widths.last())));
    }
    let c = a.constants();
    let mut constants = OperatorConstants::new(params.lipschitz_bound(c.c_a));
    if c.has(AssumptionFlag::ConstantToConstant) && c.c_c == Some(0.0) {
        constants.c_c = Some(0.0);
        constants.flags.insert(AssumptionFlag::ConstantToConstant);
        constants.resolution_set = c.resolution_set.clone();
    }
    let p = params.clone();
    let inner = a.clone();
    let op = match a.domain() {
        Domain::Continuum => POperator::from_continuum_fn(OperatorKind::Gnn, constants, a.lineage(), move |f| {
            forward(&p, &inner, f).expect("validated").swap_remove(0)
        }),
        Domain::Grid(n) => POperator::from_grid_fn(OperatorKind::Gnn, n, constants, a.lineage(), move |x| {
            forward(&p, &inner, x).expect("validated").swap_remove(0)
        }),
    };
    Ok(op.with_kind(OperatorKind::Gnn).with_label(format!("gnn({})", a.label())))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SignalGap {
    pub gap: f64,
    pub bound: f64,
    pub n: usize,
    pub variant: &'static str,
}

/// `‖ext(Φ(h, A_n, X)) − Φ(h, A, ext X)‖₂`, maximized over output
/// features, next to the matching signal-error bound.
pub fn gnn_signal_gap(
    params: &GnnParams,
    a: &POperator,
    n: usize,
    x: &FiniteSignal,
    c_v: f64,
    variant: Variant,
) -> Result<SignalGap> {
    params.validate()?;
    if x.n() != n {
        return Err(Error::ResolutionMismatch { left: n, right: x.n() });
    }
    let an = discretize(a, n)?;
    let discrete = forward(params, &an, x)?;
    let continuum = forward(params, a, &extend_pc(x))?;
    let gap = discrete.iter().zip(&continuum).map(|(d, c)| extend_pc(d).l2_distance(c)).fold(0.0, f64::max);
    let bound = lemma_e3_bound(a.constants().c_a, c_v, params.shape(), n, variant);
    Ok(SignalGap { gap, bound, n, variant: variant.name() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{make_graphon_op, make_graphon_op_with, make_hypercube_op, Kernel};
    use crate::signal::{midpoints, restrict, sample_lipschitz_tuple, SignalFamily};

    fn pc(v: &[f64]) -> Signal {
        Signal::piecewise_constant(v.to_vec()).unwrap()
    }

    fn random_finite(n: usize, seed: u64) -> FiniteSignal {
        let mut r = rng::stream(seed, &[]);
        FiniteSignal::new((0..n).map(|_| r.gen_range(-1.0..=1.0)).collect()).unwrap()
    }

    #[test]
    fn activations_fix_zero() {
        for rho in [Activation::Clip, Activation::Tanh, Activation::LeakyAbs] {
            assert_eq!(rho.apply(0.0), 0.0);
            for (x, y) in [(-2.0, 0.3), (0.1, 0.7), (-0.4, -0.39)] {
                assert!((rho.apply(x) - rho.apply(y)).abs() <= (x - y).abs());
            }
        }
        assert_eq!(Activation::LeakyAbs.apply(-0.5), 0.25);
    }

    #[test]
    fn conv_examples() {
        let a = make_hypercube_op(2).unwrap();
        let e = pc(&[1.0, 0.0, 0.0, 0.0]);
        let out = graphop_conv(&[0.5, 0.5], &a).unwrap().apply_signal(&e).unwrap();
        assert_eq!(out.cell_values().unwrap(), &[0.5, 0.25, 0.25, 0.0]);
        let id = graphop_conv(&[1.0, 0.0, 0.0], &a).unwrap();
        let just_a = graphop_conv(&[0.0, 1.0, 0.0], &a).unwrap();
        for s in 0..10 {
            let f = &sample_lipschitz_tuple(1, 1.0, s, SignalFamily::PiecewiseLinear)[0];
            let (i, j, k) = (id.apply_signal(f).unwrap(), just_a.apply_signal(f).unwrap(), a.apply_signal(f).unwrap());
            for x in midpoints(31) {
                assert_eq!(i.at(x), f.at(x));
                assert_eq!(j.at(x), k.at(x));
            }
        }
        assert!(graphop_conv(&[], &a).is_err());
        assert!(matches!(graphop_conv(&[1.5], &a), Err(Error::Normalization { .. })));
        assert_eq!(graphop_conv(&[0.5, -0.25], &a).unwrap().constants().c_a, 0.75);
    }

    #[test]
    fn identity_network_clips() {
        let a = make_hypercube_op(3).unwrap();
        let p = GnnParams::identity(2, Activation::Clip);
        let f = Signal::piecewise_linear(vec![-0.5, 0.9, 0.2]).unwrap();
        let out = gnn_forward(&p, &a, &DomainSignal::Continuum(f.clone())).unwrap();
        let DomainSignal::Continuum(g) = &out[0] else { panic!() };
        for x in midpoints(50) {
            assert_eq!(g.at(x), f.at(x));
        }
        let big = pc(&[3.0, -2.0]);
        let out = gnn_forward(&p, &a, &DomainSignal::Continuum(big)).unwrap();
        let DomainSignal::Continuum(g) = &out[0] else { panic!() };
        assert_eq!(g.cell_values().unwrap(), &[1.0, -1.0]);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let a = make_hypercube_op(3).unwrap();
        for rho in [Activation::Clip, Activation::Tanh, Activation::LeakyAbs] {
            let p = GnnParams::zero(&[1, 3, 2], 3, rho);
            let x = DomainSignal::Finite(random_finite(8, 1));
            let an = discretize(&a, 8).unwrap();
            for out in gnn_forward(&p, &an, &x).unwrap() {
                let DomainSignal::Finite(v) = out else { panic!() };
                assert!(v.values().iter().all(|y| *y == 0.0));
            }
        }
    }

    #[test]
    fn constant_input_follows_scalar_recursion() {
        let a = make_hypercube_op(3).unwrap();
        let p = GnnParams::random(&[1, 2, 1], 2, Activation::Clip, 17);
        let out = gnn_forward(&p, &a, &DomainSignal::Continuum(Signal::constant(0.5))).unwrap();
        // constants are fixed by the hypercube, so each filter acts as Σ_k h_k
        let mut scalars = vec![0.5];
        for layer in &p.h {
            scalars = layer
                .iter()
                .map(|row| {
                    row.iter().zip(&scalars).map(|(taps, x)| taps.iter().sum::<f64>() * x).sum::<f64>().clamp(-1.0, 1.0)
                })
                .collect();
        }
        let DomainSignal::Continuum(g) = &out[0] else { panic!() };
        for x in [0.0, 0.3, 0.99] {
            assert!((g.eval(x).unwrap() - scalars[0]).abs() < 1e-15);
        }
    }

    #[test]
    fn validation() {
        let mut p = GnnParams::random(&[1, 2, 1], 2, Activation::Tanh, 3);
        assert!(p.validate().is_ok());
        p.h[1][0][1][0] = 1.5;
        match p.validate() {
            Err(Error::Normalization { value, location }) => {
                assert_eq!(value, 1.5);
                assert_eq!(location, "h[1][0][1][0]");
            }
            other => panic!("{other:?}"),
        }
        let mut q = GnnParams::random(&[1, 2, 1], 2, Activation::Tanh, 3);
        q.h[0].pop();
        assert!(matches!(q.validate(), Err(Error::Shape(_))));
        let r = GnnParams { widths: vec![2, 1], ..GnnParams::identity(1, Activation::Clip) };
        assert!(matches!(r.validate(), Err(Error::Shape(_))));
    }

    #[test]
    fn params_json_round_trip() {
        let p = GnnParams::random(&[1, 2, 1], 2, Activation::LeakyAbs, 5);
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.contains("\"L\":2") && text.contains("\"leaky-abs\""));
        let back: GnnParams = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn hidden_permutation_is_invisible() {
        let a = make_graphon_op(Kernel::gaussian_bump(0.7).unwrap(), 1.0).unwrap();
        let an = discretize(&a, 16).unwrap();
        let p = GnnParams::random(&[1, 3, 1], 2, Activation::Tanh, 8);
        let mut q = p.clone();
        let perm = [2, 0, 1];
        q.h[0] = perm.iter().map(|&i| p.h[0][i].clone()).collect();
        q.h[1][0] = perm.iter().map(|&i| p.h[1][0][i].clone()).collect();
        let x = DomainSignal::Finite(random_finite(16, 2));
        let (DomainSignal::Finite(u), DomainSignal::Finite(v)) =
            (&gnn_forward(&p, &an, &x).unwrap()[0], &gnn_forward(&q, &an, &x).unwrap()[0])
        else {
            panic!()
        };
        for (a, b) in u.values().iter().zip(v.values()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn matrix_path_agrees() {
        for (a, n) in [(make_hypercube_op(4).unwrap(), 16), (make_graphon_op(Kernel::min_kernel(), 1.0).unwrap(), 12)] {
            let an = discretize(&a, n).unwrap();
            let p = GnnParams::random(&[1, 2, 3, 1], 3, Activation::Tanh, 21);
            let x = random_finite(n, 6);
            let via_op = gnn_forward(&p, &an, &DomainSignal::Finite(x.clone())).unwrap();
            let via_matrix = gnn_forward_matrix(&p, an.matrix().unwrap(), &x).unwrap();
            for (u, v) in via_op.iter().zip(&via_matrix) {
                let DomainSignal::Finite(u) = u else { panic!() };
                for (s, t) in u.values().iter().zip(v.values()) {
                    assert!((s - t).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn piecewise_constant_inputs_stay_piecewise_constant() {
        let a = make_hypercube_op(6).unwrap();
        let p = GnnParams::random(&[1, 2, 1], 2, Activation::Clip, 4);
        let x = extend_pc(&random_finite(16, 9));
        let out = gnn_forward(&p, &a, &DomainSignal::Continuum(x)).unwrap();
        let DomainSignal::Continuum(g) = &out[0] else { panic!() };
        for cell in 0..16 {
            let probes: Vec<f64> = midpoints(8).map(|t| g.at((cell as f64 + t) / 16.0)).collect();
            assert!(probes.iter().all(|v| *v == probes[0]));
        }
    }

    #[test]
    fn lipschitz_ratio_within_composite_bound() {
        let a = make_graphon_op_with(Kernel::product(), 1.0, 256).unwrap();
        let p = GnnParams::random(&[1, 2, 1], 2, Activation::Tanh, 12);
        let phi = gnn_as_operator(&p, &a).unwrap();
        let declared = phi.constants().c_a;
        for s in 0..20 {
            let t = sample_lipschitz_tuple(2, 4.0, 1000 + s, SignalFamily::PiecewiseLinear);
            let num = phi.apply_signal(&t[0]).unwrap().l2_distance(&phi.apply_signal(&t[1]).unwrap());
            let den = t[0].l2_distance(&t[1]);
            assert!(num <= declared * den * (1.0 + 1e-9));
        }
    }

    #[test]
    fn operator_view() {
        let a = make_hypercube_op(4).unwrap();
        let id = gnn_as_operator(&GnnParams::identity(2, Activation::Clip), &a).unwrap();
        assert!(!id.is_linear());
        assert_eq!(id.kind(), OperatorKind::Gnn);
        assert_eq!(id.lineage(), a.lineage());
        let g = id.apply_signal(&pc(&[2.0, 0.5])).unwrap();
        assert_eq!(g.cell_values().unwrap(), &[1.0, 0.5]);
        let zero = gnn_as_operator(&GnnParams::zero(&[1, 2, 1], 2, Activation::Clip), &a).unwrap();
        assert_eq!(zero.constants().c_a, 0.0);
        let wide = GnnParams::random(&[1, 2], 1, Activation::Clip, 1);
        assert!(matches!(gnn_as_operator(&wide, &a), Err(Error::Shape(_))));
    }

    #[test]
    fn signal_gap_examples() {
        let a = make_hypercube_op(6).unwrap();
        let x = restrict(&sample_lipschitz_tuple(1, 1.0, 3, SignalFamily::PiecewiseLinear)[0], 64);
        let id =
            gnn_signal_gap(&GnnParams::identity(2, Activation::Clip), &a, 64, &x, 1.0, Variant::LipschitzToLipschitz)
                .unwrap();
        assert_eq!(id.gap, 0.0);
        let zero = GnnParams::zero(&[1, 2, 1], 2, Activation::Clip);
        assert_eq!(gnn_signal_gap(&zero, &a, 64, &x, 1.0, Variant::LipschitzToLipschitz).unwrap().gap, 0.0);
        let p = GnnParams::random(&[1, 2, 1], 2, Activation::Clip, 7);
        let r = gnn_signal_gap(&p, &a, 64, &x, 1.0, Variant::LipschitzToLipschitz).unwrap();
        assert_eq!(r.bound, 2916.0);
        assert!(r.gap <= r.bound);
    }
}

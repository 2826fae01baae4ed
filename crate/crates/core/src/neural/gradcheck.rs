use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{value_difference, Graph, NodeId};
use super::params::{ParamId, ParamStore};
use crate::error::{Error, Result};

/// Minimum number of coordinates checked per parameter (all of them when
/// the parameter is smaller).
pub const MIN_COORDS_PER_PARAM: usize = 100;

const DENOM_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct CoordCheck {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coords_checked: usize,
    pub worst: Option<CoordCheck>,
}

/// Builds a scalar loss on a fresh graph.
pub trait LossBuilder: Fn(&mut Graph, &ParamStore) -> Result<NodeId> {}
impl<F: Fn(&mut Graph, &ParamStore) -> Result<NodeId>> LossBuilder for F {}

/// Loss value and exact parameter gradients.
pub fn forward_backward(build: impl LossBuilder, params: &ParamStore) -> Result<(f64, super::params::Grads)> {
    let mut g = Graph::new();
    let loss = build(&mut g, params)?;
    let value = g.scalar(loss);
    let grads = g.backward(loss)?.into_param_grads(params);
    Ok((value, grads))
}

/// Compares reverse-mode gradients with central differences.
///
/// Perturbed evaluations replay the recorded outputs of every
/// `stop_gradient` node, so blocked paths contribute nothing to either side.
/// The difference `f(w+eps) − f(w−eps)` is evaluated term by term over the
/// loss's additive structure to limit cancellation.
/// Relative error uses the denominator `max(|analytic|, |numeric|, 1e-8)`.
pub fn grad_check(build: impl LossBuilder, params: &ParamStore, eps: f64, seed: u64) -> Result<GradCheckReport> {
    grad_check_params(build, params, eps, seed, &params.ids().collect::<Vec<_>>())
}

/// [`grad_check`] restricted to a subset of parameters.
pub fn grad_check_params(
    build: impl LossBuilder,
    params: &ParamStore,
    eps: f64,
    seed: u64,
    which: &[ParamId],
) -> Result<GradCheckReport> {
    if !(eps > 0.0 && eps <= 1e-2) {
        return Err(Error::Config(format!("grad_check eps must be in (0, 1e-2], got {eps}")));
    }
    let mut g = Graph::new();
    let loss = build(&mut g, params)?;
    let stops = g.stop_values().to_vec();
    let analytic = g.backward(loss)?.into_param_grads(params);

    let eval = |p: &ParamStore| -> Result<(Graph, NodeId)> {
        let mut g = Graph::with_frozen_stops(stops.clone());
        let l = build(&mut g, p)?;
        Ok((g, l))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        coords_checked: 0,
        worst: None,
    };
    for &id in which {
        let n = params.value(id).len();
        let coords: Vec<usize> = if n <= MIN_COORDS_PER_PARAM {
            (0..n).collect()
        } else {
            let mut c = sample(&mut rng, n, MIN_COORDS_PER_PARAM).into_vec();
            c.sort_unstable();
            c
        };
        for idx in coords {
            let orig = params.value(id).data()[idx];
            work.value_mut(id).data_mut()[idx] = orig + eps;
            let plus = eval(&work)?;
            work.value_mut(id).data_mut()[idx] = orig - eps;
            let minus = eval(&work)?;
            work.value_mut(id).data_mut()[idx] = orig;

            let numeric = value_difference(&plus.0, &minus.0, plus.1)[0] / (2.0 * eps);
            let a = analytic.get(id).data()[idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(DENOM_FLOOR);
            report.coords_checked += 1;
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(rel);
                report.worst = Some(CoordCheck {
                    param: params.entry(id).name.clone(),
                    index: idx,
                    analytic: a,
                    numeric,
                    rel_error: rel,
                });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::params::Group;
    use crate::neural::tensor::Tensor;
    use rand::Rng;

    #[test]
    fn linear_graph_is_exact() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = store.add_xavier("w", Group::Generator, 4, 3, &mut rng).unwrap();
        let x = Tensor::vector(vec![0.3, -1.2, 2.0]);
        let build = |g: &mut Graph, p: &ParamStore| {
            let wn = g.param(p, w)?;
            let xn = g.constant(x.clone())?;
            let y = g.matmul(wn, xn)?;
            g.sum(y)
        };
        let r = grad_check(build, &store, 1e-4, 0).unwrap();
        assert!(r.max_rel_error < 1e-9, "{r:?}");
        assert_eq!(r.coords_checked, 12);
    }

    #[test]
    fn softmax_cross_entropy_head() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = store.add_xavier("w", Group::Generator, 6, 5, &mut rng).unwrap();
        let b = store.add_zeros("b", Group::Generator, &[6]).unwrap();
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let build = |g: &mut Graph, p: &ParamStore| {
            let wn = g.param(p, w)?;
            let bn = g.param(p, b)?;
            let xn = g.constant(Tensor::vector(x.clone()))?;
            let h = g.matmul(wn, xn)?;
            let h = g.add(h, bn)?;
            let ls = g.log_softmax(h)?;
            let pick = g.gather(ls, 2)?;
            g.scale(pick, -1.0)
        };
        let r = grad_check(build, &store, 1e-5, 0).unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }

    #[test]
    fn blocked_coordinates_are_zero_on_both_sides() {
        let mut store = ParamStore::new();
        let a = store.add("a", Group::Extractor, Tensor::vector(vec![0.7, -0.3])).unwrap();
        let b = store.add("b", Group::Generator, Tensor::vector(vec![1.5, 0.2])).unwrap();
        let build = |g: &mut Graph, p: &ParamStore| {
            let an = g.param(p, a)?;
            let bn = g.param(p, b)?;
            let t = g.tanh(an)?;
            let s = g.stop_gradient(t)?;
            let m = g.mul(s, bn)?;
            g.sum(m)
        };
        let r = grad_check_params(build, &store, 1e-4, 0, &[a]).unwrap();
        assert_eq!(r.max_rel_error, 0.0);
        let w = r.worst.unwrap();
        assert_eq!((w.analytic, w.numeric), (0.0, 0.0));
    }

    #[test]
    fn eps_out_of_range() {
        let store = ParamStore::new();
        let build = |g: &mut Graph, _: &ParamStore| g.constant(Tensor::scalar(1.0));
        assert!(grad_check(build, &store, 0.1, 0).is_err());
        assert!(grad_check(build, &store, 0.0, 0).is_err());
    }
}

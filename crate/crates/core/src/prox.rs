//! Proximal maps of the supported norms and projections onto dual-norm balls.
//!
//! The two families are linked by Moreau's decomposition
//! `z = prox_{t||.||}(z) + P_{tB}(z)`, where `B` is the unit ball of the dual
//! norm. Both solvers are built from these primitives: ADMM evaluates the
//! prox in its split-variable update, AMA projects gradient steps onto the
//! dual balls. The in-place slice variants are the solver hot path; the
//! public functions wrap them.

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::model::{ClusterProblem, DualNorm, DualVariables, PenaltyNorm};

/// A prox evaluation request: the point `v` and the scale `sigma` of
/// `argmin_u sigma * ||u|| + 1/2 ||u - v||_2^2`.
#[derive(Debug, Clone)]
pub struct ProxRequest {
    pub v: Array1<f64>,
    pub sigma: f64,
}

impl ProxRequest {
    pub fn new(v: Array1<f64>, sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::NegativeParameter {
                name: "sigma",
                value: sigma,
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidData("non-finite prox input".into()));
        }
        Ok(Self { v, sigma })
    }

    pub fn evaluate(&self, norm: &PenaltyNorm) -> Result<Array1<f64>> {
        prox(norm, self.v.view(), self.sigma)
    }
}

/// Euclidean projection onto a ball `{ y : ||y|| <= radius }` of the given
/// norm. For the dual constraint sets the norm is the dual of the penalty:
/// l1 penalties project onto linf balls (clamp), l2 onto l2 (radial
/// scaling), linf onto l1 (threshold search), and the group norm clamps
/// each group's Euclidean norm.
#[derive(Debug, Clone)]
pub struct BallProjection {
    norm: DualNorm,
    radius: f64,
}

impl BallProjection {
    pub fn new(norm: DualNorm, radius: f64) -> Result<Self> {
        if !radius.is_finite() || radius < 0.0 {
            return Err(Error::NegativeParameter {
                name: "radius",
                value: radius,
            });
        }
        Ok(Self { norm, radius })
    }

    /// Ball of the dual norm of `penalty`, as used by the dual constraints.
    pub fn dual_ball_of(penalty: &PenaltyNorm, radius: f64) -> Result<Self> {
        Self::new(penalty.dual(), radius)
    }

    pub fn norm(&self) -> &DualNorm {
        &self.norm
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn project(&self, z: ArrayView1<'_, f64>) -> Array1<f64> {
        let mut out = z.to_owned();
        project_ball_in_place(
            &self.norm,
            out.as_slice_mut().expect("owned vector"),
            self.radius,
        );
        out
    }
}

/// Projects `z` onto the ball described by `proj`.
pub fn project_ball(proj: &BallProjection, z: ArrayView1<'_, f64>) -> Array1<f64> {
    proj.project(z)
}

/// `prox_{sigma ||.||}(v)`: the unique minimizer of
/// `sigma * ||u|| + 1/2 ||u - v||_2^2`.
pub fn prox(norm: &PenaltyNorm, v: ArrayView1<'_, f64>, sigma: f64) -> Result<Array1<f64>> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::NegativeParameter {
            name: "sigma",
            value: sigma,
        });
    }
    let mut out = v.to_owned();
    prox_in_place(norm, out.as_slice_mut().expect("owned vector"), sigma);
    Ok(out)
}

/// In-place prox on a coordinate slice; `sigma` must be nonnegative
/// (checked by the public wrappers).
pub(crate) fn prox_in_place(norm: &PenaltyNorm, v: &mut [f64], sigma: f64) {
    debug_assert!(sigma >= 0.0);
    if sigma == 0.0 {
        return;
    }
    match norm {
        PenaltyNorm::L1 => {
            for x in v.iter_mut() {
                *x = soft_threshold(*x, sigma);
            }
        }
        PenaltyNorm::L2 => block_shrink(v, sigma),
        PenaltyNorm::GroupL2(groups) => {
            for group in groups {
                let norm_sq: f64 = group.iter().map(|&i| v[i] * v[i]).sum();
                let nrm = norm_sq.sqrt();
                if nrm <= sigma {
                    for &i in group {
                        v[i] = 0.0;
                    }
                } else {
                    let scale = 1.0 - sigma / nrm;
                    for &i in group {
                        v[i] *= scale;
                    }
                }
            }
        }
        // Moreau: prox of the max norm is the residual of projecting onto
        // the l1 ball of radius sigma.
        PenaltyNorm::Linf => {
            let projected = project_l1_ball_slice(v, sigma);
            for (x, p) in v.iter_mut().zip(projected) {
                *x -= p;
            }
        }
    }
}

fn soft_threshold(x: f64, sigma: f64) -> f64 {
    if x > sigma {
        x - sigma
    } else if x < -sigma {
        x + sigma
    } else {
        0.0
    }
}

/// Blockwise shrinkage `[1 - sigma/||v||]_+ v`, with the removable
/// singularity at `v = 0` mapped to 0 directly.
fn block_shrink(v: &mut [f64], sigma: f64) {
    let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nrm <= sigma || nrm == 0.0 {
        v.fill(0.0);
    } else {
        let scale = 1.0 - sigma / nrm;
        for x in v.iter_mut() {
            *x *= scale;
        }
    }
}

pub(crate) fn project_ball_in_place(norm: &DualNorm, z: &mut [f64], radius: f64) {
    debug_assert!(radius >= 0.0);
    if radius == 0.0 {
        z.fill(0.0);
        return;
    }
    match norm {
        DualNorm::Linf => {
            for x in z.iter_mut() {
                *x = x.clamp(-radius, radius);
            }
        }
        DualNorm::L2 => {
            let nrm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nrm > radius {
                let scale = radius / nrm;
                for x in z.iter_mut() {
                    *x *= scale;
                }
            }
        }
        DualNorm::L1 => {
            let projected = project_l1_ball_slice(z, radius);
            z.copy_from_slice(&projected);
        }
        DualNorm::GroupMaxL2(groups) => {
            for group in groups {
                let nrm = group.iter().map(|&i| z[i] * z[i]).sum::<f64>().sqrt();
                if nrm > radius {
                    let scale = radius / nrm;
                    for &i in group {
                        z[i] *= scale;
                    }
                }
            }
        }
    }
}

/// Projection onto the l1 ball of the given radius: identity inside the
/// ball, otherwise the simplex projection of the magnitudes with signs
/// restored.
pub(crate) fn project_l1_ball_slice(z: &[f64], radius: f64) -> Vec<f64> {
    if radius == 0.0 {
        return vec![0.0; z.len()];
    }
    let l1: f64 = z.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return z.to_vec();
    }
    let magnitudes: Vec<f64> = z.iter().map(|x| x.abs()).collect();
    let mut projected = project_simplex_slice(&magnitudes, radius);
    for (w, x) in projected.iter_mut().zip(z) {
        *w = w.copysign(*x);
    }
    projected
}

fn project_simplex_slice(z: &[f64], radius: f64) -> Vec<f64> {
    debug_assert!(radius > 0.0);
    let mut sorted = z.to_vec();
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite input"));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (idx, &value) in sorted.iter().enumerate() {
        cumulative += value;
        let candidate = (cumulative - radius) / (idx as f64 + 1.0);
        if value - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    let mut out: Vec<f64> = z.iter().map(|x| (x - theta).max(0.0)).collect();
    // Guard against accumulated rounding pushing the result outside the
    // simplex; feasibility of downstream dual iterates depends on it.
    let total: f64 = out.iter().sum();
    if total > radius {
        let scale = radius / total;
        for x in out.iter_mut() {
            *x *= scale;
        }
    }
    out
}

/// Euclidean projection onto `{ y >= 0, sum(y) = radius }` by descending
/// sort and cumulative-sum thresholding, O(p log p). Sort ties are broken
/// arbitrarily; the projection is unique regardless.
pub fn project_simplex(z: ArrayView1<'_, f64>, radius: f64) -> Result<Array1<f64>> {
    if !radius.is_finite() || radius <= 0.0 {
        return Err(Error::InvalidRadius(radius));
    }
    let z_vec: Vec<f64> = z.to_vec();
    Ok(Array1::from(project_simplex_slice(&z_vec, radius)))
}

/// Evaluates both halves of Moreau's decomposition at scale `t`:
/// `prox_{t||.||}(z)` and the projection of `z` onto the dual ball of
/// radius `t`. Their sum reconstructs `z`.
pub fn moreau_check(
    norm: &PenaltyNorm,
    z: ArrayView1<'_, f64>,
    t: f64,
) -> Result<(Array1<f64>, Array1<f64>)> {
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::NegativeParameter { name: "t", value: t });
    }
    let prox_value = prox(norm, z, t)?;
    let projection = BallProjection::dual_ball_of(norm, t)?.project(z);
    Ok((prox_value, projection))
}

impl DualVariables {
    /// Projects every multiplier onto its dual ball `||lambda_l|| <= gamma w_l`,
    /// making the variables feasible for `problem`.
    pub fn project_feasible(&mut self, problem: &ClusterProblem) {
        let dual = problem.norm().dual();
        let radii: Vec<f64> = (0..problem.graph().n_edges())
            .map(|l| problem.ball_radius(l))
            .collect();
        let p = self.values().ncols();
        let flat = self
            .values_mut()
            .as_slice_mut()
            .expect("standard layout");
        for (l, row) in flat.chunks_mut(p).enumerate() {
            project_ball_in_place(&dual, row, radii[l]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn max_abs_diff(a: &Array1<f64>, b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn prox_with_zero_sigma_is_identity() {
        let v = array![1.0, -2.0, 0.5];
        for norm in [
            PenaltyNorm::L1,
            PenaltyNorm::L2,
            PenaltyNorm::Linf,
            PenaltyNorm::GroupL2(vec![vec![0, 1], vec![2]]),
        ] {
            let out = prox(&norm, v.view(), 0.0).unwrap();
            assert_eq!(out, v);
        }
    }

    #[test]
    fn prox_rejects_negative_sigma() {
        let v = array![1.0];
        assert!(prox(&PenaltyNorm::L1, v.view(), -0.1).is_err());
    }

    #[test]
    fn l2_prox_examples() {
        let v = array![3.0, 4.0];
        let collapsed = prox(&PenaltyNorm::L2, v.view(), 5.0).unwrap();
        assert_eq!(collapsed, array![0.0, 0.0]);

        let shrunk = prox(&PenaltyNorm::L2, v.view(), 2.5).unwrap();
        assert!(max_abs_diff(&shrunk, &[1.5, 2.0]) < 1e-12);
    }

    #[test]
    fn l1_prox_soft_thresholds() {
        let v = array![1.0, -2.0, 0.5];
        let out = prox(&PenaltyNorm::L1, v.view(), 1.0).unwrap();
        assert_eq!(out, array![0.0, -1.0, 0.0]);
    }

    #[test]
    fn linf_prox_example() {
        let v = array![3.0, 1.0];
        let out = prox(&PenaltyNorm::Linf, v.view(), 2.0).unwrap();
        assert!(max_abs_diff(&out, &[1.0, 1.0]) < 1e-12);
    }

    #[test]
    fn group_prox_shrinks_blockwise() {
        let v = array![3.0, 4.0, -1.0];
        let norm = PenaltyNorm::GroupL2(vec![vec![0, 1], vec![2]]);
        let out = prox(&norm, v.view(), 2.5).unwrap();
        assert!(max_abs_diff(&out, &[1.5, 2.0, 0.0]) < 1e-12);
    }

    #[test]
    fn ball_projection_examples() {
        let inside = array![0.2, -0.3];
        let ball = BallProjection::new(DualNorm::L2, 1.0).unwrap();
        assert_eq!(ball.project(inside.view()), inside);

        let clamp = BallProjection::new(DualNorm::Linf, 1.0).unwrap();
        assert_eq!(clamp.project(array![2.0, -3.0].view()), array![1.0, -1.0]);

        let l1 = BallProjection::new(DualNorm::L1, 2.0).unwrap();
        let out = l1.project(array![3.0, 1.0].view());
        assert!(max_abs_diff(&out, &[2.0, 0.0]) < 1e-12);
    }

    #[test]
    fn zero_radius_ball_collapses_to_origin() {
        for norm in [DualNorm::L1, DualNorm::L2, DualNorm::Linf] {
            let ball = BallProjection::new(norm, 0.0).unwrap();
            assert_eq!(ball.project(array![5.0, -7.0].view()), array![0.0, 0.0]);
        }
    }

    #[test]
    fn negative_radius_rejected() {
        assert!(BallProjection::new(DualNorm::L2, -1.0).is_err());
    }

    #[test]
    fn simplex_projection_examples() {
        let on = project_simplex(array![0.5, 0.5].view(), 1.0).unwrap();
        assert!(max_abs_diff(&on, &[0.5, 0.5]) < 1e-15);

        let vertex = project_simplex(array![2.0, 0.0].view(), 1.0).unwrap();
        assert!(max_abs_diff(&vertex, &[1.0, 0.0]) < 1e-15);

        let interior = project_simplex(array![0.6, 0.8].view(), 1.0).unwrap();
        assert!(max_abs_diff(&interior, &[0.4, 0.6]) < 1e-15);

        assert!(project_simplex(array![1.0].view(), 0.0).is_err());
    }

    #[test]
    fn moreau_pairs_sum_to_input() {
        let z = array![3.0, 4.0];
        let (p, q) = moreau_check(&PenaltyNorm::L2, z.view(), 2.5).unwrap();
        assert!(max_abs_diff(&p, &[1.5, 2.0]) < 1e-12);
        assert!(max_abs_diff(&q, &[1.5, 2.0]) < 1e-12);

        let z = array![1.0, -2.0, 0.5];
        let (p, q) = moreau_check(&PenaltyNorm::L1, z.view(), 1.0).unwrap();
        assert_eq!(p, array![0.0, -1.0, 0.0]);
        assert_eq!(q, array![1.0, -1.0, 0.5]);

        let zero = array![0.0, 0.0];
        let (p, q) = moreau_check(&PenaltyNorm::Linf, zero.view(), 1.0).unwrap();
        assert_eq!(p, array![0.0, 0.0]);
        assert_eq!(q, array![0.0, 0.0]);
    }
}

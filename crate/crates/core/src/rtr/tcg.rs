//! Truncated conjugate gradient (Steihaug-Toint) for the trust-region subproblem
//! `min <g, eta> + 1/2 <eta, H eta>` subject to `||eta|| <= delta`.

#[allow(unused_imports)]
use num_traits::Float;

use super::TangentVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcgConfig {
    pub max_inner: usize,
    /// Linear-convergence factor in the residual test.
    pub kappa: f64,
    /// Superlinear exponent in the residual test.
    pub theta: f64,
}

impl Default for TcgConfig {
    fn default() -> Self {
        Self { max_inner: 50, kappa: 0.1, theta: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcgStop {
    ZeroGradient,
    NegativeCurvature,
    TrustRegionBoundary,
    ResidualSmall,
    MaxInner,
    ModelIncreased,
    CauchyFallback,
}

#[derive(Debug, Clone)]
pub struct Subproblem {
    pub eta: TangentVector,
    pub h_eta: TangentVector,
    /// `m(0) - m(eta)`.
    pub model_decrease: f64,
    pub inner_iterations: usize,
    pub stop: TcgStop,
}

fn decrease(g: &TangentVector, eta: &TangentVector, h_eta: &TangentVector) -> f64 {
    -(g.inner(eta) + 0.5 * eta.inner(h_eta))
}

/// Runs tCG from `eta = 0`. The result never does worse on the model than the Cauchy point,
/// which matters because the Hessian operator may be only approximately linear and symmetric.
pub fn truncated_cg(
    grad: &TangentVector,
    mut hess: impl FnMut(&TangentVector) -> TangentVector,
    delta: f64,
    cfg: &TcgConfig,
) -> Subproblem {
    let zero = grad.zeros_like();
    let g_norm = grad.norm();
    if g_norm == 0.0 {
        return Subproblem {
            eta: zero.clone(),
            h_eta: zero,
            model_decrease: 0.0,
            inner_iterations: 0,
            stop: TcgStop::ZeroGradient,
        };
    }

    let mut eta = zero.clone();
    let mut h_eta = zero;
    let mut r = grad.clone();
    let mut r_r = r.inner(&r);
    let mut dir = r.scaled(-1.0);
    let (mut e_pe, mut e_pd, mut d_pd) = (0.0, 0.0, r_r);
    let r0_norm = r_r.sqrt();
    let target = r0_norm * r0_norm.powf(cfg.theta).min(cfg.kappa);

    let mut first_curvature = None;
    let mut stop = TcgStop::MaxInner;
    let mut inner = 0;
    let mut current = 0.0;
    while inner < cfg.max_inner {
        inner += 1;
        let h_dir = hess(&dir);
        let d_hd = dir.inner(&h_dir);
        if first_curvature.is_none() {
            first_curvature = Some((d_hd, h_dir.clone()));
        }
        let alpha = r_r / d_hd;
        let e_pe_new = e_pe + 2.0 * alpha * e_pd + alpha * alpha * d_pd;
        if d_hd <= 0.0 || e_pe_new >= delta * delta {
            let tau = (-e_pd + (e_pd * e_pd + d_pd * (delta * delta - e_pe)).max(0.0).sqrt()) / d_pd;
            let cand = eta.add_scaled(&dir, tau);
            let cand_h = h_eta.add_scaled(&h_dir, tau);
            let dec = decrease(grad, &cand, &cand_h);
            stop = if d_hd <= 0.0 { TcgStop::NegativeCurvature } else { TcgStop::TrustRegionBoundary };
            if dec >= current {
                eta = cand;
                h_eta = cand_h;
                current = dec;
            } else {
                stop = TcgStop::ModelIncreased;
            }
            break;
        }
        let cand = eta.add_scaled(&dir, alpha);
        let cand_h = h_eta.add_scaled(&h_dir, alpha);
        let dec = decrease(grad, &cand, &cand_h);
        if dec < current {
            stop = TcgStop::ModelIncreased;
            break;
        }
        eta = cand;
        h_eta = cand_h;
        current = dec;
        e_pe = e_pe_new;
        r.axpy(alpha, &h_dir);
        let r_r_new = r.inner(&r);
        if r_r_new.sqrt() <= target {
            stop = TcgStop::ResidualSmall;
            break;
        }
        let beta = r_r_new / r_r;
        r_r = r_r_new;
        dir = dir.scaled(beta).add_scaled(&r, -1.0);
        e_pd = beta * (e_pd + alpha * d_pd);
        d_pd = r_r + beta * beta * d_pd;
    }

    // Cauchy point along -g; H(-g) is the first curvature probe.
    if let Some((g_hg, h_neg_g)) = first_curvature {
        let tau = if g_hg <= 0.0 { 1.0 } else { (g_norm * g_norm * g_norm / (delta * g_hg)).min(1.0) };
        let scale = tau * delta / g_norm;
        let cauchy = grad.scaled(-scale);
        let cauchy_h = h_neg_g.scaled(scale);
        let cauchy_dec = decrease(grad, &cauchy, &cauchy_h);
        if cauchy_dec > current {
            return Subproblem {
                eta: cauchy,
                h_eta: cauchy_h,
                model_decrease: cauchy_dec,
                inner_iterations: inner,
                stop: TcgStop::CauchyFallback,
            };
        }
    }
    Subproblem { eta, h_eta, model_decrease: current, inner_iterations: inner, stop }
}

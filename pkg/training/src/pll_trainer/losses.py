"""Data-fit and physics-residual losses.

The data term is the mean squared 2-norm between predicted and reference
next states.  The physics term differentiates the predicted state through
the step structure with respect to dt -- the prediction is a short
trajectory in dt -- and penalizes the gap to the PLL right-hand side
evaluated at the predicted state.  The voltage sample is held frozen
inside that residual: the collocation points carry no rotation history,
so the exogenous input is treated as constant over the (vanishing) step.
"""

import torch

from . import pll_ode


def data_loss(model, batch):
    th_hat, xi_hat = model.step(batch["dt"], batch["v_abc"],
                                batch["theta"], batch["xi"])
    return torch.mean((th_hat - batch["theta_next"]) ** 2
                      + (xi_hat - batch["xi_next"]) ** 2)


def residual(model, batch):
    """Per-point physics residual pair (r_theta, r_xi) at the collocation set."""
    dt = batch["dt"].detach().clone().requires_grad_(True)
    v = batch["v_abc"]
    th_hat, xi_hat = model.step(dt, v, batch["theta"], batch["xi"])
    ones = torch.ones_like(th_hat)
    dth = torch.autograd.grad(th_hat, dt, grad_outputs=ones, create_graph=True)[0]
    dxi = torch.autograd.grad(xi_hat, dt, grad_outputs=ones, create_graph=True)[0]
    # frozen-voltage right-hand side at the predicted state
    al = (2.0 * v[..., 0] - v[..., 1] - v[..., 2]) / 3.0
    be = (v[..., 1] - v[..., 2]) / torch.sqrt(torch.tensor(3.0, dtype=v.dtype))
    vq = be * torch.cos(th_hat) - al * torch.sin(th_hat)
    f_th = pll_ode.W0 + pll_ode.KP * vq + xi_hat
    f_xi = pll_ode.KI * vq
    return dth - f_th, dxi - f_xi


def physics_loss(model, batch):
    r_th, r_xi = residual(model, batch)
    return torch.mean(r_th ** 2 + r_xi ** 2)


def total_loss(model, d_u, d_p, alpha):
    """(L_u, L_p, total) with total = L_u + alpha * L_p.

    alpha = 0 skips the physics term entirely, so total == L_u exactly.
    """
    l_u = data_loss(model, d_u)
    if alpha == 0.0:
        return l_u, torch.zeros((), dtype=l_u.dtype), l_u
    l_p = physics_loss(model, d_p)
    return l_u, l_p, l_u + alpha * l_p

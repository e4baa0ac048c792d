"""Torch twin of the simulator's network.

Identical structure to the engine side: inputs squashed feature-wise onto
[-1, 1] from the trained bounds, tanh after *every* linear layer (output
included), and an affine (offset, scale) pair mapping the bounded outputs
to physical rates.  The step rule is

    theta_next = theta + dt * theta_rate
    xi_next    = xi    + dt * xi_rate

so dt = 0 is the identity by construction, whatever the weights.
Everything runs in float64; the exported file must reproduce the trained
model bit-for-bit.
"""

import numpy as np
import torch

from . import pll_ode

FEATURES = ("dt", "v_a", "v_b", "v_c", "sin_theta", "cos_theta", "omega_integ")
OUTPUTS = ("theta_rate", "omega_integ_rate")

# rate normalization: theta_rate swings around nominal speed by at most
# kp*|v| + |xi| (about 31), the zero-centred integrator rate reaches
# ki*|v| = 330 -- the scales must cover those or tanh saturates
RATE_OFFSET = (pll_ode.W0, 0.0)
RATE_SCALE = (50.0, 400.0)


class RateNet(torch.nn.Module):
    def __init__(self, config, seed=None):
        super().__init__()
        if seed is not None:
            torch.manual_seed(seed)
        dims = [len(FEATURES), *config.widths, len(OUTPUTS)]
        self.linears = torch.nn.ModuleList(
            [torch.nn.Linear(dims[i], dims[i + 1]) for i in range(len(dims) - 1)]
        )
        self.double()
        lo, hi = config.feature_bounds
        self.register_buffer("in_lo", torch.tensor(lo, dtype=torch.float64))
        self.register_buffer("in_hi", torch.tensor(hi, dtype=torch.float64))
        self.register_buffer("out_offset",
                             torch.tensor(RATE_OFFSET, dtype=torch.float64))
        self.register_buffer("out_scale",
                             torch.tensor(RATE_SCALE, dtype=torch.float64))

    def rates(self, feats):
        """Physical (theta_rate, xi_rate), shape (..., 2), from raw features."""
        z = (feats - self.in_lo) * (2.0 / (self.in_hi - self.in_lo)) - 1.0
        for lin in self.linears:
            z = torch.tanh(lin(z))
        return self.out_offset + self.out_scale * z

    def step(self, dt, v_abc, theta, xi):
        """One surrogate step from raw state pieces; returns (theta_next, xi_next)."""
        feats = torch.stack(
            [dt, v_abc[..., 0], v_abc[..., 1], v_abc[..., 2],
             torch.sin(theta), torch.cos(theta), xi], dim=-1)
        r = self.rates(feats)
        return theta + dt * r[..., 0], xi + dt * r[..., 1]

    def layer_arrays(self):
        """[(weight, bias)] as float64 numpy, in forward order."""
        return [(lin.weight.detach().cpu().numpy().astype(float),
                 lin.bias.detach().cpu().numpy().astype(float))
                for lin in self.linears]


def tensors_from(ds):
    """Dataset arrays as a dict of float64 tensors."""
    out = {
        "dt": torch.tensor(ds.dt, dtype=torch.float64),
        "v_abc": torch.tensor(ds.v_abc, dtype=torch.float64),
        "theta": torch.tensor(ds.theta, dtype=torch.float64),
        "xi": torch.tensor(ds.xi, dtype=torch.float64),
    }
    if ds.theta_next is not None:
        out["theta_next"] = torch.tensor(ds.theta_next, dtype=torch.float64)
        out["xi_next"] = torch.tensor(ds.xi_next, dtype=torch.float64)
    return out

"""Training pipeline for the neural PLL stepper.

Generates labelled (previous state, voltage sample, dt) -> (next state)
pairs from a fine-step reference integrator, fits a small tanh network with
a combined data + physics loss, and writes the result in the simulator's
portable weights format.  The simulator itself is only touched through that
file format and its command line.
"""

from .pll_ode import oracle_step
from .sampling import TrainingConfig, sample_domain
from .model import RateNet
from .losses import data_loss, physics_loss, total_loss
from .train import train
from .export import export_weights, numpy_rates

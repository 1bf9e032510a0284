"""PID tuning by differentiating through saturated closed-loop simulations."""

from .autodiff import DiffScalar, Tape, backward, check_gradient
from .controller import DynamicPidController, GainNetwork, PidController, PidGains, SaturationLimits, pid_step
from .lti import DiscreteModel, StateSpaceModel, TransferFunction, tf_to_ss, zoh_discretize
from .simloop import CostWeights, ReferenceSignal, RolloutConfig, generate_references, rollout
from .tuner import TuneConfig, adam_step, evaluate, tune

__version__ = "0.1.0"

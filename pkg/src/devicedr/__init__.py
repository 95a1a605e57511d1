"""Device-level demand response as a discounted MDP: exact solution,
Q-learning, and demand-response potential metrics."""
from .config import load_model, save_model
from .env import DeviceEnv, EnvStep, RngStream
from .instances import paper_default_instance, tiny_instance
from .learning import LearnerConfig, StepSize, learn
from .metrics import (
    MetricsReport,
    baseline_policy,
    decompose_value,
    delta_b_bruteforce,
    dr_potential,
    gamma_star_bound,
    policy_value,
    relative_improvement,
)
from .model import (
    Action,
    DeviceModel,
    InvalidModelError,
    State,
    enumerate_states,
    state_space_size,
    transitions,
)
from .solver import bellman_backup, greedy, policy_q, stationary_distribution, value_iteration

__version__ = "0.1.0"

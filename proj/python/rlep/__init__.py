"""GRPO+/RLEP training core on synthetic verifiable-reward tasks.

Thin wrapper around the C++ extension module. The main operations:

- policy: ``PolicyParams``, ``sample``, ``logprob``, ``grad_logprob``
- tasks: ``generate_taskset``, ``verify``
- grpo core: ``group_advantage``, ``clipped_token_term``, ``surrogate_objective``
- experience pool: ``collect``, ``sample_replay``, ``save_pool``/``load_pool``
- trainer: ``TrainConfig``, ``train``
- eval: ``evaluate``, ``steps_to_threshold``, ``compare_runs``
"""

from rlep._core import *  # noqa: F401,F403
from rlep._core import __version__  # noqa: F401

"""Mask-conditioned adversarial generation workbench.

A single generator network is trained to sample any conditional distribution
of a data vector, with the conditioning pattern given by an availability/
request mask pair; an exact Gaussian oracle provides ground truth for
training data and for every evaluation protocol.
"""

import os as _os
import sys as _sys

__version__ = "0.1.0"


def _cap_blas_threads():
    # NC_WORKBENCH_THREADS caps BLAS pools. Env vars only work before numpy
    # loads; afterwards threadpoolctl is tried, and failing that the cap is a
    # documented no-op.
    cap = _os.environ.get("NC_WORKBENCH_THREADS")
    if not cap:
        return
    try:
        int(cap)
    except ValueError:
        return
    if "numpy" not in _sys.modules:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
            _os.environ[var] = cap
    else:
        try:
            import threadpoolctl

            threadpoolctl.threadpool_limits(int(cap))
        except Exception:
            pass


_cap_blas_threads()

from .errors import (BandwidthError, ConfigError, ContractError,
                     DegenerateConditioningError, MaskcondError, NotSpdError,
                     NumericError, ShapeError)
from .gaussian import (ConditionalMoments, Gaussian, conditional_entropy,
                       conditional_moments, differential_entropy,
                       log_density_conditional, log_density_joint, marginal,
                       mse_lower_bound, mutual_information, reference_gaussian,
                       rho_gaussian, sample_conditional, sample_joint)
from .kernels import BACKEND as KERNEL_BACKEND
from .linalg import cholesky_spd, logdet_spd, solve_spd
from .masks import (MaskPair, MaskSpec, apply_mask, bits_to_mask,
                    enumerate_mask_pairs, joint_pair, mask_to_bits,
                    pair_from_bits, resolve_overlap, sample_mask_batch,
                    sample_mask_pair)
from .mlp import (Mlp, init_mlp, input_gradient_sq_norm, mlp_backward,
                  mlp_forward)
from .model import (ConditioningMode, NcDiscriminator, NcGenerator,
                    assemble_discriminator_input, assemble_generator_input,
                    embed, generate, make_discriminator, make_generator, score)
from .optim import (AdamState, adam_init, adam_step, one_sided_sn_project,
                    sigma_max)
from .training import (TrainConfig, TrainResult, TraceRecord, adversarial_step,
                       benchmark_config, discriminator_loss, generator_loss,
                       moment_matching_loss, moment_matching_step, train)
from .evaluation import (EvalReport, EvalRow, GridSpec, TABLE1_MASKS,
                         ablation_suite, conditioning_grid, energy_statistic,
                         estimate_conditional_moments, grid_protocol,
                         joint_sampling_eval, mmd_statistic, param_error_norm,
                         reconstruction_check, table1_protocol)
from .checkpoint import (Checkpoint, checkpoint_roundtrip, load_checkpoint,
                         read_dataset, save_checkpoint, write_dataset)

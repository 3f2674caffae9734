"""Three-party replicated-secret-sharing engine with fixed-point arithmetic,
polynomial-approximated secure activations, and a toy diffusion sampler whose
denoiser runs entirely on shares."""

from .coeffs import EXP_FIT, MISH_FIT, SILU_FIT, ActivationFit, ExpFit
from .denoiser import (
    DenoiserDims,
    DenoiserParams,
    denoiser_forward,
    load_params,
    random_params,
    save_params,
    sinusoidal_embedding,
)
from .nonlinear import (
    SoftmaxConfig,
    neg_exp,
    secure_mish,
    secure_relu,
    secure_silu,
    secure_softmax,
    secure_time_embedding,
)
from .primitives import a2b_msb, lt, max_vec, mul_ba, recip, square
from .ring import RangeError, RingConfig
from .rss import (
    BoolShare,
    Dealer,
    PartyRuntime,
    ShareTensor,
    fixed_matmul,
    fixed_mul,
    mul_raw,
    open_shares,
    reconstruct,
    run_tcp_party,
    spawn_local_parties,
    truncate,
)
from .sampler import (
    PlainOps,
    SamplerConfig,
    SecureOps,
    ddim_step,
    ddpm_step,
    run_mpc_local,
    run_plain,
    sample,
)
from .schedule import NoiseSchedule, make_linear_schedule, q_sample
from .transport import (
    CostReport,
    HandshakeError,
    IntegrityError,
    LocalFabric,
    ProtocolAbort,
    TransportError,
)

__version__ = "0.1.0"

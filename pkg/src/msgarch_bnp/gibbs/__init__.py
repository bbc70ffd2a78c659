"""Six-block Gibbs sampler for the panel MS-GARCH model with Pitman-Yor clustering."""

from .chain import SamplerError, gibbs_sweep, initialize_state, make_streams, run_chain
from .state import ChainState, PosteriorDraws, SamplerConfig

__all__ = ["ChainState", "PosteriorDraws", "SamplerConfig", "SamplerError", "gibbs_sweep",
           "initialize_state", "make_streams", "run_chain"]

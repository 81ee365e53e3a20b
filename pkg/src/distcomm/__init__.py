"""Reliable bit transmission over distortion-constrained attack channels.

Core layers:

  prob      -- pmfs, types, divergences, distortion accounting
  rd        -- rate-distortion solvers and the random-coding exponent
  codec     -- seeded random codebooks and nearest-typical-neighbor decoding
  attackers -- attack-channel variants and the block-distortion certifier
  harness   -- trial simulation, error estimation, sweeps, CSV output
  config    -- JSON experiment configuration (pydantic)
  service   -- FastAPI wrapper; cli -- command line front end
"""

from .prob import (CondPmf, DistortionMatrix, JointPmf, Measure, Pmf,
                   average_distortion, empirical_type, expected_distortion,
                   hamming_distortion, is_typical, kl_divergence,
                   kl_vs_product, mutual_information, sample_iid,
                   type_class_bound, type_class_probability)
from .rd import (ConditionalRDResult, ExponentResult, RDResult,
                 blahut_arimoto, conditional_rd, distortion_extremes,
                 exponent_infimum, rd_curve, worst_case_channel)
from .codec import (Codebook, CodecParams, DecodeOutcome, ErasureReason,
                    Quantizer, continuity_margin, decode_conditional,
                    decode_nearest_typical, encode, export_codebook,
                    generate_codebook, generate_codebook_conditional,
                    import_codebook, quantize_sequence, restricted_set)
from .attackers import (AdditiveClippedUniform, BudgetGreedy, CoinFlipReplace,
                        DistortionCertificate, Dmc, Identity, TypicalityGate,
                        apply_attacker, make_worst_case_attacker,
                        verify_block_distortion)
from .harness import (ConditionalSource, ContinuousUniformSource,
                      ErrorEstimate, ExperimentConfig, IidSource, SweepResult,
                      TrialRecord, certify_attacker, estimate_error,
                      run_trial, run_trials, sweep)
from .errors import ConfigError, ConvergenceError, InfeasibleDistortion

__version__ = "0.1.0"

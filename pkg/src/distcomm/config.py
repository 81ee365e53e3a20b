"""JSON experiment configuration: pydantic models plus the bridge to core types.

The same document drives the CLI and the HTTP service.  Field names mirror
the experiment config: source, distortion, codec, attacker, trials,
master_seed.  Subcommand-specific extras (rd grid size, exponent window
list, sweep axis/values) ride along as optional keys.
"""
from __future__ import annotations

import json
from typing import List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from . import attackers as atk
from .codec import CodecParams
from .errors import ConfigError
from .harness import (ConditionalSource, ContinuousUniformSource,
                      ExperimentConfig, IidSource)
from .prob import CondPmf, DistortionMatrix, Pmf
from .streams import derive_seed


class IidSourceModel(BaseModel):
    kind: Literal["iid"]
    pmf: List[float]


class ConditionalSourceModel(BaseModel):
    kind: Literal["conditional"]
    p_v: List[float]
    p_x_given_v: List[List[float]]


class ContinuousUniformSourceModel(BaseModel):
    kind: Literal["continuous_uniform"]
    lo: float
    hi: float
    delta: float


SourceModel = Union[IidSourceModel, ConditionalSourceModel,
                    ContinuousUniformSourceModel]


class MatrixDistortionModel(BaseModel):
    kind: Literal["matrix"]
    d: List[List[float]]


class FamilyDistortionModel(BaseModel):
    kind: Literal["squared_error", "absolute_error"]


DistortionModel = Union[MatrixDistortionModel, FamilyDistortionModel]


class CodecModel(BaseModel):
    n: int
    rate: float
    eps: float
    target_d: float
    seed: Optional[int] = None  # derived from master_seed when omitted


class IdentityAttackerModel(BaseModel):
    kind: Literal["identity"]


class DmcAttackerModel(BaseModel):
    kind: Literal["dmc"]
    channel: List[List[float]]


class CoinFlipAttackerModel(BaseModel):
    kind: Literal["coin_flip_replace"]
    replacement_symbol: int
    heads_prob: float


class TypicalityGateAttackerModel(BaseModel):
    kind: Literal["typicality_gate"]
    eps_gate: float
    inner: List[List[float]]
    junk_symbol: int
    reference: Optional[List[float]] = None  # defaults to the source pmf


class BudgetGreedyAttackerModel(BaseModel):
    kind: Literal["budget_greedy"]
    budget_d: float


class AdditiveNoiseAttackerModel(BaseModel):
    kind: Literal["additive_uniform_noise"]
    width: float


AttackerModel = Union[IdentityAttackerModel, DmcAttackerModel,
                      CoinFlipAttackerModel, TypicalityGateAttackerModel,
                      BudgetGreedyAttackerModel, AdditiveNoiseAttackerModel]


class SweepModel(BaseModel):
    axis: Literal["rate", "n", "D", "eps"]
    values: List[float]


class ExperimentConfigModel(BaseModel):
    source: SourceModel = Field(discriminator="kind")
    distortion: DistortionModel = Field(discriminator="kind")
    codec: CodecModel
    attacker: AttackerModel = Field(discriminator="kind")
    trials: int = 100
    master_seed: int = 0
    # subcommand extras
    points: Optional[int] = None
    eps_values: Optional[List[float]] = None
    sweep: Optional[SweepModel] = None


def load_config(path) -> ExperimentConfigModel:
    """Parse a JSON config file, mapping all parse errors to ConfigError."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(doc)


def parse_config(doc: dict) -> ExperimentConfigModel:
    try:
        return ExperimentConfigModel.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def build_experiment(model: ExperimentConfigModel) -> ExperimentConfig:
    """Turn the validated document into core objects, revalidating invariants."""
    try:
        return _build(model)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def _build(model: ExperimentConfigModel) -> ExperimentConfig:
    src = model.source
    if src.kind == "iid":
        source = IidSource(pmf=Pmf(np.array(src.pmf)))
        source_pmf = source.pmf
    elif src.kind == "conditional":
        source = ConditionalSource(p_v=Pmf(np.array(src.p_v)),
                                   p_x_given_v=CondPmf(np.array(src.p_x_given_v)))
        source_pmf = source.p_x_given_v.joint_with(source.p_v).y_marginal()
    else:
        source = ContinuousUniformSource(lo=src.lo, hi=src.hi, delta=src.delta)
        source_pmf = None

    dist = model.distortion
    if dist.kind == "matrix":
        distortion = DistortionMatrix(np.array(dist.d))
    else:
        distortion = dist.kind

    seed = model.codec.seed
    if seed is None:
        seed = derive_seed(model.master_seed, 99)
    codec = CodecParams(n=model.codec.n, rate=model.codec.rate,
                        eps=model.codec.eps, target_d=model.codec.target_d,
                        seed=seed)

    attacker = _build_attacker(model.attacker, source, source_pmf)
    return ExperimentConfig(source=source, distortion=distortion, codec=codec,
                            attacker=attacker, trials=model.trials,
                            master_seed=model.master_seed)


def _build_attacker(model, source, source_pmf):
    if model.kind == "identity":
        return atk.Identity()
    if model.kind == "dmc":
        return atk.Dmc(channel=CondPmf(np.array(model.channel)))
    if model.kind == "coin_flip_replace":
        return atk.CoinFlipReplace(replacement_symbol=model.replacement_symbol,
                                   heads_prob=model.heads_prob)
    if model.kind == "typicality_gate":
        if model.reference is not None:
            ref = Pmf(np.array(model.reference))
        elif source_pmf is not None:
            ref = source_pmf
        else:
            raise ConfigError("typicality gate needs a reference pmf")
        return atk.TypicalityGate(eps_gate=model.eps_gate,
                                  inner=CondPmf(np.array(model.inner)),
                                  junk_symbol=model.junk_symbol,
                                  reference=ref)
    if model.kind == "budget_greedy":
        return atk.BudgetGreedy(budget_d=model.budget_d)
    if model.kind == "additive_uniform_noise":
        if not isinstance(source, ContinuousUniformSource):
            raise ConfigError("additive noise attacker needs a continuous source")
        return atk.AdditiveClippedUniform(width=model.width,
                                         lo=source.lo, hi=source.hi)
    raise ConfigError(f"unknown attacker kind {model.kind!r}")

"""JSON experiment configuration: schema, defaults, validation, hashing."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import laws
from .ensembles import LAWS, EnsembleSpec, entry_law
from .errors import ConfigError
from .experiments.harness import ExperimentConfig
from .perturb import PerturbationSpec

DEFAULTS = {"alpha": 0.2, "alpha_prime": 0.3, "track": 5, "trials": 500}

EntryName = Literal["gaussian_real", "gaussian_complex", "rademacher", "uniform_sym"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LimitModel(_Strict):
    name: Literal["semicircle", "marchenko_pastur", "uniform", "custom_table"]
    sigma: Optional[float] = None
    c: Optional[float] = None
    lo: Optional[float] = None
    hi: Optional[float] = None
    values: Optional[list[float]] = None


class EnsembleModel(_Strict):
    kind: Literal["wigner", "wishart", "iid_diagonal", "quantile_deterministic"]
    n: int = Field(ge=1)
    m: Optional[int] = None
    sigma: float = 1.0
    c_ratio: Optional[float] = None
    entry_law: EntryName = "gaussian_real"
    invariant: bool = False
    limit: Optional[LimitModel] = None


class PerturbationModel(_Strict):
    thetas: list[float]
    model: Literal["iid", "orthonormalised"] = "orthonormalised"
    entry_law: EntryName = "gaussian_real"


class ConfigModel(_Strict):
    ensemble: EnsembleModel
    perturbation: PerturbationModel
    master_seed: int = Field(ge=0, lt=2**64)
    n_values: Optional[list[int]] = None
    trials: int = DEFAULTS["trials"]
    alpha: float = DEFAULTS["alpha"]
    alpha_prime: float = DEFAULTS["alpha_prime"]
    track: int = DEFAULTS["track"]
    sampler: Literal["auto", "dense", "spectral"] = "auto"


def _pointer(loc) -> str:
    return "/" + "/".join(str(p) for p in loc)


def _semantic_checks(cfg: ConfigModel) -> None:
    ens, pert = cfg.ensemble, cfg.perturbation
    for i, t in enumerate(pert.thetas):
        if t == 0:
            raise ConfigError(f"/perturbation/thetas/{i}", "theta must be nonzero")
    if ens.sigma <= 0:
        raise ConfigError("/ensemble/sigma", "sigma must be positive")
    if ens.kind == "wishart":
        if ens.c_ratio is None and ens.m is None:
            raise ConfigError("/ensemble", "wishart needs m or c_ratio")
        if ens.c_ratio is not None and not 0 < ens.c_ratio < 1:
            raise ConfigError("/ensemble/c_ratio", "c_ratio must satisfy 0 < c < 1")
        if ens.c_ratio is None and not ens.n < ens.m:
            raise ConfigError("/ensemble/m", "wishart needs n < m")
    if ens.kind in ("iid_diagonal", "quantile_deterministic") and ens.limit is None:
        raise ConfigError("/ensemble/limit", f"{ens.kind} needs a limit law")
    if ens.invariant and not (ens.kind == "wigner" and ens.entry_law.startswith("gaussian")):
        raise ConfigError("/ensemble/invariant", "invariant applies to Gaussian Wigner ensembles only")
    if cfg.trials < 1:
        raise ConfigError("/trials", "trials must be >= 1")
    if not 0 < cfg.alpha < 1:
        raise ConfigError("/alpha", "alpha must lie in (0, 1)")
    if not cfg.alpha < cfg.alpha_prime < 1:
        raise ConfigError("/alpha_prime", "alpha_prime must lie in (alpha, 1)")
    if cfg.track < 1:
        raise ConfigError("/track", "track must be >= 1")
    for i, n in enumerate(cfg.n_values or []):
        if n < 1:
            raise ConfigError(f"/n_values/{i}", "dimensions must be >= 1")
        if n < len(pert.thetas):
            raise ConfigError(f"/n_values/{i}", "n must be at least the rank")


def _limit(model: LimitModel | None):
    if model is None:
        return None
    try:
        d = {k: v for k, v in model.model_dump().items() if v is not None}
        return laws.law_from_dict(d)
    except (KeyError, ValueError) as exc:
        raise ConfigError("/ensemble/limit", str(exc)) from None


def validate(raw: dict) -> ConfigModel:
    try:
        cfg = ConfigModel.model_validate(raw)
    except ValidationError as exc:
        err = exc.errors()[0]
        msg = "unknown key" if err["type"] == "extra_forbidden" else err["msg"]
        raise ConfigError(_pointer(err["loc"]), msg) from None
    _semantic_checks(cfg)
    return cfg


def normalized(cfg: ConfigModel) -> dict:
    d = cfg.model_dump()
    if d["n_values"] is None:
        d["n_values"] = [cfg.ensemble.n]
    return d


def config_hash(raw_or_model) -> str:
    """SHA-256 of the canonical JSON of the validated config, defaults filled."""
    cfg = raw_or_model if isinstance(raw_or_model, ConfigModel) else validate(raw_or_model)
    text = json.dumps(normalized(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def to_experiment(cfg: ConfigModel, seed: int | None = None) -> ExperimentConfig:
    ens = cfg.ensemble
    spec = EnsembleSpec(
        kind=ens.kind, n=ens.n, entry_law=entry_law(ens.entry_law), sigma=ens.sigma,
        m=ens.m, c_ratio=ens.c_ratio, limit=_limit(ens.limit), invariant=ens.invariant,
    )
    pert = PerturbationSpec(tuple(cfg.perturbation.thetas), cfg.perturbation.model,
                            LAWS[cfg.perturbation.entry_law])
    return ExperimentConfig(
        ensemble=spec, perturbation=pert, n_values=tuple(cfg.n_values or [ens.n]),
        trials=cfg.trials, master_seed=cfg.master_seed if seed is None else seed,
        alpha_prime=cfg.alpha_prime, h3a_alpha=cfg.alpha, track=cfg.track, sampler=cfg.sampler,
    )


def load_raw(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc}") from None
    try:
        raw: Any = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("", "config must be a JSON object")
    return raw


def parse_config(path, seed: int | None = None) -> ExperimentConfig:
    cfg = validate(load_raw(path))
    try:
        exp = to_experiment(cfg, seed)
        exp.resolved_sampler()
        return exp
    except ValueError as exc:
        raise ConfigError("", str(exc)) from None

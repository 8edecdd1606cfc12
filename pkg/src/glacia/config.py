"""JSON configuration files.

A configuration holds the dimensional constants, the feedback parameters,
optional overrides (snow-line height, thermal stiffness, ``nu``), and
optional integrator and sweep settings. Keys starting with ``_`` are
comments and ignored. Every validation failure is raised as
:class:`~glacia.exceptions.ConfigError` naming the violated invariant.
"""

import json
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

from .dynamics import IntegratorConfig
from .exceptions import ConfigError
from .full_model import FullParams
from .parametrization import (
    BetaConvention,
    DerivedScales,
    FeedbackParams,
    KappaProfile,
    ModelConstants,
    derive_scales,
)
from .reduced_model import ReducedParams, reduce_from_full

BUNDLED = {
    "table1": "table1.json",
    "paper-reduced": "paper-reduced.json",
}

_TOP_KEYS = {
    "constants",
    "feedback",
    "kappa",
    "beta_convention",
    "mu",
    "nu",
    "reduced",
    "integrator",
    "sweep",
}


@dataclass(frozen=True)
class GlaciaConfig:
    constants: ModelConstants = field(default_factory=ModelConstants)
    feedback: FeedbackParams = field(default_factory=FeedbackParams)
    kappa: KappaProfile | None = None
    beta_convention: BetaConvention = BetaConvention.CORRECTED
    mu: float | None = None
    nu: float | None = None
    reduced_override: ReducedParams | None = None
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    sweep: dict = field(default_factory=dict)
    source: str | None = None

    @property
    def scales(self) -> DerivedScales:
        return derive_scales(self.constants, self.kappa, self.beta_convention)

    @property
    def xi_sum(self) -> float:
        return self.feedback.xi_sum

    def full_params(self) -> FullParams:
        return FullParams.from_constants(
            self.constants, self.feedback, kappa=self.kappa, beta_convention=self.beta_convention, mu=self.mu
        )

    def reduced_params(self) -> ReducedParams:
        """Reduced system, either given explicitly or derived from the full model."""
        if self.reduced_override is not None:
            rp = self.reduced_override
            return rp if self.nu is None else rp.with_nu(self.nu)
        return reduce_from_full(self.full_params(), nu=self.nu)

    def with_nu(self, nu: float) -> "GlaciaConfig":
        from dataclasses import replace

        return replace(self, nu=float(nu))


def _build(cls, data, section: str):
    if not isinstance(data, dict):
        raise ConfigError(f"'{section}' is an object", f"got {type(data).__name__}")
    names = {f.name for f in fields(cls)}
    clean = {k: v for k, v in data.items() if not k.startswith("_")}
    unknown = sorted(set(clean) - names)
    if unknown:
        raise ConfigError(f"'{section}' keys are among {sorted(names)}", f"unknown: {unknown}")
    try:
        return cls(**clean)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"'{section}' values valid", str(exc)) from exc


def _positive(value, name):
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
        raise ConfigError(f"{name} > 0", f"got {value!r}")
    return float(value)


def config_from_dict(data: dict, source: str | None = None) -> GlaciaConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration root is a JSON object")
    clean = {k: v for k, v in data.items() if not k.startswith("_")}
    unknown = sorted(set(clean) - _TOP_KEYS)
    if unknown:
        raise ConfigError(f"top-level keys are among {sorted(_TOP_KEYS)}", f"unknown: {unknown}")
    constants = _build(ModelConstants, clean.get("constants", {}), "constants")
    feedback = _build(FeedbackParams, clean.get("feedback", {}), "feedback")
    kappa = None if clean.get("kappa") is None else _build(KappaProfile, clean["kappa"], "kappa")
    try:
        beta_convention = BetaConvention(clean.get("beta_convention", "corrected"))
    except ValueError as exc:
        raise ConfigError("beta_convention in {corrected, printed}", str(exc)) from exc
    reduced = None
    if clean.get("reduced") is not None:
        block = dict(clean["reduced"])
        block.setdefault("nu", clean.get("nu") or 1.0)
        reduced = _build(ReducedParams, block, "reduced")
    integrator = _build(IntegratorConfig, clean.get("integrator", {}), "integrator")
    sweep = clean.get("sweep", {})
    if not isinstance(sweep, dict):
        raise ConfigError("'sweep' is an object")
    cfg = GlaciaConfig(
        constants=constants,
        feedback=feedback,
        kappa=kappa,
        beta_convention=beta_convention,
        mu=_positive(clean.get("mu"), "mu"),
        nu=_positive(clean.get("nu"), "nu"),
        reduced_override=reduced,
        integrator=integrator,
        sweep={k: v for k, v in sweep.items() if not k.startswith("_")},
        source=source,
    )
    return cfg


def load_config(path) -> GlaciaConfig:
    """Load a configuration file, or a bundled one by name (``table1``, ``paper-reduced``)."""
    if path is None:
        path = "paper-reduced"
    key = str(path)
    if key in BUNDLED:
        text = resources.files("glacia").joinpath("data").joinpath(BUNDLED[key]).read_text(encoding="utf-8")
        source = f"bundled:{key}"
    else:
        p = Path(path)
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError("configuration file readable", f"{p}: {exc.strerror}") from exc
        source = str(p)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("configuration is valid JSON", f"{source}: {exc}") from exc
    return config_from_dict(data, source=source)


def calibrated_config() -> GlaciaConfig:
    return load_config("paper-reduced")

"""Run configuration: schema config/v1, defaults, overrides, hashing.

Paths in the file are resolved against the file's own directory.  The
config hash covers every semantically meaningful field; output and cache
locations are excluded so moving artifacts never changes provenance.
Credentials come only from the environment and are never part of the
file or the hash.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .clustering import FusionConfig
from .errors import SchemaViolation
from .jsonio import dumps_canonical, load_json, sha256_text
from .mapping import DEFAULT_ALPHA, DEFAULT_SIGMA
from .loop import DEFAULT_MAX_ITERATIONS, DEFAULT_THETA
from .semantic import ProviderConfig
from .sva import DEFAULT_EXCLUSIONS


@dataclass
class RunConfig:
    rtl_dir: str
    assertions_file: str
    spec_file: str
    out_dir: str
    cache_dir: str | None
    provider: ProviderConfig
    fusion: FusionConfig
    alpha: float = DEFAULT_ALPHA
    sigma: float = DEFAULT_SIGMA
    theta: float = DEFAULT_THETA
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    seed: int = 0
    exclusions: tuple[str, ...] = tuple(sorted(DEFAULT_EXCLUSIONS))
    declared: dict = dataclasses.field(default_factory=dict, repr=False)


def _expect(cond: bool, pointer: str, message: str) -> None:
    if not cond:
        raise SchemaViolation(pointer, message)


def _number(data: dict, key: str, default: float, lo: float, hi: float,
            lo_open: bool = False) -> float:
    value = data.get(key, default)
    _expect(isinstance(value, (int, float)) and not isinstance(value, bool),
            f"/{key}", f"{key} must be a number")
    value = float(value)
    if lo_open:
        _expect(lo < value <= hi, f"/{key}", f"{key} must be in ({lo}, {hi}]")
    else:
        _expect(lo <= value <= hi, f"/{key}", f"{key} must be in [{lo}, {hi}]")
    return value


def _provider_from(data: dict, cache_dir: str | None) -> ProviderConfig:
    raw = data.get("provider", {})
    _expect(isinstance(raw, dict), "/provider", "provider must be an object")
    kwargs = {
        "mode": raw.get("mode", "offline"),
        "endpoint": raw.get("endpoint", ""),
        "model_name": raw.get("model_name", "offline-hash"),
        "embed_dim": raw.get("embed_dim", 4096),
        "cache_path": cache_dir,
    }
    for key in ("max_attempts", "timeout"):
        if key in raw:
            kwargs[key] = raw[key]
    try:
        return ProviderConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise SchemaViolation("/provider", str(exc)) from None


def _fusion_from(data: dict) -> FusionConfig:
    raw = data.get("fusion", {})
    _expect(isinstance(raw, dict), "/fusion", "fusion must be an object")
    kwargs = {
        "tau": raw.get("tau", 15.0),
        "dbscan_eps": raw.get("dbscan_eps"),
        "dbscan_min_pts": raw.get("dbscan_min_pts", 2),
        "pca_dims": raw.get("pca_dims", 20),
        "evr_floor": raw.get("evr_floor", 0.97),
    }
    if raw.get("k_range") is not None:
        kr = raw["k_range"]
        _expect(isinstance(kr, list) and len(kr) == 2 and
                all(isinstance(x, int) and not isinstance(x, bool) for x in kr),
                "/fusion/k_range", "k_range must be [lo, hi] integers")
        kwargs["k_range"] = (kr[0], kr[1])
    try:
        return FusionConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise SchemaViolation("/fusion", str(exc)) from None


def _declared(data: dict, provider: ProviderConfig,
              fusion: FusionConfig, cfg: "RunConfig") -> dict:
    """Normalized config/v1 dict: defaults filled, paths as written."""
    return {
        "schema": "config/v1",
        "rtl_dir": data["rtl_dir"],
        "assertions_file": data["assertions_file"],
        "spec_file": data["spec_file"],
        "out_dir": data.get("out_dir", "out"),
        "cache_dir": data.get("cache_dir"),
        "provider": {
            "mode": provider.mode,
            "endpoint": provider.endpoint,
            "model_name": provider.model_name,
            "embed_dim": provider.embed_dim,
        },
        "fusion": {
            "tau": fusion.tau,
            "dbscan_eps": fusion.dbscan_eps,
            "dbscan_min_pts": fusion.dbscan_min_pts,
            "pca_dims": fusion.pca_dims,
            "evr_floor": fusion.evr_floor,
            "k_range": list(fusion.k_range) if fusion.k_range else None,
        },
        "alpha": cfg.alpha,
        "sigma": cfg.sigma,
        "theta": cfg.theta,
        "max_iterations": cfg.max_iterations,
        "seed": cfg.seed,
        "exclusions": list(cfg.exclusions),
    }


def parse_config(data: object, base_dir: str | Path = ".") -> RunConfig:
    _expect(isinstance(data, dict), "/", "config must be an object")
    assert isinstance(data, dict)
    schema = data.get("schema", "config/v1")
    _expect(schema == "config/v1", "/schema", f"unsupported schema {schema!r}")
    base = Path(base_dir)
    for key in ("rtl_dir", "assertions_file", "spec_file"):
        _expect(isinstance(data.get(key), str) and bool(data.get(key)),
                f"/{key}", f"{key} must be a non-empty path string")

    def resolve(p: str) -> str:
        path = Path(p)
        return str(path if path.is_absolute() else base / path)

    cache_raw = data.get("cache_dir")
    _expect(cache_raw is None or (isinstance(cache_raw, str) and cache_raw),
            "/cache_dir", "cache_dir must be a non-empty string or null")
    cache_dir = resolve(cache_raw) if cache_raw else None
    provider = _provider_from(data, cache_dir)
    fusion = _fusion_from(data)

    max_iterations = data.get("max_iterations", DEFAULT_MAX_ITERATIONS)
    _expect(isinstance(max_iterations, int) and not isinstance(max_iterations, bool)
            and max_iterations >= 0,
            "/max_iterations", "max_iterations must be a non-negative integer")
    seed = data.get("seed", 0)
    _expect(isinstance(seed, int) and not isinstance(seed, bool),
            "/seed", "seed must be an integer")
    exclusions = data.get("exclusions", sorted(DEFAULT_EXCLUSIONS))
    _expect(isinstance(exclusions, list) and
            all(isinstance(s, str) and s for s in exclusions),
            "/exclusions", "exclusions must be an array of names")

    cfg = RunConfig(
        rtl_dir=resolve(data["rtl_dir"]),
        assertions_file=resolve(data["assertions_file"]),
        spec_file=resolve(data["spec_file"]),
        out_dir=resolve(data.get("out_dir", "out")),
        cache_dir=cache_dir,
        provider=provider,
        fusion=fusion,
        alpha=_number(data, "alpha", DEFAULT_ALPHA, 0.0, 1.0),
        sigma=_number(data, "sigma", DEFAULT_SIGMA, 0.0, 1.0),
        theta=_number(data, "theta", DEFAULT_THETA, 0.0, 1.0, lo_open=True),
        max_iterations=max_iterations,
        seed=seed,
        exclusions=tuple(sorted(set(exclusions))),
    )
    cfg.declared = _declared(data, provider, fusion, cfg)
    return cfg


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    data = load_json(path)
    return parse_config(data, base_dir=path.parent)


def apply_overrides(cfg: RunConfig, *, offline: bool = False,
                    theta: float | None = None, tau: float | None = None,
                    alpha: float | None = None, sigma: float | None = None,
                    max_iter: int | None = None,
                    out: str | None = None) -> RunConfig:
    """Flag values win over file values; returns an updated copy."""
    provider = cfg.provider
    fusion = cfg.fusion
    if offline and provider.mode != "offline":
        provider = dataclasses.replace(provider, mode="offline", endpoint="")
    if tau is not None:
        fusion = dataclasses.replace(fusion, tau=float(tau))
    new = dataclasses.replace(
        cfg,
        provider=provider,
        fusion=fusion,
        theta=float(theta) if theta is not None else cfg.theta,
        alpha=float(alpha) if alpha is not None else cfg.alpha,
        sigma=float(sigma) if sigma is not None else cfg.sigma,
        max_iterations=int(max_iter) if max_iter is not None else cfg.max_iterations,
        out_dir=str(Path(out)) if out is not None else cfg.out_dir,
    )
    declared = dict(cfg.declared)
    declared["provider"] = dict(declared.get("provider", {}))
    declared["fusion"] = dict(declared.get("fusion", {}))
    declared["provider"]["mode"] = provider.mode
    declared["provider"]["endpoint"] = provider.endpoint
    declared["fusion"]["tau"] = fusion.tau
    declared["theta"] = new.theta
    declared["alpha"] = new.alpha
    declared["sigma"] = new.sigma
    declared["max_iterations"] = new.max_iterations
    if out is not None:
        declared["out_dir"] = out
    new.declared = declared
    return new


def config_hash(cfg: RunConfig) -> str:
    meaningful = {k: v for k, v in cfg.declared.items()
                  if k not in ("out_dir", "cache_dir")}
    return sha256_text(dumps_canonical(meaningful))


def to_dict(cfg: RunConfig) -> dict:
    return dict(cfg.declared)

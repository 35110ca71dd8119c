"""Flat key-value form of ``ReconConfig``.

Keys (all optional, defaults from ``ReconConfig()``)::

    lambda_u, lambda_p, sigma             energy weights and pairwise scale
    gamma, sigma_s, sigma_d               clique indicator
    mode                                  stochastic | threshold
    radius                                auto | integer (0 = all pairs)
    seed                                  clique RNG seed
    step_size, max_iters                  gradient descent
    tol_rel_energy, tol_grad_norm         stopping tolerances
    resample_every                        integer | never
    record_trace                          true | false
"""

from dataclasses import replace

from .energy import EnergyParams
from .errors import ParameterError
from .graph import CliqueSamplingConfig
from .io import read_kv, write_kv
from .optimizer import ReconConfig

_FLOATS = {"lambda_u", "lambda_p", "sigma", "gamma", "sigma_s", "sigma_d",
           "step_size", "tol_rel_energy", "tol_grad_norm"}
_INTS = {"seed", "max_iters"}
KEYS = tuple(sorted(_FLOATS | _INTS | {"mode", "radius", "resample_every", "record_trace"}))


def to_dict(cfg):
    e, c = cfg.energy, cfg.cliques
    return {
        "lambda_u": repr(e.lambda_u),
        "lambda_p": repr(e.lambda_p),
        "sigma": repr(e.sigma),
        "gamma": repr(c.gamma),
        "sigma_s": repr(c.sigma_s),
        "sigma_d": repr(c.sigma_d),
        "mode": c.mode,
        "radius": "auto" if c.radius is None else str(c.radius),
        "seed": str(c.seed),
        "step_size": repr(cfg.step_size),
        "max_iters": str(cfg.max_iters),
        "tol_rel_energy": repr(cfg.tol_rel_energy),
        "tol_grad_norm": repr(cfg.tol_grad_norm),
        "resample_every": "never" if cfg.resample_every is None else str(cfg.resample_every),
        "record_trace": "true" if cfg.record_trace else "false",
    }


def _parse(key, raw):
    raw = str(raw).strip()
    try:
        if key in _FLOATS:
            return float(raw)
        if key in _INTS:
            return int(raw)
        if key == "mode":
            return raw
        if key == "radius":
            return None if raw.lower() == "auto" else int(raw)
        if key == "resample_every":
            return None if raw.lower() in ("never", "inf", "none") else int(raw)
        if key == "record_trace":
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
    except ValueError as exc:
        raise ParameterError(f"bad value for {key}: {raw!r}") from exc
    raise ParameterError(f"unknown config key {key!r}")


def from_dict(d, base=None):
    """Build a ``ReconConfig`` from string values, starting at `base`."""
    base = base or ReconConfig()
    v = {k: _parse(k, raw) for k, raw in d.items()}
    energy = {k: v[k] for k in ("lambda_u", "lambda_p", "sigma") if k in v}
    cliques = {k: v[k] for k in ("gamma", "sigma_s", "sigma_d", "mode", "radius", "seed") if k in v}
    top = {k: v[k] for k in ("step_size", "max_iters", "tol_rel_energy", "tol_grad_norm",
                             "resample_every", "record_trace") if k in v}
    return replace(
        base,
        energy=replace(base.energy, **energy) if energy else base.energy,
        cliques=replace(base.cliques, **cliques) if cliques else base.cliques,
        **top,
    )


def load(path, overrides=None):
    """Read a config file; `overrides` (a dict of strings) wins over it."""
    d = read_kv(path) if path else {}
    d.update(overrides or {})
    return from_dict(d)


def save(path, cfg):
    write_kv(path, to_dict(cfg))


__all__ = ["KEYS", "to_dict", "from_dict", "load", "save", "EnergyParams", "CliqueSamplingConfig"]

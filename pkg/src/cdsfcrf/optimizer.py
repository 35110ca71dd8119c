"""Gradient-descent reconstruction loop and a grid search over its weights."""

from dataclasses import dataclass, field, replace
import itertools
import logging
import math

import numpy as np

from .energy import EnergyBreakdown, EnergyParams, total_energy, total_gradient
from .errors import DimensionError, DivergenceError, ParameterError
from .graph import CliqueSampler, CliqueSamplingConfig, CliqueSet
from .metrics import psnr
from .transform import as_image, as_kspace, as_mask, zero_filled_recon

log = logging.getLogger(__name__)

STOP_REASONS = ("max_iters", "energy_tol", "grad_tol")
ENERGY_WINDOW = 3
# Energy growth over one window that counts as divergence rather than a stop.
DIVERGENCE_GROWTH = 2.0


@dataclass(frozen=True)
class ReconConfig:
    """Optimizer settings.

    Stopping rule, checked once per iteration before the update: the gradient
    norm falls below ``tol_grad_norm``, or the total energy dropped by less
    than ``tol_rel_energy`` (relative) over the last ``ENERGY_WINDOW``
    iterations, or ``max_iters`` updates have been taken. The energy drop is
    measured with the current clique set at both ends of the window.
    ``resample_every=None`` draws cliques once and keeps them.
    """

    energy: EnergyParams = field(default_factory=EnergyParams)
    cliques: CliqueSamplingConfig = field(default_factory=CliqueSamplingConfig)
    step_size: float = 0.1
    max_iters: int = 500
    tol_rel_energy: float = 1e-6
    tol_grad_norm: float = 1e-8
    resample_every: int | None = 1
    record_trace: bool = True

    def __post_init__(self):
        if not self.step_size > 0:
            raise ParameterError(f"step_size must be > 0, got {self.step_size}")
        if self.max_iters < 0:
            raise ParameterError(f"max_iters must be >= 0, got {self.max_iters}")
        if self.tol_rel_energy < 0 or self.tol_grad_norm < 0:
            raise ParameterError("tolerances must be >= 0")
        if self.resample_every is not None and self.resample_every < 1:
            raise ParameterError(f"resample_every must be >= 1, got {self.resample_every}")


@dataclass
class TraceEntry:
    iteration: int
    energy: EnergyBreakdown
    grad_norm: float


@dataclass
class ReconResult:
    image: np.ndarray
    iterations_run: int
    stop_reason: str
    trace: list = field(default_factory=list)


def reconstruct(X_masked, m, cfg, callback=None):
    """Reconstruct an image from masked k-space.

    The zero-filled image initialises the estimate and, frozen, supplies the
    observation terms of the pairwise energy and the clique affinities.
    Each iteration ``t`` redraws the cliques when ``t % resample_every == 0``,
    evaluates energy and gradient at the current estimate, checks the stopping
    rule, then steps ``Y <- Y - step_size * grad``.

    Parameters
    ----------
    X_masked : array_like
        Acquired k-space, zeros outside the mask.
    m : array_like of bool
        Sampling mask.
    cfg : ReconConfig
    callback : callable, optional
        Called as ``callback(t, Y, cliques, breakdown)`` with the iterate the
        energy was evaluated at, before any update.

    Raises
    ------
    DivergenceError
        If the energy or gradient becomes non-finite, or the energy grows by
        more than ``DIVERGENCE_GROWTH`` over one window.
    """
    X = as_kspace(X_masked)
    m = as_mask(m)
    if m.shape != X.shape:
        raise DimensionError(f"mask shape {m.shape} does not match k-space {X.shape}")
    X = np.where(m, X, 0j)

    Y = zero_filled_recon(X)
    obs = Y.copy()
    obs.setflags(write=False)
    if cfg.max_iters == 0:
        return ReconResult(Y, 0, "max_iters", [])

    params = cfg.energy
    sampler = CliqueSampler(obs, cfg.cliques) if params.lambda_p else None
    cliques = _empty_cliques(Y.shape)
    recent = []  # last ENERGY_WINDOW + 1 iterates
    trace = []
    reason = "max_iters"
    t = 0
    for t in range(cfg.max_iters):
        if sampler is not None and (
            t == 0 or (cfg.resample_every is not None and t % cfg.resample_every == 0)
        ):
            cliques = sampler.sample(t)

        with np.errstate(over="ignore", invalid="ignore"):
            e = total_energy(Y, X, m, obs, cliques, params)
            g = total_gradient(Y, X, m, obs, cliques, params)
        gnorm = float(np.linalg.norm(g))
        if not (math.isfinite(e.total) and math.isfinite(gnorm)):
            raise DivergenceError(t)
        if cfg.record_trace:
            trace.append(TraceEntry(t, e, gnorm))
        if callback is not None:
            callback(t, Y, cliques, e)
        recent.append(Y)

        if gnorm < cfg.tol_grad_norm:
            reason = "grad_tol"
            break
        if len(recent) > ENERGY_WINDOW:
            # Both energies use the current cliques so redraws do not show up
            # as spurious increases.
            before = total_energy(recent.pop(0), X, m, obs, cliques, params).total
            if e.total > DIVERGENCE_GROWTH * before and e.total > 1e-12:
                raise DivergenceError(
                    t, f"energy grew from {before:.6g} to {e.total:.6g} by iteration {t}"
                )
            drop = (before - e.total) / max(abs(before), 1e-300)
            if drop < cfg.tol_rel_energy:
                reason = "energy_tol"
                break
        with np.errstate(over="ignore", invalid="ignore"):
            Y = Y - cfg.step_size * g
        if not np.all(np.isfinite(Y)):
            raise DivergenceError(t + 1)
    else:
        t = cfg.max_iters - 1

    log.debug("reconstruct stopped after %d iterations (%s)", t + 1, reason)
    return ReconResult(Y, t + 1, reason, trace)


def _empty_cliques(shape):
    empty = np.empty(0, dtype=np.int64)
    return CliqueSet(empty, empty.copy(), shape[1], shape[0], {})


# Grid search ---------------------------------------------------------------

GRID_KEYS = {
    "lambda_u": ("energy", "lambda_u"),
    "lambda_p": ("energy", "lambda_p"),
    "sigma": ("energy", "sigma"),
    "gamma": ("cliques", "gamma"),
    "sigma_s": ("cliques", "sigma_s"),
    "sigma_d": ("cliques", "sigma_d"),
    "step_size": (None, "step_size"),
    "max_iters": (None, "max_iters"),
}


def with_overrides(cfg, **overrides):
    """Copy of `cfg` with flat-named fields replaced (see ``GRID_KEYS``)."""
    energy, cliques, top = {}, {}, {}
    for key, value in overrides.items():
        if key not in GRID_KEYS:
            raise ParameterError(f"unknown grid parameter {key!r}")
        group, name = GRID_KEYS[key]
        {"energy": energy, "cliques": cliques, None: top}[group][name] = value
    return replace(
        cfg,
        energy=replace(cfg.energy, **energy),
        cliques=replace(cfg.cliques, **cliques),
        **top,
    )


def grid_tune(X_masked, m, truth, grid, base=None):
    """Exhaustive PSNR-scored search over a Cartesian parameter grid.

    Parameters
    ----------
    grid : dict
        Maps flat parameter names (``lambda_p``, ``step_size``, ...) to lists
        of candidate values. Cells are enumerated with ``itertools.product`` in
        declaration order.
    base : ReconConfig, optional
        Values for every parameter not in `grid`.

    Returns
    -------
    best : ReconConfig
        Highest PSNR; ties go to lower lambda_p, then lower step size, then the
        earlier cell.
    table : list of dict
        One row per cell with the parameter values and ``psnr``.
    """
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ParameterError("grid must contain at least one value per parameter")
    truth = as_image(truth)
    base = base or ReconConfig()
    keys = list(grid)
    table = []
    best, best_key = None, None
    for order, values in enumerate(itertools.product(*(grid[k] for k in keys))):
        cell = dict(zip(keys, values))
        cfg = with_overrides(base, **cell)
        result = reconstruct(X_masked, m, replace(cfg, record_trace=False))
        score = psnr(truth, result.image)
        table.append({**cell, "psnr": score})
        rank = (-score, cfg.energy.lambda_p, cfg.step_size, order)
        if best_key is None or rank < best_key:
            best, best_key = cfg, rank
    return best, table

"""Cross-domain CRF energy and its gradient with respect to the image.

The energy of an image estimate ``Y`` is::

    E(Y) = lambda_u * U(Y) + lambda_p * P(Y)

    U(Y) = sum over kept bins w of |F(Y)_w - X_w|^2
    P(Y) = sum over active cliques (i, j) of 1 - f(y_i, y_j, x_i, x_j)
    f    = exp(-(y_i - y_j)^2 * (x_i - x_j)^2 / (3 * sigma^2))

``F`` is the unitary DC-centred DFT, ``X`` the acquired k-space and ``x``
the zero-filled observation image. ``f`` equals one when the pair agrees, so
``1 - f`` is the penalty being minimised.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError
from .transform import as_image, as_kspace, as_mask, dft2_forward

# Fixed reduction block so sums over cliques are bit-reproducible for a
# given clique order, whatever the array length.
_BLOCK = 1 << 16


@dataclass(frozen=True)
class EnergyParams:
    lambda_u: float = 1.0
    lambda_p: float = 2e-4
    sigma: float = 2e-3

    def __post_init__(self):
        if self.lambda_u < 0 or self.lambda_p < 0:
            raise ParameterError("energy weights must be >= 0")
        if not self.lambda_u + self.lambda_p > 0:
            raise ParameterError("at least one energy weight must be positive")
        if not self.sigma > 0:
            raise ParameterError(f"sigma must be > 0, got {self.sigma}")


@dataclass(frozen=True)
class EnergyBreakdown:
    unary: float
    pairwise: float
    total: float


def _check_pair(Y, X, m):
    Y = as_image(Y)
    X = as_kspace(X)
    if Y.shape != X.shape:
        raise DimensionError(f"image shape {Y.shape} does not match k-space {X.shape}")
    m = as_mask(m, X.shape)
    return Y, X, m


def _masked_residual(Y, X, m):
    return np.where(m, dft2_forward(Y) - X, 0j)


def unary_energy(Y, X, m):
    """Squared k-space misfit summed over the kept bins."""
    Y, X, m = _check_pair(Y, X, m)
    r = _masked_residual(Y, X, m)
    return float(np.sum(r.real**2 + r.imag**2))


def unary_gradient(Y, X, m):
    """Gradient of `unary_energy`: ``2 Re F^-1(mask * (F Y - X))``."""
    Y, X, m = _check_pair(Y, X, m)
    r = _masked_residual(Y, X, m)
    return 2.0 * np.fft.ifft2(np.fft.ifftshift(r), norm="ortho").real


def _check_cliques(Y, obs, cliques):
    Y = as_image(Y)
    obs = as_image(obs)
    if Y.shape != obs.shape:
        raise DimensionError(f"image shape {Y.shape} does not match observation {obs.shape}")
    if cliques.shape != Y.shape:
        raise DimensionError(f"clique set built for {cliques.shape}, image is {Y.shape}")
    return Y, obs


def _pair_terms(Y, obs, cliques, sigma):
    y, x = Y.ravel(), obs.ravel()
    dy = y[cliques.first] - y[cliques.second]
    dx2 = (x[cliques.first] - x[cliques.second]) ** 2
    f = np.exp(-(dy * dy) * dx2 / (3.0 * sigma**2))
    return dy, dx2, f


def _blocked_sum(values):
    if values.size <= _BLOCK:
        return float(np.sum(values))
    partial = np.add.reduceat(values, np.arange(0, values.size, _BLOCK))
    return float(np.sum(partial))


def pairwise_energy(Y, obs_spatial, cliques, sigma):
    """Sum of ``1 - f`` over the active cliques; lies in ``[0, len(cliques)]``."""
    if not sigma > 0:
        raise ParameterError(f"sigma must be > 0, got {sigma}")
    Y, obs = _check_cliques(Y, obs_spatial, cliques)
    if len(cliques) == 0:
        return 0.0
    y, x = Y.ravel(), obs.ravel()
    dy = y[cliques.first] - y[cliques.second]
    dx = x[cliques.first] - x[cliques.second]
    # -expm1 keeps precision when f is close to one.
    return _blocked_sum(-np.expm1(-(dy * dy) * (dx * dx) / (3.0 * sigma**2)))


def pairwise_gradient(Y, obs_spatial, cliques, sigma):
    """Gradient of `pairwise_energy` with respect to every pixel."""
    if not sigma > 0:
        raise ParameterError(f"sigma must be > 0, got {sigma}")
    Y, obs = _check_cliques(Y, obs_spatial, cliques)
    n = Y.size
    if len(cliques) == 0:
        return np.zeros_like(Y)
    dy, dx2, f = _pair_terms(Y, obs, cliques, sigma)
    g = f * 2.0 * dy * dx2 / (3.0 * sigma**2)
    # d/dy_i is +g, d/dy_j is -g for each pair.
    grad = np.bincount(cliques.first, weights=g, minlength=n)
    grad -= np.bincount(cliques.second, weights=g, minlength=n)
    return grad.reshape(Y.shape)


def total_energy(Y, X, m, obs_spatial, cliques, params):
    """Weighted energy with its unary and pairwise parts."""
    u = unary_energy(Y, X, m)
    p = pairwise_energy(Y, obs_spatial, cliques, params.sigma)
    return EnergyBreakdown(u, p, params.lambda_u * u + params.lambda_p * p)


def total_gradient(Y, X, m, obs_spatial, cliques, params):
    """``lambda_u * unary_gradient + lambda_p * pairwise_gradient``."""
    g = params.lambda_u * unary_gradient(Y, X, m)
    if params.lambda_p:
        g = g + params.lambda_p * pairwise_gradient(Y, obs_spatial, cliques, params.sigma)
    return g

"""Scenario presets and initial-data generators.

Generators draw a band-limited Fourier field from a seed, so the same
(seed, amplitude) describes one continuum field that can be sampled on any
grid size: refinement studies refine the grid, not the data.
"""

import numpy as np

from . import exterior, flow, geometry
from .errors import ConfigError, GeometryError

GENERATORS = ("flat-stationary", "perturbed-stationary", "random-smooth", "from-snapshot")
MIN_SPINOR_MAGNITUDE = 0.1
_MAX_MODE = 2
_MODES_PER_FIELD = 3


class SmoothFieldSampler:
    """Band-limited random trigonometric fields, reproducible by seed and
    independent of the sampling grid."""

    def __init__(self, n, seed):
        self.n = n
        self.rng = np.random.default_rng(seed)

    def scalar(self, coords, lengths):
        xs = [2.0 * np.pi * c / L for c, L in zip(coords, lengths)]
        out = np.zeros_like(xs[0])
        for _ in range(_MODES_PER_FIELD):
            kvec = self.rng.integers(-_MAX_MODE, _MAX_MODE + 1, size=self.n)
            amp = self.rng.standard_normal()
            phase = self.rng.uniform(0.0, 2.0 * np.pi)
            arg = sum(int(kj) * xj for kj, xj in zip(kvec, xs))
            out = out + amp * np.cos(arg + phase)
        return out / np.sqrt(_MODES_PER_FIELD)

    def complex_scalar(self, coords, lengths):
        re = self.scalar(coords, lengths)
        im = self.scalar(coords, lengths)
        return re + 1j * im


def _flat_metric(grid):
    g = grid.zeros((grid.n, grid.n))
    for i in range(grid.n):
        g[..., i, i] = 1.0
    return g


def _constant_spinor(grid, dim_s):
    psi = grid.zeros((dim_s,), dtype=complex)
    psi[..., 0] = 1.0
    return psi


def flat_stationary(grid, k, dim_s):
    """Flat torus, constant unit spinor, H = 0, phi = 0: the exact discrete
    stationary point of every flow variant."""
    g = _flat_metric(grid)
    E = _flat_metric(grid)
    psi = _constant_spinor(grid, dim_s)
    H = grid.zeros((exterior.num_components(grid.n, k),))
    phi = grid.zeros(())
    return flow.FlowState(grid, k, g, E, psi, H, phi)


def perturbed_stationary(grid, k, dim_s, seed=0, amplitude=0.02):
    """Flat-stationary data plus band-limited perturbations of every field;
    phi is set to log|psi| so the normalization holds exactly at t = 0."""
    return _smooth_state(grid, k, dim_s, seed, amplitude, base_is_flat=True)


def random_smooth(grid, k, dim_s, seed=0, amplitude=0.05):
    """Smooth random data around the flat stationary point with somewhat
    larger default amplitude."""
    return _smooth_state(grid, k, dim_s, seed, amplitude, base_is_flat=True)


def _smooth_state(grid, k, dim_s, seed, amplitude, base_is_flat=True):
    n = grid.n
    sampler = SmoothFieldSampler(n, seed)
    coords = grid.coordinates()
    lengths = grid.lengths

    g = _flat_metric(grid)
    for i in range(n):
        for j in range(i, n):
            bump = amplitude * sampler.scalar(coords, lengths)
            g[..., i, j] += bump
            if i != j:
                g[..., j, i] += bump
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise GeometryError(
            f"perturbation amplitude {amplitude} destroyed positivity"
        ) from exc

    psi = _constant_spinor(grid, dim_s)
    for s in range(dim_s):
        psi[..., s] = psi[..., s] + amplitude * sampler.complex_scalar(coords, lengths)
    mag = np.sqrt(np.einsum("...s,...s->...", np.conj(psi), psi).real)
    if np.min(mag) < MIN_SPINOR_MAGNITUDE:
        raise ConfigError(
            f"initial spinor magnitude dipped below {MIN_SPINOR_MAGNITUDE}; "
            "reduce the amplitude"
        )

    H = grid.zeros((exterior.num_components(n, k),))
    for comp in range(H.shape[-1]):
        H[..., comp] = amplitude * sampler.scalar(coords, lengths)

    phi = np.log(mag)
    E = geometry.frame_from_metric(g)
    return flow.FlowState(grid, k, g, E, psi, H, phi)


def make_state(grid, k, dim_s, generator, seed=0, amplitude=0.02, snapshot_path=None):
    if generator == "flat-stationary":
        return flat_stationary(grid, k, dim_s)
    if generator == "perturbed-stationary":
        return perturbed_stationary(grid, k, dim_s, seed, amplitude)
    if generator == "random-smooth":
        return random_smooth(grid, k, dim_s, seed, amplitude)
    if generator == "from-snapshot":
        from . import snapshot

        if snapshot_path is None:
            raise ConfigError("from-snapshot generator needs snapshot_in")
        return snapshot.read_state(snapshot_path)
    raise ConfigError(f"unknown generator {generator!r}; choose from {GENERATORS}")

"""Periodic structured grid and finite-difference calculus.

All fields are plain numpy arrays whose leading ``n`` axes are the grid axes
(sizes[0], ..., sizes[n-1], row-major) and whose trailing axes hold the
per-node value (scalar: none; spinor: (dim_s,) complex; n-vector: (n,);
matrix: (n, n); k-form: (C(n,k),)).

Derivatives are central differences with periodic wraparound.  On a periodic
grid these stencils are exactly skew-adjoint under the unweighted node sum,
which is what makes every discrete integration-by-parts identity downstream
hold to machine precision.
"""

import numpy as np

from .errors import DimensionError, ShapeError


class Grid:
    """Flat periodic torus discretized by a uniform structured grid.

    Parameters
    ----------
    sizes : sequence of int
        Nodes per axis; each must be >= 5 (stencil support).
    lengths : sequence of float, optional
        Period per axis, default 2*pi on every axis.
    order : int
        Central-difference order, 2 (default) or 4.
    """

    def __init__(self, sizes, lengths=None, order=2):
        self.sizes = tuple(int(s) for s in sizes)
        self.n = len(self.sizes)
        if self.n < 1:
            raise DimensionError("grid needs at least one axis")
        if any(s < 5 for s in self.sizes):
            raise DimensionError(f"every axis needs >= 5 nodes, got {self.sizes}")
        if lengths is None:
            lengths = (2.0 * np.pi,) * self.n
        self.lengths = tuple(float(L) for L in lengths)
        if len(self.lengths) != self.n:
            raise ShapeError("lengths and sizes disagree in dimension")
        if any(L <= 0 for L in self.lengths):
            raise ShapeError("all periods must be positive")
        if order not in (2, 4):
            raise ShapeError(f"stencil order must be 2 or 4, got {order}")
        self.order = order
        self.spacing = tuple(L / s for L, s in zip(self.lengths, self.sizes))
        self.num_nodes = int(np.prod(self.sizes))
        self.cell_volume = float(np.prod(self.spacing))

    def coordinates(self):
        """Node coordinates, one array of shape ``sizes`` per axis."""
        axes = [np.arange(s) * h for s, h in zip(self.sizes, self.spacing)]
        return np.meshgrid(*axes, indexing="ij")

    def zeros(self, value_shape=(), dtype=float):
        return np.zeros(self.sizes + tuple(value_shape), dtype=dtype)

    def partial(self, f, axis):
        """Central difference along grid ``axis`` (0-based), componentwise."""
        if not 0 <= axis < self.n:
            raise IndexError(f"axis {axis} out of range for n={self.n}")
        h = self.spacing[axis]
        if self.order == 2:
            return (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis)) / (2.0 * h)
        return (
            -np.roll(f, -2, axis=axis)
            + 8.0 * np.roll(f, -1, axis=axis)
            - 8.0 * np.roll(f, 1, axis=axis)
            + np.roll(f, 2, axis=axis)
        ) / (12.0 * h)

    def partial_transpose(self, f, axis):
        """Transpose of :meth:`partial` under the unweighted node sum.

        Central stencils on periodic grids are skew, so this is -partial.
        """
        return -self.partial(f, axis)

    def gradient(self, f):
        """Stack of all partials; the derivative axis is inserted after the
        grid axes, i.e. result[..., j] + value axes = partial(f, j)."""
        parts = [self.partial(f, j) for j in range(self.n)]
        return np.stack(parts, axis=self.n)

    def integrate(self, f, density=None):
        """Discrete integral  sum_nodes f * density * prod(h)."""
        f = np.asarray(f)
        if f.shape[: self.n] != self.sizes:
            raise ShapeError("field does not live on this grid")
        if density is not None:
            density = np.asarray(density)
            if density.shape != self.sizes:
                raise ShapeError("density must be a scalar field on this grid")
            f = f * density
        return f.sum() * self.cell_volume

    def sbp_check(self, a, b, axis):
        """Residual sum((d_axis a) b) + sum(a (d_axis b)) with unit density.

        Contract: exactly zero (up to rounding) for periodic central stencils.
        """
        return self.integrate(self.partial(a, axis) * b) + self.integrate(
            a * self.partial(b, axis)
        )

    def divergence(self, v, weight=None):
        """(1/weight) * sum_j d_j(weight * v[..., j]) for coordinate vectors.

        ``weight`` is the density sqrt(g); omitted means flat.  This is the
        form whose node sum against the weight vanishes identically, which is
        what trace/volume identities rely on.
        """
        if v.shape[: self.n] != self.sizes or v.shape[self.n] != self.n:
            raise ShapeError("expected a coordinate vector field")
        if weight is None:
            acc = self.partial(v[..., 0], 0)
            for j in range(1, self.n):
                acc = acc + self.partial(v[..., j], j)
            return acc
        acc = self.partial(weight * v[..., 0], 0)
        for j in range(1, self.n):
            acc = acc + self.partial(weight * v[..., j], j)
        return acc / weight

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and self.sizes == other.sizes
            and self.lengths == other.lengths
            and self.order == other.order
        )

    def __hash__(self):
        return hash((self.sizes, self.lengths, self.order))

    def __repr__(self):
        return f"Grid(sizes={self.sizes}, lengths={self.lengths}, order={self.order})"

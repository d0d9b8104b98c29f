"""Discrete exterior calculus for k-forms under an evolving metric.

Forms are stored by their coordinate components in canonical increasing
multi-index order (itertools.combinations order); the fully antisymmetric
extension is implied.  The exterior derivative is the componentwise central
difference operator; the codifferential is its *exact* transpose against the
metric-weighted discrete inner product, so (d, d+) adjointness and every
integration-by-parts identity built on it hold to machine precision.
"""

import itertools
from functools import lru_cache

import numpy as np

from .errors import GeometryError, ShapeError


@lru_cache(maxsize=None)
def basis_indices(n, k):
    """Canonical increasing multi-indices for degree-k forms (0-based)."""
    return tuple(itertools.combinations(range(n), k))


@lru_cache(maxsize=None)
def index_of(n, k):
    return {I: pos for pos, I in enumerate(basis_indices(n, k))}


def num_components(n, k):
    return len(basis_indices(n, k))


def _merge_sign(I, J):
    """Sign of sorting the concatenation I+J; 0 if they intersect."""
    merged = I + J
    if len(set(merged)) != len(merged):
        return 0
    sign = 1
    for i in range(len(merged)):
        for j in range(i + 1, len(merged)):
            if merged[i] > merged[j]:
                sign = -sign
    return sign


@lru_cache(maxsize=None)
def _wedge_table(n, p, q):
    """Triples (pos_a, pos_b, pos_out, sign) for the wedge product."""
    out_index = index_of(n, p + q)
    table = []
    for ia, I in enumerate(basis_indices(n, p)):
        for ib, J in enumerate(basis_indices(n, q)):
            sign = _merge_sign(I, J)
            if sign != 0:
                K = tuple(sorted(I + J))
                table.append((ia, ib, out_index[K], sign))
    return tuple(table)


def wedge(alpha, beta, n, p, q):
    """Pointwise alternating product of a p-form and a q-form."""
    if p + q > n:
        raise ShapeError(f"wedge degree {p}+{q} exceeds dimension {n}")
    alpha = np.asarray(alpha)
    beta = np.asarray(beta)
    out_shape = np.broadcast_shapes(alpha.shape[:-1], beta.shape[:-1]) + (
        num_components(n, p + q),
    )
    out = np.zeros(out_shape, dtype=np.result_type(alpha, beta))
    for ia, ib, io, sign in _wedge_table(n, p, q):
        out[..., io] += sign * alpha[..., ia] * beta[..., ib]
    return out


def to_full(comps, n, k):
    """Expand canonical components into the full antisymmetric array with
    trailing axes (n,)*k."""
    comps = np.asarray(comps)
    lead = comps.shape[:-1]
    full = np.zeros(lead + (n,) * k, dtype=comps.dtype)
    for pos, I in enumerate(basis_indices(n, k)):
        for perm in itertools.permutations(I):
            full[(Ellipsis,) + perm] = _merge_sign(perm, ()) * comps[..., pos]
    return full


def from_full(full, n, k):
    """Read canonical components off a full antisymmetric array."""
    full = np.asarray(full)
    combos = basis_indices(n, k)
    out = np.empty(full.shape[: full.ndim - k] + (len(combos),), dtype=full.dtype)
    for pos, I in enumerate(combos):
        out[..., pos] = full[(Ellipsis,) + I]
    return out


def _gram(ginv, n, p):
    """Gram matrix of <dx^I, dx^K>_g = det(g^{i_a k_b}) on canonical p-forms.

    ``ginv`` has trailing (n, n); the result has trailing (C, C).
    """
    combos = basis_indices(n, p)
    C = len(combos)
    lead = ginv.shape[:-2]
    if p == 0:
        return np.ones(lead + (1, 1))
    gram = np.empty(lead + (C, C))
    for a, I in enumerate(combos):
        for b, K in enumerate(combos):
            sub = ginv[..., list(I), :][..., :, list(K)]
            if p == 1:
                gram[..., a, b] = sub[..., 0, 0]
            else:
                gram[..., a, b] = np.linalg.det(sub)
    return gram


def metric_inverse_and_density(g):
    """(g^{-1}, sqrt(det g)); raises GeometryError off the SPD cone."""
    g = np.asarray(g)
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise GeometryError("metric is not SPD at some node") from exc
    det = np.linalg.det(g)
    return np.linalg.inv(g), np.sqrt(det)


def form_inner(alpha, beta, ginv, n, p):
    """Pointwise <alpha, beta>_g on p-forms (canonical components)."""
    gram = _gram(ginv, n, p)
    return np.einsum("...a,...ab,...b->...", alpha, gram, beta)


def hodge_star(omega, g, n, p, ginv=None, sqrtg=None):
    """Pointwise Hodge star: <a,w>_g vol_g = a wedge star(w),
    vol_g = sqrt(g) dx^1...dx^n."""
    omega = np.asarray(omega)
    if ginv is None or sqrtg is None:
        ginv, sqrtg = metric_inverse_and_density(g)
    gram = _gram(ginv, n, p)
    raised = np.einsum("...ab,...b->...a", gram, omega)
    combos_in = basis_indices(n, p)
    combos_out = basis_indices(n, n - p)
    out_index = index_of(n, n - p)
    out = np.zeros(omega.shape[:-1] + (len(combos_out),), dtype=omega.dtype)
    for a, I in enumerate(combos_in):
        J = tuple(sorted(set(range(n)) - set(I)))
        sign = _merge_sign(I, J)
        out[..., out_index[J]] += sign * raised[..., a]
    return out * sqrtg[..., None]


@lru_cache(maxsize=None)
def _d_table(n, p):
    """Triples (pos_out, axis, pos_in, sign) of the exterior derivative
    (d omega)_{j0<...<jp} = sum_r (-1)^r  d_{jr} omega_{j0..^jr..jp}."""
    in_index = index_of(n, p)
    table = []
    for pos_out, J in enumerate(basis_indices(n, p + 1)):
        for r, jr in enumerate(J):
            I = J[:r] + J[r + 1 :]
            table.append((pos_out, jr, in_index[I], (-1) ** r))
    return tuple(table)


def d(omega, grid, p):
    """Componentwise central-difference exterior derivative."""
    n = grid.n
    if p >= n:
        raise ShapeError(f"cannot apply d to a top-degree ({p}) form")
    omega = np.asarray(omega)
    out = np.zeros(omega.shape[:-1] + (num_components(n, p + 1),), dtype=omega.dtype)
    for pos_out, axis, pos_in, sign in _d_table(n, p):
        out[..., pos_out] += sign * grid.partial(omega[..., pos_in], axis)
    return out


def d_transpose(beta, grid, p):
    """Transpose of d : p-forms -> (p+1)-forms under the unweighted node sum.

    Central stencils transpose to their negatives, so this is assembled from
    the same table with flipped derivative sign.
    """
    n = grid.n
    beta = np.asarray(beta)
    out = np.zeros(beta.shape[:-1] + (num_components(n, p),), dtype=beta.dtype)
    for pos_out, axis, pos_in, sign in _d_table(n, p):
        out[..., pos_in] += -sign * grid.partial(beta[..., pos_out], axis)
    return out


def codifferential(omega, g, grid, p, ginv=None, sqrtg=None):
    """Exact discrete adjoint of d with respect to
    sum_nodes <alpha, beta>_g sqrt(g) prod(h).

    For all discrete alpha of degree p-1:
        <<d alpha, omega>> == <<alpha, codifferential(omega)>>  (exact).
    """
    if p < 1:
        raise ShapeError("codifferential needs degree >= 1")
    n = grid.n
    if ginv is None or sqrtg is None:
        ginv, sqrtg = metric_inverse_and_density(g)
    w_in = _gram(ginv, n, p) * sqrtg[..., None, None]
    weighted = np.einsum("...ab,...b->...a", w_in, np.asarray(omega))
    raw = d_transpose(weighted, grid, p - 1)
    w_out = _gram(ginv, n, p - 1) * sqrtg[..., None, None]
    return np.linalg.solve(w_out, raw[..., None])[..., 0]


def hodge_laplacian(omega, g, grid, p, ginv=None, sqrtg=None):
    """d d+ + d+ d built from the two exact-adjoint pieces."""
    n = grid.n
    if ginv is None or sqrtg is None:
        ginv, sqrtg = metric_inverse_and_density(g)
    out = np.zeros_like(np.asarray(omega))
    if p < n:
        out = out + codifferential(d(omega, grid, p), g, grid, p + 1, ginv, sqrtg)
    if p > 0:
        out = out + d(codifferential(omega, g, grid, p, ginv, sqrtg), grid, p - 1)
    return out


def form_l2(alpha, beta, g, grid, p, ginv=None, sqrtg=None):
    """Global inner product sum <alpha,beta>_g sqrt(g) prod(h)."""
    if ginv is None or sqrtg is None:
        ginv, sqrtg = metric_inverse_and_density(g)
    return grid.integrate(form_inner(alpha, beta, ginv, grid.n, p), sqrtg)


def frame_components(omega, E, n, k):
    """Full antisymmetric frame components
    H_{a1..ak} = E^{j1}_{a1} ... E^{jk}_{ak} H_{j1..jk}.

    ``E`` has trailing (n, n) with E[..., j, a] the j-th coordinate of frame
    vector a; the result has trailing (n,)*k.
    """
    if k == 0:
        return np.asarray(omega)[..., 0]
    full = to_full(np.asarray(omega), n, k)
    coords = "uvwxyz"[:k]
    frames = "abcdef"[:k]
    eq = (
        f"...{coords},"
        + ",".join(f"...{c}{a}" for c, a in zip(coords, frames))
        + f"->...{frames}"
    )
    return np.einsum(eq, full, *([E] * k))


def interior_product(X, omega, n, k):
    """(iota_X omega)_{I'} = X^j omega_{j I'} on canonical components."""
    omega = np.asarray(omega)
    X = np.asarray(X)
    if k == 0:
        raise ShapeError("interior product needs degree >= 1")
    out = np.zeros(
        np.broadcast_shapes(omega.shape[:-1], X.shape[:-1])
        + (num_components(n, k - 1),),
        dtype=np.result_type(omega, X),
    )
    in_index = index_of(n, k)
    for pos_out, I in enumerate(basis_indices(n, k - 1)):
        for j in range(n):
            if j in I:
                continue
            sign = _merge_sign((j,), I)
            K = tuple(sorted((j,) + I))
            out[..., pos_out] += sign * X[..., j] * omega[..., in_index[K]]
    return out

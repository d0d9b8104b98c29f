"""Complex Clifford algebra representation and spinor endomorphisms.

Conventions: gamma^a gamma^b + gamma^b gamma^a = 2 delta_ab, each gamma^a
Hermitian and unitary, spinor space C^(2^floor(n/2)).  The inner product on
spinors is the standard Hermitian one, conjugate-linear in the first slot,
so <gamma^a psi, chi> = <psi, gamma^a chi>.

Form action follows the all-tuples convention

    omega . psi = sum_{(i_1..i_p)} omega(e_i1, ..., e_ip) gamma^{i1...ip} psi,

which is p! times the sum over strictly increasing multi-indices.  The p!
is deliberate; callers absorb it into coupling constants.
"""

import itertools
import math

import numpy as np

from .errors import DimensionError, ShapeError

_SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_SIGMA2 = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
_SIGMA3 = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

MAX_DIMENSION = 12


def _permutation_sign(seq):
    """Sign of the permutation sorting ``seq``; 0 on repeated entries."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def _even_generators(m):
    """2m Hermitian anticommuting generators on C^(2^m), iteratively."""
    gens = [_SIGMA1.copy(), _SIGMA2.copy()]
    for _ in range(m - 1):
        eye = np.eye(gens[0].shape[0], dtype=complex)
        gens = [np.kron(_SIGMA1, g) for g in gens]
        gens.append(np.kron(_SIGMA2, eye))
        gens.append(np.kron(_SIGMA3, eye))
    return gens


class GammaBasis:
    """Gamma matrices for dimension ``n`` with cached antisymmetrized products.

    Attributes
    ----------
    n : spatial dimension
    dim_s : spinor dimension 2^floor(n/2)
    gamma : complex array (n, dim_s, dim_s)
    """

    def __init__(self, n):
        if not 1 <= n <= MAX_DIMENSION:
            raise DimensionError(f"dimension must be in 1..{MAX_DIMENSION}, got {n}")
        self.n = n
        m = n // 2
        self.dim_s = 2**m
        if n == 1:
            mats = [np.array([[1.0 + 0.0j]])]
        else:
            mats = _even_generators(m)
            if n % 2 == 1:
                # chirality element (-i)^m gamma^1 ... gamma^2m: Hermitian,
                # squares to the identity, anticommutes with the others
                chi = mats[0]
                for g in mats[1:]:
                    chi = chi @ g
                mats = mats + [((-1.0j) ** m) * chi]
        self.gamma = np.stack([m_.astype(complex) for m_ in mats])
        self.identity = np.eye(self.dim_s, dtype=complex)
        self._cache = {(): self.identity}
        self._full_cache = {}

    def anti_product(self, index_tuple):
        """Antisymmetrized product gamma^{i1...iN} (0-based indices).

        Equals the ordered product times the sign of the sorting permutation
        for distinct indices, zero on repeats.  Results are cached.
        """
        idx = tuple(int(i) for i in index_tuple)
        for i in idx:
            if not 0 <= i < self.n:
                raise IndexError(f"gamma index {i} out of range for n={self.n}")
        if len(idx) > self.n:
            return np.zeros((self.dim_s, self.dim_s), dtype=complex)
        sign = _permutation_sign(idx)
        if sign == 0:
            return np.zeros((self.dim_s, self.dim_s), dtype=complex)
        key = tuple(sorted(idx))
        if key not in self._cache:
            prod = self.identity
            for i in key:
                prod = prod @ self.gamma[i]
            self._cache[key] = prod
        return sign * self._cache[key]

    def anti_products(self, index_tuples):
        """Stack of antisymmetrized products, shape (len, dim_s, dim_s)."""
        return np.stack([self.anti_product(t) for t in index_tuples])

    def full_tensor(self, p):
        """Dense tensor of all gamma^{i1...ip}, shape (n,)*p + (dim_s, dim_s).

        Entries with repeated indices are zero.  Cached per degree.
        """
        if p not in self._full_cache:
            out = np.zeros((self.n,) * p + (self.dim_s, self.dim_s), dtype=complex)
            for idx in itertools.product(range(self.n), repeat=p):
                if len(set(idx)) == p:
                    out[idx] = self.anti_product(idx)
            self._full_cache[p] = out
        return self._full_cache[p]


def build_gamma(n):
    """Construct the gamma basis for dimension ``n`` (1 <= n <= 12)."""
    return GammaBasis(n)


def gamma_anti(basis, index_tuple):
    """Antisymmetrized product for a multi-index (0-based)."""
    return basis.anti_product(index_tuple)


def act_form(basis, omega, psi, degree):
    """Clifford action of a form given in canonical increasing components.

    ``omega`` has trailing axis of length C(n, degree); ``psi`` trailing axis
    dim_s.  Leading (grid) axes broadcast.  Uses the all-tuples convention,
    i.e. degree! times the increasing-index sum.
    """
    omega = np.asarray(omega)
    psi = np.asarray(psi, dtype=complex)
    combos = list(itertools.combinations(range(basis.n), degree))
    if omega.shape[-1:] != (len(combos),) and degree > 0:
        raise ShapeError(
            f"form components must have length C({basis.n},{degree})={len(combos)}"
        )
    if psi.shape[-1] != basis.dim_s:
        raise ShapeError(f"spinor must have length {basis.dim_s}")
    if degree == 0:
        return omega * psi
    mats = basis.anti_products(combos)
    return float(math.factorial(degree)) * np.einsum(
        "...c,cij,...j->...i", omega, mats, psi
    )


class FluxEndomorphism:
    """Per frame direction a: the endomorphism (lambda|H)_a and its
    Hermitian part h_a, at every node.

    ``full`` has shape grid + (n, dim_s, dim_s); ``hermitian`` likewise.
    """

    def __init__(self, full):
        self.full = full
        self.hermitian = 0.5 * (full + np.conj(np.swapaxes(full, -1, -2)))

    @property
    def anti_hermitian(self):
        return self.full - self.hermitian


def flux_endomorphism(basis, H_frame_full, lam, k):
    """Build (lambda|H)_a = lambda1 H_{a b1..b(k-1)} gamma^{b1..b(k-1)}
                        + lambda2 H_{b1..bk} gamma^{a b1..bk}

    from the full antisymmetric frame components of the k-form (trailing
    (n,)*k axes).  Index sums run over all tuples, matching the paper's
    repeated-index convention.
    """
    lam1, lam2 = lam
    n, ds = basis.n, basis.dim_s
    H_frame_full = np.asarray(H_frame_full)
    if k > n:
        raise ShapeError(f"form degree {k} exceeds dimension {n}")
    if H_frame_full.shape[-k:] != (n,) * k:
        raise ShapeError("expected full antisymmetric frame components")
    lead = H_frame_full.shape[: -k or None]
    if k == 0:
        raise ShapeError("flux must have degree >= 1")
    out = np.zeros(tuple(lead) + (n, ds, ds), dtype=complex)
    if lam1 != 0.0:
        g1 = basis.full_tensor(k - 1)
        letters = "bcdefg"[: k - 1]
        out += lam1 * np.einsum(
            f"...a{letters},{letters}ij->...aij", H_frame_full, g1
        )
    if lam2 != 0.0:
        g2 = basis.full_tensor(k + 1)
        letters = "bcdefg"[:k]
        out += lam2 * np.einsum(
            f"...{letters},a{letters}ij->...aij", H_frame_full, g2
        )
    return FluxEndomorphism(out)

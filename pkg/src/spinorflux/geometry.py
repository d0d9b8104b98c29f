"""Metric-dependent Riemannian machinery on the periodic grid.

Curvature convention (the one under which the discrete Bochner identity
D nabla_p psi - nabla_p D psi = 1/2 Ric_{pk} gamma^k psi holds with our
Hermitian gammas; verified numerically in the test suite):

    (nabla_i nabla_j - nabla_j nabla_i) d_k = R_{ijk}^l d_l,
    R_{ijk}^l = d_i Gamma^l_{jk} - d_j Gamma^l_{ik}
                + Gamma^l_{im} Gamma^m_{jk} - Gamma^l_{jm} Gamma^m_{ik},
    Ric_{jk} = R_{ijk}^i,     scalar = g^{jk} Ric_{jk}.

With this choice the conformal 2-metric e^{2f} delta has scalar curvature
-2 e^{-2f} Delta f (flat Laplacian), i.e. round spheres come out positive.
"""

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError


def frame_from_metric(g):
    """Orthonormal frame E = g^(-1/2) by per-node symmetric eigensolve.

    Columns E[..., :, a] are the frame vectors; E^T g E = Id.
    """
    g = np.asarray(g)
    w, V = np.linalg.eigh(g)
    if np.min(w) <= 1e-10:
        raise GeometryError(f"metric not SPD: min eigenvalue {np.min(w):.3e}")
    return np.einsum("...ia,...a,...ja->...ij", V, 1.0 / np.sqrt(w), V)


def orthonormality_defect(E, g):
    """sup norm of E^T g E - Id."""
    n = g.shape[-1]
    return float(
        np.max(np.abs(np.einsum("...ia,...ij,...jb->...ab", E, g, E) - np.eye(n)))
    )


def reorthonormalize(E, g):
    """Polar correction E <- E (E^T g E)^(-1/2).

    Restores E^T g E = Id without re-deriving the frame from g, so the
    spinor gauge carried by E is preserved to leading order.
    """
    M = np.einsum("...ia,...ij,...jb->...ab", E, g, E)
    w, V = np.linalg.eigh(M)
    if np.min(w) <= 0:
        raise GeometryError("frame degenerated; cannot re-orthonormalize")
    correction = np.einsum("...ia,...a,...ja->...ij", V, 1.0 / np.sqrt(w), V)
    return np.einsum("...ij,...jb->...ib", E, correction)


def christoffels(g, grid, ginv=None, dg=None):
    """Gamma^k_{ij} = 1/2 g^{kl} (d_i g_{jl} + d_j g_{il} - d_l g_{ij}),
    axes [..., k, i, j]; symmetric in (i, j) exactly."""
    g = np.asarray(g)
    if ginv is None:
        ginv = np.linalg.inv(g)
    if dg is None:
        dg = grid.gradient(g)  # dg[..., l, i, j] = d_l g_{ij}
    comb = (
        dg  # d_i g_{jl} read as comb[..., i, j, l]
        + np.swapaxes(dg, -3, -2)  # d_j g_{il}
        - np.moveaxis(dg, -3, -1)  # d_l g_{ij}
    )
    return 0.5 * np.einsum("...kl,...ijl->...kij", ginv, comb)


@dataclass
class CurvatureFields:
    """Riemann R_{ijk}^l (mixed), its lowering Rm_{ijkl}, Ricci, scalar."""

    riemann: np.ndarray  # [..., i, j, k, l] = R_{ijk}^l
    riemann_lowered: np.ndarray  # [..., i, j, k, l] = R_{ijk}^m g_{ml}
    ricci: np.ndarray  # [..., j, k]
    scalar: np.ndarray  # [...]


def curvature(g, grid, ginv=None, christ=None):
    """Curvature fields from stencil-differentiated Christoffels."""
    g = np.asarray(g)
    if ginv is None:
        ginv = np.linalg.inv(g)
    if christ is None:
        christ = christoffels(g, grid, ginv=ginv)
    dG = grid.gradient(christ)  # dG[..., m, k, i, j] = d_m Gamma^k_{ij}
    riem = (
        np.einsum("...iljk->...ijkl", dG)
        - np.einsum("...jlik->...ijkl", dG)
        + np.einsum("...lim,...mjk->...ijkl", christ, christ)
        - np.einsum("...ljm,...mik->...ijkl", christ, christ)
    )
    lowered = np.einsum("...ijkm,...ml->...ijkl", riem, g)
    ricci = np.einsum("...ijki->...jk", riem)
    scalar = np.einsum("...jk,...jk->...", ginv, ricci)
    return CurvatureFields(riem, lowered, ricci, scalar)


def hessian(f, g, grid, christ=None):
    """Riemannian Hessian nabla_i nabla_j f = d_i d_j f - Gamma^k_{ij} d_k f."""
    if christ is None:
        christ = christoffels(g, grid)
    df = grid.gradient(f)
    ddf = grid.gradient(df)  # [..., i, j] = d_i d_j f (stencils commute)
    return ddf - np.einsum("...kij,...k->...ij", christ, df)


def cov_deriv_covector(w, grid, christ):
    """nabla_i w_j = d_i w_j - Gamma^k_{ij} w_k, axes [..., i, j]."""
    return grid.gradient(w) - np.einsum("...kij,...k->...ij", christ, w)


def cov_deriv_vector(V, grid, christ):
    """nabla_i V^j = d_i V^j + Gamma^j_{ik} V^k, axes [..., i, j]."""
    return grid.gradient(V) + np.einsum("...jik,...k->...ij", christ, V)


def cov_deriv_covariant(T, grid, christ, rank):
    """Covariant derivative of an all-covariant rank-r tensor.

    Output axes [..., m, i1..ir] = nabla_m T_{i1..ir}.
    """
    out = grid.gradient(T)
    letters = "abcdefgh"[:rank]
    for slot in range(rank):
        src = letters[:slot] + "q" + letters[slot + 1 :]
        out = out - np.einsum(
            f"...qm{letters[slot]},...{src}->...m{letters}", christ, T
        )
    return out


def lie_metric(X, g, grid, christ=None):
    """(L_X g)_{ij} = nabla_i X_j + nabla_j X_i (Levi-Civita form),
    for a coordinate vector field X^j."""
    if christ is None:
        christ = christoffels(g, grid)
    X_low = np.einsum("...ij,...j->...i", g, X)
    nabla_X = cov_deriv_covector(X_low, grid, christ)
    return nabla_X + np.swapaxes(nabla_X, -1, -2)


def lie_form(X, omega, grid, k):
    """Cartan formula L_X omega = d(iota_X omega) + iota_X(d omega)
    on canonical components."""
    from . import exterior

    n = grid.n
    out = np.zeros_like(np.asarray(omega))
    if k >= 1:
        out = out + exterior.d(exterior.interior_product(X, omega, n, k), grid, k - 1)
    if k < n:
        out = out + exterior.interior_product(X, exterior.d(omega, grid, k), n, k + 1)
    return out


def deturck_vector(g, g_background, grid):
    """X^k = 2 g^{mk} g^{ij} nablabar_i g_{jm}, nablabar the Levi-Civita
    connection of the background metric."""
    g = np.asarray(g)
    gb = np.asarray(g_background)
    ginv = np.linalg.inv(g)
    christ_bar = christoffels(gb, grid)
    dg = grid.gradient(g)  # [..., i, j, m] = d_i g_{jm}
    nabla_bar = (
        dg
        - np.einsum("...lij,...lm->...ijm", christ_bar, g)
        - np.einsum("...lim,...jl->...ijm", christ_bar, g)
    )
    return 2.0 * np.einsum("...mk,...ij,...ijm->...k", ginv, ginv, nabla_bar)


def variation_riemann(g, u, grid, curv=None, christ=None, ginv=None):
    """First variation of the lowered Riemann tensor along g(s) = g + s u:

        dRm_{ijkl} = 1/2 (nabla_i nabla_k u_{jl} + nabla_j nabla_l u_{ik}
                          - nabla_i nabla_l u_{jk} - nabla_j nabla_k u_{il})
                     + 1/2 (R_{ijk}^q u_{ql} - R_{ijl}^q u_{qk})

    plus the matching Ricci variation obtained by exact contraction
    dRic_{jk} = g^{il} dRm_{ijkl} - u^{il} Rm_{ijkl}.

    Returns (dRm, dRic).
    """
    g = np.asarray(g)
    u = np.asarray(u)
    if ginv is None:
        ginv = np.linalg.inv(g)
    if christ is None:
        christ = christoffels(g, grid, ginv=ginv)
    if curv is None:
        curv = curvature(g, grid, ginv=ginv, christ=christ)
    Du = cov_deriv_covariant(u, grid, christ, 2)  # [..., m, i, j]
    DDu = cov_deriv_covariant(Du, grid, christ, 3)  # [..., i, k, j, l] = nabla_i nabla_k u_{jl}
    hess_part = 0.5 * (
        np.einsum("...ikjl->...ijkl", DDu)
        + np.einsum("...jlik->...ijkl", DDu)
        - np.einsum("...iljk->...ijkl", DDu)
        - np.einsum("...jkil->...ijkl", DDu)
    )
    curv_part = 0.5 * (
        np.einsum("...ijkq,...ql->...ijkl", curv.riemann, u)
        - np.einsum("...ijlq,...qk->...ijkl", curv.riemann, u)
    )
    dRm = hess_part + curv_part
    u_up = np.einsum("...im,...mn,...nl->...il", ginv, u, ginv)
    dRic = np.einsum("...il,...ijkl->...jk", ginv, dRm) - np.einsum(
        "...il,...ijkl->...jk", u_up, curv.riemann_lowered
    )
    return dRm, dRic


def hw_vector(psi, phi, g, E, omega, basis, grid):
    """Reparametrization vector X = e^{-2 phi} Re <psi, gamma^l D psi> e_l,
    returned in coordinate components (real by construction)."""
    from . import spin

    nab = spin.nabla_spinor(psi, omega, E, basis, grid)
    dirac_psi = spin.dirac(nab, basis)
    X_frame = np.exp(-2.0 * phi)[..., None] * np.real(
        np.einsum(
            "...i,aij,...j->...a", np.conj(psi), basis.gamma, dirac_psi
        )
    )
    return np.einsum("...ja,...a->...j", E, X_frame)

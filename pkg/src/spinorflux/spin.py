"""Spinor calculus: spin connection, flux connection, Dirac operator,
flux Laplacian with exact discrete adjoint, Bourguignon-Gauduchon
transport, spinorial Lie derivative, and the metric variation of the
flux connection.

Spinors live in a fixed global trivialization (the torus is parallelizable),
so all metric dependence enters through the frame E.  Frame indices are
raised/lowered with delta.
"""

import numpy as np

from .errors import GeometryError


def spin_connection(g, E, christ, grid):
    """Connection coefficients omega_{pab} = <nabla_{e_p} e_a, e_b>_g,
    antisymmetrized in (a, b) so the antisymmetry is exact.

    Axes: [..., p, a, b].
    """
    dE = grid.gradient(E)  # [..., j, i, a] = d_j E^i_a
    nabla_e = dE + np.einsum("...ijl,...la->...jia", christ, E)
    raw = np.einsum("...jp,...jia,...ik,...kb->...pab", E, nabla_e, g, E)
    return 0.5 * (raw - np.swapaxes(raw, -1, -2))


def nabla_spinor(psi, omega, E, basis, grid):
    """Covariant derivative nabla_p psi = E^j_p d_j psi - 1/4 omega_{pab}
    gamma^{ab} psi per frame direction, axes [..., p, s]."""
    dpsi = grid.gradient(psi)  # [..., j, s]
    directional = np.einsum("...jp,...js->...ps", E, dpsi)
    gamma2 = basis.full_tensor(2)
    correction = -0.25 * np.einsum(
        "...pab,abst,...t->...ps", omega, gamma2, psi
    )
    return directional + correction


def nabla_H(psi, omega, E, basis, grid, flux=None):
    """Flux connection nabla^H_p psi = nabla_p psi + (lambda|H)_p psi.

    ``flux`` is a FluxEndomorphism (or None for H = 0).
    """
    nab = nabla_spinor(psi, omega, E, basis, grid)
    if flux is None:
        return nab
    return nab + np.einsum("...pst,...t->...ps", flux.full, psi)


def dirac(nabla_psi, basis):
    """D psi = gamma^a nabla_a psi from a per-direction derivative stack."""
    return np.einsum("ast,...at->...s", basis.gamma, nabla_psi)


def second_covariant(nabla_psi, omega, E, basis, grid):
    """Tensor second derivative
    nabla2_{a,p} psi = nabla_a(nabla_p psi) - omega_{apc} nabla_c psi,
    axes [..., a, p, s].  The argument is the stack nabla_p psi."""
    dnab = grid.gradient(nabla_psi)  # [..., j, p, s]
    directional = np.einsum("...ja,...jps->...aps", E, dnab)
    gamma2 = basis.full_tensor(2)
    spin_corr = -0.25 * np.einsum(
        "...abc,bcst,...pt->...aps", omega, gamma2, nabla_psi
    )
    frame_corr = -np.einsum("...apc,...cs->...aps", omega, nabla_psi)
    return directional + spin_corr + frame_corr


def algebraic_connection(omega, basis, flux=None):
    """Per-direction matrix part M_a of nabla^H_a
    (so nabla^H_a = e_a + M_a): M_a = -1/4 omega_{abc} gamma^{bc} + (lambda|H)_a."""
    gamma2 = basis.full_tensor(2)
    M = -0.25 * np.einsum("...pab,abst->...pst", omega, gamma2)
    if flux is not None:
        M = M + flux.full
    return M


def flux_laplacian(psi, omega, E, basis, grid, g, flux=None, sqrtg=None):
    """(nabla^H)+ nabla^H psi as an exact discrete adjoint composition.

    For all psi, chi:
        <<L psi, chi>> == sum_a <<nabla^H_a psi, nabla^H_a chi>>   (exact),
    with <<.,.>> = sum_nodes <.,.> sqrt(g) prod(h).  Each adjoint is the
    transpose of the forward stencil against the sqrt(g) weight; no
    continuum formula for (nabla^H)+ is discretized.
    """
    if sqrtg is None:
        sqrtg = np.sqrt(np.linalg.det(g))
    nab = nabla_H(psi, omega, E, basis, grid, flux)
    M = algebraic_connection(omega, basis, flux)
    # adjoint of (e_a + M_a) against weight sqrt(g):
    #   A_a^+ chi = -(1/sqrt(g)) sum_j d_j(sqrt(g) E^j_a chi) + M_a^+ chi
    weighted = np.einsum("...,...ja,...as->...js", sqrtg, E, nab)
    div = np.zeros_like(psi)
    for j in range(grid.n):
        div = div + grid.partial(weighted[..., j, :], j)
    Mdag = np.conj(np.swapaxes(M, -1, -2))
    algebraic = np.einsum("...ast,...at->...s", Mdag, nab)
    return -div / sqrtg[..., None] + algebraic


def bg_transport(g, u, E0, s_end, grid, steps=32):
    """Integrate the Bourguignon-Gauduchon frame ODE
        dE/ds = -1/2 (g + s u)^{-1} u E
    from E(0) = E0 with classical RK4; E(s_end) is (g + s_end u)-orthonormal
    up to O(step^4).
    """
    steps = max(1, int(steps))
    ds = s_end / steps

    def rate(s, E):
        gs = g + s * u
        try:
            np.linalg.cholesky(gs)
        except np.linalg.LinAlgError as exc:
            raise GeometryError("metric path left the SPD cone") from exc
        return -0.5 * np.linalg.solve(gs, np.einsum("...ij,...jb->...ib", u, E))

    E = E0.copy()
    s = 0.0
    for _ in range(steps):
        k1 = rate(s, E)
        k2 = rate(s + 0.5 * ds, E + 0.5 * ds * k1)
        k3 = rate(s + 0.5 * ds, E + 0.5 * ds * k2)
        k4 = rate(s + ds, E + ds * k3)
        E = E + (ds / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        s += ds
    return E


def spinor_lie(X, psi, omega, E, g, christ, basis, grid, nab=None):
    """Spinorial Lie derivative (Bourguignon-Gauduchon)

        L_X psi = X^m nabla_m psi
                  + 1/4 ((nabla_r X_p - nabla_p X_r)/2) gamma^{rp} psi

    for a coordinate vector field X; frame indices inside.
    """
    from . import geometry

    if nab is None:
        nab = nabla_spinor(psi, omega, E, basis, grid)
    X_frame = np.einsum("...ij,...j,...ia->...a", g, X, E)
    transport = np.einsum("...a,...as->...s", X_frame, nab)
    X_low = np.einsum("...ij,...j->...i", g, X)
    DX = geometry.cov_deriv_covector(X_low, grid, christ)  # [..., i, j]
    DX_frame = np.einsum("...ir,...jp,...ij->...rp", E, E, DX)
    curl = 0.5 * (DX_frame - np.swapaxes(DX_frame, -1, -2))
    gamma2 = basis.full_tensor(2)
    return transport + 0.25 * np.einsum(
        "...rp,rpst,...t->...s", curl, gamma2, psi
    )


def flux_conn_variation(u, nab_H, psi, H_frame_full, lam, E, christ, basis, grid, k):
    """Analytic first variation of nabla^H_p psi along g(s) = g + s u in
    Bourguignon-Gauduchon-transported frames:

        -1/2 u_{pj} nabla^H_j psi  - 1/4 nabla_a u_{pb} gamma^{ab} psi
        + lambda2/2 u_{pj} H_{B} gamma^{jB} psi
        - lambda1/2 sum_i u_{a_i m} H_{p a_1..m..a_{k-1}} gamma^{a_1..a_{k-1}} psi
        - lambda2/2 sum_i u_{a_i m} H_{a_1..m..a_k} gamma^{p a_1..a_k} psi

    with all index sums over full tuples and frame indices throughout.
    ``nab_H`` is the stack nabla^H_p psi at s = 0.
    """
    from . import geometry

    lam1, lam2 = lam
    n, ds_ = basis.n, basis.dim_s
    u_frame = np.einsum("...ip,...jq,...ij->...pq", E, E, u)
    out = -0.5 * np.einsum("...pj,...js->...ps", u_frame, nab_H)

    Du = geometry.cov_deriv_covariant(u, grid, christ, 2)  # [..., m, i, j]
    Du_frame = np.einsum("...ma,...ip,...jb,...mij->...apb", E, E, E, Du)
    gamma2 = basis.full_tensor(2)
    out = out - 0.25 * np.einsum(
        "...apb,abst,...t->...ps", Du_frame, gamma2, psi
    )

    if lam2 != 0.0:
        g_k1 = basis.full_tensor(k + 1)
        lt = "bcdefg"[:k]
        M2 = lam2 * np.einsum(f"...{lt},j{lt}st->...jst", H_frame_full, g_k1)
        out = out + 0.5 * np.einsum("...pj,...jst,...t->...ps", u_frame, M2, psi)

    if lam1 != 0.0 and k >= 2:
        # H axes read as (p, a_1..a_{k-1}); replace slot i by the contracted m
        g_km1 = basis.full_tensor(k - 1)
        lt = "p" + "bcdefg"[: k - 1]
        acc = np.zeros(u_frame.shape[:-2] + (n,) * k, dtype=H_frame_full.dtype)
        for i in range(1, k):
            src = lt[:i] + "m" + lt[i + 1 :]
            acc += np.einsum(f"...{lt[i]}m,...{src}->...{lt}", u_frame, H_frame_full)
        out = out - 0.5 * lam1 * np.einsum(
            f"...{lt},{lt[1:]}st,...t->...ps", acc, g_km1, psi
        )

    if lam2 != 0.0:
        g_k1 = basis.full_tensor(k + 1)
        lt = "bcdefg"[:k]
        acc = np.zeros(u_frame.shape[:-2] + (n,) * k, dtype=H_frame_full.dtype)
        for i in range(k):
            src = lt[:i] + "m" + lt[i + 1 :]
            acc += np.einsum(f"...{lt[i]}m,...{src}->...{lt}", u_frame, H_frame_full)
        out = out - 0.5 * lam2 * np.einsum(
            f"...{lt},p{lt}st,...t->...ps", acc, g_k1, psi
        )

    return out

"""Right-hand sides of the coupled flow of (g, psi, H, phi) and the
method-of-lines time integrator.

The evolving fields are the metric g, an orthonormal frame E carried in the
state and transported by Edot = -1/2 g^{-1} gdot E (the Bourguignon-Gauduchon
ODE in time), the spinor psi, the k-form flux H, and the normalization
function phi.  Variants:

    variant: dynamic-phi | fixed-phi      (phi evolves or is frozen)
    gauge:   none | deturck | hw          (ungauged, DeTurck-modified, or
                                           the Ricci-form modified flow)

Conventions that the discrete identities rely on:
  * the divergence in Q and in the phi-flow is the coordinate form
    (1/sqrt g) d_j (sqrt g V^j), so its weighted node sum vanishes exactly;
  * Q carries the frame-connection correction terms on its two free slots;
    they cancel exactly in the symmetrized trace, keeping the trace identity
    exact while making the Ricci-form comparison converge;
  * <h_a psi, psi> is taken as its real part everywhere (h_a is Hermitian by
    construction; the imaginary residue is asserted small at runtime).
"""

from dataclasses import dataclass

import numpy as np

from . import clifford, exterior, geometry, spin
from .errors import ConfigError, DivergenceError, GeometryError, StiffnessError

VARIANTS = ("dynamic-phi", "fixed-phi")
GAUGES = ("none", "deturck", "hw")
RENORMALIZE = ("off", "project-phi")
PHI_BRACKETS = ("flow", "deturck")

FRAME_DRIFT_TOL = 1e-8
MIN_DT = 1e-12


@dataclass
class FlowConfig:
    """Couplings, variant/gauge selection, and integrator controls."""

    lambda1: float = 0.0
    lambda2: float = 0.0
    c: float = 0.0
    c1: float = 1.0
    c2: float = 1.0
    variant: str = "dynamic-phi"
    gauge: str = "none"
    dt: float = 1e-3
    adaptive: bool = True
    cfl_safety: float = 1.0
    renormalize: str = "off"
    t_end: float = 0.1
    background: str = "initial"
    monitor_cadence: int = 10
    stencil_order: int = 2
    phi_bracket: str = "flow"

    def validate(self, n, k, for_stationarity=False):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.gauge not in GAUGES:
            raise ConfigError(f"unknown gauge {self.gauge!r}")
        if self.renormalize not in RENORMALIZE:
            raise ConfigError(f"unknown renormalize mode {self.renormalize!r}")
        if self.phi_bracket not in PHI_BRACKETS:
            raise ConfigError(f"unknown phi_bracket {self.phi_bracket!r}")
        if self.c != 0.0 and 3 * k != n + 1:
            raise ConfigError(
                f"flux self-coupling c != 0 requires 3k = n+1, got n={n}, k={k}"
            )
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if for_stationarity and abs(self.c1 / 2.0 - n * self.c2 / 4.0) < 1e-14:
            raise ConfigError(
                "stationarity classification needs c1/2 - n c2/4 != 0; "
                f"got c1={self.c1}, c2={self.c2}, n={n}"
            )

    @property
    def lam(self):
        return (self.lambda1, self.lambda2)


@dataclass
class FlowState:
    """(metric, frame, spinor, flux k-form, normalization, time)."""

    grid: object
    k: int
    g: np.ndarray  # [..., n, n]
    E: np.ndarray  # [..., j, a]
    psi: np.ndarray  # [..., dim_s] complex
    H: np.ndarray  # [..., C(n,k)] canonical components
    phi: np.ndarray  # [...]
    t: float = 0.0

    def copy(self):
        return FlowState(
            self.grid, self.k, self.g.copy(), self.E.copy(), self.psi.copy(),
            self.H.copy(), self.phi.copy(), self.t,
        )

    @property
    def n(self):
        return self.grid.n

    def normalization_residual(self):
        """sup |e^{-2 phi} |psi|^2 - 1|."""
        mag = np.einsum("...s,...s->...", np.conj(self.psi), self.psi).real
        return float(np.max(np.abs(np.exp(-2.0 * self.phi) * mag - 1.0)))


@dataclass
class FlowTangent:
    g: np.ndarray
    psi: np.ndarray
    H: np.ndarray
    phi: np.ndarray
    E: np.ndarray

    def scaled(self, a):
        return FlowTangent(a * self.g, a * self.psi, a * self.H, a * self.phi, a * self.E)

    def add(self, other, a=1.0):
        return FlowTangent(
            self.g + a * other.g,
            self.psi + a * other.psi,
            self.H + a * other.H,
            self.phi + a * other.phi,
            self.E + a * other.E,
        )


class Geometry:
    """Shared per-evaluation geometric quantities (pure cache, never mutated)."""

    def __init__(self, state, config, need_curvature=False):
        G = state.grid
        self.grid = G
        self.basis = clifford.build_gamma(G.n)
        self.g = state.g
        self.ginv = np.linalg.inv(state.g)
        det = np.linalg.det(state.g)
        if np.any(det <= 0) or not np.all(np.isfinite(det)):
            raise GeometryError("metric determinant non-positive or non-finite")
        self.sqrtg = np.sqrt(det)
        self.christ = geometry.christoffels(state.g, G, ginv=self.ginv)
        self.omega = spin.spin_connection(state.g, state.E, self.christ, G)
        self.e2phi = np.exp(2.0 * state.phi)
        self.em2phi = np.exp(-2.0 * state.phi)
        self.H_frame = exterior.frame_components(state.H, state.E, G.n, state.k)
        if config.lambda1 == 0.0 and config.lambda2 == 0.0:
            self.flux = None
        else:
            self.flux = clifford.flux_endomorphism(
                self.basis, self.H_frame, config.lam, state.k
            )
        self.nab = spin.nabla_spinor(state.psi, self.omega, state.E, self.basis, G)
        if self.flux is None:
            self.nabH = self.nab
        else:
            self.nabH = self.nab + np.einsum(
                "...pst,...t->...ps", self.flux.full, state.psi
            )
        self.grad_phi_frame = np.einsum(
            "...jp,...j->...p", state.E, G.gradient(state.phi)
        )
        self.curv = (
            geometry.curvature(state.g, G, ginv=self.ginv, christ=self.christ)
            if need_curvature
            else None
        )

    def frame_ricci(self, state):
        return np.einsum("...ip,...jq,...ij->...pq", state.E, state.E, self.curv.ricci)


def _pairing_real(h_psi, psi):
    """Re <h_a psi, psi> with a runtime check that the imaginary residue of
    the Hermitian pairing is at rounding level."""
    val = np.einsum("...as,...s->...a", np.conj(h_psi), psi)
    scale = max(1.0, float(np.max(np.abs(val))))
    imag = float(np.max(np.abs(val.imag)))
    if imag > 1e-10 * scale:
        raise GeometryError(
            f"<h psi, psi> developed an imaginary part ({imag:.2e}); "
            "Hermitian part is broken"
        )
    return val.real


def frak_A(state, config, geo=None):
    """Flat connection 1-form frakA_a = e^{-2 phi} Re<h_a psi, psi> (frame
    components) together with its codifferential d+ frakA."""
    if geo is None:
        geo = Geometry(state, config)
    if geo.flux is None:
        A = np.zeros(state.g.shape[:-2] + (state.n,))
    else:
        h_psi = np.einsum("...ast,...t->...as", geo.flux.hermitian, state.psi)
        A = geo.em2phi[..., None] * _pairing_real(h_psi, state.psi)
    # coordinate 1-form A_j = (E^{-1})^a_j A_a = (E^T g)_{aj} A_a
    Einv = np.einsum("...ja,...ji->...ai", state.E, state.g)
    A_coord = np.einsum("...ai,...a->...i", Einv, A)
    dstar_A = exterior.codifferential(
        A_coord, state.g, state.grid, 1, ginv=geo.ginv, sqrtg=geo.sqrtg
    )[..., 0]
    return A, dstar_A


def _div_frame_oneform(B_frame, E, sqrtg, grid):
    """Coordinate-form divergence (1/sqrt g) d_j(sqrt g E^j_a B_a)."""
    V = np.einsum("...ja,...a->...j", E, B_frame)
    return grid.divergence(V, weight=sqrtg)


def q_tensor(state, config, geo=None):
    """Q^H_{p ell} = div_a <gamma^{a ell} psi, nabla^H_p psi>, complex,
    frame indices.  The a-contraction is the coordinate divergence; the two
    free slots carry the frame-connection corrections (which drop out of the
    symmetrized trace exactly)."""
    if geo is None:
        geo = Geometry(state, config)
    T = _q_pairing(state, geo, geo.nabH)
    return _q_divergence(state, geo, T)


def _q_pairing(state, geo, chi):
    """T_{a p ell} = <gamma^{a ell} psi, chi_p>."""
    gamma2 = geo.basis.full_tensor(2)
    gpsi = np.einsum("alst,...t->...als", gamma2, state.psi)
    return np.einsum("...als,...ps->...apl", np.conj(gpsi), chi)


def _q_divergence(state, geo, T):
    """Divergence-form a-contraction plus covariant corrections on (p, l)."""
    G = state.grid
    V = np.einsum("...ja,...apl->...jpl", state.E, T)
    acc = np.zeros_like(V[..., 0, :, :])
    w = geo.sqrtg[..., None, None]
    for j in range(G.n):
        acc = acc + G.partial(w * V[..., j, :, :], j)
    Q = acc / w
    Q = Q - np.einsum("...apc,...acl->...pl", geo.omega, T)
    Q = Q - np.einsum("...alc,...apc->...pl", geo.omega, T)
    return Q


def q_via_ricci(state, config, geo=None):
    """Re(Q^H) assembled independently from the Ricci identity:

        e^{2 phi} R_{p l}/2 + Re<psi, gamma^l nabla_p D psi>
        - Hess(e^{2 phi})_{l p}/2 - Re<D psi, gamma^l nabla_p psi>
        + div_a Re<gamma^{a l} psi, (lambda|H)_p psi>
        + 2 Re<nabla_l psi, nabla_p psi>.
    """
    if geo is None or geo.curv is None:
        geo = Geometry(state, config, need_curvature=True)
    G = state.grid
    basis = geo.basis
    dpsi = spin.dirac(geo.nab, basis)
    nab_dirac = spin.nabla_spinor(dpsi, geo.omega, state.E, basis, G)
    ric = geo.frame_ricci(state)
    out = 0.5 * geo.e2phi[..., None, None] * ric
    out = out + np.real(
        np.einsum("...s,lst,...pt->...pl", np.conj(state.psi), basis.gamma, nab_dirac)
    )
    hess = geometry.hessian(geo.e2phi, state.g, G, christ=geo.christ)
    out = out - 0.5 * np.einsum("...il,...jp,...ij->...pl", state.E, state.E, hess)
    out = out - np.real(
        np.einsum("...s,lst,...pt->...pl", np.conj(dpsi), basis.gamma, geo.nab)
    )
    out = out + 2.0 * np.real(np.einsum("...ls,...ps->...pl", np.conj(geo.nab), geo.nab))
    if geo.flux is not None:
        Mpsi = np.einsum("...pst,...t->...ps", geo.flux.full, state.psi)
        Tf = _q_pairing(state, geo, Mpsi)
        out = out + np.real(_q_divergence(state, geo, Tf))
    return out


def c_of_t(state, config, geo=None):
    """Normalization-preserving coefficient c(t), per flow variant."""
    if geo is None:
        geo = Geometry(state, config)
    norm2 = np.einsum("...as,...as->...", np.conj(geo.nabH), geo.nabH).real
    A, _B = _phi_forms(state, config, geo)
    if config.variant == "dynamic-phi":
        return geo.em2phi * norm2 - 2.0 * np.einsum(
            "...a,...a->...", A, geo.grad_phi_frame + A
        )
    B = geo.e2phi[..., None] * (geo.grad_phi_frame + A)
    divB = _div_frame_oneform(B, state.E, geo.sqrtg, state.grid)
    return geo.em2phi * (norm2 - divB)


def _phi_forms(state, config, geo):
    """(frakA_a, B_a = e^{2 phi}(grad_a phi + frakA_a)) in frame components."""
    if geo.flux is None:
        A = np.zeros(state.phi.shape + (state.n,))
    else:
        h_psi = np.einsum("...ast,...t->...as", geo.flux.hermitian, state.psi)
        A = geo.em2phi[..., None] * _pairing_real(h_psi, state.psi)
    B = geo.e2phi[..., None] * (geo.grad_phi_frame + A)
    return A, B


def l_of_h(state, config, geo=None):
    """The k-form L(H), the pointwise algebraic adjoint of
    beta -> star(beta ^ H + H ^ beta) applied to (c/2)(d+ H - c star(H^H)).

    Identically zero for odd k (graded commutativity) and for c = 0.
    """
    n, k = state.n, state.k
    if config.c == 0.0 or k % 2 == 1:
        return np.zeros_like(state.H)
    if geo is None:
        geo = Geometry(state, config)
    return _l_of_h_impl(state, config.c, geo.ginv, geo.sqrtg)


def _l_of_h_impl(state, c, ginv, sqrtg):
    G, n, k = state.grid, state.n, state.k
    H = state.H
    w = exterior.codifferential(H, state.g, G, k, ginv=ginv, sqrtg=sqrtg)
    HH = exterior.wedge(H, H, n, k, k)
    w = w - c * exterior.hodge_star(HH, state.g, n, 2 * k, ginv=ginv, sqrtg=sqrtg)
    # columns of M: beta = unit component -> star(beta ^ H + H ^ beta)
    Cin = exterior.num_components(n, k)
    Cout = exterior.num_components(n, k - 1)
    M = np.zeros(H.shape[:-1] + (Cout, Cin))
    eye = np.eye(Cin)
    for col in range(Cin):
        beta = np.broadcast_to(eye[col], H.shape)
        sym = exterior.wedge(beta, H, n, k, k) + exterior.wedge(H, beta, n, k, k)
        M[..., :, col] = exterior.hodge_star(sym, state.g, n, 2 * k, ginv=ginv, sqrtg=sqrtg)
    gram_k = exterior._gram(ginv, n, k)
    gram_km1 = exterior._gram(ginv, n, k - 1)
    rhs = np.einsum("...JI,...JK,...K->...I", M, gram_km1, w)
    return 0.5 * c * np.linalg.solve(gram_k, rhs[..., None])[..., 0]


def _flux_residual(state, config, geo):
    """d+ H - c star(H ^ H), the flux stationarity combination."""
    G, n, k = state.grid, state.n, state.k
    res = exterior.codifferential(state.H, state.g, G, k, ginv=geo.ginv, sqrtg=geo.sqrtg)
    if config.c != 0.0 and k % 2 == 0:
        HH = exterior.wedge(state.H, state.H, n, k, k)
        res = res - config.c * exterior.hodge_star(
            HH, state.g, n, 2 * k, ginv=geo.ginv, sqrtg=geo.sqrtg
        )
    return res


def _metric_line_frame(state, config, geo, q_frame):
    """-1/4 e^{-2 phi} Re Q_{sym} + c1/2 Re<nabla^H_p, nabla^H_l>
    - c2/4 delta |nabla^H psi|^2, frame indices."""
    n = state.n
    qs = 0.5 * (q_frame + np.swapaxes(q_frame, -1, -2))
    out = -0.25 * geo.em2phi[..., None, None] * np.real(qs)
    out = out + (config.c1 / 2.0) * np.real(
        np.einsum("...ps,...ls->...pl", np.conj(geo.nabH), geo.nabH)
    )
    norm2 = np.einsum("...as,...as->...", np.conj(geo.nabH), geo.nabH).real
    out = out - (config.c2 / 4.0) * norm2[..., None, None] * np.eye(n)
    return out


def _metric_line_hw(state, config, geo):
    """The Ricci-form metric line of the gauge-modified flow, frame indices."""
    G, n = state.grid, state.n
    basis = geo.basis
    em2 = geo.em2phi[..., None, None]
    dpsi = spin.dirac(geo.nab, basis)
    out = -0.125 * geo.frame_ricci(state)
    pair = np.real(
        np.einsum("...s,lst,...pt->...pl", np.conj(dpsi), basis.gamma, geo.nab)
    )
    out = out + 0.5 * em2 * 0.5 * (pair + np.swapaxes(pair, -1, -2))
    hess_phi = geometry.hessian(state.phi, state.g, G, christ=geo.christ)
    out = out + 0.25 * np.einsum("...ip,...jl,...ij->...pl", state.E, state.E, hess_phi)
    gp = geo.grad_phi_frame
    out = out + 0.5 * np.einsum("...p,...l->...pl", gp, gp)
    if geo.flux is not None:
        Mpsi = np.einsum("...pst,...t->...ps", geo.flux.full, state.psi)
        Tf = _q_pairing(state, geo, Mpsi)
        df = np.real(_q_divergence(state, geo, Tf))
        out = out - 0.25 * em2 * 0.5 * (df + np.swapaxes(df, -1, -2))
    out = out - 0.5 * em2 * np.real(
        np.einsum("...ls,...ps->...pl", np.conj(geo.nab), geo.nab)
    )
    hw_pair = np.real(
        np.einsum("...s,lst,...t->...l", np.conj(state.psi), basis.gamma, dpsi)
    )
    cross = np.einsum("...l,...p->...pl", hw_pair, gp)
    out = out - 0.5 * em2 * 0.5 * (cross + np.swapaxes(cross, -1, -2))
    out = out + (config.c1 / 2.0) * np.real(
        np.einsum("...ps,...ls->...pl", np.conj(geo.nabH), geo.nabH)
    )
    norm2 = np.einsum("...as,...as->...", np.conj(geo.nabH), geo.nabH).real
    out = out - (config.c2 / 4.0) * norm2[..., None, None] * np.eye(n)
    return out


def _frame_to_coord(A_frame, state):
    """Lower a frame 2-tensor to coordinates: A_{ij} = (E^T g)_{pi}(E^T g)_{lj} A_{pl}."""
    Einv = np.einsum("...ja,...ji->...ai", state.E, state.g)
    return np.einsum("...pi,...lj,...pl->...ij", Einv, Einv, A_frame)


def rhs(state, config, background_g=None, check_finite=True):
    """Tangent (gdot, psidot, Hdot, phidot) plus the internal frame tangent
    Edot = -1/2 g^{-1} gdot E.

    gdot is returned in coordinate components; raises DivergenceError if any
    output is non-finite.
    """
    config.validate(state.n, state.k)
    G, n, k = state.grid, state.n, state.k
    need_curv = config.gauge == "hw"
    geo = Geometry(state, config, need_curvature=need_curv)
    basis = geo.basis

    # --- metric line ---
    if config.gauge == "hw":
        g_frame = _metric_line_hw(state, config, geo)
    else:
        g_frame = _metric_line_frame(state, config, geo, q_tensor(state, config, geo))
    gdot = _frame_to_coord(g_frame, state)
    gdot = 0.5 * (gdot + np.swapaxes(gdot, -1, -2))

    # --- spinor line ---
    cfun = c_of_t(state, config, geo)
    lap = spin.flux_laplacian(
        state.psi, geo.omega, state.E, basis, G, state.g, geo.flux, geo.sqrtg
    )
    psidot = -lap + cfun[..., None] * state.psi

    # --- flux line ---
    Hdot = np.zeros_like(state.H)
    if k < n:
        dH = exterior.d(state.H, G, k)
        Hdot = Hdot - exterior.codifferential(
            dH, state.g, G, k + 1, ginv=geo.ginv, sqrtg=geo.sqrtg
        )
    Hdot = Hdot - exterior.d(_flux_residual(state, config, geo), G, k - 1)
    Hdot = Hdot + l_of_h(state, config, geo)

    # --- phi line ---
    if config.variant == "dynamic-phi":
        A, B = _phi_forms(state, config, geo)
        divB = _div_frame_oneform(B, state.E, geo.sqrtg, G)
        if config.gauge == "deturck" and config.phi_bracket == "deturck":
            phidot = geo.em2phi * (divB + np.einsum("...a,...a->...", A, B))
        else:
            phidot = geo.em2phi * (divB - 2.0 * np.einsum("...a,...a->...", A, B))
    else:
        phidot = np.zeros_like(state.phi)

    # --- gauge terms ---
    # hw: the metric line above is already the reparametrized Ricci form,
    # so only psi, H, phi receive explicit 1/8 L_X terms.
    if config.gauge == "deturck":
        if background_g is None:
            raise ConfigError("deturck gauge needs a background metric")
        X = geometry.deturck_vector(state.g, background_g, G)
        coeff = 1.0
        gdot = gdot + geometry.lie_metric(X, state.g, G, christ=geo.christ)
    elif config.gauge == "hw":
        X = geometry.hw_vector(
            state.psi, state.phi, state.g, state.E, geo.omega, basis, G
        )
        coeff = 0.125
    else:
        X = None
    if X is not None:
        psidot = psidot + coeff * spin.spinor_lie(
            X, state.psi, geo.omega, state.E, state.g, geo.christ, basis, G, nab=geo.nab
        )
        Hdot = Hdot + coeff * geometry.lie_form(X, state.H, G, k)
        if config.variant == "dynamic-phi":
            phidot = phidot + coeff * np.einsum(
                "...j,...j->...", X, G.gradient(state.phi)
            )

    Edot = -0.5 * np.einsum("...ij,...jk,...kb->...ib", geo.ginv, gdot, state.E)

    tangent = FlowTangent(gdot, psidot, Hdot, phidot, Edot)
    if check_finite:
        for name, arr in (("g", gdot), ("psi", psidot), ("H", Hdot), ("phi", phidot)):
            if not np.all(np.isfinite(arr)):
                bad = int(np.flatnonzero(~np.isfinite(arr).reshape(-1))[0])
                raise DivergenceError(
                    f"non-finite {name}-tangent during rhs evaluation", node=bad
                )
    return tangent


def _advance(state, tangent, dt):
    return FlowState(
        state.grid,
        state.k,
        state.g + dt * tangent.g,
        state.E + dt * tangent.E,
        state.psi + dt * tangent.psi,
        state.H + dt * tangent.H,
        state.phi + dt * tangent.phi,
        state.t + dt,
    )


def _rk4(state, config, dt, background_g):
    k1 = rhs(state, config, background_g)
    k2 = rhs(_advance(state, k1, 0.5 * dt), config, background_g)
    k3 = rhs(_advance(state, k2, 0.5 * dt), config, background_g)
    k4 = rhs(_advance(state, k3, dt), config, background_g)
    incr = k1.add(k2, 2.0).add(k3, 2.0).add(k4, 1.0).scaled(1.0 / 6.0)
    return _advance(state, incr, dt), k1


class StepResult:
    def __init__(self, state, dt_used, dt_next, halvings):
        self.state = state
        self.dt_used = dt_used
        self.dt_next = dt_next
        self.halvings = halvings


def step(state, config, dt=None, background_g=None):
    """One classical RK4 step with optional adaptive halving.

    Halves dt when the CFL proxy ||gdot||_inf * dt exceeds cfl_safety, when
    the stepped metric leaves the SPD cone, or when an RHS evaluation
    produces non-finite values.  Applies the optional phi projection and
    re-orthonormalizes the frame on drift.
    """
    if dt is None:
        dt = config.dt
    halvings = 0
    while True:
        if dt < MIN_DT:
            raise StiffnessError(f"dt underflow ({dt:.3e} < {MIN_DT})")
        try:
            new_state, k1 = _rk4(state, config, dt, background_g)
            if config.adaptive and float(np.max(np.abs(k1.g))) * dt > config.cfl_safety:
                raise DivergenceError("CFL proxy exceeded")
            if not all(
                np.all(np.isfinite(a))
                for a in (new_state.g, new_state.psi, new_state.H, new_state.phi)
            ):
                raise DivergenceError("non-finite state after step")
            np.linalg.cholesky(new_state.g)  # SPD check
        except (DivergenceError, np.linalg.LinAlgError) as exc:
            if not config.adaptive:
                if isinstance(exc, np.linalg.LinAlgError):
                    raise GeometryError("metric left the SPD cone") from exc
                raise
            dt *= 0.5
            halvings += 1
            continue
        break

    if config.renormalize == "project-phi":
        mag = np.einsum(
            "...s,...s->...", np.conj(new_state.psi), new_state.psi
        ).real
        if np.any(mag <= 0):
            raise DivergenceError("spinor vanished; cannot project phi")
        new_state.phi = 0.5 * np.log(mag)
    if geometry.orthonormality_defect(new_state.E, new_state.g) > FRAME_DRIFT_TOL:
        new_state.E = geometry.reorthonormalize(new_state.E, new_state.g)
    return StepResult(new_state, dt, dt, halvings)


def run(state, config, record_fn=None, snapshot_fn=None):
    """Iterate ``step`` until t_end; returns (records, final_state).

    ``record_fn(state, dt)`` builds a diagnostics row (defaults to the
    diagnostics module's record); ``snapshot_fn(state, tag)`` is called at
    the start and end when provided.
    """
    from . import diagnostics

    config.validate(state.n, state.k)
    if record_fn is None:
        record_fn = lambda s, dt: diagnostics.compute_record(s, config, dt)  # noqa: E731
    background_g = state.g.copy() if config.gauge == "deturck" else None

    records = [record_fn(state, config.dt)]
    if snapshot_fn is not None:
        snapshot_fn(state, "initial")
    dt = config.dt
    nsteps = 0
    recorded_at = 0
    while state.t < config.t_end - 1e-15:
        dt = min(dt, config.t_end - state.t)
        result = step(state, config, dt=dt, background_g=background_g)
        state = result.state
        dt = result.dt_next
        nsteps += 1
        if config.monitor_cadence > 0 and nsteps % config.monitor_cadence == 0:
            records.append(record_fn(state, result.dt_used))
            recorded_at = nsteps
    if nsteps > recorded_at:
        records.append(record_fn(state, dt))
    if snapshot_fn is not None:
        snapshot_fn(state, "final")
    return records, state


def read_config(path):
    """Parse a flat ``key: value`` text file into (FlowConfig, extras).

    Keys matching FlowConfig fields populate the config; everything else is
    returned in the extras dict (scenario parameters, grids, seeds, ...).
    """
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if ":" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key: value'")
            key, _, val = line.partition(":")
            values[key.strip()] = val.strip()
    fields = {f.name: f.type for f in FlowConfig.__dataclass_fields__.values()}
    kwargs, extras = {}, {}
    for key, val in values.items():
        if key in fields:
            current = getattr(FlowConfig(), key)
            if isinstance(current, bool):
                kwargs[key] = val.lower() in ("1", "true", "on", "yes")
            elif isinstance(current, int):
                kwargs[key] = int(val)
            elif isinstance(current, float):
                kwargs[key] = float(val)
            else:
                kwargs[key] = val
        else:
            extras[key] = val
    return FlowConfig(**kwargs), extras

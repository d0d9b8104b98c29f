"""Module invariant suites behind ``spinorflux verify``.

Each suite returns a list of CheckResult rows; a suite passes iff every row
does.  The identity suite estimates observed convergence orders over a
dyadic grid list; everything else checks exact contracts or closed forms.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import clifford, diagnostics, exterior, flow, geometry, grid, scenarios, spin
from .errors import ConfigError

SUITES = ("algebra", "exterior", "geometry", "spin", "identities", "symbol",
          "scaling", "all")


@dataclass
class CheckResult:
    suite: str
    name: str
    value: float
    threshold: float
    passed: bool
    note: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] {self.suite:10s} {self.name:42s} "
                f"value={self.value:10.3e}  bound={self.threshold:9.2e}  {self.note}")


def _res(suite, name, value, threshold, note="", larger_ok=False):
    ok = value >= threshold if larger_ok else value <= threshold
    return CheckResult(suite, name, float(value), float(threshold), bool(ok), note)


def _order_window(suite, name, orders, target, width=0.2):
    order = orders[-1]
    ok = abs(order - target) <= width or abs(np.mean(orders) - target) <= width
    note = "orders " + ",".join(f"{o:.2f}" for o in orders)
    return CheckResult(suite, name, float(order), float(target), bool(ok), note)


# ---------------------------------------------------------------------------

def suite_algebra(rng=None):
    rng = rng or np.random.default_rng(0)
    out = []
    for n in (2, 3, 5, 6):
        basis = clifford.build_gamma(n)
        eye = np.eye(basis.dim_s)
        worst_acomm = 0.0
        worst_herm = 0.0
        worst_unit = 0.0
        for a in range(n):
            ga = basis.gamma[a]
            worst_herm = max(worst_herm, np.max(np.abs(ga - ga.conj().T)))
            worst_unit = max(worst_unit, np.max(np.abs(ga @ ga.conj().T - eye)))
            for b in range(n):
                acomm = basis.gamma[a] @ basis.gamma[b] + basis.gamma[b] @ basis.gamma[a]
                worst_acomm = max(
                    worst_acomm, np.max(np.abs(acomm - 2.0 * (a == b) * eye))
                )
        out.append(_res("algebra", f"anticommutator n={n}", worst_acomm, 1e-13))
        out.append(_res("algebra", f"hermitian+unitary n={n}", max(worst_herm, worst_unit), 1e-13))
    for n, k in ((2, 1), (3, 1), (5, 2), (6, 4), (5, 4), (6, 2)):
        basis = clifford.build_gamma(n)
        Hc = rng.standard_normal((exterior.num_components(n, k),))
        Hf = exterior.to_full(Hc, n, k)
        f1 = clifford.flux_endomorphism(basis, Hf, (1.0, 0.0), k)
        f2 = clifford.flux_endomorphism(basis, Hf, (0.0, 1.0), k)

        def defect(m, want_herm):
            d = m - np.conj(np.swapaxes(m, -1, -2))
            if not want_herm:
                d = m + np.conj(np.swapaxes(m, -1, -2))
            return np.max(np.abs(d))

        lam1_herm = (k - 1) % 4 in (0, 1)
        lam2_herm = (k + 1) % 4 in (0, 1)
        worst = max(defect(f1.full, lam1_herm), defect(f2.full, lam2_herm))
        out.append(
            _res("algebra", f"hermitian split (n,k)=({n},{k})", worst, 1e-13,
                 note=f"lam1 {'H' if lam1_herm else 'A'} lam2 {'H' if lam2_herm else 'A'}")
        )
    # act_form against an all-tuples brute force
    worst = 0.0
    for n in (2, 3, 4):
        basis = clifford.build_gamma(n)
        for p in range(0, min(n, 3) + 1):
            comps = rng.standard_normal((exterior.num_components(n, p),))
            psi = rng.standard_normal(basis.dim_s) + 1j * rng.standard_normal(basis.dim_s)
            fast = clifford.act_form(basis, comps, psi, p)
            full = exterior.to_full(comps, n, p)
            brute = np.zeros_like(psi)
            for idx in itertools.product(range(n), repeat=p):
                brute = brute + full[idx] * (basis.anti_product(idx) @ psi)
            worst = max(worst, np.max(np.abs(fast - brute)))
    out.append(_res("algebra", "act_form vs all-tuples brute force", worst, 1e-13))
    return out


def _random_spd_state(N, n, k, seed, amplitude=0.08, order=2):
    G = grid.Grid((N,) * n, order=order)
    basis = clifford.build_gamma(n)
    return scenarios.random_smooth(G, k, basis.dim_s, seed=seed, amplitude=amplitude)


def suite_exterior(rng=None):
    rng = rng or np.random.default_rng(1)
    out = []
    st = _random_spd_state(16, 2, 1, seed=4)
    G, n = st.grid, 2
    ginv, sqrtg = exterior.metric_inverse_and_density(st.g)
    f = rng.standard_normal(G.sizes + (1,))
    ddf = exterior.d(exterior.d(f, G, 0), G, 1)
    out.append(_res("exterior", "d(d f) = 0 (n=2)", np.max(np.abs(ddf)), 1e-13))
    alpha = rng.standard_normal(G.sizes + (1,))
    beta = rng.standard_normal(G.sizes + (2,))
    lhs = exterior.form_l2(exterior.d(alpha, G, 0), beta, st.g, G, 1, ginv, sqrtg)
    rhs = exterior.form_l2(alpha, exterior.codifferential(beta, st.g, G, 1, ginv, sqrtg),
                           st.g, G, 0, ginv, sqrtg)
    scale = max(1.0, abs(lhs))
    out.append(_res("exterior", "(d,d+) adjointness random SPD", abs(lhs - rhs) / scale, 1e-12))
    lap = exterior.hodge_laplacian(beta, st.g, G, 1, ginv, sqrtg)
    energy = exterior.form_l2(lap, beta, st.g, G, 1, ginv, sqrtg)
    out.append(_res("exterior", "laplacian PSD <box w, w> >= 0", -energy, 1e-12))
    for p in (1, 2):
        w = rng.standard_normal(G.sizes + (exterior.num_components(n, p),))
        ss = exterior.hodge_star(
            exterior.hodge_star(w, st.g, n, p, ginv, sqrtg), st.g, n, n - p, ginv, sqrtg
        )
        sign = (-1.0) ** (p * (n - p))
        out.append(_res("exterior", f"star involution p={p}", np.max(np.abs(ss - sign * w)), 1e-12))
    # conformal invariance of the mid-degree star
    xs = G.coordinates()
    conf = np.exp(2 * (0.2 * np.sin(xs[0]) + 0.1 * np.cos(xs[1])))
    gc = np.zeros(G.sizes + (2, 2)); gc[..., 0, 0] = conf; gc[..., 1, 1] = conf
    dx1 = np.zeros(G.sizes + (2,)); dx1[..., 0] = 1.0
    star = exterior.hodge_star(dx1, gc, 2, 1)
    want = np.zeros_like(dx1); want[..., 1] = 1.0
    out.append(_res("exterior", "conformal mid-degree star(dx1)=dx2", np.max(np.abs(star - want)), 1e-12))
    # odd-k symmetrized wedge vanishes identically
    a1 = rng.standard_normal(G.sizes + (2,))
    b1 = rng.standard_normal(G.sizes + (2,))
    sym = exterior.wedge(a1, b1, 2, 1, 1) + exterior.wedge(b1, a1, 2, 1, 1)
    out.append(_res("exterior", "odd-k wedge symmetrization = 0", np.max(np.abs(sym)), 0.0))
    # graded sign law on a bigger space
    n5 = 5
    a = rng.standard_normal((7, exterior.num_components(n5, 2)))
    b = rng.standard_normal((7, exterior.num_components(n5, 1)))
    s1 = exterior.wedge(a, b, n5, 2, 1)
    s2 = exterior.wedge(b, a, n5, 1, 2)
    out.append(_res("exterior", "graded commutativity (p,q)=(2,1)", np.max(np.abs(s1 - s2)), 1e-13))
    return out


def _conformal_metric(G, f):
    g = np.zeros(G.sizes + (G.n, G.n))
    e2f = np.exp(2 * f)
    for i in range(G.n):
        g[..., i, i] = e2f
    return g


def suite_geometry(grids=(16, 32, 64), rng=None):
    rng = rng or np.random.default_rng(2)
    out = []
    G = grid.Grid((12, 12))
    gflat = _conformal_metric(G, np.zeros(G.sizes))
    curv = geometry.curvature(gflat, G)
    out.append(_res("geometry", "flat curvature vanishes", np.max(np.abs(curv.riemann)), 0.0))
    out.append(_res("geometry", "flat christoffels vanish",
                    np.max(np.abs(geometry.christoffels(gflat, G))), 0.0))

    errs = []
    for N in grids:
        GN = grid.Grid((N, N))
        xs = GN.coordinates()
        f = 0.1 * np.sin(xs[0]) + 0.07 * np.cos(2 * xs[1])
        gc = _conformal_metric(GN, f)
        cv = geometry.curvature(gc, GN)
        lap = sum(GN.partial(GN.partial(f, j), j) for j in range(2))
        errs.append(np.max(np.abs(cv.scalar - (-2.0 * np.exp(-2 * f) * lap))))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
    out.append(_order_window("geometry", "conformal scalar curvature order", orders, 2.0))

    st = _random_spd_state(16, 2, 1, seed=9)
    Gs = st.grid
    E = st.E
    out.append(_res("geometry", "frame orthonormality",
                    geometry.orthonormality_defect(E, st.g), 1e-10))
    christ = geometry.christoffels(st.g, Gs)
    out.append(_res("geometry", "christoffel symmetry",
                    np.max(np.abs(christ - np.swapaxes(christ, -1, -2))), 0.0))
    # first Bianchi on the lowered tensor
    cv = geometry.curvature(st.g, Gs)
    rl = cv.riemann_lowered
    bianchi = rl + np.einsum("...jkil->...ijkl", rl) + np.einsum("...kijl->...ijkl", rl)
    out.append(_res("geometry", "first Bianchi residual", np.max(np.abs(bianchi)),
                    50.0 * max(Gs.spacing) ** 2, note="stencil-order"))
    # hessian trace vs Laplace-Beltrami
    xs = Gs.coordinates()
    fn = np.sin(xs[0]) + 0.3 * np.cos(xs[1] + xs[0])
    hess = geometry.hessian(fn, st.g, Gs, christ)
    ginv = np.linalg.inv(st.g)
    sqrtg = np.sqrt(np.linalg.det(st.g))
    tr = np.einsum("...ij,...ij->...", ginv, hess)
    V = np.einsum("...jk,...k->...j", ginv, Gs.gradient(fn))
    lb = Gs.divergence(V, weight=sqrtg)
    out.append(_res("geometry", "hessian trace vs Laplace-Beltrami",
                    np.max(np.abs(tr - lb)), 50.0 * max(Gs.spacing) ** 2,
                    note="stencil-order"))
    out.append(_res("geometry", "deturck X(g, g) = 0",
                    np.max(np.abs(geometry.deturck_vector(st.g, st.g, Gs))), 1e-12))
    X = np.zeros(Gs.sizes + (2,)); X[..., 0] = 1.0; X[..., 1] = -0.5
    Lg = geometry.lie_metric(X, _conformal_metric(Gs, np.zeros(Gs.sizes)), Gs)
    out.append(_res("geometry", "killing field of flat metric", np.max(np.abs(Lg)), 1e-13))
    return out


def suite_spin(rng=None):
    rng = rng or np.random.default_rng(3)
    out = []
    n = 2
    basis = clifford.build_gamma(n)
    G = grid.Grid((16, 16))
    st_flat = scenarios.flat_stationary(G, 1, basis.dim_s)
    christ = geometry.christoffels(st_flat.g, G)
    om = spin.spin_connection(st_flat.g, st_flat.E, christ, G)
    out.append(_res("spin", "flat spin connection vanishes", np.max(np.abs(om)), 0.0))
    st = _random_spd_state(16, 2, 1, seed=12)
    christ = geometry.christoffels(st.g, st.grid)
    om = spin.spin_connection(st.g, st.E, christ, st.grid)
    out.append(_res("spin", "omega antisymmetry exact",
                    np.max(np.abs(om + np.swapaxes(om, -1, -2))), 0.0))
    # metric compatibility at stencil order
    psi, chi = st.psi, np.roll(st.psi, 3, axis=0) * (1 + 0.2j)
    nab_p = spin.nabla_spinor(psi, om, st.E, basis, st.grid)
    nab_c = spin.nabla_spinor(chi, om, st.E, basis, st.grid)
    ip = np.einsum("...s,...s->...", np.conj(psi), chi)
    dip = np.einsum("...ja,...j->...a", st.E, st.grid.gradient(ip))
    sum_rule = np.einsum("...as,...s->...a", np.conj(nab_p), chi) + np.einsum(
        "...s,...as->...a", np.conj(psi), nab_c
    )
    out.append(_res("spin", "metric compatibility of <.,.>",
                    np.max(np.abs(dip - sum_rule)), 50.0 * max(st.grid.spacing) ** 2,
                    note="stencil-order"))
    # dirac plane wave symbol on the flat torus
    xs = G.coordinates()
    m = 3
    pw = np.zeros(G.sizes + (basis.dim_s,), dtype=complex)
    pw[..., 0] = np.exp(1j * m * xs[0])
    christf = geometry.christoffels(st_flat.g, G)
    omf = spin.spin_connection(st_flat.g, st_flat.E, christf, G)
    dpw = spin.dirac(spin.nabla_spinor(pw, omf, st_flat.E, basis, G), basis)
    h = G.spacing[0]
    want = 1j * (np.sin(m * h) / h) * np.einsum(
        "st,...t->...s", basis.gamma[0], pw
    )
    out.append(_res("spin", "dirac plane-wave discrete symbol",
                    np.max(np.abs(dpw - want)), 1e-12))
    # flat-exact skew-adjointness: <D psi, chi> = -<psi, D chi>
    psi_f = np.zeros_like(pw); psi_f[..., 0] = rng.standard_normal(G.sizes)
    psi_f[..., 1] = 1j * rng.standard_normal(G.sizes)
    chi_f = np.roll(psi_f, 5, axis=1) * (0.3 - 0.8j)
    Dp = spin.dirac(spin.nabla_spinor(psi_f, omf, st_flat.E, basis, G), basis)
    Dc = spin.dirac(spin.nabla_spinor(chi_f, omf, st_flat.E, basis, G), basis)
    ipg = lambda a, b: G.integrate(np.einsum("...s,...s->...", np.conj(a), b).real)  # noqa: E731
    out.append(_res("spin", "dirac skew-adjoint on flat torus",
                    abs(ipg(Dp, chi_f) + ipg(psi_f, Dc)), 1e-12,
                    note="Hermitian gammas make iD the self-adjoint one"))
    # flux laplacian adjointness on a curved metric with flux
    cfg = flow.FlowConfig(lambda1=0.7, lambda2=0.4, c=0.0)
    geo = flow.Geometry(st, cfg)
    L_p = spin.flux_laplacian(st.psi, geo.omega, st.E, basis, st.grid, st.g,
                              geo.flux, geo.sqrtg)
    chi2 = np.roll(st.psi, 2, axis=1) * (0.5 + 0.1j)
    nab_chi = spin.nabla_H(chi2, geo.omega, st.E, basis, st.grid, geo.flux)
    lhs = st.grid.integrate(
        np.einsum("...s,...s->...", np.conj(L_p), chi2).real, geo.sqrtg
    )
    rhs = st.grid.integrate(
        np.einsum("...as,...as->...", np.conj(geo.nabH), nab_chi).real, geo.sqrtg
    )
    out.append(_res("spin", "flux laplacian exact adjoint", abs(lhs - rhs) / max(1.0, abs(rhs)), 1e-12))
    energy = st.grid.integrate(
        np.einsum("...s,...s->...", np.conj(L_p), st.psi).real, geo.sqrtg
    )
    norm = st.grid.integrate(
        np.einsum("...as,...as->...", np.conj(geo.nabH), geo.nabH).real, geo.sqrtg
    )
    out.append(_res("spin", "flux laplacian energy identity",
                    abs(energy - norm) / max(1.0, norm), 1e-12))
    # bg transport closed form: g = Id, u = diag(alpha, 0)
    alpha = 0.8
    u = np.zeros(st_flat.g.shape); u[..., 0, 0] = alpha
    Es = spin.bg_transport(st_flat.g, u, st_flat.E, 1.0, G, steps=64)
    want = np.array([(1 + alpha) ** -0.5, 1.0])
    err = max(
        np.max(np.abs(Es[..., 0, 0] - want[0])), np.max(np.abs(Es[..., 1, 1] - want[1])),
        np.max(np.abs(Es[..., 0, 1])), np.max(np.abs(Es[..., 1, 0])),
    )
    out.append(_res("spin", "bg transport closed form", err, 1e-9))
    u2 = 0.1 * diagnostics._direction_field(st, seed=5)
    Es2 = spin.bg_transport(st.g, u2, st.E, 1.0, st.grid, steps=100)
    out.append(_res("spin", "bg transport orthonormality drift",
                    geometry.orthonormality_defect(Es2, st.g + u2), 1e-10))
    out.append(_res("spin", "bochner flat-exact",
                    diagnostics.bochner_residual(st_flat.g, pw, G), 1e-12))
    return out


def _identity_factory(name, n, k, lam, c, base_seed=21):
    """state_factory(N) for the stencil-class refinement tests."""

    def factory(N):
        G = grid.Grid((N,) * n)
        basis = clifford.build_gamma(n)
        st = scenarios.random_smooth(G, k, basis.dim_s, seed=base_seed, amplitude=0.06)
        cfg = flow.FlowConfig(lambda1=lam[0], lambda2=lam[1], c=c)
        return st, cfg

    return factory


def suite_identities(grids=(16, 32, 64), rng=None):
    out = []
    # exact class on a random n=2 state and the n=5 smoke grid
    for (n, k, N, amp) in ((2, 1, 32, 0.08), (5, 2, 6, 0.04)):
        G = grid.Grid((N,) * n)
        basis = clifford.build_gamma(n)
        st = scenarios.random_smooth(G, k, basis.dim_s, seed=31, amplitude=amp)
        c = 0.5 if 3 * k == n + 1 else 0.0
        cfg = flow.FlowConfig(lambda1=0.6, lambda2=0.35, c=c, c1=1.0,
                              c2=0.5 if n == 2 else 1.0)
        for name in ("trace", "h_energy", "l_pairing", "scaling"):
            rep = diagnostics.check_identity(name, st, cfg)
            out.append(_res("identities", f"{name} (n={n}, {N}^{n})",
                            rep["residual"] / max(1.0, rep["detail"].get("scale", 1.0)),
                            diagnostics.EXACT_TOL, note="exact class"))
    # stencil class with refinement in n=2
    base = grids[0]
    factories = {
        "q_ricci": _identity_factory("q_ricci", 2, 1, (0.6, 0.35), 0.5),
        "bochner": _identity_factory("bochner", 2, 1, (0.0, 0.0), 0.0),
        "variation_rm": _identity_factory("variation_rm", 2, 1, (0.0, 0.0), 0.0),
        "variation_fluxconn": _identity_factory("variation_fluxconn", 2, 1, (0.7, 0.45), 0.5),
        "normalization_ode": _identity_factory("normalization_ode", 2, 1, (0.5, 0.3), 0.5),
    }
    for name, factory in factories.items():
        st, cfg = factory(base)
        rep = diagnostics.check_identity(name, st, cfg, state_factory=factory)
        out.append(_order_window("identities", f"{name} observed order",
                                 rep["detail"]["orders"], 2.0))
    return out


def suite_symbol(samples=1000, rng=None):
    rng = rng or np.random.default_rng(5)
    out = []
    worst = 0.0
    for n in (2, 3, 5):
        basis = clifford.build_gamma(n)
        ds = basis.dim_s
        per = samples // 3
        for _ in range(per):
            psi = rng.standard_normal(ds) + 1j * rng.standard_normal(ds)
            phi = float(np.log(np.linalg.norm(psi)))
            xi = rng.standard_normal(n)
            op = diagnostics.symbol_operator(basis, psi, phi, xi, gauged=True)
            u = rng.standard_normal((n, n)); u = 0.5 * (u + u.T)
            sigma = rng.standard_normal(ds) + 1j * rng.standard_normal(ds)
            got = op.pairing(u, sigma)
            want = op.printed_pairing(u, sigma)
            worst = max(worst, abs(got - want) / max(1.0, abs(want)))
    out.append(_res("symbol", f"gauged pairing vs printed form ({samples} samples)",
                    worst, 1e-12))
    # ungauged: PSD + kernel, plus the explicit Lie-shaped annihilated pair
    for n in (2, 3, 5):
        basis = clifford.build_gamma(n)
        ds = basis.dim_s
        psi = rng.standard_normal(ds) + 1j * rng.standard_normal(ds)
        phi = float(np.log(np.linalg.norm(psi)))
        xi = rng.standard_normal(n); xi /= np.linalg.norm(xi)
        op = diagnostics.symbol_operator(basis, psi, phi, xi, gauged=False)
        ev = op.spectrum()
        out.append(_res("symbol", f"ungauged PSD n={n} (min eig)", -float(ev[0]), 1e-10))
        kernel_dim = int(np.sum(np.abs(ev) < 1e-10))
        out.append(_res("symbol", f"ungauged kernel dim n={n}", kernel_dim, 1,
                        larger_ok=True, note="degenerate directions"))
        v = rng.standard_normal(n)
        v -= np.dot(v, xi) * xi
        v /= np.linalg.norm(v)
        u0, s0 = diagnostics.lie_shaped_kernel_pair(basis, psi, xi, v)
        Gu, Ss = op.apply(u0, s0)
        q = math.exp(2 * phi) * np.sum(Gu * u0) + np.real(np.vdot(Ss, s0))
        out.append(_res("symbol", f"lie-shaped pair annihilated n={n}", abs(q), 1e-10))
    # u = 0 -> sigma |-> |xi|^2 sigma with eigenvalue one
    basis = clifford.build_gamma(3)
    psi = rng.standard_normal(basis.dim_s) + 1j * rng.standard_normal(basis.dim_s)
    phi = float(np.log(np.linalg.norm(psi)))
    op = diagnostics.symbol_operator(basis, psi, phi, np.array([0.0, 1.0, 0.0]), False)
    sigma = rng.standard_normal(basis.dim_s) + 1j * rng.standard_normal(basis.dim_s)
    _, Ss = op.apply(np.zeros((3, 3)), sigma)
    out.append(_res("symbol", "u=0 spinor block is the identity",
                    np.max(np.abs(Ss - sigma)), 1e-13))
    return out


def suite_scaling(rng=None):
    out = []
    st = _random_spd_state(12, 2, 1, seed=8)
    bg = st.g + 0.05 * diagnostics._direction_field(st, seed=99)
    for gauge in ("none", "deturck", "hw"):
        for variant in ("dynamic-phi", "fixed-phi"):
            cfg = flow.FlowConfig(lambda1=0.6, lambda2=0.35, c=0.4,
                                  variant=variant, gauge=gauge)
            rep = diagnostics.check_identity(
                "scaling", st, cfg,
                background_g=bg if gauge == "deturck" else None,
            )
            out.append(_res("scaling", f"{gauge}/{variant} sigma in {{1/2, 2}}",
                            rep["residual"], 1e-12))
    return out


def run_suite(name, grids=(16, 32, 64), seed=0):
    rng = np.random.default_rng(seed)
    dispatch = {
        "algebra": lambda: suite_algebra(rng),
        "exterior": lambda: suite_exterior(rng),
        "geometry": lambda: suite_geometry(grids, rng),
        "spin": lambda: suite_spin(rng),
        "identities": lambda: suite_identities(grids, rng),
        "symbol": lambda: suite_symbol(1000, rng),
        "scaling": lambda: suite_scaling(rng),
    }
    if name == "all":
        results = []
        for key in dispatch:
            results.extend(dispatch[key]())
        return results
    if name not in dispatch:
        raise ConfigError(f"unknown suite {name!r}; choose from {SUITES}")
    return dispatch[name]()

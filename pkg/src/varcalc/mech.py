"""Finite-dimensional Hamiltonian mechanics: flows, the SO(3) momentum map,
Noether-Souriau-Smale conservation, and symplectic reduction to the radial
system.  Double precision with explicit tolerances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chart import VarcalcError


class DimensionMismatch(VarcalcError):
    pass


class OriginSingularity(VarcalcError):
    pass


class NonFiniteState(VarcalcError):
    pass


# tolerances used across the module and the acceptance suite
TOL = {
    "invariance_check": 1e-12,
    "equivariance": 1e-12,
    "J_drift": 1e-6,
    "casimir_drift": 2e-6,
    "reduction_commute": 1e-5,
}


@dataclass
class PhasePoint:
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p))):
            raise NonFiniteState("phase point has non-finite entries")


def so3_generators():
    e = np.zeros((3, 3, 3))
    for a in range(3):
        for i in range(3):
            for j in range(3):
                e[a, i, j] = _eps(a, i, j)
    return [-e[a] for a in range(3)]    # (L_a)_{ij} = -eps_{aij}: L_a x = e_a x x


def _eps(i, j, k):
    return ((i - j) * (j - k) * (k - i)) / 2


class MechSystem:
    """H(q, p) = |p|^2 / 2m + V(|q|), rotation invariant by construction
    of the potential; invariance is still spot-checked numerically."""

    def __init__(self, V, dV, mass=1.0, dim=3, rng=None, checks=50):
        self.V = V
        self.dV = dV
        self.mass = float(mass)
        self.dim = dim
        if dim != 3:
            raise DimensionMismatch("SO(3) reduction needs dimension 3")
        rng = rng or np.random.default_rng(0)
        for _ in range(checks):
            q = rng.normal(size=3)
            p = rng.normal(size=3)
            O = _random_rotation(rng)
            h1 = self.H(PhasePoint(q, p))
            h2 = self.H(PhasePoint(O @ q, O @ p))
            if abs(h1 - h2) > TOL["invariance_check"] * max(1.0, abs(h1)):
                raise VarcalcError("Hamiltonian is not rotation invariant")

    def H(self, state: PhasePoint):
        r = np.linalg.norm(state.q)
        return float(state.p @ state.p) / (2 * self.mass) + self.V(r)

    def grad_q(self, q):
        r = np.linalg.norm(q)
        if r == 0:
            raise OriginSingularity("potential gradient at the origin")
        return self.dV(r) * q / r

    def rhs(self, q, p):
        return p / self.mass, -self.grad_q(q)


def _random_rotation(rng):
    A = rng.normal(size=(3, 3))
    Q, R = np.linalg.qr(A)
    Q = Q @ np.diag(np.sign(np.diag(R)))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def momentum(state: PhasePoint):
    """Angular momentum J = p x q (the momentum map of the cotangent lift)."""
    if state.q.shape != (3,):
        raise DimensionMismatch("momentum map needs dimension 3")
    return np.cross(state.p, state.q)


def casimir(state: PhasePoint):
    """l^2 = |p x q|^2, the Casimir of the reduced Poisson structure."""
    if state.q.shape != (3,):
        raise DimensionMismatch("casimir needs dimension 3")
    J = momentum(state)
    return float(J @ J)


def kks_pairing(mu, xi, eta):
    """<mu, [xi, eta]> under so(3) ~ R^3 (matrix commutator = cross product)."""
    mu = np.asarray(mu, dtype=float)
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return float(mu @ np.cross(xi, eta))


def flow(system: MechSystem, state: PhasePoint, t_final, dt, integrator="rk4"):
    """Integrate Hamilton's equations; samples at step boundaries."""
    if dt <= 0:
        raise VarcalcError("dt must be positive")
    steps = int(round(t_final / dt))
    q = state.q.copy()
    p = state.p.copy()
    ts = [0.0]
    qs = [q.copy()]
    ps = [p.copy()]
    m = system.mass
    if integrator == "rk4":
        for k in range(steps):
            q, p = _rk4_step(system, q, p, dt)
            if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
                raise NonFiniteState(f"blow-up at step {k}")
            ts.append((k + 1) * dt)
            qs.append(q.copy())
            ps.append(p.copy())
    elif integrator == "leapfrog":
        for k in range(steps):
            p = p - 0.5 * dt * system.grad_q(q)
            q = q + dt * p / m
            p = p - 0.5 * dt * system.grad_q(q)
            if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
                raise NonFiniteState(f"blow-up at step {k}")
            ts.append((k + 1) * dt)
            qs.append(q.copy())
            ps.append(p.copy())
    else:
        raise VarcalcError(f"unknown integrator {integrator!r}")
    return Trajectory(np.array(ts), np.array(qs), np.array(ps))


def _rk4_step(system, q, p, dt):
    def f(qq, pp):
        dq, dp = system.rhs(qq, pp)
        return dq, dp
    k1q, k1p = f(q, p)
    k2q, k2p = f(q + dt / 2 * k1q, p + dt / 2 * k1p)
    k3q, k3p = f(q + dt / 2 * k2q, p + dt / 2 * k2p)
    k4q, k4p = f(q + dt * k3q, p + dt * k3p)
    return (q + dt / 6 * (k1q + 2 * k2q + 2 * k3q + k4q),
            p + dt / 6 * (k1p + 2 * k2p + 2 * k3p + k4p))


@dataclass
class Trajectory:
    t: np.ndarray
    q: np.ndarray
    p: np.ndarray

    def states(self):
        for k in range(len(self.t)):
            yield PhasePoint(self.q[k], self.p[k])

    def to_csv(self):
        dim = self.q.shape[1]
        header = "t," + ",".join(f"q{i}" for i in range(dim)) \
            + "," + ",".join(f"p{i}" for i in range(dim))
        lines = [header]
        for k in range(len(self.t)):
            row = [f"{self.t[k]:.12g}"]
            row += [f"{x:.15g}" for x in self.q[k]]
            row += [f"{x:.15g}" for x in self.p[k]]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def check_conservation(system: MechSystem, traj: Trajectory):
    """Max drifts of the momentum map components, H, and the Casimir."""
    J0 = momentum(PhasePoint(traj.q[0], traj.p[0]))
    H0 = system.H(PhasePoint(traj.q[0], traj.p[0]))
    l0 = float(J0 @ J0)
    jd = 0.0
    hd = 0.0
    cd = 0.0
    for k in range(len(traj.t)):
        st = PhasePoint(traj.q[k], traj.p[k])
        J = momentum(st)
        jd = max(jd, float(np.max(np.abs(J - J0))))
        hd = max(hd, abs(system.H(st) - H0))
        cd = max(cd, abs(float(J @ J) - l0))
    return {"J_drift": jd, "H_drift": hd, "casimir_drift": cd}


@dataclass
class ReducedState:
    r: float
    p_r: float
    ell: float


def reduce_so3(state: PhasePoint):
    """(r, p_r, l): the invariants labelling the SO(3) orbit of the state.

    l = 0 states sit in the singular stratum T*R/Z_2; they are reported,
    not charted."""
    r = float(np.linalg.norm(state.q))
    if r == 0:
        raise OriginSingularity("configuration at the origin")
    p_r = float(state.p @ state.q) / r
    ell = float(np.linalg.norm(momentum(state)))
    return ReducedState(r=r, p_r=p_r, ell=ell)


def reduced_flow(system: MechSystem, red: ReducedState, t_final, dt):
    """Radial dynamics at fixed Casimir:
    r' = p_r / m,  p_r' = -V'(r) + l^2 / (m r^3)."""
    if red.ell <= 0:
        raise OriginSingularity("reduced flow needs l > 0")
    steps = int(round(t_final / dt))
    m = system.mass
    r, pr = red.r, red.p_r
    ts = [0.0]
    rs = [r]
    prs = [pr]
    for k in range(steps):
        def f(rr, pp):
            if rr <= 0:
                raise OriginSingularity("radial coordinate reached zero")
            return pp / m, -system.dV(rr) + red.ell ** 2 / (m * rr ** 3)
        k1r, k1p = f(r, pr)
        k2r, k2p = f(r + dt / 2 * k1r, pr + dt / 2 * k1p)
        k3r, k3p = f(r + dt / 2 * k2r, pr + dt / 2 * k2p)
        k4r, k4p = f(r + dt * k3r, pr + dt * k3p)
        r = r + dt / 6 * (k1r + 2 * k2r + 2 * k3r + k4r)
        pr = pr + dt / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
        ts.append((k + 1) * dt)
        rs.append(r)
        prs.append(pr)
    return np.array(ts), np.array(rs), np.array(prs)


def kepler_system(mass=1.0):
    return MechSystem(V=lambda r: -1.0 / r, dV=lambda r: 1.0 / r ** 2, mass=mass)


def harmonic_system(mass=1.0):
    return MechSystem(V=lambda r: 0.5 * r ** 2, dV=lambda r: r, mass=mass)


def free_system(mass=1.0):
    return MechSystem(V=lambda r: 0.0, dV=lambda r: 0.0, mass=mass)


def reduction_commutes(system, state, t_final, dt):
    """Max |(r, p_r) via reduce(flow) - via reduced_flow(reduce)|."""
    traj = flow(system, state, t_final, dt)
    red0 = reduce_so3(state)
    ts, rs, prs = reduced_flow(system, red0, t_final, dt)
    worst = 0.0
    for k in range(len(traj.t)):
        red = reduce_so3(PhasePoint(traj.q[k], traj.p[k]))
        worst = max(worst, abs(red.r - rs[k]), abs(red.p_r - prs[k]))
    return worst

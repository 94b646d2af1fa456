"""The repeated bidding game between clients and the AP, and a direct solver
for the system-wide utility maximization it is meant to reach.

Each round the AP turns bids into delivery ratios (analytically, or by
running WT for a while), every client prices its service as
``psi = rho / q`` and moves its bid part of the way toward its best
response. ``solve_system`` attacks the same optimum head-on with a
log-barrier Newton method, so the two can be checked against each other.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import SystemConfig, all_idle_times, ids_of
from .policy_limit import KKTCertificate, KKTReport, kkt_residuals, solve_access_point
from .simulator import RngSpec, WeightedTransmission, run_simulation
from .utility import client_best_response, total_utility

# empirical delivery ratio substituted for zero before pricing
SIM_Q_FLOOR = 0.001


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimulationBackend:
    """Delivery ratios measured by running WT for ``periods`` periods per round.

    Round k draws from the independent stream ``rng.child(k)``. By default
    the AP runs one continuous WT schedule whose slot counters carry over
    from round to round, and each client reports its running delivery ratio
    since the start of the game (``observe="cumulative"``), its best estimate
    of the long-term ratio. ``carry_counters=False`` restarts WT from zero
    every round; ``observe="window"`` reports only the latest round.
    """

    periods: int
    rng: RngSpec | int = 0
    carry_counters: bool = True
    observe: str = "cumulative"

    def __post_init__(self):
        if self.periods < 1:
            raise ValueError("periods must be at least 1")
        if self.observe not in ("cumulative", "window"):
            raise ValueError(f"observe must be 'cumulative' or 'window', got {self.observe!r}")

    @property
    def rng_spec(self) -> RngSpec:
        return self.rng if isinstance(self.rng, RngSpec) else RngSpec(int(self.rng))


class _SimSession:
    # running state of one simulation-backed game

    def __init__(self, backend: SimulationBackend, cfg: SystemConfig):
        self.backend = backend
        self.cfg = cfg
        self.u = np.zeros(cfg.n, dtype=np.int64)
        self.delivered = np.zeros(cfg.n, dtype=np.int64)
        self.elapsed = 0

    def respond(self, rho, round_index):
        b = self.backend
        stats = run_simulation(
            WeightedTransmission(rho),
            self.cfg,
            b.periods,
            b.rng_spec.child(round_index),
            initial_u=self.u if b.carry_counters else None,
            start_period=self.elapsed,
        )
        self.u = stats.u.copy()
        self.delivered += stats.deliveries
        self.elapsed += b.periods
        q = self.delivered / self.elapsed if b.observe == "cumulative" else stats.empirical_q
        return q, stats.deliveries.copy()


@dataclass
class BiddingState:
    iteration: int
    rho: np.ndarray
    q: np.ndarray
    psi: np.ndarray
    total_utility: float
    deliveries: np.ndarray | None = None


@dataclass
class BiddingTrace:
    states: list[BiddingState] = field(default_factory=list)
    residuals: list[float] = field(default_factory=list)
    converged: bool = False

    @property
    def final(self) -> BiddingState:
        return self.states[-1]

    @property
    def status(self) -> str:
        return "converged" if self.converged else "no convergence"


def _ap_response(rho, cfg, backend, round_index):
    if backend == "analytic":
        q, _ = solve_access_point(rho, cfg)
        return q, None
    if isinstance(backend, _SimSession):
        return backend.respond(rho, round_index)
    raise ValueError(f"unknown AP backend {backend!r}")


def best_responses(psi, cfg: SystemConfig, tol: float = 1e-10) -> np.ndarray:
    return np.array([client_best_response(float(s), c.utility, tol).rho_star for s, c in zip(psi, cfg.clients)])


def run_bidding_game(
    cfg: SystemConfig,
    alpha: float = 0.5,
    max_iters: int = 500,
    fp_tol: float = 1e-8,
    ap_backend="analytic",
    br_tol: float = 1e-10,
) -> BiddingTrace:
    """Iterate bids until the largest bid change drops below ``fp_tol``.

    ``ap_backend`` is ``"analytic"`` or a :class:`SimulationBackend`. Each
    recorded state holds the bids announced in that round and the delivery
    ratios the clients observed in answer (plus that round's delivery counts
    under the simulation backend); ``residuals[k]`` is the bid change that followed.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if any(c.utility is None for c in cfg.clients):
        raise ValueError("every client needs a utility function")
    utilities = cfg.utilities
    rho = cfg.initial_bids
    trace = BiddingTrace()
    if isinstance(ap_backend, SimulationBackend):
        ap_backend = _SimSession(ap_backend, cfg)
    for k in range(max_iters):
        q, deliveries = _ap_response(rho, cfg, ap_backend, k)
        psi = rho / np.maximum(q, SIM_Q_FLOOR if deliveries is not None else 0.0)
        trace.states.append(BiddingState(k, rho, q, psi, total_utility(q, utilities), deliveries))
        rho_new = (1 - alpha) * rho + alpha * best_responses(psi, cfg, br_tol)
        residual = float(np.max(np.abs(rho_new - rho))) if cfg.n else 0.0
        trace.residuals.append(residual)
        rho = rho_new
        if residual < fp_tol:
            trace.converged = True
            break
    return trace


def fixed_point_residual(state: BiddingState, cfg: SystemConfig, tol: float = 1e-10) -> float:
    """Largest gap between a client's bid and its best response at the state's prices."""
    if cfg.n == 0:
        return 0.0
    return float(np.max(np.abs(best_responses(state.psi, cfg, tol) - state.rho)))


def system_certificate_from_game(state: BiddingState, cfg: SystemConfig) -> KKTCertificate:
    """SYSTEM multipliers assembled from a game state: lambda = zeta, nu = psi * xi.

    Bids stay positive under the damped update, so each client's multiplier
    xi on rho >= 0 is zero and so is nu.
    """
    _, cert = solve_access_point(state.rho, cfg)
    return KKTCertificate(zeta=dict(cert.zeta), mu=np.zeros(cfg.n), context="system")


def _constraint_matrix(cfg: SystemConfig) -> tuple[np.ndarray, np.ndarray, list[frozenset[int]]]:
    n = cfg.n
    masks = np.arange(1, 1 << n)
    members = (masks[:, None] >> np.arange(n)) & 1
    a = members / cfg.p
    c = cfg.tau - all_idle_times(cfg)[1:]
    return a, c, [ids_of(int(m)) for m in masks]


def system_objective(q, cfg: SystemConfig) -> tuple[float, np.ndarray, np.ndarray]:
    """Negated total utility with its gradient and (diagonal) Hessian."""
    utilities = cfg.utilities
    f = -sum(float(u.value(x)) for u, x in zip(utilities, q))
    g = -np.array([float(u.derivative(x)) for u, x in zip(utilities, q)])
    h = -np.array([float(u.second_derivative(x)) for u, x in zip(utilities, q)])
    return f, g, h


def solve_system(cfg: SystemConfig, tol: float = 1e-9, max_newton: int = 200) -> tuple[np.ndarray, KKTCertificate]:
    """Maximize total utility over the feasible region.

    Two stages: a log-barrier Newton method (minimizing
    t * (-sum U) - sum log(slack_S) - sum log(q) for t up to 1e8) locates the
    optimum and its active constraints; Newton's method on the KKT equations
    of that active set then pins q and the multipliers lambda_S to machine
    precision. The active set is repaired (dropping negative multipliers,
    adding violated constraints) until the certificate checks out to ``tol``.
    """
    if cfg.n > 8:
        raise ValueError("solve_system is an oracle for N <= 8")
    if any(c.utility is None for c in cfg.clients):
        raise ValueError("every client needs a utility function")
    n = cfg.n
    if n == 0:
        return np.zeros(0), KKTCertificate({}, np.zeros(0), context="system")
    a, c, subsets = _constraint_matrix(cfg)

    q, t = _barrier(a, c, cfg, max_newton)
    s = c - a @ q
    barrier_lam = 1.0 / (t * s)
    active = barrier_lam > s
    for _ in range(2 * len(c)):
        q_new, lam, resid = _polish(q, barrier_lam, active, a, c, cfg)
        s_new = c - a @ q_new
        weakest = int(np.argmin(np.where(active, lam, np.inf)))
        worst_slack = int(np.argmin(s_new))
        if resid > tol or (active.any() and lam[weakest] < -tol):
            # inconsistent (dependent rows) or wrongly active
            active[weakest] = False
        elif s_new[worst_slack] < -tol * max(1.0, c[worst_slack]) and not active[worst_slack]:
            active[worst_slack] = True
        else:
            q = q_new
            break
    else:
        raise SolverError("active-set repair did not settle")

    lam = np.maximum(lam, 0.0)
    cert = KKTCertificate(zeta=dict(zip(subsets, lam.tolist())), mu=np.zeros(n), context="system")
    report = verify_kkt_system(q, cert, cfg, tol)
    if not report:
        raise SolverError("; ".join(report.failures))
    return q, cert


def _barrier(a, c, cfg, max_newton, t_final=1e8):
    n = cfg.n
    q = np.full(n, 0.5 * c.min() / n) * cfg.p
    t = 1.0
    # steps follow the damped-Newton rule (length 1 / (1 + decrement));
    # halving only restores strict feasibility
    while True:
        for _ in range(max_newton):
            s = c - a @ q
            _, g, h = system_objective(q, cfg)
            grad = t * g + a.T @ (1.0 / s) - 1.0 / q
            hess = np.diag(t * h + 1.0 / q**2) + a.T @ (a / s[:, None] ** 2)
            step = -np.linalg.solve(hess, grad)
            decrement = float(np.sqrt(max(-grad @ step, 0.0)))
            if decrement < 1e-6:
                break
            step_len = 1.0 if decrement < 0.5 else 1.0 / (1.0 + decrement)
            while np.any(c - a @ (q + step_len * step) <= 0) or np.any(q + step_len * step <= 0):
                step_len *= 0.5
            q = q + step_len * step
        else:
            raise SolverError(f"barrier Newton iterations did not converge at t={t:g}")
        if t >= t_final:
            return q, t
        t = min(t * 10.0, t_final)


def _polish(q, lam0, active, a, c, cfg, iters=50):
    # Newton on: U'(q) = A_act^T lam_act, A_act q = c_act
    q = q.copy()
    lam = np.where(active, lam0, 0.0)
    rows = a[active]
    k = len(rows)
    n = cfg.n
    for _ in range(iters):
        _, g, h = system_objective(q, cfg)
        resid = np.concatenate([g + rows.T @ lam[active], rows @ q - c[active]])
        jac = np.zeros((n + k, n + k))
        jac[:n, :n] = np.diag(h)
        jac[:n, n:] = rows.T
        jac[n:, :n] = rows
        step = np.linalg.lstsq(jac, -resid, rcond=None)[0]
        q_next = q + step[:n]
        if np.any(q_next <= 0):
            q_next = np.maximum(q_next, 0.5 * q)
        lam[active] += step[n:]
        done = np.max(np.abs(q_next - q)) <= 1e-15 * max(1.0, np.max(np.abs(q)))
        q = q_next
        if done:
            break
    _, g, _ = system_objective(q, cfg)
    resid = np.concatenate([(g + rows.T @ lam[active]) / np.maximum(1.0, np.abs(g)), rows @ q - c[active]])
    return q, lam, float(np.max(np.abs(resid)))


def verify_kkt_system(q, cert: KKTCertificate, cfg: SystemConfig, tol: float | None = None) -> KKTReport:
    tol = cfg.solver_tol if tol is None else tol
    q = np.asarray(q, dtype=float)
    gradient = np.array([float(c.utility.derivative(x)) for c, x in zip(cfg.clients, q)])
    return kkt_residuals(gradient, q, cert, cfg, tol)

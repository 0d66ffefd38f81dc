"""Built-in experiment instances and studies.

Two families ship with the package:

* a scalar bilinear game over balls with one coupled inequality, the
  smallest instance that separates converging primal-dual schemes from
  cycling simultaneous gradient play;

* a network-flow interdiction game: an adversary spends a congestion budget
  on edges while the operator routes demand at minimum cost, the two coupled
  through shared edge capacities.

The interdiction game is stated as  max over y of  min over x, so the
library instance negates the objective and swaps roles: the library x is the
adversary allocation, the library y is the flow, and the quadratic routing
cost makes the inner problem strongly concave after negation.  The saddle
value changes sign under this mapping; the attack metrics below work on the
original orientation throughout.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .model import CouplingConstraints, MinimaxProblem, SmoothFunction, lagrangian_grads
from .linalg import spectral_norm
from .pdapg import PdapgParams, StronglyConcaveRegime, pdapg_solve
from .prox import ZeroFunction
from .stationarity import grad_G
from .sets import (
    AffineSubspace,
    Ball,
    Box,
    DykstraIntersection,
    Sense,
    _as1d,
)
from .trace import IterateState, SolveResult, SolveTrace, TraceRow

Array = np.ndarray


# ---------------------------------------------------------------------------
# bilinear game


def gen_bilinear(seed: int) -> MinimaxProblem:
    """Scalar game x*y over [-2, 2]^2 with one random inactive LE row.

    The row a x + b y <= 2a + 2b holds everywhere on the feasible box, so the
    origin is the unique stationary point and the instance isolates pure
    saddle dynamics from multiplier effects.
    """
    rng = np.random.default_rng(seed)
    a = float(rng.uniform(0.0, 2.0))
    b = float(rng.uniform(0.0, 2.0))
    while a == 0.0 and b == 0.0:  # degenerate row would make c = 0
        a = float(rng.uniform(0.0, 2.0))
        b = float(rng.uniform(0.0, 2.0))
    c = 2.0 * a + 2.0 * b
    f = SmoothFunction(
        value=lambda x, y: float(x[0] * y[0]),
        grad_x=lambda x, y: np.asarray(y, dtype=float).copy(),
        grad_y=lambda x, y: np.asarray(x, dtype=float).copy(),
        lipschitz_L=1.0,
        strong_concavity_mu=0.0,
    )
    return MinimaxProblem(
        f=f,
        h=ZeroFunction(),
        g=ZeroFunction(),
        constraints=CouplingConstraints(A=[[a]], B=[[b]], c=[c], senses=(Sense.LE,)),
        set_X=Ball([0.0], 2.0),
        set_Y=Ball([0.0], 2.0),
        linear_in_y=True,
        meta={"name": "bilinear", "seed": seed, "a": a, "b": b, "c": c,
              "init": (np.array([1.0]), np.array([1.0]), np.array([0.0]))},
    )


# ---------------------------------------------------------------------------
# smooth quadratic benchmark, nonconvex in x and strongly concave in y


def _quadratic_problem(Q, P, mu, A, B, c, init, name, seed=None) -> MinimaxProblem:
    Q = np.asarray(Q, dtype=float)
    P = np.asarray(P, dtype=float)
    # smoothness constant of the pair gradient = norm of the joint Hessian
    hess = np.block([[Q, P], [P.T, -mu * np.eye(P.shape[1])]])
    L = 1.05 * spectral_norm(hess)
    f = SmoothFunction(
        value=lambda x, y: float(0.5 * x @ Q @ x + x @ P @ y - 0.5 * mu * (y @ y)),
        grad_x=lambda x, y: Q @ x + P @ y,
        grad_y=lambda x, y: P.T @ x - mu * y,
        lipschitz_L=float(L),
        strong_concavity_mu=float(mu),
    )
    meta = {"name": name, "init": init}
    if seed is not None:
        meta["seed"] = seed
    return MinimaxProblem(
        f=f,
        h=ZeroFunction(),
        g=ZeroFunction(),
        constraints=CouplingConstraints(A=A, B=B, c=c, senses=(Sense.LE,) * len(c)),
        set_X=Ball(np.zeros(Q.shape[0]), 2.0),
        set_Y=Ball(np.zeros(P.shape[1]), 2.0),
        meta=meta,
    )


def make_ncsc_quadratic() -> MinimaxProblem:
    """Fixed 2x2 benchmark: indefinite in x, strongly concave in y."""
    return _quadratic_problem(
        Q=[[1.0, 0.2], [0.2, -0.6]],
        P=[[0.25, -0.1], [0.05, 0.2]],
        mu=1.0,
        A=[[0.3, 0.2]],
        B=[[0.25, -0.15]],
        c=[0.2],
        init=(np.array([1.5, 0.5]), np.array([-1.0, 1.0]), np.array([0.0])),
        name="ncsc_quad",
    )


def make_random_ncsc(seed: int) -> MinimaxProblem:
    """Random instance of the same shape, for property tests."""
    rng = np.random.default_rng(seed)
    S = rng.uniform(-1.0, 1.0, (2, 2))
    Q = 0.5 * (S + S.T)
    P = rng.uniform(-0.3, 0.3, (2, 2))
    A = rng.uniform(-0.5, 0.5, (1, 2))
    B = rng.uniform(-0.5, 0.5, (1, 2))
    c = [float(rng.uniform(0.1, 0.6))]
    init = (
        rng.uniform(-1.5, 1.5, 2),
        rng.uniform(-1.5, 1.5, 2),
        np.array([0.0]),
    )
    return _quadratic_problem(Q, P, 1.0, A, B, c, init, "random_ncsc", seed=seed)


# ---------------------------------------------------------------------------
# flow networks


@dataclass(frozen=True)
class FlowNetwork:
    """Directed network with parallel edges allowed."""

    n_nodes: int
    edges: tuple[tuple[int, int], ...]
    capacities: Array
    costs: Array
    source: int = 0
    sink: int = -1

    def __post_init__(self):
        caps = _as1d(self.capacities)
        costs = _as1d(self.costs)
        if len(self.edges) != caps.size or caps.size != costs.size:
            raise ValueError("edges, capacities and costs disagree in length")
        if np.any(caps < 0) or np.any(costs < 0):
            raise ValueError("capacities and costs must be nonnegative")
        caps.setflags(write=False)
        costs.setflags(write=False)
        object.__setattr__(self, "capacities", caps)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "edges", tuple((int(u), int(v)) for u, v in self.edges))
        sink = self.sink if self.sink >= 0 else self.n_nodes - 1
        object.__setattr__(self, "sink", sink)

    @property
    def n_edges(self) -> int:
        return len(self.edges)


def _arc_head(network: FlowNetwork, j: int) -> int:
    E = network.n_edges
    return network.edges[j][1] if j < E else network.edges[j - E][0]


def _residual(network: FlowNetwork, caps: Array, flow: Array, j: int) -> float:
    E = network.n_edges
    return caps[j] - flow[j] if j < E else flow[j - E]


def _adjacency(network: FlowNetwork) -> list[list[int]]:
    adj = [[] for _ in range(network.n_nodes)]
    for j, (u, v) in enumerate(network.edges):
        adj[u].append(j)
        adj[v].append(j + network.n_edges)
    return adj


def max_flow_value(network: FlowNetwork, capacities=None) -> float:
    """Maximum s-t flow by shortest augmenting paths."""
    caps = network.capacities if capacities is None else _as1d(capacities)
    E = network.n_edges
    adj = _adjacency(network)
    flow = np.zeros(E)
    total = 0.0
    s, t = network.source, network.sink
    while True:
        parent = [-1] * network.n_nodes
        parent[s] = -2
        queue = [s]
        while queue and parent[t] == -1:
            nxt = []
            for u in queue:
                for j in adj[u]:
                    v = _arc_head(network, j)
                    if parent[v] == -1 and _residual(network, caps, flow, j) > 1e-12:
                        parent[v] = j
                        nxt.append(v)
            queue = nxt
        if parent[t] == -1:
            return total
        delta = math.inf
        v = t
        while v != s:
            j = parent[v]
            delta = min(delta, _residual(network, caps, flow, j))
            v = network.edges[j][0] if j < E else network.edges[j - E][1]
        v = t
        while v != s:
            j = parent[v]
            if j < E:
                flow[j] += delta
                v = network.edges[j][0]
            else:
                flow[j - E] -= delta
                v = network.edges[j - E][1]
        total += delta


def min_cost_flow_lp(network: FlowNetwork, r_t: float, capacities=None, costs=None) -> float:
    """Exact cost of routing r_t units at minimum linear cost.

    Successive shortest paths with node potentials keep every residual arc
    nonnegative under reduced costs, so each Dijkstra pass finds a cheapest
    augmenting path; capacities need not be integral.  Raises when the demand
    exceeds the maximum flow.
    """
    if r_t < 0:
        raise ValueError("demand must be nonnegative")
    caps = network.capacities if capacities is None else _as1d(capacities)
    cost = network.costs if costs is None else _as1d(costs)
    if np.any(cost < 0):
        raise ValueError("costs must be nonnegative")
    E = network.n_edges
    n = network.n_nodes
    s, t = network.source, network.sink
    adj = _adjacency(network)
    flow = np.zeros(E)
    pot = np.zeros(n)
    pushed = 0.0
    guard = 50 * E + 100
    for _ in range(guard):
        if pushed >= r_t - 1e-12 * max(1.0, r_t):
            return float(cost @ flow)
        dist = np.full(n, math.inf)
        dist[s] = 0.0
        parent = [-1] * n
        seen = [False] * n
        heap = [(0.0, s)]
        while heap:
            d, u = heapq.heappop(heap)
            if seen[u]:
                continue
            seen[u] = True
            for j in adj[u]:
                if _residual(network, caps, flow, j) <= 1e-12:
                    continue
                v = _arc_head(network, j)
                w = cost[j] if j < E else -cost[j - E]
                nd = d + w + pot[u] - pot[v]
                if nd < dist[v] - 1e-15:
                    dist[v] = nd
                    parent[v] = j
                    heapq.heappush(heap, (nd, v))
        if not np.isfinite(dist[t]):
            raise ValueError("demand exceeds the maximum flow of the network")
        delta = r_t - pushed
        v = t
        while v != s:
            j = parent[v]
            delta = min(delta, _residual(network, caps, flow, j))
            v = network.edges[j][0] if j < E else network.edges[j - E][1]
        v = t
        while v != s:
            j = parent[v]
            if j < E:
                flow[j] += delta
                v = network.edges[j][0]
            else:
                flow[j - E] -= delta
                v = network.edges[j - E][1]
        pushed += delta
        pot = np.where(np.isfinite(dist), pot + dist, pot + dist[t])
    raise RuntimeError("augmentation budget exhausted; network is degenerate")


def flow_polytope(network: FlowNetwork, r_t: float, capacities=None) -> DykstraIntersection:
    """Feasible flows: capacity box meeting conservation and demand rows."""
    caps = network.capacities if capacities is None else _as1d(capacities)
    E = network.n_edges
    interior = [v for v in range(network.n_nodes) if v not in (network.source, network.sink)]
    M = np.zeros((len(interior) + 1, E))
    d = np.zeros(len(interior) + 1)
    for row, node in enumerate(interior):
        for j, (u, v) in enumerate(network.edges):
            if v == node:
                M[row, j] += 1.0
            if u == node:
                M[row, j] -= 1.0
    for j, (_, v) in enumerate(network.edges):
        if v == network.sink:
            M[-1, j] = 1.0
    d[-1] = r_t
    return DykstraIntersection([Box(np.zeros(E), caps), AffineSubspace(M, d)])


def attacked_min_cost(
    network: FlowNetwork,
    r_t: float,
    y,
    tol: float = 1e-8,
    max_iter: int = 200_000,
) -> float:
    """Inner routing value  min over feasible x of  sum q (x + y) x.

    This is the congestion-priced objective the interdiction game optimizes,
    evaluated by projected gradient on the flow polytope; y >= 0 only raises
    it, so at y = 0 it reduces to the pure quadratic routing cost (which is
    not the linear LP value above).
    """
    y = _as1d(y)
    q = network.costs
    if y.size != network.n_edges:
        raise ValueError("y must assign a value per edge")
    X = flow_polytope(network, r_t)
    L = 2.0 * float(np.max(q)) if network.n_edges else 1.0
    x = X.project(np.zeros(network.n_edges))
    for _ in range(max_iter):
        grad = 2.0 * q * x + q * y
        x_next = X.project(x - grad / L)
        resid = L * float(np.linalg.norm(x_next - x))
        x = x_next
        if resid <= tol:
            break
    else:
        raise RuntimeError("projected gradient did not reach the requested residual")
    return float(np.sum(q * (x + y) * x))


# ---------------------------------------------------------------------------
# interdiction instance


@dataclass(frozen=True)
class FlowAttackData:
    network: FlowNetwork
    r_t: float
    budget: float
    eta: float
    d_percent: float
    edge_prob: float
    seed: int


def _random_network(n_nodes: int, edge_prob: float, rng) -> FlowNetwork:
    s, t = 0, n_nodes - 1
    edges = []
    for u in range(n_nodes):
        for v in range(n_nodes):
            if u == v or v == s or u == t:
                continue
            if rng.random() < edge_prob:
                edges.append((u, v))
    # BFS reachability; guarantee at least one s-t route
    reach = {s}
    frontier = [s]
    while frontier:
        nxt = []
        for u in frontier:
            for a, b in edges:
                if a == u and b not in reach:
                    reach.add(b)
                    nxt.append(b)
        frontier = nxt
    if t not in reach:
        edges.append((s, t))
    caps = rng.uniform(1.0, 2.0, len(edges))
    costs = rng.uniform(1.0, 2.0, len(edges))
    return FlowNetwork(n_nodes=n_nodes, edges=tuple(edges), capacities=caps, costs=costs)


def gen_flow_attack(
    n_nodes: int,
    edge_prob: float,
    d_percent: float,
    budget: float,
    seed: int,
    eta: float = 0.05,
) -> MinimaxProblem:
    """Random interdiction instance.

    The demand is ``d_percent`` of the capacity leaving the source, and the
    generated network must route it (checked by max flow).  The adversary set
    is the budget slice of the capacity box; with budget 0 it degenerates to
    the origin and the instance has no attack at all.  Library orientation:
    x is the adversary allocation, y is the flow, f is the negated objective.
    """
    if not 0 <= edge_prob <= 1:
        raise ValueError("edge_prob must lie in [0, 1]")
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    network = None
    r_t = 0.0
    for attempt in range(50):
        # attempt 0 keeps the plain seed stream so instances stay reproducible
        rng = np.random.default_rng(seed if attempt == 0 else (seed, attempt))
        candidate = _random_network(n_nodes, edge_prob, rng)
        exit_cap = sum(
            float(candidate.capacities[j])
            for j, (u, _) in enumerate(candidate.edges)
            if u == candidate.source
        )
        r_t = (d_percent / 100.0) * exit_cap
        if max_flow_value(candidate) >= r_t - 1e-9:
            network = candidate
            break
    if network is None:
        raise ValueError("no feasible network after 50 draws; relax the demand")
    caps = network.capacities
    if budget > float(np.sum(caps)) + 1e-12:
        raise ValueError("budget exceeds total capacity")
    E = network.n_edges
    q = network.costs
    # gradient couples each attack coordinate to its own edge flow only, so
    # the joint smoothness constant is the worst per-edge 2x2 Hessian norm
    block_norms = [
        spectral_norm(np.array([[eta, -qe], [-qe, -2.0 * qe]])) for qe in q
    ]
    f = SmoothFunction(
        value=lambda u, w: float(0.5 * eta * (u @ u) - np.sum(q * (w + u) * w)),
        grad_x=lambda u, w: eta * u - q * w,
        grad_y=lambda u, w: -2.0 * q * w - q * u,
        lipschitz_L=float(max(block_norms)),
        strong_concavity_mu=2.0 * float(np.min(q)),
    )
    adversary = DykstraIntersection(
        [Box(np.zeros(E), caps), AffineSubspace(np.ones((1, E)), [budget])]
    )
    flows = flow_polytope(network, r_t)
    data = FlowAttackData(
        network=network,
        r_t=r_t,
        budget=float(budget),
        eta=float(eta),
        d_percent=float(d_percent),
        edge_prob=float(edge_prob),
        seed=int(seed),
    )
    init_u = adversary.project(np.full(E, budget / E if E else 0.0))
    init_w = flows.project(np.zeros(E))
    return MinimaxProblem(
        f=f,
        h=ZeroFunction(),
        g=ZeroFunction(),
        constraints=CouplingConstraints(
            A=np.eye(E), B=np.eye(E), c=caps, senses=(Sense.LE,) * E
        ),
        set_X=adversary,
        set_Y=flows,
        meta={
            "name": "flow_attack",
            "data": data,
            "orientation": "x adversary, y flow, objective negated",
            "init": (init_u, init_w, np.zeros(E)),
        },
    )


def default_init(prob: MinimaxProblem) -> tuple[Array, Array, Array]:
    """Instance-declared starting point, or projected zeros."""
    if "init" in prob.meta:
        x, y, lam = prob.meta["init"]
        return _as1d(x).copy(), _as1d(y).copy(), _as1d(lam).copy()
    return (
        prob.set_X.project(np.zeros(prob.n)),
        prob.set_Y.project(np.zeros(prob.m)),
        np.zeros(prob.p),
    )


# ---------------------------------------------------------------------------
# simultaneous projected gradient baseline


def baseline_sim_gda(
    prob: MinimaxProblem,
    init: tuple[Array, Array, Array],
    stepsize: float = 0.3,
    max_iter: int = 1000,
    target_eps: float = math.inf,
    sink=None,
) -> SolveResult:
    """Projected gradient descent-ascent; all three blocks read the stale point.

    The classic failure mode on bilinear couplings: the linearized rotation
    has spectral radius above one, so trajectories spiral outward until the
    set boundary catches them.  Recorded with measure weights matching the
    stepsize.
    """
    if stepsize <= 0:
        raise ValueError("stepsize must be positive")
    x = prob.set_X.project(_as1d(init[0]))
    y = prob.set_Y.project(_as1d(init[1]))
    lam = prob.multiplier_set().project(_as1d(init[2]))
    trace = SolveTrace(sink)
    w = 1.0 / stepsize
    converged = False
    steps = 0
    state = IterateState(x=x, y=y, lam=lam, k=1, schedule={"stepsize": stepsize})
    for k in range(1, max_iter + 1):
        report = grad_G(prob, state.x, state.y, state.lam, w, w, stepsize)
        trace.append(
            TraceRow(
                k=k,
                x_norm=float(np.linalg.norm(state.x)),
                y_norm=float(np.linalg.norm(state.y)),
                lam_norm=float(np.linalg.norm(state.lam)),
                grad_norm=report.norm_total,
                max_violation=report.max_violation,
                potential=None,
                potential_trusted=False,
                schedule={"stepsize": stepsize},
                x=state.x,
                y=state.y,
                lam=state.lam,
            )
        )
        if report.norm_total <= target_eps and math.isfinite(target_eps):
            converged = True
            break
        gx, gy, _ = lagrangian_grads(prob, state.x, state.y, state.lam)
        res = prob.constraints.residual(state.x, state.y)
        x_next = prob.set_X.project(state.x - stepsize * gx)
        y_next = prob.set_Y.project(state.y + stepsize * gy)
        lam_next = prob.multiplier_set().project(state.lam + stepsize * res)
        state = IterateState(
            x=x_next, y=y_next, lam=lam_next, k=k + 1, schedule={"stepsize": stepsize}
        )
        steps += 1
    hit = None
    for row in trace:
        if row.grad_norm <= target_eps:
            hit = row.k
            break
    return SolveResult(
        final=state, trace=trace, converged=converged, iterations_used=steps, first_hit=hit
    )


# ---------------------------------------------------------------------------
# attack study


@dataclass(frozen=True)
class AttackMetric:
    q_cl: float
    q_att: float

    def __post_init__(self):
        if not self.q_cl > 0:
            raise ValueError("baseline cost must be positive")

    @property
    def rho(self) -> float:
        return (self.q_att - self.q_cl) / self.q_cl


@dataclass
class AttackStudyConfig:
    budgets: tuple[float, ...] = (0.0, 0.5, 1.0, 1.5, 2.0)
    n_nodes: int = 15
    edge_prob: float = 0.75
    d_percent: float = 10.0
    seeds: tuple[int, ...] = tuple(range(15))
    eta: float = 0.05
    max_iter: int = 300
    inv_beta: float = 0.8
    inv_alpha: float = 0.6
    gamma: float = 0.5
    jobs: int = 1


@dataclass(frozen=True)
class AttackStudyRow:
    budget: float
    seed: int
    q_cl: float
    q_att: float
    rho: float
    iters: int
    final_eps: float
    failed: bool = False


def _study_seed(config: AttackStudyConfig, seed: int) -> list[AttackStudyRow]:
    rows = []
    base = gen_flow_attack(
        config.n_nodes, config.edge_prob, config.d_percent, 0.0, seed, eta=config.eta
    )
    network: FlowNetwork = base.meta["data"].network
    r_t = base.meta["data"].r_t
    q_cl = min_cost_flow_lp(network, r_t)
    params = PdapgParams(
        beta=1.0 / config.inv_beta,
        regime=StronglyConcaveRegime(alpha=1.0 / config.inv_alpha, gamma=config.gamma),
        max_iter=config.max_iter,
        target_eps=math.inf,
    )
    for budget in config.budgets:
        if budget == 0.0:
            # the adversary set is the origin: nothing to solve, no cost change
            rows.append(AttackStudyRow(0.0, seed, q_cl, q_cl, 0.0, 0, 0.0))
            continue
        prob = gen_flow_attack(
            config.n_nodes, config.edge_prob, config.d_percent, budget, seed, eta=config.eta
        )
        result = pdapg_solve(prob, params, default_init(prob))
        y_att = np.clip(prob.set_X.project(result.final.x), 0.0, network.capacities)
        reduced = network.capacities - y_att
        try:
            q_att = min_cost_flow_lp(network, r_t, capacities=reduced)
        except ValueError:
            rows.append(
                AttackStudyRow(budget, seed, q_cl, math.nan, math.nan,
                               result.iterations_used, result.final_grad_norm, failed=True)
            )
            continue
        rows.append(
            AttackStudyRow(
                budget,
                seed,
                q_cl,
                q_att,
                AttackMetric(q_cl, q_att).rho,
                result.iterations_used,
                result.final_grad_norm,
            )
        )
    return rows


def run_attack_study(config: AttackStudyConfig) -> tuple[list[AttackStudyRow], list[dict]]:
    """Seed-by-budget sweep of the relative cost increase.

    Before the attack the operator pays the linear minimum routing cost; the
    adversary's final allocation then occupies capacity and the operator
    re-routes on what is left, again at minimum linear cost.  The reported
    rho is the relative increase.  Rows come back sorted by (budget, seed)
    regardless of job count; failures (budget cuts the demand off entirely)
    carry NaN metrics and are excluded from the summary.
    """
    if config.jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            chunks = list(pool.map(lambda s: _study_seed(config, s), config.seeds))
    else:
        chunks = [_study_seed(config, s) for s in config.seeds]
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=lambda r: (r.budget, r.seed))
    summary = []
    for budget in config.budgets:
        vals = [r.rho for r in rows if r.budget == budget and not r.failed]
        summary.append(
            {
                "budget": budget,
                "mean_rho": float(np.mean(vals)) if vals else math.nan,
                "std_rho": float(np.std(vals)) if vals else math.nan,
                "n": len(vals),
            }
        )
    return rows, summary

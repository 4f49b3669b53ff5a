"""Certifiably optimal solution of the hand-eye QCQP.

The problem ``min x^T Q x  s.t.  |r|^2 = 1, <r, d> = 0`` has the
Lagrangian dual

    max mu   s.t.   Z(mu, nu) = Q + mu P_r + nu P_d  is PSD,

a concave program in two scalars. ``mu`` is maximised by bisection on the
feasibility boundary; for each trial ``mu`` the concave function
``nu -> lambda_min(Z(mu, nu))`` is maximised by bisection on the sign of
its derivative ``u^T P_d u`` (``u`` the minimum eigenvector). The primal
solution is read off the null space of ``Z`` at the optimum and the
duality gap ``J(x) - mu`` certifies global optimality.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dq import DualQuaternion, normalize_arrays
from .errors import ConvergenceError, UnderConstrainedError
from .problem import P_D, P_R, CostMatrix

_PR_DIAG = np.diag(P_R).copy()
REFINE_REL_GAP = 1e-10


@dataclass(frozen=True)
class SolverOptions:
    gap_tol: float = 1e-8
    rank_tol: float = 1e-7
    max_iter: int = 200


@dataclass(frozen=True, eq=False)
class CalibrationResult:
    x: DualQuaternion
    cost: float
    dual_value: float
    gap: float
    multipliers: tuple
    null_dim: int = 1
    iterations: int = 0
    mu_history: tuple = field(default=(), repr=False)


def _as_matrix(q) -> np.ndarray:
    if isinstance(q, CostMatrix):
        return q.q
    return CostMatrix(np.asarray(q, dtype=float)).q


def _z(q, mu, nu):
    z = q + nu * P_D
    z[np.diag_indices(8)] += mu * _PR_DIAG
    return z


def _quadratic_roots(a, b, c):
    """Real roots of ``a s^2 + b s + c`` (negative discriminant clipped to zero)."""
    scale = max(abs(a), abs(b), abs(c))
    if scale == 0.0:
        return [0.0]
    if abs(a) <= 1e-14 * scale:
        return [-c / b] if abs(b) > 1e-14 * scale else []
    disc = max(b * b - 4.0 * a * c, 0.0)
    sq = np.sqrt(disc)
    # numerically stable pair of roots
    t = -0.5 * (b + np.copysign(sq, b))
    roots = [t / a]
    if t != 0.0:
        roots.append(c / t)
    else:
        roots.append(0.0)
    return roots


def _normalized_candidate(y):
    r, d = y[:4], y[4:]
    if np.linalg.norm(r) <= 1e-9 * max(1.0, np.linalg.norm(y)):
        return None
    r, d = normalize_arrays(r, d)
    return np.concatenate([r, d])


def two_vector_candidates(u1, u2):
    """Feasible unit-DQ vectors in ``span{u1, u2}``.

    Solves the quadratic for the combination satisfying ``<r, d> = 0``;
    the real-part norm is then fixed by scaling. The spanning vectors
    themselves are included so degenerate quadratics lose nothing.
    """
    a1, b1 = u1[:4], u1[4:]
    a2, b2 = u2[:4], u2[4:]
    c11 = a1 @ b1
    c12 = a1 @ b2 + a2 @ b1
    c22 = a2 @ b2
    dirs = [u1, u2]
    if abs(c11) >= abs(c22):
        # x = s u1 + u2
        dirs += [s * u1 + u2 for s in _quadratic_roots(c11, c12, c22)]
    else:
        # x = u1 + t u2
        dirs += [u1 + t * u2 for t in _quadratic_roots(c22, c12, c11)]
    out = []
    for y in dirs:
        cand = _normalized_candidate(y)
        if cand is not None:
            out.append(cand)
    return out


def _null_dim(w, rank_tol):
    top = w[-1]
    if top <= 0.0:
        return len(w)
    return int(np.sum(w <= rank_tol * top))


def _best_candidate(q, vecs):
    best, best_cost = None, np.inf
    for x in vecs:
        c = float(x @ q @ x)
        if c < best_cost:
            best, best_cost = x, c
    return best, best_cost


def eigen_init(q, opts: SolverOptions | None = None):
    """Feasible starting point from the two smallest eigenvectors of ``Q``.

    Returns ``(mu0, nu0, x0)`` where ``mu0 = lambda_min(Q)`` is dual
    feasible (``Q + mu0 P_r`` stays PSD) and ``x0`` is the cheapest unit DQ
    in the span of the two least-cost eigenvectors.
    """
    opts = opts or SolverOptions()
    qm = _as_matrix(q)
    w, v = np.linalg.eigh(qm)
    dim = _null_dim(w, opts.rank_tol)
    if dim > 2:
        raise UnderConstrainedError(null_dim=dim)
    x0, _ = _best_candidate(qm, two_vector_candidates(v[:, 0], v[:, 1]))
    if x0 is None:
        raise UnderConstrainedError(null_dim=dim)
    return float(w[0]), 0.0, x0


def _max_lambda_over_nu(q, mu, bound, tol):
    """Maximise the concave ``nu -> lambda_min(Z(mu, nu))`` on ``[-bound, bound]``."""
    lo, hi = -bound, bound
    best_nu = 0.0
    best_val = np.linalg.eigvalsh(_z(q, mu, best_nu))[0]
    while hi - lo > tol:
        nu = 0.5 * (lo + hi)
        w, v = np.linalg.eigh(_z(q, mu, nu))
        if w[0] > best_val:
            best_val, best_nu = w[0], nu
        u = v[:, 0]
        slope = 2.0 * (u[:4] @ u[4:])
        if slope > 0.0:
            lo = nu
        elif slope < 0.0:
            hi = nu
        else:
            break
    return best_val, best_nu


def _recover(q, mu, nu, rank_tol):
    w, v = np.linalg.eigh(_z(q, mu, nu))
    dim = _null_dim(w, rank_tol)
    if dim > 2:
        raise UnderConstrainedError(null_dim=dim)
    cands = []
    c = _normalized_candidate(v[:, 0])
    if c is not None:
        cands.append(c)
    cands += two_vector_candidates(v[:, 0], v[:, 1])
    x, cost = _best_candidate(q, cands)
    return x, cost, dim


def solve(q, opts: SolverOptions | None = None) -> CalibrationResult:
    """Globally solve ``min x^T Q x`` over unit dual quaternions.

    Raises
    ------
    NotPSDError
        ``Q`` is not symmetric PSD.
    UnderConstrainedError
        The data leave more than a two-dimensional null space (fewer than
        two independent rotation axes).
    ConvergenceError
        The gap did not close to ``gap_tol * max(1, cost)`` within
        ``max_iter`` bisection steps.
    """
    opts = opts or SolverOptions()
    qm = _as_matrix(q)
    top = float(np.linalg.eigvalsh(qm)[-1])
    if not top > 0.0:
        raise UnderConstrainedError(null_dim=8)
    # work on a unit-scale copy; scaling commutes with every step below
    qs = qm / top
    lo, nu_lo, x = eigen_init(qs, opts)
    hi = float(x @ qs @ x)
    lo = min(lo, hi)
    if lo < 0.0:
        lo = 0.0
    x_best, cost_best, dim = _recover(qs, lo, nu_lo, opts.rank_tol)
    if cost_best > hi:
        x_best, cost_best = x, hi
    hi = min(hi, cost_best)
    history = [lo]

    def converged():
        gap = top * (cost_best - lo)
        return gap <= opts.gap_tol * max(1.0, top * cost_best)

    def refined():
        # bisection is cheap; keep going to a tight relative gap once the tolerance is met
        return cost_best - lo <= REFINE_REL_GAP * cost_best

    iterations = 0
    while not (converged() and (refined() or iterations >= opts.max_iter)):
        if iterations >= opts.max_iter:
            raise ConvergenceError(
                f"duality gap {top * (cost_best - lo):.3g} above tolerance after {iterations} iterations"
            )
        iterations += 1
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        bound = 2.0 + 2.0 * abs(mid)
        val, nu = _max_lambda_over_nu(qs, mid, bound, 1e-15 * bound)
        if val >= 0.0:
            lo, nu_lo = mid, nu
            assert lo <= hi + 1e-12, "weak duality violated"
            history.append(lo)
            x_new, c_new, dim = _recover(qs, lo, nu_lo, opts.rank_tol)
            if c_new < cost_best:
                x_best, cost_best = x_new, c_new
                hi = min(hi, cost_best)
        else:
            hi = mid

    if not converged():
        raise ConvergenceError(
            f"duality gap {top * (cost_best - lo):.3g} above tolerance "
            f"{opts.gap_tol * max(1.0, top * cost_best):.3g}"
        )
    cost = float(x_best @ qm @ x_best)
    mu = top * lo
    return CalibrationResult(
        x=DualQuaternion.from_vector(x_best),
        cost=cost,
        dual_value=mu,
        gap=cost - mu,
        multipliers=(mu, top * nu_lo),
        null_dim=dim,
        iterations=iterations,
        mu_history=tuple(top * h for h in history),
    )


def certify(q, result: CalibrationResult, tol: float = 1e-8) -> bool:
    """Check dual feasibility of the multipliers and closure of the gap."""
    qm = _as_matrix(q)
    mu, nu = result.multipliers
    z = _z(qm, mu, nu)
    scale = float(np.linalg.norm(qm, 2))
    lam = float(np.linalg.eigvalsh(z)[0])
    x = result.x.vec()
    cost = float(x @ qm @ x)
    gap = cost - mu
    return lam >= -tol * scale and gap <= tol * max(1.0, cost)

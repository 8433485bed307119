"""Decay-rate feasibility for funnel consensus on trees.

The general test builds the symmetric block matrix

    Gamma(g) = [[P,       K(g)/2],
                [K(g)/2,  g L_e ]],   P = D_i^T D_i,  K(g) = L_e - g (I - P)

and looks for the largest ``g`` with ``Gamma(g) >= 0``; a funnel decay rate
``l`` is certified when ``l <= gamma_bar``. Chains and stars have dedicated
bounds that apply where the general test is infeasible or degenerate.

When ``P`` is singular (two or more followers), every vector ``v`` in its null
space forces ``K(g) v = 0``, i.e. ``L_e v = g v``. The feasible set is then at
most one point, which a grid scan would step over, so that point is computed
directly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .graph import DerivedMatrices, Topology, derive_matrices

PSD_TOL = 1e-9
# slack when comparing a decay rate against gamma_bar or a special bound
RATE_TOL = 1e-9


class NotSymmetric(ValueError):
    pass


class WrongTopology(ValueError):
    pass


class GammaStatus(str, enum.Enum):
    VALUE = "value"
    UNBOUNDED_ABOVE = "unbounded_above"
    INFEASIBLE = "infeasible"


class Method(str, enum.Enum):
    THEOREM1 = "theorem1"
    CHAIN_SPECIAL = "chain_special"
    STAR_SPECIAL = "star_special"


class ChainVerdict(str, enum.Enum):
    DEFER_TO_GENERAL = "defer_to_general"
    NO_GUARANTEE = "no_guarantee"


@dataclass
class GammaSearch:
    status: GammaStatus
    gamma_bar: float | None
    grid: np.ndarray
    min_eigs: np.ndarray
    schur_psd: np.ndarray
    # gamma values where the block and Schur-complement verdicts differ
    disagreements: list[float] = field(default_factory=list)

    @property
    def feasible(self) -> np.ndarray:
        return self.min_eigs >= -PSD_TOL

    @property
    def spectra(self) -> list[tuple[float, float]]:
        return list(zip(self.grid.tolist(), self.min_eigs.tolist()))


@dataclass
class FeasibilityReport:
    status: GammaStatus
    gamma_bar: float | None
    l_max: float
    approved: bool
    method: Method
    gamma_grid_spectra: list[tuple[float, float]] = field(default_factory=list, repr=False)
    # gamma to use in the monitored Lyapunov function
    lyapunov_gamma: float = 1.0
    special_bound: float | None = None
    note: str = ""


def gamma_matrix(dm: DerivedMatrices, gamma: float) -> np.ndarray:
    m = dm.L_e.shape[0]
    P = dm.DiTDi
    K = 0.5 * (dm.L_e - gamma * (np.eye(m) - P))
    return np.block([[P, K], [K, gamma * dm.L_e]])


def min_eig_psd(Msym, tol: float = PSD_TOL) -> tuple[float, bool]:
    Msym = np.asarray(Msym, dtype=float)
    if Msym.ndim != 2 or Msym.shape[0] != Msym.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {Msym.shape}")
    if np.max(np.abs(Msym - Msym.T), initial=0.0) > 1e-12:
        raise NotSymmetric("matrix is not symmetric within 1e-12")
    lam = float(np.linalg.eigvalsh(Msym)[0])
    return lam, lam >= -tol


def schur_psd(dm: DerivedMatrices, gamma: float, tol: float = PSD_TOL) -> bool:
    """PSD verdict via the complement of the positive definite block ``g L_e``."""
    m = dm.L_e.shape[0]
    P = dm.DiTDi
    K = dm.L_e - gamma * (np.eye(m) - P)
    S = P - K @ np.linalg.solve(dm.L_e, K) / (4.0 * gamma)
    return min_eig_psd(0.5 * (S + S.T), tol)[1]


def _null_space(P: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    w, Q = np.linalg.eigh(P)
    return Q[:, w < tol]


def max_gamma(
    dm: DerivedMatrices,
    gamma_cap: float = 1e3,
    gamma_min: float = 1e-3,
    n_grid: int = 400,
    tol: float = PSD_TOL,
    refine_tol: float = 1e-6,
) -> GammaSearch:
    """Largest ``g`` with ``Gamma(g)`` positive semidefinite.

    Scans a log-spaced grid, cross-checks each verdict against the Schur
    complement form, then either refines the top of the highest feasible run by
    bisection (``P`` nonsingular) or evaluates the single admissible point
    (``P`` singular).
    """
    grid = np.logspace(np.log10(gamma_min), np.log10(gamma_cap), n_grid)
    min_eigs = np.empty(n_grid)
    schur = np.empty(n_grid, dtype=bool)
    disagreements = []
    for k, g in enumerate(grid):
        min_eigs[k], block_ok = min_eig_psd(gamma_matrix(dm, g), tol)
        schur[k] = schur_psd(dm, g, tol)
        if schur[k] != block_ok:
            disagreements.append(float(g))

    def result(status, value=None):
        return GammaSearch(status, value, grid, min_eigs, schur, disagreements)

    N = _null_space(dm.DiTDi)
    if N.shape[1]:
        LN = dm.L_e @ N
        g_star = float(np.trace(N.T @ LN)) / N.shape[1]
        if g_star > 0 and np.max(np.abs(LN - g_star * N)) <= 1e-9:
            if min_eig_psd(gamma_matrix(dm, g_star), tol)[1]:
                return result(GammaStatus.VALUE, g_star)
        return result(GammaStatus.INFEASIBLE)

    feasible = min_eigs >= -tol
    if not feasible.any():
        return result(GammaStatus.INFEASIBLE)
    if feasible[-1]:
        return result(GammaStatus.UNBOUNDED_ABOVE)
    top = int(np.flatnonzero(feasible)[-1])
    lo, hi = grid[top], grid[top + 1]
    while hi - lo > refine_tol:
        mid = 0.5 * (lo + hi)
        if min_eig_psd(gamma_matrix(dm, mid), tol)[1]:
            lo = mid
        else:
            hi = mid
    return result(GammaStatus.VALUE, lo)


def _lyapunov_gamma(search: GammaSearch, l_max: float) -> float:
    if search.status is GammaStatus.VALUE:
        return search.gamma_bar
    if search.status is GammaStatus.UNBOUNDED_ABOVE:
        ok = search.grid[search.feasible & (search.grid >= l_max)]
        return float(ok[0]) if ok.size else max(l_max, 1.0)
    return 1.0


def check_theorem1(dm: DerivedMatrices, l_max: float, search: GammaSearch | None = None, **kw) -> FeasibilityReport:
    if l_max < 0:
        raise ValueError("l_max must be nonnegative")
    search = search or max_gamma(dm, **kw)
    if search.status is GammaStatus.UNBOUNDED_ABOVE:
        approved = True
    elif search.status is GammaStatus.INFEASIBLE:
        approved = False
    else:
        approved = search.gamma_bar >= l_max - RATE_TOL
    return FeasibilityReport(
        status=search.status,
        gamma_bar=search.gamma_bar,
        l_max=l_max,
        approved=approved,
        method=Method.THEOREM1,
        gamma_grid_spectra=search.spectra,
        lyapunov_gamma=_lyapunov_gamma(search, l_max),
    )


def chain_bound(n_f: int) -> float | ChainVerdict:
    """Sufficient decay bound for a chain whose first ``n_f`` vertices follow."""
    if n_f < 1:
        raise ValueError("n_f must be at least 1")
    if n_f == 1:
        return ChainVerdict.DEFER_TO_GENERAL
    if n_f == 2:
        return 2.0
    if n_f == 3:
        return 1.0
    return ChainVerdict.NO_GUARANTEE


@dataclass
class ChainAnalysis:
    n_f: int
    A: np.ndarray
    lambda_max: float
    k_factor: float
    admissible_l: float | None


def chain_follower_block(n_f: int) -> np.ndarray:
    """Follower-edge block of ``-L_e`` for a chain: tridiagonal (1, -2, 1)."""
    size = n_f - 1
    return -2.0 * np.eye(size) + np.eye(size, k=1) + np.eye(size, k=-1)


def chain_k_factor(n_f: int, t_grid=None) -> ChainAnalysis:
    """Componentwise growth factor of the zero-input follower edges.

    ``k`` is the supremum over ``t`` of the largest absolute row sum of
    ``exp((A - lambda_max I) t)``, including the ``t -> inf`` limit
    ``v v^T`` of the dominant eigenvector.
    """
    if n_f < 2:
        raise ValueError("chain_k_factor needs n_f >= 2")
    if t_grid is None:
        t_grid = np.linspace(0.0, 10.0, 10001)
    A = chain_follower_block(n_f)
    lam, Q = np.linalg.eigh(A)
    lam_max = float(lam[-1])
    t = np.asarray(t_grid, dtype=float)
    decay = np.exp(np.outer(t, lam - lam_max))  # (T, size)
    # exp((A - lam_max I) t) = Q diag(decay) Q^T, stacked over t
    E = np.einsum("ik,tk,jk->tij", Q, decay, Q)
    k_grid = np.abs(E).sum(axis=2).max()
    v = Q[:, -1]
    k_limit = np.abs(np.outer(v, v)).sum(axis=1).max()
    k = float(max(k_grid, k_limit))
    admissible = -lam_max if k <= 1.0 + 1e-9 else None
    return ChainAnalysis(n_f=n_f, A=A, lambda_max=lam_max, k_factor=k, admissible_l=admissible)


def is_chain(t: Topology) -> bool:
    return t.edges == tuple((i, i + 1) for i in range(1, t.n))


def is_star(t: Topology) -> bool:
    return t.edges == tuple((i, t.n) for i in range(1, t.n))


def star_bound(t: Topology) -> float:
    if not is_star(t) or t.leaders != frozenset({t.n}):
        raise WrongTopology("star bound needs a star whose only leader is the centre vertex n")
    return 1.0


def certify(t: Topology, l_max: float, **kw) -> FeasibilityReport:
    """Route to the star, chain, or general test and return the verdict.

    The general search always runs so its spectra and ``gamma_bar`` are
    reported even when a special-case bound decides approval.
    """
    dm = derive_matrices(t)
    search = max_gamma(dm, **kw)
    report = check_theorem1(dm, l_max, search=search)

    if is_star(t) and t.leaders == frozenset({t.n}) and t.n >= 3:
        bound = star_bound(t)
        report.method = Method.STAR_SPECIAL
        report.special_bound = bound
        report.approved = l_max <= bound + RATE_TOL
        report.lyapunov_gamma = 1.0
    elif is_chain(t) and t.n_f >= 2:
        bound = chain_bound(t.n_f)
        report.method = Method.CHAIN_SPECIAL
        report.lyapunov_gamma = 1.0
        if bound is ChainVerdict.NO_GUARANTEE:
            report.approved = False
            report.note = "chains with four or more followers carry no decay-rate guarantee"
        else:
            report.special_bound = bound
            report.approved = l_max <= bound + RATE_TOL
            report.note = "also requires a large enough gain on the leader edge next to the followers"
    return report

"""Reduced system in the first column of ``W_1`` for ``H = 1``, ``m = 1``.

With ``A = W_1`` (d x n), ``B = W_2`` (p x d), ``Lambda = Lambda_1`` and
``Sigma = Lambda_2`` the gradient equations force

    a_ij = x_j lambda_i1 / (lambda_ij x_1) a_i1
    S_i  = kappa_i lambda_i1 / x_1 a_i1,   kappa_i = sum_j x_j^2 / lambda_ij
    b_ki = y_k S_i / (sigma_ki (1 + T_k)), T_k = sum_i S_i^2 / sigma_ki

for toric critical points, leaving ``d`` equations of degree ``4p`` in
``a_11, ..., a_d1``. A small term ``mu_i a_i1`` is added to equation ``i``
to make every root isolated.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from pydlnn.compiled import CompiledSystem
from pydlnn.config import SolverOptions
from pydlnn.network import Architecture, TrainingInstance, build_gradient_system
from pydlnn.polynomial import Polynomial, PolySystem
from pydlnn.tracker import Solution, classify, dedupe, refine, solve_total_degree

logger = logging.getLogger(__name__)

MU_SCALE = 1e-3
LIFT_SINGULAR_TOL = 1e-12


class GenericityError(ValueError):
    """Raised when the data is too special for the reduced system to exist."""

    pass


class LiftSingularError(ArithmeticError):
    """Raised when a reduced root lies on a component where ``1 + T_k = 0``."""

    pass


@dataclass
class _ReducedData:
    """Per-instance constants of the elimination."""

    x: np.ndarray
    y: np.ndarray
    lam: np.ndarray  # d x n
    sigma: np.ndarray  # p x d
    kappa: np.ndarray  # d
    c: np.ndarray  # d, S_i = c_i a_i1

    @classmethod
    def from_instance(cls, arch: Architecture, inst: TrainingInstance) -> "_ReducedData":
        if arch.H != 1 or arch.m != 1:
            raise ValueError("The reduced system needs one hidden layer and one data point")
        inst.validate(arch)
        x = inst.X[:, 0]
        y = inst.Y[:, 0]
        lam, sigma = inst.lambdas
        if x[0] == 0:
            raise GenericityError("x_1 is zero")
        if np.any(lam == 0) or np.any(sigma == 0):
            raise GenericityError("Regularization matrices have zero entries")
        kappa = np.sum(x[None, :] ** 2 / lam, axis=1)
        if np.any(kappa == 0):
            raise GenericityError("sum_j x_j^2 / lambda_ij vanishes")
        c = kappa * lam[:, 0] / x[0]
        return cls(x=x, y=y, lam=lam, sigma=sigma, kappa=kappa, c=c)

    @property
    def d(self) -> int:
        return self.lam.shape[0]

    @property
    def p(self) -> int:
        return self.sigma.shape[0]


def sample_mu(d: int, seed: int) -> np.ndarray:
    """Regularization parameters ``uniform(0, 1) * 1e-3``."""
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.uniform(0.0, 1.0, size=d) * MU_SCALE


def build_reduced_system(
    arch: Architecture,
    inst: TrainingInstance,
    mu: Optional[Sequence[float]] = None,
    scaled: bool = False,
) -> PolySystem:
    """``d`` polynomials in ``a_11, ..., a_d1``; ``mu=None`` means no regularization.

    With ``scaled=True`` the variables are ``S_i = c_i a_i1`` (named ``s_i``)
    and every polynomial is divided by its largest coefficient, which is the
    form :func:`solve_reduced` tracks.
    """
    data = _ReducedData.from_instance(arch, inst)
    d, p = data.d, data.p
    mu_values = np.zeros(d) if mu is None else np.asarray(mu, dtype=float)
    if mu_values.shape != (d,):
        raise ValueError(f"mu must have length {d}")

    S = [Polynomial.variable(i, d) * float(data.c[i]) for i in range(d)]
    squares = [s * s for s in S]
    factors = []
    for k in range(p):
        T = Polynomial.zero(d)
        for i in range(d):
            T = T + squares[i] * (1.0 / data.sigma[k, i])
        factors.append((T + 1.0) ** 2)

    def product(skip: Optional[int] = None) -> Polynomial:
        acc = Polynomial.constant(1.0, d)
        for k, f in enumerate(factors):
            if k != skip:
                acc = acc * f
        return acc

    full = product()
    partial = [product(skip=k) for k in range(p)]
    polys = []
    for i in range(d):
        eq = full * (1.0 / data.kappa[i])
        for k in range(p):
            eq = eq - partial[k] * (data.y[k] ** 2 / data.sigma[k, i])
        if mu_values[i]:
            eq = eq + Polynomial.variable(i, d) * float(mu_values[i])
        polys.append(eq)
    if scaled:
        return PolySystem(
            [_rescale(poly, data.c) for poly in polys], [f"s_{i + 1}" for i in range(d)]
        )
    names = [arch.variable_names()[arch.flat_index(1, i, 0)] for i in range(d)]
    return PolySystem(polys, names)


def _rescale(poly: Polynomial, c: np.ndarray) -> Polynomial:
    # a_i1 = S_i / c_i, then unit largest coefficient
    terms = {
        mono: coeff * float(np.prod(c ** -np.asarray(mono.exponents, dtype=float)))
        for mono, coeff in poly.items()
    }
    top = max((abs(v) for v in terms.values()), default=1.0)
    return Polynomial({mono: v / top for mono, v in terms.items()}, poly.nvars)


def lift_reduced_solution(
    reduced_point: Sequence[complex], arch: Architecture, inst: TrainingInstance
) -> np.ndarray:
    """Full weight vector (``W_1`` then ``W_2``, row-major) for a reduced root."""
    data = _ReducedData.from_instance(arch, inst)
    a1 = np.asarray(reduced_point, dtype=complex)
    if a1.shape != (data.d,):
        raise ValueError(f"Reduced point must have length {data.d}")
    if np.any(a1 == 0):
        raise ValueError("Reduced point must have nonzero coordinates")
    A = (data.x[None, :] * data.lam[:, :1]) / (data.lam * data.x[0]) * a1[:, None]
    S = data.c * a1
    T = np.sum(S[None, :] ** 2 / data.sigma, axis=1)
    denom = 1.0 + T
    if np.any(np.abs(denom) <= LIFT_SINGULAR_TOL * np.maximum(1.0, np.abs(T))):
        raise LiftSingularError("1 + T_k vanishes at this reduced point")
    B = data.y[:, None] * S[None, :] / (data.sigma * denom[:, None])
    return np.concatenate([A.ravel(), B.ravel()])


def solve_reduced(
    arch: Architecture,
    inst: TrainingInstance,
    opts: Optional[SolverOptions] = None,
    mu: Optional[Sequence[float]] = None,
) -> List[Solution]:
    """Toric critical points of the full system recovered through the reduced system.

    Paths are tracked on the scaled regularized system. Its roots are
    polished on the scaled unregularized one, mapped back to ``a_i1``,
    lifted, and polished again on the full gradient system. Roots with a
    zero coordinate or on a ``1 + T_k = 0`` component are discarded.
    """
    opts = opts or SolverOptions()
    d = arch.hidden[0]
    c = _ReducedData.from_instance(arch, inst).c
    mu_values = sample_mu(d, opts.seed) if mu is None else np.asarray(mu, dtype=float)
    regularized = build_reduced_system(arch, inst, mu_values, scaled=True)
    exact = build_reduced_system(arch, inst, scaled=True)
    roots, stats = solve_total_degree(regularized, opts)
    logger.info("Regularized reduced system: %d roots (%s)", len(roots), stats.to_dict())

    full = build_gradient_system(arch, inst)
    compiled_exact = CompiledSystem(exact)
    compiled_full = CompiledSystem(full)
    lifted: List[Solution] = []
    spurious = 0
    for root in roots:
        polished = refine(exact, root.point, opts.polish_iters, compiled_exact)
        if np.any(np.abs(polished.point) < opts.zero_tol * (1.0 + polished.norm)):
            continue
        try:
            weights = lift_reduced_solution(polished.point / c, arch, inst)
        except LiftSingularError:
            spurious += 1
            continue
        sol = refine(full, weights, opts.polish_iters, compiled_full)
        scale = max(1.0, float(compiled_full.term_scale(sol.point[None, :])[0]))
        if not np.isfinite(sol.residual) or sol.residual >= opts.residual_tol * scale:
            spurious += 1
            continue
        sol = classify(sol, opts.zero_tol, opts.real_tol)
        if sol.is_toric:
            lifted.append(sol)
    if spurious:
        logger.debug("Discarded %d reduced roots off the critical set", spurious)
    return dedupe(lifted, opts.dedupe_tol)

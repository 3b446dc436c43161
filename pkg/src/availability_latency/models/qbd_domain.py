"""Matrix-analytic upper bound for fixed-object access with ``r = 2, t = 1``.

PURPOSE:
Objects ``a`` and ``b`` stored with ``a+b`` on three servers give the simplest
Fork-Join system with an availability code. Its state is the number of
requests ``N`` plus the lead ``(n_alpha, n_beta)`` of one recovery server over
the other. Keeping only leads up to two (a leading server that is two ahead
stops serving) yields a level-independent quasi-birth-death process whose
mean sojourn time upper-bounds the real system.

ARCHITECTURE NOTES:
Phases are ordered ``(0,2), (0,1), (0,0), (1,0), (2,0)``. Level 0 only has
phase ``(0,0)``; level 1 has ``(0,1), (0,0), (1,0)``; levels from 2 on repeat.
The boundary vector ``pi0`` stacks levels 0 and 1 (four states) and ``pi1``
is level 2, so ``pi_n = pi1 R^(n-2)``.

Transitions from ``(N, (a, b))``:

- arrival ``lambda``: ``N+1``, same phase;
- systematic completion ``gamma``: ``N-1``, both leads drop by one (floored at 0);
- alpha completion with ``b >= 1``: ``N-1``, ``b-1``; with ``b = 0``: ``a+1`` within the level;
- beta symmetric.

Example:
    >>> solution = solve_qbd(build_qbd(0.5, 1.0, 1.0, 1.0))
    >>> 0.6667 < solution.mean_time_ub < 1.1667
    True
"""

import logging

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, computed_field

from .error_domain import DegenerateModelError, InstabilityError, InvalidParameterError, IterationLimitError

logger = logging.getLogger(__name__)

Matrix = npt.NDArray[np.float64]

PHASES: tuple[tuple[int, int], ...] = ((0, 2), (0, 1), (0, 0), (1, 0), (2, 0))
LEVEL_ONE_PHASES: tuple[tuple[int, int], ...] = ((0, 1), (0, 0), (1, 0))
MAX_LEAD = 2
R_TOLERANCE = 1e-12
R_MAX_ITER = 1_000_000


class QbdModel(BaseModel):
    """Generator blocks of the truncated lead process.

    ``a0``/``a1``/``a2`` are the repeating up/local/down blocks (5x5). The
    boundary blocks are ``b00`` (level 0 local), ``b01`` (0 to 1), ``b10``
    (1 to 0), ``b11`` (level 1 local), ``b12`` (1 to 2) and ``c21`` (2 to 1).
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    arrival_rate: float = Field(gt=0.0)
    gamma: float = Field(gt=0.0)
    alpha: float = Field(gt=0.0)
    beta: float = Field(gt=0.0)
    a0: Matrix
    a1: Matrix
    a2: Matrix
    b00: Matrix
    b01: Matrix
    b10: Matrix
    b11: Matrix
    b12: Matrix
    c21: Matrix

    @property
    def repeating_generator(self) -> Matrix:
        """Phase generator ``A0 + A1 + A2`` of the deep levels."""
        return self.a0 + self.a1 + self.a2

    def row_sums(self) -> dict[str, Matrix]:
        """Row sums of every level's outgoing blocks; all zero for a valid generator."""
        return {
            "level0": self.b00.sum(axis=1) + self.b01.sum(axis=1),
            "level1": self.b10.sum(axis=1) + self.b11.sum(axis=1) + self.b12.sum(axis=1),
            "level2": self.c21.sum(axis=1) + self.a1.sum(axis=1) + self.a0.sum(axis=1),
            "repeating": self.a2.sum(axis=1) + self.a1.sum(axis=1) + self.a0.sum(axis=1),
        }


class QbdSolution(BaseModel):
    """Stationary solution of a ``QbdModel``."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    arrival_rate: float = Field(gt=0.0)
    rate_matrix: Matrix
    pi0: Matrix
    pi1: Matrix
    mean_jobs: float = Field(ge=0.0)

    @computed_field
    @property
    def mean_time_ub(self) -> float:
        """Upper bound on the mean download time via Little's law."""
        return self.mean_jobs / self.arrival_rate

    @computed_field
    @property
    def spectral_radius(self) -> float:
        """Spectral radius of ``R``."""
        return spectral_radius(self.rate_matrix)

    @computed_field
    @property
    def total_probability(self) -> float:
        """``pi0 . 1 + pi1 (I - R)^-1 . 1``."""
        fundamental = np.linalg.inv(np.eye(len(PHASES)) - self.rate_matrix)
        return float(self.pi0.sum() + self.pi1 @ fundamental @ np.ones(len(PHASES)))


def build_qbd(lambda_: float, gamma: float, alpha: float, beta: float) -> QbdModel:
    """Generator blocks of the truncated process.

    Raises:
        InvalidParameterError: If any rate is not positive.
    """
    if min(lambda_, gamma, alpha, beta) <= 0:
        raise InvalidParameterError("all rates must be positive")
    size = len(PHASES)
    index = {phase: i for i, phase in enumerate(PHASES)}

    a0 = lambda_ * np.eye(size)
    a1 = np.zeros((size, size))
    a2 = np.zeros((size, size))
    for i, (a, b) in enumerate(PHASES):
        a2[i, index[(max(a - 1, 0), max(b - 1, 0))]] += gamma
        _lead_moves(a, b, alpha, leader_first=True, index=index, row=i, local=a1, down=a2)
        _lead_moves(b, a, beta, leader_first=False, index=index, row=i, local=a1, down=a2)
    _fill_diagonal(a1, a0, a2)

    level_one = {phase: i for i, phase in enumerate(LEVEL_ONE_PHASES)}
    b00 = np.array([[-lambda_]])
    b01 = np.zeros((1, 3))
    b01[0, level_one[(0, 0)]] = lambda_
    b10 = np.zeros((3, 1))
    b11 = np.zeros((3, 3))
    b12 = np.zeros((3, size))
    for i, phase in enumerate(LEVEL_ONE_PHASES):
        b12[i, index[phase]] = lambda_
        # One request: any finished copy of the other side completes it.
        b10[i, 0] = gamma + {(0, 1): alpha, (0, 0): 0.0, (1, 0): beta}[phase]
    b11[level_one[(0, 0)], level_one[(1, 0)]] = alpha
    b11[level_one[(0, 0)], level_one[(0, 1)]] = beta
    _fill_diagonal(b11, b10, b12)

    # Level 2 only drops into phases that exist at level 1.
    c21 = a2[:, [index[phase] for phase in LEVEL_ONE_PHASES]]

    return QbdModel(
        arrival_rate=lambda_, gamma=gamma, alpha=alpha, beta=beta,
        a0=a0, a1=a1, a2=a2, b00=b00, b01=b01, b10=b10, b11=b11, b12=b12, c21=c21,
    )  # fmt: skip


def _lead_moves(
    own: int,
    other: int,
    rate: float,
    *,
    leader_first: bool,
    index: dict[tuple[int, int], int],
    row: int,
    local: Matrix,
    down: Matrix,
) -> None:
    """Place one recovery server's completion transitions.

    ``own`` is the server's lead and ``other`` its sibling's. Catching up with
    a leading sibling completes the head request; otherwise the server's lead
    grows, unless it already sits at ``MAX_LEAD``.
    """

    def phase(own_lead: int, other_lead: int) -> int:
        return index[(own_lead, other_lead) if leader_first else (other_lead, own_lead)]

    if other >= 1:
        down[row, phase(0, other - 1)] += rate
    elif own < MAX_LEAD:
        local[row, phase(own + 1, 0)] += rate


def _fill_diagonal(local: Matrix, *others: Matrix) -> None:
    np.fill_diagonal(local, 0.0)
    outflow = local.sum(axis=1) + sum(block.sum(axis=1) for block in others)
    np.fill_diagonal(local, -outflow)


def spectral_radius(matrix: Matrix) -> float:
    """Largest eigenvalue modulus."""
    return float(np.max(np.abs(np.linalg.eigvals(matrix))))


def phase_distribution(model: QbdModel) -> Matrix:
    """Stationary distribution of the deep-level phase process ``A0 + A1 + A2``.

    Example:
        >>> model = build_qbd(0.5, 1.0, 1.0, 1.0)
        >>> round(float(phase_distribution(model)[2]), 4)
        0.4
    """
    return _stationary(model.repeating_generator)


def qbd_drift(model: QbdModel) -> float:
    """Mean level drift ``pi_A A0 1 - pi_A A2 1``; negative when the process is stable."""
    weights = phase_distribution(model)
    ones = np.ones(len(PHASES))
    return float(weights @ model.a0 @ ones - weights @ model.a2 @ ones)


def qbd_capacity(gamma: float, alpha: float, beta: float) -> float:
    """Arrival rate at which the level drift of the truncated process vanishes."""
    # A0 = lambda I, so the drift is lambda minus a lambda-free departure rate.
    reference = 1.0
    return reference - qbd_drift(build_qbd(reference, gamma, alpha, beta))


def solve_R(model: QbdModel, tol: float = R_TOLERANCE, max_iter: int = R_MAX_ITER) -> Matrix:
    """Minimal non-negative solution of ``A0 + R A1 + R^2 A2 = 0``.

    Iterates ``R <- -(A0 + R^2 A2) A1^-1`` from ``R = 0``.

    Raises:
        InstabilityError: If the mean drift is not negative or ``R`` has
            spectral radius at least one.
        IterationLimitError: If the iteration has not converged after ``max_iter`` steps.
    """
    drift = qbd_drift(model)
    if drift >= 0.0:
        raise InstabilityError("lambda >= phase-averaged departure rate", f"unstable: level drift {drift:.6g} >= 0")

    a1_inverse = np.linalg.inv(model.a1)
    rate_matrix = np.zeros_like(model.a0)
    for iteration in range(1, max_iter + 1):
        updated = -(model.a0 + rate_matrix @ rate_matrix @ model.a2) @ a1_inverse
        change = float(np.max(np.abs(updated - rate_matrix)))
        rate_matrix = updated
        if change <= tol:
            logger.debug("R converged after %d iterations (change %.3g)", iteration, change)
            break
        if iteration % 10_000 == 0:
            logger.debug("R iteration %d: change %.3g", iteration, change)
    else:
        raise IterationLimitError(f"R iteration did not converge in {max_iter} steps")

    radius = spectral_radius(rate_matrix)
    if radius >= 1.0:
        raise InstabilityError("sp(R) >= 1", f"unstable: spectral radius of R is {radius:.6g}")
    return rate_matrix


def r_residual(model: QbdModel, rate_matrix: Matrix) -> float:
    """Max-norm of ``A0 + R A1 + R^2 A2``."""
    residual = model.a0 + rate_matrix @ model.a1 + rate_matrix @ rate_matrix @ model.a2
    return float(np.max(np.abs(residual)))


def solve_boundary(model: QbdModel, rate_matrix: Matrix) -> tuple[Matrix, Matrix]:
    """Boundary probabilities ``(pi0, pi1)`` from the balance equations of levels 0 to 2.

    One balance equation is replaced by the normalization
    ``pi0 . 1 + pi1 (I - R)^-1 . 1 = 1``.

    Raises:
        DegenerateModelError: If the boundary system is singular.
    """
    size = len(PHASES)
    fundamental = np.linalg.inv(np.eye(size) - rate_matrix)
    level_two_local = model.a1 + rate_matrix @ model.a2
    # Rows index source states (levels 0, 1, 2), columns the balance equations.
    balance = np.block(
        [
            [model.b00, model.b01, np.zeros((1, size))],
            [model.b10, model.b11, model.b12],
            [np.zeros((size, 1)), model.c21, level_two_local],
        ]
    )
    normalization = np.concatenate([np.ones(4), fundamental @ np.ones(size)])
    system = balance.copy()
    system[:, 0] = normalization
    rhs = np.zeros(system.shape[0])
    rhs[0] = 1.0
    try:
        solution = np.linalg.solve(system.T, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateModelError(f"boundary system is singular: {exc}") from exc
    return solution[:4], solution[4:]


def ma_mean_ub(lambda_: float, gamma: float, alpha: float, beta: float) -> float:
    """Upper bound on the mean download time from the truncated process.

    Example:
        >>> round(ma_mean_ub(0.01, 1.0, 1.0, 1.0), 2)
        0.67
    """
    return solve_qbd(build_qbd(lambda_, gamma, alpha, beta)).mean_time_ub


def solve_qbd(model: QbdModel) -> QbdSolution:
    """Solve ``R`` and the boundary, then sum the levels in closed form.

    ``mean_jobs = pi0 . 1 - pi0[0] + pi1 ((I-R)^-2 + (I-R)^-1) . 1``
    """
    rate_matrix = solve_R(model)
    pi0, pi1 = solve_boundary(model, rate_matrix)
    fundamental = np.linalg.inv(np.eye(len(PHASES)) - rate_matrix)
    deep_levels = pi1 @ (fundamental @ fundamental + fundamental) @ np.ones(len(PHASES))
    mean_jobs = float(pi0.sum() - pi0[0] + deep_levels)
    return QbdSolution(arrival_rate=model.arrival_rate, rate_matrix=rate_matrix, pi0=pi0, pi1=pi1, mean_jobs=mean_jobs)


def level_weighted_mean_jobs(solution: QbdSolution, max_level: int) -> float:
    """``sum_{n <= max_level} n pi_n . 1`` by explicit level-by-level summation."""
    if max_level < 1:
        raise InvalidParameterError("max_level must be at least 1")
    total = float(solution.pi0[1:].sum())
    level = solution.pi1
    for n in range(2, max_level + 1):
        total += n * float(level.sum())
        level = level @ solution.rate_matrix
    return total


def _stationary(generator: Matrix) -> Matrix:
    size = generator.shape[0]
    system = generator.T.copy()
    system[-1, :] = 1.0
    rhs = np.zeros(size)
    rhs[-1] = 1.0
    try:
        return np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateModelError(f"phase generator is singular: {exc}") from exc

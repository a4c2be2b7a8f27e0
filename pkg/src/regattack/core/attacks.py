"""White-box target attacks on regression models.

CW-R minimizes ||x' - x||_2 + c * max{g(x) + t - g(x'), 0} over a tanh
change of variables and binary-searches the trade-off constant c. IFGSM-R
takes signed-gradient steps of the same hinge inside an L-infinity ball.
A Gaussian-noise baseline shares the result type.

Every ``*_batch`` function attacks each row of ``X`` independently; the
single-example functions are wrappers around them.
"""

import logging
from collections.abc import Sequence

import numpy as np

from regattack.core.exceptions import InputError, NumericalError
from regattack.core.models import (
    AttackMethod,
    AttackResult,
    CwConfig,
    Direction,
    IfgsmConfig,
    is_successful,
)
from regattack.core.regressors import RegressionModel

logger = logging.getLogger(__name__)

# Clamp applied before artanh so x in {0, 1} maps to a finite omega.
TANH_MARGIN = 1e-6
OMEGA_INIT_STD = 0.01
# Growth of c while no round has succeeded yet.
CONST_GROWTH = 10.0


def derive_seed(base_seed: int, *indices: int) -> int:
    """Mix a base seed with unit/example indices into an independent seed."""
    sequence = np.random.SeedSequence([base_seed, *indices])
    return int(sequence.generate_state(1)[0])


def tanh_reparam(omega: np.ndarray) -> np.ndarray:
    """Map unconstrained omega into the unit box: 0.5 * (tanh(omega) + 1)."""
    return 0.5 * (np.tanh(np.asarray(omega, dtype=np.float64)) + 1.0)


def tanh_reparam_inv(x: np.ndarray, margin: float = TANH_MARGIN) -> np.ndarray:
    """Inverse of tanh_reparam on x clamped into [margin, 1 - margin]."""
    clamped = np.clip(np.asarray(x, dtype=np.float64), margin, 1.0 - margin)
    return np.arctanh(2.0 * clamped - 1.0)


def _hinge(
    before: np.ndarray | float,
    after: np.ndarray | float,
    t: float,
    direction: Direction,
) -> np.ndarray:
    if direction is Direction.INCREASE:
        return np.maximum(np.asarray(before) + t - np.asarray(after), 0.0)
    return np.maximum(np.asarray(after) - (np.asarray(before) - t), 0.0)


def _check_pair(x: np.ndarray, other: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(other, dtype=np.float64)
    if a.shape != b.shape:
        raise InputError(f"Shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def _check_examples(X: np.ndarray, feature_dim: int) -> np.ndarray:
    batch = np.asarray(X, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != feature_dim:
        raise InputError(
            f"Expected examples with {feature_dim} features, got shape {batch.shape}"
        )
    if batch.shape[0] == 0:
        raise InputError("No examples to attack")
    if not np.all(np.isfinite(batch)) or batch.min() < 0.0 or batch.max() > 1.0:
        raise InputError("Examples must lie in the unit box [0, 1]^k")
    return batch


def _check_vector(x: np.ndarray) -> np.ndarray:
    vector = np.asarray(x, dtype=np.float64)
    if vector.ndim != 1:
        raise InputError(f"Expected a single feature vector, got shape {vector.shape}")
    return vector[np.newaxis, :]


def _build_results(
    X: np.ndarray,
    X_adv: np.ndarray,
    before: np.ndarray,
    after: np.ndarray,
    t: float,
    direction: Direction,
    method: AttackMethod,
    iterations: Sequence[int],
    epsilons: Sequence[float | None] | None = None,
    constants: Sequence[tuple[float, ...]] | None = None,
) -> list[AttackResult]:
    success = is_successful(before, after, t, direction)
    results = []
    for i in range(X.shape[0]):
        diff = X_adv[i] - X[i]
        results.append(
            AttackResult(
                x_original=X[i].copy(),
                x_adversarial=X_adv[i].copy(),
                output_before=float(before[i]),
                output_after=float(after[i]),
                t=t,
                success=bool(success[i]),
                distortion_l2=float(np.linalg.norm(diff)),
                distortion_linf=float(np.max(np.abs(diff))),
                iterations_used=int(iterations[i]),
                method=method,
                direction=direction,
                epsilon=epsilons[i] if epsilons is not None else None,
                search_constants=constants[i] if constants is not None else (),
            )
        )
    return results


# CW-R


def cw_loss(
    x: np.ndarray,
    x_adv: np.ndarray,
    t: float,
    c: float,
    model: RegressionModel,
    direction: Direction = Direction.INCREASE,
) -> float:
    """||x_adv - x||_2 + c * max{g(x) + t - g(x_adv), 0}.

    Raises:
        InputError: If the vectors differ in length or do not match the model
    """
    original, adversarial = _check_pair(x, x_adv)
    before = model.predict(original)
    after = model.predict(adversarial)
    distance = float(np.linalg.norm(adversarial - original))
    return distance + c * float(_hinge(before, after, t, direction))


def cw_r_batch(
    model: RegressionModel,
    X: np.ndarray,
    cfg: CwConfig | None = None,
    seeds: Sequence[int] | None = None,
) -> list[AttackResult]:
    """Run CW-R on every row of X.

    Each of ``cfg.binary_search_steps`` rounds restarts omega from its initial
    value and takes ``cfg.iterations`` gradient-descent steps at the round's
    constant c, keeping the successful iterate with the smallest L2 distortion.
    After a round, success moves the upper bracket to c and failure moves the
    lower bracket to c. While the upper bracket is still ``c_upper_init`` the
    next c is ``CONST_GROWTH * c`` capped at the bracket midpoint; afterwards
    it is the bracket midpoint.

    Args:
        model: Victim model
        X: Examples in [0, 1]^k, shape (n, k)
        cfg: Attack configuration (defaults to CwConfig())
        seeds: One seed per row for the omega initialization; defaults to
            derive_seed(cfg.seed, row)

    Returns:
        One AttackResult per row, in row order

    Raises:
        InputError: If X is malformed or outside the unit box
        NumericalError: If the loss or gradient becomes non-finite
    """
    cfg = cfg or CwConfig()
    originals = _check_examples(X, model.feature_dim)
    n, k = originals.shape
    if seeds is None:
        seeds = [derive_seed(cfg.seed, i) for i in range(n)]
    if len(seeds) != n:
        raise InputError(f"Need {n} seeds, got {len(seeds)}")

    sign = cfg.direction.sign
    before = np.asarray(model.predict(originals))
    noise = np.stack(
        [np.random.default_rng(seed).normal(0.0, OMEGA_INIT_STD, k) for seed in seeds]
    )
    omega_init = tanh_reparam_inv(originals) + noise

    c = np.full(n, cfg.initial_const)
    lower = np.full(n, cfg.c_lower_init)
    upper = np.full(n, cfg.c_upper_init)
    best_adv = originals.copy()
    best_dist = np.full(n, np.inf)
    best_after = before.copy()
    constants: list[list[float]] = [[] for _ in range(n)]
    last_adv = originals
    last_after = before

    for round_index in range(cfg.binary_search_steps):
        omega = omega_init.copy()
        round_success = np.zeros(n, dtype=bool)
        for iteration in range(cfg.iterations):
            x_adv = tanh_reparam(omega)
            after = np.asarray(model.predict(x_adv))
            delta = x_adv - originals
            dist = np.linalg.norm(delta, axis=1)
            loss = dist + c * _hinge(before, after, cfg.t, cfg.direction)
            success = is_successful(before, after, cfg.t, cfg.direction)

            improved = success & (dist < best_dist)
            best_adv[improved] = x_adv[improved]
            best_dist[improved] = dist[improved]
            best_after[improved] = after[improved]
            round_success |= success
            last_adv = x_adv
            last_after = after

            grad_g = np.asarray(model.input_gradient(x_adv))
            grad_dist = np.divide(
                delta,
                dist[:, np.newaxis],
                out=np.zeros_like(delta),
                where=dist[:, np.newaxis] > 0,
            )
            # Inactive hinge (already successful) contributes no gradient.
            penalty = np.where(success, 0.0, c * sign)
            grad_x = grad_dist - penalty[:, np.newaxis] * grad_g
            grad_omega = grad_x * 0.5 * (1.0 - np.tanh(omega) ** 2)
            if not (np.all(np.isfinite(loss)) and np.all(np.isfinite(grad_omega))):
                raise NumericalError(
                    "Non-finite CW-R loss or gradient", round_index, iteration
                )
            omega = omega - cfg.inner_lr * grad_omega

        for i in range(n):
            constants[i].append(float(c[i]))
        upper = np.where(round_success, c, upper)
        lower = np.where(round_success, lower, c)
        midpoint = (upper + lower) / 2.0
        searching = upper >= cfg.c_upper_init
        c = np.where(searching, np.minimum(c * CONST_GROWTH, midpoint), midpoint)
        logger.debug(
            "CW-R round %d: %d/%d rows succeeded",
            round_index,
            int(round_success.sum()),
            n,
        )

    found = np.isfinite(best_dist)
    final = np.where(found[:, np.newaxis], best_adv, last_adv)
    after = np.where(found, best_after, last_after)
    total_steps = cfg.binary_search_steps * cfg.iterations
    return _build_results(
        originals,
        final,
        before,
        after,
        cfg.t,
        cfg.direction,
        AttackMethod.CW_R,
        iterations=[total_steps] * n,
        constants=[tuple(row) for row in constants],
    )


def cw_r(
    model: RegressionModel,
    x: np.ndarray,
    cfg: CwConfig | None = None,
    seed: int | None = None,
) -> AttackResult:
    """CW-R on a single example; ``seed`` defaults to ``cfg.seed``."""
    cfg = cfg or CwConfig()
    row = _check_vector(x)
    return cw_r_batch(model, row, cfg, seeds=[cfg.seed if seed is None else seed])[0]


# IFGSM-R


def clip_perturbation(
    x: np.ndarray, x_candidate: np.ndarray, epsilon: float
) -> np.ndarray:
    """Clamp x_candidate into [x - epsilon, x + epsilon] intersected with [0, 1].

    Raises:
        InputError: If the shapes differ or epsilon is not positive
    """
    original, candidate = _check_pair(x, x_candidate)
    if epsilon <= 0:
        raise InputError(f"epsilon must be positive, got {epsilon}")
    lo = np.maximum(original - epsilon, 0.0)
    hi = np.minimum(original + epsilon, 1.0)
    return np.clip(candidate, lo, hi)


def ifgsm_r_batch(
    model: RegressionModel,
    X: np.ndarray,
    cfg: IfgsmConfig | None = None,
    epsilon: float | None = None,
) -> list[AttackResult]:
    """Run IFGSM-R on every row of X.

    Performs ``cfg.iterations + 1`` updates
    x'_{m+1} = Clip(x'_m - alpha * sign(grad of hinge)); a row whose hinge is
    inactive has a zero gradient, so it stays fixed from then on.

    Args:
        model: Victim model
        X: Examples in [0, 1]^k, shape (n, k)
        cfg: Attack configuration (defaults to IfgsmConfig())
        epsilon: Override for cfg.epsilon (used by the grid search)

    Returns:
        One AttackResult per row; iterations_used counts the updates in which
        the row actually moved

    Raises:
        InputError: If X is malformed or outside the unit box
        NumericalError: If the model gradient becomes non-finite
    """
    cfg = cfg or IfgsmConfig()
    radius = cfg.epsilon if epsilon is None else epsilon
    originals = _check_examples(X, model.feature_dim)
    n = originals.shape[0]
    sign = cfg.direction.sign

    before = np.asarray(model.predict(originals))
    x_adv = originals.copy()
    moves = np.zeros(n, dtype=int)
    for iteration in range(cfg.iterations + 1):
        after = np.asarray(model.predict(x_adv))
        active = ~is_successful(before, after, cfg.t, cfg.direction)
        if not active.any():
            break
        grad_g = np.asarray(model.input_gradient(x_adv))
        if not np.all(np.isfinite(grad_g)):
            raise NumericalError("Non-finite IFGSM-R gradient", 0, iteration)
        grad_loss = np.where(active[:, np.newaxis], -sign * grad_g, 0.0)
        x_adv = clip_perturbation(
            originals, x_adv - cfg.alpha * np.sign(grad_loss), radius
        )
        moves += active

    after = np.asarray(model.predict(x_adv))
    return _build_results(
        originals,
        x_adv,
        before,
        after,
        cfg.t,
        cfg.direction,
        AttackMethod.IFGSM_R,
        iterations=moves,
        epsilons=[radius] * n,
    )


def ifgsm_r(
    model: RegressionModel, x: np.ndarray, cfg: IfgsmConfig | None = None
) -> AttackResult:
    """IFGSM-R on a single example at ``cfg.epsilon``."""
    return ifgsm_r_batch(model, _check_vector(x), cfg)[0]


def ifgsm_r_grid_batch(
    model: RegressionModel, X: np.ndarray, cfg: IfgsmConfig | None = None
) -> list[AttackResult]:
    """IFGSM-R with a per-example search over ``cfg.epsilon_grid``.

    Epsilons are tried in ascending order; each row keeps the first successful
    result, or the result at the largest epsilon if none succeeds.
    iterations_used is summed over every epsilon tried for that row.

    Raises:
        InputError: If cfg has no epsilon grid
    """
    cfg = cfg or IfgsmConfig()
    if not cfg.epsilon_grid:
        raise InputError("IFGSM-R grid search needs a non-empty epsilon_grid")
    originals = _check_examples(X, model.feature_dim)
    n = originals.shape[0]

    chosen: list[AttackResult | None] = [None] * n
    spent = np.zeros(n, dtype=int)
    pending = np.arange(n)
    for radius in cfg.epsilon_grid:
        attempt = ifgsm_r_batch(model, originals[pending], cfg, epsilon=radius)
        still_pending = []
        for row, result in zip(pending, attempt, strict=True):
            spent[row] += result.iterations_used
            chosen[row] = result
            if not result.success:
                still_pending.append(row)
        pending = np.asarray(still_pending, dtype=int)
        if pending.size == 0:
            break

    # Rescore on the full batch so outputs do not depend on which subset a row
    # was last attacked in.
    picked = [result for result in chosen if result is not None]
    x_adv = np.stack([result.x_adversarial for result in picked])
    return _build_results(
        originals,
        x_adv,
        np.asarray(model.predict(originals)),
        np.asarray(model.predict(x_adv)),
        cfg.t,
        cfg.direction,
        AttackMethod.IFGSM_R,
        iterations=spent,
        epsilons=[result.epsilon for result in picked],
    )


def ifgsm_r_grid(
    model: RegressionModel, x: np.ndarray, cfg: IfgsmConfig | None = None
) -> AttackResult:
    """IFGSM-R grid search on a single example."""
    return ifgsm_r_grid_batch(model, _check_vector(x), cfg)[0]


# Random noise baseline


def gaussian_noise_batch(
    model: RegressionModel,
    X: np.ndarray,
    sigma: float,
    seeds: Sequence[int],
    t: float = 0.2,
    direction: Direction = Direction.INCREASE,
) -> list[AttackResult]:
    """Add i.i.d. N(0, sigma^2) noise to each row, clamp to [0, 1], score it.

    Raises:
        InputError: If sigma is negative or the seed count is wrong
    """
    if sigma < 0:
        raise InputError(f"sigma must be non-negative, got {sigma}")
    originals = _check_examples(X, model.feature_dim)
    n, k = originals.shape
    if len(seeds) != n:
        raise InputError(f"Need {n} seeds, got {len(seeds)}")

    noise = np.stack(
        [np.random.default_rng(seed).normal(0.0, sigma, k) for seed in seeds]
    )
    x_adv = np.clip(originals + noise, 0.0, 1.0)
    before = np.asarray(model.predict(originals))
    after = np.asarray(model.predict(x_adv))
    return _build_results(
        originals,
        x_adv,
        before,
        after,
        t,
        direction,
        AttackMethod.RANDOM_NOISE,
        iterations=[1] * n,
    )


def gaussian_noise_attack(
    model: RegressionModel,
    x: np.ndarray,
    sigma: float,
    seed: int,
    t: float = 0.2,
    direction: Direction = Direction.INCREASE,
) -> AttackResult:
    """Gaussian-noise baseline on a single example."""
    return gaussian_noise_batch(
        model, _check_vector(x), sigma, [seed], t=t, direction=direction
    )[0]

"""Numeric checks of the matrix lemmas and the Rademacher lower-bound construction."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .linalg import DifferencePreconditioner, difference_trace_inverse

__all__ = [
    "ConvergenceError",
    "SpectralReport",
    "AdversaryOutcome",
    "CheckResult",
    "power_iteration",
    "wolkowicz_upper_bound",
    "difference_inverse_dense",
    "difference_rows",
    "verify_difference_eigen_bound",
    "perturbation_bound_sides",
    "verify_perturbation_bound",
    "interlacing_holds",
    "offdiag_stats",
    "frobenius_condition",
    "adversary_search",
    "empirical_quadratic_tail",
    "run_verify_suite",
    "run_matrix_suite",
    "run_lowerbound_suite",
]

EXHAUSTIVE_LIMIT = 20


class ConvergenceError(RuntimeError):
    pass


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


class _JSONMixin:
    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


@dataclass
class SpectralReport(_JSONMixin):
    label: str
    T: int
    trace_inverse: float
    lambda_max_inverse: float
    wolkowicz_bound: float
    frobenius_offdiag: float
    condition_ok: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)


@dataclass
class AdversaryOutcome(_JSONMixin):
    signs: np.ndarray
    comparator: np.ndarray
    achieved_quadratic: float
    threshold: float
    regret_lower_value: float
    success: bool
    success_fraction: float
    patterns_checked: int
    mode: str


@dataclass
class CheckResult(_JSONMixin):
    name: str
    passed: bool
    detail: str = ""


def _require_symmetric(A: np.ndarray, what: str = "matrix") -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{what} must be square")
    if np.linalg.norm(A - A.T) > 1e-12 * max(np.linalg.norm(A), 1.0):
        raise ValueError(f"{what} is not symmetric")
    return A


def power_iteration(apply, T: int, *, tol: float = 1e-10, max_iter: int = 100_000, x0=None):
    """Largest eigenvalue of a symmetric PSD operator given as ``x -> A x``.

    Returns ``(eigenvalue, unit eigenvector, iterations)``.  Stops when the
    Rayleigh quotient changes by less than ``tol`` relatively.
    """
    x = np.ones(T) + 1e-3 * np.cos(np.arange(T)) if x0 is None else np.array(x0, dtype=float)
    x /= np.linalg.norm(x)
    lam = 0.0
    for it in range(1, max_iter + 1):
        y = apply(x)
        new = float(x @ y)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0, x, it
        x = y / ny
        if abs(new - lam) <= tol * abs(new):
            return new, x, it
        lam = new
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations")


def wolkowicz_upper_bound(A) -> float:
    """``tr/n + sqrt((n-1) (tr(A^T A)/n - (tr/n)^2))``, an upper bound on lambda_max."""
    A = _require_symmetric(A)
    n = A.shape[0]
    m = float(np.trace(A)) / n
    spread = float(np.sum(A * A)) / n - m * m
    return m + math.sqrt((n - 1) * max(0.0, spread))


def difference_inverse_dense(T: int) -> np.ndarray:
    """``(Sigma^T Sigma)^{-1}``, entries ``T - max(i, j) + 1``."""
    idx = np.arange(1, T + 1)
    return (T - np.maximum.outer(idx, idx) + 1).astype(float)


def difference_rows(T: int) -> np.ndarray:
    """The ``(T-1) x T`` matrix of consecutive differences ``u_t - u_{t+1}``."""
    return (np.eye(T) - np.eye(T, k=1))[:-1]


def offdiag_stats(A) -> tuple[float, float]:
    """``(||B||_F^2, max_i sum_j B_ij^2)`` for ``B = A - Diag(A)``."""
    A = np.asarray(A, dtype=float)
    B = A - np.diag(np.diag(A))
    rows = np.sum(B * B, axis=1)
    return float(rows.sum()), float(rows.max())


def verify_difference_eigen_bound(T: int, *, tol: float = 1e-10, max_iter: int = 100_000) -> SpectralReport:
    """lambda_max((Sigma^T Sigma)^{-1}) against nine tenths of its trace.

    The eigenvalue comes from power iteration on the O(T) structured
    operator; the Wolkowicz bound uses the exact Frobenius norm.
    """
    if T < 2:
        raise ValueError("T must be at least 2")
    precond = DifferencePreconditioner(T)
    lam, _, iters = power_iteration(precond.apply_inverse, T, tol=tol, max_iter=max_iter)
    trace = difference_trace_inverse(T)
    # sum_{i,j} (T - max(i,j) + 1)^2 = sum_k k^2 (2(T-k) + 1), k = T - max + 1
    k = np.arange(1, T + 1, dtype=float)
    fro_sq = float(np.sum(k * k * (2 * (T - k) + 1)))
    m = trace / T
    wolk = m + math.sqrt((T - 1) * max(0.0, fro_sq / T - m * m))
    off_sq = fro_sq - float(np.sum(k * k))
    half_sum = T * (T + 1) ** 2 * (T + 2) / 12
    return SpectralReport(
        label="difference",
        T=T,
        trace_inverse=float(trace),
        lambda_max_inverse=lam,
        wolkowicz_bound=wolk,
        frobenius_offdiag=off_sq,
        condition_ok={
            "lambda_max<=0.9*trace": lam <= 0.9 * trace,
            "lambda_max<=wolkowicz": lam <= wolk * (1 + 1e-8),
        },
        notes={
            "power_iterations": iters,
            "frobenius_sq_inverse": fro_sq,
            "triangular_half_sum": half_sum,
            "triangular_half_sum_matches_frobenius": bool(abs(half_sum - fro_sq) <= 1e-9 * fro_sq),
        },
    )


def perturbation_bound_sides(B, v) -> tuple[float, float]:
    """``(tr((B + v v^T)^{-1}), ||v||^2 + sum_{t>=2} 1/lambda_t(B))``."""
    B = _require_symmetric(B, "B")
    v = np.asarray(v, dtype=float).ravel()
    if not np.any(v):
        raise ValueError("v must be nonzero")
    lam = np.linalg.eigvalsh(B)
    small = int(np.sum(lam < 1e-10))
    if small != 1 or lam[0] < -1e-10:
        raise ValueError(f"B must be PSD with exactly one zero eigenvalue, found {small} below 1e-10")
    A = B + np.outer(v, v)
    lam_A = np.linalg.eigvalsh(A)
    if lam_A[0] <= 1e-12 * max(lam_A[-1], 1.0):
        raise np.linalg.LinAlgError("B + v v^T is numerically singular")
    return float(np.sum(1.0 / lam_A)), float(v @ v + np.sum(1.0 / lam[1:]))


def verify_perturbation_bound(B, v) -> bool:
    """Whether ``tr((B + v v^T)^{-1}) >= ||v||^2 + sum_{t>=2} 1/lambda_t(B)``.

    The inequality is evaluated exactly as displayed.  It fails for large
    ``||v||`` (the trace stays bounded while ``||v||^2`` grows), so callers get
    a boolean instead of an exception.
    """
    lhs, rhs = perturbation_bound_sides(B, v)
    return lhs >= rhs * (1 - 1e-8)


def interlacing_holds(B, v) -> bool:
    """``lambda_t(B) <= lambda_t(B + v v^T)`` for every ``t``."""
    B = _require_symmetric(B, "B")
    v = np.asarray(v, dtype=float).ravel()
    lo = np.linalg.eigvalsh(B)
    hi = np.linalg.eigvalsh(B + np.outer(v, v))
    scale = max(float(np.abs(hi).max()), 1.0)
    return bool(np.all(lo <= hi + 1e-10 * scale))


def frobenius_condition(Ainv) -> bool:
    """``||B||_F^2 >= (T/2) max_i sum_j B_ij^2`` with ``B`` the off-diagonal part."""
    A = _require_symmetric(Ainv)
    total, row_max = offdiag_stats(A)
    return total >= 0.5 * A.shape[0] * row_max


def _sign_patterns(T: int, start: int, stop: int) -> np.ndarray:
    codes = np.arange(start, stop, dtype=np.int64)[:, None]
    bits = (codes >> np.arange(T, dtype=np.int64)) & 1
    return 1.0 - 2.0 * bits


def adversary_search(A, G: float = 1.0, P: float = 1.0, q: float = 1.0, mode: str = "exhaustive",
                     *, samples: int = 100_000, seed: int = 0, chunk: int = 1 << 16) -> AdversaryOutcome:
    """Search Rademacher sign patterns ``Y`` for ``||G Y||_A^2 >= G^2 (tr A + q ||A - Diag A||_F)``.

    The best pattern found defines the losses ``g_t = G Y_t`` and the
    comparator ``u = -sqrt(P) A g / ||g||_A``, which has ``||u||_{A^{-1}} = sqrt(P)``.
    Against a learner that always plays zero the regret is ``sqrt(P) ||g||_A``.
    ``success_fraction`` is exact in exhaustive mode and a Monte Carlo estimate
    otherwise.
    """
    A = _require_symmetric(A)
    T = A.shape[0]
    if q < 1:
        raise ValueError("q must be at least 1")
    if mode not in ("exhaustive", "sampled"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "exhaustive" and T > EXHAUSTIVE_LIMIT:
        raise ValueError(f"exhaustive search is limited to T <= {EXHAUSTIVE_LIMIT}")
    off = A - np.diag(np.diag(A))
    threshold = G * G * (float(np.trace(A)) + q * float(np.linalg.norm(off)))
    cutoff = threshold * (1 - 1e-12)
    best_val = -np.inf
    best = None
    hits = 0
    checked = 0
    if mode == "exhaustive":
        total = 1 << T
        batches = ((s, min(s + chunk, total)) for s in range(0, total, chunk))
        draw = lambda lo, hi: _sign_patterns(T, lo, hi)  # noqa: E731
    else:
        rng = np.random.default_rng(seed)
        total = samples
        batches = ((s, min(s + chunk, total)) for s in range(0, total, chunk))
        draw = lambda lo, hi: rng.choice((-1.0, 1.0), size=(hi - lo, T))  # noqa: E731
    for lo, hi in batches:
        Y = draw(lo, hi)
        quad = G * G * np.einsum("ij,ij->i", Y @ A, Y)
        hits += int(np.count_nonzero(quad >= cutoff))
        checked += Y.shape[0]
        i = int(np.argmax(quad))
        if quad[i] > best_val:
            best_val = float(quad[i])
            best = Y[i].copy()
    g = G * best
    norm_A = math.sqrt(best_val)
    comparator = -math.sqrt(P) * (A @ g) / norm_A
    return AdversaryOutcome(
        signs=best,
        comparator=comparator,
        achieved_quadratic=best_val,
        threshold=threshold,
        regret_lower_value=math.sqrt(P) * norm_A,
        success=bool(best_val >= cutoff),
        success_fraction=hits / checked,
        patterns_checked=checked,
        mode=mode,
    )


def empirical_quadratic_tail(A, G: float = 1.0, trials: int = 100_000, *, seed: int = 0,
                             qs=(1, 2, 3), chunk: int = 10_000) -> dict:
    """Monte Carlo summary of ``||G Y||_A^2`` over i.i.d. Rademacher ``Y``."""
    A = _require_symmetric(A)
    if trials < 1:
        raise ValueError("trials must be positive")
    T = A.shape[0]
    rng = np.random.default_rng(seed)
    vals = np.empty(trials)
    for lo in range(0, trials, chunk):
        hi = min(lo + chunk, trials)
        Y = rng.choice((-1.0, 1.0), size=(hi - lo, T))
        vals[lo:hi] = G * G * np.einsum("ij,ij->i", Y @ A, Y)
    trace = float(np.trace(A))
    off = float(np.linalg.norm(A - np.diag(np.diag(A))))
    expected = G * G * trace
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return {
        "trials": trials,
        "mean": mean,
        "std_err": se,
        "expected": expected,
        "within_3se": abs(mean - expected) <= 3 * se if se > 0 else mean == expected,
        "min": float(vals.min()),
        "max": float(vals.max()),
        "quantiles": {str(p): float(np.quantile(vals, p)) for p in (0.01, 0.1, 0.5, 0.9, 0.99)},
        "fraction_exceeding": {str(q): float(np.mean(vals >= G * G * (trace + q * off))) for q in qs},
    }


def run_verify_suite(Ts=(2, 4, 8, 16, 32, 64, 256, 1024), seed: int = 0) -> tuple[list[CheckResult], list[SpectralReport]]:
    rng = np.random.default_rng(seed)
    results, reports = [], []
    for T in Ts:
        rep = verify_difference_eigen_bound(T)
        reports.append(rep)
        results.append(CheckResult(f"eigen-bound T={T}", rep.condition_ok["lambda_max<=0.9*trace"],
                                   f"lambda_max={rep.lambda_max_inverse:.6g} 0.9*trace={0.9 * rep.trace_inverse:.6g}"))
    for n in (4, 16, 64):
        worst = -np.inf
        for _ in range(100):
            X = rng.normal(size=(n, n))
            S = 0.5 * (X + X.T)
            worst = max(worst, np.linalg.eigvalsh(S)[-1] - wolkowicz_upper_bound(S))
        results.append(CheckResult(f"wolkowicz n={n}", worst <= 1e-9, f"max(lambda_max - bound)={worst:.3g}"))
    for T in (8, 32, 64):
        D = difference_rows(T)
        floor = difference_trace_inverse(T) / 10
        worst = np.inf
        for _ in range(20):
            v = rng.normal(size=T)
            worst = min(worst, float(np.trace(np.linalg.inv(D.T @ D + np.outer(v, v)))))
        results.append(CheckResult(f"biased-trace T={T}", worst >= floor, f"min trace={worst:.6g} floor={floor:.6g}"))
    for T in (4, 8, 16, 32, 64, 128):
        ok = frobenius_condition(difference_inverse_dense(T))
        results.append(CheckResult(f"frobenius-condition T={T}", ok))
    return results, reports


def run_matrix_suite() -> list[CheckResult]:
    from .haar import haar_matrix, haar_row
    from .linalg import difference_M_inverse_entry

    results = []
    ok = all(int(np.trace(difference_inverse_dense(T))) == difference_trace_inverse(T)
             for T in list(range(1, 65)) + [128, 256, 512])
    results.append(CheckResult("trace (Sigma^T Sigma)^-1 = T(T+1)/2", ok))
    ok = True
    for T in range(1, 65):
        sigma = np.eye(T) - np.eye(T, k=1)
        inv = np.linalg.inv(sigma.T @ sigma)
        ref = np.array([[difference_M_inverse_entry(i, j, T) for j in range(1, T + 1)] for i in range(1, T + 1)])
        ok &= bool(np.allclose(inv, ref, rtol=1e-12, atol=1e-12 * T))
    results.append(CheckResult("entries T - max(i,j) + 1", ok))
    ok = all(np.array_equal(np.diag(haar_matrix(n) @ haar_matrix(n).T), np.full(1 << n, n + 1.0)) for n in range(11))
    results.append(CheckResult("diag(H H^T) = 1 + n", ok))
    ok = all(len(haar_row(t, n)) == n + 1 for n in range(11) for t in range(1, (1 << n) + 1))
    results.append(CheckResult("Haar row support = 1 + n", ok))
    return results


def run_lowerbound_suite(Ts=(8, 12, 16), G: float = 1.0, P: float = 1.0, trials: int = 100_000,
                         seed: int = 0) -> tuple[list[CheckResult], list[AdversaryOutcome], dict]:
    results, outcomes = [], []
    for T in Ts:
        out = adversary_search(difference_inverse_dense(T), G, P, q=1.0, mode="exhaustive")
        outcomes.append(out)
        results.append(CheckResult(f"adversary T={T}", out.success,
                                   f"best={out.achieved_quadratic:.6g} threshold={out.threshold:.6g} "
                                   f"fraction={out.success_fraction:.4f}"))
    tail = empirical_quadratic_tail(difference_inverse_dense(64), G, trials, seed=seed)
    results.append(CheckResult("rademacher mean T=64", tail["within_3se"],
                               f"mean={tail['mean']:.6g} expected={tail['expected']:.6g} se={tail['std_err']:.3g}"))
    return results, outcomes, tail

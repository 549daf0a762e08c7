"""Independent brute-force numerics: rank, extremal norm ratios, distances.

Everything here works on the dense matrix realization and never consults the
criterion formulas it is used to audit.  The L^2(mu) geometry is reached by
conjugating with diagonal square-root weight matrices; general (p, q) ratios
are optimized by seeded multi-start projected gradient on the L^p unit
sphere, with coordinate indicators always in the start set (they are the
exact extremizers for diagonal operators) and dense sphere sampling as a
cross-check in low dimension.

Reported values are always attained ratios: a minimization result is an
upper bound on the infimum and is flagged ``upper-bound-only`` unless the
exact p=q=2 path or dense sampling corroborates it.  Identical seeds give
bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import DomainError
from .weighted_ops import OperatorMatrix

_TINY = 1e-300


@dataclass(frozen=True)
class OracleConfig:
    seed: int = 0
    restarts: int = 32
    max_iterations: int = 2000
    step_init: float = 1.0
    step_shrink: float = 0.5
    step_grow: float = 1.3
    armijo: float = 1e-4
    stall_iterations: int = 25
    stall_rtol: float = 1e-12
    coarse_stall_iterations: int = 150
    coarse_stall_rtol: float = 1e-9
    column_iteration_cap: int = 600
    force_general_path: bool = False  # skip the exact p=q=2 shortcut (cross-validation)
    rank_tolerance_factor: float = 1e-9
    dense_sampling_dimension_cap: int = 6
    dense_samples: int = 4096

    def __post_init__(self):
        if self.restarts < 1 or self.max_iterations < 1 or self.dense_samples < 1:
            raise DomainError("restarts, max_iterations and dense_samples must be positive")
        if not (0 < self.step_shrink < 1 < self.step_grow):
            raise DomainError("need 0 < step_shrink < 1 < step_grow")
        if self.rank_tolerance_factor <= 0:
            raise DomainError("rank tolerance factor must be positive")


DEFAULT_CONFIG = OracleConfig()


@dataclass(frozen=True)
class OracleResult:
    """An attained ratio with its certificate probe and provenance."""

    value: float
    certificate: np.ndarray | None
    method: str
    flags: tuple[str, ...] = ()
    notes: tuple[str, ...] = ()

    @property
    def flagged(self) -> bool:
        return bool(self.flags)

    def to_dict(self) -> dict:
        cert = None
        if self.certificate is not None:
            cert = [[float(z.real), float(z.imag)] for z in np.asarray(self.certificate)]
        return {
            "value": self.value,
            "method": self.method,
            "flags": list(self.flags),
            "notes": list(self.notes),
            "certificate": cert,
        }


def _weighted(m: OperatorMatrix) -> np.ndarray:
    return m.weighted()


def singular_values(m: OperatorMatrix) -> np.ndarray:
    return np.linalg.svd(_weighted(m), compute_uv=False)


def numeric_rank(m: OperatorMatrix, cfg: OracleConfig | None = None) -> int:
    """Singular values above rank_tolerance_factor * sigma_max, in L^2(mu)."""
    cfg = cfg or DEFAULT_CONFIG
    sv = singular_values(m)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > cfg.rank_tolerance_factor * sv[0]))


def kernel_vectors(m: OperatorMatrix, cfg: OracleConfig | None = None) -> np.ndarray:
    """Columns: a basis of the numeric nullspace, orthonormal in the weighted
    inner product <f, g> = sum f conj(g) mu."""
    cfg = cfg or DEFAULT_CONFIG
    w = _weighted(m)
    _, sv, vh = np.linalg.svd(w)
    scale = sv[0] if sv.size and sv[0] > 0 else 0.0
    rank = int(np.sum(sv > cfg.rank_tolerance_factor * scale)) if scale else 0
    null = vh[rank:].conj().T  # orthonormal columns in plain l2
    return (1.0 / np.sqrt(m.weights_in))[:, None] * null


def range_basis(m: OperatorMatrix, cfg: OracleConfig | None = None) -> np.ndarray:
    """Columns: a basis of the numeric range, orthonormal in L^2(mu_out)."""
    cfg = cfg or DEFAULT_CONFIG
    w = _weighted(m)
    u, sv, _ = np.linalg.svd(w)
    scale = sv[0] if sv.size and sv[0] > 0 else 0.0
    rank = int(np.sum(sv > cfg.rank_tolerance_factor * scale)) if scale else 0
    return (1.0 / np.sqrt(m.weights_out))[:, None] * u[:, :rank]


def _norms_cols(values: np.ndarray, mu: np.ndarray, p: float) -> np.ndarray:
    return np.sum(np.abs(values) ** p * mu[:, None], axis=0) ** (1.0 / p)


def _ratio_cols(m: OperatorMatrix, F: np.ndarray, p: float, q: float) -> np.ndarray:
    num = _norms_cols(m.matrix @ F, m.weights_out, q)
    den = _norms_cols(F, m.weights_in, p)
    return num / np.where(den > 0, den, np.inf)


def evaluate_ratio(m: OperatorMatrix, f: np.ndarray, p: float, q: float) -> float:
    """||Mf||_q / ||f||_p for a single probe."""
    return float(_ratio_cols(m, np.asarray(f, dtype=complex).reshape(-1, 1), p, q)[0])


def _grad_ratio(m: OperatorMatrix, F: np.ndarray, p: float, q: float):
    """Ratio values and their complex gradients, column-wise.

    The gradient is taken in the real pairing Re<grad, df>; the |.|^(e-2)
    factors are zeroed where the magnitude underflows (subgradient choice).
    """
    G = m.matrix @ F
    ag = np.abs(G)
    af = np.abs(F)
    Nq = np.sum(ag**q * m.weights_out[:, None], axis=0)
    Dp = np.sum(af**p * m.weights_in[:, None], axis=0)
    N = Nq ** (1.0 / q)
    D = Dp ** (1.0 / p)
    gpow = np.where(ag > _TINY, np.where(ag > _TINY, ag, 1.0) ** (q - 2.0), 0.0)
    fpow = np.where(af > _TINY, np.where(af > _TINY, af, 1.0) ** (p - 2.0), 0.0)
    gradN = (m.matrix.conj().T @ (m.weights_out[:, None] * gpow * G)) * np.where(N > 0, N ** (1.0 - q), 0.0)
    gradD = (m.weights_in[:, None] * fpow * F) * np.where(D > 0, D ** (1.0 - p), 0.0)
    R = N / D
    gradR = (gradN - R[None, :] * gradD) / D[None, :]
    return R, gradR


def _project_out(F: np.ndarray, K: np.ndarray | None, mu: np.ndarray) -> np.ndarray:
    if K is None or K.shape[1] == 0:
        return F
    return F - K @ (K.conj().T @ (mu[:, None] * F))


def _power_refine(
    m: OperatorMatrix, p: float, q: float, F: np.ndarray, cfg: OracleConfig
) -> np.ndarray:
    """Duality-map power iteration toward ratio maximizers, column-wise.

    Fixed points solve the stationarity condition of ||Mf||_q / ||f||_p; the
    update is f <- J_{p'}(M^H J_q(Mf) / mu_in) with J_e(v) = |v|^{e-2} v.  The
    iteration is not monotone for every exponent pair, so each column keeps
    its best attained probe; it excels exactly where plain gradient ascent
    crawls (sharply concentrated extremizers at extreme exponent ratios).
    """
    best_vals = _ratio_cols(m, F, p, q)
    best_F = F.copy()
    X = F.copy()
    expo = 1.0 / (p - 1.0)
    stall = np.zeros(F.shape[1], dtype=int)
    for _ in range(cfg.max_iterations):
        Y = m.matrix @ X
        ay = np.abs(Y)
        T = m.weights_out[:, None] * np.where(ay > _TINY, np.where(ay > _TINY, ay, 1.0) ** (q - 2.0), 0.0) * Y
        Z = (m.matrix.conj().T @ T) / m.weights_in[:, None]
        az = np.abs(Z)
        X_new = np.where(az > _TINY, np.where(az > _TINY, az, 1.0) ** (expo - 1.0), 0.0) * Z
        den = _norms_cols(X_new, m.weights_in, p)
        ok = den > _TINY
        X = np.where(ok[None, :], X_new / np.where(ok, den, 1.0)[None, :], X)
        vals = _ratio_cols(m, X, p, q)
        better = vals > best_vals * (1.0 + 1e-13)
        best_vals = np.where(better, vals, best_vals)
        best_F[:, better] = X[:, better]
        stall = np.where(better, 0, stall + 1)
        if np.all(stall >= 10):
            break
    return best_F


def _start_set(m: OperatorMatrix, p: float, restarts: int, rng: np.random.Generator,
               K: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
    """Starts = coordinate indicators + seeded random sphere points, projected
    (if restricting) and normalized.  Returns (columns, is_random mask)."""
    n = m.shape[1]
    ind = np.eye(n, dtype=complex)
    rand = rng.standard_normal((n, restarts)) + 1j * rng.standard_normal((n, restarts))
    F = np.concatenate([ind, rand], axis=1)
    is_random = np.arange(F.shape[1]) >= n
    F = _project_out(F, K, m.weights_in)
    den = _norms_cols(F, m.weights_in, p)
    keep = den > 1e-12 * max(float(den.max(initial=0.0)), 1.0)
    return F[:, keep] / den[keep][None, :], is_random[keep]


def _optimize_ratio(
    m: OperatorMatrix,
    p: float,
    q: float,
    mode: Literal["min", "max"],
    K: np.ndarray | None,
    cfg: OracleConfig,
):
    """Multi-start projected gradient on the L^p sphere; returns
    (best value, best probe, per-start final values for the random restarts,
    converged flag)."""
    sgn = 1.0 if mode == "min" else -1.0
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    F, is_random = _start_set(m, p, cfg.restarts, rng, K)
    if mode == "max" and K is None:
        F = _power_refine(m, p, q, F, cfg)
    n_starts = F.shape[1]
    alpha = np.full(n_starts, cfg.step_init)
    vals = _ratio_cols(m, F, p, q)
    best_per_start = vals.copy()
    stall = np.zeros(n_starts, dtype=int)
    coarse_stall = np.zeros(n_starts, dtype=int)
    spent = np.zeros(n_starts, dtype=int)
    stalled_any = False
    active = np.ones(n_starts, dtype=bool)
    best_val = float(vals.min() if mode == "min" else vals.max())
    best_f = F[:, int(vals.argmin() if mode == "min" else vals.argmax())].copy()

    for _ in range(cfg.max_iterations):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        Fa = F[:, idx]
        R, G = _grad_ratio(m, Fa, p, q)
        gnorm2 = np.sum(np.abs(G) ** 2, axis=0)
        trial = Fa - sgn * alpha[idx][None, :] * G
        trial = _project_out(trial, K, m.weights_in)
        den = _norms_cols(trial, m.weights_in, p)
        ok_den = den > _TINY
        trial = np.where(ok_den[None, :], trial / np.where(ok_den, den, 1.0)[None, :], Fa)
        Rt = _ratio_cols(m, trial, p, q)
        improve = (R - Rt) * sgn  # positive means better for this mode
        accept = ok_den & (improve >= cfg.armijo * alpha[idx] * gnorm2)
        F[:, idx[accept]] = trial[:, accept]
        alpha[idx[accept]] = np.minimum(alpha[idx[accept]] * cfg.step_grow, 1e6)
        alpha[idx[~accept]] *= cfg.step_shrink
        newvals = np.where(accept, Rt, R)
        gain = (best_per_start[idx] - newvals) * sgn  # positive = real progress
        scale_b = np.maximum(np.abs(best_per_start[idx]), 1e-30)
        fine = (gain < cfg.stall_rtol * scale_b) | (alpha[idx] < 1e-16)
        stall[idx] = np.where(fine, stall[idx] + 1, 0)
        coarse = gain < cfg.coarse_stall_rtol * scale_b
        coarse_stall[idx] = np.where(coarse, coarse_stall[idx] + 1, 0)
        better = (newvals - best_per_start[idx]) * sgn < 0
        best_per_start[idx] = np.where(better, newvals, best_per_start[idx])
        spent[idx] += 1
        done = (stall[idx] >= cfg.stall_iterations) | (coarse_stall[idx] >= cfg.coarse_stall_iterations)
        if done.any():
            stalled_any = True
        done |= spent[idx] >= cfg.column_iteration_cap
        active[idx[done]] = False
        cand = int(newvals.argmin() if mode == "min" else newvals.argmax())
        if (newvals[cand] - best_val) * sgn < 0:
            best_val = float(newvals[cand])
            best_f = F[:, idx[cand]].copy()

    exhausted = bool(active.any()) or not stalled_any
    return best_val, best_f, best_per_start[is_random], exhausted


def _dense_sample_best(
    m: OperatorMatrix, p: float, q: float, mode: str, K: np.ndarray | None, cfg: OracleConfig
):
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0x5A17)))
    n = m.shape[1]
    F = rng.standard_normal((n, cfg.dense_samples)) + 1j * rng.standard_normal((n, cfg.dense_samples))
    F = np.concatenate([np.eye(n, dtype=complex), F], axis=1)
    F = _project_out(F, K, m.weights_in)
    den = _norms_cols(F, m.weights_in, p)
    keep = den > 1e-12 * max(float(den.max(initial=0.0)), 1.0)
    if not keep.any():
        return None, None
    F = F[:, keep] / den[keep][None, :]
    vals = _ratio_cols(m, F, p, q)
    i = int(vals.argmin() if mode == "min" else vals.argmax())
    return float(vals[i]), F[:, i].copy()


def _exact_l2_path(m: OperatorMatrix, mode: str, restricted: bool, cfg: OracleConfig):
    w = _weighted(m)
    _, sv, vh = np.linalg.svd(w)  # vh is n x n (full), rows past len(sv) have sigma 0
    scale = sv[0] if sv.size and sv[0] > 0 else 0.0
    rank = int(np.sum(sv > cfg.rank_tolerance_factor * scale)) if scale else 0
    if mode == "max":
        k = 0
    elif restricted:
        if rank == 0:
            return OracleResult(0.0, None, "degenerate", notes=("kernel is the whole domain",))
        k = rank - 1
    else:
        k = vh.shape[0] - 1
    f = (1.0 / np.sqrt(m.weights_in)) * vh[k].conj()
    value = evaluate_ratio(m, f, 2.0, 2.0)
    return OracleResult(value, f, "weighted-svd")


def _optimize(m, p, q, mode, restrict, cfg):
    if p == 2.0 and q == 2.0 and not cfg.force_general_path:
        return _exact_l2_path(m, mode, restrict, cfg)

    K = None
    if restrict:
        K = kernel_vectors(m, cfg)
        if K.shape[1] == m.shape[1]:
            return OracleResult(0.0, None, "degenerate", notes=("kernel is the whole domain",))
        if K.shape[1] == 0:
            K = None
    elif mode == "min":
        K0 = kernel_vectors(m, cfg)
        if K0.shape[1] > 0:
            f = K0[:, 0]
            return OracleResult(evaluate_ratio(m, f, p, q), f, "kernel-vector")

    best_val, best_f, random_finals, exhausted = _optimize_ratio(m, p, q, mode, K, cfg)
    method = "projected-gradient"
    flags: list[str] = []
    notes: list[str] = []
    corroborated = False
    if m.shape[1] <= cfg.dense_sampling_dimension_cap:
        sval, sf = _dense_sample_best(m, p, q, mode, K, cfg)
        if sval is not None:
            if (sval - best_val) * (1 if mode == "min" else -1) < 0:
                best_val, best_f = sval, sf
                method = "dense-sampling"
            rel = abs(sval - best_val) / max(abs(best_val), 1e-30)
            if rel <= 1e-6:
                corroborated = True
                notes.append("dense sampling corroborates")
    if exhausted:
        flags.append("max-iterations-reached")
    if mode == "min" and not corroborated:
        flags.append("upper-bound-only")
    if mode == "max":
        near = np.sum(np.abs(random_finals - best_val) <= 1e-6 * max(abs(best_val), 1e-30))
        if near < min(2, len(random_finals)):
            flags.append("restarts-disagree")
    best_val = evaluate_ratio(m, best_f, p, q)  # certificate re-evaluates exactly
    return OracleResult(best_val, best_f, method, tuple(flags), tuple(notes))


def min_modulus(
    m: OperatorMatrix,
    p: float,
    q: float,
    restrict_to_kernel_complement: bool = False,
    cfg: OracleConfig | None = None,
) -> OracleResult:
    """inf ||Mf||_q / ||f||_p over f != 0, optionally over the weighted-l2
    orthogonal complement of the numeric kernel.

    Exact (smallest weighted singular value) when p = q = 2; otherwise the
    smallest certified attained ratio found by the optimizer.  When the
    kernel is nontrivial and no restriction is requested the infimum is 0,
    witnessed by a kernel vector.
    """
    return _optimize(m, p, q, "min", restrict_to_kernel_complement, cfg or DEFAULT_CONFIG)


def maximize_ratio(
    m: OperatorMatrix, p: float, q: float, cfg: OracleConfig | None = None
) -> OracleResult:
    """sup ||Mf||_q / ||f||_p: the L^p -> L^q operator norm, as an attained ratio."""
    return _optimize(m, p, q, "max", False, cfg or DEFAULT_CONFIG)


def distance_to_range(
    m: OperatorMatrix, g: np.ndarray, q: float, cfg: OracleConfig | None = None
) -> float:
    """min over f of ||g - Mf||_q, i.e. the L^q(mu_out) distance from g to the range.

    Weighted least squares for q = 2; otherwise convex minimization over the
    range basis coefficients (L-BFGS with analytic gradient, started at the
    least-squares solution).  Zero (at rank tolerance) iff g is in the range.
    """
    cfg = cfg or DEFAULT_CONFIG
    g = np.asarray(g, dtype=complex)
    B = range_basis(m, cfg)
    mu = m.weights_out
    if B.shape[1] == 0:
        return float(np.sum(np.abs(g) ** q * mu) ** (1.0 / q))
    c_ls = B.conj().T @ (mu * g)  # orthonormal columns in L^2(mu)
    if q == 2.0:
        res = g - B @ c_ls
        return float(np.sqrt(np.sum(np.abs(res) ** 2 * mu).real))

    from scipy.optimize import minimize

    k = B.shape[1]

    def objective(z):
        c = z[:k] + 1j * z[k:]
        res = g - B @ c
        ar = np.abs(res)
        h = float(np.sum(ar**q * mu))
        rpow = np.where(ar > _TINY, np.where(ar > _TINY, ar, 1.0) ** (q - 2.0), 0.0)
        t = B.conj().T @ (mu * rpow * res)
        grad = -q * np.concatenate([t.real, t.imag])
        return h, grad

    z0 = np.concatenate([c_ls.real, c_ls.imag])
    out = minimize(objective, z0, jac=True, method="L-BFGS-B",
                   options={"maxiter": 500, "ftol": 1e-16, "gtol": 1e-12})
    h = min(objective(out.x)[0], objective(z0)[0])
    return float(max(h, 0.0) ** (1.0 / q))

"""Generalised memory polynomial basis, least-squares fitting and indirect-learning DPD."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analysis import bussgang_decompose, measure_nmse
from .pa import SyntheticPa, synthetic_pa_apply


@dataclass(frozen=True)
class GmpStructure:
    """Orders, memory depths and envelope lags of a GMP.

    The aligned branch uses envelope powers ``0..P_a-1`` and the lagging /
    leading branches ``1..P_b`` / ``1..P_c``.  ``GmpStructure.five_five_zero()``
    is the ``P_a = L_a = 5`` structure without cross terms.
    """

    P_a: int
    L_a: int
    P_b: int = 0
    L_b: int = 0
    Q_b: int = 0
    P_c: int = 0
    L_c: int = 0
    Q_c: int = 0

    def __post_init__(self):
        for name, v in vars(self).items():
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a non-negative integer")
        if self.n_terms < 1:
            raise ValueError("structure has no terms")

    @classmethod
    def five_five_zero(cls) -> "GmpStructure":
        return cls(5, 5)

    @property
    def n_terms(self) -> int:
        return self.P_a * self.L_a + self.P_b * self.L_b * self.Q_b + self.P_c * self.L_c * self.Q_c

    @property
    def history(self) -> int:
        """Samples of past input needed by the first valid row."""
        lag = self.L_b - 1 + self.Q_b if self.P_b * self.L_b * self.Q_b else 0
        lead_mem = self.L_c - 1 if self.P_c * self.L_c * self.Q_c else 0
        return max(self.L_a - 1 if self.P_a * self.L_a else 0, lag, lead_mem)

    @property
    def lookahead(self) -> int:
        return self.Q_c if self.P_c * self.L_c * self.Q_c else 0

    def valid_rows(self, n: int) -> slice:
        return slice(self.history, n - self.lookahead)


@dataclass(frozen=True)
class DpdCoefficients:
    """GMP coefficient vector plus training diagnostics."""

    theta: np.ndarray
    structure: GmpStructure
    regularized: bool = False
    diverged: bool = False
    nmse_history: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=complex).reshape(-1)
        object.__setattr__(self, "theta", theta)
        if theta.size != self.structure.n_terms:
            raise ValueError("theta length does not match the structure")
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta must be finite")

    @classmethod
    def identity(cls, structure: GmpStructure) -> "DpdCoefficients":
        """Pass-through predistorter (first aligned coefficient 1)."""
        if structure.P_a * structure.L_a == 0:
            raise ValueError("identity needs an aligned branch")
        theta = np.zeros(structure.n_terms, dtype=complex)
        theta[0] = 1.0
        return cls(theta, structure)


def _shift(u, d):
    """``out[n] = u[n - d]`` with zeros outside the record."""
    out = np.zeros_like(u)
    if d >= 0:
        out[d:] = u[: u.size - d] if d else u
    else:
        out[:d] = u[-d:]
    return out


def gmp_basis(u, g: GmpStructure, pad: bool = False) -> np.ndarray:
    """Design matrix of the GMP.

    Columns are the aligned, lagging and leading terms, each ordered by
    ``(p, l, q)`` lexicographically.  By default only rows with a complete
    history are returned (``g.valid_rows``); ``pad=True`` returns one row per
    sample, treating samples outside the record as zero.
    """
    u = np.asarray(u, dtype=complex).reshape(-1)
    n = u.size
    if not pad and n - g.lookahead - g.history < 1:
        raise ValueError(f"sequence of {n} samples is too short for this structure")
    cols = []
    env = np.abs(u)
    for p in range(g.P_a):
        for l in range(g.L_a):
            cols.append(_shift(u * env**p, l))
    if g.Q_b:
        for p in range(1, g.P_b + 1):
            for l in range(g.L_b):
                for q in range(1, g.Q_b + 1):
                    cols.append(_shift(u, l) * _shift(env, l + q) ** p)
    if g.Q_c:
        for p in range(1, g.P_c + 1):
            for l in range(g.L_c):
                for q in range(1, g.Q_c + 1):
                    cols.append(_shift(u, l) * _shift(env, l - q) ** p)
    mat = np.stack(cols, axis=1)
    return mat if pad else mat[g.valid_rows(n)]


def gmp_apply(u, coeffs: DpdCoefficients) -> np.ndarray:
    """Predistort ``u`` (zero history before the first sample)."""
    return gmp_basis(u, coeffs.structure, pad=True) @ coeffs.theta


def ls_fit(design, target, rcond: float = 1e-12) -> tuple[np.ndarray, bool]:
    """Least-squares coefficients and whether ridge regularisation was needed.

    Rank-deficient designs are solved with a small ridge term
    (``1e-10`` of the mean column energy) instead.
    """
    a = np.asarray(design, dtype=complex)
    b = np.asarray(target, dtype=complex).reshape(-1)
    if a.ndim != 2 or a.shape[0] != b.size:
        raise ValueError("design rows must match target length")
    if a.shape[0] < a.shape[1]:
        raise ValueError("need at least as many rows as columns")
    theta, _, rank, _ = np.linalg.lstsq(a, b, rcond=rcond)
    if rank == a.shape[1]:
        return theta, False
    gram = a.conj().T @ a
    delta = 1e-10 * max(float(np.real(np.trace(gram))) / a.shape[1], 1e-300)
    theta = np.linalg.solve(gram + delta * np.eye(a.shape[1]), a.conj().T @ b)
    return theta, True


def dpd_train_indirect(u, pa: SyntheticPa, g: GmpStructure, iters: int = 3) -> DpdCoefficients:
    """Indirect-learning DPD training.

    Each iteration predistorts ``u``, runs the PA, normalises the output by
    the Bussgang gain of that pass and refits the post-inverse that maps the
    normalised output back to the PA input.  The coefficient set with the
    lowest measured NMSE (pass-through included) is returned, so training
    never makes the link worse.  Three consecutive worsening passes stop the
    loop and set ``diverged``.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    u = np.asarray(u, dtype=complex).reshape(-1)
    rows = g.valid_rows(u.size)
    coeffs = DpdCoefficients.identity(g)
    best, best_nmse = coeffs, np.inf
    history: list[float] = []
    regularized = False
    worse = 0
    diverged = False
    for i in range(iters + 1):
        x = gmp_apply(u, coeffs)
        y = synthetic_pa_apply(x, pa)
        gain, _ = bussgang_decompose(u, y)
        nmse = measure_nmse(u, y, gain)
        history.append(nmse)
        if nmse < best_nmse:
            best, best_nmse, worse = coeffs, nmse, 0
        elif i > 0:
            worse += 1
            if worse >= 3:
                diverged = True
                break
        if i == iters:
            break
        y_hat = y / gain
        theta, reg = ls_fit(gmp_basis(y_hat, g, pad=True)[rows], x[rows])
        regularized = regularized or reg
        coeffs = DpdCoefficients(theta, g)
    return DpdCoefficients(best.theta, g, regularized, diverged, tuple(history))

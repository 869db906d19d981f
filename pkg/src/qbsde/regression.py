"""Least-squares projection onto a polynomial basis of the Markov state.

One SVD per time step is shared between the value regression and the
martingale-increment regressions.  Columns are scaled to unit spread before
the decomposition and singular values below a relative cutoff are dropped,
so rank-deficient designs (e.g. the constant state at t = 0) fall back to
the minimum-norm projection instead of failing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBasisError

SVD_RCOND = 1e-12


@dataclass(frozen=True)
class BasisSpec:
    """Regression basis over the Markov state.

    kind "poly": tensor polynomials of total degree <= degree.
    kind "binned": quantile cells of a scalar state with a linear fit per
    cell (local regression; tracks kinked targets without global wiggle).
    Caller-supplied feature columns are appended as-is.
    """

    degree: int = 3
    kind: str = "poly"
    bins: int = 24

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("polynomial degree must be nonnegative")
        if self.kind not in ("poly", "binned"):
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.bins < 1:
            raise ValueError("bins must be positive")

    def _exponents(self, n_vars: int) -> list[tuple[int, ...]]:
        exps: list[tuple[int, ...]] = []

        def rec(prefix, remaining, budget):
            if remaining == 0:
                exps.append(tuple(prefix))
                return
            for k in range(budget + 1):
                rec(prefix + [k], remaining - 1, budget - k)

        rec([], n_vars, self.degree)
        return exps

    def design(self, state: np.ndarray, extra: np.ndarray | None = None) -> np.ndarray:
        """Design matrix for state (n, n_vars); extra columns appended as-is."""
        state = np.atleast_2d(np.asarray(state, dtype=float))
        n, n_vars = state.shape
        if self.kind == "binned":
            if n_vars != 1:
                raise ValueError("binned basis supports a one-dimensional state only")
            design = self._binned_design(state[:, 0])
        else:
            cols = []
            for exp in self._exponents(n_vars):
                col = np.ones(n)
                for j, e in enumerate(exp):
                    if e:
                        col = col * state[:, j] ** e
                cols.append(col)
            design = np.column_stack(cols)
        if extra is not None:
            extra = np.atleast_2d(np.asarray(extra, dtype=float))
            if extra.shape[0] != n:
                extra = extra.T
            design = np.column_stack([design, extra])
        return design

    def _binned_design(self, w: np.ndarray) -> np.ndarray:
        # cell edges from sample quantiles of the full cross-section; a
        # degenerate (constant) state collapses to a single active cell
        edges = np.unique(np.quantile(w, np.linspace(0.0, 1.0, self.bins + 1)[1:-1]))
        idx = np.searchsorted(edges, w, side="right")
        n_cells = edges.size + 1
        onehot = np.zeros((w.size, n_cells))
        onehot[np.arange(w.size), idx] = 1.0
        return np.concatenate([onehot, onehot * w[:, None]], axis=1)


def make_regression(basis: BasisSpec, state: np.ndarray, extra: np.ndarray | None = None):
    """Pick the projection backend for one time step.

    Binned bases without extra columns use the block-diagonal per-cell
    solver (O(n)); everything else goes through one shared SVD.
    """
    state = np.atleast_2d(np.asarray(state, dtype=float))
    if basis.kind == "binned" and extra is None and state.shape[1] == 1:
        return BinnedRegression(state[:, 0], basis.bins)
    return NodeRegression(basis.design(state, extra))


class BinnedRegression:
    """Local least squares: intercept + slope within quantile cells of a scalar state.

    The normal matrix is block-diagonal over cells, so fits cost O(n) and the
    pseudo-inverse is assembled cell by cell in the column order used by
    ``BasisSpec.design`` (all indicators first, then indicator * w).
    """

    def __init__(self, w: np.ndarray, bins: int):
        w = np.asarray(w, dtype=float)
        if not np.all(np.isfinite(w)):
            raise DegenerateBasisError("non-finite values in regression design")
        if w.size == 0:
            raise DegenerateBasisError("empty regression design")
        edges = np.unique(np.quantile(w, np.linspace(0.0, 1.0, bins + 1)[1:-1]))
        self._idx = np.searchsorted(edges, w, side="right")
        self._w = w
        self.n_cells = edges.size + 1
        self.n_samples = w.size
        self.n_features = 2 * self.n_cells

        c = np.bincount(self._idx, minlength=self.n_cells)
        s1 = np.bincount(self._idx, weights=w, minlength=self.n_cells)
        s2 = np.bincount(self._idx, weights=w * w, minlength=self.n_cells)
        a = np.zeros((self.n_cells, 2, 2))
        a[:, 0, 0] = c
        a[:, 0, 1] = a[:, 1, 0] = s1
        a[:, 1, 1] = s2
        u, s, vt = np.linalg.svd(a)
        keep = s > SVD_RCOND * np.maximum(s[:, :1], 1e-300)
        s_inv = np.where(keep, 1.0 / np.where(s > 0, s, 1.0), 0.0)
        self._a_pinv = np.einsum("cij,cj,ckj->cik", vt.transpose(0, 2, 1), s_inv, u)
        self.rank = int(np.count_nonzero(keep))
        if self.rank == 0:
            raise DegenerateBasisError("regression design has rank zero")

    def fit(self, targets: np.ndarray) -> np.ndarray:
        t = np.asarray(targets, dtype=float)
        if not np.all(np.isfinite(t)):
            raise DegenerateBasisError("non-finite regression target")
        squeeze = t.ndim == 1
        t = t.reshape(self.n_samples, -1)
        out = np.empty_like(t)
        for j in range(t.shape[1]):
            t0 = np.bincount(self._idx, weights=t[:, j], minlength=self.n_cells)
            t1 = np.bincount(self._idx, weights=t[:, j] * self._w, minlength=self.n_cells)
            coef = np.einsum("cik,ck->ci", self._a_pinv, np.stack([t0, t1], axis=1))
            out[:, j] = coef[self._idx, 0] + coef[self._idx, 1] * self._w
        return out[:, 0] if squeeze else out

    def residual_variance(self, targets: np.ndarray, fitted: np.ndarray) -> np.ndarray:
        t = np.asarray(targets, dtype=float).reshape(self.n_samples, -1)
        f = np.asarray(fitted, dtype=float).reshape(self.n_samples, -1)
        dof = max(self.n_samples - self.rank, 1)
        return np.sum((t - f) ** 2, axis=0) / dof

    def xtx_pinv(self) -> np.ndarray:
        full = np.zeros((self.n_features, self.n_features))
        C = self.n_cells
        for k in range(C):
            block = self._a_pinv[k]
            full[k, k] = block[0, 0]
            full[k, C + k] = block[0, 1]
            full[C + k, k] = block[1, 0]
            full[C + k, C + k] = block[1, 1]
        return full

    def pointwise_se(self, sigma2: float) -> np.ndarray:
        """Standard error of the fitted value at the sample points, O(n)."""
        p = self._a_pinv[self._idx]
        quad = p[:, 0, 0] + 2.0 * p[:, 0, 1] * self._w + p[:, 1, 1] * self._w * self._w
        return np.sqrt(np.maximum(sigma2 * quad, 0.0))

    def fit_variance(self, sigma2: float) -> np.ndarray:
        """Variance of the fitted value at the sample points."""
        p = self._a_pinv[self._idx]
        quad = p[:, 0, 0] + 2.0 * p[:, 0, 1] * self._w + p[:, 1, 1] * self._w * self._w
        return np.maximum(sigma2 * quad, 0.0)


class NodeRegression:
    """Projection machinery for one time step, reusable across targets."""

    def __init__(self, design: np.ndarray):
        design = np.asarray(design, dtype=float)
        if design.ndim != 2 or design.size == 0:
            raise DegenerateBasisError("empty regression design")
        if not np.all(np.isfinite(design)):
            raise DegenerateBasisError("non-finite values in regression design")
        scale = np.max(np.abs(design), axis=0)
        scale[scale == 0.0] = 1.0
        u, s, vt = np.linalg.svd(design / scale, full_matrices=False)
        keep = s > SVD_RCOND * s[0] if s.size else np.zeros(0, dtype=bool)
        self.rank = int(np.count_nonzero(keep))
        if self.rank == 0:
            raise DegenerateBasisError("regression design has rank zero")
        self._scale = scale
        self._u = u[:, keep]
        self._s = s[keep]
        self._vt = vt[keep]
        self.n_samples, self.n_features = design.shape

    def fit(self, targets: np.ndarray) -> np.ndarray:
        """Fitted values of the LS projection; targets (n,) or (n, m)."""
        t = np.asarray(targets, dtype=float)
        if not np.all(np.isfinite(t)):
            raise DegenerateBasisError("non-finite regression target")
        squeeze = t.ndim == 1
        t = t.reshape(self.n_samples, -1)
        fitted = self._u @ (self._u.T @ t)
        return fitted[:, 0] if squeeze else fitted

    def residual_variance(self, targets: np.ndarray, fitted: np.ndarray) -> np.ndarray:
        t = np.asarray(targets, dtype=float).reshape(self.n_samples, -1)
        f = np.asarray(fitted, dtype=float).reshape(self.n_samples, -1)
        dof = max(self.n_samples - self.rank, 1)
        return np.sum((t - f) ** 2, axis=0) / dof

    def xtx_pinv(self) -> np.ndarray:
        """Pseudo-inverse of X^T X in the original (unscaled) coordinates."""
        v = self._vt.T / self._s
        inner = v @ v.T
        return inner / np.outer(self._scale, self._scale)

    def leverage(self) -> np.ndarray:
        """Diagonal of the hat matrix at the sample points."""
        return np.einsum("ij,ij->i", self._u, self._u)

    def fit_variance(self, sigma2: float) -> np.ndarray:
        """Variance of the fitted value at the sample points."""
        return np.maximum(sigma2 * self.leverage(), 0.0)


def pointwise_se(sigma2: float, xtx_pinv: np.ndarray, features: np.ndarray) -> np.ndarray:
    """Standard error of the fitted value at given feature rows."""
    f = np.atleast_2d(np.asarray(features, dtype=float))
    quad = np.einsum("ij,jk,ik->i", f, xtx_pinv, f)
    return np.sqrt(np.maximum(sigma2 * quad, 0.0))

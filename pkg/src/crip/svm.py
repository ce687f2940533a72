"""Soft-margin SVM trained by SMO, combined one-against-one.

The binary solver follows the usual decomposition scheme: pick the
maximal-violating pair with second-order working-set selection, solve the
two-variable subproblem analytically, stop once the KKT gap
``max_{I_up} -y G - min_{I_low} -y G`` falls below ``tol``.
"""
from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

FORMAT = "crip-svm"
FORMAT_VERSION = 1
KERNELS = ("linear",)
_TAU = 1e-12
_GRAM_BYTES = 1_200_000_000  # larger problems compute kernel rows on demand


class ConvergenceWarning(UserWarning):
    pass


class _LinearKernel:
    def __init__(self, X):
        self.X = X
        n = X.shape[0]
        self.full = X @ X.T if n * n * 8 <= _GRAM_BYTES else None
        self.diag = np.einsum("ij,ij->i", X, X)
        self._cache = {}

    def row(self, i):
        if self.full is not None:
            return self.full[i]
        r = self._cache.get(i)
        if r is None:
            if len(self._cache) > 512:
                self._cache.clear()
            r = self._cache[i] = self.X @ self.X[i]
        return r


@dataclass
class BinarySvm:
    w: np.ndarray
    b: float
    positive: str
    negative: str
    kernel: str = "linear"
    C: float = 1.0
    n_iter: int = 0
    kkt_gap: float = 0.0
    converged: bool = True
    dual_coef: Optional[np.ndarray] = field(default=None, repr=False)  # alpha_i * y_i per training point

    def decision(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.w + self.b

    def swapped(self) -> "BinarySvm":
        """Same hyperplane with positive/negative roles exchanged."""
        coef = None if self.dual_coef is None else -self.dual_coef
        return BinarySvm(-self.w, -self.b, self.negative, self.positive, self.kernel,
                         self.C, self.n_iter, self.kkt_gap, self.converged, coef)


def _check_kernel(kernel):
    if kernel not in KERNELS:
        raise ValueError(f"unsupported kernel {kernel!r}; available: {', '.join(KERNELS)}")


def smo(K: _LinearKernel, y: np.ndarray, C: float, tol: float = 1e-3, max_iter: Optional[int] = None):
    """Solve the SVM dual; returns (alpha, rho, n_iter, gap, converged)."""
    n = y.shape[0]
    if max_iter is None:
        max_iter = max(100_000, 100 * n)
    alpha = np.zeros(n)
    grad = -np.ones(n)
    diag = K.diag
    gap = np.inf
    it = 0
    converged = False
    while it < max_iter:
        yg = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            converged = True
            gap = 0.0
            break
        i = int(np.argmax(np.where(up, yg, -np.inf)))
        gmax = yg[i]
        gmin = np.min(yg[low])
        gap = gmax - gmin
        if gap < tol:
            converged = True
            break
        Ki = K.row(i)
        bdiff = gmax - yg
        cand = low & (bdiff > 0)
        quad = diag[i] + diag - 2.0 * Ki
        quad = np.where(quad > 0, quad, _TAU)
        obj = np.where(cand, -(bdiff * bdiff) / quad, np.inf)
        j = int(np.argmin(obj))
        Kj = K.row(j)

        ai_old, aj_old = alpha[i], alpha[j]
        a = max(diag[i] + diag[j] - 2.0 * Ki[j], _TAU)
        if y[i] != y[j]:
            delta = (-grad[i] - grad[j]) / a
            diff = ai_old - aj_old
            ai, aj = ai_old + delta, aj_old + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            delta = (grad[i] - grad[j]) / a
            total = ai_old + aj_old
            ai, aj = ai_old - delta, aj_old + delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
            elif aj < 0:
                aj, ai = 0.0, total
            if total > C:
                if aj > C:
                    aj, ai = C, total - C
            elif ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        # Q[:, t] = y * y[t] * K[:, t]
        grad += y * (y[i] * (ai - ai_old) * Ki + y[j] * (aj - aj_old) * Kj)
        it += 1

    yg = y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(np.mean(yg[free]))
    else:
        ub, lb = np.inf, -np.inf
        at_ub = ((y < 0) & (alpha >= C)) | ((y > 0) & (alpha <= 0))
        at_lb = ((y > 0) & (alpha >= C)) | ((y < 0) & (alpha <= 0))
        if at_ub.any():
            ub = float(np.min(yg[at_ub]))
        if at_lb.any():
            lb = float(np.max(yg[at_lb]))
        rho = (ub + lb) / 2 if np.isfinite(ub) and np.isfinite(lb) else (ub if np.isfinite(ub) else lb)
    return alpha, rho, it, float(gap), converged


def train_binary(features, labels, C: float = 1.0, kernel: str = "linear", tol: float = 1e-3,
                 max_iter: Optional[int] = None, positive: str = "+1", negative: str = "-1") -> BinarySvm:
    """Train on ``labels`` in {+1, -1}."""
    _check_kernel(kernel)
    if not C > 0:
        raise ValueError(f"C must be > 0, got {C}")
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError("features must be a list of equal-length vectors")
    y = np.asarray(labels, dtype=np.float64)
    if y.shape[0] != X.shape[0]:
        raise ValueError(f"{X.shape[0]} feature vectors but {y.shape[0]} labels")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be +1 or -1")
    if not ((y > 0).any() and (y < 0).any()):
        raise ValueError("training data contains a single class")
    alpha, rho, it, gap, ok = smo(_LinearKernel(X), y, C, tol, max_iter)
    if not ok:
        warnings.warn(f"SMO stopped after {it} iterations with KKT gap {gap:.3g} > {tol}",
                      ConvergenceWarning, stacklevel=2)
    coef = alpha * y
    return BinarySvm(coef @ X, -rho, positive, negative, kernel, float(C), it, gap, ok, coef)


@dataclass
class SvmModel:
    classes: list
    machines: dict
    meta: dict = field(default_factory=dict)
    dimension: int = 0

    def _check(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.dimension:
            raise ValueError(f"feature dimension {X.shape[1]} does not match model dimension {self.dimension}")
        return X

    def votes(self, X):
        """Per-sample vote counts and summed winning margins, shape (n, n_classes)."""
        X = self._check(X)
        index = {c: k for k, c in enumerate(self.classes)}
        votes = np.zeros((X.shape[0], len(self.classes)), dtype=np.int64)
        margins = np.zeros((X.shape[0], len(self.classes)))
        for m in self.machines.values():
            d = m.decision(X)
            pos = d >= 0
            rows = np.arange(X.shape[0])
            winner = np.where(pos, index[m.positive], index[m.negative])
            np.add.at(votes, (rows, winner), 1)
            np.add.at(margins, (rows, winner), np.abs(d))
        return votes, margins

    def predict(self, X) -> list:
        votes, margins = self.votes(X)
        out = []
        for v, mg in zip(votes, margins):
            top = np.flatnonzero(v == v.max())
            if len(top) > 1:
                best = mg[top].max()
                top = top[mg[top] == best]
            out.append(self.classes[int(top[0])])
        return out

    def predict_one(self, x) -> str:
        return self.predict(np.asarray(x)[None, :])[0]

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "classes": list(self.classes),
            "dimension": self.dimension,
            "meta": self.meta,
            "machines": [
                {"positive": m.positive, "negative": m.negative, "kernel": m.kernel, "C": m.C,
                 "bias": m.b, "n_iter": m.n_iter, "kkt_gap": m.kkt_gap, "converged": m.converged,
                 "weights": [float(v) for v in m.w]}
                for m in self.machines.values()
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SvmModel":
        if doc.get("format") != FORMAT:
            raise ValueError("not a crip-svm model document")
        if doc.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model version {doc.get('version')}")
        machines = {}
        for m in doc["machines"]:
            svm = BinarySvm(np.array(m["weights"], dtype=np.float64), float(m["bias"]),
                            m["positive"], m["negative"], m["kernel"], float(m["C"]),
                            int(m["n_iter"]), float(m["kkt_gap"]), bool(m["converged"]))
            machines[(svm.positive, svm.negative)] = svm
        return cls(list(doc["classes"]), machines, dict(doc.get("meta", {})), int(doc["dimension"]))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "SvmModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def train_multiclass(features, labels: Sequence[str], C: float = 1.0, kernel: str = "linear",
                     classes: Optional[Sequence[str]] = None, tol: float = 1e-3,
                     meta: Optional[dict] = None) -> SvmModel:
    """One binary machine per unordered class pair, trained on that pair only.

    The earlier class in ``classes`` order is the machine's positive side.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    labels = np.asarray(labels, dtype=object)
    if X.shape[0] != labels.shape[0]:
        raise ValueError(f"{X.shape[0]} feature vectors but {labels.shape[0]} labels")
    if classes is None:
        classes = list(dict.fromkeys(labels.tolist()))
    classes = list(classes)
    if len(classes) < 2:
        raise ValueError("need at least 2 classes")
    for c in classes:
        if not np.any(labels == c):
            raise ValueError(f"class {c!r} has no training samples")
    extra = set(labels.tolist()) - set(classes)
    if extra:
        raise ValueError(f"labels outside the class list: {sorted(extra)}")
    machines = {}
    for a, b in itertools.combinations(classes, 2):
        mask = (labels == a) | (labels == b)
        y = np.where(labels[mask] == a, 1.0, -1.0)
        machines[(a, b)] = train_binary(X[mask], y, C=C, kernel=kernel, tol=tol, positive=a, negative=b)
    return SvmModel(classes, machines, dict(meta or {}), X.shape[1])

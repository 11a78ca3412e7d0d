"""First-stage VCG payments, empirical-deviation tracking and settlements.

The tracker keeps, for every load ``i``:

* marginal report counts ``N_i(nu)`` giving ``f_{i,nu}(L) = N_i(nu)/L - theta_i(nu)``;
* joint counts of (own report, others' reported profile) giving
  ``h_{i,nu,eta}(L) = [N_i(nu, eta) - theta_i(nu) M_{-i}(eta)] / L``.

Only observed profiles ``eta`` are stored: both terms of ``h`` vanish on an
unobserved profile. Two backends share one interface. The dense one indexes
every possible ``eta`` and updates whole blocks of days with cumulative
sums; it is used when ``|types|**(n-1)`` is small. The sparse one stores
distinct observed full profiles as nodes and links, per load, the nodes that
agree off that load; it handles thousands of loads.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import PenaltySchedule

DENSE_LIMIT = 4096


@dataclass(frozen=True)
class PaymentRecord:
    p1: float
    p2: float
    penalty_applied: bool
    realized_reported_cost: float

    @property
    def total(self) -> float:
        return self.p1 + self.p2


def first_stage_payment(w_minus_i: float, w_star: float, expected_load_cost_i: float) -> float:
    """VCG payment: externality of load ``i`` plus its own expected cost."""
    return w_minus_i - (w_star - expected_load_cost_i)


def second_stage_settlement(
    l: int,
    realized_reported_cost,
    expected_load_cost_i,
    event,
    schedule: PenaltySchedule,
):
    """Realised-minus-expected reported cost, less ``J_p(l)`` on a penalty day.

    Works elementwise on arrays as well as on scalars.
    """
    pen = schedule.penalty(l)
    out = np.asarray(realized_reported_cost, dtype=float) - expected_load_cost_i - pen * np.asarray(event, dtype=float)
    return out if out.ndim else float(out)


def day_utility(payment_total, true_curtailment_cost):
    return payment_total - true_curtailment_cost


def long_run_average(utilities: Sequence[float], tail_fraction: float = 0.5) -> tuple[float, float]:
    """Horizon mean and the smallest running mean over the final ``tail_fraction``.

    The tail minimum stands in for the liminf of the running average.
    """
    u = np.asarray(utilities, dtype=float)
    if u.size == 0:
        raise ValueError("empty utility stream")
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must lie in (0, 1]")
    running = np.cumsum(u, axis=0) / np.arange(1, len(u) + 1).reshape((-1,) + (1,) * (u.ndim - 1))
    start = int(np.floor(len(u) * (1 - tail_fraction)))
    start = min(start, len(u) - 1)
    return running[-1], running[start:].min(axis=0)


def _single_numerator(theta_hat: np.ndarray) -> np.ndarray:
    """``max_nu |1{nu=t} - theta(nu)|`` for each load and own type ``t``; shape (n, k)."""
    n, k = theta_hat.shape
    out = np.empty((n, k))
    for t in range(k):
        others = np.delete(theta_hat, t, axis=1)
        best_other = others.max(axis=1) if k > 1 else np.zeros(n)
        out[:, t] = np.maximum(1.0 - theta_hat[:, t], best_other)
    return out


class _DenseJoint:
    def __init__(self, theta_hat: np.ndarray):
        self.theta = theta_hat
        self.n, self.k = theta_hat.shape
        self.C = self.k ** (self.n - 1)
        # digit weights of the others' profile code, one row per load
        self.code_w = np.zeros((self.n, self.n), dtype=np.int64)
        for i in range(self.n):
            p = 1
            for j in range(self.n - 1, -1, -1):
                if j != i:
                    self.code_w[i, j] = p
                    p *= self.k
        self.J = np.zeros((self.n, self.C * self.k), dtype=np.int64)

    def update_block(self, profiles: np.ndarray, L0: int) -> np.ndarray:
        step = max(1, (1 << 22) // (self.C * self.k))
        if len(profiles) > step:
            parts = [self.update_block(profiles[s:s + step], L0 + s) for s in range(0, len(profiles), step)]
            return np.concatenate(parts, axis=0)
        B = len(profiles)
        codes = profiles @ self.code_w.T  # (B, n)
        l = np.arange(L0 + 1, L0 + B + 1, dtype=float)
        sup = np.empty((B, self.n))
        for i in range(self.n):
            idx = codes[:, i] * self.k + profiles[:, i]
            onehot = np.zeros((B, self.C * self.k), dtype=np.int64)
            onehot[np.arange(B), idx] = 1
            cum = np.cumsum(onehot, axis=0) + self.J[i]
            cum3 = cum.reshape(B, self.C, self.k)
            M = cum3.sum(axis=2, keepdims=True)
            num = np.abs(cum3 - self.theta[i][None, None, :] * M)
            sup[:, i] = num.reshape(B, -1).max(axis=1) / l
            self.J[i] = cum[-1]
        return sup

    def h_values(self, i: int, L: int) -> dict:
        out = {}
        J = self.J[i].reshape(self.C, self.k)
        M = J.sum(axis=1)
        others = [j for j in range(self.n) if j != i]
        for c in np.flatnonzero(M):
            eta = []
            rem = int(c)
            for j in reversed(others):
                eta.append(rem % self.k)
                rem //= self.k
            eta = tuple(reversed(eta))
            for nu in range(self.k):
                out[(nu, eta)] = (J[c, nu] - self.theta[i, nu] * M[c]) / L
        return out


class _SparseJoint:
    def __init__(self, theta_hat: np.ndarray):
        self.theta = theta_hat
        self.n, self.k = theta_hat.shape
        self.G = _single_numerator(theta_hat)
        rng = np.random.Generator(np.random.PCG64(0xD15C0))
        # linear profile hash; hits are always confirmed by exact comparison
        self.w = rng.integers(1, 2**40, size=self.n, dtype=np.int64)
        self.by_hash: dict[int, list[int]] = defaultdict(list)
        self.hashes: list[int] = []
        self.prof: list[np.ndarray] = []
        self.count: list[int] = []
        self.single: list[np.ndarray] = []
        self.best_single = np.zeros(self.n)
        self.best_multi = np.zeros(self.n)
        self.class_of: dict[tuple[int, int], int] = {}
        self.cls_counts: list[np.ndarray] = []
        self.cls_total: list[int] = []
        self.cls_numer: list[float] = []
        self.load_classes: dict[int, list[int]] = defaultdict(list)

    def _hash(self, P) -> int:
        return int(np.dot(P + 1, self.w))

    def _find(self, P, h) -> int | None:
        for j in self.by_hash.get(h, ()):
            if np.array_equal(self.prof[j], P):
                return j
        return None

    def _bump_class(self, i: int, cid: int, t: int, by: int):
        self.cls_counts[cid][t] += by
        self.cls_total[cid] += by
        c = self.cls_counts[cid]
        self.cls_numer[cid] = float(np.abs(c - self.theta[i] * self.cls_total[cid]).max())
        self.best_multi[i] = max(self.cls_numer[q] for q in self.load_classes[i])

    def update(self, P: np.ndarray) -> None:
        P = np.asarray(P, dtype=np.int64)
        rows = np.arange(self.n)
        g_here = self.G[rows, P]
        h = self._hash(P)
        j = self._find(P, h)
        if j is not None:
            self.count[j] += 1
            cnt = self.count[j]
            s = self.single[j]
            self.best_single = np.where(s, np.maximum(self.best_single, cnt * g_here), self.best_single)
            for i in np.flatnonzero(~s):
                self._bump_class(int(i), self.class_of[(int(i), j)], int(P[i]), 1)
            return

        j = len(self.prof)
        nbrs: dict[int, list[int]] = {}
        if self.prof:
            alt = np.arange(1, self.k + 1, dtype=np.int64)[None, :]
            cand = h + self.w[:, None] * (alt - (P + 1)[:, None])
            hits = np.isin(cand, np.asarray(self.hashes, dtype=np.int64)) & (alt != (P + 1)[:, None])
            for i, a in np.argwhere(hits):
                Q = P.copy()
                Q[i] = a
                q = self._find(Q, int(cand[i, a]))
                if q is not None:
                    nbrs.setdefault(int(i), []).append(q)
        self.prof.append(P)
        self.count.append(1)
        self.hashes.append(h)
        self.by_hash[h].append(j)
        single = np.ones(self.n, dtype=bool)
        self.single.append(single)
        lonely = np.ones(self.n, dtype=bool)
        lonely[list(nbrs)] = False
        self.best_single = np.where(lonely, np.maximum(self.best_single, g_here), self.best_single)
        rescan = []
        for i, qs in nbrs.items():
            cids = {self.class_of[(i, q)] for q in qs if (i, q) in self.class_of}
            if cids:
                assert len(cids) == 1
                cid = cids.pop()
            else:
                assert len(qs) == 1
                q = qs[0]
                cid = len(self.cls_counts)
                self.cls_counts.append(np.zeros(self.k, dtype=np.int64))
                self.cls_total.append(0)
                self.cls_numer.append(0.0)
                self.load_classes[i].append(cid)
                self.class_of[(i, q)] = cid
                self.single[q][i] = False
                self.cls_counts[cid][self.prof[q][i]] += self.count[q]
                self.cls_total[cid] += self.count[q]
                rescan.append(i)
            self.class_of[(i, j)] = cid
            single[i] = False
            self._bump_class(i, cid, int(P[i]), 1)
        for i in rescan:
            best = 0.0
            for q in range(len(self.prof)):
                if self.single[q][i]:
                    best = max(best, self.count[q] * self.G[i, self.prof[q][i]])
            self.best_single[i] = best

    def update_block(self, profiles: np.ndarray, L0: int) -> np.ndarray:
        sup = np.empty(profiles.shape, dtype=float)
        for b, P in enumerate(profiles):
            self.update(P)
            sup[b] = np.maximum(self.best_single, self.best_multi) / (L0 + b + 1)
        return sup

    def h_values(self, i: int, L: int) -> dict:
        groups: dict[tuple, np.ndarray] = {}
        for P, c in zip(self.prof, self.count):
            eta = tuple(int(v) for v in np.delete(P, i))
            groups.setdefault(eta, np.zeros(self.k, dtype=np.int64))[P[i]] += c
        out = {}
        for eta, cnt in groups.items():
            M = cnt.sum()
            for nu in range(self.k):
                out[(nu, eta)] = (cnt[nu] - self.theta[i, nu] * M) / L
        return out


class DeviationTracker:
    """Running report statistics for all loads against their day-ahead bids.

    ``theta_hat`` is the ``(n, k)`` matrix of reported distributions.
    """

    def __init__(self, theta_hat, backend: str = "auto"):
        self.theta_hat = np.asarray(theta_hat, dtype=float)
        self.n, self.k = self.theta_hat.shape
        self.L = 0
        self.N = np.zeros((self.n, self.k), dtype=np.int64)
        if backend == "auto":
            backend = "dense" if self.n >= 1 and self.k ** max(self.n - 1, 0) * self.k <= DENSE_LIMIT else "sparse"
        self.backend = backend
        self._joint = _DenseJoint(self.theta_hat) if backend == "dense" else _SparseJoint(self.theta_hat)
        self._sup_h = np.zeros(self.n)

    def update_block(self, profiles) -> tuple[np.ndarray, np.ndarray]:
        """Fold in ``B`` days of reported profiles ``(B, n)``.

        Returns ``(sup_f, sup_h)``, each ``(B, n)``: the statistics after
        each day of the block.
        """
        profiles = np.atleast_2d(np.asarray(profiles, dtype=np.int64))
        if profiles.shape[1] != self.n:
            raise ValueError(f"profile length {profiles.shape[1]} != {self.n} loads")
        if profiles.size and (profiles.min() < 0 or profiles.max() >= self.k):
            raise ValueError("reported type index outside the type space")
        B = len(profiles)
        if B == 0:
            return np.zeros((0, self.n)), np.zeros((0, self.n))
        l = np.arange(self.L + 1, self.L + B + 1, dtype=float)[:, None]
        sup_f = np.empty((B, self.n))
        for i in range(self.n):
            oh = np.zeros((B, self.k), dtype=np.int64)
            oh[np.arange(B), profiles[:, i]] = 1
            cum = np.cumsum(oh, axis=0) + self.N[i]
            sup_f[:, i] = np.abs(cum / l - self.theta_hat[i]).max(axis=1)
            self.N[i] = cum[-1]
        sup_h = self._joint.update_block(profiles, self.L)
        self.L += B
        self._sup_h = sup_h[-1]
        return sup_f, sup_h

    def update(self, profile) -> "DeviationTracker":
        self.update_block(np.asarray(profile)[None, :])
        return self

    def f_values(self, i: int) -> np.ndarray:
        if self.L == 0:
            return -self.theta_hat[i].copy()
        return self.N[i] / self.L - self.theta_hat[i]

    def h_values(self, i: int) -> dict:
        """``{(nu, eta): h}`` over observed others' profiles ``eta``."""
        if self.L == 0:
            return {}
        return self._joint.h_values(i, self.L)

    @property
    def sup_f(self) -> np.ndarray:
        if self.L == 0:
            return np.zeros(self.n)
        return np.abs(self.N / self.L - self.theta_hat).max(axis=1)

    @property
    def sup_h(self) -> np.ndarray:
        return self._sup_h.copy()

    def events(self, schedule: PenaltySchedule) -> np.ndarray:
        r = schedule.threshold(self.L)
        return (self.sup_f >= r) | (self.sup_h >= r)


def update_tracker(tracker: DeviationTracker, profile) -> DeviationTracker:
    """Fold one day's reported profile into ``tracker`` (in place) and return it."""
    return tracker.update(profile)


def penalty_event(tracker: DeviationTracker, i: int, schedule: PenaltySchedule) -> bool:
    """Whether load ``i`` is penalised at the tracker's current day."""
    if tracker.L == 0:
        return False
    return bool(tracker.events(schedule)[i])


def recount(reports: np.ndarray, theta_hat: np.ndarray) -> tuple[np.ndarray, list[dict]]:
    """Brute-force ``f`` and ``h`` straight from a report log ``(L, n)``."""
    reports = np.asarray(reports)
    L, n = reports.shape
    theta_hat = np.asarray(theta_hat, dtype=float)
    k = theta_hat.shape[1]
    f = np.array([[np.mean(reports[:, i] == nu) - theta_hat[i, nu] for nu in range(k)] for i in range(n)])
    hs = []
    for i in range(n):
        others = np.delete(reports, i, axis=1)
        etas = {tuple(int(v) for v in row) for row in others}
        h = {}
        for eta in etas:
            match = np.all(others == np.array(eta, dtype=reports.dtype), axis=1) if n > 1 else np.ones(L, bool)
            for nu in range(k):
                h[(nu, eta)] = np.sum(match & (reports[:, i] == nu)) / L - theta_hat[i, nu] * np.sum(match) / L
        hs.append(h)
    return f, hs

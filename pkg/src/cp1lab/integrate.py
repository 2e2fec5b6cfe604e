"""Adaptive Dormand-Prince 5(4) integrator for complex state vectors.

Step size control is PI-type on the embedded local error estimate,
measured relative to the largest state entry.  The state may be any
complex numpy array; the right-hand side returns an array of the same
shape.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class StiffnessError(RuntimeError):
    """Raised when the step size collapses below the allowed floor."""


# Dormand-Prince coefficients
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4
_AM = np.zeros((7, 7))
for _i, _row in enumerate(_A):
    _AM[_i, :len(_row)] = _row

SAFETY = 0.9
ALPHA = 0.7 / 5
BETA = 0.4 / 5
MIN_SHRINK = 0.2
MAX_GROW = 5.0
COLLAPSE = 1e-14


@dataclass
class Trajectory:
    s: list = field(default_factory=list)
    y: list = field(default_factory=list)
    accepted: int = 0
    rejected: int = 0

    @property
    def final(self) -> np.ndarray:
        return self.y[-1]

    def arrays(self):
        return np.asarray(self.s), np.asarray(self.y)


def _error_norm(err: np.ndarray, y0: np.ndarray, y1: np.ndarray, tol: float) -> float:
    scale = max(1.0, float(np.max(np.abs(y0))), float(np.max(np.abs(y1))))
    return float(np.max(np.abs(err))) / (tol * scale)


def dopri(f: Callable[[float, np.ndarray], np.ndarray], y0, s0: float, s1: float,
          tol: float = 1e-10, h0: float | None = None, record: bool = False,
          max_steps: int = 2_000_000, event: Callable | None = None) -> Trajectory:
    """Integrate y' = f(s, y) from s0 to s1.

    The local error of each step is kept below tol times the largest
    state entry.
    If event(s, y) returns True after an accepted step, integration stops
    early.  With record=True every accepted step is stored.
    """
    if not (1e-15 <= tol <= 1e-2):
        raise ValueError("tolerance out of range")
    y = np.array(y0, dtype=complex)
    span = s1 - s0
    traj = Trajectory()
    traj.s.append(s0)
    traj.y.append(y.copy())
    if span == 0:
        return traj
    direction = np.sign(span)
    length = abs(span)
    h = abs(h0) if h0 else min(length, 0.05 * length + 1e-3)
    h = min(h, length)
    s = s0
    k1 = f(s, y)
    err_prev = 1.0
    steps = 0
    while direction * (s1 - s) > 0:
        if steps > max_steps:
            raise StiffnessError("step budget exhausted")
        steps += 1
        h = min(h, abs(s1 - s))
        hs = direction * h
        ks = np.empty((7, y.size), dtype=complex)
        ks[0] = k1.ravel()
        for i in range(1, 7):
            yi = y + hs * (_AM[i, :i] @ ks[:i]).reshape(y.shape)
            ks[i] = f(s + _C[i] * hs, yi).ravel()
        y_new = y + hs * (_B5 @ ks).reshape(y.shape)
        err_vec = hs * (_E @ ks)
        err = _error_norm(err_vec, y, y_new, tol)
        if not np.isfinite(err):
            err = 1e10
        if err <= 1.0:
            s = s + hs
            y = y_new
            k1 = ks[6].reshape(y.shape)  # first-same-as-last
            traj.accepted += 1
            if record:
                traj.s.append(s)
                traj.y.append(y.copy())
            if err == 0:
                fac = MAX_GROW
            else:
                fac = SAFETY * err ** (-ALPHA) * err_prev ** BETA
                fac = min(MAX_GROW, max(MIN_SHRINK, fac))
            err_prev = max(err, 1e-4)
            h = h * fac
            if event is not None and event(s, y):
                break
        else:
            traj.rejected += 1
            fac = max(MIN_SHRINK, min(0.5, SAFETY * err ** (-1 / 5)))
            h = h * fac
            if h < COLLAPSE * length:
                raise StiffnessError(f"step size collapsed to {h:.3e} at s={s:.6g}")
    if not record:
        traj.s.append(s)
        traj.y.append(y.copy())
    return traj

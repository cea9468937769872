"""Helmholtz kernel, EM plane waves, medium constants, and mirror parity.

Conventions: time dependence exp(-i omega t), outgoing kernel
``phi(r) = exp(i k r) / (4 pi r)``, and the Maxwell pair
``curl E = i omega mu H``, ``curl H = -i omega eps E``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, SingularEvaluationError
from .geometry import PlaneFrame

FOUR_PI = 4.0 * np.pi
_UNIT_TOL = 1e-9


@dataclass(frozen=True)
class MediumParams:
    """Homogeneous lossless background medium."""

    epsilon: float
    mu: float
    omega: float

    def __post_init__(self):
        if self.epsilon <= 0 or self.mu <= 0 or self.omega <= 0:
            raise InvalidArgumentError("epsilon, mu and omega must be positive")

    @property
    def k(self) -> float:
        """Wavenumber omega * sqrt(eps * mu)."""
        return self.omega * np.sqrt(self.epsilon * self.mu)

    @property
    def wavelength(self) -> float:
        return 2.0 * np.pi / self.k


@dataclass(frozen=True)
class PlaneWaveSpec:
    """Incident plane wave: unit propagation direction theta, unit electric
    polarization p, and the derived vector q = theta x p.

    q is a unit vector exactly when p is orthogonal to theta and zero when
    p is parallel to theta (degenerate wave with vanishing fields).
    """

    theta: np.ndarray
    p: np.ndarray
    q: np.ndarray = field(init=False)

    def __post_init__(self):
        th = np.asarray(self.theta, float).copy()
        p = np.asarray(self.p, float).copy()
        if abs(np.linalg.norm(th) - 1.0) > _UNIT_TOL:
            raise InvalidArgumentError("theta must be a unit vector")
        if abs(np.linalg.norm(p) - 1.0) > _UNIT_TOL:
            raise InvalidArgumentError("p must be a unit vector")
        th.setflags(write=False)
        p.setflags(write=False)
        q = np.cross(th, p)
        q.setflags(write=False)
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def is_degenerate(self) -> bool:
        """True when p is parallel to theta, so the wave amplitude vanishes."""
        return bool(np.linalg.norm(self.q) < 1e-12)


def helmholtz_phi(x, y, k: float):
    """Outgoing fundamental solution exp(ik|x-y|) / (4 pi |x-y|).

    Broadcasts over leading axes; raises on coincident points.
    """
    d = np.asarray(x, float) - np.asarray(y, float)
    r = np.linalg.norm(d, axis=-1)
    if np.any(r == 0.0):
        raise SingularEvaluationError("helmholtz_phi evaluated at x == y")
    return np.exp(1j * k * r) / (FOUR_PI * r)


def grad_phi(x, y, k: float):
    """Gradient in x of the kernel: (ik - 1/r) phi(r) (x - y)/r."""
    d = np.asarray(x, float) - np.asarray(y, float)
    r = np.linalg.norm(d, axis=-1)
    if np.any(r == 0.0):
        raise SingularEvaluationError("grad_phi evaluated at x == y")
    g = (1j * k - 1.0 / r) * np.exp(1j * k * r) / (FOUR_PI * r * r)
    return g[..., None] * d


def plane_wave_fields(spec: PlaneWaveSpec, medium: MediumParams, x):
    """Incident fields (E0, H0) of the plane wave at points x (..., 3).

    E0 = sqrt(mu) (p x theta) exp(ik<theta, x>),
    H0 = sqrt(eps) (q x theta) exp(ik<theta, x>), with q = theta x p chosen
    so the pair satisfies both Maxwell equations for k = omega sqrt(eps mu).
    A degenerate wave (p parallel to theta) yields zero fields.
    """
    x = np.asarray(x, float)
    phase = np.exp(1j * medium.k * (x @ spec.theta))
    amp_e = np.sqrt(medium.mu) * np.cross(spec.p, spec.theta)
    amp_h = np.sqrt(medium.epsilon) * np.cross(spec.q, spec.theta)
    return (np.multiply.outer(phase, amp_e + 0j),
            np.multiply.outer(phase, amp_h + 0j))


def parity_decompose(points, values, frame: PlaneFrame, match_tol: float = 1e-9):
    """Split sampled vector fields into mirror-parity parts across the plane.

    points must come in mirror-image pairs across ``frame`` (points on the
    plane pair with themselves).  Returns (plus, minus) sample arrays aligned
    with the input: the plus part has even tangential and odd normal
    components, the minus part the opposite, and the parts sum to the input.
    """
    pts = np.asarray(points, float)
    vals = np.asarray(values, complex)
    if pts.ndim != 2 or pts.shape[1] != 3 or vals.shape != pts.shape:
        raise InvalidArgumentError("points and values must both have shape (n, 3)")
    scale = max(1.0, float(np.abs(pts).max(initial=0.0)))
    quant = match_tol * scale

    def key(p):
        return tuple(np.round(p / quant).astype(np.int64))

    index = {}
    for i, p in enumerate(pts):
        index.setdefault(key(p), []).append(i)
    partner = np.full(len(pts), -1, np.int64)
    mirrored = frame.mirror(pts)
    for i, m in enumerate(mirrored):
        cands = index.get(key(m), [])
        best, best_d = -1, np.inf
        for j in cands:
            d = np.linalg.norm(pts[j] - m)
            if d < best_d:
                best, best_d = j, d
        if best < 0 or best_d > 10 * quant:
            raise InvalidArgumentError(
                f"sample set is not mirror-symmetric: no partner for point {i}")
        partner[i] = best

    n = frame.normal
    vn = (vals @ n)[:, None] * n
    vt = vals - vn
    vn_m, vt_m = vn[partner], vt[partner]
    plus = 0.5 * (vt + vt_m) + 0.5 * (vn - vn_m)
    minus = 0.5 * (vt - vt_m) + 0.5 * (vn + vn_m)
    return plus, minus

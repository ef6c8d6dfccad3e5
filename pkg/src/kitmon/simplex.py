"""Spherical parametrization of the bond-probability simplex.

With single-site rate p_h and interaction rate p_J held fixed, the bond
probabilities live on a triangle (honeycomb: p_x + p_y + p_z = s) or a
tetrahedron (square: four probabilities summing to s), s = 1 - p_h - p_J.
Points are written as the uniform center plus a radial deviation:

* square: p_alpha = s/4 + r * u_alpha(theta, phi) with the traceless
  direction weights
      u_x = (sqrt3/4) [ sin(t)(cos(f) - sin(f)) - cos(t) ]
      u_y = (sqrt3/4) [ sin(t)(sin(f) - cos(f)) - cos(t) ]
      u_z = (sqrt3/4) [ -sin(t)(cos(f) + sin(f)) + cos(t) ]
      u_I = (sqrt3/4) [ sin(t)(cos(f) + sin(f)) + cos(t) ]
  These have constant norm sqrt(3)/2, so the Euclidean distance from the
  center is r * sqrt(3)/2.
* honeycomb: p = center + r (cos(t) e1 + sin(t) e2) with the orthonormal
  in-plane basis e1 = (1,-1,0)/sqrt2, e2 = (1,1,-2)/sqrt6, so r is already
  the Euclidean distance.

Reported radii are normalized by r_edge, the center-to-edge-center
distance of the enclosing simplex: s/sqrt6 for the triangle, s/2 for the
tetrahedron (in Euclidean units).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import LatticeKind
from .protocol import MeasurementMix

_E1 = np.array([1.0, -1.0, 0.0]) / math.sqrt(2.0)
_E2 = np.array([1.0, 1.0, -2.0]) / math.sqrt(6.0)

SQUARE_U_NORM = math.sqrt(3.0) / 2.0


def direction_weights(kind, theta: float, phi: float = 0.0) -> np.ndarray:
    """Simplex direction vector u(theta[, phi]); components sum to zero."""
    kind = LatticeKind.coerce(kind)
    if kind is LatticeKind.HONEYCOMB:
        return math.cos(theta) * _E1 + math.sin(theta) * _E2
    st, ct = math.sin(theta), math.cos(theta)
    cf, sf = math.cos(phi), math.sin(phi)
    k = math.sqrt(3.0) / 4.0
    return np.array(
        [
            k * (st * (cf - sf) - ct),
            k * (st * (sf - cf) - ct),
            k * (-st * (cf + sf) + ct),
            k * (st * (cf + sf) + ct),
        ]
    )


@dataclass(frozen=True)
class SimplexPoint:
    """A probability mix named by simplex coordinates.

    ``r`` is the radial parameter of the expansion above: for the
    honeycomb it is the Euclidean distance from the isotropic point, for
    the square it is the coefficient of the constant-norm u vector
    (Euclidean distance = r * sqrt(3)/2; see ``euclidean_radius``).
    """

    kind: LatticeKind
    r: float
    theta: float
    phi: float = 0.0
    p_h: float = 0.0
    p_J: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", LatticeKind.coerce(self.kind))
        if self.r < 0:
            raise ValueError("r must be non-negative")
        if self.p_h < 0 or self.p_J < 0 or self.p_h + self.p_J > 1:
            raise ValueError("p_h and p_J must be non-negative with p_h + p_J <= 1")

    @property
    def share(self) -> float:
        return 1.0 - self.p_h - self.p_J


def r_max(kind, theta: float, phi: float = 0.0, p_h: float = 0.0, p_J: float = 0.0) -> float:
    """Largest radius along a direction keeping all probabilities >= 0.

    The bound is the first contact with a simplex face:
    min over components with u < 0 of (uniform share) / |u|.
    """
    kind = LatticeKind.coerce(kind)
    u = direction_weights(kind, theta, phi)
    share = (1.0 - p_h - p_J) / len(u)
    neg = u[u < 0]
    if len(neg) == 0:
        return math.inf
    return float(share / np.abs(neg).max())


def to_probabilities(point: SimplexPoint) -> MeasurementMix:
    """Expand a simplex point into explicit category probabilities."""
    u = direction_weights(point.kind, point.theta, point.phi)
    share = point.share / len(u)
    rmax = r_max(point.kind, point.theta, point.phi, point.p_h, point.p_J)
    if point.r > rmax + 1e-12:
        raise ValueError(f"r={point.r} exceeds r_max={rmax} along this direction")
    p = share + point.r * u
    # points sitting numerically on a face get an exact zero
    p = np.where(np.abs(p) < 1e-14, 0.0, np.clip(p, 0.0, None))
    if point.kind is LatticeKind.HONEYCOMB:
        return MeasurementMix(float(p[0]), float(p[1]), float(p[2]), 0.0, point.p_h, point.p_J)
    return MeasurementMix(float(p[0]), float(p[1]), float(p[2]), float(p[3]), point.p_h, point.p_J)


def euclidean_radius(point: SimplexPoint) -> float:
    """Euclidean distance of the point's probability vector from the center."""
    if point.kind is LatticeKind.SQUARE:
        return point.r * SQUARE_U_NORM
    return point.r


def r_edge(kind, share: float = 1.0) -> float:
    """Distance from the isotropic point to an edge center (Euclidean)."""
    kind = LatticeKind.coerce(kind)
    if share <= 0:
        raise ValueError("share 1 - p_h - p_J must be positive")
    if kind is LatticeKind.HONEYCOMB:
        return share / math.sqrt(6.0)
    return share / 2.0


def normalized_radius(r_euclid: float, kind, share: float = 1.0) -> float:
    """Euclidean radius over the center-to-edge-center distance r_edge."""
    return r_euclid / r_edge(kind, share)


def normalized_point_radius(point: SimplexPoint) -> float:
    return normalized_radius(euclidean_radius(point), point.kind, point.share)


def radius_for_normalized(kind, ratio: float, share: float = 1.0) -> float:
    """Invert ``normalized_point_radius``: the r parameter hitting a ratio."""
    kind = LatticeKind.coerce(kind)
    eu = ratio * r_edge(kind, share)
    if kind is LatticeKind.SQUARE:
        return eu / SQUARE_U_NORM
    return eu

"""Closed-form fields for the verification problems.

The trigonometric benchmark on (0,1)^3 pairs a divergence-free velocity with
a scalable pressure; it satisfies the homogeneous natural boundary conditions
(vanishing normal velocity and tangential vorticity).  The forcing is the
curl-curl (Bernoulli) form ``nu curl curl u + curl u x u + grad p``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class TrigSolution:
    """Manufactured solution with pressure scaling lam and viscosity nu."""
    nu: float = 1.0
    lam: float = 1.0

    def velocity(self, pts: np.ndarray) -> np.ndarray:
        x, y, z = TWO_PI * pts[:, 0], TWO_PI * pts[:, 1], TWO_PI * pts[:, 2]
        return np.stack([
            0.5 * np.sin(x) * np.cos(y) * np.cos(z),
            0.5 * np.cos(x) * np.sin(y) * np.cos(z),
            -np.cos(x) * np.cos(y) * np.sin(z),
        ], axis=-1)

    def pressure(self, pts: np.ndarray) -> np.ndarray:
        x, y, z = TWO_PI * pts[:, 0], TWO_PI * pts[:, 1], TWO_PI * pts[:, 2]
        return self.lam * np.sin(x) * np.sin(y) * np.sin(z)

    def grad_pressure(self, pts: np.ndarray) -> np.ndarray:
        x, y, z = TWO_PI * pts[:, 0], TWO_PI * pts[:, 1], TWO_PI * pts[:, 2]
        return self.lam * TWO_PI * np.stack([
            np.cos(x) * np.sin(y) * np.sin(z),
            np.sin(x) * np.cos(y) * np.sin(z),
            np.sin(x) * np.sin(y) * np.cos(z),
        ], axis=-1)

    def curl_velocity(self, pts: np.ndarray) -> np.ndarray:
        x, y, z = TWO_PI * pts[:, 0], TWO_PI * pts[:, 1], TWO_PI * pts[:, 2]
        return 3.0 * np.pi * np.stack([
            np.cos(x) * np.sin(y) * np.sin(z),
            -np.sin(x) * np.cos(y) * np.sin(z),
            np.zeros(len(pts)),
        ], axis=-1)

    def curl_curl_velocity(self, pts: np.ndarray) -> np.ndarray:
        # this velocity is a curl-curl eigenfunction
        return 3.0 * TWO_PI**2 * self.velocity(pts)

    def velocity_force(self, pts: np.ndarray) -> np.ndarray:
        """R_u: the part of the forcing depending only on the velocity."""
        u = self.velocity(pts)
        w = self.curl_velocity(pts)
        return self.nu * self.curl_curl_velocity(pts) + np.cross(w, u)

    def forcing(self, pts: np.ndarray) -> np.ndarray:
        return self.velocity_force(pts) + self.grad_pressure(pts)

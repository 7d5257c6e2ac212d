"""Three-link planar arm: forward kinematics, Jacobian, and the imitation losses."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LIMIT_TOL = 1e-9


@dataclass(frozen=True)
class Frame:
    x: float
    y: float
    theta: float

    @property
    def origin(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class ArmModel:
    link_lengths: tuple[float, float, float] = (0.5, 0.4, 0.3)
    joint_limits: tuple[tuple[float, float], ...] = ((-np.pi, np.pi),) * 3
    base_pose: tuple[float, float, float] = (0.0, 0.0, 0.0)  # x, y, heading

    def __post_init__(self):
        if len(self.link_lengths) != 3 or len(self.joint_limits) != 3:
            raise ValueError("the arm has exactly three links")
        if any(l <= 0 for l in self.link_lengths):
            raise ValueError("link lengths must be positive")
        if any(lo >= hi for lo, hi in self.joint_limits):
            raise ValueError("joint limits need lo < hi")

    def check(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape != (3,):
            raise ValueError(f"expected 3 joint values, got shape {q.shape}")
        for v, (lo, hi) in zip(q, self.joint_limits):
            if not lo - LIMIT_TOL <= v <= hi + LIMIT_TOL:
                raise ValueError(f"joint value {v} outside [{lo}, {hi}]")
        return q


def link_angles(arm: ArmModel, q) -> np.ndarray:
    """Absolute heading of each link."""
    return arm.base_pose[2] + np.cumsum(q, axis=-1)


def joint_positions(arm: ArmModel, q) -> np.ndarray:
    """Base, elbow, wrist and end-effector positions; shape (..., 4, 2).

    Works on a batch of configurations with shape (..., 3) and skips the
    joint-limit check.
    """
    q = np.asarray(q, dtype=float)
    th = link_angles(arm, q)
    L = np.asarray(arm.link_lengths)
    steps = np.stack([L * np.cos(th), L * np.sin(th)], axis=-1)
    pts = np.cumsum(steps, axis=-2) + np.asarray(arm.base_pose[:2])
    base = np.broadcast_to(np.asarray(arm.base_pose[:2], dtype=float), pts.shape[:-2] + (1, 2))
    return np.concatenate([base, pts], axis=-2)


def forward_kinematics(arm: ArmModel, q) -> Frame:
    q = arm.check(q)
    th = link_angles(arm, q)
    L = np.asarray(arm.link_lengths)
    x = arm.base_pose[0] + float(np.sum(L * np.cos(th)))
    y = arm.base_pose[1] + float(np.sum(L * np.sin(th)))
    return Frame(x, y, float(th[-1]))


def jacobian(arm: ArmModel, q) -> np.ndarray:
    """3x3 Jacobian of (x, y, theta) with respect to q."""
    q = arm.check(q)
    th = link_angles(arm, q)
    L = np.asarray(arm.link_lengths)
    # joint i moves every link from i outward
    dx = -np.cumsum((L * np.sin(th))[::-1])[::-1]
    dy = np.cumsum((L * np.cos(th))[::-1])[::-1]
    return np.vstack([dx, dy, np.ones(3)])


def frame_points(frame: Frame, d: float) -> tuple[np.ndarray, np.ndarray]:
    """Points at distance ``d`` along the frame's x and y axes."""
    c, s = np.cos(frame.theta), np.sin(frame.theta)
    o = frame.origin
    return o + d * np.array([c, s]), o + d * np.array([-s, c])


def joint_space_loss(q_pred, q_expert) -> float:
    q_pred, q_expert = np.asarray(q_pred, dtype=float), np.asarray(q_expert, dtype=float)
    return float(np.mean((q_pred - q_expert) ** 2))


def op_space_loss(q_pred, q_expert, arm: ArmModel, d: float = 0.1) -> float:
    """Summed distance between the two axis points of predicted and expert end-effector frames."""
    a = frame_points(forward_kinematics(arm, q_pred), d)
    b = frame_points(forward_kinematics(arm, q_expert), d)
    return float(np.linalg.norm(a[0] - b[0]) + np.linalg.norm(a[1] - b[1]))


def op_space_loss_grad(q_pred, q_expert, arm: ArmModel, d: float = 0.1) -> np.ndarray:
    """Gradient of :func:`op_space_loss` with respect to ``q_pred``.

    Undefined where a point pair coincides; those terms contribute zero.
    """
    f = forward_kinematics(arm, q_pred)
    J = jacobian(arm, q_pred)
    a = frame_points(f, d)
    b = frame_points(forward_kinematics(arm, q_expert), d)
    c, s = np.cos(f.theta), np.sin(f.theta)
    # d/dtheta of the x-axis point is d*y_hat, of the y-axis point is -d*x_hat
    dtheta = (d * np.array([-s, c]), -d * np.array([c, s]))
    grad = np.zeros(3)
    for p, e, rot in zip(a, b, dtheta):
        diff = p - e
        n = np.linalg.norm(diff)
        if n == 0.0:
            continue
        Jp = J[:2] + np.outer(rot, J[2])
        grad += diff @ Jp / n
    return grad


def combined_loss(q_pred, q_expert, arm: ArmModel, d: float = 0.1, lam: float = 0.5) -> float:
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"loss weight must lie in [0, 1], got {lam}")
    return lam * joint_space_loss(q_pred, q_expert) + (1 - lam) * op_space_loss(q_pred, q_expert, arm, d)

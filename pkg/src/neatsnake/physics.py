"""Planar dynamics of the 9-link wheeled snake.

Links are rigid bodies in maximal coordinates (x, y, theta per link) joined
by ideal revolute constraints at the shared link ends. Each control step
integrates a fixed number of semi-implicit Euler substeps:

    1. PD servo torques toward the commanded joint targets (clamped),
    2. implicit anisotropic viscous friction in each link frame (the wheel
       model: sliding sideways is two orders of magnitude more expensive
       than rolling forward),
    3. exact joint-constraint velocity solve (the chain gives a 2x2-block
       tridiagonal system, solved directly),
    4. zero-restitution contact impulses against obstacles and walls,
    5. position integration, contact push-out and a Newton projection that
       restores the joint anchors to coincidence.

The velocity projection and implicit friction are both non-expansive in the
kinetic-energy metric, so with zero commanded torque the dynamics are purely
dissipative. Everything is deterministic: no randomness, fixed iteration
orders.

Collision counting is debounced per (link, body) pair: a collision event is
the transition from no-contact to contact between one control step and the
next. The goal beacon is a sensor target, not a solid body.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._jit import njit
from .arena import Arena


class SpawnError(Exception):
    """Initial snake pose overlaps arena geometry."""


class SimulationUnstable(RuntimeError):
    """Numerical blow-up (non-finite state); terminal for the episode."""


@dataclass(frozen=True)
class RobotSpec:
    """Physical robot description."""

    joint_count: int = 8
    link_length: float = 0.100   # m
    link_width: float = 0.050    # m
    link_mass: float = 0.300     # kg
    wheel_radius: float = 0.030  # m
    wheel_mass: float = 0.010    # kg, two wheels per link
    yaw_limit: float = math.radians(45.0)

    @property
    def link_count(self) -> int:
        return self.joint_count + 1

    @property
    def total_link_mass(self) -> float:
        return self.link_mass + 2.0 * self.wheel_mass

    @property
    def link_inertia(self) -> float:
        l, w = self.link_length, self.link_width
        return self.total_link_mass * (l * l + w * w) / 12.0


@dataclass(frozen=True)
class SimParams:
    """Integration and actuation constants."""

    dt: float = 1.0 / 12.0       # 83.3 ms control period
    substeps: int = 8
    kp: float = 2.0              # N*m/rad
    kd: float = 0.1              # N*m*s/rad
    tau_max: float = 0.2         # N*m
    c_par: float = 0.1           # N*s/m, longitudinal viscous friction
    c_perp: float = 10.0         # N*s/m, lateral viscous friction
    c_rot: float = 10.0 * 0.1 * 0.1 / 12.0  # lateral friction distributed over the link


@dataclass
class SnakeState:
    """Poses and velocities of all links; joints are derived quantities."""

    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    omega: np.ndarray

    @property
    def head_pose(self) -> tuple[float, float, float]:
        return float(self.x[0]), float(self.y[0]), float(self.theta[0])

    @property
    def joint_angles(self) -> np.ndarray:
        raw = self.theta[1:] - self.theta[:-1]
        return (raw + np.pi) % (2.0 * np.pi) - np.pi

    @property
    def joint_velocities(self) -> np.ndarray:
        return self.omega[1:] - self.omega[:-1]

    def copy(self) -> "SnakeState":
        return SnakeState(self.x.copy(), self.y.copy(), self.theta.copy(),
                          self.vx.copy(), self.vy.copy(), self.omega.copy())


@dataclass(frozen=True)
class StepOutcome:
    """What one control step produced."""

    collision_started: bool
    colliding_bodies: tuple[tuple[int, str], ...]  # (link, body) pairs that began contact
    joint_torques: np.ndarray                      # (8,) last-substep servo torques
    head_pose: tuple[float, float, float]


# disks approximating each link's collision footprint
_DISK_COUNT = 3


def _link_disks(spec: RobotSpec) -> tuple[np.ndarray, float]:
    r = spec.link_width / 2.0
    off = spec.link_length / 2.0 - r
    return np.array([-off, 0.0, off], dtype=np.float64), r


def spawn_snake(arena: Arena, spec: RobotSpec | None = None) -> SnakeState:
    """Straight chain along +y with the head link centred on the spawn point.

    All joint angles and velocities are zero. Raises SpawnError when the
    pose overlaps any wall or obstacle.
    """
    spec = spec or RobotSpec()
    n = spec.link_count
    sx, sy = arena.spawn
    x = np.full(n, float(sx))
    y = sy - np.arange(n) * spec.link_length
    theta = np.full(n, np.pi / 2.0)
    state = SnakeState(x, y, theta, np.zeros(n), np.zeros(n), np.zeros(n))

    offsets, disk_r = _link_disks(spec)
    for i in range(n):
        c, s = math.cos(theta[i]), math.sin(theta[i])
        for off in offsets:
            qx, qy = x[i] + off * c, y[i] + off * s
            for cx, cy, r in arena.obstacles:
                if math.hypot(qx - cx, qy - cy) < disk_r + r:
                    raise SpawnError(f"link {i} overlaps obstacle at ({cx}, {cy})")
            for x0, y0, x1, y1 in arena.walls:
                px = min(max(qx, x0), x1)
                py = min(max(qy, y0), y1)
                if math.hypot(qx - px, qy - py) < disk_r:
                    raise SpawnError(f"link {i} overlaps wall ({x0}, {y0}, {x1}, {y1})")
    return state


@njit(cache=True)
def _wrap(a):
    while a > math.pi:
        a -= 2.0 * math.pi
    while a < -math.pi:
        a += 2.0 * math.pi
    return a


@njit(cache=True)
def _joint_blocks(th, half, inv_m, inv_i, D, U, ra, rb):
    nj = th.size - 1
    for j in range(nj):
        ra[j, 0] = -half * math.cos(th[j])
        ra[j, 1] = -half * math.sin(th[j])
        rb[j, 0] = half * math.cos(th[j + 1])
        rb[j, 1] = half * math.sin(th[j + 1])
        pax, pay = -ra[j, 1], ra[j, 0]
        pbx, pby = -rb[j, 1], rb[j, 0]
        D[j, 0, 0] = 2.0 * inv_m + inv_i * (pax * pax + pbx * pbx)
        D[j, 0, 1] = inv_i * (pax * pay + pbx * pby)
        D[j, 1, 0] = D[j, 0, 1]
        D[j, 1, 1] = 2.0 * inv_m + inv_i * (pay * pay + pby * pby)
    for j in range(nj - 1):
        # joints j and j+1 share link j+1
        pbx, pby = -rb[j, 1], rb[j, 0]
        pax, pay = -ra[j + 1, 1], ra[j + 1, 0]
        U[j, 0, 0] = -inv_m - inv_i * pbx * pax
        U[j, 0, 1] = -inv_i * pbx * pay
        U[j, 1, 0] = -inv_i * pby * pax
        U[j, 1, 1] = -inv_m - inv_i * pby * pay


@njit(cache=True)
def _block_tridiag_solve(D, U, rhs, lam):
    """Solve the symmetric block-tridiagonal system in place (Thomas)."""
    nj = rhs.shape[0]
    Dp = np.empty_like(D)
    rp = np.empty_like(rhs)
    Dp[0] = D[0]
    rp[0] = rhs[0]
    for j in range(1, nj):
        a, b, c, d = Dp[j - 1, 0, 0], Dp[j - 1, 0, 1], Dp[j - 1, 1, 0], Dp[j - 1, 1, 1]
        det = a * d - b * c
        ia, ib, ic, id_ = d / det, -b / det, -c / det, a / det
        # W = L_j @ inv(Dp[j-1]) with L_j = U_{j-1}^T
        u = U[j - 1]
        w00 = u[0, 0] * ia + u[1, 0] * ic
        w01 = u[0, 0] * ib + u[1, 0] * id_
        w10 = u[0, 1] * ia + u[1, 1] * ic
        w11 = u[0, 1] * ib + u[1, 1] * id_
        Dp[j, 0, 0] = D[j, 0, 0] - (w00 * u[0, 0] + w01 * u[1, 0])
        Dp[j, 0, 1] = D[j, 0, 1] - (w00 * u[0, 1] + w01 * u[1, 1])
        Dp[j, 1, 0] = D[j, 1, 0] - (w10 * u[0, 0] + w11 * u[1, 0])
        Dp[j, 1, 1] = D[j, 1, 1] - (w10 * u[0, 1] + w11 * u[1, 1])
        rp[j, 0] = rhs[j, 0] - (w00 * rp[j - 1, 0] + w01 * rp[j - 1, 1])
        rp[j, 1] = rhs[j, 1] - (w10 * rp[j - 1, 0] + w11 * rp[j - 1, 1])
    # back substitution
    j = nj - 1
    a, b, c, d = Dp[j, 0, 0], Dp[j, 0, 1], Dp[j, 1, 0], Dp[j, 1, 1]
    det = a * d - b * c
    lam[j, 0] = (d * rp[j, 0] - b * rp[j, 1]) / det
    lam[j, 1] = (-c * rp[j, 0] + a * rp[j, 1]) / det
    for j in range(nj - 2, -1, -1):
        gx = rp[j, 0] - (U[j, 0, 0] * lam[j + 1, 0] + U[j, 0, 1] * lam[j + 1, 1])
        gy = rp[j, 1] - (U[j, 1, 0] * lam[j + 1, 0] + U[j, 1, 1] * lam[j + 1, 1])
        a, b, c, d = Dp[j, 0, 0], Dp[j, 0, 1], Dp[j, 1, 0], Dp[j, 1, 1]
        det = a * d - b * c
        lam[j, 0] = (d * gx - b * gy) / det
        lam[j, 1] = (-c * gx + a * gy) / det


@njit(cache=True)
def _solve_joint_velocities(th, vx, vy, om, half, inv_m, inv_i):
    nj = th.size - 1
    D = np.empty((nj, 2, 2))
    U = np.empty((max(nj - 1, 1), 2, 2))
    ra = np.empty((nj, 2))
    rb = np.empty((nj, 2))
    rhs = np.empty((nj, 2))
    lam = np.empty((nj, 2))
    _joint_blocks(th, half, inv_m, inv_i, D, U, ra, rb)
    for j in range(nj):
        cdot_x = (vx[j + 1] - om[j + 1] * rb[j, 1]) - (vx[j] - om[j] * ra[j, 1])
        cdot_y = (vy[j + 1] + om[j + 1] * rb[j, 0]) - (vy[j] + om[j] * ra[j, 0])
        rhs[j, 0] = -cdot_x
        rhs[j, 1] = -cdot_y
    _block_tridiag_solve(D, U, rhs, lam)
    for j in range(nj):
        px, py = lam[j, 0], lam[j, 1]
        vx[j] -= inv_m * px
        vy[j] -= inv_m * py
        om[j] -= inv_i * (ra[j, 0] * py - ra[j, 1] * px)
        vx[j + 1] += inv_m * px
        vy[j + 1] += inv_m * py
        om[j + 1] += inv_i * (rb[j, 0] * py - rb[j, 1] * px)


@njit(cache=True)
def _project_joints(x, y, th, half, inv_m, inv_i, tol, max_iter):
    nj = th.size - 1
    D = np.empty((nj, 2, 2))
    U = np.empty((max(nj - 1, 1), 2, 2))
    ra = np.empty((nj, 2))
    rb = np.empty((nj, 2))
    rhs = np.empty((nj, 2))
    lam = np.empty((nj, 2))
    for _ in range(max_iter):
        _joint_blocks(th, half, inv_m, inv_i, D, U, ra, rb)
        err = 0.0
        for j in range(nj):
            gx = (x[j + 1] + rb[j, 0]) - (x[j] + ra[j, 0])
            gy = (y[j + 1] + rb[j, 1]) - (y[j] + ra[j, 1])
            rhs[j, 0] = -gx
            rhs[j, 1] = -gy
            mag = abs(gx) + abs(gy)
            if mag > err:
                err = mag
        if err < tol:
            break
        _block_tridiag_solve(D, U, rhs, lam)
        for j in range(nj):
            px, py = lam[j, 0], lam[j, 1]
            x[j] -= inv_m * px
            y[j] -= inv_m * py
            th[j] -= inv_i * (ra[j, 0] * py - ra[j, 1] * px)
            x[j + 1] += inv_m * px
            y[j + 1] += inv_m * py
            th[j + 1] += inv_i * (rb[j, 0] * py - rb[j, 1] * px)


@njit(cache=True)
def _apply_torques(th, om, targets, h, inv_i, kp, kd, tau_max, taus):
    nj = th.size - 1
    for j in range(nj):
        phi = _wrap(th[j + 1] - th[j])
        err = _wrap(targets[j] - phi)
        tau = kp * err - kd * (om[j + 1] - om[j])
        if tau > tau_max:
            tau = tau_max
        elif tau < -tau_max:
            tau = -tau_max
        taus[j] = tau
        om[j] -= h * tau * inv_i
        om[j + 1] += h * tau * inv_i


@njit(cache=True)
def _apply_friction(th, vx, vy, om, h, inv_m, inv_i, c_par, c_perp, c_rot):
    n = th.size
    f_par = 1.0 / (1.0 + h * c_par * inv_m)
    f_perp = 1.0 / (1.0 + h * c_perp * inv_m)
    f_rot = 1.0 / (1.0 + h * c_rot * inv_i)
    for i in range(n):
        c, s = math.cos(th[i]), math.sin(th[i])
        v_par = (vx[i] * c + vy[i] * s) * f_par
        v_perp = (-vx[i] * s + vy[i] * c) * f_perp
        vx[i] = v_par * c - v_perp * s
        vy[i] = v_par * s + v_perp * c
        om[i] *= f_rot


@njit(cache=True)
def _contact_pass(x, y, th, vx, vy, om, disk_offs, disk_r, inv_m, inv_i,
                  obstacles, walls, touched, positional, relax):
    """Detect disk contacts; apply impulses (velocity) or push-out (position)."""
    n = x.size
    n_obs = obstacles.shape[0]
    n_wall = walls.shape[0]
    for i in range(n):
        c, s = math.cos(th[i]), math.sin(th[i])
        for d in range(disk_offs.size):
            off = disk_offs[d]
            qx = x[i] + off * c
            qy = y[i] + off * s
            for k in range(n_obs):
                dx = qx - obstacles[k, 0]
                dy = qy - obstacles[k, 1]
                rsum = disk_r + obstacles[k, 2]
                d2 = dx * dx + dy * dy
                if d2 < rsum * rsum:
                    touched[i, k] = 1
                    dist = math.sqrt(d2)
                    if dist > 1e-12:
                        nx_, ny_ = dx / dist, dy / dist
                    else:
                        nx_, ny_ = 1.0, 0.0
                    depth = rsum - dist
                    _resolve_contact(x, y, th, vx, vy, om, i, qx, qy, nx_, ny_,
                                     depth, inv_m, inv_i, positional, relax)
                    c = math.cos(th[i])
                    s = math.sin(th[i])
            for w in range(n_wall):
                x0, y0, x1, y1 = walls[w, 0], walls[w, 1], walls[w, 2], walls[w, 3]
                px = min(max(qx, x0), x1)
                py = min(max(qy, y0), y1)
                dx = qx - px
                dy = qy - py
                d2 = dx * dx + dy * dy
                if d2 < disk_r * disk_r:
                    touched[i, n_obs + w] = 1
                    if d2 > 1e-24:
                        dist = math.sqrt(d2)
                        nx_, ny_ = dx / dist, dy / dist
                        depth = disk_r - dist
                    else:
                        # disk centre inside the wall: exit along the nearest face
                        e_left = qx - x0
                        e_right = x1 - qx
                        e_bot = qy - y0
                        e_top = y1 - qy
                        best = e_left
                        nx_, ny_ = -1.0, 0.0
                        if e_right < best:
                            best = e_right
                            nx_, ny_ = 1.0, 0.0
                        if e_bot < best:
                            best = e_bot
                            nx_, ny_ = 0.0, -1.0
                        if e_top < best:
                            best = e_top
                            nx_, ny_ = 0.0, 1.0
                        depth = disk_r + best
                    _resolve_contact(x, y, th, vx, vy, om, i, qx, qy, nx_, ny_,
                                     depth, inv_m, inv_i, positional, relax)
                    c = math.cos(th[i])
                    s = math.sin(th[i])


@njit(cache=True)
def _resolve_contact(x, y, th, vx, vy, om, i, qx, qy, nx, ny, depth,
                     inv_m, inv_i, positional, relax):
    rx = qx - x[i]
    ry = qy - y[i]
    rn = rx * ny - ry * nx
    k_eff = inv_m + inv_i * rn * rn
    if positional:
        lam = depth * relax / k_eff
        x[i] += inv_m * lam * nx
        y[i] += inv_m * lam * ny
        th[i] += inv_i * lam * rn
    else:
        vn = (vx[i] - om[i] * ry) * nx + (vy[i] + om[i] * rx) * ny
        if vn < 0.0:
            j_imp = -vn / k_eff
            vx[i] += inv_m * j_imp * nx
            vy[i] += inv_m * j_imp * ny
            om[i] += inv_i * j_imp * rn


@njit(cache=True)
def _control_step(x, y, th, vx, vy, om, targets, n_sub, h, half, inv_m, inv_i,
                  kp, kd, tau_max, c_par, c_perp, c_rot, disk_offs, disk_r,
                  obstacles, walls, touched, taus):
    for _ in range(n_sub):
        _apply_torques(th, om, targets, h, inv_i, kp, kd, tau_max, taus)
        _apply_friction(th, vx, vy, om, h, inv_m, inv_i, c_par, c_perp, c_rot)
        _solve_joint_velocities(th, vx, vy, om, half, inv_m, inv_i)
        _contact_pass(x, y, th, vx, vy, om, disk_offs, disk_r, inv_m, inv_i,
                      obstacles, walls, touched, False, 1.0)
        _solve_joint_velocities(th, vx, vy, om, half, inv_m, inv_i)
        for i in range(x.size):
            x[i] += h * vx[i]
            y[i] += h * vy[i]
            th[i] += h * om[i]
        _contact_pass(x, y, th, vx, vy, om, disk_offs, disk_r, inv_m, inv_i,
                      obstacles, walls, touched, True, 0.8)
        _project_joints(x, y, th, half, inv_m, inv_i, 1e-11, 16)
    ok = True
    for i in range(x.size):
        if not (math.isfinite(x[i]) and math.isfinite(y[i]) and math.isfinite(th[i])
                and math.isfinite(vx[i]) and math.isfinite(vy[i]) and math.isfinite(om[i])):
            ok = False
    return ok


class SnakeWorld:
    """One simulated episode's worth of mutable world state."""

    def __init__(self, arena: Arena, spec: RobotSpec | None = None,
                 sim: SimParams | None = None):
        self.arena = arena
        self.spec = spec or RobotSpec()
        self.sim = sim or SimParams()
        self.state = spawn_snake(arena, self.spec)
        self.body_names = ([f"cyl{k}" for k in range(len(arena.obstacles))]
                           + [f"wall{w}" for w in range(len(arena.walls))])
        self._touched_prev = np.zeros((self.spec.link_count, len(self.body_names)),
                                      dtype=bool)
        self._disk_offs, self._disk_r = _link_disks(self.spec)
        self.collision_count = 0
        self.steps = 0
        self.time = 0.0

    @property
    def head_pose(self) -> tuple[float, float, float]:
        return self.state.head_pose

    @property
    def active_contacts(self) -> frozenset[tuple[int, str]]:
        """(link, body) pairs in contact during the last control step."""
        return frozenset((int(i), self.body_names[int(b)])
                         for i, b in np.argwhere(self._touched_prev))

    def step(self, joint_targets) -> StepOutcome:
        """Advance one control period toward the given joint targets."""
        targets = np.asarray(joint_targets, dtype=np.float64)
        if targets.shape != (self.spec.joint_count,):
            raise ValueError(f"expected {self.spec.joint_count} joint targets, "
                             f"got shape {targets.shape}")
        st, sim, spec = self.state, self.sim, self.spec
        touched = np.zeros_like(self._touched_prev, dtype=np.uint8)
        taus = np.zeros(spec.joint_count)
        ok = _control_step(
            st.x, st.y, st.theta, st.vx, st.vy, st.omega, targets,
            sim.substeps, sim.dt / sim.substeps, spec.link_length / 2.0,
            1.0 / spec.total_link_mass, 1.0 / spec.link_inertia,
            sim.kp, sim.kd, sim.tau_max, sim.c_par, sim.c_perp, sim.c_rot,
            self._disk_offs, self._disk_r,
            self.arena.obstacles, self.arena.walls, touched, taus)
        if not ok:
            raise SimulationUnstable(f"non-finite state at step {self.steps}")
        touched_now = touched.astype(bool)
        new_pairs = touched_now & ~self._touched_prev
        self._touched_prev = touched_now
        self.collision_count += int(new_pairs.sum())
        self.steps += 1
        self.time += sim.dt
        started = [(int(i), self.body_names[int(b)])
                   for i, b in np.argwhere(new_pairs)]
        return StepOutcome(
            collision_started=bool(started),
            colliding_bodies=tuple(started),
            joint_torques=taus,
            head_pose=st.head_pose,
        )

    def kinetic_energy(self) -> float:
        st, spec = self.state, self.spec
        m, inertia = spec.total_link_mass, spec.link_inertia
        return float(0.5 * m * np.sum(st.vx ** 2 + st.vy ** 2)
                     + 0.5 * inertia * np.sum(st.omega ** 2))

    def joint_anchor_error(self) -> float:
        """Largest euclidean gap between paired joint anchors."""
        st, half = self.state, self.spec.link_length / 2.0
        ax = st.x[:-1] - half * np.cos(st.theta[:-1])
        ay = st.y[:-1] - half * np.sin(st.theta[:-1])
        bx = st.x[1:] + half * np.cos(st.theta[1:])
        by = st.y[1:] + half * np.sin(st.theta[1:])
        return float(np.max(np.hypot(bx - ax, by - ay))) if len(ax) else 0.0

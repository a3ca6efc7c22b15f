"""First exit from a ball by the compound-Poisson big-jump approximation.

Jumps larger than ``eps`` arrive at rate ``nu(|z| > eps)``; smaller jumps are
dropped (``alpha < 1``, with a logged displacement bound) or replaced by a
Brownian term with matching covariance (``compensate=True``).

Reproducibility: paths are processed in fixed blocks of ``BLOCK`` paths and
block ``b`` draws from ``PCG64(SeedSequence(seed, spawn_key=(stream, b)))``.
Each path's randomness is thus a function of ``(seed, stream, path index)``
alone and results do not depend on the number of worker threads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .spectral import StableModel, sample_directions

__all__ = [
    "ExitRecord",
    "ExitBatch",
    "simulate_exit",
    "simulate_exits",
    "block_rng",
    "BLOCK",
    "DEFAULT_JUMP_BUDGET",
]

BLOCK = 4096
DEFAULT_JUMP_BUDGET = 10_000_000


def block_rng(seed: int, stream: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(block)))))


@dataclass(frozen=True)
class ExitRecord:
    start: tuple[float, float]
    position: tuple[float, float]
    tau: float
    jumps: int
    complete: bool
    diffusive_exit: bool
    displacement_bound: float


@dataclass(frozen=True, eq=False)
class ExitBatch:
    """Exit data of many paths.

    ``start`` is the common start point; ``starts`` holds per-path starts when
    they differ.  ``occupation`` is the time spent in ``B(0, occupation_radius)``.
    """

    start: np.ndarray
    radius: float
    eps: float
    positions: np.ndarray
    tau: np.ndarray
    jumps: np.ndarray
    complete: np.ndarray
    diffusive_exit: np.ndarray
    displacement_bound: float
    seed: int
    stream: int
    starts: np.ndarray | None = None
    occupation: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.tau)

    @property
    def n_incomplete(self) -> int:
        return int(np.count_nonzero(~self.complete))

    def start_of(self, i: int) -> np.ndarray:
        return self.start if self.starts is None else self.starts[i]

    def record(self, i: int) -> ExitRecord:
        s0 = self.start_of(i)
        return ExitRecord(
            start=(float(s0[0]), float(s0[1])),
            position=(float(self.positions[i, 0]), float(self.positions[i, 1])),
            tau=float(self.tau[i]), jumps=int(self.jumps[i]), complete=bool(self.complete[i]),
            diffusive_exit=bool(self.diffusive_exit[i]),
            displacement_bound=float(self.displacement_bound * self.tau[i]),
        )

    def rows(self):
        """``(x0, y0, exit_x, exit_y, tau, jumps, complete)`` tuples."""
        for i in range(len(self)):
            s0 = self.start_of(i)
            yield (float(s0[0]), float(s0[1]), float(self.positions[i, 0]),
                   float(self.positions[i, 1]), float(self.tau[i]), int(self.jumps[i]), bool(self.complete[i]))


def _check_args(model: StableModel, x0, R: float, eps: float, strict_eps: bool) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (2,) and (x0.ndim != 2 or x0.shape[1] != 2):
        raise ValueError("start must have shape (2,) or (n, 2)")
    if not R > 0:
        raise ValueError("radius must be positive")
    if not np.all(np.hypot(x0[..., 0], x0[..., 1]) < R):
        raise ValueError("start point must lie inside the ball")
    if not eps > 0:
        raise ValueError("eps must be positive")
    if strict_eps and eps > R / 100:
        raise ValueError("eps must not exceed R/100")
    if model.alpha >= 1 and not model.compensate:
        raise ValueError("alpha >= 1 needs small-jump compensation (compensate=True)")
    return x0


def _run_block(model: StableModel, x0: np.ndarray, R: float, eps: float, n: int,
               rng: np.random.Generator, budget: int, chol: np.ndarray | None, occ_r2: float = -1.0):
    alpha = model.alpha
    rate = model.jump_rate(eps)
    pos = np.tile(x0, (n, 1)) if x0.ndim == 1 else x0.copy()
    tau = np.zeros(n)
    occ = np.zeros(n)
    jumps = np.zeros(n, dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    diff = np.zeros(n, dtype=bool)
    idx = np.arange(n)
    R2 = R * R
    while idx.size:
        k = idx.size
        dt = rng.exponential(1.0 / rate, k)
        tau[idx] += dt
        p = pos[idx]
        if occ_r2 > 0:
            # position is held between jumps; the diffusive part is lumped at the jump time
            occ[idx] += dt * (p[:, 0] ** 2 + p[:, 1] ** 2 < occ_r2)
        if chol is not None:
            p = p + (rng.standard_normal((k, 2)) @ chol.T) * np.sqrt(dt)[:, None]
            out_d = p[:, 0] ** 2 + p[:, 1] ** 2 >= R2
        else:
            out_d = np.zeros(k, dtype=bool)
        theta = sample_directions(model.measure, k, rng)
        r = eps * (1.0 - rng.random(k)) ** (-1.0 / alpha)
        jumped = p + np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)
        # a path already outside after its diffusive move exits there, without the jump
        new = np.where(out_d[:, None], p, jumped)
        jumps[idx] += ~out_d
        pos[idx] = new
        out = out_d | (new[:, 0] ** 2 + new[:, 1] ** 2 >= R2)
        diff[idx[out_d]] = True
        done[idx[out]] = True
        stuck = ~out & (jumps[idx] >= budget)
        idx = idx[~out & ~stuck]
    return pos, tau, jumps, done, diff, occ


def simulate_exits(model: StableModel, x0, R: float = 1.0, n_paths: int = 1000, eps: float | None = None,
                   seed: int = 0, stream: int = 0, workers: int = 1,
                   jump_budget: int = DEFAULT_JUMP_BUDGET, strict_eps: bool = True,
                   occupation_radius: float | None = None) -> ExitBatch:
    """Simulate independent exits from ``B(0, R)``.

    ``x0`` is either one start point, shared by ``n_paths`` paths, or an
    ``(n, 2)`` array of per-path starts, in which case ``n_paths`` is ignored.
    """
    eps = 1e-3 * R if eps is None else float(eps)
    x0 = _check_args(model, x0, R, eps, strict_eps)
    if x0.ndim == 2:
        n_paths = len(x0)
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    occ_r2 = -1.0 if occupation_radius is None else float(occupation_radius) ** 2
    chol = None
    if model.compensate and model.alpha >= 1:
        chol = np.linalg.cholesky(model.small_jump_covariance(eps) + 1e-300 * np.eye(2))
    nblocks = -(-n_paths // BLOCK)
    sizes = [min(BLOCK, n_paths - b * BLOCK) for b in range(nblocks)]

    def job(b: int):
        start = x0 if x0.ndim == 1 else x0[b * BLOCK: b * BLOCK + sizes[b]]
        return _run_block(model, start, R, eps, sizes[b], block_rng(seed, stream, b), jump_budget, chol, occ_r2)

    if workers > 1 and nblocks > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(job, range(nblocks)))
    else:
        parts = [job(b) for b in range(nblocks)]
    pos, tau, jumps, done, diff, occ = (np.concatenate(z) for z in zip(*parts))
    bound = model.small_jump_drift_bound(eps) if model.alpha < 1 else 0.0
    common = x0 if x0.ndim == 1 else np.full(2, np.nan)
    return ExitBatch(common, float(R), eps, pos, tau, jumps, done, diff, bound, int(seed), int(stream),
                     starts=None if x0.ndim == 1 else x0.copy(),
                     occupation=occ if occupation_radius is not None else None)


def simulate_exit(model: StableModel, x0, R: float, eps: float | None, rng: np.random.Generator,
                  jump_budget: int = DEFAULT_JUMP_BUDGET) -> ExitRecord:
    """One exit using the caller's generator."""
    eps = 1e-3 * R if eps is None else float(eps)
    x0 = _check_args(model, x0, R, eps, True).reshape(2)
    chol = None
    if model.compensate and model.alpha >= 1:
        chol = np.linalg.cholesky(model.small_jump_covariance(eps))
    pos, tau, jumps, done, diff, _ = _run_block(model, x0, R, eps, 1, rng, jump_budget, chol)
    bound = model.small_jump_drift_bound(eps) if model.alpha < 1 else 0.0
    return ExitRecord((float(x0[0]), float(x0[1])), (float(pos[0, 0]), float(pos[0, 1])), float(tau[0]),
                      int(jumps[0]), bool(done[0]), bool(diff[0]),
                      float(bound * tau[0]) if math.isfinite(bound) else math.inf)

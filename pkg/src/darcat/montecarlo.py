"""Seeded simulation study of the persistence and marginal estimators.

For every cell of a (pi, alpha, n) grid, m chains are simulated and the
three estimators computed per chain.  Replicates whose persistence
estimate falls outside [0, 1) are counted out (m1 for the likelihood
estimator, m2 for the least-squares one) and excluded from that
estimator's mean, while the marginal frequencies are averaged over all
replicates.  Everything is deterministic given the master seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .core import DarcatError
from .dar import DarModel, simulate
from .estimate import estimate_alpha_ls, estimate_alpha_mle, estimate_pi

__all__ = [
    "SimGrid",
    "CellResult",
    "run_grid",
    "study_grid",
    "results_by_pi",
    "format_cells_csv",
    "format_cells_markdown",
    "format_cells_text",
]

DEFAULT_SEED = 2


@dataclass(frozen=True)
class SimGrid:
    """Simulation grid: marginals x persistences x lengths, m replicates each."""

    pis: tuple[tuple[float, ...], ...]
    alphas: tuple[float, ...]
    ns: tuple[int, ...]
    m: int
    seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        if self.m < 1:
            raise DarcatError(f"m must be >= 1, got {self.m}")
        for a in self.alphas:
            if not 0.0 <= a < 1.0:
                raise DarcatError(f"alpha must lie in [0, 1), got {a}")


@dataclass(frozen=True)
class CellResult:
    """Per-cell averages and the counts of admissible replicates."""

    pi: tuple[float, ...]
    alpha: float
    n: int
    m: int
    mean_pi_hat: tuple[float, ...]
    mean_alpha1: float | None
    m1: int
    mean_alpha2: float | None
    m2: int


def _replicate_seeds(master: int, total: int) -> np.ndarray:
    # One integer seed per replicate, cell-major: the uint32 stream of the
    # master seed sequence.  Adding cells or replicates at the end never
    # changes the seeds of earlier ones.
    return np.random.SeedSequence(master).generate_state(total, dtype=np.uint32)


def run_grid(grid: SimGrid) -> tuple[CellResult, ...]:
    """Simulate every cell of the grid and summarise the estimators."""
    cells = list(product(grid.pis, grid.alphas, grid.ns))
    seeds = _replicate_seeds(grid.seed, len(cells) * grid.m)
    results = []
    for c, (pi, alpha, n) in enumerate(cells):
        model = DarModel.from_pi(alpha, np.asarray(pi, dtype=float))
        pi_hats = np.empty((grid.m, len(pi)))
        a1: list[float] = []
        a2: list[float] = []
        for r in range(grid.m):
            series = simulate(model, n, int(seeds[c * grid.m + r]))
            pi_est = estimate_pi(series)
            pi_hats[r] = pi_est.pi_hat
            try:
                est1 = estimate_alpha_mle(series, pi_est.pi_hat)
                if est1.converged:
                    a1.append(est1.alpha_hat)
            except DarcatError:
                pass
            try:
                est2 = estimate_alpha_ls(series, pi_est.pi_hat)
                if est2.converged:
                    a2.append(est2.alpha_hat)
            except DarcatError:
                pass
        results.append(
            CellResult(
                pi=tuple(pi),
                alpha=alpha,
                n=n,
                m=grid.m,
                mean_pi_hat=tuple(pi_hats.mean(axis=0)),
                mean_alpha1=float(np.mean(a1)) if a1 else None,
                m1=len(a1),
                mean_alpha2=float(np.mean(a2)) if a2 else None,
                m2=len(a2),
            )
        )
    return tuple(results)


def study_grid(m: int = 100, seed: int = DEFAULT_SEED) -> SimGrid:
    """The four-marginal study grid: two 2-state and two 3-state configurations."""
    return SimGrid(
        pis=(
            (1 / 2, 1 / 2),
            (1 / 3, 2 / 3),
            (1 / 3, 1 / 3, 1 / 3),
            (1 / 4, 1 / 2, 1 / 4),
        ),
        alphas=(0.1, 0.2, 0.5, 0.8, 0.9),
        ns=(50, 100, 500),
        m=m,
        seed=seed,
    )


def results_by_pi(results: tuple[CellResult, ...]) -> dict[tuple[float, ...], list[CellResult]]:
    """Group cell results per marginal configuration, preserving order."""
    grouped: dict[tuple[float, ...], list[CellResult]] = {}
    for cell in results:
        grouped.setdefault(cell.pi, []).append(cell)
    return grouped


def _fmt_pi(values, digits: int = 3) -> str:
    return "(" + ";".join(f"{v:.{digits}f}" for v in values) + ")"


def _fmt_opt(x: float | None) -> str:
    return "NA" if x is None else f"{x:.3f}"


def format_cells_csv(cells: list[CellResult]) -> str:
    lines = ["alpha,n,pi_hat,alpha1,m1,alpha2,m2"]
    for c in cells:
        lines.append(
            f"{c.alpha},{c.n},{_fmt_pi(c.mean_pi_hat)},{_fmt_opt(c.mean_alpha1)},{c.m1},"
            f"{_fmt_opt(c.mean_alpha2)},{c.m2}"
        )
    return "\n".join(lines) + "\n"


def format_cells_markdown(cells: list[CellResult]) -> str:
    lines = [
        "| alpha | n | pi_hat | alpha1 | m1 | alpha2 | m2 |",
        "|---|---|---|---|---|---|---|",
    ]
    for c in cells:
        lines.append(
            f"| {c.alpha} | {c.n} | {_fmt_pi(c.mean_pi_hat)} | {_fmt_opt(c.mean_alpha1)} | {c.m1} "
            f"| {_fmt_opt(c.mean_alpha2)} | {c.m2} |"
        )
    return "\n".join(lines) + "\n"


def format_cells_text(cells: list[CellResult]) -> str:
    lines = [f"{'alpha':>6} {'n':>5} {'pi_hat':>24} {'alpha1':>7} {'m1':>4} {'alpha2':>7} {'m2':>4}"]
    for c in cells:
        lines.append(
            f"{c.alpha:>6} {c.n:>5} {_fmt_pi(c.mean_pi_hat):>24} {_fmt_opt(c.mean_alpha1):>7} {c.m1:>4} "
            f"{_fmt_opt(c.mean_alpha2):>7} {c.m2:>4}"
        )
    return "\n".join(lines) + "\n"

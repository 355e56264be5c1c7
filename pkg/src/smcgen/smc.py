"""Standard and conditional sequential Monte Carlo with full trace recording."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .core import AncestryMatrix, SizeError, fmt_float
from .models import ModelSpec
from .resampling import Scheme, resample


class DegenerateWeightsError(RuntimeError):
    def __init__(self, generation: int):
        super().__init__(f"all potentials are zero at generation {generation}")
        self.generation = generation


@dataclass(frozen=True)
class SmcTrace:
    """Complete record of one run.

    states[t], weights[t] for t = 0..T; ancestry[t] and offspring[t] for
    t = 0..T-1 (row t maps generation t+1 onto generation t, 0-based);
    likelihood_factors[t] is the mean unnormalised potential at generation t.
    """

    states: np.ndarray
    weights: np.ndarray
    ancestry: np.ndarray
    offspring: np.ndarray
    likelihood_factors: np.ndarray
    scheme: str
    model: str
    immortal_slots: Optional[np.ndarray] = None

    @property
    def N(self) -> int:
        return self.weights.shape[1]

    @property
    def T(self) -> int:
        return self.weights.shape[0] - 1

    def ancestry_matrix(self) -> AncestryMatrix:
        return AncestryMatrix(self.ancestry)


@dataclass(frozen=True)
class ImmortalPath:
    positions: np.ndarray     # x*_{0:T}, first axis is time
    slot_indices: np.ndarray  # a*_{0:T}, 0-based

    def __post_init__(self):
        slots = np.asarray(self.slot_indices, dtype=np.int64)
        if len(self.positions) != len(slots):
            raise ValueError("positions and slot indices must both have length T+1")
        object.__setattr__(self, "slot_indices", slots)

    @property
    def T(self) -> int:
        return len(self.slot_indices) - 1

    @classmethod
    def from_trace(cls, trace: SmcTrace, terminal_index: int, slots=None) -> "ImmortalPath":
        """Trace a terminal particle back to generation 0; slots default to all 0 (index 1)."""
        idx = terminal_index
        path = [trace.states[trace.T][idx]]
        for t in range(trace.T - 1, -1, -1):
            idx = trace.ancestry[t][idx]
            path.append(trace.states[t][idx])
        positions = np.array(path[::-1])
        if slots is None:
            slots = np.zeros(trace.T + 1, dtype=np.int64)
        return cls(positions, slots)


def _normalise(g: np.ndarray, generation: int) -> tuple[np.ndarray, float]:
    g = np.asarray(g, dtype=float)
    total = g.sum()
    if not total > 0:
        raise DegenerateWeightsError(generation)
    return g / total, total / g.size


def _check_sizes(N, T):
    if N < 2:
        raise SizeError("N must be >= 2")
    if T < 0:
        raise SizeError("T must be >= 0")


def run_smc(model: ModelSpec, N: int, T: int, scheme, rng: np.random.Generator,
            check_bounds: bool = False) -> SmcTrace:
    """Run standard SMC for T resampling/mutation steps with N particles."""
    _check_sizes(N, T)
    scheme = Scheme.parse(scheme)
    x = model.sample_initial(rng, N)
    states = np.empty((T + 1,) + x.shape, dtype=x.dtype)
    weights = np.empty((T + 1, N))
    ancestry = np.empty((T, N), dtype=np.int64)
    offspring = np.empty((T, N), dtype=np.int64)
    factors = np.empty(T + 1)

    g = model.g0(x)
    if check_bounds:
        model.check_potentials(g)
    states[0] = x
    weights[0], factors[0] = _normalise(g, 0)
    for t in range(T):
        a = resample(scheme, weights[t], rng)
        ancestry[t] = a
        offspring[t] = np.bincount(a, minlength=N)
        parents = states[t][a]
        x = model.sample_kernel(t + 1, parents, rng)
        g = model.potential(t + 1, parents, x)
        if check_bounds:
            model.check_potentials(g)
            model.check_mixing(t + 1, parents, x)
        states[t + 1] = x
        weights[t + 1], factors[t + 1] = _normalise(g, t + 1)
    return SmcTrace(states, weights, ancestry, offspring, factors, scheme.value, model.name)


def run_csmc(model: ModelSpec, N: int, T: int, immortal: ImmortalPath,
             rng: np.random.Generator, scheme="multinomial",
             check_bounds: bool = False) -> SmcTrace:
    """Conditional SMC with multinomial resampling.

    The immortal trajectory occupies slot immortal.slot_indices[t] at each
    generation and its parent link is forced; every other slot draws its
    parent from Categorical(w_t).
    """
    _check_sizes(N, T)
    if Scheme.parse(scheme) is not Scheme.MULTINOMIAL:
        raise ValueError("conditional SMC is implemented for multinomial resampling only")
    if immortal.T != T:
        raise ValueError("immortal path must have length T+1")
    slots = immortal.slot_indices
    if slots.min() < 0 or slots.max() >= N:
        raise ValueError("immortal slot index outside {1..N}")

    x = model.sample_initial(rng, N)
    x[slots[0]] = immortal.positions[0]
    states = np.empty((T + 1,) + x.shape, dtype=x.dtype)
    weights = np.empty((T + 1, N))
    ancestry = np.empty((T, N), dtype=np.int64)
    offspring = np.empty((T, N), dtype=np.int64)
    factors = np.empty(T + 1)

    g = model.g0(x)
    if check_bounds:
        model.check_potentials(g)
    states[0] = x
    weights[0], factors[0] = _normalise(g, 0)
    for t in range(T):
        c = np.cumsum(weights[t])
        c /= c[-1]
        a = np.minimum(np.searchsorted(c, rng.random(N), side="right"), N - 1)
        a[slots[t + 1]] = slots[t]
        ancestry[t] = a
        offspring[t] = np.bincount(a, minlength=N)
        parents = states[t][a]
        x = model.sample_kernel(t + 1, parents, rng)
        x[slots[t + 1]] = immortal.positions[t + 1]
        g = model.potential(t + 1, parents, x)
        if check_bounds:
            model.check_potentials(g)
        states[t + 1] = x
        weights[t + 1], factors[t + 1] = _normalise(g, t + 1)
    return SmcTrace(states, weights, ancestry, offspring, factors, "multinomial",
                    model.name, immortal_slots=slots.copy())


def check_csmc_invariants(trace: SmcTrace, immortal: ImmortalPath) -> None:
    """Assert the immortal positions and ancestry links hold at every generation."""
    slots = immortal.slot_indices
    for t in range(trace.T + 1):
        if not np.array_equal(trace.states[t][slots[t]], immortal.positions[t]):
            raise AssertionError(f"immortal position broken at generation {t}")
    for t in range(trace.T):
        if trace.ancestry[t][slots[t + 1]] != slots[t]:
            raise AssertionError(f"immortal ancestry link broken at generation {t}")
        if trace.offspring[t][slots[t]] < 1:
            raise AssertionError(f"immortal parent has no offspring at generation {t}")


def marginal_likelihood(trace: SmcTrace) -> float:
    """Z_hat = product over generations of the mean unnormalised potential."""
    return float(np.exp(np.sum(np.log(trace.likelihood_factors))))


def filtering_estimate(trace: SmcTrace, t: int, f: Callable) -> float:
    """sum_i w_t^(i) f(X_t^(i)); `f` maps the generation-t state array to N values."""
    if not 0 <= t <= trace.T:
        raise IndexError(f"generation {t} outside 0..{trace.T}")
    vals = np.asarray(f(trace.states[t]), dtype=float)
    return float(np.dot(trace.weights[t], vals))


def export_trace(trace: SmcTrace, directory, seed: int, config_hash: str = "",
                 extra: Optional[dict] = None) -> Path:
    """Write ancestry.csv, weights.csv and meta.json into `directory`."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    comment = f"seed={seed} config_hash={config_hash}"
    (out / "ancestry.csv").write_text(trace.ancestry_matrix().to_csv(comment))
    lines = [f"# {comment}", "t," + ",".join(f"w{i}" for i in range(1, trace.N + 1))]
    for t, row in enumerate(trace.weights):
        lines.append(f"{t}," + ",".join(fmt_float(v) for v in row))
    (out / "weights.csv").write_text("\n".join(lines) + "\n")
    meta = {
        "N": trace.N,
        "T": trace.T,
        "scheme": trace.scheme,
        "model": trace.model,
        "seed": seed,
        "config_hash": config_hash,
        "Zhat": marginal_likelihood(trace),
    }
    if extra:
        meta.update(extra)
    (out / "meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    return out


def read_weights_csv(path) -> np.ndarray:
    rows = []
    for line in Path(path).read_text().splitlines():
        if not line or line.startswith("#") or line.startswith("t,"):
            continue
        rows.append([float(v) for v in line.split(",")[1:]])
    return np.array(rows)

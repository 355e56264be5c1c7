"""State-space models used to drive the particle systems.

A model supplies the initial sampler mu, the mutation kernels K_t, and the
potentials g_0 and g_t(x_prev, x).  All callables act on a whole particle
population at once: states are arrays whose first axis indexes particles.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np


class ModelParameterError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    name: str
    sample_initial: Callable  # (rng, N) -> states
    sample_kernel: Callable   # (t, x_prev, rng) -> states at time t
    g0: Callable              # (x) -> potentials
    potential: Callable       # (t, x_prev, x) -> potentials
    a: Optional[float] = None
    eps: Optional[float] = None
    kernel_density: Optional[Callable] = None     # (t, x, x') -> q_t(x, x')
    reference_density: Optional[Callable] = None  # (x') -> h(x')
    params: dict = field(default_factory=dict)

    def check_potentials(self, g, tol: float = 1e-12) -> None:
        """Raise AssertionError if declared bounds 1/a <= g <= a are violated."""
        if self.a is None:
            return
        g = np.asarray(g)
        lo, hi = 1.0 / self.a, self.a
        if np.any(g < lo * (1 - tol)) or np.any(g > hi * (1 + tol)):
            raise AssertionError(
                f"potential outside [1/a, a] for a={self.a}: range [{g.min()}, {g.max()}]")

    def check_mixing(self, t, x, x_new, tol: float = 1e-12) -> None:
        """Raise AssertionError if eps h(x') <= q_t(x, x') <= h(x')/eps fails."""
        if self.eps is None or self.kernel_density is None:
            return
        q = self.kernel_density(t, x, x_new)
        h = self.reference_density(x_new)
        if np.any(q < self.eps * h * (1 - tol)) or np.any(q > h / self.eps * (1 + tol)):
            raise AssertionError(f"strong mixing bound violated for eps={self.eps}")


def neutral_model(d: int = 1) -> ModelSpec:
    """Gaussian random walk on R^d with g identically 1 (uniform weights)."""
    if d < 1:
        raise ModelParameterError("dimension must be >= 1")

    def sample_initial(rng, N):
        return rng.standard_normal((N, d))

    def sample_kernel(t, x, rng):
        return x + rng.standard_normal(x.shape)

    def ones(x):
        return np.ones(len(x))

    return ModelSpec(
        name="neutral",
        sample_initial=sample_initial,
        sample_kernel=sample_kernel,
        g0=ones,
        potential=lambda t, x_prev, x: ones(x),
        a=1.0,
        params={"d": d},
    )


def _circ_dist(x, y):
    d = np.abs(x - y) % 1.0
    return np.minimum(d, 1.0 - d)


def bounded_potential_model(a: float = 2.0, eps: float = 0.5, seed: int = 0,
                            width: float = 0.1) -> ModelSpec:
    """Model on the circle [0, 1) meeting 1/a <= g <= a and eps-mixing.

    The reference density h is uniform.  The kernel draws from h with
    probability 1 - lam and otherwise moves uniformly within a window of
    the given width around the current point, so
    q(x, x') = (1 - lam) + lam / width * 1{|x' - x| < width / 2}.
    lam is the largest value keeping eps <= q <= 1/eps.

    The potential rewards closeness to a moving target phase phi_t (drawn
    from `seed`), is clipped so g lies in [1/a, a], and also depends on
    the previous position through a small term.  The persistent high-weight
    region keeps the weight spread away from zero.
    """
    if not a >= 1.0:
        raise ModelParameterError("a must be >= 1")
    if not 0.0 < eps <= 1.0:
        raise ModelParameterError("eps must lie in (0, 1]")
    if not 0.0 < width < 1.0:
        raise ModelParameterError("width must lie in (0, 1)")

    local_height = 1.0 / width
    if eps == 1.0:
        lam = 0.0
    else:
        lam = min(1.0 - eps, (1.0 / eps - 1.0) / (local_height - 1.0))

    prng = np.random.default_rng(seed)
    phase0 = prng.random()
    drift = prng.uniform(0.05, 0.15)
    sharpness = prng.uniform(1.2, 1.6)
    log_a = np.log(a)

    def phase(t):
        return (phase0 + drift * t) % 1.0

    def exponent(t, x_prev, x):
        s = sharpness * np.cos(2 * np.pi * (x - phase(t)))
        if x_prev is not None:
            s = s + 0.25 * np.cos(2 * np.pi * (x - x_prev))
        return np.clip(s, -1.0, 1.0)

    def sample_initial(rng, N):
        return rng.random(N)

    def sample_kernel(t, x, rng):
        n = len(x)
        local = rng.random(n) < lam
        fresh = rng.random(n)
        moved = (x + width * (fresh - 0.5)) % 1.0
        return np.where(local, moved, fresh)

    def kernel_density(t, x, x_new):
        inside = _circ_dist(x, x_new) < width / 2
        return (1.0 - lam) + lam * local_height * inside

    return ModelSpec(
        name=f"bounded(a={a:g},eps={eps:g})",
        sample_initial=sample_initial,
        sample_kernel=sample_kernel,
        g0=lambda x: np.exp(log_a * exponent(0, None, x)),
        potential=lambda t, x_prev, x: np.exp(log_a * exponent(t, x_prev, x)),
        a=float(a),
        eps=float(eps),
        kernel_density=kernel_density,
        reference_density=lambda x: np.ones(len(x)),
        params={"a": a, "eps": eps, "seed": seed, "width": width, "lam": lam},
    )


@dataclass(frozen=True)
class DiscreteHmm:
    """Finite-state HMM given by its emission likelihood table.

    `emission[x, t]` is the likelihood of observation y_t in state x, so the
    observations themselves never need to be stored.
    """

    transition: np.ndarray
    emission: np.ndarray
    initial: Optional[np.ndarray] = None

    def __post_init__(self):
        P = np.asarray(self.transition, dtype=float)
        E = np.asarray(self.emission, dtype=float)
        m = P.shape[0]
        if P.shape != (m, m) or np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, atol=1e-12):
            raise ModelParameterError("transition must be square with rows summing to 1")
        if E.ndim != 2 or E.shape[0] != m or E.shape[1] < 1 or np.any(E <= 0):
            raise ModelParameterError("emission must be m x (T+1) with positive entries")
        pi = np.full(m, 1.0 / m) if self.initial is None else np.asarray(self.initial, dtype=float)
        if pi.shape != (m,) or np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-12:
            raise ModelParameterError("initial distribution must be a probability vector")
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "emission", E)
        object.__setattr__(self, "initial", pi)

    @property
    def m(self) -> int:
        return self.transition.shape[0]

    @property
    def T(self) -> int:
        return self.emission.shape[1] - 1

    @classmethod
    def from_text(cls, text: str) -> "DiscreteHmm":
        """Parse 'm T', the m x m transition matrix, the m x (T+1) emission table.

        An optional final row of m numbers gives the initial distribution
        (uniform when absent).
        """
        nums = [float(tok) for tok in text.split()]
        if len(nums) < 2:
            raise ModelParameterError("HMM file must start with 'm T'")
        m, T = int(nums[0]), int(nums[1])
        body = nums[2:]
        need = m * m + m * (T + 1)
        if len(body) not in (need, need + m):
            raise ModelParameterError(f"expected {need} (or {need + m}) numbers after header")
        P = np.array(body[: m * m]).reshape(m, m)
        E = np.array(body[m * m: need]).reshape(m, T + 1)
        pi = np.array(body[need:]) if len(body) > need else None
        return cls(P, E, pi)

    @classmethod
    def read(cls, path) -> "DiscreteHmm":
        return cls.from_text(Path(path).read_text())

    def to_text(self) -> str:
        lines = [f"{self.m} {self.T}"]
        lines += [" ".join(repr(float(v)) for v in row) for row in self.transition]
        lines += [" ".join(repr(float(v)) for v in row) for row in self.emission]
        lines.append(" ".join(repr(float(v)) for v in self.initial))
        return "\n".join(lines) + "\n"


def two_state_hmm() -> DiscreteHmm:
    """Fixed 2-state, T = 5 example used by the likelihood checks."""
    return DiscreteHmm(
        transition=np.array([[0.9, 0.1], [0.2, 0.8]]),
        emission=np.array([[0.7, 0.2, 0.6, 0.1, 0.5, 0.8],
                           [0.3, 0.9, 0.3, 0.8, 0.4, 0.1]]),
        initial=np.array([0.6, 0.4]),
    )


def hmm_forward(hmm: DiscreteHmm):
    """Forward recursion: returns (likelihood, filtering marginals (T+1) x m)."""
    alpha = hmm.initial * hmm.emission[:, 0]
    log_z = 0.0
    filt = np.empty((hmm.T + 1, hmm.m))
    s = alpha.sum()
    log_z += np.log(s)
    filt[0] = alpha / s
    for t in range(1, hmm.T + 1):
        alpha = (filt[t - 1] @ hmm.transition) * hmm.emission[:, t]
        s = alpha.sum()
        log_z += np.log(s)
        filt[t] = alpha / s
    return float(np.exp(log_z)), filt


def hmm_exact_likelihood(hmm: DiscreteHmm) -> float:
    return hmm_forward(hmm)[0]


def hmm_filtering_marginals(hmm: DiscreteHmm) -> np.ndarray:
    return hmm_forward(hmm)[1]


def hmm_likelihood_by_enumeration(hmm: DiscreteHmm) -> float:
    """Sum over all m^(T+1) state paths; exponential cost, for checking only."""
    total = 0.0
    cols = np.arange(hmm.T + 1)
    for path in itertools.product(range(hmm.m), repeat=hmm.T + 1):
        path = np.array(path)
        p = hmm.initial[path[0]] * np.prod(hmm.transition[path[:-1], path[1:]])
        total += p * np.prod(hmm.emission[path, cols])
    return total


def hmm_model(hmm: DiscreteHmm) -> ModelSpec:
    """Bootstrap particle filter for `hmm` (mu = initial law, K = transition)."""
    cum = np.cumsum(hmm.transition, axis=1)
    cum[:, -1] = 1.0
    init_cum = np.cumsum(hmm.initial)
    init_cum[-1] = 1.0

    def sample_initial(rng, N):
        return np.searchsorted(init_cum, rng.random(N), side="right")

    def sample_kernel(t, x, rng):
        u = rng.random(len(x))
        return (u[:, None] >= cum[x]).sum(axis=1)

    return ModelSpec(
        name="hmm",
        sample_initial=sample_initial,
        sample_kernel=sample_kernel,
        g0=lambda x: hmm.emission[x, 0],
        potential=lambda t, x_prev, x: hmm.emission[x, t],
        params={"m": hmm.m, "T": hmm.T},
    )


_MODEL_RE = re.compile(r"^\s*(\w+)\s*(?:\((.*)\))?\s*$")


def parse_model(text: str) -> ModelSpec:
    """Build a model from 'neutral', 'neutral(d=2)', 'bounded(a=2,eps=0.5)', 'hmm(file=path)'."""
    m = _MODEL_RE.match(text)
    if not m:
        raise ModelParameterError(f"cannot parse model id {text!r}")
    kind, argstr = m.group(1), m.group(2) or ""
    args = {}
    for part in filter(None, (p.strip() for p in argstr.split(","))):
        if "=" not in part:
            raise ModelParameterError(f"model argument {part!r} is not key=value")
        k, v = part.split("=", 1)
        args[k.strip()] = v.strip()
    try:
        if kind == "neutral":
            return neutral_model(int(args.get("d", 1)))
        if kind == "bounded":
            return bounded_potential_model(float(args.get("a", 2.0)), float(args.get("eps", 0.5)),
                                           seed=int(args.get("seed", 0)),
                                           width=float(args.get("width", 0.1)))
        if kind == "hmm":
            if "file" in args:
                return hmm_model(DiscreteHmm.read(args["file"]))
            return hmm_model(two_state_hmm())
    except (TypeError, ValueError) as exc:
        raise ModelParameterError(str(exc)) from exc
    raise ModelParameterError(f"unknown model {kind!r}")

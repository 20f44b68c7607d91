"""Time steppers for the two velocity-sphere diffusions.

Two Markov processes on the constraint manifolds are simulated, both weak
order O(dt):

* isotropic sphere diffusion, generator Delta_M (Laplace-Beltrami on the
  full manifold): projected Euler-Maruyama increments sqrt(2 dt) P xi
  followed by exact constraint restoration;

* pairwise diffusion, generator (1/(N-1)) sum_{k != l} w_kl Delta_{B_kl}
  with weight w_kl = |v_k - v_l|^{2+gamma} (gamma = -3 is the Coulomb
  weight |v_k - v_l|^{-1}): per unordered pair, a tangent kick on the
  2-dimensional pair-collision manifold with diffusivity a_kl =
  2 w_kl / (N-1), followed by exact restoration of the pair momentum and
  separation (the binary-collision conservation laws), then a global
  cleanup renormalization.

Each step visits every unordered pair exactly once, in a randomized
round-robin schedule (random particle relabeling and round order per
replica per step); pairs within a round are disjoint, so the vectorized
simultaneous update coincides with a sequential sweep.

`generator_apply` evaluates the pairwise generator exactly on a catalog of
test polynomials and is the oracle for the weak-consistency tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import observables as obs_mod
from .geometry import (
    ConservationMode,
    ManifoldSpec,
    VelocityState,
    renormalize,
    renormalize_batch,
    sample_uniform_batch,
    tangent_project_batch,
)


@dataclass(frozen=True)
class KernelSpec:
    """Collision-kernel exponent gamma (> -5) and singularity cutoff.

    The pair weight is |v_k - v_l|^{2+gamma}; gamma = -3 reproduces the
    Coulomb weight |v_k - v_l|^{-1}. ``cutoff=None`` resolves to the
    manifold default (1e-8 sqrt(eps)) at use time.
    """

    gamma: float
    cutoff: float | None = None

    def __post_init__(self):
        if not self.gamma > -5.0:
            raise ValueError("kernel exponent must satisfy gamma > -5")

    def resolve_cutoff(self, spec: ManifoldSpec) -> float:
        return spec.cutoff if self.cutoff is None else self.cutoff


SPHERE_DIFFUSION = "sphere"
PAIR_DIFFUSION = "pair"


@dataclass(frozen=True)
class SimConfig:
    """Ensemble run parameters.

    dt > 0; t_end must be a multiple of dt (t_end = 0 is the degenerate
    "no records" case); process is "sphere" or "pair" (the latter requires
    a kernel).
    """

    dt: float
    t_end: float
    n_replicas: int
    seed: int
    process: str = SPHERE_DIFFUSION
    kernel: KernelSpec | None = None
    record_every: int = 1

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if self.t_end != 0.0 and self.t_end < self.dt:
            raise ValueError("t_end must be >= dt (or exactly 0)")
        if self.n_replicas < 1:
            raise ValueError("n_replicas must be >= 1")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.process not in (SPHERE_DIFFUSION, PAIR_DIFFUSION):
            raise ValueError(f"unknown process {self.process!r}")
        if self.process == PAIR_DIFFUSION and self.kernel is None:
            raise ValueError("pair diffusion requires a kernel")

    @property
    def n_steps(self) -> int:
        n = int(round(self.t_end / self.dt))
        if abs(n * self.dt - self.t_end) > 1e-9 * max(self.dt, self.t_end):
            raise ValueError("t_end must be an integer multiple of dt")
        return n


@dataclass
class EnsembleSnapshot:
    """States of every replica at one time; velocities has shape (R, N, 3)."""

    time: float
    spec: ManifoldSpec
    velocities: np.ndarray

    @property
    def states(self) -> list[VelocityState]:
        return [VelocityState(self.spec, v.ravel()) for v in self.velocities]


@dataclass
class SimResult:
    spec: ManifoldSpec
    config: SimConfig
    series: dict[str, "obs_mod.ObservableSeries"]
    snapshots: list[EnsembleSnapshot]


# ---------------------------------------------------------------------------
# sphere diffusion


def _sphere_step_batch(spec: ManifoldSpec, states: np.ndarray, dt: float,
                       xi: np.ndarray) -> np.ndarray:
    moved = states + math.sqrt(2.0 * dt) * tangent_project_batch(spec, states, xi)
    return renormalize_batch(spec, moved)


def step_sphere_diffusion(spec: ManifoldSpec, state: VelocityState, dt: float,
                          rng: np.random.Generator) -> VelocityState:
    """One projected Euler-Maruyama step of Brownian motion on the manifold."""
    if dt == 0.0:
        return state
    xi = rng.standard_normal((1, spec.n_particles, 3))
    out = _sphere_step_batch(spec, state.particles[None], dt, xi)
    return VelocityState(spec, out[0].ravel())


# ---------------------------------------------------------------------------
# pairwise diffusion


@lru_cache(maxsize=None)
def _round_robin_rounds(n: int) -> np.ndarray:
    """Circle-method schedule: array (n_rounds, n/2 pairs, 2) covering each
    unordered pair of range(n) exactly once; rounds are perfect matchings.
    For odd n the bye pair is dropped (rounds have (n-1)/2 pairs)."""
    m = n if n % 2 == 0 else n + 1
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a < n and b < n:
                pairs.append((min(a, b), max(a, b)))
        rounds.append(pairs)
        players = [players[0], players[-1]] + players[1:-1]
    return np.asarray(rounds, dtype=np.intp)


def _pair_round_update(states: np.ndarray, k_idx: np.ndarray, l_idx: np.ndarray,
                       eta: np.ndarray, gamma: float, cutoff: float,
                       diff_scale: float, dt: float) -> None:
    """Kick one round of disjoint pairs in place.

    states (R, N, 3); k_idx/l_idx (R, P) disjoint within each row; eta
    (R, P, 3) standard normals. Per pair: increment sqrt(a dt) P_perp eta on
    particle k, the opposite on l (a = diff_scale * beta^{2+gamma}), then
    rescale the separation back to beta exactly. Pair momentum is conserved
    identically; pairs below the cutoff are skipped.
    """
    rows = np.arange(states.shape[0])[:, None]
    vk = states[rows, k_idx]
    vl = states[rows, l_idx]
    d = vk - vl
    beta = np.sqrt((d * d).sum(-1))
    ok = beta >= cutoff
    safe = np.where(ok, beta, 1.0)
    amp = np.sqrt(diff_scale * dt * safe ** (2.0 + gamma))
    nhat = d / safe[..., None]
    eta_perp = eta - nhat * (nhat * eta).sum(-1, keepdims=True)
    d_new = d + (2.0 * amp)[..., None] * eta_perp
    norm = np.sqrt((d_new * d_new).sum(-1, keepdims=True))
    d_rest = d_new * (beta[..., None] / norm)
    half = np.where(ok[..., None], 0.5 * (d_rest - d), 0.0)
    states[rows, k_idx] = vk + half
    states[rows, l_idx] = vl - half


def _pair_step_batch(spec: ManifoldSpec, states: np.ndarray, kernel: KernelSpec,
                     dt: float, rng: np.random.Generator,
                     antithetic: bool = False) -> np.ndarray:
    """One full pair sweep on (R, N, 3) states; returns renormalized array.

    Draw order per step (fixed, for reproducibility): particle relabeling
    (R, N), round order (R, n_rounds), then one (R, P, 3) normal block per
    round slot. With ``antithetic`` (even R), the second half of the
    replicas reuses the first half's schedule with negated noise
    (variance reduction for one-step drift estimates).
    """
    r, n, _ = states.shape
    rounds = _round_robin_rounds(n)
    n_rounds = rounds.shape[0]
    r_draw = r
    if antithetic:
        if r % 2:
            raise ValueError("antithetic sweep needs an even replica count")
        r_draw = r // 2
    perm = np.argsort(rng.random((r_draw, n)), axis=1)
    order = np.argsort(rng.random((r_draw, n_rounds)), axis=1)
    if antithetic:
        perm = np.concatenate([perm, perm])
        order = np.concatenate([order, order])
    cutoff = kernel.resolve_cutoff(spec)
    diff_scale = 2.0 / (n - 1)
    for j in range(n_rounds):
        base = rounds[order[:, j]]                                   # (R, P, 2)
        k_idx = np.take_along_axis(perm, base[:, :, 0], axis=1)
        l_idx = np.take_along_axis(perm, base[:, :, 1], axis=1)
        eta = rng.standard_normal((r_draw,) + k_idx.shape[1:] + (3,))
        if antithetic:
            eta = np.concatenate([eta, -eta])
        _pair_round_update(states, k_idx, l_idx, eta, kernel.gamma,
                           cutoff, diff_scale, dt)
    return renormalize_batch(spec, states)


def step_pair_diffusion(spec: ManifoldSpec, state: VelocityState,
                        kernel: KernelSpec, dt: float,
                        rng: np.random.Generator) -> VelocityState:
    """One weak-O(dt) step of the pairwise collision diffusion."""
    if dt == 0.0:
        return state
    out = _pair_step_batch(spec, state.particles[None].copy(), kernel, dt, rng)
    return VelocityState(spec, out[0].ravel())


# ---------------------------------------------------------------------------
# exact generator action on the test-polynomial catalog


@dataclass(frozen=True)
class TestPolynomial:
    """Catalog entry for weak-consistency oracles.

    kinds: "coord" v_{k,sigma}; "quad" v_{k,sigma} v_{m,tau}; and the
    conserved quantities "mass", "energy", "momentum" (component sigma).
    """

    __test__ = False  # not a pytest class

    kind: str
    k: int = 0
    sigma: int = 0
    m: int = 0
    tau: int = 0

    @staticmethod
    def coord(k: int, sigma: int) -> "TestPolynomial":
        return TestPolynomial("coord", k=k, sigma=sigma)

    @staticmethod
    def quad(k: int, sigma: int, m: int, tau: int) -> "TestPolynomial":
        return TestPolynomial("quad", k=k, sigma=sigma, m=m, tau=tau)

    @staticmethod
    def mass() -> "TestPolynomial":
        return TestPolynomial("mass")

    @staticmethod
    def energy() -> "TestPolynomial":
        return TestPolynomial("energy")

    @staticmethod
    def momentum(sigma: int) -> "TestPolynomial":
        return TestPolynomial("momentum", sigma=sigma)

    def evaluate(self, velocities: np.ndarray) -> np.ndarray:
        """Evaluate on (..., N, 3) velocities; returns shape (...)."""
        v = np.asarray(velocities, dtype=float)
        if self.kind == "coord":
            return v[..., self.k, self.sigma]
        if self.kind == "quad":
            return v[..., self.k, self.sigma] * v[..., self.m, self.tau]
        if self.kind == "mass":
            return np.full(v.shape[:-2], float(v.shape[-2]))
        if self.kind == "energy":
            return 0.5 * (v * v).sum(axis=(-1, -2))
        if self.kind == "momentum":
            return v[..., :, self.sigma].sum(axis=-1)
        raise ValueError(f"unknown test polynomial kind {self.kind!r}")


def _capped_beta(state_p: np.ndarray, k: int, cutoff: float):
    """Separations of particle k from all others, with capped magnitudes."""
    d = state_p[k] - state_p                      # (N, 3)
    beta = np.linalg.norm(d, axis=1)
    beta_t = np.maximum(beta, cutoff)
    return d, beta_t


def generator_apply(state: VelocityState, kernel: KernelSpec,
                    phi: TestPolynomial) -> float:
    """Exact action of the pairwise-diffusion generator on a catalog entry.

    Returns the drift d/dt E[phi] at the given state. Conserved quantities
    (mass, energy, momentum) give exactly 0.0. Pairs below the cutoff
    contribute their capped weight (beta replaced by the cutoff in both the
    weight and the curvature factors).
    """
    if phi.kind in ("mass", "energy", "momentum"):
        return 0.0
    spec = state.spec
    n = spec.n_particles
    p = state.particles
    cutoff = kernel.resolve_cutoff(spec)
    g = kernel.gamma
    scale = 2.0 / (n - 1)

    if phi.kind == "coord":
        d, beta_t = _capped_beta(p, phi.k, cutoff)
        mask = np.ones(n, dtype=bool)
        mask[phi.k] = False
        # sum_l a_kl * (-2 d_sigma / beta^2), a_kl = scale * beta^{2+gamma}
        return float(-2.0 * scale * (beta_t[mask] ** g * d[mask, phi.sigma]).sum())

    if phi.kind == "quad":
        k, s, m, t = phi.k, phi.sigma, phi.m, phi.tau
        total = 0.0
        # product-rule terms: Delta acting on each factor
        dk, beta_k = _capped_beta(p, k, cutoff)
        mk = np.ones(n, dtype=bool)
        mk[k] = False
        total += -2.0 * scale * (p[m, t] * beta_k[mk] ** g * dk[mk, s]).sum()
        dm, beta_m = _capped_beta(p, m, cutoff)
        mm = np.ones(n, dtype=bool)
        mm[m] = False
        total += -2.0 * scale * (p[k, s] * beta_m[mm] ** g * dm[mm, t]).sum()
        # cross terms 2 <P_B grad v_ks, grad v_mt>
        if k == m:
            w = beta_k[mk] ** (2.0 + g)
            proj = (float(s == t) - dk[mk, s] * dk[mk, t] / beta_k[mk] ** 2)
            total += scale * (w * proj).sum()
        else:
            d_km = p[k] - p[m]
            b = max(float(np.linalg.norm(d_km)), cutoff)
            proj = float(s == t) - d_km[s] * d_km[t] / b ** 2
            total += -scale * b ** (2.0 + g) * proj
        return float(total)

    raise ValueError(f"unknown test polynomial kind {phi.kind!r}")


# ---------------------------------------------------------------------------
# initial-state samplers (artifact plumbing for non-equilibrium starts)


Sampler = Callable[[ManifoldSpec, int, np.random.Generator], np.ndarray]


def uniform_sampler(spec: ManifoldSpec, n_states: int,
                    rng: np.random.Generator) -> np.ndarray:
    return sample_uniform_batch(spec, n_states, rng)


def shifted_sampler(delta: Sequence[float]) -> Sampler:
    """Uniform sample, then add a common shift to every particle and
    renormalize. Biases the mean observables (energy-only mode; a momentum
    constraint would undo the shift)."""
    delta = np.asarray(delta, dtype=float).reshape(3)

    def sample(spec, n_states, rng):
        out = sample_uniform_batch(spec, n_states, rng)
        out += delta
        return renormalize_batch(spec, out)

    return sample


def sheared_sampler(strength: float, axes: tuple[int, int] = (0, 1)) -> Sampler:
    """Uniform sample, then v[a] += strength * v[b] and renormalize.

    Biases the off-diagonal second moment sum_k v_{k,a} v_{k,b} while
    preserving the momentum constraint.
    """
    a, b = axes

    def sample(spec, n_states, rng):
        out = sample_uniform_batch(spec, n_states, rng)
        out[..., a] += strength * (out[..., b] - spec.u[b])
        return renormalize_batch(spec, out)

    return sample


def tagged_shift_sampler(delta: Sequence[float], tagged: int = 0) -> Sampler:
    """Uniform sample, then shift one tagged particle (compensated by the
    others so the momentum constraint is kept) and renormalize. Biases the
    tagged one-particle mean."""
    delta = np.asarray(delta, dtype=float).reshape(3)

    def sample(spec, n_states, rng):
        out = sample_uniform_batch(spec, n_states, rng)
        out[:, tagged] += delta
        comp = delta / (spec.n_particles - 1)
        mask = np.ones(spec.n_particles, dtype=bool)
        mask[tagged] = False
        out[:, mask] -= comp
        return renormalize_batch(spec, out)

    return sample


# ---------------------------------------------------------------------------
# ensemble driver


def run_ensemble(spec: ManifoldSpec, config: SimConfig,
                 observables: Sequence[str], *,
                 initial_sampler: Sampler | None = None,
                 snapshot_times: Sequence[float] = ()) -> SimResult:
    """Evolve n_replicas independent states and record observable series.

    Fully deterministic given config.seed: a single PCG64 stream drives
    sampling, schedules and noise in a fixed order, so identical configs
    give bit-identical results regardless of thread count. Ensemble means
    are reported with standard errors (std/sqrt(R), ddof=1).
    """
    fns = {name: obs_mod.get_observable(name) for name in observables}
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    sampler = initial_sampler if initial_sampler is not None else uniform_sampler
    states = np.array(sampler(spec, config.n_replicas, rng), dtype=float)

    n_steps = config.n_steps
    snap_steps = {}
    for t in snapshot_times:
        s = int(round(t / config.dt))
        if abs(s * config.dt - t) > 1e-9 * max(config.dt, 1.0) or not 0 <= s <= n_steps:
            raise ValueError(f"snapshot time {t} is not a step multiple within the run")
        snap_steps[s] = t

    times: list[float] = []
    records: dict[str, list[tuple[float, float]]] = {name: [] for name in fns}
    snapshots: list[EnsembleSnapshot] = []

    def record(step: int):
        times.append(step * config.dt)
        for name, fn in fns.items():
            vals = np.asarray(fn(states, spec), dtype=float)
            mean = float(vals.mean())
            err = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
            records[name].append((mean, err))

    def maybe_snapshot(step: int):
        if step in snap_steps:
            snapshots.append(EnsembleSnapshot(step * config.dt, spec, states.copy()))

    maybe_snapshot(0)
    if n_steps > 0:
        record(0)
    for step in range(1, n_steps + 1):
        if config.process == SPHERE_DIFFUSION:
            xi = rng.standard_normal(states.shape)
            states = _sphere_step_batch(spec, states, config.dt, xi)
        else:
            states = _pair_step_batch(spec, states, config.kernel, config.dt, rng)
        if step % config.record_every == 0 or step == n_steps:
            record(step)
        maybe_snapshot(step)

    t_arr = np.asarray(times)
    series = {
        name: obs_mod.ObservableSeries(
            name=name,
            times=t_arr,
            means=np.asarray([m for m, _ in rec]),
            stderrs=np.asarray([e for _, e in rec]),
            n_replicas=config.n_replicas,
        )
        for name, rec in records.items()
    }
    return SimResult(spec=spec, config=config, series=series, snapshots=snapshots)

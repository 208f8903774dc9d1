"""Seeded synthetic access traces with latent popularity classes.

Each dataset belongs to one latent class that drives its weekly access
process:

``hot``
    Poisson counts around a per-dataset base rate, modulated by an AR(1)
    log-rate multiplier; stays active for a geometric lifetime.
``decaying``
    Poisson counts with a rate that decays exponentially with age.
``cold``
    Accessed in its creation week (and maybe the next), never again.
``bursty``
    Near-zero background with occasional multi-week bursts driven by an
    on/off Markov chain.

Metadata is drawn from class-conditional distributions, so ``dtype``,
``extension`` and ``size_bytes`` carry information about the class. Cold
data skews toward simulation output, rare extensions and large sizes; hot
data toward real data and small sizes.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .trace import AccessEvent, DatasetMeta, Trace

CLASSES = ("hot", "decaying", "cold", "bursty")
N_EXTENSIONS = 6
GB = 10**9

# P(dtype == simulation) per class
_SIM_PROB = {"hot": 0.25, "decaying": 0.5, "cold": 0.8, "bursty": 0.4}
_EXT_PROBS = {
    "hot": (0.40, 0.30, 0.10, 0.10, 0.05, 0.05),
    "decaying": (0.10, 0.40, 0.30, 0.10, 0.05, 0.05),
    "cold": (0.05, 0.05, 0.10, 0.20, 0.30, 0.30),
    "bursty": (0.10, 0.10, 0.30, 0.10, 0.10, 0.30),
}
_SIZE_MEDIAN_GB = {"hot": 20.0, "decaying": 30.0, "cold": 60.0, "bursty": 20.0}
_REPLICA_CHOICES = (1, 2, 3, 4)
_REPLICA_PROBS = (0.15, 0.25, 0.35, 0.25)


class SynthConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    """Generator parameters; every field has a default.

    Config-file keys are the field names.
    """

    n_datasets: int = 10000
    horizon_weeks: int = 130
    mix_hot: float = 0.2
    mix_decaying: float = 0.3
    mix_cold: float = 0.3
    mix_bursty: float = 0.2
    # creation weeks are uniform on [0, creation_span * horizon)
    creation_span: float = 0.85
    hot_rate: float = 4.0
    hot_rate_sigma: float = 0.8
    hot_ar_phi: float = 0.95
    hot_ar_sigma: float = 0.1
    hot_lifetime_weeks: float = 150.0
    decay_peak: float = 8.0
    decay_tau_min: float = 2.0
    decay_tau_max: float = 20.0
    cold_rate: float = 2.0
    bursty_background: float = 0.03
    bursty_start_prob: float = 0.05
    bursty_stay_prob: float = 0.7
    bursty_rate: float = 5.0
    size_sigma: float = 1.0

    @property
    def mixture(self) -> tuple[float, float, float, float]:
        return (self.mix_hot, self.mix_decaying, self.mix_cold, self.mix_bursty)

    def validate(self) -> None:
        if self.n_datasets < 1:
            raise SynthConfigError("n_datasets must be >= 1")
        if self.horizon_weeks < 8:
            raise SynthConfigError("horizon_weeks must be >= 8")
        mix = self.mixture
        if any(w < 0 for w in mix) or abs(sum(mix) - 1.0) > 1e-9:
            raise SynthConfigError(f"mixture weights must be >= 0 and sum to 1, got {mix}")
        if not 0 < self.creation_span <= 1:
            raise SynthConfigError("creation_span must be in (0, 1]")

    @classmethod
    def from_mapping(cls, values: Mapping[str, str | int | float]) -> SynthConfig:
        """Build from string key-value pairs, coercing to the field types."""
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in fields:
                raise SynthConfigError(f"unknown synthetic config key {key!r}")
            kind = int if fields[key].type in ("int", int) else float
            try:
                kwargs[key] = kind(raw)
            except ValueError:
                raise SynthConfigError(f"bad value for {key}: {raw!r}") from None
        return cls(**kwargs)


def generate_synthetic(config: SynthConfig, seed: int) -> Trace:
    """Generate a trace; a pure function of ``(config, seed)``."""
    config.validate()
    rng = np.random.default_rng(seed)
    n, horizon = config.n_datasets, config.horizon_weeks

    cls_idx = rng.choice(len(CLASSES), size=n, p=np.asarray(config.mixture))
    max_creation = max(1, int(config.creation_span * horizon))
    creation = rng.integers(0, max_creation, size=n)
    age = np.arange(horizon)[None, :] - creation[:, None]
    alive = age >= 0

    rate = np.zeros((n, horizon))

    # hot
    base = config.hot_rate * np.exp(config.hot_rate_sigma * rng.standard_normal(n))
    phi, sig = config.hot_ar_phi, config.hot_ar_sigma
    eps = rng.standard_normal((n, horizon))
    z = np.empty((n, horizon))
    z[:, 0] = eps[:, 0] * sig / np.sqrt(max(1e-12, 1 - phi**2))
    for t in range(1, horizon):
        z[:, t] = phi * z[:, t - 1] + sig * eps[:, t]
    lifetime = rng.geometric(1.0 / config.hot_lifetime_weeks, size=n)
    hot_rate = base[:, None] * np.exp(z) * (age < lifetime[:, None])
    rate = np.where((cls_idx == 0)[:, None], hot_rate, rate)

    # decaying
    peak = config.decay_peak * np.exp(0.7 * rng.standard_normal(n))
    tau = rng.uniform(config.decay_tau_min, config.decay_tau_max, size=n)
    decay_rate = peak[:, None] * np.exp(-np.maximum(age, 0) / tau[:, None])
    rate = np.where((cls_idx == 1)[:, None], decay_rate, rate)

    # bursty: on/off chain per dataset
    u = rng.random((n, horizon))
    on = np.zeros((n, horizon), dtype=bool)
    state = np.zeros(n, dtype=bool)
    for t in range(horizon):
        state = np.where(state, u[:, t] < config.bursty_stay_prob, u[:, t] < config.bursty_start_prob)
        on[:, t] = state
    burst_level = config.bursty_rate * np.exp(0.5 * rng.standard_normal(n))
    bursty_rate = np.where(on, burst_level[:, None], config.bursty_background)
    rate = np.where((cls_idx == 3)[:, None], bursty_rate, rate)

    rate = np.where(alive, rate, 0.0)
    counts = rng.poisson(rate)

    # cold: guaranteed access at creation, possible one the week after, nothing later
    cold = cls_idx == 2
    first = 1 + rng.poisson(config.cold_rate, size=n)
    second = rng.poisson(0.5 * config.cold_rate, size=n)
    cold_counts = np.zeros((n, horizon), dtype=counts.dtype)
    rows = np.arange(n)
    cold_counts[rows, creation] = first
    nxt = creation + 1
    ok = nxt < horizon
    cold_counts[rows[ok], nxt[ok]] = second[ok]
    counts = np.where(cold[:, None], cold_counts, counts)

    # metadata
    names = [CLASSES[c] for c in cls_idx]
    sim_p = np.array([_SIM_PROB[c] for c in names])
    dtype = (rng.random(n) < sim_p).astype(int)
    ext_cdf = {c: np.cumsum(_EXT_PROBS[c]) for c in CLASSES}
    ext_u = rng.random(n)
    extension = np.array(
        [min(int(np.searchsorted(ext_cdf[c], x, side="right")), N_EXTENSIONS - 1) for c, x in zip(names, ext_u)]
    )
    median = np.array([_SIZE_MEDIAN_GB[c] for c in names]) * GB
    size = np.maximum(1, (median * np.exp(config.size_sigma * rng.standard_normal(n))).astype(np.int64))
    replicas = rng.choice(_REPLICA_CHOICES, size=n, p=_REPLICA_PROBS)

    width = len(str(n - 1))
    ids = [f"ds{i:0{width}d}" for i in range(n)]
    metas = [
        DatasetMeta(ids[i], int(creation[i]), int(dtype[i]), int(extension[i]), int(size[i]), int(replicas[i]))
        for i in range(n)
    ]
    r, c = np.nonzero(counts)
    events = [AccessEvent(ids[i], int(w), int(k)) for i, w, k in zip(r, c, counts[r, c])]
    return Trace.build(events, metas, horizon, classes=dict(zip(ids, names)))

"""Monte Carlo Hanbury Brown-Twiss coincidence histograms.

Each emitter is a continuous-time Markov chain (ground -> excited at the
excitation rate, excited -> ground by radiative decay, optionally excited ->
shelf -> ground).  Times between successive radiative decays are
independent, so the emission train is a renewal process; detecting each
photon independently with efficiency ``eta`` keeps it a renewal process whose
interval is the sum of a geometric number of emission intervals.  Those sums
are drawn directly as gamma variates:

* ``G ~ Geometric(eta)`` emission cycles per detected photon,
* ``K ~ NegativeBinomial(G, 1 - p_shelf)`` shelving excursions among them,
* interval ``= Gamma(G+K, 1/k_exc) + Gamma(G+K, 1/(k_dec+k_in)) + Gamma(K, 1/k_out)``.

Several emitters with identical kinetics and different brightness share
``tau1``; their superposition has ``g2(0) = 1 - sum(w_i**2)`` for light
fractions ``w_i``.  Poisson background is added, every photon goes to one of
two detectors with probability 1/2, and all start-stop pairs within the
window are histogrammed.
"""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["HBTHistogram", "PhotonStreamSpec", "StreamOverflowError", "simulate_hbt", "write_histogram_csv"]

MAX_EVENTS = 60_000_000
MAX_PAIRS = 200_000_000


class StreamOverflowError(OverflowError):
    pass


@dataclass(frozen=True)
class PhotonStreamSpec:
    """Photon-stream generator settings.

    Rates of the emitter are in 1/ns; ``signal_rate`` and ``background_rate``
    are detected counts per second summed over both detectors.
    ``emitter_weights`` are the light fractions of independent, kinetically
    identical emitters (one emitter by default).
    """

    excitation_rate: float = 0.01
    decay_rate: float = 0.04
    shelving_in: float = 0.0
    shelving_out: float = 0.0
    signal_rate: float = 30e3
    background_rate: float = 0.0
    duration_s: float = 1.0
    bin_width_ns: float = 1.0
    window_ns: float = 300.0
    seed: int = 0
    emitter_weights: tuple = (1.0,)

    def __post_init__(self):
        object.__setattr__(self, "emitter_weights", tuple(float(w) for w in self.emitter_weights))
        for name in ("excitation_rate", "decay_rate", "shelving_in", "shelving_out", "signal_rate",
                     "background_rate"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be a finite rate >= 0, got {v}")
        if not self.duration_s > 0:
            raise ValueError("duration_s must be > 0")
        if not self.bin_width_ns > 0:
            raise ValueError("bin_width_ns must be > 0")
        if not self.window_ns >= self.bin_width_ns:
            raise ValueError("window_ns must be at least one bin width")
        if isinstance(self.seed, bool) or int(self.seed) != self.seed or self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        w = np.array(self.emitter_weights)
        if w.size == 0 or np.any(w <= 0) or abs(w.sum() - 1) > 1e-9:
            raise ValueError("emitter_weights must be positive and sum to 1")
        if self.signal_rate > 0:
            if not (self.excitation_rate > 0 and self.decay_rate > 0):
                raise ValueError("a signal needs excitation_rate > 0 and decay_rate > 0")
            if self.shelving_in > 0 and not self.shelving_out > 0:
                raise ValueError("shelving_in > 0 needs shelving_out > 0")
            top = self.emission_rate * 1e9
            if self.signal_rate * w.max() > top:
                raise ValueError(
                    f"signal rate {self.signal_rate * w.max():.4g}/s exceeds one emitter's "
                    f"emission rate {top:.4g}/s"
                )

    @property
    def shelving_probability(self) -> float:
        k = self.decay_rate + self.shelving_in
        return self.shelving_in / k if k > 0 else 0.0

    @property
    def emission_rate(self) -> float:
        """Radiative decays per ns of one emitter under continuous excitation."""
        p = self.shelving_probability
        cycles = 1 / (1 - p)  # mean excitation cycles per photon
        mean = cycles * (1 / self.excitation_rate + 1 / (self.decay_rate + self.shelving_in))
        if p > 0:
            mean += (cycles - 1) / self.shelving_out
        return 1 / mean

    @property
    def tau1_ns(self) -> float:
        return 1 / (self.excitation_rate + self.decay_rate + self.shelving_in)

    @property
    def rho(self) -> float:
        total = self.signal_rate + self.background_rate
        return self.signal_rate / total if total > 0 else 0.0

    @property
    def g2_zero_emitters(self) -> float:
        """Generator ``g2(0)`` of the emitter light alone (1 for no emitter)."""
        if self.signal_rate == 0:
            return 1.0
        return 1 - float(np.sum(np.square(self.emitter_weights)))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["emitter_weights"] = list(self.emitter_weights)
        return d


@dataclass
class HBTHistogram:
    tau_ns: np.ndarray
    counts: np.ndarray
    bin_width_ns: float
    n_start: int
    n_stop: int
    duration_s: float
    meta: dict = field(default_factory=dict)

    @property
    def coincidences(self) -> int:
        return int(self.counts.sum())

    @property
    def poisson_level(self) -> float:
        """Expected counts per bin for uncorrelated streams."""
        return self.n_start * self.n_stop * self.bin_width_ns / (self.duration_s * 1e9)

    def normalized(self) -> np.ndarray:
        return self.counts / self.poisson_level

    def as_rows(self) -> np.ndarray:
        return np.column_stack([self.tau_ns, self.counts])


def _renewal_train(rng, spec: PhotonStreamSpec, eta: float, t_end: float) -> np.ndarray:
    """Detected arrival times (ns) of one emitter on ``[0, t_end)``."""
    kex, kd = spec.excitation_rate, spec.decay_rate + spec.shelving_in
    p = spec.shelving_probability
    expected = eta * spec.emission_rate * t_end
    chunk = int(expected * 1.02 + 10 * np.sqrt(expected) + 100)
    out, t0 = [], 0.0
    while True:
        G = rng.geometric(eta, size=chunk)
        n = G
        if p > 0:
            K = rng.negative_binomial(G, 1 - p)
            n = G + K
        dt = rng.gamma(n, 1 / kex) + rng.gamma(n, 1 / kd)
        if p > 0:
            dt += rng.gamma(K, 1 / spec.shelving_out)
        t = t0 + np.cumsum(dt)
        if t[-1] >= t_end:
            out.append(t[t < t_end])
            break
        out.append(t)
        t0 = t[-1]
        chunk = max(chunk // 4, 1000)
    return np.concatenate(out)


def _pairs_histogram(ta, tb, window, width):
    nbin = int(round(window / width))
    half = (nbin + 0.5) * width
    lo = np.searchsorted(tb, ta - half, "left")
    hi = np.searchsorted(tb, ta + half, "left")
    k = hi - lo
    total = int(k.sum())
    if total > MAX_PAIRS:
        raise StreamOverflowError(
            f"{total} coincidences in the window exceed the limit {MAX_PAIRS}; use a shorter duration_s"
        )
    starts = np.repeat(lo - np.cumsum(k) + k, k) + np.arange(total)
    diff = tb[starts] - np.repeat(ta, k)
    idx = np.floor((diff + half) / width).astype(np.int64)
    idx = np.clip(idx, 0, 2 * nbin)
    counts = np.bincount(idx, minlength=2 * nbin + 1).astype(np.int64)
    tau = width * np.arange(-nbin, nbin + 1, dtype=float)
    return tau, counts


def simulate_hbt(spec: PhotonStreamSpec, max_events: int = MAX_EVENTS) -> HBTHistogram:
    """Simulate both detector streams and return the start-stop histogram.

    Bins are centred on multiples of ``bin_width_ns`` out to ``+-window_ns``.
    The generator is ``numpy.random.default_rng(seed)`` consumed in a fixed
    order, so equal specs give identical histograms.

    Raises
    ------
    StreamOverflowError
        If more than ``max_events`` photons or ``MAX_PAIRS`` coincidences
        would be generated.
    """
    T = spec.duration_s * 1e9
    expected = (spec.signal_rate + spec.background_rate) * spec.duration_s
    if expected > max_events:
        raise StreamOverflowError(
            f"about {expected:.3g} photons exceed the limit {max_events}; use a shorter duration_s"
        )
    rng = np.random.default_rng(int(spec.seed))
    parts = []
    if spec.signal_rate > 0:
        for w in spec.emitter_weights:
            eta = w * spec.signal_rate / (spec.emission_rate * 1e9)
            parts.append(_renewal_train(rng, spec, eta, T))
    nb = rng.poisson(spec.background_rate * spec.duration_s)
    parts.append(rng.uniform(0.0, T, size=nb))
    times = np.concatenate(parts)
    to_a = rng.random(times.size) < 0.5
    ta = np.sort(times[to_a])
    tb = np.sort(times[~to_a])
    tau, counts = _pairs_histogram(ta, tb, spec.window_ns, spec.bin_width_ns)
    return HBTHistogram(tau, counts, spec.bin_width_ns, ta.size, tb.size, spec.duration_s,
                        meta={"spec": spec.to_dict(), "rho": spec.rho, "g2_zero_emitters": spec.g2_zero_emitters})


def write_histogram_csv(path, hist: HBTHistogram) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tau_ns", "coincidences"])
        for t, c in zip(hist.tau_ns, hist.counts):
            w.writerow([f"{t:.10g}", int(c)])
    return path

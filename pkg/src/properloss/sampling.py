"""Seedable sampling and Monte Carlo loss estimation.

Sample sources
--------------
Three kinds of black box can be scored:

* :class:`InternalSource` -- a known distribution, sampled by inverse-CDF
  over the ordered domain (deterministic given a generator state),
* :class:`FileSource` -- a UTF-8 file with one token per line,
* :class:`SubprocessSource` -- a child process speaking a line protocol:
  the harness writes a decimal count followed by a newline, the child
  replies with exactly that many token lines; ``0`` asks the child to exit
  cleanly (exit code 0).

Every emitted token must map to a domain label; unknown tokens are a hard
error.  File and subprocess sources are sequential streams and must not be
read from two replicates concurrently.

Randomness
----------
All randomness derives from a user seed through named substreams
(:func:`stream_rng`), one per role (model draws, target draws, size draws,
block partitions).  Within a stream, draws are consumed in replicate-major
order, so for fixed-size schemes replicate ``i`` owns draws
``[i*n, (i+1)*n)`` of its stream and is a pure function of ``(seed, i)``.
Identical (sources, seed, replicates) yield a bit-identical report.
"""

from __future__ import annotations

import math
import shlex
import subprocess
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .compiler import CompiledLoss, KnownTargetLoss
from .domain import Distribution, Domain, FixedSize, Histogram, Poisson, SamplingScheme
from .errors import (
    SampleTooSmallError,
    SourceExhaustedError,
    SubprocessFailureError,
)

#: 97.5% standard-normal quantile: half-width of the nominal 95% interval.
Z95 = 1.959963984540054

STREAM_MODEL = 0
STREAM_TARGET = 1
STREAM_MODEL_SIZES = 2
STREAM_TARGET_SIZES = 3
STREAM_PARTITION = 4


def stream_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for (seed, stream); the documented split scheme."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),)))


class SampleSource:
    """Anything that can produce a histogram of n i.i.d. draws over a domain."""

    domain: Domain

    def draw(self, n: int, rng: Optional[np.random.Generator] = None) -> Histogram:
        raise NotImplementedError


class InternalSource(SampleSource):
    """A known distribution used as a sample source (for simulation and tests)."""

    def __init__(self, dist: Distribution, domain: Optional[Domain] = None):
        if domain is not None and domain.size != dist.dim:
            raise ValueError(f"domain size {domain.size} != distribution dimension {dist.dim}")
        self.dist = dist
        self.domain = domain if domain is not None else Domain.of_size(dist.dim)
        self._cum = np.cumsum(np.asarray(dist.as_floats()))

    def _indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        u = rng.random(n)
        idx = np.searchsorted(self._cum, u, side="right")
        return np.minimum(idx, self.dist.dim - 1)  # guard the cumsum-rounding edge

    def draw(self, n: int, rng: Optional[np.random.Generator] = None) -> Histogram:
        if rng is None:
            raise ValueError("an internal source needs a random generator")
        if n == 0:
            return Histogram.zero(self.dist.dim)
        counts = np.bincount(self._indices(n, rng), minlength=self.dist.dim)
        return Histogram(tuple(int(c) for c in counts))

    def draw_batch(self, replicates: int, n: int, rng: np.random.Generator) -> np.ndarray:
        """(replicates, d) count matrix; row i uses draws [i*n, (i+1)*n) of the stream."""
        idx = self._indices(replicates * n, rng).reshape(replicates, n)
        counts = np.zeros((replicates, self.dist.dim), dtype=np.int64)
        rows = np.repeat(np.arange(replicates), n)
        np.add.at(counts, (rows, idx.ravel()), 1)
        return counts


class FileSource(SampleSource):
    """One token per line; tokens are consumed sequentially across draws."""

    def __init__(self, path: str, domain: Domain):
        self.path = path
        self.domain = domain
        self._handle = None

    def _lines(self):
        if self._handle is None:
            self._handle = open(self.path, "r", encoding="utf-8")
        return self._handle

    def draw(self, n: int, rng: Optional[np.random.Generator] = None) -> Histogram:
        counts = [0] * self.domain.size
        handle = self._lines()
        for _ in range(n):
            line = handle.readline()
            if line == "":
                raise SourceExhaustedError(f"{self.path} ran out of tokens")
            counts[self.domain.index(line.strip())] += 1
        return Histogram(tuple(counts))

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class SubprocessSource(SampleSource):
    """A child process generator speaking the count-request line protocol."""

    def __init__(self, command: str | Sequence[str], domain: Domain):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.domain = domain
        self._proc: Optional[subprocess.Popen] = None

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None:
            try:
                self._proc = subprocess.Popen(
                    self.command,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                    bufsize=1,
                )
            except OSError as exc:
                raise SubprocessFailureError(f"could not start {self.command!r}: {exc}") from exc
        return self._proc

    def draw(self, n: int, rng: Optional[np.random.Generator] = None) -> Histogram:
        proc = self._ensure()
        try:
            proc.stdin.write(f"{n}\n")
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise SubprocessFailureError(f"generator {self.command!r} closed its input") from exc
        counts = [0] * self.domain.size
        for i in range(n):
            line = proc.stdout.readline()
            if line == "":
                raise SubprocessFailureError(
                    f"generator {self.command!r} ended after {i} of {n} requested tokens"
                )
            counts[self.domain.index(line.strip())] += 1
        return Histogram(tuple(counts))

    def close(self) -> None:
        """Send the zero sentinel and require a clean exit."""
        if self._proc is None:
            return
        proc, self._proc = self._proc, None
        try:
            proc.stdin.write("0\n")
            proc.stdin.flush()
            proc.stdin.close()
        except (BrokenPipeError, OSError):
            pass
        code = proc.wait(timeout=10)
        if code != 0:
            raise SubprocessFailureError(f"generator exited with code {code}")

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _poisson_size(u: float, rate: float) -> int:
    """Smallest j with CDF(j) > u, by direct pmf summation."""
    pmf = math.exp(-rate)
    cum = pmf
    j = 0
    limit = int(rate * 20 + 500)
    while u >= cum and j < limit:
        j += 1
        pmf *= rate / j
        cum += pmf
    return j


def draw_fixed(src: SampleSource, n: int, seed: int) -> Histogram:
    """Histogram of exactly n draws; deterministic given the seed."""
    if n < 1:
        raise ValueError("need n >= 1")
    return src.draw(n, stream_rng(seed, STREAM_MODEL))


def draw_poisson(src: SampleSource, alpha: float, seed: int) -> Histogram:
    """Draw N ~ Poisson(alpha) by pmf inversion, then N observations.

    Under this scheme the coordinate counts are independent Poissons with
    rates alpha * p_x, which is what the power-series losses rely on.
    """
    if not alpha > 0:
        raise ValueError("rate must be > 0")
    rng = stream_rng(seed, STREAM_MODEL)
    n = _poisson_size(float(rng.random()), alpha)
    if n == 0:
        return Histogram.zero(src.domain.size)
    return src.draw(n, rng)


def _draw_for_scheme(
    src: Optional[SampleSource],
    scheme: Optional[SamplingScheme],
    item_rng: np.random.Generator,
    size_rng: np.random.Generator,
) -> Optional[Histogram]:
    if scheme is None:
        return None
    if isinstance(scheme, FixedSize):
        return src.draw(scheme.n, item_rng)
    if isinstance(scheme, Poisson):
        n = _poisson_size(float(size_rng.random()), scheme.rate)
        if n == 0:
            return Histogram.zero(src.domain.size)
        return src.draw(n, item_rng)
    raise ValueError(f"unsupported sampling scheme {scheme!r}")


@dataclass(frozen=True)
class EstimateReport:
    """Monte Carlo estimate with a nominal 95% normal interval."""

    mean: float
    std_error: float
    ci_low: float
    ci_high: float
    replicates: int
    seed: int

    def __post_init__(self):
        if not self.ci_low <= self.mean <= self.ci_high:
            raise ValueError("confidence interval must contain the mean")
        if self.std_error < 0:
            raise ValueError("standard error must be non-negative")


def estimate_loss(
    model: Optional[SampleSource],
    target: SampleSource,
    loss: CompiledLoss,
    replicates: int,
    seed: int,
) -> EstimateReport:
    """Mean of independent loss evaluations over fresh sample pairs.

    Internal sources under fixed-size schemes take a vectorized path when the
    loss carries a batch evaluator; stream sources are consumed sequentially,
    one replicate at a time.  The report is deterministic given
    (sources, seed, replicates).
    """
    if replicates < 2:
        raise ValueError("need at least 2 replicates for a standard error")
    model_rng = stream_rng(seed, STREAM_MODEL)
    target_rng = stream_rng(seed, STREAM_TARGET)

    fast = (
        loss.batch_evaluator is not None
        and isinstance(loss.scheme_p, FixedSize)
        and isinstance(loss.scheme_q, FixedSize)
        and isinstance(model, InternalSource)
        and isinstance(target, InternalSource)
    )
    if fast:
        hp = model.draw_batch(replicates, loss.scheme_p.n, model_rng)
        hq = target.draw_batch(replicates, loss.scheme_q.n, target_rng)
        values = np.asarray(loss.batch_evaluator(hp, hq), dtype=float)
    else:
        size_rng_p = stream_rng(seed, STREAM_MODEL_SIZES)
        size_rng_q = stream_rng(seed, STREAM_TARGET_SIZES)
        values = np.empty(replicates)
        for i in range(replicates):
            h_p = _draw_for_scheme(model, loss.scheme_p, model_rng, size_rng_p)
            h_q = _draw_for_scheme(target, loss.scheme_q, target_rng, size_rng_q)
            values[i] = float(loss.evaluator(h_p, h_q))

    mean = float(np.mean(values))
    std_error = float(np.std(values, ddof=1)) / math.sqrt(replicates)
    return EstimateReport(
        mean=mean,
        std_error=std_error,
        ci_low=mean - Z95 * std_error,
        ci_high=mean + Z95 * std_error,
        replicates=replicates,
        seed=seed,
    )


def _partition_histograms(sample: Histogram, block_size: int, blocks: int, rng: np.random.Generator) -> list[Histogram]:
    draws = np.repeat(np.arange(sample.dim), sample.counts)
    order = rng.permutation(draws)
    kept = order[: blocks * block_size].reshape(blocks, block_size)
    return [
        Histogram(tuple(int(c) for c in np.bincount(row, minlength=sample.dim)))
        for row in kept
    ]


def block_average(
    sample: Histogram,
    block_size: int,
    loss,
    *,
    q: Optional[Distribution] = None,
    target_sample: Optional[Histogram] = None,
    seed: int = 0,
) -> float:
    """Average a minimally-sized loss over a seeded random partition of a big sample.

    The sample's underlying draws (reconstructed from the histogram, which is
    lossless up to exchangeability) are shuffled and split into
    ``total // block_size`` blocks; leftovers are discarded.  Each block is
    itself an i.i.d. sample, so the average has the same expectation as a
    single evaluation with lower variance.  The random partition only guards
    against ordering artifacts in file-backed sources; the i.i.d. assumption
    stays with the source.
    """
    if isinstance(loss, KnownTargetLoss):
        if q is None:
            raise ValueError("a known-target loss needs q=")
        if block_size != loss.scheme.n:
            raise ValueError(f"block size {block_size} != the loss's sample size {loss.scheme.n}")
        blocks = sample.total // block_size
        if blocks < 1:
            raise SampleTooSmallError(f"sample of {sample.total} cannot fill one block of {block_size}")
        parts = _partition_histograms(sample, block_size, blocks, stream_rng(seed, STREAM_PARTITION))
        return float(np.mean([float(loss.evaluator(h, q)) for h in parts]))

    if isinstance(loss, CompiledLoss):
        if not (isinstance(loss.scheme_p, FixedSize) and isinstance(loss.scheme_q, FixedSize)):
            raise ValueError("block averaging is only defined for fixed-size schemes")
        if target_sample is None:
            raise ValueError("a two-sample loss needs target_sample=")
        n, m = loss.scheme_p.n, loss.scheme_q.n
        if block_size != n:
            raise ValueError(f"block size {block_size} != the loss's model sample size {n}")
        blocks = min(sample.total // n, target_sample.total // m)
        if blocks < 1:
            raise SampleTooSmallError("not enough draws on one side to fill a block")
        parts_p = _partition_histograms(sample, n, blocks, stream_rng(seed, STREAM_PARTITION))
        parts_q = _partition_histograms(target_sample, m, blocks, stream_rng(seed, STREAM_TARGET))
        return float(np.mean([float(loss.evaluator(h, g)) for h, g in zip(parts_p, parts_q)]))

    raise ValueError(f"unsupported loss type {type(loss).__name__}")

"""Post-processing metrics over channel tensors and cluster sets.

All metrics are deterministic functions of their inputs. CDF exports round
trip bit-exactly through the CSV writer (floats serialized with repr).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def rms_delay_spread(powers, delays_s) -> float:
    """Power-weighted second central moment of the delay profile, seconds."""
    p = np.asarray(powers, dtype=np.float64)
    tau = np.asarray(delays_s, dtype=np.float64)
    total = p.sum()
    if total <= 0:
        raise ValueError("delay spread undefined for all-zero power")
    m1 = float(np.sum(p * tau) / total)
    m2 = float(np.sum(p * tau * tau) / total)
    return math.sqrt(max(m2 - m1 * m1, 0.0))


def circular_angular_spread(powers, angles_rad) -> float:
    """Circular (wrapped) angular spread, reported in degrees.

    sigma = sqrt(-2 ln |sum P e^{j phi} / sum P|).
    """
    p = np.asarray(powers, dtype=np.float64)
    ang = np.asarray(angles_rad, dtype=np.float64)
    total = p.sum()
    if total <= 0:
        raise ValueError("angular spread undefined for all-zero power")
    r = abs(complex(np.sum(p * np.exp(1j * ang)) / total))
    r = min(r, 1.0)
    if r == 0.0:
        return math.degrees(math.sqrt(-2.0 * math.log(np.finfo(float).tiny)))
    return math.degrees(math.sqrt(-2.0 * math.log(r)))


def gini_index(powers) -> float:
    """Lorenz-curve sparsity measure in [0, 1).

    Mean-absolute-difference form, G = sum_ij |x_i - x_j| / (2 n^2 mean):
    exactly 0 for equal powers and (n-1)/n for a single nonzero entry.
    Computed via the equivalent sorted form.
    """
    x = np.sort(np.asarray(powers, dtype=np.float64))
    if x.size == 0 or np.any(x < 0):
        raise ValueError("powers must be non-negative and non-empty")
    total = x.sum()
    if total <= 0:
        raise ValueError("Gini undefined for all-zero power")
    n = x.size
    i = np.arange(1, n + 1, dtype=np.float64)
    return float(2.0 * np.sum(i * x) / (n * total) - (n + 1.0) / n)


def array_cross_correlation(cfr: np.ndarray, ref_index: int = 0):
    """|Pearson correlation| of complex CFRs across frequency, per element.

    ``cfr`` has shape (elements, freq samples). Returns (rho, defined) where
    ``defined`` is False for zero-variance elements instead of propagating
    NaN.
    """
    h = np.asarray(cfr, dtype=np.complex128)
    if h.ndim != 2 or h.shape[1] < 2:
        raise ValueError("need a (elements, >=2 freq samples) CFR matrix")
    m = h.shape[0]
    if not 0 <= ref_index < m:
        raise ValueError(f"ref_index {ref_index} out of range for {m} elements")
    centered = h - h.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.sum(np.abs(centered) ** 2, axis=1))
    ref = centered[ref_index]
    defined = (norms > 0) & (norms[ref_index] > 0)
    rho = np.zeros(m)
    ok = np.where(defined)[0]
    if norms[ref_index] > 0:
        rho[ok] = np.abs(centered[ok] @ ref.conj()) / (norms[ok] * norms[ref_index])
    return rho, defined


def rsrp(cir, tx_power_dbm: float = 0.0) -> float:
    """Received power: tx power plus the antenna-averaged tap-energy sum."""
    coeffs = np.asarray(cir.coefficients, dtype=np.complex128)
    energy = np.sum(np.abs(coeffs) ** 2, axis=-1)  # sum over taps
    mean_energy = float(np.mean(energy))           # mean over time x rx x tx
    if mean_energy <= 0:
        return -math.inf
    return tx_power_dbm + 10.0 * math.log10(mean_energy)


# ---------------------------------------------------------------------------
# Reports and CSV export
# ---------------------------------------------------------------------------

@dataclass
class MetricReport:
    """Per-drop scalar metrics plus ensemble CDFs."""

    rows: list = field(default_factory=list)  # list of dicts, one per drop

    def add(self, drop: int, **metrics):
        self.rows.append({"drop": drop, **metrics})

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.rows if name in row], dtype=np.float64)

    def cdf(self, name: str):
        vals = np.sort(self.column(name))
        probs = np.arange(1, vals.size + 1, dtype=np.float64) / vals.size
        return vals, probs


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def export_metrics_csv(report: MetricReport, path) -> None:
    path = Path(path)
    names = []
    for row in report.rows:
        for k in row:
            if k not in names:
                names.append(k)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in report.rows:
            w.writerow([_fmt(row[k]) if k in row else "" for k in names])


def export_cdf_csv(values, path) -> None:
    vals = np.sort(np.asarray(values, dtype=np.float64))
    probs = np.arange(1, vals.size + 1, dtype=np.float64) / vals.size
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["value", "cdf"])
        for v, p in zip(vals, probs):
            w.writerow([repr(float(v)), repr(float(p))])


def read_cdf_csv(path):
    vals, probs = [], []
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != ["value", "cdf"]:
            raise ValueError(f"not a CDF csv: header {header}")
        for row in r:
            vals.append(float(row[0]))
            probs.append(float(row[1]))
    return np.array(vals), np.array(probs)

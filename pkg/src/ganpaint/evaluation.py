"""Metrics: PSNR, pseudo-sequence temporal consistency, identity loss,
convergence reports and paired significance testing.
"""

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DimensionError, InterfaceError
from .images import check_image

PSNR_CAP_DB = 100.0


@dataclass(frozen=True)
class EmbedderHandle:
    """Pluggable identity embedder: Image -> unit-norm float vector."""

    embed: callable
    e_dim: int = 128


def psnr(a, b):
    """PSNR in dB on the [0,255] intensity scale; identical images cap at 100."""
    a = check_image(a)
    b = check_image(b)
    if a.shape != b.shape:
        raise DimensionError(f"psnr shape mismatch {a.shape} vs {b.shape}")
    a255 = (np.asarray(a, dtype=np.float64) + 1.0) * 127.5
    b255 = (np.asarray(b, dtype=np.float64) + 1.0) * 127.5
    mse = float(np.mean((a255 - b255) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(float(10.0 * np.log10(255.0**2 / mse)), PSNR_CAP_DB)


def temporal_consistency(inpainted):
    """Mean pairwise PSNR over all unordered frame pairs in a window."""
    W = len(inpainted)
    if W < 2:
        raise DimensionError(f"temporal consistency needs >= 2 frames, got {W}")
    vals = [psnr(inpainted[i], inpainted[j])
            for i in range(W) for j in range(i + 1, W)]
    return float(np.mean(vals))


def identity_loss(inpainted, original, embedder):
    """Mean squared embedding distance between each frame and the original."""
    if len(inpainted) < 1:
        raise DimensionError("identity loss needs at least one frame")
    ref = np.asarray(embedder.embed(original), dtype=np.float64)
    if ref.shape != (embedder.e_dim,):
        raise InterfaceError(
            f"embedder returned shape {ref.shape}, declared e_dim {embedder.e_dim}"
        )
    total = 0.0
    for im in inpainted:
        e = np.asarray(embedder.embed(im), dtype=np.float64)
        if e.shape != (embedder.e_dim,):
            raise InterfaceError(
                f"embedder returned shape {e.shape}, declared e_dim {embedder.e_dim}"
            )
        total += float(((e - ref) ** 2).sum())
    return total / len(inpainted)


def iterations_to_threshold(trace, threshold):
    """First recorded iteration with total loss <= threshold.

    Returns (iteration, reached). If never reached, reports the last
    recorded iteration with reached=False.
    """
    if not trace:
        raise ValueError("empty trace")
    for entry in trace:
        if entry[-1] <= threshold:
            return entry[0], True
    return trace[-1][0], False


def convergence_report(traces, threshold_rule):
    """Rows of (label, threshold, iteration, reached) per labeled trace.

    threshold_rule: float (absolute) or callable(label, trace) -> float.
    """
    rows = []
    for label, trace in traces:
        thr = threshold_rule(label, trace) if callable(threshold_rule) else float(threshold_rule)
        it, reached = iterations_to_threshold(trace, thr)
        rows.append({"label": label, "threshold": thr, "iteration": it,
                     "reached": reached})
    return rows


def significance_test(paired_values_a, paired_values_b):
    """Two-sided Wilcoxon signed-rank p-value on paired differences."""
    a = np.asarray(paired_values_a, dtype=np.float64)
    b = np.asarray(paired_values_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionError("paired samples must be equal-length 1-D arrays")
    if len(a) < 20:
        raise ValueError(f"need >= 20 pairs, got {len(a)}")
    if np.all(a == b):
        return 1.0
    return float(stats.wilcoxon(a, b, zero_method="wilcox").pvalue)


@dataclass
class MetricsReport:
    per_item: list = field(default_factory=list)  # dict rows
    aggregates: dict = field(default_factory=dict)

    NUMERIC_FIELDS = ("psnr_db", "eta_temp_db", "identity_loss",
                      "iters_to_threshold", "final_l_sm")

    def methods(self):
        return sorted({r["method_tag"] for r in self.per_item})

    def values(self, method_tag, field_name):
        return [r[field_name] for r in self.per_item
                if r["method_tag"] == method_tag and r.get(field_name) is not None]

    def compute_aggregates(self, pair_field="eta_temp_db"):
        agg = {"per_method": {}, "pairwise_p": {}}
        for m in self.methods():
            stats_m = {}
            for f in self.NUMERIC_FIELDS:
                vals = self.values(m, f)
                if vals:
                    stats_m[f] = {"median": float(np.median(vals)),
                                  "mean": float(np.mean(vals)),
                                  "n": len(vals)}
            agg["per_method"][m] = stats_m
        methods = self.methods()
        for i in range(len(methods)):
            for j in range(i + 1, len(methods)):
                a = self.values(methods[i], pair_field)
                b = self.values(methods[j], pair_field)
                if len(a) == len(b) and len(a) >= 20:
                    key = f"{methods[i]}_vs_{methods[j]}"
                    agg["pairwise_p"][key] = significance_test(a, b)
        self.aggregates = agg
        return agg

    def verify_aggregates(self, pair_field="eta_temp_db"):
        """Aggregates must be recomputable from the per-item rows."""
        stored = self.aggregates
        self.compute_aggregates(pair_field=pair_field)
        fresh = self.aggregates
        self.aggregates = stored
        return _close(stored, fresh)

    def save_csv(self, path):
        fields = ["item_id", "method_tag"] + list(self.NUMERIC_FIELDS)
        with open(path, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=fields, extrasaction="ignore")
            w.writeheader()
            w.writerows(self.per_item)

    def save_json(self, path):
        with open(path, "w") as f:
            json.dump(self.aggregates, f, indent=2, sort_keys=True)


def _close(a, b, tol=1e-9):
    if isinstance(a, dict) and isinstance(b, dict):
        return set(a) == set(b) and all(_close(a[k], b[k], tol) for k in a)
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return abs(a - b) <= tol * max(1.0, abs(a), abs(b))
    return a == b

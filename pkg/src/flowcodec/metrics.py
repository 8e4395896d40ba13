"""Quality and comparison metrics: PSNR, flow end-point error, RD-curve
aggregation, and the Bjontegaard rate/PSNR deltas."""
from __future__ import annotations

import numpy as np

from .model import Frame, RDCurve, RDPoint

PSNR_CAP = 99.0
_PEAK_SQ = 255.0 * 255.0


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """PSNR in dB between two same-shaped sample arrays; 99.0 when identical."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = np.mean((a.astype(np.int64) - b.astype(np.int64)) ** 2, dtype=np.float64)
    if mse == 0.0:
        return PSNR_CAP
    return float(10.0 * np.log10(_PEAK_SQ / mse))


def frame_psnr(a: Frame, b: Frame) -> tuple[float, float, float, float]:
    """Per-plane PSNR plus the combined value over all samples pooled."""
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError("frame dimensions differ")
    sse = 0
    count = 0
    for pa, pb in ((a.y, b.y), (a.u, b.u), (a.v, b.v)):
        sse += int(((pa.astype(np.int64) - pb.astype(np.int64)) ** 2).sum())
        count += pa.size
    if sse == 0:
        combined = PSNR_CAP
    else:
        combined = float(10.0 * np.log10(_PEAK_SQ * count / sse))
    return psnr(a.y, b.y), psnr(a.u, b.u), psnr(a.v, b.v), combined


def epe(f1: np.ndarray, f2: np.ndarray) -> float:
    """Mean end-point error (px) between two dense flow fields."""
    f1 = np.asarray(f1, np.float64)
    f2 = np.asarray(f2, np.float64)
    if f1.shape != f2.shape:
        raise ValueError(f"shape mismatch {f1.shape} vs {f2.shape}")
    d = f1 - f2
    return float(np.mean(np.sqrt(d[..., 0] ** 2 + d[..., 1] ** 2)))


def _lower_median(values) -> float:
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def median_aggregate(curves: "list[RDCurve]") -> RDCurve:
    """Per-q median of rate and PSNR across sequences (lower median on even counts)."""
    if not curves:
        raise ValueError("no curves to aggregate")
    grid = [p.q for p in sorted(curves[0], key=lambda p: p.q)]
    by_q = []
    for curve in curves:
        qs = {p.q: p for p in curve}
        if sorted(qs) != grid:
            raise ValueError(f"curve q grid {sorted(qs)} does not match {grid}")
        by_q.append(qs)
    return [
        RDPoint(
            q,
            _lower_median(c[q].rate for c in by_q),
            _lower_median(c[q].psnr for c in by_q),
        )
        for q in grid
    ]


def _validate_curve(curve: RDCurve) -> tuple[np.ndarray, np.ndarray]:
    if len(curve) < 4:
        raise ValueError(f"BD metrics need >= 4 points, got {len(curve)}")
    rates = np.array([p.rate for p in curve], np.float64)
    psnrs = np.array([p.psnr for p in curve], np.float64)
    if not np.all(rates > 0.0):
        raise ValueError("rates must be strictly positive")
    if not np.all(np.isfinite(psnrs)):
        raise ValueError("PSNR values must be finite")
    return psnrs, np.log10(rates)


def _poly_mean_diff(x_ref, y_ref, x_test, y_test) -> float:
    # Cubic least-squares fits (interpolation at exactly 4 points), integrated
    # in closed form over the overlapping x interval.
    p_ref = np.polyfit(x_ref, y_ref, 3)
    p_test = np.polyfit(x_test, y_test, 3)
    lo = max(x_ref.min(), x_test.min())
    hi = min(x_ref.max(), x_test.max())
    if not hi > lo:
        raise ValueError(f"curves do not overlap (interval [{lo}, {hi}])")
    int_ref = np.polyint(p_ref)
    int_test = np.polyint(p_test)
    area_ref = np.polyval(int_ref, hi) - np.polyval(int_ref, lo)
    area_test = np.polyval(int_test, hi) - np.polyval(int_test, lo)
    return float((area_test - area_ref) / (hi - lo))


def bd_rate(reference: RDCurve, test: RDCurve) -> float:
    """Average rate difference of test vs reference at equal quality, percent.

    Fits log10(rate) as a cubic in PSNR for both curves and integrates the
    difference over the common PSNR range. Negative means the test curve
    spends fewer bits.
    """
    ref_psnr, ref_lograte = _validate_curve(reference)
    test_psnr, test_lograte = _validate_curve(test)
    avg_diff = _poly_mean_diff(ref_psnr, ref_lograte, test_psnr, test_lograte)
    return (10.0 ** avg_diff - 1.0) * 100.0


def bd_psnr(reference: RDCurve, test: RDCurve) -> float:
    """Average PSNR difference (dB) of test vs reference at equal rate."""
    ref_psnr, ref_lograte = _validate_curve(reference)
    test_psnr, test_lograte = _validate_curve(test)
    return _poly_mean_diff(ref_lograte, ref_psnr, test_lograte, test_psnr)

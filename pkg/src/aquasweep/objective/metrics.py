import numpy as np

MIN_DEPTH = 1e-3

METRIC_NAMES = ("abs_rel", "sq_rel", "rmse", "rmse_log", "delta1", "delta2", "delta3")


def eigen_metrics(pred, gt, valid=None, cap=80.0, median_scale=False):
    """Standard depth error and accuracy metrics over valid pixels.

    Optional median scaling multiplies the prediction by median(gt)/median(pred)
    before both maps are clipped to [1e-3, cap].
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {gt.shape}")
    mask = np.isfinite(gt) & (gt > 0) & np.isfinite(pred)
    if valid is not None:
        mask &= np.asarray(valid, dtype=bool)
    if not mask.any():
        raise ValueError("no valid pixels")
    p = pred[mask]
    g = gt[mask]
    if np.any(p <= 0):
        raise ValueError("predicted depth must be positive on valid pixels")
    if median_scale:
        p = p * (np.median(g) / np.median(p))
    p = np.clip(p, MIN_DEPTH, cap)
    g = np.clip(g, MIN_DEPTH, cap)

    thresh = np.maximum(g / p, p / g)
    out = {
        "abs_rel": float(np.mean(np.abs(g - p) / g)),
        "sq_rel": float(np.mean((g - p) ** 2 / g)),
        "rmse": float(np.sqrt(np.mean((g - p) ** 2))),
        "rmse_log": float(np.sqrt(np.mean((np.log(g) - np.log(p)) ** 2))),
    }
    for k in (1, 2, 3):
        out[f"delta{k}"] = float(np.mean(thresh < 1.25 ** k))
    return out

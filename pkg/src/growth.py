"""Growth-model selection for measured series"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

from .errors import NonpositiveValuesError, TooFewPointsError
from .logging_config import get_logger

logger = get_logger(__name__)

# Preference order on ties: fewer parameters first, fixed exponents before the free power
MODELS = ("constant", "log", "sqrt", "linear", "power")

_BASIS = {
    "log": np.log,
    "sqrt": np.sqrt,
    "linear": lambda R: R,
}


@dataclass
class GrowthFit:
    model: str
    coefficients: Dict[str, float]
    r2: float
    residuals: List[Tuple[float, float, float]] = field(default_factory=list)
    candidates: Dict[str, float] = field(default_factory=dict)

    @property
    def beta(self) -> float:
        return self.coefficients.get("beta", math.nan)

    def as_dict(self) -> dict:
        return {"model": self.model, "coefficients": dict(self.coefficients), "r2": self.r2,
                "candidates": dict(self.candidates)}


def rsquare(y: np.ndarray, fitted: np.ndarray) -> float:
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0:
        return 1.0 if ss_res <= 1e-24 * max(1.0, float(np.sum(y ** 2))) else 0.0
    return float(min(1.0, max(0.0, 1.0 - ss_res / ss_tot)))


def _power(R, a, beta):
    return a * np.power(R, beta)


def _fit_power(R: np.ndarray, y: np.ndarray) -> Tuple[Dict[str, float], np.ndarray]:
    beta, log_a = np.polyfit(np.log(R), np.log(y), 1)
    best = {"a": float(math.exp(log_a)), "beta": float(beta)}
    best_fit = _power(R, best["a"], best["beta"])
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, _ = curve_fit(_power, R, y, p0=(best["a"], best["beta"]), maxfev=20000)
        fitted = _power(R, *popt)
        if np.all(np.isfinite(fitted)) and rsquare(y, fitted) > rsquare(y, best_fit) + 1e-12:
            best, best_fit = {"a": float(popt[0]), "beta": float(popt[1])}, fitted
    except (RuntimeError, ValueError) as e:
        logger.debug(f"power refinement skipped: {e}")
    return best, best_fit


def fit_growth(R: Sequence[float], y: Sequence[float]) -> GrowthFit:
    """
    Least-squares fits of y against 1, log R, sqrt R, R and R^beta; the
    model with the largest R^2 wins, ties within 1e-12 going to the
    earlier entry of MODELS.
    """
    R = np.asarray(R, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(R) != len(y):
        raise TooFewPointsError("R and y lengths differ")
    if len(R) < 4:
        raise TooFewPointsError(f"need at least 4 points, got {len(R)}")
    if np.any(R <= 0) or np.any(y <= 0):
        raise NonpositiveValuesError("R and y must be positive")

    fits: Dict[str, Tuple[Dict[str, float], np.ndarray]] = {}
    fits["constant"] = ({"a": float(y.mean())}, np.full_like(y, y.mean()))
    for name, basis in _BASIS.items():
        X = np.stack([basis(R), np.ones_like(R)], axis=1)
        (slope, intercept), *_ = np.linalg.lstsq(X, y, rcond=None)
        fits[name] = ({"slope": float(slope), "intercept": float(intercept)}, X @ np.array([slope, intercept]))
    fits["power"] = _fit_power(R, y)

    scores = {name: rsquare(y, fits[name][1]) for name in MODELS}
    top = max(scores.values())
    model = next(name for name in MODELS if scores[name] >= top - 1e-12)
    coeffs, fitted = fits[model]
    logger.debug(f"growth fit scores: {', '.join(f'{k}={v:.6f}' for k, v in scores.items())}")
    residuals = [(float(r), float(v), float(f)) for r, v, f in zip(R, y, fitted)]
    return GrowthFit(model, coeffs, scores[model], residuals, scores)

"""
Prior families over the BNN parameters
Priors are written as "family:location:scale" ("horseshoe:scale" for the horseshoe)
"""

import math
from typing import Literal, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

PriorFamily = Literal["normal", "laplace", "cauchy", "horseshoe"]

SHIPPED_PRIORS = [
    "normal:0:1",
    "normal:0:10",
    "laplace:0:1",
    "cauchy:0:1",
    "cauchy:0:2.5",
    "horseshoe:1",
]

LOG_2_OVER_PI = math.log(2.0 / math.pi)


def _num(value: float) -> str:
    return f"{value:g}"


class PriorSpec(BaseModel):
    """
    One prior family with location and scale
    For the horseshoe, scale is the fixed global scale tau and location is unused
    """

    model_config = ConfigDict(frozen=True)

    family: PriorFamily
    location: float = 0.0
    scale: float = Field(1.0, gt=0.0, allow_inf_nan=False)

    @property
    def text(self) -> str:
        """Round-trippable text form, e.g. "cauchy:0:2.5" """
        if self.family == "horseshoe":
            return f"horseshoe:{_num(self.scale)}"
        return f"{self.family}:{_num(self.location)}:{_num(self.scale)}"

    @property
    def slug(self) -> str:
        """File-name form, e.g. "cauchy-0-2.5" """
        return self.text.replace(":", "-")

    @property
    def label(self) -> str:
        """Display form, e.g. "Cauchy(0,2.5)" """
        if self.family == "horseshoe":
            return f"Horseshoe({_num(self.scale)})"
        return f"{self.family.capitalize()}({_num(self.location)},{_num(self.scale)})"

    @property
    def is_horseshoe(self) -> bool:
        return self.family == "horseshoe"

    @property
    def heavy_tailed(self) -> bool:
        """Cauchy and horseshoe posteriors sample with the higher acceptance target"""
        return self.family in ("cauchy", "horseshoe")

    def log_density(self, w: np.ndarray) -> float:
        """
        Sum of elementwise log densities
        For the horseshoe this is the standard normal density of the
        non-centered coordinates z; the local scales are handled by
        log_density_log_scale
        """
        w = np.asarray(w, dtype=float)
        if self.family == "horseshoe":
            return float(-0.5 * w.size * math.log(2.0 * math.pi) - 0.5 * np.sum(w * w))

        u = w - self.location
        b = self.scale
        if self.family == "normal":
            return float(-0.5 * w.size * math.log(2.0 * math.pi * b * b) - np.sum(u * u) / (2.0 * b * b))
        if self.family == "laplace":
            return float(-w.size * math.log(2.0 * b) - np.sum(np.abs(u)) / b)
        # cauchy
        return float(-w.size * math.log(math.pi * b) - np.sum(np.log1p((u / b) ** 2)))

    def grad_log_density(self, w: np.ndarray) -> np.ndarray:
        """Elementwise derivative of log_density"""
        w = np.asarray(w, dtype=float)
        if self.family == "horseshoe":
            return -w
        u = w - self.location
        b = self.scale
        if self.family == "normal":
            return -u / (b * b)
        if self.family == "laplace":
            # subgradient 0 at the kink
            return -np.sign(u) / b
        return -2.0 * u / (b * b + u * u)

    @staticmethod
    def log_density_log_scale(eta: np.ndarray) -> float:
        """
        Half-Cauchy(0, 1) local scale lambda = exp(eta), with the Jacobian term +eta
        log p(eta) = log(2/pi) - log(1 + exp(2 eta)) + eta
        """
        eta = np.asarray(eta, dtype=float)
        return float(eta.size * LOG_2_OVER_PI - np.sum(np.logaddexp(0.0, 2.0 * eta)) + np.sum(eta))

    @staticmethod
    def grad_log_density_log_scale(eta: np.ndarray) -> np.ndarray:
        return -np.tanh(np.asarray(eta, dtype=float))


def parse_prior(text: str) -> PriorSpec:
    """
    Parses "family:location:scale"
    Args:
        text: e.g. "normal:0:10", "laplace:0:1", "horseshoe:1"
    Returns:
        PriorSpec
    Raises:
        ValueError: On an unknown family, wrong arity or a non-positive scale
    """
    parts = [p.strip() for p in str(text).split(":")]
    family = parts[0].lower()
    try:
        if family == "horseshoe":
            if len(parts) == 2:
                location, scale = 0.0, float(parts[1])
            elif len(parts) == 3:
                location, scale = float(parts[1]), float(parts[2])
            else:
                raise ValueError(f"expected 'horseshoe:scale', got {text!r}")
        elif family in ("normal", "laplace", "cauchy"):
            if len(parts) != 3:
                raise ValueError(f"expected '{family}:location:scale', got {text!r}")
            location, scale = float(parts[1]), float(parts[2])
        else:
            raise ValueError(f"unknown prior family {parts[0]!r} in {text!r}")
    except (TypeError, ValueError) as e:
        raise ValueError(f"invalid prior {text!r}: {e}") from e

    if not (math.isfinite(location) and math.isfinite(scale)) or scale <= 0:
        raise ValueError(f"invalid prior {text!r}: scale must be finite and > 0")
    return PriorSpec(family=family, location=location, scale=scale)


def parse_prior_list(texts) -> Tuple[PriorSpec, ...]:
    """Parses a list of prior strings, keeping order"""
    return tuple(parse_prior(t) for t in texts)

"""Reference configurations: model variants and per-profile tuned values.

The two hyperparameter profiles correspond to the two manufacturer-specific
controller families the detector is deployed against; each pairs an
autoencoder configuration with a score type and a criticality threshold tuned
per model variant.
"""

from __future__ import annotations

from dataclasses import dataclass

from .autoencoder import AEConfig
from .errors import ValidationError

# model variant -> calendar conditioning mode
VARIANTS = {
    "default": "none",
    "conditional": "hour_dow",
    "day-of-year": "hour_dow_doy",
}


def normalize_variant(name: str) -> str:
    key = name.strip().lower().replace("_", "-")
    if key not in VARIANTS:
        raise ValidationError(
            f"unknown variant {name!r}; expected one of {', '.join(VARIANTS)}"
        )
    return key


def conditioning_for_variant(name: str) -> str:
    return VARIANTS[normalize_variant(name)]


@dataclass(frozen=True)
class Profile:
    name: str
    ae: AEConfig
    score_type: str
    c_thr: dict[str, int]


PROFILES = {
    "profile-a": Profile(
        name="profile-a",
        ae=AEConfig(
            hidden_units=(64, 32),
            latent_fraction=0.65,
            learning_rate=4.5e-4,
            noise_std=0.05,
            batch_size=256,
        ),
        score_type="mahalanobis",
        c_thr={"default": 17, "conditional": 12, "day-of-year": 9},
    ),
    "profile-b": Profile(
        name="profile-b",
        ae=AEConfig(
            hidden_units=(64, 32),
            latent_fraction=0.25,
            learning_rate=5.3e-4,
            noise_std=0.15,
            batch_size=256,
        ),
        score_type="rmse",
        c_thr={"default": 24, "conditional": 19, "day-of-year": 8},
    ),
}


def get_profile(name: str) -> Profile:
    key = name.strip().lower()
    if key not in PROFILES:
        raise ValidationError(
            f"unknown profile {name!r}; expected one of {', '.join(PROFILES)}"
        )
    return PROFILES[key]

"""Shape solver outputs into figure-ready tables and flat records."""

import logging
from dataclasses import asdict
from typing import Any

import numpy as np
import pandas as pd

from src.corner import CornerPoint
from src.feasible import AlphaInterval, BoundaryCurve, IcCurves, VirtualDemands
from src.model import DemandProfile, PricePair, SearchEnv, SocialValues

logger = logging.getLogger(__name__)

BOUNDARY_COLUMNS = ["p1", "p2", "tag"]
CORNER_COLUMNS = ["p1", "p2", "in_plain", "in_hat", "regime"]


def with_env(record: dict[str, Any], env: SearchEnv) -> dict[str, Any]:
    """Prefix a record with the market primitives it was computed at."""
    return {"A": env.A, "s": env.s, **record}


def boundary_frame(curve: BoundaryCurve) -> pd.DataFrame:
    """One row per boundary point, in curve order."""
    return pd.DataFrame(
        {
            "p1": [pair.p1 for pair in curve.points],
            "p2": [pair.p2 for pair in curve.points],
            "tag": list(curve.tags),
        },
        columns=BOUNDARY_COLUMNS,
    )


def demand_record(
    prices: PricePair, profile: DemandProfile, values: SocialValues
) -> dict[str, Any]:
    return {"p1": prices.p1, "p2": prices.p2, **asdict(profile), **asdict(values)}


def phi_record(
    prices: PricePair,
    interval: AlphaInterval,
    h: float,
    virtual: VirtualDemands,
    binding: tuple[str, ...],
) -> dict[str, Any]:
    return {
        "p1": prices.p1,
        "p2": prices.p2,
        "lo": None if interval.empty else interval.lo,
        "hi": None if interval.empty else interval.hi,
        "empty": interval.empty,
        "h": h,
        "phi1": virtual.phi1,
        "phi2": virtual.phi2,
        "total_demand": virtual.total_demand,
        "binding_at_midpoint": list(binding),
    }


def corner_frame(points: list[CornerPoint]) -> pd.DataFrame:
    """Corner sweep as p1, p2, in_plain, in_hat, regime."""
    return pd.DataFrame(
        [
            {
                "p1": point.p1,
                "p2": point.p2,
                "in_plain": point.in_plain,
                "in_hat": point.in_hat,
                "regime": point.regime.value,
            }
            for point in points
        ],
        columns=CORNER_COLUMNS,
    )


def figure4_frame(env: SearchEnv, points: list[CornerPoint]) -> pd.DataFrame:
    """
    Corner sweep with the plain set clipped below the threshold lines.

    Adds in_plain_clipped, true where a point is in plain P with both prices
    strictly below A.
    """
    frame = corner_frame(points)
    below = (frame["p1"] < env.A) & (frame["p2"] < env.A)
    frame["in_plain_clipped"] = frame["in_plain"] & below
    return frame


def figure2_frame(curve: BoundaryCurve, equilibria: dict[str, PricePair]) -> pd.DataFrame:
    """Boundary rows followed by one row per labelled equilibrium."""
    boundary = boundary_frame(curve)
    boundary.insert(0, "label", "boundary")
    points = pd.DataFrame(
        [
            {"label": label, "p1": pair.p1, "p2": pair.p2, "tag": "equilibrium"}
            for label, pair in equilibria.items()
        ],
        columns=["label", *BOUNDARY_COLUMNS],
    )
    return pd.concat([boundary, points], ignore_index=True)


def figure3_frame(curves: IcCurves) -> pd.DataFrame:
    """Equality loci of IC1 and IC2, labelled by curve."""
    frames = []
    for name, points in (("ic1", curves.ic1), ("ic2", curves.ic2)):
        frames.append(
            pd.DataFrame(
                {
                    "curve": name,
                    "alpha": curves.alpha,
                    "p1": points[:, 0] if len(points) else np.empty(0),
                    "p2": points[:, 1] if len(points) else np.empty(0),
                }
            )
        )
    return pd.concat(frames, ignore_index=True)[["curve", "alpha", "p1", "p2"]]

"""Simulator package exports."""

from . import (  # noqa: F401
    adversary,
    channel,
    contracts,
    errors,
    harness,
    messages,
    prbs,
    protocol,
    puf,
    quantizer,
    report,
    rng,
    scenario,
    svm,
    trust,
)

__all__ = [
    "adversary",
    "channel",
    "contracts",
    "errors",
    "harness",
    "messages",
    "prbs",
    "protocol",
    "puf",
    "quantizer",
    "report",
    "rng",
    "scenario",
    "svm",
    "trust",
]

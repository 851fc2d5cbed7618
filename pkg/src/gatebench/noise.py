"""Relaxation and readout error model.

Every gate is an ideal rotation followed by the same relaxation channel:
amplitude damping with ``gamma = 1 - exp(-t/T1)`` and pure dephasing at rate
``1/T2 - 1/(2 T1)``, both acting for ``gate_time``.  Readout is a classical
confusion matrix built from the flip probabilities ``p01`` (report 1 given 0)
and ``p10`` (report 0 given 1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from gatebench.core import (
    avg_fidelity,
    compose,
    gate_unitary,
    label_unitary,
    superop_from_kraus,
    superop_from_unitary,
)
from gatebench.errors import InvalidDistributionError, UnphysicalParametersError

DEFAULT_GATE_TIME = 10e-6


@dataclass(frozen=True)
class NoiseParams:
    """Times in seconds, probabilities in [0, 1].

    ``prep_error`` mixes ``|1><1|`` into the initial state; it is zero unless a
    scenario asks for it.
    """

    t1: float = math.inf
    t2: float = math.inf
    gate_time: float = DEFAULT_GATE_TIME
    p01: float = 0.0
    p10: float = 0.0
    prep_error: float = 0.0

    def __post_init__(self):
        if not (self.t1 > 0 and self.t2 > 0):
            raise UnphysicalParametersError(f"T1={self.t1}, T2={self.t2} must be positive")
        if self.t2 > 2 * self.t1:
            raise UnphysicalParametersError(
                f"T2={self.t2} exceeds 2*T1={2 * self.t1}; pure dephasing rate would be negative"
            )
        if self.gate_time < 0:
            raise UnphysicalParametersError(f"gate_time={self.gate_time} is negative")
        for name in ("p01", "p10", "prep_error"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise UnphysicalParametersError(f"{name}={val} outside [0, 1]")

    @classmethod
    def noiseless(cls) -> "NoiseParams":
        return cls()

    def replace(self, **changes) -> "NoiseParams":
        kw = {k: getattr(self, k) for k in self.__dataclass_fields__}
        kw.update(changes)
        return NoiseParams(**kw)

    @property
    def dephasing_rate(self) -> float:
        return 1.0 / self.t2 - 0.5 / self.t1

    def readout(self) -> "ReadoutModel":
        return ReadoutModel.from_flips(self.p01, self.p10)


@dataclass(frozen=True)
class ReadoutModel:
    confusion: np.ndarray = field(default_factory=lambda: np.eye(2))

    @classmethod
    def from_flips(cls, p01: float, p10: float) -> "ReadoutModel":
        conf = np.array([[1.0 - p01, p01], [p10, 1.0 - p10]])
        return cls(conf)


def relaxation_kraus(params: NoiseParams) -> list[np.ndarray]:
    """Kraus operators of amplitude damping followed by pure dephasing."""
    t = params.gate_time
    gamma = -math.expm1(-t / params.t1)
    # phase-flip form: coherence factor 1 - 2q = exp(-rate * t)
    q = -0.5 * math.expm1(-params.dephasing_rate * t)

    damp = [
        # exp form keeps sqrt(1 - gamma) accurate when t >> T1
        np.array([[1, 0], [0, math.exp(-0.5 * t / params.t1)]], dtype=complex),
        np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex),
    ]
    dephase = [
        math.sqrt(1 - q) * np.eye(2, dtype=complex),
        math.sqrt(q) * np.diag([1, -1]).astype(complex),
    ]
    ops = [b @ a for b in dephase for a in damp]
    return [op for op in ops if np.any(op != 0)]


def relaxation_superop(params: NoiseParams) -> np.ndarray:
    return superop_from_kraus(relaxation_kraus(params))


def noisy_gate(axis, angle: float, params: NoiseParams) -> np.ndarray:
    """Ideal rotation followed by the relaxation channel."""
    ideal = superop_from_unitary(gate_unitary(axis, angle))
    return compose([ideal, relaxation_superop(params)])


def gate_superops(
    labels: Iterable[str],
    params: NoiseParams,
    unitary_fn: Callable[[str], np.ndarray] = label_unitary,
) -> dict[str, np.ndarray]:
    """Noisy superoperator for every label; ``unitary_fn`` supplies the rotation."""
    relax = relaxation_superop(params)
    return {lab: relax @ superop_from_unitary(unitary_fn(lab)) for lab in dict.fromkeys(labels)}


def initial_state(params: NoiseParams) -> np.ndarray:
    """Vectorized input state ``(1 - e)|0><0| + e|1><1|``."""
    eps = params.prep_error
    return np.array([1.0 - eps, 0.0, 0.0, eps], dtype=complex)


def measurement_effects(params: NoiseParams) -> list[np.ndarray]:
    """Vectorized noisy POVM ``[E0, E1]`` equivalent to the readout confusion."""
    e0 = np.array([1.0 - params.p01, 0.0, 0.0, params.p10], dtype=complex)
    return [e0, np.array([1.0, 0.0, 0.0, 1.0], dtype=complex) - e0]


def apply_readout(true_state_probs, model: ReadoutModel) -> np.ndarray:
    probs = np.asarray(true_state_probs, dtype=float)
    if probs.shape != (2,):
        raise InvalidDistributionError(f"expected a length-2 distribution, got shape {probs.shape}")
    if np.any(probs < 0):
        raise InvalidDistributionError(f"negative probabilities {probs}")
    if abs(probs.sum() - 1) > 1e-9:
        raise InvalidDistributionError(f"distribution sums to {probs.sum()}")
    return model.confusion.T @ probs


def analytic_gate_fidelity(params: NoiseParams) -> float:
    """Average fidelity of any noisy gate against its ideal rotation.

    Noise is gate independent, so ``F(U, N o U) = F(I, N)``.
    """
    return avg_fidelity(np.eye(4, dtype=complex), relaxation_superop(params))

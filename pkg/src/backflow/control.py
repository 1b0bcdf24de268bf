"""Coherent control of two lossy-channel copies via a control qubit.

Two supermaps are provided.  The *switch* runs the two channel copies in the
two possible orders, entangled with the control:

    S_ij = E_i F_j (x) |0><0|  +  F_j E_i (x) |1><1|

The *path* configuration instead routes the target through one copy or the
other, weighted by complex amplitude vectors:

    N_ij = alpha_j E_i (x) |0><0|  +  beta_i F_j (x) |1><1|

with sum_j |alpha_j|^2 = sum_i |beta_i|^2 = 1.  The control starts in
omega = p |+><+| + (1 - p) I/2 and is finally measured in the |+->-basis;
conditioning on one outcome and renormalizing yields the output state.

For both configurations applied to two copies of the lossy channel with the
default amplitudes, the plus-outcome output admits closed forms, implemented
here alongside the direct supermap route so that each can check the other.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import KrausChannel, apply, phi_t_kraus
from .qmat import (
    KET_MINUS,
    KET_PLUS,
    check_density_operator,
    kron,
    project_control,
)

P0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
P1 = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)

AMPLITUDE_NORM_TOL = 1e-12


@dataclass(frozen=True)
class AmplitudeVectors:
    """Channel-choice amplitudes; each vector is indexed by the other
    channel's Kraus index and must be normalized."""

    alpha: tuple
    beta: tuple

    def __post_init__(self):
        alpha = tuple(complex(a) for a in self.alpha)
        beta = tuple(complex(b) for b in self.beta)
        for name, vec in (("alpha", alpha), ("beta", beta)):
            norm = sum(abs(v) ** 2 for v in vec)
            if abs(norm - 1.0) > AMPLITUDE_NORM_TOL:
                raise ValueError(f"{name} amplitudes not normalized: sum |.|^2 = {norm}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)


def default_amplitudes() -> AmplitudeVectors:
    """Equal weight on the two exchange operators, none on the identity one."""
    r = 1.0 / np.sqrt(2.0)
    return AmplitudeVectors(alpha=(r, r, 0.0), beta=(r, r, 0.0))


@dataclass(frozen=True)
class ControlState:
    """Control qubit omega = p |+><+| + (1 - p) I/2 with p in [0, 1]."""

    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"control purity parameter p must be in [0, 1], got {self.p}")

    def density(self) -> np.ndarray:
        return 0.5 * np.array([[1.0, self.p], [self.p, 1.0]], dtype=complex)


@dataclass(frozen=True)
class ControlConfig:
    """Which supermap to build and how to post-select the control."""

    mode: str
    control: ControlState
    amplitudes: Optional[AmplitudeVectors] = None
    postselect_outcome: str = "plus"

    def __post_init__(self):
        if self.mode not in ("switch", "path"):
            raise ValueError(f"mode must be 'switch' or 'path', got {self.mode!r}")
        if self.mode == "path" and self.amplitudes is None:
            raise ValueError("path mode requires amplitude vectors")
        if self.mode == "switch" and self.amplitudes is not None:
            raise ValueError("switch mode takes no amplitude vectors")
        if self.postselect_outcome not in ("plus", "minus"):
            raise ValueError(f"postselect_outcome must be 'plus' or 'minus'")


def switch_config(p: float, outcome: str = "plus") -> ControlConfig:
    return ControlConfig(mode="switch", control=ControlState(p), postselect_outcome=outcome)


def path_config(
    p: float,
    amplitudes: Optional[AmplitudeVectors] = None,
    outcome: str = "plus",
) -> ControlConfig:
    if amplitudes is None:
        amplitudes = default_amplitudes()
    return ControlConfig(
        mode="path", control=ControlState(p), amplitudes=amplitudes, postselect_outcome=outcome
    )


def outcome_vector(outcome: str) -> np.ndarray:
    if outcome == "plus":
        return KET_PLUS
    if outcome == "minus":
        return KET_MINUS
    raise ValueError(f"unknown outcome {outcome!r}")


def switch_kraus(e: KrausChannel, f: KrausChannel) -> KrausChannel:
    """Order-superposition supermap S_ij = E_i F_j (x) P0 + F_j E_i (x) P1."""
    if e.dim != f.dim:
        raise ValueError(f"dimension mismatch: {e.dim} vs {f.dim}")
    ops = tuple(
        kron(ei @ fj, P0) + kron(fj @ ei, P1) for ei in e.ops for fj in f.ops
    )
    return KrausChannel(ops, label=f"switch({e.label},{f.label})")


def path_kraus(e: KrausChannel, f: KrausChannel, amps: AmplitudeVectors) -> KrausChannel:
    """Channel-choice supermap N_ij = alpha_j E_i (x) P0 + beta_i F_j (x) P1."""
    if e.dim != f.dim:
        raise ValueError(f"dimension mismatch: {e.dim} vs {f.dim}")
    if len(amps.beta) != len(e.ops):
        raise ValueError(
            f"beta length {len(amps.beta)} must match first channel's {len(e.ops)} operators"
        )
    if len(amps.alpha) != len(f.ops):
        raise ValueError(
            f"alpha length {len(amps.alpha)} must match second channel's {len(f.ops)} operators"
        )
    ops = tuple(
        amps.alpha[j] * kron(e.ops[i], P0) + amps.beta[i] * kron(f.ops[j], P1)
        for i in range(len(e.ops))
        for j in range(len(f.ops))
    )
    return KrausChannel(ops, label=f"path({e.label},{f.label})")


def build_supermap(config: ControlConfig, t: float) -> KrausChannel:
    """Joint Kraus set for two copies of the lossy channel at time t."""
    phi = phi_t_kraus(t)
    if config.mode == "switch":
        return switch_kraus(phi, phi)
    return path_kraus(phi, phi, config.amplitudes)


def controlled_output(config: ControlConfig, rho0: np.ndarray, t: float):
    """Post-selected output state and outcome probability at time t.

    Applies the configured supermap to rho0 (x) omega, projects the control
    on the configured outcome and renormalizes.  Propagates
    PostSelectionImpossibleError when the outcome probability vanishes.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    check_density_operator(rho0)
    if rho0.shape != (2, 2):
        raise ValueError("controlled_output expects a qubit state")
    joint_channel = build_supermap(config, t)
    joint_state = kron(rho0, config.control.density())
    evolved = apply(joint_channel, joint_state)
    block, prob = project_control(evolved, outcome_vector(config.postselect_outcome))
    return block / prob, prob


def path_coefficients(t, p: float):
    """Closed-form weights (A, B) of the plus-outcome path output.

    With x = exp(2t):

        A(t) = 2 (x + 1) / ((4 + p) x - p)
        B(t) = (x - 1) / ((4 + p) x - p)

    Unit trace of the output forces A + (2 + p) B = 1, which pins both
    coefficients to the same denominator.  Vectorized over t.
    """
    x = np.exp(2.0 * np.asarray(t, dtype=float))
    den = (4.0 + p) * x - p
    return 2.0 * (x + 1.0) / den, (x - 1.0) / den


def switch_coefficients(t, p: float):
    """Closed-form weights (A, B, C) of the plus-outcome switch output.

    With x = exp(2t) and common denominator (4 + 3p) x^2 + 2 p x - p:

        A = ((2 + p) x^2 + 2 p x + p + 2) / den
        B = 2 (1 + p) (x^2 - 1) / den
        C = ((1 + 2p) x^2 + 2 x + 2 p + 1) / den

    A + B = 1; C weights the coherences.  Vectorized over t.
    """
    x = np.exp(2.0 * np.asarray(t, dtype=float))
    den = (4.0 + 3.0 * p) * x * x + 2.0 * p * x - p
    a = ((2.0 + p) * x * x + 2.0 * p * x + p + 2.0) / den
    b = 2.0 * (1.0 + p) * (x * x - 1.0) / den
    c = ((1.0 + 2.0 * p) * x * x + 2.0 * x + 2.0 * p + 1.0) / den
    return a, b, c


def analytic_state_path(rho0: np.ndarray, t: float, p: float) -> np.ndarray:
    """Closed-form plus-outcome path output; equals the supermap route.

    Entry map for input sigma:

        [ s11 A + (2+p) s22 B    s12 A + p s21 B ]
        [ p s12 B + s21 A        (2+p) s11 B + s22 A ]
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (2, 2):
        raise ValueError("analytic_state_path expects a qubit state")
    a_w, b_w = path_coefficients(t, p)
    s11, s12, s21, s22 = rho0[0, 0], rho0[0, 1], rho0[1, 0], rho0[1, 1]
    return np.array(
        [
            [s11 * a_w + (2.0 + p) * s22 * b_w, s12 * a_w + p * s21 * b_w],
            [p * s12 * b_w + s21 * a_w, (2.0 + p) * s11 * b_w + s22 * a_w],
        ],
        dtype=complex,
    )


def analytic_state_switch(rho0: np.ndarray, t: float, p: float) -> np.ndarray:
    """Closed-form plus-outcome switch output; equals the supermap route.

    Entry map for input sigma:

        [ s11 A + s22 B    s12 C ]
        [ s21 C            s11 B + s22 A ]
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (2, 2):
        raise ValueError("analytic_state_switch expects a qubit state")
    a_w, b_w, c_w = switch_coefficients(t, p)
    s11, s12, s21, s22 = rho0[0, 0], rho0[0, 1], rho0[1, 0], rho0[1, 1]
    return np.array(
        [
            [s11 * a_w + s22 * b_w, s12 * c_w],
            [s21 * c_w, s11 * b_w + s22 * a_w],
        ],
        dtype=complex,
    )

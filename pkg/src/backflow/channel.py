"""The lossy qubit channel family and its master-equation oracle.

The channel of interest mixes the identity with symmetric bit-exchange noise:
its three nonzero Kraus operators are

    K1(t) = sqrt(a2(t)) |0><1|
    K2(t) = sqrt(a2(t)) |1><0|
    K3(t) = sqrt((a1(t) + a3(t)) / 2) I

with a1(t) = a3(t) = (1 + exp(-2t)) / 2 and a2(t) = (1 - exp(-2t)) / 2.  The
fourth operator of the general construction is proportional to
sqrt((a1 - a3) / 2) and vanishes identically, so it is omitted.

The same dynamics solve the time-local canonical master equation

    drho/dt = sum_i (g_i(t) / 2) (sigma_i rho sigma_i - rho)

with g1 = g2 = 1 and g3 = -tanh(t); the rate g3 is negative at every time,
which is what makes this family interesting.  A fixed-step RK4 integrator of
that equation serves as an independent oracle for the Kraus form.
"""

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .qmat import I2, SIGMA_X, SIGMA_Y, SIGMA_Z, check_density_operator, dagger

COMPLETENESS_TOL = 1e-12
CHOI_PSD_TOL = 1e-10
MAX_ODE_STEP = 1e-2


@dataclass(frozen=True)
class KrausChannel:
    """A finite list of equal-dimension square Kraus operators."""

    ops: tuple
    label: str = ""

    def __post_init__(self):
        if len(self.ops) == 0:
            raise ValueError("KrausChannel needs at least one operator")
        ops = tuple(np.asarray(op, dtype=complex) for op in self.ops)
        dim = ops[0].shape[0]
        for op in ops:
            if op.ndim != 2 or op.shape != (dim, dim):
                raise ValueError("Kraus operators must be square and equal-dimension")
        object.__setattr__(self, "ops", ops)

    @property
    def dim(self) -> int:
        return self.ops[0].shape[0]


@dataclass(frozen=True)
class CptpReport:
    """Completeness and complete-positivity diagnostics for a Kraus set."""

    label: str
    completeness_residual: float
    choi_min_eigenvalue: float
    completeness_tol: float = COMPLETENESS_TOL
    choi_psd_tol: float = CHOI_PSD_TOL

    @property
    def completeness_ok(self) -> bool:
        return self.completeness_residual <= self.completeness_tol

    @property
    def choi_ok(self) -> bool:
        return self.choi_min_eigenvalue >= -self.choi_psd_tol

    @property
    def passed(self) -> bool:
        return self.completeness_ok and self.choi_ok


def completeness_residual(channel: KrausChannel) -> float:
    """Max-entry deviation of sum_i K_i^dag K_i from the identity."""
    acc = sum(dagger(op) @ op for op in channel.ops)
    return float(np.abs(acc - np.eye(channel.dim)).max())


def choi_matrix(channel: KrausChannel) -> np.ndarray:
    """Choi matrix sum_i |K_i>><<K_i| with row-major vectorization.

    Built from the unnormalized maximally entangled pairing, so the trace
    equals the channel dimension for a trace-preserving channel.
    """
    d = channel.dim
    choi = np.zeros((d * d, d * d), dtype=complex)
    for op in channel.ops:
        w = op.ravel()
        choi += np.outer(w, w.conj())
    return choi


def validate_cptp(channel: KrausChannel) -> CptpReport:
    """Report completeness residual and Choi minimum eigenvalue."""
    res = completeness_residual(channel)
    lam_min = float(np.linalg.eigvalsh(choi_matrix(channel)).min())
    return CptpReport(channel.label, res, lam_min)


def apply(channel: KrausChannel, rho: np.ndarray) -> np.ndarray:
    """Channel action sum_i K_i rho K_i^dag.

    Refuses channels whose Kraus set fails the completeness condition, so a
    valid density operator always maps to a valid density operator.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (channel.dim, channel.dim):
        raise ValueError(f"state dimension {rho.shape} does not match channel dim {channel.dim}")
    res = completeness_residual(channel)
    if res > COMPLETENESS_TOL:
        raise ValueError(
            f"channel {channel.label!r} is not trace preserving (residual {res:.3e})"
        )
    out = np.zeros_like(rho)
    for op in channel.ops:
        out += op @ rho @ dagger(op)
    return out


def compose(outer: KrausChannel, inner: KrausChannel) -> KrausChannel:
    """Sequential composition outer(inner(.)) with Kraus set {E_i F_j}."""
    if outer.dim != inner.dim:
        raise ValueError(f"dimension mismatch: {outer.dim} vs {inner.dim}")
    ops = tuple(e @ f for e in outer.ops for f in inner.ops)
    out = KrausChannel(ops, label=f"({outer.label})o({inner.label})")
    report = validate_cptp(out)
    if not report.passed:
        raise ValueError(f"composition of {outer.label!r} and {inner.label!r} is not CPTP")
    return out


class PhiCoefficients(NamedTuple):
    """Weights of the lossy-channel Kraus family at one time."""

    t: float
    alpha1: float
    alpha2: float
    alpha3: float


def phi_t_coefficients(t: float) -> PhiCoefficients:
    """Kraus weights at dimensionless time t >= 0.

    alpha1 = alpha3 = (1 + exp(-2t)) / 2, alpha2 = (1 - exp(-2t)) / 2, so
    alpha1 + alpha2 = 1, which is exactly the completeness weight of the
    three surviving operators.
    """
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    u = np.exp(-2.0 * t)
    return PhiCoefficients(float(t), (1.0 + u) / 2.0, (1.0 - u) / 2.0, (1.0 + u) / 2.0)


def phi_t_kraus(t: float) -> KrausChannel:
    """The lossy channel at time t as a three-operator Kraus set."""
    c = phi_t_coefficients(t)
    k_flip = np.sqrt(c.alpha2)
    k_id = np.sqrt((c.alpha1 + c.alpha3) / 2.0)
    ops = (
        k_flip * np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex),
        k_flip * np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex),
        k_id * I2,
    )
    return KrausChannel(ops, label=f"phi_t(t={t:g})")


def _zero_hamiltonian() -> np.ndarray:
    return np.zeros((2, 2), dtype=complex)


@dataclass(frozen=True)
class CanonicalGenerator:
    """Time-local qubit generator with three Pauli decoherence rates.

    The Hamiltonian field is kept for generality but defaults to zero; the
    dynamics studied here carry no coherent part.
    """

    gamma1: Callable[[float], float]
    gamma2: Callable[[float], float]
    gamma3: Callable[[float], float]
    hamiltonian: np.ndarray = field(default_factory=_zero_hamiltonian)

    def rates(self, t: float):
        return self.gamma1(t), self.gamma2(t), self.gamma3(t)


def eternal_nm_generator() -> CanonicalGenerator:
    """Rates g1 = g2 = 1 and g3 = -tanh(t): negative at all t > 0."""
    return CanonicalGenerator(
        gamma1=lambda t: 1.0,
        gamma2=lambda t: 1.0,
        gamma3=lambda t: -np.tanh(t),
    )


def canonical_rhs(gen: CanonicalGenerator, t: float, rho: np.ndarray) -> np.ndarray:
    """Right-hand side sum_i (g_i(t)/2)(sigma_i rho sigma_i - rho) - i[H, rho].

    Accepts stacked states over leading axes; the output is traceless and
    Hermitian for Hermitian input.
    """
    rho = np.asarray(rho, dtype=complex)
    g1, g2, g3 = gen.rates(t)
    out = 0.5 * g1 * (SIGMA_X @ rho @ SIGMA_X - rho)
    out = out + 0.5 * g2 * (SIGMA_Y @ rho @ SIGMA_Y - rho)
    out = out + 0.5 * g3 * (SIGMA_Z @ rho @ SIGMA_Z - rho)
    h = gen.hamiltonian
    if np.any(h):
        out = out - 1.0j * (h @ rho - rho @ h)
    return out


def integrate_canonical(
    gen: CanonicalGenerator,
    rho0: np.ndarray,
    t_final: float,
    dt: float = 1e-3,
) -> np.ndarray:
    """Classical RK4 integration of the canonical equation up to t_final.

    After each step the state is re-Hermitized, (M + M^dag)/2, and
    renormalized to unit trace.  The step count is rounded so the final time
    is hit exactly; the effective step never exceeds ``dt`` by more than half
    a step.  Accepts stacked states over leading axes.

    This integrator is the independent oracle for the Kraus family: with
    dt = 1e-3 the two agree in trace distance to better than 1e-6 out to
    t_final = 5.
    """
    if not (0.0 < dt <= MAX_ODE_STEP):
        raise ValueError(f"dt must lie in (0, {MAX_ODE_STEP:g}], got {dt}")
    if t_final < 0:
        raise ValueError(f"t_final must be non-negative, got {t_final}")
    rho = np.array(rho0, dtype=complex)
    if rho.shape[-2:] != (2, 2):
        raise ValueError("integrate_canonical expects qubit states")
    if rho.ndim == 2:
        check_density_operator(rho)
    if t_final == 0.0:
        return rho
    n_steps = max(1, int(round(t_final / dt)))
    h = t_final / n_steps
    t = 0.0
    for _ in range(n_steps):
        k1 = canonical_rhs(gen, t, rho)
        k2 = canonical_rhs(gen, t + 0.5 * h, rho + 0.5 * h * k1)
        k3 = canonical_rhs(gen, t + 0.5 * h, rho + 0.5 * h * k2)
        k4 = canonical_rhs(gen, t + h, rho + h * k3)
        rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        rho = 0.5 * (rho + dagger(rho))
        tr = np.real(np.einsum("...ii", rho))
        rho = rho / tr[..., None, None] if rho.ndim > 2 else rho / tr
        t += h
    return rho

"""Finite-dimensional operators, channels, GKSL generators and no-jump propagation.

Conventions: for two-level systems, array index 0 is the upper level
``|1>`` and index 1 is the lower level ``|0>``, so that ``sigma_z = diag(1, -1)``,
``P1 = sigma_plus @ sigma_minus = diag(1, 0)`` and ``P0 = diag(0, 1)``.
Superoperators act on row-major vectorized matrices:
``vec(A @ rho @ B) = kron(A, B.T) @ vec(rho)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import expm

from .config import DEFAULT, Tolerances
from .errors import ArgumentError, ModelError, NumericError

ComplexMatrix = NDArray[np.complex128]

IDENTITY2 = np.eye(2, dtype=np.complex128)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=np.complex128)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=np.complex128)
P1 = SIGMA_PLUS @ SIGMA_MINUS
P0 = SIGMA_MINUS @ SIGMA_PLUS

for _m in (IDENTITY2, SIGMA_X, SIGMA_Y, SIGMA_Z, SIGMA_PLUS, SIGMA_MINUS, P0, P1):
    _m.setflags(write=False)


def as_matrix(m: ArrayLike, dim: int | None = None, tol: Tolerances = DEFAULT) -> ComplexMatrix:
    """Validate and convert to a square complex matrix.

    Args:
        m: Matrix-like input.
        dim: Required dimension, if any.
        tol: Tolerance record (supplies the dimension cap).

    Returns:
        A fresh complex128 array.

    Raises:
        ArgumentError: On wrong shape, non-finite entries or dimension above the cap.
    """
    a = np.array(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ArgumentError(f"expected a square matrix, got shape {a.shape}")
    if dim is not None and a.shape[0] != dim:
        raise ArgumentError(f"dimension mismatch: expected {dim}, got {a.shape[0]}")
    if a.shape[0] > tol.max_dim:
        raise ArgumentError(f"dimension {a.shape[0]} exceeds cap {tol.max_dim}")
    if not np.all(np.isfinite(a)):
        raise ArgumentError("matrix has non-finite entries")
    return a


def dagger(m: NDArray) -> NDArray:
    return np.conj(np.swapaxes(m, -1, -2))


def hermitian_part(m: NDArray) -> NDArray:
    return 0.5 * (m + dagger(m))


def is_hermitian(m: NDArray, tol: float = DEFAULT.hermitian) -> bool:
    return bool(np.max(np.abs(m - dagger(m)), initial=0.0) <= tol)


def min_eigenvalue(m: NDArray) -> float:
    """Smallest eigenvalue of the Hermitian part of ``m``."""
    return float(np.linalg.eigvalsh(hermitian_part(m))[0])


def as_density(
    rho: ArrayLike,
    dim: int | None = None,
    normalized: bool = True,
    tol: Tolerances = DEFAULT,
) -> ComplexMatrix:
    """Validate a density operator.

    Normalized operators need unit trace; unnormalized ones need trace in (0, 1].
    """
    a = as_matrix(rho, dim, tol)
    if not is_hermitian(a, tol.hermitian):
        raise ArgumentError("density operator is not Hermitian")
    if min_eigenvalue(a) < -tol.psd:
        raise ArgumentError("density operator is not positive semidefinite")
    tr = float(np.trace(a).real)
    if normalized:
        if abs(tr - 1.0) > tol.trace:
            raise ArgumentError(f"density operator trace {tr!r} differs from 1")
    elif not (0.0 < tr <= 1.0 + tol.trace):
        raise ArgumentError(f"unnormalized trace {tr!r} outside (0, 1]")
    return a


def pure_state(psi: ArrayLike) -> ComplexMatrix:
    """Projector onto the normalized vector ``psi``."""
    v = np.asarray(psi, dtype=np.complex128).ravel()
    n = np.linalg.norm(v)
    if n == 0:
        raise ArgumentError("zero state vector")
    v = v / n
    return np.outer(v, v.conj())


# --------------------------------------------------------------------------- #
# channels


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    """Completely positive, trace non-increasing map in Kraus form.

    Attributes:
        kraus: Kraus operators ``K_j``; the map is ``rho -> sum_j K_j rho K_j^dagger``.
    """

    kraus: tuple[ComplexMatrix, ...]
    completeness_defect: ComplexMatrix = field(init=False, repr=False, compare=False)

    def __init__(self, kraus: Iterable[ArrayLike], tol: Tolerances = DEFAULT):
        ops = [np.array(k, dtype=np.complex128) for k in kraus]
        if not ops:
            raise ArgumentError("a channel needs at least one Kraus operator")
        d = ops[0].shape[0]
        ops = [as_matrix(k, d, tol) for k in ops]
        for k in ops:
            k.setflags(write=False)
        gram = sum(dagger(k) @ k for k in ops)
        defect = np.eye(d) - gram
        if min_eigenvalue(defect) < -tol.channel:
            raise ModelError(
                "sum of K^dagger K exceeds identity by "
                f"{-min_eigenvalue(defect):.3e}"
            )
        defect.setflags(write=False)
        object.__setattr__(self, "kraus", tuple(ops))
        object.__setattr__(self, "completeness_defect", defect)

    @property
    def dim(self) -> int:
        return self.kraus[0].shape[0]

    def apply(self, rho: NDArray) -> NDArray:
        """Apply to a matrix or a stack of matrices (last two axes)."""
        return sum(k @ rho @ dagger(k) for k in self.kraus)

    def adjoint(self, x: NDArray) -> NDArray:
        """Heisenberg-picture map ``X -> sum_j K_j^dagger X K_j``."""
        return sum(dagger(k) @ x @ k for k in self.kraus)

    def superop(self) -> ComplexMatrix:
        return sum(np.kron(k, k.conj()) for k in self.kraus)


def apply_channel(channel: QuantumChannel, rho: ArrayLike) -> ComplexMatrix:
    """Return ``sum_j K_j rho K_j^dagger``.

    Raises:
        ArgumentError: If dimensions differ.
    """
    r = as_matrix(rho, channel.dim)
    return channel.apply(r)


def rescale_channel(
    rate: float, kraus: Sequence[ArrayLike]
) -> tuple[float, QuantumChannel]:
    """Split ``rate * J(.)`` into a rate and a trace non-increasing channel.

    If ``sum J^dagger J`` has largest eigenvalue ``s > 1`` the Kraus operators
    are divided by ``sqrt(s)`` and the rate multiplied by ``s``; the product
    ``rate * J`` is unchanged.
    """
    ops = [np.array(k, dtype=np.complex128) for k in kraus]
    gram = sum(dagger(k) @ k for k in ops)
    s = float(np.linalg.eigvalsh(hermitian_part(gram))[-1])
    if s > 1.0:
        ops = [k / np.sqrt(s) for k in ops]
        rate = rate * s
    return rate, QuantumChannel(ops)


# --------------------------------------------------------------------------- #
# models


@dataclass(frozen=True, eq=False)
class JumpChannel:
    """Labeled jump channel with its rate ``nu_u``."""

    label: str
    rate: float
    channel: QuantumChannel


@dataclass(frozen=True, eq=False)
class JumpModel:
    """GKSL smooth part plus labeled jump channels.

    Attributes:
        hamiltonian: Hermitian ``H``.
        lindblads: Smooth dissipators ``L_k``.
        channels: Jump channels ``(u, nu_u, J(u))``.
    """

    hamiltonian: ComplexMatrix
    lindblads: tuple[ComplexMatrix, ...]
    channels: tuple[JumpChannel, ...]
    R: ComplexMatrix = field(init=False, repr=False, compare=False)
    R0: ComplexMatrix = field(init=False, repr=False, compare=False)

    def __init__(
        self,
        hamiltonian: ArrayLike,
        lindblads: Iterable[ArrayLike] = (),
        channels: Iterable[JumpChannel] = (),
        tol: Tolerances = DEFAULT,
    ):
        h = as_matrix(hamiltonian, tol=tol)
        d = h.shape[0]
        if not is_hermitian(h, tol.hermitian):
            raise ModelError("hamiltonian is not Hermitian")
        h = hermitian_part(h)
        ls = tuple(as_matrix(l, d, tol) for l in lindblads)
        chs = tuple(channels)
        if not chs:
            raise ModelError("model needs at least one jump channel (total rate > 0)")
        labels = [c.label for c in chs]
        if len(set(labels)) != len(labels):
            raise ModelError(f"duplicate jump labels in {labels}")
        for c in chs:
            if not (np.isfinite(c.rate) and c.rate > 0):
                raise ModelError(f"rate of label {c.label!r} must be positive and finite")
            if c.channel.dim != d:
                raise ArgumentError(f"channel {c.label!r} has dimension {c.channel.dim} != {d}")
        r = sum(c.rate * sum(dagger(k) @ k for k in c.channel.kraus) for c in chs)
        r = hermitian_part(np.asarray(r, dtype=np.complex128))
        r0 = hermitian_part(sum((dagger(l) @ l for l in ls), np.zeros((d, d), complex)))
        if min_eigenvalue(r) < -tol.psd:
            raise ModelError("R is not positive semidefinite")
        for a in (h, r, r0, *ls):
            a.setflags(write=False)
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "lindblads", ls)
        object.__setattr__(self, "channels", chs)
        object.__setattr__(self, "R", r)
        object.__setattr__(self, "R0", r0)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def labels(self) -> list[str]:
        return [c.label for c in self.channels]

    @property
    def total_rate(self) -> float:
        return float(sum(c.rate for c in self.channels))

    def channel(self, label: str) -> JumpChannel:
        for c in self.channels:
            if c.label == label:
                return c
        raise ArgumentError(f"unknown jump label {label!r}")

    @property
    def h_eff(self) -> ComplexMatrix:
        """Effective non-Hermitian Hamiltonian ``H - (i/2)(R0 + R)``."""
        return self.hamiltonian - 0.5j * (self.R0 + self.R)

    def gain(self, rho: NDArray) -> NDArray:
        """Jump gain term ``sum_u nu_u J(u)[rho]``."""
        return sum(c.rate * c.channel.apply(rho) for c in self.channels)


# --------------------------------------------------------------------------- #
# superoperators


@dataclass(frozen=True, eq=False)
class Superoperator:
    """Linear map ``rho -> sum_i A_i rho B_i`` on ``dim x dim`` matrices."""

    dim: int
    terms: tuple[tuple[ComplexMatrix, ComplexMatrix], ...]

    def __call__(self, rho: NDArray) -> NDArray:
        return sum(a @ rho @ b for a, b in self.terms)

    def matrix(self) -> ComplexMatrix:
        """Representation on row-major vectorized matrices."""
        d2 = self.dim**2
        out = np.zeros((d2, d2), dtype=np.complex128)
        for a, b in self.terms:
            out += np.kron(a, b.T)
        return out

    def __add__(self, other: Superoperator) -> Superoperator:
        if other.dim != self.dim:
            raise ArgumentError("dimension mismatch")
        return Superoperator(self.dim, self.terms + other.terms)


def _smooth_terms(h_eff: NDArray, lindblads: Sequence[NDArray]) -> tuple:
    d = h_eff.shape[0]
    one = np.eye(d, dtype=np.complex128)
    terms = [(-1j * h_eff, one), (one, 1j * dagger(h_eff))]
    terms += [(l, dagger(l)) for l in lindblads]
    return tuple(terms)


def no_jump_generator(model: JumpModel) -> Superoperator:
    """No-jump generator ``L0[rho] - (1/2){R, rho}``."""
    return Superoperator(model.dim, _smooth_terms(model.h_eff, model.lindblads))


def gain_superoperator(model: JumpModel) -> Superoperator:
    """Jump gain ``G = sum_u nu_u J(u)``."""
    terms = tuple(
        (c.rate * k, dagger(k)) for c in model.channels for k in c.channel.kraus
    )
    return Superoperator(model.dim, terms)


def full_generator(model: JumpModel) -> Superoperator:
    """Full generator ``L = A + G``."""
    return no_jump_generator(model) + gain_superoperator(model)


def smooth_generator(
    hamiltonian: ArrayLike, lindblads: Sequence[ArrayLike] = ()
) -> Superoperator:
    """Trace-preserving GKSL generator with no jump channels."""
    h = as_matrix(hamiltonian)
    ls = [as_matrix(l, h.shape[0]) for l in lindblads]
    r0 = sum((dagger(l) @ l for l in ls), np.zeros_like(h))
    return Superoperator(h.shape[0], _smooth_terms(h - 0.5j * r0, ls))


def apply_generator(model: JumpModel, rho: ArrayLike) -> ComplexMatrix:
    """Evaluate ``L[rho]`` in operator form."""
    r = as_matrix(rho, model.dim)
    return full_generator(model)(r)


def vec(rho: NDArray) -> NDArray:
    return np.ascontiguousarray(rho).reshape(*rho.shape[:-2], -1)


def unvec(v: NDArray, dim: int) -> NDArray:
    return v.reshape(*v.shape[:-1], dim, dim)


def propagate(
    generator: Superoperator | NDArray, rho: ArrayLike, dt: float
) -> ComplexMatrix:
    """Return ``exp(dt * A)[rho]`` with Hermitian symmetrization.

    Args:
        generator: A ``Superoperator`` or its ``d^2 x d^2`` matrix.
        rho: Hermitian input matrix.
        dt: Non-negative time step.

    Raises:
        ArgumentError: If ``dt < 0`` or dimensions differ.
        NumericError: If the exponential overflows.
    """
    if not dt >= 0:
        raise ArgumentError(f"dt must be non-negative, got {dt!r}")
    m = generator.matrix() if isinstance(generator, Superoperator) else np.asarray(generator)
    d = int(round(np.sqrt(m.shape[0])))
    r = as_matrix(rho, d)
    if dt == 0:
        return r
    with np.errstate(over="raise", invalid="raise"):
        try:
            out = unvec(expm(dt * m) @ vec(r), d)
        except FloatingPointError as exc:
            raise NumericError(f"matrix exponential overflow at dt={dt!r}") from exc
    if not np.all(np.isfinite(out)):
        raise NumericError(f"matrix exponential overflow at dt={dt!r}")
    return hermitian_part(out)


def trace_vec(v: NDArray, dim: int) -> NDArray:
    """Real trace of row-major vectorized matrices (last axis)."""
    idx = np.arange(dim) * (dim + 1)
    return v[..., idx].sum(axis=-1).real

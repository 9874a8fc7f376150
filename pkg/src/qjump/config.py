"""Central numerical tolerances and limits."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    """Default tolerances shared by every module.

    Attributes:
        hermitian: max entrywise |M - M^dagger| for Hermitian checks.
        psd: slack allowed on eigenvalues for positivity checks.
        trace: allowed deviation of a normalized trace from one.
        channel: slack on sum K^dagger K <= 1.
        model: tolerance on derived-operator identities (R = G*[1]).
        normalization: defect allowed in instrument normalization.
        time_abs: bisection resolution relative to the inverse rate scale.
        ep_switch: EP threshold on |kappa| relative to scale**2.
        regime: classification tolerance on |kappa| and k.
        tail_change: geometric-grid convergence threshold for S(inf).
        bound_violation: relative slack for thinning bound checks.
        max_dim: largest Hilbert-space dimension accepted.
        block_expm_limit: largest stacked size exponentiated in one go.
    """

    hermitian: float = 1e-10
    psd: float = 1e-10
    trace: float = 1e-10
    channel: float = 1e-10
    model: float = 1e-10
    normalization: float = 1e-10
    time_abs: float = 1e-10
    ep_switch: float = 1e-8
    regime: float = 1e-10
    tail_change: float = 1e-12
    bound_violation: float = 1e-9
    max_dim: int = 64
    block_expm_limit: int = 4096


DEFAULT = Tolerances()

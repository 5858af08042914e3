"""Numerical tolerances shared across the package.

Every threshold used by a check lives here so that a single record can be
swapped in (and digested into run manifests) when a run needs different
numerics.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class Numerics:
    hermitian_tol: float = 1e-12
    orthonormal_tol: float = 1e-12
    reconstruction_tol: float = 1e-10
    generator_match_tol: float = 1e-8
    # relative to max |E|
    degeneracy_tol: float = 1e-9
    psd_rel_tol: float = 1e-10
    lemma1_tol: float = 1e-10
    imag_diag_tol: float = 1e-10
    # principal-value quadrature: stop doubling once successive results agree
    pv_tol: float = 1e-10
    pv_min_panels: int = 16
    pv_max_panels: int = 4096
    pv_nodes: int = 20
    sdp_tol: float = 1e-9
    sdp_max_iter: int = 120
    verdict_delta: float = 1e-6
    # tau values below this are reported as "<= floor"
    tau_floor: float = 1e-10

    def as_dict(self) -> dict:
        return asdict(self)


DEFAULT_NUMERICS = Numerics()

from dataclasses import dataclass

import numpy as np

from randnls.spectral import Field, IOperatorSpec, apply_I, cubic_product, l2_norm


@dataclass(frozen=True, eq=False)
class CommutatorRecord:
    H_field: Field
    l2_norm: float
    N: float
    sigma: float


def commutator_H(u: Field, spec: IOperatorSpec) -> CommutatorRecord:
    """``H = I(|u|^2 u) - |Iu|^2 Iu`` with both cubic products alias-free.

    Vanishes identically when ``u`` is band-limited to ``|xi| <= N/3``.
    """
    H = apply_I(cubic_product(u), spec) - cubic_product(apply_I(u, spec))
    return CommutatorRecord(H, l2_norm(H), spec.N, spec.sigma)


def commutator_decay(u: Field, specs):
    """``(N, ||H(N)||_{L^2})`` pairs for a list of truncation levels."""
    return np.array([(s.N, commutator_H(u, s).l2_norm) for s in specs])

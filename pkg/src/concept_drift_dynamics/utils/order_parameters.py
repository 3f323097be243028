"""Order parameters of a two-vector system: the shared macroscopic state type."""

import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .errors import InconsistentStateError

# Component order used by every array representation (ODE state vectors, CSV columns).
STATE_FIELDS = ("R11", "R12", "R21", "R22", "Q11", "Q12", "Q22")

GRAM_TOLERANCE = 1e-10


@dataclass(frozen=True)
class OrderParameterState:
    """Overlaps ``R_im = w_i . B_m`` and ``Q_ik = w_i . w_k`` of two adaptive vectors.

    ``B_m`` are cluster centres (LVQ) or teacher vectors (SCM). ``Q21`` equals
    ``Q12`` and is not stored.
    """

    R11: float
    R12: float
    R21: float
    R22: float
    Q11: float
    Q12: float
    Q22: float

    # ------------------------------------------------------------------
    # Conversions
    # ------------------------------------------------------------------

    @classmethod
    def from_array(cls, values):
        """Build a state from a length-7 sequence in ``STATE_FIELDS`` order."""
        values = np.asarray(values, dtype=float)
        if values.shape != (len(STATE_FIELDS),):
            raise InconsistentStateError(f"Expected {len(STATE_FIELDS)} order parameters, got shape {values.shape}")
        return cls(*(float(v) for v in values))

    @classmethod
    def from_matrices(cls, R, Q):
        """Build a state from a 2x2 overlap matrix ``R[i, m]`` and a symmetric ``Q[i, k]``."""
        R = np.asarray(R, dtype=float)
        Q = np.asarray(Q, dtype=float)
        return cls(R[0, 0], R[0, 1], R[1, 0], R[1, 1], Q[0, 0], Q[0, 1], Q[1, 1])

    @classmethod
    def symmetric(cls, r, q, c):
        """State of the symmetric subspace: ``R_im = r``, ``Q11 = Q22 = q``, ``Q12 = c``."""
        return cls(r, r, r, r, q, c, q)

    def as_array(self):
        return np.array(astuple(self), dtype=float)

    @property
    def R(self):
        return np.array([[self.R11, self.R12], [self.R21, self.R22]])

    @property
    def Q(self):
        return np.array([[self.Q11, self.Q12], [self.Q12, self.Q22]])

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    # ------------------------------------------------------------------
    # Invariants
    # ------------------------------------------------------------------

    def gram_violation(self):
        """Amount by which the state fails Gram consistency (0 for a consistent state)."""
        return max(0.0, -self.Q11, -self.Q22, self.Q12**2 - self.Q11 * self.Q22)

    def check(self, tolerance=GRAM_TOLERANCE):
        """Raise ``InconsistentStateError`` unless the state is finite and Gram-consistent."""
        values = astuple(self)
        if not all(math.isfinite(v) for v in values):
            raise InconsistentStateError(f"Non-finite order parameters: {self}")
        violation = self.gram_violation()
        if violation > tolerance:
            raise InconsistentStateError(f"Order parameters violate Gram consistency by {violation:.3e}: {self}")
        return self

    def is_valid(self, tolerance=GRAM_TOLERANCE):
        try:
            self.check(tolerance)
        except InconsistentStateError:
            return False
        return True

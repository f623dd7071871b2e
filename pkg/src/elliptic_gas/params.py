from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class EnsembleParams:
    """Parameters of the elliptic ensemble.

    ``t`` is the asymmetry of the potential |z|^2 - t Re(z^2), ``T`` the total
    mass (droplet area / pi), ``n`` the particle count.  The inverse
    temperature scale ``N`` defaults to ``n / T``.
    """

    t: float
    T: float
    n: int
    N: float = field(default=None)

    def __post_init__(self):
        if not 0.0 <= self.t < 1.0:
            raise ValueError(f"t must satisfy 0 <= t < 1, got t={self.t}")
        if not self.T > 0.0:
            raise ValueError(f"T must be positive, got T={self.T}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got n={self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "T", float(self.T))
        if self.N is None:
            object.__setattr__(self, "N", self.n / self.T)
        elif abs(self.N * self.T - self.n) >= 1e-12 * self.n:
            raise ValueError(f"N*T must equal n: N={self.N}, T={self.T}, n={self.n}")
        else:
            object.__setattr__(self, "N", float(self.N))

    def with_n(self, n: int) -> "EnsembleParams":
        """Same t and T with a different particle count."""
        return EnsembleParams(self.t, self.T, n)

    def as_dict(self) -> dict:
        return {"t": self.t, "T": self.T, "n": self.n, "N": self.N}

"""Selection and verification of the iteration constants.

The oscillation-decay iteration needs a cylinder contraction ratio rho and a
Hoelder exponent delta chosen against three measured inputs: L (supremum of
the slow velocity component in the first step), C_step (the universal
constant bounding the annulus and far-field velocity pieces in later steps)
and eta (the measured per-step oscillation improvement).  rho must satisfy

    L rho^alpha + rho <= 1/2
    -C rho^alpha log(rho) + C rho^(1+alpha) + rho <= 1/2
    rho <= 1/16

and delta is then the largest exponent with rho^delta >= max(1 - eta, 2/3)
(which forces rho^(-delta) <= 3/2 <= 2).  The closing bound of the outer-
region bookkeeping is (4 rho)^delta (3/2 - rho^delta / 2) < 1, which holds
for every rho <= 1/16 and delta > 0 because with x = rho^(delta/2) in (0, 1)
the majorant is x (3/2 - x^2 / 2), increasing on [0, 1] with maximum 1 at
x = 1.

There is no circular dependence: the build order is (L, C) -> rho -> eta
(measured by the oscillation suite) -> delta, and build_ledger enforces it.
"""

import json
from dataclasses import asdict, dataclass

import numpy as np

RHO_CAP = 1.0 / 16.0
RHO_FLOOR = 1e-12
BISECTION_RESOLUTION = 1e-12
OSC_FLOOR = 2.0 / 3.0  # floor on rho^delta from the annulus bookkeeping


class InfeasibleConstants(ValueError):
    """No admissible constant exists for the given inputs."""


def _rho_constraints(rho, L, C, alpha):
    g1 = L * rho**alpha + rho
    g2 = -C * rho**alpha * np.log(rho) + C * rho ** (1.0 + alpha) + rho
    return g1 <= 0.5, g2 <= 0.5, rho <= RHO_CAP


def rho_feasible(rho, L, C, alpha):
    return all(_rho_constraints(rho, L, C, alpha))


def choose_rho(L, C, alpha):
    """Largest rho on a dyadic-bisection grid satisfying all three bounds.

    Monotone: increasing L or C never increases the result.  Infeasibility
    (no rho above RHO_FLOOR) cannot occur for finite non-negative L, C but
    is guarded anyway.
    """
    if L < 0 or C < 0:
        raise ValueError("L and C must be non-negative")
    if not (0.0 < alpha <= 1.0):
        raise ValueError("alpha must lie in (0, 1]")
    if rho_feasible(RHO_CAP, L, C, alpha):
        return RHO_CAP
    lo, hi = RHO_FLOOR, RHO_CAP
    if not rho_feasible(lo, L, C, alpha):
        raise InfeasibleConstants(
            f"no feasible rho above {RHO_FLOOR} for L={L}, C={C}, alpha={alpha}"
        )
    while hi - lo > BISECTION_RESOLUTION:
        mid = 0.5 * (lo + hi)
        if rho_feasible(mid, L, C, alpha):
            lo = mid
        else:
            hi = mid
    assert rho_feasible(lo, L, C, alpha)
    return lo


def choose_delta(rho, eta):
    """Largest delta with rho^delta >= max(1 - eta, 2/3).

    eta <= 0 means no measured oscillation improvement, so no positive
    exponent exists.  The returned value also satisfies rho^(-delta) <= 3/2.
    """
    if not (0.0 < rho <= RHO_CAP):
        raise ValueError(f"rho must lie in (0, {RHO_CAP}]")
    if eta <= 0.0:
        raise InfeasibleConstants("eta <= 0: no contraction measured")
    if eta >= 1.0:
        eta = 1.0 - 1e-15
    target = max(1.0 - eta, OSC_FLOOR)
    delta = np.log(target) / np.log(rho)
    assert delta > 0.0
    return float(delta)


@dataclass
class ClosingInequality:
    value: float  # (4 rho)^delta (3/2 - rho^delta / 2)
    majorant: float  # rho^(delta/2) (3/2 - rho^delta / 2)
    chain_holds: bool  # (4 rho)^delta <= rho^(delta/2)
    passed: bool


def verify_closing_inequality(rho, delta):
    """Evaluate the closing polynomial bound and its majorant chain."""
    if not (0.0 < rho <= RHO_CAP):
        raise ValueError(f"rho must lie in (0, {RHO_CAP}]")
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    rd = rho**delta
    value = (4.0 * rho) ** delta * (1.5 - 0.5 * rd)
    majorant = rho ** (delta / 2.0) * (1.5 - 0.5 * rd)
    chain = (4.0 * rho) ** delta <= rho ** (delta / 2.0) * (1.0 + 1e-15)
    return ClosingInequality(
        value=float(value),
        majorant=float(majorant),
        chain_holds=bool(chain),
        passed=bool(chain and majorant < 1.0),
    )


LEDGER_CONSTRAINTS = (
    "first_step_containment",  # L rho^alpha + rho <= 1/2
    "flow_containment",  # -C rho^a log rho + C rho^(1+a) + rho <= 1/2
    "rho_cap",  # rho <= 1/16
    "oscillation_floor",  # rho^delta >= max(1 - eta, 2/3)
    "amplitude_cap",  # rho^(-delta) <= 2
)


@dataclass
class ConstantLedger:
    """All iteration constants plus per-constraint feasibility flags."""

    epsilon: float
    alpha: float
    L: float
    C_step: float
    M: float
    eta: float
    rho: float
    delta: float
    feasibility: dict

    def all_feasible(self):
        return all(self.feasibility.values())

    def to_json(self, indent=2):
        return json.dumps(asdict(self), indent=indent)


def ledger_feasibility(L, C, alpha, eta, rho, delta):
    g1, g2, g3 = _rho_constraints(rho, L, C, alpha)
    return {
        "first_step_containment": bool(g1),
        "flow_containment": bool(g2),
        "rho_cap": bool(g3),
        "oscillation_floor": bool(rho**delta >= max(1.0 - eta, OSC_FLOOR) - 1e-12),
        "amplitude_cap": bool(rho ** (-delta) <= 2.0 + 1e-12),
    }


def build_ledger(L, C, alpha, eta, M):
    """Assemble the full ledger in dependency order: (L, C) -> rho -> delta.

    eta must come from a measurement (the oscillation suite); it is consumed
    only after rho exists, which makes the no-circularity ordering explicit.
    """
    for name, v in (("L", L), ("C", C), ("M", M)):
        if not np.isfinite(v) or v < 0:
            raise ValueError(f"{name} must be finite and non-negative")
    rho = choose_rho(L, C, alpha)
    delta = choose_delta(rho, eta)
    closing = verify_closing_inequality(rho, delta)
    feas = ledger_feasibility(L, C, alpha, eta, rho, delta)
    feas["closing_inequality"] = closing.passed
    return ConstantLedger(
        epsilon=1.0 - alpha,
        alpha=alpha,
        L=float(L),
        C_step=float(C),
        M=float(M),
        eta=float(eta),
        rho=float(rho),
        delta=float(delta),
        feasibility=feas,
    )

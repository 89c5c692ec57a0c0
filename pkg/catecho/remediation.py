"""Guidance for failed validation checks, looked up by check code."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional


@dataclass(frozen=True)
class CheckGuide:
    code_pattern: str
    title: str
    why: str
    fixes: List[str]


CHECK_GUIDES: List[CheckGuide] = [
    CheckGuide(
        code_pattern="ORACLE_EQUIVALENCE",
        title="Numeric and analytic impulsive states disagree",
        why="With the kinetic term off the propagator must reproduce the closed-form cat state point by point.",
        fixes=[
            "Make sure the grid covers the momentum F*tau reached on the excited surface (raise grid.n).",
            "Keep pulse.phi inside [0, 2pi]; areas outside the range are rejected elsewhere.",
            "Re-run `catecho validate` after changing the grid.",
        ],
    ),
    CheckGuide(
        code_pattern="COHERENT_PERIOD",
        title="Coherent state does not return after one period",
        why="A displaced harmonic ground state must come back to itself after 2pi/Omega.",
        fixes=[
            "Increase grid.n so dx resolves sigma_x/4 with room for the displacement.",
            "Check that model.m and model.omega are in the intended units.",
        ],
    ),
    CheckGuide(
        code_pattern="STEP_CONVERGENCE",
        title="Step halving does not show second-order convergence",
        why="Halving dt must cut the deviation from a dt/4 reference by at least 3.5x.",
        fixes=[
            "Remove schedule.dt (or set it to auto) so the step sits below the stability bound.",
            "If dt is explicit, pick a value below 1/20 of the fastest period (kinetic band included).",
        ],
    ),
    CheckGuide(
        code_pattern="CAT_WEIGHTS",
        title="Cat-state component weights are off",
        why="After two pi/3 pulses the ground components at p=0 and p=F*tau must carry 0.75 and 0.25.",
        fixes=[
            "Use a nonzero model.force so the components separate in momentum.",
            "Raise grid.n if the momentum lattice does not reach F*tau.",
        ],
    ),
    CheckGuide(
        code_pattern="GRID_WRAPAROUND",
        title="Density reached the lattice edge",
        why="Probability at the periodic boundary re-enters on the other side and fakes echoes.",
        fixes=[
            "Set grid.extent to auto, or enlarge it to cover the classical excursion F*T^2/(2m).",
            "Raise grid.n so the momentum lattice covers the band |F|*T + 6 sigma_p.",
        ],
    ),
    CheckGuide(
        code_pattern="NORM_DRIFT",
        title="Norm drifts over long propagation",
        why="Every split step is unitary; drift above 1e-9 over 1e4 steps points to a broken grid.",
        fixes=[
            "Check that the grid resolves the packet (dx <= sigma_x/4).",
            "Avoid extreme parameter ratios that push phases beyond double precision.",
        ],
    ),
    CheckGuide(
        code_pattern="ECHO_TIMING",
        title="Echo peak missing or misplaced",
        why="In the impulsive limit the echo peaks at t0 + tau within two steps.",
        fixes=[
            "Use pulse areas away from 0 and 2pi; the echo amplitude scales as sin^3(phi/2)cos(phi/2).",
            "Use a nonzero model.force.",
        ],
    ),
]


def get_guide(code: str) -> Optional[CheckGuide]:
    """Return the guide for a check code (case-insensitive)."""
    normalized = code.strip().upper()
    if not normalized:
        return None
    guides: Dict[str, CheckGuide] = {guide.code_pattern: guide for guide in CHECK_GUIDES}
    return guides.get(normalized)

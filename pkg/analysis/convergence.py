"""
Convergence of the smoothed-risk gradients to the generalized gradient.
"""

import logging
from typing import Iterable

import numpy as np

from models import Architecture, ConvergenceReport, ConvergenceStep, EmpiricalMeasure
from numerics.activation import ApproximantFamily, blending_function
from numerics.gradients import backprop_generalized, backprop_smoothed
from numerics.network import check_theta
from numerics.risk import LossFunction, risk, risk_smoothed

logger = logging.getLogger(__name__)


def doubling_schedule(max_exponent: int = 16) -> list[int]:
    """1, 2, 4, ..., 2^max_exponent."""
    return [2 ** e for e in range(max_exponent + 1)]


def check_schedule(n_schedule: Iterable[int]) -> list[int]:
    schedule = [int(n) for n in n_schedule]
    if not schedule:
        raise ValueError("The n schedule is empty")
    if schedule[0] < 1:
        raise ValueError(f"Approximant indices must be positive, got {schedule[0]}")
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError(f"The n schedule must be strictly increasing: {schedule}")
    return schedule


def stabilization_index(history: list[ConvergenceStep], limit: np.ndarray):
    """Smallest scheduled n from which every recorded gradient equals the limit bit for bit."""
    index = None
    for step in reversed(history):
        if not np.array_equal(step.gradient, limit):
            break
        index = step.n
    return index


def convergence_experiment(theta, arch: Architecture, measure: EmpiricalMeasure,
                           loss: LossFunction, fam: ApproximantFamily,
                           n_schedule) -> ConvergenceReport:
    """Evaluate grad L_n along the schedule against G(theta).

    Each history entry carries ||grad L_n - G|| and |L_n - L|. Missing
    stabilization is reported as a finding.
    """
    theta = check_theta(theta, arch)
    schedule = check_schedule(n_schedule)
    limit = backprop_generalized(theta, arch, measure, loss, fam.base)
    base_risk = risk(theta, arch, measure, loss, fam.base)

    history = []
    for n in schedule:
        gradient = backprop_smoothed(theta, arch, measure, loss, fam, n)
        history.append(ConvergenceStep(
            n=n,
            gradient=gradient,
            discrepancy=float(np.linalg.norm(gradient - limit)),
            risk_gap=abs(risk_smoothed(theta, arch, measure, loss, fam, n) - base_risk),
        ))

    report = ConvergenceReport(theta=theta, history=history,
                               stabilization_index=stabilization_index(history, limit),
                               limit=limit)
    if report.stabilization_index is None:
        report.findings.append(f"no stabilization within the schedule up to n={schedule[-1]}")
        logger.warning(f"{fam.base.name}: {report.findings[-1]}")
    else:
        logger.debug(f"{fam.base.name}: stabilized at n={report.stabilization_index}")
    return report


def blending_limits(theta, arch: Architecture, measure: EmpiricalMeasure, loss: LossFunction,
                    fam: ApproximantFamily, n_schedule,
                    etas=('smoothstep', 'bump')) -> dict[str, ConvergenceReport]:
    """Run the same experiment once per blending function."""
    reports = {}
    for name in etas:
        variant = ApproximantFamily(fam.base, eta=blending_function(name), delta=fam.delta)
        reports[name] = convergence_experiment(theta, arch, measure, loss, variant, n_schedule)
    return reports


def limits_agree(reports: dict[str, ConvergenceReport]) -> bool:
    """True when every report stabilized and all stabilized gradients are identical."""
    reports = list(reports.values())
    if not all(r.stabilized for r in reports):
        return False
    final = [r.history[-1].gradient for r in reports]
    return all(np.array_equal(final[0], g) for g in final[1:])

"""Shared fixtures.

The expensive reference runs (critical two-body collapses, the symmetric
triple collapse, and the seeded random suite) are computed once per session
and reused by the module tests and the acceptance suite.
"""

import numpy as np
import pytest

from flocksim import SingularKernel, SolverConfig, make_system, solve_piecewise
from flocksim.cli import generate_scenario

ALPHAS = (0.25, 0.5, 0.75)
SUITE_SEEDS = tuple(range(1, 21))
SUITE_BOX = 1.0
SUITE_SPEED = 1.0
SUITE_T_END = 5.0


def suite_params(seed):
    """Deterministic scenario shape for one seed of the random suite."""
    n = 2 + (seed - 1) % 7
    d = 1 + (seed - 1) % 3
    alpha = ALPHAS[(seed - 1) % 3]
    return n, d, alpha


def critical_two_body(alpha, t_end=2.0):
    """Two particles closing at exactly the critical rate from separation 1."""
    half = 1.0 / (1.0 - alpha)  # per-particle speed; relative rate is 2*Psi(1)
    x = np.array([[-0.5], [0.5]])
    v = np.array([[half], [-half]])
    system = make_system(x, v, SingularKernel(alpha=alpha))
    return solve_piecewise(system, SolverConfig(t_end=t_end))


@pytest.fixture(scope="session")
def critical_runs():
    """One critical collapse per exponent, keyed by alpha."""
    return {alpha: critical_two_body(alpha) for alpha in ALPHAS}


@pytest.fixture(scope="session")
def supercritical_run():
    """Separation rate -5 from separation 1 at alpha=0.5: rebound at speed 1."""
    x = np.array([[-0.5], [0.5]])
    v = np.array([[2.5], [-2.5]])
    system = make_system(x, v, SingularKernel(alpha=0.5))
    return solve_piecewise(system, SolverConfig(t_end=2.0))


@pytest.fixture(scope="session")
def subcritical_run():
    """Separation rate -3 from separation 1 at alpha=0.5: stalls at 0.0625."""
    x = np.array([[-0.5], [0.5]])
    v = np.array([[1.5], [-1.5]])
    system = make_system(x, v, SingularKernel(alpha=0.5))
    return solve_piecewise(system, SolverConfig(t_end=20.0))


@pytest.fixture(scope="session")
def triple_run():
    """Symmetric three-body line collapse: all three meet at once.

    With the outer pair closing on the midpoint particle, the half-gap phi
    obeys phi'' = -2*kappa*phi'*psi(phi) with kappa = (1 + 2**(1-alpha))/3,
    so the critical outer speed is 2*kappa*Psi(1) and the collapse lands at
    t = (1-alpha)/(2*kappa*alpha).
    """
    alpha = 0.5
    kappa = (1.0 + 2.0 ** (1.0 - alpha)) / 3.0
    u = 2.0 * kappa / (1.0 - alpha)
    x = np.array([[-1.0], [0.0], [1.0]])
    v = np.array([[u], [0.0], [-u]])
    system = make_system(x, v, SingularKernel(alpha=alpha))
    traj = solve_piecewise(system, SolverConfig(t_end=2.0))
    t_star = (1.0 - alpha) / (2.0 * kappa * alpha)
    return traj, t_star


@pytest.fixture(scope="session")
def headon_run():
    """Symmetric four-body head-on: two same-velocity pairs colliding."""
    x = np.array([[-1.0], [-0.9], [0.9], [1.0]])
    v = np.array([[3.0], [3.0], [-3.0], [-3.0]])
    system = make_system(x, v, SingularKernel(alpha=0.5))
    return solve_piecewise(system, SolverConfig(t_end=5.0))


@pytest.fixture(scope="session")
def random_suite():
    """Twenty seeded scenarios cycling over sizes, dimensions, exponents."""
    records = []
    for seed in SUITE_SEEDS:
        n, d, alpha = suite_params(seed)
        x, v = generate_scenario(n, d, seed, SUITE_BOX, SUITE_SPEED)
        system = make_system(x, v, SingularKernel(alpha=alpha))
        traj = solve_piecewise(system, SolverConfig(t_end=SUITE_T_END))
        records.append({"seed": seed, "n": n, "d": d, "alpha": alpha, "traj": traj})
    return records


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One ACCEPTANCE <k> PASS|FAIL line per numbered acceptance check."""
    verdicts = {}
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py::test_criterion_" not in nodeid:
                continue
            num = int(nodeid.split("::")[-1].split("_")[2])
            ok = status == "passed" and verdicts.get(num, "PASS") == "PASS"
            verdicts[num] = "PASS" if ok else "FAIL"
    if verdicts:
        terminalreporter.write_line("")
        for num in sorted(verdicts):
            terminalreporter.write_line(f"ACCEPTANCE {num} {verdicts[num]}")

"""Closed-form fidelity bounds, numerical worst cases and CNOT threshold sweeps."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import brentq, minimize
from scipy.special import ndtri
from scipy.stats import qmc

from .errors import NoCrossingInRange, OutOfRangeDelta
from .holonomy import ground_aux_restriction, single_qubit_gate, u2_evolution
from .noise import USZ_THETA, dynamic_iswap_with_area_error, single_qubit_with_area_error

THRESHOLD = 0.994
CNOT_STEPS = {"holonomic": 10, "dynamic": 7}
# Values quoted alongside the formula results for comparison.
QUOTED_CROSSINGS = {"holonomic": 0.152, "dynamic": 0.041}
QUOTED_HOLONOMIC_CNOT_AT_0041 = 0.999993
HADAMARD_ANGLES = (math.pi / 4, math.pi)
GATE_KINDS = ("usz", "single", "iswap", "usz_sigma_x")


# --- closed forms -------------------------------------------------------------

def f_h_usz(delta: float) -> float:
    """Lower bound ``1 - delta^4 / (1 - delta^2 + delta^4)`` of the holonomic ``U_sz``.

    Raises:
        OutOfRangeDelta: if ``|delta| >= 1``.
    """
    if not abs(delta) < 1:
        raise OutOfRangeDelta(f"f_h_usz needs |delta| < 1, got {delta!r}")
    d2 = delta * delta
    return 1.0 - d2 * d2 / (1.0 - d2 + d2 * d2)


def f_d_iswap(delta: float) -> float:
    """Lower bound ``1 - delta^2 / 2`` of the dynamic iSWAP."""
    return 1.0 - 0.5 * delta * delta


def f_h_single(delta: float) -> float:
    """Lower bound ``1 - delta^4 / 64`` of the holonomic single-qubit gate."""
    return 1.0 - delta**4 / 64.0


def f_sigma_x(delta: float) -> float:
    """``U_sz`` bound after a ``sigma_x`` auxiliary reset: ``(1 - 5 d^4/12) / (1 - d^4/48)``.

    Expands to ``1 - 19 delta^4 / 48`` and stays in ``[0, 1]`` for ``|delta| < 1``.
    """
    d4 = delta**4
    return (1.0 - 5.0 * d4 / 12.0) / (1.0 - d4 / 48.0)


def cnot_fidelity(delta: float, kind: str = "holonomic") -> float:
    """Balanced-noise CNOT bound: ``f_h_usz^10`` (holonomic) or ``f_d_iswap^7`` (dynamic)."""
    if kind == "holonomic":
        return f_h_usz(delta) ** CNOT_STEPS[kind]
    if kind == "dynamic":
        return f_d_iswap(delta) ** CNOT_STEPS[kind]
    raise ValueError(f"kind must be 'holonomic' or 'dynamic', got {kind!r}")


@dataclass(frozen=True)
class FidelityReport:
    """All closed-form fidelities at one area error."""

    delta: float
    f_h_usz: float
    f_d_iswap: float
    f_h_single: float
    f_sigma_x: float
    f_cnot_holonomic: float
    f_cnot_dynamic: float
    f_numeric_min: Optional[float] = None

    @classmethod
    def at(cls, delta: float, f_numeric_min: Optional[float] = None) -> "FidelityReport":
        return cls(
            delta=float(delta),
            f_h_usz=f_h_usz(delta),
            f_d_iswap=f_d_iswap(delta),
            f_h_single=f_h_single(delta),
            f_sigma_x=f_sigma_x(delta),
            f_cnot_holonomic=cnot_fidelity(delta, "holonomic"),
            f_cnot_dynamic=cnot_fidelity(delta, "dynamic"),
            f_numeric_min=f_numeric_min,
        )

    def as_dict(self) -> dict:
        return asdict(self)


# --- threshold sweep ----------------------------------------------------------

class ThresholdScan(NamedTuple):
    """Crossings of the CNOT bounds with :data:`THRESHOLD` plus the sampled curve."""

    delta_star_holonomic: float
    delta_star_dynamic: float
    curve: list

    def quoted_relative_gap(self, kind: str) -> float:
        """Relative difference between the formula crossing and the quoted value."""
        star = self.delta_star_holonomic if kind == "holonomic" else self.delta_star_dynamic
        return (star - QUOTED_CROSSINGS[kind]) / QUOTED_CROSSINGS[kind]


def _crossing(kind: str, grid: np.ndarray) -> float:
    gap = np.array([cnot_fidelity(d, kind) - THRESHOLD for d in grid])
    change = np.nonzero(np.sign(gap[:-1]) != np.sign(gap[1:]))[0]
    if gap[0] == 0.0:
        return float(grid[0])
    if len(change) == 0:
        raise NoCrossingInRange(
            f"{kind} CNOT bound does not cross {THRESHOLD} on [{grid[0]}, {grid[-1]}]"
        )
    i = int(change[0])
    return float(brentq(lambda d: cnot_fidelity(d, kind) - THRESHOLD, grid[i], grid[i + 1], xtol=1e-14))


def threshold_scan(delta_min: float, delta_max: float, resolution: int) -> ThresholdScan:
    """Sample both CNOT bounds and bisect their crossings with the 0.994 threshold.

    Raises:
        ValueError: if ``delta_min >= delta_max`` or ``resolution < 10``.
        OutOfRangeDelta: if the range leaves ``|delta| < 1``.
        NoCrossingInRange: if either bound stays on one side of the threshold.
    """
    if not delta_min < delta_max:
        raise ValueError("delta_min must be smaller than delta_max")
    if resolution < 10:
        raise ValueError("resolution must be at least 10")
    grid = np.linspace(delta_min, delta_max, int(resolution))
    curve = [FidelityReport.at(float(d)) for d in grid]
    return ThresholdScan(_crossing("holonomic", grid), _crossing("dynamic", grid), curve)


# --- numerical worst cases ----------------------------------------------------

def branch_operators(gate_kind: str, delta: float, theta: float = None, beta: float = None) -> tuple:
    """Ideal operator and heralded branch operators on the computational register.

    For a normalized input ``a`` the branch ``K`` leaves ``K a / |K a|``; the gate
    fidelity of that branch is ``|<U a, K a>| / |K a|``. Auxiliary-assisted gates
    keep the ``|0>`` outcome of a ``sigma_z`` auxiliary measurement, or both
    outcomes of a ``sigma_x`` measurement followed by a reset.

    Returns:
        ``(ideal, branches)`` with ``branches`` a tuple of square matrices.
    """
    if gate_kind in ("usz", "usz_sigma_x"):
        ideal = ground_aux_restriction(u2_evolution(USZ_THETA, math.pi))
        full = u2_evolution(USZ_THETA, math.pi + delta)
        k0, k1 = full[0::2, 0::2], full[1::2, 0::2]
        if gate_kind == "usz":
            return ideal, (k0,)
        return ideal, (k0 + k1, k0 - k1)
    if gate_kind == "iswap":
        return dynamic_iswap_with_area_error(0.0), (dynamic_iswap_with_area_error(delta),)
    if gate_kind == "single":
        theta = HADAMARD_ANGLES[0] if theta is None else theta
        beta = HADAMARD_ANGLES[1] if beta is None else beta
        full = single_qubit_with_area_error(delta, theta, beta)
        return single_qubit_gate(theta, beta, 0), (full[:2, :2],)
    raise ValueError(f"gate_kind must be one of {GATE_KINDS}, got {gate_kind!r}")


def branch_fidelities(ideal: np.ndarray, branches: tuple, states: np.ndarray) -> np.ndarray:
    """Worst branch fidelity for each row of ``states`` (normalized inputs)."""
    states = np.atleast_2d(states)
    target = states @ ideal.T
    worst = np.ones(len(states))
    for k in branches:
        out = states @ k.T
        norm = np.linalg.norm(out, axis=1)
        overlap = np.abs(np.sum(target.conj() * out, axis=1))
        with np.errstate(invalid="ignore", divide="ignore"):
            f = np.where(norm > 0, overlap / norm, 1.0)
        worst = np.minimum(worst, f)
    return np.clip(worst, 0.0, 1.0)


def _to_states(x: np.ndarray) -> np.ndarray:
    half = x.shape[-1] // 2
    z = x[..., :half] + 1j * x[..., half:]
    return z / np.linalg.norm(z, axis=-1, keepdims=True)


def _canonical_phase(a: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(a)))
    return a * np.exp(-1j * np.angle(a[k]))


@dataclass(frozen=True, eq=False)
class WorstCase:
    """Result of a worst-case fidelity search.

    Attributes:
        fidelity: Minimum fidelity found.
        state: Minimizing normalized input, phase fixed so the largest amplitude is real.
        grid_points: Number of low-discrepancy points evaluated.
    """

    fidelity: float
    state: np.ndarray
    grid_points: int


def worst_case_search(
    gate_kind: str,
    delta: float,
    samples: int = 16384,
    theta: float = None,
    beta: float = None,
    refine: int = 4,
    seed: int = 0,
) -> WorstCase:
    """Minimize the gate fidelity over input states.

    A scrambled Sobol grid over Gaussian-mapped amplitudes (uniform on the unit
    sphere) is evaluated first; the ``refine`` best points seed Nelder-Mead runs.

    Raises:
        ValueError: if ``samples < 100`` or ``gate_kind`` is unknown.
    """
    if samples < 100:
        raise ValueError("samples must be at least 100")
    ideal, branches = branch_operators(gate_kind, delta, theta, beta)
    dim = ideal.shape[0]
    sobol = qmc.Sobol(d=2 * dim, scramble=True, seed=seed)
    u = sobol.random(2 ** int(math.ceil(math.log2(samples))))
    x = ndtri(np.clip(u, 1e-12, 1 - 1e-12))
    f = branch_fidelities(ideal, branches, _to_states(x))
    best_x, best_f = None, np.inf
    for i in np.argsort(f)[:refine]:
        res = minimize(
            lambda v: float(branch_fidelities(ideal, branches, _to_states(v[None]))[0]),
            x[i],
            method="Nelder-Mead",
            options={"xatol": 1e-8, "fatol": 1e-15, "maxiter": 20000, "maxfev": 40000},
        )
        if res.fun < best_f:
            best_x, best_f = res.x, float(res.fun)
    if f.min() < best_f:
        best_x, best_f = x[int(np.argmin(f))], float(f.min())
    return WorstCase(best_f, _canonical_phase(_to_states(best_x[None])[0]), len(x))


def numeric_worst_case_fidelity(gate_kind: str, delta: float, samples: int = 16384, **kwargs) -> float:
    """Minimum state fidelity of the noisy gate over inputs; see :func:`worst_case_search`."""
    return worst_case_search(gate_kind, delta, samples, **kwargs).fidelity


def closed_form_bound(gate_kind: str, delta: float) -> float:
    """Closed-form lower bound matching each ``gate_kind`` of the numeric search."""
    return {
        "usz": f_h_usz,
        "single": f_h_single,
        "iswap": f_d_iswap,
        "usz_sigma_x": f_sigma_x,
    }[gate_kind](delta)

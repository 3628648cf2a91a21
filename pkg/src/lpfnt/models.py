"""Benchmark models for the sensitivity pipeline.

Three engineering response surfaces over box domains: an analytic mid-band
voltage gain (6 inputs), an analytic piston cycle time (7 inputs), and a
maximum-power solar cell whose current-voltage relation is implicit
(5 inputs).  Each model evaluates vectorized over batches of points, both
in physical coordinates and on the reference cube [-1, 1]^m through the
affine box maps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "BoxDomain",
    "BenchmarkModel",
    "to_reference",
    "from_reference",
    "otl_circuit",
    "piston",
    "solar_cell",
    "registry",
    "get_model",
    "batch_evaluate_csv",
]


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box with named coordinates."""

    lower: np.ndarray
    upper: np.ndarray
    names: tuple

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=np.float64)
        hi = np.asarray(self.upper, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower/upper must be 1-d arrays of equal length")
        if np.any(hi <= lo):
            raise ValueError("upper bounds must exceed lower bounds")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def m(self) -> int:
        return self.lower.shape[0]


def to_reference(x: np.ndarray, domain: BoxDomain) -> np.ndarray:
    """Affine map from the physical box onto [-1, 1]^m (last axis)."""
    x = np.asarray(x, dtype=np.float64)
    return 2.0 * (x - domain.lower) / (domain.upper - domain.lower) - 1.0


def from_reference(u: np.ndarray, domain: BoxDomain) -> np.ndarray:
    """Affine map from [-1, 1]^m back into the physical box (last axis)."""
    u = np.asarray(u, dtype=np.float64)
    return domain.lower + 0.5 * (u + 1.0) * (domain.upper - domain.lower)


@dataclass(frozen=True)
class BenchmarkModel:
    """A scalar response over a box domain, vectorized over sample batches."""

    name: str
    domain: BoxDomain
    evaluator: Callable[[np.ndarray], np.ndarray]

    @property
    def m(self) -> int:
        return self.domain.m

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Response at physical points, shape (..., m) -> (...)."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.m:
            raise ValueError(f"{self.name} expects {self.m} coordinates, got {x.shape[-1]}")
        return self.evaluator(x)

    def evaluate_reference(self, u: np.ndarray) -> np.ndarray:
        """Response at reference-cube points (the pipeline's view of the model)."""
        return self.evaluate(from_reference(u, self.domain))


# ---------------------------------------------------------------------------
# mid-band voltage gain (output transformerless push-pull circuit)
# ---------------------------------------------------------------------------

def _otl_gain(x: np.ndarray) -> np.ndarray:
    r_b1, r_b2, r_f, r_c1, r_c2, beta = np.moveaxis(x, -1, 0)
    v_b1 = 12.0 * r_b2 / (r_b1 + r_b2)
    bc = beta * (r_c2 + 9.0)
    denom = bc + r_f
    return ((v_b1 + 0.74) * bc / denom
            + 11.35 * r_f / denom
            + 0.74 * r_f * bc / (denom * r_c1))


def otl_circuit() -> BenchmarkModel:
    """Mid-band gain of a push-pull transistor circuit, 6 inputs.

    Resistances in kilo-ohm, current gain dimensionless.
    """
    domain = BoxDomain(
        lower=np.array([50.0, 25.0, 0.5, 1.2, 0.25, 50.0]),
        upper=np.array([150.0, 70.0, 3.0, 2.5, 1.2, 300.0]),
        names=("R_b1", "R_b2", "R_f", "R_c1", "R_c2", "beta"),
    )
    return BenchmarkModel(name="otl", domain=domain, evaluator=_otl_gain)


# ---------------------------------------------------------------------------
# piston cycle time
# ---------------------------------------------------------------------------

def _piston_cycle_time(x: np.ndarray) -> np.ndarray:
    mass, area, v0, k, p0, t_a, t0 = np.moveaxis(x, -1, 0)
    a = p0 * area + 19.62 * mass - k * v0 / area
    gas = p0 * v0 / t0 * t_a
    v = area / (2.0 * k) * (np.sqrt(a * a + 4.0 * k * gas) - a)
    return 2.0 * math.pi * np.sqrt(mass / (k + area * area * gas / (v * v)))


def piston() -> BenchmarkModel:
    """Cycle time of a gas-driven piston, 7 inputs (SI units)."""
    domain = BoxDomain(
        lower=np.array([30.0, 0.005, 0.002, 1000.0, 90000.0, 290.0, 340.0]),
        upper=np.array([60.0, 0.020, 0.010, 5000.0, 110000.0, 296.0, 360.0]),
        names=("M", "S", "V_0", "k", "P_0", "T_a", "T_0"),
    )
    return BenchmarkModel(name="piston", domain=domain, evaluator=_piston_cycle_time)


# ---------------------------------------------------------------------------
# solar cell maximum power
# ---------------------------------------------------------------------------

_SOLAR_N_S = 1.0       # cells in series
_SOLAR_V_TH = 2.585e-2  # thermal voltage [V]
_EXP_CLIP = 700.0       # keeps exp() finite while iterates wander


def _diode_current(i: np.ndarray, v: np.ndarray, i_l, i_s, a, r_s, r_p):
    """Implicit-equation residual g(I) = rhs(I) - I, strictly decreasing in I."""
    z = np.minimum((v + i * r_s) / a, _EXP_CLIP)
    return i_l - i_s * np.expm1(z) - (v + i * r_s) / r_p - i


def _solve_current(v, i_l, i_s, a, r_s, r_p):
    """Current I(V): safeguarded Newton on the monotone residual.

    Newton from the explicit no-series-resistance guess, each step clipped
    into a bisection bracket [-2 I_L, 2 I_L] that shrinks by the residual
    sign, so the iteration cannot escape or stall; residual tolerance
    1e-12 relative to the photocurrent scale.
    """
    lo = -2.0 * i_l * np.ones_like(v)
    hi = 2.0 * i_l * np.ones_like(v)
    i = np.clip(i_l - i_s * np.expm1(np.minimum(v / a, _EXP_CLIP)) - v / r_p, lo, hi)
    tol = 1e-12 * np.maximum(1.0, np.abs(i_l))
    for _ in range(80):
        g = _diode_current(i, v, i_l, i_s, a, r_s, r_p)
        if np.all(np.abs(g) <= tol):
            break
        z = np.minimum((v + i * r_s) / a, _EXP_CLIP)
        dg = -i_s * np.exp(z) * r_s / a - r_s / r_p - 1.0
        lo = np.where(g > 0.0, i, lo)  # g decreasing: positive residual -> root is right
        hi = np.where(g < 0.0, i, hi)
        step = i - g / dg
        mid = 0.5 * (lo + hi)
        inside = (step > lo) & (step < hi) & np.isfinite(step)
        i = np.where(inside, step, mid)
    return i


def _open_circuit_voltage(i_l, i_s, a, r_p):
    """Root of I(V) = 0; bisection on the strictly decreasing zero-current
    residual over [0, a*log1p(I_L/I_S)]."""
    lo = np.zeros_like(i_l)
    hi = a * np.log1p(i_l / i_s)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        h = i_l - i_s * np.expm1(np.minimum(mid / a, _EXP_CLIP)) - mid / r_p
        lo = np.where(h > 0.0, mid, lo)
        hi = np.where(h <= 0.0, mid, hi)
    return 0.5 * (lo + hi)


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_SCAN_POINTS = 64
_GOLDEN_ITERS = 48  # shrinks the scan bracket below 1e-10 * V_oc


def _solar_max_power(x: np.ndarray) -> np.ndarray:
    shape = x.shape[:-1]
    flat = x.reshape(-1, 5)
    i_sc, log_i_s, n_ideal, r_s, r_p = flat.T
    i_s = np.exp(log_i_s)
    a = _SOLAR_N_S * n_ideal * _SOLAR_V_TH
    i_l = (i_sc + i_s * np.expm1(i_sc * r_s / a) + i_sc * r_s / r_p)

    def power(v):
        return _solve_current(v, i_l, i_s, a, r_s, r_p) * v

    v_oc = _open_circuit_voltage(i_l, i_s, a, r_p)
    # coarse scan locates the (numerically unimodal) peak, golden-section
    # refines inside the bracketing pair of scan cells
    fractions = np.linspace(0.0, 1.0, _SCAN_POINTS)
    grid = v_oc[:, None] * fractions[None, :]
    # power() expects parameter arrays aligned with v; evaluate column-wise
    p_grid = np.empty_like(grid)
    for j in range(_SCAN_POINTS):
        p_grid[:, j] = power(grid[:, j])
    best = np.argmax(p_grid, axis=1)
    span = v_oc / (_SCAN_POINTS - 1)
    lo = np.maximum(grid[np.arange(grid.shape[0]), best] - span, 0.0)
    hi = np.minimum(grid[np.arange(grid.shape[0]), best] + span, v_oc)
    c = hi - _GOLDEN * (hi - lo)
    d = lo + _GOLDEN * (hi - lo)
    fc = power(c)
    fd = power(d)
    for _ in range(_GOLDEN_ITERS):
        move_up = fc < fd
        lo = np.where(move_up, c, lo)
        hi = np.where(move_up, hi, d)
        c_new = np.where(move_up, d, hi - _GOLDEN * (hi - lo))
        d_new = np.where(move_up, lo + _GOLDEN * (hi - lo), c)
        eval_at = np.where(move_up, d_new, c_new)
        f_new = power(eval_at)
        fc, fd = np.where(move_up, fd, f_new), np.where(move_up, f_new, fc)
        c, d = c_new, d_new
    mid = 0.5 * (lo + hi)
    p_best = np.maximum(power(mid), p_grid[np.arange(grid.shape[0]), best])
    return p_best.reshape(shape)


def solar_cell() -> BenchmarkModel:
    """Maximum output power of a single-diode solar cell, 5 inputs.

    Coordinates: short-circuit current [A], log saturation current,
    ideality factor, series resistance [ohm], shunt resistance [ohm].
    The current-voltage relation is implicit; every power evaluation solves
    it with a bracketed Newton iteration and the maximum over [0, V_oc] is
    located by a 64-point scan plus golden-section refinement.
    """
    domain = BoxDomain(
        lower=np.array([0.05989, -24.54, 1.0, 0.16625, 93.75]),
        upper=np.array([0.23958, -15.33, 2.0, 0.665, 375.0]),
        names=("I_SC", "log_I_S", "n", "R_S", "R_P"),
    )
    return BenchmarkModel(name="solar", domain=domain, evaluator=_solar_max_power)


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

def registry() -> dict:
    """Name -> constructed model, the CLI's model catalogue."""
    models = (otl_circuit(), piston(), solar_cell())
    return {model.name: model for model in models}


def get_model(name: str) -> BenchmarkModel:
    models = registry()
    try:
        return models[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}, expected one of {sorted(models)}") from None


def batch_evaluate_csv(model: BenchmarkModel, points_path, values_path,
                       reference: bool = True) -> int:
    """Evaluate the model on a CSV of points (one point per row, m columns)
    and write one value per row.  Returns the number of points evaluated.

    ``reference=True`` treats the rows as reference-cube coordinates,
    otherwise as physical coordinates.
    """
    points = np.loadtxt(points_path, delimiter=",", ndmin=2)
    if points.shape[1] != model.m:
        raise ValueError(f"{model.name} expects {model.m} columns, "
                         f"got {points.shape[1]}")
    values = (model.evaluate_reference(points) if reference
              else model.evaluate(points))
    with open(values_path, "w") as fh:
        fh.write("value\n")
        for v in values:
            fh.write(f"{float(v)!r}\n")
    return points.shape[0]

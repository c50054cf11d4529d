"""Standard mollifier kernel and discrete convolution with zero extension.

The kernel J_delta(r) is proportional to exp(-1/(1 - (r/delta)^2)) on
|r| < delta and zero outside; the discrete weights are normalized so the
trapezoid quadrature of the kernel is exactly one, which makes the
discrete convolution an L2 contraction (Young's inequality).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import CellField, Grid1D, NodeField


class DeltaTooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class MollifierKernel:
    delta: float
    h: float
    weights: np.ndarray = field(repr=False)   # samples at offsets j*h, |j*h| < delta

    @property
    def half_width(self) -> int:
        return (len(self.weights) - 1) // 2

    def mass(self) -> float:
        return float(self.h * np.sum(self.weights))


def standard_mollifier(delta: float, h: float) -> MollifierKernel:
    if delta <= 0:
        raise DeltaTooLargeError(f"delta must be positive, got {delta}")
    if h <= 0:
        raise ValueError(f"grid spacing must be positive, got {h}")
    half = int(np.ceil(delta / h)) - 1
    half = max(half, 0)
    r = np.arange(-half, half + 1) * h
    w = np.exp(-1.0 / (1.0 - (r / delta) ** 2))
    total = h * w.sum()
    if total <= 0:
        raise DeltaTooLargeError(
            f"delta={delta} is below the grid resolution h={h}; no interior samples")
    w /= total
    kern = MollifierKernel(delta, h, w)
    assert abs(kern.mass() - 1.0) < 1e-10
    assert np.all(kern.weights >= 0)
    assert np.allclose(kern.weights, kern.weights[::-1])
    return kern


def _check_delta(kernel: MollifierKernel, grid: Grid1D) -> None:
    if abs(kernel.h - grid.h) > 1e-12 * grid.h:
        raise ValueError("kernel was built for a different grid spacing")
    if not kernel.delta < (grid.l2 - grid.l1) / 2.0:
        raise DeltaTooLargeError(
            f"mollifier support delta={kernel.delta} exceeds half the domain "
            f"length {(grid.l2 - grid.l1) / 2.0}")


def mollify_array(values: np.ndarray, kernel: MollifierKernel,
                  extension: str = "zero") -> np.ndarray:
    """Trapezoid-quadrature convolution h * sum_k J(x_j - x_k) u_k.

    extension='zero' follows the vanish-outside-the-domain hypothesis;
    'boundary' extends by the first/last value (used inside the
    regularized evolution so constants stay exactly invariant).
    """
    u = np.asarray(values, dtype=float)
    half = kernel.half_width
    if extension == "zero":
        padded = np.concatenate((np.zeros(half), u, np.zeros(half)))
    elif extension == "boundary":
        padded = np.concatenate((np.full(half, u[0]), u, np.full(half, u[-1])))
    else:
        raise ValueError(f"unknown extension {extension!r}")
    return kernel.h * np.convolve(padded, kernel.weights, mode="valid")


def mollify(field, grid: Grid1D, kernel: MollifierKernel):
    """J_delta * u with u extended by zero outside [l1, l2]."""
    _check_delta(kernel, grid)
    if isinstance(field, CellField):
        return CellField(mollify_array(field.values, kernel), ghost=field.ghost)
    if isinstance(field, NodeField):
        return NodeField(mollify_array(field.values, kernel))
    return mollify_array(np.asarray(field), kernel)


def mollified_gradient(field, grid: Grid1D, kernel: MollifierKernel) -> np.ndarray:
    """Divided differences of the mollified field at its own sample points:
    central in the interior, one-sided at the two boundary points."""
    _check_delta(kernel, grid)
    vals = field.values if hasattr(field, "values") else np.asarray(field)
    smooth = mollify_array(vals, kernel)
    g = np.empty_like(smooth)
    g[1:-1] = (smooth[2:] - smooth[:-2]) / (2.0 * grid.h)
    g[0] = (smooth[1] - smooth[0]) / grid.h
    g[-1] = (smooth[-1] - smooth[-2]) / grid.h
    return g

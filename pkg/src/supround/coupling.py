"""Dense couplings on product grids and their marginals.

Memory model: ``Coupling.values`` is a C-contiguous float64 array whose shape
is the tuple of factor sizes; flat positions follow row-major order (the last
coordinate varies fastest), which is also the order used in coupling files.
Values are densities with respect to the product of the factor weights, so
the mass of a coupling is ``sum(values * prod_j w_j)``.
"""

from __future__ import annotations

import csv
import json
import logging
import math

import numpy as np

from . import _kernels
from .errors import SuproundError, ValidationError
from .spaces import MarginalSpace, ProductSpace

log = logging.getLogger(__name__)

MASS_TOL = 1e-10
NEG_TOL = 1e-12


def _clean_values(values, label):
    bad = np.argwhere(~np.isfinite(values))
    if bad.size:
        idx = tuple(int(i) for i in bad[0])
        raise ValidationError(f"{label} value at index {idx} is not finite")
    low = values < -NEG_TOL
    if low.any():
        idx = tuple(int(i) for i in np.argwhere(low)[0])
        raise ValidationError(
            f"{label} value at index {idx} is {values[idx]!r} < 0"
        )
    dust = values < 0
    if dust.any():
        log.warning("clamping %d %s entries in [-%g, 0) to zero", int(dust.sum()), label, NEG_TOL)
        values = np.where(dust, 0.0, values)
    return values


class Coupling:
    """Non-negative density tensor over a :class:`ProductSpace`.

    Parameters
    ----------
    space : ProductSpace
    values : array_like
        Tensor of shape ``space.shape`` (a flat row-major vector is accepted).
    normalized : bool
        When true, the weighted mass must be 1 within ``MASS_TOL``.  Pass
        ``False`` for intermediate or scaffolding tensors.
    """

    def __init__(self, space: ProductSpace, values, normalized: bool = True):
        arr = np.array(values, dtype=float)
        if arr.shape != space.shape:
            if arr.size != int(np.prod(space.shape)):
                raise ValidationError(
                    f"coupling has {arr.size} values, expected shape {space.shape}"
                )
            arr = arr.reshape(space.shape)
        arr = np.ascontiguousarray(_clean_values(arr, "coupling"))
        arr.setflags(write=False)
        self.space = space
        self.values = arr
        self.normalized = bool(normalized)
        if self.normalized:
            mass = total_mass(self)
            if abs(mass - 1.0) > MASS_TOL:
                raise ValidationError(f"coupling mass is {mass!r}, expected 1 within {MASS_TOL}")

    @property
    def shape(self):
        return self.values.shape

    @property
    def ndim(self):
        return self.values.ndim

    def with_values(self, values, normalized=None):
        return Coupling(self.space, values, self.normalized if normalized is None else normalized)

    def __repr__(self):
        return f"Coupling(shape={self.shape}, normalized={self.normalized})"


class MarginalDensity:
    """Non-negative density on one factor space, mass 1 unless flagged."""

    def __init__(self, space: MarginalSpace, values, normalized: bool = True):
        arr = np.array(values, dtype=float).ravel()
        if arr.size != space.size:
            raise ValidationError(f"marginal has {arr.size} values, expected {space.size}")
        arr = _clean_values(arr, "marginal")
        arr.setflags(write=False)
        self.space = space
        self.values = arr
        self.normalized = bool(normalized)
        if self.normalized:
            mass = math.fsum(arr * space.weights)
            if abs(mass - 1.0) > MASS_TOL:
                raise ValidationError(f"marginal mass is {mass!r}, expected 1 within {MASS_TOL}")

    @property
    def mass(self):
        return math.fsum(self.values * self.space.weights)

    def __repr__(self):
        return f"MarginalDensity(n={self.values.size}, normalized={self.normalized})"


def _kernel_args(space, values):
    ws = [f.weights for f in space.factors]
    woff = np.concatenate([[0], np.cumsum([w.size for w in ws])[:-1]]).astype(np.int64)
    return (
        np.ascontiguousarray(values, dtype=float).ravel(),
        np.asarray(space.shape, dtype=np.int64),
        np.ascontiguousarray(np.concatenate(ws), dtype=float),
        woff,
    )


def tensor_marginals(space: ProductSpace, values):
    """Marginal vectors of a raw (possibly signed) tensor, compensated sums."""
    return _kernels.compensated_marginals(*_kernel_args(space, values))


def all_marginals(P: Coupling):
    """``[pi_0 P, ..., pi_{N-1} P]`` as plain arrays."""
    return tensor_marginals(P.space, P.values)


def marginal_projection(P: Coupling, j: int) -> MarginalDensity:
    """The ``j``-th marginal (zero-based), integrating out all other factors."""
    if not 0 <= j < P.ndim:
        raise IndexError(f"coordinate {j} out of range for {P.ndim} factors")
    vals = all_marginals(P)[j]
    return MarginalDensity(P.space.factors[j], vals, normalized=False)


def sup_distance(A, B) -> float:
    """Uniform distance between two couplings (or raw tensors) on the grid."""
    a = A.values if isinstance(A, Coupling) else np.asarray(A, dtype=float)
    b = B.values if isinstance(B, Coupling) else np.asarray(B, dtype=float)
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b)))


def tensor_mass(space: ProductSpace, values) -> float:
    first = tensor_marginals(space, values)[0]
    return math.fsum(first * space.factors[0].weights)


def total_mass(P: Coupling) -> float:
    """Weighted sum of all entries."""
    return tensor_mass(P.space, P.values)


def outer_product(space: ProductSpace, densities):
    """Tensor ``rho_1(x_1) * ... * rho_N(x_N)``."""
    out = np.ones(space.shape)
    n = space.n_factors
    for j, rho in enumerate(densities):
        vec = rho.values if isinstance(rho, MarginalDensity) else np.asarray(rho, dtype=float)
        shape = [1] * n
        shape[j] = -1
        out = out * vec.reshape(shape)
    return out


# -- file formats ---------------------------------------------------------

def coupling_to_dict(P: Coupling):
    return {
        "shape": list(P.shape),
        "order": "row-major",
        "values": P.values.ravel().tolist(),
        "normalized": P.normalized,
    }


def save_coupling(P, path):
    with open(path, "w") as fh:
        json.dump(coupling_to_dict(P), fh)


def read_tensor(path):
    """Parse a coupling file into ``(values, normalized)`` without validation."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SuproundError(f"{path}: {exc}") from exc
    for key in ("shape", "values"):
        if key not in data:
            raise ValidationError(f"{path}: missing field {key!r}")
    if data.get("order", "row-major") != "row-major":
        raise ValidationError(f"{path}: field 'order' must be 'row-major'")
    shape = tuple(int(s) for s in data["shape"])
    values = np.asarray(data["values"], dtype=float)
    if values.size != int(np.prod(shape)):
        raise ValidationError(
            f"{path}: field 'values' has {values.size} entries, shape {shape} needs {int(np.prod(shape))}"
        )
    return values.reshape(shape), bool(data.get("normalized", True))


def load_coupling(path, space: ProductSpace) -> Coupling:
    values, normalized = read_tensor(path)
    if values.shape != space.shape:
        raise ValidationError(f"{path}: field 'shape' is {values.shape}, spaces give {space.shape}")
    try:
        return Coupling(space, values, normalized)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def load_marginal(path, space: MarginalSpace, normalized=True) -> MarginalDensity:
    """Read a marginal from a two-column CSV or a rank-1 coupling file."""
    path = str(path)
    if path.endswith(".json"):
        values, normalized = read_tensor(path)
        if values.ndim != 1:
            raise ValidationError(f"{path}: a marginal file needs a shape of length 1")
    else:
        try:
            with open(path, newline="") as fh:
                rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
        except OSError as exc:
            raise SuproundError(f"{path}: {exc}") from exc
        if rows and not _is_number(rows[0][0]):
            rows = rows[1:]
        values = np.zeros(space.size)
        seen = np.zeros(space.size, dtype=bool)
        for line, row in enumerate(rows, start=1):
            try:
                i, v = int(row[0]), float(row[1])
            except (ValueError, IndexError) as exc:
                raise ValidationError(f"{path}: row {line} is not 'index,value'") from exc
            if not 0 <= i < space.size:
                raise ValidationError(f"{path}: row {line} index {i} out of range")
            values[i] = v
            seen[i] = True
        if not seen.all():
            raise ValidationError(f"{path}: no value for point index {int(np.argmin(seen))}")
    try:
        return MarginalDensity(space, values, normalized)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def save_marginal(rho, path):
    values = rho.values if isinstance(rho, MarginalDensity) else np.asarray(rho)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "value"])
        for i, v in enumerate(values):
            writer.writerow([i, repr(float(v))])


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True

"""Continuous-time LTI models, zero-order-hold discretization and streamed simulation.

A model is ``dx/dt = A x + B u``, ``y = C x + D u``. Climate inputs are hourly
samples with no defined sub-hourly shape, so inputs are held constant over each
step (zero-order hold) and the discrete update is exact for that input model.

Simulation streams outputs to a sink in blocks so that a 31-year hourly run never
materializes the full output history.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import DimensionError, DivergenceError, NumericError, SingularError

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None

__all__ = [
    "StateSpaceModel",
    "DiscreteModel",
    "expm",
    "discretize_zoh",
    "simulate",
    "dc_gain",
    "steady_state",
    "DEFAULT_BLOCK",
]

#: Rows handed to the sink per call; one year of hourly data.
DEFAULT_BLOCK = 8760

Sink = Callable[[int, np.ndarray], None]


def _as_matrix(name: str, value, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if rows is not None and arr.shape[0] != rows:
        raise DimensionError(f"{name} has {arr.shape[0]} rows, expected {rows}")
    if cols is not None and arr.shape[1] != cols:
        raise DimensionError(f"{name} has {arr.shape[1]} columns, expected {cols}")
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains non-finite entries")
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


def _labels(name: str, labels, count: int, prefix: str) -> tuple[str, ...]:
    if labels is None:
        return tuple(f"{prefix}{i}" for i in range(count))
    labels = tuple(str(s) for s in labels)
    if len(labels) != count:
        raise DimensionError(f"{name} has {len(labels)} labels, expected {count}")
    return labels


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """Continuous-time model ``(A, B, C, D)`` with optional channel labels.

    Matrices are copied to read-only float arrays on construction.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    state_names: tuple[str, ...] | None = None
    input_names: tuple[str, ...] | None = None
    output_names: tuple[str, ...] | None = None

    def __post_init__(self):
        A = _as_matrix("A", self.A)
        n = A.shape[0]
        if n < 1 or A.shape[1] != n:
            raise DimensionError(f"A must be square and non-empty, got shape {A.shape}")
        B = _as_matrix("B", self.B, rows=n)
        m = B.shape[1]
        C = _as_matrix("C", self.C, cols=n)
        p = C.shape[0]
        D = _as_matrix("D", self.D, rows=p, cols=m)
        if m < 1 or p < 1:
            raise DimensionError("models need at least one input and one output")
        set_ = object.__setattr__
        set_(self, "A", A)
        set_(self, "B", B)
        set_(self, "C", C)
        set_(self, "D", D)
        set_(self, "state_names", _labels("state_names", self.state_names, n, "x"))
        set_(self, "input_names", _labels("input_names", self.input_names, m, "u"))
        set_(self, "output_names", _labels("output_names", self.output_names, p, "y"))

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    def __eq__(self, other):
        if not isinstance(other, StateSpaceModel):
            return NotImplemented
        return (
            all(np.array_equal(getattr(self, k), getattr(other, k)) for k in "ABCD")
            and self.state_names == other.state_names
            and self.input_names == other.input_names
            and self.output_names == other.output_names
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class DiscreteModel:
    """Zero-order-hold discretization of a :class:`StateSpaceModel`.

    Attributes
    ----------
    Ad, Bd : ndarray
        ``expm(A dt)`` and ``(integral of expm(A tau) over [0, dt]) @ B``.
    C, D : ndarray
        Copied from the parent model.
    dt : float
        Step length in seconds.
    """

    Ad: np.ndarray
    Bd: np.ndarray
    C: np.ndarray
    D: np.ndarray
    dt: float
    parent: StateSpaceModel | None = field(default=None, repr=False)

    @property
    def n_states(self) -> int:
        return self.Ad.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.Bd.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]


# ---------------------------------------------------------------------------
# Matrix exponential: scaling and squaring with Pade approximants
# (Higham 2005). Degree 3..13 chosen from the 1-norm.
# ---------------------------------------------------------------------------

_PADE = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
         16380.0, 182.0, 1.0),
}

# Largest 1-norm for which the degree-m approximant is accurate to unit roundoff.
_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}


def _pade_uv(M: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    b = _PADE[m]
    ident = np.eye(M.shape[0])
    M2 = M @ M
    if m == 13:
        M4 = M2 @ M2
        M6 = M4 @ M2
        U = M @ (M6 @ (b[13] * M6 + b[11] * M4 + b[9] * M2)
                 + b[7] * M6 + b[5] * M4 + b[3] * M2 + b[1] * ident)
        V = (M6 @ (b[12] * M6 + b[10] * M4 + b[8] * M2)
             + b[6] * M6 + b[4] * M4 + b[2] * M2 + b[0] * ident)
        return U, V
    powers = [ident, M2]
    for _ in range(2, m // 2 + 1):
        powers.append(powers[-1] @ M2)
    odd = sum(b[2 * j + 1] * powers[j] for j in range(m // 2 + 1))
    even = sum(b[2 * j] * powers[j] for j in range(m // 2 + 1))
    return M @ odd, even


def expm(M) -> np.ndarray:
    """Matrix exponential of a square matrix.

    Uses scaling and squaring with a diagonal Pade approximant of degree
    3, 5, 7, 9 or 13, picked from the 1-norm of ``M``.

    Raises
    ------
    DimensionError
        If ``M`` is not square.
    NumericError
        If ``M`` has non-finite entries.
    """
    M = np.array(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"expm needs a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NumericError("expm input contains non-finite entries")
    if M.shape[0] == 0:
        return M.copy()
    norm = np.linalg.norm(M, 1)
    for m in (3, 5, 7, 9):
        if norm <= _THETA[m]:
            U, V = _pade_uv(M, m)
            return scipy.linalg.solve(V - U, V + U)
    s = max(0, int(np.ceil(np.log2(norm / _THETA[13]))))
    U, V = _pade_uv(M / 2.0**s, 13)
    R = scipy.linalg.solve(V - U, V + U)
    # an unstable model may overflow here; the inf surfaces as divergence at step 0
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(s):
            R = R @ R
    return R


def discretize_zoh(model: StateSpaceModel, dt: float) -> DiscreteModel:
    """Zero-order-hold discretization through the augmented exponential.

    ``expm([[A, B], [0, 0]] * dt)`` carries ``Ad`` in its top-left block and
    ``Bd`` in its top-right block, so ``A`` is never inverted.
    """
    if not isinstance(model, StateSpaceModel):
        raise DimensionError("discretize_zoh expects a StateSpaceModel")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    n, m = model.n_states, model.n_inputs
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = model.A
    aug[:n, n:] = model.B
    E = expm(aug * dt)
    Ad = np.ascontiguousarray(E[:n, :n])
    Bd = np.ascontiguousarray(E[:n, n:])
    for arr in (Ad, Bd):
        arr.setflags(write=False)
    return DiscreteModel(Ad, Bd, model.C, model.D, float(dt), parent=model)


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

def _step_block_py(Ad, Bd, C, D, U, x, Y):
    for k in range(U.shape[0]):
        u = U[k]
        Y[k] = C @ x + D @ u
        x[:] = Ad @ x + Bd @ u
        if not np.all(np.isfinite(x)):
            return k
    return -1


if njit is not None:

    @njit(cache=True, nogil=True)
    def _step_block(Ad, Bd, C, D, U, x, Y):  # pragma: no cover - compiled
        N, m = U.shape
        n = x.shape[0]
        p = C.shape[0]
        xn = np.empty(n)
        for k in range(N):
            for i in range(p):
                acc = 0.0
                for j in range(n):
                    acc += C[i, j] * x[j]
                for j in range(m):
                    acc += D[i, j] * U[k, j]
                Y[k, i] = acc
            bad = False
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc += Ad[i, j] * x[j]
                for j in range(m):
                    acc += Bd[i, j] * U[k, j]
                xn[i] = acc
                if not np.isfinite(acc):
                    bad = True
            for i in range(n):
                x[i] = xn[i]
            if bad:
                return k
        return -1

else:  # pragma: no cover
    _step_block = _step_block_py


def _iter_blocks(inputs, m: int, block: int) -> Iterable[np.ndarray]:
    if isinstance(inputs, np.ndarray):
        U = inputs.reshape(-1, 1) if inputs.ndim == 1 and m == 1 else inputs
        for k0 in range(0, U.shape[0], block):
            yield U[k0:k0 + block]
    else:
        yield from inputs


def simulate(
    dmodel: DiscreteModel,
    inputs: np.ndarray | Iterable[np.ndarray],
    x0: Sequence[float],
    sink: Sink | None = None,
    *,
    block: int = DEFAULT_BLOCK,
) -> np.ndarray:
    """Step a discrete model through an input sequence.

    For each step ``k``: ``y_k = C x_k + D u_k`` then
    ``x_{k+1} = Ad x_k + Bd u_k``. Outputs are passed to ``sink(k0, Y)`` where
    ``Y`` holds consecutive outputs ``y_{k0}, y_{k0+1}, ...`` as rows.

    Parameters
    ----------
    dmodel : DiscreteModel
    inputs : ndarray of shape (N, m), or iterable of (rows, m) blocks
        Held input samples. An iterable is consumed block by block, which
        keeps memory flat for long series.
    x0 : sequence of float
        Initial state, length n.
    sink : callable, optional
        Receives ``(k0, Y)`` per block. ``Y`` is a fresh array the sink may keep.
    block : int
        Block length used when ``inputs`` is a single array.

    Returns
    -------
    ndarray
        The state after the last step, ``x_N``.

    Raises
    ------
    DivergenceError
        If a state becomes non-finite; ``.step`` is the offending step index.
    """
    n, m, p = dmodel.n_states, dmodel.n_inputs, dmodel.n_outputs
    x = np.array(x0, dtype=float).reshape(-1)
    if x.shape[0] != n:
        raise DimensionError(f"x0 has length {x.shape[0]}, expected {n}")
    if not np.all(np.isfinite(x)):
        raise DivergenceError(0)
    x = np.ascontiguousarray(x)
    k0 = 0
    for U in _iter_blocks(inputs, m, block):
        U = np.ascontiguousarray(U, dtype=float)
        if U.ndim == 1 and m == 1:
            U = U.reshape(-1, 1)
        if U.ndim != 2 or U.shape[1] != m:
            raise DimensionError(f"input block has shape {U.shape}, expected (rows, {m})")
        if U.shape[0] == 0:
            continue
        Y = np.empty((U.shape[0], p))
        bad = _step_block(dmodel.Ad, dmodel.Bd, dmodel.C, dmodel.D, U, x, Y)
        if bad >= 0:
            raise DivergenceError(k0 + bad)
        if sink is not None:
            sink(k0, Y)
        k0 += U.shape[0]
    if k0 == 0:
        raise ValueError("simulate needs at least one input sample")
    return x


# ---------------------------------------------------------------------------
# Static gains
# ---------------------------------------------------------------------------

def _lu(A: np.ndarray):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=True)
    diag = np.abs(np.diag(lu))
    if diag.min() <= np.finfo(float).eps * A.shape[0] * max(diag.max(), 1e-300):
        raise SingularError("system matrix A is singular")
    return lu, piv


def dc_gain(model: StateSpaceModel) -> np.ndarray:
    """Steady-state gain ``D - C A^{-1} B`` (p x m) from an LU solve."""
    X = scipy.linalg.lu_solve(_lu(model.A), model.B)
    return model.D - model.C @ X


def steady_state(model: StateSpaceModel, u0: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Equilibrium ``(x_ss, y_ss)`` for a constant input ``u0``."""
    u0 = np.asarray(u0, dtype=float).reshape(-1)
    if u0.shape[0] != model.n_inputs:
        raise DimensionError(f"u0 has length {u0.shape[0]}, expected {model.n_inputs}")
    x_ss = scipy.linalg.lu_solve(_lu(model.A), -(model.B @ u0))
    return x_ss, model.C @ x_ss + model.D @ u0

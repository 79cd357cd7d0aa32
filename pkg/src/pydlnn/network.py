"""Deep linear network architectures, training data and gradient systems."""

import logging
import re
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from pydlnn.polynomial import Polynomial, PolySystem

logger = logging.getLogger(__name__)

# Regularization entries below this are redrawn when sampling.
LAMBDA_FLOOR = 1e-6


class ShapeMismatchError(ValueError):
    """Raised when data or weight shapes disagree with the architecture."""

    pass


class ArchitectureFormatError(ValueError):
    """Raised when an architecture string cannot be parsed."""

    pass


@dataclass(frozen=True)
class Architecture:
    """A deep linear network ``W_{H+1} ... W_1`` trained on ``m`` data points.

    Attributes:
        H: Number of hidden layers.
        m: Number of data points.
        d_x: Input dimension.
        d_y: Output dimension.
        hidden: Widths ``d_1 .. d_H`` of the hidden layers.
    """

    H: int
    m: int
    d_x: int
    d_y: int
    hidden: Tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden", tuple(int(d) for d in self.hidden))
        if self.H < 1:
            raise ValueError("H must be a positive integer")
        if self.m < 1:
            raise ValueError("m must be a positive integer (at least one data point)")
        if self.d_x < 1 or self.d_y < 1:
            raise ValueError("Input and output dimensions must be positive")
        if len(self.hidden) != self.H:
            raise ValueError(f"Expected {self.H} hidden widths, got {len(self.hidden)}")
        if any(d < 1 for d in self.hidden):
            raise ValueError("Hidden widths must be positive")

    @classmethod
    def uniform(cls, H: int, m: int, d_x: int, d_y: int, d: int) -> "Architecture":
        """Architecture with every hidden layer of width ``d``."""
        return cls(H=H, m=m, d_x=d_x, d_y=d_y, hidden=(d,) * H)

    @classmethod
    def parse(cls, text: str) -> "Architecture":
        """Parse ``H=1,m=2,dx=3,dy=2,d=1`` or ``...,d=2:3`` (one width per layer)."""
        fields: Dict[str, str] = {}
        for chunk in text.replace(" ", "").split(","):
            if not chunk:
                continue
            match = re.fullmatch(r"([A-Za-z_]+)=([0-9:]+)", chunk)
            if not match:
                raise ArchitectureFormatError(f"Cannot parse '{chunk}' in '{text}'")
            fields[match.group(1)] = match.group(2)
        missing = {"H", "m", "dx", "dy", "d"} - set(fields)
        if missing:
            raise ArchitectureFormatError(
                f"Architecture '{text}' is missing {', '.join(sorted(missing))}"
            )
        unknown = set(fields) - {"H", "m", "dx", "dy", "d"}
        if unknown:
            raise ArchitectureFormatError(
                f"Unknown architecture keys: {', '.join(sorted(unknown))}"
            )
        try:
            H = int(fields["H"])
            widths = [int(w) for w in fields["d"].split(":")]
            if len(widths) == 1:
                widths = widths * H
            return cls(
                H=H,
                m=int(fields["m"]),
                d_x=int(fields["dx"]),
                d_y=int(fields["dy"]),
                hidden=tuple(widths),
            )
        except ValueError as e:
            raise ArchitectureFormatError(f"Invalid architecture '{text}': {e}") from e

    def to_string(self) -> str:
        if len(set(self.hidden)) == 1:
            d = str(self.hidden[0])
        else:
            d = ":".join(str(w) for w in self.hidden)
        return f"H={self.H},m={self.m},dx={self.d_x},dy={self.d_y},d={d}"

    def with_m(self, m: int) -> "Architecture":
        return replace(self, m=m)

    def swapped(self) -> "Architecture":
        """Same network with input and output dimensions exchanged."""
        return replace(self, d_x=self.d_y, d_y=self.d_x)

    @property
    def layer_dims(self) -> Tuple[int, ...]:
        """``(d_x, d_1, ..., d_H, d_y)``."""
        return (self.d_x,) + self.hidden + (self.d_y,)

    @property
    def layer_shapes(self) -> List[Tuple[int, int]]:
        """Shape ``(rows, cols)`` of ``W_1 .. W_{H+1}``."""
        dims = self.layer_dims
        return [(dims[i + 1], dims[i]) for i in range(self.H + 1)]

    @property
    def N(self) -> int:
        """Total number of weights."""
        return sum(r * c for r, c in self.layer_shapes)

    @property
    def degree(self) -> int:
        """Degree ``2H + 1`` of every gradient polynomial."""
        return 2 * self.H + 1

    def layer_offset(self, layer: int) -> int:
        """Flat index of ``W_layer[0, 0]`` (layers are 1-based)."""
        shapes = self.layer_shapes
        return sum(r * c for r, c in shapes[: layer - 1])

    def flat_index(self, layer: int, row: int, col: int) -> int:
        rows, cols = self.layer_shapes[layer - 1]
        if not (0 <= row < rows and 0 <= col < cols):
            raise IndexError(f"Entry ({row}, {col}) outside W_{layer} of shape {rows}x{cols}")
        return self.layer_offset(layer) + row * cols + col

    def weight_indices(self) -> List["WeightIndex"]:
        indices = []
        flat = 0
        for layer, (rows, cols) in enumerate(self.layer_shapes, start=1):
            for row in range(rows):
                for col in range(cols):
                    indices.append(WeightIndex(layer, row, col, flat))
                    flat += 1
        return indices

    def variable_names(self) -> List[str]:
        return [w.name for w in self.weight_indices()]

    def split_weights(self, weights: Sequence) -> List[np.ndarray]:
        """Reshape a flat weight vector into ``[W_1, ..., W_{H+1}]``."""
        weights = np.asarray(weights)
        if weights.shape != (self.N,):
            raise ShapeMismatchError(
                f"Weight vector has shape {weights.shape}, expected ({self.N},)"
            )
        matrices = []
        for layer, (rows, cols) in enumerate(self.layer_shapes, start=1):
            start = self.layer_offset(layer)
            matrices.append(weights[start : start + rows * cols].reshape(rows, cols))
        return matrices


@dataclass(frozen=True)
class WeightIndex:
    """Position of one weight variable; ``layer`` is 1-based, ``row``/``col`` 0-based."""

    layer: int
    row: int
    col: int
    flat: int

    @property
    def name(self) -> str:
        return f"w{self.layer}_{self.row + 1}_{self.col + 1}"


@dataclass
class TrainingInstance:
    """Data and regularization matrices defining one gradient system."""

    X: np.ndarray
    Y: np.ndarray
    lambdas: List[np.ndarray]
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        self.lambdas = [np.atleast_2d(np.asarray(lam, dtype=float)) for lam in self.lambdas]

    def validate(self, arch: Architecture) -> None:
        """Check every matrix shape against ``arch``."""
        if arch.m < 1:
            raise ShapeMismatchError("At least one data point is required")
        if self.X.shape != (arch.d_x, arch.m):
            raise ShapeMismatchError(
                f"X has shape {self.X.shape}, expected ({arch.d_x}, {arch.m})"
            )
        if self.Y.shape != (arch.d_y, arch.m):
            raise ShapeMismatchError(
                f"Y has shape {self.Y.shape}, expected ({arch.d_y}, {arch.m})"
            )
        if len(self.lambdas) != arch.H + 1:
            raise ShapeMismatchError(
                f"Expected {arch.H + 1} regularization matrices, got {len(self.lambdas)}"
            )
        for i, (lam, shape) in enumerate(zip(self.lambdas, arch.layer_shapes), start=1):
            if lam.shape != shape:
                raise ShapeMismatchError(f"Lambda_{i} has shape {lam.shape}, expected {shape}")

    def to_dict(self) -> Dict:
        return {
            "X": self.X.tolist(),
            "Y": self.Y.tolist(),
            "lambdas": [lam.tolist() for lam in self.lambdas],
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "TrainingInstance":
        return cls(
            X=np.asarray(data["X"], dtype=float),
            Y=np.asarray(data["Y"], dtype=float),
            lambdas=[np.asarray(lam, dtype=float) for lam in data["lambdas"]],
            seed=data.get("seed"),
        )


def sample_instance(arch: Architecture, seed: int) -> TrainingInstance:
    """Draw a generic training instance.

    Uses numpy's ``Generator(PCG64(seed))``: X and Y entries from
    ``standard_normal`` and regularization entries from ``uniform(0, 1)``,
    redrawing any entry below :data:`LAMBDA_FLOOR`.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    X = rng.standard_normal((arch.d_x, arch.m))
    Y = rng.standard_normal((arch.d_y, arch.m))
    lambdas = []
    for shape in arch.layer_shapes:
        lam = rng.uniform(0.0, 1.0, size=shape)
        small = lam < LAMBDA_FLOOR
        while small.any():
            lam[small] = rng.uniform(0.0, 1.0, size=int(small.sum()))
            small = lam < LAMBDA_FLOOR
        lambdas.append(lam)
    return TrainingInstance(X=X, Y=Y, lambdas=lambdas, seed=seed)


PolyMatrix = List[List[Polynomial]]


def _constant_matrix(values: np.ndarray, nvars: int) -> PolyMatrix:
    return [[Polynomial.constant(v, nvars) for v in row] for row in values]


def _identity(size: int, nvars: int) -> PolyMatrix:
    return _constant_matrix(np.eye(size), nvars)


def _matmul(a: PolyMatrix, b: PolyMatrix, nvars: int) -> PolyMatrix:
    rows, inner, cols = len(a), len(b), len(b[0])
    out = []
    for i in range(rows):
        row = []
        for j in range(cols):
            acc = Polynomial.zero(nvars)
            for k in range(inner):
                if a[i][k].is_zero or b[k][j].is_zero:
                    continue
                acc = acc + a[i][k] * b[k][j]
            row.append(acc)
        out.append(row)
    return out


def _transpose(a: PolyMatrix) -> PolyMatrix:
    return [list(col) for col in zip(*a)]


def _weight_matrices(arch: Architecture) -> List[PolyMatrix]:
    nvars = arch.N
    matrices = []
    for layer, (rows, cols) in enumerate(arch.layer_shapes, start=1):
        matrices.append(
            [
                [Polynomial.variable(arch.flat_index(layer, r, c), nvars) for c in range(cols)]
                for r in range(rows)
            ]
        )
    return matrices


def build_gradient_system(arch: Architecture, inst: TrainingInstance) -> PolySystem:
    """Gradient of the regularized loss as a square polynomial system.

    For layer ``i`` the block is ``U_i^T (W Z - T) V_i^T + Lambda_i o W_i`` with
    ``Z = sum_k x_k x_k^T``, ``T = sum_k y_k x_k^T``, ``U_i = W_{H+1}..W_{i+1}``
    and ``V_i = W_{i-1}..W_1``. Polynomials are ordered like the variables.
    """
    inst.validate(arch)
    nvars = arch.N
    weights = _weight_matrices(arch)
    Z = _constant_matrix(inst.X @ inst.X.T, nvars)
    T = _constant_matrix(inst.Y @ inst.X.T, nvars)

    # prefix[i] = W_i ... W_1 (prefix[0] = I_{d_x}); suffix[i] = W_{H+1} ... W_{i+1}
    prefix = [_identity(arch.d_x, nvars)]
    for W in weights:
        prefix.append(_matmul(W, prefix[-1], nvars))
    suffix: List[PolyMatrix] = [_identity(arch.d_y, nvars)] * (arch.H + 2)
    for i in range(arch.H, -1, -1):
        suffix[i] = _matmul(suffix[i + 1], weights[i], nvars)
    W_total = prefix[-1]

    WZ = _matmul(W_total, Z, nvars)
    residual = [
        [WZ[r][c] - T[r][c] for c in range(arch.d_x)] for r in range(arch.d_y)
    ]

    polys: List[Polynomial] = []
    for i in range(1, arch.H + 2):
        U = suffix[i]
        V = prefix[i - 1]
        block = _matmul(_matmul(_transpose(U), residual, nvars), _transpose(V), nvars)
        lam = inst.lambdas[i - 1]
        rows, cols = arch.layer_shapes[i - 1]
        for r in range(rows):
            for c in range(cols):
                polys.append(block[r][c] + weights[i - 1][r][c] * float(lam[r, c]))
    logger.debug(
        "Built gradient system for %s: %d polynomials, %d terms",
        arch.to_string(),
        len(polys),
        sum(len(p) for p in polys),
    )
    return PolySystem(polys, arch.variable_names())


def loss_value(arch: Architecture, inst: TrainingInstance, weights: Sequence[float]) -> float:
    """Regularized loss whose gradient is :func:`build_gradient_system`.

    The penalty is ``1/2 sum_i sum(Lambda_i o W_i o W_i)`` so that its
    derivative is exactly ``Lambda_i o W_i``. This is half the penalty of the
    unscaled ``sum(Lambda_i o W_i o W_i)`` convention, and it is negative
    wherever negative entries of ``Lambda_i`` dominate.
    """
    inst.validate(arch)
    matrices = arch.split_weights(np.asarray(weights, dtype=float))
    W = np.eye(arch.d_x)
    for M in matrices:
        W = M @ W
    residual = W @ inst.X - inst.Y
    penalty = sum(float(np.sum(lam * M**2)) for lam, M in zip(inst.lambdas, matrices))
    return 0.5 * float(np.sum(residual**2)) + 0.5 * penalty


def compare_supports(arch: Architecture, m1: int, m2: int, seed: int) -> bool:
    """Whether generic gradient systems for ``m1`` and ``m2`` data points share supports."""
    if m1 < 1 or m2 < 1:
        raise ValueError("m1 and m2 must be positive")
    first_arch, second_arch = arch.with_m(m1), arch.with_m(m2)
    first = build_gradient_system(first_arch, sample_instance(first_arch, seed))
    second = build_gradient_system(second_arch, sample_instance(second_arch, seed + 1))
    return first.supports() == second.supports()

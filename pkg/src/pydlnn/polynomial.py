"""Sparse multivariate polynomials with complex coefficients."""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Set
from typing import Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

Scalar = Union[int, float, complex]

# Terms whose magnitude drops below this after floating arithmetic are pruned.
ARITHMETIC_PRUNE_TOL = 1e-14


class DimensionMismatchError(ValueError):
    """Raised when polynomials, points or indices disagree on the variable count."""

    pass


class NonSquareSystemError(ValueError):
    """Raised when an operation requires as many equations as variables."""

    pass


@dataclass(frozen=True, order=False)
class Monomial:
    """Exponent vector of a single term."""

    exponents: Tuple[int, ...]

    def __post_init__(self) -> None:
        """Validate the exponent vector."""
        if any(e < 0 for e in self.exponents):
            raise ValueError(f"Negative exponent in monomial {self.exponents}")

    @classmethod
    def one(cls, nvars: int) -> "Monomial":
        """The constant monomial in ``nvars`` variables."""
        return cls((0,) * nvars)

    @classmethod
    def unit(cls, index: int, nvars: int, power: int = 1) -> "Monomial":
        """The monomial ``x_index ** power``."""
        exps = [0] * nvars
        exps[index] = power
        return cls(tuple(exps))

    @property
    def nvars(self) -> int:
        return len(self.exponents)

    @property
    def degree(self) -> int:
        return sum(self.exponents)

    def __mul__(self, other: "Monomial") -> "Monomial":
        if self.nvars != other.nvars:
            raise DimensionMismatchError(
                f"Cannot multiply monomials in {self.nvars} and {other.nvars} variables"
            )
        return Monomial(tuple(a + b for a, b in zip(self.exponents, other.exponents)))

    def sort_key(self) -> Tuple[int, Tuple[int, ...]]:
        """Graded-lexicographic key: higher degree first, then lex-larger first."""
        return (-self.degree, tuple(-e for e in self.exponents))

    def to_string(self, var_names: Optional[Sequence[str]] = None) -> str:
        """Human readable form such as ``w1_1_1*w2_1_1^2``."""
        names = var_names or [f"x{i}" for i in range(self.nvars)]
        factors = []
        for name, e in zip(names, self.exponents):
            if e == 1:
                factors.append(name)
            elif e > 1:
                factors.append(f"{name}^{e}")
        return "*".join(factors) if factors else "1"


class Polynomial:
    """Immutable sparse polynomial over the complex numbers.

    Terms map a :class:`Monomial` to its coefficient. Exactly-zero
    coefficients are dropped on construction; results of arithmetic also
    drop coefficients smaller than :data:`ARITHMETIC_PRUNE_TOL`.
    """

    __slots__ = ("_terms", "_nvars", "_hash")

    def __init__(
        self,
        terms: Mapping[Union[Monomial, Tuple[int, ...]], Scalar],
        nvars: int,
        prune_tol: float = 0.0,
    ):
        if nvars < 1:
            raise ValueError("A polynomial needs at least one variable")
        cleaned: Dict[Monomial, complex] = {}
        for mono, coeff in terms.items():
            if not isinstance(mono, Monomial):
                mono = Monomial(tuple(int(e) for e in mono))
            if mono.nvars != nvars:
                raise DimensionMismatchError(
                    f"Monomial {mono.exponents} has {mono.nvars} exponents, expected {nvars}"
                )
            c = complex(coeff)
            if c == 0 or abs(c) < prune_tol:
                continue
            cleaned[mono] = c
        self._terms = cleaned
        self._nvars = nvars
        self._hash: Optional[int] = None

    @classmethod
    def zero(cls, nvars: int) -> "Polynomial":
        return cls({}, nvars)

    @classmethod
    def constant(cls, value: Scalar, nvars: int) -> "Polynomial":
        return cls({Monomial.one(nvars): value}, nvars)

    @classmethod
    def variable(cls, index: int, nvars: int) -> "Polynomial":
        """The coordinate polynomial ``x_index``."""
        if not 0 <= index < nvars:
            raise IndexError(f"Variable index {index} out of range for {nvars} variables")
        return cls({Monomial.unit(index, nvars): 1}, nvars)

    @property
    def nvars(self) -> int:
        return self._nvars

    @property
    def terms(self) -> Mapping[Monomial, complex]:
        return dict(self._terms)

    @property
    def is_zero(self) -> bool:
        return not self._terms

    @property
    def degree(self) -> int:
        """Total degree; the zero polynomial has degree 0 by convention."""
        return max((m.degree for m in self._terms), default=0)

    def __len__(self) -> int:
        return len(self._terms)

    def items(self) -> List[Tuple[Monomial, complex]]:
        """Terms in canonical graded-lexicographic order."""
        return sorted(self._terms.items(), key=lambda kv: kv[0].sort_key())

    def coefficient(self, mono: Union[Monomial, Tuple[int, ...]]) -> complex:
        if not isinstance(mono, Monomial):
            mono = Monomial(tuple(mono))
        return self._terms.get(mono, 0j)

    def degrees_present(self) -> Set[int]:
        """Set of total degrees of the stored terms."""
        return {m.degree for m in self._terms}

    def homogeneous_part(self, degree: int) -> "Polynomial":
        return Polynomial(
            {m: c for m, c in self._terms.items() if m.degree == degree}, self._nvars
        )

    def support(self) -> Set[Monomial]:
        """Monomials carrying a nonzero coefficient."""
        return set(self._terms)

    def evaluate(self, point: Sequence[Scalar]) -> complex:
        """Evaluate at a complex point by summing coefficient times monomial value."""
        if len(point) != self._nvars:
            raise DimensionMismatchError(
                f"Point has length {len(point)}, polynomial has {self._nvars} variables"
            )
        values = [complex(v) for v in point]
        total = 0j
        for mono, coeff in self._terms.items():
            term = coeff
            for v, e in zip(values, mono.exponents):
                if e:
                    term *= v**e
            total += term
        return total

    def restrict(self, keep: Sequence[int]) -> "Polynomial":
        """Set every variable outside ``keep`` to zero; variable ``keep[j]`` becomes ``x_j``."""
        keep = list(keep)
        if not keep:
            raise ValueError("restrict needs at least one kept variable")
        kept = set(keep)
        dropped = [j for j in range(self._nvars) if j not in kept]
        terms = {
            Monomial(tuple(mono.exponents[j] for j in keep)): coeff
            for mono, coeff in self._terms.items()
            if not any(mono.exponents[j] for j in dropped)
        }
        return Polynomial(terms, len(keep))

    def differentiate(self, var_index: int) -> "Polynomial":
        """Formal partial derivative with respect to ``x_var_index``."""
        if not 0 <= var_index < self._nvars:
            raise IndexError(
                f"Variable index {var_index} out of range for {self._nvars} variables"
            )
        result: Dict[Monomial, complex] = {}
        for mono, coeff in self._terms.items():
            e = mono.exponents[var_index]
            if e == 0:
                continue
            exps = list(mono.exponents)
            exps[var_index] = e - 1
            key = Monomial(tuple(exps))
            result[key] = result.get(key, 0j) + coeff * e
        return Polynomial(result, self._nvars)

    def scale(self, factor: Scalar) -> "Polynomial":
        return Polynomial(
            {m: c * factor for m, c in self._terms.items()},
            self._nvars,
            prune_tol=ARITHMETIC_PRUNE_TOL,
        )

    def _check_compatible(self, other: "Polynomial") -> None:
        if self._nvars != other._nvars:
            raise DimensionMismatchError(
                f"Polynomials in {self._nvars} and {other._nvars} variables"
            )

    def __add__(self, other: Union["Polynomial", Scalar]) -> "Polynomial":
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(other, self._nvars)
        self._check_compatible(other)
        result = dict(self._terms)
        for mono, coeff in other._terms.items():
            result[mono] = result.get(mono, 0j) + coeff
        return Polynomial(result, self._nvars, prune_tol=ARITHMETIC_PRUNE_TOL)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial({m: -c for m, c in self._terms.items()}, self._nvars)

    def __sub__(self, other: Union["Polynomial", Scalar]) -> "Polynomial":
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(other, self._nvars)
        return self + (-other)

    def __rsub__(self, other: Scalar) -> "Polynomial":
        return Polynomial.constant(other, self._nvars) - self

    def __mul__(self, other: Union["Polynomial", Scalar]) -> "Polynomial":
        if not isinstance(other, Polynomial):
            return self.scale(other)
        self._check_compatible(other)
        result: Dict[Monomial, complex] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                key = m1 * m2
                result[key] = result.get(key, 0j) + c1 * c2
        return Polynomial(result, self._nvars, prune_tol=ARITHMETIC_PRUNE_TOL)

    __rmul__ = __mul__

    def __pow__(self, exponent: int) -> "Polynomial":
        if exponent < 0:
            raise ValueError("Negative powers are not polynomials")
        result = Polynomial.constant(1, self._nvars)
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            exponent >>= 1
            if exponent:
                base = base * base
        return result

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self._nvars == other._nvars and self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self._nvars, frozenset(self._terms.items())))
        return self._hash

    def to_string(self, var_names: Optional[Sequence[str]] = None) -> str:
        if self.is_zero:
            return "0"
        parts = []
        for mono, coeff in self.items():
            c = coeff.real if coeff.imag == 0 else coeff
            parts.append(f"({c:g})*{mono.to_string(var_names)}")
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"Polynomial({self.to_string()}, nvars={self._nvars})"


def _format_float(value: float) -> str:
    # repr() is the shortest string that round-trips to the same double
    return repr(float(value))


class PolySystem:
    """Ordered list of polynomials over a common set of named variables."""

    HEADER_PREFIX = "vars:"

    def __init__(
        self,
        polys: Iterable[Polynomial],
        var_names: Optional[Sequence[str]] = None,
    ):
        self._polys: Tuple[Polynomial, ...] = tuple(polys)
        if not self._polys:
            raise ValueError("A polynomial system needs at least one polynomial")
        nvars = self._polys[0].nvars
        for i, p in enumerate(self._polys):
            if p.nvars != nvars:
                raise DimensionMismatchError(
                    f"Polynomial {i} has {p.nvars} variables, expected {nvars}"
                )
        self._nvars = nvars
        if var_names is None:
            var_names = [f"x{i}" for i in range(nvars)]
        if len(var_names) != nvars:
            raise DimensionMismatchError(
                f"{len(var_names)} variable names given for {nvars} variables"
            )
        self._var_names: Tuple[str, ...] = tuple(var_names)

    @property
    def polys(self) -> Tuple[Polynomial, ...]:
        return self._polys

    @property
    def nvars(self) -> int:
        return self._nvars

    @property
    def var_names(self) -> Tuple[str, ...]:
        return self._var_names

    @property
    def is_square(self) -> bool:
        return len(self._polys) == self._nvars

    def require_square(self) -> None:
        if not self.is_square:
            raise NonSquareSystemError(
                f"System has {len(self._polys)} equations in {self._nvars} variables"
            )

    def __len__(self) -> int:
        return len(self._polys)

    def __iter__(self) -> Iterator[Polynomial]:
        return iter(self._polys)

    def __getitem__(self, index: int) -> Polynomial:
        return self._polys[index]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PolySystem):
            return NotImplemented
        return self._polys == other._polys and self._var_names == other._var_names

    def degrees(self) -> List[int]:
        return [p.degree for p in self._polys]

    def supports(self) -> List[Set[Monomial]]:
        return [p.support() for p in self._polys]

    def evaluate(self, point: Sequence[Scalar]) -> np.ndarray:
        return np.array([p.evaluate(point) for p in self._polys], dtype=complex)

    def jacobian_polys(self) -> List[List[Polynomial]]:
        """Formal Jacobian as a matrix of polynomials."""
        return [[p.differentiate(k) for k in range(self._nvars)] for p in self._polys]

    def jacobian(self, point: Sequence[Scalar]) -> np.ndarray:
        return np.array(
            [[q.evaluate(point) for q in row] for row in self.jacobian_polys()],
            dtype=complex,
        )

    def to_text(self) -> str:
        """Serialize as a header line plus one polynomial per line.

        Each term is written as ``re,im:e1,...,eN`` and terms are separated
        by ``;``. The zero polynomial is written as ``0``.
        """
        lines = [f"{self.HEADER_PREFIX} " + " ".join(self._var_names)]
        for poly in self._polys:
            if poly.is_zero:
                lines.append("0")
                continue
            terms = []
            for mono, coeff in poly.items():
                exps = ",".join(str(e) for e in mono.exponents)
                terms.append(
                    f"{_format_float(coeff.real)},{_format_float(coeff.imag)}:{exps}"
                )
            lines.append(";".join(terms))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PolySystem":
        """Parse the format written by :meth:`to_text`."""
        lines = [line.strip() for line in text.splitlines() if line.strip()]
        if not lines or not lines[0].startswith(cls.HEADER_PREFIX):
            raise ValueError("Missing variable header line")
        var_names = lines[0][len(cls.HEADER_PREFIX):].split()
        nvars = len(var_names)
        if nvars == 0:
            raise ValueError("Header declares no variables")
        polys = []
        for lineno, line in enumerate(lines[1:], start=2):
            if line == "0":
                polys.append(Polynomial.zero(nvars))
                continue
            terms: Dict[Monomial, complex] = {}
            try:
                for chunk in line.split(";"):
                    coeff_text, exp_text = chunk.split(":")
                    re_text, im_text = coeff_text.split(",")
                    exps = tuple(int(e) for e in exp_text.split(","))
                    mono = Monomial(exps)
                    terms[mono] = terms.get(mono, 0j) + complex(
                        float(re_text), float(im_text)
                    )
                polys.append(Polynomial(terms, nvars))
            except (ValueError, DimensionMismatchError) as e:
                raise ValueError(f"Malformed polynomial on line {lineno}: {e}") from e
        return cls(polys, var_names)

    def __repr__(self) -> str:
        return f"PolySystem({len(self._polys)} polys, {self._nvars} vars)"

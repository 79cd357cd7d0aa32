"""Vectorized evaluation of polynomial systems over batches of points."""

from typing import List, Sequence, Tuple

import numpy as np

from pydlnn.polynomial import Polynomial, PolySystem


class _TermBlock:
    """Terms of several polynomials stacked for batched evaluation.

    Every term is stored as a short list of indices into a flattened power
    table ``P[b, j * (D + 1) + e] = x[b, j] ** e``. Index 0 (``x_0 ** 0``)
    pads terms with fewer factors. Terms are sorted by output slot so the
    per-slot sums are a single ``np.add.reduceat``.
    """

    def __init__(self, polys: Sequence[Polynomial], nvars: int, max_degree: int):
        stride = max_degree + 1
        factors: List[List[int]] = []
        coeffs: List[complex] = []
        slots: List[int] = []
        for slot, poly in enumerate(polys):
            for mono, coeff in poly.items():
                idx = [j * stride + e for j, e in enumerate(mono.exponents) if e]
                factors.append(idx)
                coeffs.append(coeff)
                slots.append(slot)
        self.size = len(polys)
        self.nterms = len(coeffs)
        width = max((len(f) for f in factors), default=1) or 1
        self.factor_index = np.zeros((self.nterms, width), dtype=np.intp)
        for t, idx in enumerate(factors):
            self.factor_index[t, : len(idx)] = idx
        self.coeffs = np.asarray(coeffs, dtype=complex)
        self.abs_coeffs = np.abs(self.coeffs)
        slot_array = np.asarray(slots, dtype=np.intp)
        if self.nterms:
            starts = np.flatnonzero(np.r_[True, slot_array[1:] != slot_array[:-1]])
            self.segment_starts = starts
            self.segment_slots = slot_array[starts]
        else:
            self.segment_starts = np.zeros(0, dtype=np.intp)
            self.segment_slots = np.zeros(0, dtype=np.intp)

    def evaluate(self, powers: np.ndarray, absolute: bool = False) -> np.ndarray:
        batch = powers.shape[0]
        out = np.zeros((batch, self.size), dtype=float if absolute else complex)
        if not self.nterms:
            return out
        monos = np.prod(powers[:, self.factor_index], axis=2)
        values = monos * (self.abs_coeffs if absolute else self.coeffs)
        out[:, self.segment_slots] = np.add.reduceat(values, self.segment_starts, axis=1)
        return out


class CompiledSystem:
    """Batched evaluator for a polynomial system and its Jacobian.

    Points are passed as a ``(batch, nvars)`` complex array.
    """

    def __init__(self, system: PolySystem):
        self.system = system
        self.nvars = system.nvars
        self.npolys = len(system)
        self.max_degree = max(system.degrees() + [1])
        self._values = _TermBlock(system.polys, self.nvars, self.max_degree)
        jac = [q for row in system.jacobian_polys() for q in row]
        self._jacobian = _TermBlock(jac, self.nvars, self.max_degree)

    def _powers(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=complex))
        if points.shape[1] != self.nvars:
            raise ValueError(
                f"Points have {points.shape[1]} coordinates, system has {self.nvars}"
            )
        batch = points.shape[0]
        table = np.ones((batch, self.nvars, self.max_degree + 1), dtype=complex)
        for e in range(1, self.max_degree + 1):
            table[:, :, e] = table[:, :, e - 1] * points
        return table.reshape(batch, self.nvars * (self.max_degree + 1))

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return self._values.evaluate(self._powers(points))

    def jacobian(self, points: np.ndarray) -> np.ndarray:
        powers = self._powers(points)
        flat = self._jacobian.evaluate(powers)
        return flat.reshape(-1, self.npolys, self.nvars)

    def evaluate_with_jacobian(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        powers = self._powers(points)
        values = self._values.evaluate(powers)
        jac = self._jacobian.evaluate(powers).reshape(-1, self.npolys, self.nvars)
        return values, jac

    def term_scale(self, points: np.ndarray) -> np.ndarray:
        """Per point ``max_i sum_t |c_t| |x^e_t|``, the natural size of the residual."""
        powers = np.abs(self._powers(points))
        return self._values.evaluate(powers, absolute=True).max(axis=1)

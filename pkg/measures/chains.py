# measures/chains.py
"""
Finite-state pictures of the stationary measures.

The L-chain keeps the last L bits of the label seen from the walker: ±1 wraps mod 2^L,
a step down appends 0 and forgets the first bit, a step up (even states only) drops the
last bit and brings in a leading 0. Its stationary vector approximates ν_s, and the mass
of the odd states approximates p₃.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from django.conf import settings
from scipy import linalg

from dyadlab.errors import DomainError, SolverError

from .histograms import DyadicHistogram

logger = logging.getLogger(__name__)

LEADING_BITS = ("zero", "random")


def chain_step(pi: np.ndarray, length: int, leading_bit: str = "zero") -> np.ndarray:
    """One step of the L-chain applied to the row vector pi."""
    m = 1 << length
    states = np.arange(m)
    even = states % 2 == 0
    w = pi / np.where(even, 4.0, 3.0)
    out = np.roll(w, 1) + np.roll(w, -1)
    out += np.bincount((2 * states) % m, weights=w, minlength=m)
    popped = states[even] >> 1
    if leading_bit == "zero":
        out += np.bincount(popped, weights=w[even], minlength=m)
    else:
        half = w[even] / 2
        out += np.bincount(popped, weights=half, minlength=m)
        out += np.bincount(popped | (m >> 1), weights=half, minlength=m)
    return out


def transition_matrix(length: int, leading_bit: str = "zero") -> np.ndarray:
    """Dense kernel, row i = chain_step(e_i); small L only."""
    if length > 10:
        raise DomainError("dense kernels are limited to L <= 10")
    m = 1 << length
    return np.array([chain_step(row, length, leading_bit) for row in np.eye(m)])


@dataclass
class StationaryChain:
    length: int
    vector: np.ndarray
    iterations: int
    residual: float
    leading_bit: str = "zero"

    @property
    def p3(self) -> float:
        """Stationary mass of the odd (degree-3) states."""
        return float(self.vector[1::2].sum())

    def marginal(self, bits: int) -> np.ndarray:
        """Law of the last `bits` bits."""
        if bits > self.length:
            raise DomainError("marginal wider than the chain")
        return np.bincount(np.arange(len(self.vector)) & ((1 << bits) - 1), weights=self.vector, minlength=1 << bits)

    def csv_header(self):
        return ["state", "mass"]

    def csv_rows(self):
        for v, p in enumerate(self.vector):
            yield format(v, f"0{self.length}b"), float(p)

    def csv_preamble(self):
        return [f"p3={self.p3:.17g}", f"leading_bit={self.leading_bit}"]

    def to_dict(self):
        return {
            "length": self.length,
            "p3": self.p3,
            "iterations": self.iterations,
            "residual": self.residual,
            "leading_bit": self.leading_bit,
        }


def truncated_stationary(
    length: int,
    tol: float = 1e-13,
    leading_bit: str = "zero",
    max_iter: int | None = None,
) -> StationaryChain:
    """Power iteration from the uniform vector until successive vectors differ by at most tol in L1."""
    if not 2 <= length <= 20:
        raise DomainError("chain length must be between 2 and 20")
    if leading_bit not in LEADING_BITS:
        raise DomainError(f"leading_bit must be one of {LEADING_BITS}")
    max_iter = max_iter or settings.DYADLAB_SOLVER_MAX_ITER
    pi = np.full(1 << length, 2.0 ** -length)
    for iteration in range(1, max_iter + 1):
        nxt = chain_step(pi, length, leading_bit)
        nxt /= nxt.sum()
        change = float(np.abs(nxt - pi).sum())
        pi = nxt
        if change <= tol:
            logger.info("L=%d chain converged in %d iterations, p3=%.9f", length, iteration, pi[1::2].sum())
            return StationaryChain(length, pi, iteration, change, leading_bit)
    raise SolverError(f"L={length} chain did not converge in {max_iter} iterations", residual=change, iterations=max_iter)


def dense_stationary(length: int, leading_bit: str = "zero") -> np.ndarray:
    """Stationary vector from the null space of Kᵀ − I."""
    kernel = transition_matrix(length, leading_bit)
    basis = linalg.null_space(kernel.T - np.eye(len(kernel)))
    if basis.shape[1] != 1:
        raise SolverError(f"stationary space has dimension {basis.shape[1]}")
    v = basis[:, 0]
    return v / v.sum()


def stationary_histogram(chain: StationaryChain, resolution: int = 6) -> DyadicHistogram:
    """
    Push the stationary vector forward by Σ a_k 2^k ↦ Σ a_k 2^{-k-1}: the last bit becomes
    the first binary digit.
    """
    if resolution > chain.length:
        raise DomainError("resolution exceeds the chain length")
    marginal = chain.marginal(resolution)
    index = np.arange(1 << resolution)
    reversed_index = np.zeros_like(index)
    for k in range(resolution):
        reversed_index |= ((index >> k) & 1) << (resolution - 1 - k)
    masses = np.zeros(1 << resolution)
    masses[reversed_index] = marginal
    return DyadicHistogram(resolution, masses)


@dataclass
class TrendRow:
    length: int
    p3: float
    marginal_gap: float


def stationary_trend(lengths=range(8, 17), tol: float = 1e-13) -> list[TrendRow]:
    """Implied p₃ per L, and the L1 gap between the L-bit marginal of the (L+1)-chain and the L-chain."""
    rows = []
    lengths = list(lengths)
    chains = {L: truncated_stationary(L, tol) for L in [*lengths, lengths[-1] + 1]}
    for L in lengths:
        gap = float(np.abs(chains[L + 1].marginal(L) - chains[L].vector).sum())
        rows.append(TrendRow(L, chains[L].p3, gap))
    return rows


def dual_chain_step(pi: np.ndarray, length: int) -> np.ndarray:
    """
    Five moves with probability 1/5 each: ±1 mod 2^L, drop the last bit with a fresh uniform
    leading bit, append 0 and append 1 (dropping the first bit).
    """
    m = 1 << length
    states = np.arange(m)
    w = pi / 5
    out = np.roll(w, 1) + np.roll(w, -1)
    out += np.bincount(states >> 1, weights=w / 2, minlength=m)
    out += np.bincount((states >> 1) | (m >> 1), weights=w / 2, minlength=m)
    out += np.bincount((2 * states) % m, weights=w, minlength=m)
    out += np.bincount((2 * states + 1) % m, weights=w, minlength=m)
    return out


def dual_stationary_invariance_check(length: int, vector: np.ndarray | None = None) -> float:
    """L1 distance between a vector (uniform by default) and its image under one dual-chain step."""
    if not 1 <= length <= 16:
        raise DomainError("invariance is checked for 1 <= L <= 16")
    pi = np.full(1 << length, 2.0 ** -length) if vector is None else np.asarray(vector, dtype=np.float64)
    return float(np.abs(dual_chain_step(pi, length) - pi).sum())

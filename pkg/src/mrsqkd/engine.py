"""Quantum sampling engine with two interchangeable backends.

DENSE keeps the full statevector and doubles as the exact oracle: its
``outcome_distribution`` enumerates measurement outcomes with exact
probabilities. TABLEAU is the scalable stabilizer backend used for the
Monte Carlo campaigns. Both expose the same operation set: phi+ pair
preparation, the single-qubit gates X, Y (as i*sigma_y), Z, H, Z-basis
measurement, and Bell measurement.

Bell measurement convention (fixed identically for both backends):
CNOT with control a and target b, then H on a; Z-measuring a gives the
sign bit s and Z-measuring b the parity bit p, and (p, s) indexes the
Bell types as (0,0) phi+, (0,1) phi-, (1,0) psi+, (1,1) psi-. The
measured pair is left collapsed onto the reported Bell state.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence, Union

import numpy as np

from .bell_algebra import BellType, bell_from_code
from .dense import DENSE_QUBIT_CAP, DenseState
from .tableau import TableauState


class Backend(Enum):
    DENSE = "dense"
    TABLEAU = "tableau"


class GateName(Enum):
    X = "x"
    Y = "y"
    Z = "z"
    H = "h"


class CapacityError(Exception):
    """A register cannot hold the requested number of qubits."""


class UnsupportedOperationError(RuntimeError):
    """The operation is not available on this backend."""


@dataclass(frozen=True)
class ZMeasure:
    qubit: int


@dataclass(frozen=True)
class BellMeasure:
    a: int
    b: int


PlanStep = Union[ZMeasure, BellMeasure]
PlanOutcome = tuple  # mixed tuple of 0/1 bits and BellType values


def _philox_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed & (2**64 - 1)))


def derive_seed(master_seed: int, index: int) -> int:
    """Counter-based seed derivation: stream ``index`` of ``master_seed``.

    Independent of evaluation order, so parallel consumers can derive
    their own streams without coordination.
    """
    bg = np.random.Philox(key=master_seed & (2**64 - 1), counter=[0, 0, 0, index])
    return int(np.random.Generator(bg).integers(0, 2**63, dtype=np.int64))


class Register:
    """A register of qubits on one backend. Single-threaded; independent
    registers can be used concurrently."""

    def __init__(self, size: int, backend: Backend, seed: int) -> None:
        if size < 1:
            raise ValueError(f"register size must be >= 1, got {size}")
        if backend is Backend.DENSE and size > DENSE_QUBIT_CAP:
            raise CapacityError(
                f"dense backend holds at most {DENSE_QUBIT_CAP} qubits, got {size}"
            )
        self.size = size
        self.backend = backend
        self.seed = seed
        rng = _philox_rng(seed)
        if backend is Backend.DENSE:
            self._state: DenseState | TableauState = DenseState(size, rng)
        else:
            self._state = TableauState(size, rng)

    # -- validation ------------------------------------------------------

    def _check_qubit(self, q: int) -> None:
        if not (0 <= q < self.size):
            raise ValueError(f"qubit {q} out of range for size-{self.size} register")

    # -- operations ------------------------------------------------------

    def prepare_bell_phi_plus(self, a: int, b: int) -> None:
        """Entangle qubits (a, b) into phi+. Both must currently be fresh
        |0> qubits; the result is undefined otherwise."""
        self._check_qubit(a)
        self._check_qubit(b)
        if a == b:
            raise ValueError("cannot prepare a Bell pair on a single qubit")
        st = self._state
        if isinstance(st, TableauState):
            st.prepare_bell(a, b)
        else:
            st.apply_h(a)
            st.apply_cnot(a, b)

    def apply_gate(self, gate: GateName, q: int) -> None:
        self._check_qubit(q)
        st = self._state
        if gate is GateName.X:
            st.apply_x(q)
        elif gate is GateName.Y:
            st.apply_y(q)
        elif gate is GateName.Z:
            st.apply_z(q)
        else:
            st.apply_h(q)

    def measure_z(self, q: int) -> int:
        self._check_qubit(q)
        return self._state.measure_z(q)

    def measure_bell(self, a: int, b: int) -> BellType:
        self._check_qubit(a)
        self._check_qubit(b)
        if a == b:
            raise ValueError("Bell measurement needs two distinct qubits")
        st = self._state
        if isinstance(st, TableauState):
            # Equivalent joint measurement of the commuting pair X_aX_b
            # (sign bit) and Z_aZ_b (parity bit); collapses straight onto
            # the Bell state, matching the gate decomposition below.
            pair = (1 << a) | (1 << b)
            s = st.measure_pauli(pair, 0)
            p = st.measure_pauli(0, pair)
        else:
            st.apply_cnot(a, b)
            st.apply_h(a)
            s = st.measure_z(a)
            p = st.measure_z(b)
            st.apply_h(a)
            st.apply_cnot(a, b)
        return bell_from_code((p << 1) | s)

    # -- exact oracle ------------------------------------------------------

    def outcome_distribution(self, plan: Sequence[PlanStep]) -> Mapping[PlanOutcome, float]:
        """Exact outcome probabilities of running ``plan`` from the current
        state, computed on a copy (the live register is not collapsed).
        DENSE backend only."""
        if self.backend is not Backend.DENSE:
            raise UnsupportedOperationError(
                "outcome_distribution needs exact amplitudes (dense backend only)"
            )
        for step in plan:
            if isinstance(step, ZMeasure):
                self._check_qubit(step.qubit)
            else:
                self._check_qubit(step.a)
                self._check_qubit(step.b)
                if step.a == step.b:
                    raise ValueError("Bell measurement needs two distinct qubits")

        dist: dict[PlanOutcome, float] = {}

        def walk(state: DenseState, idx: int, prefix: PlanOutcome, prob: float) -> None:
            if idx == len(plan):
                dist[prefix] = dist.get(prefix, 0.0) + prob
                return
            step = plan[idx]
            if isinstance(step, ZMeasure):
                p1 = state.prob_one(step.qubit)
                for outcome, p in ((0, 1.0 - p1), (1, p1)):
                    if p > 1e-12:
                        branch = state.copy()
                        branch.project(step.qubit, outcome)
                        walk(branch, idx + 1, prefix + (outcome,), prob * p)
            else:
                work = state.copy()
                work.apply_cnot(step.a, step.b)
                work.apply_h(step.a)
                joint = work.pair_probs(step.a, step.b)
                for s in (0, 1):
                    for pb in (0, 1):
                        p = float(joint[s][pb])
                        if p <= 1e-12:
                            continue
                        branch = work.copy()
                        branch.project_pair(step.a, step.b, s, pb, p)
                        branch.apply_h(step.a)
                        branch.apply_cnot(step.a, step.b)
                        walk(
                            branch,
                            idx + 1,
                            prefix + (bell_from_code((pb << 1) | s),),
                            prob * p,
                        )

        assert isinstance(self._state, DenseState)
        walk(self._state.copy(), 0, (), 1.0)
        total = sum(dist.values())
        assert abs(total - 1.0) < 1e-9, f"probabilities sum to {total}"
        return dist


def new_register(size: int, backend: Backend, seed: int) -> Register:
    """Fresh register with every qubit in |0>, deterministic for a seed."""
    return Register(size, backend, seed)

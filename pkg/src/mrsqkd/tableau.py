"""Stabilizer tableau backend in the Aaronson-Gottesman style.

Tracks n destabilizer rows and n stabilizer rows, each a Pauli string with
a sign bit. Rows and columns are both kept as Python integers used as
bitmasks: bit q of ``x_rows[h]`` is the X component of generator h on
qubit q, and bit h of ``x_cols[q]`` is the same component indexed the
other way. The duplication makes single-qubit gates a couple of integer
operations (they act on one or two columns) while measurements, which
multiply a handful of rows together, work on whole rows at once.

Entries initialize lazily (None means the fresh |0...0> pattern:
destabilizer h is X_h, stabilizer h is Z_h) so creating a huge register
costs nothing until qubits are touched.

Sign bits live in one integer ``r`` (bit h set means generator h carries
a minus sign). Global phase is not tracked; i*sigma_y and sigma_y are the
same operation here.
"""
from __future__ import annotations

import numpy as np


def _sum_g(xi: int, zi: int, xh: int, zh: int) -> int:
    """Phase exponent contribution of multiplying Pauli row (xi, zi) into
    row (xh, zh): popcount of +i positions minus popcount of -i positions.
    """
    yi = xi & zi
    xi_o = xi ^ yi
    zi_o = zi ^ yi
    yh = xh & zh
    xh_o = xh ^ yh
    zh_o = zh ^ yh
    plus = (yi & zh_o) | (xi_o & yh) | (zi_o & xh_o)
    minus = (yi & xh_o) | (xi_o & zh_o) | (zi_o & yh)
    return plus.bit_count() - minus.bit_count()


class TableauState:
    """Stabilizer state of n qubits under the Clifford gate set used here."""

    def __init__(self, n: int, rng: np.random.Generator) -> None:
        self.n = n
        self._rng = rng
        self._bits: list[int] = []
        # Rows 0..n-1 destabilizers, n..2n-1 stabilizers; None = fresh.
        self._xr: list[int | None] = [None] * (2 * n)
        self._zr: list[int | None] = [None] * (2 * n)
        self._xc: list[int | None] = [None] * n
        self._zc: list[int | None] = [None] * n
        self._r = 0

    # -- randomness ------------------------------------------------------

    def _rand_bit(self) -> int:
        if not self._bits:
            self._bits = self._rng.integers(0, 2, size=512, dtype=np.uint8).tolist()
        return self._bits.pop()

    # -- lazy row/column access -------------------------------------------

    def _xrow(self, h: int) -> int:
        v = self._xr[h]
        if v is None:
            return (1 << h) if h < self.n else 0
        return v

    def _zrow(self, h: int) -> int:
        v = self._zr[h]
        if v is None:
            return (1 << (h - self.n)) if h >= self.n else 0
        return v

    def _xcol(self, q: int) -> int:
        v = self._xc[q]
        return (1 << q) if v is None else v

    def _zcol(self, q: int) -> int:
        v = self._zc[q]
        return (1 << (self.n + q)) if v is None else v

    # -- gates -------------------------------------------------------------

    def apply_x(self, q: int) -> None:
        self._r ^= self._zcol(q)

    def apply_z(self, q: int) -> None:
        self._r ^= self._xcol(q)

    def apply_y(self, q: int) -> None:
        self._r ^= self._xcol(q) ^ self._zcol(q)

    def apply_h(self, q: int) -> None:
        xc = self._xcol(q)
        zc = self._zcol(q)
        self._r ^= xc & zc
        # Swap X and Z components on qubit q, row side then column side.
        bit = 1 << q
        m = xc ^ zc
        while m:
            low = m & -m
            h = low.bit_length() - 1
            self._xr[h] = self._xrow(h) ^ bit
            self._zr[h] = self._zrow(h) ^ bit
            m ^= low
        self._xc[q], self._zc[q] = zc, xc

    def apply_cnot(self, c: int, t: int) -> None:
        xc_c = self._xcol(c)
        zc_c = self._zcol(c)
        xc_t = self._xcol(t)
        zc_t = self._zcol(t)
        self._r ^= xc_c & zc_t & ~(xc_t ^ zc_c)
        tbit = 1 << t
        m = xc_c
        while m:
            low = m & -m
            h = low.bit_length() - 1
            self._xr[h] = self._xrow(h) ^ tbit
            m ^= low
        cbit = 1 << c
        m = zc_t
        while m:
            low = m & -m
            h = low.bit_length() - 1
            self._zr[h] = self._zrow(h) ^ cbit
            m ^= low
        self._xc[t] = xc_t ^ xc_c
        self._zc[c] = zc_c ^ zc_t

    def prepare_bell(self, a: int, b: int) -> None:
        """phi+ on (a, b); caller guarantees both qubits are fresh |0>."""
        self.apply_h(a)
        self.apply_cnot(a, b)

    # -- row updates during measurement -------------------------------------

    def _rowsum(self, h: int, i: int) -> None:
        """row h := row i * row h, with sign bookkeeping."""
        xi = self._xrow(i)
        zi = self._zrow(i)
        xh = self._xrow(h)
        zh = self._zrow(h)
        r = self._r
        ph = (2 * ((r >> h) & 1) + 2 * ((r >> i) & 1) + _sum_g(xi, zi, xh, zh)) & 3
        assert ph in (0, 2), "rowsum produced an imaginary phase"
        hbit = 1 << h
        self._r = (r & ~hbit) | ((ph >> 1) << h)
        self._xr[h] = xh ^ xi
        self._zr[h] = zh ^ zi
        m = xi
        while m:
            low = m & -m
            q = low.bit_length() - 1
            self._xc[q] = self._xcol(q) ^ hbit
            m ^= low
        m = zi
        while m:
            low = m & -m
            q = low.bit_length() - 1
            self._zc[q] = self._zcol(q) ^ hbit
            m ^= low

    def _set_row(self, h: int, nx: int, nz: int, sign: int) -> None:
        """Overwrite row h with the Pauli (nx, nz) and the given sign bit."""
        hbit = 1 << h
        m = self._xrow(h) ^ nx
        while m:
            low = m & -m
            q = low.bit_length() - 1
            self._xc[q] = self._xcol(q) ^ hbit
            m ^= low
        m = self._zrow(h) ^ nz
        while m:
            low = m & -m
            q = low.bit_length() - 1
            self._zc[q] = self._zcol(q) ^ hbit
            m ^= low
        self._xr[h] = nx
        self._zr[h] = nz
        self._r = (self._r & ~hbit) | (sign << h)

    # -- measurement ---------------------------------------------------------

    def measure_pauli(self, px: int, pz: int) -> int:
        """Measure the Pauli observable with X mask px and Z mask pz
        (X/Z overlap not supported: no Y components are ever measured here).
        Returns the outcome bit (0 for +1, 1 for -1 eigenvalue)."""
        assert px & pz == 0
        n = self.n
        anti = 0
        m = pz
        while m:
            low = m & -m
            anti ^= self._xcol(low.bit_length() - 1)
            m ^= low
        m = px
        while m:
            low = m & -m
            anti ^= self._zcol(low.bit_length() - 1)
            m ^= low

        stab_anti = anti >> n
        if stab_anti:
            p = n + (stab_anti & -stab_anti).bit_length() - 1
            # The pivot's partner destabilizer (row p-n) anticommutes with the
            # pivot itself; it is overwritten below, so never rowsum it.
            others = anti & ~(1 << p) & ~(1 << (p - n))
            while others:
                low = others & -others
                self._rowsum(low.bit_length() - 1, p)
                others ^= low
            outcome = self._rand_bit()
            d = p - n
            self._set_row(d, self._xrow(p), self._zrow(p), (self._r >> p) & 1)
            self._set_row(p, px, pz, outcome)
            return outcome

        # Deterministic: multiply out the stabilizers whose destabilizer
        # partners anticommute with the observable.
        acc_x = 0
        acc_z = 0
        ph = 0
        m = anti & ((1 << n) - 1)
        while m:
            low = m & -m
            i = self.n + low.bit_length() - 1
            xi = self._xrow(i)
            zi = self._zrow(i)
            ph += 2 * ((self._r >> i) & 1) + _sum_g(xi, zi, acc_x, acc_z)
            acc_x ^= xi
            acc_z ^= zi
            m ^= low
        ph &= 3
        assert ph in (0, 2), "deterministic outcome with imaginary phase"
        assert acc_x == px and acc_z == pz, "stabilizer product mismatch"
        return ph >> 1

    def measure_z(self, q: int) -> int:
        return self.measure_pauli(0, 1 << q)

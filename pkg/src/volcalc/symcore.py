"""Exact graded symbol algebra over the flat torus.

Coefficients are trigonometric polynomials with complex double amplitudes.
A symbol is a finite sum of terms

    c(x) * xi^beta * Lambda(x, xi, tau)^l,
    Lambda(x, xi, tau) = i*tau + G(x)(xi, xi),

for a fixed positive quadratic form G.  Free tau powers never appear:
i*tau is rewritten as Lambda - G(x)(xi, xi), so every stored term is
parabolically homogeneous of explicit degree |beta| + 2*l under the
anisotropic dilation (xi, tau) -> (s*xi, s^2*tau).  All operations are
pure; values are immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "CoefficientField",
    "QuadraticForm",
    "SymbolTerm",
    "ParabolicSymbol",
    "DomainError",
    "FormMismatchError",
    "NotPositiveDefiniteError",
    "SingularityError",
    "term_degree",
    "dilate",
    "symbol_mul",
    "symbol_deriv",
    "symbol_eval",
    "lambda_power",
    "quadratic_symbol",
    "aniso_norm",
    "multi_indices",
]


class DomainError(ValueError):
    """Argument outside the mathematically admissible range."""


class FormMismatchError(ValueError):
    """Symbols built over different quadratic forms cannot be combined."""


class NotPositiveDefiniteError(ValueError):
    """Quadratic form fails the positivity floor on the validation grid."""


class SingularityError(ArithmeticError):
    """Evaluation hit a pole (Lambda = 0 with a negative power present)."""


def aniso_norm(xi, tau) -> float:
    """Anisotropic norm (|xi|^2 + |tau|)^(1/2), degree 1 under dilation."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    return float(np.sqrt(np.dot(xi, xi) + abs(tau)))


def multi_indices(dim: int, total: int):
    """All multi-indices of length `dim` with |beta| == total."""
    if dim == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in multi_indices(dim - 1, total - head):
            yield (head,) + rest


class CoefficientField:
    """Trigonometric polynomial sum_k c_k exp(i<k, x>) on the d-torus.

    Frequencies k are integer tuples of length d; amplitudes are complex
    doubles.  Exactly-zero amplitudes are dropped at construction.
    """

    __slots__ = ("dim", "_amp")

    def __init__(self, dim, amplitudes=None):
        self.dim = int(dim)
        if self.dim < 1:
            raise DomainError("dimension must be >= 1")
        amp = {}
        for k, c in (amplitudes or {}).items():
            key = tuple(int(ki) for ki in (k if isinstance(k, tuple) else (k,)))
            if len(key) != self.dim:
                raise ValueError(f"frequency {key} has wrong length for d={self.dim}")
            c = complex(c)
            if c != 0:
                amp[key] = amp.get(key, 0.0 + 0.0j) + c
        self._amp = {k: c for k, c in amp.items() if c != 0}

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, dim):
        return cls(dim, {})

    @classmethod
    def constant(cls, dim, value):
        return cls(dim, {(0,) * dim: value})

    @classmethod
    def harmonic(cls, dim, freq, amplitude=1.0):
        return cls(dim, {tuple(freq): amplitude})

    @classmethod
    def real_cosine(cls, dim, freq, amplitude=1.0):
        """amplitude * cos(<freq, x>)."""
        k = tuple(freq)
        mk = tuple(-f for f in k)
        return cls(dim, {k: amplitude / 2.0, mk: amplitude / 2.0})

    @classmethod
    def real_sine(cls, dim, freq, amplitude=1.0):
        """amplitude * sin(<freq, x>)."""
        k = tuple(freq)
        mk = tuple(-f for f in k)
        return cls(dim, {k: amplitude / 2.0j, mk: -amplitude / 2.0j})

    @classmethod
    def from_grid(cls, values, prune_rel=1e-13):
        """Project samples on the uniform grid x_j = 2*pi*j/n back to amplitudes."""
        values = np.asarray(values, dtype=complex)
        dim = values.ndim
        n = values.shape[0]
        if any(s != n for s in values.shape):
            raise ValueError("grid must be square")
        coef = np.fft.fftn(values) / values.size
        freqs = (np.fft.fftfreq(n, d=1.0 / n).astype(int),) * dim
        amp = {}
        cutoff = prune_rel * max(np.max(np.abs(coef)), 1e-300)
        for idx in np.ndindex(values.shape):
            c = coef[idx]
            if abs(c) > cutoff:
                amp[tuple(int(freqs[a][i]) for a, i in enumerate(idx))] = complex(c)
        return cls(dim, amp)

    # -- queries -----------------------------------------------------------

    @property
    def amplitudes(self):
        return dict(self._amp)

    def is_zero(self) -> bool:
        return not self._amp

    def norm_inf(self) -> float:
        return max((abs(c) for c in self._amp.values()), default=0.0)

    def max_freq(self) -> int:
        return max((max(abs(f) for f in k) for k in self._amp), default=0)

    def is_real(self, tol=1e-12) -> bool:
        """Check the reality condition c_{-k} = conj(c_k)."""
        scale = max(self.norm_inf(), 1.0)
        for k, c in self._amp.items():
            mk = tuple(-f for f in k)
            if abs(self._amp.get(mk, 0.0) - np.conj(c)) > tol * scale:
                return False
        return True

    def __eq__(self, other):
        return isinstance(other, CoefficientField) and self.dim == other.dim \
            and self._amp == other._amp

    def __hash__(self):
        return hash((self.dim, tuple(sorted(self._amp.items()))))

    def __repr__(self):
        parts = [f"{c:.6g}*e^(i<{k},x>)" for k, c in sorted(self._amp.items())]
        return "CoefficientField(" + (" + ".join(parts) if parts else "0") + ")"

    # -- algebra -----------------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, CoefficientField):
            return NotImplemented
        amp = dict(self._amp)
        for k, c in other._amp.items():
            amp[k] = amp.get(k, 0.0) + c
        return CoefficientField(self.dim, amp)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return CoefficientField(self.dim, {k: -c for k, c in self._amp.items()})

    def __mul__(self, other):
        if isinstance(other, CoefficientField):
            amp = {}
            for k1, c1 in self._amp.items():
                for k2, c2 in other._amp.items():
                    k = tuple(a + b for a, b in zip(k1, k2))
                    amp[k] = amp.get(k, 0.0) + c1 * c2
            return CoefficientField(self.dim, amp)
        return self.scale(other)

    __rmul__ = __mul__

    def scale(self, factor):
        factor = complex(factor)
        return CoefficientField(self.dim, {k: factor * c for k, c in self._amp.items()})

    def deriv(self, axis: int):
        """Exact partial derivative along x_axis: c_k -> i*k_axis*c_k."""
        if not 0 <= axis < self.dim:
            raise DomainError(f"axis {axis} out of range for d={self.dim}")
        return CoefficientField(
            self.dim, {k: 1j * k[axis] * c for k, c in self._amp.items() if k[axis] != 0}
        )

    def conj(self):
        return CoefficientField(
            self.dim, {tuple(-f for f in k): np.conj(c) for k, c in self._amp.items()}
        )

    def prune(self, tol_abs):
        return CoefficientField(
            self.dim, {k: c for k, c in self._amp.items() if abs(c) > tol_abs}
        )

    # -- evaluation --------------------------------------------------------

    def _points(self, x):
        a = np.asarray(x, dtype=float)
        if a.ndim == 0:
            if self.dim != 1:
                raise ValueError("scalar point only valid for d=1")
            return a.reshape(1, 1), True
        if a.ndim == 1:
            if a.shape[0] == self.dim:
                return a.reshape(1, self.dim), True
            if self.dim == 1:
                return a.reshape(-1, 1), False
            raise ValueError(f"point of length {a.shape[0]} for d={self.dim}")
        if a.shape[-1] != self.dim:
            raise ValueError("trailing axis must have length d")
        return a.reshape(-1, self.dim), False

    def evaluate(self, x):
        """Evaluate at one point (complex scalar) or a batch (complex array)."""
        pts, single = self._points(x)
        out = np.zeros(pts.shape[0], dtype=complex)
        for k, c in self._amp.items():
            out += c * np.exp(1j * (pts @ np.asarray(k, dtype=float)))
        return out[0] if single else out

    def sample_grid(self, n=128):
        """Values on the uniform tensor grid x_j = 2*pi*j/n (shape (n,)*d)."""
        axes = [2.0 * np.pi * np.arange(n) / n] * self.dim
        mesh = np.meshgrid(*axes, indexing="ij")
        out = np.zeros(mesh[0].shape, dtype=complex)
        for k, c in self._amp.items():
            phase = np.zeros(mesh[0].shape)
            for a in range(self.dim):
                if k[a]:
                    phase = phase + k[a] * mesh[a]
            out += c * np.exp(1j * phase)
        return out


class QuadraticForm:
    """Symmetric d x d array of trig-polynomial entries g_ij(x).

    G(x)(xi, xi) = sum_ij g_ij(x) xi_i xi_j.  Positive definiteness is
    checked numerically on a uniform validation grid (64^d points by
    default) against a small floor; symbolic positivity is out of reach.
    """

    __slots__ = ("dim", "entries")

    def __init__(self, entries, check_positive=True, positivity_floor=1e-8, grid_n=64):
        rows = tuple(tuple(row) for row in entries)
        self.dim = len(rows)
        for i in range(self.dim):
            if len(rows[i]) != self.dim:
                raise ValueError("entries must form a square array")
            for j in range(self.dim):
                if not isinstance(rows[i][j], CoefficientField):
                    raise TypeError("entries must be CoefficientField")
                if rows[i][j].dim != self.dim:
                    raise ValueError("entry dimension mismatch")
                if rows[i][j]._amp != rows[j][i]._amp:
                    raise ValueError(f"g[{i}][{j}] != g[{j}][{i}]: form must be symmetric")
        self.entries = rows
        if check_positive:
            floor = self.min_eig_on_grid(grid_n)
            if floor < positivity_floor:
                raise NotPositiveDefiniteError(
                    f"min eigenvalue {floor:.3e} below floor {positivity_floor:.1e}"
                )

    @classmethod
    def flat(cls, dim):
        ent = [
            [CoefficientField.constant(dim, 1.0 if i == j else 0.0) for j in range(dim)]
            for i in range(dim)
        ]
        return cls(ent)

    @classmethod
    def isotropic(cls, field: CoefficientField):
        """diag(g(x), ..., g(x)) for a scalar coefficient g."""
        d = field.dim
        zero = CoefficientField.zero(d)
        ent = [[field if i == j else zero for j in range(d)] for i in range(d)]
        return cls(ent)

    def __eq__(self, other):
        return isinstance(other, QuadraticForm) and self.dim == other.dim and all(
            self.entries[i][j]._amp == other.entries[i][j]._amp
            for i in range(self.dim) for j in range(self.dim)
        )

    def __hash__(self):
        return hash((self.dim, tuple(tuple(e for e in row) for row in self.entries)))

    def is_constant(self) -> bool:
        return all(e.max_freq() == 0 for row in self.entries for e in row)

    def matrix_at(self, x):
        """Real d x d matrix [g_ij(x)]."""
        m = np.empty((self.dim, self.dim), dtype=complex)
        for i in range(self.dim):
            for j in range(self.dim):
                m[i, j] = self.entries[i][j].evaluate(x)
        if np.max(np.abs(m.imag)) > 1e-10 * max(1.0, np.max(np.abs(m.real))):
            raise ValueError("quadratic form has a non-real value")
        return m.real

    def value(self, x, xi):
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        m = self.matrix_at(x)
        return float(xi @ m @ xi)

    def deriv(self, axis: int):
        ent = [[self.entries[i][j].deriv(axis) for j in range(self.dim)]
               for i in range(self.dim)]
        return QuadraticForm(ent, check_positive=False)

    def min_eig_on_grid(self, grid_n=64):
        pts = 2.0 * np.pi * np.arange(grid_n) / grid_n
        grids = np.meshgrid(*([pts] * self.dim), indexing="ij")
        flat = np.stack([g.ravel() for g in grids], axis=-1)
        mats = np.zeros((flat.shape[0], self.dim, self.dim), dtype=complex)
        for i in range(self.dim):
            for j in range(self.dim):
                mats[:, i, j] = self.entries[i][j].evaluate(flat)
        return float(np.min(np.linalg.eigvalsh(0.5 * (mats + np.conj(np.swapaxes(mats, 1, 2)))).real))

    def __repr__(self):
        return f"QuadraticForm(d={self.dim}, constant={self.is_constant()})"


@dataclass(frozen=True)
class SymbolTerm:
    """One canonical term c(x) * xi^beta * Lambda^lpow."""

    coeff: CoefficientField
    beta: tuple
    lpow: int

    @property
    def degree(self) -> int:
        return sum(self.beta) + 2 * self.lpow

    def __repr__(self):
        return f"SymbolTerm(beta={self.beta}, lpow={self.lpow}, deg={self.degree})"


def term_degree(term: SymbolTerm) -> int:
    """Parabolic degree |beta| + 2*lpow of a canonical term."""
    return term.degree


class ParabolicSymbol:
    """Finite sum of canonical terms over a shared quadratic form.

    `order` is the nominal top degree (an upper bound; graded pieces of
    lower degree may be the only nonzero ones after cancellation).
    """

    __slots__ = ("form", "_terms", "order")

    def __init__(self, form: QuadraticForm, terms=None, order=None):
        self.form = form
        d = form.dim
        tmap = {}
        for (beta, lpow), coeff in (terms or {}).items():
            beta = tuple(int(b) for b in beta)
            if len(beta) != d or any(b < 0 for b in beta):
                raise ValueError(f"bad multi-index {beta}")
            if coeff.dim != d:
                raise ValueError("coefficient dimension mismatch")
            if coeff.is_zero():
                continue
            key = (beta, int(lpow))
            tmap[key] = tmap.get(key, CoefficientField.zero(d)) + coeff
        self._terms = {k: c for k, c in tmap.items() if not c.is_zero()}
        top = max((sum(b) + 2 * l for (b, l) in self._terms), default=None)
        if order is None:
            self.order = top if top is not None else 0
        else:
            self.order = int(order)
            if top is not None and top > self.order:
                raise ValueError(f"terms of degree {top} exceed declared order {order}")

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, form, order=0):
        return cls(form, {}, order=order)

    @classmethod
    def constant(cls, form, value):
        d = form.dim
        return cls(form, {((0,) * d, 0): CoefficientField.constant(d, value)})

    @classmethod
    def from_terms(cls, form, triples, order=None):
        """Build from an iterable of (coeff, beta, lpow)."""
        tmap = {}
        d = form.dim
        for coeff, beta, lpow in triples:
            key = (tuple(beta), int(lpow))
            tmap[key] = tmap.get(key, CoefficientField.zero(d)) + coeff
        return cls(form, tmap, order=order)

    # -- queries -----------------------------------------------------------

    @property
    def dim(self):
        return self.form.dim

    def terms(self):
        """Deterministically ordered list of SymbolTerm."""
        keys = sorted(self._terms, key=lambda k: (-(sum(k[0]) + 2 * k[1]), k[0], k[1]))
        return [SymbolTerm(self._terms[k], k[0], k[1]) for k in keys]

    def term_map(self):
        return dict(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def degrees(self):
        return sorted({sum(b) + 2 * l for (b, l) in self._terms}, reverse=True)

    def coeff_norm(self) -> float:
        return max((c.norm_inf() for c in self._terms.values()), default=0.0)

    def piece_norm(self, degree: int) -> float:
        return max((c.norm_inf() for (b, l), c in self._terms.items()
                    if sum(b) + 2 * l == degree), default=0.0)

    def top_degree(self, tol=0.0):
        """Highest degree carrying a coefficient above `tol` (None if none)."""
        degs = [sum(b) + 2 * l for (b, l), c in self._terms.items()
                if c.norm_inf() > tol]
        return max(degs, default=None)

    def graded_piece(self, degree: int):
        sub = {k: c for k, c in self._terms.items() if sum(k[0]) + 2 * k[1] == degree}
        return ParabolicSymbol(self.form, sub, order=degree)

    def principal_part(self):
        return self.graded_piece(self.order)

    def truncate_below(self, min_degree: int):
        sub = {k: c for k, c in self._terms.items() if sum(k[0]) + 2 * k[1] >= min_degree}
        return ParabolicSymbol(self.form, sub, order=self.order)

    def prune(self, tol_abs):
        sub = {k: c.prune(tol_abs) for k, c in self._terms.items()}
        return ParabolicSymbol(self.form, sub, order=self.order)

    def allclose(self, other, tol=1e-12):
        if self.form != other.form:
            return False
        keys = set(self._terms) | set(other._terms)
        scale = max(self.coeff_norm(), other.coeff_norm(), 1.0)
        zero = CoefficientField.zero(self.dim)
        for k in keys:
            diff = self._terms.get(k, zero) - other._terms.get(k, zero)
            if diff.norm_inf() > tol * scale:
                return False
        return True

    def __repr__(self):
        return (f"ParabolicSymbol(order={self.order}, terms={len(self._terms)}, "
                f"degrees={self.degrees()})")

    # -- algebra -----------------------------------------------------------

    def _check_form(self, other):
        if self.form != other.form:
            raise FormMismatchError("symbols come from different calculi (distinct forms)")

    def __add__(self, other):
        if isinstance(other, (int, float, complex)):
            other = ParabolicSymbol.constant(self.form, other)
        self._check_form(other)
        tmap = dict(self._terms)
        for k, c in other._terms.items():
            tmap[k] = tmap.get(k, CoefficientField.zero(self.dim)) + c
        return ParabolicSymbol(self.form, tmap, order=max(self.order, other.order))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (int, float, complex)):
            other = ParabolicSymbol.constant(self.form, other)
        return self + (-other)

    def __neg__(self):
        return ParabolicSymbol(self.form, {k: -c for k, c in self._terms.items()},
                               order=self.order)

    def scale(self, factor):
        if factor == 0:
            return ParabolicSymbol.zero(self.form, order=self.order)
        return ParabolicSymbol(self.form,
                               {k: c.scale(factor) for k, c in self._terms.items()},
                               order=self.order)

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return self.scale(other)
        self._check_form(other)
        tmap = {}
        d = self.dim
        for (b1, l1), c1 in self._terms.items():
            for (b2, l2), c2 in other._terms.items():
                key = (tuple(a + b for a, b in zip(b1, b2)), l1 + l2)
                prod = c1 * c2
                tmap[key] = tmap.get(key, CoefficientField.zero(d)) + prod
        return ParabolicSymbol(self.form, tmap, order=self.order + other.order)

    __rmul__ = __mul__

    def dilate(self, lam):
        """(x, xi, tau) -> q(x, lam*xi, lam^2*tau); piece of degree s gains lam^s."""
        if not lam > 0:
            raise DomainError("dilation parameter must be positive")
        lam = float(lam)
        tmap = {k: c.scale(lam ** (sum(k[0]) + 2 * k[1])) for k, c in self._terms.items()}
        return ParabolicSymbol(self.form, tmap, order=self.order)

    def deriv(self, var):
        """Exact derivative; var is 'tau', ('xi', i) or ('x', i).

        d/dtau Lambda^l = i*l*Lambda^(l-1)
        d/dxi_i Lambda^l = 2*l*Lambda^(l-1) * sum_j g_ij xi_j
        d/dx_i  Lambda^l = l*Lambda^(l-1) * (d_i G)(xi, xi)
        """
        d = self.dim
        out = {}

        def _acc(key, coeff):
            if coeff.is_zero():
                return
            out[key] = out.get(key, CoefficientField.zero(d)) + coeff

        if var == "tau":
            for (beta, l), c in self._terms.items():
                if l != 0:
                    _acc((beta, l - 1), c.scale(1j * l))
            return ParabolicSymbol(self.form, out, order=self.order - 2)

        kind, axis = var
        axis = int(axis)
        if not 0 <= axis < d:
            raise DomainError(f"axis {axis} out of range for d={d}")

        if kind == "xi":
            for (beta, l), c in self._terms.items():
                if beta[axis] > 0:
                    nb = list(beta)
                    nb[axis] -= 1
                    _acc((tuple(nb), l), c.scale(beta[axis]))
                if l != 0:
                    for j in range(d):
                        g = self.form.entries[axis][j]
                        if g.is_zero():
                            continue
                        nb = list(beta)
                        nb[j] += 1
                        _acc((tuple(nb), l - 1), (g * c).scale(2 * l))
            return ParabolicSymbol(self.form, out, order=self.order - 1)

        if kind == "x":
            dg = None
            for (beta, l), c in self._terms.items():
                _acc((beta, l), c.deriv(axis))
                if l != 0:
                    if dg is None:
                        dg = self.form.deriv(axis)
                    for i in range(d):
                        for j in range(i, d):
                            e = dg.entries[i][j]
                            if e.is_zero():
                                continue
                            nb = list(beta)
                            nb[i] += 1
                            nb[j] += 1
                            mult = l if i == j else 2 * l
                            _acc((tuple(nb), l - 1), (e * c).scale(mult))
            return ParabolicSymbol(self.form, out, order=self.order)

        raise DomainError(f"unknown variable kind {kind!r}")

    # -- evaluation --------------------------------------------------------

    def evaluate(self, x, xi, tau):
        """Value at a single point; raises SingularityError at a pole."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        lam = 1j * complex(tau) + self.form.value(x, xi)
        has_neg = any(l < 0 for (_, l) in self._terms)
        if has_neg and lam == 0:
            raise SingularityError("Lambda = 0 with a negative power present")
        total = 0.0 + 0.0j
        for (beta, l), c in self._terms.items():
            mono = 1.0
            for a, b in enumerate(beta):
                if b:
                    mono *= xi[a] ** b
            total += c.evaluate(x) * mono * lam ** l
        return total

    def evaluate_tau_grid(self, x, xi, taus):
        """Vectorized value over an array of tau at fixed (x, xi)."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        taus = np.asarray(taus)
        lam = 1j * taus + self.form.value(x, xi)
        has_neg = any(l < 0 for (_, l) in self._terms)
        if has_neg and np.any(lam == 0):
            raise SingularityError("Lambda = 0 with a negative power present")
        total = np.zeros(taus.shape, dtype=complex)
        for (beta, l), c in self._terms.items():
            mono = 1.0
            for a, b in enumerate(beta):
                if b:
                    mono *= xi[a] ** b
            total += c.evaluate(x) * mono * lam ** l
        return total


# -- module-level operation names ------------------------------------------

def dilate(q: ParabolicSymbol, lam) -> ParabolicSymbol:
    return q.dilate(lam)


def symbol_mul(q1: ParabolicSymbol, q2: ParabolicSymbol) -> ParabolicSymbol:
    return q1 * q2


def symbol_deriv(q: ParabolicSymbol, var) -> ParabolicSymbol:
    return q.deriv(var)


def symbol_eval(q: ParabolicSymbol, x, xi, tau) -> complex:
    return q.evaluate(x, xi, tau)


def lambda_power(form: QuadraticForm, lpow: int, scale=1.0) -> ParabolicSymbol:
    """scale * Lambda^lpow as a one-term symbol."""
    d = form.dim
    return ParabolicSymbol(form, {((0,) * d, int(lpow)):
                                  CoefficientField.constant(d, scale)})


def quadratic_symbol(form: QuadraticForm) -> ParabolicSymbol:
    """G(x)(xi, xi) written with pure xi monomials (lpow = 0 terms)."""
    d = form.dim
    tmap = {}
    for i in range(d):
        for j in range(i, d):
            g = form.entries[i][j]
            if g.is_zero():
                continue
            beta = [0] * d
            beta[i] += 1
            beta[j] += 1
            key = (tuple(beta), 0)
            entry = g if i == j else g.scale(2.0)
            tmap[key] = tmap.get(key, CoefficientField.zero(d)) + entry
    return ParabolicSymbol(form, tmap, order=2)

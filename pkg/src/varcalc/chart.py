"""Charts: the flat-coordinate contexts on which all local forms live.

A chart fixes the base dimension, a constant metric, and the flat list of
scalar field components (dynamical fields, symmetry parameters, chart
coordinates, and named constants).  Every LocalForm carries a reference to
its chart; operators read grading and parity data from here.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


class VarcalcError(Exception):
    pass


class JetCutoffExceeded(VarcalcError):
    pass


class GradingError(VarcalcError):
    pass


class GhostDegreeMismatch(VarcalcError):
    pass


class UnassignedSymbol(VarcalcError):
    pass


class NonScalableTerm(VarcalcError):
    pass


class NotConstant(VarcalcError):
    pass


class NonlinearParameter(VarcalcError):
    pass


class ResidualNonzero(VarcalcError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NotASymmetry(VarcalcError):
    pass


class NotLocal(VarcalcError):
    pass


class NoSolvedForm(VarcalcError):
    pass


class OnShellResidual(VarcalcError):
    pass


class InvariantViolation(VarcalcError):
    pass


class DegenerateSlice(VarcalcError):
    def __init__(self, message, kernel=()):
        super().__init__(message)
        self.kernel = tuple(kernel)


class DoesNotDescend(VarcalcError):
    def __init__(self, message, offending=()):
        super().__init__(message)
        self.offending = tuple(offending)


class NotExact(VarcalcError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NoFlux(VarcalcError):
    pass


class VerdictMismatch(VarcalcError):
    pass


class MasterEquationFails(VarcalcError):
    pass


class NotHamiltonian(VarcalcError):
    pass


class NoBracket(VarcalcError):
    pass


class NotStronglyHamiltonian(VarcalcError):
    pass


class CMEFails(VarcalcError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


DEFAULT_JET_CUTOFF = 6

# field kinds
DYNAMIC = "dynamic"
PARAM = "param"          # field-valued symmetry parameter
CPARAM = "cparam"        # constant (global) symmetry parameter
COORD = "coord"
CONST = "const"


@dataclass(frozen=True)
class FieldComponent:
    name: str
    fid: int
    ghost: int = 0
    kind: str = DYNAMIC
    # for COORD components: which chart direction this coordinate names
    coord_dir: int = -1
    group: str = ""          # name of the declaring field group, if any
    indices: tuple = ()      # (form indices..., lie index) bookkeeping


@dataclass(frozen=True)
class FunctionSymbol:
    """Opaque scalar function with a formal derivative chain.

    ``arity`` argument slots; partial derivatives are tracked by a
    multi-order per slot.  ``model`` optionally maps argument tuples of
    rationals to a rational value (used by randomized evaluation); it must
    be a polynomial callable evaluated through :meth:`eval_model`.
    """

    name: str
    arity: int = 1
    sym_id: int = 0
    # polynomial model: dict[exponent-tuple -> Fraction], optional
    model: tuple = ()

    def eval_model(self, dorders, args):
        if not self.model:
            raise UnassignedSymbol(f"function symbol {self.name} has no model")
        total = Fraction(0)
        for expo, c in self.model:
            # differentiate the monomial prod(a_i^e_i) by dorders
            coef = Fraction(c)
            val = Fraction(1)
            ok = True
            for i in range(self.arity):
                e = expo[i]
                d = dorders[i]
                if d > e:
                    ok = False
                    break
                for k in range(d):
                    coef *= (e - k)
                val *= args[i] ** (e - d)
            if ok:
                total += coef * val
        return total


class Chart:
    """A coordinate chart with a flat list of scalar field components."""

    def __init__(self, dim, signature=None, metric=None, jet_cutoff=DEFAULT_JET_CUTOFF,
                 coord_names=None, orientation=1):
        self.dim = dim
        if metric is not None:
            self.metric = tuple(tuple(Fraction(x) for x in row) for row in metric)
        else:
            sig = signature if signature is not None else [1] * dim
            if len(sig) != dim:
                raise VarcalcError("signature length must equal dimension")
            self.metric = tuple(
                tuple(Fraction(sig[i]) if i == j else Fraction(0) for j in range(dim))
                for i in range(dim)
            )
        det = _det(self.metric)
        if det == 0:
            raise VarcalcError("degenerate metric")
        if abs(det) != 1:
            raise VarcalcError("metric determinant must be +-1 for exact Hodge duals")
        self.metric_det = det
        self.metric_inv = _inverse(self.metric)
        self.jet_cutoff = jet_cutoff
        self.orientation = orientation
        self.coord_names = tuple(coord_names) if coord_names else tuple(
            f"x{i}" for i in range(dim))
        self.components: list[FieldComponent] = []
        self._by_name: dict[str, FieldComponent] = {}
        self.functions: list[FunctionSymbol] = []
        self._fn_by_name: dict[str, FunctionSymbol] = {}

    # -- components ------------------------------------------------------
    def add_component(self, name, ghost=0, kind=DYNAMIC, coord_dir=-1,
                      group="", indices=()):
        if name in self._by_name:
            raise VarcalcError(f"duplicate component {name!r}")
        comp = FieldComponent(name, len(self.components), ghost, kind,
                              coord_dir, group, tuple(indices))
        self.components.append(comp)
        self._by_name[name] = comp
        return comp

    def add_coordinates(self):
        for i, nm in enumerate(self.coord_names):
            self.add_component(nm, kind=COORD, coord_dir=i)

    def component(self, fid) -> FieldComponent:
        return self.components[fid]

    def by_name(self, name) -> FieldComponent:
        try:
            return self._by_name[name]
        except KeyError:
            raise VarcalcError(f"unknown component {name!r}") from None

    def has_name(self, name):
        return name in self._by_name

    def ghost(self, fid):
        return self.components[fid].ghost

    def kind(self, fid):
        return self.components[fid].kind

    def dynamic_fids(self):
        return [c.fid for c in self.components if c.kind == DYNAMIC]

    def param_fids(self):
        return [c.fid for c in self.components if c.kind == PARAM]

    # -- function symbols --------------------------------------------------
    def add_function(self, name, arity=1, model=()):
        if name in self._fn_by_name:
            raise VarcalcError(f"duplicate function symbol {name!r}")
        fn = FunctionSymbol(name, arity, len(self.functions), tuple(model))
        self.functions.append(fn)
        self._fn_by_name[name] = fn
        return fn

    def function(self, sym_id) -> FunctionSymbol:
        return self.functions[sym_id]

    def function_by_name(self, name) -> FunctionSymbol:
        try:
            return self._fn_by_name[name]
        except KeyError:
            raise VarcalcError(f"unknown function symbol {name!r}") from None

    # -- derived charts ----------------------------------------------------
    def promoted(self, fids):
        """A copy of this chart where the given parameter components are
        dynamical (the action Lie algebroid chart).  Component ids are
        preserved, so forms can be moved across verbatim."""
        fids = set(fids)
        new = Chart.__new__(Chart)
        new.__dict__.update(self.__dict__)
        new.components = [
            FieldComponent(c.name, c.fid, c.ghost,
                           DYNAMIC if c.fid in fids else c.kind,
                           c.coord_dir, c.group, c.indices)
            for c in self.components
        ]
        new._by_name = {c.name: c for c in new.components}
        return new


def _det(m):
    n = len(m)
    rows = [list(r) for r in m]
    det = Fraction(1)
    for col in range(n):
        piv = None
        for r in range(col, n):
            if rows[r][col] != 0:
                piv = r
                break
        if piv is None:
            return Fraction(0)
        if piv != col:
            rows[col], rows[piv] = rows[piv], rows[col]
            det = -det
        det *= rows[col][col]
        inv = Fraction(1) / rows[col][col]
        for r in range(col + 1, n):
            f = rows[r][col] * inv
            if f:
                for c in range(col, n):
                    rows[r][c] -= f * rows[col][c]
    return det


def _inverse(m):
    n = len(m)
    aug = [list(m[i]) + [Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    for col in range(n):
        piv = None
        for r in range(col, n):
            if aug[r][col] != 0:
                piv = r
                break
        if piv is None:
            raise VarcalcError("singular metric")
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = Fraction(1) / aug[col][col]
        aug[col] = [x * inv for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return tuple(tuple(row[n:]) for row in aug)

"""Tri-graded local forms with exact rational coefficients.

A term is a word of atoms in a fixed canonical order:

    ('j',  fid, midx)        scalar jet factor  u^I_J   (repeats = powers)
    ('ji', fid)              inverse of an order-0 named constant
    ('f',  sym, dords, args) function application  F^{(dords)}(args)
    ('F',  k, inner)         fiber integral  int_0^1 l^k prod F(l*args) dl
    ('v',  fid, midx)        vertical leg  (variation of a jet)
    ('h',  mu)               horizontal leg dx^mu

Atoms carry a parity (total form degree + ghost degree mod 2); words are
sorted into canonical order with Koszul signs, powers of odd atoms vanish,
and a LocalForm is a dict {word: Fraction}.  Every operator below is a
graded derivation or contraction driven by a per-atom image map, so sign
handling lives in exactly one place.
"""

from __future__ import annotations

from fractions import Fraction

from .chart import (
    Chart, COORD, CONST, CPARAM, DYNAMIC,
    GradingError, GhostDegreeMismatch, JetCutoffExceeded, UnassignedSymbol,
    VarcalcError,
)

_RANK = {'j': 0, 'ji': 0, 'f': 1, 'F': 2, 'v': 3, 'h': 4}


def midx_zero(n):
    return (0,) * n


def midx_add(a, b):
    return tuple(x + y for x, y in zip(a, b))


def midx_shift(a, mu):
    return tuple(x + (1 if i == mu else 0) for i, x in enumerate(a))


def midx_order(a):
    return sum(a)


def midx_geq(a, b):
    return all(x >= y for x, y in zip(a, b))


def midx_sub(a, b):
    return tuple(x - y for x, y in zip(a, b))


def iter_midx(n, order):
    """All multi-indices of the given total order in n directions."""
    if n == 1:
        yield (order,)
        return
    for first in range(order + 1):
        for rest in iter_midx(n - 1, order - first):
            yield (first,) + rest


def atom_parity(chart, atom):
    t = atom[0]
    if t == 'j':
        return chart.ghost(atom[1]) & 1
    if t == 'v':
        return (1 + chart.ghost(atom[1])) & 1
    if t == 'h':
        return 1
    return 0


def atom_ghost(chart, atom):
    t = atom[0]
    if t in ('j', 'v'):
        return chart.ghost(atom[1])
    return 0


def _sort_key(atom):
    return (_RANK[atom[0]],) + atom[1:]


def norm_word(chart, atoms, coeff):
    """Canonicalize a word; returns (key, coeff) or None if zero."""
    if not coeff:
        return None
    work = []
    for a in atoms:
        t = a[0]
        if t == 'j':
            fid = a[1]
            kind = chart.kind(fid)
            order = midx_order(a[2])
            if order and kind in (COORD, CONST, CPARAM):
                if kind == COORD and order == 1:
                    # D_mu x^nu = delta
                    if a[2][chart.component(fid).coord_dir] == 1:
                        continue       # factor 1
                return None            # zero factor
            if order > chart.jet_cutoff:
                raise JetCutoffExceeded(
                    f"jet order {order} exceeds cutoff {chart.jet_cutoff}")
            work.append(a)
        elif t == 'v':
            if midx_order(a[2]) > chart.jet_cutoff:
                raise JetCutoffExceeded(
                    f"jet order {midx_order(a[2])} exceeds cutoff {chart.jet_cutoff}")
            work.append(a)
        else:
            work.append(a)
    # insertion sort, tracking odd-odd transpositions
    sign = 1
    out = []
    for a in work:
        ka = _sort_key(a)
        pa = atom_parity(chart, a)
        i = len(out)
        while i > 0 and _sort_key(out[i - 1]) > ka:
            if pa and atom_parity(chart, out[i - 1]):
                sign = -sign
            i -= 1
        out.insert(i, a)
    # cancel inverse-constant pairs, kill odd squares
    cleaned = []
    counts = {}
    for a in out:
        if a[0] in ('j', 'ji') and chart.kind(a[1]) == CONST:
            key = a[1]
            counts[key] = counts.get(key, 0) + (1 if a[0] == 'j' else -1)
        else:
            cleaned.append(a)
    const_atoms = []
    for fid in sorted(counts):
        c = counts[fid]
        zero = midx_zero(chart.dim)
        if c > 0:
            const_atoms += [('j', fid, zero)] * c
        elif c < 0:
            const_atoms += [('ji', fid)] * (-c)
    # reinsert constants (parity 0: no signs); keep global order
    merged = []
    ci = 0
    for a in cleaned:
        while ci < len(const_atoms) and _sort_key(const_atoms[ci]) <= _sort_key(a):
            merged.append(const_atoms[ci]); ci += 1
        merged.append(a)
    merged.extend(const_atoms[ci:])
    for i in range(1, len(merged)):
        if merged[i] == merged[i - 1] and atom_parity(chart, merged[i]):
            return None
    return tuple(merged), Fraction(coeff) * sign


class LocalForm:
    """A normalized sum of graded words with rational coefficients."""

    __slots__ = ('chart', 'terms')

    def __init__(self, chart: Chart, terms=None):
        self.chart = chart
        self.terms: dict[tuple, Fraction] = terms if terms is not None else {}

    # -- constructors ------------------------------------------------------
    @classmethod
    def zero(cls, chart):
        return cls(chart)

    @classmethod
    def scalar(cls, chart, value):
        value = Fraction(value)
        return cls(chart, {(): value} if value else {})

    @classmethod
    def from_word(cls, chart, atoms, coeff=1):
        f = cls(chart)
        f._accum(atoms, coeff)
        return f

    def _accum(self, atoms, coeff):
        res = norm_word(self.chart, atoms, coeff)
        if res is None:
            return
        key, c = res
        new = self.terms.get(key, 0) + c
        if new:
            self.terms[key] = new
        else:
            self.terms.pop(key, None)

    # -- ring structure ----------------------------------------------------
    def __add__(self, other):
        out = LocalForm(self.chart, dict(self.terms))
        for k, c in other.terms.items():
            new = out.terms.get(k, 0) + c
            if new:
                out.terms[k] = new
            else:
                out.terms.pop(k, None)
        return out

    def __sub__(self, other):
        return self + (other * -1)

    def __mul__(self, scalar):
        scalar = Fraction(scalar)
        if not scalar:
            return LocalForm(self.chart)
        return LocalForm(self.chart, {k: c * scalar for k, c in self.terms.items()})

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def wedge(self, other):
        out = LocalForm(self.chart)
        for k1, c1 in self.terms.items():
            for k2, c2 in other.terms.items():
                out._accum(k1 + k2, c1 * c2)
        return out

    def is_zero(self):
        return not self.terms

    def __eq__(self, other):
        if isinstance(other, LocalForm):
            return self.terms == other.terms
        return NotImplemented

    def __ne__(self, other):
        eq = self.__eq__(other)
        return NotImplemented if eq is NotImplemented else not eq

    def copy(self):
        return LocalForm(self.chart, dict(self.terms))

    # -- grading -----------------------------------------------------------
    @staticmethod
    def key_vdeg(key):
        return sum(1 for a in key if a[0] == 'v')

    @staticmethod
    def key_hdeg(key):
        return sum(1 for a in key if a[0] == 'h')

    def key_ghost(self, key):
        return sum(atom_ghost(self.chart, a) for a in key)

    def grading(self):
        """(p, q) if homogeneous, else GradingError; zero form -> (0, 0)."""
        gr = {(self.key_vdeg(k), self.key_hdeg(k)) for k in self.terms}
        if not gr:
            return (0, 0)
        if len(gr) > 1:
            raise GradingError(f"inhomogeneous form: {sorted(gr)}")
        return gr.pop()

    def ghost_degree(self):
        gs = {self.key_ghost(k) for k in self.terms}
        if not gs:
            return 0
        if len(gs) > 1:
            raise GradingError(f"inhomogeneous ghost degree: {sorted(gs)}")
        return gs.pop()

    def components(self, select):
        """Subform of terms with select(p, q) true."""
        out = LocalForm(self.chart)
        for k, c in self.terms.items():
            if select(self.key_vdeg(k), self.key_hdeg(k)):
                out.terms[k] = c
        return out

    def max_vdeg(self):
        return max((self.key_vdeg(k) for k in self.terms), default=0)

    def __repr__(self):
        from .render import render_text
        return f"LocalForm({render_text(self)})"


# ---------------------------------------------------------------------------
# generic graded operators
# ---------------------------------------------------------------------------

def apply_derivation(form: LocalForm, parity, image, side="left"):
    """Graded derivation: image(atom) -> LocalForm | None (None = zero).

    The image of an atom is spliced in place with the Koszul sign of moving
    an operator of the given parity across the atoms after it (``side ==
    "right"``, the convention used throughout) or before it ("left").
    """
    chart = form.chart
    out = LocalForm(chart)
    for key, coeff in form.terms.items():
        pars = [atom_parity(chart, a) for a in key]
        total_par = sum(pars)
        left_par = 0
        seen = None
        for i, atom in enumerate(key):
            if atom != seen:    # derive each distinct atom once per run
                run = 1
                j = i + 1
                while j < len(key) and key[j] == atom:
                    run += 1
                    j += 1
                im = image(atom)
                if im is not None and im.terms:
                    if side == "right":
                        crossed = total_par - left_par - pars[i]
                    else:
                        crossed = left_par
                    sgn = -1 if (parity and crossed & 1) else 1
                    for ikey, ic in im.terms.items():
                        word = key[:i] + ikey + key[i + 1:]
                        out._accum(word, coeff * ic * sgn * run)
                seen = atom
            left_par += pars[i]
    return out


def total_derivative(form: LocalForm, mu):
    """The total derivative D_mu (even derivation)."""
    chart = form.chart
    n = chart.dim

    def image(atom):
        t = atom[0]
        if t == 'j':
            return LocalForm.from_word(chart, (('j', atom[1], midx_shift(atom[2], mu)),))
        if t == 'v':
            return LocalForm.from_word(chart, (('v', atom[1], midx_shift(atom[2], mu)),))
        if t == 'f':
            sym, dords, args = atom[1], atom[2], atom[3]
            out = LocalForm(chart)
            for slot, arg in enumerate(args):
                if arg[0] != 'j':
                    continue
                nd = tuple(d + (1 if s == slot else 0) for s, d in enumerate(dords))
                darg = ('j', arg[1], midx_shift(arg[2], mu))
                out._accum((('f', sym, nd, args), darg), 1)
            return out
        if t == 'F':
            k, inner = atom[1], atom[2]
            out = LocalForm(chart)
            for ai, app in enumerate(inner):
                sym, dords, args = app[1], app[2], app[3]
                for slot, arg in enumerate(args):
                    if arg[0] != 'j':
                        continue
                    nd = tuple(d + (1 if s == slot else 0) for s, d in enumerate(dords))
                    napp = ('f', sym, nd, args)
                    ninner = inner[:ai] + (napp,) + inner[ai + 1:]
                    darg = ('j', arg[1], midx_shift(arg[2], mu))
                    out._accum((('F', k + 1, ninner), darg), 1)
            return out
        return None

    return apply_derivation(form, 0, image)


def apply_midx_derivative(form, midx):
    for mu, k in enumerate(midx):
        for _ in range(k):
            form = total_derivative(form, mu)
    return form


def prepend_atom(form: LocalForm, atom):
    out = LocalForm(form.chart)
    for key, coeff in form.terms.items():
        out._accum((atom,) + key, coeff)
    return out


def append_atom(form: LocalForm, atom):
    out = LocalForm(form.chart)
    for key, coeff in form.terms.items():
        out._accum(key + (atom,), coeff)
    return out


def d_h(form: LocalForm):
    """Horizontal differential d = dx^mu ^ D_mu."""
    out = LocalForm(form.chart)
    for mu in range(form.chart.dim):
        out = out + prepend_atom(total_derivative(form, mu), ('h', mu))
    return out


def d_v(form: LocalForm):
    """Vertical differential (variation along dynamical fields)."""
    chart = form.chart

    def image(atom):
        t = atom[0]
        if t == 'j':
            if chart.kind(atom[1]) != DYNAMIC:
                return None
            return LocalForm.from_word(chart, (('v', atom[1], atom[2]),))
        if t == 'f':
            sym, dords, args = atom[1], atom[2], atom[3]
            out = LocalForm(chart)
            for slot, arg in enumerate(args):
                if arg[0] != 'j' or chart.kind(arg[1]) != DYNAMIC:
                    continue
                nd = tuple(d + (1 if s == slot else 0) for s, d in enumerate(dords))
                out._accum((('f', sym, nd, args), ('v', arg[1], arg[2])), 1)
            return out
        if t == 'F':
            k, inner = atom[1], atom[2]
            out = LocalForm(chart)
            for ai, app in enumerate(inner):
                sym, dords, args = app[1], app[2], app[3]
                for slot, arg in enumerate(args):
                    if arg[0] != 'j' or chart.kind(arg[1]) != DYNAMIC:
                        continue
                    nd = tuple(d + (1 if s == slot else 0) for s, d in enumerate(dords))
                    napp = ('f', sym, nd, args)
                    ninner = inner[:ai] + (napp,) + inner[ai + 1:]
                    out._accum((('F', k + 1, ninner), ('v', arg[1], arg[2])), 1)
            return out
        return None

    return apply_derivation(form, 1, image)


def contract_leg(form: LocalForm, fid, midx):
    """Interior product with the coordinate vertical vector dual to one leg."""
    chart = form.chart
    par = (1 + chart.ghost(fid)) & 1
    target = ('v', fid, midx)

    def image(atom):
        if atom == target:
            return LocalForm.scalar(chart, 1)
        return None

    return apply_derivation(form, par, image)


def zero_star(form: LocalForm):
    """Evaluation on the zero section of the dynamical fields."""
    chart = form.chart
    out = LocalForm(chart)
    for key, coeff in form.terms.items():
        word = []
        dead = False
        for atom in key:
            t = atom[0]
            if t in ('j', 'v') and chart.kind(atom[1]) == DYNAMIC:
                dead = True
                break
            if t == 'f':
                args = tuple(('0',) if (a[0] == 'j' and chart.kind(a[1]) == DYNAMIC)
                             else a for a in atom[3])
                word.append(('f', atom[1], atom[2], args))
            elif t == 'F':
                k, inner = atom[1], atom[2]
                coeff = coeff / (k + 1)
                for app in inner:
                    args = tuple(('0',) if (a[0] == 'j' and chart.kind(a[1]) == DYNAMIC)
                                 else a for a in app[3])
                    word.append(('f', app[1], app[2], args))
            else:
                word.append(atom)
        if not dead:
            out._accum(tuple(word), coeff)
    return out


def substitute(form: LocalForm, bindings):
    """Capture-free substitution of jets; prolongs to derivative jets.

    ``bindings`` maps (fid, midx) to a (0,0) LocalForm.  An atom (fid, J)
    with J >= J0 for a bound J0 is replaced by D^{J-J0} of the bound
    expression; vertical legs are replaced by the variation of the same.
    """
    chart = form.chart
    by_fid: dict[int, list] = {}
    for (fid, j0), expr in bindings.items():
        g_expr = expr.ghost_degree() if not expr.is_zero() else chart.ghost(fid)
        if not expr.is_zero() and g_expr != chart.ghost(fid):
            raise GhostDegreeMismatch(
                f"binding for component {chart.component(fid).name} changes ghost degree")
        p, q = expr.grading()
        if (p, q) != (0, 0):
            raise GradingError("bindings must be scalar (0,0) forms")
        by_fid.setdefault(fid, []).append((j0, expr))

    cache = {}

    def bound_expr(fid, J, vertical):
        cands = [(j0, e) for j0, e in by_fid.get(fid, ()) if midx_geq(J, j0)]
        if not cands:
            return None
        # overlapping bindings: resolve deterministically by the largest
        # base multi-index (consistent on the solution ideal)
        cands.sort(key=lambda t: t[0], reverse=True)
        j0, e = cands[0]
        key = (fid, J, vertical)
        if key not in cache:
            ex = apply_midx_derivative(e, midx_sub(J, j0))
            cache[key] = d_v(ex) if vertical else ex
        return cache[key]

    out = LocalForm(chart)
    for key, coeff in form.terms.items():
        # expand word left-to-right, splicing replacements
        parts = [LocalForm.scalar(chart, coeff)]
        for atom in key:
            t = atom[0]
            rep = None
            if t == 'j':
                rep = bound_expr(atom[1], atom[2], False)
            elif t == 'v':
                rep = bound_expr(atom[1], atom[2], True)
            elif t == 'f':
                args = []
                for a in atom[3]:
                    if a[0] == 'j':
                        r = bound_expr(a[1], a[2], False)
                        if r is not None:
                            if r.is_zero():
                                args.append(('0',))
                                continue
                            if len(r.terms) == 1:
                                (w, c), = r.terms.items()
                                if c == 1 and len(w) == 1 and w[0][0] == 'j':
                                    args.append(w[0])
                                    continue
                            raise VarcalcError(
                                "substitution inside a function argument must be "
                                "a plain jet or zero")
                    args.append(a)
                atom = ('f', atom[1], atom[2], tuple(args))
            if rep is None:
                parts.append(LocalForm.from_word(chart, (atom,)))
            else:
                parts.append(rep)
        acc = parts[0]
        for p in parts[1:]:
            acc = acc.wedge(p)
        out = out + acc
    return out


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

class PointAssignment:
    """Rational values for jets, vertical legs and horizontal legs."""

    def __init__(self, chart, jets=None, vlegs=None, hlegs=None):
        self.chart = chart
        self.jets = dict(jets or {})
        self.vlegs = dict(vlegs or {})
        self.hlegs = dict(hlegs or {})

    def jet(self, fid, midx):
        try:
            return self.jets[(fid, midx)]
        except KeyError:
            raise UnassignedSymbol(
                f"no value for jet {self.chart.component(fid).name}{midx}") from None

    def vleg(self, fid, midx):
        try:
            return self.vlegs[(fid, midx)]
        except KeyError:
            raise UnassignedSymbol(
                f"no value for leg d{self.chart.component(fid).name}{midx}") from None

    def hleg(self, mu):
        try:
            return self.hlegs[mu]
        except KeyError:
            raise UnassignedSymbol(f"no value for dx^{mu}") from None


def _app_lambda_poly(chart, app, assign):
    """Value of F^{(d)}(l*args) as dict {lambda_power: Fraction}."""
    fn = chart.function(app[1])
    dords, args = app[2], app[3]
    vals = []
    for a in args:
        vals.append(Fraction(0) if a[0] == '0' else assign.jet(a[1], a[2]))
    if not fn.model:
        raise UnassignedSymbol(f"function symbol {fn.name} has no model")
    out = {}
    for expo, c in fn.model:
        coef = Fraction(c)
        power = 0
        val = Fraction(1)
        ok = True
        for i in range(fn.arity):
            e, d = expo[i], dords[i]
            if d > e:
                ok = False
                break
            for k in range(d):
                coef *= (e - k)
            val *= vals[i] ** (e - d)
            power += e - d
        if ok and coef * val:
            out[power] = out.get(power, Fraction(0)) + coef * val
    return out


def evaluate(form: LocalForm, assign: PointAssignment):
    chart = form.chart
    total = Fraction(0)
    for key, coeff in form.terms.items():
        val = Fraction(coeff)
        for atom in key:
            t = atom[0]
            if t == 'j':
                if chart.kind(atom[1]) == COORD:
                    val *= assign.jet(atom[1], atom[2])
                else:
                    val *= assign.jet(atom[1], atom[2])
            elif t == 'ji':
                v = assign.jet(atom[1], midx_zero(chart.dim))
                if v == 0:
                    raise UnassignedSymbol("inverse of constant assigned zero")
                val *= Fraction(1) / v
            elif t == 'f':
                fn = chart.function(atom[1])
                vals = [Fraction(0) if a[0] == '0' else assign.jet(a[1], a[2])
                        for a in atom[3]]
                val *= fn.eval_model(atom[2], vals)
            elif t == 'F':
                k, inner = atom[1], atom[2]
                poly = {k: Fraction(1)}
                for app in inner:
                    ap = _app_lambda_poly(chart, app, assign)
                    newpoly = {}
                    for p1, v1 in poly.items():
                        for p2, v2 in ap.items():
                            newpoly[p1 + p2] = newpoly.get(p1 + p2, Fraction(0)) + v1 * v2
                    poly = newpoly
                val *= sum((v / (p + 1) for p, v in poly.items()), Fraction(0))
            elif t == 'v':
                val *= assign.vleg(atom[1], atom[2])
            elif t == 'h':
                val *= assign.hleg(atom[1])
            if not val:
                break
        total += val
    return total

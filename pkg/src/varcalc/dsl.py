"""Theory-file and expression front end.

Theory files are line oriented; expressions use a small graded-product
grammar (see docs/thy-format.md for the EBNF).  The elaborator turns parse
trees into normalized LocalForms on the theory's chart; Lie-algebra valued
subexpressions are carried with free basis indices until they are closed
by tr(.), [.,.] or <.,.>.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, permutations

from .chart import Chart, CONST, CPARAM, DYNAMIC, PARAM, VarcalcError
from .algebra import LocalForm, d_h, midx_zero, midx_order


class SyntaxError_(VarcalcError):
    def __init__(self, msg, line=1, col=1):
        super().__init__(f"{line}:{col}: {msg}")
        self.line, self.col = line, col


class UndeclaredIdentifier(VarcalcError):
    pass


class GradingMismatch(VarcalcError):
    pass


class DimensionMismatch(VarcalcError):
    pass


class MissingStructureConstants(VarcalcError):
    pass


# ---------------------------------------------------------------------------
# tokenizer
# ---------------------------------------------------------------------------

_SYMBOLS = ("∧", "+", "-", "*", "^", "(", ")", ",", ";", "<", ">", "[", "]", "{", "}", "=")


def tokenize(text, line_no=1):
    toks = []
    i, col = 0, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in " \t":
            i += 1; col += 1
            continue
        if ch == "#":
            break
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(("num", int(text[i:j]), line_no, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            name = text[i:j]
            # derivative suffix  name_,012
            if name.endswith("_") and j < n and text[j] == ",":
                j += 1
                k = j
                while k < n and text[k].isdigit():
                    k += 1
                if k == j:
                    raise SyntaxError_("expected direction digits after '_,'", line_no, col)
                toks.append(("jet", (name[:-1], text[j:k]), line_no, col))
                col += k - i
                i = k
                continue
            primes = 0
            while j < n and text[j] == "'":
                primes += 1
                j += 1
            toks.append(("ident", (name, primes), line_no, col))
            col += j - i
            i = j
            continue
        if ch == "/":
            toks.append(("/", "/", line_no, col))
            i += 1; col += 1
            continue
        if ch in _SYMBOLS:
            toks.append((ch, ch, line_no, col))
            i += 1; col += 1
            continue
        raise SyntaxError_(f"unexpected character {ch!r}", line_no, col)
    toks.append(("end", None, line_no, col))
    return toks


# ---------------------------------------------------------------------------
# expression parser -> ExprAst (nested tuples)
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, toks):
        self.toks = toks
        self.pos = 0

    def peek(self):
        return self.toks[self.pos]

    def next(self):
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, kind):
        t = self.next()
        if t[0] != kind:
            raise SyntaxError_(f"expected {kind!r}, found {t[1]!r}", t[2], t[3])
        return t

    def parse_expr(self):
        node = self.parse_product()
        while self.peek()[0] in ("+", "-"):
            op = self.next()[0]
            rhs = self.parse_product()
            node = ("add", node, rhs) if op == "+" else ("add", node, ("neg", rhs))
        return node

    def parse_product(self):
        node = self.parse_unary()
        while self.peek()[0] in ("*", "∧", "^"):
            self.next()
            node = ("mul", node, self.parse_unary())
        return node

    def parse_unary(self):
        t = self.peek()
        if t[0] == "-":
            self.next()
            return ("neg", self.parse_unary())
        return self.parse_atom()

    def parse_number(self):
        t = self.expect("num")
        value = Fraction(t[1])
        if self.peek()[0] == "/":
            self.next()
            den = self.expect("num")
            value /= den[1]
        return value

    def parse_atom(self):
        t = self.peek()
        if t[0] == "num":
            return ("num", self.parse_number())
        if t[0] == "(":
            self.next()
            node = self.parse_expr()
            self.expect(")")
            return node
        if t[0] == "<":
            self.next()
            a = self.parse_expr()
            self.expect(",")
            b = self.parse_expr()
            self.expect(">")
            return ("pair", a, b)
        if t[0] == "[":
            self.next()
            a = self.parse_expr()
            self.expect(",")
            b = self.parse_expr()
            self.expect("]")
            return ("bracket", a, b)
        if t[0] == "jet":
            self.next()
            name, digits = t[1]
            return ("jet", name, digits)
        if t[0] == "ident":
            self.next()
            name, primes = t[1]
            if name == "fint" and self.peek()[0] == "(":
                self.next()
                k = self.parse_number()
                self.expect(";")
                apps = [self.parse_atom()]
                while self.peek()[0] == "*":
                    self.next()
                    apps.append(self.parse_atom())
                self.expect(")")
                return ("fint", k, apps)
            if self.peek()[0] == "{":
                self.next()
                dords = [int(self.parse_number())]
                while self.peek()[0] == ",":
                    self.next()
                    dords.append(int(self.parse_number()))
                self.expect("}")
                self.expect("(")
                args = self.parse_args()
                return ("call", name, tuple(dords), args)
            if self.peek()[0] == "(":
                self.next()
                if name in ("d", "delta", "star", "tr", "inv"):
                    node = self.parse_expr()
                    self.expect(")")
                    return (name, node)
                args = self.parse_args()
                return ("call", name, (primes,), args)
            return ("id", name, primes)
        raise SyntaxError_(f"unexpected token {t[1]!r}", t[2], t[3])

    def parse_args(self):
        args = []
        if self.peek()[0] != ")":
            args.append(self.parse_arg())
            while self.peek()[0] == ",":
                self.next()
                args.append(self.parse_arg())
        self.expect(")")
        return tuple(args)

    def parse_arg(self):
        # 'l name' marks a lambda-scaled argument inside fint
        t = self.peek()
        scaled = False
        if t[0] == "ident" and t[1] == ("l", 0):
            nxt = self.toks[self.pos + 1]
            if nxt[0] in ("ident", "jet", "num"):
                self.next()
                scaled = True
        node = self.parse_atom()
        return ("scaled", node) if scaled else node


def parse_expression(text, line_no=1):
    p = _Parser(tokenize(text, line_no))
    node = p.parse_expr()
    tail = p.peek()
    if tail[0] != "end":
        raise SyntaxError_(f"trailing input {tail[1]!r}", tail[2], tail[3])
    return node


# ---------------------------------------------------------------------------
# elaborated values: forms with free Lie indices
# ---------------------------------------------------------------------------

@dataclass
class Val:
    indices: tuple            # tuple of structure names, one per free index
    comps: dict               # index tuple -> LocalForm

    @classmethod
    def scalar(cls, form):
        return cls((), {(): form})

    def map(self, fn):
        return Val(self.indices, {k: fn(v) for k, v in self.comps.items()})

    def __add__(self, other):
        if self.indices != other.indices:
            raise GradingMismatch("cannot add values with different Lie indices")
        comps = dict(self.comps)
        for k, v in other.comps.items():
            comps[k] = comps.get(k, None) + v if k in comps else v
        return Val(self.indices, comps)

    def __neg__(self):
        return self.map(lambda f: -f)

    def wedge(self, other):
        indices = self.indices + other.indices
        comps = {}
        for k1, f1 in self.comps.items():
            for k2, f2 in other.comps.items():
                w = f1.wedge(f2)
                if not w.is_zero():
                    key = k1 + k2
                    comps[key] = comps.get(key, None) + w if key in comps else w
        return Val(indices, comps)

    def require_scalar(self, what="expression"):
        if self.indices:
            raise GradingMismatch(f"{what} has free Lie indices")
        return self.comps.get((), None)


@dataclass
class Structure:
    name: str
    dim: int
    f: dict          # (a,b) -> list of (c, coeff)
    kappa: dict      # (a,b) -> Fraction

    def bracket_coeffs(self, a, b):
        return self.f.get((a, b), [])

    def check_jacobi(self):
        n = self.dim
        ftab = {}
        for (a, b), lst in self.f.items():
            for c, coeff in lst:
                ftab[(a, b, c)] = ftab.get((a, b, c), Fraction(0)) + coeff
        for a in range(n):
            for b in range(n):
                for c in range(n):
                    for e in range(n):
                        total = Fraction(0)
                        for d in range(n):
                            total += ftab.get((a, b, d), Fraction(0)) * ftab.get((d, c, e), Fraction(0))
                            total += ftab.get((b, c, d), Fraction(0)) * ftab.get((d, a, e), Fraction(0))
                            total += ftab.get((c, a, d), Fraction(0)) * ftab.get((d, b, e), Fraction(0))
                        if total:
                            return False
        return True


def su2_structure(name="su2"):
    eps = {}
    for (a, b, c) in permutations(range(3)):
        sign = _perm_sign((a, b, c))
        eps.setdefault((a, b), []).append((c, Fraction(sign)))
    kappa = {(a, a): Fraction(1) for a in range(3)}
    return Structure(name, 3, eps, kappa)


def abelian_structure(name, dim):
    kappa = {(a, a): Fraction(1) for a in range(dim)}
    return Structure(name, dim, {}, kappa)


def _perm_sign(p):
    sign = 1
    p = list(p)
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                sign = -sign
    return sign


def _det_small(m):
    n = len(m)
    if n == 0:
        return Fraction(1)
    total = Fraction(0)
    for perm in permutations(range(n)):
        prod = Fraction(_perm_sign(perm))
        for i, j in enumerate(perm):
            prod *= m[i][j]
        total += prod
    return total


# ---------------------------------------------------------------------------
# field groups and the theory definition
# ---------------------------------------------------------------------------

@dataclass
class FieldGroup:
    name: str
    form_degree: int                # 0 = scalar
    lie: str | None
    ghost: int
    kind: str                       # DYNAMIC or PARAM
    comps: dict                     # (form idx tuple, lie idx tuple) -> fid
    multiplicity: int = 0           # >0: plain multi-component parameter

    def component_keys(self):
        return sorted(self.comps)


@dataclass
class SymmetryDecl:
    name: str
    params: list                    # FieldGroup list (usually one)
    assignments: dict               # field group name -> AST
    structure: str | None           # structure name for the bracket


@dataclass
class TheoryDef:
    name: str = "theory"
    dim: int = 0
    signature: list = field(default_factory=list)
    metric: list | None = None
    coords: list = field(default_factory=list)
    constants: list = field(default_factory=list)
    functions: list = field(default_factory=list)    # (name, arity)
    structures: dict = field(default_factory=dict)
    fields: list = field(default_factory=list)       # raw field decls
    sources: list = field(default_factory=list)      # (name, degree, lie, expr text, line)
    lagrangian: str = ""
    lagrangian_line: int = 0
    symmetries: list = field(default_factory=list)   # SymmetryDecl (asts)
    solve: list = field(default_factory=list)        # (component name, midx digits)
    orientation: int = 1
    jet_cutoff: int | None = None


# ---------------------------------------------------------------------------
# the elaboration context
# ---------------------------------------------------------------------------

class ElabContext:
    def __init__(self, chart: Chart, orientation=1):
        self.chart = chart
        self.groups: dict[str, FieldGroup] = {}
        self.structures: dict[str, Structure] = {}
        self.sources: dict[str, Val] = {}
        self.orientation = orientation

    # -- registration ------------------------------------------------------
    def add_structure(self, st: Structure):
        self.structures[st.name] = st

    def add_field_group(self, name, form_degree=0, lie=None, ghost=0,
                        kind=DYNAMIC, multiplicity=0):
        chart = self.chart
        n = chart.dim
        if lie is not None and lie not in self.structures:
            raise MissingStructureConstants(f"structure {lie!r} not declared")
        lrange = range(self.structures[lie].dim) if lie else [None]
        comps = {}
        if multiplicity:
            fidx_list = [(i,) for i in range(multiplicity)]
        else:
            fidx_list = list(combinations(range(n), form_degree))
        for fidx in fidx_list:
            for a in lrange:
                cname = name
                if multiplicity:
                    cname += str(fidx[0])
                elif form_degree:
                    cname += "".join(str(i) for i in fidx)
                if a is not None:
                    cname += f"_{a}"
                comp = chart.add_component(cname, ghost=ghost, kind=kind, group=name)
                key = (fidx, (a,) if a is not None else ())
                comps[key] = comp.fid
        g = FieldGroup(name, form_degree, lie, ghost, kind, comps, multiplicity)
        self.groups[name] = g
        return g

    # -- value construction --------------------------------------------------
    def group_value(self, g: FieldGroup):
        chart = self.chart
        indices = (g.lie,) if g.lie else ()
        comps = {}
        z = midx_zero(chart.dim)
        for (fidx, lidx), fid in g.comps.items():
            word = [('j', fid, z)] + [('h', mu) for mu in fidx]
            form = LocalForm.from_word(chart, tuple(word))
            if g.multiplicity:
                continue
            key = lidx if not g.multiplicity else ()
            comps[key] = comps.get(key, None) + form if key in comps else form
        if g.multiplicity:
            raise GradingMismatch(
                f"parameter family {g.name!r} has no collective value; use its "
                f"components {g.name}0..")
        return Val(indices, comps)

    def jet_value(self, name, digits):
        chart = self.chart
        if not chart.has_name(name):
            raise UndeclaredIdentifier(f"unknown component {name!r}")
        comp = chart.by_name(name)
        m = [0] * chart.dim
        for dch in digits:
            mu = int(dch)
            if mu >= chart.dim:
                raise DimensionMismatch(f"direction {mu} out of range in {name}_,{digits}")
            m[mu] += 1
        return Val.scalar(LocalForm.from_word(chart, (('j', comp.fid, tuple(m)),)))

    # -- hodge dual ----------------------------------------------------------
    def hodge_legs(self, hset):
        """star(dx^H) as a list of (coeff, ordered complementary tuple).

        The coefficient of dx^K is det(g^{M_i H_j}) * sign(M ++ K) with M
        the ascending complement of K; |det g| = 1 is enforced at chart
        construction, so no square roots appear.
        """
        chart = self.chart
        n = chart.dim
        k = len(hset)
        out = []
        for K in combinations(range(n), n - k):
            M = tuple(i for i in range(n) if i not in K)
            det = Fraction(1)
            if k:
                det = _det_small([[chart.metric_inv[m][h] for h in hset] for m in M])
            if not det:
                continue
            out.append((det * _perm_sign(M + K) * self.orientation, K))
        return out

    def star(self, form: LocalForm):
        chart = self.chart
        out = LocalForm(chart)
        for key, coeff in form.terms.items():
            body = tuple(a for a in key if a[0] != 'h')
            hset = tuple(a[1] for a in key if a[0] == 'h')
            for c, comp in self.hodge_legs(hset):
                word = body + tuple(('h', mu) for mu in comp)
                out._accum(word, coeff * c)
        return out

    # -- elaboration -----------------------------------------------------------
    def elaborate(self, node):
        from .algebra import d_h, d_v
        kind = node[0]
        if kind == "num":
            return Val.scalar(LocalForm.scalar(self.chart, node[1]))
        if kind == "add":
            return self.elaborate(node[1]) + self.elaborate(node[2])
        if kind == "neg":
            return -self.elaborate(node[1])
        if kind == "mul":
            return self.elaborate(node[1]).wedge(self.elaborate(node[2]))
        if kind == "id":
            name, primes = node[1], node[2]
            if primes:
                raise SyntaxError_(f"stray prime on {name!r}")
            if name == "vol":
                word = tuple(('h', mu) for mu in range(self.chart.dim))
                return Val.scalar(LocalForm.from_word(self.chart, word,
                                                      self.orientation))
            if name.startswith("dx") and name[2:].isdigit():
                mu = int(name[2:])
                if mu >= self.chart.dim:
                    raise DimensionMismatch(f"{name} out of range")
                return Val.scalar(LocalForm.from_word(self.chart, (('h', mu),)))
            if name in self.sources:
                return self.sources[name]
            if name in self.groups:
                return self.group_value(self.groups[name])
            if self.chart.has_name(name):
                return self.jet_value(name, "")
            raise UndeclaredIdentifier(f"unknown identifier {name!r}")
        if kind == "jet":
            return self.jet_value(node[1], node[2])
        if kind == "d":
            return self.elaborate(node[1]).map(d_h)
        if kind == "delta":
            return self.elaborate(node[1]).map(d_v)
        if kind == "star":
            return self.elaborate(node[1]).map(self.star)
        if kind == "inv":
            v = self.elaborate(node[1]).require_scalar("inv argument")
            if v is None or len(v.terms) != 1:
                raise GradingMismatch("inv expects a single named constant")
            (w, c), = v.terms.items()
            if c != 1 or len(w) != 1 or w[0][0] != 'j' or \
                    self.chart.kind(w[0][1]) != CONST or midx_order(w[0][2]):
                raise GradingMismatch("inv expects a single named constant")
            return Val.scalar(LocalForm.from_word(self.chart, (('ji', w[0][1]),)))
        if kind == "tr":
            # tr distributes over sums (summands may carry different index
            # multiplicities, e.g. tr(A ^ dA + 2/3 A ^ A ^ A))
            total = None
            for sign, sub in _additive_terms(node[1]):
                piece = self._trace(self.elaborate(sub))
                if sign < 0:
                    piece = -piece
                total = piece if total is None else total + piece
            return total
        if kind == "bracket":
            return self._bracket(self.elaborate(node[1]), self.elaborate(node[2]))
        if kind == "pair":
            return self._pair(self.elaborate(node[1]), self.elaborate(node[2]))
        if kind == "call":
            return self._call(node)
        if kind == "fint":
            return self._fint(node)
        raise VarcalcError(f"unhandled node {kind!r}")

    def _structure_of(self, names, what):
        sts = set(names)
        if len(sts) != 1:
            raise GradingMismatch(f"{what} requires matching Lie indices, got {names}")
        return self.structures[sts.pop()]

    def _trace(self, v: Val):
        if len(v.indices) == 0:
            raise GradingMismatch("tr of a scalar")
        if len(v.indices) == 1:
            return Val.scalar(LocalForm.zero(self.chart))
        st = self._structure_of(v.indices, "tr")
        out = LocalForm.zero(self.chart)
        if len(v.indices) == 2:
            for (a, b), f in v.comps.items():
                k = st.kappa.get((a, b)) or st.kappa.get((b, a))
                if k:
                    out = out + f * k
            return Val.scalar(out)
        if len(v.indices) == 3:
            for (a, b, c), f in v.comps.items():
                total = Fraction(0)
                for d, coeff in st.bracket_coeffs(b, c):
                    k = st.kappa.get((a, d)) or st.kappa.get((d, a))
                    if k:
                        total += Fraction(1, 2) * k * coeff
                if total:
                    out = out + f * total
            return Val.scalar(out)
        raise GradingMismatch("tr supports at most triple products")

    def _bracket(self, x: Val, y: Val):
        if len(x.indices) != 1 or len(y.indices) != 1:
            raise GradingMismatch("[.,.] needs two Lie-valued factors")
        st = self._structure_of(x.indices + y.indices, "[.,.]")
        comps = {}
        for (a,), fa in x.comps.items():
            for (b,), fb in y.comps.items():
                w = fa.wedge(fb)
                if w.is_zero():
                    continue
                for c, coeff in st.bracket_coeffs(a, b):
                    key = (c,)
                    add = w * coeff
                    comps[key] = comps.get(key, None) + add if key in comps else add
        return Val((st.name,), comps)

    def _pair(self, x: Val, y: Val):
        if len(x.indices) != 1 or len(y.indices) != 1:
            raise GradingMismatch("<.,.> needs two Lie-valued factors")
        st = self._structure_of(x.indices + y.indices, "<.,.>")
        out = LocalForm.zero(self.chart)
        for (a,), fa in x.comps.items():
            for (b,), fb in y.comps.items():
                k = st.kappa.get((a, b)) or st.kappa.get((b, a))
                if k:
                    out = out + fa.wedge(fb) * k
        return Val.scalar(out)

    def _arg_atom(self, node):
        if node[0] == "num" and node[1] == 0:
            return ('0',)
        v = self.elaborate(node).require_scalar("function argument")
        if v is None or v.is_zero():
            return ('0',)
        if len(v.terms) == 1:
            (w, c), = v.terms.items()
            if c == 1 and len(w) == 1 and w[0][0] == 'j':
                return w[0]
        raise GradingMismatch("function arguments must be plain jets or 0")

    def _call(self, node):
        _, name, dspec, args = node
        fn = self.chart.function_by_name(name)
        atoms = tuple(self._arg_atom(a[1] if a[0] == "scaled" else a) for a in args)
        if len(atoms) != fn.arity:
            raise GradingMismatch(f"{name} expects {fn.arity} arguments")
        if len(dspec) == fn.arity:
            dords = tuple(dspec)
        elif len(dspec) == 1:
            dords = (dspec[0],) + (0,) * (fn.arity - 1)
        else:
            raise GradingMismatch(f"bad derivative orders for {name}")
        return Val.scalar(LocalForm.from_word(
            self.chart, (('f', fn.sym_id, dords, atoms),)))

    def _fint(self, node):
        _, k, apps = node
        inner = []
        for app in apps:
            if app[0] != "call":
                raise GradingMismatch("fint expects function applications")
            v = self._call(app)
            (w, c), = v.comps[()].terms.items()
            inner.append(w[0])
        return Val.scalar(LocalForm.from_word(
            self.chart, (('F', int(k), tuple(sorted(inner))),)))


def elaborate_form(ctx: ElabContext, text, line_no=1) -> LocalForm:
    ast = parse_expression(text, line_no)
    v = ctx.elaborate(ast)
    form = v.require_scalar("expression")
    return form if form is not None else LocalForm.zero(ctx.chart)


# ---------------------------------------------------------------------------
# theory-file parser
# ---------------------------------------------------------------------------

def parse_theory(text) -> TheoryDef:
    td = TheoryDef()
    lines = text.splitlines()
    if not any(ln.strip() and not ln.strip().startswith("#") for ln in lines):
        raise SyntaxError_("empty theory file", 1, 1)
    i = 0
    current_sym = None
    while i < len(lines):
        raw = lines[i]
        no = i + 1
        i += 1
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        indented = line[0] in " \t"
        parts = line.split()
        head = parts[0]
        if indented and current_sym is not None:
            if "=" not in line:
                raise SyntaxError_("expected 'field = expression'", no, 1)
            lhs, rhs = line.split("=", 1)
            current_sym.assignments[lhs.strip()] = (rhs.strip(), no)
            continue
        current_sym = None
        if head == "theory":
            td.name = parts[1]
        elif head == "dimension":
            td.dim = int(parts[1])
            if td.dim < 1:
                raise SyntaxError_("dimension must be >= 1", no, 1)
        elif head == "coordinates":
            td.coords = parts[1:]
        elif head == "signature":
            td.signature = [1 if p == "+" else -1 for p in parts[1:]]
        elif head == "metric":
            rows = " ".join(parts[1:]).split("/")
            td.metric = [[Fraction(x) for x in row.split()] for row in rows]
        elif head == "orientation":
            td.orientation = int(parts[1])
        elif head == "jet_cutoff":
            td.jet_cutoff = int(parts[1])
        elif head == "constant":
            td.constants.extend(parts[1:])
        elif head == "function":
            arity = 1
            if "arity" in parts:
                arity = int(parts[parts.index("arity") + 1])
            td.functions.append((parts[1], arity))
        elif head == "structure":
            td.structures[parts[1]] = parts[2] if len(parts) > 2 else "abelian"
        elif head == "field":
            td.fields.append((parts[1:], no))
        elif head == "source":
            if "=" not in line:
                raise SyntaxError_("source needs '= expression'", no, 1)
            decl, value = line.split("=", 1)
            td.sources.append((decl.split()[1:], value.strip(), no))
        elif head == "lagrangian":
            td.lagrangian = line.split(None, 1)[1]
            td.lagrangian_line = no
        elif head == "symmetry":
            sym = SymmetryDecl(parts[1], [], {}, None)
            td.symmetries.append(sym)
            current_sym = sym
            rest = parts[2:]
            while rest:
                if rest[0] == "param":
                    decl = [rest[1]]
                    rest = rest[2:]
                    while rest and rest[0] not in ("param",):
                        decl.append(rest[0])
                        rest = rest[1:]
                    sym.params.append(decl)
                else:
                    raise SyntaxError_(f"unexpected token {rest[0]!r} in symmetry", no, 1)
        elif head == "solve":
            for tok in parts[1:]:
                if "_," not in tok:
                    raise SyntaxError_("solve expects jets like q_,00", no, 1)
                nm, digits = tok.split("_,")
                td.solve.append((nm, digits))
        else:
            raise SyntaxError_(f"unknown section {head!r}", no, 1)
    if td.dim < 1:
        raise SyntaxError_("missing dimension", 1, 1)
    if td.metric is None and len(td.signature) != td.dim:
        raise SyntaxError_("signature length must equal dimension", 1, 1)
    # eager syntax validation of every expression, for positioned diagnostics
    if td.lagrangian:
        parse_expression(td.lagrangian, td.lagrangian_line)
    for _decl, value, no in td.sources:
        parse_expression(value, no)
    for sym in td.symmetries:
        for rhs, no in sym.assignments.values():
            parse_expression(rhs, no)
    return td


def _parse_field_decl(parts, no):
    # NAME ('scalar' | 'form' K) [lie G] [ghost N] [components N] [constant]
    name = parts[0]
    deg = 0
    lie = None
    ghost = 0
    mult = 0
    constant = False
    rest = parts[1:]
    j = 0
    while j < len(rest):
        tok = rest[j]
        if tok == "scalar":
            deg = 0
        elif tok == "form":
            j += 1
            deg = int(rest[j])
        elif tok == "lie":
            j += 1
            lie = rest[j]
        elif tok == "ghost":
            j += 1
            ghost = int(rest[j])
        elif tok == "components":
            j += 1
            mult = int(rest[j])
        elif tok == "constant":
            constant = True
        else:
            raise SyntaxError_(f"unknown field attribute {tok!r}", no, 1)
        j += 1
    return name, deg, lie, ghost, mult, constant


def build_context(td: TheoryDef, jet_cutoff=None):
    """Build (chart, context) from a theory definition."""
    cutoff = jet_cutoff or td.jet_cutoff
    kwargs = {"jet_cutoff": cutoff} if cutoff else {}
    coords = td.coords if td.coords else None
    if td.metric is not None:
        chart = Chart(td.dim, metric=td.metric, coord_names=coords,
                      orientation=td.orientation, **kwargs)
    else:
        chart = Chart(td.dim, signature=td.signature, coord_names=coords,
                      orientation=td.orientation, **kwargs)
    chart.add_coordinates()
    ctx = ElabContext(chart, orientation=td.orientation)
    for name, spec in td.structures.items():
        if spec == "su2" or spec == "eps":
            st = su2_structure(name)
        elif spec == "abelian":
            st = abelian_structure(name, 1)
        elif spec.startswith("abelian"):
            st = abelian_structure(name, int(spec[len("abelian"):] or 1))
        else:
            raise MissingStructureConstants(f"unknown structure spec {spec!r}")
        if not st.check_jacobi():
            raise VarcalcError(f"structure {name!r} violates the Jacobi identity")
        ctx.add_structure(st)
    for nm in td.constants:
        chart.add_component(nm, kind=CONST)
    for nm, arity in td.functions:
        chart.add_function(nm, arity=arity)
    for parts, no in td.fields:
        name, deg, lie, ghost, mult, _c = _parse_field_decl(parts, no)
        ctx.add_field_group(name, deg, lie, ghost, DYNAMIC, mult)
    for sym in td.symmetries:
        for decl in sym.params:
            name, deg, lie, ghost, mult, constant = _parse_field_decl(decl, 0)
            kind = CPARAM if constant else PARAM
            if name not in ctx.groups:
                ctx.add_field_group(name, deg, lie, ghost, kind, mult)
                # auxiliary twin copy used by the pairwise identity checks
                ctx.add_field_group(name + "__b", deg, lie, ghost, kind, mult)
                if mult and not lie:
                    stn = f"_abelian_{name}"
                    ctx.add_structure(abelian_structure(stn, mult))
            if sym.structure is None:
                sym.structure = lie
    for decl, value, no in td.sources:
        name, deg, lie, ghost, mult, _c = _parse_field_decl(decl, no)
        form = elaborate_form(ctx, value, no)
        if not d_h(form).is_zero():
            raise VarcalcError(
                f"external source {name!r} is not closed (d j != 0)")
        ctx.sources[name] = Val.scalar(form)
    return chart, ctx


def _additive_terms(node, sign=1):
    """Flatten top-level sums of an expression AST into (sign, node) pairs."""
    if node[0] == "add":
        yield from _additive_terms(node[1], sign)
        yield from _additive_terms(node[2], sign)
    elif node[0] == "neg":
        yield from _additive_terms(node[1], -sign)
    elif node[0] == "mul" and node[1][0] == "num":
        # pull scalar prefactors out so tr sees the bare product
        for sg, sub in _additive_terms(node[2], sign):
            yield sg, ("mul", node[1], sub)
    else:
        yield sign, node

"""Contracting homotopies for the bicomplex of local forms.

The horizontal differential splits as d = d1 + d0, where d1 shifts the
multi-indices of the vertical legs (and is linear over the coefficient
ring) and d0 differentiates the coefficients.  On each finite stratum of
leg data, d1 is contracted exactly by sigma1 = e^T Delta^+ built from the
combinatorial Laplacian of d1; the homological perturbation series in d0
(which terminates, since sigma1 lowers total leg order) then produces a
homotopy h for the full horizontal differential satisfying

    alpha = h d alpha                     on (>=1, 0) forms,
    alpha = h d alpha + d h alpha         on (>=1, 0<q<n) forms,
    alpha = d h alpha + I alpha           on (>=1, n)  forms,

with I the interior Euler operator.  All arithmetic is exact.

The vertical homotopy is the radial-scaling contraction; on coefficients
with opaque function symbols it produces formal fiber-integral factors,
which are resolved whenever they assemble into a total lambda-derivative.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations

from .chart import COORD, DYNAMIC, GradingError, NonScalableTerm, NotConstant
from .algebra import (
    LocalForm, apply_derivation, atom_parity, d_h, d_v, midx_shift,
    midx_zero, norm_word, prepend_atom, zero_star,
)
from .euler import interior_euler, exterior_euler


# ---------------------------------------------------------------------------
# exact linear algebra over Q
# ---------------------------------------------------------------------------

def mat_mul(A, B):
    n, m, k = len(A), len(B[0]) if B else 0, len(B)
    out = [[Fraction(0)] * m for _ in range(n)]
    for i in range(n):
        Ai = A[i]
        for t in range(k):
            a = Ai[t]
            if a:
                Bt = B[t]
                row = out[i]
                for j in range(m):
                    if Bt[j]:
                        row[j] += a * Bt[j]
    return out


def mat_T(A):
    if not A:
        return []
    return [list(col) for col in zip(*A)]


def mat_inv(A):
    n = len(A)
    aug = [list(A[i]) + [Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col]), None)
        if piv is None:
            raise ValueError("singular matrix")
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = Fraction(1) / aug[col][col]
        aug[col] = [x * inv for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def mat_kernel(A):
    """Basis of the kernel of A (rows of the returned list are vectors)."""
    if not A:
        return []
    rows, cols = len(A), len(A[0])
    M = [list(r) for r in A]
    pivots = []
    r = 0
    for c in range(cols):
        piv = next((i for i in range(r, rows) if M[i][c]), None)
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        inv = Fraction(1) / M[r][c]
        M[r] = [x * inv for x in M[r]]
        for i in range(rows):
            if i != r and M[i][c]:
                f = M[i][c]
                M[i] = [a - f * b for a, b in zip(M[i], M[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    free = [c for c in range(cols) if c not in pivots]
    basis = []
    for fc in free:
        v = [Fraction(0)] * cols
        v[fc] = Fraction(1)
        for i, pc in enumerate(pivots):
            v[pc] = -M[i][fc]
        basis.append(v)
    return basis


def pseudo_inverse_psd(D):
    """Moore-Penrose inverse of a symmetric PSD rational matrix."""
    n = len(D)
    if n == 0:
        return []
    N = mat_kernel(D)
    if not N:
        return mat_inv(D)
    Nm = mat_T(N)                      # columns = kernel basis
    NNt = mat_mul(Nm, mat_T(Nm))       # n x n
    M = [[D[i][j] + NNt[i][j] for j in range(n)] for i in range(n)]
    Minv = mat_inv(M)
    G = mat_inv(mat_mul(mat_T(Nm), Nm))
    Q = mat_mul(mat_mul(Nm, G), mat_T(Nm))       # projection onto ker
    IQ = [[Fraction(int(i == j)) - Q[i][j] for j in range(n)] for i in range(n)]
    return mat_mul(Minv, IQ)


# ---------------------------------------------------------------------------
# strata of the leg complex
# ---------------------------------------------------------------------------

def _leg_split(key):
    """Split a canonical word into (coefficient atoms, leg atoms)."""
    for i, a in enumerate(key):
        if a[0] in ('v', 'h'):
            return key[:i], key[i:]
    return key, ()


def _stratum_key(chart, legs):
    fids = tuple(sorted(a[1] for a in legs if a[0] == 'v'))
    V = [0] * chart.dim
    for a in legs:
        if a[0] == 'v':
            for mu in range(chart.dim):
                V[mu] += a[2][mu]
        else:
            V[a[1]] -= 1
    return (fids, tuple(V))


def _distributions(total, slots, dim):
    """All ways to write the multi-index `total` as an ordered sum of
    `slots` multi-indices."""
    if slots == 1:
        yield (total,)
        return
    def parts(t):
        if len(t) == 1:
            for k in range(t[0] + 1):
                yield (k,)
            return
        for k in range(t[0] + 1):
            for rest in parts(t[1:]):
                yield (k,) + rest
    for first in parts(total):
        rem = tuple(a - b for a, b in zip(total, first))
        for rest in _distributions(rem, slots - 1, dim):
            yield (first,) + rest


class _Stratum:
    def __init__(self, suite, fids, V):
        self.suite = suite
        chart = suite.chart
        n = chart.dim
        self.bases = {}
        self.index = {}
        dirs = range(n)
        for b in range(n + 1):
            words = set()
            for H in combinations(dirs, b):
                chi = [0] * n
                for mu in H:
                    chi[mu] = 1
                T = tuple(v + c for v, c in zip(V, chi))
                if any(t < 0 for t in T):
                    continue
                hatoms = tuple(('h', mu) for mu in H)
                if not fids:
                    if all(t == 0 for t in T):
                        words.add(hatoms)
                    continue
                for dist in _distributions(T, len(fids), n):
                    atoms = tuple(('v', fid, I) for fid, I in zip(fids, dist))
                    res = norm_word(chart, atoms + hatoms, 1)
                    if res is not None:
                        words.add(res[0])
            basis = sorted(words)
            self.bases[b] = basis
            self.index[b] = {w: i for i, w in enumerate(basis)}
        # matrices of d1: bases[b] -> bases[b+1]
        self.e = {}
        for b in range(n):
            src, tgt = self.bases[b], self.bases[b + 1]
            idx = self.index[b + 1]
            cols = []
            for w in src:
                col = {}
                image = suite.d1(LocalForm(chart, {w: Fraction(1)}))
                for k, c in image.terms.items():
                    col[idx[k]] = c
                cols.append(col)
            self.e[b] = (cols, len(tgt))
        self.pinv = {}

    def delta_pinv(self, b):
        if b not in self.pinv:
            n = self.suite.chart.dim
            dim = len(self.bases[b])
            D = [[Fraction(0)] * dim for _ in range(dim)]
            if b < n:
                cols, _ = self.e[b]
                for j, col in enumerate(cols):
                    for jj, col2 in enumerate(cols):
                        s = Fraction(0)
                        for i, c in col.items():
                            c2 = col2.get(i)
                            if c2:
                                s += c * c2
                        D[jj][j] += s          # (e^T e)_{jj,j}
            if b > 0:
                cols, _ = self.e[b - 1]
                for j, col in enumerate(cols):
                    for i, c in col.items():
                        for i2, c2 in col.items():
                            D[i][i2] += c * c2  # (e e^T)
            P = pseudo_inverse_psd(D)
            if b < n and self.bases[b] and _has_legs(self.bases[b][0]):
                if mat_kernel(D):
                    raise AssertionError(
                        "unexpected d1-cohomology below top horizontal degree")
            self.pinv[b] = P
        return self.pinv[b]

    def sigma1_coords(self, b, vec):
        """sigma1 on coordinates at horizontal degree b; returns dict over
        bases[b-1] indices."""
        if b == 0:
            return {}
        P = self.delta_pinv(b)
        dim = len(self.bases[b])
        z = [Fraction(0)] * dim
        for i, c in vec.items():
            if c:
                for j in range(dim):
                    if P[j][i]:
                        z[j] += P[j][i] * c
        cols, _ = self.e[b - 1]
        out = {}
        for j, col in enumerate(cols):
            s = Fraction(0)
            for i, c in col.items():
                if z[i]:
                    s += c * z[i]
            if s:
                out[j] = s
        return out


def _has_legs(word):
    return any(a[0] == 'v' for a in word)


# ---------------------------------------------------------------------------
# the homotopy suite
# ---------------------------------------------------------------------------

class HomotopySuite:
    """Bundled operators (d, dv, I, E, h>=, hv, h0, P, P0, d_C, h_C) on a chart."""

    def __init__(self, chart):
        self.chart = chart
        self._strata = {}

    # -- d = d1 + d0 split -------------------------------------------------
    def d1(self, form):
        chart = self.chart
        out = LocalForm(chart)
        for mu in range(chart.dim):
            def image(atom, mu=mu):
                if atom[0] == 'v':
                    return LocalForm.from_word(chart, (('v', atom[1], midx_shift(atom[2], mu)),))
                return None
            shifted = apply_derivation(form, 0, image)
            out = out + prepend_atom(shifted, ('h', mu))
        return out

    def d0(self, form):
        return d_h(form) - self.d1(form)

    # -- sigma1 and the perturbed homotopy ----------------------------------
    def _stratum(self, skey):
        if skey not in self._strata:
            self._strata[skey] = _Stratum(self, *skey)
        return self._strata[skey]

    def sigma1(self, form):
        chart = self.chart
        out = LocalForm(chart)
        for key, coeff in form.terms.items():
            coeffs, legs = _leg_split(key)
            if not legs:
                continue
            res = norm_word(chart, legs, 1)
            if res is None:
                continue
            lw, lsign = res
            skey = _stratum_key(chart, lw)
            st = self._stratum(skey)
            b = sum(1 for a in lw if a[0] == 'h')
            idx = st.index[b].get(lw)
            if idx is None:
                raise AssertionError("leg word missing from its stratum basis")
            cpar = sum(atom_parity(chart, a) for a in coeffs) & 1
            sgn = -1 if cpar else 1
            image = st.sigma1_coords(b, {idx: Fraction(1)})
            for j, c in image.items():
                target = st.bases[b - 1][j]
                out._accum(coeffs + target, coeff * lsign * c * sgn)
        return out

    def h_inf(self, form):
        acc = LocalForm(self.chart)
        cur = self.sigma1(form)
        guard = 0
        while not cur.is_zero():
            acc = acc + cur
            cur = -self.sigma1(self.d0(cur))
            guard += 1
            if guard > 10 * (self.chart.jet_cutoff + self.chart.dim + 2):
                raise AssertionError("perturbation series failed to terminate")
        return acc

    # -- public operators ----------------------------------------------------
    def interior_euler(self, form):
        return interior_euler(form)

    def exterior_euler(self, form):
        return exterior_euler(form)

    def h_horizontal(self, form, special=False):
        """Anderson-style horizontal homotopy h>= on vertical degree >= 1."""
        if form.is_zero():
            return form
        chart = self.chart
        n = chart.dim
        if any(LocalForm.key_vdeg(k) < 1 for k in form.terms):
            raise GradingError("horizontal homotopy needs vertical degree >= 1")
        if special:
            base = self.h_horizontal(form)
            return self.h_horizontal(d_h(base)) if not base.is_zero() else base
        top = form.components(lambda p, q: q == n)
        rest = form - top
        out = self.h_inf(rest)
        if not top.is_zero():
            out = out + self.h_inf(top - interior_euler(top))
        return out

    def h_vertical(self, form):
        """Radial-scaling vertical homotopy; lowers vertical degree by one."""
        chart = self.chart
        out = LocalForm(chart)
        for key, coeff in form.terms.items():
            atoms = list(key)
            vpos = [i for i, a in enumerate(atoms) if a[0] == 'v']
            if not vpos:
                continue
            p = len(vpos)
            a_count = 0
            scaled_f = []
            for a in atoms:
                if a[0] == 'j' and chart.kind(a[1]) == DYNAMIC:
                    a_count += 1
                elif a[0] == 'f' and any(
                        x[0] == 'j' and chart.kind(x[1]) == DYNAMIC for x in a[3]):
                    scaled_f.append(a)
                elif a[0] == 'F':
                    raise NonScalableTerm(
                        "vertical homotopy applied to a form already carrying "
                        "a fiber-integral factor")
            k = a_count + (p - 1)
            for i in vpos:
                sgn = 1
                for a in atoms[:i]:
                    if atom_parity(chart, a):
                        sgn = -sgn
                leg = atoms[i]
                word = list(atoms)
                word[i] = ('j', leg[1], leg[2])
                if scaled_f:
                    word = [a for a in word if a not in scaled_f]
                    word.append(('F', k, tuple(sorted(scaled_f))))
                    out._accum(tuple(word), coeff * sgn)
                else:
                    out._accum(tuple(word), coeff * sgn * Fraction(1, k + 1))
        return resolve_fiber_integrals(out)

    def h_zero(self, form):
        """h0 = -hv h>= dv on vertical degree 0."""
        if form.is_zero():
            return form
        p, _q = form.grading()
        if p != 0:
            raise GradingError("h0 acts on vertical degree 0")
        dv = d_v(form)
        if dv.is_zero():
            return LocalForm.zero(self.chart)
        return -self.h_vertical(self.h_horizontal(dv))

    def euler_projector(self, form):
        """P = hv i E on (0, top) forms."""
        if form.is_zero():
            return form
        p, q = form.grading()
        if p != 0 or q != self.chart.dim:
            raise GradingError("Euler projector acts on (0, top) forms")
        E = exterior_euler(form)
        if E.is_zero():
            return LocalForm.zero(self.chart)
        return self.h_vertical(E)

    def euler_projector0(self, form):
        return self.euler_projector(form) + zero_star(form)

    # -- horizontal cone -----------------------------------------------------
    def _check_constant(self, a):
        for key in a.terms:
            for atom in key:
                if atom[0] in ('v',):
                    raise NotConstant("cone element must be field-independent")
                if atom[0] == 'j' and self.chart.kind(atom[1]) == DYNAMIC:
                    raise NotConstant("cone element must be field-independent")
                if atom[0] in ('f', 'F'):
                    raise NotConstant("cone element must be field-independent")

    def cone_d(self, pair):
        a, b = pair
        self._check_constant(a)
        return (-d_h(a), d_h(b) + a)

    def cone_h(self, pair):
        a, b = pair
        self._check_constant(a)
        return (zero_star(b), self.h_zero(b))

    # -- de Rham homotopy on the base (field-independent forms) --------------
    def poincare_x(self, form):
        """Radial homotopy in the chart coordinates; acts on
        field-independent forms with polynomial coordinate coefficients."""
        chart = self.chart
        self._check_constant(form)
        out = LocalForm(chart)
        for key, coeff in form.terms.items():
            atoms = list(key)
            hpos = [i for i, a in enumerate(atoms) if a[0] == 'h']
            if not hpos:
                continue
            q = len(hpos)
            degx = sum(1 for a in atoms if a[0] == 'j' and chart.kind(a[1]) == COORD)
            for i in hpos:
                sgn = 1
                for a in atoms[:i]:
                    if atom_parity(chart, a):
                        sgn = -sgn
                mu = atoms[i][1]
                xfid = next(c.fid for c in chart.components
                            if c.kind == COORD and c.coord_dir == mu)
                word = atoms[:i] + [('j', xfid, midx_zero(chart.dim))] + atoms[i + 1:]
                out._accum(tuple(word), coeff * sgn * Fraction(1, q + degx))
        return out


def resolve_fiber_integrals(form: LocalForm):
    """Recognize sum_i arg_i * F^{(d+e_i)}(l*args) patterns as exact
    lambda-derivatives and resolve them to F(args) - F(0...)."""
    chart = form.chart
    changed = True
    while changed:
        changed = False
        groups = {}
        for key, coeff in form.terms.items():
            fpos = [i for i, a in enumerate(key) if a[0] == 'F']
            if len(fpos) != 1:
                continue
            node = key[fpos[0]]
            k, inner = node[1], node[2]
            if k != 0 or len(inner) != 1:
                continue
            app = inner[0]
            sym, dords, args = app[1], app[2], app[3]
            rest = key[:fpos[0]] + key[fpos[0] + 1:]
            for slot, arg in enumerate(args):
                if dords[slot] < 1 or arg[0] != 'j':
                    continue
                arg_atom = ('j', arg[1], arg[2])
                if arg_atom not in rest:
                    continue
                w = list(rest)
                w.remove(arg_atom)
                base = tuple(d - (1 if s == slot else 0) for s, d in enumerate(dords))
                gkey = (tuple(w), sym, base, args, coeff)
                groups.setdefault(gkey, {})[slot] = key
        for (w, sym, base, args, coeff), slots in groups.items():
            needed = [s for s, a in enumerate(args) if a[0] == 'j']
            if not needed or any(s not in slots for s in needed):
                continue
            if any(key not in form.terms or form.terms[key] != coeff
                   for key in slots.values()):
                continue
            for key in set(slots.values()):
                form.terms.pop(key, None)
            out = LocalForm(chart)
            out._accum(w + (('f', sym, base, args),), coeff)
            zargs = tuple(('0',) if a[0] == 'j' else a for a in args)
            out._accum(w + (('f', sym, base, zargs),), -coeff)
            form = form + out
            changed = True
            break
    return form


def get_suite(chart) -> HomotopySuite:
    suite = getattr(chart, "_homotopy_suite", None)
    if suite is None:
        suite = HomotopySuite(chart)
        chart._homotopy_suite = suite
    return suite


def bruteforce_dexactness(target, extra_rounds=1):
    """Independent integration-by-parts oracle for small instances.

    Decides by bounded linear algebra whether ``target`` lies in the image
    of the horizontal differential, using an ansatz basis generated from
    the target's own terms (one leg removed, orders lowered), without any
    homotopy operator.  Returns True when a primitive exists within the
    ansatz; meant to cross-check h>= on small forms.
    """
    chart = target.chart
    if target.is_zero():
        return True
    pool = set()

    def lowerings(key):
        for i, a in enumerate(key):
            if a[0] == 'h':
                rest = key[:i] + key[i + 1:]
                mu = a[1]
                yield rest
                for jj, b in enumerate(rest):
                    if b[0] in ('j', 'v') and b[2][mu] >= 1:
                        low = tuple(x - (1 if d == mu else 0)
                                    for d, x in enumerate(b[2]))
                        yield rest[:jj] + ((b[0], b[1], low),) + rest[jj + 1:]

    frontier = set(target.terms)
    for _ in range(extra_rounds + 1):
        new = set()
        for key in frontier:
            for cand in lowerings(key):
                res = norm_word(chart, cand, 1)
                if res is not None:
                    new.add(res[0])
        pool |= new
        frontier = new
    if not pool:
        return False
    cols = []
    index = {}
    for w in sorted(pool):
        img = d_h(LocalForm(chart, {w: Fraction(1)}))
        col = {}
        for k, c in img.terms.items():
            idx = index.setdefault(k, len(index))
            col[idx] = c
        cols.append(col)
    tvec = {}
    for k, c in target.terms.items():
        if k not in index:
            return False
        tvec[index[k]] = c
    rows = len(index)
    A = [[Fraction(0)] * len(cols) for _ in range(rows)]
    b = [Fraction(0)] * rows
    for j, col in enumerate(cols):
        for i, c in col.items():
            A[i][j] = c
    for i, c in tvec.items():
        b[i] = c
    # consistency of A x = b by elimination
    m = [row[:] + [b[i]] for i, row in enumerate(A)]
    ncols = len(cols)
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, rows) if m[i][c]), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = Fraction(1) / m[r][c]
        m[r] = [x * inv for x in m[r]]
        for i in range(rows):
            if i != r and m[i][c]:
                f = m[i][c]
                m[i] = [a - f * bb for a, bb in zip(m[i], m[r])]
        r += 1
    for i in range(r, rows):
        if m[i][ncols] and all(not x for x in m[i][:ncols]):
            return False
    for i in range(rows):
        if m[i][ncols] and all(not x for x in m[i][:ncols]):
            return False
    return True

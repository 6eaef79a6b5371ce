"""Lagrangian field theories: build, caches, equivalence, symmetries,
solved-form on-shell reduction."""

from __future__ import annotations

from fractions import Fraction

from .chart import (
    DYNAMIC, PARAM, GradingError, InvariantViolation, NoSolvedForm,
    VarcalcError,
)
from .algebra import (
    LocalForm, contract_leg, d_h, d_v, midx_zero, substitute, zero_star,
)
from .euler import EvolutionaryField, exterior_euler, lie_derivative
from .homotopy import HomotopySuite, get_suite
from .dsl import (
    ElabContext, FieldGroup, Structure, TheoryDef, build_context,
    elaborate_form, parse_expression,
)


class SymmetryAction:
    """A (local) Lie algebra action by evolutionary vector fields.

    The engine realizes a declared action through the parameter reflection
    (rho, [.,.]) -> (-rho, -[.,.]), an isomorphic presentation of the same
    Lie algebra action chosen so that the homotopy Noether currents come
    out on the conventions used for the shipped corpus.
    """

    def __init__(self, theory, name, param_groups, assignments, structure=None,
                 reflect=True):
        self.theory = theory
        self.name = name
        self.param_groups = param_groups
        chart = theory.chart
        ctx = theory.ctx
        comps = {}
        for gname, (rhs_text, line) in assignments.items():
            if gname not in ctx.groups:
                raise VarcalcError(f"symmetry assigns unknown field {gname!r}")
            g = ctx.groups[gname]
            val = ctx.elaborate(parse_expression(rhs_text, line))
            comps.update(_match_components(ctx, g, val))
        sign = -1 if reflect else 1
        self.rho = EvolutionaryField(
            chart, {fid: f * sign for fid, f in comps.items()}, name=name)
        base = structure
        if base is None:
            self.structure = None
        else:
            st = ctx.structures[base]
            flipped = {ab: [(c, -coeff) for c, coeff in lst]
                       for ab, lst in st.f.items()}
            self.structure = Structure(st.name, st.dim,
                                       flipped if reflect else st.f, st.kappa)
        self.is_local = all(
            theory.chart.kind(fid) == PARAM
            for g in param_groups for fid in g.comps.values())

    def param_fids(self):
        out = []
        for g in self.param_groups:
            out.extend(sorted(g.comps.values()))
        return out

    def bracket_param(self, xi_group, eta_group):
        """[xi, eta] as bindings on a third parameter copy: returns the map
        fid_of_bracket_component -> LocalForm built from xi, eta jets."""
        raise NotImplementedError


def _match_components(ctx: ElabContext, g: FieldGroup, val):
    """Match an elaborated RHS against the components of a field group."""
    chart = ctx.chart
    out = {}
    if g.multiplicity:
        raise VarcalcError(
            f"assign components of {g.name!r} individually")
    indices = (g.lie,) if g.lie else ()
    if val.indices != indices:
        raise GradingError(
            f"assignment to {g.name!r} has Lie indices {val.indices}, "
            f"expected {indices}")
    for (fidx, lidx), fid in g.comps.items():
        form = val.comps.get(lidx)
        if form is None:
            continue
        comp_form = _extract_h_coeff(form, fidx)
        if not comp_form.is_zero():
            out[fid] = comp_form
    return out


def _extract_h_coeff(form: LocalForm, fidx):
    """Coefficient of dx^{fidx} (ascending tuple) in a horizontal form."""
    chart = form.chart
    out = LocalForm(chart)
    target = tuple(('h', mu) for mu in fidx)
    for key, c in form.terms.items():
        legs = tuple(a for a in key if a[0] == 'h')
        if legs == target:
            body = tuple(a for a in key if a[0] != 'h')
            out._accum(body, c)
    return out


class Theory:
    """A Lagrangian field theory with its derived homotopy caches."""

    def __init__(self, td: TheoryDef, jet_cutoff=None):
        self.td = td
        self.chart, self.ctx = build_context(td, jet_cutoff=jet_cutoff)
        self.suite: HomotopySuite = get_suite(self.chart)
        if not td.lagrangian:
            raise VarcalcError("theory has no lagrangian")
        self.L = elaborate_form(self.ctx, td.lagrangian, td.lagrangian_line)
        if not self.L.is_zero():
            p, q = self.L.grading()
            if (p, q) != (0, self.chart.dim):
                raise GradingError(
                    f"lagrangian must be a (0, {self.chart.dim}) form, got ({p},{q})")
        self.EL = exterior_euler(self.L) if not self.L.is_zero() \
            else LocalForm.zero(self.chart)
        dvL = d_v(self.L)
        self.theta = self.suite.h_horizontal(dvL) if not dvL.is_zero() \
            else LocalForm.zero(self.chart)
        self.omega = d_v(self.theta)
        self.Lh = self.suite.euler_projector(self.L) if not self.L.is_zero() \
            else LocalForm.zero(self.chart)
        resid = dvL - self.EL - d_h(self.theta)
        if not resid.is_zero():
            raise InvariantViolation("d_v L != E L + d theta")
        resid2 = d_h(self.omega) - d_v(self.EL)
        if not resid2.is_zero():
            raise InvariantViolation("d omega != d_v E L")
        self.el_generators = self._extract_generators()
        self.solved = self._build_solved_forms()
        self.symmetries = {}
        for decl in td.symmetries:
            groups = [self.ctx.groups[d[0]] for d in decl.params]
            self.symmetries[decl.name] = SymmetryAction(
                self, decl.name, groups,
                {k: v for k, v in decl.assignments.items()},
                structure=decl.structure)

    # -- Euler-Lagrange generators and solved forms -------------------------
    def _extract_generators(self):
        out = []
        for fid in sorted({a[1] for k in self.EL.terms for a in k if a[0] == 'v'}):
            coeff = contract_leg(self.EL, fid, midx_zero(self.chart.dim))
            if not coeff.is_zero():
                out.append((fid, coeff))
        return out

    def _scalar_generator(self, fid):
        """The EL source component for a field, with legs stripped."""
        for gfid, coeff in self.el_generators:
            if gfid == fid:
                out = LocalForm(self.chart)
                for key, c in coeff.terms.items():
                    body = tuple(a for a in key if a[0] != 'h')
                    out._accum(body, c)
                return out
        return None

    def _build_solved_forms(self):
        chart = self.chart
        bindings = {}
        used = set()
        for name, digits in self.td.solve:
            comp = chart.by_name(name)
            m = [0] * chart.dim
            for dch in digits:
                m[int(dch)] += 1
            target = (comp.fid, tuple(m))
            found = False
            for gfid, _c in self.el_generators:
                if gfid in used:
                    continue
                E = self._scalar_generator(gfid)
                sol = _solve_linear(E, target)
                if sol is not None:
                    bindings[target] = sol
                    used.add(gfid)     # one solved jet per EL generator
                    found = True
                    break
            if not found:
                raise NoSolvedForm(
                    f"no unused EL component is linear in {name}_,{digits} "
                    f"with invertible coefficient")
        return bindings

    def reduce_on_shell(self, form: LocalForm, max_rounds=12):
        """Substitute declared solved forms (and their prolongations) to a
        fixpoint; certifies membership in the prolonged EL ideal."""
        if not self.solved:
            if form.is_zero():
                return form
            raise NoSolvedForm(
                "theory declares no solved forms for its EL generators")
        cur = form
        for _ in range(max_rounds):
            nxt = substitute(cur, self.solved)
            if nxt == cur:
                return nxt
            cur = nxt
        return cur

    # -- symmetry-facing API -------------------------------------------------
    def symmetry(self, name) -> SymmetryAction:
        try:
            return self.symmetries[name]
        except KeyError:
            raise VarcalcError(f"theory has no symmetry {name!r}") from None

    def is_symmetry(self, sym: SymmetryAction):
        lrl = lie_derivative(sym.rho, self.L)
        if lrl.is_zero():
            return True
        if not self.suite.euler_projector(lrl).is_zero():
            return False
        # representative independence: check against L^h as well
        lrlh = lie_derivative(sym.rho, self.Lh)
        if not lrlh.is_zero() and not self.suite.euler_projector(lrlh).is_zero():
            raise InvariantViolation(
                "symmetry verdict differs between L and P(L)")
        return True

    def lagrangians_equivalent(self, other: "Theory"):
        """Same EL set; returns (bool, witness) with witness = (constant
        part, d-primitive) of the difference when equivalent."""
        diff = other.L - self.L
        same = (other.EL - self.EL).is_zero()
        same_p = (self.suite.euler_projector(other.L)
                  - self.suite.euler_projector(self.L)).is_zero()
        if same != same_p:
            raise InvariantViolation("E and P disagree on Lagrangian equivalence")
        if not same:
            return False, None
        const = zero_star(diff)
        primitive = self.suite.h_zero(diff)
        resid = diff - const - d_h(primitive)
        if not resid.is_zero():
            raise InvariantViolation("equivalence witness failed to close")
        return True, (const, primitive)


def _solve_linear(E: LocalForm, target):
    """Solve E = 0 for the target jet if E = c * u_target + rest with c a
    nonzero rational times named constants."""
    if E is None:
        return None
    chart = E.chart
    fid, midx = target
    atom = ('j', fid, midx)
    lead = LocalForm(chart)
    rest = LocalForm(chart)
    for key, c in E.terms.items():
        if atom in key:
            if key.count(atom) > 1:
                return None
            cof = _remove_one(key, atom)
            if any(a[0] == 'j' and chart.kind(a[1]) == DYNAMIC for a in cof):
                return None
            lead._accum(cof, c)
        else:
            rest._accum(key, c)
    if lead.is_zero() or len(lead.terms) != 1:
        return None
    (cof_word, cval), = lead.terms.items()
    if any(a[0] not in ('j', 'ji') for a in cof_word):
        return None
    # invert the constant monomial
    inv_word = []
    for a in cof_word:
        if a[0] == 'j':
            inv_word.append(('ji', a[1]))
        else:
            inv_word.append(('j', a[1], midx_zero(chart.dim)))
    inv = LocalForm.from_word(chart, tuple(inv_word), Fraction(1) / cval)
    return (-rest).wedge(inv)


def _remove_one(key, atom):
    out = list(key)
    out.remove(atom)
    return tuple(out)


def build_theory(td: TheoryDef, jet_cutoff=None) -> Theory:
    return Theory(td, jet_cutoff=jet_cutoff)


def theory_from_text(text, jet_cutoff=None) -> Theory:
    from .dsl import parse_theory
    return Theory(parse_theory(text), jet_cutoff=jet_cutoff)

"""BV and BFV graded extensions: ghosts, antifields, master equations,
and the BV-BFV compatibility conditions on a coordinate slice."""

from __future__ import annotations

from fractions import Fraction

from .chart import (
    Chart, COORD, DYNAMIC, CMEFails, NoBracket,
    NotHamiltonian, NotLocal, NotStronglyHamiltonian, ResidualNonzero,
    VarcalcError,
)
from .algebra import (
    LocalForm, contract_leg, d_h, d_v, midx_zero, zero_star,
)
from .euler import EvolutionaryField, insert, interior_euler, lie_derivative
from .homotopy import get_suite
from .noether import Report
from .render import render_text
from .slicing import SigmaTheory, SliceSpec, sigma_noether, split_constraint_flux
from .theory import SymmetryAction, Theory


GHOST_TERM_SIGN = 1     # calibrated below against Q_BFV nilpotence


def _vol_word(chart, orientation=1):
    return tuple(('h', mu) for mu in range(chart.dim)), Fraction(orientation)


class BVTheory:
    """The minimal BV extension of a theory with a faithful local symmetry."""

    def __init__(self, theory: Theory, sym: SymmetryAction):
        if not sym.is_local:
            raise NotLocal("BV extension needs a local symmetry")
        base = theory.chart
        self.base_theory = theory
        self.sym = sym

        chart = Chart(base.dim, metric=base.metric, coord_names=base.coord_names,
                      jet_cutoff=base.jet_cutoff, orientation=base.orientation)
        chart.add_coordinates()
        self.b2x: dict[int, int] = {}
        for comp in base.components:
            if comp.kind == COORD:
                continue
            c = chart.add_component(comp.name, ghost=comp.ghost, kind=comp.kind,
                                    group=comp.group, indices=comp.indices)
            self.b2x[comp.fid] = c.fid
        for fn in base.functions:
            chart.add_function(fn.name, fn.arity, fn.model)

        # ghosts replace the symmetry parameters; antifields double the fields
        pfids = sym.param_fids()
        self.ghosts = {}             # base param fid -> ghost fid
        for pf in pfids:
            pc = base.component(pf)
            g = chart.add_component("c_" + pc.name, ghost=1, kind=DYNAMIC,
                                    group="ghost")
            self.ghosts[pf] = g.fid
        self.antifields = {}         # chart fid (field or ghost) -> antifield fid
        matter = [self.b2x[c.fid] for c in base.components if c.kind == DYNAMIC]
        for fid in matter + sorted(self.ghosts.values()):
            comp = chart.component(fid)
            a = chart.add_component(comp.name + "_dag", ghost=-1 - comp.ghost,
                                    kind=DYNAMIC, group="antifield")
            self.antifields[fid] = a.fid
        self.chart = chart
        self.suite = get_suite(chart)

        z = midx_zero(chart.dim)
        param_to_ghost = {self.b2x[pf]: gf for pf, gf in self.ghosts.items()}

        def lift(form):
            """Transport a base-chart form, promoting parameter jets to
            ghost jets in place (components are parameter-linear)."""
            out = LocalForm(chart)
            for key, c in form.terms.items():
                word = []
                for a in key:
                    if a[0] in ('j', 'v'):
                        fid = self.b2x[a[1]]
                        fid = param_to_ghost.get(fid, fid)
                        word.append((a[0], fid, a[2]))
                    elif a[0] == 'ji':
                        word.append(('ji', self.b2x[a[1]]))
                    elif a[0] == 'f':
                        word.append(('f', a[1], a[2], tuple(
                            ('j', self.b2x[x[1]], x[2]) if x[0] == 'j' else x
                            for x in a[3])))
                    else:
                        word.append(a)
                out._accum(tuple(word), c)
            return out

        self.lift = lift
        L0 = lift(theory.L)

        # Q_CE on fields: rho with the parameter replaced by the ghost
        self.qce = {}
        for bfid, comp_form in sym.rho.components.items():
            self.qce[self.b2x[bfid]] = lift(comp_form)
        # Q_CE on ghosts: -1/2 [c, c] with the engine bracket
        st = sym.structure
        if st is not None:
            groups = sym.param_groups
            for g in groups:
                for (fidx, lidx), pfid in g.comps.items():
                    if not lidx:
                        continue
                    cfid = self.ghosts[pfid]
                    expr = LocalForm(chart)
                    for (a, b), lst in st.f.items():
                        for cc, coeff in lst:
                            if cc != lidx[0]:
                                continue
                            ga = self.ghosts[g.comps[(fidx, (a,))]]
                            gb = self.ghosts[g.comps[(fidx, (b,))]]
                            expr._accum((('j', ga, z), ('j', gb, z)),
                                        -Fraction(coeff) / 2)
                    if not expr.is_zero():
                        self.qce[cfid] = expr

        vol, ovol = _vol_word(chart)
        LBV = L0
        for fid, qf in sorted(self.qce.items()):
            af = self.antifields[fid]
            for key, c in qf.terms.items():
                LBV = LBV + LocalForm.from_word(
                    chart, (('j', af, z),) + key + vol, c)
        self.L = LBV
        if not (zero_ghost_body(self, self.L) - L0).is_zero():
            raise VarcalcError("BV body projection does not reproduce L")
        for key in self.L.terms:
            if self.L.key_ghost(key) != 0:
                raise VarcalcError("L_BV has a term of nonzero ghost degree")

        # canonical (-1)-symplectic density: omega = sum d(phi+) ^ d(phi) vol
        omega = LocalForm(chart)
        theta_can = LocalForm(chart)
        for fid, af in sorted(self.antifields.items()):
            omega._accum((('v', af, z), ('v', fid, z)) + vol, 1)
            theta_can._accum((('j', af, z), ('v', fid, z)) + vol, 1)
        if not (d_v(theta_can) - omega).is_zero():
            raise VarcalcError("canonical BV potential failed")
        self.omega_BV = omega
        self.Q = hamiltonian_vector_field(self.L, omega)
        # flow-equation sanity: Q reproduces Q_CE on fields and ghosts
        for fid, qf in self.qce.items():
            if not (self.Q.components.get(fid, LocalForm.zero(chart)) - qf).is_zero():
                raise VarcalcError("Hamiltonian flow does not reproduce Q_CE")
        # boundary structure: theta_BV is the homotopy primitive in
        # dv L_BV = E L_BV + d theta_BV; the flow equation makes
        # i_Q omega_BV = E L_BV exactly, so i_Q omega = dv L - d theta.
        dvL = d_v(self.L)
        self.theta = self.suite.h_horizontal(dvL) if not dvL.is_zero() \
            else LocalForm.zero(chart)
        rem = insert(self.Q, omega) - dvL + d_h(self.theta)
        if not rem.is_zero():
            raise ResidualNonzero("BV flow/boundary identity failed", rem)
        self.omega = d_v(self.theta)


def zero_ghost_body(bv: BVTheory, form):
    """Set every nonzero-ghost generator to zero."""
    chart = bv.chart
    out = LocalForm(chart)
    for key, c in form.terms.items():
        if all(not (a[0] in ('j', 'v') and chart.ghost(a[1]) != 0) for a in key):
            out.terms[key] = c
    return out


def hamiltonian_vector_field(F: LocalForm, omega: LocalForm) -> EvolutionaryField:
    """Solve I i_X omega = I dv F for X, for source-constant pairings."""
    chart = F.chart
    z = midx_zero(chart.dim)
    n = chart.dim
    src = interior_euler(omega) if not omega.is_zero() else omega
    EF = interior_euler(d_v(F)) if not d_v(F).is_zero() \
        else LocalForm.zero(chart)

    # pairing table: for generator u, the omega term d(u') ^ d(u) vol
    pair = {}
    for key, c in src.terms.items():
        legs = [a for a in key if a[0] == 'v']
        rest = [a for a in key if a[0] not in ('v', 'h')]
        if len(legs) != 2 or rest:
            raise NotHamiltonian("symplectic density is not a constant pairing")
        (f1, m1), (f2, m2) = (legs[0][1], legs[0][2]), (legs[1][1], legs[1][2])
        if m1 != z or m2 != z:
            raise NotHamiltonian("symplectic pairing involves higher jets")
        pair.setdefault(f2, []).append((f1, key, c))
        pair.setdefault(f1, []).append((f2, key, c))

    comps = {}
    for u in sorted(pair):
        # coefficient of d(u) in EF determines X along the partner of u
        coeff = contract_leg(EF, u, z)
        if coeff.is_zero():
            continue
        partners = {v for v, _k, _c in pair[u]}
        if len(partners) != 1:
            raise NotHamiltonian("degenerate symplectic pairing")
        v = partners.pop()
        dens = _density(coeff)
        # calibrate the sign/normalization through the insertion itself
        trial = EvolutionaryField(chart, {v: dens}, name="trial")
        got_full = insert(trial, omega)
        got = _density(contract_leg(interior_euler(got_full), u, z))
        ratio = _proportionality(got, dens)
        if ratio is None:
            raise NotHamiltonian(
                f"cannot solve the flow equation along {chart.component(v).name}")
        comps[v] = comps.get(v, LocalForm.zero(chart)) + dens * (Fraction(1) / ratio)

    X = EvolutionaryField(chart, {k: v for k, v in comps.items()
                                  if not v.is_zero()}, name="X_F")
    resid = interior_euler(insert(X, omega)) - EF \
        if not insert(X, omega).is_zero() else -EF
    if not resid.is_zero():
        raise NotHamiltonian(
            "no Hamiltonian vector field solves the flow equation: residual "
            + render_text(resid))
    return X


def _density(form):
    """Strip a full horizontal volume word; scalar part must be left."""
    chart = form.chart
    vol = tuple(('h', mu) for mu in range(chart.dim))
    out = LocalForm(chart)
    for key, c in form.terms.items():
        legs = tuple(a for a in key if a[0] == 'h')
        if legs != vol:
            raise NotHamiltonian("expected a top-degree density")
        out._accum(tuple(a for a in key if a[0] != 'h'), c)
    return out


def _proportionality(got, want):
    """The rational r with got = r * want, if it exists."""
    if got.is_zero() or want.is_zero():
        return None
    key = next(iter(want.terms))
    if key not in got.terms:
        return None
    r = got.terms[key] / want.terms[key]
    return r if (got - want * r).is_zero() else None


def bv_extend(theory: Theory, sym: SymmetryAction) -> BVTheory:
    return BVTheory(theory, sym)


def check_q_nilpotent(bv: BVTheory) -> Report:
    chart = bv.chart
    z = midx_zero(chart.dim)
    bad = []
    gens = sorted(set(bv.antifields) | set(bv.antifields.values()))
    for fid in gens:
        one = LocalForm.from_word(chart, (('j', fid, z),))
        q1 = lie_derivative(bv.Q, one)
        q2 = lie_derivative(bv.Q, q1) if not q1.is_zero() else q1
        if not q2.is_zero():
            bad.append((chart.component(fid).name, render_text(q2)))
    if bad:
        raise ResidualNonzero(
            "Q^2 != 0 on generators: " +
            "; ".join(f"{n}: {r}" for n, r in bad))
    return Report("Q_BV^2 = 0 on all generators", True)


def bv_bracket(F: LocalForm, G: LocalForm, omega: LocalForm) -> LocalForm:
    XF = hamiltonian_vector_field(F, omega)
    XG = hamiltonian_vector_field(G, omega)
    return insert(XF, insert(XG, omega))


def verify_cme(bv: BVTheory) -> tuple[Report, LocalForm]:
    """Densitised classical master equation: P({L,L}) = 0 and 0*({L,L}) = 0
    certify {L_BV, L_BV} in Im(d); returns the h-primitive."""
    B = insert(bv.Q, insert(bv.Q, bv.omega_BV))
    suite = bv.suite
    if B.is_zero():
        return Report("densitised CME", True, "{L,L} = 0"), B
    PB = suite.euler_projector(B)
    zb = zero_star(B)
    if not PB.is_zero() or not zb.is_zero():
        raise CMEFails("classical master equation fails: P({L,L}) = "
                       + render_text(PB), PB)
    prim = suite.h_zero(B)
    if not (d_h(prim) - B).is_zero():
        raise CMEFails("CME primitive failed to close", B)
    return Report("densitised CME", True,
                  "{L,L} = d(" + render_text(prim)[:80] + ")"), prim


# ---------------------------------------------------------------------------
# BFV
# ---------------------------------------------------------------------------

class BFVTheory:
    def __init__(self, sigma: SigmaTheory, sym: SymmetryAction, orientation=1):
        theory = sigma.theory
        schart = sigma.schart
        # strong Hamiltonian flow equation: i_rho omega_Sigma = -dv H
        from .slicing import descended_action
        H = sigma_noether(sigma, sym)
        rho_s = descended_action(sigma, sym)
        flow = insert(rho_s, sigma.omega_sigma) + d_v(H)
        if not flow.is_zero():
            raise NotStronglyHamiltonian(
                "i_rho omega_Sigma + dv H != 0: " + render_text(flow))
        if sym.structure is None and any(
                len(g.comps) > 1 for g in sym.param_groups):
            raise NoBracket("BFV extension needs bracket data")

        chart = Chart(schart.dim, signature=[1] * schart.dim,
                      coord_names=schart.coord_names,
                      jet_cutoff=schart.jet_cutoff, orientation=orientation)
        chart.add_coordinates()
        self.s2x = {}
        for comp in schart.components:
            if comp.kind == COORD:
                continue
            if comp.kind == DYNAMIC and comp.fid not in sigma.surviving \
                    and not comp.name.startswith("Pi_"):
                continue
            c = chart.add_component(comp.name, ghost=comp.ghost, kind=comp.kind,
                                    group=comp.group)
            self.s2x[comp.fid] = c.fid
        for fn in schart.functions:
            chart.add_function(fn.name, fn.arity, fn.model)
        z = midx_zero(chart.dim)
        pfids = [sigma.b2s[f] for f in sym.param_fids()]
        self.ghosts = {}
        self.ghost_momenta = {}
        for pf in pfids:
            pc = schart.component(pf)
            g = chart.add_component("c_" + pc.name, ghost=1, kind=DYNAMIC,
                                    group="ghost")
            gm = chart.add_component("c_" + pc.name + "_dag", ghost=-1,
                                     kind=DYNAMIC, group="ghost momentum")
            self.ghosts[pf] = g.fid
            self.ghost_momenta[g.fid] = gm.fid
        self.chart = chart
        self.sigma = sigma
        self.sym = sym
        self.suite = get_suite(chart)

        def move(form):
            out = LocalForm(chart)
            for key, c in form.terms.items():
                word = []
                for a in key:
                    if a[0] == 'h':
                        word.append(a)
                    elif a[0] in ('j', 'v'):
                        if a[1] in self.ghosts:
                            word.append((a[0], self.ghosts[a[1]], a[2]))
                        elif a[1] in self.s2x:
                            word.append((a[0], self.s2x[a[1]], a[2]))
                        else:
                            comp = schart.component(a[1])
                            if comp.kind == COORD:
                                word.append((a[0], chart.by_name(comp.name).fid, a[2]))
                            else:
                                raise VarcalcError(
                                    f"component {comp.name} has no BFV image")
                    elif a[0] == 'f':
                        args = tuple(('j', self.s2x[x[1]], x[2]) if x[0] == 'j' else x
                                     for x in a[3])
                        word.append(('f', a[1], a[2], args))
                    elif a[0] == 'ji':
                        word.append(('ji', self.s2x[a[1]]))
                out._accum(tuple(word), c)
            return out

        self.move = move
        H0, hflux = split_constraint_flux(sigma, sym, H)
        # L_BFV = <H0 - j_Sigma, c> + 1/2 <c+, [c,c]>
        j_sig = getattr(sigma, "j_sigma", None)
        core = H0 if j_sig is None else H0 - j_sig
        self.L = move(core)    # parameters become ghosts via self.ghosts
        vol = tuple(('h', mu) for mu in range(chart.dim))
        st = sym.structure
        if st is not None:
            for g in sym.param_groups:
                for (fidx, lidx), pbulk in g.comps.items():
                    if not lidx:
                        continue
                    cfid = self.ghosts[sigma.b2s[pbulk]]
                    gm = self.ghost_momenta[cfid]
                    for (a, b), lst in st.f.items():
                        for cc, coeff in lst:
                            if cc != lidx[0]:
                                continue
                            ga = self.ghosts[sigma.b2s[g.comps[(fidx, (a,))]]]
                            gb = self.ghosts[sigma.b2s[g.comps[(fidx, (b,))]]]
                            self.L = self.L + LocalForm.from_word(
                                chart,
                                (('j', gm, z), ('j', ga, z), ('j', gb, z)) + vol,
                                Fraction(coeff) / 2 * orientation * GHOST_TERM_SIGN)
        gh = {self.L.key_ghost(k) for k in self.L.terms}
        if gh - {1}:
            raise VarcalcError(f"L_BFV must have ghost degree 1, got {gh}")

        omega = move(sigma.omega_sigma)
        for cfid, gm in sorted(self.ghost_momenta.items()):
            omega._accum((('v', gm, z), ('v', cfid, z)) + vol,
                         Fraction(-orientation))
        self.omega_BFV = omega
        self.C_BFV = core
        self.Q = hamiltonian_vector_field(self.L, omega)


def bfv_extend(sigma: SigmaTheory, sym: SymmetryAction, orientation=1) -> BFVTheory:
    return BFVTheory(sigma, sym, orientation=orientation)


def verify_bfv_cme(bfv: BFVTheory) -> Report:
    B = insert(bfv.Q, insert(bfv.Q, bfv.omega_BFV))
    if B.is_zero():
        return Report("BFV master equation", True, "{L,L} = 0")
    PB = bfv.suite.euler_projector(B)
    if not PB.is_zero() or not zero_star(B).is_zero():
        raise CMEFails("BFV master equation fails", PB)
    return Report("BFV master equation", True, "{L,L} d-exact")


# ---------------------------------------------------------------------------
# BV-BFV compatibility
# ---------------------------------------------------------------------------

def verify_bvbfv(bv: BVTheory, bfv: BFVTheory, spec: SliceSpec):
    """The three compatibility conditions on the coordinate slice."""
    reports = []
    bvs = SigmaTheory(bv, spec)

    # ghost momenta bridge to the symplectic partner of the ghost in the
    # KT restriction of the BV theory (e.g. the transverse antifield)
    special = {}
    for gfid, gmfid in bfv.ghost_momenta.items():
        gname = bfv.chart.component(gfid).name
        partners = bvs.pairing.get(gname, [])
        if len(partners) == 1:
            special[bfv.chart.component(gmfid).name] = partners[0]

    def match(name):
        if name in special:
            name = special[name]
        return _match_name(bvs.schart, name)

    def bridge(form):
        """BFV chart -> BV-slice chart, by name and ghost pairing."""
        out = LocalForm(bvs.schart)
        for key, c in form.terms.items():
            word = []
            for a in key:
                if a[0] in ('j', 'v'):
                    word.append((a[0], match(bfv.chart.component(a[1]).name), a[2]))
                elif a[0] == 'f':
                    args = tuple(('j', match(bfv.chart.component(x[1]).name), x[2])
                                 if x[0] == 'j' else x for x in a[3])
                    word.append(('f', a[1], a[2], args))
                elif a[0] == 'ji':
                    word.append(('ji', match(bfv.chart.component(a[1]).name)))
                else:
                    word.append(a)
            out._accum(tuple(word), c)
        return out

    # 1. iota* dv theta_BV = pi* omega_BFV
    lhs = bvs.omega_sigma
    rhs = bridge(bfv.omega_BFV)
    ok1 = (lhs - rhs).is_zero()
    reports.append(Report("iota* d theta_BV = pi* omega_BFV", ok1,
                          "" if ok1 else render_text(lhs - rhs)))

    # 2. {L_BV, L_BV} = d L_BFV, compared through the slice homotopy suite:
    # the bulk bracket is d-exact (the densitised CME) and the boundary
    # content of its canonical primitive is L_BFV, i.e.
    # iota*(i_Q theta_BV) - L_BFV is d_Sigma-exact.
    B = insert(bv.Q, insert(bv.Q, bv.omega_BV))
    ok2 = True
    det2 = ""
    if not B.is_zero():
        PB = bv.suite.euler_projector(B)
        if not PB.is_zero() or not zero_star(B).is_zero():
            ok2 = False
            det2 = "{L_BV, L_BV} is not d-exact"
    if ok2:
        W = bvs.express(insert(bv.Q, bv.theta))
        X = W - bridge(bfv.L)
        if not X.is_zero():
            suite = bvs.ssuite
            PX = suite.euler_projector(X)
            if not PX.is_zero() or not zero_star(X).is_zero() or \
                    not (d_h(suite.h_zero(X)) - X).is_zero():
                ok2 = False
                det2 = "boundary content of the CME primitive is not L_BFV: " \
                    + render_text(X)[:160]
    reports.append(Report("{L_BV, L_BV} = d L_BFV (slice-normalized)", ok2, det2))

    # 3. Q_BV pi* = pi* Q_BFV on slice generators
    z = midx_zero(bfv.chart.dim)
    bad = []
    for comp in bfv.chart.components:
        if comp.kind != DYNAMIC:
            continue
        gen = LocalForm.from_word(bfv.chart, (('j', comp.fid, z),))
        rhs3 = bridge(lie_derivative(bfv.Q, gen))
        bulk_gen = bvs.to_bulk(bridge(gen))
        try:
            lhs3 = bvs.express(lie_derivative(bv.Q, bulk_gen))
        except Exception as e:
            bad.append(f"{comp.name}: {e}")
            continue
        if not (lhs3 - rhs3).is_zero():
            bad.append(f"{comp.name}: {render_text(lhs3 - rhs3)}")
    reports.append(Report("Q_BV pi* = pi* Q_BFV", not bad, "; ".join(bad)))
    return reports


def _match_name(chart, name):
    if chart.has_name(name):
        return chart.by_name(name).fid
    # the BV slice names the ghost momentum Pi_<ghost>; BFV calls it c_.._dag
    if name.endswith("_dag") and chart.has_name("Pi_" + name[:-4]):
        return chart.by_name("Pi_" + name[:-4]).fid
    if name.startswith("Pi_") and chart.has_name(name[3:] + "_dag"):
        return chart.by_name(name[3:] + "_dag").fid
    raise VarcalcError(f"no slice counterpart for component {name!r}")


def cohomology_witness(bv: BVTheory, candidate: LocalForm, certificate=None):
    """closed / exact / neither verdict for a ghost-0 candidate."""
    if candidate.ghost_degree() != 0:
        raise VarcalcError("candidate must have ghost degree 0")
    qc = lie_derivative(bv.Q, candidate)
    if not qc.is_zero():
        return "not closed"
    if certificate is not None:
        qcert = lie_derivative(bv.Q, certificate)
        if (qcert - candidate).is_zero():
            return "exact"
        return "closed (certificate failed)"
    return "closed"

"""Restriction to a codimension-1 coordinate slice (the Kijowski-Tulczyjew
step), the Sigma-Noether form with its constraint/flux split, equivariance
cocycles, and codimension-2 corner Poisson data."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .chart import (
    Chart, COORD, DYNAMIC, DegenerateSlice, DoesNotDescend, GradingError,
    InvariantViolation, NoFlux, NotExact, VarcalcError, VerdictMismatch,
)
from .algebra import (
    LocalForm, contract_leg, d_h, d_v, midx_order, midx_zero, substitute,
)
from .euler import EvolutionaryField, lie_derivative
from .homotopy import get_suite
from .noether import decompose_dual_current, noether_cone
from .render import render_text
from .theory import Theory, SymmetryAction, _solve_linear


@dataclass
class SliceSpec:
    transverse: int = 0          # bulk direction transverse to the slice
    corner: int | None = None    # bulk direction whose slice bounds Sigma
    orientation: int = 1

    def __post_init__(self):
        if self.corner is not None and self.corner == self.transverse:
            raise VarcalcError("corner direction must differ from transverse")


class SigmaTheory:
    """Slice data: Sigma chart, momenta, omega_Sigma, translation maps."""

    surviving: set

    def __init__(self, theory: Theory, spec: SliceSpec):
        self.theory = theory
        self.spec = spec
        self.surviving = set()
        bulk = theory.chart
        n = bulk.dim
        t = spec.transverse
        if not (0 <= t < n):
            raise VarcalcError("transverse direction out of range")
        self.tangential = [mu for mu in range(n) if mu != t]
        self._bulk_dir_to_sigma = {mu: i for i, mu in enumerate(self.tangential)}

        # --- Sigma chart -----------------------------------------------------
        sig_metric = [[bulk.metric[a][b] for b in self.tangential]
                      for a in self.tangential]
        try:
            schart = Chart(n - 1, metric=sig_metric,
                           coord_names=[bulk.coord_names[mu] for mu in self.tangential],
                           jet_cutoff=bulk.jet_cutoff,
                           orientation=spec.orientation)
        except VarcalcError:
            # tangential metric block may be degenerate (null slices); the
            # Sigma homotopy suite never uses it
            schart = Chart(n - 1, signature=[1] * (n - 1),
                           coord_names=[bulk.coord_names[mu] for mu in self.tangential],
                           jet_cutoff=bulk.jet_cutoff,
                           orientation=spec.orientation)
        schart.add_coordinates()
        self.schart = schart
        self.ssuite = get_suite(schart)

        # tangential copies of bulk components
        self.b2s: dict[int, int] = {}
        self.s2b: dict[int, int] = {}
        for comp in bulk.components:
            if comp.kind == COORD:
                continue
            sc = schart.add_component(comp.name, ghost=comp.ghost, kind=comp.kind,
                                      group=comp.group, indices=comp.indices)
            self.b2s[comp.fid] = sc.fid
            self.s2b[sc.fid] = comp.fid
        for fn in bulk.functions:
            schart.add_function(fn.name, fn.arity, fn.model)

        # --- restrict theta and introduce momenta ----------------------------
        theta_pulled = self.pullback(theory.theta)
        if theta_pulled.is_zero():
            self.momenta = {}
            self.theta_sigma = LocalForm.zero(schart)
            self.omega_sigma = LocalForm.zero(schart)
            self.dt_fields = {}
            self.dt_solves = {}
            self.pairing = {}
            return
        for key in theta_pulled.terms:
            for a in key:
                if a[0] == 'v' and midx_order(a[2]):
                    raise VarcalcError(
                        "KT restriction needs order-zero variations in theta; "
                        "higher-order Lagrangians are not supported here")

        # transverse-derivative helper fields (one per bulk component used)
        self.dt_fields = {}      # bulk fid -> sigma fid of its d/dt restriction
        needed = set()
        for key in theta_pulled.terms:
            for a in key:
                if a[0] == 'j' and a[1] in self._transbulk:
                    needed.add(a[1])
        for bfid in sorted(needed):
            comp = bulk.component(bfid)
            sc = schart.add_component("Dt_" + comp.name, ghost=comp.ghost,
                                      kind=comp.kind, group=comp.group)
            self.dt_fields[bfid] = sc.fid

        theta_s = self.to_sigma(theta_pulled, allow_dt=True)

        # momenta: one per vertical leg whose coefficient carries Dt fields
        self.momenta = {}        # sigma fid of Pi -> (sigma leg fid, definition)
        self.dt_solves = {}      # bindings (sigma Dt fid, 0) -> expression
        z = midx_zero(schart.dim)
        legs = sorted({a[1] for k in theta_s.terms for a in k if a[0] == 'v'})
        for sfid in legs:
            C = contract_leg(theta_s, sfid, z)
            if C.is_zero():
                continue
            dts = sorted({a[1] for k in C.terms for a in k
                          if a[0] == 'j' and a[1] in set(self.dt_fields.values())})
            if not dts:
                continue
            density = self._density_of_top(C)
            bname = schart.component(sfid).name
            pc = schart.add_component("Pi_" + bname, ghost=schart.ghost(sfid),
                                      kind=DYNAMIC, group="Pi_" + bname)
            self.momenta[pc.fid] = (sfid, density)
            # solve density == Pi for the lex-max Dt field appearing linearly
            eq = density - LocalForm.from_word(schart, (('j', pc.fid, z),))
            solved = None
            for dt in sorted(dts, reverse=True):
                sol = _solve_linear(eq, (dt, z))
                if sol is not None:
                    solved = (dt, sol)
                    break
            if solved is None:
                raise DegenerateSlice(
                    f"cannot solve the momentum relation for {bname}",
                    kernel=[bname])
            self.dt_solves[(solved[0], z)] = solved[1]

        theta_final = substitute(theta_s, self.dt_solves) if self.dt_solves else theta_s
        left = self._leftover_dt(theta_final)
        if left:
            raise DegenerateSlice(
                "transverse jets without symplectic partner: " + ", ".join(left),
                kernel=left)
        self.theta_sigma = theta_final
        self.omega_sigma = d_v(theta_final)
        self._verify_pullback()
        self.pairing = self._pairing_table()
        self.surviving = {a[1] for k in self.omega_sigma.terms for a in k
                          if a[0] in ('j', 'v')
                          and self.schart.kind(a[1]) == DYNAMIC}

    # --- plumbing -------------------------------------------------------------
    @property
    def _transbulk(self):
        return {c.fid for c in self.theory.chart.components if c.kind != COORD}

    def _density_of_top(self, C):
        """Strip the unique top-Sigma horizontal word from a (0, top) form."""
        schart = self.schart
        out = LocalForm(schart)
        vol = tuple(('h', mu) for mu in range(schart.dim))
        for key, c in C.terms.items():
            legs = tuple(a for a in key if a[0] == 'h')
            if legs != vol:
                raise GradingError("momentum coefficient is not a top form")
            out._accum(tuple(a for a in key if a[0] != 'h'), c)
        return out

    def _leftover_dt(self, form):
        dtset = set(self.dt_fields.values())
        names = set()
        for key in form.terms:
            for a in key:
                if a[0] in ('j', 'v') and a[1] in dtset:
                    names.add(self.schart.component(a[1]).name)
        return sorted(names)

    def pullback(self, form: LocalForm):
        """iota_Sigma^*: drop dx^t terms, reindex the remaining legs.

        The output lives on the bulk chart's components but uses Sigma leg
        numbering; feed it to to_sigma for a Sigma-chart form.
        """
        t = self.spec.transverse
        out = LocalForm(form.chart, {})
        for key, c in form.terms.items():
            if any(a[0] == 'h' and a[1] == t for a in key):
                continue
            out.terms[key] = c
        return out

    def to_sigma(self, form: LocalForm, allow_dt=False):
        """Express a pulled-back bulk form in Sigma-chart variables."""
        bulk = self.theory.chart
        schart = self.schart
        t = self.spec.transverse
        out = LocalForm(schart)
        offending = set()

        def conv_midx(J):
            return tuple(J[mu] for mu in self.tangential)

        for key, c in form.terms.items():
            word = []
            dead = False
            for a in key:
                if a[0] == 'h':
                    word.append(('h', self._bulk_dir_to_sigma[a[1]]))
                elif a[0] in ('j', 'v'):
                    fid, J = a[1], a[2]
                    comp = bulk.component(fid)
                    if comp.kind == COORD:
                        if comp.coord_dir == t:
                            # the slice sits at coordinate value 0
                            dead = True
                            break
                        word.append((a[0], schart.by_name(comp.name).fid,
                                     conv_midx(J)))
                        continue
                    k = J[t]
                    if k == 0:
                        word.append((a[0], self.b2s[fid], conv_midx(J)))
                    elif k == 1 and fid in self.dt_fields:
                        word.append((a[0], self.dt_fields[fid], conv_midx(J)))
                    else:
                        offending.add(
                            comp.name + "_," + str(t) * k)
                        dead = True
                        break
                elif a[0] == 'f':
                    args = []
                    for arg in a[3]:
                        if arg[0] == 'j':
                            if arg[2][t]:
                                offending.add(bulk.component(arg[1]).name)
                                dead = True
                                break
                            args.append(('j', self.b2s[arg[1]], conv_midx(arg[2])))
                        else:
                            args.append(arg)
                    if dead:
                        break
                    word.append(('f', a[1], a[2], tuple(args)))
                elif a[0] == 'ji':
                    word.append(('ji', self.b2s[a[1]]))
                else:
                    raise VarcalcError(f"cannot restrict atom {a!r}")
            if dead and offending:
                continue
            if not dead:
                out._accum(tuple(word), c)
        if offending:
            raise DoesNotDescend(
                "transverse jets obstruct the restriction: "
                + ", ".join(sorted(offending)), sorted(offending))
        return out

    def express(self, bulk_form: LocalForm):
        """iota^* followed by momentum substitution; errors on leftovers."""
        pulled = self.pullback(bulk_form)
        s = self.to_sigma(pulled, allow_dt=True)
        if self.dt_solves:
            s = substitute(s, self.dt_solves)
        left = self._leftover_dt(s)
        if left:
            raise DoesNotDescend(
                "does not descend to the slice: " + ", ".join(left), left)
        return s

    def to_bulk(self, form: LocalForm):
        """pi_Sigma^*: substitute the momentum definitions and relabel."""
        bulk = self.theory.chart
        schart = self.schart
        t = self.spec.transverse
        dt_inv = {v: k for k, v in self.dt_fields.items()}

        def conv_midx(J):
            out = [0] * bulk.dim
            for i, mu in enumerate(self.tangential):
                out[mu] = J[i]
            return tuple(out)

        # momentum definitions, pushed to bulk jets
        mom_bind = {}
        for pfid, (_sfid, density) in self.momenta.items():
            mom_bind[(pfid, midx_zero(schart.dim))] = density
        work = substitute(form, mom_bind) if mom_bind else form

        out = LocalForm(bulk)
        for key, c in work.terms.items():
            word = []
            for a in key:
                if a[0] == 'h':
                    word.append(('h', self.tangential[a[1]]))
                elif a[0] in ('j', 'v'):
                    fid, J = a[1], a[2]
                    if fid in dt_inv:
                        bj = conv_midx(J)
                        bj = tuple(b + (1 if mu == t else 0)
                                   for mu, b in enumerate(bj))
                        word.append((a[0], dt_inv[fid], bj))
                    else:
                        comp = schart.component(fid)
                        if comp.kind == COORD:
                            bcomp = bulk.by_name(comp.name)
                            word.append((a[0], bcomp.fid, conv_midx(J)))
                        else:
                            word.append((a[0], self.s2b[fid], conv_midx(J)))
                elif a[0] == 'f':
                    args = tuple(
                        ('j', self.s2b[x[1]], conv_midx(x[2])) if x[0] == 'j' else x
                        for x in a[3])
                    word.append(('f', a[1], a[2], args))
                elif a[0] == 'ji':
                    word.append(('ji', self.s2b[a[1]]))
                else:
                    raise VarcalcError(f"cannot push atom {a!r} to the bulk")
            out._accum(tuple(word), c)
        return out

    def _verify_pullback(self):
        lhs = self.to_bulk(self.omega_sigma)
        rhs = self.pullback(self.theory.omega)
        if not (lhs - rhs).is_zero():
            raise InvariantViolation("pi^* omega_Sigma != iota^* omega")

    def _pairing_table(self):
        schart = self.schart
        if self.omega_sigma.is_zero():
            return {}
        src = self.ssuite.interior_euler(self.omega_sigma)
        fields = sorted({a[1] for k in self.omega_sigma.terms for a in k
                         if a[0] == 'v'} |
                        {a[1] for k in self.omega_sigma.terms for a in k
                         if a[0] == 'j' and schart.kind(a[1]) == DYNAMIC})
        table = {}
        kernel = []
        z = midx_zero(schart.dim)
        for f in fields:
            co = contract_leg(src, f, z)
            partners = sorted({schart.component(a[1]).name
                               for k in co.terms for a in k if a[0] == 'v'})
            nm = schart.component(f).name
            if partners:
                table[nm] = partners
            else:
                kernel.append(nm)
        if kernel:
            raise DegenerateSlice(
                "slice fields without symplectic partner: " + ", ".join(kernel),
                kernel)
        return table


def restrict_to_slice(theory: Theory, spec: SliceSpec) -> SigmaTheory:
    return SigmaTheory(theory, spec)


# ---------------------------------------------------------------------------
# Sigma-Noether data
# ---------------------------------------------------------------------------

def sigma_noether(sigma: SigmaTheory, sym: SymmetryAction):
    """H: the slice image of the Noether current, in Sigma variables."""
    _S, J = noether_cone(sigma.theory, sym)
    return sigma.express(J)


def split_constraint_flux(sigma: SigmaTheory, sym: SymmetryAction, H=None):
    if H is None:
        H = sigma_noether(sigma, sym)
    pfids = [sigma.b2s[fid] for fid in sym.param_fids()]
    H0, hflux = decompose_dual_current(sigma.ssuite, H, pfids)
    return H0, hflux


def descended_action(sigma: SigmaTheory, sym: SymmetryAction) -> EvolutionaryField:
    """rho_Sigma on the surviving slice fields and the momenta; components
    of fields removed by the presymplectic reduction are not part of the
    slice action."""
    theory = sigma.theory
    comps = {}
    for bfid, expr in sym.rho.components.items():
        sfid = sigma.b2s.get(bfid)
        if sfid is None or sfid not in sigma.surviving:
            continue
        comps[sfid] = sigma.express(expr)
    for pfid, (_sfid, density) in sigma.momenta.items():
        bulk_density = sigma.to_bulk(density)
        moved = lie_derivative(sym.rho, bulk_density)
        comps[pfid] = sigma.express(moved)
    comps = {fid: f for fid, f in comps.items() if not f.is_zero()}
    return EvolutionaryField(sigma.schart, comps, name=sym.name + "_sigma")


def sigma_param_basis(sigma: SigmaTheory, sym: SymmetryAction):
    """Basis substitutions xi -> e_a (constant sections) on the Sigma chart."""
    out = []
    z = midx_zero(sigma.schart.dim)
    for g in sym.param_groups:
        keys = sorted(g.comps)
        for key in keys:
            subs = {}
            for k2 in keys:
                fid = sigma.b2s[g.comps[k2]]
                subs[(fid, z)] = (LocalForm.scalar(sigma.schart, 1) if k2 == key
                                  else LocalForm.zero(sigma.schart))
            out.append((key, subs))
    return out


def compute_ce_cocycle(sigma: SigmaTheory, sym: SymmetryAction, j_sigma=None,
                       H_shift=None):
    """The equivariance cocycle table kappa(e_a, e_b) and its verification.

    residual(xi, eta) = L_{rho(xi)} H_eta - H_{[xi,eta]} + j_Sigma([xi,eta])
    must be d-exact with a field-independent primitive kappa.  ``H_shift``
    adds a deliberate perturbation to the Sigma-Noether form (negative
    controls); a field-dependent or non-exact residual raises NotExact.
    """
    from .noether import twin_symmetry, bracket_bindings
    theory = sigma.theory
    twin = twin_symmetry(theory, sym)
    H_eta = sigma_noether(sigma, twin)
    if H_shift is not None:
        H_eta = H_eta + H_shift
    rho_s = descended_action(sigma, sym)
    lhs = lie_derivative(rho_s, H_eta)
    bb_bulk = bracket_bindings(theory, sym, twin)
    z = midx_zero(sigma.schart.dim)
    bb = {}
    for (tfid, _zz), expr in bb_bulk.items():
        bb[(sigma.b2s[tfid], z)] = sigma.express(expr)
    H_br = substitute(H_eta, bb)
    residual = lhs - H_br
    if j_sigma is not None and not j_sigma.is_zero():
        residual = residual + substitute(j_sigma, bb)
    # the cocycle is field independent: any dynamical jet in the full
    # symbolic residual means the equivariance equation fails
    for key in residual.terms:
        for a in key:
            if a[0] in ('j', 'v') and sigma.schart.kind(a[1]) == DYNAMIC:
                raise NotExact(
                    "equivariance residual is field-dependent: "
                    + render_text(residual), residual)
    # kappa per basis pair
    table = {}
    basis = sigma_param_basis(sigma, sym)
    basis_twin = sigma_param_basis(sigma, twin)
    suite = sigma.ssuite
    for (ka, sub_a) in basis:
        for (kb, sub_b) in basis_twin:
            r_ab = substitute(substitute(residual, sub_a), sub_b)
            if r_ab.is_zero():
                table[(ka, kb)] = LocalForm.zero(sigma.schart)
                continue
            for key in r_ab.terms:
                for a in key:
                    if a[0] in ('j', 'v') and sigma.schart.kind(a[1]) == DYNAMIC:
                        raise NotExact(
                            "equivariance residual is field-dependent: "
                            + render_text(r_ab), r_ab)
            kappa = suite.poincare_x(r_ab)
            if not (d_h(kappa) - r_ab).is_zero():
                raise NotExact("equivariance residual is not d-exact", r_ab)
            table[(ka, kb)] = kappa
    _check_cocycle(sigma, sym, table)
    return table


def _check_cocycle(sigma: SigmaTheory, sym: SymmetryAction, table):
    """Constant CE 2-cocycle identity on basis triples:
    kappa([a,b], c) + kappa([b,c], a) + kappa([c,a], b) = 0."""
    st = sym.structure
    if st is None:
        return
    labels = sorted({k[0] for k in table} | {k[1] for k in table})
    lie_of = {lab: lab[1][0] for lab in labels if lab[1]}
    if len(lie_of) != len(labels):
        return
    def kappa(a, b):
        for (ka, kb), v in table.items():
            if lie_of.get(ka) == a and lie_of.get(kb) == b:
                return v
        return None
    dims = sorted(set(lie_of.values()))
    for a in dims:
        for b in dims:
            for c in dims:
                total = None
                for (x, y, z_) in ((a, b, c), (b, c, a), (c, a, b)):
                    for d, coeff in st.bracket_coeffs(x, y):
                        v = kappa(d, z_)
                        if v is None:
                            continue
                        piece = v * coeff
                        total = piece if total is None else total + piece
                if total is not None and not total.is_zero():
                    raise NotExact(
                        f"CE 2-cocycle identity fails on basis triple {(a, b, c)}")


# ---------------------------------------------------------------------------
# corner data and the corner master equation
# ---------------------------------------------------------------------------

@dataclass
class CornerData:
    basis: list                      # labels of the boundary parameter basis
    dim: int
    f: dict                          # structure constants (a,b) -> [(c, coeff)]
    k: dict                          # constant 2-cocycle (a,b) -> Fraction
    h_densities: dict                # basis label -> rendered corner density
    alpha_text: str = "<h_d, c>"
    s_text: str = "1/2 <h_d, [c,c]> + 1/2 k(c,c)"


def corner_data(sigma: SigmaTheory, sym: SymmetryAction, k_table=None,
                structure=None) -> CornerData:
    if sigma.spec.corner is None:
        raise VarcalcError("slice declares no corner")
    H = sigma_noether(sigma, sym)
    _H0, hflux = split_constraint_flux(sigma, sym, H)
    if hflux.is_zero():
        raise NoFlux("flux form vanishes; no corner data")
    corner_dir = sigma._bulk_dir_to_sigma.get(sigma.spec.corner)
    if corner_dir is None:
        raise VarcalcError("corner direction is not tangential to the slice")
    densities = {}
    for key, subs in sigma_param_basis(sigma, sym):
        val = substitute(hflux, subs)
        rest = LocalForm(sigma.schart)
        for kk, c in val.terms.items():
            if any(a[0] == 'h' and a[1] == corner_dir for a in kk):
                continue
            rest.terms[kk] = c
        densities[key] = render_text(rest)
    st = structure if structure is not None else sym.structure
    f = dict(st.f) if st is not None else {}
    dims = [len(g.comps) for g in sym.param_groups]
    dim = sum(dims)
    return CornerData(basis=sorted(densities), dim=max(dim, 1), f=f,
                      k=dict(k_table or {}), h_densities=densities)


def _kval(k, a, b):
    if (a, b) in k:
        return Fraction(k[(a, b)])
    if (b, a) in k:
        return -Fraction(k[(b, a)])
    return Fraction(0)


def _corner_ring_chart(dim):
    ch = Chart(1, signature=[1])
    ch.add_coordinates()
    hfids = [ch.add_component(f"hc{a}").fid for a in range(dim)]
    cfids = [ch.add_component(f"cg{a}", ghost=1).fid for a in range(dim)]
    return ch, hfids, cfids


def _graded_partial(form, fid, parity):
    from .algebra import apply_derivation
    chart = form.chart
    z = midx_zero(chart.dim)

    def image(atom):
        if atom == ('j', fid, z):
            return LocalForm.scalar(chart, 1)
        return None

    return apply_derivation(form, parity, image)


def corner_bracket_SS(dim, f, k):
    """{S_d, S_d} computed in the graded corner ring (odd variables c^a,
    even variables h_a, odd Poisson bracket from omega = <dh, dc>)."""
    ch, hfids, cfids = _corner_ring_chart(dim)
    z = midx_zero(1)
    S = LocalForm(ch)
    for (a, b), lst in f.items():
        for c, coeff in lst:
            S._accum((('j', hfids[c], z), ('j', cfids[a], z), ('j', cfids[b], z)),
                     Fraction(coeff) / 2)
    for a in range(dim):
        for b in range(dim):
            kv = _kval(k, a, b)
            if kv:
                S._accum((('j', cfids[a], z), ('j', cfids[b], z)), kv / 2)
    out = LocalForm(ch)
    for a in range(dim):
        dSc = _graded_partial(S, cfids[a], 1)
        dSh = _graded_partial(S, hfids[a], 0)
        out = out + dSc.wedge(dSh) + dSh.wedge(dSc)
    return out


def schouten_PiPi(dim, f, k):
    """[Pi, Pi]_SN components for Pi^{ab}(h) = f^{ab}_c h_c + k^{ab}."""
    def Pi(a, b):
        lin = {}
        for cc, coeff in f.get((a, b), []):
            lin[cc] = lin.get(cc, Fraction(0)) + Fraction(coeff)
        for cc, coeff in f.get((b, a), []):
            lin[cc] = lin.get(cc, Fraction(0)) - Fraction(coeff)
        lin = {d: v / 2 for d, v in lin.items() if v}
        return lin, _kval(k, a, b)

    out = {}
    for a in range(dim):
        for b in range(dim):
            for c in range(dim):
                total_lin = {}
                total_const = Fraction(0)
                for (x, y, z_) in ((a, b, c), (b, c, a), (c, a, b)):
                    lin_yz, _cyz = Pi(y, z_)
                    for d, dcoeff in lin_yz.items():
                        lin_dx, const_dx = Pi(d, x)
                        for e, v in lin_dx.items():
                            total_lin[e] = total_lin.get(e, Fraction(0)) + v * dcoeff
                        total_const += const_dx * dcoeff
                for e, v in total_lin.items():
                    if v:
                        out[(a, b, c, 'h', e)] = out.get((a, b, c, 'h', e), Fraction(0)) + v
                if total_const:
                    out[(a, b, c, '1')] = out.get((a, b, c, '1'), Fraction(0)) + total_const
    return {kk: v for kk, v in out.items() if v}


def verify_corner_master(data: CornerData):
    from .noether import Report
    bra = corner_bracket_SS(data.dim, data.f, data.k)
    sch = schouten_PiPi(data.dim, data.f, data.k)
    v1 = bra.is_zero()
    v2 = not sch
    if v1 != v2:
        raise VerdictMismatch(
            f"graded bracket verdict {v1} differs from Schouten verdict {v2}")
    if not v1:
        return Report("corner master equation", False,
                      f"{{S,S}} = {render_text(bra)}")
    return Report("corner master equation", True,
                  "both {S,S} and [Pi,Pi]_SN vanish")

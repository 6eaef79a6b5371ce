"""Batch command-line front end.

Exit codes: 0 = all requested assertions pass, 1 = assertion failure,
2 = usage or parse error.  With --json a varcalc.report.v1 document is
written to stdout.
"""

from __future__ import annotations

import argparse
import os
import sys
from importlib import resources

import numpy as np

from .chart import VarcalcError
from .algebra import LocalForm, d_h, d_v
from .render import form_json, render_text, report_json
from .randforms import FormGenerator, suite_chart
from . import mech as mechmod


class UsageError(VarcalcError):
    pass


def _load_theory(path, cutoff=None):
    from .theory import theory_from_text
    from .dsl import SyntaxError_
    if os.path.exists(path):
        text = open(path, encoding="utf-8").read()
    else:
        name = path[:-4] if path.endswith(".thy") else path
        try:
            text = resources.files("varcalc.theories").joinpath(
                name + ".thy").read_text(encoding="utf-8")
        except FileNotFoundError:
            raise UsageError(f"theory file not found: {path}")
    env = os.environ.get("VARCALC_JET_CUTOFF")
    if cutoff is None and env:
        cutoff = int(env)
    try:
        return theory_from_text(text, jet_cutoff=cutoff)
    except SyntaxError_ as e:
        raise UsageError(f"{path}:{e}") from e


def _parse_slice(theory, slice_arg, corner_arg=None):
    from .slicing import SliceSpec
    trans = 0
    corner = None
    names = list(theory.chart.coord_names)
    if slice_arg:
        nm, _, val = slice_arg.partition("=")
        if nm not in names:
            raise VarcalcError(f"unknown coordinate {nm!r} in --slice")
        if val not in ("", "0"):
            raise VarcalcError("slices sit at coordinate value 0")
        trans = names.index(nm)
    if corner_arg:
        nm, _, val = corner_arg.partition("=")
        if nm not in names:
            raise VarcalcError(f"unknown coordinate {nm!r} in --corner")
        corner = names.index(nm)
    return SliceSpec(transverse=trans, corner=corner)


def _pick_symmetry(theory, name):
    if name:
        return theory.symmetry(name)
    if len(theory.symmetries) == 1:
        return next(iter(theory.symmetries.values()))
    local = [s for s in theory.symmetries.values() if s.is_local]
    if len(local) == 1:
        return local[0]
    raise VarcalcError(
        "theory has several symmetries; pick one with --symmetry "
        f"({', '.join(theory.symmetries)})")


def _emit_form(args, label, form):
    if args.json:
        print(report_json(label, [form_json(form)]))
    else:
        print(f"{label}: {render_text(form)}")


def cmd_el(args):
    T = _load_theory(args.theory)
    _emit_form(args, "E(L)", T.EL)
    return 0


def cmd_theta(args):
    T = _load_theory(args.theory)
    _emit_form(args, "theta", T.theta)
    return 0


def cmd_omega(args):
    T = _load_theory(args.theory)
    _emit_form(args, "omega", T.omega)
    return 0


def cmd_project(args):
    T = _load_theory(args.theory)
    _emit_form(args, "P(L)", T.Lh)
    return 0


def cmd_equiv(args):
    T = _load_theory(args.theory)
    T2 = _load_theory(args.other)
    same, witness = T.lagrangians_equivalent(T2)
    results = [{"equivalent": same}]
    if same:
        const, prim = witness
        results.append({"constant_part": render_text(const),
                        "d_primitive": render_text(prim)})
    if args.json:
        print(report_json("equiv", results))
    else:
        print(f"equivalent: {same}")
        if same:
            print(f"difference = {render_text(witness[0])} + d({render_text(witness[1])})")
    return 0


def cmd_noether(args):
    from .noether import noether_cone, verify_noether1
    T = _load_theory(args.theory)
    sym = _pick_symmetry(T, args.symmetry)
    S, J = noether_cone(T, sym)
    rep = verify_noether1(T, sym)
    if args.json:
        print(report_json("noether", [
            {"S": form_json(S), "J": form_json(J),
             "noether1": rep.passed}]))
    else:
        print(f"S = {render_text(S)}")
        print(f"J = {render_text(J)}")
        print(rep.line())
    return 0 if rep.passed else 1


def cmd_noether2(args):
    from .noether import noether2
    T = _load_theory(args.theory)
    sym = _pick_symmetry(T, args.symmetry)
    data = noether2(T, sym)
    if args.json:
        print(report_json("noether2", [{
            "C": form_json(data.C), "K": form_json(data.K),
            "j": form_json(data.j), "S": form_json(data.S)}]))
    else:
        for nm in ("J", "C", "K", "j"):
            print(f"{nm} = {render_text(getattr(data, nm))}")
        print("PASS  J = C + dK and C + j vanishes on shell")
    return 0


def _run_suites(seed, cases):
    """Randomized identity suites: every HomotopySuite identity on >= the
    requested number of nonzero random forms (mixed chart dimensions 2-3,
    jet order <= 2, polynomial degree <= 3)."""
    from .euler import interior_euler
    from .homotopy import get_suite
    import varcalc.algebra as alg

    charts = [suite_chart(dim=2, nfields=2, ghost_field=True),
              suite_chart(dim=3, nfields=2, ghost_field=True)]
    suites = [get_suite(ch) for ch in charts]
    gens = [FormGenerator(ch, seed=seed + i, max_order=2, max_degree=3)
            for i, ch in enumerate(charts)]
    mix = [2] * (3 * cases // 4) + [3] * (cases - 3 * cases // 4)

    rows = [{"seed": seed, "cases": cases}]
    ok = True

    def loop(name, run):
        nonlocal ok
        done = 0
        failed = 0
        idx = 0
        guard = 0
        while done < cases and guard < 20 * cases:
            guard += 1
            which = 0 if mix[idx % len(mix)] == 2 else 1
            idx += 1
            res = run(charts[which], suites[which], gens[which])
            if res is None:
                continue
            done += 1
            if not res:
                failed += 1
        rows.append({"identity": name, "checked": done, "failed": failed})
        ok = ok and failed == 0 and done >= cases

    def _nz(gen, p, q):
        w = gen.form(p, q, nterms=2)
        return None if w.is_zero() else w

    def run_retract(ch, st, gen):
        w = _nz(gen, gen.rng.randint(1, 2), ch.dim)
        if w is None:
            return None
        I = interior_euler(w)
        if I.is_zero():
            return True
        return (interior_euler(I) - I).is_zero()
    loop("I o i = id on source forms (I idempotent)", run_retract)

    def run_hor_top(ch, st, gen):
        w = _nz(gen, gen.rng.randint(1, 2), ch.dim)
        if w is None:
            return None
        h = st.h_horizontal(w)
        dhw = d_h(h) if not h.is_zero() else LocalForm.zero(ch)
        return (w - dhw - interior_euler(w)).is_zero()
    loop("id = h> d + d h> + i I (q = top)", run_hor_top)

    def run_hor_mid(ch, st, gen):
        w = _nz(gen, gen.rng.randint(1, 2), gen.rng.randint(0, ch.dim - 1))
        if w is None:
            return None
        h = st.h_horizontal(w)
        dw = d_h(w)
        hdw = st.h_horizontal(dw) if not dw.is_zero() else LocalForm.zero(ch)
        dhw = d_h(h) if not h.is_zero() else LocalForm.zero(ch)
        return (w - hdw - dhw).is_zero()
    loop("id = h> d + d h> (q < top)", run_hor_mid)

    def run_side(ch, st, gen):
        w = _nz(gen, gen.rng.randint(1, 2), ch.dim - 1)
        if w is None:
            return None
        dw = d_h(w)
        if dw.is_zero():
            return True
        return interior_euler(dw).is_zero()
    loop("I o h> = 0 (I annihilates Im d)", run_side)

    def run_vert(ch, st, gen):
        w = _nz(gen, gen.rng.randint(0, 2), gen.rng.randint(0, ch.dim))
        if w is None:
            return None
        hv = st.h_vertical(w)
        return (w - st.h_vertical(d_v(w)) - d_v(hv) - alg.zero_star(w)).is_zero()
    loop("id = hv dv + dv hv + p*0*", run_vert)

    def run_vert_anti(ch, st, gen):
        w = _nz(gen, gen.rng.randint(0, 2), gen.rng.randint(0, ch.dim))
        if w is None:
            return None
        hv = st.h_vertical(w)
        return (st.h_vertical(d_h(w)) + d_h(hv)).is_zero()
    loop("hv d + d hv = 0", run_vert_anti)

    def run_vert_sq(ch, st, gen):
        w = _nz(gen, gen.rng.randint(0, 2), gen.rng.randint(0, ch.dim))
        if w is None:
            return None
        hv = st.h_vertical(w)
        return st.h_vertical(hv).is_zero() and alg.zero_star(hv).is_zero()
    loop("hv hv = 0 and 0* hv = 0", run_vert_sq)

    def run_h0(ch, st, gen):
        w = _nz(gen, 0, gen.rng.randint(0, ch.dim))
        if w is None:
            return None
        h0w = st.h_zero(w)
        dw = d_h(w)
        h0dw = st.h_zero(dw) if not dw.is_zero() else LocalForm.zero(ch)
        q = w.grading()[1]
        P = st.euler_projector(w) if q == ch.dim else LocalForm.zero(ch)
        okk = (w - d_h(h0w) - h0dw - P - alg.zero_star(w)).is_zero()
        if okk and not P.is_zero():
            okk = (st.euler_projector(P) - P).is_zero()
        return okk
    loop("id = d h0 + h0 d + P + p*0*; P P = P", run_h0)

    return ok, rows


def cmd_verify(args):
    from .noether import IDENTITY_NAMES, verify_identity
    from .chart import NotLocal
    rows = []
    ok = True
    if args.suites or not args.theory:
        sok, rows2 = _run_suites(args.seed, args.cases)
        ok = ok and sok
        rows.extend(rows2)
    if args.theory:
        T = _load_theory(args.theory)
        idents = IDENTITY_NAMES if (args.all or not args.identity) \
            else [args.identity]
        syms = ([args.symmetry] if args.symmetry else list(T.symmetries))
        for sname in syms:
            for ident in idents:
                try:
                    rep = verify_identity(T, sname, ident)
                    rows.append({"identity": ident, "symmetry": sname,
                                 "passed": rep.passed, "detail": rep.detail})
                    ok = ok and rep.passed
                except NotLocal:
                    rows.append({"identity": ident, "symmetry": sname,
                                 "passed": True, "detail": "skipped: needs a local symmetry"})
                except VarcalcError as e:
                    rows.append({"identity": ident, "symmetry": sname,
                                 "passed": False, "detail": str(e)})
                    ok = False
    if args.json:
        print(report_json("verify", rows))
    else:
        for r in rows:
            if "identity" in r and "passed" in r:
                print(f"{'PASS' if r['passed'] else 'FAIL'}  "
                      f"{r.get('symmetry','')}  {r['identity']}  {r.get('detail','')}")
            elif "identity" in r:
                status = "PASS" if not r["failed"] else "FAIL"
                print(f"{status}  {r['identity']}  ({r['checked']} cases, "
                      f"{r['failed']} failed)")
            else:
                print(f"seed={r.get('seed')} cases={r.get('cases')}")
    return 0 if ok else 1


def cmd_canonical(args):
    from .slicing import (restrict_to_slice, sigma_noether,
                          split_constraint_flux, compute_ce_cocycle)
    T = _load_theory(args.theory)
    spec = _parse_slice(T, args.slice, args.corner)
    sig = restrict_to_slice(T, spec)
    from .chart import DoesNotDescend
    rows = [{"pairing": sig.pairing},
            {"omega_sigma": form_json(sig.omega_sigma)}]
    if args.symmetry or any(s.is_local for s in T.symmetries.values()):
        sym = _pick_symmetry(T, args.symmetry)
        try:
            H = sigma_noether(sig, sym)
            H0, hf = split_constraint_flux(sig, sym, H)
            kap = compute_ce_cocycle(sig, sym)
            rows += [{"H": form_json(H)}, {"constraint_form": form_json(H0)},
                     {"flux_form": form_json(hf)},
                     {"kappa": {str(k): render_text(v) for k, v in kap.items()}}]
        except DoesNotDescend as e:
            rows.append({"symmetry": sym.name, "does_not_descend": str(e)})
    if args.json:
        print(report_json("canonical", rows))
    else:
        print("field pairing:", rows[0]["pairing"])
        print("omega_Sigma =", rows[1]["omega_sigma"]["text"])
        for r in rows[2:]:
            for k, v in r.items():
                print(f"{k} = {v['text'] if isinstance(v, dict) and 'text' in v else v}")
    return 0


def cmd_corner(args):
    from .slicing import restrict_to_slice, corner_data, verify_corner_master
    T = _load_theory(args.theory)
    spec = _parse_slice(T, args.slice, args.corner or
                        f"{T.chart.coord_names[1]}=0")
    sig = restrict_to_slice(T, spec)
    sym = _pick_symmetry(T, args.symmetry)
    cd = corner_data(sig, sym)
    rep = verify_corner_master(cd)
    rows = [{"corner_densities": cd.h_densities, "alpha": cd.alpha_text,
             "S": cd.s_text, "master_equation": rep.passed,
             "detail": rep.detail}]
    if args.json:
        print(report_json("corner", rows))
    else:
        print("h_d densities:", cd.h_densities)
        print(rep.line())
    return 0 if rep.passed else 1


def cmd_bv(args):
    from .bv import bv_extend, check_q_nilpotent
    T = _load_theory(args.theory)
    sym = _pick_symmetry(T, args.symmetry)
    bv = bv_extend(T, sym)
    rep = check_q_nilpotent(bv)
    rows = [{"L_BV": form_json(bv.L), "Q2": rep.passed}]
    if args.json:
        print(report_json("bv", rows))
    else:
        print("L_BV =", render_text(bv.L))
        print(rep.line())
    return 0 if rep.passed else 1


def cmd_cme(args):
    from .bv import bv_extend, verify_cme
    T = _load_theory(args.theory)
    sym = _pick_symmetry(T, args.symmetry)
    bv = bv_extend(T, sym)
    rep, prim = verify_cme(bv)
    if args.json:
        print(report_json("cme", [{"passed": rep.passed,
                                   "primitive": form_json(prim)}]))
    else:
        print(rep.line())
        print("primitive =", render_text(prim))
    return 0 if rep.passed else 1


def cmd_bvbfv(args):
    from .slicing import restrict_to_slice
    from .bv import bv_extend, bfv_extend, verify_bvbfv
    T = _load_theory(args.theory)
    sym = _pick_symmetry(T, args.symmetry)
    spec = _parse_slice(T, args.slice, args.corner)
    sig = restrict_to_slice(T, spec)
    bfv = bfv_extend(sig, sym)
    bv = bv_extend(T, sym)
    reps = verify_bvbfv(bv, bfv, spec)
    ok = all(r.passed for r in reps)
    if args.json:
        print(report_json("bvbfv", [
            {"condition": r.name, "passed": r.passed, "detail": r.detail}
            for r in reps]))
    else:
        for r in reps:
            print(r.line())
    return 0 if ok else 1


_SYSTEMS = {"kepler": mechmod.kepler_system, "harmonic": mechmod.harmonic_system,
            "free": mechmod.free_system}


def _mech_state(args):
    q = [float(x) for x in args.q.split(",")]
    p = [float(x) for x in args.p.split(",")]
    return mechmod.PhasePoint(np.array(q), np.array(p))


def cmd_mech(args):
    sys_f = _SYSTEMS[args.system]()
    if args.mech_cmd == "flow":
        st = _mech_state(args)
        traj = mechmod.flow(sys_f, st, args.t, args.dt, integrator=args.integrator)
        csv = traj.to_csv()
        if args.csv:
            open(args.csv, "w").write(csv)
            print(f"wrote {args.csv} ({len(traj.t)} samples)")
        else:
            sys.stdout.write(csv)
        return 0
    if args.mech_cmd == "reduce":
        st = _mech_state(args)
        red = mechmod.reduce_so3(st)
        if red.ell == 0:
            print("singular stratum (l = 0): reduced space is T*R/Z2")
        doc = {"r": red.r, "p_r": red.p_r, "l": red.ell}
        print(report_json("mech reduce", [doc]) if args.json else doc)
        return 0
    if args.mech_cmd == "conserve":
        st = _mech_state(args)
        traj = mechmod.flow(sys_f, st, args.t, args.dt, integrator=args.integrator)
        rep = mechmod.check_conservation(sys_f, traj)
        tol = args.tol if args.tol is not None else mechmod.TOL["J_drift"]
        ok = rep["J_drift"] <= tol
        if args.json:
            print(report_json("mech conserve", [dict(rep, passed=ok, tol=tol)]))
        else:
            print(rep, "PASS" if ok else "FAIL")
        return 0 if ok else 1
    return 2


def build_parser():
    ap = argparse.ArgumentParser(
        prog="varcalc",
        description="Symbolic variational calculus on coordinate charts")
    ap.add_argument("--json", action="store_true", help="emit varcalc.report.v1 JSON")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def add(name, fn, theory=True):
        p = sub.add_parser(name)
        p.set_defaults(fn=fn)
        if theory:
            p.add_argument("theory", help="theory file (.thy) or bundled name")
        p.add_argument("--symmetry", default=None)
        p.add_argument("--slice", default=None, metavar="t=0")
        p.add_argument("--corner", default=None, metavar="x1=0")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--cases", type=int, default=200)
        return p

    add("el", cmd_el)
    add("theta", cmd_theta)
    add("omega", cmd_omega)
    add("project", cmd_project)
    pe = add("equiv", cmd_equiv)
    pe.add_argument("other", help="second theory file")
    add("noether", cmd_noether)
    add("noether2", cmd_noether2)
    pv = add("verify", cmd_verify)
    pv.add_argument("--identity", default=None)
    pv.add_argument("--all", action="store_true")
    pv.add_argument("--suites", action="store_true",
                    help="run the randomized homotopy identity suites")
    # verify may run suites without a theory
    for a in pv._actions:
        if a.dest == "theory":
            a.nargs = "?"
    add("canonical", cmd_canonical)
    add("corner", cmd_corner)
    add("bv", cmd_bv)
    add("cme", cmd_cme)
    add("bvbfv", cmd_bvbfv)

    pm = sub.add_parser("mech")
    pm.set_defaults(fn=cmd_mech)
    pm.add_argument("mech_cmd", choices=["flow", "reduce", "conserve"])
    pm.add_argument("--system", choices=sorted(_SYSTEMS), default="kepler")
    pm.add_argument("--q", default="1,0,0")
    pm.add_argument("--p", default="0,1,0")
    pm.add_argument("--t", type=float, default=10.0)
    pm.add_argument("--dt", type=float, default=1e-3)
    pm.add_argument("--integrator", choices=["rk4", "leapfrog"], default="rk4")
    pm.add_argument("--csv", default=None)
    pm.add_argument("--tol", type=float, default=None)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        return args.fn(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except VarcalcError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

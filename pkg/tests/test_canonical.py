"""Slice restriction, Sigma-Noether data, cocycles, corner algebra."""

from fractions import Fraction

import pytest

from varcalc.chart import DoesNotDescend, NoFlux, NotExact, VerdictMismatch
from varcalc.algebra import LocalForm, d_h, midx_zero
from varcalc.dsl import ElabContext, elaborate_form, su2_structure
from varcalc.slicing import (
    CornerData, SliceSpec, compute_ce_cocycle, corner_data, corner_bracket_SS,
    descended_action, restrict_to_slice, schouten_PiPi, sigma_noether,
    split_constraint_flux, verify_corner_master,
)
from varcalc.theory import theory_from_text
from conftest import load_theory


@pytest.fixture(scope="module")
def scalar_slice(scalar_field):
    return restrict_to_slice(scalar_field, SliceSpec(transverse=0))


@pytest.fixture(scope="module")
def maxwell_slice(maxwell):
    return restrict_to_slice(maxwell, SliceSpec(transverse=0, corner=1))


def test_scalar_slice_fields_and_omega(scalar_slice):
    sig = scalar_slice
    ctx = ElabContext(sig.schart)
    expect = elaborate_form(ctx, "delta(Pi_phi) ∧ delta(phi) ∧ dx0")
    assert (sig.omega_sigma - expect).is_zero()
    assert sig.pairing == {"phi": ["Pi_phi"], "Pi_phi": ["phi"]}


def test_null_slice_integrand(scalar_null):
    sig = restrict_to_slice(scalar_null, SliceSpec(transverse=0))
    ctx = ElabContext(sig.schart)
    # vol_S d_u(delta Psi) ^ delta Psi, written as a top form on Sigma
    expect = elaborate_form(ctx, "delta(phi_,0) ∧ delta(phi) ∧ dx0 ∧ dx1")
    assert (sig.omega_sigma - expect).is_zero()
    assert list(sig.momenta) == []


def test_zero_lagrangian_slice():
    T = theory_from_text("theory z\ndimension 2\nsignature + +\n"
                         "field phi scalar\nlagrangian 0\n")
    sig = restrict_to_slice(T, SliceSpec(transverse=0))
    assert sig.omega_sigma.is_zero() and sig.pairing == {}


def test_pullback_verification_runs(maxwell_slice):
    # pi* omega_Sigma = iota* omega was verified at construction
    assert maxwell_slice.pairing["A1"] == ["Pi_A1"]
    assert "A0" not in maxwell_slice.pairing   # reduced out


def test_maxwell_gauss_and_flux(maxwell, maxwell_slice):
    sym = maxwell.symmetry("gauge")
    H = sigma_noether(maxwell_slice, sym)
    H0, hf = split_constraint_flux(maxwell_slice, sym, H)
    assert (H - H0 - d_h(hf)).is_zero()
    ctx = ElabContext(maxwell_slice.schart)
    gauss = elaborate_form(ctx, "(Pi_A1_,0 + Pi_A2_,1 + Pi_A3_,2) * xi ∧ dx0 ∧ dx1 ∧ dx2")
    assert (H0 - gauss).is_zero()
    assert not hf.is_zero()


def test_sigma_noether_trivial_action(maxwell, maxwell_slice):
    from varcalc.theory import SymmetryAction
    zero = SymmetryAction.__new__(SymmetryAction)
    zero.theory = maxwell
    zero.name = "zero"
    zero.param_groups = maxwell.symmetry("gauge").param_groups
    from varcalc.euler import EvolutionaryField
    zero.rho = EvolutionaryField(maxwell.chart, {})
    zero.structure = None
    zero.is_local = True
    H = sigma_noether(maxwell_slice, zero)
    assert H.is_zero()


def test_does_not_descend_reports_offenders(scalar_field, scalar_slice):
    # an expression with second transverse jets cannot descend
    bad = elaborate_form(scalar_field.ctx, "phi_,00 * dx1")
    with pytest.raises(DoesNotDescend) as e:
        scalar_slice.express(bad)
    assert e.value.offending


def test_ce_cocycle_tables(maxwell, maxwell_slice, yang_mills):
    sym = maxwell.symmetry("gauge")
    table = compute_ce_cocycle(maxwell_slice, sym)
    assert table and all(v.is_zero() for v in table.values())
    ym_slice = restrict_to_slice(yang_mills, SliceSpec(transverse=0, corner=1))
    table2 = compute_ce_cocycle(ym_slice, yang_mills.symmetry("gauge"))
    assert table2 and all(v.is_zero() for v in table2.values())


def test_ce_cocycle_negative_control(maxwell, maxwell_slice):
    # shifting H by a field-dependent non-closed term breaks exactness
    sym = maxwell.symmetry("gauge")
    ctx = ElabContext(maxwell_slice.schart)
    shift = elaborate_form(
        ctx, "A1 * A1 * xi__b ∧ dx0 ∧ dx1 ∧ dx2")
    with pytest.raises(NotExact):
        compute_ce_cocycle(maxwell_slice, sym, H_shift=shift)


def test_corner_data_and_master(yang_mills):
    sig = restrict_to_slice(yang_mills, SliceSpec(transverse=0, corner=1))
    sym = yang_mills.symmetry("gauge")
    cd = corner_data(sig, sym)
    assert cd.dim == 3 and cd.h_densities
    rep = verify_corner_master(cd)
    assert rep.passed


def test_corner_requires_flux():
    T = theory_from_text(
        "theory s\ndimension 2\nsignature - +\nfield phi scalar\n"
        "lagrangian -1/2*d(phi)∧star(d(phi))\n"
        "symmetry shift param xi scalar\n  phi = xi\nsolve phi_,00\n")
    # shift with a field-valued parameter is not a symmetry of the free scalar
    assert not T.is_symmetry(T.symmetry("shift"))


def test_corner_master_negative_and_verdicts_agree():
    # genuinely non-Jacobi constants fail both computations coherently
    bad = {(0, 1): [(1, Fraction(1))], (1, 0): [(1, Fraction(-1))],
           (0, 2): [(2, Fraction(1))], (2, 0): [(2, Fraction(-1))],
           (1, 2): [(2, Fraction(1))], (2, 1): [(2, Fraction(-1))]}
    d = CornerData(basis=[0, 1, 2], dim=3, f=bad, k={}, h_densities={})
    rep = verify_corner_master(d)
    assert not rep.passed
    assert not corner_bracket_SS(3, bad, {}).is_zero()
    assert schouten_PiPi(3, bad, {})
    # an injected constant 2-cocycle keeps the master equation
    st = su2_structure()
    d2 = CornerData(basis=[0, 1, 2], dim=3, f=st.f,
                    k={(0, 1): Fraction(1)}, h_densities={})
    assert verify_corner_master(d2).passed
    # abelian with k = 0: trivially holds
    d3 = CornerData(basis=[0], dim=1, f={}, k={}, h_densities={})
    assert verify_corner_master(d3).passed


def test_bf_slice_constraint(bf4):
    sig = restrict_to_slice(bf4, SliceSpec(transverse=0, corner=1))
    sym = bf4.symmetry("gaugeB")
    H = sigma_noether(sig, sym)
    H0, hf = split_constraint_flux(sig, sym, H)
    assert (H - H0 - d_h(hf)).is_zero()
    assert not H0.is_zero() and not hf.is_zero()

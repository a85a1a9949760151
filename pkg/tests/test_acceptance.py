"""Acceptance gate: one test per shipped accuracy criterion.

Each test runs the matching self-check battery from ``curvatur.verify``
at seed 0, echoes every individual check line, and finishes with a
single PASS/FAIL line for the criterion.  A criterion passes only if
every check in its battery lands inside the stated bound.
"""

import pytest

import curvatur.verify as vf


def run_criterion(number, suite):
    checks = vf.run_suite(suite, seed=0)
    for c in checks:
        print(vf.format_check(c))
    ok = all(c.passed for c in checks)
    verdict = "PASS" if ok else "FAIL"
    print(f"criterion {number:02d} [{suite}]: {verdict}")
    if not ok:
        bad = [c.name for c in checks if not c.passed]
        pytest.fail(f"criterion {number:02d} [{suite}] failed checks: "
                    + ", ".join(bad))


def test_criterion_01_circle_law_curvature_from_circumference():
    run_criterion(1, "circle-law")


def test_criterion_02_scalar_curvature_dual_routes():
    run_criterion(2, "scalar-curvature")


def test_criterion_03_gauss_curvature_is_intrinsic():
    run_criterion(3, "egregium")


def test_criterion_04_euler_and_meusnier_normal_sections():
    run_criterion(4, "euler-meusnier")


def test_criterion_05_offset_area_expansion():
    run_criterion(5, "offset-expansion")


def test_criterion_06_geodesic_integration():
    run_criterion(6, "geodesic")


def test_criterion_07_parallel_transport_and_holonomy():
    run_criterion(7, "transport")


def test_criterion_08_riemann_tensor_and_symmetries():
    run_criterion(8, "riemann")


def test_criterion_09_ricci_and_volume_comparison():
    run_criterion(9, "ricci")


def test_criterion_10_curve_reconstruction_round_trip():
    run_criterion(10, "curve-roundtrip")


def test_criterion_11_hyperbolic_half_plane_geometry():
    run_criterion(11, "hyperbolic")


def test_criterion_12_jet_calculus_and_potentials():
    run_criterion(12, "calculus")


def test_criterion_13_geometry_parser_contract():
    run_criterion(13, "parser")

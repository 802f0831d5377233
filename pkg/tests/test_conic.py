import numpy as np
import pytest
import scipy.sparse as sp

from mfris.conic import (NONNEG, RSOC, SOC, ConeBlock, ConicProgram,
                         lift_complex_quadratic, solve)


def _block(kind, rows, offsets, n_vars):
    return ConeBlock(kind, sp.csr_matrix(np.atleast_2d(rows)),
                     np.asarray(offsets, dtype=float))


def test_min_x_subject_to_floor():
    program = ConicProgram(
        n_vars=1, objective=[1.0],
        blocks=[ConeBlock(NONNEG, sp.csr_matrix([[1.0]]), [-1.0])])
    sol = solve(program)
    assert sol.status == "optimal"
    assert sol.x[0] == pytest.approx(1.0, abs=1e-8)
    assert sol.objective == pytest.approx(1.0, abs=1e-8)


def test_norm_minimization_with_equality():
    c = np.array([0.3, -1.2, 0.8])
    # minimize t subject to t >= ||y||, y = c
    n = 4
    obj = np.zeros(n)
    obj[0] = 1.0
    soc_rows = np.zeros((4, n))
    soc_rows[0, 0] = 1.0
    soc_rows[1:, 1:] = np.eye(3)
    eq = sp.csr_matrix(np.hstack([np.zeros((3, 1)), np.eye(3)]))
    program = ConicProgram(
        n_vars=n, objective=obj,
        blocks=[ConeBlock(SOC, sp.csr_matrix(soc_rows), np.zeros(4))],
        eq_A=eq, eq_b=c)
    sol = solve(program)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(np.linalg.norm(c), rel=1e-7)
    assert sol.max_violation <= 1e-7


def test_rotated_cone_epigraph():
    # minimize t subject to t >= ||y||^2, y fixed by equalities
    y = np.array([0.6, -0.8])
    n = 3
    obj = np.array([1.0, 0.0, 0.0])
    rows = np.zeros((4, n))
    rows[0, 0] = 1.0          # u = t
    rows[2, 1] = 1.0
    rows[3, 2] = 1.0
    g = np.array([0.0, 0.5, 0.0, 0.0])   # v = 1/2 constant
    eq = sp.csr_matrix(np.hstack([np.zeros((2, 1)), np.eye(2)]))
    program = ConicProgram(
        n_vars=n, objective=obj,
        blocks=[ConeBlock(RSOC, sp.csr_matrix(rows), g)],
        eq_A=eq, eq_b=y)
    sol = solve(program)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(np.linalg.norm(y) ** 2, rel=1e-7)


def test_infeasible_detected():
    rows = np.array([[1.0], [-1.0]])
    program = ConicProgram(
        n_vars=1, objective=[0.0],
        blocks=[ConeBlock(NONNEG, sp.csr_matrix(rows), np.array([-2.0, 1.0]))])
    sol = solve(program)
    assert sol.status == "infeasible"


def test_unbounded_detected():
    program = ConicProgram(
        n_vars=1, objective=[-1.0],
        blocks=[ConeBlock(NONNEG, sp.csr_matrix([[1.0]]), [0.0])])
    sol = solve(program)
    assert sol.status == "unbounded"


def test_random_socp_against_grid_oracle():
    # 2-variable instances checked against a brute-force grid search
    rng = np.random.default_rng(0)
    for trial in range(5):
        c = rng.standard_normal(2)
        center = rng.standard_normal(2) * 0.2
        radius = 1.0 + rng.uniform(0, 1)
        rows = np.zeros((3, 2))
        rows[1:, :] = np.eye(2)
        g = np.array([radius, -center[0], -center[1]])
        program = ConicProgram(
            n_vars=2, objective=c,
            blocks=[ConeBlock(SOC, sp.csr_matrix(rows), g)])
        sol = solve(program)
        assert sol.status == "optimal"
        grid = np.linspace(-radius, radius, 801)
        xx, yy = np.meshgrid(grid + center[0], grid + center[1])
        mask = (xx - center[0]) ** 2 + (yy - center[1]) ** 2 <= radius ** 2
        brute = np.min(c[0] * xx[mask] + c[1] * yy[mask])
        assert sol.objective <= brute + 1e-4


def test_weak_duality():
    c = np.array([1.0, 2.0])
    rows = np.zeros((3, 2))
    rows[1:, :] = np.eye(2)
    program = ConicProgram(
        n_vars=2, objective=c,
        blocks=[ConeBlock(SOC, sp.csr_matrix(rows), np.array([1.0, 0.0, 0.0])),
                ConeBlock(NONNEG, sp.csr_matrix(np.eye(2)), np.array([0.5, 0.5]))])
    sol = solve(program)
    assert sol.status == "optimal"
    assert sol.dual_objective <= sol.objective + 1e-7


def test_reported_objective_matches_solution_vector():
    rng = np.random.default_rng(3)
    c = rng.standard_normal(3)
    rows = np.zeros((4, 3))
    rows[1:, :] = np.eye(3)
    program = ConicProgram(
        n_vars=3, objective=c,
        blocks=[ConeBlock(SOC, sp.csr_matrix(rows), np.array([2.0, 0, 0, 0]))])
    sol = solve(program)
    assert sol.objective == pytest.approx(float(c @ sol.x), abs=1e-8)


def test_lift_identity_matrix():
    R = lift_complex_quadratic(np.eye(2, dtype=complex))
    rng = np.random.default_rng(1)
    x = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    xr = np.concatenate([x.real, x.imag])
    assert np.linalg.norm(R @ xr) ** 2 == pytest.approx(np.linalg.norm(x) ** 2,
                                                        rel=1e-12)


def test_lift_rank_one_matches_inner_product():
    rng = np.random.default_rng(2)
    v = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    R = lift_complex_quadratic(np.outer(v, v.conj()))
    for _ in range(25):
        x = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        xr = np.concatenate([x.real, x.imag])
        assert np.linalg.norm(R @ xr) == pytest.approx(abs(v.conj() @ x), rel=1e-9)


def test_lift_random_psd_quadratic_form():
    rng = np.random.default_rng(3)
    for _ in range(10):
        A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        Q = A @ A.conj().T
        R = lift_complex_quadratic(Q)
        for _ in range(10):
            x = rng.standard_normal(4) + 1j * rng.standard_normal(4)
            xr = np.concatenate([x.real, x.imag])
            direct = float(np.real(x.conj() @ Q @ x))
            assert np.linalg.norm(R @ xr) ** 2 == pytest.approx(
                direct, rel=1e-9, abs=1e-12)


def test_lift_rejects_non_hermitian_and_indefinite():
    with pytest.raises(ValueError, match="Hermitian"):
        lift_complex_quadratic(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError, match="PSD"):
        lift_complex_quadratic(np.diag([1.0, -0.5]).astype(complex))


def test_program_dump_readable(tmp_path):
    program = ConicProgram(
        n_vars=2, objective=[1.0, 0.0],
        blocks=[ConeBlock(NONNEG, sp.csr_matrix([[1.0, -1.0]]), [0.5])],
        eq_A=sp.csr_matrix([[1.0, 1.0]]), eq_b=[2.0])
    path = tmp_path / "program.txt"
    program.dump(path)
    text = path.read_text()
    assert "variables 2" in text and "cone 0 nonneg" in text and "eq:" in text

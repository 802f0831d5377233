"""Real-valued second-order-cone substrate: complex lifting, cone blocks, solve.

Programs are stated as

    minimize    objective . x
    subject to  eq_A x = eq_b
                F_i x + g_i  in  cone_i   (nonneg | soc | rsoc)

and lowered to the Clarabel interior-point backend (rotated cones are reduced
to plain second-order cones inside the adapter). Each block is scaled by its
largest coefficient before the solve; reported violations are relative to that
scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

try:
    import clarabel
except ImportError as exc:  # pragma: no cover - backend is a hard dependency
    raise ImportError("the conic solver requires the clarabel backend") from exc

NONNEG = "nonneg"
SOC = "soc"
RSOC = "rsoc"

HERMITIAN_TOL = 1e-8
EIGEN_FLOOR = -1e-9


class SolverFailure(RuntimeError):
    """Backend returned an unusable status."""


def lift_complex_quadratic(Q: np.ndarray) -> np.ndarray:
    """Factor a Hermitian PSD form so that ||R x_real||^2 = x^H Q x.

    ``x_real`` is the embedding [Re x; Im x]. Built from the eigenfactorization
    of the real symmetric embedding [[Re Q, -Im Q], [Im Q, Re Q]]; eigenvalues
    below the -1e-9 relative floor are rejected, small negatives are clipped.
    """
    Q = np.asarray(Q, dtype=complex)
    scale = max(1.0, float(np.abs(Q).max(initial=0.0)))
    if np.abs(Q - Q.conj().T).max(initial=0.0) > HERMITIAN_TOL * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    n = Q.shape[0]
    embed = np.block([[Q.real, -Q.imag], [Q.imag, Q.real]])
    embed = 0.5 * (embed + embed.T)
    eigvals, eigvecs = np.linalg.eigh(embed)
    if eigvals.min(initial=0.0) < EIGEN_FLOOR * max(1.0, eigvals.max(initial=0.0)):
        raise ValueError(
            f"matrix is not PSD within the eigen floor (min eig {eigvals.min():.3g})")
    keep = eigvals > 0.0
    if not np.any(keep):
        return np.zeros((0, 2 * n))
    return (eigvecs[:, keep] * np.sqrt(eigvals[keep])).T


@dataclass
class ConeBlock:
    """One cone membership requirement F x + g in K."""

    kind: str
    F: sp.csr_matrix
    g: np.ndarray

    def __post_init__(self):
        if self.kind not in (NONNEG, SOC, RSOC):
            raise ValueError(f"unknown cone kind {self.kind!r}")
        self.F = sp.csr_matrix(self.F)
        self.g = np.asarray(self.g, dtype=float).ravel()
        if self.F.shape[0] != len(self.g):
            raise ValueError("cone block rows and offset length differ")
        if self.kind == SOC and len(self.g) < 1:
            raise ValueError("soc block needs dimension >= 1")
        if self.kind == RSOC and len(self.g) < 2:
            raise ValueError("rsoc block needs dimension >= 2")

    @property
    def dim(self) -> int:
        return len(self.g)

    def violation(self, x: np.ndarray) -> float:
        """Distance-style infeasibility of the slice at x, relative to block scale."""
        s = self.F @ x + self.g
        if self.kind == NONNEG:
            raw = max(0.0, float(-s.min(initial=0.0)))
        elif self.kind == SOC:
            raw = max(0.0, float(np.linalg.norm(s[1:]) - s[0]))
        else:
            u, v, w = s[0], s[1], s[2:]
            raw = max(0.0, -u, -v, float(w @ w - 2.0 * u * v))
        scale = max(1.0, float(np.abs(self.g).max(initial=0.0)),
                    float(np.abs(self.F).max() if self.F.nnz else 0.0))
        return raw / scale


@dataclass
class ConicProgram:
    n_vars: int
    objective: np.ndarray
    blocks: list
    eq_A: sp.csr_matrix | None = None
    eq_b: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float).ravel()
        if len(self.objective) != self.n_vars:
            raise ValueError("objective length must equal n_vars")
        if (self.eq_A is None) != (self.eq_b is None):
            raise ValueError("equality matrix and rhs must be given together")
        if self.eq_A is not None:
            self.eq_A = sp.csr_matrix(self.eq_A)
            self.eq_b = np.asarray(self.eq_b, dtype=float).ravel()
            if self.eq_A.shape != (len(self.eq_b), self.n_vars):
                raise ValueError("equality system shape mismatch")
        for block in self.blocks:
            if block.F.shape[1] != self.n_vars:
                raise ValueError("cone block column count must equal n_vars")

    def max_violation(self, x: np.ndarray) -> float:
        worst = 0.0
        if self.eq_A is not None and self.eq_A.shape[0]:
            scale = max(1.0, float(np.abs(self.eq_b).max(initial=0.0)))
            worst = float(np.abs(self.eq_A @ x - self.eq_b).max(initial=0.0)) / scale
        for block in self.blocks:
            worst = max(worst, block.violation(x))
        return worst

    def dump(self, path):
        """Human-readable program listing for debugging."""
        with open(path, "w") as fh:
            fh.write(f"variables {self.n_vars}\n")
            fh.write("minimize " + " ".join(f"{c:.12g}" for c in self.objective) + "\n")
            if self.eq_A is not None:
                coo = self.eq_A.tocoo()
                for r in range(self.eq_A.shape[0]):
                    terms = [f"{v:.12g}*x{c}" for rr, c, v in
                             zip(coo.row, coo.col, coo.data) if rr == r]
                    fh.write(f"eq: {' + '.join(terms) or '0'} = {self.eq_b[r]:.12g}\n")
            for i, block in enumerate(self.blocks):
                fh.write(f"cone {i} {block.kind} dim {block.dim}\n")
                coo = block.F.tocoo()
                for r in range(block.dim):
                    terms = [f"{v:.12g}*x{c}" for rr, c, v in
                             zip(coo.row, coo.col, coo.data) if rr == r]
                    fh.write(f"  row {r}: {' + '.join(terms) or '0'} + {block.g[r]:.12g}\n")


@dataclass
class ConicSolution:
    status: str           # optimal | infeasible | unbounded | max_iter | numerical_error
    x: np.ndarray | None
    objective: float | None
    max_violation: float | None
    dual_objective: float | None = None
    iterations: int = 0

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


_STATUS_MAP = {
    "Solved": "optimal",
    "AlmostSolved": "optimal",
    "PrimalInfeasible": "infeasible",
    "AlmostPrimalInfeasible": "infeasible",
    "DualInfeasible": "unbounded",
    "AlmostDualInfeasible": "unbounded",
    "MaxIterations": "max_iter",
}


def _rsoc_to_soc(F: sp.csr_matrix, g: np.ndarray):
    """Map (u, v, w) with 2uv >= ||w||^2 to the SOC slice (u+v, u-v, sqrt(2) w)."""
    dim = len(g)
    T = sp.lil_matrix((dim, dim))
    T[0, 0] = 1.0
    T[0, 1] = 1.0
    T[1, 0] = 1.0
    T[1, 1] = -1.0
    for i in range(2, dim):
        T[i, i] = np.sqrt(2.0)
    T = T.tocsr()
    return T @ F, T @ g


def solve(program: ConicProgram, tol: float = 1e-9, max_iter: int = 200) -> ConicSolution:
    """Solve the program with the interior-point backend; deterministic per input."""
    rows_A = []
    rows_b = []
    cones = []

    if program.eq_A is not None and program.eq_A.shape[0]:
        scale = np.maximum(np.abs(program.eq_A).max(axis=1).toarray().ravel(),
                           np.abs(program.eq_b))
        scale = np.maximum(scale, 1e-12)
        D = sp.diags(1.0 / scale)
        rows_A.append(D @ program.eq_A)
        rows_b.append(program.eq_b / scale)
        cones.append(clarabel.ZeroConeT(program.eq_A.shape[0]))

    for block in program.blocks:
        F, g = block.F, block.g
        if block.kind == RSOC:
            F, g = _rsoc_to_soc(F, g)
        scale = max(float(np.abs(F).max() if F.nnz else 0.0),
                    float(np.abs(g).max(initial=0.0)), 1e-12)
        rows_A.append(-F / scale)
        rows_b.append(g / scale)
        if block.kind == NONNEG:
            cones.append(clarabel.NonnegativeConeT(block.dim))
        else:
            cones.append(clarabel.SecondOrderConeT(block.dim))

    obj_scale = max(float(np.abs(program.objective).max(initial=0.0)), 1e-12)
    q = program.objective / obj_scale

    A = sp.vstack(rows_A, format="csc") if rows_A else sp.csc_matrix((0, program.n_vars))
    b = np.concatenate(rows_b) if rows_b else np.zeros(0)
    P = sp.csc_matrix((program.n_vars, program.n_vars))

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = int(max_iter)
    settings.tol_feas = tol
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol

    backend = clarabel.DefaultSolver(P, q, A, b, cones, settings)
    result = backend.solve()
    status = _STATUS_MAP.get(str(result.status), "numerical_error")

    if status in ("infeasible", "unbounded"):
        return ConicSolution(status=status, x=None, objective=None,
                             max_violation=None, iterations=result.iterations)

    x = np.asarray(result.x, dtype=float)
    violation = program.max_violation(x)
    if status == "optimal" and violation > max(10.0 * tol, 1e-7):
        status = "numerical_error"
    return ConicSolution(
        status=status,
        x=x,
        objective=float(program.objective @ x),
        max_violation=violation,
        dual_objective=float(result.obj_val_dual) * obj_scale,
        iterations=result.iterations,
    )

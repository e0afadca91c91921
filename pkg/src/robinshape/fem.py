"""P1 finite-element solver for the first Robin p-Laplacian eigenvalue.

The eigenpair minimizes the Rayleigh quotient

    (int |grad u|^p dx + beta int_bdry |u|^p ds) / int |u|^p dx

over the mesh's piecewise-linear space.  The p = 2 case is a generalized
symmetric eigenproblem solved by shifted inverse iteration; general p uses
normalized projected gradient descent in a problem-adapted metric with
backtracking line search, warm-started by continuation in p from p = 2 in
steps of at most 0.25.  Boundary integrals are assembled edge-wise with the
exact curve arclength; interior p-integrals use a degree-5 triangle rule.

``beta = math.inf`` selects the Dirichlet problem (boundary values pinned
to zero); ``beta = 0`` is the Neumann case with eigenvalue 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ConvergenceError
from .geometry import arclength_between, boundary_frame
from .meshing import Mesh

INF = math.inf

GRAD_FLOOR = 1e-14          # floor on |grad u| before raising to p - 2
DUAL_RESIDUAL_TOL = 1e-8
LAMBDA_STALL_TOL = 1e-10    # relative lambda change, held over 5 iterations
LAMBDA_STALL_COUNT = 5
MAX_DESCENT_ITERS = 4000
MAX_POWER_ITERS = 500
CONTINUATION_STEP = 0.25

# degree-5 symmetric triangle rule (7 points), barycentric coordinates
_A1 = (6.0 - math.sqrt(15.0)) / 21.0
_A2 = (6.0 + math.sqrt(15.0)) / 21.0
_W1 = (155.0 - math.sqrt(15.0)) / 1200.0
_W2 = (155.0 + math.sqrt(15.0)) / 1200.0
TRI_QP = np.array(
    [
        [1 / 3, 1 / 3, 1 / 3],
        [_A1, _A1, 1 - 2 * _A1],
        [_A1, 1 - 2 * _A1, _A1],
        [1 - 2 * _A1, _A1, _A1],
        [_A2, _A2, 1 - 2 * _A2],
        [_A2, 1 - 2 * _A2, _A2],
        [1 - 2 * _A2, _A2, _A2],
    ]
)
TRI_QW = np.array([9.0 / 40.0, _W1, _W1, _W1, _W2, _W2, _W2])

EDGE_QP, EDGE_QW = np.polynomial.legendre.leggauss(5)
EDGE_QP = 0.5 * (EDGE_QP + 1.0)
EDGE_QW = 0.5 * EDGE_QW


@dataclass(frozen=True)
class ProblemSpec:
    """Eigenproblem statement: exponent p > 1, boundary parameter beta
    (nonnegative, or math.inf for Dirichlet), and the mesh."""

    p: float
    beta: float
    mesh: Mesh

    def __post_init__(self):
        if not self.p > 1.0:
            raise ValueError("p must exceed 1")
        if self.beta != INF and self.beta < 0.0:
            raise ValueError("beta must be nonnegative or infinity")

    @property
    def dirichlet(self) -> bool:
        return self.beta == INF


@dataclass(frozen=True)
class EigenSolution:
    p: float
    beta: float
    lambda1: float
    u: np.ndarray
    normalization: float
    mesh: Mesh = field(repr=False)
    boundary_theta: np.ndarray = field(repr=False, default=None)
    boundary_u: np.ndarray = field(repr=False, default=None)
    boundary_grad: np.ndarray = field(repr=False, default=None)
    boundary_du_dn: np.ndarray = field(repr=False, default=None)
    boundary_grad_norm: np.ndarray = field(repr=False, default=None)
    diagnostics: dict = field(compare=False, default_factory=dict)


class Assembler:
    """Per-mesh FEM operators shared by all solves on that mesh."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        v = mesh.vertices
        t = mesh.triangles
        nv = mesh.num_vertices
        nt = mesh.num_triangles
        a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
        det = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (
            c[:, 0] - a[:, 0]
        )
        self.area = 0.5 * det

        # gradients of the three barycentric basis functions per triangle
        gx = np.stack(
            [b[:, 1] - c[:, 1], c[:, 1] - a[:, 1], a[:, 1] - b[:, 1]], axis=1
        ) / det[:, None]
        gy = np.stack(
            [c[:, 0] - b[:, 0], a[:, 0] - c[:, 0], b[:, 0] - a[:, 0]], axis=1
        ) / det[:, None]
        rows = np.repeat(np.arange(nt), 3)
        cols = t.ravel()
        self.Gx = sp.csr_matrix((gx.ravel(), (rows, cols)), shape=(nt, nv))
        self.Gy = sp.csr_matrix((gy.ravel(), (rows, cols)), shape=(nt, nv))

        self.K = (
            self.Gx.T @ sp.diags(self.area) @ self.Gx
            + self.Gy.T @ sp.diags(self.area) @ self.Gy
        ).tocsc()

        # exact P1 mass matrix: area/12 * (1 + delta_ij)
        mi, mj, mv = [], [], []
        for i in range(3):
            for j in range(3):
                mi.append(t[:, i])
                mj.append(t[:, j])
                mv.append(self.area * ((2.0 if i == j else 1.0) / 12.0))
        self.M = sp.csr_matrix(
            (np.concatenate(mv), (np.concatenate(mi), np.concatenate(mj))),
            shape=(nv, nv),
        ).tocsc()

        # interior quadrature operator: values at 7 points per triangle
        nq = TRI_QP.shape[0]
        qrows = np.repeat(np.arange(nt * nq), 3)
        qcols = np.repeat(t, nq, axis=0).ravel()
        qvals = np.tile(TRI_QP, (nt, 1)).ravel()
        self.Qt = sp.csr_matrix((qvals, (qrows, qcols)), shape=(nt * nq, nv))
        self.wt = np.repeat(self.area, nq) * np.tile(TRI_QW, nt)

        # boundary edges between consecutive boundary vertices, exact arclength
        bv = mesh.boundary_vertices
        bt = mesh.boundary_thetas
        nb = bv.size
        arclen = np.empty(nb)
        for i in range(nb):
            t1 = bt[(i + 1) % nb] + (2 * np.pi if i == nb - 1 else 0.0)
            arclen[i] = arclength_between(mesh.curve, bt[i], t1)
        self.edge_arclen = arclen
        ne = nb
        nqe = EDGE_QP.size
        erows = np.repeat(np.arange(ne * nqe), 2)
        heads = bv
        tails = np.roll(bv, -1)
        ecols = np.stack(
            [np.repeat(heads, nqe), np.repeat(tails, nqe)], axis=1
        ).ravel()
        evals = np.stack(
            [np.tile(1.0 - EDGE_QP, ne), np.tile(EDGE_QP, ne)], axis=1
        ).ravel()
        self.Eb = sp.csr_matrix((evals, (erows, ecols)), shape=(ne * nqe, nv))
        self.wb = np.repeat(arclen, nqe) * np.tile(EDGE_QW, ne)

        self.B = (self.Eb.T @ sp.diags(self.wb) @ self.Eb).tocsc()

        self.interior = np.ones(nv, dtype=bool)
        self.interior[bv] = False
        self._dual_factor = {}

    # -- discrete functionals ------------------------------------------------

    def norm_p(self, u: np.ndarray, p: float) -> float:
        uq = self.Qt @ u
        return float(np.dot(self.wt, np.abs(uq) ** p))

    def norm_p_grad(self, u: np.ndarray, p: float) -> np.ndarray:
        uq = self.Qt @ u
        return p * (self.Qt.T @ (self.wt * np.abs(uq) ** (p - 2.0) * uq))

    def boundary_p(self, u: np.ndarray, p: float) -> float:
        ub = self.Eb @ u
        return float(np.dot(self.wb, np.abs(ub) ** p))

    def boundary_p_grad(self, u: np.ndarray, p: float) -> np.ndarray:
        ub = self.Eb @ u
        return p * (self.Eb.T @ (self.wb * np.abs(ub) ** (p - 2.0) * ub))

    def grad_energy(self, u: np.ndarray, p: float) -> float:
        g = np.hypot(self.Gx @ u, self.Gy @ u)
        return float(np.dot(self.area, g**p))

    def grad_energy_grad(self, u: np.ndarray, p: float):
        """(gradient vector, count of elements where the |grad| floor engaged)."""
        gx, gy = self.Gx @ u, self.Gy @ u
        g = np.hypot(gx, gy)
        floored = g < GRAD_FLOOR
        w = np.maximum(g, GRAD_FLOOR) ** (p - 2.0)
        # |grad u|^{p-2} grad u -> 0 as grad u -> 0 for every p > 1; the floor
        # only guards the division, so floored elements contribute nothing
        w[floored] = 0.0
        aw = self.area * w
        vec = p * (self.Gx.T @ (aw * gx) + self.Gy.T @ (aw * gy))
        return vec, int(np.count_nonzero(floored))

    def rayleigh(self, u: np.ndarray, p: float, beta: float) -> float:
        denom = self.norm_p(u, p)
        if denom <= 0.0:
            raise ValueError("field vanishes; Rayleigh quotient undefined")
        num = self.grad_energy(u, p)
        if beta == INF:
            if self.boundary_p(u, p) > 1e-24 * denom:
                raise ValueError("Dirichlet Rayleigh quotient needs a zero trace")
        elif beta > 0.0:
            num += beta * self.boundary_p(u, p)
        return num / denom

    def weak_residual(self, u: np.ndarray, p: float, beta: float, lam: float):
        """Residual of Definition-style weak form against all basis functions."""
        vec, guards = self.grad_energy_grad(u, p)
        if beta not in (0.0, INF):
            vec = vec + beta * self.boundary_p_grad(u, p)
        vec = (vec - lam * self.norm_p_grad(u, p)) / p
        return vec, guards

    def dual_norm(self, r: np.ndarray, dirichlet: bool) -> float:
        """W^{1,2}-dual norm of a residual vector: sqrt(r^T (K+M)^{-1} r)."""
        key = bool(dirichlet)
        if key not in self._dual_factor:
            H = (self.K + self.M).tocsc()
            if dirichlet:
                idx = np.flatnonzero(self.interior)
                H = H[np.ix_(idx, idx)].tocsc()
            self._dual_factor[key] = splu(H)
        if dirichlet:
            r = r[self.interior]
        return float(math.sqrt(max(np.dot(r, self._dual_factor[key].solve(r)), 0.0)))


def _restrict(mat: sp.spmatrix, idx: np.ndarray) -> sp.csc_matrix:
    return mat[np.ix_(idx, idx)].tocsc()


def _solve_linear(asm: Assembler, beta: float, shift: float = -0.1):
    """Smallest eigenpair of (K + beta B) u = lam M u by shifted inverse
    iteration; Dirichlet (beta = inf) restricts to interior nodes.

    Iterates until the dual-norm residual sits an order below the solver
    contract (the eigenvalue alone converges twice as fast as the vector,
    so a lambda-stagnation test would stop too early)."""
    nv = asm.mesh.num_vertices
    dirichlet = beta == INF
    if dirichlet:
        idx = np.flatnonzero(asm.interior)
        A = _restrict(asm.K, idx)
        M = _restrict(asm.M, idx)
    else:
        idx = np.arange(nv)
        A = (asm.K + beta * asm.B).tocsc() if beta > 0.0 else asm.K
        M = asm.M
    lu = splu((A - shift * M).tocsc())
    x = np.ones(idx.size)
    x /= math.sqrt(np.dot(x, M @ x))
    lam = float(np.dot(x, A @ x))
    iterations = 0
    for iterations in range(1, MAX_POWER_ITERS + 1):
        x = lu.solve(M @ x)
        x /= math.sqrt(np.dot(x, M @ x))
        lam = float(np.dot(x, A @ x))
        r = np.zeros(nv)
        r[idx] = A @ x - lam * (M @ x)
        if asm.dual_norm(r, dirichlet) < 0.1 * DUAL_RESIDUAL_TOL:
            break
    u = np.zeros(nv)
    u[idx] = x
    return lam, u, iterations


def _descend(asm, p, beta, u0, maxit=MAX_DESCENT_ITERS, precond_every=15):
    """Normalized projected descent on the Rayleigh quotient.

    Directions come from a lagged-diffusivity metric (the Picard
    linearization of the p-energy plus mass) with Armijo backtracking.
    Once the predicted decrease falls below functional round-off, steps
    are instead accepted on a residual-norm decrease with the metric
    rebuilt every iteration (local Newton-like regime); plain Armijo
    stalls near sqrt(eps) because the quotient can no longer be compared
    reliably.  Returns (lambda, u, diagnostics).
    """
    dirichlet = beta == INF
    nv = u0.size
    if dirichlet:
        idx = np.flatnonzero(asm.interior)
    else:
        idx = np.arange(nv)

    def project(u):
        return u / asm.norm_p(u, p) ** (1.0 / p)

    def functional(u):
        num = asm.grad_energy(u, p)
        if not dirichlet and beta > 0.0:
            num += beta * asm.boundary_p(u, p)
        return num / asm.norm_p(u, p)

    def build_precond(u):
        gx, gy = asm.Gx @ u, asm.Gy @ u
        g = np.hypot(gx, gy)
        # metric-only smoothing of the degenerate weight; the residual
        # itself keeps the hard GRAD_FLOOR contract
        eps = max(1e-3 * float(g.max()), GRAD_FLOOR)
        w = (g * g + eps * eps) ** (0.5 * (p - 2.0))
        P = (
            asm.Gx.T @ sp.diags(asm.area * w) @ asm.Gx
            + asm.Gy.T @ sp.diags(asm.area * w) @ asm.Gy
            + asm.M
        )
        if p > 2.0:
            # anisotropic part of the p-energy Hessian, (p-2) w (e . grad)^2
            # with e = grad u / |grad u|; without it unit steps overshoot by
            # up to a factor p - 1 and the local phase crawls
            gs = np.maximum(g, eps)
            Gn = sp.diags(gx / gs) @ asm.Gx + sp.diags(gy / gs) @ asm.Gy
            P = P + (p - 2.0) * (Gn.T @ sp.diags(asm.area * w) @ Gn)
        if not dirichlet and beta > 0.0:
            ub = asm.Eb @ u
            wb = (p - 1.0) * np.abs(ub) ** (p - 2.0)
            P = P + beta * (asm.Eb.T @ sp.diags(asm.wb * wb) @ asm.Eb)
        return splu(_restrict(P.tocsc(), idx))

    u = u0.copy()
    if dirichlet:
        u[~asm.interior] = 0.0
    u = project(u)
    lam = functional(u)
    stall = 0
    alpha = 1.0
    lu = build_precond(u)
    guards = 0
    local_phase = False
    r, guards = asm.weak_residual(u, p, beta, lam)
    dual = asm.dual_norm(r, dirichlet)
    for it in range(1, maxit + 1):
        if dual < DUAL_RESIDUAL_TOL and stall >= LAMBDA_STALL_COUNT:
            return lam, u, {"iterations": it - 1, "residual": dual, "guards": guards}
        if local_phase or it % precond_every == 0:
            lu = build_precond(u)
        d = np.zeros(nv)
        d[idx] = -lu.solve(r[idx])
        slope = p * float(np.dot(r, d))
        if slope >= 0.0:  # metric lost descent; fall back to steepest
            d[idx] = -r[idx]
            slope = p * float(np.dot(r, d))
        if not local_phase and abs(slope) < 1e-12 * max(abs(lam), 1.0):
            local_phase = True
            lu = build_precond(u)
            d = np.zeros(nv)
            d[idx] = -lu.solve(r[idx])

        accepted = False
        if not local_phase:
            alpha = min(2.0 * alpha, 1.0)
            for _ in range(50):
                cand = u + alpha * d
                if asm.norm_p(cand, p) > 0.0 and functional(cand) <= lam + 1e-4 * alpha * slope:
                    accepted = True
                    break
                alpha *= 0.5
                if alpha * abs(slope) < 1e-13 * max(abs(lam), 1.0):
                    break  # decrease unverifiable at round-off; go local
            if not accepted:
                local_phase = True
                lu = build_precond(u)
                d = np.zeros(nv)
                d[idx] = -lu.solve(r[idx])
        if local_phase:
            step = 1.0
            for _ in range(8):
                cand = project(u + step * d)
                r_new, guards = asm.weak_residual(cand, p, beta, functional(cand))
                dual_new = asm.dual_norm(r_new, dirichlet)
                if dual_new < dual:
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                if dual < DUAL_RESIDUAL_TOL:
                    return lam, u, {"iterations": it, "residual": dual, "guards": guards}
                raise ConvergenceError(
                    "residual stalled before reaching tolerance",
                    diagnostics={"iteration": it, "dual_residual": dual, "lambda": lam},
                )
        u = project(cand)
        lam_new = functional(u)
        rel = abs(lam_new - lam) / max(abs(lam_new), 1e-12)
        stall = stall + 1 if rel < LAMBDA_STALL_TOL else 0
        lam = lam_new
        r, guards = asm.weak_residual(u, p, beta, lam)
        dual = asm.dual_norm(r, dirichlet)
    raise ConvergenceError(
        "descent did not converge within the iteration cap",
        diagnostics={"iterations": maxit, "dual_residual": dual, "lambda": lam},
    )


def _continuation_exponents(p: float) -> list:
    steps = max(1, math.ceil(abs(p - 2.0) / CONTINUATION_STEP - 1e-12))
    return [2.0 + (p - 2.0) * k / steps for k in range(1, steps + 1)]


def solve(spec: ProblemSpec, warm_start: np.ndarray | None = None) -> EigenSolution:
    """First eigenpair on the mesh; traces included.

    ``warm_start`` (nodal values on this mesh) skips the p-continuation and
    descends at the target exponent directly; if that stalls or leaves the
    positive cone the solver falls back to full continuation.
    """
    asm = Assembler(spec.mesh)
    return _solve_with(asm, spec, warm_start)


def _solve_with(asm: Assembler, spec: ProblemSpec, warm_start=None) -> EigenSolution:
    p, beta = spec.p, spec.beta
    total_iters = 0
    guards = 0

    if beta == 0.0:
        # Neumann: the constant is the exact discrete minimizer for every p.
        lam, u = 0.0, np.ones(spec.mesh.num_vertices)
    elif p == 2.0:
        lam, u, total_iters = _solve_linear(asm, beta)
    else:
        attempts = []
        if warm_start is not None:
            attempts.append(("warm", [p], warm_start))
        lam2, u2, it2 = _solve_linear(asm, beta)
        total_iters += it2
        attempts.append(("continuation", _continuation_exponents(p), u2))
        lam = u = None
        last_error = None
        for _, exponents, u_start in attempts:
            try:
                u_cur = np.asarray(u_start, dtype=float).copy()
                for pk in exponents:
                    lam_k, u_cur, info = _descend(asm, pk, beta, u_cur)
                    total_iters += info["iterations"]
                    guards = info["guards"]
                if np.mean(u_cur) < 0.0:
                    u_cur = -u_cur
                interior_min = u_cur[asm.interior].min()
                if interior_min <= 0.0:
                    raise ConvergenceError(
                        "iterate left the positive cone",
                        diagnostics={"min_interior": float(interior_min)},
                    )
                lam, u = lam_k, u_cur
                break
            except ConvergenceError as err:  # try the next start
                last_error = err
                continue
        if u is None:
            raise last_error

    if np.mean(u) < 0.0:
        u = -u
    norm = asm.norm_p(u, p)
    u = u / norm ** (1.0 / p)

    r, g2 = asm.weak_residual(u, p, beta, lam)
    guards = max(guards, g2)
    dual = asm.dual_norm(r, spec.dirichlet)
    if dual > DUAL_RESIDUAL_TOL:
        raise ConvergenceError(
            "converged iterate exceeds the weak-residual tolerance",
            diagnostics={"dual_residual": dual, "lambda": lam},
        )
    if spec.dirichlet:
        if u[asm.interior].min() <= 0.0:
            raise ConvergenceError("Dirichlet eigenfunction not positive inside")
    elif u.min() <= 0.0 and beta > 0.0:
        raise ConvergenceError("eigenfunction not positive at all nodes")

    grad, du_dn, flagged = recover_boundary_gradient(spec.mesh, u)
    return EigenSolution(
        p=p,
        beta=beta,
        lambda1=float(lam),
        u=u,
        normalization=float(asm.norm_p(u, p)),
        mesh=spec.mesh,
        boundary_theta=spec.mesh.boundary_thetas.copy(),
        boundary_u=u[spec.mesh.boundary_vertices].copy(),
        boundary_grad=grad,
        boundary_du_dn=du_dn,
        boundary_grad_norm=np.hypot(grad[:, 0], grad[:, 1]),
        diagnostics={
            "iterations": int(total_iters),
            "residual": float(dual),
            "rayleigh": float(lam),
            "guard_count": int(guards),
            "flagged_recovery": int(flagged),
        },
    )


def rayleigh(spec: ProblemSpec, u: np.ndarray) -> float:
    """Rayleigh quotient of a nodal field under the spec's (p, beta)."""
    u = np.asarray(u, dtype=float)
    if not np.any(u):
        raise ValueError("field vanishes; Rayleigh quotient undefined")
    return Assembler(spec.mesh).rayleigh(u, spec.p, spec.beta)


def residual(spec: ProblemSpec, solution: EigenSolution) -> float:
    """Dual norm of the discrete weak residual of a solution."""
    asm = Assembler(spec.mesh)
    r, _ = asm.weak_residual(solution.u, spec.p, spec.beta, solution.lambda1)
    return asm.dual_norm(r, spec.dirichlet)


def recover_boundary_gradient(mesh: Mesh, u: np.ndarray):
    """Gradient of the P1 field at boundary vertices.

    Least-squares quadratic fit over the 2-ring vertex patch around each
    boundary vertex (linear fields exact, quadratics to conditioning);
    rank-deficient patches fall back to a 1-ring linear fit and are
    counted in the returned flag total.
    """
    nv = mesh.num_vertices
    neighbors = [set() for _ in range(nv)]
    for tri in mesh.triangles:
        a, b, c = (int(x) for x in tri)
        neighbors[a].update((b, c))
        neighbors[b].update((a, c))
        neighbors[c].update((a, b))

    grads = np.empty((mesh.boundary_vertices.size, 2))
    flagged = 0
    for row, vid in enumerate(mesh.boundary_vertices):
        vid = int(vid)
        ring1 = neighbors[vid]
        patch = set(ring1)
        patch.add(vid)
        for w in ring1:
            patch.update(neighbors[w])
        ids = np.fromiter(sorted(patch), dtype=np.int64)
        rel = mesh.vertices[ids] - mesh.vertices[vid]
        scale = np.abs(rel).max()
        x, y = rel[:, 0] / scale, rel[:, 1] / scale
        A = np.column_stack([np.ones(ids.size), x, y, x * x, x * y, y * y])
        coef, _, rank, _ = np.linalg.lstsq(A, u[ids], rcond=None)
        if rank < 6:
            flagged += 1
            ids = np.fromiter(sorted(ring1 | {vid}), dtype=np.int64)
            rel = mesh.vertices[ids] - mesh.vertices[vid]
            scale = np.abs(rel).max()
            A = np.column_stack(
                [np.ones(ids.size), rel[:, 0] / scale, rel[:, 1] / scale]
            )
            coef, *_ = np.linalg.lstsq(A, u[ids], rcond=None)
        grads[row] = coef[1] / scale, coef[2] / scale

    frames = boundary_frame(mesh.curve, mesh.boundary_thetas)
    du_dn = np.sum(grads * frames.normal, axis=1)
    return grads, du_dn, flagged


def interpolate_nodal(source_mesh: Mesh, u: np.ndarray, target_mesh: Mesh) -> np.ndarray:
    """Transfer a nodal field between meshes (warm starts for FD solves)."""
    from scipy.interpolate import LinearNDInterpolator, NearestNDInterpolator

    lin = LinearNDInterpolator(source_mesh.vertices, u)
    out = lin(target_mesh.vertices)
    bad = ~np.isfinite(out)
    if np.any(bad):
        near = NearestNDInterpolator(source_mesh.vertices, u)
        out[bad] = near(target_mesh.vertices[bad])
    return out

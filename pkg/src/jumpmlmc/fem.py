"""Path-wise P1 finite elements with implicit Euler time stepping.

For one coefficient realization the pipeline is: assemble the stiffness,
advection and mass matrices on the (adapted or structured) mesh with a
one-point centroid rule for the coefficient terms, eliminate the Dirichlet
boundary, march ``(M + dt A) c_i = dt F(t_i) + M c_{i-1}`` and evaluate the
quantity of interest on the linear-in-time interpolant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _kernels, sparse_linalg
from .jump_field import (
    CoefficientSample,
    eval_a_with_regions,
    eval_b,
    locate,
    sample_jump_heights,
    sample_partition_quadrangles,
)
from .mesh import Mesh, triangulate_adapted, triangulate_uniform
from .random_field import CovarianceSpec, SampleGrid, coarsen_nested, get_embedding, sample_grf
from .streams import FIELD, JUMPS, PARTITION, RandomStream

__all__ = [
    "QoISpec",
    "DiscreteSystem",
    "Trajectory",
    "assemble",
    "interpolate_initial",
    "backward_euler",
    "evaluate_qoi",
    "mass_norm",
    "solve_path",
    "PathEvaluator",
    "PathError",
]


class PathError(RuntimeError):
    """Failure in one path-wise solve, labelled with the pipeline stage."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass(frozen=True)
class QoISpec:
    """Spatial weight plus time rule (terminal value or time integral)."""

    weight: Callable[[np.ndarray], np.ndarray]
    time_rule: str = "terminal"

    def __post_init__(self):
        if self.time_rule not in ("terminal", "time-integral"):
            raise ValueError("time_rule must be 'terminal' or 'time-integral'")


@dataclass
class DiscreteSystem:
    """Assembled matrices and load builder for one sample on one mesh."""

    mesh: Mesh
    A: sparse_linalg.SparseMatrix
    M: sparse_linalg.SparseMatrix
    free: np.ndarray
    f: Callable[[np.ndarray, float], np.ndarray]
    f_time_dependent: bool
    _areas: np.ndarray
    _centroids: np.ndarray
    _load_cache: np.ndarray | None = None

    @property
    def n_free(self) -> int:
        return self.free.shape[0]

    def load(self, t: float) -> np.ndarray:
        """Load vector ``F_j(t) = sum_K f(x_K, t) |K| / 3`` on free dofs."""
        if not self.f_time_dependent and self._load_cache is not None:
            return self._load_cache
        fvals = np.asarray(self.f(self._centroids, t), dtype=float)
        if fvals.ndim == 0:
            fvals = np.full(self._areas.shape, float(fvals))
        contrib = fvals * self._areas / 3.0
        full = np.zeros(self.mesh.n_vertices)
        np.add.at(full, self.mesh.triangles[:, 0], contrib)
        np.add.at(full, self.mesh.triangles[:, 1], contrib)
        np.add.at(full, self.mesh.triangles[:, 2], contrib)
        out = full[self.free]
        if not self.f_time_dependent:
            self._load_cache = out
        return out


@dataclass(frozen=True)
class Trajectory:
    """Backward-Euler coefficients on an equidistant time grid (free dofs).

    The continuous-in-time solution is the linear interpolant between the
    stored steps.
    """

    times: np.ndarray
    coeffs: np.ndarray  # (n+1, n_free)
    free: np.ndarray
    n_vertices: int

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    def at_time(self, t: float) -> np.ndarray:
        """Linear-in-time interpolant of the free coefficients at ``t``."""
        times = self.times
        if t <= times[0]:
            return self.coeffs[0]
        if t >= times[-1]:
            return self.coeffs[-1]
        i = int(np.searchsorted(times, t, side="right")) - 1
        w = (t - times[i]) / (times[i + 1] - times[i])
        return (1.0 - w) * self.coeffs[i] + w * self.coeffs[i + 1]

    def full_values(self, row: int | np.ndarray) -> np.ndarray:
        """Vertex values (boundary zeros re-inserted) of one stored step."""
        c = self.coeffs[row] if np.ndim(row) == 0 else row
        full = np.zeros(self.n_vertices)
        full[self.free] = c
        return full


def _coefficients_at_centroids(mesh: Mesh, coeffs, centroids: np.ndarray):
    """Per-triangle (a, b) values from a CoefficientSample or callable pair."""
    if isinstance(coeffs, CoefficientSample):
        if mesh.region_of_triangle is not None:
            a_tri = eval_a_with_regions(coeffs, centroids, mesh.region_of_triangle)
        else:
            regions = locate(coeffs.partition, centroids)
            a_tri = eval_a_with_regions(coeffs, centroids, regions)
        b_tri = eval_b(coeffs, centroids, a_vals=a_tri)
        return np.asarray(a_tri), np.asarray(b_tri)
    a_fn, b_fn = coeffs
    a_tri = np.asarray(a_fn(centroids), dtype=float)
    b_tri = np.asarray(b_fn(centroids), dtype=float)
    if a_tri.ndim == 0:
        a_tri = np.full(centroids.shape[0], float(a_tri))
    if b_tri.ndim == 0:
        b_tri = np.full(centroids.shape[0], float(b_tri))
    return a_tri, b_tri


def assemble(
    mesh: Mesh,
    coeffs,
    f: Callable[[np.ndarray, float], np.ndarray] | None = None,
    *,
    eliminate_dirichlet: bool = True,
    f_time_dependent: bool | None = None,
) -> DiscreteSystem:
    """Assemble stiffness/advection and mass matrices for one sample.

    ``coeffs`` is a :class:`CoefficientSample` or a pair of callables
    ``(a(pts), b(pts))``.  Coefficients enter through the one-point centroid
    rule; the mass matrix is the exact P1 element matrix.  With
    ``eliminate_dirichlet`` the boundary rows and columns are removed
    (homogeneous Dirichlet data).
    """
    areas = mesh.areas()
    if np.any(areas <= 0.0):
        raise ValueError("degenerate triangle in mesh")
    centroids = mesh.centroids()
    a_tri, b_tri = _coefficients_at_centroids(mesh, coeffs, centroids)
    rows, cols, stiff_vals, mass_vals = _kernels.assemble_p1(
        mesh.vertices, np.ascontiguousarray(mesh.triangles, dtype=np.intp),
        np.ascontiguousarray(a_tri), np.ascontiguousarray(b_tri))
    nv = mesh.n_vertices
    if eliminate_dirichlet:
        # drop boundary rows/columns at the triplet stage (cheaper than
        # slicing the assembled matrices)
        free = mesh.interior_vertices()
        remap = np.full(nv, -1, dtype=np.intp)
        remap[free] = np.arange(free.shape[0])
        rows = remap[rows]
        cols = remap[cols]
        keep = (rows >= 0) & (cols >= 0)
        rows, cols = rows[keep], cols[keep]
        nfree = free.shape[0]
        a_mat = sparse_linalg.from_triplets(nfree, (rows, cols, stiff_vals[keep]))
        m_mat = sparse_linalg.from_triplets(nfree, (rows, cols, mass_vals[keep]))
    else:
        free = np.arange(nv)
        a_mat = sparse_linalg.from_triplets(nv, (rows, cols, stiff_vals))
        m_mat = sparse_linalg.from_triplets(nv, (rows, cols, mass_vals))
    if f is None:
        f = lambda pts, t: np.zeros(pts.shape[0])  # noqa: E731
        ftd = False
    else:
        ftd = getattr(f, "time_dependent", True) if f_time_dependent is None else f_time_dependent
    return DiscreteSystem(
        mesh=mesh, A=a_mat, M=m_mat, free=free, f=f, f_time_dependent=ftd,
        _areas=areas, _centroids=centroids,
    )


def interpolate_initial(mesh: Mesh, u0: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Nodal interpolation of the initial datum on the free dofs."""
    free = mesh.interior_vertices()
    vals = np.asarray(u0(mesh.vertices[free]), dtype=float)
    if vals.ndim == 0:
        vals = np.full(free.shape, float(vals))
    return vals


def backward_euler(
    system: DiscreteSystem,
    u0_coeffs: np.ndarray,
    T: float,
    dt: float,
    solver: str = "lu",
) -> Trajectory:
    """March ``(M + dt A) c_i = dt F(t_i) + M c_{i-1}`` to the final time."""
    n = round(T / dt)
    if n < 1 or abs(n * dt - T) > 1e-12 * max(1.0, abs(T)):
        raise ValueError(f"dt={dt} does not divide T={T}")
    b_mat = sparse_linalg.SparseMatrix((system.M.csr + dt * system.A.csr).tocsr())
    try:
        fact = sparse_linalg.factorize(b_mat, method=solver)
    except sparse_linalg.SolveError as exc:
        raise PathError("factorize", str(exc)) from exc
    coeffs = np.empty((n + 1, system.n_free))
    coeffs[0] = u0_coeffs
    times = dt * np.arange(n + 1)
    c = u0_coeffs
    m_csr = system.M.csr
    for i in range(1, n + 1):
        rhs = dt * system.load(times[i]) + m_csr @ c
        try:
            # residual contract checked opportunistically (final step)
            c = fact.solve(rhs, check_residual=(i == n))
        except sparse_linalg.SolveError as exc:
            raise PathError("time-step", f"step {i}: {exc}") from exc
        coeffs[i] = c
    return Trajectory(times=times, coeffs=coeffs, free=system.free,
                      n_vertices=system.mesh.n_vertices)


def _spatial_functional(mesh: Mesh, w_tri: np.ndarray, areas: np.ndarray,
                        full_vals: np.ndarray) -> float:
    u_tri = full_vals[mesh.triangles].mean(axis=1)
    return float(np.dot(w_tri * areas, u_tri))


def evaluate_qoi(traj: Trajectory, mesh: Mesh, spec: QoISpec) -> float:
    """Linear QoI of the trajectory via the per-triangle centroid rule.

    Terminal rule: ``∫ u(x, T) w(x) dx``.  Time-integral rule: trapezoidal
    rule in time of the same spatial functional, which is exact for the
    linear-in-time interpolant.
    """
    areas = mesh.areas()
    w_tri = np.asarray(spec.weight(mesh.centroids()), dtype=float)
    if w_tri.ndim == 0:
        w_tri = np.full(areas.shape, float(w_tri))
    if spec.time_rule == "terminal":
        return _spatial_functional(mesh, w_tri, areas, traj.full_values(-1))
    vals = np.array([
        _spatial_functional(mesh, w_tri, areas, traj.full_values(i))
        for i in range(len(traj.times))
    ])
    return float(np.trapezoid(vals, traj.times))


def mass_norm(mesh: Mesh, vertex_values: np.ndarray) -> float:
    """L2(D) norm of the P1 function with the given vertex values."""
    system = assemble(mesh, ((lambda p: np.ones(p.shape[0])), (lambda p: np.zeros(p.shape[0]))),
                      eliminate_dirichlet=False)
    return math.sqrt(float(vertex_values @ (system.M.csr @ vertex_values)))


def snap_dt(T: float, dt_target: float) -> float:
    """Largest dt of the form T/n that does not exceed the target."""
    n = max(1, math.ceil(T / dt_target - 1e-9))
    return T / n


# ---------------------------------------------------------------------------
# path-wise pipeline


class PathEvaluator:
    """Draws one coefficient realization and evaluates the QoI per level.

    ``levels`` is the per-level approximation table ``(h_bar, eps, dt)``.
    A realization is sampled at the finest requested field lattice and
    evaluated at coarser levels through nested restriction, which is what
    couples the level pairs of the multilevel estimators.
    """

    def __init__(self, problem, levels: Sequence[tuple[float, float, float]], method: str):
        if method not in ("adapted", "nonadapted"):
            raise ValueError(f"unknown method {method!r}")
        self.problem = problem
        self.levels = [tuple(float(v) for v in lv) for lv in levels]
        self.method = method
        self._uniform_meshes: dict[int, Mesh] = {}
        if method == "nonadapted":
            # deterministic grids are built once, before any sampling
            for ell, (h_bar, _, _) in enumerate(self.levels):
                self._uniform_meshes[ell] = triangulate_uniform(h_bar)

    # pickling support for process pools: meshes are rebuilt lazily
    def __getstate__(self):
        return {"problem": self.problem, "levels": self.levels, "method": self.method}

    def __setstate__(self, state):
        self.__init__(state["problem"], state["levels"], state["method"])

    def _field_grid(self, eps: float, level_tag: int) -> SampleGrid:
        return SampleGrid.from_spacing(eps, level_tag=level_tag)

    def evaluate(self, level_indices: Sequence[int], stream: RandomStream) -> list[float]:
        """QoI values for one shared realization at the requested levels."""
        prob = self.problem
        order = sorted(set(int(ell) for ell in level_indices), reverse=True)
        if order[0] >= len(self.levels) or order[-1] < 0:
            raise ValueError("requested level outside the schedule")
        partition = sample_partition_quadrangles(stream.child(PARTITION))
        jumps = sample_jump_heights(partition, stream.child(JUMPS), laws=prob.jump_laws)
        spec = CovarianceSpec(nu=prob.covariance.nu, sigma2=prob.covariance.sigma2,
                              chi=prob.covariance.chi)
        fine_eps = self.levels[order[0]][1]
        grid = self._field_grid(fine_eps, level_tag=order[0])
        embedding = get_embedding(grid, spec)
        field = sample_grf(embedding, stream.child(FIELD))
        out: dict[int, float] = {}
        for ell in order:
            h_bar, eps, dt_target = self.levels[ell]
            target_m = SampleGrid.from_spacing(eps, level_tag=ell).m
            while field.grid.m > target_m:
                field = coarsen_nested(field)
            if field.grid.m != target_m:
                raise PathError("field", f"lattice m={field.grid.m} not restrictable to {target_m}")
            sample = CoefficientSample(
                field=field, partition=partition, jumps=jumps,
                a_bar=prob.a_bar_fn(), phi=prob.phi, b_map=prob.b_map(),
            )
            try:
                if self.method == "adapted":
                    msh = triangulate_adapted(partition, h_bar)
                else:
                    msh = self._uniform_meshes.get(ell)
                    if msh is None:
                        msh = triangulate_uniform(h_bar)
                        self._uniform_meshes[ell] = msh
            except Exception as exc:
                raise PathError("mesh", str(exc)) from exc
            try:
                system = assemble(msh, sample, prob.f_fn())
            except Exception as exc:
                raise PathError("assemble", str(exc)) from exc
            u0 = interpolate_initial(msh, prob.u0_fn())
            dt = snap_dt(prob.T, dt_target)
            traj = backward_euler(system, u0, prob.T, dt, solver=prob.solver)
            out[ell] = evaluate_qoi(traj, msh, prob.qoi_spec())
        return [out[int(ell)] for ell in level_indices]


def solve_path(level_params: tuple[float, float, float], method: str,
               seeds: RandomStream, problem) -> float:
    """One QoI sample at one level (field + partition + jumps -> mesh ->
    assemble -> backward Euler -> QoI); deterministic given the stream."""
    evaluator = PathEvaluator(problem, [level_params], method)
    return evaluator.evaluate([0], seeds)[0]

"""Single-layer boundary-element solver for the exterior (or cavity)
Laplace Neumann problems, and the added-mass Gram matrix built from the
basis potentials.

Discretization.  Collocation points sit on the true surfaces (spherical
patch quadrature pushed through the shape map), with exact patch weights.
The double-layer matrix uses the exact flat-panel integral, which for a
constant density is the panel's signed solid angle; its own-surface
diagonal is closed through the Gauss identity (row sum +1/2 on a bubble,
-1/2 on a cavity wall), so the constant-density mode is reproduced
exactly.  The adjoint double-layer operator K' with kernel d/dn(x) G(x,y),
G = -1/(4 pi |x-y|), is discretized through its adjointness with respect
to the weighted surface inner product, K'_ij = w_j K_ji / w_i.  The
single-layer matrix uses the exact flat-panel integral (edge logs plus
solid angle) scaled by the patch/flat measure ratio; the self term is the
analytic flat-triangle formula.

The exterior Neumann condition, with all normals pointing into the fluid,
becomes the second-kind collocation system

    (1/2 I + K') q = g,

whose solution for the unit-sphere monopole (g = 1) is the exact constant
density q = 1 with boundary potential -1.  In a bounded cavity the system
is structurally rank-deficient by one (the equilibrium density); the data
is shifted to exact discrete compatibility before the solve, which keeps
the LU solution's spurious component invisible to all boundary
functionals.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (CompatibilityError, DiscretizationError,
                     IllPosedProblemError)
from .shapes import (Configuration, config_from_params, normal_velocity,
                     pack_params, surface_mesh, tangents_from_vector,
                     wall_mesh)

# relative FD step for the added-mass parameter Jacobian
JACOBIAN_FD_STEP = 1e-4
# relative net-flux threshold for the cavity compatibility check
FLUX_TOLERANCE = 1e-8
_ROW_BLOCK = 2048


def thread_count() -> int:
    """Worker cap from BUBBLEDYN_THREADS (default sequential).  Jacobian
    columns are independent and evaluated on a thread pool when the cap
    allows; the heavy kernels (BLAS, LAPACK, ufuncs) release the GIL."""
    try:
        return max(1, int(os.environ.get("BUBBLEDYN_THREADS", "1")))
    except ValueError:
        return 1


def _map_workers(fn, items):
    """Map preserving order, threaded when BUBBLEDYN_THREADS > 1."""
    n = thread_count()
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# geometry bundle and panel integrals


@dataclass(frozen=True)
class PanelGeometry:
    """Concatenated panel data for one configuration's surfaces."""

    meshes: tuple
    points: np.ndarray        # (N, 3) collocation points on the true surfaces
    normals: np.ndarray       # (N, 3) surface normals, into the fluid
    weights: np.ndarray       # (N,) patch quadrature weights
    corners: tuple            # (p0, p1, p2), each (N, 3)
    lift: np.ndarray          # patch weight / flat triangle area
    offsets: np.ndarray       # surface block offsets, len(meshes) + 1
    closures: np.ndarray      # per-surface Gauss row-sum values
    bounded: bool

    @property
    def n_panels(self) -> int:
        return len(self.weights)

    def block(self, k) -> slice:
        return slice(self.offsets[k], self.offsets[k + 1])


def panel_geometry(meshes) -> PanelGeometry:
    meshes = tuple(meshes)
    pts = np.concatenate([m.quad_points for m in meshes])
    nrm = np.concatenate([m.quad_normals for m in meshes])
    w = np.concatenate([m.quad_weights for m in meshes])
    corners = [np.concatenate(cs) for cs in zip(*(m.triangle_corners() for m in meshes))]
    flat_area = np.concatenate([m.area for m in meshes])
    offsets = np.cumsum([0] + [m.n_panels for m in meshes])
    closures = np.array([m.closure for m in meshes])
    return PanelGeometry(meshes=meshes, points=pts, normals=nrm, weights=w,
                         corners=tuple(corners), lift=w / flat_area,
                         offsets=offsets, closures=closures,
                         bounded=any(m.closure < 0 for m in meshes))


def _panel_blocks(x, geom: PanelGeometry, want_single, want_double, want_grad=False):
    """Exact flat-panel integrals from points ``x`` over all panels.

    Returns (S, K, grad) where S holds integrals of G = -1/(4 pi |x-y|)
    (lifted to the patch measure), K integrals of the double-layer kernel
    d/dn(y) G (the signed solid angle / 4 pi, lifted), and grad the
    x-gradient of the single-layer entries.  Unwanted outputs are None.
    """
    p0, p1, p2 = geom.corners
    x = np.asarray(x, dtype=float)
    M, N = len(x), geom.n_panels
    xx = np.einsum('mk,mk->m', x, x)[:, None]

    def dots(v):
        return x @ v.T

    xv0, xv1, xv2 = dots(p0), dots(p1), dots(p2)
    l0 = np.sqrt(np.maximum(xx - 2 * xv0 + np.einsum('nk,nk->n', p0, p0)[None], 0.0))
    l1 = np.sqrt(np.maximum(xx - 2 * xv1 + np.einsum('nk,nk->n', p1, p1)[None], 0.0))
    l2 = np.sqrt(np.maximum(xx - 2 * xv2 + np.einsum('nk,nk->n', p2, p2)[None], 0.0))

    # signed solid angle (van Oosterom-Strackee, expanded so that only
    # point-panel GEMMs appear)
    cross12 = np.cross(p1 - p0, p2 - p0)
    detv = np.einsum('nk,nk->n', p0, np.cross(p1, p2))
    num = detv[None] - x @ (np.cross(p1, p2) + np.cross(p2, p0) + np.cross(p0, p1)).T
    d01 = np.einsum('nk,nk->n', p0, p1)[None] - xv0 - xv1 + xx
    d12 = np.einsum('nk,nk->n', p1, p2)[None] - xv1 - xv2 + xx
    d20 = np.einsum('nk,nk->n', p2, p0)[None] - xv2 - xv0 + xx
    den = l0 * l1 * l2 + d01 * l2 + d12 * l0 + d20 * l1
    omega = 2.0 * np.arctan2(num, den)

    K = omega * (geom.lift[None] / (4.0 * np.pi)) if want_double else None

    S = grad = None
    if want_single or want_grad:
        nh = cross12 / np.linalg.norm(cross12, axis=1)[:, None]
        I = np.zeros((M, N))
        if want_grad:
            grad = omega[:, :, None] * nh[None]
        for (a, b, la, lb) in ((p0, p1, l0, l1), (p1, p2, l1, l2), (p2, p0, l2, l0)):
            e = b - a
            le = np.linalg.norm(e, axis=1)
            eh = e / le[:, None]
            # stable symmetric form of the edge log integral of 1/|x-y|
            ssum = la + lb
            L = np.log((ssum + le[None]) / np.maximum(ssum - le[None], 1e-300))
            mhat = np.cross(eh, nh)
            d = x @ mhat.T - np.einsum('nk,nk->n', a, mhat)[None]
            I -= d * L
            if want_grad:
                grad -= L[:, :, None] * mhat[None]
        h = x @ nh.T - np.einsum('nk,nk->n', p0, nh)[None]
        I += h * omega
        if want_single:
            S = I * (-geom.lift[None] / (4.0 * np.pi))
        if want_grad:
            grad = grad * (-geom.lift[:, None] / (4.0 * np.pi))[None, :, :]
    return S, K, grad


def _blocked(x, geom, **kw):
    """Row-blocked wrapper around _panel_blocks to bound peak memory."""
    M = len(x)
    if M <= _ROW_BLOCK:
        return _panel_blocks(x, geom, **kw)
    outs = [_panel_blocks(x[i:i + _ROW_BLOCK], geom, **kw)
            for i in range(0, M, _ROW_BLOCK)]
    return tuple(None if parts[0] is None else np.concatenate(parts)
                 for parts in zip(*outs))


def _collocation_matrix(geom: PanelGeometry):
    """System matrix 1/2 I + K' and the single-layer matrix S.

    Own-surface double-layer blocks use the point kernel (whose weighted
    transpose collapses to the plain adjoint kernel and preserves the
    sphere's constant-density mode exactly); cross-surface blocks use the
    exact flat-panel integrals, robust for close bubble pairs.
    """
    S, K, _ = _blocked(geom.points, geom, want_single=True, want_double=True)
    for k in range(len(geom.meshes)):
        blk = geom.block(k)
        pts = geom.points[blk]
        nrm = geom.normals[blk]
        dx = pts[:, None, :] - pts[None, :, :]
        r = np.linalg.norm(dx, axis=2)
        np.fill_diagonal(r, 1.0)
        sub = np.einsum('ijk,jk->ij', -dx, nrm) / (4.0 * np.pi * r ** 3)
        sub *= geom.weights[blk][None, :]
        np.fill_diagonal(sub, 0.0)
        np.fill_diagonal(sub, geom.closures[k] - sub.sum(axis=1))
        K[blk, blk] = sub
    Kp = K.T * (geom.weights[None, :] / geom.weights[:, None])
    A = Kp
    A[np.diag_indices_from(A)] += 0.5
    return A, S


# ---------------------------------------------------------------------------
# problems and solutions


@dataclass(frozen=True)
class NeumannProblem:
    """Neumann data (normal velocity at the collocation points) on the
    union of bubble surfaces plus, in cavity mode, the wall (data 0)."""

    meshes: tuple
    boundary_data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "meshes", tuple(self.meshes))
        g = np.asarray(self.boundary_data, dtype=float)
        object.__setattr__(self, "boundary_data", g)
        n = sum(m.n_panels for m in self.meshes)
        if g.shape != (n,):
            raise ValueError(f"boundary data length {g.shape} != panel count {n}")


@dataclass(frozen=True)
class PotentialSolution:
    """Single-layer density with cached boundary values of the potential."""

    density: np.ndarray
    meshes: tuple
    boundary_potential: np.ndarray
    boundary_data: np.ndarray
    geometry: PanelGeometry
    condition: float | None = None


class _Workspace:
    """Factorized collocation system for one configuration, reused across
    right-hand sides (basis potentials, Jacobian columns, diagnostics)."""

    def __init__(self, meshes):
        self.geom = panel_geometry(meshes)
        self.A, self.S = _collocation_matrix(self.geom)
        self.anorm = np.abs(self.A).sum(axis=0).max()
        try:
            self.lu = sla.lu_factor(self.A, check_finite=False)
        except (ValueError, sla.LinAlgError) as exc:
            raise IllPosedProblemError(f"collocation matrix factorization failed: {exc}")

    def rcond(self) -> float:
        gecon = sla.get_lapack_funcs(("gecon",), (self.A,))[0]
        rc, _ = gecon(self.lu[0], self.anorm, norm="1")
        return float(rc)

    def solve(self, g):
        """Solve for one or more data vectors (columns of g)."""
        geom = self.geom
        g = np.asarray(g, dtype=float)
        rhs = g.reshape(geom.n_panels, -1)
        if geom.bounded:
            # structural one-dim kernel: data must be (and is made exactly)
            # flux free in the discrete weighted sense
            flux = geom.weights @ rhs
            scale = np.abs(rhs).max(axis=0) * geom.weights.sum() + 1e-300
            bad = np.abs(flux) > FLUX_TOLERANCE * scale
            if np.any(bad):
                raise CompatibilityError(
                    f"cavity boundary data has net flux {flux[bad][0]:.3e}; "
                    "volume compatibility violated")
            # constant shift to exact discrete compatibility (O(h^2) data
            # perturbation, keeps the near-null mode out of the LU solution)
            rhs = rhs - flux[None, :] / geom.weights.sum()
        q = sla.lu_solve(self.lu, rhs, check_finite=False)
        if not np.all(np.isfinite(q)):
            raise IllPosedProblemError("collocation solve produced non-finite density",
                                       condition=1.0 / max(self.rcond(), 1e-300))
        if not geom.bounded:
            rc = self.rcond()
            if rc < 1e-13:
                raise IllPosedProblemError(
                    f"collocation matrix numerically singular (rcond={rc:.2e})",
                    condition=1.0 / max(rc, 1e-300))
        phi = self.S @ q
        return (q.reshape(g.shape), phi.reshape(g.shape))


def solve_neumann(problem: NeumannProblem) -> PotentialSolution:
    """Solve the collocation system for one data vector."""
    ws = _Workspace(problem.meshes)
    q, phi = ws.solve(problem.boundary_data)
    return PotentialSolution(density=q, meshes=problem.meshes,
                             boundary_potential=phi,
                             boundary_data=problem.boundary_data,
                             geometry=ws.geom, condition=1.0 / max(ws.rcond(), 1e-300))


def evaluate(solution: PotentialSolution, points):
    """Potential and gradient at field points by direct kernel summation.

    Accuracy degrades within about one panel diameter of a surface; use
    boundary_potential / surface_gradient for on-surface values.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    geom = solution.geometry
    qw = solution.density * geom.weights
    dx = pts[:, None, :] - geom.points[None, :, :]
    r = np.linalg.norm(dx, axis=2)
    phi = (-1.0 / (4.0 * np.pi)) * (qw / r).sum(axis=1)
    grad = (dx / (4.0 * np.pi * r ** 3)[:, :, None] * qw[None, :, None]).sum(axis=1)
    return phi, grad


def boundary_potential_at(solution: PotentialSolution, points):
    """Potential at points on or near the surfaces via exact panel integrals."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    S, _, _ = _blocked(pts, solution.geometry, want_single=True, want_double=False)
    return S @ solution.density


def surface_gradient(solution: PotentialSolution, impose_data: bool = True):
    """Fluid-side gradient of the potential at the collocation points.

    Exact flat-panel gradients capture the single-layer jump because the
    curved collocation points sit on the fluid side of the panel planes.
    With ``impose_data`` the normal component is replaced by the imposed
    Neumann data, which it approximates, keeping the boundary condition
    exact while the tangential part comes from the representation.
    """
    geom = solution.geometry
    _, _, grad = _blocked(geom.points, geom, want_single=False,
                          want_double=False, want_grad=True)
    g = np.einsum('mnk,n->mk', grad, solution.density)
    if not impose_data:
        return g
    normal_part = np.einsum('mk,mk->m', g, geom.normals)
    return g + (solution.boundary_data - normal_part)[:, None] * geom.normals


# ---------------------------------------------------------------------------
# basis potentials and added mass


def configuration_meshes(config: Configuration, level: int, wall_level=None):
    """Bubble meshes plus the wall mesh in cavity mode."""
    meshes = [surface_mesh(b, level) for b in config.bubbles]
    if config.bounded:
        meshes.append(wall_mesh(config.domain, level if wall_level is None else wall_level))
    return tuple(meshes)


def _direction_data(config, meshes, directions):
    """Boundary data matrix (N, n_dirs) for packed tangent directions."""
    nb = config.n_bubbles
    n = sum(m.n_panels for m in meshes)
    G = np.zeros((n, len(directions)))
    offsets = np.cumsum([0] + [m.n_panels for m in meshes])
    for j, d in enumerate(directions):
        tans = tangents_from_vector(config, d)
        for k in range(nb):
            mesh = meshes[k]
            G[offsets[k]:offsets[k + 1], j] = normal_velocity(
                config.bubbles[k], tans[k], mesh.quad_points, mesh.quad_normals)
    return G


def canonical_directions(config: Configuration):
    return list(np.eye(config.dim))


def basis_potentials(config: Configuration, level: int, directions=None,
                     wall_level=None):
    """One PotentialSolution per tangent direction (canonical by default).

    In cavity mode the caller must pass directions spanning the constraint
    hyperplane; incompatible directions raise CompatibilityError.
    """
    meshes = configuration_meshes(config, level, wall_level)
    if directions is None:
        directions = canonical_directions(config)
    ws = _Workspace(meshes)
    G = _direction_data(config, meshes, directions)
    Q, Phi = ws.solve(G)
    return [PotentialSolution(density=Q[:, j], meshes=meshes,
                              boundary_potential=Phi[:, j], boundary_data=G[:, j],
                              geometry=ws.geom)
            for j in range(len(directions))]


@dataclass(frozen=True)
class AddedMassMatrix:
    """Gram matrix of the basis potential gradients, scaled by the liquid
    density.  ``asymmetry`` is the relative reciprocity defect before
    symmetrization; ``eigenvalues`` the spectrum after."""

    matrix: np.ndarray
    directions: tuple
    liquid_density: float
    asymmetry: float
    eigenvalues: np.ndarray
    collocation_condition: float | None = None

    @property
    def condition(self) -> float:
        return float(self.eigenvalues[-1] / self.eigenvalues[0])


def _gram(ws, config, meshes, directions, liquid_density, want_condition=False):
    G = _direction_data(config, meshes, directions)
    _, Phi = ws.solve(G)
    raw = -liquid_density * (Phi.T * ws.geom.weights[None, :]) @ G
    scale = np.abs(raw).max() + 1e-300
    asym = float(np.abs(raw - raw.T).max() / scale)
    A = 0.5 * (raw + raw.T)
    eig = np.linalg.eigvalsh(A)
    if eig[0] <= 0.0:
        raise DiscretizationError(
            f"added-mass matrix not positive definite at level {meshes[0].level}; "
            f"eigenvalues {eig}", eigenvalues=eig)
    cond = 1.0 / max(ws.rcond(), 1e-300) if want_condition else None
    return AddedMassMatrix(matrix=A, directions=tuple(map(np.asarray, directions)),
                           liquid_density=liquid_density, asymmetry=asym,
                           eigenvalues=eig, collocation_condition=cond)


def added_mass(config: Configuration, level: int, liquid_density: float = 1.0,
               directions=None, wall_level=None,
               want_condition: bool = False) -> AddedMassMatrix:
    """Added-mass matrix A_ij = -rho * sum(phi^i g_j w) over the bubble
    panels (Green reduction of the volume Gram integral), symmetrized."""
    meshes = configuration_meshes(config, level, wall_level)
    if directions is None:
        directions = canonical_directions(config)
    ws = _Workspace(meshes)
    return _gram(ws, config, meshes, directions, liquid_density, want_condition)


def _single_unbounded_bubble(config: Configuration) -> bool:
    return config.n_bubbles == 1 and not config.bounded


def added_mass_jacobian(config: Configuration, level: int,
                        liquid_density: float = 1.0, step: float = JACOBIAN_FD_STEP,
                        wall_level=None) -> np.ndarray:
    """Central-difference parameter Jacobian dA/dq, shape (p, p, p) with
    the first index the differentiated parameter.

    Center derivatives of a single unbounded bubble vanish identically
    (the discretization is exactly translation invariant) and are skipped.
    Steps that leave the admissible set fall back to one-sided differences
    with a warning.
    """
    from .shapes import check_admissible  # local import to keep module load light

    q0 = pack_params(config)
    p = len(q0)
    dA = np.zeros((p, p, p))
    skip_centers = _single_unbounded_bubble(config)

    def column(k):
        h = step * (1.0 + abs(q0[k]))
        sides = []
        for sgn in (+1.0, -1.0):
            q = q0.copy()
            q[k] += sgn * h
            try:
                cfg = config_from_params(config, q)
            except Exception:
                cfg = None
            if cfg is not None and not check_admissible(cfg, min(level, 2)).ok:
                cfg = None
            sides.append(cfg)
        if sides[0] is None and sides[1] is None:
            raise DiscretizationError(
                f"cannot take FD step in parameter {k}: both sides inadmissible")
        if sides[0] is None or sides[1] is None:
            warnings.warn(f"one-sided difference for added-mass Jacobian entry {k}: "
                          "central step leaves the admissible set")
            good = 0 if sides[1] is None else 1
            sgn = +1.0 if good == 0 else -1.0
            A_side = added_mass(sides[good], level, liquid_density,
                                wall_level=wall_level).matrix
            A_base = added_mass(config, level, liquid_density,
                                wall_level=wall_level).matrix
            return sgn * (A_side - A_base) / h
        Ap = added_mass(sides[0], level, liquid_density, wall_level=wall_level).matrix
        Am = added_mass(sides[1], level, liquid_density, wall_level=wall_level).matrix
        return (Ap - Am) / (2.0 * h)

    params = [k for k in range(p) if not (skip_centers and k < 3)]
    for k, col in zip(params, _map_workers(column, params)):
        dA[k] = col
    return dA

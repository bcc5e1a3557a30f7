"""Euler-Lagrange dynamics on the bubble shape parameters.

The reduced system is the Lagrangian flow of L = 1/2 q' A(q) q' - U(q),
with A the added-mass Gram matrix from the potential module and U the gas
plus far-field pressure plus surface energy.  In a bounded cavity the
motion is constrained to the hyperplane of volume-preserving velocities;
the equations are solved in an orthonormal basis of that hyperplane
(coordinate projection, no multipliers or stabilization), with the
acceleration-level constraint satisfied exactly.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import gas as gas_mod
from . import potential as pot
from .errors import (BubbleDynError, CompatibilityError, DegenerateShapeError,
                     DiscretizationError, UnsupportedConfigurationError)
from .reference import minnaert_frequency
from .shapes import (Configuration, EllipsoidParams, SphereParams,
                     check_admissible, config_from_params, pack_params,
                     pack_tangents, tangents_from_vector, volume_gradient,
                     volume_hessian)

# velocity-constraint tolerance for cavity initial data (relative)
CONSTRAINT_TOLERANCE = 1e-9
# shape sizes below this fraction of their initial value stop the run
DEGENERACY_FRACTION = 0.02


@dataclass(frozen=True)
class State:
    config: Configuration
    velocity: tuple          # TangentVector per bubble
    time: float = 0.0

    def packed(self):
        return pack_params(self.config), pack_tangents(self.velocity)


@dataclass(frozen=True)
class ConstraintBasis:
    """Orthonormal basis of the admissible velocity subspace.

    Unbounded: the identity.  Cavity: the kernel of the volume-flux
    covector l(mdot) = sum_k dvol_k . mdot_k, built from the Householder
    reflection mapping l/|l| to -e_p (smooth on the admissible set because
    the last covector slot is always positive)."""

    matrix: np.ndarray          # (p, n_free)
    flux_covector: np.ndarray | None

    @property
    def constrained(self) -> bool:
        return self.flux_covector is not None

    @property
    def n_free(self) -> int:
        return self.matrix.shape[1]

    def directions(self):
        return [np.ascontiguousarray(c) for c in self.matrix.T]


def constraint_basis(config: Configuration) -> ConstraintBasis:
    p = config.dim
    if not config.bounded:
        return ConstraintBasis(matrix=np.eye(p), flux_covector=None)
    ell = volume_gradient(config)
    norm = np.linalg.norm(ell)
    if norm < 1e-14:
        raise UnsupportedConfigurationError(
            "volume-flux covector vanishes; constrained dynamics undefined")
    u = ell / norm
    v = u.copy()
    v[-1] += 1.0
    H = np.eye(p) - 2.0 * np.outer(v, v) / (v @ v)
    return ConstraintBasis(matrix=H[:, :p - 1], flux_covector=ell)


# ---------------------------------------------------------------------------
# scenario-facing kinetic assembly


def _extended_added_mass(scenario, config, want_condition=False):
    """Constraint basis, reduced Gram matrix, and its ambient extension."""
    basis = constraint_basis(config)
    A_red = pot.added_mass(config, scenario.mesh_level, scenario.liquid_density,
                           directions=basis.directions(),
                           wall_level=scenario.wall_level,
                           want_condition=want_condition)
    B = basis.matrix
    A_hat = B @ A_red.matrix @ B.T
    return basis, A_red, A_hat


def _ahat_jacobian(scenario, config):
    """Central-difference Jacobian of the extended kinetic matrix.

    Unbounded mode delegates to the canonical added-mass Jacobian; cavity
    mode differentiates the basis-extended matrix so the smooth Householder
    construction is part of the differentiated map."""
    if not config.bounded:
        return pot.added_mass_jacobian(config, scenario.mesh_level,
                                       scenario.liquid_density,
                                       step=scenario.fd_step)
    q0 = pack_params(config)
    p = len(q0)
    dA = np.zeros((p, p, p))
    for k in range(p):
        h = scenario.fd_step * (1.0 + abs(q0[k]))
        mats = []
        for sgn in (+1.0, -1.0):
            q = q0.copy()
            q[k] += sgn * h
            try:
                cfg = config_from_params(config, q)
            except DegenerateShapeError:
                cfg = None
            if cfg is not None and not check_admissible(cfg, min(scenario.mesh_level, 2)).ok:
                cfg = None
            mats.append(None if cfg is None
                        else _extended_added_mass(scenario, cfg)[2])
        if mats[0] is None and mats[1] is None:
            raise DiscretizationError(
                f"cannot take FD step in parameter {k}: both sides inadmissible")
        if mats[0] is None or mats[1] is None:
            warnings.warn(f"one-sided difference for kinetic Jacobian entry {k}")
            base = _extended_added_mass(scenario, config)[2]
            good = 0 if mats[1] is None else 1
            sgn = +1.0 if good == 0 else -1.0
            dA[k] = sgn * (mats[good] - base) / h
        else:
            dA[k] = (mats[0] - mats[1]) / (2.0 * h)
    return dA


def _acceleration(scenario, config, qdot, want_aux=False):
    """Flat acceleration vector from the (constrained) Euler-Lagrange
    equations; optionally returns the assembled operators."""
    basis, A_red, A_hat = _extended_added_mass(scenario, config)
    dA = _ahat_jacobian(scenario, config)
    pe = gas_mod.potential_energy([b.gas for b in scenario.bubbles],
                                  scenario.p_infinity, scenario.surface_tension,
                                  config)
    coriolis = (np.einsum('kij,k,j->i', dA, qdot, qdot)
                - 0.5 * np.einsum('ijk,j,k->i', dA, qdot, qdot))
    force = -coriolis - pe.dU_dm
    if not basis.constrained:
        qddot = np.linalg.solve(A_hat, force)
    else:
        grad = basis.flux_covector
        hess = volume_hessian(config)
        qdd0 = -(qdot @ hess @ qdot) / (grad @ grad) * grad
        B = basis.matrix
        rhs = B.T @ force - A_red.matrix @ (B.T @ qdd0)
        a = np.linalg.solve(A_red.matrix, rhs)
        qddot = B @ a + qdd0
    if want_aux:
        return qddot, {"basis": basis, "A_red": A_red, "A_hat": A_hat,
                       "potential_energy": pe, "jacobian": dA}
    return qddot


def eom_rhs(scenario, state: State):
    """Acceleration tangent vector per bubble for the given state."""
    q, qd = state.packed()
    config = config_from_params(state.config, q)
    report = check_admissible(config, min(scenario.mesh_level, 2))
    if not report.ok:
        raise BubbleDynError(f"state not admissible: {report.violations}")
    if scenario.domain_is_bounded:
        ell = volume_gradient(config)
        scale = np.linalg.norm(ell) * np.linalg.norm(qd) + 1e-300
        if abs(ell @ qd) > max(CONSTRAINT_TOLERANCE * scale, 1e-13):
            raise CompatibilityError("velocity violates the cavity volume constraint")
    qdd = _acceleration(scenario, config, qd)
    return tangents_from_vector(config, qdd)


# ---------------------------------------------------------------------------
# diagnostics


def _bubble_size(shape) -> float:
    if isinstance(shape, SphereParams):
        return shape.radius
    return float(shape.semi_axes()[0])


def kinetic_energy(scenario, config, qdot) -> float:
    _, _, A_hat = _extended_added_mass(scenario, config)
    return 0.5 * float(qdot @ A_hat @ qdot)


def energies(scenario, state: State):
    """(kinetic, potential, total) of a state, at the scenario mesh level."""
    q, qd = state.packed()
    config = config_from_params(state.config, q)
    ke = kinetic_energy(scenario, config, qd)
    pe = gas_mod.potential_energy([b.gas for b in scenario.bubbles],
                                  scenario.p_infinity, scenario.surface_tension,
                                  config).U
    return ke, pe, ke + pe


def kelvin_impulse(state: State):
    """r^3 c' for a single unbounded spherical bubble, else None."""
    config = state.config
    if config.bounded or config.n_bubbles != 1:
        return None
    shape = config.bubbles[0]
    if not isinstance(shape, SphereParams):
        return None
    return shape.radius ** 3 * np.asarray(state.velocity[0].center)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: tuple                    # State at each output time
    kinetic: np.ndarray
    potential: np.ndarray
    total_energy: np.ndarray
    impulse: np.ndarray | None       # (n, 3) for a single unbounded sphere
    boundary_residuals: np.ndarray   # NaN where not sampled
    termination: str                 # completed | collision | degenerate-shape | solver-failure
    stats: dict = field(default_factory=dict)


def characteristic_period(scenario) -> float:
    """Smallest Minnaert period over the bubbles (equilibrium radii from
    the gas laws); integration time scale estimate."""
    periods = []
    for b in scenario.bubbles:
        if scenario.p_infinity > 0:
            r_eq = gas_mod.equilibrium_radius(b.gas, scenario.p_infinity)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                om = minnaert_frequency(b.gas, scenario.p_infinity,
                                        scenario.liquid_density, r_eq)
            periods.append(2.0 * np.pi / om)
    return min(periods) if periods else 1.0


def _collision_threshold(scenario, s1, s2=None) -> float:
    size = _bubble_size(s1) if s2 is None else min(_bubble_size(s1), _bubble_size(s2))
    return scenario.collision_gap_fraction * size


def _gap_margin(scenario, config) -> float:
    """Smallest (gap - threshold) over bubble pairs and walls."""
    from .shapes import _pair_gap, _wall_gap  # internal helpers

    worst = np.inf
    nb = config.n_bubbles
    for i in range(nb):
        for j in range(i + 1, nb):
            gap = _pair_gap(config.bubbles[i], config.bubbles[j], level=1)
            worst = min(worst, gap - _collision_threshold(
                scenario, config.bubbles[i], config.bubbles[j]))
    if config.bounded:
        for i in range(nb):
            gap = _wall_gap(config.domain, config.bubbles[i], level=1)
            worst = min(worst, gap - _collision_threshold(scenario, config.bubbles[i]))
    return float(worst)


def integrate(scenario) -> Trajectory:
    """Integrate the reduced system with the adaptive Dormand-Prince 5(4)
    pair, sampling by dense interpolation at the scenario output cadence."""
    state0 = scenario.initial_state()
    config0 = state0.config
    report = check_admissible(config0, min(scenario.mesh_level, 2))
    if not report.ok:
        raise BubbleDynError(f"initial configuration inadmissible: {report.violations}")
    q0, qd0 = state0.packed()
    if scenario.domain_is_bounded:
        ell = volume_gradient(config0)
        scale = np.linalg.norm(ell) * np.linalg.norm(qd0) + 1e-300
        if abs(ell @ qd0) > max(CONSTRAINT_TOLERANCE * scale, 1e-13):
            raise CompatibilityError(
                "initial velocity violates the cavity volume constraint "
                f"(flux {ell @ qd0:.3e})")

    p = config0.dim
    sizes0 = np.array([_bubble_size(b) for b in config0.bubbles])
    n_rhs = [0]
    t_wall = time.time()

    def split(y):
        return y[:p], y[p:]

    def rhs(t, y):
        n_rhs[0] += 1
        q, qd = split(y)
        try:
            config = config_from_params(config0, q)
            qdd = _acceleration(scenario, config, qd)
        except (DegenerateShapeError, DiscretizationError, np.linalg.LinAlgError):
            # invalid trial state: poison the step so the controller backs off
            return np.full(2 * p, np.nan)
        return np.concatenate([qd, qdd])

    def ev_collision(t, y):
        q, _ = split(y)
        try:
            return _gap_margin(scenario, config_from_params(config0, q))
        except DegenerateShapeError:
            return -1.0
    ev_collision.terminal = True

    def ev_degenerate(t, y):
        q, _ = split(y)
        vals = []
        i = 0
        for b0, s0 in zip(config0.bubbles, sizes0):
            if isinstance(b0, SphereParams):
                size = q[i + 3]
                i += 4
            else:
                try:
                    size = np.linalg.eigvalsh(
                        EllipsoidParams.unpack(q[i:i + 9]).shape_matrix)[0]
                except DegenerateShapeError:
                    size = 0.0
                i += 9
            vals.append(size - DEGENERACY_FRACTION * s0)
        return min(vals)
    ev_degenerate.terminal = True

    h0 = min(1e-3 * characteristic_period(scenario), 0.1 * scenario.t_end)
    sol = solve_ivp(rhs, (0.0, scenario.t_end), np.concatenate([q0, qd0]),
                    method="RK45", rtol=scenario.rel_tol, atol=scenario.abs_tol,
                    first_step=h0, dense_output=True,
                    events=[ev_collision, ev_degenerate])

    if sol.status == 1:
        termination = "collision" if len(sol.t_events[0]) else "degenerate-shape"
    elif sol.status == 0:
        termination = "completed"
    else:
        termination = "solver-failure"

    t_final = sol.t[-1]
    n_out = max(2, int(np.floor(t_final / scenario.output_dt + 1e-9)) + 1)
    times = np.minimum(np.arange(n_out) * scenario.output_dt, t_final)
    if times[-1] < t_final - 1e-12 * max(1.0, t_final):
        times = np.append(times, t_final)

    states = []
    ke = np.empty(len(times))
    pe = np.empty(len(times))
    imp = [] if kelvin_impulse(state0) is not None else None
    residuals = np.full(len(times), np.nan)
    cadence = scenario.residual_cadence
    for k, t in enumerate(times):
        y = sol.sol(t)
        q, qd = split(y)
        config = config_from_params(config0, q)
        state = State(config=config, velocity=tangents_from_vector(config, qd),
                      time=float(t))
        states.append(state)
        ke[k], pe[k], _ = energies(scenario, state)
        if imp is not None:
            imp.append(kelvin_impulse(state))
        if cadence and k % cadence == 0:
            qdd = _acceleration(scenario, config, qd)
            residuals[k] = boundary_residual(scenario, state,
                                             tangents_from_vector(config, qdd))
    stats = {"n_steps": len(sol.t) - 1, "n_rhs": n_rhs[0],
             "wall_time": time.time() - t_wall, "t_final": float(t_final),
             "solver_message": str(sol.message)}
    return Trajectory(times=times, states=tuple(states), kinetic=ke, potential=pe,
                      total_energy=ke + pe,
                      impulse=np.array(imp) if imp is not None else None,
                      boundary_residuals=residuals, termination=termination,
                      stats=stats)


# ---------------------------------------------------------------------------
# a-posteriori interface-condition residual


def boundary_residual(scenario, state: State, acceleration, eps=None) -> float:
    """Residual of the relaxed interface condition: the pressure field
    reconstructed from the unsteady Bernoulli equation, integrated against
    the normal-velocity covector directions over each bubble, normalized
    by p_infinity times the bubble area.

    The time derivative of the potential is a centred difference along the
    trajectory direction (shape and data moved together, which carries the
    acceleration contribution), evaluated at the frozen collocation points
    through exact panel integrals.
    """
    q, qd = state.packed()
    qdd = pack_tangents(acceleration)
    config = config_from_params(state.config, q)
    rho = scenario.liquid_density
    if eps is None:
        eps = scenario.fd_step * (1.0 + np.max(np.abs(q))) / max(1.0, np.max(np.abs(qd)))

    meshes = pot.configuration_meshes(config, scenario.mesh_level,
                                      scenario.wall_level)
    bubble_meshes = meshes[:config.n_bubbles]
    geom_pts = np.concatenate([m.quad_points for m in bubble_meshes])

    def solve_at(qa, qda):
        cfg = config_from_params(config, qa)
        msh = pot.configuration_meshes(cfg, scenario.mesh_level, scenario.wall_level)
        n = sum(m.n_panels for m in msh)
        g = np.zeros(n)
        tans = tangents_from_vector(cfg, qda)
        off = 0
        from .shapes import normal_velocity
        for k in range(cfg.n_bubbles):
            m = msh[k]
            g[off:off + m.n_panels] = normal_velocity(cfg.bubbles[k], tans[k],
                                                      m.quad_points, m.quad_normals)
            off += m.n_panels
        return pot.solve_neumann(pot.NeumannProblem(meshes=msh, boundary_data=g))

    sol0 = solve_at(q, qd)
    sol_p = solve_at(q + eps * qd, qd + eps * qdd)
    sol_m = solve_at(q - eps * qd, qd - eps * qdd)
    phi_p = pot.boundary_potential_at(sol_p, geom_pts)
    phi_m = pot.boundary_potential_at(sol_m, geom_pts)
    dphi_dt = (phi_p - phi_m) / (2.0 * eps)

    nb_panels = sum(m.n_panels for m in bubble_meshes)
    grad = pot.surface_gradient(sol0)[:nb_panels]
    speed2 = np.einsum('ik,ik->i', grad, grad)
    p_minus_inf = -rho * (dphi_dt + 0.5 * speed2)

    pe = gas_mod.potential_energy([b.gas for b in scenario.bubbles],
                                  scenario.p_infinity, scenario.surface_tension,
                                  config)
    pressure_scale = max(scenario.p_infinity, np.max(np.abs(pe.bubble_pressures)))

    # canonical-direction data over the bubble panels
    G = pot._direction_data(config, bubble_meshes, pot.canonical_directions(config))
    weights = np.concatenate([m.quad_weights for m in bubble_meshes])
    offsets = np.cumsum([0] + [m.n_panels for m in bubble_meshes])
    resid = np.zeros(config.dim)
    for k, sl in enumerate(config.slices()):
        rows = slice(offsets[k], offsets[k + 1])
        p_gap = (p_minus_inf[rows]
                 - (pe.bubble_pressures[k] - scenario.p_infinity))
        area = weights[rows].sum()
        resid[sl] = (G[rows, sl].T @ (p_gap * weights[rows])) / (pressure_scale * area)
    if scenario.domain_is_bounded:
        resid = constraint_basis(config).matrix.T @ resid
    return float(np.max(np.abs(resid)))

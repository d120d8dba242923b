"""Forward-Euler heat equation demo on the unit cube with Neumann boundaries.

Exercises the full pipeline every timestep: the Gram (mass) matrix solve
and a right-hand side integrated element by element, including the basis
gradient term.  The default initial state ``1 + cos(pi x)cos(pi y)cos(pi z)``
is a Laplacian eigenmode compatible with the boundary conditions, so the
exact solution decays at the known rate ``3 pi^2`` and serves as an oracle.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg

from .assembly import GlobalGram, element_dofs
from .integrators import SumFactBuffers, integrate_element_sumfact
from .mesh import element_list, gauss_rule
from .splines import (
    KnotVector,
    basis_derivative_table,
    basis_value_table,
    eval_nonzero_basis,
    find_element,
    make_knot_vector,
)


@dataclass
class SplineField:
    """Coefficient vector over the tensor-product basis of a mesh."""

    kv: KnotVector
    coefficients: np.ndarray

    def __post_init__(self):
        n = self.kv.n_basis**3
        if self.coefficients.shape != (n,):
            raise ValueError(f"expected {n} coefficients, got {self.coefficients.shape}")
        if not np.all(np.isfinite(self.coefficients)):
            raise ValueError("coefficients must be finite")

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Point values of the field; ``points`` has shape (N, 3)."""
        kv = self.kv
        n1d = kv.n_basis
        p = kv.degree
        mu = self.coefficients
        out = np.empty(len(points))
        for i, x in enumerate(np.atleast_2d(points)):
            es = [find_element(kv, c) for c in x]
            vals = [eval_nonzero_basis(kv, e, c).values for e, c in zip(es, x)]
            acc = 0.0
            for a in range(p + 1):
                for b in range(p + 1):
                    va = vals[0][a] * vals[1][b]
                    for c in range(p + 1):
                        dof = ((es[0] + a) * n1d + es[1] + b) * n1d + es[2] + c
                        acc += mu[dof] * va * vals[2][c]
            out[i] = acc
        return out


def default_initial_state(x: np.ndarray) -> np.ndarray:
    """``1 + cos(pi x1) cos(pi x2) cos(pi x3)``, decaying at rate ``3 pi^2``."""
    x = np.atleast_2d(x)
    return 1.0 + np.cos(np.pi * x[:, 0]) * np.cos(np.pi * x[:, 1]) * np.cos(np.pi * x[:, 2])


def analytic_solution(x: np.ndarray, t: float) -> np.ndarray:
    x = np.atleast_2d(x)
    mode = np.cos(np.pi * x[:, 0]) * np.cos(np.pi * x[:, 1]) * np.cos(np.pi * x[:, 2])
    return 1.0 + np.exp(-3.0 * np.pi**2 * t) * mode


def stable_timestep(K: int) -> float:
    """Default forward-Euler timestep ``h^2 / 6`` for mesh width ``h = 1/K``."""
    return (1.0 / K) ** 2 / 6.0


class HeatProblem:
    """Mass matrix, element quadrature data and stepping for one (K, p) mesh."""

    def __init__(self, K: int, p: int, reassemble_each_step: bool = True):
        if p < 1:
            raise ValueError("the gradient term requires degree >= 1")
        self.K = K
        self.p = p
        self.kv = make_knot_vector(K, p)
        self.reassemble_each_step = reassemble_each_step
        self.elements = element_list(K)
        self.rule = gauss_rule(p, K, (0, 0, 0))
        q = p + 1
        # per-1D-element value and derivative tables at the quadrature nodes
        ref, _ = np.polynomial.legendre.leggauss(q)
        h = 1.0 / K
        self._nodes1d = [e * h + (ref + 1.0) * (h / 2.0) for e in range(K)]
        self._vals1d = [basis_value_table(self.kv, e, nds) for e, nds in enumerate(self._nodes1d)]
        self._ders1d = [basis_derivative_table(self.kv, e, nds) for e, nds in enumerate(self._nodes1d)]
        self._w = self.rule.weights[0]
        self._jac = self.rule.jacobian
        self._dofs = {alpha: element_dofs(alpha, K, p) for alpha in self.elements}
        self.gram = self._assemble_gram()
        self._basis_integrals = self.gram.matrix @ np.ones(self.gram.n_dofs)

    def _assemble_gram(self) -> GlobalGram:
        from .assembly import assemble

        buf = SumFactBuffers.allocate(self.p)
        mats = []
        for alpha in self.elements:
            rule = gauss_rule(self.p, self.K, alpha)
            mats.append((alpha, integrate_element_sumfact(alpha, self.kv, rule, buf)))
        return assemble(mats, self.K, self.p)

    # ------------------------------------------------------------------

    def l2_project(self, u0) -> SplineField:
        """L2 projection of a callable initial state onto the spline space."""
        b = np.zeros(self.gram.n_dofs)
        W = self._w
        for alpha in self.elements:
            pts = self._element_points(alpha)
            u = np.asarray(u0(pts)).reshape(len(W), len(W), len(W))
            wu = np.einsum("i,j,k,ijk->ijk", W, W, W, u) * self._jac
            bx, by, bz = (self._vals1d[alpha[d]] for d in range(3))
            local = np.einsum("ijk,ai,bj,ck->abc", wu, bx, by, bz).ravel()
            np.add.at(b, self._dofs[alpha], local)
        mu = self._solve(b, x0=None, rtol=1e-12)
        return SplineField(kv=self.kv, coefficients=mu)

    def assemble_rhs(self, field: SplineField, dt: float) -> np.ndarray:
        """Right-hand side ``int U B - dt int grad U . grad B`` by element quadrature."""
        if dt < 0:
            raise ValueError("timestep must be >= 0")
        if field.kv is not self.kv and (field.kv.degree, field.kv.elements) != (self.p, self.K):
            raise ValueError("field does not match this problem's mesh")
        mu = field.coefficients
        b = np.zeros(self.gram.n_dofs)
        W = self._w
        m = self.p + 1
        for alpha in self.elements:
            dofs = self._dofs[alpha]
            block = mu[dofs].reshape(m, m, m)
            bx, by, bz = (self._vals1d[alpha[d]] for d in range(3))
            dx, dy, dz = (self._ders1d[alpha[d]] for d in range(3))
            u = np.einsum("abc,ai,bj,ck->ijk", block, bx, by, bz)
            g1 = np.einsum("abc,ai,bj,ck->ijk", block, dx, by, bz)
            g2 = np.einsum("abc,ai,bj,ck->ijk", block, bx, dy, bz)
            g3 = np.einsum("abc,ai,bj,ck->ijk", block, bx, by, dz)
            wq = np.einsum("i,j,k->ijk", W, W, W) * self._jac
            mass = np.einsum("ijk,ai,bj,ck->abc", wq * u, bx, by, bz)
            stiff = (
                np.einsum("ijk,ai,bj,ck->abc", wq * g1, dx, by, bz)
                + np.einsum("ijk,ai,bj,ck->abc", wq * g2, bx, dy, bz)
                + np.einsum("ijk,ai,bj,ck->abc", wq * g3, bx, by, dz)
            )
            np.add.at(b, dofs, (mass - dt * stiff).ravel())
        return b

    def step(self, field: SplineField, dt: float) -> SplineField:
        """One forward-Euler step: solve ``G mu' = L`` by conjugate gradients."""
        if self.reassemble_each_step:
            self.gram = self._assemble_gram()
        L = self.assemble_rhs(field, dt)
        mu = self._solve(L, x0=field.coefficients, rtol=1e-10)
        return SplineField(kv=self.kv, coefficients=mu)

    def _solve(self, b: np.ndarray, x0, rtol: float) -> np.ndarray:
        x, info = scipy.sparse.linalg.cg(
            self.gram.matrix, b, x0=x0, rtol=rtol, atol=0.0,
            maxiter=10 * self.gram.n_dofs,
        )
        if info != 0:
            raise RuntimeError(f"conjugate gradient did not converge (info={info})")
        return x

    # ------------------------------------------------------------------

    def mass(self, field: SplineField) -> float:
        """Integral of the field over the domain."""
        return float(field.coefficients @ self._basis_integrals)

    def l2_error(self, field: SplineField, exact, points: int | None = None) -> float:
        """L2-norm distance to a callable, by per-element Gauss quadrature."""
        q = self.p + 3 if points is None else points
        ref, wref = np.polynomial.legendre.leggauss(q)
        h = 1.0 / self.K
        total = 0.0
        jac = (h / 2.0) ** 3
        mu = field.coefficients
        m = self.p + 1
        for alpha in self.elements:
            nds = [alpha[d] * h + (ref + 1.0) * (h / 2.0) for d in range(3)]
            tabs = [basis_value_table(self.kv, alpha[d], nds[d]) for d in range(3)]
            block = mu[self._dofs[alpha]].reshape(m, m, m)
            u = np.einsum("abc,ai,bj,ck->ijk", block, *tabs)
            grid = np.stack(np.meshgrid(*nds, indexing="ij"), axis=-1).reshape(-1, 3)
            diff = u.ravel() - np.asarray(exact(grid))
            wq = np.einsum("i,j,k->ijk", wref, wref, wref).ravel() * jac
            total += float(wq @ diff**2)
        return np.sqrt(total)

    def _element_points(self, alpha) -> np.ndarray:
        nds = [self._nodes1d[alpha[d]] for d in range(3)]
        return np.stack(np.meshgrid(*nds, indexing="ij"), axis=-1).reshape(-1, 3)


@dataclass(frozen=True)
class StepRecord:
    step: int
    time: float
    mass: float
    l2_error: float | None


def run_demo(
    K: int,
    p: int,
    dt: float | None = None,
    steps: int = 100,
    u0=None,
    track_error: bool = True,
    reassemble_each_step: bool = True,
) -> list[StepRecord]:
    """Run the demo and return one record per step (including step 0)."""
    problem = HeatProblem(K, p, reassemble_each_step=reassemble_each_step)
    if dt is None:
        dt = stable_timestep(K)
    use_oracle = track_error and u0 is None
    if u0 is None:
        u0 = default_initial_state
    field = problem.l2_project(u0)
    records = []
    for n in range(steps + 1):
        t = n * dt
        err = problem.l2_error(field, lambda x: analytic_solution(x, t)) if use_oracle else None
        records.append(StepRecord(step=n, time=t, mass=problem.mass(field), l2_error=err))
        if n < steps:
            field = problem.step(field, dt)
    return records

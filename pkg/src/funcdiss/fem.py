"""Multilinear finite elements for the Lame Dirichlet problem Eu = Div F.

The solver targets box domains in R^N, N in {2, 3}, with a structured grid
of identical cells and Q1 (multilinear) displacement elements.  The weak
form is

    int mu <grad u, grad v> + (lambda + mu) (div u)(div v) dx
        = int F_ij d_i v_j dx

for constant coefficients, and the non reduced variant

    int (lambda + eps) (div u)(div v)
        + (mu + sigma) (<grad u, grad v> + sum_kj d_k u_j d_j v_k) dx

when the coefficient pair varies in space; the two assemblies agree on the
constrained space for constant coefficients because their difference is a
null Lagrangian.  The solver exists to probe the weighted energy estimate

    int |grad u|^2 |u|^{p-2} dx <= C ( int |F|^{Np/(N+p-2)} )^{(N+p-2)/N}

through truncated weights, Holder exponent splits and refinement studies,
not to be a general purpose elasticity code.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import cg

from .coefficients import CoefficientField
from .criteria import STRICT_DISSIPATIVE, lame2d_verdict, lameNd_sufficient
from .errors import EllipticityViolation, NotStrict, SolverDiverged
from .orlicz import SampledField, log_young, luxemburg_norm
from .phi import power_phi, truncated_power

__all__ = [
    "FemProblem",
    "FemSolution",
    "assemble_and_solve",
    "weighted_energy",
    "regularity_ratio",
    "holder_split_check",
    "HolderSplitReport",
    "manufactured_problem",
    "manufactured_reference",
    "fiber_problem",
    "fiber_reference",
]


# ---------------------------------------------------------------------------
# problem container


@dataclass
class FemProblem:
    """Dirichlet problem on a box: geometry, coefficients, load, exponent.

    domain is (x0, x1, y0, y1[, z0, z1]); cells the per-axis cell counts;
    coeffs either a constant (lambda, mu) pair or a planar CoefficientField
    (2-D only); rhs the nodal N x N matrix field F with shape
    nodes + (N, N); p the weight exponent, checked for admissibility
    against the coefficients before any solve.
    """

    domain: tuple
    cells: tuple
    coeffs: object
    rhs: np.ndarray
    p: float = 2.0

    def __post_init__(self):
        cells = tuple(int(c) for c in self.cells)
        n = len(cells)
        if n not in (2, 3):
            raise ValueError("only 2-D and 3-D boxes are supported")
        if len(self.domain) != 2 * n:
            raise ValueError("domain must list lo, hi per axis")
        if min(cells) < 8:
            raise ValueError("need at least 8 cells per side")
        for d in range(n):
            if not self.domain[2 * d + 1] > self.domain[2 * d]:
                raise ValueError("empty box")
        if isinstance(self.coeffs, CoefficientField):
            if n != 2:
                raise ValueError("variable coefficients are planar only")
        else:
            lam, mu = self.coeffs
            self.coeffs = (float(lam), float(mu))
        rhs = np.asarray(self.rhs, dtype=float)
        nodes = tuple(c + 1 for c in cells)
        if rhs.shape != nodes + (n, n):
            raise ValueError(f"rhs must have shape {nodes + (n, n)}")
        if not np.all(np.isfinite(rhs)):
            raise ValueError("rhs must be finite")
        if not self.p >= 2.0:
            raise ValueError("exponent p must be >= 2")
        self.cells = cells
        self.rhs = rhs

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def node_shape(self) -> tuple:
        return tuple(c + 1 for c in self.cells)

    @property
    def spacings(self) -> tuple:
        return tuple((self.domain[2 * d + 1] - self.domain[2 * d])
                     / self.cells[d] for d in range(self.dim))

    def node_axes(self) -> tuple:
        return tuple(np.linspace(self.domain[2 * d], self.domain[2 * d + 1],
                                 self.node_shape[d])
                     for d in range(self.dim))


@dataclass
class FemSolution:
    """Nodal displacement plus the energy bookkeeping of one solve."""

    problem: FemProblem
    u: np.ndarray
    energy: float
    rhs_work: float
    weighted_energies: Mapping[float, float]
    sobolev_norm_F: float
    iterations: int = 0
    extras: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# reference element data


@lru_cache(maxsize=16)
def _gauss_1d(order: int):
    g, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (g + 1.0), 0.5 * w  # on [0, 1]


@lru_cache(maxsize=16)
def _reference(dim: int, order: int):
    """Q1 basis values and reference gradients at tensor Gauss points.

    Returns (weights (G,), vals (G, 2^dim), grads (G, 2^dim, dim)).
    Basis a is indexed by corner bits, bit d set meaning the high side of
    axis d; this matches the node offsets used by the assembler.
    """
    g1, w1 = _gauss_1d(order)
    grids = np.meshgrid(*([g1] * dim), indexing="ij")
    pts = np.column_stack([g.ravel() for g in grids])
    wgrids = np.meshgrid(*([w1] * dim), indexing="ij")
    w = np.ones(len(pts))
    for wg in wgrids:
        w = w * wg.ravel()
    nbasis = 2 ** dim
    vals = np.ones((len(pts), nbasis))
    grads = np.ones((len(pts), nbasis, dim))
    for a in range(nbasis):
        for d in range(dim):
            hi = (a >> d) & 1
            line = pts[:, d] if hi else 1.0 - pts[:, d]
            dline = 1.0 if hi else -1.0
            vals[:, a] *= line
            for e in range(dim):
                grads[:, a, e] *= dline if e == d else line
    return w, vals, grads


def _corner_offsets(node_shape):
    dim = len(node_shape)
    strides = np.ones(dim, dtype=np.int64)
    for d in range(dim - 2, -1, -1):
        strides[d] = strides[d + 1] * node_shape[d + 1]
    offs = np.zeros(2 ** dim, dtype=np.int64)
    for a in range(2 ** dim):
        for d in range(dim):
            if (a >> d) & 1:
                offs[a] += strides[d]
    return strides, offs


def _element_nodes(cells, node_shape):
    """(nel, 2^dim) global node ids of every cell, row major in the cells."""
    dim = len(cells)
    strides, offs = _corner_offsets(node_shape)
    axes = [np.arange(c) for c in cells]
    grids = np.meshgrid(*axes, indexing="ij")
    base = np.zeros(grids[0].size, dtype=np.int64)
    for d in range(dim):
        base += grids[d].ravel() * strides[d]
    return base[:, None] + offs[None, :]


def _boundary_mask(node_shape):
    mask = np.zeros(node_shape, dtype=bool)
    for d in range(len(node_shape)):
        sl = [slice(None)] * len(node_shape)
        sl[d] = 0
        mask[tuple(sl)] = True
        sl[d] = -1
        mask[tuple(sl)] = True
    return mask.ravel()


# ---------------------------------------------------------------------------
# assembly


def _local_blocks(dim: int, order: int, spacings):
    """Per Gauss point outer products of physical basis gradients.

    div_blk[g, a, i, b, j]  = d_i phi_a d_j phi_b
    lap_blk[g, a, i, b, j]  = delta_ij grad phi_a . grad phi_b
    swap_blk[g, a, i, b, j] = d_j phi_a d_i phi_b
    All already multiplied by the Gauss weight times the cell volume.
    """
    w, _, grads = _reference(dim, order)
    h = np.asarray(spacings)
    phys = grads / h[None, None, :]
    vol = float(np.prod(h))
    wv = w * vol
    div_blk = np.einsum("g,gai,gbj->gaibj", wv, phys, phys)
    swap_blk = np.swapaxes(div_blk, 2, 4)  # d_j phi_a d_i phi_b
    gg = np.einsum("g,gad,gbd->gab", wv, phys, phys)
    eye = np.eye(dim)
    lap_blk = np.einsum("gab,ij->gaibj", gg, eye)
    return div_blk, lap_blk, swap_blk


def _coefficient_samples(prob: FemProblem, order: int):
    """(lam, mu) at every element Gauss point, or scalars when constant."""
    if not isinstance(prob.coeffs, CoefficientField):
        lam, mu = prob.coeffs
        return float(lam), float(mu)
    w, vals, _ = _reference(prob.dim, order)
    axes = prob.node_axes()
    g1, _ = _gauss_1d(order)
    hx, hy = prob.spacings
    ex = prob.domain[0] + hx * np.arange(prob.cells[0])
    ey = prob.domain[2] + hy * np.arange(prob.cells[1])
    gx = (ex[:, None] + hx * g1[None, :])
    gy = (ey[:, None] + hy * g1[None, :])
    # tensor Gauss points per element, matching _reference ordering
    px = np.repeat(gx[:, None, :, None], prob.cells[1], axis=1)
    py = np.repeat(gy[None, :, None, :], prob.cells[0], axis=0)
    px = np.broadcast_to(px, (prob.cells[0], prob.cells[1], order, order))
    py = np.broadcast_to(py, (prob.cells[0], prob.cells[1], order, order))
    shape = (prob.cells[0] * prob.cells[1], order * order)
    xs = px.reshape(shape)
    ys = py.reshape(shape)
    lam = prob.coeffs.lam_at(xs.ravel(), ys.ravel()).reshape(shape)
    mu = prob.coeffs.mu_at(xs.ravel(), ys.ravel()).reshape(shape)
    return lam, mu


def _check_admissible(prob: FemProblem):
    spec = power_phi(prob.p) if prob.p > 2.0 else power_phi(2.0)
    if prob.dim == 2:
        if isinstance(prob.coeffs, CoefficientField):
            verdict = lame2d_verdict(spec, prob.coeffs)
        else:
            lam, mu = prob.coeffs
            grid = CoefficientField(domain=(0.0, 1.0, 0.0, 1.0),
                                    lam=np.full((2, 2), lam),
                                    mu=np.full((2, 2), mu))
            verdict = lame2d_verdict(spec, grid)
        if verdict.status != STRICT_DISSIPATIVE:
            raise NotStrict(
                f"p = {prob.p:g} is not admissible for these coefficients "
                f"(verdict {verdict.status})")
    else:
        lam, mu = prob.coeffs
        verdict = lameNd_sufficient(spec, lam, mu)
        if verdict.status != STRICT_DISSIPATIVE:
            raise NotStrict(
                f"p = {prob.p:g} fails the N-dimensional sufficient bound "
                f"(verdict {verdict.status})")


def _assemble(prob: FemProblem, order: int = 2):
    dim = prob.dim
    node_shape = prob.node_shape
    nnodes = int(np.prod(node_shape))
    enodes = _element_nodes(prob.cells, node_shape)
    nel, nbasis = enodes.shape
    div_blk, lap_blk, swap_blk = _local_blocks(dim, order, prob.spacings)
    coeff = _coefficient_samples(prob, order)
    if isinstance(coeff[0], float):
        lam, mu = coeff
        # constant pair: classical reduced form (lambda + mu) div div
        local = (mu * lap_blk.sum(axis=0)
                 + (lam + mu) * div_blk.sum(axis=0))
        data = np.broadcast_to(local[None], (nel,) + local.shape)
    else:
        lam, mu = coeff  # (nel, G)
        data = (np.einsum("eg,gaibj->eaibj", lam, div_blk)
                + np.einsum("eg,gaibj->eaibj", mu, lap_blk + swap_blk))
    ndof_loc = nbasis * dim
    data = np.ascontiguousarray(data).reshape(nel, ndof_loc, ndof_loc)

    # global dof = node * dim + component
    gdof = (enodes[:, :, None] * dim
            + np.arange(dim)[None, None, :]).reshape(nel, ndof_loc)
    rows = np.repeat(gdof, ndof_loc, axis=1).ravel()
    cols = np.tile(gdof, (1, ndof_loc)).ravel()
    mat = sparse.coo_array(
        (data.ravel(), (rows.astype(np.int64), cols.astype(np.int64))),
        shape=(nnodes * dim, nnodes * dim)).tocsr()

    # rhs: r[(a,J)] = int Fhat_{iJ} d_i phi_a, with Fhat the Q1 interpolant
    w, vals, grads = _reference(dim, order)
    h = np.asarray(prob.spacings)
    phys = grads / h[None, None, :]
    wv = w * float(np.prod(h))
    f_nodes = prob.rhs.reshape(nnodes, dim, dim)
    f_corners = f_nodes[enodes]                       # (nel, nbasis, N, N)
    f_gauss = np.einsum("gb,ebij->egij", vals, f_corners)
    r_loc = np.einsum("g,egij,gai->eaj", wv, f_gauss, phys)
    rvec = np.zeros(nnodes * dim)
    np.add.at(rvec, gdof.ravel(), r_loc.reshape(nel, ndof_loc).ravel())
    return mat, rvec


def assemble_and_solve(prob: FemProblem, *, rtol: float = 1e-10,
                       maxiter: int | None = None,
                       weight_levels=None) -> FemSolution:
    """Assemble the Q1 system, solve with Jacobi preconditioned CG, and
    attach the energy bookkeeping.

    Raises NotStrict when the declared p fails the admissibility test for
    the coefficients, EllipticityViolation for a bad coefficient pair, and
    SolverDiverged if CG does not reach the 1e-10 relative residual.
    """
    if isinstance(prob.coeffs, tuple):
        lam, mu = prob.coeffs
        if mu <= 0.0 or lam + 2.0 * mu <= 0.0:
            raise EllipticityViolation(
                f"need mu > 0 and lambda + 2 mu > 0, got ({lam:g}, {mu:g})")
    _check_admissible(prob)
    mat, rvec = _assemble(prob)
    dim = prob.dim
    fixed = np.repeat(_boundary_mask(prob.node_shape), dim)
    free = ~fixed
    idx = np.flatnonzero(free)
    kff = mat[idx][:, idx]
    bf = rvec[idx]
    x = np.zeros_like(rvec)
    if np.any(bf != 0.0):
        diag = kff.diagonal()
        precond = sparse.dia_array((1.0 / diag[None, :], [0]),
                                   shape=kff.shape)
        count = [0]

        def tick(_):
            count[0] += 1

        xf, info = cg(kff, bf, rtol=rtol, atol=0.0,
                      maxiter=maxiter or 20000, M=precond, callback=tick)
        if info != 0:
            raise SolverDiverged(f"conjugate gradients stopped with "
                                 f"info = {info}")
        x[idx] = xf
        iterations = count[0]
    else:
        iterations = 0
    energy = 0.5 * float(x @ (mat @ x))
    work = float(rvec @ x)
    u = x.reshape(prob.node_shape + (dim,))
    sol = FemSolution(problem=prob, u=u, energy=energy, rhs_work=work,
                      weighted_energies={}, sobolev_norm_F=0.0,
                      iterations=iterations)
    if weight_levels is None:
        umax = float(np.max(np.linalg.norm(u.reshape(-1, dim), axis=1)))
        weight_levels = [2.0, 4.0, 8.0, max(2.0, 2.0 * umax + 1.0)]
    sol.weighted_energies = weighted_energy(sol, prob.p, weight_levels)
    sol.sobolev_norm_F = _load_norm(prob)
    return sol


# ---------------------------------------------------------------------------
# quadrature over the solved field


def _solution_samples(sol: FemSolution, order: int = 4):
    """|u|, |grad u|^2 and |F| at order-4 Gauss points with their weights."""
    prob = sol.problem
    dim = prob.dim
    w, vals, grads = _reference(dim, order)
    h = np.asarray(prob.spacings)
    phys = grads / h[None, None, :]
    wv = w * float(np.prod(h))
    enodes = _element_nodes(prob.cells, prob.node_shape)
    u_nodes = sol.u.reshape(-1, dim)
    u_corners = u_nodes[enodes]                    # (nel, nbasis, N)
    u_g = np.einsum("gb,ebj->egj", vals, u_corners)
    grad_g = np.einsum("gbi,ebj->egji", phys, u_corners)
    f_nodes = prob.rhs.reshape(-1, dim, dim)
    f_g = np.einsum("gb,ebij->egij", vals, f_nodes[enodes])
    umag = np.linalg.norm(u_g, axis=2).ravel()
    grad_sq = np.einsum("egji,egji->eg", grad_g, grad_g).ravel()
    fmag = np.sqrt(np.einsum("egij,egij->eg", f_g, f_g)).ravel()
    weights = np.broadcast_to(wv[None, :], grad_sq.reshape(len(enodes), -1)
                              .shape).ravel()
    return umag, grad_sq, fmag, weights


def weighted_energy(sol: FemSolution, p: float, k_list) -> dict:
    """Map k -> int |grad u|^2 phi_k(|u|) dx, plus the untruncated value.

    phi_k is the truncated power weight; once k exceeds the solution range
    the truncation never engages and the value equals
    int |grad u|^2 |u|^{p-2} dx exactly, reported under the key inf.
    """
    umag, grad_sq, _, weights = _solution_samples(sol)
    out: dict = {}
    for k in k_list:
        spec = truncated_power(p, float(k))
        out[float(k)] = float(np.sum(weights * grad_sq * spec.phi(umag)))
    if p > 2.0:
        untruncated = float(np.sum(weights * grad_sq
                                   * np.where(umag > 0.0, umag, 1.0)
                                   ** (p - 2.0) * (umag > 0.0)))
    else:
        untruncated = float(np.sum(weights * grad_sq))
    out[float("inf")] = untruncated
    return out


def _load_norm(prob: FemProblem, order: int = 4) -> float:
    """The F-side norm of the energy estimate.

    N >= 3: Lebesgue norm ||F||_{Np/(N+p-2)} as a plain integral power.
    N = 2: Luxemburg norm of |F|^2 for log_young(p), the degenerate tail
    Young function t (log(t + e))^{(p-2)/p}; for p = 2 it collapses to the
    L^1 norm of |F|^2.
    """
    dim = prob.dim
    p = prob.p
    w, vals, _ = _reference(dim, order)
    wv = w * float(np.prod(prob.spacings))
    enodes = _element_nodes(prob.cells, prob.node_shape)
    f_nodes = prob.rhs.reshape(-1, dim, dim)
    f_g = np.einsum("gb,ebij->egij", vals, f_nodes[enodes])
    fmag = np.sqrt(np.einsum("egij,egij->eg", f_g, f_g)).ravel()
    weights = np.broadcast_to(wv[None, :],
                              (len(enodes), len(wv))).ravel()
    if dim >= 3:
        q = dim * p / (dim + p - 2.0)
        return float(np.sum(weights * fmag ** q) ** (1.0 / q))
    if p > 2.0:
        n_tilde, _ = log_young(p)
        sample = SampledField(values=fmag ** 2, weights=weights)
        return luxemburg_norm(sample, n_tilde)
    return float(np.sum(weights * fmag ** 2))


def regularity_ratio(sol: FemSolution, prob: FemProblem | None = None,
                     ) -> float:
    """LHS / RHS of the weighted energy estimate for this solve.

    LHS = int |grad u|^2 |u|^{p-2};  RHS = (int |F|^{Np/(N+p-2)})^{(N+p-2)/N}
    for N >= 3 and the Orlicz version |||F|^2||^{p/2} for N = 2.  Both sides
    scale like c^p under F -> cF, so the ratio is a scale free health
    number; it is 0 for F = 0 and finite whenever F is nontrivial.
    """
    prob = prob or sol.problem
    lhs = sol.weighted_energies.get(float("inf"))
    if lhs is None:
        lhs = weighted_energy(sol, prob.p, [])[float("inf")]
    norm = sol.sobolev_norm_F or _load_norm(prob)
    if norm == 0.0:
        return 0.0
    dim = prob.dim
    if dim >= 3:
        # norm is the q-norm; the estimate uses (int |F|^q)^{(N+p-2)/N}
        q = dim * prob.p / (dim + prob.p - 2.0)
        rhs = (norm ** q) ** ((dim + prob.p - 2.0) / dim)
    else:
        rhs = norm ** (prob.p / 2.0)
    return lhs / rhs


@dataclass(frozen=True)
class HolderSplitReport:
    alpha: Fraction | None  # None encodes the p = 2 endpoint (alpha = inf)
    alpha_prime: Fraction
    conjugate_ok: bool
    k: float
    chain_worst_slack: float
    split_lhs: float
    split_rhs: float
    split_slack: float


def holder_split_check(sol: FemSolution, prob: FemProblem | None = None,
                       k: float = 3.0) -> HolderSplitReport:
    """Certify the exponent bookkeeping behind the weighted estimate.

    With alpha = Np/((N-2)(p-2)) and alpha' = Np/(2(N+p)-4) the pair is
    conjugate (checked exactly in rationals), the truncated weight obeys
    phi_k(|u|) <= |v_k|^{2(p-2)/p} pointwise for v_k = sqrt(phi_k(|u|)) u,
    and int |F|^2 phi_k(|u|) splits by Holder against those exponents.
    Needs N >= 3; the planar case runs on the Orlicz route instead.
    """
    prob = prob or sol.problem
    if prob.dim < 3:
        raise ValueError("the Holder split needs N >= 3")
    p = prob.p
    n = prob.dim
    pf = Fraction(p)  # exact for float input; conjugacy is then symbolic
    alpha_prime = (n * pf) / (2 * (n + pf) - 4)
    if p == 2.0:
        # alpha degenerates to infinity and the split pair is (sup, L^1)
        alpha = None
        conj = alpha_prime == 1
    else:
        alpha = (n * pf) / ((n - 2) * (pf - 2))
        conj = (1 / alpha + 1 / alpha_prime) == 1

    umag, _, fmag, weights = _solution_samples(sol)
    spec = truncated_power(p, float(k))
    phik = spec.phi(umag)
    vmag_sq = phik * umag * umag
    chain_rhs = vmag_sq ** ((p - 2.0) / p) if p > 2.0 \
        else np.ones_like(phik)
    chain_slack = float(np.min(chain_rhs - phik))

    lhs = float(np.sum(weights * fmag ** 2 * phik))
    ap = float(alpha_prime)
    if alpha is None:
        rhs = (float(np.max(phik, initial=0.0))
               * float(np.sum(weights * fmag ** (2.0 * ap))) ** (1.0 / ap))
    else:
        a = float(alpha)
        rhs = (float(np.sum(weights * phik ** a)) ** (1.0 / a)
               * float(np.sum(weights * fmag ** (2.0 * ap))) ** (1.0 / ap))
    return HolderSplitReport(alpha=alpha, alpha_prime=alpha_prime,
                             conjugate_ok=bool(conj), k=float(k),
                             chain_worst_slack=chain_slack,
                             split_lhs=lhs, split_rhs=rhs,
                             split_slack=rhs - lhs)


# ---------------------------------------------------------------------------
# reference problems


def manufactured_problem(cells: int, lam: float = 1.0, mu: float = 1.0,
                         amp: float = 1.0, p: float = 2.0) -> FemProblem:
    """2-D manufactured case u* = amp (s, s), s = sin(pi x) sin(pi y).

    F_ij = mu d_i u*_j + (lambda + mu) (div u*) delta_ij reproduces the weak
    form of u* exactly against every test function, so the discrete solution
    is the Galerkin projection of u*.
    """
    nodes = cells + 1
    xs = np.linspace(0.0, 1.0, nodes)
    x, y = np.meshgrid(xs, xs, indexing="ij")
    sx, cx = np.sin(np.pi * x), np.cos(np.pi * x)
    sy, cy = np.sin(np.pi * y), np.cos(np.pi * y)
    dsx = np.pi * cx * sy   # d_1 s
    dsy = np.pi * sx * cy   # d_2 s
    div = dsx + dsy
    f = np.zeros((nodes, nodes, 2, 2))
    for j in range(2):
        f[:, :, 0, j] = mu * dsx
        f[:, :, 1, j] = mu * dsy
    f[:, :, 0, 0] += (lam + mu) * div
    f[:, :, 1, 1] += (lam + mu) * div
    return FemProblem(domain=(0.0, 1.0, 0.0, 1.0), cells=(cells, cells),
                      coeffs=(lam, mu), rhs=amp * f, p=p)


def manufactured_reference(prob: FemProblem, amp: float = 1.0) -> np.ndarray:
    xs, ys = prob.node_axes()
    x, y = np.meshgrid(xs, ys, indexing="ij")
    s = amp * np.sin(np.pi * x) * np.sin(np.pi * y)
    return np.stack([s, s], axis=-1)


def fiber_problem(cells_x: int = 32, aspect: int = 16, lam: float = 1.0,
                  mu: float = 1.0) -> FemProblem:
    """Quasi 1-D strip [0,1] x [0,aspect]: F11 = 1 on x <= 1/2, else 0.

    Away from the far walls the displacement reduces to the two point
    boundary problem (lam + 2 mu) u1'' = d F11/dx, whose solution is a hat
    with peak near 0.25/(lam + 2 mu) at x = 1/2.
    """
    cells_y = cells_x * aspect
    nodes = (cells_x + 1, cells_y + 1)
    xs = np.linspace(0.0, 1.0, nodes[0])
    f = np.zeros(nodes + (2, 2))
    f[:, :, 0, 0] = (xs <= 0.5)[:, None]
    return FemProblem(domain=(0.0, 1.0, 0.0, float(aspect)),
                      cells=(cells_x, cells_y), coeffs=(lam, mu), rhs=f,
                      p=2.0)


def fiber_reference(prob: FemProblem) -> np.ndarray:
    """Exact midline profile for the nodal interpolant of the fiber load.

    The nodal F11 ramps from 1 to 0 over the single cell right of x = 1/2,
    so with m = int Fhat = 1/2 + h/2 the exact solution of
    (lam + 2 mu) u1' = Fhat - m, u1(0) = u1(1) = 0, is piecewise quadratic;
    linear elements reproduce it exactly at the nodes.
    """
    lam, mu = prob.coeffs
    xs = prob.node_axes()[0]
    h = prob.spacings[0]
    m = 0.5 + 0.5 * h

    def cum_fhat(x):
        # integral of the nodal interpolant of F11 from 0 to x
        ramp_end = 0.5 + h
        out = np.where(x <= 0.5, x, 0.0)
        mid = (x > 0.5) & (x < ramp_end)
        out = np.where(mid, 0.5 + (x - 0.5)
                       - 0.5 * (x - 0.5) ** 2 / h, out)
        return np.where(x >= ramp_end, 0.5 + 0.5 * h, out)

    return (cum_fhat(xs) - m * xs) / (lam + 2.0 * mu)

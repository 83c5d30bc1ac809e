"""The implicit propagation layer and its gradients.

One scale module iterates the linear map

    Z  <-  gamma * g(F) * Z * S^m  +  H

to its unique fixed point Z*, where g(F) = F^T F / (||F^T F||_F + eps) has
Frobenius norm strictly below 1 by construction. With gamma < 1 and a
degree-normalized S (spectral norm <= 1) the map contracts in Frobenius
norm, so plain Picard iteration converges geometrically from any start;
we iterate from Z = 0 so the iterates are exactly the partial sums of the
underlying geometric series.

Training never differentiates through the iterations. The loss gradient
at Z* is pulled back through the fixed point by solving the adjoint
equation

    U  =  gamma * g(F)^T * U * (S^m)^T  +  dL/dZ*

with the same Picard scheme (transposition preserves the contraction),
after which parameter gradients are closed-form functions of U and Z*.
``oracle_solve`` solves the vectorized system (I - gamma*(S^m)^T (x) g(F))
densely by LU; it exists purely as an independent cross-check for tests
and is capacity-guarded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import numerics
from .errors import CapacityError, DivergenceError, ShapeError

RESIDUAL_FLOOR = 1e-12  # guards the relative residual against a zero iterate
ORACLE_MAX_UNKNOWNS = 4096


@dataclass(frozen=True)
class ScaleModule:
    """One implicit layer: trainable weight F, contraction factor, scale exponent."""

    f_weight: np.ndarray
    gamma: float = 0.8
    scale_m: int = 1
    eps_f: float = 1e-5

    def __post_init__(self):
        f = numerics.as_dense(self.f_weight)
        if f.shape[0] != f.shape[1]:
            raise ShapeError(f"F must be square, got {f.shape}")
        object.__setattr__(self, "f_weight", f)
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.scale_m < 1:
            raise ValueError(f"scale exponent must be >= 1, got {self.scale_m}")
        if self.eps_f <= 0.0:
            raise ValueError(f"eps_f must be positive, got {self.eps_f}")

    @property
    def hidden_dim(self) -> int:
        return self.f_weight.shape[0]


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-6
    max_iters: int = 300
    strict: bool = False  # raise instead of returning an unconverged result

    def __post_init__(self):
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True)
class EquilibriumResult:
    z_star: np.ndarray
    iterations: int
    residual: float
    converged: bool
    # ||Z^(k+1) - Z^(k)||_F per step; contracts by at most gamma per step.
    update_norms: np.ndarray = field(default=None, repr=False)


def normalized_gram(f_weight: np.ndarray, eps_f: float) -> np.ndarray:
    """g(F) = F^T F / (||F^T F||_F + eps_f).

    Symmetric PSD with ||g(F)||_F = r/(r + eps_f) < 1 for every F, which is
    what makes the propagation a contraction regardless of training.
    """
    gram = f_weight.T @ f_weight
    return gram / (numerics.frobenius_norm(gram) + eps_f)


def _propagate(z: np.ndarray, s: sp.csr_array, m: int) -> np.ndarray:
    for _ in range(m):
        z = numerics.spmm_right(z, s)
    return z


def _picard(coeff: np.ndarray, s: sp.csr_array, m: int, gamma: float,
            injected: np.ndarray, cfg: SolverConfig, z0: np.ndarray | None,
            what: str) -> EquilibriumResult:
    if injected.shape[0] != coeff.shape[0]:
        raise ShapeError(
            f"{what}: injected rows {injected.shape[0]} != hidden dim {coeff.shape[0]}")
    if injected.shape[1] != s.shape[0]:
        raise ShapeError(
            f"{what}: injected cols {injected.shape[1]} != node count {s.shape[0]}")
    z = np.zeros_like(injected) if z0 is None else numerics.as_dense(z0).copy()
    if z.shape != injected.shape:
        raise ShapeError(f"{what}: z0 shape {z.shape} != {injected.shape}")
    if gamma == 0.0:
        # The map is constant: one application lands exactly on the fixed point.
        return EquilibriumResult(
            z_star=injected.copy(), iterations=1, residual=0.0, converged=True,
            update_norms=np.array([numerics.frobenius_norm(injected - z)]))
    update_norms = []
    residual = np.inf
    converged = False
    iterations = 0
    for iterations in range(1, cfg.max_iters + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            z_next = gamma * (coeff @ _propagate(z, s, m)) + injected
        if not np.all(np.isfinite(z_next)):
            raise DivergenceError(
                f"{what} produced non-finite values at iteration {iterations}; "
                "check that S is normalized and gamma < 1")
        diff = numerics.frobenius_norm(z_next - z)
        residual = diff / (numerics.frobenius_norm(z) + RESIDUAL_FLOOR)
        update_norms.append(diff)
        z = z_next
        if residual <= cfg.tol:
            converged = True
            break
    if cfg.strict and not converged:
        raise DivergenceError(
            f"{what} did not reach tol {cfg.tol:g} within {cfg.max_iters} iterations "
            f"(residual {residual:.3e})")
    return EquilibriumResult(z_star=z, iterations=iterations, residual=residual,
                             converged=converged,
                             update_norms=np.asarray(update_norms))


def forward_solve(module: ScaleModule, injected: np.ndarray, s: sp.csr_array,
                  cfg: SolverConfig = SolverConfig(),
                  z0: np.ndarray | None = None) -> EquilibriumResult:
    """Iterate the propagation map to its fixed point.

    Stops when ||Z_next - Z||_F / (||Z||_F + 1e-12) <= cfg.tol or at
    cfg.max_iters, whichever comes first.
    """
    g = normalized_gram(module.f_weight, module.eps_f)
    return _picard(g, s, module.scale_m, module.gamma, injected, cfg, z0,
                   "forward solve")


def adjoint_solve(module: ScaleModule, s: sp.csr_array, grad_z: np.ndarray,
                  cfg: SolverConfig = SolverConfig()) -> np.ndarray:
    """Solve U = gamma g(F)^T U (S^m)^T + grad_z for the loss adjoint U.

    U equals dL/dZ* (I - J)^{-1} in the vectorized sense, i.e. the loss
    gradient pulled back through the fixed point.
    """
    g = normalized_gram(module.f_weight, module.eps_f)
    s_t = numerics.as_csr(s.T)
    result = _picard(numerics.transpose(g), s_t, module.scale_m, module.gamma,
                     grad_z, cfg, None, "adjoint solve")
    return result.z_star


def weight_gradient(module: ScaleModule, u: np.ndarray, z_star: np.ndarray,
                    s: sp.csr_array) -> np.ndarray:
    """Gradient of the loss with respect to F, given the adjoint U and Z*.

    The upstream gradient at g(F) is M = gamma * U (Z* S^m)^T; pulling M
    back through the Frobenius normalization and the Gram map F^T F gives

        dG = M/r_eps - (<M, G> / (r * r_eps^2)) G,   dF = F (dG + dG^T)

    with G = F^T F, r = ||G||_F, r_eps = r + eps_f. The second term is the
    normalization's own derivative and is dropped in the r -> 0 limit.
    Validated against central finite differences before any training run
    is trusted.
    """
    if u.shape != z_star.shape:
        raise ShapeError(f"adjoint shape {u.shape} != equilibrium shape {z_star.shape}")
    propagated = _propagate(z_star, s, module.scale_m)
    m_up = module.gamma * (u @ propagated.T)
    gram = module.f_weight.T @ module.f_weight
    r = numerics.frobenius_norm(gram)
    r_eps = r + module.eps_f
    d_gram = m_up / r_eps
    if r >= 1e-30:
        d_gram = d_gram - (numerics.inner_product(m_up, gram) / (r * r_eps ** 2)) * gram
    return module.f_weight @ (d_gram + d_gram.T)


def injected_gradient(u: np.ndarray) -> np.ndarray:
    """Gradient reaching the injected term: the map is identity in H, so it is U."""
    return u


def oracle_solve(module: ScaleModule, injected: np.ndarray,
                 s: sp.csr_array) -> np.ndarray:
    """Closed-form fixed point via the dense vectorized (Kronecker) system.

    Solves (I - gamma (S^m)^T (x) g(F)) vec(Z) = vec(H) by LU. Test oracle
    only: cost is (h*n)^3, hence the hard capacity guard.
    """
    g = normalized_gram(module.f_weight, module.eps_f)
    h = g.shape[0]
    n = s.shape[0]
    if injected.shape != (h, n):
        raise ShapeError(f"injected shape {injected.shape} != ({h}, {n})")
    unknowns = h * n
    if unknowns > ORACLE_MAX_UNKNOWNS:
        raise CapacityError(
            f"oracle system has {unknowns} unknowns, above the {ORACLE_MAX_UNKNOWNS} guard")
    s_m = sp.eye_array(n, format="csr")
    for _ in range(module.scale_m):
        s_m = s_m @ s
    system = np.eye(unknowns) - module.gamma * np.kron(numerics.densify(s_m).T, g)
    rhs = injected.flatten(order="F")
    solution = numerics.lu_solve(system, rhs)
    return solution.reshape((h, n), order="F")

"""Coupled block system and the marching-on-in-time recursion.

Each time step solves one linear system with the same left-hand matrix

    [ (dt/2) A + (1/dt) M   C^T                0                    ]
    [ -C                    -W0                KT0 - (dt/4) I_bnd   ]
    [ 0                     -K0 - (1/2) I_bnd  V0                   ]

for the stacked unknowns (displacement, surface trace, auxiliary
density).  The right-hand side convolves the solution history with the
lagged boundary matrices; histories with nonpositive index are zero by
the quiescent initial conditions.  One LU factorization is reused for
every step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from fsibem.elastic import CouplingBlocks
from fsibem.layerpot import RetardedMatrixSequence


class ConfigurationError(RuntimeError):
    """Raised when the block system cannot be factorized."""


class SolverError(RuntimeError):
    """Raised when a step's residual exceeds the tolerance."""


class MissingHistoryError(RuntimeError):
    """Raised when rhs_step is asked for a step without its past."""


@dataclass
class BlockSystem:
    """Factorized constant left-hand matrix of the marching scheme."""

    lu: tuple
    lhs: np.ndarray
    ndof_u: int
    ns: int
    dt: float

    @property
    def size(self) -> int:
        return self.ndof_u + 2 * self.ns

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return sla.lu_solve(self.lu, rhs)

    def residual(self, x: np.ndarray, rhs: np.ndarray) -> float:
        err = np.linalg.norm(self.lhs @ x - rhs)
        nb = np.linalg.norm(rhs)
        return err / nb if nb > 0 else err


@dataclass
class SolutionHistory:
    """Coefficient histories; index 0 holds the zero initial state."""

    u: np.ndarray    # (N_t + 1, 3 N_o)
    phi: np.ndarray  # (N_t + 1, N_s')
    lam: np.ndarray  # (N_t + 1, N_s')
    dt: float

    @property
    def n_steps(self) -> int:
        return self.u.shape[0] - 1

    def state(self, field_name: str, n: int) -> np.ndarray:
        arr = getattr(self, field_name)
        if n <= 0:
            return np.zeros(arr.shape[1])
        return arr[n]


def build_block_system(blocks: CouplingBlocks, seq: RetardedMatrixSequence, dt: float) -> BlockSystem:
    """Assemble and factorize the step matrix shared by all time steps."""
    A = blocks.stiffness
    M = blocks.mass
    Ib = blocks.boundary_mass.toarray()
    C = blocks.trace_coupling.toarray()
    ndof_u = A.shape[0]
    ns = Ib.shape[0]

    W0 = seq.dense("hyp", 0, ns)
    KT0 = seq.dense("adl", 0, ns)
    K0 = seq.dense("dl", 0, ns)
    V0 = seq.dense("sl", 0, ns)

    n = ndof_u + 2 * ns
    lhs = np.zeros((n, n))
    lhs[:ndof_u, :ndof_u] = ((dt / 2.0) * A + (1.0 / dt) * M).toarray()
    lhs[:ndof_u, ndof_u : ndof_u + ns] = C.T
    lhs[ndof_u : ndof_u + ns, :ndof_u] = -C
    lhs[ndof_u : ndof_u + ns, ndof_u : ndof_u + ns] = -W0
    lhs[ndof_u : ndof_u + ns, ndof_u + ns :] = KT0 - (dt / 4.0) * Ib
    lhs[ndof_u + ns :, ndof_u : ndof_u + ns] = -K0 - 0.5 * Ib
    lhs[ndof_u + ns :, ndof_u + ns :] = V0

    try:
        lu = sla.lu_factor(lhs)
    except sla.LinAlgError as exc:  # pragma: no cover - defensive
        raise ConfigurationError(f"singular step matrix (dt={dt})") from exc

    system = BlockSystem(lu=lu, lhs=lhs, ndof_u=ndof_u, ns=ns, dt=dt)
    rng = np.random.default_rng(0)
    for _ in range(2):
        b = rng.standard_normal(n)
        if system.residual(system.solve(b), b) > 1e-10:
            raise ConfigurationError(f"factorization residual too large (dt={dt})")
    return system


def rhs_step(n: int, history: SolutionHistory, blocks: CouplingBlocks,
             seq: RetardedMatrixSequence, data) -> np.ndarray:
    """Stacked right-hand side of step n >= 1.

    data must provide rhs_pair(n) -> (3N_o vector, N_s' vector) holding
    the trapezoidal data sums of steps n and n-1.  History terms with
    nonpositive index drop; for n = 1 only the data terms survive.
    """
    if n < 1:
        raise ValueError("time steps start at n = 1")
    if history.u.shape[0] <= n - 1:
        raise MissingHistoryError(f"history missing for step {n}")

    A = blocks.stiffness
    M = blocks.mass
    Ib = blocks.boundary_mass
    C = blocks.trace_coupling
    dt = seq.dt
    ns = C.shape[0]

    Hpair, Gpair = data.rhs_pair(n)

    u1 = history.state("u", n - 1)
    u2 = history.state("u", n - 2)
    phi1 = history.state("phi", n - 1)
    lam1 = history.state("lam", n - 1)

    row_u = Hpair - (dt / 2.0) * (A @ u1) + (2.0 / dt) * (M @ u1) - (1.0 / dt) * (M @ u2)
    row_u = row_u + C.T @ phi1

    row_phi = Gpair + C @ u1 + (dt / 4.0) * (Ib @ lam1)
    row_lam = -0.5 * (Ib @ phi1)
    for m in range(1, n):
        k = n - m
        row_phi = row_phi + seq.matvec("hyp", k, history.phi[m])
        row_phi = row_phi - seq.matvec("adl", k, history.lam[m])
        row_lam = row_lam + seq.matvec("dl", k, history.phi[m])
        row_lam = row_lam - seq.matvec("sl", k, history.lam[m])

    return np.concatenate([row_u, row_phi, row_lam])


def mot_solve(blocks: CouplingBlocks, seq: RetardedMatrixSequence, data,
              n_steps: int, residual_tol: float = 1e-9,
              callback=None) -> SolutionHistory:
    """March the coupled system for n_steps steps of size seq.dt."""
    if n_steps < 1:
        raise ValueError("need at least one step")
    system = build_block_system(blocks, seq, seq.dt)
    ndof_u, ns = system.ndof_u, system.ns

    history = SolutionHistory(
        u=np.zeros((n_steps + 1, ndof_u)),
        phi=np.zeros((n_steps + 1, ns)),
        lam=np.zeros((n_steps + 1, ns)),
        dt=seq.dt,
    )
    for n in range(1, n_steps + 1):
        b = rhs_step(n, history, blocks, seq, data)
        x = system.solve(b)
        res = system.residual(x, b)
        if res > residual_tol:
            raise SolverError(f"step {n}: residual {res:.3e} > {residual_tol:.1e}")
        history.u[n] = x[:ndof_u]
        history.phi[n] = x[ndof_u : ndof_u + ns]
        history.lam[n] = x[ndof_u + ns :]
        if callback is not None:
            callback(n, history)
    return history


class ZeroData:
    """Quiescent incident data; every right-hand side pair is zero."""

    def __init__(self, ndof_u: int, ns: int):
        self._h = np.zeros(ndof_u)
        self._g = np.zeros(ns)

    def rhs_pair(self, n: int):
        return self._h, self._g

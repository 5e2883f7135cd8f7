"""Truncated two-mode Fock space and Schroedinger-picture density evolution.

The basis holds all |n, n_bar> with n + n_bar <= cutoff. None of the
generator's terms raise the total particle number, so this subspace is
exactly invariant and truncation introduces no error.

Matrices are dense numpy arrays; D = (cutoff + 1)(cutoff + 2)/2 stays tiny.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
import scipy.linalg

from .heisenberg import BilinearObservable
from .integrate import IntegrationError, solve
from .observables import FlavorCount, KLongState, KShortState, MixedSingle, State
from .params import DomainError, PhysParams

HERMITIAN_DRIFT_TOL = 1e-10
TRACE_TOL = 1e-9
POSITIVITY_TOL = -1e-9


class IntegratorAccuracyError(IntegrationError):
    """An evolved density matrix left the set of physical states."""


@dataclass(frozen=True)
class FockBasis:
    cutoff: int
    labels: Tuple[Tuple[int, int], ...]
    index: Dict[Tuple[int, int], int] = field(compare=False, repr=False)

    @property
    def dim(self) -> int:
        return len(self.labels)

    def totals(self) -> np.ndarray:
        return np.array([n + nb for n, nb in self.labels])

    def sector(self, max_total: int) -> np.ndarray:
        """Indices of basis states with total number <= max_total."""
        return np.flatnonzero(self.totals() <= max_total)


def build_basis(cutoff: int) -> FockBasis:
    """Basis ordered by total number, then by n_bar within each total."""
    if cutoff < 0:
        raise DomainError("cutoff", f"must be non-negative, got {cutoff!r}")
    labels = tuple((total - nb, nb) for total in range(cutoff + 1) for nb in range(total + 1))
    return FockBasis(cutoff, labels, {lab: i for i, lab in enumerate(labels)})


def build_ladder(basis: FockBasis, mode: str) -> np.ndarray:
    """Annihilation operator for mode 'a' (K0) or 'b' (anti-K0)."""
    if mode not in ("a", "b"):
        raise ValueError(f"mode must be 'a' or 'b', got {mode!r}")
    op = np.zeros((basis.dim, basis.dim), dtype=complex)
    for j, (n, nb) in enumerate(basis.labels):
        if mode == "a" and n > 0:
            op[basis.index[(n - 1, nb)], j] = math.sqrt(n)
        elif mode == "b" and nb > 0:
            op[basis.index[(n, nb - 1)], j] = math.sqrt(nb)
    return op


def dagger(m: np.ndarray) -> np.ndarray:
    return m.conj().T


@dataclass(frozen=True)
class LindbladSet:
    basis: FockBasis
    H: np.ndarray
    L1: np.ndarray
    L2: np.ndarray
    K: np.ndarray

    @property
    def jumps(self) -> Tuple[np.ndarray, np.ndarray]:
        return (self.L1, self.L2)

    def astype(self, dtype) -> "LindbladSet":
        return LindbladSet(self.basis, *(np.asarray(m, dtype=dtype)
                                         for m in (self.H, self.L1, self.L2, self.K)))


def l1_rate(params: PhysParams) -> float:
    """Squared prefactor of L1; must be non-negative for a valid generator."""
    g = params.gamma
    return params.gamma_S - params.A_L ** 2 * (g ** 2 + params.delta_m ** 2) / params.gamma_L


def _check_lindblad_domain(params: PhysParams) -> None:
    if abs(params.A_L) >= 1:
        raise DomainError("A_L", f"must satisfy |A_L| < 1, got {params.A_L!r}")
    if l1_rate(params) < 0:
        raise DomainError(
            "A_L", "A_L^2 (Gamma^2 + dm^2) must not exceed Gamma_S Gamma_L "
            "(L1 prefactor would be imaginary)")


def build_lindblad_set(params: PhysParams, basis: FockBasis, mass: float = 0.0) -> LindbladSet:
    """H, L1, L2 and K in the flavor basis.

    ``mass`` is the mean mass in ns^-1. It multiplies the total number
    operator, commutes with everything here and cancels from all reported
    quantities; the default 0 avoids rounding from a ~1e15 ns^-1 term.
    """
    _check_lindblad_domain(params)
    a = build_ladder(basis, "a")
    b = build_ladder(basis, "b")
    ad, bd = dagger(a), dagger(b)
    p, q, A = params.p, params.q, params.A_L
    pc, qc = p.conjugate(), q.conjugate()
    g, dg, dm = params.gamma, params.delta_gamma, params.delta_m
    num = ad @ a + bd @ b
    d = 1 - A ** 2

    H = (mass * num
         - p * qc / d * (dm + 0.5j * A * dg) * (ad @ b)
         - q * pc / d * (dm - 0.5j * A * dg) * (bd @ a))
    z = (g - 1j * dm) / math.sqrt(params.gamma_L)
    sl = math.sqrt(params.gamma_L)
    L1 = math.sqrt(l1_rate(params)) * (pc / (1 + A) * a + qc / (1 - A) * b)
    L2 = pc / (1 + A) * (sl + A * z) * a - qc / (1 - A) * (sl - A * z) * b
    K = (-0.5 * g * num
         - p * qc / d * (0.5 * dg - 1j * A * dm) * (ad @ b)
         - q * pc / d * (0.5 * dg + 1j * A * dm) * (bd @ a))
    return LindbladSet(basis, H, L1, L2, K)


def k_from_jumps(ops: LindbladSet) -> np.ndarray:
    return -0.5 * sum(dagger(L) @ L for L in ops.jumps)


def mode_operator(basis: FockBasis, params: PhysParams, which: str) -> np.ndarray:
    """Annihilator c_S = p* a + q* b or c_L = p* a - q* b."""
    a = build_ladder(basis, "a")
    b = build_ladder(basis, "b")
    sign = {"S": 1, "L": -1}[which]
    return params.p.conjugate() * a + sign * params.q.conjugate() * b


def observable_matrix(basis: FockBasis, obs: BilinearObservable) -> np.ndarray:
    a = build_ladder(basis, "a")
    b = build_ladder(basis, "b")
    ad, bd = dagger(a), dagger(b)
    return obs.w_aa * (ad @ a) + obs.w_ab * (ad @ b) + obs.w_ba * (bd @ a) + obs.w_bb * (bd @ b)


def single_particle_operators_SL(params: PhysParams, mass: float = 0.0) -> LindbladSet:
    """Single-particle H, L1, L2 written with K_S/K_L ket-bras, on the cutoff-1 basis.

    The K_S/K_L kets are p|K0> +- q|K0bar>; the result should coincide with
    `build_lindblad_set(params, build_basis(1), mass)`.
    """
    _check_lindblad_domain(params)
    basis = build_basis(1)
    p, q, A = params.p, params.q, params.A_L
    vac = np.zeros(3, dtype=complex)
    vac[0] = 1
    ks = np.array([0, p, q], dtype=complex)
    kl = np.array([0, p, -q], dtype=complex)

    def ketbra(x, y):
        return np.outer(x, y.conj())

    g, dg, dm = params.gamma, params.delta_gamma, params.delta_m
    m_s, m_l = mass - dm / 2, mass + dm / 2
    d = 1 - A ** 2
    H = (m_s * ketbra(ks, ks) + m_l * ketbra(kl, kl)
         - A * ((mass - 0.25j * dg) * ketbra(ks, kl) + (mass + 0.25j * dg) * ketbra(kl, ks))) / d
    L1 = math.sqrt(l1_rate(params)) * (ketbra(vac, ks) - A * ketbra(vac, kl)) / d
    sl = math.sqrt(params.gamma_L)
    z = (g - 1j * dm) / sl
    L2 = ((sl - A ** 2 * z) * ketbra(vac, kl) - A * (sl - z) * ketbra(vac, ks)) / d
    ops = LindbladSet(basis, H, L1, L2, np.zeros_like(H))
    return LindbladSet(basis, H, L1, L2, k_from_jumps(ops))


# States

@dataclass(frozen=True)
class DensityMatrix:
    data: np.ndarray
    basis: FockBasis

    def trace(self) -> complex:
        return np.trace(self.data)

    def hermitian_defect(self) -> float:
        return float(np.max(np.abs(self.data - dagger(self.data))))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.data + dagger(self.data))
        return float(np.min(np.linalg.eigvalsh(herm.astype(complex))))

    def expectation(self, op: np.ndarray) -> complex:
        return np.trace(self.data @ np.asarray(op, dtype=self.data.dtype))

    def check(self, hermitian_tol: float = 1e-10, trace_tol: float = 1e-10,
              positivity_tol: float = POSITIVITY_TOL) -> None:
        if self.hermitian_defect() > hermitian_tol:
            raise ValueError(f"density matrix not Hermitian (defect {self.hermitian_defect():.3e})")
        if abs(self.trace() - 1) > trace_tol:
            raise ValueError(f"density matrix trace {self.trace()!r} differs from 1")
        if self.min_eigenvalue() < positivity_tol:
            raise ValueError(f"density matrix has eigenvalue {self.min_eigenvalue():.3e}")


def _pure(basis: FockBasis, psi: np.ndarray, dtype=complex) -> DensityMatrix:
    psi = np.asarray(psi, dtype=dtype)
    return DensityMatrix(np.outer(psi, psi.conj()), basis)


def _require_cutoff(basis: FockBasis, total: int) -> None:
    if total > basis.cutoff:
        raise DomainError("cutoff", f"state with {total} particles exceeds cutoff {basis.cutoff}")


def make_state_flavor(basis: FockBasis, n: int, n_bar: int) -> DensityMatrix:
    FlavorCount(n, n_bar)
    _require_cutoff(basis, n + n_bar)
    psi = np.zeros(basis.dim, dtype=complex)
    psi[basis.index[(n, n_bar)]] = 1
    return _pure(basis, psi)


def _binomial_state(basis: FockBasis, params: PhysParams, n: int, sign: int) -> np.ndarray:
    _require_cutoff(basis, n)
    psi = np.zeros(basis.dim, dtype=complex)
    for k in range(n + 1):
        psi[basis.index[(n - k, k)]] = (sign ** k * math.sqrt(math.comb(n, k))
                                        * params.p ** (n - k) * params.q ** k)
    return psi


def state_vector_KS(basis: FockBasis, params: PhysParams, n: int) -> np.ndarray:
    KShortState(n)
    return _binomial_state(basis, params, n, +1)


def state_vector_KL(basis: FockBasis, params: PhysParams, n: int) -> np.ndarray:
    KLongState(n)
    return _binomial_state(basis, params, n, -1)


def make_state_KS(basis: FockBasis, params: PhysParams, n: int, dtype=complex) -> DensityMatrix:
    """|n_S><n_S|; pass ``dtype=np.clongdouble`` to form the projector in extended precision."""
    return _pure(basis, state_vector_KS(basis, params, n), dtype)


def make_state_KL(basis: FockBasis, params: PhysParams, n: int, dtype=complex) -> DensityMatrix:
    return _pure(basis, state_vector_KL(basis, params, n), dtype)


def make_state_mixed_single(basis: FockBasis, p1: float, p2: float, w: complex) -> DensityMatrix:
    MixedSingle(p1, p2, w)
    _require_cutoff(basis, 1)
    rho = np.zeros((basis.dim, basis.dim), dtype=complex)
    i0, ik, ib = basis.index[(0, 0)], basis.index[(1, 0)], basis.index[(0, 1)]
    rho[ik, ik] = p1
    rho[ib, ib] = p2
    rho[ik, ib] = w
    rho[ib, ik] = np.conj(w)
    rho[i0, i0] = 1 - p1 - p2
    return DensityMatrix(rho, basis)


def make_state(basis: FockBasis, params: PhysParams, state: State, dtype=complex) -> DensityMatrix:
    if isinstance(state, FlavorCount):
        rho = make_state_flavor(basis, state.n, state.n_bar)
        return DensityMatrix(rho.data.astype(dtype), basis)
    if isinstance(state, KShortState):
        return make_state_KS(basis, params, state.n, dtype)
    if isinstance(state, KLongState):
        return make_state_KL(basis, params, state.n, dtype)
    if isinstance(state, MixedSingle):
        return make_state_mixed_single(basis, state.p1, state.p2, state.w)
    raise TypeError(f"unsupported state {state!r}")


# Evolution

def master_rhs(ops: LindbladSet, rho: np.ndarray) -> np.ndarray:
    """-i[H, rho] + {K, rho} + sum_i L_i rho L_i+."""
    H, K = ops.H, ops.K
    out = -1j * (H @ rho - rho @ H) + K @ rho + rho @ K
    for L in ops.jumps:
        out += L @ rho @ dagger(L)
    return out


def liouvillian(ops: LindbladSet) -> np.ndarray:
    """Superoperator acting on row-major vec(rho): vec(A X B) = (A kron B^T) vec(X)."""
    eye = np.eye(ops.basis.dim)
    H, K = ops.H, ops.K
    sup = -1j * (np.kron(H, eye) - np.kron(eye, H.T)) + np.kron(K, eye) + np.kron(eye, K.T)
    for L in ops.jumps:
        sup += np.kron(L, L.conj())
    return sup


def _resymmetrize(t: float, rho: np.ndarray) -> np.ndarray:
    drift = np.max(np.abs(rho - dagger(rho)))
    if drift > HERMITIAN_DRIFT_TOL:
        raise IntegratorAccuracyError(f"Hermiticity drift {drift:.3e} in one step", t)
    return 0.5 * (rho + dagger(rho))


def evolve_matrix_series(ops: LindbladSet, x0: np.ndarray, times: Sequence[float],
                         rel_tol: float = 1e-10, abs_tol: float = 1e-12,
                         method: str = "rk", hermitian: bool = False) -> np.ndarray:
    """Apply the master-equation flow to an arbitrary matrix; shape (T, D, D).

    No state invariants are assumed, so this also propagates coherences such
    as |i><j| when assembling the channel as a superoperator. The RK path
    works in the precision of ``x0`` (complex128 or clongdouble).
    """
    times = np.asarray(times, dtype=float)
    if np.any(~(times >= 0)):
        raise ValueError("all times must be non-negative")
    x0 = np.asarray(x0)
    if not np.iscomplexobj(x0):
        x0 = x0.astype(complex)
    if method == "rk":
        work = ops.astype(x0.dtype)
        return solve(lambda t, rho: master_rhs(work, rho), 0.0, x0, times,
                     rtol=rel_tol, atol=abs_tol,
                     post_step=_resymmetrize if hermitian else None, dtype=x0.dtype)
    if method == "expm":
        sup = liouvillian(ops)
        d = ops.basis.dim
        x0 = x0.astype(complex)
        return np.array([(scipy.linalg.expm(sup * t) @ x0.reshape(-1)).reshape(d, d)
                         for t in times])
    raise ValueError(f"unknown method {method!r}")


def evolve_density_series(ops: LindbladSet, rho0: DensityMatrix, times: Sequence[float],
                          rel_tol: float = 1e-10, abs_tol: float = 1e-12,
                          method: str = "rk") -> List[DensityMatrix]:
    rho0.check()
    mats = evolve_matrix_series(ops, rho0.data, times, rel_tol, abs_tol, method,
                                hermitian=True)
    out = []
    for t, m in zip(np.asarray(times, dtype=float), mats):
        rho = DensityMatrix(m, ops.basis)
        tr = rho.trace()
        if abs(tr - 1) > TRACE_TOL:
            raise IntegratorAccuracyError(f"trace drifted to {tr!r}", float(t))
        lam = rho.min_eigenvalue()
        if lam < POSITIVITY_TOL:
            raise IntegratorAccuracyError(f"negative eigenvalue {lam:.3e}", float(t))
        out.append(rho)
    return out


def evolve_density(ops: LindbladSet, rho0: DensityMatrix, t: float,
                   rel_tol: float = 1e-10, abs_tol: float = 1e-12,
                   method: str = "rk") -> DensityMatrix:
    if not t >= 0:
        raise ValueError(f"t must be non-negative, got {t!r}")
    return evolve_density_series(ops, rho0, [t], rel_tol, abs_tol, method)[0]


def channel_superoperator(ops: LindbladSet, t: float, rel_tol: float = 1e-10,
                          abs_tol: float = 1e-12, method: str = "rk") -> np.ndarray:
    """Matrix S with vec(rho(t)) = S @ vec(rho(0)) (row-major vec)."""
    d = ops.basis.dim
    cols = []
    for k in range(d * d):
        e = np.zeros(d * d, dtype=complex)
        e[k] = 1
        cols.append(evolve_matrix_series(ops, e.reshape(d, d), [t], rel_tol, abs_tol,
                                         method)[0].reshape(-1))
    return np.column_stack(cols)


# Two-particle consistency

@dataclass
class FactorizationReport:
    t: float
    tol: float
    deviations: Dict[str, float]

    @property
    def max_deviation(self) -> float:
        return max(self.deviations.values())

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tol


def _slot_maps(basis2: FockBasis) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Maps between two distinguishable particle slots and the cutoff-2 Fock space.

    Each slot holds vacuum, K0 or K0bar (slot order 0, K0, K0bar), so the
    slot space is 9-dimensional with flat index 3*i + k. Returns the
    isometry ``emb`` (Fock -> symmetric slot states) and two Kraus maps
    ``k1``, ``k2`` (slot -> Fock) that forget which slot a surviving particle
    occupies once its partner has decayed.
    """
    mode = {1: (1, 0), 2: (0, 1)}
    emb = np.zeros((9, basis2.dim), dtype=complex)
    k1 = np.zeros((basis2.dim, 9), dtype=complex)
    k2 = np.zeros((basis2.dim, 9), dtype=complex)
    for i in range(3):
        for k in range(3):
            flat = 3 * i + k
            n = (i == 1) + (k == 1)
            nb = (i == 2) + (k == 2)
            emb[flat, basis2.index[(n, nb)]] = 1
            if i == 0 and k == 0:
                k1[basis2.index[(0, 0)], flat] = 1
            elif i == 0:
                k1[basis2.index[mode[k]], flat] = 1
            elif k == 0:
                k2[basis2.index[mode[i]], flat] = 1
    emb /= np.linalg.norm(emb, axis=0)
    # Both slots occupied: project onto the symmetric states.
    alive = [3 * i + k for i in (1, 2) for k in (1, 2)]
    k1[:, alive] = dagger(emb)[:, alive]
    return emb, k1, k2


def check_two_particle_factorization(params: PhysParams, t: float, tol: float = 1e-8,
                                     rel_tol: float = 1e-12, abs_tol: float = 1e-14
                                     ) -> FactorizationReport:
    """Compare cutoff-2 Fock evolution with two independently evolving particles.

    Each particle evolves under the single-particle (cutoff-1) channel; the
    product channel is applied to the symmetrized two-slot embedding of the
    initial state and the result is read back into the Fock space. Returns
    the max matrix-element deviation for several initial states.
    """
    basis2 = build_basis(2)
    basis1 = build_basis(1)
    ops2 = build_lindblad_set(params, basis2)
    ops1 = build_lindblad_set(params, basis1)
    emb, k1, k2 = _slot_maps(basis2)

    s1 = channel_superoperator(ops1, t, rel_tol, abs_tol).reshape(3, 3, 3, 3)
    initial = {
        "|2,0>": make_state_flavor(basis2, 2, 0),
        "|1,1>": make_state_flavor(basis2, 1, 1),
        "|0,2>": make_state_flavor(basis2, 0, 2),
        "|2_S>": make_state_KS(basis2, params, 2),
        "|2_L>": make_state_KL(basis2, params, 2),
    }
    psi = np.zeros(basis2.dim, dtype=complex)
    psi[basis2.sector(2)[-3:]] = [0.6, 0.48j, 0.64]  # normalized two-particle superposition
    initial["superposition"] = _pure(basis2, psi)

    deviations = {}
    for name, rho0 in initial.items():
        fock_t = evolve_density(ops2, rho0, t, rel_tol, abs_tol).data
        r = (emb @ rho0.data @ dagger(emb)).reshape(3, 3, 3, 3)  # [i, k, j, l]
        r_t = np.einsum("ijIJ,klKL,IKJL->ikjl", s1, s1, r).reshape(9, 9)
        product_t = k1 @ r_t @ dagger(k1) + k2 @ r_t @ dagger(k2)
        deviations[name] = float(np.max(np.abs(product_t - fock_t)))
    return FactorizationReport(float(t), tol, deviations)

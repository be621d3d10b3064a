"""Continuous-time Markov chains with exact l1-induced norms: the classical
translation of the regime machinery, and its strongest end-to-end oracle.

Probability vectors are columns; rate matrices have nonnegative off-diagonal
entries and columns summing to zero, so e^{tQ} is column-stochastic and the
1->1 matrix norm (max column absolute sum) plays the role of the induced
trace norm.
"""
import json
import threading
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .regimes import DynamicsBackend
from .superop import DefectiveLiouvillianError, _sort_order


@dataclass(frozen=True)
class ClassicalGenerator:
    """Rate matrix of a continuous-time Markov chain (column convention)."""

    rates: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.rates, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError("rate matrix must be square")
        off = Q - np.diag(np.diag(Q))
        if off.min() < -1e-12:
            raise ValueError("off-diagonal rates must be nonnegative")
        if np.max(np.abs(Q.sum(axis=0))) > 1e-12 * max(1.0, np.abs(Q).max()):
            raise ValueError("columns of the rate matrix must sum to zero")
        object.__setattr__(self, "rates", Q)

    @property
    def dim(self):
        return self.rates.shape[0]


def classical_evolution(generator, t):
    """Column-stochastic transition matrix e^{tQ}."""
    if t < 0:
        raise ValueError("the dynamics is a semigroup: t must be >= 0")
    return scipy.linalg.expm(t * generator.rates)


def l1_norm(M):
    """Exact 1->1 induced norm: max over columns of the column absolute sum."""
    M = np.atleast_2d(M)
    return float(np.max(np.abs(M).sum(axis=0)))


def l1_induced_distance(generator, t1, t2):
    """Exact l1-induced distance between transition matrices at two times."""
    return l1_norm(classical_evolution(generator, t1)
                   - classical_evolution(generator, t2))


class ClassicalBackend(DynamicsBackend):
    """Dynamics backend with exact norms; no optimizer error enters."""

    def __init__(self, generator, zero_tol=None):
        self.generator = generator
        self.dim = generator.dim
        Q = generator.rates
        lam, V = np.linalg.eig(Q)
        order = _sort_order(lam)
        lam, V = lam[order], V[:, order]
        cond = float(np.linalg.cond(V))
        self._defective = (not np.isfinite(cond)) or cond > 1e8
        scale = max(float(np.max(np.abs(lam))), 0.0)
        if zero_tol is None:
            zero_tol = 1e-9 * scale + 1e-300
        self.zero_tol = zero_tol
        self._lam = lam
        self._m_ss = int(np.sum(np.abs(lam) <= zero_tol))
        if not self._defective:
            W = np.linalg.inv(V)
            self._V, self._W = V, W
        else:
            self._V = self._W = None
        self._eye = np.eye(self.dim)
        self._evo_cache = {}
        self._norm_cache = {}
        self._cache_lock = threading.Lock()

    # --- primitive interface --------------------------------------------------
    def evolution_matrix(self, t):
        E = self._evo_cache.get(t)
        if E is None:
            E = classical_evolution(self.generator, t)
            with self._cache_lock:
                self._evo_cache[t] = E
        return E

    def identity_matrix(self):
        return self._eye

    def stationary_matrix(self):
        # zero-eigenspace projector; reducible chains (m_ss > 1) included
        if self._defective:
            raise DefectiveLiouvillianError(np.inf)
        P = self._V[:, :self._m_ss] @ self._W[:self._m_ss, :]
        return P.real if np.max(np.abs(P.imag)) < 1e-10 else P

    def generator_matrix(self):
        return self.generator.rates

    def slow_projector_matrix(self, m):
        if self._defective:
            raise DefectiveLiouvillianError(np.inf)
        if not (self._m_ss <= m <= self.dim):
            raise ValueError("cut m=%d outside [m_ss=%d, %d]"
                             % (m, self._m_ss, self.dim))
        if m not in self.valid_cuts():
            from .superop import InvalidCutError

            raise InvalidCutError("cut m=%d splits a conjugate pair" % m)
        P = self._V[:, :m] @ self._W[:m, :]
        return P.real if np.max(np.abs(P.imag)) < 1e-10 else P

    def matrix_norm(self, M, warm=None):
        return l1_norm(M)

    def norm_result(self, M, warm=None):
        # exact evaluation with a basis-vector witness, mirroring the quantum
        # result shape where needed
        j = int(np.argmax(np.abs(M).sum(axis=0)))
        value = float(np.abs(M[:, j]).sum())

        class _Result:
            pass

        res = _Result()
        res.value = value
        res.witness_state = np.eye(self.dim)[:, j]
        res.witness_observable = np.sign(M[:, j])
        res.converged = True
        return res

    def eigenvalues(self):
        return self._lam

    @property
    def m_ss(self):
        return self._m_ss

    def valid_cuts(self):
        lam = self._lam
        scale = max(np.max(np.abs(lam)), 1.0)
        cuts = []
        for m in range(self._m_ss, self.dim + 1):
            if m == self.dim or m == 0:
                cuts.append(m)
                continue
            a, b = lam[m - 1], lam[m]
            splits = (abs(a.imag) > 1e-12 * scale
                      and abs(a - np.conj(b)) <= 1e-8 * scale)
            if not splits:
                cuts.append(m)
        return cuts

    def random_observable(self, rng):
        f = rng.normal(size=self.dim)
        return f / np.max(np.abs(f))

    def observable_max_norm(self, obs):
        return float(np.max(np.abs(obs)))

    def correlator_matrix(self, obs):
        return np.diag(np.asarray(obs, dtype=float))


def classical_backend(generator, zero_tol=None):
    """Adapter exposing a rate matrix to the generic regime machinery."""
    return ClassicalBackend(generator, zero_tol=zero_tol)


def embed_as_lindbladian(generator):
    """Classical jumps as a dephasing-free quantum model: J_ij = sqrt(Q_ij)
    |i><j| for i != j, zero Hamiltonian."""
    from .superop import QuantumModel

    Q = generator.rates
    n = generator.dim
    jumps = []
    for i in range(n):
        for j in range(n):
            if i != j and Q[i, j] > 0:
                J = np.zeros((n, n), dtype=complex)
                J[i, j] = np.sqrt(Q[i, j])
                jumps.append(J)
    return QuantumModel(hamiltonian=np.zeros((n, n), dtype=complex),
                        jumps=tuple(jumps))


def rate_matrix_from_json(text):
    """Dense rate matrix from a JSON array (or {"rates": [[...]]})."""
    data = json.loads(text)
    if isinstance(data, dict):
        data = data.get("rates", data.get("Q"))
        if data is None:
            raise ValueError("classical model JSON needs a 'rates' entry")
    return ClassicalGenerator(np.asarray(data, dtype=float))


def rate_matrix_from_edges(text, dim=None):
    """Rate matrix from an edge list, one 'i j rate' triple per line.

    Indices are zero-based source -> target; the diagonal is filled so the
    columns sum to zero. Blank lines and '#' comments are skipped.
    """
    entries = []
    max_idx = -1
    for ln, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError("line %d: expected 'i j rate', got %r" % (ln, line))
        i, j, rate = int(parts[0]), int(parts[1]), float(parts[2])
        if i == j:
            raise ValueError("line %d: self-loops are not allowed" % ln)
        if rate < 0:
            raise ValueError("line %d: negative rate" % ln)
        entries.append((i, j, rate))
        max_idx = max(max_idx, i, j)
    n = dim or max_idx + 1
    Q = np.zeros((n, n))
    for i, j, rate in entries:
        Q[j, i] += rate  # rate i -> j enters column i, row j
    Q -= np.diag(Q.sum(axis=0))
    return ClassicalGenerator(Q)

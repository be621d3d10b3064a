"""Operational regime analysis: distances to the initial and asymptotic
limits, the windowed change measure, timescales, and metastability verdicts.

Everything is phrased against an abstract dynamics backend so that the same
machinery runs on quantum models (induced trace norms from the alternating
optimizer) and on classical rate matrices (exact l1-induced norms).
"""
import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .modes import change_thresholds, first_crossing
from . import norms as _norms
from .superop import build_liouvillian, spectral_decompose, vec

# cutoff constants of the verdict logic, with their governing condition
CUTOFF_BASIC = 0.25                     # threshold roots exist
CUTOFF_INITIAL_TAIL = (-1.0 + math.sqrt(2.0)) / 2.0   # 0.2071..., d_I dichotomy on (t'/2, t']
CUTOFF_FINAL_TAIL = -2.0 + math.sqrt(5.0)             # 0.2360..., d_ss dichotomy on (t'/2, t']
CUTOFF_RELAXATION = (1.0 - 1.0 / math.e) / math.e     # 0.2325..., relaxation-time definitions
CUTOFF_LINEAR_GROWTH = (3.0 * math.log(1.5) - 1.0) / 2.0  # 0.1082..., growth-inverse domain
VERDICT_GUARD = 1e-4


class TrivialDynamicsError(ValueError):
    """Raised when an operation requires nontrivial dynamics (||L|| > 0)."""


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing evaluation grid, log- or linearly spaced."""

    t_min: float
    t_max: float
    n_points: int = 50
    spacing: str = "log"

    def __post_init__(self):
        if self.spacing not in ("log", "linear"):
            raise ValueError("spacing must be 'log' or 'linear'")
        if self.spacing == "log" and self.t_min <= 0:
            raise ValueError("log spacing requires t_min > 0")
        if not self.t_max > self.t_min:
            raise ValueError("t_max must exceed t_min")
        if self.n_points < 2:
            raise ValueError("need at least two grid points")

    def times(self):
        if self.spacing == "log":
            return np.geomspace(self.t_min, self.t_max, self.n_points)
        return np.linspace(self.t_min, self.t_max, self.n_points)


class DynamicsBackend:
    """Abstract contractive dynamics with an induced-norm evaluator.

    Concrete backends provide the raw matrices of the evolution family and a
    (possibly optimizer-based) induced norm; all regime quantities derive
    from those. Norm values are cached keyed by the matrix expression, so
    repeated grid sweeps are cheap and thread-order independent.
    """

    dim = None

    # --- primitive interface -------------------------------------------------
    def evolution_matrix(self, t):
        raise NotImplementedError

    def identity_matrix(self):
        raise NotImplementedError

    def stationary_matrix(self):
        raise NotImplementedError

    def generator_matrix(self):
        raise NotImplementedError

    def slow_projector_matrix(self, m):
        raise NotImplementedError

    def matrix_norm(self, M, warm=None):
        """Induced norm of an arbitrary map matrix (exact or lower bound)."""
        raise NotImplementedError

    def eigenvalues(self):
        """Generator eigenvalues sorted by decreasing real part."""
        raise NotImplementedError

    @property
    def m_ss(self):
        raise NotImplementedError

    def valid_cuts(self):
        raise NotImplementedError

    def random_observable(self, rng):
        """Random Hermitian observable (or classical f vector), unit max norm."""
        raise NotImplementedError

    def correlator_matrix(self, obs):
        """Matrix of the measurement superoperator encoding obs correlations."""
        raise NotImplementedError

    # --- derived quantities ---------------------------------------------------
    def _cached(self, key, builder):
        value = self._norm_cache.get(key)
        if value is None:
            value = builder()
            with self._cache_lock:
                self._norm_cache[key] = value
        return value

    def _family_warm(self, family):
        """Reference witness per map family, from a spectrum-derived time.

        Warm starts must not depend on evaluation order (grid sweeps may run
        in threads), so the reference is computed once from fixed times.
        """
        return None

    def distance(self, t1, t2):
        """Induced-norm distance between the evolution maps at two times."""
        if t1 == t2:
            return 0.0
        key = ("pair", min(t1, t2), max(t1, t2))
        return self._cached(key, lambda: self.matrix_norm(
            self.evolution_matrix(t1) - self.evolution_matrix(t2)))

    def distance_to_identity(self, t):
        key = ("ident", t)
        return self._cached(key, lambda: self.matrix_norm(
            self.evolution_matrix(t) - self.identity_matrix(),
            warm=self._family_warm("ident")))

    def distance_to_stationary(self, t):
        key = ("stat", t)
        return self._cached(key, lambda: self.matrix_norm(
            self.evolution_matrix(t) - self.stationary_matrix(),
            warm=self._family_warm("stat")))

    def liouvillian_norm(self):
        return self._cached(("gen",), lambda: self.matrix_norm(self.generator_matrix()))

    def stationary_distance(self):
        return self._cached(("ident-stat",), lambda: self.matrix_norm(
            self.identity_matrix() - self.stationary_matrix()))

    def projector_distance(self, m, t):
        key = ("proj", m, t)
        return self._cached(key, lambda: self.matrix_norm(
            self.evolution_matrix(t) - self.slow_projector_matrix(m)))

    def slow_drift(self, m, t):
        key = ("drift", m, t)
        P = self.slow_projector_matrix(m)
        return self._cached(key, lambda: self.matrix_norm(
            P @ (self.evolution_matrix(t) - self.identity_matrix())))

    def fast_residual(self, m, t):
        key = ("fast", m, t)
        P = self.slow_projector_matrix(m)
        return self._cached(key, lambda: self.matrix_norm(
            (self.identity_matrix() - P) @ self.evolution_matrix(t)))

    def projector_norm(self, m):
        return self._cached(("pnorm", m),
                            lambda: self.matrix_norm(self.slow_projector_matrix(m)))

    def complement_norm(self, m):
        return self._cached(("ipnorm", m), lambda: self.matrix_norm(
            self.identity_matrix() - self.slow_projector_matrix(m)))

    def projected_generator_norm(self, m):
        return self._cached(("pgen", m), lambda: self.matrix_norm(
            self.slow_projector_matrix(m) @ self.generator_matrix()))

    def max_imag(self):
        lam = self.eigenvalues()
        return float(np.max(np.abs(lam.imag))) if lam.size else 0.0

    def slowest_decay_rate(self):
        """-Re of the leading non-stationary eigenvalue."""
        lam = self.eigenvalues()
        if self.m_ss >= lam.size:
            raise TrivialDynamicsError("no decaying modes")
        return float(-lam[self.m_ss].real)

    def fastest_decay_rate(self):
        lam = self.eigenvalues()
        return float(-lam[-1].real)


class QuantumBackend(DynamicsBackend):
    """Quantum dynamics backend; norms come from the alternating optimizer."""

    def __init__(self, model=None, liouvillian=None, spectral=None,
                 zero_tol=None, restarts=None, max_iter=_norms.DEFAULT_MAX_ITER,
                 rel_tol=_norms.DEFAULT_REL_TOL, seed=0, threads=1):
        if liouvillian is None:
            if model is None:
                raise ValueError("provide a model or a liouvillian")
            liouvillian = build_liouvillian(model)
        self.model = model
        self.liouvillian = liouvillian
        self.spectral = spectral or spectral_decompose(liouvillian, zero_tol=zero_tol)
        self.dim = liouvillian.dim
        self.restarts = restarts
        self.max_iter = max_iter
        self.rel_tol = rel_tol
        self.seed = seed
        self.threads = threads
        self._norm_cache = {}
        self._evo_cache = {}
        self._warm_cache = {}
        self._cache_lock = threading.Lock()
        self._eye = np.eye(self.dim * self.dim, dtype=complex)

    def _family_warm(self, family):
        with self._cache_lock:
            if family in self._warm_cache:
                return self._warm_cache[family]
        lam = self.spectral.eigenvalues
        if self.spectral.m_ss >= lam.size:
            witness = None
        else:
            # reference times fixed by the spectrum, not by call order
            if family == "ident":
                t_ref = 1.0 / max(-lam.real[-1], 1e-300)
                M = self.evolution_matrix(t_ref) - self._eye
            else:
                t_ref = 1.0 / max(-lam.real[self.spectral.m_ss], 1e-300)
                M = self.evolution_matrix(t_ref) - self.stationary_matrix()
            witness = self.norm_result(M).witness_state
        with self._cache_lock:
            self._warm_cache[family] = witness
        return witness

    def evolution_matrix(self, t):
        E = self._evo_cache.get(t)
        if E is None:
            E = self.spectral.evolution_matrix(t)
            with self._cache_lock:
                self._evo_cache[t] = E
        return E

    def identity_matrix(self):
        return self._eye

    def stationary_matrix(self):
        return self.spectral.projector_matrix(self.spectral.m_ss)

    def generator_matrix(self):
        return self.liouvillian.matrix

    def slow_projector_matrix(self, m):
        return self.spectral.projector_matrix(m)

    def matrix_norm(self, M, warm=None):
        return self.norm_result(M, warm=warm).value

    def norm_result(self, M, warm=None):
        return _norms._induced_norm_matrix(
            M, self.dim, restarts=self.restarts, max_iter=self.max_iter,
            rel_tol=self.rel_tol, seed=self.seed, warm=warm)

    def eigenvalues(self):
        return self.spectral.eigenvalues

    @property
    def m_ss(self):
        return self.spectral.m_ss

    def valid_cuts(self):
        return self.spectral.valid_cuts()

    def random_observable(self, rng):
        from .operators import max_norm

        G = rng.normal(size=(self.dim, self.dim)) \
            + 1j * rng.normal(size=(self.dim, self.dim))
        O = (G + G.conj().T) / 2.0
        return O / max_norm(O)

    def observable_max_norm(self, obs):
        from .operators import max_norm

        return max_norm(obs)

    def correlator_matrix(self, obs):
        return _norms.correlator_superop(obs).matrix


@dataclass(frozen=True)
class RegimeVerdict:
    """Window classification against the threshold dichotomies."""

    t_start: float
    t_end: float
    c_delta: float
    c_delta2: float
    argmax_t: float
    d_initial_at_start: float
    d_stationary_at_end: float
    threshold_lower: float
    threshold_upper: float
    verdict: str
    validity_flags: dict = field(default_factory=dict)


@dataclass(frozen=True)
class TimescaleReport:
    """Shortest and longest dynamics timescales with crossing diagnostics.

    The window-relative relaxation times are attached when a metastable
    window is available (see relaxation_times)."""

    tau_0: float | None
    tau_ss: float | None
    tau_dprime: float | None = None
    tau_prime: float | None = None
    tau_0_bracket: tuple | None = None
    tau_ss_bracket: tuple | None = None
    tau_0_residual: float | None = None
    tau_ss_residual: float | None = None
    absent: dict = field(default_factory=dict)

    def with_relaxation(self, tau_dprime, tau_prime):
        import dataclasses

        return dataclasses.replace(self, tau_dprime=tau_dprime,
                                   tau_prime=tau_prime)


def _window_grid(t_start, t_end, n_points=33):
    return np.geomspace(t_start, t_end, n_points) if t_start > 0 \
        else np.linspace(t_start, t_end, n_points)


def _golden_refine(f, a, b, rel_tol=1e-6, max_iter=80):
    """Golden-section maximization of f on [a, b]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if (b - a) <= rel_tol * max(abs(a), abs(b), 1e-300):
            break
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
    return (x1, f1) if f1 >= f2 else (x2, f2)


def change_measure(dyn, t_start, t_end, n_grid=33, refine_rel_tol=1e-6):
    """Windowed change sup_{t in [t_start, t_end]} ||e^{t_start L} - e^{t L}||.

    Contractivity reduces the pair supremum to distances from the window
    start. Evaluated on a log grid, then refined by golden section around the
    grid maximum. Returns (value, argmax time).
    """
    if t_end < t_start:
        raise ValueError("window end before start")
    if t_end == t_start:
        return 0.0, t_start
    ts = _window_grid(t_start, t_end, n_grid)
    vals = [dyn.distance(t_start, t) for t in ts]
    k = int(np.argmax(vals))
    a = ts[max(0, k - 1)]
    b = ts[min(len(ts) - 1, k + 1)]
    t_ref, v_ref = _golden_refine(lambda t: dyn.distance(t_start, t), a, b,
                                  rel_tol=refine_rel_tol)
    if v_ref >= vals[k]:
        return float(v_ref), float(t_ref)
    return float(vals[k]), float(ts[k])


def change_measure_doubling(dyn, t_start, t_end, n_grid=33):
    """sup_{t in [t_start, t_end/2]} ||e^{tL} - e^{2tL}||, the doubling-change
    variant that may tighten the thresholds."""
    if t_end < 2 * t_start:
        return 0.0
    ts = _window_grid(t_start, t_end / 2.0, n_grid)
    vals = [dyn.distance(t, 2 * t) for t in ts]
    k = int(np.argmax(vals))
    a = ts[max(0, k - 1)]
    b = ts[min(len(ts) - 1, k + 1)]
    _, v_ref = _golden_refine(lambda t: dyn.distance(t, 2 * t), a, b)
    return float(max(vals[k], v_ref))


def state_change_measure(spec, rho0, t_start, t_end, n_grid=33):
    """Windowed trace-norm change of the trajectory started from rho0."""
    from .operators import trace_norm

    ts = _window_grid(t_start, t_end, n_grid)
    v0 = spec.evolution_matrix(t_start) @ vec(rho0)
    vals = [trace_norm((spec.evolution_matrix(t) @ vec(rho0) - v0)
                       .reshape(spec.dim, spec.dim, order="F")) for t in ts]
    return float(np.max(vals))


def observable_average_change(spec, rho0, obs, t_start, t_end, n_grid=129):
    """Windowed change of Tr(obs rho_t), normalized by the observable max norm."""
    from .operators import max_norm

    ts = _window_grid(t_start, t_end, n_grid)
    w = vec(obs.conj().T)
    traj = [np.vdot(w, spec.evolution_matrix(t) @ vec(rho0)).real for t in ts]
    return float((np.max(traj) - np.min(traj)) / max_norm(obs))


def timescales(dyn, t_probe_max=None, value_tol=1e-6):
    """First crossings defining the shortest and final relaxation timescales.

    The shortest timescale is the first time the distance to the identity
    reaches 1 - 1/e (scan then bisect; the distance may oscillate). The final
    relaxation time is the first time the distance to the stationary
    projection decays to 1/e (monotone, bracket then bisect).
    """
    lam = dyn.eigenvalues()
    if dyn.liouvillian_norm() <= 1e-14 or dyn.m_ss >= lam.size:
        raise TrivialDynamicsError("timescales require nontrivial dynamics")

    target_0 = 1.0 - 1.0 / math.e
    absent = {}
    tau_0 = tau_ss = None
    bracket_0 = bracket_ss = None
    res_0 = res_ss = None

    if dyn.stationary_distance() < target_0 - 1e-12:
        absent["tau_0"] = ("distance to identity saturates at %.6g < 1 - 1/e"
                           % dyn.stationary_distance())
    else:
        # guaranteed crossing before 1/(fastest decay rate)
        t_hi = 1.0 / dyn.fastest_decay_rate() if t_probe_max is None else t_probe_max
        step = t_hi / 40.0
        if dyn.max_imag() > 0:
            step = min(step, 0.35 / dyn.max_imag())
        f = dyn.distance_to_identity
        t_cross = None
        t_top = t_hi
        while t_cross is None and t_top <= 64 * t_hi:
            t_cross = first_crossing(f, target_0, t_max=1.05 * t_top,
                                     step=step, value_tol=value_tol)
            t_top *= 2
        if t_cross is None:
            absent["tau_0"] = "no crossing of 1 - 1/e located"
        else:
            tau_0 = float(t_cross)
            res_0 = abs(f(tau_0) - target_0)
            bracket_0 = (max(0.0, tau_0 - step), tau_0 + step)

    target_ss = 1.0 / math.e
    t_lo = 0.0
    d_lo = dyn.distance_to_stationary(0.0)
    if d_lo <= target_ss:
        absent["tau_ss"] = "distance to stationary starts at %.6g <= 1/e" % d_lo
    else:
        t_hi = 1.0 / dyn.slowest_decay_rate()
        bracketed = False
        for _ in range(40):
            if dyn.distance_to_stationary(t_hi) < target_ss:
                bracketed = True
                break
            t_lo = t_hi
            t_hi *= 2.0
        if not bracketed:
            absent["tau_ss"] = ("distance to stationary still %.6g > 1/e at "
                                "t = %.3g" % (dyn.distance_to_stationary(t_lo),
                                              t_lo))
        else:
            a, b = t_lo, t_hi
            for _ in range(200):
                mid = (a + b) / 2.0
                v = dyn.distance_to_stationary(mid)
                if abs(v - target_ss) <= value_tol \
                        and (b - a) <= 1e-12 * max(b, 1e-300):
                    a = b = mid
                    break
                if v > target_ss:
                    a = mid
                else:
                    b = mid
            tau_ss = float((a + b) / 2.0)
            res_ss = abs(dyn.distance_to_stationary(tau_ss) - target_ss)
            bracket_ss = (a, b)

    return TimescaleReport(tau_0=tau_0, tau_ss=tau_ss,
                           tau_0_bracket=bracket_0, tau_ss_bracket=bracket_ss,
                           tau_0_residual=res_0, tau_ss_residual=res_ss,
                           absent=absent)


def classify_regime(dyn, t_start, t_end, n_grid=33, guard=VERDICT_GUARD,
                    with_doubling=True):
    """Classify a window as Initial / Final / Metastable / Indeterminate.

    The change measure fixes threshold roots (lower, upper); the distance to
    the identity and to the stationary projection must stay within one branch
    of their dichotomies across the window, with the upper thresholds relaxed
    by the change measure on the second half of the window. Cutoff constants
    carry a guard band against discretization of the supremum.
    """
    if not t_end >= 2 * t_start > 0:
        raise ValueError("window must satisfy t_end >= 2 t_start > 0")
    c_delta, argmax_t = change_measure(dyn, t_start, t_end, n_grid=n_grid)
    c_doubling = change_measure_doubling(dyn, t_start, t_end, n_grid=n_grid) \
        if with_doubling else math.nan
    d_init_start = dyn.distance_to_identity(t_start)
    d_stat_end = dyn.distance_to_stationary(t_end)

    flags = {
        "basic_cutoff": c_delta < CUTOFF_BASIC - guard,
        "initial_tail_cutoff": c_delta < CUTOFF_INITIAL_TAIL - guard,
        "final_tail_cutoff": c_delta < CUTOFF_FINAL_TAIL - guard,
        "relaxation_cutoff": c_delta <= CUTOFF_RELAXATION - guard,
        "linear_growth_cutoff": c_delta <= CUTOFF_LINEAR_GROWTH - guard,
    }

    if not flags["basic_cutoff"]:
        return RegimeVerdict(t_start, t_end, c_delta, c_doubling, argmax_t,
                             d_init_start, d_stat_end, math.nan, math.nan,
                             "Indeterminate",
                             {**flags, "gating_cutoff": "1/4"})

    lower, upper = change_thresholds(c_delta)
    ts = _window_grid(t_start, t_end, n_grid)
    first_half = ts <= t_end / 2.0 + 1e-12 * t_end
    d_init = np.array([dyn.distance_to_identity(t) for t in ts])
    d_stat = np.array([dyn.distance_to_stationary(t) for t in ts])

    up_init = np.where(first_half, upper, upper - c_delta)
    lo_init = np.where(first_half, lower, lower + c_delta)
    up_stat = np.where(first_half, upper, upper - c_delta)

    init_upper_branch = bool(np.all(d_init >= up_init - guard))
    init_lower_branch = bool(np.all(d_init <= lo_init + guard))
    stat_upper_branch = bool(np.all(d_stat >= up_stat - guard))
    stat_lower_branch = bool(np.all(d_stat <= lower + guard))

    if init_lower_branch:
        verdict = "Initial"
    elif stat_lower_branch:
        verdict = "Final"
    elif init_upper_branch and stat_upper_branch:
        if flags["initial_tail_cutoff"] and flags["final_tail_cutoff"]:
            verdict = "Metastable"
        else:
            verdict = "Indeterminate"
            flags["gating_cutoff"] = ("(-1+sqrt(2))/2"
                                      if not flags["initial_tail_cutoff"]
                                      else "-2+sqrt(5)")
    else:
        verdict = "Indeterminate"

    return RegimeVerdict(t_start, t_end, c_delta, c_doubling, argmax_t,
                         d_init_start, d_stat_end, lower, upper,
                         verdict, flags)


def scan_metastable(dyn, c_delta_max=0.1, ratio=2.0, grid=None, n_grid=33,
                    n_scan=24, threads=1, merge=True):
    """Slide windows (t, ratio t) over a grid and return Metastable verdicts.

    Windows exceeding c_delta_max are dropped; adjacent Metastable windows
    are merged when the merged span still classifies Metastable. Output is
    ordered by ascending window start.
    """
    if ratio < 2.0:
        raise ValueError("ratio must be at least 2 (pronounced time regime)")
    if grid is None:
        scales = timescales(dyn)
        if scales.tau_0 is None or scales.tau_ss is None:
            raise TrivialDynamicsError("cannot bracket scan grid without "
                                       "timescales")
        lo = scales.tau_0 * 1.05
        hi = scales.tau_ss / ratio
        if hi <= lo:
            return []
        grid = np.geomspace(lo, hi, n_scan)
    else:
        grid = np.asarray(grid, dtype=float)

    grid = np.sort(grid)

    def probe(t):
        # cheap lower bound on the window change: grid values only
        probe_ts = _window_grid(t, ratio * t, max(7, n_grid // 2))
        if max(dyn.distance(t, s) for s in probe_ts) > c_delta_max:
            return None
        return classify_regime(dyn, t, ratio * t, n_grid=n_grid,
                               with_doubling=False)

    if threads and threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            verdicts = list(pool.map(probe, grid))
    else:
        verdicts = [probe(t) for t in grid]

    hits = [(i, v) for i, v in enumerate(verdicts)
            if v is not None and v.verdict == "Metastable"
            and v.c_delta <= c_delta_max]
    if not hits:
        return []
    if not merge:
        return [v for _, v in hits]

    # merge runs of adjacent grid windows greedily, keeping every reported
    # window Metastable and within the change budget
    out = []
    run = [hits[0]]
    for item in hits[1:]:
        if item[0] == run[-1][0] + 1:
            run.append(item)
        else:
            out.extend(_merge_run(dyn, [v for _, v in run], c_delta_max, n_grid))
            run = [item]
    out.extend(_merge_run(dyn, [v for _, v in run], c_delta_max, n_grid))
    return sorted(out, key=lambda v: v.t_start)


def _merge_run(dyn, run, c_delta_max, n_grid):
    merged = []
    i = 0
    while i < len(run):
        best = run[i]
        j = i + 1
        while j < len(run):
            span = classify_regime(dyn, best.t_start, run[j].t_end,
                                   n_grid=n_grid, with_doubling=False)
            if span.verdict == "Metastable" and span.c_delta <= c_delta_max:
                best = span
                j += 1
            else:
                break
        merged.append(best)
        i = j
    # final windows are reported with the doubling-change variant filled in
    return [classify_regime(dyn, v.t_start, v.t_end, n_grid=n_grid)
            for v in merged]


def relaxation_times(dyn, t_start, t_end, c_delta, value_tol=1e-6):
    """Initial relaxation time and the onset time of the long-time dynamics.

    The first is the shortest time at which the distance to the window start
    map reaches 1/e - lower threshold; the second the shortest t >= t_start
    at which it reaches 1 - 1/e - lower threshold. Requires the change
    measure to be below the relaxation cutoff.
    """
    if c_delta > CUTOFF_RELAXATION:
        raise ValueError("relaxation times require c_delta <= (1 - 1/e)/e")
    lower, _ = change_thresholds(c_delta)
    f = lambda t: dyn.distance(t_start, t)

    target_d = 1.0 / math.e - lower
    step = t_start / 50.0
    if dyn.max_imag() > 0:
        step = min(step, 0.35 / dyn.max_imag())
    # distance decreases from ~d_I(t_start) towards 0 at t -> t_start
    tau_dprime = first_crossing(f, target_d, t_max=t_start, step=step,
                                value_tol=value_tol)

    target_p = 1.0 - 1.0 / math.e - lower
    # after a metastable window the distance grows essentially monotonically
    # (fast-mode wiggles are bounded by the in-window change), so a geometric
    # bracket plus bisection locates the crossing
    tau_prime = None
    t_lo, f_lo = t_start, f(t_start) - target_p
    horizon = max(t_end, 2 * t_start)
    for _ in range(80):
        probes = np.geomspace(t_lo, horizon, 24)[1:]
        bracket = None
        for t_hi in probes:
            f_hi = f(float(t_hi)) - target_p
            if f_lo * f_hi <= 0.0:
                bracket = (t_lo, float(t_hi), f_lo, f_hi)
                break
            t_lo, f_lo = float(t_hi), f_hi
        if bracket is not None:
            a, b, fa, fb = bracket
            for _ in range(200):
                mid = (a + b) / 2.0
                fm = f(mid) - target_p
                if abs(fm) <= value_tol and (b - a) <= 1e-12 * max(b, 1e-300):
                    a = b = mid
                    break
                if fa * fm <= 0.0:
                    b, fb = mid, fm
                else:
                    a, fa = mid, fm
            tau_prime = (a + b) / 2.0
            break
        horizon *= 8.0
        if horizon > 1e9 * t_start:
            break
        # give up early when the distance can no longer reach the target
        if f_lo < 0 and dyn.distance_to_stationary(t_lo) \
                + dyn.distance_to_stationary(t_start) < target_p - 1e-9:
            break
    return (None if tau_dprime is None else float(tau_dprime),
            None if tau_prime is None else float(tau_prime))


def distinguishability_bounds(c_delta):
    """Holevo-Helstrom error floor and Fuchs-van de Graaf fidelity bracket
    for states separated by at most c_delta in trace norm."""
    min_error = 0.5 - c_delta / 4.0
    fidelity_low = 1.0 - c_delta / 2.0
    fidelity_high = 1.0 - (c_delta / 2.0) ** 2
    return min_error, fidelity_low, fidelity_high

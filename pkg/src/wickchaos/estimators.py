"""scikit-learn style wrappers around the functional solvers.

``fit`` runs a solve (or a decay fit) on chaos-field input; ``predict`` reads
the fitted result back.  Hyper-parameters follow the estimator convention, so
``get_params``/``set_params``/``clone`` behave as usual.
"""
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .multiindex import TruncationPolicy, as_multiindex
from .propagator import PropagatorConfig
from .solver import SPDEProblem, solve_linear, solve_semilinear, solve_wick_square, verify_bounds
from .validation import check_chaos_field, check_norm_table, check_time
from .wick import ChaosField, fit_decay_values


class ChaosSchrodingerSolver(BaseEstimator):
    """Solve a Wick-type Schroedinger SPDE for the initial chaos field passed to ``fit``.

    mode: "linear", "semilinear" (needs ``nonlinearity``) or "wick2" (uses ``lam``).
    """

    def __init__(self, coeffs=None, perturbations=None, hamiltonian=None, K=2, N=2, T=1.0,
                 dt=0.01, mode="linear", lam=0.0, nonlinearity=None, z=0, zeta=0.0, r=0.0,
                 scheme="spectral", linear_solver_tol=1e-12, threads=1):
        self.coeffs = coeffs
        self.perturbations = perturbations
        self.hamiltonian = hamiltonian
        self.K = K
        self.N = N
        self.T = T
        self.dt = dt
        self.mode = mode
        self.lam = lam
        self.nonlinearity = nonlinearity
        self.z = z
        self.zeta = zeta
        self.r = r
        self.scheme = scheme
        self.linear_solver_tol = linear_solver_tol
        self.threads = threads

    def _problem(self):
        return SPDEProblem(self.coeffs, self.perturbations or {}, TruncationPolicy(self.K, self.N),
                           self.T, r=self.r, scheme=self.scheme, hamiltonian=self.hamiltonian)

    def fit(self, X, y=None):
        problem = self._problem()
        X = check_chaos_field(X, problem.policy, problem.grid)
        X = ChaosField(problem.policy, problem.grid, dict(X.items()))
        cfg = PropagatorConfig(dt=self.dt, linear_solver_tol=self.linear_solver_tol)
        if self.mode == "linear":
            traj, report = solve_linear(problem, X, cfg, self.z, self.zeta, threads=self.threads)
        elif self.mode == "wick2":
            traj, report = solve_wick_square(problem, self.lam, X, cfg, self.z, self.zeta,
                                             threads=self.threads)
        elif self.mode == "semilinear":
            if self.nonlinearity is None:
                raise ValueError("semilinear mode needs a nonlinearity")
            traj, report = solve_semilinear(problem, self.nonlinearity, X, cfg, self.z, self.zeta,
                                            threads=self.threads)
        else:
            raise ValueError(f"unknown mode {self.mode!r}")
        self.problem_ = problem
        self.trajectory_ = traj
        self.report_ = report
        self.times_ = traj.times
        return self

    def predict(self, t):
        """Chaos field at a stored time ``t``."""
        check_is_fitted(self, "trajectory_")
        return self.trajectory_.at(check_time(t, self.times_))

    def expectation(self, t):
        return self.predict(t)[()]

    def verify(self):
        check_is_fitted(self, "report_")
        return verify_bounds(self.report_, self.problem_, self.lam)


class DecayFitter(BaseEstimator):
    """Majorant ``||F_alpha|| <= K (2N)^(p alpha)`` fitted to a chaos field or a norm table."""

    def __init__(self, z=0, zeta=0.0):
        self.z = z
        self.zeta = zeta

    def fit(self, X, y=None):
        if isinstance(X, ChaosField):
            X = X.hzz_norms(self.z, self.zeta)
        fit = fit_decay_values(check_norm_table(X))
        self.K_fit_ = fit.K_fit
        self.p_fit_ = fit.p_fit
        self.max_violation_ = fit.max_violation
        self.fit_ = fit
        return self

    def predict(self, X):
        """Bound values at the multi-indices in ``X``."""
        check_is_fitted(self, "fit_")
        return [self.fit_.bound(as_multiindex(a)) for a in X]

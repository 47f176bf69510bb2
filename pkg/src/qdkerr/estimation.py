"""Least-squares estimation of the coherent coupling rate and the homogeneous lifetime."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logit

from .ensemble import PhaseModel, phase_scan
from .errors import DomainError, ExtrapolationError, NonConvergenceError
from .qed import HBAR_UEV_NS, CavitySpec, beta_factor, coupling_from_rate, purcell_rate

# -- data containers -------------------------------------------------------------------


@dataclass(frozen=True)
class PhaseDataset:
    """Measured phase (rad) against laser energy (ueV, absolute)."""

    omega: np.ndarray
    phi: np.ndarray
    weight: np.ndarray = None

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        phi = np.asarray(self.phi, dtype=float)
        weight = np.ones_like(omega) if self.weight is None else np.asarray(self.weight, dtype=float)
        if not (omega.shape == phi.shape == weight.shape) or omega.ndim != 1:
            raise DomainError("omega, phi and weight must be 1-D arrays of equal length")
        if np.any(np.diff(omega) <= 0):
            raise DomainError("frequencies must be strictly increasing")
        if np.any(weight < 0) or not np.all(np.isfinite(phi)):
            raise DomainError("weights must be >= 0 and phases finite")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "weight", weight)

    def __len__(self):
        return self.omega.size


@dataclass(frozen=True)
class GammaRatioTable:
    """Tabulated gamma(w)/gamma_hom against detuning from the cavity (ueV)."""

    detuning: np.ndarray
    ratio: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.detuning, dtype=float)
        y = np.asarray(self.ratio, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.size < 1:
            raise DomainError("gamma-ratio table needs matching 1-D columns")
        if np.any(np.diff(x) <= 0):
            raise DomainError("gamma-ratio detunings must be strictly increasing")
        if np.any(y < 0):
            raise DomainError("gamma ratio must be >= 0")
        object.__setattr__(self, "detuning", x)
        object.__setattr__(self, "ratio", y)

    def __call__(self, detuning):
        d = np.asarray(detuning, dtype=float)
        lo, hi = self.detuning[0], self.detuning[-1]
        if np.any((d < lo) | (d > hi)):
            raise ExtrapolationError(f"detuning outside tabulated range [{lo}, {hi}] ueV")
        return np.interp(d, self.detuning, self.ratio)


@dataclass(frozen=True)
class LifetimeDataset:
    """Measured 1/T1 (ns^-1) against emitter energy (ueV, absolute)."""

    omega: np.ndarray
    inverse_t1: np.ndarray

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        inv = np.asarray(self.inverse_t1, dtype=float)
        if omega.ndim != 1 or omega.shape != inv.shape or omega.size < 1:
            raise DomainError("omega and inverse_t1 must be 1-D arrays of equal length")
        if np.any(inv <= 0):
            raise DomainError("inverse_t1 must be > 0")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "inverse_t1", inv)


@dataclass
class FitResult:
    params: dict
    uncertainties: dict
    beta: float
    beta_uncertainty: float
    residual_rms: float
    chi2: float
    iterations: int
    converged: bool
    at_bound: bool = False
    gradient_norm: float = 0.0
    derived: dict = field(default_factory=dict)
    residuals: np.ndarray = None
    cost_history: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def summary(self) -> dict:
        """JSON-friendly view (residual vector and history omitted)."""
        return {
            "params": {k: float(v) for k, v in self.params.items()},
            "uncertainties": {k: float(v) for k, v in self.uncertainties.items()},
            "derived": {k: float(v) for k, v in self.derived.items()},
            "beta": float(self.beta),
            "beta_uncertainty": float(self.beta_uncertainty),
            "residual_rms": float(self.residual_rms),
            "chi2": float(self.chi2),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "at_bound": bool(self.at_bound),
            "gradient_norm": float(self.gradient_norm),
            "metadata": self.metadata,
        }


def residuals(observed, predicted, weights=None) -> np.ndarray:
    """sqrt(w) * (observed - predicted)."""
    observed = np.asarray(observed, dtype=float)
    diff = observed - np.asarray(predicted, dtype=float)
    if weights is None:
        return diff
    return np.sqrt(np.asarray(weights, dtype=float)) * diff


# -- optimizer ----------------------------------------------------------------------------


def numeric_jacobian(fun, x, rel_step=1e-4, lower=None, upper=None):
    """Central-difference Jacobian; falls back to a one-sided step next to a bound.

    The default step is coarse on purpose: transition energies are absolute
    (~1e6 ueV, ulp ~2e-10), so much smaller shifts are dominated by roundoff.
    """
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(fun(x), dtype=float)
    jac = np.empty((f0.size, x.size))
    for k in range(x.size):
        h = rel_step * max(1.0, abs(x[k]))
        fwd = upper is None or x[k] + h <= upper[k]
        bwd = lower is None or x[k] - h >= lower[k]
        xp, xm = x.copy(), x.copy()
        if fwd and bwd:
            xp[k] += h
            xm[k] -= h
            jac[:, k] = (fun(xp) - fun(xm)) / (2 * h)
        elif fwd:
            xp[k] += h
            jac[:, k] = (fun(xp) - f0) / h
        else:
            xm[k] -= h
            jac[:, k] = (f0 - fun(xm)) / h
    return jac


@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    residuals: np.ndarray
    jac: np.ndarray
    iterations: int
    converged: bool
    gradient_norm: float
    history: list
    message: str


def _scaled_gradient(jac, res, res_floor=0.0):
    """max_j |J_j . r| / (|J_j| max(|r|, res_floor)), the MINPACK gtol measure.

    The floor stops residuals at roundoff level (an exact fit) from producing an
    arbitrary cosine.
    """
    rnorm = max(np.linalg.norm(res), res_floor)
    if rnorm == 0:
        return 0.0
    cols = np.linalg.norm(jac, axis=0)
    grad = jac.T @ res
    with np.errstate(divide="ignore", invalid="ignore"):
        cos = np.where(cols > 0, np.abs(grad) / (cols * rnorm), 0.0)
    return float(cos.max()) if cos.size else 0.0


def levenberg_marquardt(fun, x0, max_iter=200, gtol=1e-8, xtol=1e-12, ftol=1e-15, lam=1e-3,
                        conv_tol=1e-6, max_step=None, res_floor=0.0):
    """Damped Gauss-Newton with Marquardt diagonal scaling.

    Only steps that lower the cost are accepted, so ``history`` is non-increasing.
    ``max_step`` caps the step length; with saturating parameter transforms this
    keeps a single overshoot from landing where the Jacobian vanishes.
    ``res_floor`` is the residual norm treated as an exact fit.
    Iteration stops once the scaled gradient drops below ``gtol`` or the step/cost
    change stalls; ``converged`` is reported only if the scaled gradient is then
    below ``conv_tol``.
    """
    x = np.asarray(x0, dtype=float).copy()
    res = np.asarray(fun(x), dtype=float)
    cost = 0.5 * res @ res
    history = [cost]
    message = "max_iter reached"
    it = 0
    jac = numeric_jacobian(fun, x)
    for it in range(1, max_iter + 1):
        gnorm = _scaled_gradient(jac, res, res_floor)
        if gnorm <= gtol:
            message = "gradient below tolerance"
            return LMResult(x, cost, res, jac, it - 1, True, gnorm, history, message)
        jtj = jac.T @ jac
        grad = jac.T @ res
        diag = np.diag(jtj).copy()
        diag[diag <= 0] = 1.0
        accepted = False
        while lam < 1e16:
            try:
                step = -np.linalg.solve(jtj + lam * np.diag(diag), grad)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            length = np.linalg.norm(step)
            if max_step is not None and length > max_step:
                step *= max_step / length
            x_new = x + step
            res_new = np.asarray(fun(x_new), dtype=float)
            cost_new = 0.5 * res_new @ res_new
            if np.isfinite(cost_new) and cost_new < cost:
                accepted = True
                break
            lam *= 10
        if not accepted:
            message = "no further decrease possible"
            gnorm = _scaled_gradient(jac, res, res_floor)
            return LMResult(x, cost, res, jac, it, gnorm <= conv_tol, gnorm, history, message)
        small_step = np.linalg.norm(step) <= xtol * (np.linalg.norm(x) + xtol)
        small_drop = cost - cost_new <= ftol * cost
        x, res, cost = x_new, res_new, cost_new
        history.append(cost)
        lam = max(lam / 10, 1e-12)
        jac = numeric_jacobian(fun, x)
        if small_step or small_drop:
            gnorm = _scaled_gradient(jac, res, res_floor)
            message = "step below tolerance"
            return LMResult(x, cost, res, jac, it, gnorm <= conv_tol, gnorm, history, message)
    gnorm = _scaled_gradient(jac, res, res_floor)
    return LMResult(x, cost, res, jac, it, gnorm <= conv_tol, gnorm, history, message)


def _covariance(jac_native, res, n_params):
    dof = res.size - n_params
    if dof <= 0:
        return np.full((n_params, n_params), np.nan)
    s2 = (res @ res) / dof
    try:
        return np.linalg.inv(jac_native.T @ jac_native) * s2
    except np.linalg.LinAlgError:
        return np.full((n_params, n_params), np.nan)


# transformed-parameter step cap (logit / log units)
MAX_LOGIT_STEP = 2.0
# residual norm, relative to the data norm, that counts as an exact fit
EXACT_FIT = 1e-9


# -- coupling fit ---------------------------------------------------------------------------


def _phase_model_at(model: PhaseModel, Gamma_qd: float, total_linewidth: float, delta_z=None):
    g = float(coupling_from_rate(Gamma_qd, model.dipole.omega_x, model.cavity))
    changes = {"g": g, "gamma": max(total_linewidth - Gamma_qd, 0.0)}
    if delta_z is not None:
        changes["delta_z"] = delta_z
    return model.with_dipole(**changes)


def predicted_phase(omega, model: PhaseModel) -> np.ndarray:
    return phase_scan(np.asarray(omega, dtype=float), model).phi


def fit_coupling(data: PhaseDataset, model: PhaseModel, total_linewidth: float,
                 free_delta_z: bool = False, parameterization: str = "Gamma",
                 initial_Gamma: float | None = None, max_iter: int = 200,
                 boundary_tol: float = 1e-3) -> FitResult:
    """Fit the cavity-mediated rate Gamma at the dot energy to a phase scan.

    ``total_linewidth`` is the transform-limited FWHM Gamma + gamma from the lifetime;
    gamma follows as ``total_linewidth - Gamma`` so Gamma is confined to (0, total].
    Everything else (cavity, sigma, splitting, spins) is taken from ``model`` unless
    ``free_delta_z`` frees the Zeeman splitting as a second parameter.

    ``parameterization`` selects whether the optimizer moves Gamma or g; both share
    one optimum.
    """
    if not total_linewidth > 0:
        raise DomainError("total_linewidth must be > 0")
    n_free = 2 if free_delta_z else 1
    if len(data) < 5 * n_free:
        raise DomainError(f"need at least {5 * n_free} data points, got {len(data)}")
    if parameterization not in ("Gamma", "g"):
        raise DomainError("parameterization must be 'Gamma' or 'g'")

    omega_x = model.dipole.omega_x
    g_max = float(coupling_from_rate(total_linewidth, omega_x, model.cavity))
    gamma_star = model.dipole.gamma_star

    def to_gamma(theta0):
        if parameterization == "Gamma":
            return float(total_linewidth * expit(theta0))
        g = g_max * expit(theta0)
        return float(purcell_rate(omega_x, model.cavity, g))

    def unpack(theta):
        Gamma = to_gamma(theta[0])
        dz = float(np.exp(theta[1])) if free_delta_z else None
        return Gamma, dz

    def fun(theta):
        Gamma, dz = unpack(theta)
        m = _phase_model_at(model, Gamma, total_linewidth, dz)
        return residuals(data.phi, predicted_phase(data.omega, m), data.weight)

    G0 = 0.5 * total_linewidth if initial_Gamma is None else initial_Gamma
    G0 = min(max(G0, 1e-6 * total_linewidth), (1 - 1e-6) * total_linewidth)
    if parameterization == "Gamma":
        theta0 = [logit(G0 / total_linewidth)]
    else:
        theta0 = [logit(float(coupling_from_rate(G0, omega_x, model.cavity)) / g_max)]
    if free_delta_z:
        theta0.append(np.log(max(model.dipole.delta_z, 1e-3)))

    lm = levenberg_marquardt(fun, theta0, max_iter=max_iter, max_step=MAX_LOGIT_STEP,
                            res_floor=EXACT_FIT * np.linalg.norm(residuals(data.phi, 0.0, data.weight)))
    Gamma, dz = unpack(lm.x)

    # uncertainties from curvature in native parameters
    native = [Gamma] + ([dz] if free_delta_z else [])

    def fun_native(p):
        m = _phase_model_at(model, p[0], total_linewidth, p[1] if free_delta_z else None)
        return residuals(data.phi, predicted_phase(data.omega, m), data.weight)

    lower = [0.0] + ([0.0] if free_delta_z else [])
    upper = [total_linewidth] + ([np.inf] if free_delta_z else [])
    jac_native = numeric_jacobian(fun_native, native, lower=lower, upper=upper)
    cov = _covariance(jac_native, lm.residuals, n_free)
    sig_Gamma = float(np.sqrt(cov[0, 0]))

    gamma = max(total_linewidth - Gamma, 0.0)
    beta = float(beta_factor(Gamma, gamma, gamma_star))
    d_beta = (gamma + gamma_star) / (total_linewidth + gamma_star) ** 2  # dbeta/dGamma at fixed total
    params = {"Gamma_ueV": Gamma}
    uncertainties = {"Gamma_ueV": sig_Gamma}
    if free_delta_z:
        params["delta_z_ueV"] = dz
        uncertainties["delta_z_ueV"] = float(np.sqrt(cov[1, 1]))
    at_bound = Gamma >= (1 - boundary_tol) * total_linewidth or Gamma <= boundary_tol * total_linewidth
    g_fit = float(coupling_from_rate(Gamma, omega_x, model.cavity))
    result = FitResult(
        params=params,
        uncertainties=uncertainties,
        beta=beta,
        beta_uncertainty=abs(d_beta) * sig_Gamma,
        residual_rms=float(np.sqrt(np.mean(lm.residuals**2))),
        chi2=float(lm.residuals @ lm.residuals),
        iterations=lm.iterations,
        converged=lm.converged,
        at_bound=bool(at_bound),
        gradient_norm=lm.gradient_norm,
        derived={"gamma_ueV": gamma, "g_ueV": g_fit, "total_linewidth_ueV": total_linewidth},
        residuals=lm.residuals,
        cost_history=lm.history,
        metadata={
            "parameterization": parameterization,
            "free_delta_z": free_delta_z,
            "gamma_star_ueV": gamma_star,
            "weights": "unit" if np.all(data.weight == 1) else "user",
            "uncertainty": "curvature, scaled by reduced chi2",
            "optimizer_message": lm.message,
        },
    )
    if not lm.converged and lm.iterations >= max_iter:
        raise NonConvergenceError(f"coupling fit did not converge in {max_iter} iterations", result)
    return result


# -- lifetime fit ---------------------------------------------------------------------------


def lifetime_model(omega, cavity: CavitySpec, g: float, table: GammaRatioTable, t1_hom_ns: float):
    """1/T1 (ns^-1) = (Gamma(w) + ratio(w) * hbar / T1_hom) / hbar."""
    Gamma = purcell_rate(omega, cavity, g)
    ratio = table(np.asarray(omega, dtype=float) - cavity.omega_c)
    return Gamma / HBAR_UEV_NS + ratio / t1_hom_ns


def fit_lifetime_scale(data: LifetimeDataset, cavity: CavitySpec, g: float, table: GammaRatioTable,
                       initial_t1_ns: float = 1.0, max_iter: int = 200) -> FitResult:
    """Fit the homogeneous-material lifetime T1_hom that scales the side-loss curve."""
    table(data.omega - cavity.omega_c)  # range check up front

    def fun(theta):
        return residuals(data.inverse_t1, lifetime_model(data.omega, cavity, g, table, np.exp(theta[0])))

    lm = levenberg_marquardt(fun, [np.log(initial_t1_ns)], max_iter=max_iter, max_step=MAX_LOGIT_STEP,
                            res_floor=EXACT_FIT * np.linalg.norm(data.inverse_t1))
    t1 = float(np.exp(lm.x[0]))
    jac_native = numeric_jacobian(
        lambda p: residuals(data.inverse_t1, lifetime_model(data.omega, cavity, g, table, p[0])), [t1],
        lower=[0.0],
    )
    cov = _covariance(jac_native, lm.residuals, 1)
    gamma_hom = HBAR_UEV_NS / t1
    Gamma_pts = purcell_rate(data.omega, cavity, g)
    gamma_pts = table(data.omega - cavity.omega_c) * gamma_hom
    beta_pts = Gamma_pts / (Gamma_pts + gamma_pts)
    result = FitResult(
        params={"t1_hom_ns": t1},
        uncertainties={"t1_hom_ns": float(np.sqrt(cov[0, 0]))},
        beta=float(beta_pts[0]) if beta_pts.size == 1 else float("nan"),
        beta_uncertainty=float("nan"),
        residual_rms=float(np.sqrt(np.mean(lm.residuals**2))),
        chi2=float(lm.residuals @ lm.residuals),
        iterations=lm.iterations,
        converged=lm.converged,
        gradient_norm=lm.gradient_norm,
        derived={"gamma_hom_ueV": gamma_hom},
        residuals=lm.residuals,
        cost_history=lm.history,
        metadata={"optimizer_message": lm.message},
    )
    if not lm.converged and lm.iterations >= max_iter:
        raise NonConvergenceError(f"lifetime fit did not converge in {max_iter} iterations", result)
    return result

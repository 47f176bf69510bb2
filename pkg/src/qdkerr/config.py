"""Run configuration: a YAML tree with units spelled out in every key.

Exactly one of ``cavity.kappa_meV`` / ``cavity.q_factor`` and exactly one coupling
form (``g_ueV``, ``Gamma_at_qd_ueV`` or ``beta_with_total``) must be given.
Validation collects every problem, each tagged with its dotted field path.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .ensemble import JitterSpec, PhaseModel, ScanGrid, SpinEnsemble, calibrate_jitter
from .qed import UEV_PER_MEV, CavitySpec, DipoleSpec, coupling_from_rate, purcell_rate

AVERAGING = ("faddeeva", "gauss-hermite", "monte-carlo")


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n" + "\n".join(f"  {p}: {m}" for p, m in self.problems))


class _Reader:
    """Pulls typed values out of a nested dict while recording problems by path."""

    def __init__(self):
        self.problems = []

    def section(self, tree, key, path, required=True):
        value = tree.get(key) if isinstance(tree, dict) else None
        full = f"{path}.{key}" if path else key
        if value is None:
            if required:
                self.problems.append((full, "missing section"))
            return {}
        if not isinstance(value, dict):
            self.problems.append((full, "must be a mapping"))
            return {}
        return value

    def number(self, tree, key, path, default=None, required=True, lo=None, hi=None,
               lo_open=False, integer=False):
        full = f"{path}.{key}"
        if key not in tree or tree[key] is None:
            if required and default is None:
                self.problems.append((full, "missing value"))
            return default
        value = tree[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.problems.append((full, f"expected a number, got {value!r}"))
            return default
        if integer and int(value) != value:
            self.problems.append((full, f"expected an integer, got {value!r}"))
            return default
        value = int(value) if integer else float(value)
        if value != value or value in (float("inf"), float("-inf")):
            self.problems.append((full, "must be finite"))
            return default
        if lo is not None and (value <= lo if lo_open else value < lo):
            self.problems.append((full, f"must be {'>' if lo_open else '>='} {lo}, got {value}"))
        if hi is not None and value > hi:
            self.problems.append((full, f"must be <= {hi}, got {value}"))
        return value

    def choice(self, tree, key, path, options, default):
        value = tree.get(key, default)
        if value not in options:
            self.problems.append((f"{path}.{key}", f"must be one of {list(options)}, got {value!r}"))
            return default
        return value

    def unknown(self, tree, allowed, path):
        for key in tree:
            if key not in allowed:
                self.problems.append((f"{path}.{key}" if path else key, "unknown key"))


@dataclass
class CavityConfig:
    omega_c_meV: float
    eta_top: float = 0.9
    kappa_meV: float | None = None
    q_factor: float | None = None

    @property
    def kappa_ueV(self) -> float:
        if self.kappa_meV is not None:
            return self.kappa_meV * UEV_PER_MEV
        return self.omega_c_meV * UEV_PER_MEV / self.q_factor


@dataclass
class DipoleConfig:
    omega_x_meV: float
    delta_z_ueV: float = 1.0
    zeeman_sign: int = 1
    gamma_star_ueV: float = 0.0
    gamma_ueV: float | None = None
    g_ueV: float | None = None
    Gamma_at_qd_ueV: float | None = None
    beta_with_total: dict | None = None


@dataclass
class JitterConfig:
    sigma_ueV: float | None = None
    calibrate_from: dict | None = None
    quadrature_order: int = 64
    mc_samples: int = 100_000
    seed: int = 0
    method: str = "faddeeva"


@dataclass
class ScanConfig:
    start_ueV: float = -12.0
    stop_ueV: float = 12.0
    points: int = 481
    relative_to: str = "qd"


@dataclass
class SweepConfig:
    start_meV: float = -8.0
    stop_meV: float = 8.0
    points: int = 321


@dataclass
class FitConfig:
    total_linewidth_ueV: float | None = None
    free_delta_z: bool = False
    parameterization: str = "Gamma"
    max_iter: int = 200
    initial_Gamma_ueV: float | None = None


@dataclass
class ModelConfig:
    cavity: CavityConfig
    dipole: DipoleConfig
    jitter: JitterConfig = field(default_factory=JitterConfig)
    p_up: float = 0.5
    scan: ScanConfig = field(default_factory=ScanConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    fit: FitConfig = field(default_factory=FitConfig)
    t1_hom_ns: float | None = None

    # -- parsing / serialisation --------------------------------------------------------

    @classmethod
    def from_dict(cls, tree) -> "ModelConfig":
        rd = _Reader()
        if not isinstance(tree, dict):
            raise ConfigError([("<root>", "configuration must be a mapping")])
        rd.unknown(tree, {"cavity", "dipole", "jitter", "spins", "scan", "sweep", "fit", "lifetime"}, "")

        c = rd.section(tree, "cavity", "")
        rd.unknown(c, {"omega_c_meV", "kappa_meV", "q_factor", "eta_top"}, "cavity")
        cavity = CavityConfig(
            omega_c_meV=rd.number(c, "omega_c_meV", "cavity", lo=0, lo_open=True),
            eta_top=rd.number(c, "eta_top", "cavity", default=0.9, lo=0, hi=1),
            kappa_meV=rd.number(c, "kappa_meV", "cavity", required=False, lo=0, lo_open=True),
            q_factor=rd.number(c, "q_factor", "cavity", required=False, lo=0, lo_open=True),
        )
        if c and (cavity.kappa_meV is None) == (cavity.q_factor is None):
            rd.problems.append(("cavity", "give exactly one of kappa_meV or q_factor"))

        d = rd.section(tree, "dipole", "")
        rd.unknown(d, {"omega_x_meV", "delta_z_ueV", "zeeman_sign", "gamma_ueV", "gamma_star_ueV",
                       "g_ueV", "Gamma_at_qd_ueV", "beta_with_total"}, "dipole")
        dipole = DipoleConfig(
            omega_x_meV=rd.number(d, "omega_x_meV", "dipole", lo=0, lo_open=True),
            delta_z_ueV=rd.number(d, "delta_z_ueV", "dipole", default=1.0, lo=0),
            zeeman_sign=rd.choice(d, "zeeman_sign", "dipole", (1, -1), 1),
            gamma_star_ueV=rd.number(d, "gamma_star_ueV", "dipole", default=0.0, lo=0),
            gamma_ueV=rd.number(d, "gamma_ueV", "dipole", required=False, lo=0),
            g_ueV=rd.number(d, "g_ueV", "dipole", required=False, lo=0),
            Gamma_at_qd_ueV=rd.number(d, "Gamma_at_qd_ueV", "dipole", required=False, lo=0),
        )
        forms = [k for k in ("g_ueV", "Gamma_at_qd_ueV", "beta_with_total") if d.get(k) is not None]
        if d and len(forms) != 1:
            rd.problems.append(("dipole", "give exactly one of g_ueV, Gamma_at_qd_ueV, beta_with_total"))
        if "beta_with_total" in forms:
            b = rd.section(d, "beta_with_total", "dipole")
            rd.unknown(b, {"beta", "total_ueV"}, "dipole.beta_with_total")
            dipole.beta_with_total = {
                "beta": rd.number(b, "beta", "dipole.beta_with_total", lo=0, hi=1),
                "total_ueV": rd.number(b, "total_ueV", "dipole.beta_with_total", lo=0, lo_open=True),
            }
            if dipole.gamma_ueV is not None:
                rd.problems.append(("dipole.gamma_ueV", "derived from beta_with_total; remove it"))
        elif d and dipole.gamma_ueV is None:
            rd.problems.append(("dipole.gamma_ueV", "missing value"))

        j = rd.section(tree, "jitter", "", required=False)
        rd.unknown(j, {"sigma_ueV", "calibrate_from", "quadrature_order", "mc_samples", "seed", "method"},
                   "jitter")
        jitter = JitterConfig(
            sigma_ueV=rd.number(j, "sigma_ueV", "jitter", required=False, lo=0),
            quadrature_order=rd.number(j, "quadrature_order", "jitter", default=64, lo=1, integer=True),
            mc_samples=rd.number(j, "mc_samples", "jitter", default=100_000, lo=1, integer=True),
            seed=rd.number(j, "seed", "jitter", default=0, lo=0, integer=True),
            method=rd.choice(j, "method", "jitter", AVERAGING, "faddeeva"),
        )
        if j.get("calibrate_from") is not None:
            cf = rd.section(j, "calibrate_from", "jitter")
            rd.unknown(cf, {"lorentzian_fwhm_ueV", "voigt_fwhm_ueV"}, "jitter.calibrate_from")
            jitter.calibrate_from = {
                "lorentzian_fwhm_ueV": rd.number(cf, "lorentzian_fwhm_ueV", "jitter.calibrate_from", lo=0),
                "voigt_fwhm_ueV": rd.number(cf, "voigt_fwhm_ueV", "jitter.calibrate_from", lo=0),
            }
            lf, vf = jitter.calibrate_from.values()
            if lf is not None and vf is not None and vf < lf:
                rd.problems.append(("jitter.calibrate_from", "voigt_fwhm_ueV must be >= lorentzian_fwhm_ueV"))
        if (jitter.sigma_ueV is None) == (jitter.calibrate_from is None):
            rd.problems.append(("jitter", "give exactly one of sigma_ueV or calibrate_from"))

        s = rd.section(tree, "spins", "", required=False)
        rd.unknown(s, {"p_up"}, "spins")
        p_up = rd.number(s, "p_up", "spins", default=0.5, lo=0, hi=1)

        sc = rd.section(tree, "scan", "", required=False)
        rd.unknown(sc, {"start_ueV", "stop_ueV", "points", "relative_to"}, "scan")
        scan = ScanConfig(
            start_ueV=rd.number(sc, "start_ueV", "scan", default=-12.0),
            stop_ueV=rd.number(sc, "stop_ueV", "scan", default=12.0),
            points=rd.number(sc, "points", "scan", default=481, lo=2, integer=True),
            relative_to=rd.choice(sc, "relative_to", "scan", ("qd", "cavity"), "qd"),
        )
        if scan.start_ueV is not None and scan.stop_ueV is not None and scan.stop_ueV <= scan.start_ueV:
            rd.problems.append(("scan.stop_ueV", "must exceed scan.start_ueV"))

        sw = rd.section(tree, "sweep", "", required=False)
        rd.unknown(sw, {"start_meV", "stop_meV", "points"}, "sweep")
        sweep = SweepConfig(
            start_meV=rd.number(sw, "start_meV", "sweep", default=-8.0),
            stop_meV=rd.number(sw, "stop_meV", "sweep", default=8.0),
            points=rd.number(sw, "points", "sweep", default=321, lo=2, integer=True),
        )
        if sweep.stop_meV is not None and sweep.start_meV is not None and sweep.stop_meV <= sweep.start_meV:
            rd.problems.append(("sweep.stop_meV", "must exceed sweep.start_meV"))

        f = rd.section(tree, "fit", "", required=False)
        rd.unknown(f, {"total_linewidth_ueV", "free_delta_z", "parameterization", "max_iter",
                       "initial_Gamma_ueV"}, "fit")
        fit = FitConfig(
            total_linewidth_ueV=rd.number(f, "total_linewidth_ueV", "fit", required=False, lo=0, lo_open=True),
            free_delta_z=rd.choice(f, "free_delta_z", "fit", (True, False), False),
            parameterization=rd.choice(f, "parameterization", "fit", ("Gamma", "g"), "Gamma"),
            max_iter=rd.number(f, "max_iter", "fit", default=200, lo=1, integer=True),
            initial_Gamma_ueV=rd.number(f, "initial_Gamma_ueV", "fit", required=False, lo=0, lo_open=True),
        )

        lt = rd.section(tree, "lifetime", "", required=False)
        rd.unknown(lt, {"t1_hom_ns"}, "lifetime")
        t1_hom = rd.number(lt, "t1_hom_ns", "lifetime", required=False, lo=0, lo_open=True)

        if rd.problems:
            raise ConfigError(rd.problems)
        return cls(cavity, dipole, jitter, p_up, scan, sweep, fit, t1_hom)

    def to_dict(self) -> dict:
        cav = {"omega_c_meV": self.cavity.omega_c_meV, "eta_top": self.cavity.eta_top}
        if self.cavity.kappa_meV is not None:
            cav["kappa_meV"] = self.cavity.kappa_meV
        else:
            cav["q_factor"] = self.cavity.q_factor
        dip = {
            "omega_x_meV": self.dipole.omega_x_meV,
            "delta_z_ueV": self.dipole.delta_z_ueV,
            "zeeman_sign": self.dipole.zeeman_sign,
            "gamma_star_ueV": self.dipole.gamma_star_ueV,
        }
        for key in ("gamma_ueV", "g_ueV", "Gamma_at_qd_ueV", "beta_with_total"):
            value = getattr(self.dipole, key)
            if value is not None:
                dip[key] = dict(value) if isinstance(value, dict) else value
        jit = {
            "quadrature_order": self.jitter.quadrature_order,
            "mc_samples": self.jitter.mc_samples,
            "seed": self.jitter.seed,
            "method": self.jitter.method,
        }
        if self.jitter.sigma_ueV is not None:
            jit["sigma_ueV"] = self.jitter.sigma_ueV
        else:
            jit["calibrate_from"] = dict(self.jitter.calibrate_from)
        fit = {
            "free_delta_z": self.fit.free_delta_z,
            "parameterization": self.fit.parameterization,
            "max_iter": self.fit.max_iter,
        }
        if self.fit.total_linewidth_ueV is not None:
            fit["total_linewidth_ueV"] = self.fit.total_linewidth_ueV
        if self.fit.initial_Gamma_ueV is not None:
            fit["initial_Gamma_ueV"] = self.fit.initial_Gamma_ueV
        out = {
            "cavity": cav,
            "dipole": dip,
            "jitter": jit,
            "spins": {"p_up": self.p_up},
            "scan": vars(self.scan).copy(),
            "sweep": vars(self.sweep).copy(),
            "fit": fit,
        }
        if self.t1_hom_ns is not None:
            out["lifetime"] = {"t1_hom_ns": self.t1_hom_ns}
        return out

    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    # -- model construction ---------------------------------------------------------------

    @property
    def omega_c_ueV(self) -> float:
        return self.cavity.omega_c_meV * UEV_PER_MEV

    @property
    def omega_x_ueV(self) -> float:
        return self.dipole.omega_x_meV * UEV_PER_MEV

    def cavity_spec(self) -> CavitySpec:
        return CavitySpec(self.omega_c_ueV, self.cavity.kappa_ueV, self.cavity.eta_top)

    def rates(self):
        """(Gamma at the dot, gamma) in ueV, whichever coupling form was given."""
        cav = self.cavity_spec()
        d = self.dipole
        if d.beta_with_total is not None:
            beta, total = d.beta_with_total["beta"], d.beta_with_total["total_ueV"]
            Gamma = beta * (total + d.gamma_star_ueV)
            if Gamma > total:
                raise ConfigError([("dipole.beta_with_total", "beta too large: implies gamma < 0")])
            return Gamma, total - Gamma
        if d.g_ueV is not None:
            return float(purcell_rate(self.omega_x_ueV, cav, d.g_ueV)), d.gamma_ueV
        return d.Gamma_at_qd_ueV, d.gamma_ueV

    def dipole_spec(self) -> DipoleSpec:
        Gamma, gamma = self.rates()
        g = self.dipole.g_ueV
        if g is None:
            g = float(coupling_from_rate(Gamma, self.omega_x_ueV, self.cavity_spec()))
        return DipoleSpec(self.omega_x_ueV, self.dipole.delta_z_ueV, g, gamma,
                          self.dipole.gamma_star_ueV, self.dipole.zeeman_sign)

    def sigma_ueV(self) -> float:
        if self.jitter.sigma_ueV is not None:
            return self.jitter.sigma_ueV
        cf = self.jitter.calibrate_from
        return calibrate_jitter(cf["lorentzian_fwhm_ueV"], cf["voigt_fwhm_ueV"])

    def jitter_spec(self) -> JitterSpec:
        method = "faddeeva" if self.jitter.method == "monte-carlo" else self.jitter.method
        return JitterSpec(self.sigma_ueV(), self.jitter.quadrature_order, self.jitter.mc_samples,
                          self.jitter.seed, method)

    @property
    def use_mc(self) -> bool:
        return self.jitter.method == "monte-carlo"

    def model(self) -> PhaseModel:
        return PhaseModel(self.cavity_spec(), self.dipole_spec(), self.jitter_spec(), SpinEnsemble(self.p_up))

    def total_linewidth_ueV(self) -> float:
        if self.fit.total_linewidth_ueV is not None:
            return self.fit.total_linewidth_ueV
        Gamma, gamma = self.rates()
        return Gamma + gamma

    @property
    def reference_ueV(self) -> float:
        return self.omega_x_ueV if self.scan.relative_to == "qd" else self.omega_c_ueV

    def scan_detunings(self):
        """Scan detunings relative to ``scan.relative_to`` (ueV)."""
        return ScanGrid(self.scan.start_ueV, self.scan.stop_ueV, self.scan.points).values()


def load_config(path) -> ModelConfig:
    text = Path(path).read_text()
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([("<file>", f"YAML parse error: {exc}")]) from exc
    return ModelConfig.from_dict(tree)


def dump_config(cfg: ModelConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)

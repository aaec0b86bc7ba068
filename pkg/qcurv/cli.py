"""
Command-line runner for Q-curvature experiments
Parses subcommands, resolves configs, runs the library and writes CSV/JSON outputs
"""

import argparse
import hashlib
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from qcurv.acceptance import adams_closed_form, run_acceptance
from qcurv.config import load_run_config, load_settings
from qcurv.conformal import bubble_field, bubble_mass, mass
from qcurv.errors import ConfigError, NumericalQualityError, QCurvError
from qcurv.kernels import g_alpha, potential_lower_bound, potential_slope, potential_v
from qcurv.mtlab import (
    AdamsKernel,
    AdamsProfile,
    adams_hypothesis_bound,
    adams_integral,
    remark_counterexample,
    sharpness_scan,
    sharpness_verdict,
)
from qcurv.polyint import ProductPolynomial, threshold_scan, weighted_exp_integral
from qcurv.solver import SolveRequest, field_residual, minimize
from qcurv.spectral import PaneitzVariant, multipliers

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOWER_BOUND_TOL = 1e-9

SOLVE_KEYS: Dict[str, Any] = {
    "n": 4,
    "lambda": 8 * math.pi ** 2,
    "beta": 0.0,
    "p": [-1.0],
    "q": [],
    "case": "b",
    "l_max": 64,
    "quad_nodes": 256,
    "grid": {"T": 18.0, "nodes": 4096},
    "opt": {"tol": 1e-7, "max_iter": 5000},
    "u0_profile": "conformal",
    "residual_threshold": 1e-3,
}


def config_hash(config: Dict[str, Any]) -> str:
    payload = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _header(config: Dict[str, Any]) -> str:
    return f"# config_hash={config_hash(config)} config={json.dumps(config, sort_keys=True, default=str)}\n"


def write_csv(frame: pd.DataFrame, path: Optional[str], config: Dict[str, Any]):
    """CSV with the resolved config echoed in a leading comment line"""
    body = frame.to_csv(index=False, float_format="%.17g")
    text = _header(config) + body
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as file:
            file.write(text)
        logger.info(f"Wrote {len(frame)} rows to {path}")
    else:
        sys.stdout.write(text)


def write_json(payload: Dict[str, Any], path: Optional[str], config: Dict[str, Any]):
    document = {"config_hash": config_hash(config), "config": config, **payload}
    text = json.dumps(document, sort_keys=True, indent=2, default=float) + "\n"
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as file:
            file.write(text)
        logger.info(f"Wrote report to {path}")
    else:
        sys.stdout.write(text)


def _floats(raw: str) -> List[float]:
    return [float(x) for x in raw.split(",") if x.strip()]


class QCurvExperimentRunner:
    """Resolves a subcommand's parameters and runs it"""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.settings = load_settings(args.settings)
        self.output = args.output

    def resolve(self, defaults: Dict[str, Any], section: str = "") -> Dict[str, Any]:
        """Settings over defaults, flags over settings, then the JSON config file over all; unknown keys are rejected"""
        resolved = dict(defaults)
        if section:
            resolved.update({k: v for k, v in self.settings[section].items() if k in defaults})
        for key in defaults:
            value = getattr(self.args, key, None)
            if value is not None:
                resolved[key] = value
        if self.args.config:
            resolved = load_run_config(self.args.config, resolved)
        resolved["seed"] = self.args.seed
        return resolved

    def run(self) -> int:
        handler: Callable[[], int] = getattr(self, "cmd_" + self.args.command.replace("-", "_"))
        logger.info(f"Running {self.args.command}")
        return handler()

    def cmd_bubble_check(self) -> int:
        config = self.resolve({"n": 4, "lambda_param": 1.0})
        u = bubble_field(int(config["n"]), float(config["lambda_param"]))
        payload = {
            "residual": field_residual(u),
            "mass": mass(u),
            "mass_expected": bubble_mass(int(config["n"])),
        }
        write_json(payload, self.output, config)
        if payload["residual"] > 1e-6 or abs(payload["mass"] / payload["mass_expected"] - 1) > 1e-8:
            raise NumericalQualityError(f"bubble residual {payload['residual']:.3e} or mass outside tolerance")
        return 0

    def cmd_galpha(self) -> int:
        config = self.resolve({"n": 4, "alpha": 2.0, "points": 200, "r_max": 0.99})
        R = np.linspace(0.0, float(config["r_max"]), int(config["points"]))
        values = g_alpha(R, float(config["alpha"]), int(config["n"]))
        write_csv(pd.DataFrame({"R": R, "value": values}), self.output, config)
        return 0

    def cmd_paneitz_table(self) -> int:
        config = self.resolve({"n": 4, "s": None, "lmax": 10, "variant": PaneitzVariant.P_2S.value})
        n = int(config["n"])
        s = None if config["s"] is None else float(config["s"])
        m = multipliers(n, int(config["lmax"]), PaneitzVariant(config["variant"]), s)
        write_csv(pd.DataFrame({"l": np.arange(m.size), "multiplier": m}), self.output, config)
        return 0

    def cmd_potential_v(self) -> int:
        config = self.resolve({"n": 4, "lambda_param": 1.0, "window": [6.0, 12.0]})
        u = bubble_field(int(config["n"]), float(config["lambda_param"]))
        v = potential_v(u)
        lo, hi = config["window"]
        slope, stderr = potential_slope(v, float(lo), float(hi))
        logger.info(f"Potential slope on [{lo}, {hi}]: {slope:.6f} +/- {stderr:.1e}")
        frame = pd.DataFrame({
            "log_r": v.log_radius,
            "value": v.values,
            "lower_bound": potential_lower_bound(v, mass(u)),
        })
        write_csv(frame, self.output, config)
        below = int(np.sum(frame["value"] < frame["lower_bound"] - LOWER_BOUND_TOL))
        if below:
            raise NumericalQualityError(f"v falls below its lower bound at {below} nodes")
        return 0

    def cmd_mt_sharpness(self) -> int:
        config = self.resolve({
            "n": 4, "s": 2.0, "beta": 0.0, "gamma_factor": 1.2,
            "r_list": [1e-1, 1e-2, 1e-3, 1e-4],
        }, "mtlab")
        table = sharpness_scan(int(config["n"]), float(config["s"]), float(config["beta"]),
                               float(config["gamma_factor"]), config["r_list"])
        verdict = sharpness_verdict(table["integral"], float(config["gamma_factor"]))
        logger.info(f"Sharpness verdict at gamma_factor={config['gamma_factor']}: {verdict}")
        write_csv(table, self.output, config)
        if not verdict:
            raise NumericalQualityError(f"sharpness scan at gamma_factor={config['gamma_factor']} has the wrong growth")
        return 0

    def cmd_adams_lemma(self) -> int:
        config = self.resolve({"t0": 4.0, "alpha": 1.0, "t_max": 50.0})
        T0 = float(config["t0"])
        phi = AdamsProfile(lambda w: np.full_like(w, T0 ** -0.5), (0.0, T0))
        result = adams_integral(phi, AdamsKernel(), float(config["alpha"]), 2.0)
        kernel = AdamsKernel(g=lambda w, t: np.exp(-w) + np.exp(w - t))
        b, _ = adams_hypothesis_bound(kernel, 2.0, np.linspace(0.0, float(config["t_max"]), 101))
        payload = {
            "integral": result.value,
            "diverged": result.diverged,
            "closed_form": adams_closed_form(T0) if float(config["alpha"]) == 1.0 else None,
            "hypothesis_b": b,
        }
        write_json(payload, self.output, config)
        return 0

    def cmd_remark_counterexample(self) -> int:
        config = self.resolve({
            "n": 4, "s": 2.0, "sigma": 1.0, "beta": 0.0, "log_R_list": [2.0, 4.0, 6.0, 8.0, 10.0],
        })
        R_list = [math.exp(x) for x in config["log_R_list"]]
        table = remark_counterexample(R_list, int(config["n"]), float(config["s"]),
                                      float(config["sigma"]), float(config["beta"]))
        write_csv(table, self.output, config)
        return 0

    def cmd_solve(self) -> int:
        config = dict(SOLVE_KEYS)
        config.update({k: v for k, v in self.settings["solver"].items() if k in SOLVE_KEYS})
        if self.args.config:
            config = load_run_config(self.args.config, config)
        config["seed"] = self.args.seed
        req = SolveRequest.from_dict(config)
        report = minimize(req)
        write_json(report.to_dict(), self.output, config)
        if self.output:
            profile_path = str(Path(self.output).with_suffix("")) + "_profiles.csv"
            write_csv(report.profiles, profile_path, config)
        if not report.converged:
            raise NumericalQualityError(f"optimizer stopped with status {report.status}")
        if req.n == 4 and report.residual_pde > float(config["residual_threshold"]):
            raise NumericalQualityError(f"PDE residual {report.residual_pde:.3e} above threshold")
        return 0

    def cmd_poly_int(self) -> int:
        config = self.resolve({"n": 3, "k": 1, "sigma": -2.5, "scan": False}, "polyint")
        n, k = int(config["n"]), int(config["k"])
        q = ProductPolynomial(k, (-1.0,) if k > 0 else ())
        if config["scan"]:
            centre = q.threshold(n)
            if math.isinf(centre):
                centre = 0.0
            grid = [s for s in np.arange(centre - 1.0, centre + 1.0 + 1e-9, 0.25) if s > -n]
            estimate = threshold_scan(q, n, grid)
            logger.info(f"Threshold estimate {estimate.estimate:.4f} (inconclusive={estimate.inconclusive})")
            table = estimate.table[["sigma", "value", "converged"]]
        else:
            result = weighted_exp_integral(q, float(config["sigma"]), n)
            table = pd.DataFrame([{"sigma": config["sigma"], "value": result.value, "converged": result.converged}])
        write_csv(table, self.output, config)
        return 0

    def cmd_acceptance(self) -> int:
        config = self.resolve({"only": None}, "acceptance")
        table = run_acceptance(config["only"], seed=int(config["seed"]))
        write_csv(table, self.output, config)
        return 0 if bool(table["passed"].all()) else NumericalQualityError.exit_code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcurv", description="Q-curvature numerical experiments")
    parser.add_argument("--config", help="JSON file with parameters for the subcommand")
    parser.add_argument("--output", help="output path; stdout when omitted")
    parser.add_argument("--settings", help="YAML settings file")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--log-level", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bubble-check")
    p.add_argument("--n", type=int)
    p.add_argument("--lambda-param", dest="lambda_param", type=float)

    p = sub.add_parser("galpha")
    p.add_argument("--n", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--points", type=int)

    p = sub.add_parser("paneitz-table")
    p.add_argument("--n", type=int)
    p.add_argument("--s", type=float)
    p.add_argument("--lmax", type=int)
    p.add_argument("--variant", choices=[v.value for v in PaneitzVariant])

    p = sub.add_parser("potential-v")
    p.add_argument("--n", type=int)
    p.add_argument("--lambda-param", dest="lambda_param", type=float)

    p = sub.add_parser("mt-sharpness")
    p.add_argument("--n", type=int)
    p.add_argument("--s", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma-factor", dest="gamma_factor", type=float)
    p.add_argument("--r-list", dest="r_list", type=_floats)

    p = sub.add_parser("adams-lemma")
    p.add_argument("--t0", type=float)
    p.add_argument("--alpha", type=float)

    p = sub.add_parser("remark-counterexample")
    p.add_argument("--n", type=int)
    p.add_argument("--s", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--log-R-list", dest="log_R_list", type=_floats)

    sub.add_parser("solve")

    p = sub.add_parser("poly-int")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--scan", action="store_true", default=None)

    p = sub.add_parser("acceptance")
    p.add_argument("--only", type=lambda raw: [x for x in raw.split(",") if x])
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """Parse argv, run the subcommand and map library errors to exit codes"""
    args = build_parser().parse_args(argv)
    try:
        runner = QCurvExperimentRunner(args)
        level = args.log_level or runner.settings["logging"].get("level", "INFO")
        root = logging.getLogger()
        root.setLevel(level.upper())
        log_file = runner.settings["logging"].get("file")
        if log_file:
            handler = logging.FileHandler(log_file)
            handler.setFormatter(logging.Formatter(LOG_FORMAT))
            root.addHandler(handler)
        return runner.run()
    except ConfigError as e:
        logger.error(f"Configuration error{f' in key {e.key!r}' if e.key else ''}: {e}")
        return e.exit_code
    except QCurvError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except (TypeError, ValueError) as e:
        logger.error(f"Configuration error, malformed parameter: {e}")
        return ConfigError.exit_code


def main():
    """Console entry point"""
    logging.basicConfig(
        level=logging.INFO,
        format=LOG_FORMAT,
        handlers=[logging.StreamHandler(sys.stderr)],
    )
    sys.exit(run())


if __name__ == "__main__":
    main()

"""Command-line front end: seeded verification runs with JSON or CSV reports.

Exit codes: 0 pass, 1 usage or configuration error, 2 tolerance breach.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import platform
import sys
import tempfile
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .cext import eigen_decomposition_state, random_decomposition, ClassicalState
from .crep import (
    MinimalICPOVM,
    pseudo_distribution,
    random_ic_povm,
    reconstruct,
    representation_probabilities,
    sic_qubit,
    smearing_check,
    to_csv,
    uniform_povm_sample,
)
from .experiments import OPTIMAL_ANGLES, CHSHScenario, chsh_report, product_state, singlet
from .qcore import (
    DensityOperator,
    FuzzyQMError,
    PureState,
    haar_random_state,
    haar_random_vectors,
    random_density,
    random_kraus,
)
from .update import (
    check_resolution,
    extension_update,
    readjustment,
    representation_update,
)

EXIT_PASS, EXIT_CONFIG, EXIT_BREACH = 0, 1, 2
SEED_ENV = "FUZZYQM_SEED"

DEFAULT_TOLERANCES = {
    "reconstruct": {"roundtrip": 1e-10},
    "negativity": {"negative": -1e-10},
    "update-verify": {"resolution": 1e-12, "transport": 1e-10, "extension": 1e-10, "representation": 1e-10},
    "bell": {"path_gap": 1e-12},
    "smearing": {"atomic": 1e-12, "uniform": 0.05},
}


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    dim: int
    seed: int
    trials: int = 1
    samples: int = 1
    tolerances: dict = field(default_factory=dict)
    output: str | None = None
    format: str = "json"
    options: dict = field(default_factory=dict)

    def validate(self) -> None:
        if not 2 <= self.dim <= 16:
            raise ConfigError(f"--dim must be in [2, 16], got {self.dim}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("--seed must be a 64-bit unsigned integer")
        if self.trials < 1 or self.samples < 1:
            raise ConfigError("trial and sample counts must be at least 1")


@dataclass
class Outcome:
    results: dict
    passed: bool
    table: list = field(default_factory=list)
    header: tuple = ("index", "weight", "value")


def _frame(cfg: RunConfig, rng) -> tuple[str, MinimalICPOVM]:
    if cfg.options.get("sic"):
        if cfg.dim != 2:
            raise ConfigError("--sic is only available for --dim 2")
        return "sic", sic_qubit()
    if cfg.dim == 2 and not cfg.options.get("random_frame", True):
        return "sic", sic_qubit()
    return "random", random_ic_povm(cfg.dim, rng)


def cmd_reconstruct(cfg: RunConfig) -> Outcome:
    rng = np.random.default_rng(cfg.seed)
    kind, frame = _frame(cfg, rng)
    errors = []
    for _ in range(cfg.trials):
        rho = random_density(cfg.dim, rng)
        back = reconstruct(representation_probabilities(rho, frame), frame)
        errors.append(float(np.linalg.norm(back.matrix - rho.matrix)))
    tol = cfg.tolerances["roundtrip"]
    worst = max(errors)
    return Outcome(
        {
            "frame": kind,
            "gram_condition": frame.condition,
            "max_error": worst,
            "tolerances": cfg.tolerances,
        },
        worst <= tol,
        [(i, 1.0 / cfg.trials, e) for i, e in enumerate(errors)],
        ("trial", "weight", "error"),
    )


def _named_state(label: str, frame: MinimalICPOVM, n: int) -> DensityOperator:
    name, _, arg = label.partition(":")
    if name == "mixed":
        return DensityOperator.maximally_mixed(n)
    if name in ("aligned", "antipodal"):
        try:
            k = int(arg or 0)
            v = frame.vectors[k]
        except (ValueError, IndexError):
            raise ConfigError(f"bad frame index in --state {label!r}")
        if name == "aligned":
            return DensityOperator.from_state(PureState(v))
        if n != 2:
            raise ConfigError("antipodal states are only defined for qubits")
        return DensityOperator.from_state(PureState([-np.conj(v[1]), np.conj(v[0])]))
    raise ConfigError(f"unknown --state {label!r}; use mixed, aligned:K or antipodal:K")


def cmd_negativity(cfg: RunConfig) -> Outcome:
    rng = np.random.default_rng(cfg.seed)
    kind, frame = _frame(cfg, rng)
    threshold = cfg.tolerances["negative"]
    named = [(label, _named_state(label, frame, cfg.dim)) for label in cfg.options.get("states", [])]
    vecs = haar_random_vectors(cfg.dim, cfg.samples, rng)
    mins = []
    for v in vecs:
        c = pseudo_distribution(DensityOperator.from_state(PureState(v)), frame).coefficients
        mins.append(float(c.min()))
    mins = np.array(mins)
    k = int(np.argmin(mins))
    named_results = []
    for label, rho in named:
        pd = pseudo_distribution(rho, frame)
        named_results.append(
            {
                "state": label,
                "coefficients": pd.coefficients.tolist(),
                "min_value": pd.min_value,
                "has_negative": bool(pd.min_value < threshold),
            }
        )
    fraction = float(np.mean(mins < threshold))
    results = {
        "frame": kind,
        "scanned": cfg.samples,
        "fraction_negative": fraction,
        "most_negative": float(mins[k]),
        "witness": {"re": vecs[k].real.tolist(), "im": vecs[k].imag.tolist()},
        "named_states": named_results,
        "tolerances": cfg.tolerances,
    }
    table = [(i, 1.0 / cfg.samples, float(m)) for i, m in enumerate(mins)]
    return Outcome(results, fraction > 0.0, table, ("index", "weight", "min_coefficient"))


def cmd_update_verify(cfg: RunConfig) -> Outcome:
    rng = np.random.default_rng(cfg.seed)
    n, outcomes = cfg.dim, cfg.options.get("outcomes", 4)
    if outcomes < 1:
        raise ConfigError("--outcomes must be at least 1")
    kind = cfg.options.get("kraus", "lueders")
    worst = dict.fromkeys(("resolution", "transport", "extension", "representation"), 0.0)
    for _ in range(cfg.trials):
        rho = random_density(n, rng)
        op = random_kraus(n, outcomes, rng, kind=kind)
        povm = op.povm()
        worst["resolution"] = max(worst["resolution"], check_resolution(rho, povm))
        eig = eigen_decomposition_state(rho)
        priors = [
            eig,
            random_decomposition(rho, int(rng.integers(n, n + 8)), rng),
            ClassicalState.delta(haar_random_state(n, rng)),
        ]
        points = haar_random_vectors(n, 100, rng)
        for a, e in zip(op, povm):
            worst["transport"] = max(worst["transport"], readjustment(rho, a).residual)
            worst["representation"] = max(worst["representation"], representation_update(rho, e, points))
            for p in priors:
                worst["extension"] = max(worst["extension"], extension_update(p, a).residual)
    tol = cfg.tolerances
    checks = {k: worst[k] <= tol[k] for k in worst}
    results = {"kraus": kind, "outcomes": outcomes, "max_residual": worst, "within": checks, "tolerances": tol}
    table = [(k, tol[k], worst[k]) for k in worst]
    return Outcome(results, all(checks.values()), table, ("identity", "tolerance", "max_residual"))


def cmd_bell(cfg: RunConfig) -> Outcome:
    path = cfg.options.get("scenario")
    if path:
        try:
            with open(path) as fh:
                scenario = CHSHScenario.from_json(json.load(fh))
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot read scenario {path!r}: {exc}")
    else:
        state = {"singlet": singlet, "product": product_state}[cfg.options.get("state", "singlet")]()
        scenario = CHSHScenario.from_angles(state, cfg.options.get("angles", OPTIMAL_ANGLES))
    rep = chsh_report(scenario)
    rep["tolerances"] = cfg.tolerances
    passed = rep["path_gap"] <= cfg.tolerances["path_gap"] and abs(rep["S_quantum"]) > 2.0
    table = [(c["pair"], c["quantum"], c["classical_extension"]) for c in rep["correlators"]]
    return Outcome(rep, passed, table, ("pair", "quantum", "classical_extension"))


def cmd_smearing(cfg: RunConfig) -> Outcome:
    rng = np.random.default_rng(cfg.seed)
    n = cfg.dim
    rho = random_density(n, rng)
    points = haar_random_vectors(n, cfg.options.get("test_points", 100), rng)
    atomic = max(
        smearing_check(eigen_decomposition_state(rho), points),
        smearing_check(random_decomposition(rho, n + 3, rng), points),
    )
    sample = uniform_povm_sample(n, cfg.samples, rng)
    tol = cfg.tolerances
    results = {
        "atomic_deviation": atomic,
        "uniform_identity_deviation": sample.deviation,
        "samples": sample.size,
        "tolerances": tol,
    }
    dens = np.einsum("ki,ij,kj->k", sample.vectors.conj(), rho.matrix, sample.vectors).real
    table = [(j, sample.weight, float(x)) for j, x in enumerate(dens)]
    passed = atomic <= tol["atomic"] and sample.deviation <= tol["uniform"]
    return Outcome(results, passed, table)


COMMANDS = {
    "reconstruct": cmd_reconstruct,
    "negativity": cmd_negativity,
    "update-verify": cmd_update_verify,
    "bell": cmd_bell,
    "smearing": cmd_smearing,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _angles(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("angles must be comma-separated numbers")
    if len(vals) != 4:
        raise argparse.ArgumentTypeError("need four angles: a0,a1,b0,b1")
    return vals


def _tol(text: str) -> tuple[str, float]:
    key, sep, val = text.partition("=")
    try:
        if not sep:
            raise ValueError
        return key, float(val)
    except ValueError:
        raise argparse.ArgumentTypeError("tolerance overrides look like NAME=VALUE")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help=f"RNG seed (falls back to ${SEED_ENV}, then 0)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--output", "-o", help="write the report here instead of stdout")
    common.add_argument("--deterministic", action="store_true", help="omit timestamp and host fields")
    common.add_argument("--tol", type=_tol, action="append", default=[], metavar="NAME=VALUE")

    parser = _Parser(prog="fuzzyqm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("reconstruct", parents=[common], help="frame reconstruction roundtrips")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--sic", action="store_true", help="use the qubit SIC frame")
    p.add_argument("--trials", type=int, default=50)

    p = sub.add_parser("negativity", parents=[common], help="scan pseudo-distributions for negative entries")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--random-frame", action="store_true", help="random IC frame even for qubits")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--state", action="append", default=[], help="mixed, aligned:K or antipodal:K")

    p = sub.add_parser("update-verify", parents=[common], help="collapse, Bayes and disturbance identities")
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--outcomes", type=int, default=4)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--kraus", choices=("lueders", "unitary-twirl", "general"), default="lueders")

    p = sub.add_parser("bell", parents=[common], help="CHSH value along both paths")
    p.add_argument("--angles", type=_angles, default=OPTIMAL_ANGLES, help="a0,a1,b0,b1 in degrees")
    p.add_argument("--state", choices=("singlet", "product"), default="singlet")
    p.add_argument("--scenario", help="scenario JSON file")

    p = sub.add_parser("smearing", parents=[common], help="smearing identity and uniform POVM sampling")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--test-points", type=int, default=100)
    return parser


def _config(args) -> RunConfig:
    seed = args.seed
    if seed is None:
        env = os.environ.get(SEED_ENV)
        try:
            seed = int(env) if env else 0
        except ValueError:
            raise ConfigError(f"${SEED_ENV} is not an integer: {env!r}")
    tols = dict(DEFAULT_TOLERANCES[args.command])
    for key, val in args.tol:
        if key not in tols:
            raise ConfigError(f"unknown tolerance {key!r} for {args.command}; known: {sorted(tols)}")
        tols[key] = val
    opts = {}
    for name in ("sic", "outcomes", "kraus", "angles", "scenario", "test_points"):
        if hasattr(args, name):
            opts[name] = getattr(args, name)
    if hasattr(args, "state"):
        opts["states" if args.command == "negativity" else "state"] = args.state
    if args.command == "negativity":
        opts["random_frame"] = args.random_frame
    if args.command == "bell":
        opts["angles"] = list(args.angles)
    cfg = RunConfig(
        command=args.command,
        dim=getattr(args, "dim", 4 if args.command == "bell" else 2),
        seed=seed,
        trials=getattr(args, "trials", 1),
        samples=getattr(args, "samples", 1),
        tolerances=tols,
        output=args.output,
        format=args.format,
        options=opts,
    )
    cfg.validate()
    return cfg


def render(cfg: RunConfig, out: Outcome, deterministic: bool) -> str:
    if cfg.format == "csv":
        return to_csv(out.table, out.header)
    report = {
        "command": cfg.command,
        "config": {k: v for k, v in asdict(cfg).items() if k not in ("output", "format")},
        "results": out.results,
        "pass": bool(out.passed),
        "version": __version__,
    }
    if not deterministic:
        report["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
        report["host"] = platform.node()
    return json.dumps(report, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".fuzzyqm-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config(args)
        out = COMMANDS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"fuzzyqm: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FuzzyQMError as exc:
        print(f"fuzzyqm: numerical failure: {exc}", file=sys.stderr)
        return EXIT_BREACH
    text = render(cfg, out, args.deterministic)
    if cfg.output:
        write_atomic(cfg.output, text)
    else:
        sys.stdout.write(text)
    return EXIT_PASS if out.passed else EXIT_BREACH


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Scenario files are INI documents whose ``[section] key`` pairs are addressed as
dotted keys (``irs1.anchor``, ``prop.wavelength``)::

    [bs]      position = x, y, z
    [user]    position = x, y, z
    [irs1]    anchor, dir_a, dir_b (vectors), elements | count_a + count_b, spacing
    [irs2]    same keys as irs1
    [prop]    wavelength, ref_gain | ref_gain_db
    [power]   tx_dbm, noise_dbm
    [link]    d_t, d_s, d_r   (optional nominal distances for the closed forms)

Omitted keys fall back to the two-IRS reference deployment: 0.06 m wavelength,
ref_gain (wavelength/4pi)^2, spacing wavelength/2, 800 elements per panel,
43 dBm transmit power and -60 dBm noise.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

from . import __version__, analysis, experiments
from .channel import PropagationParams, free_space_ref_gain, rank_one_margin
from .experiments import ScenarioConfig
from .geometry import GeometryError, PanelGeometry, near_square_grid, validate_panel

log = logging.getLogger("dualirs")

OUTPUT_DIR_ENV = "DUALIRS_OUTPUT_DIR"
DEFAULT_SCENARIO = "reference"
COMMANDS = ("sweep", "rician", "crossover", "doubling", "validate")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_EXPERIMENT = 4

_HALF_SQRT3 = math.sqrt(3) / 2
_DEFAULTS = {
    "bs": {"position": (0.87, 0.5, 0.0)},
    "user": {"position": (13.0, 92.5, 0.0)},
    "irs1": {
        "anchor": (0.0, 0.0, 0.0),
        "dir_a": (0.0, 0.0, 1.0),
        "dir_b": (_HALF_SQRT3, -0.5, 0.0),
        "elements": 800,
    },
    "irs2": {
        "anchor": (0.0, 100.0, 0.0),
        "dir_a": (_HALF_SQRT3, 0.5, 0.0),
        "dir_b": (0.0, 0.0, 1.0),
        "elements": 800,
    },
    "prop": {"wavelength": 0.06},
    "power": {"tx_dbm": 43.0, "noise_dbm": -60.0},
}
_KEYS = {
    "bs": {"position"},
    "user": {"position"},
    "irs1": {"anchor", "dir_a", "dir_b", "elements", "count_a", "count_b", "spacing"},
    "irs2": {"anchor", "dir_a", "dir_b", "elements", "count_a", "count_b", "spacing"},
    "prop": {"wavelength", "ref_gain", "ref_gain_db"},
    "power": {"tx_dbm", "noise_dbm"},
    "link": {"d_t", "d_s", "d_r"},
}


_COMMAND_PARAMS = {
    "sweep": {"k", "step", "tol_db"},
    "rician": {"k1", "k2", "taus", "trials"},
    "crossover": {"k_min", "k_max", "step"},
    "doubling": {"k"},
    "validate": set(),
}


class ScenarioError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _resolve_scenario(path) -> Path:
    p = Path(path)
    if p.exists():
        return p
    if p.suffix == "" and os.sep not in str(path):
        shipped = resources.files("dualirs") / "scenarios" / f"{path}.ini"
        if shipped.is_file():
            return Path(str(shipped))
    raise FileNotFoundError(f"scenario file not found: {path}")


def _number(key: str, raw: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ScenarioError(key, f"not a number: {raw!r}") from None
    if not math.isfinite(value):
        raise ScenarioError(key, f"not finite: {raw!r}")
    return value


def _integer(key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ScenarioError(key, f"not an integer: {raw!r}") from None


def _vector(key: str, raw: str) -> tuple[float, float, float]:
    parts = [s for s in raw.replace(",", " ").split() if s]
    if len(parts) != 3:
        raise ScenarioError(key, f"expected 3 comma-separated numbers, got {raw!r}")
    return tuple(_number(key, s) for s in parts)


def parse_scenario(text: str, source: str = "<string>") -> ScenarioConfig:
    """Parse scenario INI text, filling defaults; errors name the offending key."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ScenarioError("<file>", f"parse failure: {exc}") from None

    for section in parser.sections():
        if section not in _KEYS:
            raise ScenarioError(section, "unknown section")
        for key in parser[section]:
            if key not in _KEYS[section]:
                raise ScenarioError(f"{section}.{key}", "unknown key")

    def raw(section: str, key: str):
        if parser.has_option(section, key):
            return parser.get(section, key)
        return None

    def vec(section: str, key: str):
        value = raw(section, key)
        return _vector(f"{section}.{key}", value) if value is not None else _DEFAULTS[section][key]

    def num(section: str, key: str, default=None):
        value = raw(section, key)
        return _number(f"{section}.{key}", value) if value is not None else default

    wavelength = num("prop", "wavelength", _DEFAULTS["prop"]["wavelength"])
    if wavelength <= 0:
        raise ScenarioError("prop.wavelength", "must be positive")
    ref_gain = num("prop", "ref_gain")
    ref_gain_db = num("prop", "ref_gain_db")
    if ref_gain is not None and ref_gain_db is not None:
        raise ScenarioError("prop.ref_gain", "give ref_gain or ref_gain_db, not both")
    if ref_gain_db is not None:
        ref_gain = analysis.from_db(ref_gain_db)
    if ref_gain is None:
        ref_gain = free_space_ref_gain(wavelength)
    if ref_gain <= 0:
        raise ScenarioError("prop.ref_gain", "must be positive")
    prop = PropagationParams(wavelength, ref_gain)

    def panel(name: str) -> PanelGeometry:
        spacing = num(name, "spacing", wavelength / 2)
        if spacing <= 0:
            raise ScenarioError(f"{name}.spacing", f"must be positive, got {spacing}")
        ca, cb, elements = raw(name, "count_a"), raw(name, "count_b"), raw(name, "elements")
        if ca is not None or cb is not None:
            if ca is None or cb is None or elements is not None:
                raise ScenarioError(f"{name}.count_a", "give count_a and count_b together, without elements")
            count_a, count_b = _integer(f"{name}.count_a", ca), _integer(f"{name}.count_b", cb)
        else:
            k = _integer(f"{name}.elements", elements) if elements is not None else _DEFAULTS[name]["elements"]
            if k < 1:
                raise ScenarioError(f"{name}.elements", f"must be positive, got {k}")
            count_a, count_b = near_square_grid(k)
        fields = {
            "anchor": vec(name, "anchor"),
            "dir_a": vec(name, "dir_a"),
            "dir_b": vec(name, "dir_b"),
            "count_a": count_a,
            "count_b": count_b,
            "spacing": spacing,
        }
        problems = validate_panel(fields)
        if problems:
            # orthogonality is reported against dir_b
            first = problems[0].split()[0]
            raise ScenarioError(f"{name}.{first if first in fields else 'dir_b'}", "; ".join(problems))
        return PanelGeometry(**fields)

    irs1, irs2 = panel("irs1"), panel("irs2")

    link = None
    if parser.has_section("link"):
        values = {}
        for key in ("d_t", "d_s", "d_r"):
            value = num("link", key)
            if value is None:
                raise ScenarioError(f"link.{key}", "missing; give all of d_t, d_s, d_r")
            if value <= 0:
                raise ScenarioError(f"link.{key}", "must be positive")
            values[key] = value
        link = analysis.LinkDistances(**values)

    try:
        return ScenarioConfig(
            bs_pos=vec("bs", "position"),
            user_pos=vec("user", "position"),
            irs1=irs1,
            irs2=irs2,
            prop=prop,
            tx_power_dbm=num("power", "tx_dbm", _DEFAULTS["power"]["tx_dbm"]),
            noise_power_dbm=num("power", "noise_dbm", _DEFAULTS["power"]["noise_dbm"]),
            nominal_link=link,
        )
    except GeometryError as exc:
        raise ScenarioError("bs.position/user.position", str(exc)) from None


def load_scenario(path) -> ScenarioConfig:
    resolved = _resolve_scenario(path)
    return parse_scenario(resolved.read_text(), source=str(resolved))


@dataclass
class CommandSpec:
    command: str
    scenario_path: str = DEFAULT_SCENARIO
    output_path: str | None = None
    seed: int = 0
    k: int | None = None
    step: int | None = None
    k1: int = 800
    k2: int = 800
    taus: list[float] = field(default_factory=lambda: [math.inf, 3.0, 1.0])
    trials: int = 1000
    k_min: int = 600
    k_max: int = 1100
    workers: int = 1
    tol_db: float = experiments.DEFAULT_TRACKING_TOL_DB

    def check(self) -> None:
        """Validate parameters and fill command-specific defaults for k and step."""
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if self.k is None:
            self.k = {"sweep": 1600, "doubling": 800}.get(self.command)
        if self.step is None:
            self.step = {"sweep": 100, "crossover": 20}.get(self.command)
        if not self.scenario_path:
            raise ValueError("scenario path must be non-empty")
        if self.output_path is not None and not str(self.output_path):
            raise ValueError("output path must be non-empty")
        if not 0 <= self.seed < 1 << 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.k is not None and self.k < 2:
            raise ValueError("--k must be at least 2")
        if not self.tol_db > 0:
            raise ValueError("--tol-db must be positive")
        if self.step is not None and self.step < 1:
            raise ValueError("--step must be positive")
        if self.command == "rician":
            if self.trials < 1 or self.k1 < 1 or self.k2 < 1:
                raise ValueError("--trials, --k1 and --k2 must be positive")
            if not self.taus or any(math.isnan(t) or t < 0 for t in self.taus):
                raise ValueError("--taus must be non-negative numbers or inf")
        if self.command == "doubling" and self.k is not None and self.k % 2:
            raise ValueError("doubling --k must be even")
        if self.command == "crossover":
            if self.k_min > self.k_max:
                raise ValueError("--k-min must not exceed --k-max")
            if self.step is not None and self.step % 2:
                raise ValueError("crossover --step must be even")

    def parameters(self) -> dict:
        """Parameters the dispatched command actually consumes."""
        out = asdict(self)
        out["taus"] = [experiments.fmt_tau(t) for t in self.taus]
        keep = _COMMAND_PARAMS[self.command] | {"command", "scenario_path", "seed"}
        return {k: v for k, v in out.items() if k in keep}


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def manifest_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".manifest.json")


def _atomic_write_many(files: dict[Path, str]) -> None:
    staged = []
    try:
        for path, text in files.items():
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            staged.append((tmp, path))
        for tmp, path in staged:
            os.replace(tmp, path)
    except BaseException:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)
        raise


def write_outputs(
    header, rows, output_path, spec: CommandSpec, scenario: ScenarioConfig, summary: dict
) -> tuple[Path, Path]:
    """Write the CSV and its manifest; both appear together or not at all."""
    csv_path = Path(output_path)
    man_path = manifest_path(csv_path)
    manifest = {
        "tool": "dualirs",
        "version": __version__,
        "command": spec.command,
        "seed": spec.seed,
        "parameters": spec.parameters(),
        "scenario_digest": scenario.digest(),
        "scenario": scenario.to_dict(),
        "csv": csv_path.name,
        "summary": summary,
    }
    _atomic_write_many({
        csv_path: _csv_text(header, rows),
        man_path: json.dumps(manifest, indent=2, sort_keys=True) + "\n",
    })
    return csv_path, man_path


def _default_output(command: str) -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / f"{command}.csv"


def _validate_report(scenario: ScenarioConfig) -> str:
    link = scenario.link_distances()
    geo = scenario.geometric_link()
    margin = rank_one_margin(scenario.irs2, geo.d_s, scenario.prop)
    alpha = scenario.prop.alpha
    lines = [
        f"scenario_digest {scenario.digest()}",
        f"alpha_db {analysis.to_db(alpha):.4f}",
        f"irs1 grid {scenario.irs1.count_a}x{scenario.irs1.count_b}",
        f"irs2 grid {scenario.irs2.count_a}x{scenario.irs2.count_b}",
        f"anchor distances d_t={geo.d_t:.6g} d_s={geo.d_s:.6g} d_r={geo.d_r:.6g}",
        f"closed-form distances d_t={link.d_t:.6g} d_s={link.d_s:.6g} d_r={link.d_r:.6g}",
        f"rank_one_margin {margin:.1f}",
        f"crossover_elements {analysis.crossover_elements(alpha, link.d_t):.1f}",
    ]
    return "\n".join(lines)


def run_command(spec: CommandSpec, stdout=None) -> int:
    """Run one command; returns the process exit status."""
    out = stdout or sys.stdout
    try:
        spec.check()
        scenario = load_scenario(spec.scenario_path)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, GeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if spec.command == "validate":
        print(_validate_report(scenario), file=out)
        return EXIT_OK

    try:
        header, rows, summary = _dispatch(spec, scenario)
    except (ValueError, GeometryError, ArithmeticError) as exc:
        print(f"error: {spec.command} failed: {exc}", file=sys.stderr)
        return EXIT_EXPERIMENT

    target = spec.output_path or _default_output(spec.command)
    try:
        csv_path, man_path = write_outputs(header, rows, target, spec, scenario, summary)
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_IO
    for key, value in summary.items():
        print(f"{key} {value}", file=out)
    print(f"wrote {csv_path} and {man_path}", file=out)
    return EXIT_OK


def _dispatch(spec: CommandSpec, scenario: ScenarioConfig):
    if spec.command == "sweep":
        res = experiments.run_split_sweep(
            scenario, spec.k, spec.step, spec.seed, workers=spec.workers
        )
        best = res.best()
        summary = {
            "best_k1": best.k1,
            "best_snr_db": experiments.fmt_db(best.snr_exact_db),
            "max_closed_form_gap_db": experiments.fmt_db(res.max_closed_form_gap()),
            "tracks_closed_form": res.tracks_closed_form(spec.tol_db),
        }
        return res.CSV_HEADER, list(res.csv_rows()), summary

    if spec.command == "rician":
        results = experiments.run_rician_study(
            scenario, spec.k1, spec.k2, spec.taus, spec.trials, spec.seed, workers=spec.workers
        )
        summary = {
            f"{r.case}_tau_{experiments.fmt_tau(r.tau)}_db": experiments.fmt_db(r.mean_snr_db)
            for r in results
        }
        return experiments.McResult.CSV_HEADER, [r.csv_row() for r in results], summary

    if spec.command == "doubling":
        res = experiments.run_doubling_deltas(scenario, spec.k, spec.seed)
        summary = {
            "delta_double_db": experiments.fmt_db(res.delta_double_db),
            "delta_single_db": experiments.fmt_db(res.delta_single_db),
        }
        return res.CSV_HEADER, list(res.csv_rows()), summary

    res = experiments.run_crossover_search(
        scenario, spec.k_min, spec.k_max, spec.step, workers=spec.workers
    )
    summary = {
        "found": res.found,
        "at_boundary": res.at_boundary,
        "k_star": "none" if res.k_star is None else f"{res.k_star:.6g}",
        "closed_form_k_star": f"{analysis.crossover_elements(scenario.prop.alpha, scenario.link_distances().d_t):.6g}",
    }
    return res.CSV_HEADER, list(res.csv_rows()), summary


def _taus(text: str) -> list[float]:
    try:
        values = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad tau list {text!r}") from None
    if not values or any(math.isnan(v) or v < 0 for v in values):
        raise argparse.ArgumentTypeError("taus must be non-negative numbers or inf")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dualirs", description="Simulate double- and single-IRS links and write CSV results."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", default=DEFAULT_SCENARIO,
                        help="scenario file, or the name of a shipped scenario")
    common.add_argument("--out", help=f"output CSV (default ${OUTPUT_DIR_ENV}/<command>.csv)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("sweep", parents=[common], help="SNR versus IRS 1 element count")
    p.add_argument("--k", type=int, default=1600)
    p.add_argument("--step", type=int, default=100)
    p.add_argument("--tol-db", type=float, default=experiments.DEFAULT_TRACKING_TOL_DB,
                   help="allowed |exact - closed form| per row, dB")

    p = sub.add_parser("rician", parents=[common], help="Rician-fading Monte Carlo")
    p.add_argument("--k1", type=int, default=800)
    p.add_argument("--k2", type=int, default=800)
    p.add_argument("--taus", type=_taus, default=[math.inf, 3.0, 1.0])
    p.add_argument("--trials", type=int, default=1000)

    p = sub.add_parser("crossover", parents=[common], help="element budget where two IRSs win")
    p.add_argument("--k-min", type=int, default=600)
    p.add_argument("--k-max", type=int, default=1100)
    p.add_argument("--step", type=int, default=20)

    p = sub.add_parser("doubling", parents=[common], help="SNR gain from doubling K")
    p.add_argument("--k", type=int, default=800)

    sub.add_parser("validate", parents=[common], help="check a scenario and report margins")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    spec = CommandSpec(
        command=args.command,
        scenario_path=args.scenario,
        output_path=args.out,
        seed=args.seed,
        workers=args.workers,
    )
    for name in ("k", "step", "k1", "k2", "taus", "trials", "k_min", "k_max", "tol_db"):
        if hasattr(args, name):
            setattr(spec, name, getattr(args, name))
    return run_command(spec)


if __name__ == "__main__":
    sys.exit(main())

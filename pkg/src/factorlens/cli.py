"""``factorlens`` command line: analyze, cluster, synth, report, verify.

Every command writes its files into a staging directory first and moves
them into ``--out`` only on success, together with ``manifest.json``
(tool version, echoed configuration, SHA-256 of each file).

Exit codes: 0 success, 1 validation/configuration error, 2 numeric
degeneracy (every mixture fit collapsed).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import shutil
import sys
import tempfile
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from . import __version__
from .ca_engine import analyze, project_all_supplementary
from .clustering import DegenerateFitError, cut, select_model, ward_cluster
from .data_table import (
    ClusterScenario,
    RoleAssignment,
    TableError,
    load_csv,
    finance_scenario,
    role_assignment_of,
    save_csv,
    save_ground_truth,
    synth_fixture,
)
from .reporting import cluster_overlay, extremal, plane_scene, svg_document

log = logging.getLogger("factorlens")

METHODS = ("ward", "gmm-eii", "both")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    input: str | None = None
    active: list[str] | None = None
    supplementary: list[str] = field(default_factory=list)
    supplementary_rows: list[str] = field(default_factory=list)
    full_names: bool = False
    axes: list[tuple[int, int]] = field(default_factory=lambda: [(1, 2)])
    method: str = "both"
    k: int = 3
    k_range: tuple[int, int] = (1, 12)
    seed: int = 0
    tol: float = 1e-8
    max_iter: int = 500
    top_n: int = 10
    labels: bool = False
    out: str | None = None

    def validate(self, need_input: bool = True) -> None:
        if need_input and not self.input:
            raise ConfigError("no input file given (--input)")
        if self.active is not None:
            both = sorted(set(self.active) & set(self.supplementary))
            if both:
                raise ConfigError(
                    f"columns listed as both active and supplementary: {', '.join(both)}"
                )
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {', '.join(METHODS)}")
        lo, hi = self.k_range
        if self.method != "ward" and not 1 <= lo <= hi:
            raise ConfigError(f"empty or invalid k range {lo}..{hi}")
        if self.k < 1:
            raise ConfigError("k must be at least 1")
        if not self.tol > 0 or self.max_iter < 1:
            raise ConfigError("tol must be positive and max_iter at least 1")
        if self.top_n < 1:
            raise ConfigError("top-n must be at least 1")
        for a, b in self.axes:
            if a < 1 or b < 1 or a == b:
                raise ConfigError(f"invalid axis pair {a},{b}")

    def roles(self) -> RoleAssignment:
        return RoleAssignment(
            active=tuple(self.active) if self.active is not None else None,
            supplementary=tuple(self.supplementary),
            supplementary_rows=tuple(self.supplementary_rows),
            full_names=self.full_names,
        )

    def echo(self) -> dict:
        d = asdict(self)
        d["axes"] = [list(p) for p in self.axes]
        d["k_range"] = list(self.k_range)
        d.pop("out")
        return d


# -- parsing helpers ------------------------------------------------------------


def _names(v) -> list[str]:
    if isinstance(v, str):
        return [s.strip() for s in v.split(",") if s.strip()]
    return [str(s) for s in v]


def _axes(v) -> list[tuple[int, int]]:
    items = [v] if isinstance(v, str) else list(v)
    out = []
    for it in items:
        parts = _names(it) if isinstance(it, str) else list(it)
        if len(parts) != 2:
            raise ConfigError(f"axis pair must have two entries: {it!r}")
        try:
            out.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise ConfigError(f"bad axis pair {it!r}") from None
    return out


def _k_range(v) -> tuple[int, int]:
    if isinstance(v, str):
        for sep in ("..", "-", ":"):
            if sep in v:
                a, b = v.split(sep, 1)
                break
        else:
            a = b = v
    else:
        a, b = v
    try:
        return int(a), int(b)
    except ValueError:
        raise ConfigError(f"bad k range {v!r}") from None


_CONVERT = {
    "active": _names,
    "supplementary": _names,
    "supplementary_rows": _names,
    "axes": _axes,
    "k_range": _k_range,
    "k": int,
    "seed": int,
    "max_iter": int,
    "top_n": int,
    "tol": float,
    "full_names": bool,
    "labels": bool,
    "method": str,
    "input": str,
    "out": str,
}


def _read_config_file(path: str) -> dict:
    p = Path(path)
    try:
        raw = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a mapping")
    known = {f.name for f in fields(RunConfig)}
    out = {}
    for key, val in raw.items():
        name = str(key).replace("-", "_")
        if name not in known:
            raise ConfigError(f"unknown config key {key!r}")
        if val is None:
            continue
        out[name] = _CONVERT[name](val)
    # relative paths in a config file are relative to the file itself
    for name in ("input", "out"):
        if name in out and not Path(out[name]).is_absolute():
            out[name] = str(p.parent / out[name])
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    """Flags first, then the config file; the file wins on conflicts."""
    given = {}
    for name in _CONVERT:
        val = getattr(args, name, None)
        if val is not None:
            given[name] = _CONVERT[name](val)
    if getattr(args, "config", None):
        from_file = _read_config_file(args.config)
        for name, val in from_file.items():
            if name in given and given[name] != val:
                log.warning("config file overrides --%s (%r -> %r)",
                            name.replace("_", "-"), given[name], val)
        given.update(from_file)
    if "out" not in given:
        given["out"] = os.environ.get("FACTORLENS_OUT", "factorlens_out")
    try:
        return RunConfig(**given)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


# -- bundle writing ---------------------------------------------------------------


class Bundle:
    """Collects output files in a staging directory; ``commit`` publishes them."""

    def __init__(self, out: str | Path):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.stage = Path(tempfile.mkdtemp(prefix=".staging-", dir=self.out))
        self.files: dict[str, str] = {}

    def write(self, name: str, text: str) -> None:
        data = text.encode("utf-8")
        (self.stage / name).write_bytes(data)
        self.files[name] = hashlib.sha256(data).hexdigest()

    def commit(self, manifest: dict) -> None:
        manifest = dict(manifest)
        manifest["files"] = dict(sorted(self.files.items()))
        (self.stage / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        for name in [*self.files, "manifest.json"]:
            os.replace(self.stage / name, self.out / name)
        self.discard()

    def discard(self) -> None:
        shutil.rmtree(self.stage, ignore_errors=True)


def _manifest(command: str, cfg: RunConfig, **extra) -> dict:
    return {
        "tool": "factorlens",
        "version": __version__,
        "command": command,
        "seed": cfg.seed,
        "config": cfg.echo(),
        **extra,
    }


def verify_bundle(out: str | Path) -> list[str]:
    """Names of files whose content no longer matches the manifest hash."""
    out = Path(out)
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    bad = []
    for name, digest in manifest["files"].items():
        p = out / name
        if not p.is_file() or hashlib.sha256(p.read_bytes()).hexdigest() != digest:
            bad.append(name)
    return bad


def _json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


# -- commands ------------------------------------------------------------------


def _load(cfg: RunConfig):
    t = load_csv(cfg.input, cfg.roles())
    res = analyze(t)
    return t, res


def _write_extremals(bundle: Bundle, res, axes, top_n) -> None:
    for k in axes:
        if k > res.n_axes or res.eigenvalues[k - 1] == 0:
            continue
        for direction in ("positive", "negative"):
            rep = extremal(res, k, direction, top_n)
            stem = f"extremal_f{k}_{direction}"
            bundle.write(stem + ".json", rep.to_json())
            bundle.write(stem + ".md", rep.to_markdown())


def cmd_analyze(cfg: RunConfig) -> int:
    cfg.validate()
    bundle = Bundle(cfg.out)
    try:
        t, res = _load(cfg)
        points, skipped = project_all_supplementary(res, t)
        bundle.write("ca_result.json", res.to_json())
        bundle.write("supplementary.json", _json([p.to_dict() for p in points]))
        for a, b in cfg.axes:
            scene = plane_scene(res, (a, b), points, entity_labels=cfg.labels)
            bundle.write(f"plane_f{a}_f{b}.svg", svg_document(scene))
        _write_extremals(bundle, res, (1, 2), cfg.top_n)
        bundle.commit(_manifest("analyze", cfg, warnings=[*t.warnings, *skipped]))
    except BaseException:
        bundle.discard()
        raise
    return 0


def _bic_svg(curve) -> str:
    pts = [(k, b) for k, b in curve if b is not None and math.isfinite(b)]
    w, h, m = 600, 400, 50
    ks = [k for k, _ in curve]
    k0, k1 = min(ks), max(ks)
    lo = min((b for _, b in pts), default=0.0)
    hi = max((b for _, b in pts), default=1.0)
    hi = hi if hi > lo else lo + 1.0

    def sx(k):
        return m + (k - k0) / max(k1 - k0, 1) * (w - 2 * m)

    def sy(b):
        return h - m - (b - lo) / (hi - lo) * (h - 2 * m)

    path = " ".join(f"{sx(k):.2f},{sy(b):.2f}" for k, b in pts)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
        f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>',
        f'<polyline points="{path}" fill="none" stroke="black" stroke-width="1.5"/>',
    ]
    for k, b in pts:
        out.append(f'<circle cx="{sx(k):.2f}" cy="{sy(b):.2f}" r="3" fill="black"/>')
    for k in ks:
        out.append(f'<text x="{sx(k):.2f}" y="{h - m + 18}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="12">{k}</text>')
    out.append(f'<text x="{w // 2}" y="{h - 8}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="13">number of components</text>')
    out.append(f'<text x="14" y="{h // 2}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="13" transform="rotate(-90 14 {h // 2})">BIC (EII)</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_cluster(cfg: RunConfig) -> int:
    cfg.validate()
    bundle = Bundle(cfg.out)
    try:
        t, res = _load(cfg)
        X, labels = res.row_coords, res.row_labels
        pair = cfg.axes[0]
        tree = ward_cluster(X, labels)
        bundle.write("dendrogram.json", tree.to_json())
        extra: dict = {"warnings": list(t.warnings)}
        if cfg.method in ("ward", "both"):
            if cfg.k > len(labels):
                raise ConfigError(f"k={cfg.k} exceeds the number of entities ({len(labels)})")
            part = cut(tree, cfg.k)
            bundle.write("partition_ward.csv", part.to_csv())
            bundle.write("overlay_ward.svg", svg_document(cluster_overlay(res, part, pair)))
        if cfg.method in ("gmm-eii", "both"):
            lo, hi = cfg.k_range
            if hi > len(labels) - 1:
                raise ConfigError(f"k range upper bound {hi} must be below n={len(labels)}")
            sel = select_model(X, range(lo, hi + 1), tol=cfg.tol, max_iter=cfg.max_iter)
            bundle.write("bic_curve.json", _json(sel.curve_dict()))
            bundle.write("bic_curve.svg", _bic_svg([(c["K"], c["bic"]) for c in sel.curve_dict()]))
            bundle.write("gmm_fit.json", sel.best.to_json())
            part = sel.best.partition(labels)
            bundle.write("partition_gmm.csv", part.to_csv())
            scene = cluster_overlay(res, part, pair)
            bundle.write("overlay_gmm.svg", svg_document(scene))
            extra["selectedK"] = sel.best.K
            extra["degenerateFits"] = [f.K for f in sel.fits if f.degenerate]
        bundle.commit(_manifest("cluster", cfg, **extra))
    except BaseException:
        bundle.discard()
        raise
    return 0


def cmd_report(cfg: RunConfig) -> int:
    cfg.validate()
    bundle = Bundle(cfg.out)
    try:
        t, res = _load(cfg)
        axes = sorted({a for pair in cfg.axes for a in pair})
        _write_extremals(bundle, res, axes, cfg.top_n)
        bundle.commit(_manifest("report", cfg, warnings=list(t.warnings)))
    except BaseException:
        bundle.discard()
        raise
    return 0


def cmd_synth(args: argparse.Namespace, out: str) -> int:
    if args.finance:
        scenario = finance_scenario(args.entities, noise=args.noise if args.noise is not None else 0.03)
    else:
        if args.groups < 1:
            raise ConfigError("need at least one group")
        if args.entities < args.groups:
            raise ConfigError("need at least one entity per group")
        base, extra = divmod(args.entities, args.groups)
        sizes = tuple(base + (1 if g < extra else 0) for g in range(args.groups))
        scenario = ClusterScenario(
            group_sizes=sizes,
            n_attributes=args.attributes,
            noise=args.noise if args.noise is not None else 0.02,
            separation=args.separation,
        )
    t = synth_fixture(scenario, seed=args.seed)
    bundle = Bundle(out)
    try:
        bundle.write("table.csv", _csv_text(t))
        bundle.write("truth.csv", _truth_text(t))
        roles = role_assignment_of(t)
        bundle.write("config.json", _json({
            "input": "table.csv",
            "active": list(roles.active),
            "supplementary": list(roles.supplementary),
            "seed": args.seed,
        }))
        echo = {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(scenario).items()}
        bundle.commit({
            "tool": "factorlens", "version": __version__, "command": "synth",
            "seed": args.seed, "config": echo,
        })
    except BaseException:
        bundle.discard()
        raise
    return 0


def _csv_text(t) -> str:
    with tempfile.TemporaryDirectory() as d:
        p = Path(d) / "t.csv"
        save_csv(t, p)
        return p.read_text(encoding="utf-8")


def _truth_text(t) -> str:
    with tempfile.TemporaryDirectory() as d:
        p = Path(d) / "g.csv"
        save_ground_truth(t, p)
        return p.read_text(encoding="utf-8")


# -- argument parsing ------------------------------------------------------------------


def _add_run_flags(p: argparse.ArgumentParser, clustering: bool = False) -> None:
    p.add_argument("--config", help="YAML/JSON config file (wins over flags)")
    p.add_argument("--input", help="CSV table")
    p.add_argument("--active", help="comma-separated active column names (default: all others)")
    p.add_argument("--supplementary", help="comma-separated supplementary column names")
    p.add_argument("--supplementary-rows", dest="supplementary_rows",
                   help="comma-separated supplementary entity labels")
    p.add_argument("--full-names", dest="full_names", action="store_const", const=True,
                   help="second CSV column holds full entity names")
    p.add_argument("--axes", action="append", help="axis pair like 1,2 (repeatable)")
    p.add_argument("--top-n", dest="top_n", type=int, help="extremal list length (default 10)")
    p.add_argument("--labels", action="store_const", const=True,
                   help="draw entity short labels instead of dots")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory (default $FACTORLENS_OUT)")
    if clustering:
        p.add_argument("--method", choices=METHODS)
        p.add_argument("--k", type=int, help="Ward cut size (default 3)")
        p.add_argument("--k-range", dest="k_range", help="mixture sizes, e.g. 1..12")
        p.add_argument("--tol", type=float)
        p.add_argument("--max-iter", dest="max_iter", type=int)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="factorlens", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"factorlens {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_flags(sub.add_parser("analyze", help="correspondence analysis bundle"))
    _add_run_flags(sub.add_parser("cluster", help="Ward / EII mixture clustering bundle"),
                   clustering=True)
    _add_run_flags(sub.add_parser("report", help="extremal-projection reports"))

    s = sub.add_parser("synth", help="write a synthetic table with planted groups")
    s.add_argument("--groups", type=int, default=3)
    s.add_argument("--entities", type=int, default=155)
    s.add_argument("--attributes", type=int, default=8)
    s.add_argument("--noise", type=float)
    s.add_argument("--separation", type=float, default=10.0)
    s.add_argument("--finance", action="store_true",
                   help="three-group table with the eight financial attributes and "
                        "four supplementary percentages")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="output directory (default $FACTORLENS_OUT)")

    v = sub.add_parser("verify", help="check a bundle against its manifest")
    v.add_argument("dir")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        if args.command == "verify":
            bad = verify_bundle(args.dir)
            for name in bad:
                print(f"MISMATCH {name}")
            return 1 if bad else 0
        if args.command == "synth":
            return cmd_synth(args, args.out or os.environ.get("FACTORLENS_OUT", "factorlens_out"))
        cfg = build_config(args)
        return {"analyze": cmd_analyze, "cluster": cmd_cluster, "report": cmd_report}[args.command](cfg)
    except DegenerateFitError as exc:
        print(f"factorlens: numeric degeneracy: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, TableError, ValueError, KeyError, IndexError, OSError) as exc:
        print(f"factorlens: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

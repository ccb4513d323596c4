"""``road-inspect`` command-line entry point.

Global flags (``--seed``, ``--config``, ``--outdir``, ``--quiet``) may be
given before or after the sub-command. Relative output paths are resolved
under ``--outdir``; inputs are resolved against the working directory.
Every command that writes files appends one line to
``<outdir>/manifests.jsonl``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Any, Callable, Sequence

import yaml

from . import artifacts, manifest
from .baselines import ObrienInputs, dewan_smith_pci, michles_pci, obrien_pci, park_pci
from .cmis import MEMBER_ORDER, fit_weights
from .dataset import SynthParams, synth_generate, write_csv, write_provenance
from .errors import InputFileError, InvalidInput, InvalidParams, ReproducibilityError, RoadInspectError
from .metaheuristics import BENCHMARKS, OPTIMIZERS, GaConfig, IcaConfig, benchmark_suite, success_rates, write_benchmark_csv
from .metrics import emit_report
from .mlp import parse_hidden
from .pci_engine import compute_pci, load_curves, load_survey, sample_curves, write_results
from .pipeline import PipelineConfig, load_dataset, read_predictions_csv, run_pipeline, stage, train_member

PROG = "road-inspect"


# ------------------------------------------------------------------ config


def load_config_file(path: str | Path) -> dict[str, Any]:
    """YAML or JSON mapping (JSON is read by the YAML parser)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputFileError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        doc = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise InvalidParams(f"config {path} is not valid YAML/JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidParams(f"config {path} must be a mapping at top level")
    return doc


class Settings:
    """Effective configuration: file (or manifest snapshot) overlaid by flags."""

    def __init__(self, doc: dict[str, Any], args: argparse.Namespace):
        doc = dict(doc)
        synth_doc = doc.pop("synth", None)
        bench_doc = dict(doc.pop("bench", None) or {})
        pc = PipelineConfig.from_dict(doc)
        seed = getattr(args, "seed", None)
        over: dict[str, Any] = {}
        if seed is not None:
            over["seed"] = seed
        for flag, key in (("test_fraction", "test_fraction"), ("workers", "workers"), ("constraint", "cmis_constraint")):
            if getattr(args, flag, None) is not None:
                over[key] = getattr(args, flag)
        if getattr(args, "hidden", None) is not None:
            over["hidden"] = parse_hidden(args.hidden)
        if getattr(args, "epochs", None) is not None:
            over["mlp"] = replace(pc.mlp, max_epochs=args.epochs)
        rbf_over = {k: getattr(args, f) for f, k in (("neurons", "n_centers"), ("spread", "spread"))
                    if getattr(args, f, None) is not None}
        if rbf_over:
            over["rbf"] = replace(pc.rbf, **rbf_over)
        self.pipeline = replace(pc, **over)

        synth = SynthParams.from_dict({**SynthParams().to_dict(), **(synth_doc or {})})
        if getattr(args, "noise_sd", None) is not None:
            synth = replace(synth, noise_sd=args.noise_sd)
        synth.validate()
        self.synth = synth
        self.ga = GaConfig(**bench_doc.get("ga", {}))
        self.ica = IcaConfig(**bench_doc.get("ica", {}))

    @property
    def seed(self) -> int:
        return self.pipeline.seed

    def snapshot(self) -> dict[str, Any]:
        return {**self.pipeline.to_dict(), "synth": self.synth.to_dict(),
                "bench": {"ga": asdict(self.ga), "ica": asdict(self.ica)}}


# --------------------------------------------------------------------- run


class Run:
    """Per-invocation state: settings, resolved paths and manifest bookkeeping."""

    def __init__(self, argv: list[str], args: argparse.Namespace, settings: Settings,
                 rebase_from: Path | None = None):
        self.argv = argv
        # a rerun moves absolute outputs under the recorded outdir into the new one
        self.rebase_from = rebase_from
        self.args = args
        self.settings = settings
        self.outdir = Path(getattr(args, "outdir", None) or ".")
        self.quiet = bool(getattr(args, "quiet", False))
        self.inputs: list[Path] = []
        self.outputs: list[Path] = []
        self.seeds: dict[str, int] = {"seed": settings.seed}
        self.clock = manifest.Clock()

    def info(self, msg: str) -> None:
        if not self.quiet:
            print(msg, file=sys.stderr)

    def input(self, path: str | Path) -> Path:
        p = Path(path)
        if not p.is_file():
            raise InputFileError(f"input file {p} does not exist")
        self.inputs.append(p)
        return p

    def output(self, path: str | Path) -> Path:
        p = Path(path)
        if not p.is_absolute():
            p = self.outdir / p
        elif self.rebase_from is not None and p.resolve().is_relative_to(self.rebase_from):
            p = self.outdir / p.resolve().relative_to(self.rebase_from)
        for src in self.inputs:
            if p.resolve() == src.resolve():
                raise InvalidParams(f"output {p} would overwrite input {src}")
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def produced(self, *paths: Path) -> None:
        self.outputs.extend(Path(p) for p in paths)

    def write_manifest(self, command: str) -> None:
        if not self.outputs:
            return
        record = manifest.RunManifest(
            argv=self.argv, command=command, cwd=os.getcwd(), seeds=self.seeds,
            config=self.settings.snapshot(),
            inputs={str(p): manifest.sha256_file(p) for p in self.inputs},
            outputs=manifest.digest_outputs(self.outputs, self.outdir),
            outdir=str(self.outdir), started_at=self.clock.started_at, wall_clock_s=self.clock.elapsed(),
        )
        manifest.append(record, self.outdir)


# ---------------------------------------------------------------- commands


def cmd_pci_compute(run: Run) -> None:
    a = run.args
    with stage("load"):
        curves = load_curves(run.input(a.curves)) if a.curves else sample_curves()
        survey = load_survey(run.input(a.survey))
    with stage("compute"):
        results = {sid: compute_pci(curves, records) for sid, records in survey.items()}
    with stage("write"):
        if a.out:
            out = run.output(a.out)
            write_results(results, out)
            run.produced(out)
        else:
            write_results(results, sys.stdout)


def _baseline_inputs(text: str) -> dict[str, Any]:
    if text.startswith("@"):
        try:
            text = Path(text[1:]).read_text(encoding="utf-8")
        except OSError as exc:
            raise InputFileError(f"cannot read {text[1:]}: {exc.strerror or exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"--json is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidInput("--json must be a JSON object")
    return doc


BASELINES: dict[str, Callable[[dict[str, Any]], Any]] = {
    "obrien": lambda d: obrien_pci(ObrienInputs(**d)),
    "park": lambda d: park_pci(float(d["iri"])),
    "dewan": lambda d: dewan_smith_pci(float(d["iri"])),
    "michles": lambda d: michles_pci(int(d["treatment"]), float(d["age"])),
}


def cmd_baseline(run: Run) -> None:
    with stage("baseline"):
        inputs = _baseline_inputs(run.args.json)
        try:
            est = BASELINES[run.args.model](inputs)
        except (KeyError, TypeError) as exc:
            raise InvalidInput(f"bad inputs for {run.args.model}: {exc}") from exc
    print(json.dumps(est.to_dict()))


def cmd_synth(run: Run) -> None:
    with stage("synth"):
        data = synth_generate(run.args.n, run.settings.seed, run.settings.synth)
    with stage("write"):
        out = run.output(run.args.out)
        write_csv(data, out)
        run.produced(out, write_provenance(data, out))
    run.info(f"wrote {len(data)} synthetic segments to {out}")


def cmd_train(run: Run) -> None:
    with stage("load"):
        data = load_dataset(run.input(run.args.data))
    with stage("train"):
        art = train_member(run.args.model, data, run.settings.pipeline)
    run.seeds[run.args.model] = run.settings.seed
    with stage("write"):
        out = artifacts.save(art, run.output(run.args.out))
        run.produced(out)
    run.info(f"trained {run.args.model} -> {out}")


def cmd_ensemble_fit(run: Run) -> None:
    with stage("load"):
        P, y = read_predictions_csv(run.input(run.args.preds))
    with stage("ensemble"):
        constraint = run.settings.pipeline.cmis_constraint
        cmis = fit_weights(P, y, constraint=constraint,
                           fitted_on={"n": int(len(y)), "constraint": constraint, "source": str(run.args.preds)})
        art = artifacts.committee_from_artifacts(cmis)
    with stage("write"):
        out = artifacts.save(art, run.output(run.args.out))
        run.produced(out)
    run.info(f"committee train RMSE {cmis.train_rmse:.6g} -> {out}")


def _load_members(run: Run, paths: Sequence[str]) -> dict[str, artifacts.Artifact]:
    members = {}
    for p in paths:
        art = artifacts.load(run.input(p))
        if art.name in members:
            raise InvalidParams(f"model {art.name} given twice")
        members[art.name] = art
    return members


def cmd_ensemble_combine(run: Run) -> None:
    with stage("load"):
        members = _load_members(run, run.args.models)
        cmis_art = artifacts.load(run.input(run.args.cmis))
        if cmis_art.kind != "cmis":
            raise InvalidParams(f"{run.args.cmis} is a {cmis_art.kind} artifact, not a committee")
        data = load_dataset(run.input(run.args.data))
    with stage("ensemble"):
        committee = artifacts.committee_from_artifacts(cmis_art.model.cmis, members)
        P = committee.model.member_predictions(data.X)
        combined = committee.predict(data.X)
    with stage("write"):
        header = ["segment_id", *MEMBER_ORDER, "cmis"]
        lines = [",".join(header)]
        for sid, row, c in zip(data.ids, P, combined):
            lines.append(",".join([sid, *map(repr, map(float, row)), repr(float(c))]))
        text = "\n".join(lines) + "\n"
        if run.args.out:
            out = run.output(run.args.out)
            out.write_text(text, encoding="utf-8")
            run.produced(out)
        else:
            sys.stdout.write(text)


def cmd_evaluate(run: Run) -> None:
    with stage("load"):
        models = _load_members(run, run.args.models)
        train = load_dataset(run.input(run.args.train))
        test = load_dataset(run.input(run.args.test))
    with stage("evaluate"):
        reports = emit_report(models, train, test, run.outdir)
    names = [f"crossplot_{m}.csv" for m in models] + [f"relerr_{m}.csv" for m in models] + \
            [f"cumfreq_{m}.csv" for m in models] + ["report.csv"]
    run.produced(*(run.outdir / n for n in names))
    for rep in reports:
        total = rep["Total"]
        run.info(f"{rep.model:8s} Total AAPRE {total.aapre_pct:8.4f}%  RMSE {total.rmse:.4f}")


def cmd_bench(run: Run) -> None:
    a = run.args
    functions = a.functions.split(",")
    optimizers = a.optimizers.split(",")
    for f in functions:
        if f not in BENCHMARKS:
            raise InvalidParams(f"unknown benchmark {f!r}; choose from {', '.join(BENCHMARKS)}")
    for o in optimizers:
        if o not in OPTIMIZERS:
            raise InvalidParams(f"unknown optimizer {o!r}; choose from {', '.join(OPTIMIZERS)}")
    seeds = range(run.settings.seed, run.settings.seed + a.runs)
    with stage("bench"):
        rows = benchmark_suite(functions, a.dim, seeds, optimizers, run.settings.ga, run.settings.ica)
    with stage("write"):
        out = run.output(a.out)
        write_benchmark_csv(rows, out)
        run.produced(out)
    for s in success_rates(rows):
        run.info(f"{s['optimizer']:4s} {s['function']:11s} d={s['dim']} success {s['successes']}/{s['runs']}")


def cmd_pipeline(run: Run) -> None:
    cfg = run.settings.pipeline
    with stage("load"):
        run.input(run.args.data)
    result = run_pipeline(run.args.data, run.outdir, cfg)
    run.seeds.update(cfg.seeds())
    run.produced(*result.outputs)
    for rep in result.reports:
        total = rep["Total"]
        run.info(f"{rep.model:8s} Total AAPRE {total.aapre_pct:8.4f}%  RMSE {total.rmse:.4f}")


def _strip_flag(argv: list[str], flag: str) -> list[str]:
    out, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok == flag:
            skip = True
            continue
        if tok.startswith(flag + "="):
            continue
        out.append(tok)
    return out


def cmd_rerun(run: Run) -> None:
    with stage("load"):
        records = manifest.read_all(run.args.manifest)
        if not records:
            raise InvalidParams(f"{run.args.manifest} contains no manifests")
        try:
            rec = records[run.args.index]
        except IndexError:
            raise InvalidParams(f"manifest index {run.args.index} out of range ({len(records)} entries)") from None
        if rec.command == "rerun":
            raise InvalidParams("cannot rerun a rerun")
    target = Path(run.args.target).resolve() if run.args.target else Path(rec.cwd, rec.outdir).resolve()
    argv = _strip_flag(_strip_flag(rec.argv, "--config"), "--outdir") + ["--outdir", str(target)]
    here = os.getcwd()
    os.chdir(rec.cwd)
    try:
        with stage("verify-inputs"):
            changed = [p for p, h in rec.inputs.items() if manifest.sha256_file(p) != h]
            if changed:
                raise ReproducibilityError(f"inputs changed since the recorded run: {', '.join(changed)}")
        code = main(argv, config_override=rec.config, rebase_from=Path(rec.cwd, rec.outdir).resolve())
        if code != 0:
            raise ReproducibilityError(f"rerun of {rec.command!r} exited with status {code}")
        with stage("verify-outputs"):
            diffs = []
            for key, digest in rec.outputs.items():
                path = Path(key) if Path(key).is_absolute() else target / key
                if not path.is_file() or manifest.sha256_file(path) != digest:
                    diffs.append(key)
            if diffs:
                raise ReproducibilityError(f"outputs differ from the manifest: {', '.join(diffs)}")
    finally:
        os.chdir(here)
    run.info(f"rerun reproduced {len(rec.outputs)} outputs bit-identically in {target}")


# ------------------------------------------------------------------ parser


def _global_flags() -> argparse.ArgumentParser:
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed for every random stage")
    g.add_argument("--config", default=argparse.SUPPRESS, help="YAML/JSON config; flags override it")
    g.add_argument("--outdir", default=argparse.SUPPRESS, help="directory for outputs (default: .)")
    g.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help="suppress progress messages")
    return g


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = argparse.ArgumentParser(prog=PROG, parents=[common],
                                     description="Pavement condition tools: PCI, baselines and hybrid PCI models.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(parent, name: str, func: Callable[[Run], None], help: str) -> argparse.ArgumentParser:
        p = parent.add_parser(name, parents=[common], help=help, description=help)
        p.set_defaults(func=func)
        return p

    pci = sub.add_parser("pci", help="deduct-value PCI computation").add_subparsers(dest="pci_command", required=True)
    p = add(pci, "compute", cmd_pci_compute, "compute PCI per segment from a distress survey")
    p.add_argument("--curves", help="curve-data JSON (default: the shipped synthetic sample set)")
    p.add_argument("--survey", required=True, help="CSV: segment_id,distress_kind,severity,density_percent")
    p.add_argument("--out", help="output CSV (default: stdout)")

    base = sub.add_parser("baseline", help="closed-form baseline PCI models")
    base_sub = base.add_subparsers(dest="model", required=True)
    for name, hint in (("obrien", "age, age_to_overlay, age_total, log_traffic, d0, d12"), ("park", "iri"),
                       ("dewan", "iri"), ("michles", "treatment (0 or 1), age")):
        p = add(base_sub, name, cmd_baseline, f"{name} baseline; JSON keys: {hint}")
        p.add_argument("--json", required=True, help="JSON object with the inputs, or @file")

    p = add(sub, "synth", cmd_synth, "generate a synthetic deflection/PCI dataset")
    p.add_argument("--n", type=int, default=236, help="number of segments (default: 236)")
    p.add_argument("--noise-sd", type=float, dest="noise_sd", help="PCI noise standard deviation")
    p.add_argument("--out", default="synthetic.csv", help="dataset CSV (default: synthetic.csv)")

    p = add(sub, "train", cmd_train, "train one hybrid model on a dataset CSV")
    p.add_argument("--model", required=True, choices=MEMBER_ORDER)
    p.add_argument("--data", required=True)
    p.add_argument("--hidden", help="MLP hidden sizes, e.g. 10,10,10,10")
    p.add_argument("--epochs", type=int, help="MLP max epochs")
    p.add_argument("--neurons", type=int, help="RBF centers")
    p.add_argument("--spread", type=float, help="RBF spread")
    p.add_argument("--out", required=True)

    ens = sub.add_parser("ensemble", help="committee (CMIS) fitting and combination")
    ens_sub = ens.add_subparsers(dest="ensemble_command", required=True)
    p = add(ens_sub, "fit", cmd_ensemble_fit, "fit committee weights from member predictions")
    p.add_argument("--preds", required=True, help="CSV with columns " + ",".join(MEMBER_ORDER) + ",pci")
    p.add_argument("--constraint", choices=("none", "non-negative"))
    p.add_argument("--out", required=True)
    p = add(ens_sub, "combine", cmd_ensemble_combine, "apply a committee to four member models")
    p.add_argument("--models", nargs=len(MEMBER_ORDER), required=True)
    p.add_argument("--cmis", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", help="output CSV (default: stdout)")

    p = add(sub, "evaluate", cmd_evaluate, "score model artifacts on train/test data")
    p.add_argument("--models", nargs="+", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)

    p = add(sub, "bench", cmd_bench, "run the GA/ICA benchmark harness")
    p.add_argument("--functions", default="sphere,rastrigin,rosenbrock")
    p.add_argument("--optimizers", default="ga,ica")
    p.add_argument("--dim", type=int, default=5)
    p.add_argument("--runs", type=int, default=20, help="seeds seed .. seed+runs-1")
    p.add_argument("--out", default="bench.csv")

    p = add(sub, "pipeline", cmd_pipeline, "full workflow: split, train four models, committee, evaluate")
    p.add_argument("--data", required=True)
    p.add_argument("--test-fraction", type=float, dest="test_fraction")
    p.add_argument("--hidden")
    p.add_argument("--epochs", type=int)
    p.add_argument("--neurons", type=int)
    p.add_argument("--spread", type=float)
    p.add_argument("--constraint", choices=("none", "non-negative"))
    p.add_argument("--workers", type=int)

    p = add(sub, "rerun", cmd_rerun, "re-execute a recorded run and verify its outputs bit for bit")
    p.add_argument("--manifest", required=True, help="manifests.jsonl or the directory holding it")
    p.add_argument("--index", type=int, default=-1, help="which manifest line (default: last)")
    p.add_argument("--target", help="directory to rerun into (default: the recorded outdir)")
    return parser


def _command_name(args: argparse.Namespace) -> str:
    parts = [args.command]
    for attr in ("pci_command", "model" if args.command == "baseline" else None, "ensemble_command"):
        if attr and getattr(args, attr, None):
            parts.append(getattr(args, attr))
    return " ".join(parts)


def main(argv: Sequence[str] | None = None, *, config_override: dict[str, Any] | None = None,
         rebase_from: Path | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    command = _command_name(args)
    try:
        with stage("config"):
            if config_override is not None:
                doc = config_override
            elif getattr(args, "config", None):
                doc = load_config_file(args.config)
            else:
                doc = {}
            settings = Settings(doc, args)
        run = Run(argv, args, settings, rebase_from)
        if getattr(args, "config", None) and config_override is None:
            run.input(args.config)
        with stage(command):
            args.func(run)
        with stage("manifest"):
            if command != "rerun":
                run.write_manifest(command)
    except RoadInspectError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()

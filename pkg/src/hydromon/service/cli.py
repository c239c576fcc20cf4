"""Command line entry points for the monitoring pipeline.

Every stage command reads/writes a single project state file, so a
project can be driven step by step (ingest, embed, cluster, label,
train, score), in one shot (run), exported to CSVs, or served over
HTTP. `synth` writes the seeded validation dataset for trying the
toolchain without plant data.
"""

from __future__ import annotations

import argparse
import json
import sys

from ..autoenc import export_scores_csv
from ..cluster import export_assignment_csv
from ..dimred import export_embedding_csv
from ..ingest import (
    export_matrix_csv,
    load_csv,
    name_labels,
    synth_generate,
    synth_hpp_v1,
    SynthConfig,
)
from .pipeline import PipelineError, apply_labels, pipeline_run
from .state import PipelineConfig, ProjectState, ServiceError, load_state, save_state


def _load_config(path: str) -> PipelineConfig:
    with open(path) as fh:
        return PipelineConfig.from_dict(json.load(fh))


def _run_stages(args, until: str | None) -> int:
    import os

    config = None if args.config is None else _load_config(args.config)
    data = None if args.data is None else load_csv(args.data)
    # an existing state file means resume; stages with matching inputs are skipped
    state = load_state(args.state) if os.path.exists(args.state) else None
    try:
        state = pipeline_run(config=config, data=data, state=state, until=until)
    except PipelineError as exc:
        save_state(exc.state, args.state)
        print(f"error: {exc}", file=sys.stderr)
        print(f"partial state saved to {args.state}", file=sys.stderr)
        return 1
    save_state(state, args.state)
    done = [e["stage"] for e in state.manifest if e["status"] == "complete"]
    print(f"stages complete: {', '.join(done)}")
    if state.stale:
        print(f"stale: {', '.join(state.stale)}")
    if not state.states and not state.config.auto_accept:
        print("paused for labels: apply them with the label command, then train")
    return 0


def _cmd_synth(args) -> int:
    cfg = synth_hpp_v1() if args.config is None else SynthConfig.from_json(args.config)
    matrix, block_labels = synth_generate(cfg)
    export_matrix_csv(matrix, args.out)
    print(f"wrote {matrix.n} rows x {matrix.d} signals to {args.out}")
    if args.labels_out:
        labels, names = name_labels(cfg, block_labels)
        with open(args.labels_out, "w") as fh:
            fh.write("row_id,label\n")
            for i, lab in enumerate(labels):
                fh.write(f"{i},{lab}\n")
        print(f"wrote reference labels ({', '.join(names)}) to {args.labels_out}")
    return 0


def _cmd_label(args) -> int:
    state = load_state(args.state)
    with open(args.file) as fh:
        doc = json.load(fh)
    overrides = doc.get("overrides") if isinstance(doc, dict) else doc
    if not isinstance(overrides, list):
        print('error: label file must hold {"overrides": [...]} or a bare list', file=sys.stderr)
        return 1
    try:
        apply_labels(state, overrides)
    except ServiceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    save_state(state, args.state)
    print(f"applied {len(overrides)} label entries; states now:")
    for k in sorted(state.states):
        s = state.states[k]
        print(f"  {k}: {s['name']} [{s['tag']}] clusters {s['clusters']}")
    if state.stale:
        print(f"stale: {', '.join(state.stale)} (retrain to refresh)")
    return 0


def _cmd_export(args) -> int:
    state = load_state(args.state)
    import os

    os.makedirs(args.out_dir, exist_ok=True)
    wrote = []
    if state.embedding is not None:
        path = os.path.join(args.out_dir, "embedding.csv")
        export_embedding_csv(state.embedding, path)
        wrote.append(path)
    train = state.train_matrix if state.n_train is not None else None
    for algo, a in sorted(state.assignments.items()):
        path = os.path.join(args.out_dir, f"clusters-{algo}.csv")
        export_assignment_csv(a, train.timestamps, path)
        wrote.append(path)
    if state.bank is not None:
        if "bank" in state.stale or "score" in state.stale:
            print("skipping scores.csv: bank is stale after a label change; retrain first",
                  file=sys.stderr)
        else:
            test = state.test_matrix
            path = os.path.join(args.out_dir, "scores.csv")
            export_scores_csv(state.bank, test.data, test.timestamps, path)
            wrote.append(path)
    if not wrote:
        print("nothing to export yet; run the pipeline first", file=sys.stderr)
        return 1
    for path in wrote:
        print(f"wrote {path}")
    return 0


def _cmd_serve(args) -> int:
    from .api import serve

    serve(args.state, port=args.port, host=args.host)
    return 0


def _add_stage_parser(sub, name: str, help_text: str, until: str | None):
    p = sub.add_parser(name, help=help_text)
    p.add_argument("--state", required=True, help="project state file (JSON)")
    p.add_argument("--config", help="pipeline config JSON (fresh runs)")
    p.add_argument("--data", help="input CSV (fresh runs)")
    p.set_defaults(func=lambda a: _run_stages(a, until))
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hydromon",
        description="condition monitoring: normalize, project, cluster, label, "
                    "train per-state autoencoders, score deviations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write the seeded synthetic validation dataset")
    p.add_argument("--out", default="synth.csv", help="output CSV path")
    p.add_argument("--config", help="synthetic config JSON (default: built-in two-regime set)")
    p.add_argument("--labels-out", help="also write ground-truth regime labels")
    p.set_defaults(func=_cmd_synth)

    _add_stage_parser(sub, "ingest", "load, clean and store the dataset", "ingest")
    _add_stage_parser(sub, "embed", "normalize, split and fit the 2-D map", "embed")
    _add_stage_parser(sub, "cluster", "run the configured clustering algorithms", "cluster")
    _add_stage_parser(sub, "train", "fit the voting classifier and model bank", "bank")
    _add_stage_parser(sub, "score", "score the test rows against the bank", "score")
    _add_stage_parser(sub, "run", "run the whole pipeline", None)

    p = sub.add_parser("label", help="apply practitioner state labels to clusters")
    p.add_argument("--state", required=True)
    p.add_argument("--file", required=True, help="JSON with label overrides")
    p.set_defaults(func=_cmd_label)

    p = sub.add_parser("export", help="write embedding, cluster and score CSVs")
    p.add_argument("--state", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("serve", help="serve the project state over HTTP")
    p.add_argument("--state", required=True)
    p.add_argument("--port", type=int, default=8800)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ServiceError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

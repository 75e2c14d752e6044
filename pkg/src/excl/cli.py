"""``excl <kind> --config FILE`` entry point.

Exit status: 0 when every check passed, 1 when some check failed, 2 on a
configuration error.
"""

import argparse
import json
import sys

from .errors import ConfigurationError
from .runner import KINDS, ExperimentConfig, all_passed, emit_summary, run_experiment


def build_parser():
    p = argparse.ArgumentParser(prog="excl", description="Run an extremal-clustering experiment.")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--config", required=True, help="JSON experiment description")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--threads", type=int, help="worker processes for replicate campaigns")
    p.add_argument("--dump", action="store_true", help="write N_tau and sample patterns")
    p.add_argument("--out", help="output directory")
    return p


def load_config(args):
    try:
        with open(args.config) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read {args.config}: {exc.strerror}", "config") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"invalid JSON in {args.config}: {exc}", "config") from None
    if not isinstance(doc, dict):
        raise ConfigurationError("configuration must be a JSON object", "config")
    doc.setdefault("kind", args.kind)
    if doc["kind"] != args.kind:
        raise ConfigurationError(f"config describes {doc['kind']!r}, not {args.kind!r}", "kind")
    for name in ("seed", "threads", "out"):
        if getattr(args, name) is not None:
            doc[name] = getattr(args, name)
    if args.dump:
        doc["dump"] = True
    return ExperimentConfig.from_dict(doc)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        records, plots = run_experiment(cfg)
    except ConfigurationError as exc:
        print(f"excl: configuration error: {exc}", file=sys.stderr)
        return 2
    emit_summary(records, cfg.out, plots, stream=sys.stdout)
    return 0 if all_passed(records) else 1


if __name__ == "__main__":
    sys.exit(main())

"""
Command line entry point.

    onebit-mimo ser-sweep --config exp.ini [--seed S] [--out ser.csv]
    onebit-mimo expected-values --config exp.ini --receiver MMSE --out table.csv
    onebit-mimo validate [--profile desk|full] [--json report.json]

Exit status: 0 on success, 1 when a validation check fails, 2 on
configuration or I/O errors. ``ONEBIT_MIMO_THREADS`` overrides the thread
count of ``ser-sweep``.
"""

import argparse
import csv
import json
import logging
import sys

from .config import load_config, thread_count
from .expectations import TableBudgetError
from .simulation import emit_csv, format_value, prepare_point, run_sweep

log = logging.getLogger("onebit_mimo")

EXIT_OK, EXIT_FAILED, EXIT_ERROR = 0, 1, 2


def _ser_sweep(args):
    config = load_config(args.config)
    out = args.out or config.output
    if out is None:
        raise ValueError("no output path: pass --out or set 'output' in the config")
    threads = thread_count(config)
    log.info("running %d point(s) x %d SNR value(s), %d trial(s), %d thread(s)",
             len(config.points()), len(config.snr_grid_db), config.trials, threads)
    table = run_sweep(config, threads=threads, master_seed=args.seed,
                      progress=lambda M, K, snr: log.info("done M=%d K=%d snr=%g dB", M, K, snr))
    emit_csv(table, out)
    log.info("wrote %d row(s) to %s", len(table.rows), out)
    return EXIT_OK


def _expected_values(args):
    config = load_config(args.config)
    config = config.with_(receivers=(args.receiver,))
    rows = []
    for M, K in config.points():
        for i, snr in enumerate(config.snr_grid_db):
            point = prepare_point(config, M, K, snr, i)
            (label, kind, csi), = point.receivers
            table = point.tables[(kind, csi)]
            for row, idx in enumerate(table.indices):
                for k in range(K):
                    e = table.entries[row, k]
                    rows.append([format_value(float(snr)), M, K, label, table.receiver_kind,
                                 " ".join(map(str, idx)), k, format_value(float(e.real)),
                                 format_value(float(e.imag))])
    try:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(["snr_db", "M", "K", "receiver", "table", "indices", "ue", "expected_re", "expected_im"])
            w.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write expectation table to {args.out}: {exc.strerror}") from exc
    return EXIT_OK


def _validate(args):
    from .validate import validate

    report = validate(args.profile)
    text = json.dumps(report, indent=2)
    if args.json:
        try:
            with open(args.json, "w") as fh:
                fh.write(text + "\n")
        except OSError as exc:
            raise OSError(f"cannot write report to {args.json}: {exc.strerror}") from exc
    else:
        print(text)
    for c in report["checks"]:
        log.info("%-28s %s  deviation=%.4g tolerance=%.4g", c["name"], "PASS" if c["passed"] else "FAIL",
                 c["deviation"], c["tolerance"])
    return EXIT_OK if report["passed"] else EXIT_FAILED


def build_parser():
    p = argparse.ArgumentParser(prog="onebit-mimo", description="1-bit massive MIMO detection experiments")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ser-sweep", help="Monte Carlo SER sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, default=None, help="override the master seed")
    s.add_argument("--out", default=None, help="CSV output path")
    s.set_defaults(func=_ser_sweep)

    e = sub.add_parser("expected-values", help="dump an expectation table")
    e.add_argument("--config", required=True)
    e.add_argument("--receiver", required=True, help="MRC, ZF, MMSE or LMMD, optionally ':perfect'")
    e.add_argument("--out", required=True)
    e.set_defaults(func=_expected_values)

    v = sub.add_parser("validate", help="closed forms versus Monte Carlo oracles")
    v.add_argument("--profile", choices=("desk", "full"), default="desk")
    v.add_argument("--json", default=None, help="write the report here instead of stdout")
    v.set_defaults(func=_validate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, TableBudgetError) as exc:
        print(f"onebit-mimo: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

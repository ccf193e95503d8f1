"""``cafqa-vqe`` command line.

Exit codes: 0 ok, 1 usage, 2 config, 3 backend/broker failure,
4 host blocked awaiting operator ``resume``.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import kvfile
from .backend import BackendError, make_backend
from .broker import (AwaitTimeout, BackendExecutor, Host, HostLockError, HostState, Session,
                     quarantine_list, read_status, request_resume)
from .broker.host import host_status
from .cafqa import cafqa_search, result_record, to_vqe_init
from .config import ConfigError, RunConfig, check_backend, explicit_init, load_config
from .ansatz import hf_point
from .pauli import group_qubitwise_commuting
from .spsa import SpsaAborted
from .vqe import (BrokerExecutor, DirectExecutor, ExecutionError, count_circuits, ground_energy,
                  run_vqe)

logger = logging.getLogger("cafqa_vqe")

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_BACKEND, EXIT_BLOCKED = 0, 1, 2, 3, 4
INIT_STREAMS = {"hf": 0, "cafqa": 1, "explicit": 2}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt_point(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def _load(args) -> RunConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "backend", None):
        check_backend(args.backend)
        cfg.backend = args.backend
    return cfg


def _executor(cfg: RunConfig):
    if cfg.backend.startswith("broker:"):
        return BrokerExecutor(cfg.backend[len("broker:"):], cfg.broker_timeout,
                              cfg.broker_poll_interval, cfg.broker_send_expected)
    return DirectExecutor(make_backend(cfg.backend, cfg.noise))


def _write_cafqa(cfg: RunConfig, result, out: Path) -> None:
    kvfile.dump_file(out / "cafqa_result.yaml", result_record(result, cfg.cafqa))
    with open(out / "cafqa_trace.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["evaluation", "best_energy_hartree"])
        for idx, energy in result.trace:
            w.writerow([idx, repr(float(energy))])


def cmd_cafqa(args) -> int:
    cfg = _load(args)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = cafqa_search(cfg.ansatz, cfg.hamiltonian, cfg.cafqa)
    _write_cafqa(cfg, result, out)
    print(f"best_energy: {result.best_energy!r}")
    print(f"best_point: {','.join(map(str, result.best_point))}")
    print(f"evaluations_used: {result.evaluations_used}")
    return EXIT_OK


def cmd_vqe(args) -> int:
    cfg = _load(args)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    executor = _executor(cfg)
    h = cfg.hamiltonian
    summary: dict = {
        "hamiltonian_path": str(cfg.hamiltonian_path),
        "ground_energy_exact": ground_energy(h),
        "measurement_bases": len(group_qubitwise_commuting(h)),
        "shots": cfg.shots,
        "backend": cfg.backend,
        "seed": cfg.seed,
    }
    total = 0
    for label in cfg.inits:
        if label == "hf":
            init = hf_point(cfg.ansatz)
        elif label == "cafqa":
            result = cafqa_search(cfg.ansatz, h, cfg.cafqa)
            _write_cafqa(cfg, result, out)
            summary.update(kvfile.flatten("cafqa_search", result_record(result, cfg.cafqa)))
            init = to_vqe_init(result)
        else:
            init = explicit_init(cfg)
        outcome = run_vqe(label, init, cfg.ansatz, h, executor, cfg.spsa, cfg.shots, cfg.seed,
                          INIT_STREAMS[label], out, cfg.record_wallclock)
        total += outcome.circuits_issued
        summary.update({
            f"{label}.init_point": _fmt_point(outcome.init),
            f"{label}.init_energy_exact": outcome.init_energy_exact,
            f"{label}.final_point": _fmt_point(outcome.final_point),
            f"{label}.final_energy_exact": outcome.final_energy_exact,
            f"{label}.a0": outcome.trace.a0,
            f"{label}.evaluations": len(outcome.trace.evaluations),
            f"{label}.circuits_issued": outcome.circuits_issued,
        })
        print(f"{label}: init {outcome.init_energy_exact:.8f} Ha -> final {outcome.final_energy_exact:.8f} Ha"
              f" ({outcome.circuits_issued} circuits)")
    summary["circuits_issued_total"] = total
    kvfile.dump_file(out / "summary.yaml", summary)
    print(f"circuits_issued_total: {total}")
    return EXIT_OK


def cmd_account(args) -> int:
    print(count_circuits(args.bases, args.calib_pairs, args.iterations, args.inits))
    return EXIT_OK


def cmd_host(args) -> int:
    backend = make_backend(args.backend)
    state = HostState(max_in_flight=args.max_in_flight, retry_limit=args.retry_limit,
                      deviation_threshold=args.threshold)
    host = Host(args.session, BackendExecutor(backend), state, args.poll_interval,
                halt_on_failure=not args.no_halt)
    try:
        return host.run(idle_exit=args.idle_exit, exit_on_block=args.exit_on_block)
    except KeyboardInterrupt:
        return EXIT_OK


def cmd_status(args) -> int:
    text = read_status(args.session)
    if text is None:
        # no host has run yet: derive what the files alone can tell
        session = Session(args.session)
        state = HostState()
        for job_id in session.request_ids():
            state.job_state[job_id] = "queued"
        for job_id in set(session.journal_ids()) | set(session.result_ids()):
            state.job_state[job_id] = "ok"
        text = host_status(state)
    sys.stdout.write(text)
    return EXIT_BLOCKED if Session(args.session).alert.exists() else EXIT_OK


def cmd_resume(args) -> int:
    path = request_resume(args.session)
    print(f"resume requested ({path})")
    return EXIT_OK


def cmd_quarantine_list(args) -> int:
    for line in quarantine_list(args.session):
        print(line)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cafqa-vqe", description="CAFQA-initialized VQE with a file-based circuit broker")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, func, helptext in (("cafqa", cmd_cafqa, "Clifford-grid initialization search"),
                                 ("vqe", cmd_vqe, "full VQE experiment (HF and/or CAFQA init)")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", required=True)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--backend", help="sim | sim-noisy | broker:<session dir>")
        sp.set_defaults(func=func)

    sp = sub.add_parser("account", help="number of circuits an experiment issues")
    sp.add_argument("--bases", type=int, required=True)
    sp.add_argument("--calib-pairs", type=int, default=25)
    sp.add_argument("--iterations", type=int, required=True)
    sp.add_argument("--inits", type=int, default=2)
    sp.set_defaults(func=cmd_account)

    sp = sub.add_parser("host", help="run the broker host daemon on a session directory")
    sp.add_argument("--session", required=True)
    sp.add_argument("--backend", default="sim", choices=("sim", "sim-noisy"))
    sp.add_argument("--max-in-flight", type=int, default=3)
    sp.add_argument("--retry-limit", type=int, default=3)
    sp.add_argument("--threshold", type=float, default=0.5, help="return-criteria TV threshold")
    sp.add_argument("--poll-interval", type=float, default=0.2)
    sp.add_argument("--idle-exit", type=float, help="exit after this many idle seconds")
    sp.add_argument("--exit-on-block", action="store_true", help="exit with code 4 when a job blocks")
    sp.add_argument("--no-halt", action="store_true",
                    help="return failed_criteria results instead of halting")
    sp.set_defaults(func=cmd_host)

    for name, func, helptext in (("status", cmd_status, "print the host status snapshot"),
                                 ("resume", cmd_resume, "clear a blocked job and retry it"),
                                 ("quarantine-list", cmd_quarantine_list, "list quarantined requests")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--session", required=True)
        sp.set_defaults(func=func)
    return p


def _broker_blocked(args) -> bool:
    try:
        selector = _load(args).backend
    except ConfigError:
        return False
    return selector.startswith("broker:") and Session(selector[len("broker:"):]).alert.exists()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AwaitTimeout, BackendError, ExecutionError, SpsaAborted, HostLockError, OSError) as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        # the optimizer wraps executor failures; a timeout behind a blocked host is exit 4
        cause = exc.cause if isinstance(exc, SpsaAborted) else exc
        if isinstance(cause, AwaitTimeout) and _broker_blocked(args):
            return EXIT_BLOCKED
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())

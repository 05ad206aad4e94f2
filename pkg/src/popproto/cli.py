"""Command-line front door for the toolkit.

Four subcommands: ``simulate`` runs trials of a protocol and emits CSV
rows, ``verify`` runs exhaustive stable-computation/decision checks over
an input grid and emits a JSON report, ``surgery`` orders a delta set,
builds the surgery matrices, and optionally runs drain/retarget
scenarios as a JSON trace, and ``experiment`` executes a JSON sweep
config into an appendable CSV.

Exit codes: 0 success, 1 verification failure, 2 usage or I/O error,
3 infeasible surgery (the delta set admits no ordering).
"""

from __future__ import annotations

import json
import random
import sys
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from itertools import product
from pathlib import Path

import click

from popproto.core import (
    Configuration,
    Protocol,
    ProtocolError,
    TransitionSequence,
    parse_protocol,
)
from popproto.linear import LinearSpec
from popproto.protocols import (
    ProtocolInstance,
    UnknownName,
    builtin,
    builtin_names,
    compile_nlinear,
    compile_qlinear_approx,
)
from popproto.sim import (
    FirstOf,
    InteractionBudget,
    PredicateHolds,
    RunResult,
    SilentOnly,
    StopCondition,
    run_accelerated,
    run_until,
    trial_seed,
)
from popproto.surgery import (
    NotOrderable,
    build_matrices,
    eliminate_delta,
    find_delta_ordering,
    produce_e,
)
from popproto.verify import (
    FunctionOutput,
    PredicateVote,
    SearchLimits,
    check_stable_computation,
    check_stable_decision,
    output_of,
)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3

CSV_FIELDS = (
    "protocol",
    "n",
    "input",
    "a",
    "seed",
    "trial",
    "interactions",
    "parallel_time",
    "y_count",
    "stop_reason",
)
CSV_HEADER = ",".join(CSV_FIELDS)


def fmt_parallel_time(value: Fraction) -> str:
    """Exact decimal with six fractional digits (round half to even)."""
    scaled = round(value * 1_000_000)
    return f"{scaled // 1_000_000}.{scaled % 1_000_000:06d}"


def csv_field(value: object) -> str:
    text = "" if value is None else str(value)
    if any(ch in text for ch in ",\"\n"):
        return '"' + text.replace('"', '""') + '"'
    return text


def csv_row(values: Iterable[object]) -> str:
    return ",".join(csv_field(v) for v in values)


# ---------------------------------------------------------------------------
# Protocol loading and input parsing
# ---------------------------------------------------------------------------


def _parse_int_vector(text: str, what: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok.strip()) for tok in text.split(","))
    except ValueError:
        raise click.UsageError(f"{what} must be comma-separated integers: {text!r}")


def _parse_fractions(text: str) -> tuple[Fraction, ...]:
    try:
        return tuple(Fraction(tok.strip()) for tok in text.split(","))
    except (ValueError, ZeroDivisionError):
        raise click.UsageError(f"bad coefficient list {text!r} (want e.g. 1/2,2/3)")


def _parse_named_counts(text: str) -> dict[str, int]:
    counts: dict[str, int] = {}
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        name, eq, value = tok.partition("=")
        if not eq:
            raise click.UsageError(f"bad input assignment {tok!r} (want name=count)")
        try:
            counts[name.strip()] = int(value)
        except ValueError:
            raise click.UsageError(f"bad count in {tok!r}")
    return counts


def load_spec(spec: str) -> tuple[str, ProtocolInstance | None, Protocol]:
    """Resolve a protocol spec string to (label, instance, protocol).

    Accepted forms: a builtin name, ``nlinear:4,1,2``,
    ``qlinear:1/2,2/3``, or ``file:PATH`` (raw protocols have no
    instance — no layout oracle, silence is the only stop condition).
    """
    if spec.startswith("nlinear:"):
        inst = compile_nlinear(_parse_int_vector(spec[len("nlinear:"):], "nlinear"))
        return inst.name, inst, inst.protocol
    if spec.startswith("qlinear:"):
        inst = compile_qlinear_approx(_parse_fractions(spec[len("qlinear:"):]))
        return inst.name, inst, inst.protocol
    if spec.startswith("file:"):
        path = Path(spec[len("file:"):])
        protocol = parse_protocol(path.read_text(encoding="utf-8"))
        return path.name, None, protocol
    inst = builtin(spec)
    return inst.name, inst, inst.protocol


def protocol_options(f: Callable) -> Callable:
    """Shared --builtin/--protocol-file/--compile-* source options."""
    options = [
        click.option(
            "--builtin",
            "builtin_name",
            metavar="NAME",
            help=f"Builtin protocol ({', '.join(builtin_names())}).",
        ),
        click.option(
            "--protocol-file",
            type=click.Path(exists=True, dir_okay=False, path_type=Path),
            help="Protocol source file (states/roles/transition lines).",
        ),
        click.option(
            "--compile-nlinear",
            "nlinear_spec",
            metavar="C1,C2,...",
            help="Compile an exact protocol for sum ci*m(i), ci natural.",
        ),
        click.option(
            "--compile-qlinear",
            "qlinear_spec",
            metavar="C1,C2,...",
            help="Compile an approximator for nonnegative rationals (e.g. 1/2,2/3).",
        ),
    ]
    for opt in reversed(options):
        f = opt(f)
    return f


def resolve_protocol(
    builtin_name: str | None,
    protocol_file: Path | None,
    nlinear_spec: str | None,
    qlinear_spec: str | None,
) -> tuple[str, ProtocolInstance | None, Protocol]:
    given = [
        spec
        for spec in (
            builtin_name,
            f"file:{protocol_file}" if protocol_file else None,
            f"nlinear:{nlinear_spec}" if nlinear_spec else None,
            f"qlinear:{qlinear_spec}" if qlinear_spec else None,
        )
        if spec
    ]
    if len(given) != 1:
        raise click.UsageError(
            "need exactly one of --builtin, --protocol-file, "
            "--compile-nlinear, --compile-qlinear"
        )
    try:
        return load_spec(given[0])
    except UnknownName as exc:
        raise click.UsageError(str(exc))


def build_initial(
    protocol: Protocol,
    instance: ProtocolInstance | None,
    m_text: str | None,
    input_text: str | None,
    a: int | None,
    q0_override: int | None,
) -> tuple[Configuration, str]:
    """Assemble the initial configuration and its canonical input string.

    The quiescent count comes from the instance's q0 rule unless
    --q0 overrides it; raw file protocols default to --q0 (or zero).
    """
    if (m_text is None) == (input_text is None):
        raise click.UsageError("need exactly one of --m or --input")
    counts: dict[str, int]
    m_vec: tuple[int, ...] | None = None
    if m_text is not None:
        m_vec = _parse_int_vector(m_text, "--m")
        xs = tuple(sorted(protocol.inputs))
        if not xs:
            raise click.UsageError("protocol declares no input states; use --input")
        if len(m_vec) != len(xs):
            raise click.UsageError(
                f"--m has {len(m_vec)} counts but protocol has {len(xs)} inputs"
            )
        counts = {s.name: v for s, v in zip(xs, m_vec)}
    else:
        counts = _parse_named_counts(input_text or "")
        for name in counts:
            if name not in protocol:
                raise click.UsageError(f"unknown state {name!r} in --input")
        xs = tuple(sorted(protocol.inputs))
        if xs and all(s.name in counts for s in xs):
            m_vec = tuple(counts[s.name] for s in xs)
    input_str = ",".join(f"{name}={value}" for name, value in counts.items())

    if a is not None:
        if protocol.approx is None:
            raise click.UsageError("protocol has no approximation state; drop --a")
        counts[protocol.approx.name] = a
    elif protocol.approx is not None:
        raise click.UsageError("protocol has an approximation state; pass --a")

    if q0_override is not None:
        quiescent = q0_override
    elif instance is not None and instance.q0 is not None and m_vec is not None:
        quiescent = instance.q0(m_vec, a) if instance.uses_approx else instance.q0(m_vec)
    else:
        quiescent = 0
    if quiescent:
        if protocol.quiescent is None:
            raise click.UsageError("protocol has no quiescent state; drop --q0")
        counts[protocol.quiescent.name] = quiescent

    for name, value in counts.items():
        if value < 0:
            raise click.UsageError(f"negative count {value} for state {name!r}")
    config = Configuration.from_dict(protocol, counts)
    if config.n < 2:
        raise click.UsageError(f"population of {config.n} cannot interact")
    return config, input_str


def stop_condition_for(
    instance: ProtocolInstance | None, budget: int | None
) -> StopCondition:
    base: StopCondition
    if instance is not None:
        base = PredicateHolds(instance.stabilized, "stabilized")
    else:
        base = SilentOnly()
    if budget is not None:
        return FirstOf((base, InteractionBudget(budget)))
    return base


def output_count(protocol: Protocol, final: Configuration) -> int | None:
    """Output column: output-state count, else the unanimous vote if any."""
    if protocol.output is not None:
        return output_of(final, FunctionOutput(protocol.output))
    if protocol.voters1 is not None:
        return output_of(final, PredicateVote(protocol.voters1))
    return None


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


@click.group()
def main() -> None:
    """Population-protocol toolkit: simulate, verify, surgery, experiment."""


@main.command()
@protocol_options
@click.option("--m", "m_text", metavar="M1[,M2,...]", help="Input counts by position.")
@click.option("--input", "input_text", metavar="NAME=N,...", help="Counts by state name.")
@click.option("--a", type=int, default=None, help="Approximation-state count.")
@click.option("--q0", "q0_override", type=int, default=None, help="Override quiescent count.")
@click.option("--trials", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--budget", type=int, default=None, help="Interaction cap per trial.")
@click.option("--stepwise", is_flag=True, help="Dispatch every null interaction individually.")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="CSV output path (default: stdout).")
def simulate(
    builtin_name, protocol_file, nlinear_spec, qlinear_spec,
    m_text, input_text, a, q0_override, trials, seed, budget, stepwise, out,
) -> None:
    """Run trials of one protocol and emit one CSV row per trial."""
    try:
        label, instance, protocol = resolve_protocol(
            builtin_name, protocol_file, nlinear_spec, qlinear_spec
        )
        initial, input_str = build_initial(
            protocol, instance, m_text, input_text, a, q0_override
        )
    except (ProtocolError, OSError) as exc:
        raise click.UsageError(str(exc))
    stop = stop_condition_for(instance, budget)
    runner = run_until if stepwise else run_accelerated

    rows = [CSV_HEADER]
    for trial in range(trials):
        rng = random.Random(trial_seed(seed, trial))
        result: RunResult = runner(initial, stop, rng)
        rows.append(csv_row([
            label,
            result.n,
            input_str,
            a if a is not None else "",
            seed,
            trial,
            result.interactions,
            fmt_parallel_time(result.parallel_time),
            output_count(protocol, result.final),
            result.stop_reason,
        ]))
    text = "\n".join(rows) + "\n"
    if out is None:
        click.echo(text, nl=False)
    else:
        out.write_text(text, encoding="utf-8")


def _input_grid(arity: int, max_total: int) -> list[tuple[int, ...]]:
    grid = [
        m
        for m in product(range(max_total + 1), repeat=arity)
        if sum(m) <= max_total
    ]
    grid.sort()
    return grid


@main.command()
@protocol_options
@click.option("--max-total", type=int, default=4, show_default=True,
              help="Check all inputs with sum(m) at most this.")
@click.option("--max-a", type=int, default=2, show_default=True,
              help="Approximation counts 1..max-a for approximating protocols.")
@click.option("--q0", "q0_override", type=int, default=None,
              help="Override the instance's quiescent layout with a constant.")
@click.option("--max-nodes", type=int, default=10**6, show_default=True,
              help="Reachability node budget per input.")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="JSON report path (default: stdout).")
def verify(
    builtin_name, protocol_file, nlinear_spec, qlinear_spec,
    max_total, max_a, q0_override, max_nodes, out,
) -> None:
    """Exhaustively certify a protocol on a small input grid (exit 0 iff pass)."""
    try:
        label, instance, protocol = resolve_protocol(
            builtin_name, protocol_file, nlinear_spec, qlinear_spec
        )
    except (ProtocolError, OSError) as exc:
        raise click.UsageError(str(exc))
    if instance is None:
        raise click.UsageError(
            "verify needs an output oracle; use --builtin or a --compile-* spec"
        )
    limits = SearchLimits(max_nodes=max_nodes)
    grid = _input_grid(instance.arity, max_total)
    try:
        if protocol.voters1 is not None:
            report = check_stable_decision(
                protocol, instance.expected_output, grid, limits=limits
            )
        else:
            q0 = instance.q0
            if q0_override is not None:
                q0 = (
                    (lambda m, a: q0_override)
                    if instance.uses_approx
                    else (lambda m: q0_override)
                )
            inputs: Sequence = grid
            if instance.uses_approx:
                inputs = [(m, a) for m in grid for a in range(1, max_a + 1)]
            report = check_stable_computation(
                protocol, instance.expected_output, inputs, q0, limits=limits
            )
    except ProtocolError as exc:
        raise click.UsageError(str(exc))
    payload = {
        "command": "verify",
        "protocol": label,
        "max_total": max_total,
        "passed": report.passed,
        "report": report.to_dict(),
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out is None:
        click.echo(text, nl=False)
    else:
        out.write_text(text, encoding="utf-8")
    sys.exit(EXIT_OK if report.passed else EXIT_FAIL)


@main.command()
@click.option("--protocol-file", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              required=True, help="Protocol source file.")
@click.option("--delta", "delta_text", required=True,
              help="Comma-separated delta states (empty string for the empty set).")
@click.option("--eliminate", "eliminate_text", metavar="C1,C2,...",
              help="Drain these delta counts (in delta-ordering order) to zero.")
@click.option("--retarget", "retarget_text", metavar="E1,E2,...",
              help="Edit the host path to end with these delta counts.")
@click.option("--host", "host_text", metavar="I1,I2,...",
              help="Host path as 0-based transition indices (for --retarget).")
@click.option("--origin", "origin_text", metavar="NAME=N,...",
              help="Host origin configuration (for --retarget).")
@click.option("--b1", type=int, default=1, show_default=True,
              help="Buffer sizing parameter for --retarget.")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="JSON trace path (default: stdout).")
def surgery(
    protocol_file, delta_text, eliminate_text, retarget_text,
    host_text, origin_text, b1, out,
) -> None:
    """Order a delta set, build its matrices, and run drain/retarget scenarios."""
    try:
        protocol = parse_protocol(protocol_file.read_text(encoding="utf-8"))
        delta = [tok.strip() for tok in delta_text.split(",") if tok.strip()]
        for name in delta:
            if name not in protocol:
                raise click.UsageError(f"unknown delta state {name!r}")
    except (ProtocolError, OSError) as exc:
        raise click.UsageError(str(exc))

    try:
        ordering = find_delta_ordering(protocol, delta)
    except NotOrderable as exc:
        detail = {
            "command": "surgery",
            "error": "NotOrderable",
            "remaining": sorted(s.name for s in exc.remaining),
        }
        click.echo(json.dumps(detail, indent=2, sort_keys=True))
        sys.exit(EXIT_INFEASIBLE)

    matrices = build_matrices(protocol, ordering)
    trace: dict[str, object] = {
        "command": "surgery",
        "protocol": protocol_file.name,
        "ordering": ordering.to_dict(),
        "matrices": matrices.to_dict(),
    }
    try:
        if eliminate_text is not None:
            counts = _parse_int_vector(eliminate_text, "--eliminate")
            drain = eliminate_delta(protocol, ordering, counts)
            entry = drain.to_dict()
            entry["fire_counts"] = list(matrices.fire_counts(counts))
            trace["eliminate"] = entry
        if retarget_text is not None:
            if host_text is None or origin_text is None:
                raise click.UsageError("--retarget needs --host and --origin")
            origin = Configuration.from_dict(
                protocol, _parse_named_counts(origin_text)
            )
            indices = _parse_int_vector(host_text, "--host")
            steps = []
            for i in indices:
                if not 0 <= i < len(protocol.transitions):
                    raise click.UsageError(f"host index {i} out of range")
                steps.append(protocol.transitions[i])
            host = TransitionSequence(origin, tuple(steps))
            target = _parse_int_vector(retarget_text, "--retarget")
            result = produce_e(protocol, ordering, host, target, b1)
            entry = result.to_dict()
            entry["executed"] = result.edited.execute().to_dict()
            trace["retarget"] = entry
    except ProtocolError as exc:
        raise click.UsageError(str(exc))

    text = json.dumps(trace, indent=2, sort_keys=True) + "\n"
    if out is None:
        click.echo(text, nl=False)
    else:
        out.write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# Experiment sweeps
# ---------------------------------------------------------------------------


def _sweep_points(run: dict) -> list[tuple[tuple[int, ...], int | None]]:
    """Expand one run block into (m, a) sweep points."""
    raw_ms = run.get("m", [])
    ms = [tuple(m) if isinstance(m, list) else (int(m),) for m in raw_ms]
    raw_as = run.get("a")
    if raw_as is None:
        return [(m, None) for m in ms]
    a_values = [int(a) for a in raw_as]
    if run.get("zip"):
        if len(a_values) != len(ms):
            raise click.UsageError(
                f"zip sweep needs equal lengths, got {len(ms)} m and {len(a_values)} a"
            )
        return list(zip(ms, a_values))
    return [(m, a) for m in ms for a in a_values]


def _run_trial(
    initial: Configuration, stop: StopCondition, seed: int
) -> RunResult:
    return run_accelerated(initial, stop, random.Random(seed))


@main.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Override the config's CSV output path.")
@click.option("--workers", type=int, default=None,
              help="Override the config's worker-pool size.")
def experiment(config_path: Path, out: Path | None, workers: int | None) -> None:
    """Run a JSON sweep config; append rows to its CSV artifact.

    Config schema (JSON): {"out": "sweep.csv", "seed": 0, "trials": 20,
    "budget": null, "workers": 4, "runs": [{"protocol":
    "halve_fast" | "nlinear:4,1,2" | "qlinear:1/2" | "file:path",
    "label": "...", "m": [1000, [30,20], ...], "a": [100, ...] | null,
    "zip": true, "trials": 5, "q0": null}]}. Trials are dispatched to a
    thread pool; rows are written serially in deterministic order, so
    identical config + seed reproduces the CSV byte for byte.
    """
    try:
        config = json.loads(config_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise click.UsageError(f"cannot read config: {exc}")
    out_path = out or Path(config.get("out", "experiment.csv"))
    base_seed = int(config.get("seed", 0))
    default_trials = int(config.get("trials", 1))
    budget = config.get("budget")
    pool_size = workers or int(config.get("workers", 4))

    jobs: list[tuple[list, Configuration, StopCondition, int]] = []
    counter = 0
    try:
        for run in config.get("runs", []):
            label, instance, protocol = load_spec(str(run["protocol"]))
            label = run.get("label", label)
            run_trials = int(run.get("trials", default_trials))
            run_budget = run.get("budget", budget)
            stop = stop_condition_for(
                instance, int(run_budget) if run_budget is not None else None
            )
            for m, a in _sweep_points(run):
                if run.get("q0") is not None or instance is None:
                    initial, input_str = build_initial(
                        protocol, instance, ",".join(map(str, m)), None, a,
                        int(run["q0"]) if run.get("q0") is not None else None,
                    )
                else:
                    initial = instance.initial(m, a)
                    input_str = ",".join(
                        f"{s.name}={v}"
                        for s, v in zip(sorted(protocol.inputs), m)
                    )
                for trial in range(run_trials):
                    meta = [label, initial.n, input_str,
                            a if a is not None else "", base_seed, trial]
                    jobs.append((meta, initial, stop, trial_seed(base_seed, counter)))
                    counter += 1
    except (ProtocolError, KeyError, TypeError, ValueError) as exc:
        raise click.UsageError(f"bad config: {exc!r}")

    with ThreadPoolExecutor(max_workers=max(1, pool_size)) as pool:
        results = list(
            pool.map(lambda j: _run_trial(j[1], j[2], j[3]), jobs)
        )

    new_file = not out_path.exists() or out_path.stat().st_size == 0
    with out_path.open("a", encoding="utf-8") as sink:
        if new_file:
            sink.write(CSV_HEADER + "\n")
            sink.flush()
        for (meta, initial, _, _), result in zip(jobs, results):
            protocol = initial.protocol
            row = csv_row(meta + [
                result.interactions,
                fmt_parallel_time(result.parallel_time),
                output_count(protocol, result.final),
                result.stop_reason,
            ])
            sink.write(row + "\n")
            sink.flush()
    click.echo(f"{len(jobs)} rows -> {out_path}", err=True)


if __name__ == "__main__":
    main()

"""Command-line front end: ``qjump <subcommand> --scenario PATH``.

Exit codes: 0 success, 2 validation error, 3 numeric error, 4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import expm

from . import engine
from . import nonhermitian as nh
from .errors import ArgumentError, ModelError, NumericError, QJumpError
from .pointproc import _renewal_cdf, tail_remainder
from .qops import JumpModel, no_jump_generator, unvec
from .renewal import (
    InterspersedModel,
    RevivalAnalysis,
    RevivalModel,
    exclusive_density_interspersed,
    simulate_interspersed_ensemble,
    trace_distance,
)
from .scenario import EffectiveNH, Scenario, ScenarioError, load_scenario, parse_scenario, serialize_scenario
from .walk import (
    WalkModel,
    as_jump_model,
    embed_state,
    lindblad_rate_curve,
    simulate_hybrid_ensemble,
    vertex_waiting,
)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4
CHUNK = 2048


# --------------------------------------------------------------------------- #
# CSV


@dataclass
class Table:
    """Homogeneous rows under a fixed header."""

    columns: list[str]
    rows: list[list[Any]] = field(default_factory=list)

    def add(self, *row: Any) -> None:
        if len(row) != len(self.columns):
            raise ArgumentError(f"row has {len(row)} fields, header has {len(self.columns)}")
        self.rows.append(list(row))


def _fmt(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def _sort_key(columns: list[str]):
    ti = columns.index("time") if "time" in columns else None
    li = columns.index("label") if "label" in columns else None

    def key(row):
        k = []
        if ti is not None:
            k.append(float(row[ti]))
        if li is not None:
            k.append(str(row[li]))
        return tuple(k)

    return key


def emit_csv(table: Table, path: str | Path) -> Path:
    """Write ``table`` time-major, then by label; ties keep insertion order."""
    p = Path(path)
    rows = sorted(table.rows, key=_sort_key(table.columns))
    with p.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return p


def _state_columns(dim: int) -> list[str]:
    cols = []
    for i in range(dim):
        for j in range(dim):
            cols += [f"rho_{i}{j}_re", f"rho_{i}{j}_im"]
    return cols


def _state_values(rho: NDArray) -> list[float]:
    out = []
    for v in np.asarray(rho).ravel():
        out += [float(v.real), float(v.imag)]
    return out


# --------------------------------------------------------------------------- #
# helpers


def _jump_model(model) -> JumpModel | None:
    if isinstance(model, JumpModel):
        return model
    if isinstance(model, EffectiveNH):
        return model.jump_model
    return None


def _parse_grid(spec: str | None, default: tuple[float, float, int]) -> NDArray:
    if spec is None:
        a, b, n = default
    else:
        try:
            a_s, b_s, n_s = spec.split(":")
            a, b, n = float(a_s), float(b_s), int(n_s)
        except ValueError as exc:
            raise ScenarioError("--grid", "expected t0:t1:steps") from exc
    if n < 1 or not (math.isfinite(a) and math.isfinite(b)) or a < 0 or b < a:
        raise ScenarioError("--grid", "need 0 <= t0 <= t1 and steps >= 1")
    return np.linspace(a, b, n) if n > 1 else np.array([a])


def _simulate_chunk(doc: dict, start: int, count: int):
    scn = parse_scenario(doc)
    return _simulate_range(scn, start, count)


def _simulate_range(scn: Scenario, start: int, count: int):
    m = scn.model
    jm = _jump_model(m)
    if jm is not None:
        return engine.sample_ensemble(jm, scn.initial_state, scn.horizon, count, scn.seed, start)
    if isinstance(m, RevivalModel):
        m = m.interspersed
    if isinstance(m, InterspersedModel):
        return simulate_interspersed_ensemble(m, scn.initial_state, scn.horizon, count, scn.seed, start)
    if isinstance(m, WalkModel):
        return simulate_hybrid_ensemble(m, scn.initial_state, scn.horizon, count, scn.seed, start)
    raise ScenarioError("model.type", "model cannot be simulated")


def _ensembles(scn: Scenario, workers: int) -> list[tuple[int, Any]]:
    """Fixed-size chunks keyed by first trajectory index; independent of ``workers``."""
    starts = list(range(0, scn.trajectories, CHUNK))
    sizes = [min(CHUNK, scn.trajectories - s) for s in starts]
    if workers > 1 and len(starts) > 1:
        doc = serialize_scenario(scn)
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futs = [ex.submit(_simulate_chunk, doc, s, c) for s, c in zip(starts, sizes)]
            return [(s, f.result()) for s, f in zip(starts, futs)]
    return [(s, _simulate_range(scn, s, c)) for s, c in zip(starts, sizes)]


# --------------------------------------------------------------------------- #
# subcommands


def cmd_simulate(scn: Scenario, args) -> int:
    out = Path(args.out)
    dim = scn.model.dim if isinstance(scn.model, WalkModel) else (
        2 if isinstance(scn.model, RevivalModel) else
        scn.model.eh.dim if isinstance(scn.model, EffectiveNH) else scn.model.dim
    )
    walk = isinstance(scn.model, WalkModel)
    ev_cols = ["traj_id", "jump_index", "time", "label"] + (["vertex"] if walk else [])
    events = Table(ev_cols)
    st_cols = ["traj_id", "jump_index", "time"] + (["vertex"] if walk else []) + _state_columns(dim)
    states = Table(st_cols)
    for start, ens in _ensembles(scn, args.workers):
        for j in range(ens.event_traj.size):
            tid = start + int(ens.event_traj[j])
            lab = ens.label_names[int(ens.event_label[j])]
            extra = [int(ens.event_mode[j])] if walk else []
            events.add(tid, int(ens.event_index[j]) + 1, float(ens.event_time[j]), lab, *extra)
            states.add(tid, int(ens.event_index[j]) + 1, float(ens.event_time[j]), *extra,
                       *_state_values(unvec(ens.event_state[j], dim)))
        for i in range(ens.n):
            extra = [int(ens.final_mode[i])] if walk else []
            states.add(start + i, int(ens.n_jumps[i]), float(ens.horizon), *extra,
                       *_state_values(unvec(ens.final_state[i], dim)))
    emit_csv(events, out / "events.csv")
    emit_csv(states, out / "states.csv")
    print(f"wrote {len(events.rows)} events for {scn.trajectories} trajectories")
    return EXIT_OK


def _generic_moments(jm: JumpModel, rho: NDArray) -> tuple[float, float, float]:
    a = no_jump_generator(jm).matrix()
    v = rho.reshape(-1)
    d = jm.dim
    ev = np.linalg.eigvals(a)
    if np.max(ev.real) > -1e-12:
        surv = engine.survival_function(jm, rho)
        return math.inf, math.inf, float(surv.tail)
    x1 = np.linalg.solve(a, v)
    x2 = np.linalg.solve(a, x1)
    m1 = -float(np.trace(x1.reshape(d, d)).real)
    m2 = 2.0 * float(np.trace(x2.reshape(d, d)).real)
    return m1, m2 - m1 * m1, 0.0


def cmd_survival(scn: Scenario, args) -> int:
    m = scn.model
    grid = _parse_grid(args.grid, (0.0, scn.horizon, 101))
    table = Table(["time", "survival", "density"])
    summary: dict[str, float] = {}
    if isinstance(m, EffectiveNH) and m.params is not None:
        p = m.params
        s = nh.survival(p, scn.initial_state, grid)
        f = nh.waiting_density_nh(p, scn.initial_state, grid)
        mom = nh.waiting_moments(p, scn.initial_state)
        summary = {"mean": mom.mean, "variance": mom.variance, "tail": mom.tail}
    elif _jump_model(m) is not None:
        jm = _jump_model(m)
        s = np.array([engine.survival_probability(jm, scn.initial_state, t) for t in grid])
        f = np.array([engine.waiting_density(jm, scn.initial_state, t) for t in grid])
        mean, var, tail = _generic_moments(jm, scn.initial_state)
        summary = {"mean": mean, "variance": var, "tail": tail}
    elif isinstance(m, (InterspersedModel, RevivalModel)):
        law = m.law if isinstance(m, RevivalModel) else m.law_at(1)
        s, f = law.sf(grid), law.pdf(grid)
        summary = {"mean": 1.0 / law.rate, "tail": 0.0}
    elif isinstance(m, WalkModel):
        st = scn.initial_state
        s = np.array([vertex_waiting(m, st, t) for t in grid])
        a = m.no_jump_generator(st.vertex)
        v0 = st.rho.reshape(-1)
        f = np.array([-np.trace(unvec(a @ (expm(t * a) @ v0), m.dim)).real for t in grid])
        summary = {"tail": float(s[-1])}
    else:
        raise ScenarioError("model.type", "survival not available for this model")
    for t, a, b in zip(grid, s, f):
        table.add(float(t), float(a), float(b))
    emit_csv(table, Path(args.out) / "waiting.csv")
    for k, v in summary.items():
        print(f"{k}={_fmt(float(v))}")
    return EXIT_OK


def _renewal_counts(model: InterspersedModel, t: float, m_max: int) -> tuple[NDArray, float]:
    cdfs = [1.0] + [_renewal_cdf(model.laws, k, t, 128, 128) if t > 0 else 0.0 for k in range(1, m_max + 2)]
    probs = np.array([cdfs[k] - cdfs[k + 1] for k in range(m_max + 1)])
    return probs, float(cdfs[m_max + 1])


def cmd_counts(scn: Scenario, args) -> int:
    m = scn.model
    m_max = int(scn.extra.get("m_max", 20))
    times = _parse_grid(args.grid, (scn.horizon, scn.horizon, 1))
    table = Table(["time", "m", "probability", "remainder", "bound"])
    for t in times:
        if isinstance(m, RevivalModel):
            m = m.interspersed
        if isinstance(m, InterspersedModel):
            probs, rem = _renewal_counts(m, float(t), m_max)
            bound = tail_remainder(m.laws, m_max - 1, float(t)) if t > 0 else 0.0
        else:
            if isinstance(m, WalkModel):
                jm, rho = as_jump_model(m), embed_state(m, scn.initial_state)
            else:
                jm, rho = _jump_model(m), scn.initial_state
            cd = engine.count_distribution(jm, rho, float(t), m_max)
            probs, rem, bound = cd.probabilities, cd.remainder, cd.bound
        for k, p in enumerate(probs):
            table.add(float(t), k, float(p), float(rem), float(bound))
    emit_csv(table, Path(args.out) / "counts.csv")
    return EXIT_OK


def _trajectory_from(scn: Scenario, args) -> engine.Trajectory:
    raw = json.loads(args.trajectory) if args.trajectory else scn.extra.get("trajectory")
    if raw is None:
        raise ScenarioError("trajectory", "missing; pass --trajectory or add a 'trajectory' field")
    try:
        events = tuple((str(lab), float(t)) for lab, t in raw["events"])
        return engine.Trajectory(events, float(raw.get("horizon", scn.horizon)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError("trajectory", f"expected {{'events': [[label, time], ...], 'horizon': T}} ({exc})") from exc


def cmd_exclusive(scn: Scenario, args) -> int:
    traj = _trajectory_from(scn, args)
    m = scn.model
    if isinstance(m, RevivalModel):
        m = m.interspersed
    if isinstance(m, InterspersedModel):
        val = exclusive_density_interspersed(m, scn.initial_state, traj)
    elif isinstance(m, WalkModel):
        val = engine.exclusive_density(as_jump_model(m), embed_state(m, scn.initial_state), traj)
    else:
        val = engine.exclusive_density(_jump_model(m), scn.initial_state, traj)
    print(_fmt(float(val)))
    return EXIT_OK


def cmd_revival(scn: Scenario, args) -> int:
    m = scn.model
    if not isinstance(m, RevivalModel):
        raise ScenarioError("model.type", "revival requires a 'revival' model")
    t0s = _parse_grid(args.grid, (0.0, scn.horizon, 21))
    taus = scn.extra.get("durations", [1.0, "inf"])
    durations = []
    for i, d in enumerate(taus):
        if d == "inf":
            durations.append(math.inf)
        else:
            try:
                durations.append(float(d))
            except (TypeError, ValueError) as exc:
                raise ScenarioError(f"durations[{i}]", "expected a number or 'inf'") from exc
            if durations[-1] <= 0:
                raise ScenarioError(f"durations[{i}]", "must be positive")
    an = RevivalAnalysis(m, float(t0s[-1]))
    table = Table(["t0", "t", "P0_rho0", "P1_rho0", "P0_rho1", "P1_rho1", "kolmogorov", "trace"])
    for t0 in t0s:
        e0, e1 = an.mean_states(float(t0))
        tr = trace_distance(e0, e1)
        for tau in durations:
            t = t0 + tau
            (a0, a1), (b0, b1) = an.probabilities(float(t0), t)
            dk = 0.5 * abs(a0 - b0) + 0.5 * abs(a1 - b1)
            table.add(float(t0), float(t), a0, a1, b0, b1, dk, tr)
    emit_csv(table, Path(args.out) / "distances.csv")
    return EXIT_OK


def cmd_walk(scn: Scenario, args) -> int:
    m = scn.model
    if not isinstance(m, WalkModel):
        raise ScenarioError("model.type", "walk requires a 'walk' model")
    grid = _parse_grid(args.grid, (0.0, scn.horizon, 21))
    cols = ["time", "vertex", "method", "trace", "trace_stderr"] + _state_columns(m.dim)
    table = Table(cols)
    for t, rv in zip(grid, lindblad_rate_curve(m, scn.initial_state, grid)):
        for k, eta in enumerate(rv.etas):
            table.add(float(t), k, "rate", float(np.trace(eta).real), 0.0, *_state_values(eta))
    if scn.trajectories > 0:
        sums = [np.zeros((m.dim, m.dim), complex) for _ in range(m.n)]
        sq = np.zeros(m.n)
        for _, ens in _ensembles(scn, args.workers):
            states = unvec(ens.final_state, m.dim)
            for k in range(m.n):
                sel = ens.final_mode == k
                sums[k] += states[sel].sum(axis=0)
                sq[k] += sel.sum()
        n = scn.trajectories
        for k in range(m.n):
            p = sq[k] / n
            se = math.sqrt(max(p * (1 - p), 0.0) / n)
            table.add(float(scn.horizon), k, "monte_carlo", float(p), se, *_state_values(sums[k] / n))
    emit_csv(table, Path(args.out) / "walk.csv")
    return EXIT_OK


def cmd_verify(scn: Scenario | None, args) -> int:
    from .verify import run_checks

    rows = run_checks()
    table = Table(["check_id", "paper_anchor", "expected", "actual", "tolerance", "status"])
    for r in rows:
        table.rows.append([r.check_id, r.anchor, r.expected, r.actual, r.tolerance, r.status])
    out = Path(args.out) / "verify_report.csv"
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.columns)
        for row in table.rows:
            w.writerow([_fmt(v) for v in row])
    width = max(len(r.check_id) for r in rows)
    for r in rows:
        print(f"{r.check_id:<{width}}  {r.status}")
    failed = [r for r in rows if r.status != "pass"]
    print(f"{len(rows) - len(failed)}/{len(rows)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "survival": cmd_survival,
    "counts": cmd_counts,
    "exclusive": cmd_exclusive,
    "revival": cmd_revival,
    "walk": cmd_walk,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qjump", description="Quantum jump trajectory simulator and analyzer.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--scenario", required=name != "verify", help="scenario JSON file")
        s.add_argument("--out", default=".", help="output directory")
        s.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        s.add_argument("--workers", type=int, default=1, help="parallel worker processes")
        s.add_argument("--grid", default=None, help="time grid t0:t1:steps")
        if name == "exclusive":
            s.add_argument("--trajectory", default=None, help="JSON {'events': [[label, t], ...], 'horizon': T}")
    return p


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    try:
        if args.workers < 1:
            raise ScenarioError("--workers", "must be at least 1")
        Path(args.out).mkdir(parents=True, exist_ok=True)
        scn = None
        if args.scenario:
            scn = load_scenario(args.scenario)
            if args.seed is not None:
                if not 0 <= args.seed < 2**64:
                    raise ScenarioError("--seed", "must be a 64-bit unsigned integer")
                scn.seed = args.seed
        return COMMANDS[args.command](scn, args)
    except (ArgumentError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except QJumpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def main() -> None:
    sys.exit(run())


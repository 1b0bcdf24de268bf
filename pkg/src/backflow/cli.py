"""Command-line surface: evolution, distances, backflow detection, thresholds,
region scans and self-validation, emitting CSV or JSON for plotting.

Exit codes: 0 success (including an informational no-backflow verdict),
1 backflow detected by ``detect``, 2 usage error, 3 post-selection
impossible, 4 validation failure.
"""

import json

import click
import numpy as np

from .channel import (
    KrausChannel,
    apply,
    eternal_nm_generator,
    integrate_canonical,
    phi_t_kraus,
    validate_cptp,
)
from .control import (
    analytic_state_path,
    analytic_state_switch,
    controlled_output,
    default_amplitudes,
    path_config,
    path_kraus,
    switch_config,
    switch_kraus,
)
from .detect import (
    BACKFLOW_EPS,
    DEFAULT_GRID_POINTS,
    DEFAULT_T_MAX,
    DEFAULT_T_MIN,
    analytic_dDdt_path,
    analytic_dDdt_switch,
    asymptotic_threshold,
    bare_dDdt,
    bare_distance,
    detect_backflow,
    max_coherent_dDdt_path,
    max_coherent_dDdt_switch,
    path_distance,
    probe_distance,
    probe_pair,
    scan_region,
    switch_distance,
)
from .qmat import KET_0, PostSelectionImpossibleError, check_density_operator, pure_state, trace_distance

EXIT_BACKFLOW = 1
EXIT_POSTSELECT = 3
EXIT_VALIDATION = 4


def _fmt(value: float) -> str:
    return f"{value:.15g}"


def _round15(value: float) -> float:
    return float(_fmt(value))


def _emit(text: str, out) -> None:
    if out is None:
        click.echo(text, nl=False)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _csv(lines) -> str:
    return "\n".join(lines) + "\n"


def _parse_input_state(text: str) -> np.ndarray:
    """Parse 'rho11,re12,im12,rho22' into a validated density matrix."""
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise click.UsageError(f"--input must be four comma-separated reals: {exc}")
    if len(vals) != 4:
        raise click.UsageError("--input must have exactly four entries: rho11,re12,im12,rho22")
    r11, re12, im12, r22 = vals
    rho = np.array([[r11, re12 + 1j * im12], [re12 - 1j * im12, r22]], dtype=complex)
    try:
        check_density_operator(rho)
    except ValueError as exc:
        raise click.UsageError(f"--input is not a density matrix: {exc}")
    return rho


def _initial_state(a, input_text) -> np.ndarray:
    if input_text is not None and a is not None:
        raise click.UsageError("--a and --input are mutually exclusive")
    if input_text is not None:
        return _parse_input_state(input_text)
    if a is not None:
        return probe_pair(a)[1]
    return pure_state(KET_0)


def _config_for(mode: str, p: float, outcome: str = "plus"):
    if mode == "path":
        return path_config(p, outcome=outcome)
    if mode == "switch":
        return switch_config(p, outcome=outcome)
    return "bare"


def _time_axis(t, t_min, t_max, points) -> np.ndarray:
    if t is not None:
        return np.array([t], dtype=float)
    if t_max is None:
        raise click.UsageError("provide either --t or --t-max")
    if points < 1:
        raise click.UsageError("--points must be positive")
    return np.linspace(t_min, t_max, points)


@click.group()
def main():
    """Lossy-qubit backflow toolkit: evolve states, detect information
    backflow, query thresholds and scan the (a, p) phase diagram."""


@main.command()
@click.option("--mode", type=click.Choice(["bare", "path", "switch"]), required=True)
@click.option("--a", type=float, default=None, help="Probe parameter; evolves a|0>+sqrt(1-a^2)|1>.")
@click.option("--input", "input_text", type=str, default=None, help="Initial state rho11,re12,im12,rho22.")
@click.option("--p", type=float, default=1.0, show_default=True, help="Control purity parameter.")
@click.option("--outcome", type=click.Choice(["plus", "minus"]), default="plus", show_default=True)
@click.option("--t", type=float, default=None, help="Single evaluation time.")
@click.option("--t-min", type=float, default=0.0, show_default=True)
@click.option("--t-max", type=float, default=None)
@click.option("--points", type=int, default=201, show_default=True)
@click.option("--format", "fmt_name", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, writable=True), default=None)
@click.pass_context
def evolve(ctx, mode, a, input_text, p, outcome, t, t_min, t_max, points, fmt_name, out):
    """Time series of the evolved state and post-selection probability."""
    rho0 = _initial_state(a, input_text)
    times = _time_axis(t, t_min, t_max, points)
    config = _config_for(mode, p, outcome)
    rows = []
    try:
        for ti in times:
            if config == "bare":
                rho, prob = apply(phi_t_kraus(ti), rho0), 1.0
            else:
                rho, prob = controlled_output(config, rho0, ti)
            rows.append((float(ti), rho, prob))
    except PostSelectionImpossibleError as exc:
        click.echo(f"error: {exc}", err=True)
        ctx.exit(EXIT_POSTSELECT)
    header = (
        "t,rho11_re,rho11_im,rho12_re,rho12_im,"
        "rho21_re,rho21_im,rho22_re,rho22_im,probability"
    )
    if fmt_name == "csv":
        lines = [header]
        for ti, rho, prob in rows:
            entries = [ti]
            for idx in ((0, 0), (0, 1), (1, 0), (1, 1)):
                entries.extend([rho[idx].real, rho[idx].imag])
            entries.append(prob)
            lines.append(",".join(_fmt(v) for v in entries))
        _emit(_csv(lines), out)
    else:
        series = []
        for ti, rho, prob in rows:
            series.append(
                {
                    "t": _round15(ti),
                    "rho": [[_round15(rho[i, j].real), _round15(rho[i, j].imag)] for i in range(2) for j in range(2)],
                    "probability": _round15(prob),
                }
            )
        payload = {"command": "evolve", "mode": mode, "p": p, "outcome": outcome, "series": series}
        _emit(json.dumps(payload, indent=2) + "\n", out)


@main.command()
@click.option("--mode", type=click.Choice(["bare", "path", "switch"]), required=True)
@click.option("--a", type=float, required=True)
@click.option("--p", type=float, default=1.0, show_default=True)
@click.option("--t", type=float, default=None)
@click.option("--t-min", type=float, default=0.0, show_default=True)
@click.option("--t-max", type=float, default=None)
@click.option("--points", type=int, default=201, show_default=True)
@click.option("--format", "fmt_name", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, writable=True), default=None)
def distance(mode, a, p, t, t_min, t_max, points, fmt_name, out):
    """Probe-pair trace distance D(t) for a configuration."""
    times = _time_axis(t, t_min, t_max, points)
    config = _config_for(mode, p)
    values = np.asarray(probe_distance(config, a, times), dtype=float)
    if fmt_name == "csv":
        lines = ["t,distance"]
        lines.extend(f"{_fmt(ti)},{_fmt(di)}" for ti, di in zip(times, values))
        _emit(_csv(lines), out)
    else:
        payload = {
            "command": "distance",
            "mode": mode,
            "a": a,
            "p": p,
            "series": [{"t": _round15(ti), "distance": _round15(di)} for ti, di in zip(times, values)],
        }
        _emit(json.dumps(payload, indent=2) + "\n", out)


@main.command()
@click.option("--mode", type=click.Choice(["bare", "path", "switch"]), required=True)
@click.option("--a", type=float, required=True)
@click.option("--p", type=float, default=1.0, show_default=True)
@click.option("--t-min", type=float, default=DEFAULT_T_MIN, show_default=True)
@click.option("--t-max", type=float, default=DEFAULT_T_MAX, show_default=True)
@click.option("--points", type=int, default=DEFAULT_GRID_POINTS, show_default=True)
@click.option("--eps", type=float, default=BACKFLOW_EPS, show_default=True, help="Backflow tolerance on the derivative.")
@click.option("--format", "fmt_name", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, writable=True), default=None)
@click.pass_context
def detect(ctx, mode, a, p, t_min, t_max, points, eps, fmt_name, out):
    """Detect information backflow; exit code 1 when backflow is found."""
    times = np.exp(np.linspace(np.log(t_min), np.log(t_max), points))
    config = _config_for(mode, p)
    try:
        report = detect_backflow(config, a, times=times, eps=eps)
    except PostSelectionImpossibleError as exc:
        click.echo(f"error: {exc}", err=True)
        ctx.exit(EXIT_POSTSELECT)
    intervals = ";".join(f"{_fmt(t0)}:{_fmt(t1)}" for t0, t1 in report.backflow_intervals)
    if fmt_name == "csv":
        lines = [
            f"# config: {report.config}",
            f"# a: {_fmt(a)}",
            f"# verdict: {'true' if report.verdict else 'false'}",
            f"# marginal: {'true' if report.marginal else 'false'}",
            f"# intervals: {intervals}",
            "t,distance,derivative",
        ]
        lines.extend(
            f"{_fmt(ti)},{_fmt(di)},{_fmt(vi)}"
            for ti, di, vi in zip(report.times, report.distance, report.derivative)
        )
        _emit(_csv(lines), out)
    else:
        payload = {
            "command": "detect",
            "config": report.config,
            "a": a,
            "eps": eps,
            "verdict": report.verdict,
            "marginal": report.marginal,
            "intervals": [[_round15(t0), _round15(t1)] for t0, t1 in report.backflow_intervals],
            "series": [
                {"t": _round15(ti), "distance": _round15(di), "derivative": _round15(vi)}
                for ti, di, vi in zip(report.times, report.distance, report.derivative)
            ],
        }
        _emit(json.dumps(payload, indent=2) + "\n", out)
    ctx.exit(EXIT_BACKFLOW if report.verdict else 0)


@main.command()
@click.option("--mode", type=click.Choice(["path", "switch"]), required=True)
@click.option("--p", type=float, required=True)
def threshold(mode, p):
    """Critical probe parameter for late-time backflow."""
    click.echo(_fmt(asymptotic_threshold(mode, p)))


@main.command()
@click.option("--a-min", type=float, default=0.005, show_default=True)
@click.option("--a-max", type=float, default=0.995, show_default=True)
@click.option("--a-points", type=int, default=100, show_default=True)
@click.option("--p-min", type=float, default=0.0, show_default=True)
@click.option("--p-max", type=float, default=1.0, show_default=True)
@click.option("--p-points", type=int, default=100, show_default=True)
@click.option("--t-max", type=float, default=DEFAULT_T_MAX, show_default=True)
@click.option("--eps", type=float, default=BACKFLOW_EPS, show_default=True)
@click.option("--threads", type=int, default=None, help="Row-level thread count (default: BACKFLOW_SCAN_THREADS or 1).")
@click.option("--format", "fmt_name", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, writable=True), default=None)
def scan(a_min, a_max, a_points, p_min, p_max, p_points, t_max, eps, threads, fmt_name, out):
    """Backflow verdicts over an (a, p) grid, rows ordered p-major."""
    if a_points < 1 or p_points < 1:
        raise click.UsageError("grid sizes must be positive")
    if a_points * p_points > 1_000_000:
        raise click.UsageError("grid exceeds 10^6 cells")
    a_grid = np.linspace(a_min, a_max, a_points)
    p_grid = np.linspace(p_min, p_max, p_points)
    result = scan_region(a_grid, p_grid, t_max=t_max, eps=eps, threads=threads)
    if fmt_name == "csv":
        lines = ["a,p,path_backflow,switch_backflow"]
        for i, p in enumerate(p_grid):
            for j, a in enumerate(a_grid):
                lines.append(
                    f"{_fmt(a)},{_fmt(p)},"
                    f"{'true' if result.backflow_path[i, j] else 'false'},"
                    f"{'true' if result.backflow_switch[i, j] else 'false'}"
                )
        _emit(_csv(lines), out)
    else:
        payload = {
            "command": "scan",
            "a_grid": [_round15(v) for v in a_grid],
            "p_grid": [_round15(v) for v in p_grid],
            "backflow_path": result.backflow_path.tolist(),
            "backflow_switch": result.backflow_switch.tolist(),
        }
        _emit(json.dumps(payload, indent=2) + "\n", out)


def _suite_cptp(inject_defect: bool):
    worst_res = 0.0
    worst_eig = np.inf
    grid = np.arange(0.0, 5.0 + 1e-9, 0.1)
    for t in grid:
        phi = phi_t_kraus(t)
        channels = [phi, switch_kraus(phi, phi), path_kraus(phi, phi, default_amplitudes())]
        for ch in channels:
            report = validate_cptp(ch)
            worst_res = max(worst_res, report.completeness_residual)
            worst_eig = min(worst_eig, report.choi_min_eigenvalue)
    if inject_defect:
        phi = phi_t_kraus(1.0)
        bad_ops = list(phi.ops)
        bad_ops[2] = bad_ops[2] + 0.05 * np.eye(2)
        report = validate_cptp(KrausChannel(tuple(bad_ops), label="injected-defect"))
        worst_res = max(worst_res, report.completeness_residual)
        worst_eig = min(worst_eig, report.choi_min_eigenvalue)
    ok = worst_res <= 1e-12 and worst_eig >= -1e-10
    detail = f"worst completeness residual {worst_res:.3e}, worst Choi eigenvalue {worst_eig:.3e}"
    return ok, detail


def _suite_ode(t_values, seed: int = 7):
    gen = eternal_nm_generator()
    rng = np.random.default_rng(seed)
    states = [pure_state(KET_0), pure_state(np.array([1.0, 1.0]) / np.sqrt(2.0))]
    for _ in range(3):
        g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        rho = g @ g.conj().T
        states.append(rho / np.trace(rho).real)
    worst = 0.0
    for t in t_values:
        channel = phi_t_kraus(t)
        for rho in states:
            kraus_state = apply(channel, rho)
            ode_state = integrate_canonical(gen, rho, t, dt=1e-3)
            worst = max(worst, trace_distance(kraus_state, ode_state))
    return worst <= 1e-6, f"worst Kraus-vs-RK4 trace distance {worst:.3e}"


def _suite_closed_form(seed: int = 7):
    rng = np.random.default_rng(seed)
    states = []
    for _ in range(3):
        g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        rho = g @ g.conj().T
        states.append(rho / np.trace(rho).real)
    worst = 0.0
    for t in (0.5, 1.0, 2.0, 3.0):
        for p in (0.0, 0.5, 1.0):
            for rho in states:
                out_path, _ = controlled_output(path_config(p), rho, t)
                out_switch, _ = controlled_output(switch_config(p), rho, t)
                worst = max(worst, float(np.abs(out_path - analytic_state_path(rho, t, p)).max()))
                worst = max(worst, float(np.abs(out_switch - analytic_state_switch(rho, t, p)).max()))
    return worst <= 1e-10, f"worst closed-form vs supermap deviation {worst:.3e}"


def _suite_derivatives():
    h = 1e-4
    ts = np.linspace(0.1, 5.0, 25)
    worst_fd = 0.0
    for a in (0.2, 0.5, 0.65, 0.9):
        fd = (bare_distance(a, ts + h) - bare_distance(a, ts - h)) / (2 * h)
        worst_fd = max(worst_fd, float(np.abs(fd - bare_dDdt(a, ts)).max()))
        for p in (0.25, 0.5, 0.75, 1.0):
            fd = (path_distance(a, p, ts + h) - path_distance(a, p, ts - h)) / (2 * h)
            worst_fd = max(worst_fd, float(np.abs(fd - analytic_dDdt_path(a, p, ts)).max()))
            fd = (switch_distance(a, p, ts + h) - switch_distance(a, p, ts - h)) / (2 * h)
            worst_fd = max(worst_fd, float(np.abs(fd - analytic_dDdt_switch(a, p, ts)).max()))
    worst_red = 0.0
    for a in (0.2, 0.5, 0.65, 0.9):
        general_path = analytic_dDdt_path(a, 1.0, ts)
        general_switch = analytic_dDdt_switch(a, 1.0, ts)
        rel_path = np.abs(general_path - max_coherent_dDdt_path(a, ts)) / np.abs(general_path)
        rel_switch = np.abs(general_switch - max_coherent_dDdt_switch(a, ts)) / np.abs(general_switch)
        worst_red = max(worst_red, float(rel_path.max()), float(rel_switch.max()))
    ok = worst_fd <= 1e-6 and worst_red <= 1e-10
    return ok, f"worst FD residual {worst_fd:.3e}, worst p=1 reduction residual {worst_red:.3e}"


@main.command()
@click.option("--suite", type=click.Choice(["all", "cptp", "ode", "closed-form", "derivatives"]), default="all", show_default=True)
@click.option("--t", "t_values", type=float, multiple=True, help="ODE oracle times (default 0.5 1 2 5).")
@click.option("--inject-defect", is_flag=True, hidden=True, help="Perturb a Kraus operator to exercise the failure path.")
@click.pass_context
def validate(ctx, suite, t_values, inject_defect):
    """Run the internal consistency suites; exit 4 on any failure."""
    ode_times = list(t_values) if t_values else [0.5, 1.0, 2.0, 5.0]
    selected = ["cptp", "ode", "closed-form", "derivatives"] if suite == "all" else [suite]
    all_ok = True
    for name in selected:
        if name == "cptp":
            ok, detail = _suite_cptp(inject_defect)
        elif name == "ode":
            ok, detail = _suite_ode(ode_times)
        elif name == "closed-form":
            ok, detail = _suite_closed_form()
        else:
            ok, detail = _suite_derivatives()
        all_ok = all_ok and ok
        click.echo(f"{name}: {'PASS' if ok else 'FAIL'} ({detail})")
    click.echo("all checks passed" if all_ok else "validation FAILED")
    if not all_ok:
        ctx.exit(EXIT_VALIDATION)


if __name__ == "__main__":
    main()

"""Render report payloads (the JSON dicts the service returns) as
aligned-column text or CSV.  Numbers are printed with 17 significant digits
so every double round-trips exactly and identical runs emit identical bytes.
"""

from __future__ import annotations

import json

__all__ = ["fnum", "render_json", "render_text", "render_csv"]


def fnum(x) -> str:
    if x is None:
        return "-"
    return format(float(x), ".17g")


def render_json(payload: dict) -> str:
    return json.dumps(payload, indent=2) + "\n"


def _header_line(payload: dict, extra: str = "") -> str:
    parts = [
        f"model={payload['model']}",
        f"scheme={payload['scheme']}",
        f"horizon={fnum(payload['horizon'])}",
        f"seed={payload['seed']}",
        f"n_paths={payload['n_paths']}",
    ]
    if extra:
        parts.append(extra)
    return " ".join(parts)


def _converge_text(report: dict) -> list[str]:
    lines = [_header_line(report)]
    lines.append(f"{'n':>8} {'mean_abs_error':>26} {'std_error':>26} {'rms_error':>26}")
    rms = {p["n"]: p["rms_error"] for p in report.get("rms_points", [])}
    for p in report["points"]:
        lines.append(
            f"{p['n']:>8} {fnum(p['mean_abs_error']):>26} "
            f"{fnum(p['std_error']):>26} {fnum(rms.get(p['n'])):>26}"
        )
    if report["exact"]:
        lines.append("exact scheme: errors at the numerical noise floor, no order fitted")
    else:
        lines.append(
            f"fitted_order={fnum(report['fitted_order'])} "
            f"fit_intercept={fnum(report['fit_intercept'])} "
            f"fit_r2={fnum(report['fit_r2'])}"
        )
    return lines


def _bound_text(payload: dict, loc_key: str, value_name: str) -> list[str]:
    lines = [_header_line(payload, extra=f"quantity={payload['quantity']}")]
    lines.append(f"{loc_key:>8} {value_name:>26} {'std_error':>26} {'bound':>26}")
    for p in payload["points"]:
        lines.append(
            f"{p[loc_key]:>8} {fnum(p['empirical']):>26} "
            f"{fnum(p['std_error']):>26} {fnum(p['bound']):>26}"
        )
    if payload.get("exact_agreement"):
        lines.append("exact agreement: schemes coincide pathwise, no rate fitted")
    elif "fitted_slope" in payload:
        lines.append(
            f"fitted_slope={fnum(payload['fitted_slope'])} fit_r2={fnum(payload['fit_r2'])}"
        )
    for v in payload["violations"]:
        lines.append(
            f"VIOLATION at {loc_key}={v['location']}: empirical={fnum(v['empirical'])} "
            f"bound={fnum(v['bound'])} slack={fnum(v['slack'])}"
        )
    lines.append("bound check: " + ("PASS" if payload["passed"] else "FAIL"))
    return lines


def render_text(command: str, payload: dict) -> str:
    if command == "converge":
        lines: list[str] = []
        for report in payload["reports"]:
            lines.extend(_converge_text(report))
            lines.append("")
        return "\n".join(lines)
    if command == "lemma1":
        return "\n".join(_bound_text(payload, "k", "empirical_second_moment")) + "\n"
    if command == "gap":
        return "\n".join(_bound_text(payload, "n", "mean_square_gap")) + "\n"
    if command == "exactness":
        lines = [
            _header_line(payload, extra=f"n={payload['n']}"),
            f"max_relative_deviation={fnum(payload['max_relative_deviation'])} "
            f"tolerance={fnum(payload['tolerance'])}",
            "exactness: " + ("PASS" if payload["passed"] else "FAIL"),
        ]
        return "\n".join(lines) + "\n"
    if command == "validate":
        lines = [f"model={payload['model']} probes={payload['probes']}"]
        for v in payload["violations"]:
            lines.append(
                f"VIOLATION {v['invariant']} at {v['location']}: "
                f"observed={fnum(v['observed'])} allowed={fnum(v['allowed'])}"
            )
        lines.append("validation: " + ("PASS" if payload["passed"] else "FAIL"))
        return "\n".join(lines) + "\n"
    raise ValueError(f"no text renderer for command {command!r}")


def render_csv(command: str, payload: dict) -> str:
    if command == "converge":
        reports = payload["reports"]
        if len(reports) != 1:
            raise ValueError("csv output supports exactly one scheme per run")
        rows = ["n,mean_abs_error,std_error"]
        for p in reports[0]["points"]:
            rows.append(f"{p['n']},{fnum(p['mean_abs_error'])},{fnum(p['std_error'])}")
        return "\n".join(rows) + "\n"
    if command == "lemma1":
        rows = ["k,empirical,std_error,bound"]
    elif command == "gap":
        rows = ["n,gap,std_error,bound"]
    else:
        raise ValueError(f"csv output is not supported for command {command!r}")
    loc_key = rows[0].split(",")[0]
    for p in payload["points"]:
        bound = "" if p["bound"] is None else fnum(p["bound"])
        rows.append(f"{p[loc_key]},{fnum(p['empirical'])},{fnum(p['std_error'])},{bound}")
    return "\n".join(rows) + "\n"

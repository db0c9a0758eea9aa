"""Command-line interface.

Every run resolves an effective seed (--seed, then the DRAW_SEED
environment variable, then a fresh random one) and prints it, so any
run can be reproduced exactly afterwards.  Exit codes: 0 success,
1 usage error, 2 runtime error.
"""

from __future__ import annotations

import json
import os
import sys
from fractions import Fraction
from pathlib import Path

import click

from .feasibility import InstanceTooLargeError, count_completions
from .model import (
    ConfigError,
    DrawConfig,
    EventQuery,
    PRESET_NAMES,
    PartialDraw,
    get_preset,
    load_config,
)
from .multiball import DEFAULT_M_MAX, m_distribution, m_tail, multiball_full_draw
from .rng import RngStream, fresh_seed
from .samplers import (
    OrderPolicy,
    metropolis_chain,
    multiple_rejection_draw,
    rejection_draw,
    sequential_draw,
    uefa_variant_draw,
)
from .stats import (
    METHOD_NAMES,
    compare_methods,
    estimate_event,
    gof_against_oracle,
    matrix_to_csv,
    pairwise_matrix,
)

_METHOD_CHOICES = [
    "rejection", "fifa", "fifa-sequential", "sequential", "uefa",
    "metropolis", "multiball", "multirej", "multiple-rejections",
]


def _effective_seed(seed) -> int:
    if seed is not None:
        return seed
    env = os.environ.get("DRAW_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise click.UsageError(f"DRAW_SEED must be an integer, got {env!r}")
    return fresh_seed()


def _load_config(preset, config_path) -> DrawConfig:
    if preset and config_path:
        raise click.UsageError("--preset and --config are mutually exclusive")
    if config_path:
        return load_config(Path(config_path).read_text())
    return get_preset(preset or "wc2022")


def _parse_event(text: str) -> EventQuery:
    kind, _, rest = text.partition(":")
    parts = [s.strip() for s in rest.split(",")]
    if kind == "same-group" and len(parts) == 2:
        return EventQuery.same_group(parts[0], parts[1])
    if kind == "in-group" and len(parts) == 2:
        return EventQuery.in_group(parts[0], parts[1])
    raise click.UsageError(
        f"bad event {text!r}; use same-group:TeamA,TeamB or in-group:Team,G"
    )


def _method_options(method: str, n_est, m_max, k, policy) -> dict:
    """Per-method sampler options from the shared CLI flags."""
    opts = {}
    if method in ("multiball",):
        opts["n_est"] = n_est
        opts["m_max"] = m_max
    if method in ("metropolis",):
        opts["k"] = k
    if method in ("fifa", "fifa-sequential", "sequential"):
        if policy:
            opts["policy"] = policy
    return opts


def _emit(payload: dict, as_json: bool, text: str):
    if as_json:
        click.echo(json.dumps(payload, indent=2))
    else:
        click.echo(text)


config_options = [
    click.option(
        "--preset", type=click.Choice(sorted(PRESET_NAMES)), default=None,
        help="Built-in configuration.",
    ),
    click.option(
        "--config", "config_path", type=click.Path(exists=True), default=None,
        help="JSON configuration file.",
    ),
]


def _with(options):
    def deco(f):
        for opt in reversed(options):
            f = opt(f)
        return f

    return deco


@click.group()
def cli():
    """Constrained group-draw simulations and analysis."""


@cli.command()
@_with(config_options)
@click.option("--method", type=click.Choice(_METHOD_CHOICES), default="rejection")
@click.option("--seed", type=int, default=None)
@click.option("--n-est", type=int, default=10_000, help="Completions per slot (multiball).")
@click.option("--m-max", type=int, default=DEFAULT_M_MAX, help="Ball cap per slot (multiball).")
@click.option("--k", type=int, default=20, help="Swap count (metropolis).")
@click.option(
    "--policy", type=click.Choice(["lexicographic", "uniform-random"]),
    default=None, help="Group attempt order (fifa).",
)
@click.option("--transcript", type=click.Path(), default=None,
              help="Write the multiball per-slot transcript to this JSON file.")
@click.option("--json", "as_json", is_flag=True)
def simulate(preset, config_path, method, seed, n_est, m_max, k, policy,
             transcript, as_json):
    """Run one full draw and print the resulting groups."""
    config = _load_config(preset, config_path)
    seed = _effective_seed(seed)
    gen = RngStream(seed).generator()
    extra = {}
    if method == "multiball":
        assignment, records = multiball_full_draw(config, n_est, m_max, gen)
        if transcript:
            Path(transcript).write_text(
                json.dumps([r.to_json() for r in records], indent=2)
            )
            extra["transcript"] = transcript
    else:
        if transcript:
            raise click.UsageError("--transcript requires --method multiball")
        if method in ("fifa", "fifa-sequential", "sequential"):
            pol = (
                OrderPolicy.uniform_random()
                if policy == "uniform-random"
                else OrderPolicy.lexicographic()
            )
            assignment = sequential_draw(config, pol, gen)
        elif method == "uefa":
            assignment = uefa_variant_draw(config, gen)
        elif method == "metropolis":
            start, _ = rejection_draw(config, gen)
            assignment, _ = metropolis_chain(config, start, k, gen)
        elif method in ("multirej", "multiple-rejections"):
            assignment, _ = multiple_rejection_draw(config, gen)
        else:
            assignment, _ = rejection_draw(config, gen)
    groups = assignment.groups_view()
    payload = {"seed": seed, "method": method, "groups": groups, **extra}
    lines = [f"seed: {seed}", f"method: {method}"]
    for label, teams in groups.items():
        lines.append(f"Group {label}: " + ", ".join(t or "-" for t in teams))
    if transcript and not as_json:
        lines.append(f"transcript: {transcript}")
    _emit(payload, as_json, "\n".join(lines))


@cli.command()
@_with(config_options)
@click.option("--methods", default="rejection,fifa",
              help="Comma-separated method names.")
@click.option("--event", "events", multiple=True, required=True,
              help="same-group:TeamA,TeamB or in-group:Team,G (repeatable).")
@click.option("--samples", type=int, default=100_000)
@click.option("--seed", type=int, default=None)
@click.option("--n-est", type=int, default=100)
@click.option("--m-max", type=int, default=DEFAULT_M_MAX)
@click.option("--k", type=int, default=20)
@click.option("--policy", default=None)
@click.option("--threads", type=int, default=lambda: os.cpu_count() or 1)
@click.option("--json", "as_json", is_flag=True)
def compare(preset, config_path, methods, events, samples, seed, n_est, m_max,
            k, policy, threads, as_json):
    """Estimate events under several methods and report differences."""
    config = _load_config(preset, config_path)
    seed = _effective_seed(seed)
    method_list = [m.strip() for m in methods.split(",") if m.strip()]
    if not method_list:
        raise click.UsageError("--methods must name at least one method")
    queries = [_parse_event(e) for e in events]
    opts = {
        m: _method_options(m, n_est, m_max, k, policy) for m in method_list
    }
    for m in opts:
        opts[m]["threads"] = threads
    report = compare_methods(config, method_list, queries, samples, seed, opts)
    payload = {"seed": seed, "samples": samples, **report.to_json()}
    _emit(payload, as_json, f"seed: {seed}\n" + report.to_text())


@cli.command()
@_with(config_options)
@click.option("--method", type=click.Choice(_METHOD_CHOICES), default="rejection")
@click.option("--samples", type=int, default=100_000)
@click.option("--seed", type=int, default=None)
@click.option("--average-exchangeable", is_flag=True,
              help="Pool estimates across interchangeable team pairs.")
@click.option("--threads", type=int, default=lambda: os.cpu_count() or 1)
@click.option("--out", type=click.Path(), default=None,
              help="Write the CSV here instead of stdout.")
def pairs(preset, config_path, method, samples, seed, average_exchangeable,
          threads, out):
    """Co-group probability matrix for all team pairs, as CSV."""
    config = _load_config(preset, config_path)
    seed = _effective_seed(seed)
    names, mat = pairwise_matrix(
        config, method, samples, seed,
        average_exchangeable=average_exchangeable, threads=threads,
    )
    csv = matrix_to_csv(names, mat)
    click.echo(f"seed: {seed}", err=out is None)
    if out:
        Path(out).write_text(csv)
        click.echo(f"wrote {out}")
    else:
        click.echo(csv, nl=False)


@cli.command()
@_with(config_options)
@click.option("--exact", is_flag=True, default=True,
              help="Exact count via dynamic programming (always on).")
@click.option("--json", "as_json", is_flag=True)
def count(preset, config_path, exact, as_json):
    """Exact number of valid draws and the implied acceptance rate."""
    config = _load_config(preset, config_path)
    idx = config.index
    valid = count_completions(config, PartialDraw.initial(config))
    space = 1
    for p, ids in enumerate(idx.pot_team_ids):
        free = len(ids) - sum(1 for t in ids if t in idx.pinned_slot_of_team)
        for j in range(2, free + 1):
            space *= j
    payload = {
        "valid_draws": valid,
        "unconstrained_space": space,
        "valid_fraction": valid / space if space else None,
        "proposals_per_accept": space / valid if valid else None,
    }
    if valid == 0:
        text = f"valid draws: 0 (of {space:,} unconstrained assignments)"
    else:
        text = (
            f"valid draws: {valid:,}\n"
            f"unconstrained assignments: {space:,}\n"
            f"valid fraction: {valid / space:.6e}\n"
            f"proposals per accepted draw: {space / valid:.4f}"
        )
    _emit(payload, as_json, text)


@cli.command()
@_with(config_options)
@click.option("--method", type=click.Choice(_METHOD_CHOICES), required=True)
@click.option("--samples", type=int, default=100_000)
@click.option("--seed", type=int, default=None)
@click.option("--n-est", type=int, default=100)
@click.option("--m-max", type=int, default=DEFAULT_M_MAX)
@click.option("--k", type=int, default=20)
@click.option("--policy", default=None)
@click.option("--threads", type=int, default=lambda: os.cpu_count() or 1)
@click.option("--json", "as_json", is_flag=True)
def gof(preset, config_path, method, samples, seed, n_est, m_max, k, policy,
        threads, as_json):
    """Chi-square goodness of fit against the uniform law (small configs)."""
    config = _load_config(preset, config_path)
    seed = _effective_seed(seed)
    opts = _method_options(method, n_est, m_max, k, policy)
    result = gof_against_oracle(
        config, method, samples, seed, threads=threads, **opts
    )
    payload = {"seed": seed, **result.to_json()}
    text = (
        f"seed: {seed}\n"
        f"method: {result.method}\n"
        f"chi-square: {result.chi_square:.4f} (df={result.dof})\n"
        f"p-value: {result.p_value:.6g}\n"
        f"total variation distance: {result.tv_distance:.6f}"
    )
    _emit(payload, as_json, text)


@cli.command()
@click.option("--weights", required=True,
              help="Comma-separated probabilities, e.g. 1/4,1/4,1/2.")
@click.option("--n", "n", type=int, required=True,
              help="Estimation sample size per slot.")
@click.option("--m-max", type=int, default=None)
@click.option("--tail-at", type=int, default=None,
              help="Report exact P(M<=m) and P(M>m) at this m only.")
@click.option("--seed", type=int, default=None)
@click.option("--json", "as_json", is_flag=True)
def mdist(weights, n, m_max, tail_at, seed, as_json):
    """Distribution of the per-slot ball total M for given true weights."""
    probs = [Fraction(w.strip()) for w in weights.split(",")]
    seed = _effective_seed(seed)
    if tail_at is not None:
        le, gt = m_tail(probs, n, tail_at)
        payload = {
            "seed": seed, "n": n, "m": tail_at,
            "p_at_most": float(le), "p_greater": float(gt),
            "p_at_most_exact": f"{le.numerator}/{le.denominator}",
        }
        text = (
            f"seed: {seed}\n"
            f"P(M <= {tail_at}) = {float(le):.10g}\n"
            f"P(M > {tail_at}) = {float(gt):.10g}"
        )
        _emit(payload, as_json, text)
        return
    dist = m_distribution(probs, n, m_max, rng=RngStream(seed))
    pmf = {m: float(p) for m, p in dist.pmf.items()}
    payload = {"seed": seed, "n": n, "exact": dist.exact, "pmf": pmf}
    lines = [f"seed: {seed}", f"exact: {dist.exact}"]
    for m, p in pmf.items():
        lines.append(f"M={m:>4}  {p:.6g}")
    _emit(payload, as_json, "\n".join(lines))


@cli.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(host, port):
    """Start the interactive draw HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except (click.UsageError, click.exceptions.Abort) as exc:
        if isinstance(exc, click.UsageError):
            exc.show()
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except (ConfigError, InstanceTooLargeError, ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    return 0


if __name__ == "__main__":
    main()

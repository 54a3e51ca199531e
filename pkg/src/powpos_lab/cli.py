from __future__ import annotations

import dataclasses
import json
from collections.abc import Callable
from pathlib import Path
from typing import Any

import typer
from rich.console import Console
from rich.table import Table

from powpos_lab.chain.params import ParamsError, Preset, preset_params
from powpos_lab.consensus import write_chain
from powpos_lab.econ import (
    EconParams,
    Figure,
    cost_table,
    figure_csv,
    figure_data,
    table_csv,
    table_json,
)
from powpos_lab.logs import LogLevel, logger
from powpos_lab.sim import (
    ConfigError,
    ConsensusMode,
    Outcome,
    ScenarioConfig,
    ScenarioKind,
    ScenarioReport,
    SweepRunner,
    aggregate_csv,
    blocks_csv,
    load_config,
    parse_kind,
    run,
    write_report,
    write_trace,
)

app = typer.Typer(
    help="powpos-lab: hybrid PoW/PoS consensus simulator and attack-cost calculator",
    no_args_is_help=True,
)

EXIT_USAGE = 2
EXIT_STALLED = 3

_ECON_FLAGS = {
    "price": "--price",
    "total_supply": "--total-supply",
    "public_supply": "--public-supply",
    "gpu_price": "--gpu-price",
    "gpu_count": "--gpu-count",
    "n": "--n",
}

stdout = Console(highlight=False, soft_wrap=True)


def _setup_logging(verbose: int, out: Path | None = None) -> None:
    level = LogLevel.STATUS
    if verbose == 1:
        level = LogLevel.LOG
    elif verbose >= 2:
        level = LogLevel.DEBUG
    logger.configure(log_dir=out / "logs" if out is not None else None, level=level)


def _usage_error(exc: ConfigError | ParamsError) -> typer.Exit:
    if isinstance(exc, ParamsError) and exc.field in _ECON_FLAGS:
        logger.error(f"{_ECON_FLAGS[exc.field]}: {exc}")
    else:
        logger.error(str(exc))
    return typer.Exit(EXIT_USAGE)


def _print_effective(config: dict[str, Any]) -> None:
    """Echo the resolved configuration to stderr so a run can be reproduced from it."""
    typer.echo("# effective config", err=True)
    typer.echo(json.dumps(config, indent=2), err=True)


def _emit(text: str, dest: Path | None) -> None:
    if dest is None:
        typer.echo(text, nl=False)
        return
    dest.parent.mkdir(parents=True, exist_ok=True)
    dest.write_text(text, encoding="utf-8")
    logger.log(f"Wrote {dest}")


def _econ(
    price: float,
    total_supply: float,
    public_supply: float,
    gpu_price: float,
    gpu_count: int,
) -> EconParams:
    return EconParams(
        price=price,
        total_supply=total_supply,
        public_supply=public_supply,
        gpu_price=gpu_price,
        gpu_count=gpu_count,
    )


PriceOpt = typer.Option(0.052201, "--price", help="Coin price in USD")
TotalSupplyOpt = typer.Option(1_563_172_500.0, "--total-supply", help="Total coin supply")
PublicSupplyOpt = typer.Option(735_000_000.0, "--public-supply", help="Publicly available supply")
GpuPriceOpt = typer.Option(6369.0, "--gpu-price", help="Unit price of one GPU in USD")
GpuCountOpt = typer.Option(100, "--gpu-count", help="GPUs in the honest mining fleet")
MOpt = typer.Option(5, "--m", help="Voters selected per block")
NOpt = typer.Option(3, "--n", help="Approve-votes required per block")
VerboseOpt = typer.Option(0, "--verbose", "-v", count=True, help="-v for progress, -vv for debug")


@app.command()
def params(
    preset: str | None = typer.Option(None, "--preset", help="Show a single preset"),
    as_json: bool = typer.Option(False, "--json", help="Print JSON instead of a table"),
) -> None:
    """Print the protocol parameter presets."""
    _setup_logging(0)
    try:
        chosen = [preset_params(preset)] if preset else [preset_params(p) for p in Preset]
    except ParamsError as exc:
        raise _usage_error(exc) from None
    labels = [preset.upper()] if preset else [p.name for p in Preset]
    columns = {label: p.to_dict() for label, p in zip(labels, chosen)}
    if as_json:
        typer.echo(json.dumps(columns, indent=2))
        return
    table = Table(title="Chain parameter presets")
    table.add_column("parameter")
    for label in labels:
        table.add_column(label)
    for key in columns[labels[0]]:
        table.add_row(key, *(str(columns[label][key]) for label in labels))
    stdout.print(table)


@app.command("econ-table")
def econ_table(
    price: float = PriceOpt,
    total_supply: float = TotalSupplyOpt,
    public_supply: float = PublicSupplyOpt,
    gpu_price: float = GpuPriceOpt,
    gpu_count: int = GpuCountOpt,
    m: int = MOpt,
    n: int = NOpt,
    out: str = typer.Option("csv", "--out", help="Output format: csv or json"),
    file: Path | None = typer.Option(None, "--file", help="Write to this file instead of stdout"),
) -> None:
    """Attack cost per attacker hash share from 95% down to 5%."""
    _setup_logging(0)
    if out not in ("csv", "json"):
        logger.error(f"--out: expected csv or json, got {out!r}")
        raise typer.Exit(EXIT_USAGE)
    try:
        econ = _econ(price, total_supply, public_supply, gpu_price, gpu_count)
        rows = cost_table(econ, m, n)
    except ParamsError as exc:
        raise _usage_error(exc) from None
    _print_effective(
        {"command": "econ-table", "econ": econ_dict(econ), "m": m, "n": n, "out": out}
    )
    _emit(table_csv(rows) if out == "csv" else table_json(rows), file)


@app.command("econ-curve")
def econ_curve(
    figure: str = typer.Option("fig2", "--figure", help="fig2 (stake vs hash) or fig3 (cost)"),
    resolution: int = typer.Option(99, "--resolution", min=2, help="Interior grid points"),
    price: float = PriceOpt,
    total_supply: float = TotalSupplyOpt,
    public_supply: float = PublicSupplyOpt,
    gpu_price: float = GpuPriceOpt,
    gpu_count: int = GpuCountOpt,
    m: int = MOpt,
    n: int = NOpt,
    file: Path | None = typer.Option(None, "--file", help="Write to this file instead of stdout"),
) -> None:
    """Curve samples for the stake/hash trade-off and the attack-cost comparison."""
    _setup_logging(0)
    try:
        kind = Figure[figure.upper()]
    except KeyError:
        logger.error(f"--figure: expected fig2 or fig3, got {figure!r}")
        raise typer.Exit(EXIT_USAGE) from None
    if m < 1 or not 1 <= n <= m:
        logger.error(f"--n: require 1 <= n <= m, got m={m} n={n}")
        raise typer.Exit(EXIT_USAGE)
    try:
        econ = _econ(price, total_supply, public_supply, gpu_price, gpu_count)
    except ParamsError as exc:
        raise _usage_error(exc) from None
    _print_effective(
        {
            "command": "econ-curve",
            "figure": kind.name.lower(),
            "resolution": resolution,
            "econ": econ_dict(econ),
            "m": m,
            "n": n,
        }
    )
    _emit(figure_csv(kind, figure_data(kind, econ, resolution, m, n)), file)


def econ_dict(econ: EconParams) -> dict[str, Any]:
    return {
        "price": econ.price,
        "total_supply": econ.total_supply,
        "public_supply": econ.public_supply,
        "gpu_price": econ.gpu_price,
        "gpu_count": econ.gpu_count,
    }


def _resolve(build: Callable[[], ScenarioConfig]) -> ScenarioConfig:
    try:
        return build()
    except (ConfigError, ParamsError) as exc:
        raise _usage_error(exc) from None


def _write_effective(config: ScenarioConfig, out: Path) -> None:
    data = config.to_dict()
    _print_effective(data)
    out.mkdir(parents=True, exist_ok=True)
    (out / "effective-config.json").write_text(config.to_json() + "\n", encoding="utf-8")


@app.command()
def attack(
    scenario: str = typer.Option(
        ..., "--scenario", help="double-spend, strip-mine, nas or stakepool"
    ),
    config: Path | None = typer.Option(None, "--config", help="Scenario TOML or JSON file"),
    seeds: int = typer.Option(1, "--seeds", min=1, help="Number of consecutive seeds"),
    out: Path = typer.Option(Path("out"), "--out", help="Output directory"),
    workers: int = typer.Option(1, "--workers", min=1, help="Parallel worker processes"),
    fail_fast: bool = typer.Option(
        True, "--fail-fast/--collect", help="Abort on the first failing seed"
    ),
    stake_share: float | None = typer.Option(None, "--stake-share", help="Attacker ticket share"),
    hash_multiplier: float | None = typer.Option(
        None, "--hash-multiplier", help="Attacker hashpower as a multiple of honest"
    ),
    quit_height: int | None = typer.Option(None, "--quit-height", help="Strip-mine quit height"),
    pool_share: float | None = typer.Option(None, "--pool-share", help="Stakepool ticket share"),
    offline_height: int | None = typer.Option(
        None, "--offline-height", help="Height at which the stakepool goes offline"
    ),
    greedy_fraction: float | None = typer.Option(
        None, "--greedy-fraction", help="Share of stakers voting on every fork"
    ),
    mode: str | None = typer.Option(None, "--mode", help="hybrid or pure-pos"),
    verbose: int = VerboseOpt,
) -> None:
    """Run an attack scenario over a range of seeds."""
    _setup_logging(verbose, out)

    def build() -> ScenarioConfig:
        kind = parse_kind(scenario)
        if kind is ScenarioKind.HONEST:
            raise ConfigError("not an attack scenario; use simulate", "--scenario")
        base = load_config(config) if config is not None else ScenarioConfig()
        knobs = {
            "stake_share": stake_share,
            "hash_multiplier": hash_multiplier,
            "quit_height": quit_height,
            "pool_share": pool_share,
            "offline_height": offline_height,
            "greedy_fraction": greedy_fraction,
        }
        changes = {k: v for k, v in knobs.items() if v is not None}
        resolved = base.replace(kind=kind, attack=dataclasses.replace(base.attack, **changes))
        if mode is not None:
            resolved = resolved.replace(mode=_mode(mode))
        return resolved

    resolved = _resolve(build)
    _write_effective(resolved, out)
    configs = [resolved.with_seed(resolved.seed + i) for i in range(seeds)]
    logger.status(
        f"Running {seeds} seed(s) of {resolved.kind.name.lower()} with {workers} worker(s)"
    )

    def save(report: ScenarioReport) -> None:
        write_report(report, out / f"report-seed-{report.seed}.json")

    reports = SweepRunner(configs, workers=workers, fail_fast=fail_fast, on_report=save).run_sync()
    (out / "aggregate.csv").write_text(aggregate_csv(reports), encoding="utf-8")
    succeeded = sum(r.outcome is Outcome.SUCCEEDED for r in reports)
    logger.status(f"{succeeded}/{len(reports)} seed(s) succeeded; results in {out}")
    if any(r.outcome is Outcome.STALLED for r in reports):
        raise typer.Exit(EXIT_STALLED)


def _mode(value: str) -> ConsensusMode:
    try:
        return ConsensusMode[value.upper().replace("-", "_")]
    except KeyError:
        raise ConfigError(f"expected hybrid or pure-pos, got {value!r}", "--mode") from None


@app.command()
def simulate(
    preset: str | None = typer.Option(None, "--preset", help="PROJECT_PAI or DECRED_LIKE"),
    blocks: int = typer.Option(200, "--blocks", min=1, help="Best-chain height to reach"),
    config: Path | None = typer.Option(None, "--config", help="Scenario TOML or JSON file"),
    seed: int | None = typer.Option(None, "--seed", help="Random seed"),
    mode: str | None = typer.Option(None, "--mode", help="hybrid or pure-pos"),
    out: Path = typer.Option(Path("out"), "--out", help="Output directory"),
    verbose: int = VerboseOpt,
) -> None:
    """Run an honest network and export its chain and per-block metrics."""
    _setup_logging(verbose, out)

    def build() -> ScenarioConfig:
        if config is not None:
            base = load_config(config)
            if preset is not None:
                base = base.replace(preset=preset.upper(), params=preset_params(preset))
        else:
            base = ScenarioConfig.for_preset(preset or "PROJECT_PAI")
        resolved = base.replace(kind=ScenarioKind.HONEST, run_blocks=blocks)
        if seed is not None:
            resolved = resolved.with_seed(seed)
        if mode is not None:
            resolved = resolved.replace(mode=_mode(mode))
        return resolved

    resolved = _resolve(build)
    _write_effective(resolved, out)
    result = run(resolved)
    report = result.report
    exported = write_chain(result.index, out / "chain.ndjson")
    (out / "blocks.csv").write_text(blocks_csv(report.blocks), encoding="utf-8")
    write_report(report, out / "report.json")
    write_trace(result.trace, out / "trace.ndjson")
    logger.status(
        f"Height {report.best_height}, mean interval {report.mean_interval:.1f}s, "
        f"{exported} blocks exported to {out}"
    )
    if report.outcome is Outcome.STALLED:
        raise typer.Exit(EXIT_STALLED)


@app.command("validate-config")
def validate_config(
    config: Path = typer.Argument(..., help="Scenario TOML or JSON file"),
) -> None:
    """Check a scenario file against the schema and print the resolved config."""
    _setup_logging(0)
    resolved = _resolve(lambda: load_config(config))
    typer.echo(resolved.to_json())
    logger.status(f"{config} is valid ({resolved.kind.name.lower()})")


if __name__ == "__main__":
    app()

import functools
import logging
import sys
import traceback
from pathlib import Path
from typing import List, Optional

import click
import typer
from pydantic import ValidationError
from returns.pipeline import is_successful

from utils.config import build_config, load_cluster_map, load_config_file
from utils.experiment import run_experiment
from utils.results import append_trace, emit_results, save_drop

"""Logging configuration"""
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

EXIT_CONFIG_ERROR = 1
EXIT_RUNTIME_ERROR = 2

app = typer.Typer(add_completion=False, help="Dynamic BS clustering simulator for CoMP joint transmission")


class ConfigError(Exception):
    pass


def handle_exceptions(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except typer.Exit:
            raise
        except ConfigError as e:
            logger.error(f"Configuration error: {e}")
            raise typer.Exit(code=EXIT_CONFIG_ERROR)
        except Exception as e:
            logger.error(f"Exception occurred: {traceback.format_exc()}")
            raise typer.Exit(code=EXIT_RUNTIME_ERROR)
    return wrapper


def unwrap(result, error=ConfigError):
    if not is_successful(result):
        raise error(result.failure())
    return result.unwrap()


@app.command()
@handle_exceptions
def simulate(
    scheme: Optional[str] = typer.Option(None, help="scp, isc, sc or dc"),
    drops: Optional[int] = typer.Option(None, help="Number of UE drops"),
    blocks: Optional[int] = typer.Option(None, help="Block fading realizations per drop (even)"),
    ue_antennas: Optional[int] = typer.Option(None, "--ue-antennas", help="Antennas per UE"),
    bs_antennas: Optional[int] = typer.Option(None, "--bs-antennas", help="Antennas per BS"),
    jmax: Optional[int] = typer.Option(None, "--jmax", help="Largest candidate cluster"),
    lmax: Optional[str] = typer.Option(None, "--lmax", help="Streams per UE, or 'unbounded'"),
    csi: Optional[str] = typer.Option(None, help="perfect or estimated"),
    channel: Optional[str] = typer.Option(None, help="epa, etu or custom"),
    nt: Optional[int] = typer.Option(None, "--nt", help="Pilot resource elements per block"),
    nt_fraction: Optional[float] = typer.Option(None, "--nt-fraction", help="Pilot share of the block"),
    beta: Optional[float] = typer.Option(None, help="UE antenna correlation"),
    gamma: Optional[float] = typer.Option(None, help="PF forgetting factor"),
    seed: Optional[int] = typer.Option(None, help="Master seed"),
    scheduler: Optional[str] = typer.Option(None, help="pf or max_rate"),
    cluster_map: Optional[Path] = typer.Option(None, "--cluster-map", help="Static cluster map for scheme sc"),
    workers: Optional[int] = typer.Option(None, help="Worker processes"),
    config: Optional[Path] = typer.Option(None, "--config", help="key=value config file"),
    out: Path = typer.Option(Path("results.csv"), "--out", help="Results file"),
    trace: Optional[Path] = typer.Option(None, "--trace", help="YAML plan trace"),
    dump_drops: Optional[Path] = typer.Option(None, "--dump-drops", help="Directory for YAML drop dumps"),
    verbose: bool = typer.Option(False, "--verbose", help="Debug logging"),
):
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    file_values = unwrap(load_config_file(config)) if config is not None else {}
    overrides = {
        "scheme": scheme, "drops": drops, "blocks": blocks, "ue_antennas": ue_antennas,
        "bs_antennas": bs_antennas, "j_max": jmax, "l_max": lmax, "csi": csi, "channel": channel,
        "nt": nt, "nt_fraction": nt_fraction, "beta": beta, "gamma": gamma, "seed": seed,
        "scheduler": scheduler, "cluster_map": cluster_map, "workers": workers,
    }
    try:
        sim_config = build_config(file_values, overrides)
    except ValidationError as e:
        raise ConfigError(str(e)) from e

    static_map = None
    if sim_config.cluster_map is not None:
        static_map = unwrap(load_cluster_map(sim_config.cluster_map, sim_config.scenario.num_bs))

    row, outcomes = run_experiment(sim_config, static_map, trace=trace is not None,
                                   keep_drops=dump_drops is not None)

    unwrap(emit_results([row], out), RuntimeError)
    if trace is not None:
        trace.unlink(missing_ok=True)
        for outcome in outcomes:
            unwrap(append_trace(trace, outcome.traces), RuntimeError)
    if dump_drops is not None:
        dump_drops.mkdir(parents=True, exist_ok=True)
        for outcome in outcomes:
            unwrap(save_drop(outcome.drop, dump_drops / f"drop_{outcome.drop_index:04d}.yml"), RuntimeError)


def main(args: Optional[List[str]] = None) -> int:
    """Run the CLI; malformed flags are configuration errors too."""
    try:
        code = app(args=args, standalone_mode=False)
    except click.UsageError as e:
        logger.error(f"Configuration error: {e.format_message()}")
        return EXIT_CONFIG_ERROR
    return code if isinstance(code, int) else 0


if __name__ == '__main__':
    sys.exit(main())

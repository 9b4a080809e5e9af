"""Command line entry: run | render | analyze | calibrate | record.

The config file is the source of truth; flags override single fields.
Exit codes: 0 clean, 1 config/usage error, 2 runtime fault.
"""

from __future__ import annotations

import sys
import time

import click

from .config import ConfigError, load_config, override
from .control import ControlError
from .engine import LiveEngine, make_sink, render_offline
from .features import (CalibrationError, CalibrationProfile, analyze_frames,
                       calibrate, default_profile, write_feature_csv)
from .ingest import OscReceiver, RecordWriter, ReplayError, replay_frames
from .mapping import MappingError


def _load_profile(path, config):
    p = path or config.calibration_path
    return CalibrationProfile.load(p) if p else default_profile()


@click.group()
def cli():
    """Biosignal sonification engine."""


@cli.command()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="TOML config file.")
@click.option("--seed", type=int, default=None, help="Engine RNG seed.")
@click.option("--scene", default=None, help="Initial scene name.")
@click.option("--osc-port", type=int, default=None, help="OSC listen port.")
@click.option("--ws-port", type=int, default=None,
              help="Control server port.")
@click.option("--calibration", type=click.Path(), default=None,
              help="Calibration profile TOML.")
@click.option("--sink", type=click.Choice(["auto", "null", "device"]),
              default="auto", show_default=True,
              help="Audio output: real device, paced null sink, or auto.")
@click.option("--record", "record_path", type=click.Path(), default=None,
              help="Record incoming EMG frames to this replay CSV.")
@click.option("--features-out", type=click.Path(), default=None,
              help="Write the live feature stream to CSV on exit.")
def run(config_path, seed, scene, osc_port, ws_port, calibration, sink,
        record_path, features_out):
    """Run live: OSC ingestion, audio, and the control server."""
    import uvicorn

    from .service import create_app

    config = override(load_config(config_path), seed=seed, scene=scene,
                      osc_port=osc_port, ws_port=ws_port)
    profile = _load_profile(calibration, config)
    live = LiveEngine(config, profile,
                      sink=make_sink(config, "null" if sink == "null"
                                     else sink))
    if record_path:
        live.recorder = RecordWriter(record_path)
    if features_out:
        live.feature_log = []
    app = create_app(live)
    click.echo(f"engine: {config.sample_rate} Hz / {config.block_size} "
               f"frames, scene '{config.scene}'")
    click.echo(f"osc: udp {config.osc_host}:{config.osc_port}  "
               f"control: ws://{config.ws_host}:{config.ws_port}/ws")
    uvicorn.run(app, host=config.ws_host, port=config.ws_port,
                log_level="warning")
    if features_out and live.feature_log is not None:
        write_feature_csv(live.feature_log, features_out)
        click.echo(f"features: {features_out} "
                   f"({len(live.feature_log)} rows)")
    overruns = getattr(live.sink, "overruns", 0)
    if overruns:
        click.echo(f"overruns: {overruns}", err=True)
    return 0


@cli.command()
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--replay", type=click.Path(), required=True,
              help="EMG replay CSV input.")
@click.option("--out", type=click.Path(), required=True,
              help="Output WAV path.")
@click.option("--seed", type=int, default=None,
              help="Seed (required here or in config).")
@click.option("--scene", default=None, help="Scene to render.")
@click.option("--breath", type=click.Path(), default=None,
              help="Mono WAV looped onto the breath bus.")
@click.option("--duration", type=float, default=None,
              help="Render length in seconds (default: replay length).")
@click.option("--calibration", type=click.Path(), default=None)
@click.option("--server", default=None,
              help="Delegate to a running control service (URL).")
def render(config_path, replay, out, seed, scene, breath, duration,
           calibration, server):
    """Render a replay offline to a 32-bit float stereo WAV."""
    if server:
        import httpx

        body = {"replay": replay, "out": out, "seed": seed or 0}
        if scene:
            body["scene"] = scene
        if breath:
            body["breath"] = breath
        if duration:
            body["duration_s"] = duration
        r = httpx.post(f"{server.rstrip('/')}/render", json=body,
                       timeout=600.0)
        if r.status_code != 200:
            raise click.ClickException(f"server: {r.text}")
        rep = r.json()
        click.echo(f"out: {rep['out']}  peak: {rep['peak_dbfs']:.2f} dBFS  "
                   f"rtf: {rep['real_time_factor']:.3f}")
        return 2 if rep["fault_count"] else 0
    config = override(load_config(config_path), seed=seed, scene=scene)
    if config.seed is None:
        raise ConfigError("render requires --seed (or seed in config)")
    profile = _load_profile(calibration, config)
    report = render_offline(config, replay, out, breath_path=breath,
                            profile=profile, duration_s=duration)
    click.echo(report.format_text(), nl=False)
    return 2 if report.fault_count else 0


@cli.command()
@click.option("--replay", type=click.Path(), required=True)
@click.option("--calibration", type=click.Path(), default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--out", type=click.Path(), default=None,
              help="Feature CSV path (default: stdout).")
@click.option("--server", default=None,
              help="Delegate to a running control service (URL).")
def analyze(replay, calibration, config_path, out, server):
    """Extract the feature stream from a replay file."""
    if server:
        import httpx

        body = {"replay": replay, "out": out}
        if calibration:
            body["calibration"] = calibration
        r = httpx.post(f"{server.rstrip('/')}/analyze", json=body,
                       timeout=120.0)
        if r.status_code != 200:
            raise click.ClickException(f"server: {r.text}")
        click.echo(f"rows: {r.json()['rows']}")
        return 0
    config = load_config(config_path)
    profile = _load_profile(calibration, config)
    features = analyze_frames(replay_frames(replay), profile)
    if out:
        write_feature_csv(features, out)
        click.echo(f"rows: {len(features)}  out: {out}")
    else:
        from .features import ANALYZE_HEADER
        click.echo(ANALYZE_HEADER)
        for fv in features:
            click.echo(f"{fv.timestamp_us},{fv.device_id.value},"
                       + ",".join(f"{v:.10g}" for v in fv.mav_per_channel)
                       + f",{fv.mav_aggregate:.10g},{fv.level.value}")
    return 0


@cli.command("calibrate")
@click.option("--rest", type=click.Path(), required=True,
              help="Replay CSV recorded at rest.")
@click.option("--mvc", type=click.Path(), required=True,
              help="Replay CSV recorded at maximum contraction.")
@click.option("--out", type=click.Path(), required=True,
              help="Profile TOML output path.")
@click.option("--server", default=None,
              help="Delegate to a running control service (URL).")
def calibrate_cmd(rest, mvc, out, server):
    """Build a calibration profile from rest and MVC recordings."""
    if server:
        import httpx

        r = httpx.post(f"{server.rstrip('/')}/calibrate",
                       json={"rest": rest, "mvc": mvc, "out": out},
                       timeout=120.0)
        if r.status_code != 200:
            raise click.ClickException(f"server: {r.text}")
        click.echo(f"profile: {out}  devices: "
                   + ",".join(r.json()["devices"]))
        return 0
    profile = calibrate(replay_frames(rest), replay_frames(mvc))
    profile.save(out)
    click.echo(f"profile: {out}  devices: "
               + ",".join(sorted(d.value for d in profile.devices)))
    return 0


@cli.command()
@click.option("--out", type=click.Path(), required=True,
              help="Replay CSV output path.")
@click.option("--port", type=int, default=9129, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--duration", type=float, default=None,
              help="Stop after this many seconds (default: until Ctrl-C).")
def record(out, port, host, duration):
    """Record incoming OSC EMG frames to a replay CSV."""
    receiver = OscReceiver(port, host).start()
    writer = RecordWriter(out)
    click.echo(f"recording from udp {host}:{receiver.port} -> {out}")
    t0 = time.monotonic()
    frames = 0
    try:
        while duration is None or time.monotonic() - t0 < duration:
            while receiver.frames:
                writer.write(receiver.frames.popleft())
                frames += 1
            time.sleep(0.01)
    except KeyboardInterrupt:
        pass
    finally:
        receiver.stop()
        while receiver.frames:
            writer.write(receiver.frames.popleft())
            frames += 1
        writer.close()
    stats = receiver.parser.stats
    click.echo(f"frames: {frames}  dropped: {stats.dropped}  "
               f"malformed: {stats.malformed}")
    return 0


def main(argv=None) -> int:
    try:
        result = cli.main(args=argv, standalone_mode=False)
        return int(result) if isinstance(result, int) else 0
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as e:
        e.show()
        return 1
    except (ConfigError, ReplayError, CalibrationError, MappingError,
            ControlError, FileNotFoundError) as e:
        click.echo(f"error: {e}", err=True)
        return 1
    except ValueError as e:
        click.echo(f"error: {e}", err=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line harness.

Subcommands:

* ``play``             run random or scripted episodes, write an episode CSV
* ``train-q``          tabular Q-learning with per-episode logging
* ``dump``             write a frame (P6), move audio (WAVE) or MFCCs (CSV)
* ``protocol-record``  capture per-channel byte transcripts of a scripted session
* ``protocol-verify``  replay a session script and byte-compare transcripts
* ``serve``            serve a console session over FIFOs for external clients
* ``env-serve``        serve one environment over line-delimited JSON on stdio

All commands honor ``--seed``; wall-clock time is only ever reported, never
used for logic.
"""

from __future__ import annotations

import argparse
import base64
import hashlib
import json
import queue
import sys
import time
import wave as wave_mod
from pathlib import Path

import numpy as np

from .buttons import Button
from .client import ConsoleClient
from .config import parse_config_file
from .console import SAMPLE_RATE, VirtualConsole
from .dsp import mfcc
from .envs import VARIANTS, CompositeState, KulaEnv, make_env
from .errors import ScriptError, VcleError
from .kula import KulaCartridge, load_levels_dir
from .moves import Action, AudioPolicy, Game
from .qlearn import QAgentConfig, train
from .server import ConsoleServer
from .transport import CHANNELS, fifo_create, fifo_open_server
from .visual import state_bytes

_ACTION_NAMES = {
    "forward": Action.FORWARD,
    "lookright": Action.LOOK_RIGHT,
    "lookleft": Action.LOOK_LEFT,
    "jumpforward": Action.JUMP_FORWARD,
}


def parse_action(token: str) -> Action:
    token = token.strip()
    if token.isdigit():
        try:
            return Action(int(token))
        except ValueError:
            raise ScriptError(f"bad action index {token}") from None
    try:
        return _ACTION_NAMES[token.lower().replace("_", "").replace("-", "")]
    except KeyError:
        raise ScriptError(f"unknown action {token!r}") from None


def parse_action_script(text: str) -> list[Action]:
    tokens = [t for t in text.replace(",", "\n").split() if t]
    return [parse_action(t) for t in tokens]


def moving_average(values: list[float], window: int) -> list[float]:
    """Windowed mean; partial windows average over the rows available."""
    out = []
    for i in range(len(values)):
        lo = max(0, i + 1 - window)
        chunk = values[lo:i + 1]
        out.append(sum(chunk) / len(chunk))
    return out


def state_sha256(state) -> str:
    return hashlib.sha256(state_bytes(state)).hexdigest()


# ---------------------------------------------------------------------------
# play


def _build_env(args, **extra) -> KulaEnv:
    kwargs = dict(extra)
    if args.level is not None:
        kwargs["level"] = args.level
    if getattr(args, "eval", False):
        kwargs["eval_mode"] = True
    if args.levels is not None:
        kwargs["level_specs"] = load_levels_dir(args.levels)
    kwargs["fast"] = args.fast
    if getattr(args, "record_audio", False) and "audio" not in kwargs:
        kwargs["audio"] = AudioPolicy(record=True)
    return make_env(args.variant, config_path=args.config, **kwargs)


class EpisodeWriter:
    def __init__(self, out_dir: Path, window: int):
        self.rows = []
        self.window = window
        self.path = out_dir / "episodes.csv"

    def add(self, episode, reward, moves, outcome, wall_s, level, start) -> None:
        self.rows.append((episode, reward, moves, outcome, wall_s, level, start))

    def write(self) -> Path:
        avgs = moving_average([r[1] for r in self.rows], self.window)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "w", encoding="utf-8") as f:
            f.write("episode,reward,moves,outcome,wall_s,level,start,moving_avg\n")
            for row, avg in zip(self.rows, avgs):
                episode, reward, moves, outcome, wall_s, level, start = row
                f.write(
                    f"{episode},{reward!r},{moves},{outcome},{wall_s:.3f},"
                    f"{level},{start},{avg!r}\n"
                )
        return self.path


class TraceWriter:
    """JSON-lines trajectory log used for cross-implementation parity checks."""

    def __init__(self, path: Path, variant: str, seed):
        self._f = open(path, "w", encoding="utf-8")
        self._write({"type": "header", "variant": variant, "seed": seed})

    def _write(self, obj) -> None:
        self._f.write(json.dumps(obj) + "\n")

    def reset(self, episode, seed, state) -> None:
        self._write(
            {
                "type": "reset",
                "episode": episode,
                "seed": seed,
                "state_sha256": state_sha256(state),
            }
        )

    def step(self, episode, action, result) -> None:
        info = {
            k: v
            for k, v in result.info.items()
            if k != "duration_real"
        }
        self._write(
            {
                "type": "step",
                "episode": episode,
                "action": int(action),
                "reward": result.reward,
                "done": result.done,
                "state_sha256": state_sha256(result.state),
                "info": info,
            }
        )

    def close(self) -> None:
        self._f.close()


def cmd_play(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    env = _build_env(args)
    script = None
    if args.policy != "random":
        script = parse_action_script(Path(args.policy).read_text(encoding="utf-8"))
    rng = np.random.default_rng(args.seed)
    writer = EpisodeWriter(out_dir, window=5 if args.eval else 10)
    trace = TraceWriter(Path(args.trace), args.variant, args.seed) if args.trace else None

    try:
        for episode in range(args.episodes):
            seed = args.seed if episode == 0 else None
            state = env.reset(seed=seed)
            if trace:
                trace.reset(episode, seed, state)
            total = 0.0
            moves = 0
            outcome = "playing"
            t0 = time.monotonic()
            while not env.done:
                if script is not None:
                    if moves >= len(script):
                        break
                    action = script[moves]
                else:
                    action = int(rng.integers(4))
                result = env.step(action)
                if trace:
                    trace.step(episode, action, result)
                total += result.reward
                moves += 1
                if result.done:
                    outcome = result.info["cause"]
                if args.max_moves and moves >= args.max_moves:
                    break
            wall = time.monotonic() - t0
            level_id = env.game.read_state().level_id
            writer.add(episode, total, moves, outcome, wall, level_id, env.last_start)
    finally:
        env.close()
        if trace:
            trace.close()

    path = writer.write()
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# train-q


def cmd_train_q(args) -> int:
    if args.variant == "audio-v1":
        print("train-q: audio-v1 is unsupported (tabular state excludes audio)",
              file=sys.stderr)
        return 1
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = QAgentConfig()
    if args.config:
        values = parse_config_file(args.config)
        for key in ("alpha", "gamma", "epsilon_start", "epsilon_end"):
            if f"q_{key}" in values:
                setattr(cfg, key, float(values[f"q_{key}"]))
        if args.gamma is not None:
            cfg.gamma = args.gamma
    elif args.gamma is not None:
        cfg.gamma = args.gamma

    env = _build_env(args, capture_visual=False)
    writer = EpisodeWriter(out_dir, window=10)

    t0 = time.monotonic()

    def on_episode(episode, total, moves, cause):
        writer.add(episode, total, moves, cause, time.monotonic() - t0,
                   env.game.read_state().level_id, env.last_start)

    try:
        table = train(env, args.episodes, cfg, seed=args.seed, on_episode=on_episode)
    finally:
        env.close()

    csv_path = writer.write()
    qtable_path = out_dir / "qtable.json"
    qtable_path.write_bytes(table.to_bytes())
    print(f"wrote {csv_path} and {qtable_path}")
    return 0


# ---------------------------------------------------------------------------
# dump


def cmd_dump(args) -> int:
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    actions = parse_action_script(args.script) if args.script else []

    record = args.what in ("audio", "mfcc")
    audio = AudioPolicy(record=record)
    game = Game(audio=audio, fast=args.fast)
    level = args.level if args.level is not None else 1
    try:
        game.play(f"level{level}:{args.start}")
        last_sound = None
        for action in actions:
            outcome = game.move(action)
            last_sound = outcome.sound

        if args.what == "frame":
            screen = game.client.get_screen()
            with open(out_path, "wb") as f:
                f.write(b"P6 320 240 255\n")
                f.write(screen.tobytes())
        elif args.what == "audio":
            samples = last_sound if last_sound is not None else np.zeros(0, np.int16)
            with wave_mod.open(str(out_path), "wb") as wf:
                wf.setnchannels(1)
                wf.setsampwidth(2)
                wf.setframerate(SAMPLE_RATE)
                wf.writeframes(samples.astype("<i2").tobytes())
        else:
            wave = last_sound if last_sound is not None else np.zeros(0, np.int16)
            matrix = mfcc(wave)
            with open(out_path, "w", encoding="utf-8") as f:
                for row in matrix:
                    f.write(",".join(repr(v) for v in row) + "\n")
    finally:
        game.close()
    print(f"wrote {out_path}")
    return 0


# ---------------------------------------------------------------------------
# protocol record / verify


class SessionDriver:
    """Replays a session script against a live console, deterministically.

    Script commands (one per line, ``#`` comments)::

        load level1:0            watch 0x10009 1          touch Up [ms]
        chord Cross Up           hold Up / release Up     delay 100
        wait 0x10009 0           read 0x10000 16          write 0x500 255
        screen                   audio-start              audio-stop
        save name / loadstate name                        freeze / unfreeze
        speed 200                sleep-watch 0 / wake-watch 0
        clear-watches

    ``wait addr value`` consumes watch notifications for ``addr`` in arrival
    order until one delivers ``value``, which keeps every later command on a
    reproducible frame.
    """

    def __init__(self, client: ConsoleClient):
        self.client = client
        self._events: dict[int, queue.Queue] = {}
        self._watch_ids: list[int] = []

    def _queue_for(self, addr: int) -> queue.Queue:
        return self._events.setdefault(addr, queue.Queue())

    def _subscriber(self, addr, length, data):
        self._queue_for(addr).put(data[0] if data else -1)

    def run_script(self, text: str) -> None:
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                self._run_line(line)
            except VcleError:
                raise
            except Exception as exc:
                raise ScriptError(f"line {lineno}: {line!r}: {exc}") from exc

    def _run_line(self, line: str) -> None:
        parts = line.split()
        cmd, rest = parts[0].lower(), parts[1:]
        c = self.client
        if cmd == "load":
            c.load_game(rest[0])
        elif cmd == "watch":
            wid = c.add_memory_listener(int(rest[0], 0), int(rest[1], 0), self._subscriber)
            self._watch_ids.append(wid)
        elif cmd == "touch":
            ms = int(rest[1]) if len(rest) > 1 else 50
            c.touch_button(Button[rest[0].upper()], ms)
        elif cmd == "chord":
            c.press_chord([Button[r.upper()] for r in rest])
        elif cmd == "hold":
            c.hold_button(Button[rest[0].upper()])
        elif cmd == "release":
            c.release_button(Button[rest[0].upper()])
        elif cmd == "delay":
            c.delay_button(int(rest[0]))
        elif cmd == "wait":
            self._wait(int(rest[0], 0), int(rest[1], 0))
        elif cmd == "read":
            c.read_bytes(int(rest[0], 0), int(rest[1], 0))
        elif cmd == "write":
            c.write_byte(int(rest[0], 0), int(rest[1], 0))
        elif cmd == "screen":
            c.get_screen()
        elif cmd == "audio-start":
            c.start_recording_audio()
        elif cmd == "audio-stop":
            c.stop_recording_audio()
        elif cmd == "save":
            c.save_state(rest[0])
        elif cmd == "loadstate":
            c.load_state(rest[0])
        elif cmd == "freeze":
            c.freeze()
        elif cmd == "unfreeze":
            c.unfreeze()
        elif cmd == "speed":
            c.speed = int(rest[0])
        elif cmd == "sleep-watch":
            c.sleep_memory_listener(self._watch_ids[int(rest[0])])
        elif cmd == "wake-watch":
            c.wake_memory_listener(self._watch_ids[int(rest[0])])
        elif cmd == "clear-watches":
            c.clear_memory_listeners()
        else:
            raise ScriptError(f"unknown command {cmd!r}")

    def _wait(self, addr: int, value: int, timeout: float = 30.0) -> None:
        """Consume this address's notifications in order until one matches."""
        deadline = time.monotonic() + timeout
        q = self._queue_for(addr)
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ScriptError(f"wait 0x{addr:X} {value} timed out")
            try:
                got = q.get(timeout=remaining)
            except queue.Empty:
                raise ScriptError(f"wait 0x{addr:X} {value} timed out") from None
            if got == value:
                return


def _run_session(script_text: str, transcript_dir: Path | None) -> None:
    client = ConsoleClient("kula", fast=True, transcript_dir=transcript_dir)
    client.run()
    try:
        SessionDriver(client).run_script(script_text)
    finally:
        client.kill()


def cmd_protocol_record(args) -> int:
    out = Path(args.out)
    _run_session(Path(args.script).read_text(encoding="utf-8"), out)
    print(f"recorded transcripts in {out}")
    return 0


def cmd_protocol_verify(args) -> int:
    import tempfile

    reference = Path(args.transcripts)
    with tempfile.TemporaryDirectory() as tmp:
        fresh = Path(tmp) / "replay"
        _run_session(Path(args.script).read_text(encoding="utf-8"), fresh)
        ok = True
        for name in CHANNELS:
            expected = (reference / f"{name}.bin").read_bytes()
            actual = (fresh / f"{name}.bin").read_bytes()
            if expected != actual:
                ok = False
                offset = next(
                    (i for i, (x, y) in enumerate(zip(expected, actual)) if x != y),
                    min(len(expected), len(actual)),
                )
                print(
                    f"channel {name}: divergence at offset {offset} "
                    f"(expected {len(expected)} bytes, got {len(actual)})"
                )
    if ok:
        print("transcripts match")
        return 0
    return 1


# ---------------------------------------------------------------------------
# serve


def cmd_serve(args) -> int:
    specs = load_levels_dir(args.levels) if args.levels else None
    console = VirtualConsole(KulaCartridge(level_specs=specs))
    session = fifo_create(args.session)
    print(f"session ready at {session}", flush=True)
    endpoints = fifo_open_server(session)
    server = ConsoleServer(console, endpoints, fast=args.fast,
                           persist_dir=args.persist_dir)
    server.serve_forever()
    return 0


# ---------------------------------------------------------------------------
# env-serve


def _encode_obs(state) -> object:
    if state is None:
        return None
    if isinstance(state, CompositeState):
        sound = state.sound
        return {
            "kind": "dict",
            "visual": _encode_obs(state.visual),
            "sound": None
            if sound is None
            else {
                "kind": "box",
                "dtype": "float64",
                "shape": list(np.asarray(sound, dtype=np.float64).shape),
                "data_b64": base64.b64encode(
                    np.ascontiguousarray(sound, dtype=np.float64).tobytes()
                ).decode("ascii"),
            },
            "clock": float(state.clock),
            "score": int(state.score),
        }
    arr = np.asarray(state)
    return {
        "kind": "box",
        "dtype": str(arr.dtype),
        "shape": list(arr.shape),
        "data_b64": base64.b64encode(arr.tobytes()).decode("ascii"),
    }


def cmd_env_serve(args) -> int:
    env = _build_env(args)
    out = sys.stdout

    def respond(obj) -> None:
        out.write(json.dumps(obj) + "\n")
        out.flush()

    try:
        for line in sys.stdin:
            line = line.strip()
            if not line:
                continue
            try:
                req = json.loads(line)
                op = req.get("op")
                if op == "spaces":
                    respond(
                        {
                            "ok": True,
                            "variant": env.variant,
                            "observation_space": env.observation_space(),
                            "action_space": env.action_space(),
                        }
                    )
                elif op == "reset":
                    state = env.reset(seed=req.get("seed"))
                    respond({"ok": True, "observation": _encode_obs(state)})
                elif op == "step":
                    result = env.step(req.get("action"))
                    info = {k: v for k, v in result.info.items()}
                    respond(
                        {
                            "ok": True,
                            "observation": _encode_obs(result.state),
                            "reward": result.reward,
                            "done": result.done,
                            "info": info,
                        }
                    )
                elif op == "render":
                    respond({"ok": True, "text": env.render("text")})
                elif op == "close":
                    respond({"ok": True})
                    break
                else:
                    respond({"ok": False, "error": "BadRequest",
                             "message": f"unknown op {op!r}"})
            except VcleError as exc:
                respond(
                    {
                        "ok": False,
                        "error": type(exc).__name__,
                        "message": str(exc),
                    }
                )
    finally:
        env.close()
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_common(sub, level=True) -> None:
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--config", default=None, help="key=value config file")
    sub.add_argument("--out", default="out")
    sub.add_argument("--fast", action=argparse.BooleanOptionalAction, default=True,
                     help="unthrottled execution (default on)")
    sub.add_argument("--levels", default=None, help="directory of custom .lvl files")
    if level:
        sub.add_argument("--level", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vcle")
    subs = parser.add_subparsers(dest="command", required=True)

    play = subs.add_parser("play", help="run episodes with a random or scripted policy")
    play.add_argument("--variant", choices=VARIANTS, default="fixed-v1")
    play.add_argument("--episodes", type=int, default=1)
    play.add_argument("--policy", default="random",
                      help="'random' or a path to an action script file")
    play.add_argument("--eval", action="store_true",
                      help="use the reserved validation start")
    play.add_argument("--record-audio", action="store_true")
    play.add_argument("--max-moves", type=int, default=0)
    play.add_argument("--trace", default=None, help="write a JSON-lines trajectory log")
    _add_common(play)
    play.set_defaults(func=cmd_play)

    tq = subs.add_parser("train-q", help="tabular Q-learning")
    tq.add_argument("--variant", choices=("fixed-v1", "random-v1", "audio-v1"),
                    default="fixed-v1")
    tq.add_argument("--episodes", type=int, default=2000)
    tq.add_argument("--gamma", type=float, default=None)
    tq.add_argument("--eval", action="store_true")
    _add_common(tq)
    tq.set_defaults(func=cmd_train_q)

    dump = subs.add_parser("dump", help="dump a frame, move audio, or MFCC matrix")
    dump.add_argument("what", choices=("frame", "audio", "mfcc"))
    dump.add_argument("--script", default="", help="comma-separated actions to run first")
    dump.add_argument("--start", type=int, default=0)
    _add_common(dump)
    dump.set_defaults(func=cmd_dump)

    rec = subs.add_parser("protocol-record", help="record per-channel transcripts")
    rec.add_argument("--script", required=True, help="session script file")
    rec.add_argument("--out", required=True)
    rec.set_defaults(func=cmd_protocol_record)

    ver = subs.add_parser("protocol-verify", help="verify recorded transcripts")
    ver.add_argument("--script", required=True)
    ver.add_argument("--transcripts", required=True)
    ver.set_defaults(func=cmd_protocol_verify)

    serve = subs.add_parser("serve", help="serve a console session over FIFOs")
    serve.add_argument("--session", required=True, help="session directory")
    serve.add_argument("--fast", action=argparse.BooleanOptionalAction, default=True)
    serve.add_argument("--persist-dir", default=None)
    serve.add_argument("--levels", default=None)
    serve.set_defaults(func=cmd_serve)

    es = subs.add_parser("env-serve", help="serve one environment over stdio JSON")
    es.add_argument("--variant", choices=VARIANTS, default="fixed-v1")
    es.add_argument("--eval", action="store_true")
    _add_common(es)
    es.set_defaults(func=cmd_env_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except VcleError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

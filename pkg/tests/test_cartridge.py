"""Cartridge tests: level format, move mechanics, timing, sounds."""

import struct

import numpy as np
import pytest

from vcle.buttons import Button, ControlEvent, ControlKind
from vcle.console import VirtualConsole
from vcle.dsp import mfcc
from vcle.errors import LevelError, UnknownGame, UnknownStart
from vcle.kula import KulaCartridge, levels as lv, parse_level
from vcle.kula.cartridge import (
    DUR_FORWARD,
    DUR_FORWARD_COLLECT,
    DUR_JUMP,
    DUR_ROTATE,
    LOST_FALL,
    LOST_SPIKE,
    LOST_TIMEOUT,
    PLAYING,
    RAM_BASE,
    WON,
)
from vcle.kula.sounds import SoundEvent, synth_sound

TINY = """\
id: 9
time: 100
start: 0,1,E
start: 4,1,W
#C#.#
#K#G#
##S##
"""


def make(level="level1:0", text=None):
    specs = [parse_level(text)] if text else None
    con = VirtualConsole(KulaCartridge(level_specs=specs))
    con.cartridge.load(level)
    return con, con.cartridge


def hold(con, *buttons):
    for b in buttons:
        con.queue_control(ControlEvent(ControlKind.HOLD, b))


def release_all(con, *buttons):
    for b in buttons:
        con.queue_control(ControlEvent(ControlKind.RELEASE, b))


def press(con, *buttons, frames_after=2):
    hold(con, *buttons)
    con.step_frame()
    release_all(con, *buttons)
    for _ in range(frames_after):
        con.step_frame()


def run_until_idle(con, cap=400):
    for _ in range(cap):
        if not con.has_work():
            return
        con.step_frame()
    raise AssertionError("cartridge never went idle")


class TestLevelFormat:
    def test_parse_headers_and_grid(self):
        spec = parse_level(TINY)
        assert spec.level_id == 9
        assert (spec.width, spec.height) == (5, 3)
        assert spec.objects == {(1, 0): "coin", (1, 1): "key"}
        assert spec.tile(3, 1) == lv.GOAL
        assert spec.tile(2, 2) == lv.SPIKE
        assert spec.tile(3, 0) == lv.VOID
        assert spec.starts[0] == lv.Pose(0, 1, 1)

    def test_object_chars_imply_platform(self):
        spec = parse_level(TINY)
        assert spec.tile(1, 0) == lv.PLATFORM

    def test_start_on_void_rejected(self):
        bad = "id: 1\ntime: 60\nstart: 1,0,N\n#.#\n"
        with pytest.raises(LevelError):
            parse_level(bad)

    def test_keys_require_goal(self):
        bad = "id: 1\ntime: 60\nstart: 0,0,E\n#K#\n"
        with pytest.raises(LevelError):
            parse_level(bad)

    def test_two_reserved_starts_rejected(self):
        bad = "id: 1\ntime: 60\nstart: 0,0,E\nstart!: 1,0,E\nstart!: 2,0,E\n###\n"
        with pytest.raises(LevelError):
            parse_level(bad)

    def test_missing_headers_rejected(self):
        with pytest.raises(LevelError):
            parse_level("start: 0,0,E\n###\n")

    def test_oversized_grid_rejected(self):
        rows = "\n".join("#" * 65 for _ in range(3))
        with pytest.raises(LevelError):
            parse_level(f"id: 1\ntime: 60\nstart: 0,0,E\n{rows}\n")

    def test_bundled_levels_load_and_validate(self):
        specs = lv.bundled_levels()
        assert [s.level_id for s in specs] == [1, 2, 3]
        assert specs[1].reserved_start is not None
        assert all(len(s.starts) == 4 for s in specs)


class TestLoading:
    def test_default_clock_is_100_seconds(self):
        _, cart = make("level1:0")
        assert cart.clock_frames == 100 * 60

    def test_time_override_suffix(self):
        _, cart = make("level2:1@80")
        assert cart.clock_frames == 80 * 60

    def test_reserved_start_token(self):
        _, cart = make("level2:r")
        spec = cart.spec
        assert (cart.x, cart.y) == (spec.reserved_start.x, spec.reserved_start.y)

    def test_reserved_missing(self):
        con, cart = make("level1:0")
        with pytest.raises(UnknownStart):
            cart.load("level1:r")

    def test_bad_start_index(self):
        con, cart = make("level1:0")
        with pytest.raises(UnknownStart):
            cart.load("level1:7")

    def test_unknown_level(self):
        con, cart = make("level1:0")
        with pytest.raises(UnknownGame):
            cart.load("level42")

    def test_reload_resets_everything(self):
        con, cart = make("level1:0")
        press(con, Button.UP)
        run_until_idle(con)
        assert cart.score > 0
        cart.load("level1:0")
        assert (cart.score, cart.status, cart.moving) == (0, PLAYING, 0)
        assert cart.objects == cart.spec.objects


class TestInputScan:
    def test_up_triggers_forward(self):
        con, cart = make()
        press(con, Button.UP)
        assert cart.moving == 1 and cart.move_kind == "forward"

    def test_up_and_cross_trigger_jump(self):
        con, cart = make()
        press(con, Button.UP, Button.CROSS)
        assert cart.move_kind == "jump"

    def test_cross_alone_is_ignored(self):
        con, cart = make()
        press(con, Button.CROSS)
        for _ in range(5):
            con.step_frame()
        assert cart.moving == 0

    def test_left_right_rotate(self):
        con, cart = make()
        press(con, Button.LEFT)
        run_until_idle(con)
        assert cart.orientation == 0  # E -> N
        press(con, Button.RIGHT)
        run_until_idle(con)
        assert cart.orientation == 1

    def test_input_ignored_while_moving(self):
        con, cart = make()
        press(con, Button.UP)
        start_target = cart.move_to
        press(con, Button.LEFT)  # mid-animation
        run_until_idle(con)
        assert (cart.x, cart.y) == start_target
        assert cart.orientation == 1  # rotation was swallowed

    def test_holding_button_does_not_retrigger(self):
        con, cart = make()
        hold(con, Button.UP)
        con.step_frame()
        run_until_idle(con, cap=100)
        pos_after_one = (cart.x, cart.y)
        for _ in range(50):
            con.step_frame()
        assert (cart.x, cart.y) == pos_after_one
        assert cart.moving == 0


class TestMoveMechanics:
    def test_forward_moves_one_cell(self):
        con, cart = make()
        press(con, Button.UP)
        run_until_idle(con)
        assert (cart.x, cart.y) == (1, 1)

    def test_jump_moves_two_cells_over_gap(self):
        con, cart = make("9:0", text=TINY)
        # At (0,1) facing E; rotate to N, forward to (0,0), face E, jump over
        # the void at (3,0)... instead jump from (2,0) east over void lands (4,0).
        for moves in ([Button.LEFT], [Button.UP], [Button.RIGHT], [Button.UP], [Button.UP]):
            press(con, *moves)
            run_until_idle(con)
        assert (cart.x, cart.y) == (2, 0)
        press(con, Button.UP, Button.CROSS)
        run_until_idle(con)
        assert (cart.x, cart.y) == (4, 0)
        assert cart.status == PLAYING

    def test_forward_onto_void_loses_after_fall(self):
        con, cart = make("9:1", text=TINY)  # (4,1) facing W
        for _ in range(2):  # W -> S -> E: the east edge is void
            press(con, Button.LEFT)
            run_until_idle(con)
        assert cart.orientation == 1
        press(con, Button.UP)
        run_until_idle(con)
        assert cart.status == LOST_FALL

    def test_fall_duration_is_90_frames(self):
        con, cart = make("9:1", text=TINY)
        for _ in range(2):
            press(con, Button.LEFT)
            run_until_idle(con)
        hold(con, Button.UP)
        con.step_frame()  # scan frame: move starts
        assert cart.moving == 1
        frames = 0
        while cart.moving:
            con.step_frame()
            frames += 1
        assert frames == 90
        assert cart.status == LOST_FALL

    def test_spike_loses(self):
        con, cart = make("9:0", text=TINY)
        press(con, Button.RIGHT)  # E -> S
        run_until_idle(con)
        press(con, Button.UP)  # (0,2)
        run_until_idle(con)
        press(con, Button.LEFT)  # S -> E
        run_until_idle(con)
        press(con, Button.UP)  # (1,2)
        run_until_idle(con)
        press(con, Button.UP)  # (2,2) spike
        run_until_idle(con)
        assert cart.status == LOST_SPIKE

    def test_collections_and_scores(self):
        con, cart = make("9:0", text=TINY)
        press(con, Button.LEFT)
        run_until_idle(con)
        press(con, Button.UP)  # (0,0)
        run_until_idle(con)
        press(con, Button.RIGHT)
        run_until_idle(con)
        press(con, Button.UP)  # coin at (1,0)
        run_until_idle(con)
        assert cart.score == 250
        press(con, Button.RIGHT)
        run_until_idle(con)
        press(con, Button.UP)  # key at (1,1)
        run_until_idle(con)
        assert cart.score == 1250
        assert cart.keys_remaining == 0

    def test_goal_without_keys_is_plain_platform(self):
        con, cart = make("9:1", text=TINY)  # (4,1) facing W, key not collected
        press(con, Button.UP)  # onto goal (3,1)
        run_until_idle(con)
        assert cart.status == PLAYING

    def test_win_on_goal_with_all_keys(self):
        con, cart = make()
        for _ in range(3):  # coin, key, goal on level 1
            press(con, Button.UP)
            run_until_idle(con)
        assert cart.status == WON
        assert cart.score == 1250

    def test_timeout_mid_animation(self):
        con, cart = make("level1:0")
        cart.clock_frames = 10
        hold(con, Button.UP)
        for _ in range(9):
            con.step_frame()
        assert cart.moving == 1
        con.step_frame()
        assert cart.status == LOST_TIMEOUT
        assert cart.clock_frames == 0

    def test_terminal_state_is_absorbing(self):
        con, cart = make()
        for _ in range(3):
            press(con, Button.UP)
            run_until_idle(con)
        assert cart.status == WON
        before = bytes(con.ram[RAM_BASE:RAM_BASE + 15])
        press(con, Button.UP)
        for _ in range(60):
            con.step_frame()
        assert bytes(con.ram[RAM_BASE:RAM_BASE + 15]) == before


class TestTiming:
    def measure(self, cart, con, *buttons):
        hold(con, *buttons)
        con.step_frame()
        assert cart.moving == 1
        frames = 0
        while cart.moving:
            con.step_frame()
            frames += 1
        release_all(con, *buttons)
        con.step_frame()
        return frames

    def test_rotation_duration(self):
        con, cart = make()
        assert self.measure(cart, con, Button.LEFT) == DUR_ROTATE

    def test_plain_forward_duration(self):
        con, cart = make("level1:1")  # (0,0) facing E: empty platform ahead
        assert self.measure(cart, con, Button.UP) == DUR_FORWARD

    def test_collecting_forward_is_slower(self):
        con, cart = make("level1:0")  # coin ahead
        assert self.measure(cart, con, Button.UP) == DUR_FORWARD_COLLECT

    def test_jump_is_a_second_longer_than_rotation(self):
        con, cart = make("level1:1")  # (0,0) E: jump lands empty (2,0)
        jump = self.measure(cart, con, Button.UP, Button.CROSS)
        con2, cart2 = make("level1:1")
        rot = self.measure(cart2, con2, Button.LEFT)
        assert jump == DUR_JUMP
        assert jump - rot == 60

    def test_moving_flag_matches_video_duration_exactly(self):
        con, cart = make()
        hold(con, Button.LEFT)
        con.step_frame()
        seen = []
        for _ in range(DUR_ROTATE + 2):
            seen.append(cart.moving)
            con.step_frame()
        assert seen == [1] * DUR_ROTATE + [0, 0]


class TestRotationInvariants:
    @pytest.mark.parametrize("pair", [(Button.LEFT, Button.RIGHT), (Button.RIGHT, Button.LEFT)])
    def test_left_right_restore_orientation(self, pair):
        con, cart = make()
        start = cart.orientation
        for b in pair:
            press(con, b)
            run_until_idle(con)
        assert cart.orientation == start

    def test_four_same_rotations_restore(self):
        con, cart = make()
        start = (cart.x, cart.y, cart.orientation, cart.score, cart.status)
        for _ in range(4):
            press(con, Button.LEFT)
            run_until_idle(con)
        assert (cart.x, cart.y, cart.orientation, cart.score, cart.status) == start

    def test_rotations_never_change_position_score_or_status(self):
        con, cart = make()
        for b in (Button.LEFT, Button.RIGHT, Button.RIGHT, Button.LEFT):
            x, y, score = cart.x, cart.y, cart.score
            press(con, b)
            run_until_idle(con)
            assert (cart.x, cart.y, cart.score, cart.status) == (x, y, score, PLAYING)


class TestRamMap:
    def test_header_layout(self):
        con, cart = make()
        con.step_frame()
        raw = con.read_bytes(RAM_BASE, 16)
        score, clock = struct.unpack_from(">II", raw)
        assert score == 0
        assert clock == 100 * 60 - 1
        assert raw[8] == PLAYING
        assert raw[9] == 0
        assert (raw[10], raw[11], raw[12]) == (0, 1, 1)
        assert raw[13] == 1  # one key on level 1
        assert raw[14] == 1

    def test_score_monotone_within_episode(self):
        con, cart = make()
        rng = np.random.default_rng(5)
        last = 0
        moves = [Button.UP, Button.LEFT, Button.RIGHT]
        for _ in range(30):
            if cart.status != PLAYING:
                break
            press(con, moves[rng.integers(3)])
            run_until_idle(con)
            assert cart.score >= last
            last = cart.score


class TestSounds:
    def test_coin_duration_and_determinism(self):
        coin = synth_sound(SoundEvent.COIN)
        assert len(coin) == 3308  # 150 ms at 22,050 Hz, rounded half up
        assert np.array_equal(coin, synth_sound(SoundEvent.COIN))
        assert np.argmax(np.abs(coin)) < len(coin) // 4  # peak near onset

    @pytest.mark.parametrize(
        "event,ms",
        [
            (SoundEvent.ROLL, 80),
            (SoundEvent.JUMP, 300),
            (SoundEvent.KEY, 250),
            (SoundEvent.FRUIT, 300),
            (SoundEvent.WIN, 600),
            (SoundEvent.LOSE, 500),
        ],
    )
    def test_durations(self, event, ms):
        assert len(synth_sound(event)) == (ms * 22050 + 500) // 1000

    def test_amplitudes_bounded(self):
        for event in SoundEvent:
            wave = synth_sound(event)
            assert np.max(np.abs(wave.astype(np.int64))) <= int(0.8 * 32767) + 1

    def test_mfcc_separates_events(self):
        feats = {}
        for event in SoundEvent:
            m = mfcc(synth_sound(event))
            feats[event] = m.mean(axis=0)
        events = list(SoundEvent)
        for i, a in enumerate(events):
            for b in events[i + 1:]:
                inter = np.linalg.norm(feats[a] - feats[b])
                assert inter > 1e-3, (a, b)
        # Within-event distance is zero by determinism.
        for event in events:
            m1 = mfcc(synth_sound(event)).mean(axis=0)
            assert np.array_equal(m1, feats[event])


class TestRender:
    def test_render_is_pure_function_of_state(self):
        con, cart = make()
        press(con, Button.UP)
        for _ in range(7):
            con.step_frame()
        a = con.get_screen()
        b = con.get_screen()
        assert np.array_equal(a, b)

    def test_terminal_overlays_differ(self):
        con, cart = make()
        playing = con.get_screen()
        for _ in range(3):
            press(con, Button.UP)
            run_until_idle(con)
        won = con.get_screen()
        assert not np.array_equal(playing, won)

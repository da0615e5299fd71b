"""Orthographic framebuffer rendering for the rolling-ball cartridge.

Pure integer pixel math over numpy slices: the output is a function of
cartridge state alone, so identical states always render identical frames.
"""

from __future__ import annotations

import numpy as np

from . import levels

BG = (12, 10, 24)
HUD_BG = (4, 4, 10)
PLATFORM = (78, 82, 96)
PLATFORM_EDGE = (46, 48, 58)
GOAL = (52, 168, 83)
SPIKE = (200, 60, 50)
COIN = (240, 200, 40)
KEY = (80, 210, 230)
FRUIT = (220, 70, 170)
BALL = (235, 235, 245)
ARROW = (30, 30, 40)
TEXT = (230, 230, 230)
TEXT_ALERT = (240, 80, 60)
WIN_BAR = (60, 220, 90)
LOSE_BAR = (220, 60, 50)

HUD_H = 16

_FONT = {
    "0": ("###", "#.#", "#.#", "#.#", "###"),
    "1": (".#.", "##.", ".#.", ".#.", "###"),
    "2": ("###", "..#", "###", "#..", "###"),
    "3": ("###", "..#", "###", "..#", "###"),
    "4": ("#.#", "#.#", "###", "..#", "..#"),
    "5": ("###", "#..", "###", "..#", "###"),
    "6": ("###", "#..", "###", "#.#", "###"),
    "7": ("###", "..#", ".#.", ".#.", ".#."),
    "8": ("###", "#.#", "###", "#.#", "###"),
    "9": ("###", "#.#", "###", "..#", "###"),
}


def _draw_digits(fb, text, x, y, color, scale=2):
    for ch in text:
        rows = _FONT.get(ch)
        if rows is not None:
            for ry, row in enumerate(rows):
                for rx, c in enumerate(row):
                    if c == "#":
                        fb[y + ry * scale:y + (ry + 1) * scale,
                           x + rx * scale:x + (rx + 1) * scale] = color
        x += 4 * scale


def _disc(fb, cx, cy, r, color):
    y0, y1 = max(0, cy - r), min(fb.shape[0], cy + r + 1)
    x0, x1 = max(0, cx - r), min(fb.shape[1], cx + r + 1)
    if y0 >= y1 or x0 >= x1:
        return
    yy, xx = np.ogrid[y0 - cy:y1 - cy, x0 - cx:x1 - cx]
    mask = yy * yy + xx * xx <= r * r
    fb[y0:y1, x0:x1][mask] = color


def render_game(fb: np.ndarray, cart) -> None:
    spec = cart.spec
    fb[:] = BG
    fb[:HUD_H] = HUD_BG

    # HUD: score left, keys centre, clock seconds right.
    _draw_digits(fb, f"{cart.score:06d}", 4, 3, TEXT)
    _draw_digits(fb, f"{cart.keys_remaining:d}", 152, 3, KEY)
    clock_s = cart.clock_frames // 60
    low = cart.status == 0 and cart.clock_frames < 600
    blink = low and (cart.anim_tick // 30) % 2 == 0
    _draw_digits(fb, f"{clock_s:03d}", 288, 3, TEXT_ALERT if blink else TEXT)

    if spec is None:
        return

    w, h = spec.width, spec.height
    cell = max(4, min((fb.shape[1] - 16) // w, (fb.shape[0] - HUD_H - 16) // h))
    ox = (fb.shape[1] - cell * w) // 2
    oy = HUD_H + (fb.shape[0] - HUD_H - cell * h) // 2

    for y in range(h):
        for x in range(w):
            tile = spec.grid[y][x]
            if tile == levels.VOID:
                continue
            px, py = ox + x * cell, oy + y * cell
            fb[py:py + cell, px:px + cell] = PLATFORM_EDGE
            inner = GOAL if tile == levels.GOAL else PLATFORM
            fb[py + 1:py + cell - 1, px + 1:px + cell - 1] = inner
            if tile == levels.SPIKE:
                q = max(1, cell // 5)
                for sx, sy in ((q, q), (cell - 2 * q, q), (q, cell - 2 * q),
                               (cell - 2 * q, cell - 2 * q), (cell // 2 - q // 2, cell // 2 - q // 2)):
                    fb[py + sy:py + sy + q, px + sx:px + sx + q] = SPIKE

    for (x, y), kind in cart.objects.items():
        cx = ox + x * cell + cell // 2
        cy = oy + y * cell + cell // 2
        if kind == "coin":
            _disc(fb, cx, cy, cell * 3 // 10, COIN)
        elif kind == "key":
            _disc(fb, cx, cy, cell // 4, KEY)
            fb[cy:cy + cell // 4, cx - 1:cx + 1] = KEY
        else:
            _disc(fb, cx, cy, cell // 3, FRUIT)

    _draw_ball(fb, cart, cell, ox, oy)

    if cart.status == 1:
        fb[-8:] = WIN_BAR
    elif cart.status in (2, 3, 4):
        fb[-8:] = LOSE_BAR


def _draw_ball(fb, cart, cell, ox, oy):
    bx = ox + cart.x * cell + cell // 2
    by = oy + cart.y * cell + cell // 2
    r = max(2, cell * 2 // 5)

    if cart.moving and cart.anim_total > 0:
        k = cart.anim_total - cart.anim_remaining
        d = cart.anim_total
        sx = ox + cart.move_from[0] * cell + cell // 2
        sy = oy + cart.move_from[1] * cell + cell // 2
        tx = ox + cart.move_to[0] * cell + cell // 2
        ty = oy + cart.move_to[1] * cell + cell // 2
        if cart.move_kind == "fall":
            travel = min(k, 30)
            bx = sx + (tx - sx) * travel // 30
            by = sy + (ty - sy) * travel // 30
            if k > 30:
                sink = (k - 30) * cell // 45
                by += sink
                r = max(1, r * (d - k) // (d - 30 + 1))
        else:
            bx = sx + (tx - sx) * k // d
            by = sy + (ty - sy) * k // d
            if cart.move_kind == "jump":
                by -= 4 * (cell // 2) * k * (d - k) // (d * d)

    _disc(fb, bx, by, r, BALL)
    dx, dy = levels.DELTAS[cart.orientation]
    for step in range(1, r):
        px, py = bx + dx * step, by + dy * step
        if 0 <= py < fb.shape[0] and 0 <= px < fb.shape[1]:
            fb[py, px] = ARROW
            if dx == 0 and 0 <= px + 1 < fb.shape[1]:
                fb[py, px + 1] = ARROW
            elif dy == 0 and 0 <= py + 1 < fb.shape[0]:
                fb[py + 1, px] = ARROW

"""The running two-stage blur example and its three schedules, as text."""

BLUR = """\
pipeline f() {
  fun g(x) = { x };
  fun f(x) = { g[x] + g[x + 1] };
}
"""

DEFAULT_SCHEDULE = ""

# tile f by 3, compute and store g per tile
TILED_SCHEDULE = """\
split(f.x, xo, xi, 3, guard)
compute-at(g, f.xo)
store-at(g, f.xo)
"""

# pad f's loop to a multiple of 4
ROUND_SCHEDULE = """\
split(f.x, xo, xi, 4, round)
"""

SCHEDULES = {
    "default": DEFAULT_SCHEDULE,
    "tiled": TILED_SCHEDULE,
    "round": ROUND_SCHEDULE,
}

# a reduction whose extent is a parameter; p1 = -1 makes every point an error
RDOM_PARAM = """\
pipeline f(p1) {
  fun f(x) = { x; rdom(r = (0, p1)) in (x) <- f[x] + r };
}
"""

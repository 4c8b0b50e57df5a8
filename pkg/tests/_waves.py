"""Shared wave fixtures for the test suite."""
from balancewaves.config import ModelBlock, WaveBlock
from balancewaves.experiments import build_wave, two_jump_composite
from balancewaves.model import get_model
from balancewaves.profile import (build_characteristic_front, build_riemann_shock,
                                  build_smooth_front)

MIXED_MODEL = ModelBlock(f=[0, 0, 0.5], source_roots=[-2, -1, 0, 1.55], source_scale=-3.0,
                         u_range=[-2.5, 2.0]).build()


def mixed_wave():
    return build_wave(MIXED_MODEL, WaveBlock(kind="mixed", u_star=0.0, u_left=1.5,
                                             u_right=-1.5, sigma=0.0, L=12.0))


def catalog_profiles():
    bi, mono, three = (get_model(k) for k in
                       ("burgers_bistable", "burgers_monostable", "burgers_three_zero"))
    return {
        "monostable": (mono, build_smooth_front(mono, 0.0, 1.0, 2.0)),
        "monostable_fast": (mono, build_smooth_front(mono, 0.0, 1.0, 3.5)),
        "tanh": (bi, build_characteristic_front(bi, 0.0, 0.0)),
        "shock_bistable": (bi, build_riemann_shock(bi, 1.0, -1.0)[1]),
        "shock_three": (three, build_riemann_shock(three, 1.0, 0.0)[1]),
        "mixed": (MIXED_MODEL, mixed_wave()),
        "two_jump": two_jump_composite(),
    }


PROFILES = catalog_profiles()

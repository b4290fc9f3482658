"""Consistency-class sizes of the driving-scene blocks, with encoding comparison.

The forward/stop block admits several readings of its rule list. The
primary reading is reported, together with every alternative, next to the
reference class sizes it is expected to reproduce. A size that no reading
reproduces is flagged rather than hidden.
"""

from __future__ import annotations

from .. import builtins
from ..knowledge.compiler import class_sizes

# reference sizes: |C_(1,0)| (forward only), |C_(0,1)| (stop only), turn classes
REFERENCE_FORWARD = 7
REFERENCE_STOP = 280
REFERENCE_TURN = (7, 57)


def _key(y) -> str:
    return "(" + ",".join(str(int(v)) for v in y) + ")"


def forward_stop_sizes(variant: str) -> dict[str, int]:
    sizes = class_sizes(builtins.bdd_forward_stop(variant))
    return {_key(y): n for y, n in sorted(sizes.items())}


def block_report() -> dict:
    """Class sizes per block, the variant comparison and what was reproduced."""
    primary = forward_stop_sizes(builtins.BDD_PRIMARY_VARIANT)
    turns = {}
    for side in ("left", "right"):
        sizes = class_sizes(builtins.bdd_turn(side))
        turns[side] = {_key(y): n for y, n in sorted(sizes.items())}
    comparison = []
    for variant in builtins.BDD_FORWARD_STOP_VARIANTS:
        sizes = forward_stop_sizes(variant)
        comparison.append({
            "variant": variant,
            "class_sizes": sizes,
            "forward_matches": sizes.get("(1,0)") == REFERENCE_FORWARD,
            "stop_matches": sizes.get("(0,1)") == REFERENCE_STOP,
        })
    turn_ok = all(sorted(t.values()) == sorted(REFERENCE_TURN) for t in turns.values())
    reproduced = {
        "forward": primary.get("(1,0)") == REFERENCE_FORWARD,
        "stop": primary.get("(0,1)") == REFERENCE_STOP,
        "turn": turn_ok,
    }
    return {
        "forward_stop": {"variant": builtins.BDD_PRIMARY_VARIANT, "class_sizes": primary},
        "turn_left": {"class_sizes": turns["left"]},
        "turn_right": {"class_sizes": turns["right"]},
        "reference": {"forward": REFERENCE_FORWARD, "stop": REFERENCE_STOP, "turn": list(REFERENCE_TURN)},
        "reproduced": reproduced,
        "all_reproduced": all(reproduced.values()),
        "stop_reproduced_by_any_variant": any(c["stop_matches"] for c in comparison),
        "variant_comparison": comparison,
    }

"""Built-in symbolic tasks, written in the task DSL."""

from __future__ import annotations

from .knowledge.dsl import parse_task
from .knowledge.task import TaskSpec

XOR = """
task xor;
concept c1, c2, c3 : 2;
label y : 2;
rule y <-> (c1 ^ c2 ^ c3);
support all;
"""

ADDITION = """
task addition;
concept c1, c2 : 10;
label y : 19;
rule y == c1 + c2;
support all;
"""

# addition restricted to the digits 0..3: sums 0..6, small enough to brute force
REDUCED_ADDITION = """
task reduced-addition;
concept c1, c2 : 4;
label y : 7;
rule y == c1 + c2;
support all;
"""

# biased addition: even digits only ever meet even digits, odd meet odd
EVENODD = """
task evenodd;
concept c1, c2 : 10;
label y : 19;
rule y == c1 + c2;
support (0, 6), (6, 0), (2, 8), (8, 2), (4, 6), (6, 4), (4, 8), (8, 4),
        (1, 5), (5, 1), (3, 7), (7, 3), (1, 9), (9, 1), (3, 9), (9, 3);
"""

_ADDMUL_SUPPORT = "support (0, 1), (0, 2), (1, 3);"

ADDMUL_ADD = f"""
task addmul-add;
concept c1, c2 : 10;
label y : 19;
rule y == c1 + c2;
{_ADDMUL_SUPPORT}
"""

ADDMUL_MUL = f"""
task addmul-mul;
concept c1, c2 : 10;
label y : 82;
rule y == c1 * c2;
{_ADDMUL_SUPPORT}
"""

# both tasks as one conjunction of knowledge over a pair of labels
ADDMUL_CONJ = f"""
task addmul-conj;
concept c1, c2 : 10;
label s : 19;
label p : 82;
rule s == c1 + c2;
rule p == c1 * c2;
{_ADDMUL_SUPPORT}
"""

_BDD_FORWARD_STOP_CONCEPTS = (
    "green_light", "follow", "road_clear", "red_light", "stop_sign",
    "car", "person", "rider", "other_obstacle",
)
_BDD_TURN = ("lane", "green_light", "follow", "no_lane", "obstacle", "solid_line")


def _turn_rules(side: str) -> str:
    c = [f"{side}_{n}" if not n.startswith("no_") else f"no_{side}_{n[3:]}" for n in _BDD_TURN]
    return (f"define can_{side} = {c[0]} | {c[1]} | {c[2]};\n"
            f"define cannot_{side} = {c[3]} | {c[4]} | {c[5]};\n"
            f"rule turn_{side} <-> (can_{side} & !cannot_{side});\n")


def _turn_concepts(side: str) -> list[str]:
    return [f"{side}_{n}" if not n.startswith("no_") else f"no_{side}_{n[3:]}" for n in _BDD_TURN]


# Variants of the forward/stop rules. Every variant shares the obstacle
# definition; they differ in how strictly the label rules are read.
BDD_FORWARD_STOP_VARIANTS = {
    # forward fires on a forward cause unless a stop cause overrides it;
    # labels are definitions (iff); red and green never co-occur
    "override-iff": """
rule red_light -> !green_light;
rule move_forward <-> ((green_light | follow | road_clear) & !stop_cause);
rule stop <-> stop_cause;
""",
    "override-iff-no-light-constraint": """
rule move_forward <-> ((green_light | follow | road_clear) & !stop_cause);
rule stop <-> stop_cause;
""",
    "override-iff-clear-means-no-obstacle": """
rule red_light -> !green_light;
rule road_clear <-> !obstacle;
rule move_forward <-> ((green_light | follow | road_clear) & !stop_cause);
rule stop <-> stop_cause;
""",
    "iff-labels-mutually-exclusive": """
rule red_light -> !green_light;
rule road_clear <-> !obstacle;
rule move_forward <-> (green_light | follow | road_clear);
rule stop <-> stop_cause;
rule stop -> !move_forward;
""",
    # the rule list read literally: causes imply actions, stop excludes forward
    "implications-as-written": """
rule red_light -> !green_light;
rule road_clear <-> !obstacle;
rule (green_light | follow | road_clear) -> move_forward;
rule stop_cause -> stop;
rule stop -> !move_forward;
""",
}
BDD_PRIMARY_VARIANT = "override-iff"

_BDD_DEFINES = """
define obstacle = car | person | rider | other_obstacle;
define stop_cause = red_light | stop_sign | obstacle;
"""


def bdd_forward_stop(variant: str = BDD_PRIMARY_VARIANT) -> TaskSpec:
    """The forward/stop block alone, supported on every consistent scene."""
    deterministic = "" if variant != "implications-as-written" else "nondeterministic;\n"
    text = (f"task bdd-forward-stop;\nconcept {', '.join(_BDD_FORWARD_STOP_CONCEPTS)} : 2;\n"
            f"label move_forward, stop : 2;\n{_BDD_DEFINES}{BDD_FORWARD_STOP_VARIANTS[variant]}"
            f"{deterministic}support consistent;\n")
    return parse_task(text)


def bdd_turn(side: str) -> TaskSpec:
    text = (f"task bdd-turn-{side};\nconcept {', '.join(_turn_concepts(side))} : 2;\n"
            f"label turn_{side} : 2;\n{_turn_rules(side)}support all;\n")
    return parse_task(text)


def _bdd_full() -> str:
    concepts = list(_BDD_FORWARD_STOP_CONCEPTS) + _turn_concepts("left") + _turn_concepts("right")
    k = len(concepts)

    def scene(*on: str) -> str:
        return "(" + ", ".join("1" if c in on else "0" for c in concepts) + ")"

    # the full 21-concept space is too large to list as a support, so the
    # full task carries a few representative scenes; counts use the blocks
    scenes = [scene(), scene("green_light", "road_clear"), scene("red_light", "car"),
              scene("follow", "left_lane", "right_lane", "right_obstacle")]
    assert all(s.count(",") == k - 1 for s in scenes)
    return (f"task bdd-oia;\nconcept {', '.join(concepts)} : 2;\n"
            "label move_forward, stop, turn_left, turn_right : 2;\n"
            f"{_BDD_DEFINES}{BDD_FORWARD_STOP_VARIANTS[BDD_PRIMARY_VARIANT]}"
            f"{_turn_rules('left')}{_turn_rules('right')}"
            f"support {', '.join(scenes)};\n")


BDD_OIA = _bdd_full()

TEXTS = {
    "xor": XOR,
    "addition": ADDITION,
    "reduced-addition": REDUCED_ADDITION,
    "evenodd": EVENODD,
    "addmul-add": ADDMUL_ADD,
    "addmul-mul": ADDMUL_MUL,
    "addmul-conj": ADDMUL_CONJ,
    "bdd-oia": BDD_OIA,
}

# names that stand for several tasks sharing one concept space and support
BUNDLES = {
    "addmul": ("addmul-add", "addmul-mul"),
}

# BDD block tasks, built by function because their support is derived
BDD_BLOCKS = ("bdd-forward-stop", "bdd-turn-left", "bdd-turn-right")


def names() -> list[str]:
    return sorted(set(TEXTS) | set(BUNDLES) | set(BDD_BLOCKS) | {"bdd-blocks"})


def load(name: str) -> list[TaskSpec]:
    """Tasks behind a built-in name (several for bundles)."""
    if name in TEXTS:
        return [parse_task(TEXTS[name])]
    if name in BUNDLES:
        return [parse_task(TEXTS[n]) for n in BUNDLES[name]]
    if name == "bdd-forward-stop":
        return [bdd_forward_stop()]
    if name in ("bdd-turn-left", "bdd-turn-right"):
        return [bdd_turn(name.rsplit("-", 1)[1])]
    if name == "bdd-blocks":
        return [bdd_forward_stop(), bdd_turn("left"), bdd_turn("right")]
    raise KeyError(f"unknown built-in task {name!r}; choose from {', '.join(names())}")


def task(name: str) -> TaskSpec:
    specs = load(name)
    if len(specs) != 1:
        raise KeyError(f"{name!r} names {len(specs)} tasks")
    return specs[0]

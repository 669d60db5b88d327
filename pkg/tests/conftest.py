import random

import pytest

from medrex.frames import Frame, FrameSet
from medrex.schema import CORP_HUS
from medrex.standoff import Document, Entity, Relation

TOCILIZUMAB_TEXT = (
    "treatment with tocilizumab IV every 4 weeks from July to October, "
    "then every 2 weeks until December"
)


def tocilizumab_document() -> Document:
    """Two-frame drug: frames share the route and the boundary date."""
    entities = (
        Entity("T1", "Drug", 15, 26, "tocilizumab"),
        Entity("T2", "Route", 27, 29, "IV"),
        Entity("T3", "Frequency", 30, 43, "every 4 weeks"),
        Entity("T4", "Date", 49, 53, "July"),
        Entity("T5", "Date", 57, 64, "October"),
        Entity("T6", "Frequency", 71, 84, "every 2 weeks"),
        Entity("T7", "Date", 91, 99, "December"),
    )
    typed = [
        Relation(f"R{i}", "Refer_to", src, "T1")
        for i, src in enumerate(["T2", "T3", "T4", "T5", "T6", "T7"], start=1)
    ]
    frame1 = ["T2", "T3", "T4", "T5"]
    frame2 = ["T2", "T6", "T5", "T7"]
    same = []
    seen = set()
    n = 0
    for group in (frame1, frame2):
        for i in range(len(group)):
            for j in range(i + 1, len(group)):
                key = frozenset((group[i], group[j]))
                if key in seen:
                    continue
                seen.add(key)
                n += 1
                same.append(Relation(f"SF{n}", "SAME_FRAME", group[i], group[j]))
    return Document("tocilizumab", TOCILIZUMAB_TEXT, entities, tuple(typed + same))


TOCILIZUMAB_FRAME_MEMBERS = (
    frozenset({"T2", "T3", "T4", "T5"}),
    frozenset({"T2", "T5", "T6", "T7"}),
)

_ATTR_TYPES = ["Route", "Frequency", "Date", "Dosage", "Duration"]
_LINK_TYPES = ["Refer_to", "Refer_to", "Refer_to", "Start", "Stop", "Ongoing"]


def random_frame_instance(rng: random.Random):
    """Random entities plus a FrameSet shaped like the corpus generator's output.

    Multi-frame drugs may share attributes across their frames (same link type
    on both sides) and never consist solely of singleton or nested frames, so
    the complete-graph encoding round-trips.
    """
    entities: list[Entity] = []

    def add_entity(etype: str) -> str:
        idx = len(entities) + 1
        start = idx * 6
        entities.append(Entity(f"T{idx}", etype, start, start + 4, "xxxx"))
        return f"T{idx}"

    frames: list[Frame] = []
    for _ in range(rng.randint(1, 3)):
        drug = add_entity("Drug")
        if rng.random() < 0.5:  # multi-frame drug
            n_shared = rng.randint(0, 2)
            own_a = rng.randint(1, 3)
            own_b = rng.randint(1, 3)
            if n_shared == 0 and own_a == 1 and own_b == 1:
                own_a = 2
            shared = [
                (add_entity(rng.choice(_ATTR_TYPES)), rng.choice(_LINK_TYPES))
                for _ in range(n_shared)
            ]
            frame_a = shared + [
                (add_entity(rng.choice(_ATTR_TYPES)), rng.choice(_LINK_TYPES))
                for _ in range(own_a)
            ]
            frame_b = shared + [
                (add_entity(rng.choice(_ATTR_TYPES)), rng.choice(_LINK_TYPES))
                for _ in range(own_b)
            ]
            frames.append(Frame(drug, tuple(frame_a)))
            frames.append(Frame(drug, tuple(frame_b)))
        else:
            links = tuple(
                (add_entity(rng.choice(_ATTR_TYPES)), rng.choice(_LINK_TYPES))
                for _ in range(rng.randint(1, 5))
            )
            frames.append(Frame(drug, links))
    return entities, FrameSet("synthetic", tuple(frames))


def normalize_frameset(fs: FrameSet):
    return sorted((f.drug, tuple(sorted(f.links))) for f in fs.frames)


@pytest.fixture
def corp_hus():
    return CORP_HUS

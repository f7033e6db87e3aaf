import string

from hypothesis import strategies as st

from femmir.records import ATTRIBUTE_PENALTIES, CostConfig, Entity, PropertyRecord, PropertyValue, Relation

WORDS = st.text(alphabet=string.ascii_lowercase, min_size=1, max_size=6)


def person(rid, modality="text", **attrs):
    props = {k.replace("_", "-"): PropertyValue.of(v) for k, v in attrs.items()}
    return PropertyRecord(rid, modality, {}, (Entity("p1", "Person", True, props),))


def penalty_config(**extra):
    return CostConfig(rcost=ATTRIBUTE_PENALTIES, icost=ATTRIBUTE_PENALTIES, **extra)


@st.composite
def records(draw, max_entities=4):
    """Valid records with optional secondaries and tree-shaped relations."""
    n = draw(st.integers(0, max_entities))
    ents = []
    for i in range(n):
        keys = draw(st.lists(WORDS, max_size=3, unique=True))
        attrs = {}
        for k in keys:
            attrs[k] = draw(st.one_of(st.just(None), WORDS, st.lists(WORDS, max_size=3)))
        ents.append(Entity(f"e{i}", draw(st.sampled_from(["Person", "Clothes", "Car"])),
                           i == 0 or draw(st.booleans()), {k: PropertyValue.of(v) for k, v in attrs.items()}))
    rels = []
    for i, e in enumerate(ents):
        if i and e.primary and draw(st.booleans()):
            rels.append(Relation("with", "e0", e.id))
    # each secondary gets at most one incoming relation from an earlier entity
    for i, e in enumerate(ents):
        if i and not e.primary and draw(st.booleans()):
            rels.append(Relation(draw(st.sampled_from(["wearing", "has", "near"])),
                                 f"e{draw(st.integers(0, i - 1))}", e.id))
    meta = draw(st.dictionaries(st.sampled_from(["time", "place", "source"]), WORDS, max_size=2))
    return PropertyRecord(draw(WORDS), draw(st.sampled_from(["text", "image", "video"])),
                          {k: PropertyValue.of(v) for k, v in meta.items()}, tuple(ents), tuple(rels))


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)

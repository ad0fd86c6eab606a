"""Deterministic synthetic dialogue corpus over a small generated KG.

Used by the test suite and runnable end to end through the CLI: the
writers emit the same TSV/JSONL formats the loaders consume. The design
keeps every learning task solvable from surface cues so the desk-scale
models can actually reach their quality bars:

  - entity names are unique two-token phrases and appear verbatim in the
    question and answer of their examples,
  - every relation has a distinctive cue phrasing on the answer side and
    a distinctive realization frame on the follow-up side,
  - tails are shared literals (years, names, genres) so the node pool is
    substantially larger than the entity set.

Every entity carries release_year plus two rotating extra relations, so
a question realized from a mismatched (entity, relation) pair lands on a
real edge only sometimes. That mismatch helper gives scoring pipelines a
"shuffled" system whose REL and TRUTH sit well below the faithful one.
"""

from __future__ import annotations

from .corpus import Example
from .generation import realize_question
from .kg import KnowledgeGraph, Triple
from .rngs import substream

ADJECTIVES = ("silver", "golden", "crimson", "ancient", "broken", "silent", "hollow", "velvet")
NOUNS = ("harbor", "forest", "engine", "letter", "garden", "mirror", "canyon")

# release_year is universal; each entity adds two of these, rotating.
EXTRA_RELATIONS = ("director", "written_by", "starring", "genre", "country", "spouse", "subject")

TAIL_POOLS = {
    "release_year": tuple(str(y) for y in range(1975, 1999, 2)),
    "director": (
        "Mara Quinn", "Theo Adler", "Ines Castillo", "Ruben Hoff", "Greta Lindqvist",
        "Pavel Drozd", "Sofia Marek", "Dmitri Volkov", "Clara Osei", "Henrik Stoltz",
    ),
    "written_by": (
        "Amos Reed", "Lydia Fontaine", "Oskar Brandt", "Nadia Petrova", "Elias Vance",
        "Ingrid Halvorsen", "Tomas Ruiz", "Beatrix Kohl", "Samuel Okafor", "Vera Lindholm",
    ),
    "starring": (
        "June Abarca", "Felix Moreau", "Hana Saito", "Viktor Emeka", "Paloma Reyes",
        "Casper Nylund", "Amara Diallo", "Bruno Keller", "Noor Haddad", "Stellan Marsh",
    ),
    "genre": ("noir", "western", "musical", "thriller", "documentary", "romance"),
    "country": ("Norway", "Portugal", "Argentina", "Kenya", "Vietnam", "Iceland", "Peru", "Austria"),
    "spouse": (
        "Edith Marlowe", "Card Winslow", "Rosa Delgado", "Emil Navarro",
        "Freya Bergman", "Jonas Tivoli", "Mireille Dubois", "Anton Skala",
    ),
    "subject": (
        "lighthouse keeping", "train robberies", "chess rivalries", "deep sea salvage",
        "glassblowing", "mountain rescue", "radio plays", "counterfeit maps",
    ),
}

ANSWER_CUES = {
    "release_year": "It was released in {tail}.",
    "director": "It was directed by {tail}.",
    "written_by": "It was written by {tail}.",
    "starring": "It starred {tail}.",
    "genre": "The genre is {tail}.",
    "country": "It comes from {tail}.",
    "spouse": "The spouse in question is {tail}.",
    "subject": "It is mostly about {tail}.",
}

FOLLOWUP_PREFIXES = ("", "", "", "By the way, ")


def entity_list(n_entities: int = 50) -> list[tuple[str, str]]:
    """(entity_id, canonical name) pairs with unique two-token names."""
    pairs = []
    for adj in ADJECTIVES:
        for noun in NOUNS:
            pairs.append((f"{adj}_{noun}", f"{adj.capitalize()} {noun.capitalize()}"))
    if n_entities > len(pairs):
        raise ValueError(f"at most {len(pairs)} synthetic entities available")
    return pairs[:n_entities]


def entity_relations(index: int) -> tuple[str, str, str]:
    """The three relations of entity number ``index``."""
    first = EXTRA_RELATIONS[index % len(EXTRA_RELATIONS)]
    second = EXTRA_RELATIONS[(index + 3) % len(EXTRA_RELATIONS)]
    return ("release_year", first, second)


def build_triples(n_entities: int = 50) -> list[Triple]:
    triples = []
    for i, (entity_id, _) in enumerate(entity_list(n_entities)):
        for relation in entity_relations(i):
            pool = TAIL_POOLS[relation]
            triples.append(Triple(entity_id, relation, pool[i % len(pool)]))
    return triples


def build_graph(n_entities: int = 50) -> KnowledgeGraph:
    surface = {eid: (name, []) for eid, name in entity_list(n_entities)}
    return KnowledgeGraph(build_triples(n_entities), surface)


def write_kg(triples_path, surface_path, n_entities: int = 50) -> None:
    """Write the synthetic graph in the TSV formats the loaders read."""
    with open(triples_path, "w", encoding="utf-8") as fh:
        fh.write("# head\trelation\ttail\n")
        for t in build_triples(n_entities):
            fh.write(f"{t.head}\t{t.relation}\t{t.tail}\n")
    with open(surface_path, "w", encoding="utf-8") as fh:
        fh.write("# entity_id\tcanonical\taliases...\n")
        for eid, name in entity_list(n_entities):
            fh.write(f"{eid}\t{name}\n")


def build_corpus(
    graph: KnowledgeGraph,
    n_examples: int = 500,
    seed: int = 0,
    n_entities: int = 50,
) -> list[Example]:
    """Dialogue examples whose follow-ups are realizer outputs, some with
    a politeness prefix so gold text is not always byte-equal to the
    realizer's."""
    entities = entity_list(n_entities)
    rng = substream(seed, "synthetic-corpus")
    examples = []
    for idx in range(n_examples):
        ent_idx = int(rng.integers(len(entities)))
        entity_id, name = entities[ent_idx]
        relations = entity_relations(ent_idx)
        relation = relations[idx % len(relations)]
        tail = TAIL_POOLS[relation][ent_idx % len(TAIL_POOLS[relation])]

        mentions = [entity_id]
        for _ in range(1 + idx % 2):
            other = ent_idx
            while other == ent_idx or entities[other][0] in mentions:
                other = int(rng.integers(len(entities)))
            mentions.append(entities[other][0])

        question = f"Tell me more about {name}."
        answer = ANSWER_CUES[relation].format(tail=tail) + f" We were discussing {name}."
        followup = FOLLOWUP_PREFIXES[idx % len(FOLLOWUP_PREFIXES)] + realize_question(
            graph, entity_id, relation
        )
        examples.append(
            Example(
                id=f"ex{idx:04d}",
                question=question,
                answer=answer,
                mentions=mentions,
                gold_entity=entity_id,
                gold_relation=relation,
                followup=followup,
            )
        )
    return examples


def realized_questions(
    examples: list[Example],
    graph: KnowledgeGraph,
    shift: int = 0,
) -> list[dict]:
    """Questions realized from each example's context, ready for scoring.

    With shift = 0 the question targets the example's own gold entity and
    relation. A nonzero shift keeps each context in place but takes the
    entity from the example ``shift`` positions over and the relation
    from ``2 * shift`` positions over. The two independent rotations
    matter: shuffling whole (entity, relation) pairs would still yield
    internally truthful questions, whereas decoupling them also lands
    many questions on edges the graph does not have.
    """
    out = []
    n = len(examples)
    for i, ex in enumerate(examples):
        entity = examples[(i + shift) % n].gold_entity
        relation = examples[(i + 2 * shift) % n].gold_relation
        question = realize_question(graph, entity, relation)
        out.append(
            {
                "id": ex.id,
                "context": {"question": ex.question, "answer": ex.answer},
                "question": question,
            }
        )
    return out

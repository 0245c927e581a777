"""Synthetic academic graph for offline runs, demos and benchmarks.

Nodes are papers, authors, fields and venues grouped into topical
communities. Every paper title is drawn from its topic's vocabulary and
its authors work in the same topic, so a paper and its true author share
vocabulary through both their own texts and their neighborhoods — which
is exactly the signal a content-aware scorer should pick up and a
position-based baseline cannot.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .graph import EdgeType, HetGraph, NodeType

__all__ = [
    "make_academic_graph",
    "make_disambiguation_tasks",
    "write_task_file",
]

RELATION_AUTHORED_BY = "authored_by"
RELATION_PUBLISHED_IN = "published_in"
RELATION_IN_FIELD = "in_field"
RELATION_CITES = "cites"

_WORD_BANK = """
spectral manifold kernel lattice entropy gradient tensor operator module sheaf
fusion plasma catalytic polymer membrane quantum photonic neural symbolic sparse
robust adaptive convex stochastic variational bayesian causal temporal spatial
graphical relational semantic syntactic lexical acoustic visual haptic inertial
thermal fluidic granular colloidal magnetic dielectric ferroic phononic excitonic
topological geometric algebraic arithmetic analytic combinatorial probabilistic
metabolic genomic proteomic synaptic cortical retinal vascular skeletal microbial
orbital stellar galactic planetary seismic glacial coastal atmospheric oceanic
cryptographic distributed concurrent transactional streaming compiled interpreted
recursive iterative amortized incremental parallel vectorized pipelined cached
""".split()

_NAME_FIRST = """
alva bren cyra doran elio fenna gale hiro iris jona kael lira mato nova orin
petra quin rana sef tula uma viggo wren xi yara zeno
""".split()

_NAME_LAST = """
ashford barrow calder dray ellison fairbanks grove holt ireton jessop kade
lockwood mercer north oakes prior quill rivers shaw thorne underhill vance
whitfield yates zeller
""".split()


@dataclass(frozen=True)
class SynthSpec:
    n_topics: int = 40
    papers_per_topic: int = 150
    authors_per_topic: int = 100
    fields_per_topic: int = 8
    words_per_topic: int = 10
    seed: int = 7


def _schema() -> tuple[list[NodeType], list[EdgeType]]:
    node_types = [
        NodeType("paper", 0, "PA"),
        NodeType("author", 1, "AU"),
        NodeType("field", 2, "FD"),
        NodeType("venue", 3, "VN"),
    ]
    edge_types = [
        EdgeType(RELATION_AUTHORED_BY, "paper", "author"),
        EdgeType(RELATION_PUBLISHED_IN, "paper", "venue"),
        EdgeType(RELATION_IN_FIELD, "paper", "field"),
        EdgeType(RELATION_CITES, "paper", "paper"),
    ]
    return node_types, edge_types


def make_academic_graph(spec: SynthSpec | None = None) -> HetGraph:
    """Build the topic-clustered graph. Default size is ~10^4 nodes."""
    spec = spec or SynthSpec()
    rng = np.random.default_rng(spec.seed)
    node_types, edge_types = _schema()

    nodes: list[tuple[str, str, str]] = []
    edges: list[tuple[str, str, str]] = []

    topic_words: list[list[str]] = []
    for t in range(spec.n_topics):
        words = rng.choice(len(_WORD_BANK), size=spec.words_per_topic, replace=False)
        topic_words.append([_WORD_BANK[i] for i in words])

    for t in range(spec.n_topics):
        words = topic_words[t]
        venue_key = f"v{t}"
        nodes.append((venue_key, "venue", f"journal of {words[0]} {words[1]} studies"))
        field_keys = []
        for f in range(spec.fields_per_topic):
            key = f"f{t}_{f}"
            field_keys.append(key)
            nodes.append((key, "field", f"{words[f % len(words)]} {words[(f + 1) % len(words)]}"))
        author_keys = []
        for a in range(spec.authors_per_topic):
            key = f"a{t}_{a}"
            author_keys.append(key)
            first = _NAME_FIRST[int(rng.integers(len(_NAME_FIRST)))]
            last = _NAME_LAST[int(rng.integers(len(_NAME_LAST)))]
            focus = words[int(rng.integers(len(words)))]
            other = words[int(rng.integers(len(words)))]
            nodes.append((key, "author", f"{first} {last} (works on {focus} and {other})"))
        paper_keys = []
        for p in range(spec.papers_per_topic):
            key = f"p{t}_{p}"
            paper_keys.append(key)
            length = int(rng.integers(4, 8))
            picks = rng.choice(len(words), size=min(length, len(words)), replace=False)
            title = " ".join(words[i] for i in picks)
            nodes.append((key, "paper", title))
            edges.append((key, venue_key, RELATION_PUBLISHED_IN))
            n_fields = int(rng.integers(2, 5))
            for i in rng.choice(len(field_keys), size=n_fields, replace=False):
                edges.append((key, field_keys[i], RELATION_IN_FIELD))
            n_authors = int(rng.integers(1, 4))
            for i in rng.choice(len(author_keys), size=n_authors, replace=False):
                edges.append((key, author_keys[i], RELATION_AUTHORED_BY))
            n_cites = int(rng.integers(0, 4))
            for _ in range(min(n_cites, p)):
                cited = paper_keys[int(rng.integers(p))]
                edges.append((key, cited, RELATION_CITES))

    return HetGraph(node_types, edge_types, nodes, edges)


def make_disambiguation_tasks(
    g: HetGraph,
    n_tasks: int = 40,
    candidates_per_task: int = 6,
    seed: int = 11,
) -> list[dict]:
    """Author-attribution tasks: the true author among off-topic decoys.

    Returned records use raw string ids, matching the task file format
    consumed by the CLI; candidates are shuffled so the truth position
    carries no signal.
    """
    rng = np.random.default_rng(seed)
    authored = g.edges_of_type(RELATION_AUTHORED_BY)
    authors = g.nodes_of_type("author")
    picks = rng.choice(len(authored), size=min(n_tasks, len(authored)), replace=False)
    tasks: list[dict] = []
    for i in sorted(picks):
        paper, truth = authored[int(i)]
        true_neighbors = set(g.neighbors(paper, RELATION_AUTHORED_BY))
        decoys: list[int] = []
        while len(decoys) < candidates_per_task - 1:
            a = authors[int(rng.integers(len(authors)))]
            if a not in true_neighbors and a not in decoys:
                decoys.append(a)
        candidates = decoys + [truth]
        order = rng.permutation(len(candidates))
        candidates = [candidates[int(j)] for j in order]
        tasks.append(
            {
                "source_id": g.key_of(paper),
                "relation": RELATION_AUTHORED_BY,
                "candidate_ids": [g.key_of(c) for c in candidates],
                "truth_id": g.key_of(truth),
            }
        )
    return tasks


def write_task_file(path: str, tasks: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for task in tasks:
            fh.write(json.dumps(task, sort_keys=True) + "\n")

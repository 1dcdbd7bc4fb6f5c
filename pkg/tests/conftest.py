import numpy as np
import pytest

from twoview.kb import KnowledgeBase, Triple


@pytest.fixture
def tiny_kb():
    """Three entities, two relations, two concepts, with every store filled."""
    kb = KnowledgeBase()
    for name in ("a", "b", "c"):
        kb.entities.add(name)
    for name in ("r1", "r2"):
        kb.relations.add(name)
    for name in ("x", "y"):
        kb.concepts.add(name)
    for name in ("subclass_of", "related_to"):
        kb.meta_relations.add(name)
    kb.instance.add(Triple(0, 0, 1))
    kb.instance.add(Triple(1, 0, 2))
    kb.instance.add(Triple(2, 1, 0))
    kb.ontology.add(Triple(0, 0, 1))
    kb.ontology.add(Triple(0, 1, 1))
    kb.links.add(0, 0)
    kb.links.add(1, 0)
    kb.links.add(2, 1)
    return kb


@pytest.fixture
def rng():
    return np.random.default_rng(0)

from collections import Counter

import numpy as np
import pytest

from povshift.baselines import (
    TREE_FEATURE_DIM,
    agreeing_pronoun,
    candidate_pos,
    load_tree_ranker,
    most_common_chooser,
    most_common_select,
    only_pronouns_choice,
    pronoun_chooser,
    random_chooser,
    random_select,
    save_tree_ranker,
    train_tree_ranker,
    tree_accuracy,
    tree_features,
    tree_training_matrix,
)
from povshift.candidates import narrow_by_case, np_candidate, pronoun_candidate
from povshift.conversion import ChainState, run_selection
from povshift.core import CaseClass, Gender, Mention, Number, Role, slot_case
from povshift.ranker import HashEmbeddingProvider, ModelError
from povshift.synthetic import synthetic_examples, synthetic_plan

NOM, ACC, POSS, REFL = CaseClass.NOMINATIVE, CaseClass.ACCUSATIVE, CaseClass.POSSESSIVE, CaseClass.REFLEXIVE


def test_random_select_is_uniform_and_seeded():
    rng = np.random.Generator(np.random.PCG64(7))
    draws = Counter(random_select(["a", "b", "c", "d"], rng) for _ in range(8000))
    assert set(draws) == {"a", "b", "c", "d"}
    assert all(abs(n / 8000 - 0.25) < 0.02 for n in draws.values())
    with pytest.raises(ValueError):
        random_select([], rng)


def test_random_chooser_repeats_with_the_same_seed(synthetic_test):
    plan = synthetic_plan(synthetic_test[0])
    assert run_selection(plan, random_chooser(3)) == run_selection(plan, random_chooser(3))


@pytest.mark.parametrize("slot, gender, number, original, expected", [
    (NOM, Gender.MASCULINE, Number.SINGULAR, "I", "he"),
    (ACC, Gender.FEMININE, Number.SINGULAR, "me", "her"),
    (POSS, Gender.FEMININE, Number.SINGULAR, "my", "her"),
    (POSS, Gender.FEMININE, Number.SINGULAR, "mine", "hers"),
    (REFL, Gender.MASCULINE, Number.SINGULAR, "myself", "himself"),
    (NOM, Gender.UNKNOWN, Number.PLURAL, "we", "they"),
    (POSS, Gender.UNKNOWN, Number.PLURAL, "ours", "theirs"),
    (NOM, Gender.UNKNOWN, Number.SINGULAR, "I", None),
])
def test_agreeing_pronoun(slot, gender, number, original, expected):
    assert agreeing_pronoun(slot, gender, number, original) == expected


def test_only_pronouns_falls_back_to_a_compatible_candidate():
    cands = [np_candidate("Ann", "name"), pronoun_candidate("she")]
    me = Mention("f", (3, 3), "me", ACC, Role.OBJECT)
    assert only_pronouns_choice(cands, me, Gender.FEMININE) == ("Ann", True)
    i = Mention("f", (0, 0), "I", NOM, Role.SUBJECT)
    assert only_pronouns_choice(cands, i, Gender.FEMININE) == ("she", False)
    with pytest.raises(ValueError):
        only_pronouns_choice([], i, Gender.FEMININE)


def test_pronoun_chooser_on_a_synthetic_doc(synthetic_test):
    sd = synthetic_test[0]
    plan = synthetic_plan(sd)
    genders = {c.chain_id: sd.spec(c.chain_id).gender for c in sd.document.chains}
    state = ChainState()
    run_selection(plan, pronoun_chooser(genders), state=state)
    checked = 0
    for m in plan.scheduled:
        narrowed = [c.string for c in narrow_by_case(plan.candidate_sets[m.chain_id], m)]
        target = agreeing_pronoun(slot_case(m.string, m.case_class, m.grammatical_role), genders[m.chain_id],
                                  original=m.string)
        if len(narrowed) > 1 and target in narrowed:
            assert state.selections[m.id] == target
            checked += 1
    assert checked >= 5


def test_most_common_select():
    assert most_common_select(None, ["Nick", "he", "he", "his"]) == "he"
    # ties go to the canonically first string: names before pronouns
    assert most_common_select(None, ["he", "Nick"]) == "Nick"
    assert most_common_select(["him", "Bo"], []) == "Bo"
    with pytest.raises(ValueError):
        most_common_select(None, [])


def test_most_common_chooser_is_constant_per_entity(synthetic_test):
    sd = synthetic_test[0]
    plan = synthetic_plan(sd)
    gold = {c.chain_id: [m.string for m in c.mentions] for c in sd.document.chains}
    chooser = most_common_chooser(gold)
    run_selection(plan, chooser)
    assert chooser(None, [], sd.document.chains[0].mentions[0]) == chooser(None, [], sd.document.chains[0].mentions[-1])


@pytest.mark.parametrize("text, tag", [("he", "PRP"), ("his", "PRP$"), ("he himself", "PRP"),
                                       ("Nick's", "NNP"), ("the doctor", "NN")])
def test_candidate_pos(text, tag):
    assert candidate_pos(text) == tag


@pytest.fixture(scope="module")
def tree_examples(synthetic_train):
    return synthetic_examples(synthetic_train[:4])


def test_tree_features_layout(tree_examples):
    ex = tree_examples[5]
    provider = HashEmbeddingProvider()
    feats = [tree_features(ex, c, provider) for c in ex.candidate_set]
    assert all(f.shape == (TREE_FEATURE_DIM,) for f in feats)
    assert TREE_FEATURE_DIM == 3 * 10 * 20 + 1 + 10 + 6 + 1 + 10
    # distinct candidates give distinct rows
    assert len({f.tobytes() for f in feats}) == len(feats)
    X, y = tree_training_matrix(tree_examples, provider)
    assert X.shape[1] == TREE_FEATURE_DIM and y.sum() == sum(ex.gold_string is not None for ex in tree_examples)


@pytest.mark.parametrize("variant", ["tree", "single_tree", "forest", "gbt"])
def test_tree_variants_fit(tree_examples, variant):
    model = train_tree_ranker(tree_examples, variant, seed=0)
    assert tree_accuracy(model, tree_examples) > 0.5


def test_unknown_variant_and_degenerate_data(tree_examples):
    with pytest.raises(ValueError, match="unknown tree variant"):
        train_tree_ranker(tree_examples, "bagging")
    with pytest.raises(ValueError, match="positive and one negative"):
        train_tree_ranker([], "tree")


def test_tree_save_and_load(tree_examples, tmp_path):
    model = train_tree_ranker(tree_examples, "tree", seed=0)
    path = tmp_path / "t.povm"
    save_tree_ranker(model, path)
    loaded = load_tree_ranker(path)
    assert loaded.variant == "single_tree"
    for ex in tree_examples[:10]:
        assert np.array_equal(loaded.probabilities(ex), model.probabilities(ex))
    save_tree_ranker(loaded, tmp_path / "again.povm")
    assert (tmp_path / "again.povm").read_bytes() == path.read_bytes()
    with pytest.raises(ModelError, match="trained with provider"):
        load_tree_ranker(path, HashEmbeddingProvider(salt="v2"))

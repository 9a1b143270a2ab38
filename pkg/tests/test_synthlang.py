import pytest

from fbnav.envgraph import generate_env, path_length
from fbnav.synthlang import (GenerationExhausted, basic_style,
                             generate_corpus, generate_instruction,
                             load_corpus, make_style, save_corpus)

from conftest import dijkstra_oracle

VOCAB = ["door", "lamp", "sofa", "sink", "window", "stairs", "plant", "rug"]


def test_make_style_identity_at_rate_zero():
    sm = make_style(1, VOCAB, 0.0)
    assert all(sm.mapping[t] == t for t in VOCAB)


def test_make_style_total_substitution_at_rate_one():
    sm = make_style(1, VOCAB, 1.0)
    assert all(sm.mapping[t] != t for t in VOCAB)
    assert not set(sm.mapping.values()) & set(VOCAB)


def test_make_style_deterministic():
    assert make_style(4, VOCAB, 0.5) == make_style(4, VOCAB, 0.5)


def test_make_style_distinct_seeds_disjoint_synonyms():
    a = make_style(1, VOCAB, 1.0)
    b = make_style(2, VOCAB, 1.0)
    assert not set(a.mapping.values()) & set(b.mapping.values())


def test_make_style_rejects_bad_rate():
    with pytest.raises(ValueError):
        make_style(1, VOCAB, 1.5)


@pytest.fixture(scope="module")
def env():
    return generate_env(seed=2, n_nodes=40)


def test_instruction_path_length_in_range(env):
    sm = basic_style(env.landmark_vocab)
    for seed in range(30):
        ins = generate_instruction(env, sm, seed, (5, 7))
        assert 5 <= len(ins.gt_path) <= 7
        assert ins.gt_path[0] == ins.start
        assert ins.gt_path[-1] == ins.goal


def test_identity_style_tokens_are_raw_landmarks(env):
    sm = basic_style(env.landmark_vocab)
    ins = generate_instruction(env, sm, 11, (5, 7))
    for tok, node in zip(ins.tokens, ins.gt_path):
        assert tok in env.node(node).landmarks


def test_token_count_equals_path_node_count(env):
    sm = make_style(9, env.landmark_vocab, 0.7)
    for seed in range(20):
        ins = generate_instruction(env, sm, seed, (5, 7))
        assert len(ins.tokens) == len(ins.gt_path)


def test_gt_paths_are_shortest():
    g = generate_env(seed=1, n_nodes=25, model="grid")
    sm = basic_style(g.landmark_vocab)
    for ins in generate_corpus(g, sm, seed=0, n=500, len_range=(2, 9)):
        w_oracle, _ = dijkstra_oracle(g, ins.start, ins.goal)
        assert path_length(g, list(ins.gt_path)) == pytest.approx(w_oracle)


def test_generation_exhausted():
    g = generate_env(seed=1, n_nodes=4, model="grid")
    sm = basic_style(g.landmark_vocab)
    with pytest.raises(GenerationExhausted):
        generate_instruction(g, sm, 1, (40, 50), max_tries=20)


def test_vocab_overlap_tracks_synonym_rate(env):
    rate = 0.75
    sm = make_style(21, env.landmark_vocab, rate)
    kept = sum(1 for t in env.landmark_vocab if sm.mapping[t] == t)
    overlap = kept / len(env.landmark_vocab)
    assert abs(overlap - (1 - rate)) < 0.2


def test_corpus_roundtrip(tmp_path, env):
    sm = make_style(3, env.landmark_vocab, 0.5)
    corpus = generate_corpus(env, sm, seed=5, n=10)
    p = tmp_path / "corpus.jsonl"
    save_corpus(corpus, p)
    assert load_corpus(p) == corpus

from fractions import Fraction

import numpy as np
import pytest

import oracles
from pgsim.core import Distribution, joint_step, validate_model
from pgsim.harness import (CONSTRUCTIONS, _rng, duplicate_states, forward_split,
                           random_model)
from pgsim.lifting import (ForwardRelationTable, RelationTable, check_weight_function,
                           mix_weight_functions)
from pgsim.simcheck import (check_mode, compute_bisimulation, compute_forward_simulation,
                            compute_simulation, embed_sim_as_forward, forward_candidates,
                            local_sim_condition, verify_forward_simulation,
                            verify_simulation)


@pytest.mark.parametrize("seed", range(6))
def test_identity_is_a_simulation(seed):
    G = random_model(3, 2, 1, seed)
    R = RelationTable.identity(G.states)
    assert verify_simulation(G, G, R)["verified"]
    assert R <= compute_simulation(G, G, samples=0).relation


@pytest.mark.parametrize("kind", sorted(CONSTRUCTIONS))
@pytest.mark.parametrize("seed", range(4))
def test_constructions_keep_every_original_state_simulated(kind, seed):
    G = random_model(3, 2, 1, seed)
    H = CONSTRUCTIONS[kind](G, _rng([seed, 1]))
    R = compute_simulation(G, H, samples=32, seed=seed).relation
    assert verify_simulation(G, H, R, samples=32, seed=seed)["verified"]
    assert {s for s, _ in R} == set(G.states)


def test_relation_with_label_mismatch_rejected():
    G = next(g for g in (random_model(3, 2, 1, k) for k in range(20)) if len(set(g.labels.values())) > 1)
    bad = [(s, t) for s in G.states for t in G.states if G.label(s) != G.label(t)]
    assert bad
    out = verify_simulation(G, G, RelationTable(bad[:1]))
    assert out == {"verified": False, "pair": list(bad[0]), "reason": "labels differ"}


def test_pure_antagonist_reduction_covers_mixed_moves():
    # a mixed antagonist move is answered by mixing the pure blocks
    for seed in range(20):
        G = random_model(3, 2, 1, seed)
        H = duplicate_states(G, _rng([seed, 1]))
        R = compute_simulation(G, H, samples=0).relation
        rng = np.random.default_rng(seed)
        for s, t in sorted(R)[:3]:
            res = local_sim_condition(G, H, s, t, R)
            assert res.ok
            for cert in res.certificates:
                w = rng.integers(1, 5, size=len(H.actions_II))
                nu = {b: Fraction(int(x), int(w.sum())) for b, x in zip(H.actions_II, w)}
                blocks = [cert.blocks[b] for b in H.actions_II]
                pi2: dict = {}
                for (p2, _), b in zip(blocks, H.actions_II):
                    for a, x in p2.items():
                        pi2[a] = pi2.get(a, 0) + nu[b] * x
                delta = joint_step(G, s, cert.move, Distribution(pi2))
                theta = joint_step(H, t, cert.response, Distribution(nu))
                wmix = mix_weight_functions([wf for _, wf in blocks], [nu[b] for b in H.actions_II])
                check_weight_function(R, delta, theta, wmix)


def test_embedding_of_a_simulation_is_a_forward_simulation():
    for seed in range(6):
        G = random_model(3, 2, 1, seed)
        H = duplicate_states(G, _rng([seed, 1]))
        R = compute_simulation(G, H, samples=0).relation
        assert verify_forward_simulation(G, H, embed_sim_as_forward(R))["verified"]


def test_fig2_forward_but_not_alternating(fig2):
    G, H, table = fig2
    sim = compute_simulation(G, H)
    assert ("s1", "t1") not in sim.relation
    assert any(p == ("s1", "t1") for p, _, _ in sim.removed)
    assert verify_forward_simulation(G, H, table, samples=64)["verified"]
    kept, removed = compute_forward_simulation(G, H, table)
    assert list(kept) == list(table) and not removed


def test_forward_pruning_drops_unsupported_pairs(fig2):
    G, H, table = fig2
    junk = [("s1", Distribution({"t2": Fraction(1, 2), "t4": Fraction(1, 2)})),
            ("s3", Distribution.point("t2"))]
    kept, removed = compute_forward_simulation(G, H, list(table) + junk)
    assert set(kept) == set(table)
    assert set(removed) == set(junk)


def test_forward_rejects_label_mismatch(fig2):
    G, H, table = fig2
    bad = ForwardRelationTable(list(table) + [("s6", Distribution.point("t7"))])
    out = verify_forward_simulation(G, H, bad)
    assert not out["verified"] and "label" in out["reason"]


def test_forward_candidates_are_label_consistent(fig2):
    G, H, _ = fig2
    for s, d in forward_candidates(G, H, depth=2):
        assert all(H.label(u) == G.label(s) for u in d)


@pytest.mark.parametrize("seed", range(5))
def test_forward_split_tables_verify(seed):
    G = random_model(3, 2, 1, seed)
    left, right, table, _ = forward_split(G, _rng([seed, 4]))
    assert verify_forward_simulation(left, right, table, samples=16, seed=seed)["verified"]
    assert ("r", Distribution.point("r")) in table


@pytest.mark.parametrize("seed", range(4))
def test_bisimulation_is_symmetric(seed):
    G = random_model(3, 2, 1, seed)
    H = duplicate_states(G, _rng([seed, 2]))
    B = compute_bisimulation(G, H).relation
    assert verify_simulation(G, H, B)["verified"]
    assert verify_simulation(H, G, B.inverse())["verified"]
    assert B <= compute_simulation(G, H).relation


@pytest.mark.parametrize("seed", range(4))
def test_player_two_orientation(seed):
    G = random_model(3, 2, 1, seed)
    H = CONSTRUCTIONS["weaker-antagonist"](G, _rng([seed, 1]))
    for_II = compute_simulation(G, H, "II", samples=0).relation
    swapped = compute_simulation(G.swap_players(), H.swap_players(), "I", samples=0).relation
    assert for_II == swapped


def test_sampled_mode_is_deterministic():
    G = random_model(3, 3, 1, 9)
    H = duplicate_states(G, _rng([9, 1]))
    a = compute_simulation(G, H, samples=16, seed=5).to_json()
    b = compute_simulation(G, H, samples=16, seed=5).to_json()
    assert a == b
    assert check_mode(0) == "pure-protagonist exact"
    assert "16" in check_mode(16)


def _turn_based(rng, n, name):
    owner = {f"{name}{i}": ("I" if rng.random() < 0.5 else "II") for i in range(n)}
    states = list(owner)
    trans = {}
    for s in states:
        pick = {x: states[int(rng.integers(n))] for x in ("a0", "a1", "b0", "b1")}
        for a in ("a0", "a1"):
            for b in ("b0", "b1"):
                trans[(s, a, b)] = {pick[a] if owner[s] == "I" else pick[b]: 1}
    labels = {s: ["p"] for s in states if rng.random() < 0.5}
    return validate_model({"name": name, "states": states, "props": ["p"], "labels": labels,
                           "actions": {"I": ["a0", "a1"], "II": ["b0", "b1"]}, "transitions": trans})


def test_deterministic_turn_based_matches_classical_alternating_simulation():
    proper = 0
    for seed in range(30):
        rng = np.random.default_rng([seed, 77])
        G, H = _turn_based(rng, 3, "g"), _turn_based(rng, 4, "h")
        got = set(compute_simulation(G, H, samples=0).relation)
        want = oracles.classical_alternating_simulation(G, H)
        assert got == want, seed
        same_label = {(s, t) for s in G.states for t in H.states if G.labels[s] == H.labels[t]}
        proper += bool(want) and want != same_label
    assert proper >= 5

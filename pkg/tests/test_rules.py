"""Rule-base structure, lexicographic evaluation, and versioning."""

import random

import pytest

from siovsim.errors import (
    ConfigurationError,
    RuleValidationError,
    VersionError,
)
from siovsim.rules import (
    Law,
    OutcomeFlags,
    PredicateKind,
    RuleBase,
    RuleBaseHistory,
    SelScore,
    Verdict,
    VerdictStatus,
    admissible_actions,
    default_rulebase,
    evaluate,
    sel_compare,
    update_rulebase,
)

RB = default_rulebase()


def test_default_rulebase_shape():
    assert RB.version == 1
    assert [law.priority for law in RB.laws] == [1, 2, 3, 4, 5, 6]
    assert RB.laws[0].law_id == "no-human-injury"
    assert RB.laws[-1].predicate_kind is PredicateKind.LEAST_HARM_FALLBACK
    assert RB.law_at(3).law_id == "obey-driver"


def test_rulebase_rejects_duplicate_priorities():
    with pytest.raises(RuleValidationError):
        RuleBase(version=1, laws=(
            Law(1, "a", PredicateKind.NO_HUMAN_INJURY),
            Law(1, "b", PredicateKind.NO_ANIMAL_INJURY),
        ))


def test_rulebase_rejects_gapped_priorities():
    with pytest.raises(RuleValidationError):
        RuleBase(version=1, laws=(
            Law(1, "a", PredicateKind.NO_HUMAN_INJURY),
            Law(3, "b", PredicateKind.NO_ANIMAL_INJURY),
        ))


def test_rulebase_rejects_duplicate_ids():
    with pytest.raises(RuleValidationError):
        RuleBase(version=1, laws=(
            Law(1, "same", PredicateKind.NO_HUMAN_INJURY),
            Law(2, "same", PredicateKind.NO_ANIMAL_INJURY),
        ))


def test_law_priority_must_be_positive():
    with pytest.raises(RuleValidationError):
        Law(0, "bad", PredicateKind.NO_HUMAN_INJURY)


def test_clean_outcome_is_permitted():
    verdict = evaluate(OutcomeFlags(), RB)
    assert verdict.permitted
    assert verdict.violated_law is None
    assert verdict.rulebase_version == 1


def test_highest_priority_violation_wins():
    outcome = OutcomeFlags(injures_human=True, injures_animal=True,
                           destroys_self=True)
    verdict = evaluate(outcome, RB)
    assert verdict.status is VerdictStatus.FORBIDDEN
    assert verdict.violated_law == "no-human-injury"
    assert verdict.violated_priority == 1


def test_each_flag_maps_to_its_law():
    cases = [
        (OutcomeFlags(injures_human=True), "no-human-injury", 1),
        (OutcomeFlags(injures_animal=True), "no-animal-injury", 2),
        (OutcomeFlags(contradicts_driver_order=True), "obey-driver", 3),
        (OutcomeFlags(destroys_self=True), "self-preservation", 4),
        (OutcomeFlags(violates_traffic_or_papa=True),
         "traffic-papa-compliance", 5),
    ]
    for outcome, law_id, priority in cases:
        verdict = evaluate(outcome, RB)
        assert (verdict.violated_law, verdict.violated_priority) == (law_id, priority)


def test_order_disobedience_excused_by_higher_law():
    # Disobeying the driver is excused when obeying would injure a human:
    # the "except where such orders conflict" escape.
    outcome = OutcomeFlags(contradicts_driver_order=True,
                           order_obedience_violates=1)
    assert evaluate(outcome, RB).permitted


def test_order_disobedience_not_excused_by_lower_law():
    # Obedience merely conflicting with self-preservation (priority 4,
    # below obedience's 3) does not excuse ignoring the driver.
    outcome = OutcomeFlags(contradicts_driver_order=True,
                           order_obedience_violates=4)
    verdict = evaluate(outcome, RB)
    assert verdict.violated_law == "obey-driver"


def test_self_sacrifice_excused_by_higher_law():
    outcome = OutcomeFlags(destroys_self=True, self_protection_violates=1)
    assert evaluate(outcome, RB).permitted


def test_self_sacrifice_excuse_needs_strictly_higher_law():
    outcome = OutcomeFlags(destroys_self=True, self_protection_violates=4)
    assert evaluate(outcome, RB).violated_law == "self-preservation"


def test_excused_middle_law_still_checks_the_rest():
    # The obedience violation is excused, but the traffic violation
    # further down is not.
    outcome = OutcomeFlags(
        contradicts_driver_order=True,
        order_obedience_violates=1,
        violates_traffic_or_papa=True,
    )
    verdict = evaluate(outcome, RB)
    assert verdict.violated_law == "traffic-papa-compliance"


def test_evaluate_rejects_empty_rulebase():
    with pytest.raises((ConfigurationError, RuleValidationError)):
        evaluate(OutcomeFlags(), RuleBase(version=1, laws=()))


def test_verdict_invariant():
    with pytest.raises(RuleValidationError):
        Verdict(status=VerdictStatus.FORBIDDEN, rulebase_version=1)
    with pytest.raises(RuleValidationError):
        Verdict(status=VerdictStatus.PERMITTED, rulebase_version=1,
                violated_law="x", violated_priority=1)


def test_admissible_prefers_clean_candidates():
    pairs = [
        ("hit-human", OutcomeFlags(injures_human=True)),
        ("hit-animal", OutcomeFlags(injures_animal=True)),
        ("clean", OutcomeFlags()),
    ]
    assert admissible_actions(pairs, RB) == ["clean"]


def test_admissible_falls_back_to_least_severe():
    pairs = [
        ("hit-human", OutcomeFlags(injures_human=True)),
        ("hit-animal", OutcomeFlags(injures_animal=True)),
        ("break-traffic", OutcomeFlags(violates_traffic_or_papa=True)),
    ]
    # Everything violates something; the traffic offence (priority 5)
    # is the least binding violation, so it alone survives.
    assert admissible_actions(pairs, RB) == ["break-traffic"]


def test_admissible_keeps_all_equally_severe_violators():
    pairs = [
        ("a", OutcomeFlags(injures_human=True)),
        ("b", OutcomeFlags(injures_human=True)),
    ]
    assert admissible_actions(pairs, RB) == ["a", "b"]


def test_admissible_rejects_empty_input():
    with pytest.raises(ConfigurationError):
        admissible_actions([], RB)


def test_admissible_never_empty_randomized():
    rng = random.Random(97)
    flags = [
        OutcomeFlags(),
        OutcomeFlags(injures_human=True),
        OutcomeFlags(injures_animal=True),
        OutcomeFlags(contradicts_driver_order=True),
        OutcomeFlags(destroys_self=True),
        OutcomeFlags(violates_traffic_or_papa=True),
    ]
    for _ in range(300):
        pairs = [
            (i, rng.choice(flags)) for i in range(rng.randint(1, 6))
        ]
        result = admissible_actions(pairs, RB)
        assert result
        # Survivors are all equally severe (or all clean).
        verdicts = [evaluate(f, RB) for i, f in pairs if i in result]
        priorities = {v.violated_priority for v in verdicts}
        assert len(priorities) == 1


def test_sel_compare_orders_lexicographically():
    safe = SelScore(0.0, 0.5, 100.0)
    risky = SelScore(0.2, 0.0, 0.0)
    assert sel_compare(safe, risky) == -1
    assert sel_compare(risky, safe) == 1
    assert sel_compare(safe, SelScore(0.0, 0.5, 100.0)) == 0
    # Human danger dominates; vehicle danger breaks the tie; distance last.
    assert sel_compare(SelScore(0.1, 0.9, 0.0), SelScore(0.1, 0.8, 50.0)) == 1
    assert sel_compare(SelScore(0.1, 0.8, 10.0), SelScore(0.1, 0.8, 50.0)) == -1


def test_sel_score_validates_probabilities():
    with pytest.raises(ConfigurationError):
        SelScore(1.5, 0.0, 0.0)
    with pytest.raises(ConfigurationError):
        SelScore(0.0, -0.1, 0.0)
    with pytest.raises(ConfigurationError):
        SelScore(0.0, 0.0, -1.0)


def test_update_requires_increasing_version():
    with pytest.raises(VersionError):
        update_rulebase(RB, RB.laws, 1)
    with pytest.raises(VersionError):
        update_rulebase(RB, RB.laws, 0)
    updated = update_rulebase(RB, RB.laws, 2)
    assert updated.version == 2
    assert updated.community_id == RB.community_id


def test_history_keeps_every_revision():
    history = RuleBaseHistory(RB)
    trimmed = RB.laws[:5]
    history.publish(trimmed, 2)
    history.publish(RB.laws, 5)  # versions may skip, never repeat
    assert history.versions() == [1, 2, 5]
    assert history.latest.version == 5
    assert len(history.get(2).laws) == 5
    assert len(history.get(1).laws) == 6
    with pytest.raises(VersionError):
        history.get(3)
    with pytest.raises(VersionError):
        history.publish(RB.laws, 4)


def test_old_revision_still_evaluates_old_way():
    # A community drops the animal-protection law in v2; replaying a
    # v1 decision must still see it.
    history = RuleBaseHistory(RB)
    without_animals = tuple(
        Law(i + 1, law.law_id, law.predicate_kind, law.description)
        for i, law in enumerate(l for l in RB.laws if l.law_id != "no-animal-injury")
    )
    history.publish(without_animals, 2)
    outcome = OutcomeFlags(injures_animal=True)
    assert evaluate(outcome, history.get(1)).violated_law == "no-animal-injury"
    assert evaluate(outcome, history.get(2)).permitted

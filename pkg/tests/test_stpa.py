import pytest

from hoversil.stpa import (
    DanglingReferenceError,
    DuplicateIdError,
    ModelSyntaxError,
    UcaCategory,
    check_completeness,
    load_model,
    load_bundled_model,
    serialize,
    trace_to_losses,
    uca_candidate_matrix,
)

MINI = """
loss L-1:
  description: broken airframe

hazard H-1:
  description: too close to things
  losses: L-1

constraint SC-1:
  text: keep clear
  hazard: H-1
  parameters: distance_m=2.0

action Motor commands:
  source: controller
  target: actuators

uca UCA-1:
  action: Motor commands
  category: NotProviding
  context: while airborne
  hazards: H-1

scenario S-1:
  class: 1
  ucas: UCA-1
  description: commands withheld
"""


class TestParser:
    def test_empty_document_is_valid(self):
        g = load_model("")
        assert not g.losses and not g.hazards and not g.ucas

    def test_minimal_model(self):
        g = load_model(MINI)
        assert g.hazards["H-1"].losses == {"L-1"}
        assert g.constraints["SC-1"].parameter("distance_m") == 2.0
        assert g.ucas["UCA-1"].category is UcaCategory.NOT_PROVIDING
        assert g.scenarios["S-1"].scenario_class == 1

    def test_dangling_loss_reference(self):
        doc = "hazard H-1:\n  description: x\n  losses: L-9\n"
        with pytest.raises(DanglingReferenceError) as err:
            load_model(doc)
        assert "L-9" in str(err.value)

    def test_duplicate_id(self):
        doc = "loss L-1:\n  description: a\n\nloss L-1:\n  description: b\n"
        with pytest.raises(DuplicateIdError):
            load_model(doc)

    def test_syntax_error_reports_line_and_column(self):
        doc = "loss L-1:\n  description: a\n\nthis is not a header\n"
        with pytest.raises(ModelSyntaxError) as err:
            load_model(doc)
        assert err.value.line == 4
        assert "line 4" in str(err.value)

    def test_bad_category_rejected(self):
        doc = MINI.replace("category: NotProviding", "category: Sometimes")
        with pytest.raises(ModelSyntaxError) as err:
            load_model(doc)
        assert "Sometimes" in str(err.value)

    def test_bad_id_form_rejected(self):
        with pytest.raises(ModelSyntaxError):
            load_model("loss L-0:\n  description: ids start at 1\n")

    def test_field_outside_block(self):
        with pytest.raises(ModelSyntaxError) as err:
            load_model("  description: floating\n")
        assert err.value.line == 1

    def test_scenario_class_bounds(self):
        doc = MINI.replace("class: 1", "class: 5")
        with pytest.raises(ModelSyntaxError):
            load_model(doc)


class TestRoundTrip:
    def test_serialize_reparses_identically(self):
        g = load_model(MINI)
        again = load_model(serialize(g))
        assert again == g

    def test_bundled_model_round_trip(self):
        g = load_bundled_model()
        assert load_model(serialize(g)) == g


class TestCompleteness:
    def test_bundled_model_passes_all_rules(self):
        report = check_completeness(load_bundled_model())
        assert report.all_passed
        assert [r.rule for r in report.results] == ["a", "b", "c", "d", "e"]

    def test_hazard_without_loss_fails_rule_a(self):
        doc = "hazard H-1:\n  description: floating hazard\n  losses:\n"
        report = check_completeness(load_model(doc))
        assert not report.result("a").passed
        assert "H-1" in report.result("a").failures

    def test_action_without_uca_or_waiver_fails_rule_e(self):
        doc = "action Landing pad position:\n  source: a\n  target: b\n"
        report = check_completeness(load_model(doc))
        assert report.result("e").failures == ("Landing pad position",)

    def test_waiver_satisfies_rule_e(self):
        doc = (
            "action Landing pad position:\n  source: a\n  target: b\n\n"
            "waiver Landing pad position:\n  reason: out of scope\n"
        )
        report = check_completeness(load_model(doc))
        assert report.result("e").passed


class TestBundledModelContent:
    def test_entity_counts(self):
        g = load_bundled_model()
        assert len(g.losses) == 4
        assert len(g.hazards) == 6
        assert len(g.constraints) == 6
        assert len(g.ucas) == 8

    def test_hazard_loss_links(self):
        g = load_bundled_model()
        full = {"L-1", "L-2", "L-3", "L-4"}
        assert g.hazards["H-1"].losses == {"L-1", "L-2", "L-4"}
        assert g.hazards["H-2"].losses == full
        assert g.hazards["H-3"].losses == full
        assert g.hazards["H-4"].losses == full
        assert g.hazards["H-5"].losses == {"L-3", "L-4"}
        assert g.hazards["H-6"].losses == full

    def test_constraint_hazard_pairing(self):
        g = load_bundled_model()
        assert {sc.id: sc.hazard for sc in g.constraints.values()} == {
            f"SC-{i}": f"H-{i}" for i in range(1, 7)
        }

    def test_uca_hazard_links(self):
        g = load_bundled_model()
        wide = {f"H-{i}" for i in range(1, 7)}
        assert g.ucas["UCA-1"].hazards == {"H-3", "H-4", "H-6"}
        assert g.ucas["UCA-2"].hazards == {"H-3", "H-4", "H-6"}
        assert g.ucas["UCA-3"].hazards == {"H-3", "H-4", "H-6"}
        assert g.ucas["UCA-4"].hazards == {"H-4"}
        assert g.ucas["UCA-5"].hazards == wide
        assert g.ucas["UCA-6"].hazards == wide
        assert g.ucas["UCA-7"].hazards == {"H-1", "H-4"}
        assert g.ucas["UCA-8"].hazards == wide

    def test_scenario_classes_bundled(self):
        g = load_bundled_model()
        classes = {s.scenario_class for s in g.scenarios.values()}
        assert classes == {1, 2}  # classes 3 and 4 are representable but not instantiated


class TestMatrix:
    def test_pad_position_matrix(self):
        g = load_bundled_model()
        m = uca_candidate_matrix(g, "Landing pad position")
        assert m[UcaCategory.NOT_PROVIDING] == {"UCA-1"}
        assert m[UcaCategory.PROVIDING] == {"UCA-2"}
        assert m[UcaCategory.TOO_EARLY_LATE_OUT_OF_ORDER] == {"UCA-3"}
        assert m[UcaCategory.STOPPED_TOO_SOON_APPLIED_TOO_LONG] == {"UCA-4"}

    def test_motor_commands_matrix(self):
        g = load_bundled_model()
        m = uca_candidate_matrix(g, "Motor commands")
        assert m[UcaCategory.NOT_PROVIDING] == {"UCA-5"}
        assert m[UcaCategory.PROVIDING] == {"UCA-6", "UCA-7"}
        # the timing cell holds UCA-8, recorded with its merge note
        assert m[UcaCategory.TOO_EARLY_LATE_OUT_OF_ORDER] == {"UCA-8"}
        assert m[UcaCategory.STOPPED_TOO_SOON_APPLIED_TOO_LONG] == set()
        assert g.ucas["UCA-8"].note != ""

    def test_matrix_partitions_action_ucas(self):
        g = load_bundled_model()
        for action in ("Landing pad position", "Motor commands"):
            m = uca_candidate_matrix(g, action)
            all_ids = [i for cell in m.values() for i in cell]
            assert len(all_ids) == len(set(all_ids))
            assert set(all_ids) == {u.id for u in g.ucas_of_action(action)}

    def test_waived_action_has_empty_cells(self):
        g = load_bundled_model()
        m = uca_candidate_matrix(g, "Flight mode")
        assert all(cell == frozenset() for cell in m.values())

    def test_unknown_action(self):
        with pytest.raises(KeyError):
            uca_candidate_matrix(load_bundled_model(), "Nonexistent action")


class TestTrace:
    def test_h4_reaches_all_losses(self):
        g = load_bundled_model()
        assert trace_to_losses(g, {"H-4"}) == {"L-1", "L-2", "L-3", "L-4"}

    def test_h5_reaches_data_losses(self):
        g = load_bundled_model()
        assert trace_to_losses(g, {"H-5"}) == {"L-3", "L-4"}

    def test_empty_input(self):
        assert trace_to_losses(load_bundled_model(), set()) == frozenset()

    def test_unknown_hazard(self):
        with pytest.raises(KeyError):
            trace_to_losses(load_bundled_model(), {"H-9"})

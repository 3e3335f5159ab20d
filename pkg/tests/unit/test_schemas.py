"""Unit tests for schema validation."""
import pytest
from pydantic import ValidationError

from common.models import ErrorCategory
from common.schemas import CheckError, CheckVerdict, Multiplicity, UmlClass, UmlModel, UmlOperation


class TestMultiplicity:
    """Test multiplicity parsing and printing."""

    @pytest.mark.parametrize("text,expected", [("*", "*"), ("1", "1"), ("0..1", "0..1"), ("1..*", "1..*"), ("0..*", "*")])
    def test_round_trip(self, text, expected):
        """Printing normalizes 0..* to *."""
        assert str(Multiplicity.parse(text)) == expected

    def test_is_many(self):
        assert Multiplicity.parse("*").is_many
        assert Multiplicity.parse("2").is_many
        assert not Multiplicity.parse("0..1").is_many

    def test_bounds(self):
        """A lower bound above the upper bound is rejected."""
        with pytest.raises(ValidationError, match="exceeds upper bound"):
            Multiplicity(lower=3, upper=1)


class TestUmlClass:
    """Test class member rules."""

    def test_operation_signature(self):
        """Signatures print parameters and the return type."""
        operation = UmlOperation.model_validate(
            {"name": "enroll", "params": [{"name": "c", "type": "Customer"}], "returns": "Boolean"}
        )
        assert operation.signature() == "enroll(c: Customer): Boolean"
        assert operation.arity == 1

    def test_repeated_attribute(self):
        with pytest.raises(ValidationError, match="repeats an attribute"):
            UmlClass.model_validate(
                {"name": "Flight", "attributes": [{"name": "a", "type": "Integer"}, {"name": "a", "type": "String"}]}
            )

    def test_overloads_by_arity(self):
        """Operations may share a name when their arity differs."""
        uml_class = UmlClass.model_validate(
            {"name": "A", "operations": [{"name": "f"}, {"name": "f", "params": [{"name": "x", "type": "Integer"}]}]}
        )
        assert len(uml_class.operations_named("f")) == 2


class TestUmlModel:
    """Test referential integrity of a model."""

    def test_needs_a_class(self):
        with pytest.raises(ValidationError):
            UmlModel(name="empty", classes=())

    def test_role_already_navigable(self):
        """One class cannot navigate two ends with the same role."""
        document = {
            "name": "m",
            "classes": [{"name": "A"}, {"name": "B"}],
            "associations": [
                {"ends": [{"class": "A", "role": "a", "multiplicity": "1"}, {"class": "B", "role": "b", "multiplicity": "*"}]},
                {"ends": [{"class": "A", "role": "x", "multiplicity": "1"}, {"class": "B", "role": "b", "multiplicity": "1"}]},
            ],
        }
        with pytest.raises(ValidationError, match=r"associations\[1\]\.ends\[1\]\.role"):
            UmlModel.model_validate(document)


class TestCheckVerdict:
    """Test the validation verdict."""

    def test_error_iff_invalid(self):
        """A verdict carries an error exactly when it is invalid."""
        with pytest.raises(ValidationError):
            CheckVerdict(valid=True, error=CheckError(category=ErrorCategory.PARSING_ERROR, message="x"))
        with pytest.raises(ValidationError):
            CheckVerdict(valid=False)

    def test_to_json(self):
        verdict = CheckVerdict(
            valid=False, error=CheckError(category=ErrorCategory.SIGNATURE_MISMATCH, message="bad", span=(3, 9))
        )
        assert verdict.to_json() == {"valid": False, "category": "SIGNATURE_MISMATCH", "message": "bad", "span": [3, 9]}

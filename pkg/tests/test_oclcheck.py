import pytest

from common.models import ErrorCategory
from services.oclcheck import ast
from services.oclcheck.checker import Checker, check, validate
from services.oclcheck.parser import OclSyntaxError, parse

PARSING = ErrorCategory.PARSING_ERROR
UNDEFINED = ErrorCategory.UNDEFINED_OPERATION
ITEREXP = ErrorCategory.ITEREXP_INVALID_SOURCE
SIGNATURE = ErrorCategory.SIGNATURE_MISMATCH

AIRPORT_VALID = [
    "context Flight inv: self.passengers->size() <= 1000",
    "context Flight inv: self.maxNrPassengers <= 1000",
    "context Flight inv: self.passengers->size() <= self.maxNrPassengers",
    "context Flight inv: self.arrivalTime > self.departTime",
    "context Airline inv: self.name.size() > 0",
    "context Airline inv: self.name <> ''",
    "context Airport inv: self.departingFlights->forAll(f | f.origin = self)",
    "context Flight inv: self.origin <> self.destination",
    "context Person inv: self.age >= 0 and self.age < 150",
    "context Airline inv: self.flights->forAll(f : Flight | f.airline = self)",
    "context Flight inv: self.passengers->select(p | p.age < 18)->size() <= 10",
    "context Airline inv: self.ceo.age >= 18",
    "context Flight inv: self.passengers->collect(p | p.age)->sum() >= 0",
    "context Flight inv: self.passengers.age->sum() < 100000",
    "context Person inv: self.employer.oclIsUndefined() or self.employer.name <> ''",
    "context Airport inv: Airport.allInstances()->forAll(a | a <> self implies a.name <> self.name)",
    "context Flight inv: self.passengers->forAll(p | p.flights->includes(self))",
    "context Flight inv: self.passengers->isUnique(p | p.name)",
    "context Airline inv: if self.flights->isEmpty() then true else self.flights->exists(f | f.maxNrPassengers > 0) endif",
    "context Person inv: self.age.abs() = self.age",
    "context Flight inv: self.maxNrPassengers.mod(2) = 0",
    "context Person inv: self.name.concat('x').size() > 1",
    "context Flight inv: not self.passengers->isEmpty()",
    "context Flight inv: self.maxNrPassengers * 2 - 1 > -1",
    "context Flight inv: self.passengers->one(p | p.age > 99) or self.passengers->notEmpty()",
    "context Flight inv capacity: self.maxNrPassengers > 0",
    "context Flight inv: -- capacity is positive\n  self.maxNrPassengers > 0",
]

ROYAL_VALID = [
    "context Customer inv: self.age() >= 18",
    "context LoyaltyAccount inv: self.points >= 0",
    "context LoyaltyProgram inv: self.participants->forAll(c | c.age() >= 18)",
    "context Customer inv: self.cards->forAll(c | c.owner = self)",
    "context Membership inv: self.card.valid",
    "context LoyaltyProgram::enroll(c : Customer) pre: not self.participants->includes(c)",
    "context LoyaltyProgram::enroll(c : Customer) post: self.participants->includes(c)",
    "context LoyaltyAccount::isEmpty() : Boolean post: result = (self.points = 0)",
    "context Service::calcPoints() : Integer post: result >= 0",
    "context LoyaltyAccount::earn(i : Integer) post: self.points = self.points@pre + i",
    "context Transaction inv: self.amount > 0.0",
    "context LoyaltyProgram inv: self.getServices()->forAll(s | s.pointsEarned >= 0)",
    "context CustomerCard inv: self.validFrom.isBefore(self.validThru)",
    "context Membership inv: self.account.oclIsUndefined() or self.account.points >= 0",
    "context ProgramPartner inv: self.numberOfCustomers = self.programs.participants->asSet()->size()",
    "context LoyaltyProgram inv: self.partners.deliveredServices->forAll(pointsEarned > 0 implies pointsBurned = 0)",
    "context Transaction inv: self.card.owner.programs->includes(self.program())",
    "context Customer inv: self.oclIsKindOf(Customer)",
    "context ServiceLevel inv: self.program.levels->includes(self)",
]

AIRPORT_INVALID = [
    ("context Flight inv: self.passenger->size() <= 1000", UNDEFINED),
    ("context Flight inv: self.arrivalTime > self.departureTime", UNDEFINED),
    ("context Flight inv: self.arrival > self.departure", UNDEFINED),
    ("context Plane inv: true", UNDEFINED),
    ("context Person inv: self.name.trim() <> ''", UNDEFINED),
    ("context Flight inv: self.origin->forAll(a | a.name <> '')", ITEREXP),
    ("context Airline inv: self.name->notEmpty()", ITEREXP),
    ("context Person inv: self.age->sum() > 0", ITEREXP),
    ("context Airline inv: self.ceo->exists(p | p.age > 40)", ITEREXP),
    ("context Airline inv: self.flights->size(1) >= 0", SIGNATURE),
    ("context Flight inv: self.maxNrPassengers + 'many' > 0", SIGNATURE),
    ("context Person inv: self.age", SIGNATURE),
    ("context Flight inv: self.passengers->select(p | p.age) ->notEmpty()", SIGNATURE),
    ("context Person inv: self.name > 3", SIGNATURE),
    ("context Airline inv self.name <> ''", PARSING),
    ("context Flight inv: self.passengers->size( <= 1000", PARSING),
    ("context Flight inv: self.maxNrPassengers <= 1000 extra", PARSING),
    ("", PARSING),
    ("context Flight inv: self.departTime@pre < self.arrivalTime", PARSING),
    ("context Flight pre: true", PARSING),
    ("context Flight inv: 'unterminated", PARSING),
    ("Flight inv: true", PARSING),
    ("context Flight inv: if self.maxNrPassengers > 0 then true endif", PARSING),
]

ROYAL_INVALID = [
    ("context Transaction inv: self.programs->notEmpty()", UNDEFINED),
    ("context Customer inv: self.age >= 18", UNDEFINED),
    ("context LoyaltyAccount inv: self.transactions->collect(t | t.amount)->average() > 0", UNDEFINED),
    ("context LoyaltyProgram::unenroll(c : Customer) pre: true", UNDEFINED),
    ("context Customer inv: Client.allInstances()->notEmpty()", UNDEFINED),
    ("context Membership inv: self.card->select(c | c.valid)->notEmpty()", ITEREXP),
    ("context LoyaltyProgram inv: self.participants->forAll(c | self.enroll(c, self.name))", SIGNATURE),
    ("context LoyaltyProgram::enroll(c : Integer) pre: true", SIGNATURE),
    ("context LoyaltyAccount::isEmpty() : Integer post: true", SIGNATURE),
    ("context LoyaltyAccount inv: self.earn('ten')", SIGNATURE),
    ("context Service inv: self.calcPoints(1) > 0", SIGNATURE),
    ("context LoyaltyProgram::enroll(c : Customer) inv: true", PARSING),
]


def test_corpus_covers_every_category():
    corpus = AIRPORT_INVALID + ROYAL_INVALID
    assert {category for _, category in corpus} == set(ErrorCategory)
    assert len(AIRPORT_VALID) + len(ROYAL_VALID) + len(corpus) >= 40


@pytest.mark.parametrize("text", AIRPORT_VALID)
def test_airport_valid(airport_model, text):
    verdict = validate(text, airport_model)
    assert verdict.valid, verdict.error
    assert verdict.error is None


@pytest.mark.parametrize("text", ROYAL_VALID)
def test_royal_loyal_valid(royal_model, text):
    verdict = validate(text, royal_model)
    assert verdict.valid, verdict.error


@pytest.mark.parametrize(("text", "category"), AIRPORT_INVALID)
def test_airport_invalid(airport_model, text, category):
    verdict = validate(text, airport_model)
    assert not verdict.valid
    assert verdict.error.category is category, verdict.error.message


@pytest.mark.parametrize(("text", "category"), ROYAL_INVALID)
def test_royal_loyal_invalid(royal_model, text, category):
    verdict = validate(text, royal_model)
    assert not verdict.valid
    assert verdict.error.category is category, verdict.error.message


ESCAPED_STRINGS = [
    r"context Person inv: self.name <> 'a\nb'",
    r"context Person inv: self.name <> 'tab\there'",
    r"context Airline inv: self.name <> 'back\\slash \'quoted\''",
]


@pytest.mark.parametrize("text", AIRPORT_VALID + ROYAL_VALID + ESCAPED_STRINGS)
def test_print_then_parse_is_identity(text):
    constraint = parse(text)
    assert parse(ast.print_constraint(constraint)) == constraint


def test_error_span_points_at_the_culprit(airport_model):
    text = "context Flight inv: self.passenger->size() <= 1000"
    verdict = validate(text, airport_model)
    start, end = verdict.error.span
    assert text[start:end] == "self.passenger"
    assert "passenger" in verdict.error.message


def test_inv_after_signature_message():
    with pytest.raises(OclSyntaxError, match="'inv' cannot follow an operation signature"):
        parse("context LoyaltyProgram::enroll(c : Customer) inv: true")


def test_verdict_json_shape(royal_model):
    verdict = validate("context Membership inv: self.card->select(c | c.valid)->notEmpty()", royal_model)
    document = verdict.to_json()
    assert document["valid"] is False
    assert document["category"] == "ITEREXP_INVALID_SOURCE"
    assert document["message"]
    assert validate("context Customer inv: self.age() >= 18", royal_model).to_json() == {
        "valid": True,
        "category": None,
        "message": "",
        "span": [0, 0],
    }


def test_validate_never_raises(airport_model):
    deeply_nested = "context Flight inv: " + "(" * 5000 + "true" + ")" * 5000
    verdict = validate(deeply_nested, airport_model)
    assert verdict.error.category is PARSING


DEEP_UNARY = [
    lambda depth: "context Person inv: " + "- " * depth + "self.age < 0",
    lambda depth: "context Person inv: " + "not " * depth + "true",
]


@pytest.mark.parametrize("build", DEEP_UNARY, ids=["negation", "not"])
def test_validate_near_the_recursion_limit(airport_model, build):
    verdict = validate(build(480), airport_model)
    assert verdict.valid or verdict.error.category is PARSING


@pytest.mark.parametrize("build", DEEP_UNARY, ids=["negation", "not"])
def test_validate_deep_unary_chains(airport_model, build):
    verdict = validate(build(2000), airport_model)
    assert not verdict.valid
    assert verdict.error.category is PARSING
    assert "nests too deeply" in verdict.error.message


def test_check_maps_recursion_to_parsing_error(airport_model, monkeypatch):
    def overflow(self):
        raise RecursionError("maximum recursion depth exceeded")

    monkeypatch.setattr(Checker, "run", overflow)
    verdict = check(parse("context Person inv: self.age >= 0"), airport_model)
    assert not verdict.valid
    assert verdict.error.category is PARSING
    assert verdict.error.message == "expression nests too deeply"


def test_check_on_parsed_constraint(airport_model):
    assert check(parse("context Flight inv: self.maxNrPassengers > 0"), airport_model).valid


class TestParser:
    """Shape of the parsed tree."""

    def test_header_fields(self):
        """An operation context keeps its parameters and return type."""
        constraint = parse("context LoyaltyAccount::isEmpty() : Boolean post done: result = true")
        assert constraint.context_class == "LoyaltyAccount"
        assert constraint.kind is ast.ConstraintKind.POST
        assert constraint.name == "done"
        assert constraint.operation.name == "isEmpty"
        assert constraint.operation.return_type == "Boolean"

    def test_and_binds_tighter_than_or(self):
        """'a or b and c' groups as 'a or (b and c)'."""
        body = parse("context A inv: a or b and c").body
        assert body.op == "or"
        assert body.right.op == "and"

    def test_implies_is_loosest(self):
        """Comparison operands sit under implies."""
        body = parse("context A inv: x > 1 implies y = 2").body
        assert body.op == "implies"
        assert body.left.op == ">"

    def test_arithmetic_is_left_associative(self):
        """'a - b - c' groups as '(a - b) - c'."""
        body = parse("context A inv: a - b - c = 0").body.left
        assert isinstance(body.left, ast.Binary)
        assert body.left.op == "-"

    def test_iterator_forms(self):
        """Iterators accept an explicit, a typed or an implicit variable."""
        explicit = parse("context A inv: xs->forAll(x | x)").body
        typed = parse("context A inv: xs->forAll(x : B | x)").body
        implicit = parse("context A inv: xs->forAll(ok)").body
        assert (explicit.var, explicit.var_type) == ("x", None)
        assert (typed.var, typed.var_type) == ("x", "B")
        assert implicit.var is None

    def test_all_instances(self):
        """'T.allInstances()' becomes its own node."""
        body = parse("context A inv: B.allInstances()->notEmpty()").body
        assert isinstance(body.source, ast.AllInstances)
        assert body.source.type_name == "B"

    def test_result_outside_post(self):
        """'result' only parses in a post-condition."""
        with pytest.raises(OclSyntaxError, match="post-conditions"):
            parse("context A::f() : Integer pre: result > 0")

    def test_string_escapes(self):
        """Escaped quotes survive lexing and printing."""
        constraint = parse(r"context A inv: name = 'it\'s'")
        assert constraint.body.right.value == "it's"
        assert parse(ast.print_constraint(constraint)) == constraint

    def test_control_escapes_print_escaped(self):
        """Newlines and tabs in a literal print as escapes, never raw."""
        constraint = parse(r"context A inv: name = 'a\nb\tc'")
        assert constraint.body.right.value == "a\nb\tc"
        printed = ast.print_constraint(constraint)
        assert "\n" not in printed
        assert r"'a\nb\tc'" in printed
        assert parse(printed) == constraint

    def test_double_negation_prints_parenthesized(self):
        """Nested unary minus never prints as a comment marker."""
        constraint = parse("context A inv: -(-x) = x")
        printed = ast.print_constraint(constraint)
        assert "--" not in printed
        assert parse(printed) == constraint

    def test_error_position(self):
        """Syntax errors carry the offending token span."""
        with pytest.raises(OclSyntaxError) as excinfo:
            parse("context A inv: x >")
        assert excinfo.value.span == (18, 18)

// Guard-expression parsing and evaluation.
#include <catch2/catch_amalgamated.hpp>

#include <map>

#include <dmsec/expr.hpp>

using namespace dmsec::expr;

namespace {

struct map_env : environment {
    std::map<std::string, value, std::less<>> vars;

    std::optional<value> lookup(std::string_view name) const override {
        auto it = vars.find(name);
        if (it == vars.end()) return std::nullopt;
        return it->second;
    }
};

std::int64_t eval_int(const std::string& src, const map_env& env = {}) {
    value v = eval(expression::parse(src), env);
    REQUIRE(std::holds_alternative<std::int64_t>(v));
    return std::get<std::int64_t>(v);
}

bool eval_b(const std::string& src, const map_env& env = {}) {
    return eval_bool(expression::parse(src), env);
}

}  // namespace

TEST_CASE("integer arithmetic and precedence") {
    CHECK(eval_int("2 + 10 mod 3") == 3);    // mod binds tighter than +
    CHECK(eval_int("(2 + 10) mod 3") == 0);
    CHECK(eval_int("10 - 3 - 2") == 5);      // left associative
    CHECK(eval_int("-4 + 1") == -3);
    CHECK(eval_int("--4") == 4);
    CHECK(eval_int("3 - -4") == 7);
}

TEST_CASE("mod is always nonnegative, modulus |divisor|") {
    CHECK(eval_int("5 mod 3") == 2);
    CHECK(eval_int("(-5) mod 3") == 1);
    CHECK(eval_int("5 mod (-3)") == 2);
    CHECK(eval_int("(-5) mod (-3)") == 1);
    CHECK(eval_int("0 mod 7") == 0);
    CHECK_THROWS_AS(eval_int("1 mod 0"), eval_error);
}

TEST_CASE("comparisons and equality") {
    CHECK(eval_b("1 < 2"));
    CHECK_FALSE(eval_b("2 < 2"));
    CHECK(eval_b("2 <= 2"));
    CHECK(eval_b("3 > 2"));
    CHECK(eval_b("3 >= 3"));
    CHECK(eval_b("4 = 4"));
    CHECK(eval_b("4 != 5"));
    CHECK_FALSE(eval_b("4 != 4"));
}

TEST_CASE("boolean connectives") {
    CHECK(eval_b("true && true"));
    CHECK_FALSE(eval_b("true && false"));
    CHECK(eval_b("false || true"));
    CHECK(eval_b("!false"));
    CHECK(eval_b("1 < 2 && 2 < 3 || false"));  // && binds tighter than ||
    CHECK(eval_b("false && true || true"));
}

TEST_CASE("implication is right associative and weakest") {
    CHECK(eval_b("false -> false"));
    CHECK_FALSE(eval_b("true -> false"));
    CHECK(eval_b("false -> false -> false"));  // false -> (false -> false)
    CHECK(eval_b("1 = 2 -> 3 = 4"));
    CHECK(eval_b("true && false -> true"));  // (true && false) -> true
}

TEST_CASE("identifiers resolve through the environment") {
    map_env env;
    env.vars["x"] = std::int64_t(5);
    env.vars["flag"] = true;
    CHECK(eval_int("x + 1", env) == 6);
    CHECK(eval_b("flag && x = 5", env));
}

TEST_CASE("an unbound identifier evaluates to its own name") {
    map_env env;
    env.vars["location"] = std::string("Init");
    CHECK(eval_b("location = Init", env));
    CHECK_FALSE(eval_b("location = Collect_Plans", env));
    CHECK(eval_b("location != Collect_Plans", env));
}

TEST_CASE("string equality only; other string operations fail") {
    map_env env;
    env.vars["s"] = std::string("abc");
    CHECK(eval_b("s = abc", env));
    CHECK_THROWS_AS(eval_b("s < abc", env), eval_error);
    CHECK_THROWS_AS(eval_int("s + 1", env), eval_error);
}

TEST_CASE("type errors are reported") {
    CHECK_THROWS_AS(eval_int("1 + true"), eval_error);
    CHECK_THROWS_AS(eval_b("1 && true"), eval_error);
    CHECK_THROWS_AS(eval_b("!3"), eval_error);
    CHECK_THROWS_AS(eval_b("5"), eval_error);  // int where bool expected
    CHECK_THROWS_AS(eval_int_slots(expression::parse("true"), {}), eval_error);
    CHECK_THROWS_AS(eval_b("(1 < 2) < 3"), eval_error);
}

TEST_CASE("keywords stop at word boundaries") {
    map_env env;
    env.vars["modx"] = std::int64_t(9);
    env.vars["trueish"] = std::int64_t(1);
    CHECK(eval_int("modx", env) == 9);
    CHECK(eval_int("trueish", env) == 1);
    CHECK(eval_int("7 mod modx", env) == 7);
}

TEST_CASE("parse errors carry a position") {
    CHECK_THROWS_AS(expression::parse(""), parse_error);
    CHECK_THROWS_AS(expression::parse("1 +"), parse_error);
    CHECK_THROWS_AS(expression::parse("(1 + 2"), parse_error);
    CHECK_THROWS_AS(expression::parse("1 2"), parse_error);   // junk after expression
    CHECK_THROWS_AS(expression::parse("1 @ 2"), parse_error);
    CHECK_THROWS_AS(expression::parse("= 3"), parse_error);

    try {
        expression::parse("1 + + 2");
        FAIL("expected a parse error");
    } catch (const parse_error& e) {
        CHECK(std::string(e.what()).find("offset") != std::string::npos);
        CHECK(e.position() == 4);
    }
}

TEST_CASE("source text is preserved, trimmed of outer whitespace") {
    expression e = expression::parse("  x + 1 ");
    CHECK(e.source() == "x + 1");

    expression copy = e;  // deep copy keeps the tree usable
    map_env env;
    env.vars["x"] = std::int64_t(2);
    CHECK(std::get<std::int64_t>(eval(copy, env)) == 3);
}

TEST_CASE("slot binding replaces environment lookups") {
    expression e = expression::parse("a + b + 2");
    std::vector<std::string> names = {"a", "b"};
    e.bind(names);
    std::vector<std::int64_t> slots = {10, 4};
    CHECK(eval_int_slots(e, slots) == 16);
    CHECK(eval_bool_slots(expression::parse("true"), slots));

    expression unknown = expression::parse("a + c");
    CHECK_THROWS_AS(unknown.bind(names), parse_error);
}

TEST_CASE("assignments parse and round-trip their source") {
    assignment a = assignment::parse("t := (t + 1) mod 2");
    CHECK(a.target == "t");
    CHECK(a.source() == "t := (t + 1) mod 2");

    assignment padded = assignment::parse("  c :=   c + 1  ");
    CHECK(padded.source() == "c := c + 1");

    CHECK_THROWS_AS(assignment::parse("no assign here"), parse_error);
    CHECK_THROWS_AS(assignment::parse(" := 1"), parse_error);
}

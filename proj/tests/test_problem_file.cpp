#include <doctest.h>

#include <string>

#include "mjls/problem_file.hpp"
#include "support.hpp"

using namespace mjls;
using namespace mjls::io;

namespace {
const std::string kExample = R"({
  "modes": 2, "state_dim": 1, "input_dim": 1, "sigma2": 1, "noise_kind": "gaussian",
  "rho": [[0.2, 0.8], [0.4, 0.6]], "pi0": [0.5, 0.5],
  "mode_data": [
    {"A": [0.5], "B": [-0.5], "C": [0.5], "D": [-0.5], "Q": [-1], "R": [-3]},
    {"A": [0.25], "B": [-0.25], "C": [0.25], "D": [-0.25], "Q": [20], "R": [0]}
  ],
  "terminal_P": [[20], [20]], "ptilde": [[-10], [19]], "x0": [1]
})";

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, from.size(), to);
}
}  // namespace

TEST_CASE("example document parses into the expected model") {
  const auto p = parse_problem(kExample);
  CHECK(p.model.modes == 2);
  CHECK(p.model.rho(1, 0) == 0.4);
  CHECK(p.weights.R[0](0, 0) == -3.0);
  CHECK(p.weights.terminal_P[1](0, 0) == 20.0);
  REQUIRE(p.ptilde.has_value());
  CHECK((*p.ptilde)[0](0, 0) == -10.0);
  REQUIRE(p.x0.has_value());
  CHECK(p.x0->is_deterministic());
}

TEST_CASE("serialize then parse is the identity on canonical text") {
  const auto p = parse_problem(kExample);
  const std::string canonical = serialize_problem(p);
  const auto q = parse_problem(canonical);
  CHECK(serialize_problem(q) == canonical);
  CHECK(q.model.rho == p.model.rho);
  CHECK(q.weights.Q[0] == p.weights.Q[0]);

  auto odd = p;
  odd.model.sigma2 = 0.1 + 0.2;
  odd.model.A[0](0, 0) = 1.0 / 3.0;
  const auto back = parse_problem(serialize_problem(odd));
  CHECK(back.model.sigma2 == odd.model.sigma2);
  CHECK(back.model.A[0](0, 0) == odd.model.A[0](0, 0));
}

TEST_CASE("syntax errors report a line") {
  try {
    parse_problem("{\n  \"modes\": 2,\n  oops\n}");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("field errors name the field") {
  try {
    parse_problem(replace(kExample, "[0.2, 0.8]", "[0.2]"));
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.field().find("rho") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_problem(replace(kExample, "\"sigma2\": 1", "\"sigma2\": \"one\"")), ParseError);
  CHECK_THROWS_AS(parse_problem(replace(kExample, "\"sigma2\": 1", "\"sigma2\": 1, \"extra\": 0")),
                  ParseError);
}

TEST_CASE("invariant violations raise InvalidModel") {
  CHECK_THROWS_AS(parse_problem(replace(kExample, "[0.2, 0.8]", "[0.5, 0.6]")), InvalidModel);
}

TEST_CASE("number lists and mode splitting") {
  CHECK(parse_number_list("-10,19") == std::vector<double>{-10, 19});
  CHECK(parse_number_list(" 1  2;3 ") == std::vector<double>{1, 2, 3});
  CHECK_THROWS_AS(parse_number_list("1,x"), ParseError);
  const auto modes = split_modes({1, 2, 3, 4, 5, 6, 7, 8}, 2, 2, 2);
  CHECK(modes[1](0, 1) == 6.0);
  CHECK_THROWS_AS(split_modes({1, 2, 3}, 2, 1, 1), ParseError);
}

#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "mjls/model.hpp"

namespace mjls::io {

/// A problem document: model, weights and the optional objects that travel
/// with them (a set-S candidate and an initial state).
struct ProblemFile {
  MjlsModel model;
  CostWeights weights;
  std::optional<ModeMatrices> ptilde;
  std::optional<InitialState> x0;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::string field, int line = 0);
  /// JSON path of the offending field ("" for syntax errors).
  const std::string& field() const { return field_; }
  /// 1-based line for syntax errors, 0 otherwise.
  int line() const { return line_; }

 private:
  std::string field_;
  int line_;
};

struct ParseOptions {
  /// Average nearly symmetric weights (defect below 1e-8) instead of rejecting.
  bool symmetrize = false;
};

/// Parses and validates a problem document. Throws ParseError on malformed
/// input and InvalidModel when the data violates a model invariant.
ProblemFile parse_problem(std::string_view text, const ParseOptions& options = {});
ProblemFile load_problem(const std::filesystem::path& path, const ParseOptions& options = {});

/// Canonical form: fixed key order, shortest round-trip decimal for every number.
std::string serialize_problem(const ProblemFile& problem);

/// Parses a flat list of numbers separated by commas and/or whitespace.
std::vector<double> parse_number_list(std::string_view text);

/// Splits a flat row-major list into `modes` matrices of rows x cols.
ModeMatrices split_modes(const std::vector<double>& values, int modes, int rows, int cols);

}  // namespace mjls::io

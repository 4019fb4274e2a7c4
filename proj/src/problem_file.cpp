#include "mjls/problem_file.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace mjls::io {

using nlohmann::json;

ParseError::ParseError(const std::string& message, std::string field, int line)
    : std::runtime_error(message), field_(std::move(field)), line_(line) {}

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw ParseError(fmt::format("field '{}': {}", field, what), field);
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(path.empty() ? key : path + "." + key, "missing");
  return *it;
}

int read_int(const json& value, const std::string& field) {
  if (!value.is_number_integer() && !value.is_number_unsigned()) fail(field, "expected an integer");
  return value.get<int>();
}

double read_number(const json& value, const std::string& field) {
  if (!value.is_number()) fail(field, "expected a number");
  return value.get<double>();
}

Matrix read_matrix(const json& value, const std::string& field, int rows, int cols) {
  if (!value.is_array()) fail(field, "expected an array of numbers");
  const auto expected = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  if (value.size() != expected) {
    fail(field, fmt::format("expected {} numbers ({}x{} row-major), got {}", expected, rows, cols,
                            value.size()));
  }
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const auto idx = static_cast<std::size_t>(r * cols + c);
      m(r, c) = read_number(value[idx], fmt::format("{}[{}]", field, idx));
    }
  }
  return m;
}

ModeMatrices read_per_mode(const json& value, const std::string& field, int modes, int rows,
                           int cols) {
  if (!value.is_array() || static_cast<int>(value.size()) != modes) {
    fail(field, fmt::format("expected an array with one entry per mode ({})", modes));
  }
  ModeMatrices out;
  for (int i = 0; i < modes; ++i) {
    out.push_back(read_matrix(value[static_cast<std::size_t>(i)], fmt::format("{}[{}]", field, i),
                              rows, cols));
  }
  return out;
}

json write_matrix(const Matrix& m) {
  json arr = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) arr.push_back(m(r, c));
  }
  return arr;
}

json write_per_mode(const ModeMatrices& family) {
  json arr = json::array();
  for (const auto& m : family) arr.push_back(write_matrix(m));
  return arr;
}

int line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

const std::set<std::string> kTopLevelKeys = {
    "modes", "state_dim", "input_dim", "sigma2",     "noise_kind", "rho",
    "pi0",   "mode_data", "terminal_P", "ptilde",    "x0",         "x0_second_moment"};
const std::set<std::string> kModeKeys = {"A", "B", "C", "D", "Q", "R"};

}  // namespace

ProblemFile parse_problem(std::string_view text, const ParseOptions& options) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const int line = line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ParseError(fmt::format("line {}: {}", line, e.what()), "", line);
  }
  if (!doc.is_object()) fail("", "document must be an object");
  for (const auto& [key, _] : doc.items()) {
    if (!kTopLevelKeys.contains(key)) fail(key, "unknown key");
  }

  ProblemFile out;
  MjlsModel& model = out.model;
  model.modes = read_int(require(doc, "modes", ""), "modes");
  model.state_dim = read_int(require(doc, "state_dim", ""), "state_dim");
  model.input_dim = read_int(require(doc, "input_dim", ""), "input_dim");
  const int L = model.modes;
  const int n = model.state_dim;
  const int m = model.input_dim;
  if (L < 1) fail("modes", "must be >= 1");
  if (n < 1) fail("state_dim", "must be >= 1");
  if (m < 1) fail("input_dim", "must be >= 1");

  model.sigma2 = read_number(require(doc, "sigma2", ""), "sigma2");
  if (auto it = doc.find("noise_kind"); it != doc.end()) {
    if (!it->is_string()) fail("noise_kind", "expected a string");
    auto kind = parse_noise_kind(it->get<std::string>());
    if (!kind) fail("noise_kind", "expected \"gaussian\" or \"rademacher\"");
    model.noise_kind = *kind;
  }

  const json& rho = require(doc, "rho", "");
  if (!rho.is_array() || static_cast<int>(rho.size()) != L) {
    fail("rho", fmt::format("expected {} rows", L));
  }
  model.rho.resize(L, L);
  for (int i = 0; i < L; ++i) {
    const json& row = rho[static_cast<std::size_t>(i)];
    const std::string field = fmt::format("rho[{}]", i);
    if (!row.is_array() || static_cast<int>(row.size()) != L) {
      fail(field, fmt::format("expected {} numbers", L));
    }
    for (int j = 0; j < L; ++j) {
      model.rho(i, j) = read_number(row[static_cast<std::size_t>(j)], fmt::format("{}[{}]", field, j));
    }
  }

  const json& pi0 = require(doc, "pi0", "");
  if (!pi0.is_array() || static_cast<int>(pi0.size()) != L) fail("pi0", fmt::format("expected {} numbers", L));
  model.pi0.resize(L);
  for (int i = 0; i < L; ++i) {
    model.pi0(i) = read_number(pi0[static_cast<std::size_t>(i)], fmt::format("pi0[{}]", i));
  }

  const json& blocks = require(doc, "mode_data", "");
  if (!blocks.is_array() || static_cast<int>(blocks.size()) != L) {
    fail("mode_data", fmt::format("expected one object per mode ({})", L));
  }
  for (int i = 0; i < L; ++i) {
    const json& block = blocks[static_cast<std::size_t>(i)];
    const std::string path = fmt::format("mode_data[{}]", i);
    if (!block.is_object()) fail(path, "expected an object");
    for (const auto& [key, _] : block.items()) {
      if (!kModeKeys.contains(key)) fail(path + "." + key, "unknown key");
    }
    model.A.push_back(read_matrix(require(block, "A", path), path + ".A", n, n));
    model.B.push_back(read_matrix(require(block, "B", path), path + ".B", n, n));
    model.C.push_back(read_matrix(require(block, "C", path), path + ".C", n, m));
    model.D.push_back(read_matrix(require(block, "D", path), path + ".D", n, m));
    out.weights.Q.push_back(read_matrix(require(block, "Q", path), path + ".Q", n, n));
    out.weights.R.push_back(read_matrix(require(block, "R", path), path + ".R", m, m));
  }

  if (auto it = doc.find("terminal_P"); it != doc.end()) {
    out.weights.terminal_P = read_per_mode(*it, "terminal_P", L, n, n);
  } else {
    out.weights.terminal_P.assign(static_cast<std::size_t>(L), Matrix::Zero(n, n));
  }
  if (auto it = doc.find("ptilde"); it != doc.end()) {
    out.ptilde = read_per_mode(*it, "ptilde", L, n, n);
  }
  const bool has_x0 = doc.contains("x0");
  const bool has_moment = doc.contains("x0_second_moment");
  if (has_x0 && has_moment) fail("x0", "give either x0 or x0_second_moment, not both");
  if (has_x0) {
    out.x0 = InitialState::deterministic(read_matrix(doc["x0"], "x0", n, 1));
  } else if (has_moment) {
    out.x0 = InitialState::from_second_moment(
        read_matrix(doc["x0_second_moment"], "x0_second_moment", n, n));
  }

  if (options.symmetrize) {
    symmetrize_weights(out.weights);
    if (out.ptilde) {
      for (auto& p : *out.ptilde) {
        const double defect = asymmetry(p);
        if (defect > 0.0 && defect < kSymmetrizeLimit) p = 0.5 * (p + p.transpose()).eval();
      }
    }
  }

  ValidationReport report = validate_model(out.model, out.weights);
  if (out.ptilde) {
    for (std::size_t i = 0; i < out.ptilde->size(); ++i) {
      if (asymmetry((*out.ptilde)[i]) > kSymmetryTolerance) {
        report.issues.push_back(fmt::format("ptilde_{} not symmetric", i + 1));
      }
    }
  }
  if (out.x0) {
    auto x0_report = validate_initial_state(*out.x0, n);
    report.issues.insert(report.issues.end(), x0_report.issues.begin(), x0_report.issues.end());
  }
  if (!report.ok()) throw InvalidModel(report);
  return out;
}

ProblemFile load_problem(const std::filesystem::path& path, const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open '{}'", path.string()), "", 0);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_problem(buffer.str(), options);
}

std::string serialize_problem(const ProblemFile& problem) {
  const MjlsModel& model = problem.model;
  // ordered_json keeps insertion order, which is the canonical key order.
  nlohmann::ordered_json doc;
  doc["modes"] = model.modes;
  doc["state_dim"] = model.state_dim;
  doc["input_dim"] = model.input_dim;
  doc["sigma2"] = model.sigma2;
  doc["noise_kind"] = to_string(model.noise_kind);
  nlohmann::ordered_json rho = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < model.rho.rows(); ++i) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (Eigen::Index j = 0; j < model.rho.cols(); ++j) row.push_back(model.rho(i, j));
    rho.push_back(row);
  }
  doc["rho"] = rho;
  nlohmann::ordered_json pi0 = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < model.pi0.size(); ++i) pi0.push_back(model.pi0(i));
  doc["pi0"] = pi0;
  nlohmann::ordered_json blocks = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < static_cast<std::size_t>(model.modes); ++i) {
    nlohmann::ordered_json block;
    block["A"] = write_matrix(model.A[i]);
    block["B"] = write_matrix(model.B[i]);
    block["C"] = write_matrix(model.C[i]);
    block["D"] = write_matrix(model.D[i]);
    block["Q"] = write_matrix(problem.weights.Q[i]);
    block["R"] = write_matrix(problem.weights.R[i]);
    blocks.push_back(block);
  }
  doc["mode_data"] = blocks;
  doc["terminal_P"] = write_per_mode(problem.weights.terminal_P);
  if (problem.ptilde) doc["ptilde"] = write_per_mode(*problem.ptilde);
  if (problem.x0) {
    if (problem.x0->is_deterministic()) {
      doc["x0"] = write_matrix(*problem.x0->point());
    } else {
      doc["x0_second_moment"] = write_matrix(problem.x0->second_moment());
    }
  }
  return doc.dump(2) + "\n";
}

std::vector<double> parse_number_list(std::string_view text) {
  std::vector<double> out;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    double value = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
      throw ParseError(fmt::format("'{}' is not a number", token), "", 0);
    }
    out.push_back(value);
    token.clear();
  };
  for (char c : text) {
    if (c == ',' || c == ' ' || c == '\t' || c == '\n' || c == ';') {
      flush();
    } else {
      token.push_back(c);
    }
  }
  flush();
  return out;
}

ModeMatrices split_modes(const std::vector<double>& values, int modes, int rows, int cols) {
  const auto block = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  if (values.size() != block * static_cast<std::size_t>(modes)) {
    throw ParseError(fmt::format("expected {} numbers ({} modes of {}x{}), got {}",
                                 block * static_cast<std::size_t>(modes), modes, rows, cols,
                                 values.size()),
                     "", 0);
  }
  ModeMatrices out;
  for (int i = 0; i < modes; ++i) {
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        m(r, c) = values[static_cast<std::size_t>(i) * block + static_cast<std::size_t>(r * cols + c)];
      }
    }
    out.push_back(m);
  }
  return out;
}

}  // namespace mjls::io

#include "cli/record_io.hpp"

#include <json.hpp>

#include <sstream>

namespace softtopk::cli {

using nlohmann::json;

namespace {

[[noreturn]] void bad_line(size_t line_no, const std::string& why) {
  throw std::invalid_argument("input line " + std::to_string(line_no) + ": " +
                              why);
}

double parse_score_token(const std::string& tok, size_t line_no) {
  if (tok == "-inf" || tok == "-Infinity") return kNegInf;
  try {
    size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) bad_line(line_no, "malformed number '" + tok + "'");
    return v;
  } catch (const std::invalid_argument&) {
    bad_line(line_no, "malformed number '" + tok + "'");
  } catch (const std::out_of_range&) {
    bad_line(line_no, "number out of range '" + tok + "'");
  }
}

}  // namespace

InputRecord parse_jsonl_record(const std::string& line, size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    bad_line(line_no, std::string("invalid JSON (") + e.what() + ")");
  }
  if (!j.is_object()) bad_line(line_no, "expected a JSON object");
  if (!j.contains("scores") || !j["scores"].is_array()) {
    bad_line(line_no, "missing 'scores' array");
  }
  InputRecord rec;
  rec.id = j.value("id", "line" + std::to_string(line_no));
  const auto& arr = j["scores"];
  rec.scores.resize(static_cast<Index>(arr.size()));
  Index i = 0;
  for (const auto& v : arr) {
    if (v.is_number()) {
      rec.scores[i++] = v.get<double>();
    } else if (v.is_string()) {
      rec.scores[i++] = parse_score_token(v.get<std::string>(), line_no);
    } else {
      bad_line(line_no, "scores must be numbers or \"-inf\"");
    }
  }
  if (j.contains("k")) {
    if (!j["k"].is_number_integer() || j["k"].get<long long>() < 1) {
      bad_line(line_no, "'k' must be a positive integer");
    }
    rec.k = static_cast<Index>(j["k"].get<long long>());
  }
  return rec;
}

InputRecord parse_csv_record(const std::string& line, size_t line_no) {
  InputRecord rec;
  rec.id = "row" + std::to_string(line_no);
  std::vector<double> vals;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    // trim spaces
    const auto b = tok.find_first_not_of(" \t\r");
    const auto e = tok.find_last_not_of(" \t\r");
    if (b == std::string::npos) bad_line(line_no, "empty CSV field");
    vals.push_back(parse_score_token(tok.substr(b, e - b + 1), line_no));
  }
  if (vals.empty()) bad_line(line_no, "no scores on the line");
  rec.scores.resize(static_cast<Index>(vals.size()));
  for (size_t i = 0; i < vals.size(); ++i) {
    rec.scores[static_cast<Index>(i)] = vals[i];
  }
  return rec;
}

std::string mode_name(SinkhornMode mode) {
  switch (mode) {
    case SinkhornMode::kPlain:
      return "plain";
    case SinkhornMode::kLog:
      return "log";
    case SinkhornMode::kAuto:
      return "auto";
  }
  return "unknown";
}

namespace {

json scores_to_json(const Vector& scores) {
  json arr = json::array();
  for (Index i = 0; i < scores.size(); ++i) {
    if (scores[i] == kNegInf) {
      arr.push_back("-inf");
    } else {
      arr.push_back(scores[i]);
    }
  }
  return arr;
}

Diagnostics diag_from_plan(double epsilon, const TransportPlan& plan) {
  Diagnostics d;
  d.epsilon = epsilon;
  d.iters_run = plan.iters_run;
  d.marginal_residual = plan.marginal_residual;
  d.mode_used = mode_name(plan.mode_used);
  return d;
}

}  // namespace

RunRecord make_run_record(const InputRecord& in, Index k,
                          const TopkOutput& out, double epsilon) {
  RunRecord rec;
  rec.id = in.id;
  rec.k = k;
  rec.scores = in.scores;
  rec.sorted = false;
  rec.largest = out.largest;
  rec.a.assign(out.a.data(), out.a.data() + out.a.size());
  rec.diagnostics = diag_from_plan(epsilon, out.plan);
  return rec;
}

RunRecord make_run_record(const InputRecord& in, Index k,
                          const SortedTopkOutput& out, double epsilon) {
  RunRecord rec;
  rec.id = in.id;
  rec.k = k;
  rec.scores = in.scores;
  rec.sorted = true;
  rec.largest = out.largest;
  rec.sorted_k = out.a.cols();
  rec.a.reserve(static_cast<size_t>(out.a.size()));
  for (Index i = 0; i < out.a.rows(); ++i) {
    for (Index l = 0; l < out.a.cols(); ++l) {
      rec.a.push_back(out.a(i, l));
    }
  }
  rec.diagnostics = diag_from_plan(epsilon, out.plan);
  return rec;
}

std::string serialize_run_record(const RunRecord& rec) {
  json j;
  j["id"] = rec.id;
  j["k"] = rec.k;
  j["scores"] = scores_to_json(rec.scores);
  j["sorted"] = rec.sorted;
  if (rec.largest) j["largest"] = true;
  if (rec.sorted) {
    json rows = json::array();
    for (Index i = 0; i < static_cast<Index>(rec.a.size()) / rec.sorted_k;
         ++i) {
      json row = json::array();
      for (Index l = 0; l < rec.sorted_k; ++l) {
        row.push_back(rec.a[static_cast<size_t>(i * rec.sorted_k + l)]);
      }
      rows.push_back(std::move(row));
    }
    j["a"] = std::move(rows);
  } else {
    j["a"] = rec.a;
  }
  j["diagnostics"] = {
      {"epsilon", rec.diagnostics.epsilon},
      {"iters_run", rec.diagnostics.iters_run},
      {"marginal_residual", rec.diagnostics.marginal_residual},
      {"mode_used", rec.diagnostics.mode_used},
  };
  return j.dump();
}

}  // namespace softtopk::cli

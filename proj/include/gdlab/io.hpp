#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gdlab/dataset.hpp"
#include "gdlab/optimize.hpp"

namespace gdlab {

/// Shortest decimal form that parses back to the identical double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << content;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Simple row-at-a-time CSV assembly; all doubles go through format_double so
/// files round-trip bit-exactly and reruns are byte-identical.
class CsvBuilder {
public:
  explicit CsvBuilder(const std::vector<std::string>& header) { append_row(header); }

  void append_row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ += ',';
      out_ += cells[i];
    }
    out_ += '\n';
  }

  const std::string& str() const { return out_; }

private:
  std::string out_;
};

// --- DataSpec / dataset serialisation ---

inline std::string input_law_name(InputLaw law) {
  return law == InputLaw::uniform_sphere ? "uniform_sphere" : "uniform_ball";
}
inline InputLaw input_law_from_name(const std::string& s) {
  if (s == "uniform_sphere") return InputLaw::uniform_sphere;
  if (s == "uniform_ball") return InputLaw::uniform_ball;
  throw std::invalid_argument("unknown input_law: " + s);
}
inline std::string noise_law_name(NoiseLaw law) {
  return law == NoiseLaw::none ? "none" : "uniform_bounded";
}
inline NoiseLaw noise_law_from_name(const std::string& s) {
  if (s == "none") return NoiseLaw::none;
  if (s == "uniform_bounded") return NoiseLaw::uniform_bounded;
  throw std::invalid_argument("unknown noise_law: " + s);
}
inline std::string target_kind_name(TargetKind k) {
  switch (k) {
    case TargetKind::teacher_logistic: return "teacher_logistic";
    case TargetKind::linear: return "linear";
    case TargetKind::custom: return "custom";
  }
  return "?";
}
inline TargetKind target_kind_from_name(const std::string& s) {
  if (s == "teacher_logistic") return TargetKind::teacher_logistic;
  if (s == "linear") return TargetKind::linear;
  if (s == "custom") return TargetKind::custom;
  throw std::invalid_argument("unknown target kind: " + s);
}

inline nlohmann::json data_spec_to_json(const DataSpec& spec) {
  if (spec.target.kind == TargetKind::custom)
    throw std::invalid_argument("data_spec_to_json: custom targets are not serialisable");
  nlohmann::json j;
  j["d"] = spec.d;
  j["input_law"] = input_law_name(spec.input_law);
  j["noise_sigma"] = spec.noise_sigma;
  j["noise_law"] = noise_law_name(spec.noise_law);
  j["c_x"] = spec.c_x;
  j["c_y"] = spec.c_y;
  j["seed"] = spec.seed;
  j["target"] = {{"kind", target_kind_name(spec.target.kind)}, {"w_star", spec.target.w_star}};
  return j;
}

inline DataSpec data_spec_from_json(const nlohmann::json& j) {
  DataSpec spec;
  spec.d = j.at("d").get<std::size_t>();
  spec.input_law = input_law_from_name(j.at("input_law").get<std::string>());
  spec.noise_sigma = j.at("noise_sigma").get<double>();
  spec.noise_law = noise_law_from_name(j.at("noise_law").get<std::string>());
  spec.c_x = j.at("c_x").get<double>();
  spec.c_y = j.at("c_y").get<double>();
  spec.seed = j.at("seed").get<std::uint64_t>();
  spec.target.kind = target_kind_from_name(j.at("target").at("kind").get<std::string>());
  spec.target.w_star = j.at("target").at("w_star").get<Vector>();
  spec.validate();
  return spec;
}

/// Columns x_1..x_d, y at full precision.
inline std::string dataset_to_csv(const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("dataset_to_csv: empty dataset");
  const std::size_t d = data[0].x.size();
  std::vector<std::string> header;
  for (std::size_t i = 1; i <= d; ++i) header.push_back("x_" + std::to_string(i));
  header.push_back("y");
  CsvBuilder csv(header);
  for (const auto& z : data.samples) {
    std::vector<std::string> row;
    row.reserve(d + 1);
    for (double v : z.x) row.push_back(format_double(v));
    row.push_back(format_double(z.y));
    csv.append_row(row);
  }
  return csv.str();
}

inline Dataset dataset_from_csv(const std::string& text) {
  Dataset data;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("dataset_from_csv: empty input");
  const std::size_t d = std::count(line.begin(), line.end(), ',');  // header has d x-columns + y
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Sample z;
    z.x.reserve(d);
    std::istringstream row(line);
    std::string cell;
    std::vector<double> values;
    while (std::getline(row, cell, ',')) values.push_back(std::strtod(cell.c_str(), nullptr));
    if (values.size() != d + 1) throw std::invalid_argument("dataset_from_csv: ragged row");
    z.x.assign(values.begin(), values.end() - 1);
    z.y = values.back();
    data.samples.push_back(std::move(z));
  }
  return data;
}

/// Columns t, risk, path_norm, grad_norm for every recorded point.
inline std::string trajectory_to_csv(const Trajectory& traj) {
  CsvBuilder csv({"t", "risk", "path_norm", "grad_norm"});
  for (const auto& p : traj.points)
    csv.append_row({std::to_string(p.t), format_double(p.risk), format_double(p.path_norm),
                    format_double(p.grad_norm)});
  return csv.str();
}

}  // namespace gdlab

#include "partfit/model_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "partfit/errors.hpp"

namespace partfit {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

// Pulls the next whitespace-separated token; hard error on truncation.
template <typename T>
T next(std::istream& in, const char* what) {
  T v;
  if (!(in >> v)) throw FormatError(std::string("model file: expected ") + what);
  return v;
}

void expect(std::istream& in, const std::string& token) {
  std::string got;
  if (!(in >> got) || got != token) {
    throw FormatError("model file: expected '" + token + "', got '" + got +
                      "'");
  }
}

}  // namespace

void write_model(const std::filesystem::path& path,
                 const BlendshapeModel& model) {
  model.validate();
  std::ofstream out = open_output(path);
  const int n = model.vertex_count();
  out << "partfit-model 1\n";
  out << n << ' ' << model.id_dims() << ' ' << model.exp_dims() << '\n';
  out << "mean:\n";
  for (int i = 0; i < n; ++i) {
    out << fmt(model.mean_shape(0, i)) << ' ' << fmt(model.mean_shape(1, i))
        << ' ' << fmt(model.mean_shape(2, i)) << '\n';
  }
  out << "identity:\n";
  for (int j = 0; j < model.id_dims(); ++j) {
    for (int r = 0; r < 3 * n; ++r) {
      if (r) out << ' ';
      out << fmt(model.identity_basis(r, j));
    }
    out << '\n';
  }
  out << "expression:\n";
  for (int j = 0; j < model.exp_dims(); ++j) {
    for (int r = 0; r < 3 * n; ++r) {
      if (r) out << ' ';
      out << fmt(model.expression_basis(r, j));
    }
    out << '\n';
  }
  for (PartLabel part : kAllParts) {
    out << "part " << part_name(part) << ':';
    for (int i : model.part_indices(part)) out << ' ' << i;
    out << '\n';
  }
  out << "landmarks:";
  for (int i : model.landmark_indices) out << ' ' << i;
  out << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

BlendshapeModel read_model(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  expect(in, "partfit-model");
  int version = next<int>(in, "format version");
  if (version != 1) {
    throw FormatError("unsupported model format version " +
                      std::to_string(version));
  }
  int n = next<int>(in, "vertex count");
  int kid = next<int>(in, "identity dims");
  int kexp = next<int>(in, "expression dims");
  if (n < 1 || kid < 0 || kexp < 0) {
    throw FormatError("model file: invalid header sizes");
  }
  BlendshapeModel model;
  expect(in, "mean:");
  model.mean_shape.resize(3, n);
  for (int i = 0; i < n; ++i) {
    for (int r = 0; r < 3; ++r) {
      model.mean_shape(r, i) = next<double>(in, "mean coordinate");
    }
  }
  expect(in, "identity:");
  model.identity_basis.resize(3 * n, kid);
  for (int j = 0; j < kid; ++j) {
    for (int r = 0; r < 3 * n; ++r) {
      model.identity_basis(r, j) = next<double>(in, "identity basis value");
    }
  }
  expect(in, "expression:");
  model.expression_basis.resize(3 * n, kexp);
  for (int j = 0; j < kexp; ++j) {
    for (int r = 0; r < 3 * n; ++r) {
      model.expression_basis(r, j) = next<double>(in, "expression basis value");
    }
  }
  for (PartLabel part : kAllParts) {
    expect(in, "part");
    std::string name = next<std::string>(in, "part name");
    if (name != std::string(part_name(part)) + ":") {
      throw FormatError("model file: expected part '" +
                        std::string(part_name(part)) + "', got '" + name +
                        "'");
    }
    std::string rest;
    std::getline(in, rest);
    std::istringstream line(rest);
    std::vector<int> ids;
    int idx;
    while (line >> idx) ids.push_back(idx);
    if (!ids.empty()) model.part_annotation[part] = std::move(ids);
  }
  expect(in, "landmarks:");
  {
    std::string rest;
    std::getline(in, rest);
    std::istringstream line(rest);
    int idx;
    while (line >> idx) model.landmark_indices.push_back(idx);
  }
  model.validate();
  return model;
}

void write_annotation(
    const std::filesystem::path& path,
    const std::map<PartLabel, std::vector<int>>& annotation) {
  std::ofstream out = open_output(path);
  for (PartLabel part : kAllParts) {
    auto it = annotation.find(part);
    out << part_code(part) << ':';
    if (it != annotation.end()) {
      for (int i : it->second) out << ' ' << i;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::map<PartLabel, std::vector<int>> read_annotation(
    const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::map<PartLabel, std::vector<int>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto colon = line.find(':');
    if (colon == std::string::npos) {
      throw FormatError("annotation line " + std::to_string(lineno) +
                        ": missing ':'");
    }
    int code;
    try {
      code = std::stoi(line.substr(0, colon));
    } catch (const std::exception&) {
      throw FormatError("annotation line " + std::to_string(lineno) +
                        ": bad part code");
    }
    auto part = part_from_code(code);
    if (!part) {
      throw FormatError("annotation line " + std::to_string(lineno) +
                        ": unknown part code " + std::to_string(code));
    }
    std::istringstream rest(line.substr(colon + 1));
    std::vector<int> ids;
    int idx;
    while (rest >> idx) ids.push_back(idx);
    if (!rest.eof()) {
      throw FormatError("annotation line " + std::to_string(lineno) +
                        ": trailing junk");
    }
    if (!ids.empty()) out[*part] = std::move(ids);
  }
  return out;
}

void write_params(const std::filesystem::path& path, const ShapeParams& p) {
  nlohmann::json j;
  j["id"] = std::vector<double>(p.id.data(), p.id.data() + p.id.size());
  j["exp"] = std::vector<double>(p.exp.data(), p.exp.data() + p.exp.size());
  j["angles"] = std::vector<double>{p.angles[0], p.angles[1], p.angles[2]};
  j["translation"] =
      std::vector<double>{p.translation[0], p.translation[1],
                          p.translation[2]};
  std::ofstream out = open_output(path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

ShapeParams read_params(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("params file " + path.string() + ": " + e.what());
  }
  ShapeParams p;
  try {
    std::vector<double> id = j.at("id").get<std::vector<double>>();
    std::vector<double> exp = j.at("exp").get<std::vector<double>>();
    std::vector<double> angles = j.at("angles").get<std::vector<double>>();
    std::vector<double> t = j.at("translation").get<std::vector<double>>();
    if (angles.size() != 3 || t.size() != 3) {
      throw FormatError("params file: angles and translation need 3 entries");
    }
    p.id = Eigen::Map<const Eigen::VectorXd>(id.data(),
                                             static_cast<long>(id.size()));
    p.exp = Eigen::Map<const Eigen::VectorXd>(exp.data(),
                                              static_cast<long>(exp.size()));
    p.angles = Eigen::Vector3d(angles[0], angles[1], angles[2]);
    p.translation = Eigen::Vector3d(t[0], t[1], t[2]);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("params file " + path.string() + ": " + e.what());
  }
  return p;
}

}  // namespace partfit

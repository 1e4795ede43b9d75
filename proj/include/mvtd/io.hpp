#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvtd/errors.hpp"
#include "mvtd/mdp.hpp"

namespace mvtd {

using json = nlohmann::json;

// --- MDP file format -------------------------------------------------------
// JSON document with fields num_states, num_actions, gamma, r_max,
// transitions (nested [s][a][s']), rewards (nested [s][a]).

inline json mdp_to_json(const Mdp& mdp) {
  json doc;
  doc["num_states"] = mdp.num_states;
  doc["num_actions"] = mdp.num_actions;
  doc["gamma"] = mdp.gamma;
  doc["r_max"] = mdp.r_max;
  json transitions = json::array();
  for (int s = 0; s < mdp.num_states; ++s) {
    json per_action = json::array();
    for (int a = 0; a < mdp.num_actions; ++a) {
      json row = json::array();
      for (int sn = 0; sn < mdp.num_states; ++sn)
        row.push_back(mdp.transitions[a](s, sn));
      per_action.push_back(std::move(row));
    }
    transitions.push_back(std::move(per_action));
  }
  doc["transitions"] = std::move(transitions);
  json rewards = json::array();
  for (int s = 0; s < mdp.num_states; ++s) {
    json row = json::array();
    for (int a = 0; a < mdp.num_actions; ++a) row.push_back(mdp.rewards(s, a));
    rewards.push_back(std::move(row));
  }
  doc["rewards"] = std::move(rewards);
  return doc;
}

inline Mdp mdp_from_json(const json& doc) {
  try {
    Mdp m;
    m.num_states = doc.at("num_states").get<int>();
    m.num_actions = doc.at("num_actions").get<int>();
    m.gamma = doc.at("gamma").get<double>();
    m.r_max = doc.contains("r_max")
                  ? doc.at("r_max").get<double>()
                  : std::numeric_limits<double>::quiet_NaN();
    m.transitions.assign(m.num_actions, Matrix::Zero(m.num_states,
                                                     m.num_states));
    m.rewards = Matrix::Zero(m.num_states, m.num_actions);
    const json& tr = doc.at("transitions");
    const json& rw = doc.at("rewards");
    for (int s = 0; s < m.num_states; ++s)
      for (int a = 0; a < m.num_actions; ++a) {
        for (int sn = 0; sn < m.num_states; ++sn)
          m.transitions[a](s, sn) = tr.at(s).at(a).at(sn).get<double>();
        m.rewards(s, a) = rw.at(s).at(a).get<double>();
      }
    return validate_mdp(std::move(m));
  } catch (const json::exception& e) {
    throw FileParseError(std::string("MDP document: ") + e.what());
  }
}

inline void save_mdp(const Mdp& mdp, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FileParseError("cannot open " + path + " for writing");
  out << mdp_to_json(mdp).dump(2) << "\n";
}

inline Mdp load_mdp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileParseError("cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw FileParseError(path + ": " + e.what());
  }
  return mdp_from_json(doc);
}

// --- checksums --------------------------------------------------------------

inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileParseError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string file_checksum(const std::string& path) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a:%016llx",
                static_cast<unsigned long long>(fnv1a(read_file(path))));
  return buf;
}

// --- CSV --------------------------------------------------------------------

// Deterministic float formatting: shortest round-trip representation via
// %.17g, identical across runs on a given platform.
inline std::string csv_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns)
      : path_(path), out_(path) {
    if (!out_) throw FileParseError("cannot open " + path + " for writing");
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) out_ << ',';
      out_ << columns[i];
    }
    out_ << '\n';
    n_cols_ = columns.size();
  }

  void begin_row() { col_ = 0; }
  CsvWriter& field(long v) {
    sep();
    out_ << v;
    return *this;
  }
  CsvWriter& field(double v) {
    sep();
    out_ << csv_double(v);
    return *this;
  }
  CsvWriter& field(const std::string& v) {
    sep();
    out_ << v;
    return *this;
  }
  void end_row() {
    if (col_ != n_cols_)
      throw ConstraintViolation("row width mismatch in " + path_);
    out_ << '\n';
  }
  const std::string& path() const { return path_; }

 private:
  void sep() {
    if (col_) out_ << ',';
    ++col_;
  }
  std::string path_;
  std::ofstream out_;
  std::size_t n_cols_ = 0;
  std::size_t col_ = 0;
};

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

}  // namespace mvtd

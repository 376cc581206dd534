#pragma once

// Parameter files. Text, versioned, one block per parameter:
//
//   mrn-params 1
//   count <N>
//   <name> <rows> <cols>
//   <row-major values, one matrix row per line>
//   ...
//
// Values are printed with 17 significant digits so doubles round-trip
// exactly. Loading checks names and shapes against the receiving network.

#include "mrn/autodiff.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrn {

inline constexpr int kParamsFormatVersion = 1;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename Scalar>
void write_parameters(std::ostream& os, const std::vector<const Parameter<Scalar>*>& params) {
  os << "mrn-params " << kParamsFormatVersion << "\n";
  os << "count " << params.size() << "\n";
  for (const auto* p : params) {
    os << p->name << " " << p->value.rows() << " " << p->value.cols() << "\n";
    for (Index r = 0; r < p->value.rows(); ++r) {
      for (Index c = 0; c < p->value.cols(); ++c) {
        if (c > 0) os << ' ';
        os << format_real(static_cast<double>(p->value(r, c)));
      }
      os << "\n";
    }
  }
}

template <typename Scalar>
void read_parameters(std::istream& is, const std::vector<Parameter<Scalar>*>& params) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != "mrn-params") throw FormatError("parameter file: missing header");
  if (version != kParamsFormatVersion) {
    throw FormatError("parameter file: unsupported version " + std::to_string(version));
  }
  std::string key;
  std::size_t count = 0;
  if (!(is >> key >> count) || key != "count") throw FormatError("parameter file: missing count");
  if (count != params.size()) {
    throw FormatError("parameter file: holds " + std::to_string(count) + " parameters, network has " +
                      std::to_string(params.size()));
  }
  for (auto* p : params) {
    std::string name;
    Index rows = 0;
    Index cols = 0;
    if (!(is >> name >> rows >> cols)) throw FormatError("parameter file: truncated block header");
    if (name != p->name || rows != p->value.rows() || cols != p->value.cols()) {
      throw FormatError("parameter file: block '" + name + "' " + shape_string(rows, cols) + " does not match '" +
                        p->name + "' " + shape_string(p->value.rows(), p->value.cols()));
    }
    for (Index k = 0; k < p->value.size(); ++k) {
      double v = 0.0;
      if (!(is >> v)) throw FormatError("parameter file: truncated values in '" + name + "'");
      p->value.data()[k] = static_cast<Scalar>(v);
    }
    p->zero_grad();
  }
}

template <typename Scalar>
void save_parameters(const std::string& path, const std::vector<const Parameter<Scalar>*>& params) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_parameters(os, params);
}

template <typename Scalar>
void load_parameters(const std::string& path, const std::vector<Parameter<Scalar>*>& params) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  read_parameters(is, params);
}

}  // namespace mrn

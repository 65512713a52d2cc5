// SPDX-License-Identifier: Apache-2.0
//
// Text format for Hermitian matrices, shared between the library and the
// CLI. First line holds the dimension N, then N rows of N entries written
// as "re+imj" (e.g. "1.5-0.25j") separated by whitespace. Files are
// Hermitian-validated on load.

#pragma once

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "qmibeam/hermitian.hpp"

namespace qmibeam {

struct MatrixIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline Complex parse_complex_entry(const std::string& tok) {
  if (tok.empty() || tok.back() != 'j')
    throw MatrixIoError("matrix entry must end in 'j': \"" + tok + "\"");
  const std::string body = tok.substr(0, tok.size() - 1);
  // split at the sign of the imaginary part: last +/- not preceded by e/E
  // and not at position 0
  size_t split = std::string::npos;
  for (size_t i = body.size(); i-- > 1;) {
    const char c = body[i];
    if ((c == '+' || c == '-') && body[i - 1] != 'e' && body[i - 1] != 'E') {
      split = i;
      break;
    }
  }
  if (split == std::string::npos)
    throw MatrixIoError("matrix entry must look like re+imj: \"" + tok + "\"");
  const std::string re_s = body.substr(0, split);
  const std::string im_s = body.substr(split);
  size_t pos_re = 0, pos_im = 0;
  double re = 0.0, im = 0.0;
  try {
    re = std::stod(re_s, &pos_re);
    im = std::stod(im_s, &pos_im);
  } catch (const std::exception&) {
    throw MatrixIoError("cannot parse matrix entry: \"" + tok + "\"");
  }
  if (pos_re != re_s.size() || pos_im != im_s.size())
    throw MatrixIoError("trailing characters in matrix entry: \"" + tok + "\"");
  return Complex(re, im);
}

}  // namespace detail

inline HermitianMatrix read_hermitian(std::istream& in, const std::string& origin = "<stream>") {
  Eigen::Index n = 0;
  if (!(in >> n) || n < 1) throw MatrixIoError(origin + ": bad dimension line");
  CMatrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < n; ++k) {
      std::string tok;
      if (!(in >> tok))
        throw MatrixIoError(origin + ": expected " + std::to_string(n * n) + " entries");
      m(i, k) = detail::parse_complex_entry(tok);
    }
  }
  try {
    return HermitianMatrix(m);
  } catch (const std::invalid_argument& e) {
    throw MatrixIoError(origin + ": " + e.what());
  }
}

inline HermitianMatrix load_hermitian(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw MatrixIoError("cannot open matrix file: " + path);
  return read_hermitian(f, path);
}

inline void write_hermitian(std::ostream& out, const HermitianMatrix& m) {
  const Eigen::Index n = m.dim();
  out << n << "\n";
  char buf[80];
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < n; ++k) {
      const Complex v = m.mat()(i, k);
      std::snprintf(buf, sizeof(buf), "%.17g%+.17gj", v.real(), v.imag());
      out << buf << (k + 1 < n ? " " : "");
    }
    out << "\n";
  }
}

inline void save_hermitian(const std::string& path, const HermitianMatrix& m) {
  std::ofstream f(path);
  if (!f) throw MatrixIoError("cannot open matrix file for writing: " + path);
  write_hermitian(f, m);
}

}  // namespace qmibeam

#pragma once

#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hdivmg/common.hpp"

namespace hdivmg {

/// Column order of the benchmark CSV, one row per solved configuration.
/// Numeric cells without a value stay empty; runs whose solver broke down
/// carry status NA and keep whatever diagnostics were gathered before.
inline constexpr const char* kCsvHeader =
    "run_id,subcommand,k,level,nu,beta,m,cycle,outer,inner_iters,"
    "avg_picard,avg_newton,e_u,e_L,e_ustar,div_u,eoc_u,eoc_L,eoc_ustar,status";

struct CsvRow {
  int run_id = 0;
  std::string subcommand;
  int k = 0;
  int level = 0;
  Real nu = 1.0;
  Real beta = 0.0;
  int m = 1;
  std::string cycle;
  int outer = 0;
  std::vector<int> inner_iters;  // joined with ';' inside the cell
  std::optional<Real> avg_picard, avg_newton;
  std::optional<Real> e_u, e_L, e_ustar, div_u;
  std::optional<Real> eoc_u, eoc_L, eoc_ustar;
  std::string status = "ok";
};

namespace detail {

inline std::string csv_number(Real v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

inline std::string csv_optional(const std::optional<Real>& v) {
  return v ? csv_number(*v) : std::string();
}

}  // namespace detail

inline void write_csv_header(std::ostream& os) { os << kCsvHeader << '\n'; }

inline void write_csv_row(std::ostream& os, const CsvRow& row) {
  std::string inner;
  for (std::size_t i = 0; i < row.inner_iters.size(); ++i) {
    if (i > 0) inner += ';';
    inner += std::to_string(row.inner_iters[i]);
  }
  os << row.run_id << ',' << row.subcommand << ',' << row.k << ',' << row.level
     << ',' << detail::csv_number(row.nu) << ',' << detail::csv_number(row.beta)
     << ',' << row.m << ',' << row.cycle << ',' << row.outer << ',' << inner
     << ',' << detail::csv_optional(row.avg_picard) << ','
     << detail::csv_optional(row.avg_newton) << ','
     << detail::csv_optional(row.e_u) << ',' << detail::csv_optional(row.e_L)
     << ',' << detail::csv_optional(row.e_ustar) << ','
     << detail::csv_optional(row.div_u) << ',' << detail::csv_optional(row.eoc_u)
     << ',' << detail::csv_optional(row.eoc_L) << ','
     << detail::csv_optional(row.eoc_ustar) << ',' << row.status << '\n';
}

/// Sparse matrix in MatrixMarket coordinate format, 1-based indices,
/// full precision so a dump can stand in for the assembled operator.
inline void write_matrix_market(std::ostream& os, const SpMat& A) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << A.rows() << ' ' << A.cols() << ' ' << A.nonZeros() << '\n';
  os.precision(17);
  for (int c = 0; c < A.outerSize(); ++c)
    for (SpMat::InnerIterator it(A, c); it; ++it)
      os << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
}

}  // namespace hdivmg

#include "gencov/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace gencov {

void validate_dataset(const Dataset& ds) {
  if (ds.covariates.rows() != ds.outcome.size() ||
      static_cast<std::size_t>(ds.covariates.rows()) != ds.ids.size()) {
    fail(ErrorKind::shape, "dataset: ids, covariates, outcome sizes differ");
  }
  std::unordered_map<std::string, int> seen;
  seen.reserve(ds.ids.size());
  for (std::size_t i = 0; i < ds.ids.size(); ++i) {
    if (!seen.emplace(ds.ids[i], static_cast<int>(i)).second) {
      fail(ErrorKind::data, "dataset: duplicate sample id '" + ds.ids[i] + "'");
    }
  }
  if (!ds.covariates.allFinite()) {
    fail(ErrorKind::data, "dataset: non-finite covariate entry");
  }
  if (!ds.outcome.allFinite()) {
    fail(ErrorKind::data, "dataset: non-finite outcome entry");
  }
  if (ds.outcome_kind == OutcomeKind::binary) {
    for (Eigen::Index i = 0; i < ds.outcome.size(); ++i) {
      if (ds.outcome[i] != 0.0 && ds.outcome[i] != 1.0) {
        fail(ErrorKind::data,
             "dataset: binary outcome must be 0 or 1, found " +
                 std::to_string(ds.outcome[i]) + " at row " +
                 std::to_string(i + 1));
      }
    }
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_cell(const std::string& cell, std::size_t row,
                  const std::string& col) {
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  while (last != first && (*(last - 1) == ' ' || *(last - 1) == '\t')) --last;
  double value = 0.0;
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last || !std::isfinite(value)) {
    fail(ErrorKind::parse, "CSV: non-numeric cell '" + cell + "' at row " +
                               std::to_string(row) + ", column '" + col + "'");
  }
  return value;
}

}  // namespace

Dataset load_dataset(const std::string& path, const std::string& id_column,
                     const std::string& outcome_column, OutcomeKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::parse, "CSV: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = split_csv_line(line);
  int id_pos = -1, outcome_pos = -1;
  std::vector<int> cov_pos;
  std::vector<std::string> cov_names;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == id_column) {
      id_pos = static_cast<int>(j);
    } else if (header[j] == outcome_column) {
      outcome_pos = static_cast<int>(j);
    } else {
      cov_pos.push_back(static_cast<int>(j));
      cov_names.push_back(header[j]);
    }
  }
  if (id_pos < 0) {
    fail(ErrorKind::config, "CSV: id column '" + id_column + "' not found");
  }
  if (outcome_pos < 0) {
    fail(ErrorKind::config,
         "CSV: outcome column '" + outcome_column + "' not found");
  }
  if (cov_pos.empty()) {
    fail(ErrorKind::config, "CSV: no covariate columns in '" + path + "'");
  }

  std::vector<std::string> ids;
  std::vector<double> outcome;
  std::vector<double> cells;  // row-major covariate buffer
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      fail(ErrorKind::parse,
           "CSV: row " + std::to_string(row) + " has " +
               std::to_string(fields.size()) + " fields, expected " +
               std::to_string(header.size()));
    }
    ids.push_back(fields[id_pos]);
    outcome.push_back(parse_cell(fields[outcome_pos], row, outcome_column));
    for (std::size_t k = 0; k < cov_pos.size(); ++k) {
      cells.push_back(parse_cell(fields[cov_pos[k]], row, cov_names[k]));
    }
  }

  const auto n = static_cast<Eigen::Index>(ids.size());
  const auto p = static_cast<Eigen::Index>(cov_pos.size());
  Dataset ds;
  ds.ids = std::move(ids);
  ds.covariate_names = std::move(cov_names);
  ds.outcome = Eigen::Map<Eigen::VectorXd>(outcome.data(), n);
  ds.covariates =
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                               Eigen::RowMajor>>(cells.data(), n, p);
  ds.outcome_kind = kind;
  validate_dataset(ds);
  return ds;
}

void write_dataset(const Dataset& ds, const std::string& path,
                   const std::string& id_column,
                   const std::string& outcome_column) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write '" + path + "'");
  char buf[64];

  out << id_column << ',' << outcome_column;
  for (std::size_t j = 0; j < ds.covariate_names.size(); ++j) {
    out << ',' << ds.covariate_names[j];
  }
  out << '\n';
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    out << ds.ids[i];
    std::snprintf(buf, sizeof(buf), ",%.17g", ds.outcome[i]);
    out << buf;
    for (Eigen::Index j = 0; j < ds.p(); ++j) {
      std::snprintf(buf, sizeof(buf), ",%.17g", ds.covariates(i, j));
      out << buf;
    }
    out << '\n';
  }
  if (!out) fail(ErrorKind::io, "short write to '" + path + "'");
}

AlignedData align_samples(const Dataset& ds_y, const Dataset& ds_z) {
  validate_dataset(ds_y);
  validate_dataset(ds_z);
  if (ds_y.p() != ds_z.p()) {
    fail(ErrorKind::shape, "align: covariate counts differ (" +
                               std::to_string(ds_y.p()) + " vs " +
                               std::to_string(ds_z.p()) + ")");
  }

  std::unordered_map<std::string, int> y_row;
  y_row.reserve(ds_y.ids.size());
  for (std::size_t i = 0; i < ds_y.ids.size(); ++i) {
    y_row.emplace(ds_y.ids[i], static_cast<int>(i));
  }

  AlignedData out;
  IndexSets& idx = out.index;
  idx.n_y = static_cast<int>(ds_y.n());
  idx.n_z = static_cast<int>(ds_z.n());

  // Union order: all of the y study first, then z-only ids in input order.
  std::vector<int> z_union_pos(ds_z.n(), -1);
  int n_extra = 0;
  for (Eigen::Index i = 0; i < ds_z.n(); ++i) {
    const auto it = y_row.find(ds_z.ids[i]);
    if (it != y_row.end()) {
      if (ds_y.covariates.row(it->second) != ds_z.covariates.row(i)) {
        fail(ErrorKind::alignment,
             "align: shared id '" + ds_z.ids[i] +
                 "' has different covariates in the two studies");
      }
      z_union_pos[i] = it->second;
      idx.idx_overlap.push_back(it->second);
    } else {
      z_union_pos[i] = idx.n_y + n_extra;
      ++n_extra;
    }
  }
  std::sort(idx.idx_overlap.begin(), idx.idx_overlap.end());
  idx.n_o = static_cast<int>(idx.idx_overlap.size());
  idx.n_union = idx.n_y + n_extra;

  idx.idx_y.resize(idx.n_y);
  for (int i = 0; i < idx.n_y; ++i) idx.idx_y[i] = i;
  idx.idx_z.assign(z_union_pos.begin(), z_union_pos.end());

  out.covariates.resize(idx.n_union, ds_y.p());
  out.covariates.topRows(idx.n_y) = ds_y.covariates;
  out.ids = ds_y.ids;
  out.ids.resize(idx.n_union);
  for (Eigen::Index i = 0; i < ds_z.n(); ++i) {
    const int pos = z_union_pos[i];
    if (pos >= idx.n_y) {
      out.covariates.row(pos) = ds_z.covariates.row(i);
      out.ids[pos] = ds_z.ids[i];
    }
  }

  out.y = ds_y.outcome;
  out.z = ds_z.outcome;
  return out;
}

}  // namespace gencov

#ifndef GENCOV_DATASET_HPP
#define GENCOV_DATASET_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gencov/error.hpp"

namespace gencov {

enum class OutcomeKind { continuous, binary };

// One study: unique sample ids, an n x p covariate matrix, and the outcome.
// Row i of covariates belongs to ids[i]. Immutable after construction.
struct Dataset {
  std::vector<std::string> ids;
  Eigen::MatrixXd covariates;
  Eigen::VectorXd outcome;
  OutcomeKind outcome_kind = OutcomeKind::continuous;
  std::vector<std::string> covariate_names;

  Eigen::Index n() const { return covariates.rows(); }
  Eigen::Index p() const { return covariates.cols(); }
};

// Validates the Dataset invariants: unique ids, finite entries, binary
// outcomes exactly 0/1. Throws on violation.
void validate_dataset(const Dataset& ds);

// Positions of each study inside the union ordering (ids of the y study in
// input order, then z-only ids in input order).
struct IndexSets {
  std::vector<int> idx_y;
  std::vector<int> idx_z;
  std::vector<int> idx_overlap;  // sorted ascending
  int n_y = 0;
  int n_z = 0;
  int n_o = 0;
  int n_union = 0;  // N = n_y + n_z - n_o
};

struct AlignedData {
  Eigen::MatrixXd covariates;  // N x p, union ordering
  IndexSets index;
  Eigen::VectorXd y;  // over idx_y order
  Eigen::VectorXd z;  // over idx_z order
  std::vector<std::string> ids;
};

// Merges two studies into a union design matrix. Any id present in both
// studies must carry bit-identical covariate rows.
AlignedData align_samples(const Dataset& ds_y, const Dataset& ds_z);

// CSV ingestion: header row, one id column (string), one outcome column,
// every remaining column a covariate in file order.
Dataset load_dataset(const std::string& path, const std::string& id_column,
                     const std::string& outcome_column,
                     OutcomeKind kind = OutcomeKind::continuous);

// Inverse of load_dataset; numeric cells round-trip bit for bit.
void write_dataset(const Dataset& ds, const std::string& path,
                   const std::string& id_column,
                   const std::string& outcome_column);

}  // namespace gencov

#endif

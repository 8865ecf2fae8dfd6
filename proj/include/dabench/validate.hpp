#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dabench/comm.hpp"

namespace dabench::validate {

/// The bundled reference table: 150 observations, 4 features, species coded
/// 1 = Setosa, 2 = Versicolor, 3 = Virginica, rows in a fixed pre-shuffled order.
struct IrisTable {
  std::vector<double> features;  // row-major nrows x 4
  std::vector<int> species;

  std::size_t nrows() const { return species.size(); }
};

enum class Test { kPca, kKmeans, kSvm };

struct ValidationReport {
  Test test = Test::kPca;
  bool passed = false;
  double metric = 0.0;     // MAE, best rand measure, or accuracy
  double threshold = 0.0;  // pass bound the metric was compared against
};

/// Raw bytes of the bundled iris table (comma-separated, header row).
std::string_view bundled_iris_csv();

/// Parses the bundled resource. Loading is bit-reproducible.
IrisTable load_iris();

/// Reads the same table from disk; the byte content is checksummed and must
/// match the bundled resource exactly.
IrisTable load_iris(const std::string& path);

/// Rand measure of two labelings: the fraction of item pairs on which the
/// partitions agree (co-clustered in both or separated in both).
double rand_measure(std::span<const int> a, std::span<const int> b);

/// Factors the iris features with the SVD kernel, multiplies the factors back
/// and checks the mean absolute reconstruction error against sqrt(machine
/// epsilon). Requires at least two ranks.
ValidationReport validate_pca(comm::Communicator& comm);

/// Runs seeded k-means (3 centroids, seeds 1..100, converged) on the iris
/// features and checks the best rand measure against the species labels
/// exceeds 0.75. Requires at least two ranks.
ValidationReport validate_kmeans(comm::Communicator& comm);

/// Fits the hinge-loss SVM (at most 500 iterations) on intercept + features
/// with response +1 for Setosa and -1 otherwise, and checks accuracy > 0.80.
/// Requires at least two ranks.
ValidationReport validate_svm(comm::Communicator& comm);

const char* test_name(Test t);

}  // namespace dabench::validate

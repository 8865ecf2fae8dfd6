#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace dabench::perfmodel {

/// One observed column: numeric, or categorical with string levels.
struct Column {
  std::string name;
  bool categorical = false;
  std::vector<double> numeric;
  std::vector<std::string> labels;
};

/// In-memory observation table. Columns read from CSV are auto-detected as
/// categorical when any cell fails to parse as a number.
class FactorTable {
 public:
  static FactorTable from_csv(const std::string& path);
  static FactorTable from_csv_text(std::string_view text);

  std::size_t nrows() const { return nrows_; }
  bool has_column(const std::string& name) const;
  const Column& column(const std::string& name) const;
  std::vector<std::string> column_names() const;
  void add_column(Column column);

  /// Adds the natural log of a positive numeric column under a new name.
  void add_log_column(const std::string& source, const std::string& name);

 private:
  std::vector<Column> columns_;
  std::size_t nrows_ = 0;
};

/// An OLS fit of response ~ intercept + terms. Categorical terms are
/// treatment-coded against the lexicographically first level.
struct LinearModelFit {
  std::string response;
  std::vector<std::string> terms;
  std::vector<std::string> coef_names;
  std::vector<double> coefficients;
  double rss = 0.0;
  std::size_t df_residual = 0;
  std::size_t n = 0;
};

struct AnovaRow {
  std::string term;
  double sum_sq = 0.0;
  std::size_t df = 0;
  double f_value = 0.0;
  double p_value = 1.0;
};

/// Drop-one decomposition: each term's sum of squares is the RSS increase from
/// removing it from the full model.
struct AnovaTable {
  std::vector<AnovaRow> rows;
  double residual_sum_sq = 0.0;
  std::size_t residual_df = 0;
};

LinearModelFit ols_fit(const FactorTable& table, const std::string& response,
                       const std::vector<std::string>& terms);

/// n * ln(RSS/n) + 2 * (k + 1), where k counts the estimated coefficients and
/// the +1 counts the error variance. The additive Gaussian constant
/// n * ln(2*pi) + n is omitted; only AIC differences matter for selection.
double aic(const LinearModelFit& fit);

/// Greedy search from the full first-order model: repeatedly apply the single
/// add-or-drop move that most decreases AIC until no move decreases it.
/// Ties break by term name order.
LinearModelFit stepwise_aic(const FactorTable& table, const std::string& response,
                            const std::vector<std::string>& candidates);

AnovaTable anova(const LinearModelFit& fit, const FactorTable& table);

/// Upper tail of the F distribution via the regularized incomplete beta
/// function (continued fraction, 1e-12 convergence tolerance).
double f_pvalue(double F, std::size_t df1, std::size_t df2);

std::string format_fit(const LinearModelFit& fit);
std::string format_anova(const AnovaTable& table);

}  // namespace dabench::perfmodel

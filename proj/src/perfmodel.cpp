#include "dabench/perfmodel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dabench/errors.hpp"

namespace dabench::perfmodel {

namespace {

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::optional<double> parse_number(std::string_view cell) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end || cell.empty()) return std::nullopt;
  return value;
}

// Treatment-coded design matrix: intercept plus, per term, either the numeric
// column or level indicators against the lexicographically first level.
struct Design {
  std::vector<double> x;  // row-major n x ncols
  std::size_t ncols = 0;
  std::vector<std::string> col_names;
  std::vector<std::string> col_terms;  // owning term per column, "" = intercept
};

std::vector<std::string> sorted_levels(const Column& col) {
  std::set<std::string> levels(col.labels.begin(), col.labels.end());
  return {levels.begin(), levels.end()};
}

Design build_design(const FactorTable& table, const std::vector<std::string>& terms) {
  const std::size_t n = table.nrows();
  Design d;
  d.col_names.push_back("(Intercept)");
  d.col_terms.push_back("");
  std::vector<std::vector<double>> cols;
  cols.push_back(std::vector<double>(n, 1.0));

  for (const auto& term : terms) {
    const Column& col = table.column(term);
    if (!col.categorical) {
      cols.push_back(col.numeric);
      d.col_names.push_back(term);
      d.col_terms.push_back(term);
      continue;
    }
    const auto levels = sorted_levels(col);
    if (levels.size() < 2) {
      throw std::invalid_argument("term '" + term + "' has a single level");
    }
    for (std::size_t l = 1; l < levels.size(); ++l) {
      std::vector<double> indicator(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) indicator[i] = col.labels[i] == levels[l] ? 1.0 : 0.0;
      cols.push_back(std::move(indicator));
      d.col_names.push_back(term + levels[l]);
      d.col_terms.push_back(term);
    }
  }

  d.ncols = cols.size();
  d.x.resize(n * d.ncols);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d.ncols; ++j) d.x[i * d.ncols + j] = cols[j][i];
  return d;
}

std::size_t term_df(const FactorTable& table, const std::string& term) {
  const Column& col = table.column(term);
  if (!col.categorical) return 1;
  return sorted_levels(col).size() - 1;
}

// Least squares by Householder QR; throws naming the aliased term when the
// design is rank deficient.
std::vector<double> qr_solve(const Design& design, std::vector<double> y, std::size_t n,
                             double* rss_out) {
  const std::size_t k = design.ncols;
  std::vector<double> a = design.x;  // n x k, overwritten by the factorization

  std::vector<double> col_norm(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i * k + j] * a[i * k + j];
    col_norm[j] = std::sqrt(s);
  }

  for (std::size_t j = 0; j < k; ++j) {
    double norm = 0.0;
    for (std::size_t i = j; i < n; ++i) norm += a[i * k + j] * a[i * k + j];
    norm = std::sqrt(norm);
    if (norm <= 1e-10 * std::max(col_norm[j], 1.0)) {
      throw std::invalid_argument("design is rank deficient: term '" + design.col_terms[j] +
                                  "' (column " + design.col_names[j] +
                                  ") is aliased by earlier terms");
    }
    const double alpha = a[j * k + j] >= 0.0 ? -norm : norm;
    std::vector<double> v(n - j);
    v[0] = a[j * k + j] - alpha;
    for (std::size_t i = j + 1; i < n; ++i) v[i - j] = a[i * k + j];
    double vnorm2 = 0.0;
    for (double t : v) vnorm2 += t * t;
    a[j * k + j] = alpha;
    for (std::size_t i = j + 1; i < n; ++i) a[i * k + j] = 0.0;
    if (vnorm2 == 0.0) continue;
    for (std::size_t c = j + 1; c < k; ++c) {
      double dot = 0.0;
      for (std::size_t i = j; i < n; ++i) dot += v[i - j] * a[i * k + c];
      const double f = 2.0 * dot / vnorm2;
      for (std::size_t i = j; i < n; ++i) a[i * k + c] -= f * v[i - j];
    }
    double dot = 0.0;
    for (std::size_t i = j; i < n; ++i) dot += v[i - j] * y[i];
    const double f = 2.0 * dot / vnorm2;
    for (std::size_t i = j; i < n; ++i) y[i] -= f * v[i - j];
  }

  std::vector<double> beta(k, 0.0);
  for (std::size_t jj = k; jj-- > 0;) {
    double s = y[jj];
    for (std::size_t c = jj + 1; c < k; ++c) s -= a[jj * k + c] * beta[c];
    beta[jj] = s / a[jj * k + jj];
  }

  if (rss_out != nullptr) {
    double rss = 0.0;
    for (std::size_t i = k; i < n; ++i) rss += y[i] * y[i];
    *rss_out = rss;
  }
  return beta;
}

std::vector<double> response_vector(const FactorTable& table, const std::string& response) {
  const Column& col = table.column(response);
  if (col.categorical) {
    throw std::invalid_argument("response '" + response + "' is not numeric");
  }
  return col.numeric;
}

std::string formula(const LinearModelFit& fit) {
  std::string rhs;
  for (const auto& t : fit.terms) {
    if (!rhs.empty()) rhs += " + ";
    rhs += t;
  }
  if (rhs.empty()) rhs = "1";
  return fit.response + " ~ " + rhs;
}

constexpr double kBetaTol = 1e-12;
constexpr int kBetaMaxIter = 500;

// Continued fraction for the regularized incomplete beta (modified Lentz).
double betacf(double a, double b, double x) {
  const double tiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kBetaMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kBetaTol) return h;
  }
  throw NumericError("incomplete beta continued fraction did not converge");
}

double betainc(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

}  // namespace

FactorTable FactorTable::from_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("from_csv: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_csv_text(buf.str());
}

FactorTable FactorTable::from_csv_text(std::string_view text) {
  std::vector<std::string> names;
  std::vector<std::vector<std::string>> cells;  // per column
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (lineno == 1) {
      for (const auto f : fields) names.emplace_back(f);
      cells.resize(names.size());
      continue;
    }
    if (fields.size() != names.size()) {
      throw ParseError("expected " + std::to_string(names.size()) + " fields, got " +
                       std::to_string(fields.size()),
                       lineno);
    }
    for (std::size_t j = 0; j < fields.size(); ++j) cells[j].emplace_back(fields[j]);
  }
  if (names.empty()) throw ParseError("missing header row", 1);

  FactorTable table;
  for (std::size_t j = 0; j < names.size(); ++j) {
    Column col;
    col.name = names[j];
    col.categorical = false;
    for (const auto& cell : cells[j]) {
      if (!parse_number(cell).has_value()) {
        col.categorical = true;
        break;
      }
    }
    if (col.categorical) {
      col.labels = cells[j];
    } else {
      col.numeric.reserve(cells[j].size());
      for (const auto& cell : cells[j]) col.numeric.push_back(*parse_number(cell));
    }
    table.add_column(std::move(col));
  }
  return table;
}

bool FactorTable::has_column(const std::string& name) const {
  for (const auto& c : columns_) {
    if (c.name == name) return true;
  }
  return false;
}

const Column& FactorTable::column(const std::string& name) const {
  for (const auto& c : columns_) {
    if (c.name == name) return c;
  }
  throw std::invalid_argument("no column named '" + name + "'");
}

std::vector<std::string> FactorTable::column_names() const {
  std::vector<std::string> names;
  names.reserve(columns_.size());
  for (const auto& c : columns_) names.push_back(c.name);
  return names;
}

void FactorTable::add_column(Column column) {
  const std::size_t rows = column.categorical ? column.labels.size() : column.numeric.size();
  if (!columns_.empty() && rows != nrows_) {
    throw std::invalid_argument("column '" + column.name + "' has " + std::to_string(rows) +
                                " rows, table has " + std::to_string(nrows_));
  }
  nrows_ = rows;
  columns_.push_back(std::move(column));
}

void FactorTable::add_log_column(const std::string& source, const std::string& name) {
  const Column& src = column(source);
  if (src.categorical) throw std::invalid_argument("cannot take log of factor '" + source + "'");
  Column out;
  out.name = name;
  out.numeric.reserve(src.numeric.size());
  for (double v : src.numeric) {
    if (!(v > 0.0)) {
      throw std::invalid_argument("log response needs positive values, got " + std::to_string(v));
    }
    out.numeric.push_back(std::log(v));
  }
  add_column(std::move(out));
}

LinearModelFit ols_fit(const FactorTable& table, const std::string& response,
                       const std::vector<std::string>& terms) {
  const auto y = response_vector(table, response);
  const std::size_t n = table.nrows();
  const auto design = build_design(table, terms);
  if (n <= design.ncols) {
    throw std::invalid_argument("ols_fit: " + std::to_string(design.ncols) +
                                " coefficients need more than " + std::to_string(n) +
                                " observations");
  }

  LinearModelFit fit;
  fit.response = response;
  fit.terms = terms;
  fit.coef_names = design.col_names;
  fit.n = n;
  fit.coefficients = qr_solve(design, y, n, &fit.rss);
  fit.df_residual = n - design.ncols;
  return fit;
}

double aic(const LinearModelFit& fit) {
  if (!(fit.rss > 0.0)) {
    throw NumericError("aic: undefined for RSS = 0 (perfect fit)");
  }
  const double n = static_cast<double>(fit.n);
  const double k = static_cast<double>(fit.coefficients.size());
  return n * std::log(fit.rss / n) + 2.0 * (k + 1.0);
}

LinearModelFit stepwise_aic(const FactorTable& table, const std::string& response,
                            const std::vector<std::string>& candidates) {
  std::vector<std::string> included(candidates);
  std::sort(included.begin(), included.end());
  included.erase(std::unique(included.begin(), included.end()), included.end());
  const std::vector<std::string> all= included;

  auto fit_of = [&](const std::vector<std::string>& terms) {
    return ols_fit(table, response, terms);
  };

  LinearModelFit current = fit_of(included);
  double current_aic = aic(current);
  while (true) {
    // candidate moves: drop any included term, add any excluded one
    double best_aic = current_aic;
    std::string best_term;
    bool best_is_drop = false;
    LinearModelFit best_fit;
    auto consider = [&](const std::vector<std::string>& terms, const std::string& moved,
                        bool is_drop) {
      auto fit = fit_of(terms);
      const double a = aic(fit);
      const bool better = a < best_aic - 1e-12;
      const bool tie_break =
          std::abs(a - best_aic) <= 1e-12 && !best_term.empty() && moved < best_term;
      if (better || tie_break) {
        best_aic = a;
        best_term = moved;
        best_is_drop = is_drop;
        best_fit = std::move(fit);
      }
    };
    for (const auto& t : included) {
      std::vector<std::string> reduced;
      for (const auto& u : included) {
        if (u != t) reduced.push_back(u);
      }
      consider(reduced, t, true);
    }
    for (const auto& t : all) {
      if (std::find(included.begin(), included.end(), t) != included.end()) continue;
      std::vector<std::string> extended = included;
      extended.push_back(t);
      std::sort(extended.begin(), extended.end());
      consider(extended, t, false);
    }
    if (best_term.empty()) return current;
    included = best_fit.terms;
    current = std::move(best_fit);
    current_aic = best_aic;
    (void)best_is_drop;
  }
}

AnovaTable anova(const LinearModelFit& fit, const FactorTable& table) {
  if (fit.terms.empty()) {
    throw std::invalid_argument("anova: fit has no non-intercept terms");
  }
  AnovaTable out;
  out.residual_sum_sq = fit.rss;
  out.residual_df = fit.df_residual;
  for (const auto& term : fit.terms) {
    std::vector<std::string> reduced;
    for (const auto& t : fit.terms) {
      if (t != term) reduced.push_back(t);
    }
    const auto dropped = ols_fit(table, fit.response, reduced);
    AnovaRow row;
    row.term = term;
    row.sum_sq = std::max(0.0, dropped.rss - fit.rss);
    row.df = term_df(table, term);
    const double denom = fit.rss / static_cast<double>(fit.df_residual);
    row.f_value = row.sum_sq / static_cast<double>(row.df) / denom;
    row.p_value = f_pvalue(row.f_value, row.df, fit.df_residual);
    out.rows.push_back(std::move(row));
  }
  return out;
}

double f_pvalue(double F, std::size_t df1, std::size_t df2) {
  if (!std::isfinite(F) || F < 0.0) throw std::invalid_argument("f_pvalue: F must be finite >= 0");
  if (df1 < 1 || df2 < 1) throw std::invalid_argument("f_pvalue: degrees of freedom must be >= 1");
  const double d1 = static_cast<double>(df1);
  const double d2 = static_cast<double>(df2);
  const double x = d2 / (d2 + d1 * F);
  return betainc(d2 / 2.0, d1 / 2.0, x);
}

std::string format_fit(const LinearModelFit& fit) {
  std::ostringstream os;
  os << "Selected model: " << formula(fit) << "\n\n";
  os << "Coefficients:\n";
  for (std::size_t i = 0; i < fit.coefficients.size(); ++i) {
    char line[128];
    std::snprintf(line, sizeof(line), "  %-20s %12.6g\n", fit.coef_names[i].c_str(),
                  fit.coefficients[i]);
    os << line;
  }
  char tail[128];
  std::snprintf(tail, sizeof(tail), "\nResidual sum of squares: %.6g on %zu degrees of freedom\n",
                fit.rss, fit.df_residual);
  os << tail;
  return os.str();
}

std::string format_anova(const AnovaTable& table) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-16s %10s %4s %10s %8s\n", "Term", "Sum Sq", "Df", "F value",
                "Pr(>F)");
  os << line;
  for (const auto& row : table.rows) {
    std::snprintf(line, sizeof(line), "%-16s %10.2f %4zu %10.2f %8.4f\n", row.term.c_str(),
                  row.sum_sq, row.df, row.f_value, row.p_value);
    os << line;
  }
  std::snprintf(line, sizeof(line), "%-16s %10.2f %4zu\n", "Residuals", table.residual_sum_sq,
                table.residual_df);
  os << line;
  return os.str();
}

}  // namespace dabench::perfmodel
